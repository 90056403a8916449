"""Linear Beta-Bernoulli logistic model.

The class probability is ``mu = w * theta_b + (1 - w) * sigmoid(gamma * coef.x)``
where ``w`` mixes a Beta prior mean ``theta_b`` with the logistic estimate.
Features are augmented with a trailing constant 1 so the last coefficient is
the bias.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, augment
from .losses import PlateauConstants
from .objective import BB, Link, Objective
from .priors import L2Prior

W_MIN, W_MAX = 1e-4, 1.0 - 1e-4
THETA_MIN, THETA_MAX = 1e-6, 1.0 - 1e-6
RATE_MAX = 1.0 - 1e-6


@dataclass(frozen=True)
class BBHyper:
    """Beta-Bernoulli hyper-parameters in the (w, theta_b) view plus sharpness.

    The pseudo-count view ``(alpha, beta, n)`` is kept alongside; when built
    from ``(w, theta_b)`` the counts are normalized so ``alpha + beta + n = 1``.
    """

    w: float
    theta_b: float
    gamma: float = 1.0
    counts: tuple[float, float, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.w < 1.0):
            raise ValueError(f"mixing weight w must lie in [0, 1), got {self.w}")
        if not (0.0 <= self.theta_b <= 1.0):
            raise ValueError(f"theta_b must lie in [0, 1], got {self.theta_b}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.counts is None:
            total = 1.0
            object.__setattr__(self, "counts", (self.w * self.theta_b * total,
                                                self.w * (1.0 - self.theta_b) * total,
                                                (1.0 - self.w) * total))

    @classmethod
    def from_counts(cls, alpha: float, beta: float, n: float, gamma: float = 1.0) -> "BBHyper":
        if alpha <= 0 or beta <= 0 or n <= 0:
            raise ValueError(f"pseudo-counts must be positive, got ({alpha}, {beta}, {n})")
        w = (alpha + beta) / (alpha + beta + n)
        return cls(w, alpha / (alpha + beta), gamma, (float(alpha), float(beta), float(n)))

    @classmethod
    def from_mixing(cls, w: float, theta_b: float, gamma: float = 1.0) -> "BBHyper":
        return cls(float(w), float(theta_b), gamma)

    @classmethod
    def empirical(cls, y, gamma: float = 1.0) -> "BBHyper":
        """Counts of positives, negatives and the number of examples."""
        y = np.asarray(y)
        pos = int(np.count_nonzero(y == 1))
        return cls.from_counts(pos, y.size - pos, y.size, gamma)

    @classmethod
    def weak(cls, gamma: float = 1.0) -> "BBHyper":
        """alpha = beta = 1, n = 100."""
        return cls.from_counts(1.0, 1.0, 100.0, gamma)

    @classmethod
    def logistic(cls) -> "BBHyper":
        """w = 0, gamma = 1: plain logistic regression."""
        return cls(0.0, 0.5, 1.0, (0.0, 0.0, 1.0))

    @property
    def alpha(self) -> float:
        return self.counts[0]

    @property
    def beta(self) -> float:
        return self.counts[1]

    @property
    def n(self) -> float:
        return self.counts[2]

    @property
    def a(self) -> float:
        return self.w * self.theta_b

    @property
    def b(self) -> float:
        return 1.0 - self.w

    @property
    def plateau(self) -> PlateauConstants:
        return PlateauConstants(self.a, self.b)

    def link(self) -> Link:
        return Link(BB, self.a, self.b, self.gamma)

    def with_gamma(self, gamma: float) -> "BBHyper":
        return BBHyper(self.w, self.theta_b, float(gamma), self.counts)

    def with_mixing(self, w: float, theta_b: float) -> "BBHyper":
        return BBHyper(float(w), float(theta_b), self.gamma)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "n": self.n,
                "w": self.w, "theta_B": self.theta_b, "gamma": self.gamma}

    @classmethod
    def from_json(cls, obj: dict) -> "BBHyper":
        return cls(obj["w"], obj["theta_B"], obj["gamma"], (obj["alpha"], obj["beta"], obj["n"]))


@dataclass
class LinearModel:
    """Weights over augmented features; ``weights[-1]`` is the bias."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")

    @classmethod
    def zeros(cls, d: int) -> "LinearModel":
        return cls(np.zeros(d + 1))

    @property
    def d(self) -> int:
        return self.weights.size - 1

    def design(self, X):
        """Augment raw rows of width d; already-augmented rows pass through."""
        X = _rows(X)
        if X.shape[1] == self.d:
            return augment(X)
        if X.shape[1] == self.d + 1:
            return X
        raise ValueError(f"feature width {X.shape[1]} does not match model dimension {self.d}")

    def decision(self, X) -> np.ndarray:
        """Raw scores ``coef.x`` (before gamma)."""
        return np.asarray(self.design(X) @ self.weights).ravel()

    def to_json(self, hyper: BBHyper | None = None, **extra) -> dict:
        out = {"weights": self.weights.tolist()}
        if hyper is not None:
            out["hyper"] = hyper.to_json()
        out.update(extra)
        return out

    def dumps(self, hyper: BBHyper | None = None, **extra) -> str:
        return json.dumps(self.to_json(hyper, **extra))

    @staticmethod
    def loads(text: str) -> tuple["LinearModel", BBHyper | None]:
        obj = json.loads(text)
        hyper = BBHyper.from_json(obj["hyper"]) if "hyper" in obj else None
        return LinearModel(np.asarray(obj["weights"], dtype=float)), hyper


def _rows(X):
    if hasattr(X, "tocsr"):
        return X.tocsr()
    X = np.asarray(X, dtype=float)
    return X.reshape(1, -1) if X.ndim == 1 else X


def _log_sigmoid(t):
    return -np.logaddexp(0.0, -t)


def mu_bbgamma(model: LinearModel, X, hyper: BBHyper) -> np.ndarray:
    """Class-1 probability for each row of ``X`` (scalar for a single vector)."""
    eta = hyper.gamma * model.decision(X)
    mu = hyper.a + hyper.b * np.exp(_log_sigmoid(eta))
    return mu if np.ndim(X) != 1 else float(mu[0])


def objective_for(data: Dataset, hyper: BBHyper, l2: float = 0.0, prior=None) -> Objective:
    """Penalized log-likelihood of ``data`` as a function of augmented weights."""
    return Objective(augment(data.X), data.y, hyper.link(), prior if prior is not None else L2Prior(l2))


def log_likelihood(data: Dataset, model: LinearModel, hyper: BBHyper, l2: float = 0.0) -> float:
    """``sum_i y log mu + (1 - y) log(1 - mu) - (l2 / 2) ||weights||^2``.

    Evaluated in log space, so no probability clamping is needed.
    """
    return objective_for(data, hyper, l2).value(model.weights)


def grad_weights(data: Dataset, model: LinearModel, hyper: BBHyper, l2: float = 0.0) -> np.ndarray:
    return objective_for(data, hyper, l2).grad(model.weights)


def _residual_parts(data: Dataset, model: LinearModel, hyper: BBHyper):
    s = model.decision(data.X)
    eta = hyper.gamma * s
    log_sig = _log_sigmoid(eta)
    log_sig_neg = _log_sigmoid(-eta)
    with np.errstate(divide="ignore"):
        log_a = np.log(hyper.a) if hyper.a > 0 else -np.inf
        log_ab = np.log(hyper.a + hyper.b)
        log_c = np.log(1.0 - hyper.a - hyper.b) if hyper.a + hyper.b < 1 else -np.inf
        log_1a = np.log(1.0 - hyper.a)
    log_mu = np.logaddexp(log_a, log_ab + eta) + log_sig_neg
    log_1mu = np.logaddexp(log_c, log_1a - eta) + log_sig
    y = data.y.astype(float)
    # d log p / d mu
    r = y * np.exp(-log_mu) - (1.0 - y) * np.exp(-log_1mu)
    return s, np.exp(log_sig), np.exp(log_sig + log_sig_neg), r


def grad_hyper(data: Dataset, model: LinearModel, hyper: BBHyper) -> tuple[float, float, float]:
    """Partials of the unpenalized log-likelihood in ``(w, theta_b, gamma)``."""
    s, sig, dsig, r = _residual_parts(data, model, hyper)
    d_w = float(np.sum(r * (hyper.theta_b - sig)))
    d_theta = float(hyper.w * np.sum(r))
    d_gamma = float(np.sum(r * hyper.b * dsig * s))
    return d_w, d_theta, d_gamma


def asymptotic_init(tpr: float, tnr: float) -> tuple[float, float]:
    """Mixing weight and prior mean that put the plateaus at the observed rates.

    Large-gamma probabilities saturate at ``a + b`` for positives and ``a`` for
    negatives; equating ``a + b = TPR`` and ``1 - a = TNR`` gives
    ``w = 2 - (TPR + TNR)`` and ``theta_b = (1 - TNR) / w``.
    """
    tpr = min(max(float(tpr), 0.0), RATE_MAX)
    tnr = min(max(float(tnr), 0.0), RATE_MAX)
    w = 2.0 - (tpr + tnr)
    theta = (1.0 - tnr) / w
    return min(max(w, W_MIN), W_MAX), min(max(theta, THETA_MIN), THETA_MAX)


def predict(model: LinearModel, X, hyper: BBHyper) -> tuple[np.ndarray, np.ndarray]:
    """Labels (1 iff ``coef.x >= 0``) and class-1 probabilities."""
    s = model.decision(X)
    mu = hyper.a + hyper.b * np.exp(_log_sigmoid(hyper.gamma * s))
    return (s >= 0).astype(np.int8), mu


def rates(labels, y) -> tuple[float, float]:
    """Training TPR and TNR of hard labels (0.5 when a class is absent)."""
    labels = np.asarray(labels)
    y = np.asarray(y)
    pos, neg = y == 1, y == 0
    tpr = float(np.mean(labels[pos] == 1)) if pos.any() else 0.5
    tnr = float(np.mean(labels[neg] == 0)) if neg.any() else 0.5
    return tpr, tnr

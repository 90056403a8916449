"""Scalar loss functions of the margin ``z = t * w.x`` and their derivatives.

All functions accept scalars or arrays and return numpy values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"
    ZERO_ONE = "zero_one"
    SIGMOID = "sigmoid"
    GEN_LOGISTIC = "gen_logistic"
    BETA_BERNOULLI = "bbgamma"

    @classmethod
    def parse(cls, name: str) -> "LossKind":
        aliases = {"log": cls.LOGISTIC, "01": cls.ZERO_ONE, "sig": cls.SIGMOID,
                   "glog": cls.GEN_LOGISTIC, "bb": cls.BETA_BERNOULLI}
        key = name.lower().replace("-", "_")
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class PlateauConstants:
    """Probability floor ``a`` and span ``b`` of the Beta-Bernoulli link."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a >= 0.0):
            raise ValueError(f"plateau floor a must be >= 0, got {self.a}")
        if not (self.b > 0.0):
            raise ValueError(f"plateau span b must be > 0, got {self.b}")
        if self.a + self.b > 1.0 + 1e-12:
            raise ValueError(f"a + b must not exceed 1, got {self.a + self.b}")

    @classmethod
    def from_mixing(cls, w: float, theta_b: float) -> "PlateauConstants":
        return cls(w * theta_b, 1.0 - w)

    def complement(self) -> "PlateauConstants":
        """Constants of the negative class seen as a function of the margin."""
        return PlateauConstants(max(1.0 - self.a - self.b, 0.0), self.b)


def _log(v: float) -> float:
    return float(np.log(v)) if v > 0 else -np.inf


def _bb_plateau(plateau: PlateauConstants | None, target: int) -> PlateauConstants:
    if plateau is None:
        raise ValueError("Beta-Bernoulli loss needs plateau constants")
    if target not in (1, -1):
        raise ValueError(f"target must be +1 or -1, got {target}")
    return plateau if target == 1 else plateau.complement()


def eval_loss(kind: LossKind, z, gamma: float = 1.0,
              plateau: PlateauConstants | None = None, target: int = 1):
    """Loss value at margin ``z``.

    For the Beta-Bernoulli kind with ``target=-1`` the margin already carries
    the sign, so the loss is the positive-class form with floor ``1 - a - b``.
    """
    z = np.asarray(z, dtype=float)
    if kind in (LossKind.SIGMOID, LossKind.GEN_LOGISTIC, LossKind.BETA_BERNOULLI) and not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if kind is LossKind.LOGISTIC:
        return np.logaddexp(0.0, -z)
    if kind is LossKind.HINGE:
        return np.maximum(0.0, 1.0 - z)
    if kind is LossKind.ZERO_ONE:
        return (z <= 0).astype(float)
    if kind is LossKind.SIGMOID:
        return np.exp(-np.logaddexp(0.0, gamma * z))
    if kind is LossKind.GEN_LOGISTIC:
        return np.logaddexp(0.0, gamma * (1.0 - z)) / gamma
    p = _bb_plateau(plateau, target)
    t = gamma * z
    # right of the midpoint write mu = (a + b) - b * sigmoid(-t) so nothing cancels
    sig_neg = np.exp(-np.logaddexp(0.0, np.abs(t)))
    right = -_log(p.a + p.b) - np.log1p(-p.b * sig_neg / (p.a + p.b))
    left = -np.logaddexp(_log(p.a), _log(p.b) - np.logaddexp(0.0, -t))
    return np.where(t >= 0, right, left)


def loss_grad(kind: LossKind, z, gamma: float = 1.0,
              plateau: PlateauConstants | None = None, target: int = 1):
    """Derivative of :func:`eval_loss` in ``z`` (0 at the hinge kink and for 0-1)."""
    z = np.asarray(z, dtype=float)
    if kind is LossKind.LOGISTIC:
        return -np.exp(-np.logaddexp(0.0, z))
    if kind is LossKind.HINGE:
        return np.where(z < 1.0, -1.0, 0.0)
    if kind is LossKind.ZERO_ONE:
        return np.zeros_like(z)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if kind is LossKind.SIGMOID:
        t = gamma * z
        return -gamma * np.exp(-np.logaddexp(0.0, t) - np.logaddexp(0.0, -t))
    if kind is LossKind.GEN_LOGISTIC:
        return -np.exp(-np.logaddexp(0.0, -gamma * (1.0 - z)))
    p = _bb_plateau(plateau, target)
    t = gamma * z
    log_sig = -np.logaddexp(0.0, -t)
    log_sig_neg = -np.logaddexp(0.0, t)
    log_mu = np.logaddexp(_log(p.a), _log(p.a + p.b) + t) + log_sig_neg
    return -gamma * np.exp(_log(p.b) + log_sig + log_sig_neg - log_mu)


def zero_one_rescaling(plateau: PlateauConstants) -> tuple[float, float]:
    """Scale ``s`` and shift ``c`` mapping the BB loss range onto [0, 1].

    Only meaningful for symmetric priors, where both classes share the floor.
    """
    c = -np.log(plateau.a + plateau.b)
    top = -np.log(plateau.a) if plateau.a > 0 else np.inf
    return 1.0 / (top - c), float(c)


def loss_curves(kind: LossKind, zs, gammas, plateau: PlateauConstants | None = None,
                target: int = 1):
    """Yield ``(gamma, z, loss)`` rows for plotting."""
    zs = np.asarray(zs, dtype=float)
    for g in gammas:
        vals = eval_loss(kind, zs, g, plateau, target)
        for z, v in zip(zs, vals):
            yield float(g), float(z), float(v)

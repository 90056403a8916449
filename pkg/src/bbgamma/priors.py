"""Coefficient priors: L2 (Gaussian) and the Gauss-Laplace mixture.

Each prior exposes ``kernel_args()`` returning the ``(kind, params)`` pair the
compiled objective understands, so the hot loops never call back into Python.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _core_py

SIGMA_FLOOR = 1e-6
LAPLACE_FLOOR = 1e-8
GAUSS, LAPLACE = 0, 1


@dataclass(frozen=True)
class L2Prior:
    """Gaussian prior, log density ``-(lam / 2) * ||c||^2`` up to a constant."""

    lam: float = 0.0

    def __post_init__(self):
        if not (self.lam >= 0.0 and np.isfinite(self.lam)):
            raise ValueError(f"L2 weight must be finite and >= 0, got {self.lam}")

    def kernel_args(self) -> tuple[int, np.ndarray]:
        return 0, np.array([self.lam], dtype=float)

    def to_json(self) -> dict:
        return {"kind": "l2", "lam": self.lam}


@dataclass(frozen=True)
class MixturePrior:
    """Per-coefficient mixture ``pi_g N(0, sigma_g^2) + pi_l Laplace(0, b_l)``.

    ``assign`` holds the hard cluster tag of every coefficient (``GAUSS`` or
    ``LAPLACE``) after the last E-step; it is ``None`` before any update.
    """

    pi_g: float = 0.5
    sigma_g: float = 1.0
    pi_l: float = 0.5
    b_l: float = 0.1
    assign: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.sigma_g > 0 and self.b_l > 0 and np.isfinite(self.sigma_g) and np.isfinite(self.b_l)):
            raise ValueError(f"mixture scales must be positive, got sigma_g={self.sigma_g}, b_l={self.b_l}")
        if self.pi_g < 0 or self.pi_l < 0 or abs(self.pi_g + self.pi_l - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must be >= 0 and sum to 1, got {self.pi_g}, {self.pi_l}")

    @classmethod
    def initial(cls, coeffs) -> "MixturePrior":
        """50/50 start with sigma_g = std(c) and b_l = 0.1 * mean|c|, then one E-step."""
        c = np.asarray(coeffs, dtype=float)
        sigma = max(float(np.std(c)), SIGMA_FLOOR)
        b = max(0.1 * float(np.mean(np.abs(c))), LAPLACE_FLOOR)
        prior = cls(0.5, sigma, 0.5, b)
        return replace(prior, assign=prior.posterior_assign(c))

    def kernel_args(self) -> tuple[int, np.ndarray]:
        return 1, np.array([self.pi_g, self.sigma_g, self.pi_l, self.b_l], dtype=float)

    def component_logs(self, coeffs) -> tuple[np.ndarray, np.ndarray]:
        """Log of ``pi_c * density_c(c_j)`` for both components."""
        return _core_py._mixture_logs(np.asarray(coeffs, dtype=float), self.kernel_args()[1])

    def posterior_assign(self, coeffs) -> np.ndarray:
        """Hard E-step; ties go to the Gaussian component."""
        lg, ll = self.component_logs(coeffs)
        return np.where(ll > lg, LAPLACE, GAUSS).astype(np.int8)

    def to_json(self) -> dict:
        out = {"kind": "mixture", "pi_g": self.pi_g, "sigma_g": self.sigma_g,
               "pi_l": self.pi_l, "b_l": self.b_l}
        if self.assign is not None:
            out["assign"] = self.assign.astype(int).tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MixturePrior":
        assign = obj.get("assign")
        return cls(obj["pi_g"], obj["sigma_g"], obj["pi_l"], obj["b_l"],
                   None if assign is None else np.asarray(assign, dtype=np.int8))


Prior = L2Prior | MixturePrior


def log_prior(prior: Prior, coeffs) -> float:
    kind, params = prior.kernel_args()
    return _core_py.prior_value(np.asarray(coeffs, dtype=float), kind, params)


def grad_prior(prior: Prior, coeffs) -> np.ndarray:
    """Gradient of :func:`log_prior`; the Laplace term uses d|c|/dc = 0 at c = 0."""
    kind, params = prior.kernel_args()
    return _core_py.prior_grad(np.asarray(coeffs, dtype=float), kind, params)


def hard_em_update(coeffs, prior: MixturePrior, skip_zeros: bool = False) -> MixturePrior:
    """One hard-assignment EM step; returns a new state.

    The E-step tags each coefficient with its most probable component. The
    M-step sets mixing weights to the tag fractions, ``sigma_g`` to the
    zero-mean RMS of Gaussian members and ``b_l`` to the mean magnitude of
    Laplace members. An empty component keeps its scale and gets weight 1/N.
    With ``skip_zeros`` exact zeros (pruned coefficients) count towards the
    weights but not towards ``b_l``.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        raise ValueError("hard_em_update needs at least one coefficient")
    assign = prior.posterior_assign(c)
    n = c.size
    n_l = int(np.count_nonzero(assign == LAPLACE))
    n_g = n - n_l
    pi_g = 1.0 / n if n_g == 0 else n_g / n
    pi_l = 1.0 / n if n_l == 0 else n_l / n
    total = pi_g + pi_l
    sigma = prior.sigma_g
    if n_g:
        sigma = max(float(np.sqrt(np.mean(c[assign == GAUSS] ** 2))), SIGMA_FLOOR)
    b = prior.b_l
    lap = c[assign == LAPLACE]
    if skip_zeros:
        lap = lap[lap != 0.0]
    if lap.size:
        b = max(float(np.mean(np.abs(lap))), LAPLACE_FLOOR)
    return MixturePrior(pi_g / total, sigma, pi_l / total, b, assign)

"""Penalized log-likelihood over a fixed design matrix.

The same object serves the linear model (design = augmented features,
coefficients = weights) and the kernel model (design = Gram matrix,
coefficients = dual alphas). The optimizer maximizes :meth:`value`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from ._backend import core, fallback
from .priors import L2Prior, Prior

BB, SIGMOID, LOGISTIC = 0, 1, 2


@dataclass(frozen=True)
class Link:
    """Per-example likelihood term.

    ``kind`` is ``BB`` (log-probability under the Beta-Bernoulli link with
    floor ``a``, span ``b`` and sharpness ``gamma``), ``SIGMOID`` (negated
    sigmoid loss at sharpness ``gamma``) or ``LOGISTIC`` (plain logistic
    log-likelihood, ``a``/``b``/``gamma`` ignored).
    """

    kind: int = BB
    a: float = 0.0
    b: float = 1.0
    gamma: float = 1.0

    def with_gamma(self, gamma: float) -> "Link":
        return replace(self, gamma=float(gamma))


class Objective:
    """Value, gradient, gradient ascent and probing for one (design, labels, link, prior)."""

    def __init__(self, design, y, link: Link, prior: Prior | None = None, backend=None):
        self.sparse = sp.issparse(design)
        if self.sparse:
            self.X = design.tocsr().astype(float)
            self.XT = self.X.T.tocsr()
        else:
            self.X = np.ascontiguousarray(design, dtype=float)
            self.XT = np.ascontiguousarray(self.X.T)
        self.y = np.ascontiguousarray(y, dtype=float)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"design has {self.X.shape[0]} rows, labels {self.y.shape[0]}")
        self.link = link
        self.prior = prior if prior is not None else L2Prior(0.0)
        # the compiled kernels take dense C-contiguous arrays only
        self.backend = fallback if self.sparse else (backend or core)
        self.evaluations = 0

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def _args(self):
        pk, params = self.prior.kernel_args()
        lk = self.link
        return lk.kind, lk.a, lk.b, lk.gamma, pk, params

    def with_link(self, link: Link) -> "Objective":
        return self._clone(link=link)

    def with_gamma(self, gamma: float) -> "Objective":
        return self._clone(link=self.link.with_gamma(gamma))

    def with_prior(self, prior: Prior) -> "Objective":
        return self._clone(prior=prior)

    def restrict(self, columns) -> "Objective":
        """The same objective over a subset of design columns (others held at 0)."""
        obj = self._clone()
        if self.sparse:
            obj.X = self.X[:, columns].tocsr()
            obj.XT = obj.X.T.tocsr()
        else:
            obj.X = np.ascontiguousarray(self.X[:, columns])
            obj.XT = np.ascontiguousarray(obj.X.T)
        return obj

    def _clone(self, link=None, prior=None) -> "Objective":
        obj = object.__new__(Objective)
        obj.__dict__.update(self.__dict__)
        obj.link = link if link is not None else self.link
        obj.prior = prior if prior is not None else self.prior
        obj.evaluations = 0
        return obj

    def _coef(self, coef) -> np.ndarray:
        c = np.ascontiguousarray(coef, dtype=float)
        if c.shape != (self.dim,):
            raise ValueError(f"coefficient vector has shape {c.shape}, expected ({self.dim},)")
        return c

    def margins(self, coef) -> np.ndarray:
        return np.asarray(self.X @ self._coef(coef)).ravel()

    def value_grad(self, coef) -> tuple[float, np.ndarray]:
        self.evaluations += 1
        return self.backend.objective_value_grad(self.X, self.y, self._coef(coef), *self._args())

    def value(self, coef) -> float:
        return self.value_grad(coef)[0]

    def grad(self, coef) -> np.ndarray:
        return self.value_grad(coef)[1]

    def ascend(self, coef, rate_max, rate_min, rate_factor, eps_l, eps_g, max_iter):
        """In-place fixed-rate gradient ascent; returns (value, iterations, accepted)."""
        if coef.dtype != np.float64 or not coef.flags.c_contiguous or coef.shape != (self.dim,):
            raise ValueError("coef must be a contiguous float64 vector of the design width")
        return self.backend.gradient_ascent(self.X, self.y, coef, *self._args(), rate_max,
                                            rate_min, rate_factor, eps_l, eps_g, int(max_iter))

    def probe(self, coef, steps, eps_l):
        """First (coordinate, step index, gain) whose single-coordinate move gains >= eps_l."""
        coef = self._coef(coef)
        m = np.ascontiguousarray(self.margins(coef))
        return self.backend.probe_pass(self.XT, m, self.y, coef, *self._args(),
                                       np.ascontiguousarray(steps, dtype=float), eps_l)

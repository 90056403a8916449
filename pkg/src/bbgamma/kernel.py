"""Kernel Beta-Bernoulli classification over an RBF Gram matrix.

The discriminant is ``f(x) = sum_j alpha_j K(x, x_j)`` with no intercept, so
the linear objective machinery applies with the Gram matrix as the design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import core
from .data import Dataset
from .model import BBHyper
from .objective import Objective
from .priors import L2Prior, Prior


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel ``exp(-||x - x'||^2 / (2 sigma^2))``."""

    sigma: float
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel {self.kind!r}")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"kernel bandwidth must be positive, got {self.sigma}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


def _dense(X) -> np.ndarray:
    X = X.toarray() if hasattr(X, "toarray") else np.asarray(X, dtype=float)
    X = np.ascontiguousarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("kernel inputs must be finite")
    return X


def kernel_matrix(A, B, spec: KernelSpec) -> np.ndarray:
    """``K[i, j] = k(A_i, B_j)``."""
    return np.asarray(core.rbf_gram(_dense(A), _dense(B), spec.sigma))


def gram(data: Dataset | np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Symmetric Gram matrix over the rows of ``data`` (diagonal exactly 1)."""
    X = data.X if isinstance(data, Dataset) else data
    X = _dense(X)
    if X.shape[0] < 1:
        raise ValueError("gram needs at least one row")
    G = kernel_matrix(X, X, spec)
    G = 0.5 * (G + G.T)
    np.fill_diagonal(G, 1.0)
    return G


def median_distance(X, max_rows: int = 1000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance (on a row subsample for large inputs)."""
    X = _dense(X)
    if X.shape[0] > max_rows:
        X = X[np.random.default_rng(seed).choice(X.shape[0], max_rows, replace=False)]
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    iu = np.triu_indices(X.shape[0], k=1)
    dist = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(dist)) if dist.size else 1.0
    return med if med > 0 else 1.0


@dataclass
class KernelModel:
    """Dual coefficients over retained training inputs."""

    alphas: np.ndarray
    train_inputs: np.ndarray
    spec: KernelSpec
    train_ref: dict | None = field(default=None)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float).ravel()
        self.train_inputs = _dense(self.train_inputs)
        if self.alphas.size != self.train_inputs.shape[0]:
            raise ValueError(f"{self.alphas.size} alphas for {self.train_inputs.shape[0]} inputs")

    def kernel_rows(self, X) -> np.ndarray:
        X = _dense(X)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return kernel_matrix(X, self.train_inputs, self.spec)

    def decision(self, X) -> np.ndarray:
        return self.kernel_rows(X) @ self.alphas

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) >= 0).astype(np.int8)

    def to_json(self, hyper: BBHyper | None = None) -> dict:
        """Inputs are referenced by ``train_ref`` rather than copied when it is set."""
        out = {"alphas": self.alphas.tolist(), "spec": self.spec.to_json()}
        if self.train_ref is not None:
            out["train_inputs_ref"] = self.train_ref
        else:
            out["train_inputs"] = self.train_inputs.tolist()
        if hyper is not None:
            out["hyper"] = hyper.to_json()
        return out


def mu_kbb(model: KernelModel, kvec, hyper: BBHyper):
    """Class-1 probability given kernel values ``k(x)`` against the training inputs."""
    kvec = np.asarray(kvec, dtype=float)
    if kvec.shape[-1] != model.alphas.size:
        raise ValueError(f"kernel vector has length {kvec.shape[-1]}, expected {model.alphas.size}")
    eta = hyper.gamma * (kvec @ model.alphas)
    return hyper.a + hyper.b * np.exp(-np.logaddexp(0.0, -eta))


def kernel_objective(G: np.ndarray, y, hyper: BBHyper, prior: Prior | None = None) -> Objective:
    return Objective(G, y, hyper.link(), prior if prior is not None else L2Prior(0.0))


def grad_alphas(data: Dataset, model: KernelModel, hyper: BBHyper, prior: Prior | None = None,
                G: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the penalized kernel log-likelihood in the dual coefficients."""
    if G is None:
        G = gram(data, model.spec)
    return kernel_objective(G, data.y, hyper, prior).grad(model.alphas)


def support_count(alphas, tau: float = 1e-4) -> int:
    """Number of coefficients above ``tau`` times the largest magnitude."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    mag = np.abs(np.asarray(alphas, dtype=float))
    top = float(mag.max()) if mag.size else 0.0
    if top == 0.0:
        return 0
    return int(np.count_nonzero(mag > tau * top))

"""Annealed smooth 0-1 optimization: gradient ascent plus radius-R coordinate probing.

The outer loop raises the sharpness ``gamma`` geometrically. At each stage the
range optimizer alternates a fixed-rate gradient ascent with a 1-D grid probe
of every coordinate, restarting the ascent whenever a probe gains at least
``eps_L``. All routines maximize the penalized log-likelihood.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .data import Dataset
from .model import BBHyper, LinearModel, objective_for
from .objective import Objective
from .priors import GAUSS, LAPLACE, L2Prior, MixturePrior, Prior, hard_em_update


@dataclass(frozen=True)
class SlaConfig:
    """Constants of the annealing schedule, probe grid and gradient ascent.

    ``max_iter`` caps gradient steps per ascent, ``max_probe_rounds`` caps
    accepted probes per range optimization and ``sparse_cap`` caps the
    hard-EM loop of the sparse variant.
    """

    R0: float = 8.0
    eps_S0: float = 0.2
    gamma_min: float = 2.0
    gamma_max: float = 200.0
    r_gamma: float = 10.0
    r_R: float = 0.5
    r_eps: float = 0.5
    rG_max: float = 1.0
    rG_min: float = 1e-5
    r_G: float = 0.1
    eps_L: float = 1e-6
    eps_G: float = 1e-6
    max_iter: int = 1000
    max_probe_rounds: int = 50
    sparse_cap: int = 50

    def __post_init__(self):
        positive = ("R0", "eps_S0", "gamma_min", "gamma_max", "rG_max", "rG_min", "eps_L", "eps_G")
        for name in positive:
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not self.r_gamma > 1:
            raise ValueError(f"r_gamma must exceed 1, got {self.r_gamma}")
        for name in ("r_R", "r_eps", "r_G"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.gamma_min > self.gamma_max:
            raise ValueError(f"gamma_min {self.gamma_min} exceeds gamma_max {self.gamma_max}")
        if self.eps_S0 > self.R0:
            raise ValueError("initial grid spacing exceeds the probe radius")
        if self.max_iter < 1 or self.max_probe_rounds < 0 or self.sparse_cap < 1:
            raise ValueError("iteration caps must be positive")

    def schedule(self) -> list[float]:
        """Geometric sharpness stages ``gamma_min * r_gamma**k <= gamma_max``."""
        out, k = [], 0
        while True:
            g = self.gamma_min * self.r_gamma ** k
            if g > self.gamma_max * (1 + 1e-12):
                return out
            out.append(g)
            k += 1

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SlaConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown SlaConfig keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "SlaConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class StageRecord:
    gamma: float
    radius: float
    spacing: float
    objective: float
    train_01: int
    probes: int
    gd_steps: int
    em_passes: int = 0


@dataclass
class FitReport:
    """Result of an annealed fit: final coefficients and the per-stage trajectory."""

    coef: np.ndarray
    trajectory: list[StageRecord] = field(default_factory=list)
    probes_accepted: int = 0
    wall_clock: float = 0.0
    seed: int = 0
    hyper: BBHyper | None = None
    lam: float | None = None
    config: SlaConfig | None = None
    prior: Prior | None = None

    @property
    def gammas(self) -> list[float]:
        return [r.gamma for r in self.trajectory]

    def model(self) -> LinearModel:
        return LinearModel(self.coef)

    def to_json(self) -> dict:
        out = {
            "coef": self.coef.tolist(),
            "trajectory": [asdict(r) for r in self.trajectory],
            "probes_accepted": self.probes_accepted,
            "wall_clock": self.wall_clock,
            "seed": self.seed,
        }
        if self.hyper is not None:
            out["hyper"] = self.hyper.to_json()
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.config is not None:
            out["config"] = self.config.to_json()
        if self.prior is not None:
            out["mixture_prior" if isinstance(self.prior, MixturePrior) else "prior"] = self.prior.to_json()
        return out


# -- generic fallbacks for objectives that only expose value_grad -------------

def _ascend_generic(objective, coef, cfg: SlaConfig) -> tuple[float, int]:
    f, grad = objective.value_grad(coef)
    if not np.isfinite(f):
        raise FloatingPointError("non-finite objective at start")
    rate, it = cfg.rG_max, 0
    while it < cfg.max_iter and rate >= cfg.rG_min and np.max(np.abs(grad), initial=0.0) >= cfg.eps_G:
        it += 1
        cand = coef + rate * grad
        fc, gc = objective.value_grad(cand)
        if fc > f:
            coef[:] = cand
            gain, f, grad = fc - f, fc, gc
            if gain < cfg.eps_L:
                break
        else:
            rate *= cfg.r_G
    return f, it


def _probe_generic(objective, coef, steps, eps_l):
    base = objective.value(coef)
    for i in range(coef.size):
        for k, s in enumerate(steps):
            cand = coef.copy()
            cand[i] += s
            gain = objective.value(cand) - base
            if gain >= eps_l:
                return i, k, gain
    return -1, -1, 0.0


def _ascend(objective, coef, cfg: SlaConfig) -> tuple[float, int]:
    if isinstance(objective, Objective):
        f, it, _ = objective.ascend(coef, cfg.rG_max, cfg.rG_min, cfg.r_G, cfg.eps_L, cfg.eps_G, cfg.max_iter)
        return f, it
    return _ascend_generic(objective, coef, cfg)


def _probe(objective, coef, steps, eps_l):
    if isinstance(objective, Objective):
        return objective.probe(coef, steps, eps_l)
    return _probe_generic(objective, coef, steps, eps_l)


def _at_gamma(objective, gamma):
    return objective.with_gamma(gamma) if gamma is not None and hasattr(objective, "with_gamma") else objective


# -- public operations --------------------------------------------------------

def vanilla_grad_desc(objective, start, cfg: SlaConfig) -> np.ndarray:
    """Fixed-rate gradient ascent from ``start``; the rate shrinks by ``r_G`` on failure.

    Stops when the rate falls below ``rG_min``, the gradient max-norm drops
    below ``eps_G`` or an accepted step gains less than ``eps_L``.
    """
    coef = np.array(start, dtype=float)
    _ascend(objective, coef, cfg)
    return coef


def probe_steps(spacing: float, radius: float) -> np.ndarray:
    """``spacing, -spacing, 2 spacing, -2 spacing, ..., radius, -radius``."""
    if not (spacing > 0 and radius > 0):
        raise ValueError("probe spacing and radius must be positive")
    if spacing > radius * (1 + 1e-12):
        raise ValueError(f"probe spacing {spacing} exceeds radius {radius}")
    count = int(math.floor(radius / spacing + 1e-9))
    mags = [k * spacing for k in range(1, count + 1)]
    if radius - mags[-1] > 1e-12 * radius:
        mags.append(radius)
    return np.array([s for m in mags for s in (m, -m)])


def _range_optimize(objective, coef, radius, spacing, cfg: SlaConfig):
    steps = probe_steps(spacing, radius)
    gd_steps = probes = 0
    while True:
        f, it = _ascend(objective, coef, cfg)
        gd_steps += it
        if probes >= cfg.max_probe_rounds:
            break
        i, k, _ = _probe(objective, coef, steps, cfg.eps_L)
        if i < 0:
            break
        coef[i] += steps[k]
        probes += 1
    return objective.value(coef), gd_steps, probes


def grad_desc_in_range(objective, start, gamma, radius, spacing, cfg: SlaConfig) -> np.ndarray:
    """Alternate gradient ascent and coordinate probing until no probe gains ``eps_L``.

    Probes scan coordinates in order and, per coordinate, the steps of
    :func:`probe_steps`; the first gain wins and gradient ascent restarts.
    """
    coef = np.array(start, dtype=float)
    _range_optimize(_at_gamma(objective, gamma), coef, radius, spacing, cfg)
    return coef


def _train_01(objective, coef) -> int:
    if isinstance(objective, Objective):
        m = objective.margins(coef)
        return int(np.count_nonzero((m >= 0).astype(int) != objective.y.astype(int)))
    return -1


def anneal(objective, start, cfg: SlaConfig, seed: int = 0, sparse_prior: MixturePrior | None = None,
           freeze_prior: bool = False, prune: bool = False) -> FitReport:
    """Run the sharpness schedule on any objective supporting ``with_gamma``.

    With ``sparse_prior`` each stage uses the sparse range optimizer and the
    mixture state is carried across stages.
    """
    t0 = time.perf_counter()
    coef = np.array(start, dtype=float)
    radius, spacing = cfg.R0, cfg.eps_S0
    report = FitReport(coef, seed=seed, config=cfg)
    prior = sparse_prior
    for gamma in cfg.schedule():
        obj = _at_gamma(objective, gamma)
        passes = 0
        try:
            if prior is None:
                val, gd, probes = _range_optimize(obj, coef, radius, spacing, cfg)
            else:
                val, gd, probes, passes, prior = _range_optimize_sparse(obj, coef, radius, spacing,
                                                                       cfg, prior, freeze_prior, prune)
        except FloatingPointError as exc:
            raise FloatingPointError(f"annealing stage gamma={gamma:g}: {exc}") from exc
        if not np.isfinite(val):
            raise FloatingPointError(f"annealing stage gamma={gamma:g}: non-finite objective")
        report.trajectory.append(StageRecord(gamma, radius, spacing, float(val), _train_01(obj, coef),
                                             probes, gd, passes))
        report.probes_accepted += probes
        radius *= cfg.r_R
        spacing *= cfg.r_eps
    report.coef = coef
    report.prior = prior
    report.wall_clock = time.perf_counter() - t0
    return report


def find_sla_solution(data: Dataset, model0: LinearModel | None, hyper: BBHyper,
                      prior: Prior | float, cfg: SlaConfig, seed: int = 0) -> FitReport:
    """Annealed fit of a linear Beta-Bernoulli model; ``prior`` may be an L2 weight."""
    if not isinstance(prior, (L2Prior, MixturePrior)):
        prior = L2Prior(float(prior))
    data.require_both_classes()
    start = model0.weights if model0 is not None else np.zeros(data.d + 1)
    objective = objective_for(data, hyper, prior=prior)
    report = anneal(objective, start, cfg, seed)
    report.hyper = hyper.with_gamma(cfg.schedule()[-1])
    report.lam = prior.lam if isinstance(prior, L2Prior) else None
    report.prior = prior
    return report


def _ascend_active(objective: Objective, coef, cfg: SlaConfig, active) -> tuple[float, int]:
    if active is None or active.all():
        return _ascend(objective, coef, cfg)
    coef[~active] = 0.0
    if not active.any():
        return objective.value(coef), 0
    part = np.ascontiguousarray(coef[active])
    f, it = _ascend(objective.restrict(active), part, cfg)
    coef[active] = part
    return f, it


def _range_optimize_sparse(objective: Objective, coef, radius, spacing, cfg: SlaConfig,
                           prior: MixturePrior, freeze: bool, prune: bool = False):
    steps = probe_steps(spacing, radius)
    gd_steps = probes = passes = 0
    if prior.assign is None or prior.assign.size != coef.size:
        prior = replace(prior, assign=prior.posterior_assign(coef))
    # coefficients pruned by an earlier stage stay at zero unless a probe moves them
    active = coef != 0.0 if prune else None
    while True:
        f, it = _ascend_active(objective.with_prior(prior), coef, cfg, active)
        gd_steps += it
        # sparsify: hard EM on the mixture, refitting coefficients in between
        for _ in range(cfg.sparse_cap):
            passes += 1
            if not freeze:
                prior = hard_em_update(coef, prior, skip_zeros=prune)
            _, it = _ascend_active(objective.with_prior(prior), coef, cfg, active)
            gd_steps += it
            assign = prior.posterior_assign(coef)
            changed = not np.array_equal(assign, prior.assign)
            prior = replace(prior, assign=assign)
            if not changed:
                break
        if probes >= cfg.max_probe_rounds:
            break
        i, k, _ = _probe(objective.with_prior(prior), coef, steps, cfg.eps_L)
        if i < 0:
            break
        coef[i] += steps[k]
        probes += 1
        if active is not None:
            active[i] = True
    if prune:
        coef[prior.assign == LAPLACE] = 0.0
    return objective.with_prior(prior).value(coef), gd_steps, probes, passes, prior


def grad_desc_in_range_sparse(objective: Objective, start, gamma, radius, spacing, cfg: SlaConfig,
                              prior_state: MixturePrior, freeze: bool = False, prune: bool = False):
    """Range optimization with a hard-EM sparsify stage between ascent and probing.

    ``freeze`` keeps the mixture parameters fixed (assignments still update).
    ``prune`` zeroes the Laplace-assigned coefficients when the stage ends;
    zeros found at entry stay out of the ascent unless a probe moves them,
    and the Laplace scale is estimated from the non-zero members.
    Returns ``(coefficients, mixture state)``.
    """
    coef = np.array(start, dtype=float)
    _, _, _, _, prior = _range_optimize_sparse(_at_gamma(objective, gamma), coef, radius, spacing,
                                               cfg, prior_state, freeze, prune)
    return coef, prior

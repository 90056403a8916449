"""Validation-driven tuning of the annealed optimizer and the hyper-gradient fit.

``slam_tune`` picks the L2 weight and the warm-start sharpness by k-fold
validation of plain gradient-ascent fits, then the sharpness growth factor by
grid search and the schedule endpoints by bracket search. ``fit_bblr4`` adds
gradient learning of the Beta-Bernoulli mixing weight and prior mean on top.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .data import Dataset, augment, inner_folds
from .model import (BBHyper, LinearModel, W_MAX, W_MIN, THETA_MAX, THETA_MIN, asymptotic_init,
                    grad_hyper, log_likelihood, objective_for, predict, rates)
from .objective import Objective
from .optimizer import FitReport, SlaConfig, _ascend, _range_optimize, find_sla_solution, probe_steps
from .priors import L2Prior

LAMBDA_GRID = tuple(10.0 ** k for k in range(-4, 3))
GAMMA_INIT_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)
R_GAMMA_GRID = (2.0, 5.0, 10.0)


@dataclass(frozen=True)
class SearchSpace:
    """Candidate values explored by :func:`slam_tune`.

    ``bracket`` enables the endpoint bracket search; ``gamma_cap`` bounds it.
    ``r_gamma_default`` wins ties in the growth-factor grid.
    """

    lams: tuple[float, ...] = LAMBDA_GRID
    gamma_inits: tuple[float, ...] = GAMMA_INIT_GRID
    r_gammas: tuple[float, ...] = R_GAMMA_GRID
    bracket: bool = True
    gamma_base: float = 2.0
    gamma_cap: float = 2000.0
    r_gamma_default: float = 10.0

    @classmethod
    def single(cls, lam: float, gamma_init: float = 1.0, r_gamma: float = 10.0) -> "SearchSpace":
        return cls((lam,), (gamma_init,), (r_gamma,), bracket=False, r_gamma_default=r_gamma)


class SlamResult(NamedTuple):
    model0: LinearModel
    hyper: BBHyper
    lam: float
    config: SlaConfig


HyperRule = Callable[[np.ndarray], BBHyper]


def _accuracy(coef, X_aug, y) -> int:
    return int(np.count_nonzero(((X_aug @ coef) >= 0).astype(int) == y))


class _FoldSet:
    """Inner folds with cached augmented designs."""

    def __init__(self, data: Dataset, k: int, seed: int):
        if k < 2:
            raise ValueError(f"need at least 2 folds, got {k}")
        data.require_both_classes()
        X = augment(data.X)
        self.folds = []
        for tr, va in inner_folds(data.y, k, seed):
            ytr = data.y[tr]
            if ytr.min() == ytr.max():
                raise ValueError("an inner training fold holds a single class; use fewer folds")
            self.folds.append((X[tr], ytr, X[va], data.y[va]))
        self.total = sum(f[3].size for f in self.folds)


def _warm_start(Xtr, ytr, hyper: BBHyper, lam: float, gamma0: float, cfg: SlaConfig) -> np.ndarray:
    obj = Objective(Xtr, ytr, hyper.with_gamma(gamma0).link(), L2Prior(lam))
    coef = np.zeros(Xtr.shape[1])
    _ascend(obj, coef, cfg)
    return coef


def _stage_scores(obj: Objective, start, cfg: SlaConfig, gammas, Xva, yva):
    """Run the schedule stage by stage, yielding validation hits after each stage."""
    coef = np.array(start, dtype=float)
    radius, spacing = cfg.R0, cfg.eps_S0
    for g in gammas:
        _range_optimize(obj.with_gamma(g), coef, radius, spacing, cfg)
        yield g, _accuracy(coef, Xva, yva)
        radius *= cfg.r_R
        spacing *= cfg.r_eps


def _geometric(start: float, ratio: float, cap: float) -> list[float]:
    out, g = [], start
    while g <= cap * (1 + 1e-12):
        out.append(g)
        g *= ratio
    return out


class _Schedules:
    """Lazily extended per-fold stage scores for one (gamma_min, r_gamma) pair."""

    def __init__(self, folds: _FoldSet, starts, hyper, lam, cfg, gamma_min, r_gamma, cap):
        self.gammas = _geometric(gamma_min, r_gamma, cap)
        cfg = replace(cfg, gamma_min=gamma_min, r_gamma=r_gamma)
        self.runs = [
            _stage_scores(Objective(Xtr, ytr, hyper.link(), L2Prior(lam)), s, cfg, self.gammas, Xva, yva)
            for (Xtr, ytr, Xva, yva), s in zip(folds.folds, starts)
        ]
        self.scores: list[int] = []

    def hits(self, stage: int) -> int:
        while len(self.scores) <= stage:
            self.scores.append(sum(next(run)[1] for run in self.runs))
        return self.scores[stage]

    def last_within(self, gamma_max: float) -> int:
        idx = [i for i, g in enumerate(self.gammas) if g <= gamma_max * (1 + 1e-12)]
        return idx[-1] if idx else -1


def _init_search(folds: _FoldSet, hyper, space: SearchSpace, cfg: SlaConfig):
    best = None
    for lam in sorted(space.lams):
        for g0 in sorted(space.gamma_inits):
            hits = sum(_accuracy(_warm_start(Xtr, ytr, hyper, lam, g0, cfg), Xva, yva)
                       for Xtr, ytr, Xva, yva in folds.folds)
            # strict improvement keeps the smaller lambda, then the smaller gamma
            if best is None or hits > best[0]:
                best = (hits, lam, g0)
    return best[1], best[2]


def bracket_endpoints(folds: _FoldSet, starts, hyper, lam, cfg: SlaConfig, space: SearchSpace,
                      r_gamma: float, cache: dict | None = None) -> tuple[float, float]:
    """Pick gamma_min among base/r, base, base*r, then grow gamma_max from gamma_min*r^2."""
    cache = {} if cache is None else cache

    def sched(gmin):
        key = (round(gmin, 12), r_gamma)
        if key not in cache:
            cache[key] = _Schedules(folds, starts, hyper, lam, cfg, gmin, r_gamma, space.gamma_cap)
        return cache[key]

    base = space.gamma_base
    default_max = max(cfg.gamma_max, base)
    best_min, best_hits = base, None
    for gmin in (base, base / r_gamma, base * r_gamma):
        s = sched(gmin)
        stage = s.last_within(default_max)
        if stage < 0:
            continue
        hits = s.hits(stage)
        if best_hits is None or hits > best_hits:
            best_min, best_hits = gmin, hits
    s = sched(best_min)
    stage = min(2, len(s.gammas) - 1)
    hits = s.hits(stage)
    while stage + 1 < len(s.gammas):
        nxt = s.hits(stage + 1)
        if nxt <= hits:
            break
        stage, hits = stage + 1, nxt
    return best_min, s.gammas[stage]


def slam_tune(data: Dataset, search_space: SearchSpace | None = None, cfg_template: SlaConfig | None = None,
              folds: int = 3, seed: int = 0, hyper_rule: HyperRule = BBHyper.empirical) -> SlamResult:
    """Tune lambda, warm-start gamma, r_gamma and the schedule endpoints on ``data`` only."""
    space = search_space or SearchSpace()
    cfg = cfg_template or SlaConfig()
    hyper = hyper_rule(data.y)
    fs = _FoldSet(data, folds, seed)
    lam, gamma0 = _init_search(fs, hyper, space, cfg)
    model0 = LinearModel(_warm_start(augment(data.X), data.y, hyper, lam, gamma0, cfg))
    if len(space.r_gammas) == 1 and not space.bracket:
        r = space.r_gammas[0]
        return SlamResult(model0, hyper, lam, replace(cfg, r_gamma=r))
    starts = [_warm_start(Xtr, ytr, hyper, lam, gamma0, cfg) for Xtr, ytr, _, _ in fs.folds]
    cache: dict = {}
    best_r, best_hits = None, None
    for r in sorted(space.r_gammas, key=lambda v: (v != space.r_gamma_default, v)):
        key = (round(space.gamma_base, 12), r)
        cache[key] = _Schedules(fs, starts, hyper, lam, cfg, space.gamma_base, r, space.gamma_cap)
        stage = cache[key].last_within(cfg.gamma_max)
        hits = cache[key].hits(stage)
        if best_hits is None or hits > best_hits:
            best_r, best_hits = r, hits
    gmin, gmax = cfg.gamma_min, cfg.gamma_max
    if space.bracket:
        gmin, gmax = bracket_endpoints(fs, starts, hyper, lam, cfg, space, best_r, cache)
    return SlamResult(model0, hyper, lam, replace(cfg, r_gamma=best_r, gamma_min=gmin, gamma_max=gmax))


def fit_bblr3(data: Dataset, cfg: SlaConfig | None = None, seed: int = 0, folds: int = 3,
              space: SearchSpace | None = None) -> FitReport:
    tuned = slam_tune(data, space, cfg, folds, seed)
    report = find_sla_solution(data, tuned.model0, tuned.hyper, tuned.lam, tuned.config, seed)
    return report


# -- hyper-gradient fit -------------------------------------------------------

def _project(w: float, theta: float) -> tuple[float, float]:
    return min(max(w, W_MIN), W_MAX), min(max(theta, THETA_MIN), THETA_MAX)


def hyper_ascent(data: Dataset, model: LinearModel, hyper: BBHyper, steps: int = 20,
                 gamma_bounds: tuple[float, float] = (0.5, 2000.0)) -> BBHyper:
    """Projected backtracking ascent of the training log-likelihood in (w, theta_b, gamma).

    Weights stay fixed. The step along each coordinate is scaled by the
    coordinate's feasible range so the three partials are commensurate.
    """
    current = hyper
    f = log_likelihood(data, model, current)
    rate = 0.1
    for _ in range(steps):
        dw, dt, dg = grad_hyper(data, model, current)
        norm = max(abs(dw), abs(dt), abs(dg) * current.gamma, 1e-300)
        if norm < 1e-9:
            break
        while rate > 1e-6:
            w, t = _project(current.w + rate * dw / norm, current.theta_b + rate * dt / norm)
            g = float(np.clip(current.gamma * np.exp(rate * dg * current.gamma / norm), *gamma_bounds))
            cand = BBHyper(w, t, g)
            fc = log_likelihood(data, model, cand)
            if fc > f:
                current, f = cand, fc
                rate = min(rate * 2.0, 0.5)
                break
            rate *= 0.5
        else:
            break
    return current


def fit_bblr4(data: Dataset, cfg: SlaConfig | None = None, seed: int = 0, folds: int = 3,
              alternations: int = 5, holdout: float = 0.2, space: SearchSpace | None = None,
              base: FitReport | None = None) -> FitReport:
    """Tuned annealed fit plus gradient learning of (w, theta_b, gamma) and lambda.

    The tuned fit with empirical-count hyper-parameters is the incumbent. On
    an inner stratified split, the mixing weight and prior mean are started
    from the asymptotic plateau analysis of the incumbent's training rates,
    then each alternation takes hyper-gradient steps, picks lambda among
    {lam/2, lam, 2 lam} by validation likelihood, re-brackets the schedule and
    refits. A candidate replaces the incumbent only if it is strictly more
    accurate on the held-out part; the winner is refitted on all of ``data``.
    """
    space = space or SearchSpace()
    cfg = cfg or SlaConfig()
    if base is None:
        base = fit_bblr3(data, cfg, seed, folds, space)
    lam = base.lam if base.lam is not None else 0.0
    base_cfg = base.config or cfg

    # inner split: one fold of a stratified partition is the validation part
    k = max(2, int(round(1.0 / holdout)))
    tr, va = inner_folds(data.y, k, seed + 1)[0]
    train, val = data.subset(tr), data.subset(va)
    if train.y.min() == train.y.max():
        return base
    Xva = augment(val.X)

    hyper0 = BBHyper.empirical(train.y)
    inc = find_sla_solution(train, None, hyper0, lam, base_cfg, seed)
    best_hits = _accuracy(inc.coef, Xva, val.y)
    best = None

    labels, _ = predict(inc.model(), train.X, hyper0)
    w, theta = asymptotic_init(*rates(labels, train.y))
    hyper = BBHyper(w, theta, base_cfg.schedule()[-1])
    model = inc.model()
    cur_lam, cur_cfg = lam, base_cfg
    for _ in range(alternations):
        hyper = hyper_ascent(train, model, hyper)
        # lambda by validation likelihood of a short refit
        scored = []
        for cand in sorted({cur_lam / 2, cur_lam, cur_lam * 2}):
            obj = objective_for(train, hyper, cand)
            coef = model.weights.copy()
            _ascend(obj, coef, cur_cfg)
            scored.append((log_likelihood(val, LinearModel(coef), hyper), -cand, cand))
        cur_lam = max(scored)[2]
        fs = _FoldSet(train, folds, seed) if space.bracket else None
        if fs is not None:
            starts = [_warm_start(Xtr, ytr, hyper, cur_lam, 1.0, cur_cfg) for Xtr, ytr, _, _ in fs.folds]
            gmin, gmax = bracket_endpoints(fs, starts, hyper, cur_lam, cur_cfg, space, cur_cfg.r_gamma)
            cur_cfg = replace(cur_cfg, gamma_min=gmin, gamma_max=gmax)
        rep = find_sla_solution(train, model, hyper, cur_lam, cur_cfg, seed)
        hits = _accuracy(rep.coef, Xva, val.y)
        if hits <= best_hits:
            break
        best_hits, best = hits, (hyper, cur_lam, cur_cfg)
        model = rep.model()
    if best is None:
        return base
    hyper, cur_lam, cur_cfg = best
    final = find_sla_solution(data, LinearModel(base.coef), hyper, cur_lam, cur_cfg, seed)
    final.hyper = hyper
    return final

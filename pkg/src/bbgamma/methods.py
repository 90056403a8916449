"""Registered classification methods and the cross-validation harness.

Every method is a function ``fit(train, seed) -> Fitted`` taking a
standardized training set. ``cross_validate`` standardizes each fold on its
training part only, optionally flips training labels, fits, and scores the
held-out part.
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import Dataset, SplitPlan, augment, inject_label_noise, inner_folds, make_splits, standardize
from .eval import ContingencyPair, McNemarResult, error_percent, pooled_mcnemar, zero_one_total
from .kernel import KernelModel, KernelSpec, gram, kernel_matrix, kernel_objective, median_distance, support_count
from .model import BBHyper, LinearModel
from .objective import LOGISTIC, SIGMOID, Link, Objective
from .optimizer import FitReport, SlaConfig, _ascend, anneal, find_sla_solution
from .priors import L2Prior, MixturePrior
from .slam import LAMBDA_GRID, SearchSpace, fit_bblr4, slam_tune

# plain logistic regression is convex; give it room to converge
LR_CONFIG = SlaConfig(max_iter=5000)
# the dual problem has one coordinate per training point, so probing is costly
KERNEL_CONFIG = SlaConfig(max_iter=200, max_probe_rounds=20)
KERNEL_SIGMA_FACTORS = tuple(2.0 ** k for k in range(-3, 4))
KERNEL_LAMBDA_GRID = (1e-2, 1.0, 100.0)
# tuning scores each grid cell with a probe-free annealed fit
KERNEL_TUNE_CONFIG = replace(KERNEL_CONFIG, max_probe_rounds=0)
INNER_FOLDS = 3
# sparse fits keep the mixture scales from the L2 solution (see fit_kernel)
FREEZE = True
SCALE_RATES = True

_DEFAULT = {"config": SlaConfig()}


def configure(cfg: SlaConfig | None) -> None:
    """Set the annealing constants used by the linear Beta-Bernoulli and sigmoid methods."""
    _DEFAULT["config"] = cfg if cfg is not None else SlaConfig()


def sla_config() -> SlaConfig:
    return _DEFAULT["config"]


@dataclass
class Fitted:
    """A trained predictor plus what is worth logging about it."""

    predict: Callable[[np.ndarray], np.ndarray]
    info: dict = field(default_factory=dict)
    report: FitReport | None = None
    kernel: KernelModel | None = None
    hyper: BBHyper | None = None

    def to_json(self) -> dict:
        if self.kernel is not None:
            out = self.kernel.to_json(self.hyper)
        elif self.report is not None:
            out = self.report.to_json()
        else:
            out = {}
        out["info"] = self.info
        return out


def _linear(coef: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    model = LinearModel(np.array(coef, dtype=float))
    return lambda X: (model.decision(X) >= 0).astype(np.int8)


def _tune_lam(train: Dataset, hyper: BBHyper, seed: int, cfg: SlaConfig) -> float:
    """Lambda by inner k-fold validation accuracy of plain ascent fits."""
    return slam_tune(train, SearchSpace(lams=LAMBDA_GRID, gamma_inits=(hyper.gamma,), r_gammas=(10.0,),
                                        bracket=False),
                     cfg, INNER_FOLDS, seed, hyper_rule=lambda y: hyper).lam


def fit_logistic(train: Dataset, lam: float, cfg: SlaConfig = LR_CONFIG, kind: int = LOGISTIC) -> np.ndarray:
    """Penalized logistic regression by gradient ascent from zeros.

    ``kind`` selects the backend loss; the Beta-Bernoulli kind with
    ``(a, b, gamma) = (0, 1, 1)`` is the same function.
    """
    link = Link(kind, 0.0, 1.0, 1.0)
    obj = Objective(augment(train.X), train.y, link, L2Prior(lam))
    coef = np.zeros(train.d + 1)
    _ascend(obj, coef, cfg)
    return coef


def method_lr(train: Dataset, seed: int = 0) -> Fitted:
    lam = _tune_lam(train, BBHyper.logistic(), seed, LR_CONFIG)
    coef = fit_logistic(train, lam)
    return Fitted(_linear(coef), {"lam": lam}, FitReport(coef, lam=lam, config=LR_CONFIG, seed=seed))


def method_lr_bb(train: Dataset, seed: int = 0) -> Fitted:
    """Logistic regression written as a Beta-Bernoulli model with (a, b, gamma) = (0, 1, 1)."""
    hyper = BBHyper.logistic()
    lam = _tune_lam(train, hyper, seed, LR_CONFIG)
    coef = fit_logistic(train, lam, kind=hyper.link().kind)
    return Fitted(_linear(coef), {"lam": lam}, FitReport(coef, lam=lam, config=LR_CONFIG, seed=seed, hyper=hyper))


def method_sla(train: Dataset, seed: int = 0) -> Fitted:
    """Annealed sigmoid loss started from the logistic solution."""
    lam = _tune_lam(train, BBHyper.logistic(), seed, LR_CONFIG)
    start = fit_logistic(train, lam)
    obj = Objective(augment(train.X), train.y, Link(SIGMOID, 0.0, 1.0, 1.0), L2Prior(lam))
    cfg = sla_config()
    report = anneal(obj, start, cfg, seed)
    report.lam = lam
    return Fitted(_linear(report.coef), {"lam": lam}, report)


def _bblr_fixed(train: Dataset, seed: int, rule) -> Fitted:
    """Default schedule with lambda and warm-start sharpness picked by validation."""
    cfg = sla_config()
    tuned = slam_tune(train, SearchSpace(r_gammas=(cfg.r_gamma,), bracket=False), cfg, INNER_FOLDS, seed,
                      hyper_rule=rule)
    report = find_sla_solution(train, tuned.model0, tuned.hyper, tuned.lam, tuned.config, seed)
    return Fitted(_linear(report.coef), {"lam": tuned.lam}, report, hyper=report.hyper)


def method_bblr1(train: Dataset, seed: int = 0) -> Fitted:
    return _bblr_fixed(train, seed, lambda y: BBHyper.weak())


def method_bblr2(train: Dataset, seed: int = 0) -> Fitted:
    return _bblr_fixed(train, seed, BBHyper.empirical)


_BBLR3_CACHE: dict = {}


def _bblr3_report(train: Dataset, seed: int) -> FitReport:
    """Tuned fit, memoized on the exact training rows so BBLR4 can reuse it."""
    key = (train.name, train.X.shape, train.ids.tobytes(), train.y.tobytes(), seed, sla_config())
    if key not in _BBLR3_CACHE:
        if len(_BBLR3_CACHE) > 64:
            _BBLR3_CACHE.clear()
        tuned = slam_tune(train, SearchSpace(), sla_config(), INNER_FOLDS, seed)
        _BBLR3_CACHE[key] = find_sla_solution(train, tuned.model0, tuned.hyper, tuned.lam, tuned.config, seed)
    return _BBLR3_CACHE[key]


def method_bblr3(train: Dataset, seed: int = 0) -> Fitted:
    report = _bblr3_report(train, seed)
    cfg = report.config
    info = {"lam": report.lam, "r_gamma": cfg.r_gamma, "gamma_min": cfg.gamma_min, "gamma_max": cfg.gamma_max}
    return Fitted(_linear(report.coef), info, report, hyper=report.hyper)


def method_bblr4(train: Dataset, seed: int = 0) -> Fitted:
    report = fit_bblr4(train, sla_config(), seed, INNER_FOLDS, base=_bblr3_report(train, seed))
    info = {"lam": report.lam, "hyper": report.hyper.to_json() if report.hyper else None}
    return Fitted(_linear(report.coef), info, report, hyper=report.hyper)


# -- kernel methods -------------------------------------------------------------

@dataclass(frozen=True)
class KernelTuning:
    sigma: float
    lam: float


def scaled_rates(cfg: SlaConfig, G: np.ndarray) -> SlaConfig:
    """Divide the ascent step bounds by the largest absolute row sum of ``G``.

    The row sum bounds the Gram spectral norm, which grows with the training
    size and the bandwidth; without it a broad kernel needs steps far below
    ``rG_min`` before any ascent step is accepted.
    """
    if not SCALE_RATES:
        return cfg
    s = max(1.0, float(np.abs(G).sum(axis=1).max()))
    return replace(cfg, rG_max=cfg.rG_max / s, rG_min=cfg.rG_min / s)


def warm_start_kernel(obj: Objective, n: int, cfg: SlaConfig) -> np.ndarray:
    """Gamma = 1 starting point for the annealing schedule."""
    start = np.zeros(n)
    _ascend(obj.with_gamma(1.0), start, cfg)
    return start


def tune_kernel(train: Dataset, seed: int = 0, cfg: SlaConfig = KERNEL_CONFIG,
                factors=KERNEL_SIGMA_FACTORS, lams=KERNEL_LAMBDA_GRID, hyper: BBHyper | None = None,
                anneal_cfg: SlaConfig | None = KERNEL_TUNE_CONFIG) -> KernelTuning:
    """Bandwidth (multiples of the median distance) and lambda by inner validation.

    Each cell is scored by the summed validation hits of fits that ascend at
    gamma = 1 and then follow the annealing schedule without probing (plain
    gamma = 1 fits with ``anneal_cfg=None``). Ties keep the smaller
    bandwidth, then the smaller lambda.
    """
    X = train.dense()
    med = median_distance(X, seed=seed)
    hyper = BBHyper.empirical(train.y) if hyper is None else hyper
    folds = inner_folds(train.y, INNER_FOLDS, seed)
    best = None
    for f in factors:
        spec = KernelSpec(f * med)
        G = gram(X, spec)
        for lam in sorted(lams):
            hits = 0
            for tr, va in folds:
                Gtr = np.ascontiguousarray(G[np.ix_(tr, tr)])
                obj = kernel_objective(Gtr, train.y[tr], hyper.with_gamma(1.0), L2Prior(lam))
                a = warm_start_kernel(obj, tr.size, scaled_rates(cfg, Gtr))
                if anneal_cfg is not None:
                    a = anneal(obj, a, scaled_rates(anneal_cfg, Gtr), seed).coef
                hits += int(np.count_nonzero(((G[np.ix_(va, tr)] @ a) >= 0) == (train.y[va] == 1)))
            if best is None or hits > best[0]:
                best = (hits, f * med, lam)
    return KernelTuning(best[1], best[2])


def fit_kernel(train: Dataset, tuning: KernelTuning, seed: int = 0, cfg: SlaConfig = KERNEL_CONFIG,
               sparse: bool = False, start: np.ndarray | None = None) -> tuple[KernelModel, FitReport]:
    """Annealed kernel fit; ``sparse`` anneals again under the Gauss-Laplace mixture prior."""
    train.require_both_classes()
    X = train.dense()
    spec = KernelSpec(tuning.sigma)
    G = gram(X, spec)
    cfg = scaled_rates(cfg, G)
    hyper = BBHyper.empirical(train.y)
    obj = kernel_objective(G, train.y, hyper, L2Prior(tuning.lam))
    if start is None:
        start = warm_start_kernel(obj, train.n, cfg)
        report = anneal(obj, start, cfg, seed)
    else:
        report = FitReport(np.array(start, dtype=float), config=cfg, seed=seed)
    if sparse:
        prior = MixturePrior.initial(report.coef)
        report = anneal(obj, report.coef, cfg, seed, sparse_prior=prior, prune=True, freeze_prior=FREEZE)
    report.hyper = hyper.with_gamma(cfg.schedule()[-1])
    report.lam = tuning.lam
    return KernelModel(report.coef, X, spec), report


def _kernel_fitted(model: KernelModel, report: FitReport, tuning: KernelTuning, extra=None) -> Fitted:
    info = {"sigma": tuning.sigma, "lam": tuning.lam, "support": support_count(model.alphas)}
    info.update(extra or {})
    return Fitted(model.predict, info, report, kernel=model, hyper=report.hyper)


_KERNEL_CACHE: dict = {}


def _kernel_dense(train: Dataset, seed: int) -> tuple[KernelTuning, KernelModel, FitReport]:
    """Tuned L2 kernel fit, memoized so the sparse method can start from it."""
    key = (train.name, train.X.shape, train.ids.tobytes(), train.y.tobytes(), seed)
    if key not in _KERNEL_CACHE:
        if len(_KERNEL_CACHE) > 64:
            _KERNEL_CACHE.clear()
        tuning = tune_kernel(train, seed)
        _KERNEL_CACHE[key] = (tuning, *fit_kernel(train, tuning, seed))
    return _KERNEL_CACHE[key]


def method_kbblr(train: Dataset, seed: int = 0) -> Fitted:
    tuning, model, report = _kernel_dense(train, seed)
    return _kernel_fitted(model, report, tuning)


def method_sparse_kbblr(train: Dataset, seed: int = 0) -> Fitted:
    """Sparse refit started from the L2 kernel solution; both supports are logged."""
    tuning, dense, _ = _kernel_dense(train, seed)
    model, report = fit_kernel(train, tuning, seed, sparse=True, start=dense.alphas)
    return _kernel_fitted(model, report, tuning, {"l2_support": support_count(dense.alphas)})


METHODS: dict[str, Callable[[Dataset, int], Fitted]] = {
    "lr": method_lr,
    "lr-bb": method_lr_bb,
    "sla": method_sla,
    "bblr1": method_bblr1,
    "bblr2": method_bblr2,
    "bblr3": method_bblr3,
    "bblr4": method_bblr4,
    "kbblr": method_kbblr,
    "sparse-kbblr": method_sparse_kbblr,
}


def get_method(name: str) -> Callable[[Dataset, int], Fitted]:
    try:
        return METHODS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


# -- cross-validation -----------------------------------------------------------

class SplitLeak(AssertionError):
    """A fit saw rows of its own test fold."""


@dataclass
class FoldRecord:
    method: str
    repetition: int
    fold: int
    n_test: int
    errors: int | None = None
    error_pct: float | None = None
    seconds: float = 0.0
    info: dict = field(default_factory=dict)
    failure: str | None = None
    predictions: np.ndarray | None = field(default=None, repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def to_json(self) -> dict:
        return {"method": self.method, "repetition": self.repetition, "fold": self.fold,
                "n_test": self.n_test, "errors": self.errors, "error_pct": self.error_pct,
                "seconds": round(self.seconds, 3), "info": self.info, "failure": self.failure}


@dataclass
class MethodSummary:
    method: str
    folds: list[FoldRecord]
    mean_error: float
    total_01: int
    failed: int
    versus: ContingencyPair | None = None
    mcnemar: McNemarResult | None = None

    def to_json(self) -> dict:
        out = {"method": self.method, "mean_error": self.mean_error, "total_01": self.total_01,
               "failed_folds": self.failed, "folds": [f.to_json() for f in self.folds]}
        if self.versus is not None:
            out["versus_reference"] = {"n01": self.versus.n01, "n10": self.versus.n10,
                                       "z": self.mcnemar.z, "defined": self.mcnemar.defined,
                                       "significant": self.mcnemar.significant}
        return out


@dataclass
class CVResult:
    dataset: str
    plan: SplitPlan
    noise_rate: float
    reference: str | None
    methods: dict[str, MethodSummary]

    def to_json(self) -> dict:
        return {"dataset": self.dataset, "plan": vars(self.plan) if not hasattr(self.plan, "__dataclass_fields__")
                else {k: getattr(self.plan, k) for k in self.plan.__dataclass_fields__},
                "noise_rate": self.noise_rate, "reference": self.reference,
                "methods": {k: v.to_json() for k, v in self.methods.items()}}


def fold_seed(plan: SplitPlan, index: int) -> int:
    return int(plan.seed) * 1000 + index


def _run_fold(name, fit, data, tr, te, rep, k, seed, noise_rate):
    record = FoldRecord(name, rep, k, int(te.size))
    t0 = time.perf_counter()
    try:
        train, (test,), _ = standardize(data.subset(tr), [data.subset(te)])
        if noise_rate > 0:
            train = inject_label_noise(train, noise_rate, seed)
        if np.intersect1d(train.ids, test.ids).size:
            raise SplitLeak(f"fold {rep}/{k}: training rows overlap the test fold")
        fitted = fit(train, seed)
        pred = np.asarray(fitted.predict(test.X)).astype(np.int8)
        record.predictions, record.labels = pred, test.y
        record.errors = zero_one_total(pred, test.y)
        record.error_pct = error_percent(pred, test.y)
        record.info = fitted.info
    except SplitLeak:
        raise
    except Exception as exc:  # keep going; the fold is reported as failed
        record.failure = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
    record.seconds = time.perf_counter() - t0
    return record


def _summarize(name: str, folds: list[FoldRecord]) -> MethodSummary:
    ok = [f for f in folds if not f.failed]
    mean = float(np.mean([f.error_pct for f in ok])) if ok else float("nan")
    return MethodSummary(name, folds, mean, int(sum(f.errors for f in ok)), len(folds) - len(ok))


def cross_validate(data: Dataset, plan: SplitPlan, method: str | list[str], noise_rate: float = 0.0,
                   reference: str | None = None, jobs: int = 1, progress=None,
                   registry: dict | None = None) -> CVResult:
    """Repeated k-fold evaluation of one or more methods on identical splits.

    With ``reference`` each other method gets the pooled McNemar contingency
    against it (``n01`` counts folds where the method is wrong and the
    reference right). Failed folds are recorded and excluded from the
    aggregates, and from the contingency of both members of a pair.
    """
    names = [method] if isinstance(method, str) else list(method)
    registry = METHODS if registry is None else registry
    if reference is not None and reference not in names:
        names.append(reference)
    fits = {n: registry[n] if n in registry else get_method(n) for n in names}
    if not 0.0 <= noise_rate <= 0.5:
        raise ValueError(f"noise rate must be in [0, 0.5], got {noise_rate}")
    splits = make_splits(data, plan)
    tasks = [(n, i) for i in range(len(splits)) for n in names]

    def run(task):
        n, i = task
        tr, te = splits[i]
        rec = _run_fold(n, fits[n], data, tr, te, i // plan.folds, i % plan.folds, fold_seed(plan, i), noise_rate)
        if progress is not None:
            progress(rec)
        return rec

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            records = list(pool.map(_run_task, [(t, data, splits, plan, noise_rate, registry is METHODS)
                                                for t in tasks]))
        if progress is not None:
            for r in records:
                progress(r)
    else:
        records = [run(t) for t in tasks]

    by_method = {n: [r for r in records if r.method == n] for n in names}
    summaries = {n: _summarize(n, recs) for n, recs in by_method.items()}
    if reference is not None:
        ref = by_method[reference]
        for n in names:
            if n == reference:
                continue
            pairs = [ContingencyPair.from_predictions(a.predictions, b.predictions, a.labels)
                     for a, b in zip(by_method[n], ref) if not (a.failed or b.failed)]
            if pairs:
                summaries[n].versus = sum(pairs[1:], pairs[0])
                summaries[n].mcnemar = pooled_mcnemar(pairs)
    return CVResult(data.name, plan, noise_rate, reference, summaries)


def _run_task(args):
    (n, i), data, splits, plan, noise_rate, _ = args
    tr, te = splits[i]
    return _run_fold(n, get_method(n), data, tr, te, i // plan.folds, i % plan.folds, fold_seed(plan, i),
                     noise_rate)

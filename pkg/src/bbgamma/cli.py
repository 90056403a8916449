"""Command-line entry point: ``bbgamma <command> [flags]``.

Every command writes its artifacts plus a ``manifest.json`` into ``--out``;
``bbgamma replay DIR/manifest.json`` re-runs the recorded command.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import DATA_ENV, SplitPlan, load_dataset, standardize
from .losses import LossKind, PlateauConstants, loss_curves
from .optimizer import SlaConfig

log = logging.getLogger("bbgamma")


@dataclass
class RunManifest:
    """Everything needed to reproduce an artifact directory."""

    command: str
    argv: list[str]
    dataset_paths: list[str] = field(default_factory=list)
    sla_config: dict | None = None
    split_plan: dict | None = None
    method: str | None = None
    seed: int = 0
    out: str = "."
    version: str = __version__
    data_root: str | None = None

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _dataset_path(ref: str) -> str:
    return str(Path(ref).resolve()) if Path(ref).exists() else ref


def _config(args) -> SlaConfig | None:
    return SlaConfig.load(args.config) if getattr(args, "config", None) else None


def _progress(record) -> None:
    state = "failed" if record.failed else f"{record.error_pct:.2f}%"
    log.info("%s rep %d fold %d: %s (%.1fs)", record.method, record.repetition, record.fold, state,
             record.seconds)


# -- commands ---------------------------------------------------------------------

def cmd_train(args, out: Path, manifest: RunManifest) -> int:
    from .eval import zero_one_total
    from .methods import configure, get_method

    configure(_config(args))
    data = load_dataset(args.dataset, args.format)
    train, _, scaler = standardize(data, [])
    fitted = get_method(args.method)(train, args.seed)
    model = fitted.to_json()
    model["scaler"] = {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()}
    model["method"] = args.method
    if fitted.kernel is not None:
        model.pop("train_inputs", None)
        model["train_inputs_ref"] = {"dataset": _dataset_path(args.dataset), "rows": "all", "standardized": True}
    _dump(model, out / "model.json")
    report = fitted.report.to_json() if fitted.report is not None else {}
    report["train_01"] = zero_one_total(fitted.predict(train.X), train.y)
    _dump(report, out / "fit_report.json")
    print(f"{args.method} on {data.name}: training 0-1 loss {report['train_01']} / {train.n}")
    return 0


def cmd_cv(args, out: Path, manifest: RunManifest) -> int:
    from .methods import configure, cross_validate

    configure(_config(args))
    data = load_dataset(args.dataset, args.format)
    plan = SplitPlan(args.seed, args.folds, args.reps)
    methods = [m.strip() for m in args.method.split(",")]
    result = cross_validate(data, plan, methods, noise_rate=args.noise, reference=args.reference,
                            jobs=args.jobs, progress=_progress)
    payload = result.to_json()
    _dump(payload, out / "metrics.json")
    with open(out / "metrics.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["method", "mean_error_pct", "total_01", "failed_folds", "z_vs_reference"])
        for name, s in result.methods.items():
            z = "" if s.mcnemar is None else f"{s.mcnemar.z:.3f}"
            w.writerow([name, f"{s.mean_error:.3f}", s.total_01, s.failed, z])
    for name, s in result.methods.items():
        print(f"{name}: {s.mean_error:.2f}% mean error, {s.total_01} test errors, {s.failed} failed folds")
    return 0 if all(s.failed == 0 for s in result.methods.values()) else 1


def cmd_reproduce(args, out: Path, manifest: RunManifest) -> int:
    from .methods import configure
    from .tables import UCI, reproduce_table

    configure(_config(args))
    plan = SplitPlan(args.seed, args.folds, args.reps)
    datasets = tuple(args.datasets.split(",")) if args.datasets else UCI
    result = reproduce_table(args.id, args.data_dir, plan, datasets, seed=args.seed, progress=_progress)
    (out / "table.tsv").write_text(result.to_tsv())
    _dump(result.to_json(), out / "table.json")
    sys.stdout.write(result.to_tsv())
    return 0 if result.passed else 1


def cmd_plot_loss(args, out: Path, manifest: RunManifest) -> int:
    kind = LossKind.parse(args.kind)
    plateau = PlateauConstants(args.a, args.b) if kind is LossKind.BETA_BERNOULLI else None
    zs = np.linspace(args.zmin, args.zmax, args.points)
    for g in _floats(args.gamma):
        path = out / f"loss_{kind.value}_gamma{g:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["z", "loss"])
            for _, z, v in loss_curves(kind, zs, [g], plateau):
                w.writerow([repr(z), repr(v)])
        print(path)
    return 0


def cmd_sparsity(args, out: Path, manifest: RunManifest) -> int:
    from .tables import sparsity_sweep

    data = load_dataset(args.dataset, args.format)
    rows = sparsity_sweep(data, _ints(args.sizes), args.seed)
    with open(out / "support.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["n", "l2_support", "sparse_support", "sigma", "lam"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"n={r['n']}: L2 support {r['l2_support']}, sparse support {r['sparse_support']}")
    return 0


def cmd_noise(args, out: Path, manifest: RunManifest) -> int:
    from .methods import configure
    from .tables import noise_sweep

    configure(_config(args))
    data = load_dataset(args.dataset, args.format)
    plan = SplitPlan(args.seed, args.folds, args.reps)
    rows = noise_sweep(data, plan, [m.strip() for m in args.method.split(",")], _floats(args.rates),
                       progress=_progress)
    with open(out / "noise.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["noise", "method", "error_pct", "total_01", "failed"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"noise {r['noise']:g} {r['method']}: {r['error_pct']:.2f}%")
    return 0


COMMANDS = {
    "train": cmd_train,
    "cv": cmd_cv,
    "reproduce-table": cmd_reproduce,
    "plot-loss": cmd_plot_loss,
    "sparsity-sweep": cmd_sparsity,
    "noise-sweep": cmd_noise,
}


def build_parser() -> argparse.ArgumentParser:
    from .methods import METHODS
    from .tables import TABLES

    parser = argparse.ArgumentParser(prog="bbgamma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-fold progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True, default_dataset=None):
        if dataset:
            p.add_argument("--dataset", required=default_dataset is None, default=default_dataset,
                           help=f"bundled name, manifest, CSV or libsvm path (root from ${DATA_ENV})")
            p.add_argument("--format", choices=("libsvm", "csv"), default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="SlaConfig JSON for the annealed linear fits")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=".", help="artifact directory")

    def protocol(p, reps=10):
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--reps", type=int, default=reps)

    p = sub.add_parser("train", help="fit one method on a whole dataset")
    common(p)
    p.add_argument("--method", default="bblr3", choices=sorted(METHODS))

    p = sub.add_parser("cv", help="repeated k-fold evaluation")
    common(p)
    protocol(p)
    p.add_argument("--method", default="bblr3", help="one method or a comma list")
    p.add_argument("--reference", default=None, help="method for pooled McNemar comparisons")
    p.add_argument("--noise", type=float, default=0.0, help="training label flip rate")

    p = sub.add_parser("reproduce-table", help="run a published table's protocol and check its bands")
    common(p, dataset=False)
    protocol(p)
    p.add_argument("--id", required=True, choices=TABLES)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--datasets", default=None, help="comma list (default: the four UCI sets)")

    p = sub.add_parser("plot-loss", help="write loss curves as CSV")
    common(p, dataset=False)
    p.add_argument("--kind", default="bbgamma")
    p.add_argument("--gamma", default="1")
    p.add_argument("--a", type=float, default=0.0098)
    p.add_argument("--b", type=float, default=0.9804)
    p.add_argument("--zmin", type=float, default=-5.0)
    p.add_argument("--zmax", type=float, default=5.0)
    p.add_argument("--points", type=int, default=201)

    p = sub.add_parser("sparsity-sweep", help="support counts at growing training sizes")
    common(p, default_dataset="spambase")
    p.add_argument("--sizes", default="100,200,400,800")

    p = sub.add_parser("noise-sweep", help="noisy-label protocol across flip rates")
    common(p)
    protocol(p)
    p.add_argument("--method", default="lr,bblr3")
    p.add_argument("--rates", default="0,0.05,0.1,0.2")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the recorded artifact directory")
    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.command == "replay":
        manifest = RunManifest.read(args.manifest)
        replay = list(manifest.argv)
        if args.out is not None:
            i = replay.index("--out") if "--out" in replay else None
            if i is None:
                replay += ["--out", args.out]
            else:
                replay[i + 1] = args.out
        return run(replay)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    argv = list(argv)
    if "--out" not in argv:
        argv += ["--out", str(out)]
    manifest = RunManifest(
        command=args.command,
        argv=argv,
        dataset_paths=[_dataset_path(args.dataset)] if getattr(args, "dataset", None) else [],
        sla_config=(cfg or SlaConfig()).to_json(),
        split_plan=asdict(SplitPlan(args.seed, args.folds, args.reps)) if hasattr(args, "folds") else None,
        method=getattr(args, "method", None),
        seed=args.seed,
        out=str(out),
        data_root=os.environ.get(DATA_ENV),
    )
    manifest.write(out)
    try:
        return COMMANDS[args.command](args, out, manifest)
    except (FileNotFoundError, ValueError) as exc:
        print(f"bbgamma {args.command}: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())

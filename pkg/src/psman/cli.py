"""Command-line front end: ``psman {mdpca,sweep,cdt,verify,info}``.

Parameters come from built-in defaults, then an optional JSON config file,
then command-line flags, later sources winning. Everything is validated
before data are fitted.
"""
import argparse
import csv
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from psman import __version__, kernels
from psman.cdt import DEFAULT_LAMBDA, classify_gaussian_nb, classify_nearest_centroid, fit_cdt
from psman.data import LabeledDataset, zscore
from psman.errors import ConfigError, DataError, NumericalError, PsmanError, ZeroDataset
from psman.io import encode_labels, ingest_csv, read_checkpoint, read_table, write_checkpoint, write_csv
from psman.manifold import PartitionSpec
from psman.mdpca import RESIDUAL, SHARED, fit_mdpca, mdpca_spec, variance_explained
from psman.optim import OptimizerConfig, Termination
from psman.verify import run_checks

logger = logging.getLogger("psman")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

COMMON_DEFAULTS = {
    "seed": 0,
    "alpha": 0.1,
    "tol": 1e-8,
    "max_iters": 5000,
    "normalize": True,
    "out": "psman-out",
}
COMMAND_DEFAULTS = {
    "mdpca": {"datasets": None, "k_pd": None, "k_sh": None, "header": False, "restarts": 1},
    "sweep": {"datasets": None, "k_total": None, "k_pd_grid": None, "header": False, "workers": 1},
    "cdt": {
        "source": None,
        "target": None,
        "target_labels": None,
        "k_pc": None,
        "lam": DEFAULT_LAMBDA,
        "header": False,
        "label_column": "-1",
    },
    "verify": {"sizes": [4, 5, 6]},
    "info": {"checkpoint": None},
}
# keys that only make sense on the command line
CLI_ONLY = {"command", "config", "verbose"}


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--alpha", type=float, help="initial step size (default 0.1)")
    common.add_argument("--tol", type=float, help="convergence tolerance (default 1e-8)")
    common.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap (default 5000)")
    common.add_argument("--no-normalize", dest="normalize", action="store_false",
                        help="skip per-dataset z-scoring")
    common.add_argument("--out", help="output directory (default psman-out)")
    common.add_argument("--config", default=None, help="JSON file of parameters; flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    parser = _Parser(prog="psman", description="Partitioned subspace manifold toolkit")
    parser.add_argument("--version", action="version", version=f"psman {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mdpca", parents=[common], argument_default=S,
                       help="fit multiple-dataset PCA")
    p.add_argument("datasets", nargs="*", help="CSV files, one per dataset")
    p.add_argument("--k-pd", dest="k_pd", type=int, help="per-dataset partition size (omit for plain PCA on one dataset)")
    p.add_argument("--k-sh", dest="k_sh", type=int, help="shared partition size")
    p.add_argument("--header", action="store_true", help="CSV files start with a header line")
    p.add_argument("--restarts", type=int, help="random restarts, best loss kept")

    p = sub.add_parser("sweep", parents=[common], argument_default=S,
                       help="vary the per-dataset size at fixed total")
    p.add_argument("datasets", nargs="*")
    p.add_argument("--k-total", dest="k_total", type=int, help="k_sh = k_total - D * k_pd")
    p.add_argument("--k-pd-grid", dest="k_pd_grid", type=_int_list, help="e.g. 1,2,3")
    p.add_argument("--header", action="store_true")
    p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("cdt", parents=[common], argument_default=S,
                       help="fit a class-discriminative transfer subspace")
    p.add_argument("source", nargs="?", help="labelled source CSV")
    p.add_argument("target", nargs="?", help="unlabelled target CSV")
    p.add_argument("--target-labels", dest="target_labels", help="CSV with one label per target row, for scoring")
    p.add_argument("--k-pc", dest="k_pc", type=int, help="size of each class partition (default n // L)")
    p.add_argument("--lambda", dest="lam", type=float, help=f"discrimination weight (default {DEFAULT_LAMBDA})")
    p.add_argument("--header", action="store_true")
    p.add_argument("--label-column", dest="label_column", help="header name or index of the label column (default -1)")

    p = sub.add_parser("verify", parents=[common], argument_default=S, help="run the self-check suite")
    p.add_argument("--sizes", type=_int_list, help="ambient dimensions (default 4,5,6)")

    p = sub.add_parser("info", parents=[common], argument_default=S, help="describe a checkpoint")
    p.add_argument("checkpoint", nargs="?")
    return parser


@dataclass
class RunConfig:
    command: str
    seed: int
    alpha: float
    tol: float
    max_iters: int
    normalize: bool
    out: str
    params: dict = field(default_factory=dict)

    def optimizer(self):
        return OptimizerConfig(alpha=self.alpha, max_iters=self.max_iters, tol=self.tol)

    def echo(self):
        d = asdict(self)
        d.update(d.pop("params"))
        return d


def _load_config_file(path):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: expected a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def resolve_config(args):
    """Merge defaults, config file and flags into a validated :class:`RunConfig`."""
    cmd = args.command
    allowed = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[cmd]}
    merged = dict(allowed)
    if args.config:
        from_file = _load_config_file(args.config)
        unknown = sorted(set(from_file) - set(allowed))
        _require(not unknown, f"unknown key(s) for {cmd!r} in {args.config}: {', '.join(unknown)}")
        merged.update(from_file)
    flags = {k: v for k, v in vars(args).items() if k not in CLI_ONLY}
    # empty positional lists mean "not given on the command line"
    flags = {k: v for k, v in flags.items() if not (isinstance(v, list) and not v and k == "datasets")}
    flags = {k: v for k, v in flags.items() if v is not None or k not in ("source", "target", "checkpoint")}
    merged.update(flags)

    common = {k: merged.pop(k) for k in COMMON_DEFAULTS}
    cfg = RunConfig(command=cmd, params=merged, **common)
    _validate(cfg)
    return cfg


def _validate(cfg):
    _require(_is_int(cfg.seed) and cfg.seed >= 0, f"seed must be a non-negative integer, got {cfg.seed!r}")
    _require(_is_num(cfg.alpha) and cfg.alpha > 0, f"alpha must be > 0, got {cfg.alpha!r}")
    _require(_is_num(cfg.tol) and cfg.tol >= 0, f"tol must be >= 0, got {cfg.tol!r}")
    _require(_is_int(cfg.max_iters) and cfg.max_iters >= 1, f"max_iters must be >= 1, got {cfg.max_iters!r}")
    _require(isinstance(cfg.normalize, bool), "normalize must be true or false")
    _require(isinstance(cfg.out, str) and cfg.out, "out must be a directory path")
    p = cfg.params

    def positive(key, allow_none=False):
        v = p.get(key)
        if v is None and allow_none:
            return
        _require(_is_int(v) and v >= 1, f"{key} must be a positive integer, got {v!r}")

    if cfg.command in ("mdpca", "sweep"):
        ds = p["datasets"]
        _require(isinstance(ds, list) and ds and all(isinstance(d, str) for d in ds),
                 "at least one dataset path is required")
    if cfg.command == "mdpca":
        positive("k_sh")
        positive("k_pd", allow_none=True)
        positive("restarts")
        _require(p["k_pd"] is not None or len(p["datasets"]) == 1,
                 "k_pd is required with more than one dataset")
    elif cfg.command == "sweep":
        positive("k_total")
        positive("workers")
        grid = p["k_pd_grid"]
        _require(isinstance(grid, list) and grid and all(_is_int(g) and g >= 1 for g in grid),
                 "k_pd_grid must be a non-empty list of positive integers")
        _require(len(set(grid)) == len(grid), "k_pd_grid has duplicate values")
    elif cfg.command == "cdt":
        _require(isinstance(p["source"], str) and isinstance(p["target"], str),
                 "source and target paths are required")
        positive("k_pc", allow_none=True)
        _require(_is_num(p["lam"]) and p["lam"] >= 0, f"lambda must be >= 0, got {p['lam']!r}")
        _require(isinstance(p["label_column"], (str, int)), "label_column must be a name or an index")
    elif cfg.command == "verify":
        sizes = p["sizes"]
        _require(isinstance(sizes, list) and sizes and all(_is_int(s) and s >= 3 for s in sizes),
                 "sizes must be integers >= 3")
    elif cfg.command == "info":
        _require(isinstance(p["checkpoint"], str), "a checkpoint path is required")


def _check_spec(n, sizes):
    """Raise ConfigError for partition sizes that do not fit dimension n."""
    try:
        PartitionSpec(n, tuple(sizes))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"partition sizes {list(sizes)} do not fit dimension {n}: {exc}") from None


def _load_datasets(paths, header):
    datasets = [ingest_csv(path, has_header=header) for path in paths]
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        # disambiguate files with the same stem
        datasets = [type(d)(d.x, f"{d.name}.{i + 1}") for i, d in enumerate(datasets)]
    n = datasets[0].n_features
    for d in datasets[1:]:
        if d.n_features != n:
            raise DataError(f"{d.name!r} has {d.n_features} features, {datasets[0].name!r} has {n}")
    return datasets


def _normalize(datasets):
    return [type(d)(zscore(d.x)[0], d.name) for d in datasets]


def _require_energy(datasets):
    for d in datasets:
        if not np.any(d.x):
            raise ZeroDataset(f"dataset {d.name!r} is all zeros (constant columns z-score to zero)")


def _trace_rows(report):
    rows = []
    for i, loss in enumerate(report.loss_trace):
        g = report.grad_norm_trace[i] if i < len(report.grad_norm_trace) else ""
        rows.append((i, loss, g))
    return rows


def _report_meta(report):
    return {
        "termination": report.termination.value,
        "iterations": report.iterations,
        "final_loss": report.loss_trace[-1],
    }


def _progress(every=100):
    def callback(iteration, point, loss, grad_norm):
        if iteration % every == 0:
            logger.info("iter %d loss %.10g grad %.3e", iteration, loss, grad_norm)
    return callback


def cmd_mdpca(cfg, out):
    p = cfg.params
    datasets = _load_datasets(p["datasets"], p["header"])
    mdpca_spec(datasets[0].n_features, len(datasets), p["k_pd"], p["k_sh"])
    if cfg.normalize:
        datasets = _normalize(datasets)
    _require_energy(datasets)
    out.mkdir(parents=True, exist_ok=True)
    model, report = fit_mdpca(datasets, p["k_pd"], p["k_sh"], cfg.optimizer(), seed=cfg.seed,
                              restarts=p["restarts"])
    write_csv(out / "variance_explained.csv", ["dataset", "partition", "fraction"],
              variance_explained(model, datasets))
    write_csv(out / "loss_trace.csv", ["iteration", "loss", "grad_norm"], _trace_rows(report))
    write_checkpoint(model.point, out / "point.psman")
    meta = {
        "datasets": [d.name for d in datasets],
        "partition_sizes": list(model.spec.sizes),
        "checkpoint": "point.psman",
        **_report_meta(report),
    }
    return meta, report.termination


def _sweep_point(datasets, k_pd, k_sh, config, seed):
    model, report = fit_mdpca(datasets, k_pd, k_sh, config, seed=seed)
    table = variance_explained(model, datasets)
    names = [d.name for d in datasets]
    rows = []
    for i, name in enumerate(names):
        fractions = {part: frac for ds, part, frac in table if ds == name}
        other = sum(fractions[o] for o in names if o != name)
        for kind, value in (("own", fractions[name]), ("other", other),
                            ("shared", fractions[SHARED]), ("residual", fractions[RESIDUAL])):
            rows.append((k_pd, name, kind, value))
    return rows, report


def cmd_sweep(cfg, out):
    p = cfg.params
    datasets = _load_datasets(p["datasets"], p["header"])
    n, n_datasets = datasets[0].n_features, len(datasets)
    _require(p["k_total"] <= n, f"k_total {p['k_total']} exceeds dimension {n}")
    if cfg.normalize:
        datasets = _normalize(datasets)
    _require_energy(datasets)
    grid = []
    for k_pd in p["k_pd_grid"]:
        k_sh = p["k_total"] - n_datasets * k_pd
        if k_sh < 1:
            print(f"warning: skipping k_pd={k_pd}: k_sh would be {k_sh}", file=sys.stderr)
            continue
        grid.append((k_pd, k_sh))
    _require(grid, "no grid value leaves a positive shared partition")

    config = cfg.optimizer()
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(datasets, k_pd, k_sh, config, cfg.seed) for k_pd, k_sh in grid]
    if p["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=p["workers"]) as pool:
            results = list(pool.map(_sweep_point, *zip(*jobs)))
    else:
        results = [_sweep_point(*job) for job in jobs]

    rows, trace_rows, fits = [], [], []
    worst = Termination.CONVERGED
    for (k_pd, k_sh), (point_rows, report) in zip(grid, results):
        rows.extend(point_rows)
        trace_rows.extend((k_pd, *r) for r in _trace_rows(report))
        fits.append({"k_pd": k_pd, "k_sh": k_sh, **_report_meta(report)})
        if report.termination is Termination.STEP_FAILURE:
            worst = Termination.STEP_FAILURE
        elif report.termination is Termination.MAX_ITERS and worst is Termination.CONVERGED:
            worst = Termination.MAX_ITERS
    write_csv(out / "sweep.csv", ["k_pd", "dataset", "partition_kind", "fraction"], rows)
    write_csv(out / "loss_trace.csv", ["k_pd", "iteration", "loss", "grad_norm"], trace_rows)
    return {"datasets": [d.name for d in datasets], "fits": fits}, worst


def _read_target_labels(path, header, label_names):
    # a label file is a single column; read it as raw tokens
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no labels")
    for line, r in enumerate(rows, start=2 if header else 1):
        if len(r) != 1:
            raise DataError(f"{path}: line {line}: expected one label per row, found {len(r)} cells")
    y, names = encode_labels([r[0].strip() for r in rows], label_names)
    if len(names) > len(label_names):
        raise DataError(f"{path}: labels {list(names[len(label_names):])} do not occur in the source")
    return y


def cmd_cdt(cfg, out):
    p = cfg.params
    label_column = p["label_column"]
    if isinstance(label_column, str) and label_column.lstrip("-").isdigit():
        label_column = int(label_column)
    source = ingest_csv(p["source"], has_header=p["header"], label_column=label_column)
    target = ingest_csv(p["target"], has_header=p["header"])
    n = source.x.shape[1]
    if target.n_features != n:
        raise DataError(f"target has {target.n_features} features, source has {n}")
    target_labels = None
    if p["target_labels"]:
        target_labels = _read_target_labels(p["target_labels"], p["header"], source.label_names)
        if target_labels.shape[0] != target.n_samples:
            raise DataError(f"{target_labels.shape[0]} target labels for {target.n_samples} target rows")
    n_classes = source.n_classes
    k_pc = p["k_pc"] if p["k_pc"] is not None else n // n_classes
    _require(k_pc >= 1, f"{n_classes} classes do not fit dimension {n}")
    _check_spec(n, (k_pc,) * n_classes)

    xs, xt = source.x, target.x
    if cfg.normalize:
        xs, xt = zscore(xs)[0], zscore(xt)[0]
    source = LabeledDataset(xs, source.y, source.name, source.label_names)
    out.mkdir(parents=True, exist_ok=True)

    model, report = fit_cdt(source, xt, k_pc, p["lam"], cfg.optimizer(), seed=cfg.seed)
    direction = f"{source.name}->{target.name}"
    classifiers = {
        "raw-nb": classify_gaussian_nb(None, source, xt, target_labels),
        "raw-centroid": classify_nearest_centroid(None, source, xt, target_labels),
        "cdt-nb": classify_gaussian_nb(model, source, xt, target_labels),
        "cdt-centroid": classify_nearest_centroid(model, source, xt, target_labels),
    }
    names = source.label_names
    pred_rows = [
        (i + 1, *(names[classifiers[m][0][i] - 1] for m in classifiers))
        for i in range(xt.shape[0])
    ]
    write_csv(out / "predictions.csv", ["sample", *classifiers], pred_rows)
    accuracies = None
    if target_labels is not None:
        accuracies = {m: acc for m, (_, acc) in classifiers.items()}
        write_csv(out / "accuracy.csv", ["method", direction], list(accuracies.items()))
    write_csv(out / "loss_trace.csv", ["iteration", "loss", "grad_norm"], _trace_rows(report))
    write_checkpoint(model.point, out / "point.psman")
    meta = {
        "direction": direction,
        "label_mapping": {name: i + 1 for i, name in enumerate(names)},
        "partition_sizes": list(model.spec.sizes),
        "lambda": p["lam"],
        "accuracy": accuracies,
        "checkpoint": "point.psman",
        **_report_meta(report),
    }
    return meta, report.termination


def cmd_verify(cfg):
    results = run_checks(cfg.seed, cfg.params["sizes"])
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def cmd_info(cfg):
    point = read_checkpoint(cfg.params["checkpoint"])
    spec = point.spec
    print(f"n {spec.n}")
    print(f"partition sizes {' '.join(str(s) for s in spec.sizes)}")
    print(f"partitions {spec.m}")
    print(f"k {spec.k}")
    print(f"complement {spec.remainder}")
    print(f"orthonormality defect {np.linalg.norm(point.q.T @ point.q - np.eye(spec.n)):.3e}")
    return EXIT_OK


def _write_metadata(out, cfg, meta, started):
    meta = {
        "psman_version": __version__,
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_seconds": round(time.perf_counter() - started, 6),
        **meta,
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run(argv=None):
    """Parse ``argv``, execute the command and return the exit status."""
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        cfg = resolve_config(args)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        if cfg.command == "info":
            return cmd_info(cfg)
        out = Path(cfg.out)
        handler = {"mdpca": cmd_mdpca, "sweep": cmd_sweep, "cdt": cmd_cdt}[cfg.command]
        meta, termination = handler(cfg, out)
        _write_metadata(out, cfg, meta, started)
        if termination is Termination.STEP_FAILURE:
            print("error: optimizer step failure; outputs written for inspection", file=sys.stderr)
            return EXIT_NUMERICAL
        if termination is Termination.MAX_ITERS:
            print("warning: iteration cap reached before convergence", file=sys.stderr)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PsmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None):
    sys.exit(run(argv))

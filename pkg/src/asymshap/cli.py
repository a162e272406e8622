"""Command-line entry point: ``asymshap {value,verify,experiment,gen}``.

Configuration is a flat ``key = value`` file (``--config``) plus repeatable
``--set key=value`` overrides; later settings win. Every input is validated
before any valuation starts. Exit status: 0 success, 1 validation or
verification failure, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .core import Dataset, OrderedPartition, WeightSystem, make_rng
from .errors import InvalidSpecError, TooLargeError, ValuationError
from .experiments import (
    SyntheticSpec,
    augment_sanity,
    generate,
    loo_values,
    mean_curve,
    replication_allocation,
    sequential_stream,
)
from .io import (
    __version__,
    apply_overrides,
    config_hash,
    dumps_report,
    load_config,
    load_dataset,
    load_partition,
    save_dataset,
    save_partition,
)
from .knn import knn_ads
from .montecarlo import McConfig, estimate_mc_ads
from .oracle import MAX_PERMUTATION_PLAYERS, class_increments, exact_ads_general, exact_ads_icuws, exact_data_shapley
from .report import ValueReport
from .utilities import MAX_TABLE_PLAYERS, METRICS, KNNUtility, TableUtility, make_utility

METHODS = ("oracle", "mc", "knn", "loo")
ORACLE_KINDS = ("icuws", "general", "ds")
PRESETS = ("augment", "sequential", "replication")
THREADS_ENV = "ASYMSHAP_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are validation failures, not argparse's default status 2
        self.print_usage(sys.stderr)
        raise ValuationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asymshap", description="Asymmetric data Shapley valuation.")
    parser.add_argument("--version", action="version", version=f"asymshap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file (value) or directory (experiment, gen)")
        p.add_argument("--workers", type=int)
        return p

    p = common(sub.add_parser("value", help="value a dataset and write a JSON report"))
    p.add_argument("--method", choices=METHODS)
    common(sub.add_parser("verify", help="cross-check exact methods on random small instances"))
    p = common(sub.add_parser("experiment", help="run a preset and write curves or allocations"))
    p.add_argument("preset", nargs="?", choices=PRESETS)
    common(sub.add_parser("gen", help="write a synthetic scenario as CSV files"))
    return parser


def resolve_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    cfg = apply_overrides(cfg, args.overrides)
    if getattr(args, "method", None):
        cfg["method"] = args.method
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg["mc.seed"] = args.seed
    if args.workers is not None:
        cfg["mc.workers"] = args.workers
    if getattr(args, "preset", None):
        cfg["experiment.preset"] = args.preset
    return cfg


def _int(cfg, key, default):
    value = cfg.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValuationError(f"{key} must be an integer, got {value!r}")
    return int(value)


def _float(cfg, key, default):
    value = cfg.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValuationError(f"{key} must be a number, got {value!r}")
    return float(value)


def _choice(cfg, key, default, choices):
    value = str(cfg.get(key, default))
    if value not in choices:
        raise ValuationError(f"{key} must be one of {', '.join(choices)}, got {value!r}")
    return value


def _seed(cfg) -> int:
    return _int(cfg, "seed", 0)


def _workers(cfg) -> int:
    workers = _int(cfg, "mc.workers", 1)
    if workers < 1:
        raise ValuationError("mc.workers must be >= 1")
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ValuationError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return workers


def synthetic_spec(cfg, prefix: str = "gen.") -> SyntheticSpec:
    known = {f.name: f for f in fields(SyntheticSpec)}
    kwargs = {}
    for key, value in cfg.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in known:
            raise InvalidSpecError(f"unknown generator key {key!r}")
        kwargs[name] = value
    kwargs.setdefault("seed", _seed(cfg))
    for name in ("n", "dim", "seed", "n_test", "copies", "periods"):
        if name in kwargs and kwargs[name] is not None and not isinstance(kwargs[name], int):
            raise InvalidSpecError(f"{prefix}{name} must be an integer")
    for name in ("noise", "separation", "spread", "corrupt", "drift"):
        if name in kwargs and not isinstance(kwargs[name], (int, float)):
            raise InvalidSpecError(f"{prefix}{name} must be a number")
    if "generator" in kwargs:
        kwargs["generator"] = str(kwargs["generator"])
    return SyntheticSpec(**kwargs)


# -- value -------------------------------------------------------------------


def load_inputs(cfg) -> tuple[Dataset, OrderedPartition, Dataset]:
    """Training set, partition and test set from ``data.*`` paths or ``gen.*`` keys."""
    if "data.train" not in cfg:
        if any(k.startswith("gen.") for k in cfg):
            return generate(synthetic_spec(cfg))
        raise ValuationError("data.train is required (or gen.* keys for a synthetic scenario)")
    if "data.test" not in cfg:
        raise ValuationError("data.test is required")
    train = load_dataset(cfg["data.train"])
    test = load_dataset(cfg["data.test"])
    classes = max(train.num_classes, test.num_classes)
    train = Dataset(train.features, train.labels, classes)
    test = Dataset(test.features, test.labels, classes)
    if test.dim != train.dim:
        raise ValuationError(f"test dimension {test.dim} != training dimension {train.dim}")
    if len(test) == 0:
        raise ValuationError("test set is empty")
    if cfg.get("data.partition"):
        sigma = load_partition(cfg["data.partition"])
        if sigma.n != len(train):
            raise ValuationError(f"partition covers {sigma.n} points, training set has {len(train)}")
    else:
        sigma = OrderedPartition.single(len(train))
    return train, sigma, test


def _class_weights(cfg, sigma: OrderedPartition):
    raw = cfg.get("ws.class_weights")
    if raw is None:
        return None
    try:
        weights = [float(w) for w in str(raw).split(",")] if not isinstance(raw, (int, float)) else [float(raw)]
    except ValueError:
        raise ValuationError(f"ws.class_weights must be comma-separated numbers, got {raw!r}") from None
    if len(weights) != sigma.m:
        raise ValuationError(f"ws.class_weights has {len(weights)} entries for {sigma.m} classes")
    return weights


def run_value(cfg) -> ValueReport:
    method = _choice(cfg, "method", "knn", METHODS)
    train, sigma, test = load_inputs(cfg)
    utility = make_utility(cfg, train, test)
    seed = _seed(cfg)
    metric = _choice(cfg, "utility.metric", cfg.get("knn.metric", "euclidean"), METRICS)

    # validate everything method-specific before computing
    if method == "oracle":
        kind = _choice(cfg, "oracle.kind", "icuws", ORACLE_KINDS)
        if kind == "general" and sigma.n > MAX_PERMUTATION_PLAYERS:
            raise TooLargeError(f"oracle.kind=general is capped at n={MAX_PERMUTATION_PLAYERS}")
        if kind == "ds" and sigma.n > MAX_TABLE_PLAYERS:
            raise TooLargeError(f"oracle.kind=ds is capped at n={MAX_TABLE_PLAYERS}")
        if kind == "icuws" and max(sigma.sizes()) > MAX_TABLE_PLAYERS:
            raise TooLargeError(f"oracle.kind=icuws is capped at {MAX_TABLE_PLAYERS} points per class")
        omega = WeightSystem.icu(sigma, _class_weights(cfg, sigma))
    elif method == "mc":
        mc = McConfig(
            budget=_int(cfg, "mc.budget", 5000),
            tol=_float(cfg, "mc.tol", None),
            window=_int(cfg, "mc.window", 100),
            seed=_int(cfg, "mc.seed", seed),
            workers=_workers(cfg),
        )
        omega = WeightSystem.icu(sigma, _class_weights(cfg, sigma))
    elif method == "knn":
        if str(cfg.get("utility.kind", "knn")) != "knn":
            raise ValuationError("method=knn requires utility.kind=knn")
        k = _int(cfg, "utility.k", cfg.get("knn.k", 5))
        if k < 1:
            raise ValuationError("knn.k must be >= 1")
        empty = _float(cfg, "utility.empty_score", 0.0)

    if method == "oracle":
        report = {
            "icuws": lambda: exact_ads_icuws(omega, utility),
            "general": lambda: exact_ads_general(omega, utility),
            "ds": lambda: exact_data_shapley(utility, sigma.n),
        }[kind]()
    elif method == "mc":
        report = estimate_mc_ads(omega, utility, mc)
    elif method == "knn":
        report = knn_ads(train, sigma, test, k, metric, empty_score=empty)
    else:
        report = loo_values(train, utility)
        report = ValueReport(report.values, "loo", sigma, meta=dict(report.meta))

    meta = dict(report.meta)
    meta.update(
        config_hash=config_hash(cfg),
        seed=int(meta.get("seed", seed)),
        method=method,
        tool_version=__version__,
        class_increments=class_increments(utility, sigma).tolist(),
    )
    return ValueReport(report.values, report.method, report.partition, report.uncertainty, meta)


def cmd_value(cfg, out) -> int:
    report = run_value(cfg)
    text = dumps_report(report)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# -- verify ------------------------------------------------------------------


def _random_partition(rng, n: int, m: int) -> OrderedPartition:
    labels = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    rng.shuffle(labels)
    return OrderedPartition(tuple(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(m)))


def verify_suite(seed: int = 0, instances: int = 20) -> dict[str, float]:
    """Max deviations of the exact methods against each other on random small games."""
    rng = make_rng(seed)
    dev = {"general_vs_icuws": 0.0, "knn_vs_icuws": 0.0, "class_efficiency": 0.0}
    for _ in range(instances):
        n = int(rng.integers(2, 8))
        sigma = _random_partition(rng, n, int(rng.integers(1, min(3, n) + 1)))
        omega = WeightSystem.icu(sigma)
        table = TableUtility.random(n, rng)
        icu = exact_ads_icuws(omega, table)
        gen = exact_ads_general(omega, table)
        dev["general_vs_icuws"] = max(dev["general_vs_icuws"], float(np.max(np.abs(icu.values - gen.values))))
        inc = class_increments(table, sigma)
        dev["class_efficiency"] = max(dev["class_efficiency"], float(np.max(np.abs(icu.class_sums - inc))))

        n = int(rng.integers(3, 11))
        sigma = _random_partition(rng, n, int(rng.integers(1, 4)))
        x = np.round(rng.normal(size=(n, 2)), 1)  # rounding forces distance ties
        train = Dataset(x, rng.integers(0, 2, size=n), 2)
        test = Dataset(np.round(rng.normal(size=(3, 2)), 1), rng.integers(0, 2, size=3), 2)
        k = int(rng.choice([1, 3, 5]))
        util = KNNUtility(train, test, k)
        exact = exact_ads_icuws(WeightSystem.icu(sigma), util)
        fast = knn_ads(train, sigma, test, k)
        dev["knn_vs_icuws"] = max(dev["knn_vs_icuws"], float(np.max(np.abs(exact.values - fast.values))))
        inc = class_increments(util, sigma)
        dev["class_efficiency"] = max(dev["class_efficiency"], float(np.max(np.abs(fast.class_sums - inc))))
    return dev


def cmd_verify(cfg, out) -> int:
    seed = _seed(cfg)
    instances = _int(cfg, "verify.instances", 20)
    tol = _float(cfg, "verify.tol", 1e-9)
    if instances < 1:
        raise ValuationError("verify.instances must be >= 1")
    start = time.perf_counter()
    dev = verify_suite(seed, instances)
    ok = all(v <= tol for v in dev.values())
    for name, value in dev.items():
        print(f"{name:18s} max deviation {value:.3e}  {'ok' if value <= tol else 'FAIL'}")
    print(f"seed={seed} instances={instances} tol={tol:g} elapsed={time.perf_counter() - start:.2f}s")
    if out:
        payload = {"seed": seed, "instances": instances, "tol": tol, "max_deviation": dev, "passed": ok}
        Path(out).write_text(json.dumps(payload, indent=2) + "\n")
    return 0 if ok else 1


# -- experiment --------------------------------------------------------------


def _seeds(cfg) -> tuple[int, ...]:
    raw = cfg.get("experiment.seeds")
    if raw is None:
        base = _seed(cfg)
        return tuple(range(base, base + 5))
    if isinstance(raw, int):
        return tuple(range(raw))
    try:
        return tuple(int(s) for s in str(raw).split(","))
    except ValueError:
        raise ValuationError(f"experiment.seeds must be a count or a comma list, got {raw!r}") from None


def cmd_experiment(cfg, out) -> int:
    preset = _choice(cfg, "experiment.preset", "augment", PRESETS)
    k = _int(cfg, "knn.k", 5)
    metric = _choice(cfg, "knn.metric", "euclidean", METRICS)
    if k < 1:
        raise ValuationError("knn.k must be >= 1")
    outdir = Path(out or f"results-{preset}")
    outdir.mkdir(parents=True, exist_ok=True)

    if preset == "replication":
        rows = replication_allocation(
            seed=_seed(cfg), n=_int(cfg, "experiment.n", 20), max_copies=_int(cfg, "experiment.max_copies", 2), k=k, metric=metric
        )
        payload = {"preset": preset, "config_hash": config_hash(cfg), "tool_version": __version__, "rows": rows}
        (outdir / "allocation.json").write_text(json.dumps(payload, indent=2) + "\n")
        for row in rows:
            print(f"copies={row['copies']} class_sums={row['class_sums']}")
        return 0

    seeds = _seeds(cfg)
    if preset == "augment":
        curves = augment_sanity(seeds, n=_int(cfg, "experiment.n", 40), k=k, metric=metric)
    else:
        curves = sequential_stream(seeds, n=_int(cfg, "experiment.n", 30), k=k, metric=metric)
    for key, runs in curves.items():
        mean = mean_curve(runs)
        (outdir / f"{key}.csv").write_text(mean.to_csv())
        for seed, curve in zip(seeds, runs):
            (outdir / f"{key}-seed{seed}.csv").write_text(curve.to_csv())
        print(f"{key:24s} " + " ".join(f"{a:.3f}" for a in mean.relative_accuracy))
    return 0


# -- gen ---------------------------------------------------------------------


def cmd_gen(cfg, out) -> int:
    spec = synthetic_spec(cfg)
    outdir = Path(out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    train, sigma, test = generate(spec)
    save_dataset(train, outdir / "train.csv")
    save_dataset(test, outdir / "test.csv")
    save_partition(sigma, outdir / "partition.csv")
    print(f"wrote {len(train)} training points, {len(test)} test points, {sigma.m} classes to {outdir}")
    return 0


COMMANDS = {"value": cmd_value, "verify": cmd_verify, "experiment": cmd_experiment, "gen": cmd_gen}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args.out)
    except (ValuationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

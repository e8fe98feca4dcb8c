"""Config-driven batch experiment runner.

Reads a JSON experiment description, runs it, and writes CSV data, a JSON
summary, and (for series-producing experiments) a two-column plot-data
file next to a small rendering stub.  Identical configs and seeds produce
byte-identical outputs, independent of the worker count; a stored bundle
can be re-run and diffed with ``--reproduce``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .covering import (
    Carpet,
    DiscreteMassFunction,
    incremental_subcarpet,
    is_well_separated,
    mass_cover_selection,
    multiplicity,
    random_carpet,
    separation_color_bound,
    well_separated_coloring,
)
from .dynamics import OdometerSystem, ProductSystem, cylinder_function
from .estimator import (
    _sample_with_retry,
    compare_growth,
    folner_series,
    geometric_grid,
    maximal_tail_check,
    predicted_gamma,
    ratio_average,
    series,
    stansym_check,
)
from .metric import metric_from_spec

EXPERIMENTS = (
    "critdim",
    "ergodic",
    "folner",
    "maximal",
    "covering",
    "growth",
    "stansym",
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ASSERT = 3


def _fmt(x: float) -> str:
    return "%.12g" % float(x)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row)
        )
    _atomic_write(path, "\n".join(lines) + "\n")


_PLOT_STUB = """\
#!/usr/bin/env python3
# Render the two-column plot data produced next to this stub.
import sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "plot_data.tsv"
xs, ys = [], []
with open(path) as fh:
    header = fh.readline().split()
    for line in fh:
        a, b = line.split()
        xs.append(float(a))
        ys.append(float(b))
plt.plot(xs, ys, marker="o")
plt.xlabel(header[0])
plt.ylabel(header[1])
plt.tight_layout()
plt.savefig("plot.png", dpi=150)
"""


def _write_plot(outdir: Path, xlabel: str, ylabel: str, xs, ys) -> None:
    lines = [f"{xlabel}\t{ylabel}"]
    lines += [f"{_fmt(x)}\t{_fmt(y)}" for x, y in zip(xs, ys)]
    _atomic_write(outdir / "plot_data.tsv", "\n".join(lines) + "\n")
    _atomic_write(outdir / "plot.py", _PLOT_STUB)


# ---------------------------------------------------------------------------
# Config parsing and validation
# ---------------------------------------------------------------------------


def _system_specs(config: dict) -> list[dict]:
    spec = config.get("system")
    if isinstance(spec, dict):
        return [spec]
    return list(spec or [])


def _build_component(spec: dict) -> OdometerSystem:
    depth = int(spec["depth"])
    p = spec["p"]
    if isinstance(p, (int, float)):
        return OdometerSystem.constant(float(p), depth)
    probs = [float(v) for v in p]
    if len(probs) != depth:
        raise ValueError("probability list must have 'depth' entries")
    return OdometerSystem(tuple(probs))


def build_system(config: dict) -> ProductSystem:
    return ProductSystem(tuple(_build_component(s) for s in _system_specs(config)))


def build_metric(config: dict, key: str = "metric"):
    return metric_from_spec(config[key])


def _grid_from_config(config: dict) -> list[int]:
    rng = config.get("n_range", {})
    return geometric_grid(
        int(rng.get("min", 1)), int(rng.get("max")), float(rng.get("factor", 1.25))
    )


def validate(config: dict) -> list[str]:
    """Collect config violations; an empty list means runnable."""
    problems: list[str] = []
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        problems.append(
            f"experiment: {exp!r} is not one of {', '.join(EXPERIMENTS)}"
        )
        return problems

    def check_metric(key: str) -> None:
        if key not in config:
            problems.append(f"{key}: required for experiment {exp!r}")
            return
        try:
            metric_from_spec(config[key])
        except (ValueError, KeyError) as e:
            problems.append(f"{key}: {e}")

    def check_system() -> None:
        specs = _system_specs(config)
        if not specs:
            problems.append("system: at least one component is required")
            return
        for i, spec in enumerate(specs):
            if "depth" not in spec or int(spec.get("depth", 0)) < 1:
                problems.append(f"system[{i}].depth: must be a positive integer")
                continue
            try:
                _build_component(spec)
            except ValueError as e:
                problems.append(f"system[{i}].p: {e}")

    def check_positive(key: str, default=None) -> None:
        value = config.get(key, default)
        if value is None or not float(value) > 0:
            problems.append(f"{key}: must be positive")

    needs_dynamics = exp in ("critdim", "ergodic", "folner", "maximal", "stansym")
    if needs_dynamics:
        check_system()
    if exp != "covering" or "metric" in config:
        check_metric("metric")
    if exp == "growth":
        check_metric("metric_b")
        threshold = config.get("threshold")
        if threshold is None or not 0 < float(threshold) < 1:
            problems.append("threshold: comparability constant must lie in (0,1)")
    if exp in ("critdim", "ergodic", "folner", "maximal", "stansym", "growth"):
        rng = config.get("n_range")
        if not isinstance(rng, dict) or "max" not in rng:
            problems.append("n_range: must be an object with at least 'max'")
        else:
            lo = int(rng.get("min", 1))
            hi = int(rng["max"])
            if lo < 1 or hi < lo:
                problems.append("n_range: need 1 <= min <= max")
    if needs_dynamics:
        check_positive("samples", config.get("samples"))
        seed = config.get("seed")
        if seed is None or int(seed) < 0:
            problems.append("seed: a non-negative integer seed is required")
    if exp in ("ergodic", "maximal"):
        if "phi" not in config:
            problems.append("phi: cylinder patterns are required")
        else:
            specs = _system_specs(config)
            pats = config["phi"]
            if len(pats) != len(specs):
                problems.append("phi: one pattern per system component is required")
    if exp == "maximal":
        eps = config.get("epsilon")
        values = eps if isinstance(eps, list) else [eps]
        if eps is None or any(v is None or float(v) <= 0 for v in values):
            problems.append("epsilon: positive value(s) required")
    if exp == "folner":
        if int(config.get("t", -1)) < 0:
            problems.append("t: boundary thickness must be a non-negative integer")
    if exp == "covering":
        for key, default in (("carpets", None), ("points", None), ("span", None)):
            if int(config.get(key, 0)) < 1:
                problems.append(f"{key}: must be a positive integer")
        if int(config.get("radius_max", -1)) < 0:
            problems.append("radius_max: must be a non-negative integer")
        if config.get("seed") is None:
            problems.append("seed: a non-negative integer seed is required")
    return problems


# ---------------------------------------------------------------------------
# Per-sample workers (top level so process pools can pickle them)
# ---------------------------------------------------------------------------


def _critdim_sample(args):
    system, metric, ns, seed, s = args
    result, discards = _sample_with_retry(
        system, seed, s, lambda xs: series(system, xs, metric, ns)
    )
    return s, result, discards


def _ergodic_sample(args):
    system, metric, ns, patterns, seed, s = args
    phi = cylinder_function(system, patterns)

    def compute(xs):
        return [ratio_average(system, xs, metric, n, phi) for n in ns]

    values, discards = _sample_with_retry(system, seed, s, compute)
    return s, values, discards


def _folner_sample(args):
    system, metric, ns, t, seed, s = args
    values, discards = _sample_with_retry(
        system, seed, s, lambda xs: folner_series(system, xs, metric, ns, t)
    )
    return s, values, discards


def _map_samples(worker, tasks, workers: int):
    if workers <= 1:
        results = [worker(task) for task in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, tasks))
    return sorted(results, key=lambda r: r[0])


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------


def _run_critdim(config: dict, outdir: Path, workers: int) -> dict:
    system = build_system(config)
    metric = build_metric(config)
    ns = _grid_from_config(config)
    samples = int(config["samples"])
    seed = int(config["seed"])
    tail_fraction = float(config.get("tail_fraction", 0.5))
    tasks = [(system, metric, ns, seed, s) for s in range(samples)]
    results = _map_samples(_critdim_sample, tasks, workers)

    tail_start = math.ceil(tail_fraction * ns[-1])
    rows, alphas, betas, mids = [], [], [], []
    discards = 0
    for s, ser, disc in results:
        discards += disc
        for n, lc, lsum, ratio in zip(ser.ns, ser.log_card, ser.log_sum, ser.ratio):
            rows.append((s, n, float(lc), float(lsum), float(ratio)))
        tail = ser.tail(tail_start)
        alphas.append(float(tail.min()))
        betas.append(float(tail.max()))
        mids.append((alphas[-1] + betas[-1]) / 2.0)
    _write_csv(outdir / "data.csv", ["sample", "n", "log_card", "log_sum", "ratio"], rows)

    base = results[0][1]
    med_ratio = []
    for idx in range(len(base.ns)):
        med_ratio.append(float(np.median([r[1].ratio[idx] for r in results])))
    _write_plot(outdir / ".", "log_card", "median_ratio", base.log_card, med_ratio)

    predicted = predicted_gamma(system, metric)
    summary = {
        "alpha_hat": float(np.median(alphas)),
        "beta_hat": float(np.median(betas)),
        "gamma_hat": float(np.median(mids)),
        "discards": discards,
        "predicted": predicted,
        "tail_start": tail_start,
    }
    tolerance = config.get("tolerance")
    if predicted is not None and tolerance is not None:
        summary["tolerance"] = float(tolerance)
        summary["passed"] = bool(
            abs(summary["gamma_hat"] - predicted) <= float(tolerance)
        )
    else:
        summary["passed"] = True
    return summary


def _run_ergodic(config: dict, outdir: Path, workers: int) -> dict:
    system = build_system(config)
    metric = build_metric(config)
    ns = _grid_from_config(config)
    samples = int(config["samples"])
    seed = int(config["seed"])
    patterns = config["phi"]
    phi = cylinder_function(system, patterns)
    tasks = [(system, metric, ns, patterns, seed, s) for s in range(samples)]
    results = _map_samples(_ergodic_sample, tasks, workers)

    rows = []
    discards = 0
    finals = []
    for s, values, disc in results:
        discards += disc
        finals.append(values[-1])
        rows.extend((s, n, float(v)) for n, v in zip(ns, values))
    _write_csv(outdir / "data.csv", ["sample", "n", "ratio_average"], rows)
    med = [float(np.median([r[1][i] for r in results])) for i in range(len(ns))]
    _write_plot(outdir / ".", "n", "median_ratio_average", ns, med)

    tolerance = float(config.get("tolerance", 0.05))
    min_fraction = float(config.get("min_fraction", 0.8))
    within = [abs(v - phi.integral) < tolerance for v in finals]
    fraction = sum(within) / len(within)
    return {
        "integral": phi.integral,
        "median_final": float(np.median(finals)),
        "within_tolerance_fraction": fraction,
        "tolerance": tolerance,
        "min_fraction": min_fraction,
        "discards": discards,
        "passed": bool(fraction >= min_fraction),
    }


def _run_folner(config: dict, outdir: Path, workers: int) -> dict:
    system = build_system(config)
    metric = build_metric(config)
    ns = _grid_from_config(config)
    samples = int(config["samples"])
    seed = int(config["seed"])
    t = int(config.get("t", 1))
    tasks = [(system, metric, ns, t, seed, s) for s in range(samples)]
    results = _map_samples(_folner_sample, tasks, workers)

    rows = []
    discards = 0
    finals, decays = [], []
    for s, values, disc in results:
        discards += disc
        rows.extend((s, n, float(v)) for n, v in zip(ns, values))
        finals.append(values[-1])
        decays.append(values[-1] < values[0])
    _write_csv(outdir / "data.csv", ["sample", "n", "folner_ratio"], rows)
    med = [float(np.median([r[1][i] for r in results])) for i in range(len(ns))]
    _write_plot(outdir / ".", "n", "median_folner_ratio", ns, med)

    tolerance = float(config.get("tolerance", 0.1))
    min_fraction = float(config.get("min_fraction", 0.9))
    small = [v < tolerance for v in finals]
    ok = [s and d for s, d in zip(small, decays)]
    fraction = sum(ok) / len(ok)
    return {
        "t": t,
        "median_final": float(np.median(finals)),
        "decay_fraction": sum(decays) / len(decays),
        "small_fraction": sum(small) / len(small),
        "pass_fraction": fraction,
        "tolerance": tolerance,
        "min_fraction": min_fraction,
        "discards": discards,
        "passed": bool(fraction >= min_fraction),
    }


def _run_maximal(config: dict, outdir: Path, workers: int) -> dict:
    system = build_system(config)
    metric = build_metric(config)
    n_max = int(config["n_range"]["max"])
    samples = int(config["samples"])
    seed = int(config["seed"])
    phi = cylinder_function(system, config["phi"])
    eps_values = config["epsilon"]
    if not isinstance(eps_values, list):
        eps_values = [eps_values]
    rows = []
    all_passed = True
    discards = 0
    for eps in eps_values:
        report = maximal_tail_check(
            system, metric, phi, float(eps), n_max, samples, seed
        )
        discards += report.discards
        rows.append(
            (float(eps), report.exceed_fraction, report.bound, int(report.passed))
        )
        all_passed = all_passed and report.passed
    _write_csv(
        outdir / "data.csv", ["epsilon", "exceed_fraction", "bound", "passed"], rows
    )
    return {
        "l1_norm": phi.l1_norm,
        "epsilons": [float(e) for e in eps_values],
        "discards": discards,
        "passed": bool(all_passed),
    }


def _run_covering(config: dict, outdir: Path, workers: int) -> dict:
    metric = build_metric(config)
    d = metric.dimension
    n_carpets = int(config["carpets"])
    n_points = int(config["points"])
    span = int(config["span"])
    radius_max = int(config["radius_max"])
    seed = int(config["seed"])
    mult_bound = 2**d
    color_bound = separation_color_bound(d)
    rows = []
    max_mult = 0
    max_classes = 0
    min_fraction = 1.0
    rng = np.random.SeedSequence(seed)
    for idx, child in enumerate(rng.spawn(n_carpets)):
        carpet = random_carpet(child, metric, n_points, span, radius_max)
        selection = incremental_subcarpet(carpet, check_multiplicity=False)
        mult = multiplicity([carpet.rectangle(i) for i in selection])
        classes = well_separated_coloring(carpet)
        separated = all(
            is_well_separated([carpet.rectangle(i) for i in cls]) for cls in classes
        )
        mass = DiscreteMassFunction(carpet.points, (1.0,) * len(carpet))
        best = mass_cover_selection(carpet, mass)
        rects = [carpet.rectangle(i) for i in best]
        covered = sum(
            w for p, w in mass.items() if any(r.contains(p) for r in rects)
        )
        fraction = covered / mass.total
        rows.append(
            (idx, len(carpet), len(selection), mult, len(classes), int(separated), fraction)
        )
        max_mult = max(max_mult, mult)
        max_classes = max(max_classes, len(classes))
        min_fraction = min(min_fraction, fraction)
        if not separated:
            raise AssertionError("color class failed the separation check")
    _write_csv(
        outdir / "data.csv",
        ["carpet", "balls", "selected", "multiplicity", "classes", "separated", "mass_fraction"],
        rows,
    )
    passed = (
        max_mult <= mult_bound
        and max_classes <= color_bound
        and min_fraction >= 1.0 / color_bound
    )
    return {
        "carpets": n_carpets,
        "max_multiplicity": max_mult,
        "multiplicity_bound": mult_bound,
        "max_classes": max_classes,
        "class_bound": color_bound,
        "min_mass_fraction": min_fraction,
        "mass_bound": 1.0 / color_bound,
        "passed": bool(passed),
    }


def _run_growth(config: dict, outdir: Path, workers: int) -> dict:
    metric_a = build_metric(config)
    metric_b = build_metric(config, "metric_b")
    ns = _grid_from_config(config)
    report = compare_growth(metric_a, metric_b, ns, float(config["threshold"]))
    rows = [
        (n, m, mp, f, r)
        for n, m, mp, f, r in zip(
            report.ns, report.m, report.m_prime, report.ratio_forward, report.ratio_reverse
        )
    ]
    _write_csv(
        outdir / "data.csv",
        ["n", "m", "m_prime", "ratio_forward", "ratio_reverse"],
        rows,
    )
    verdict = "comparable" if report.comparable else "not-comparable"
    expect = config.get("expect")
    return {
        "threshold": report.threshold,
        "burn_in_start": report.burn_in_start,
        "verdict": verdict,
        "expect": expect,
        "passed": bool(expect is None or verdict == expect),
    }


def _run_stansym(config: dict, outdir: Path, workers: int) -> dict:
    specs = _system_specs(config)
    system = _build_component(specs[0])
    metric = build_metric(config)
    ns = _grid_from_config(config)
    report = stansym_check(
        system,
        metric,
        ns,
        int(config["samples"]),
        int(config["seed"]),
        float(config.get("tolerance", 0.05)),
    )
    row = (
        report.alpha_sym,
        report.beta_sym,
        report.alpha_plus,
        report.beta_plus,
        report.alpha_minus,
        report.beta_minus,
    )
    _write_csv(
        outdir / "data.csv",
        ["alpha_sym", "beta_sym", "alpha_plus", "beta_plus", "alpha_minus", "beta_minus"],
        [row],
    )
    return {
        "alpha_sym": report.alpha_sym,
        "beta_sym": report.beta_sym,
        "alpha_plus": report.alpha_plus,
        "beta_plus": report.beta_plus,
        "alpha_minus": report.alpha_minus,
        "beta_minus": report.beta_minus,
        "tolerance": report.tolerance,
        "discards": report.discards,
        "passed": bool(report.sandwich_holds),
    }


_RUNNERS = {
    "critdim": _run_critdim,
    "ergodic": _run_ergodic,
    "folner": _run_folner,
    "maximal": _run_maximal,
    "covering": _run_covering,
    "growth": _run_growth,
    "stansym": _run_stansym,
}


def run(config: dict, outdir: Path, workers: int = 1) -> dict:
    """Run one experiment, writing its artifacts into ``outdir``."""
    summary = _RUNNERS[config["experiment"]](config, outdir, workers)
    summary = {
        "experiment": config["experiment"],
        "seed": config.get("seed"),
        "tool": {"name": "rectdim", "version": __version__},
        **summary,
    }
    _atomic_write(
        outdir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    _atomic_write(
        outdir / "config.json", json.dumps(config, indent=2, sort_keys=True) + "\n"
    )
    return summary


def reproduce(bundle: Path, workers: int = 1) -> int:
    """Re-run a stored bundle and byte-compare the regenerated data files."""
    config_path = bundle / "config.json"
    if not config_path.exists():
        print(f"reproduce: missing {config_path}", file=sys.stderr)
        return EXIT_VALIDATION
    config = json.loads(config_path.read_text())
    problems = validate(config)
    if problems:
        for p in problems:
            print(f"reproduce: invalid config: {p}", file=sys.stderr)
        return EXIT_VALIDATION

    old_summary_path = bundle / "summary.json"
    if old_summary_path.exists():
        old_summary = json.loads(old_summary_path.read_text())
        old_version = old_summary.get("tool", {}).get("version")
        if old_version != __version__:
            print(
                f"reproduce: bundle was written by version {old_version}, "
                f"re-running with {__version__}"
            )

    with tempfile.TemporaryDirectory() as tmp:
        fresh = Path(tmp)
        run(config, fresh, workers)
        names = sorted(
            p.name
            for p in bundle.iterdir()
            if p.suffix in (".csv", ".tsv")
        )
        if not names:
            print("reproduce: bundle contains no data files", file=sys.stderr)
            return EXIT_VALIDATION
        differences = []
        for name in names:
            new = fresh / name
            if not new.exists():
                differences.append(f"{name}: not regenerated")
                continue
            if (bundle / name).read_bytes() != new.read_bytes():
                differences.append(f"{name}: differs")
        if differences:
            for d in differences:
                print(f"reproduce: {d}", file=sys.stderr)
            return 1
    print(f"reproduce: {len(names)} data file(s) identical")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="rectdim",
        description="batch experiment driver for lattice box geometry and "
        "critical-dimension estimation",
    )
    parser.add_argument("--config", type=Path, help="experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument(
        "--assert",
        dest="assert_",
        action="store_true",
        help="exit 3 when the experiment's acceptance threshold fails",
    )
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--workers", type=int, default=1, help="parallel samples")
    parser.add_argument(
        "--reproduce",
        type=Path,
        help="re-run a stored bundle and compare outputs byte-for-byte",
    )
    args = parser.parse_args(argv)

    if args.reproduce is not None:
        if args.config is not None:
            parser.error("--reproduce and --config are mutually exclusive")
        return reproduce(args.reproduce, args.workers)

    if args.config is None:
        parser.error("--config is required (or use --reproduce)")
    try:
        config = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        config["seed"] = args.seed

    problems = validate(config)
    if problems:
        for p in problems:
            print(f"config: {p}", file=sys.stderr)
        return EXIT_VALIDATION

    outdir = args.out or config.get("out")
    if outdir is None:
        print("error: no output directory (--out or config 'out')", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary = run(config, Path(outdir), max(1, args.workers))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.assert_ and not summary.get("passed", True):
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every subcommand reads a flat config (``--config``), applies flag overrides,
writes ``<experiment>.<table>.csv`` files into ``--out`` and finishes with
``<experiment>.manifest``.  Exit codes: 0 success, 2 config error,
3 resource limit, 4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .config import RunConfig, parse_function
from .errors import ConfigError, NonConvergenceError, TableLimitError
from .gchain import empirical_measure, ergodic_average, sample_paths
from .gfunction import GFunction, classify, truncate
from .martingale import (
    doob_check,
    increment_ratios,
    likelihood_traces,
    tightness_stat,
    write_tightness_csv,
)
from .shift_core import CylinderFunction, variation
from .transfer import (
    as_finite_range,
    convergence_to_mean,
    duality_check,
    invariant_measure,
    measure_vector,
    rate_fit,
)

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NONCONVERGENCE = 0, 2, 3, 4


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


class Run:
    """Output paths and manifest bookkeeping for one invocation."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.results: list[tuple[str, object]] = []
        self.started = time.perf_counter()
        self.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def path(self, table: str, suffix: str = "csv") -> Path:
        return self.out / f"{self.cfg['experiment']}.{table}.{suffix}"

    def record(self, key: str, value) -> None:
        self.results.append((key, value))

    def write_manifest(self, spec: GFunction) -> Path:
        report = classify(spec.envelope(), self.cfg["run.horizon"])
        lines = [f"{k} = {v}" for k, v in self.cfg.echo()]
        lines += [
            f"manifest.command = {self.command}",
            f"manifest.master_seed = {self.cfg['seed']}",
            f"manifest.version = {__version__}",
            f"manifest.started_at = {self.started_at}",
            f"manifest.wall_clock_seconds = {time.perf_counter() - self.started:.3f}",
            f"manifest.spec = {spec!r}",
            f"result.regime = {report.verdict}",
            f"result.partial_sum = {_fmt(report.partial_sum)}",
            f"result.partial_square_sum = {_fmt(report.partial_square_sum)}",
        ]
        lines += [f"result.{k} = {_fmt(v)}" for k, v in self.results]
        path = self.out / f"{self.cfg['experiment']}.manifest"
        path.write_text("\n".join(lines) + "\n")
        return path


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def cmd_variations(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    horizon = cfg["run.horizon"]
    env = spec.envelope()
    ns = np.arange(1, horizon + 1)
    v = env.values(ns)
    ps, pss = env.partial_sums(horizon), env.partial_square_sums(horizon)
    if spec.finite_range is not None:
        g = as_finite_range(spec)
        table, depth = g.g, g.k
        exact_beyond = True
    else:
        depth = cfg["run.depth"]
        table = CylinderFunction(spec.alphabet, depth, spec.table(depth))
        exact_beyond = False
    log_table = CylinderFunction(spec.alphabet, depth, np.log(table.values))
    rows = []
    for i, n in enumerate(ns):
        if n < depth or exact_beyond:
            var_g, var_log = variation(table, int(n)), variation(log_table, int(n))
        else:
            var_g = var_log = None
        rows.append((int(n), var_g, var_log, v[i], ps[i], pss[i]))
    _write_rows(run.path("variations"),
                ["n", "var_g", "var_log_g", "envelope", "partial_sum", "partial_sq_sum"], rows)
    run.record("total_sum", env.total_sum)
    run.record("total_square_sum", env.total_square_sum)
    run.record("var_table_depth", depth)


def cmd_iterate(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    f = parse_function(cfg["run.f"], spec.alphabet)
    profile = convergence_to_mean(spec, f, cfg["run.n_steps"], depth=cfg["run.depth"],
                                  tol=cfg["run.tol"])
    profile.to_csv(run.path("profile"))
    run.record("mu_f", profile.mean)
    run.record("method", profile.method)
    run.record("final_err", profile.err[-1])
    if profile.mean_bias_bound is not None:
        run.record("mean_bias_bound", profile.mean_bias_bound)


def cmd_invariant(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    if spec.finite_range is None:
        g = truncate(spec, cfg["run.depth"])
        run.record("method", f"truncated(k={cfg['run.depth']})")
        run.record("truncation_error", g.truncation_error)
    else:
        g = as_finite_range(spec)
        run.record("method", "exact")
    pi = invariant_measure(g, tol=cfg["run.tol"], max_iters=cfg["run.max_iters"])
    mu = measure_vector(g, pi, cfg["run.measure_depth"])
    mu.to_csv(run.path("measure"))
    f = parse_function(cfg["run.f"], spec.alphabet)
    run.record("duality_residual", duality_check(g, f, pi))


def cmd_simulate(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    ens = sample_paths(spec, cfg["family.anchor"], cfg["run.length"], cfg["run.replicas"],
                       cfg["seed"], window=cfg["run.window"], workers=cfg["workers"])
    mu = empirical_measure(ens, cfg["run.measure_depth"], cfg["run.burn_in"])
    mu.to_csv(run.path("measure"))
    ens.write_replica_csv(run.path("replicas"))
    if cfg["run.save_paths"]:
        ens.to_binary(run.path("paths", "bin"))
    f = parse_function(cfg["run.f"], spec.alphabet)
    mean, se = ergodic_average(f, ens, cfg["run.burn_in"])
    run.record("replica_seeds", run.path("replicas").name)
    run.record("f_mean", mean)
    run.record("f_se", se)
    run.record("window_error", ens.window_error)


def cmd_martingale(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    ens = likelihood_traces(spec, cfg["family.anchor"], cfg["run.anchor_tilde"],
                            cfg["run.length"], cfg["run.replicas"], cfg["seed"],
                            workers=cfg["workers"])
    if cfg["run.save_traces"]:
        ens.to_csv(run.path("traces"))
    rows = tightness_stat(ens, cfg["run.K_grid"])
    write_tightness_csv(rows, run.path("tightness"))
    _write_rows(run.path("replicas"), ["replica", "seed", "length"],
                [(i, int(s), ens.length) for i, s in enumerate(ens.seeds)])
    env = spec.envelope()
    run.record("max_increment_ratio", float(increment_ratios(ens, env, spec.delta).max()))
    run.record("min_A_increment", float(np.diff(ens.A, axis=1, prepend=0.0).min()))
    if ens.replicas >= 100:
        report = doob_check(ens, env)
        run.record("doob_identically_zero", report.identically_zero)
        run.record("C1", report.C1)
        run.record("C2", report.C2)


def cmd_rate(run: Run, spec: GFunction) -> None:
    cfg = run.cfg
    if cfg["run.profile"]:
        with open(cfg["run.profile"], newline="") as fh:
            errors = [float(r["err"]) for r in csv.DictReader(fh)]
        run.record("source", cfg["run.profile"])
    else:
        f = parse_function(cfg["run.f"], spec.alphabet)
        profile = convergence_to_mean(spec, f, cfg["run.n_steps"], depth=cfg["run.depth"],
                                      tol=cfg["run.tol"])
        errors = profile.err
        run.record("source", profile.method)
    fit = rate_fit(errors, floor=cfg["run.rate_floor"])
    _write_rows(run.path("rate"), ["quantity", "value"], fit.rows())
    run.record("report_label", fit.label)


COMMANDS: dict[str, tuple[Callable[[Run, GFunction], None], str]] = {
    "variations": (cmd_variations, "variation envelope, brute-force variations, partial sums"),
    "iterate": (cmd_iterate, "iterate the transfer operator and track sup|L^n f - mu(f)|"),
    "invariant": (cmd_invariant, "invariant g-measure of the (truncated) g-function"),
    "simulate": (cmd_simulate, "simulate g-chains and estimate the empirical measure"),
    "martingale": (cmd_martingale, "likelihood-ratio martingales and tightness table"),
    "rate": (cmd_rate, "EXPLORATORY geometric/polynomial fits of the convergence error"),
}


def _parse_set(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", help="master seed (unsigned 64-bit)")
        p.add_argument("--workers", help="parallel width; does not change results")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _parse_set(args.set)
        for key in ("out", "seed", "workers"):
            if getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        cfg = RunConfig.from_sources(args.config, overrides)
        spec = cfg.build_spec()
        run = Run(args.command, cfg)
        COMMANDS[args.command][0](run, spec)
        manifest = run.write_manifest(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TableLimitError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.command == "rate":
        print("EXPLORATORY rate fit; no convergence rate is claimed")
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

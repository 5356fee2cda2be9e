"""Monte-Carlo benchmark harness and CLI.

Runs a set of solvers on seeded instances of the two problem families,
writing one raw CSV per solver (``solver,run,iter,metric,value``), an
averaged CSV (``solver,iter,metric,mean``), a config dump, a per-run log of
initial-point hashes, and a sidecar log of diverged runs. Optionally renders
log-scale plots (SVG plus an equivalent gnuplot script).

Exit codes: 0 success, 2 configuration error, 3 divergence in at least one
run.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError, DivergenceError
from .problems import (
    gen_problem_hyperplane,
    gen_problem_iiduka,
    hyperplane_recast_f0,
    iiduka_recast_f0,
    sample_x0,
)
from .solvers import SolverConfig, run

DEFAULT_ITERS = {"iiduka": 2000, "hyperplane": 5000}
DEFAULT_ALPHA = 0.5
DEFAULT_F0_LAM = 100.0

SOLVER_NAMES = (
    "fm-hsdm",
    "fm-hsdm-ii",
    "fm-hsdm-iii",
    "hsdm",
    "hcgm",
    "admm",
    "pd-condat",
    "pd-cp",
    "fista",
)

METRICS = ("distance", "objective_gap", "fp_residual", "feasible")


@dataclass
class ExperimentConfig:
    problem: str = "iiduka"
    d: int = 10000
    p11: float = 1.0
    runs: int = 100
    iters: Optional[int] = None
    solvers: List[str] = dc_field(default_factory=lambda: ["fm-hsdm"])
    base_seed: int = 0
    output_dir: str = "bench_out"
    certificates: bool = False
    plots: bool = False

    def validate(self):
        if self.problem not in ("iiduka", "hyperplane"):
            raise ConfigError("problem must be 'iiduka' or 'hyperplane'")
        if self.d < 2:
            raise ConfigError("d must be at least 2")
        if not 0.0 < self.p11 <= 1.0:
            raise ConfigError("p11 must lie in (0, 1]")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.iters is None:
            self.iters = DEFAULT_ITERS[self.problem]
        if self.iters < 1:
            raise ConfigError("iters must be at least 1")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        for name in self.solvers:
            if name not in SOLVER_NAMES:
                raise ConfigError(
                    "unknown solver %r (choose from %s)" % (name, list(SOLVER_NAMES))
                )
        if self.problem == "iiduka" and "fm-hsdm-iii" in self.solvers:
            raise ConfigError(
                "fm-hsdm-iii needs a zero non-smooth part; use the hyperplane problem"
            )
        if self.problem == "iiduka" and "fista" in self.solvers:
            raise ConfigError("fista supports the hyperplane problem only")
        return self


def _solver_config(name, problem, cfg: ExperimentConfig):
    """Per-solver configuration with family defaults; returns
    (SolverConfig, uses_recast)."""
    L = problem.smooth.lipschitz_L
    alpha = DEFAULT_ALPHA
    certificates = cfg.certificates
    if name == "fm-hsdm":
        variant = "fm-hsdm" if problem.prox.kind != "zero" else "fm-hsdm-g0"
        lam = 0.99 * 2.0 * (1.0 - alpha) / L
        return (
            SolverConfig(
                variant=variant,
                alpha=alpha,
                lam=lam,
                max_iters=cfg.iters,
                record_certificates=certificates,
            ),
            False,
        )
    if name == "fm-hsdm-iii":
        lam = 0.99 * 2.0 * (1.0 - alpha) ** 2 / L
        return (
            SolverConfig(
                variant="fm-hsdm-iii",
                alpha=alpha,
                lam=lam,
                max_iters=cfg.iters,
                record_certificates=certificates,
            ),
            False,
        )
    if name == "fm-hsdm-ii":
        return (
            SolverConfig(
                variant="fm-hsdm-f0",
                alpha=alpha,
                lam=DEFAULT_F0_LAM,
                max_iters=cfg.iters,
                record_certificates=certificates,
            ),
            True,
        )
    return (
        SolverConfig(variant=name, alpha=alpha, max_iters=cfg.iters),
        False,
    )


def _gen_problem(cfg: ExperimentConfig, seed):
    if cfg.problem == "iiduka":
        return gen_problem_iiduka(cfg.d, cfg.p11, seed)
    return gen_problem_hyperplane(cfg.d, cfg.p11, seed)


def _recast(problem):
    if problem.meta["family"] == "iiduka":
        return iiduka_recast_f0(problem)
    return hyperplane_recast_f0(problem)


def _trace_metrics(trace, opt_value):
    n = len(trace)
    out = {
        "distance": np.asarray(trace.distance),
        "objective_gap": np.asarray(trace.objective) - opt_value,
        "fp_residual": np.asarray(trace.fp_residual),
        "feasible": np.asarray([1.0 if ok else 0.0 for ok in trace.feasible]),
    }
    for key, arr in out.items():
        if arr.shape[0] != n:
            raise RuntimeError("metric %s has inconsistent length" % key)
    return out


@dataclass
class CurveSet:
    """Per-solver averaged metric curves, uniform mean over completed runs."""

    curves: Dict[str, Dict[str, np.ndarray]]
    iters: int
    failures: List[str]


def run_experiment(cfg: ExperimentConfig):
    cfg.validate()
    os.makedirs(cfg.output_dir, exist_ok=True)
    raw: Dict[str, List[tuple]] = {name: [] for name in cfg.solvers}
    sums: Dict[str, Dict[str, np.ndarray]] = {
        name: {m: np.zeros(cfg.iters + 1) for m in METRICS} for name in cfg.solvers
    }
    counts: Dict[str, int] = {name: 0 for name in cfg.solvers}
    failures: List[str] = []
    run_log: List[str] = []

    for r in range(cfg.runs):
        seed = cfg.base_seed + r
        problem = _gen_problem(cfg, seed)
        x0 = sample_x0(problem, seed)
        run_log.append(
            "run=%d seed=%d x0_sha256=%s"
            % (r, seed, hashlib.sha256(x0.tobytes()).hexdigest())
        )
        recast_problem = None
        opt_value = problem.finite_objective(problem.known_minimizer)[0]
        for name in cfg.solvers:
            solver_cfg, uses_recast = _solver_config(name, problem, cfg)
            target = problem
            x0_solver = x0
            if uses_recast:
                if recast_problem is None:
                    recast_problem = _recast(problem)
                target = recast_problem
                if target.dim != problem.dim:
                    reps = target.dim // problem.dim
                    x0_solver = np.tile(x0, reps)
            solver_cfg.x0 = x0_solver
            try:
                trace = run(target, solver_cfg)
            except DivergenceError as exc:
                failures.append(
                    "run=%d solver=%s diverged at iteration %s" % (r, name, exc.iteration)
                )
                continue
            metrics = _trace_metrics(trace, opt_value)
            counts[name] += 1
            for metric in METRICS:
                arr = metrics[metric]
                sums[name][metric] += arr
                for it in range(arr.shape[0]):
                    raw[name].append((r, it, metric, float(arr[it])))

    curves: Dict[str, Dict[str, np.ndarray]] = {}
    for name in cfg.solvers:
        if counts[name] == 0:
            continue
        curves[name] = {
            metric: sums[name][metric] / counts[name] for metric in METRICS
        }

    _write_outputs(cfg, raw, curves, failures, run_log)
    if cfg.plots:
        emit_plots(os.path.join(cfg.output_dir, "averaged.csv"), cfg.output_dir)
    return CurveSet(curves=curves, iters=cfg.iters, failures=failures)


def _fmt(value):
    return repr(float(value))


def _write_outputs(cfg, raw, curves, failures, run_log):
    for name, rows in raw.items():
        path = os.path.join(cfg.output_dir, "%s.csv" % name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "run", "iter", "metric", "value"])
            for r, it, metric, value in rows:
                writer.writerow([name, r, it, metric, _fmt(value)])
    avg_path = os.path.join(cfg.output_dir, "averaged.csv")
    with open(avg_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "iter", "metric", "mean"])
        for name in cfg.solvers:
            if name not in curves:
                continue
            for metric in METRICS:
                arr = curves[name][metric]
                for it in range(arr.shape[0]):
                    writer.writerow([name, it, metric, _fmt(arr[it])])
    with open(os.path.join(cfg.output_dir, "config.json"), "w") as fh:
        json.dump(
            {
                "problem": cfg.problem,
                "d": cfg.d,
                "p11": cfg.p11,
                "runs": cfg.runs,
                "iters": cfg.iters,
                "solvers": list(cfg.solvers),
                "base_seed": cfg.base_seed,
                "certificates": cfg.certificates,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    with open(os.path.join(cfg.output_dir, "runs.log"), "w") as fh:
        fh.write("\n".join(run_log) + ("\n" if run_log else ""))
    with open(os.path.join(cfg.output_dir, "failures.log"), "w") as fh:
        fh.write("\n".join(failures) + ("\n" if failures else ""))


def emit_plots(curve_csv, out_dir):
    """Log-scale plot per metric from an averaged CSV: an SVG and an
    equivalent gnuplot script with its data file."""
    series: Dict[str, Dict[str, List[float]]] = {}
    with open(curve_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["solver", "iter", "metric", "mean"]:
            raise ConfigError("unexpected averaged CSV header: %s" % reader.fieldnames)
        for row in reader:
            series.setdefault(row["metric"], {}).setdefault(row["solver"], []).append(
                float(row["mean"])
            )
    if not series or not any(series.values()):
        raise ConfigError("averaged CSV contains no solver series")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for metric in ("distance", "objective_gap", "fp_residual"):
        if metric not in series:
            continue
        solvers = sorted(series[metric])
        columns = {s: np.maximum(np.abs(series[metric][s]), 1e-300) for s in solvers}
        n = len(next(iter(columns.values())))
        dat_path = os.path.join(out_dir, "%s.dat" % metric)
        with open(dat_path, "w") as fh:
            fh.write("# iter " + " ".join(solvers) + "\n")
            for it in range(n):
                fh.write(
                    "%d %s\n" % (it, " ".join(_fmt(columns[s][it]) for s in solvers))
                )
        gp_path = os.path.join(out_dir, "%s.gp" % metric)
        with open(gp_path, "w") as fh:
            fh.write("set logscale y\n")
            fh.write("set xlabel 'iteration'\n")
            fh.write("set ylabel '%s'\n" % metric)
            fh.write("set terminal svg\n")
            fh.write("set output '%s.gnuplot.svg'\n" % metric)
            parts = [
                "'%s.dat' using 1:%d with lines title '%s'" % (metric, i + 2, s)
                for i, s in enumerate(solvers)
            ]
            fh.write("plot " + ", \\\n     ".join(parts) + "\n")
        fig, ax = plt.subplots(figsize=(7, 5))
        for s in solvers:
            ax.semilogy(np.arange(n), columns[s], label=s)
        ax.set_xlabel("iteration")
        ax.set_ylabel(metric)
        ax.legend()
        svg_path = os.path.join(out_dir, "%s.svg" % metric)
        fig.savefig(svg_path, format="svg")
        plt.close(fig)
        written.extend([dat_path, gp_path, svg_path])
    return written


# -- configuration file ----------------------------------------------------


def _parse_toml_scalar(text):
    text = text.strip()
    if (text.startswith('"') and text.endswith('"')) or (
        text.startswith("'") and text.endswith("'")
    ):
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError("cannot parse config value %r" % text)


def load_config_file(path):
    """Read a flat TOML config. Uses the stdlib parser when available,
    otherwise a minimal key = value reader (strings, numbers, booleans and
    flat arrays)."""
    try:
        import tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except ImportError:
        pass
    data = {}
    with open(path) as fh:
        for raw_line in fh:
            line = raw_line.strip()
            if "#" in line:
                in_str = False
                for i, ch in enumerate(line):
                    if ch in "\"'":
                        in_str = not in_str
                    elif ch == "#" and not in_str:
                        line = line[:i].rstrip()
                        break
            if not line:
                continue
            if line.startswith("["):
                raise ConfigError("config tables are not supported: %r" % line)
            if "=" not in line:
                raise ConfigError("malformed config line: %r" % line)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if value.startswith("[") and value.endswith("]"):
                inner = value[1:-1].strip()
                data[key] = (
                    [_parse_toml_scalar(v) for v in inner.split(",") if v.strip()]
                    if inner
                    else []
                )
            else:
                data[key] = _parse_toml_scalar(value)
    return data


_CONFIG_KEYS = {
    "problem": str,
    "d": int,
    "p11": float,
    "runs": int,
    "iters": int,
    "solvers": list,
    "seed": int,
    "out": str,
    "certificates": bool,
    "plots": bool,
}


def build_experiment_config(args, file_data):
    def pick(flag, key, default):
        value = getattr(args, flag)
        if value is not None:
            return value
        if key in file_data:
            return file_data[key]
        return default

    for key in file_data:
        if key not in _CONFIG_KEYS:
            raise ConfigError("unknown config key %r" % key)
    solvers = pick("solvers", "solvers", ["fm-hsdm"])
    if isinstance(solvers, str):
        solvers = [s.strip() for s in solvers.split(",") if s.strip()]
    cfg = ExperimentConfig(
        problem=pick("problem", "problem", "iiduka"),
        d=int(pick("d", "d", 10000)),
        p11=float(pick("p11", "p11", 1.0)),
        runs=int(pick("runs", "runs", 100)),
        iters=pick("iters", "iters", None),
        solvers=list(solvers),
        base_seed=int(pick("seed", "seed", 0)),
        output_dir=pick("out", "out", "bench_out"),
        certificates=bool(pick("certificates", "certificates", False)),
        plots=bool(pick("plots", "plots", False)),
    )
    if cfg.iters is not None:
        cfg.iters = int(cfg.iters)
    return cfg.validate()


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Monte-Carlo benchmark for the constrained-minimization solvers",
    )
    parser.add_argument("--problem", choices=["iiduka", "hyperplane"], default=None)
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--p11", type=float, default=None)
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--iters", type=int, default=None)
    parser.add_argument(
        "--solvers", type=str, default=None, help="comma-separated solver names"
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument(
        "--certificates", action="store_const", const=True, default=None
    )
    parser.add_argument("--plots", action="store_const", const=True, default=None)
    parser.add_argument("--config", type=str, default=None, help="TOML config file")
    args = parser.parse_args(argv)
    try:
        file_data = load_config_file(args.config) if args.config else {}
        cfg = build_experiment_config(args, file_data)
    except (ConfigError, OSError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    if result.failures:
        print(
            "completed with %d diverged run(s); see failures.log"
            % len(result.failures),
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

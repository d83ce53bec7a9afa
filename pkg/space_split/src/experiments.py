"""
Experiment drivers behind the shell commands.

Each mode turns a validated ExperimentConfig into one table. Independent
tasks (seeds, sweep points) fan out to a process pool; results are merged in
task order, so the table does not depend on completion order. Numerical
failures are caught per task and recorded in the ``status`` column.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
import psutil
from scipy.stats import linregress

from .config import ExperimentConfig
from .emit import emit
from .errors import RunFailed, S3Error
from .oracles import convergence_probe, fd_sensitivity, lyapunov_exponents, polyfit_sensitivity
from .s3core import run, spread_samples
from .terminal import ColorPrinter

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

STATUS_OK = "ok"

RUN_COLUMNS = ["seed", "K", "stable", "unstable", "total", "stderr", "selected", "n_samples", "nudges", "status"]
SWEEP_COLUMNS = ["s", "seed", "K", "s3", "s3_stderr", "fd", "fd_stderr", "mean_J", "status"]
CONVERGE_COLUMNS = ["k", "delta_a", "delta_w", "delta_q", "delta_u"]
SCALING_N_COLUMNS = ["N", "seed", "K", "chains", "total", "reference", "rel_error", "status"]
SCALING_K_COLUMNS = ["K", "seed", "N", "total", "reference", "rel_error", "status"]
LYAPUNOV_COLUMNS = ["seed", "index", "exponent", "stderr", "status"]
FD_COLUMNS = ["seed", "value", "stderr", "mean_plus", "mean_minus", "n_samples", "status"]


@dataclass
class ExperimentOutcome:
    mode: str
    table: pd.DataFrame
    path: str = ""
    exit_code: int = EXIT_OK
    failures: List[str] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)


def default_workers():
    return psutil.cpu_count(logical=True) or 1


def run_pool(func, tasks, workers=None):
    """Map ``func`` over ``tasks`` in order; one worker runs in process."""
    tasks = list(tasks)
    workers = min(workers or default_workers(), max(len(tasks), 1))
    if workers == 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _failure(exc):
    if isinstance(exc, RunFailed):
        return f"failed at step {exc.step}: {exc.cause}"
    return f"failed: {exc}"


# ----------------------------------------------------------------------
# Task functions (module level so the pool can pickle them)
# ----------------------------------------------------------------------
def _s3_task(task):
    """(config dict, seed, s, n_steps, n_chains) -> (SensitivityResult or None, status)."""
    data, seed, s, n_steps, n_chains = task
    cfg = ExperimentConfig.from_dict(data)
    map_system = cfg.build_map(s)
    try:
        result = run(map_system, cfg.build_observable(map_system), cfg.s3_config(seed, n_steps, n_chains))
        return result, STATUS_OK
    except RunFailed as exc:
        return exc.partial, _failure(exc)
    except S3Error as exc:
        return None, _failure(exc)


def _fd_task(task):
    data, seed, s = task
    cfg = ExperimentConfig.from_dict(data)
    map_system = cfg.build_map(s)
    try:
        return fd_sensitivity(map_system, cfg.build_observable(map_system), cfg.fd_config(seed)), STATUS_OK
    except S3Error as exc:
        return None, _failure(exc)


def _lyapunov_task(task):
    data, seed = task
    cfg = ExperimentConfig.from_dict(data)
    try:
        exponents, stderr = lyapunov_exponents(
            cfg.build_map(), cfg.n_steps, cfg.warmup, seed, cfg.n_chains, return_stderr=True
        )
        return exponents, stderr, STATUS_OK
    except S3Error as exc:
        return None, None, _failure(exc)


# ----------------------------------------------------------------------
# Modes
# ----------------------------------------------------------------------
def _run_rows(seed, result, status):
    if result is None:
        return [dict({c: np.nan for c in RUN_COLUMNS}, seed=seed, K=-1, selected=False, n_samples=0,
                     nudges=0, status=status)]
    nudges = int(result.diagnostics.get("nudges", 0))
    return [
        dict(row, seed=seed, n_samples=result.n_samples * result.n_chains, nudges=nudges, status=status)
        for row in result.to_rows()
    ]


def _mode_run(cfg, workers, verbose):
    data = cfg.to_dict()
    outputs = run_pool(_s3_task, [(data, seed, 0.0, None, None) for seed in cfg.seeds], workers)
    rows = []
    for seed, (result, status) in zip(cfg.seeds, outputs):
        rows.extend(_run_rows(seed, result, status))
        if verbose and result is not None:
            ColorPrinter.cyan(
                f"  seed {seed}: total {result.total:+.6e} (K={result.selected_K}, stderr {result.stderr:.2e}) [{status}]"
            )
    return pd.DataFrame(rows, columns=RUN_COLUMNS), {}


def _mode_fd(cfg, workers, verbose):
    data = cfg.to_dict()
    outputs = run_pool(_fd_task, [(data, seed, 0.0) for seed in cfg.seeds], workers)
    rows = []
    for seed, (fd, status) in zip(cfg.seeds, outputs):
        if fd is None:
            rows.append({"seed": seed, "value": np.nan, "stderr": np.nan, "mean_plus": np.nan,
                         "mean_minus": np.nan, "n_samples": 0, "status": status})
            continue
        rows.append({"seed": seed, "value": fd.value, "stderr": fd.stderr, "mean_plus": fd.mean_plus,
                     "mean_minus": fd.mean_minus, "n_samples": fd.n_samples * fd.n_chains, "status": status})
        if verbose:
            ColorPrinter.cyan(f"  seed {seed}: d<J>/ds = {fd.value:+.6e} +/- {fd.stderr:.2e}")
    return pd.DataFrame(rows, columns=FD_COLUMNS), {}


def _mode_sweep(cfg, workers, verbose):
    data = cfg.to_dict()
    points = [(s, seed) for s in cfg.sweep for seed in cfg.seeds]
    s3_out = run_pool(_s3_task, [(data, seed, s, None, None) for s, seed in points], workers)
    fd_out = run_pool(_fd_task, [(data, seed, s) for s, seed in points], workers)

    rows = []
    for (s, seed), (result, s3_status), (fd, fd_status) in zip(points, s3_out, fd_out):
        statuses = [st for st in (s3_status, fd_status) if st != STATUS_OK]
        rows.append(
            {
                "s": s,
                "seed": seed,
                "K": result.selected_K if result is not None else -1,
                "s3": result.total if result is not None else np.nan,
                "s3_stderr": result.stderr if result is not None else np.nan,
                "fd": fd.value if fd is not None else np.nan,
                "fd_stderr": fd.stderr if fd is not None else np.nan,
                "mean_J": 0.5 * (fd.mean_plus + fd.mean_minus) if fd is not None else np.nan,
                "status": "; ".join(statuses) or STATUS_OK,
            }
        )
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    if cfg.fit_degree is not None:
        means = table.groupby("s", sort=True)["mean_J"].mean()
        if means.notna().all():
            slopes = polyfit_sensitivity(means.index.to_numpy(), means.to_numpy(), cfg.fit_degree)
            table["fit_reference"] = table["s"].map(dict(zip(means.index, slopes)))
        else:
            table["fit_reference"] = np.nan
    if verbose:
        for s, group in table.groupby("s", sort=True):
            ColorPrinter.cyan(f"  s = {s:+.4f}: S3 {group['s3'].mean():+.6e}   FD {group['fd'].mean():+.6e}")
    return table, {}


def _decay_slope(k, series):
    """Least-squares slope of log10(series) over its positive, decaying part."""
    series = np.asarray(series, dtype=float)
    positive = series > 0
    if np.count_nonzero(positive) < 2:
        return float("nan")
    start = int(np.argmax(series))
    mask = positive & (np.arange(series.size) >= start)
    if np.count_nonzero(mask) < 2:
        return float("nan")
    return float(linregress(np.asarray(k, dtype=float)[mask], np.log10(series[mask])).slope)


def _mode_converge(cfg, workers, verbose):
    map_system = cfg.build_map()
    observable = cfg.build_observable(map_system)
    s3_cfg = cfg.s3_config(cfg.seeds[0])
    table = convergence_probe(
        map_system, observable, s3_cfg, (cfg.seeds[0], cfg.seeds[1]), cfg.probe_steps, cfg.vary_frame
    )
    summary = {
        "slope_delta_a": _decay_slope(table["k"], table["delta_a"]),
        "slope_delta_w": _decay_slope(table["k"], table["delta_w"]),
    }
    if verbose:
        ColorPrinter.cyan(
            f"  log10 decay per step: delta_a {summary['slope_delta_a']:.4f}, "
            f"delta_w {summary['slope_delta_w']:.4f}; final delta_a {table['delta_a'].iloc[-1]:.3e}"
        )
    return table[CONVERGE_COLUMNS], summary


def _scaling_reference(cfg, workers, verbose):
    if cfg.reference is not None:
        return cfg.reference
    if verbose:
        ColorPrinter.info("Computing finite-difference reference...")
    (fd, status), = run_pool(_fd_task, [(cfg.to_dict(), cfg.seeds[0], 0.0)], 1)
    if fd is None:
        raise RunFailed(0, status)
    return fd.value


def _relative_error(total, reference):
    if reference == 0:
        return abs(total)
    return abs(total - reference) / abs(reference)


def _mode_scaling(cfg, workers, verbose):
    reference = _scaling_reference(cfg, workers, verbose)
    data = cfg.to_dict()
    rows = []

    if cfg.scaling_axis == "n":
        # N counts accepted samples over all chains of one seed
        layout = {n: spread_samples(n, cfg.n_chains, cfg.warmup, max(cfg.k_grid)) for n in cfg.scaling_n}
        points = [(n, seed) for n in cfg.scaling_n for seed in cfg.seeds]
        tasks = [(data, seed, 0.0, layout[n][1], layout[n][0]) for n, seed in points]
        outputs = run_pool(_s3_task, tasks, workers)
        for (n, seed), (result, status) in zip(points, outputs):
            k = cfg.select_k if cfg.select_k is not None else max(cfg.k_grid)
            total = result.total_by_K[k] if result is not None else np.nan
            rows.append({"N": n, "seed": seed, "K": k, "chains": layout[n][0], "total": total,
                         "reference": reference, "rel_error": _relative_error(total, reference),
                         "status": status})
        table = pd.DataFrame(rows, columns=SCALING_N_COLUMNS)
        mean_error = table.groupby("N", sort=True)["rel_error"].mean()
        fit = linregress(np.log10(mean_error.index.to_numpy(dtype=float)), np.log10(mean_error.to_numpy()))
        summary = {"loglog_slope": float(fit.slope)}
    else:
        outputs = run_pool(_s3_task, [(data, seed, 0.0, None, None) for seed in cfg.seeds], workers)
        for seed, (result, status) in zip(cfg.seeds, outputs):
            for k in cfg.k_grid:
                total = result.total_by_K[k] if result is not None else np.nan
                rows.append({"K": k, "seed": seed, "N": cfg.n_steps, "total": total, "reference": reference,
                             "rel_error": _relative_error(total, reference), "status": status})
        table = pd.DataFrame(rows, columns=SCALING_K_COLUMNS)
        mean_error = table.groupby("K", sort=True)["rel_error"].mean()
        summary = {"best_K": float(mean_error.idxmin())}

    if verbose:
        for key, value in summary.items():
            ColorPrinter.cyan(f"  {key}: {value:.4f}")
    return table, summary


def _mode_lyapunov(cfg, workers, verbose):
    data = cfg.to_dict()
    outputs = run_pool(_lyapunov_task, [(data, seed) for seed in cfg.seeds], workers)
    rows = []
    for seed, (exponents, stderr, status) in zip(cfg.seeds, outputs):
        if exponents is None:
            rows.append({"seed": seed, "index": -1, "exponent": np.nan, "stderr": np.nan, "status": status})
            continue
        for i, (value, err) in enumerate(zip(exponents, stderr)):
            rows.append({"seed": seed, "index": i + 1, "exponent": value, "stderr": err, "status": status})
        if verbose:
            ColorPrinter.cyan(f"  seed {seed}: " + ", ".join(f"{v:.6f}" for v in exponents))
    return pd.DataFrame(rows, columns=LYAPUNOV_COLUMNS), {}


MODE_HANDLERS = {
    "run": _mode_run,
    "sweep": _mode_sweep,
    "converge": _mode_converge,
    "scaling": _mode_scaling,
    "lyapunov": _mode_lyapunov,
    "fd": _mode_fd,
}


def default_output(cfg):
    return f"s3_{cfg.mode}_{cfg.map_name}.{cfg.format}"


def run_experiment(cfg, verbose=False, write=True):
    """
    Execute a validated config and write its result file.

    Returns:
        ExperimentOutcome: the table, the path written, the exit code
        (0, or 3 when any task failed numerically) and a short summary.

    Raises:
        OSError: when the result file cannot be written.
    """
    cfg = cfg.validate()
    if verbose:
        ColorPrinter.header(f"{cfg.mode} - {cfg.map_name}")
        ColorPrinter.info(f"params={list(cfg.params)} dir={list(cfg.perturb_dir)} J={cfg.observable} seeds={list(cfg.seeds)}")

    try:
        table, summary = MODE_HANDLERS[cfg.mode](cfg, cfg.workers, verbose)
    except RunFailed as exc:
        ColorPrinter.error(str(exc))
        return ExperimentOutcome(cfg.mode, pd.DataFrame(), exit_code=EXIT_NUMERICAL, failures=[_failure(exc)])

    failures = []
    if "status" in table.columns:
        failures = sorted(set(st for st in table["status"] if st != STATUS_OK))
    outcome = ExperimentOutcome(
        mode=cfg.mode,
        table=table,
        exit_code=EXIT_NUMERICAL if failures else EXIT_OK,
        failures=failures,
        summary=summary,
    )
    if write:
        outcome.path = emit(table, cfg.output or default_output(cfg), cfg.format, cfg.to_dict(), timestamp=cfg.timestamp)
        if verbose:
            ColorPrinter.success(f"Wrote {len(table)} row(s) to {outcome.path}")
    for failure in failures:
        ColorPrinter.warning(failure)
    return outcome

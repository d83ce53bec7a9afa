"""
Reference computations that check S3 from the outside.

The finite-difference and mean-value oracles only iterate the primal map;
the Lyapunov oracle only runs the frame recursion; the convergence check
steps two S3 replicas over a shared trajectory.
"""

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial

from .linalg import qr_positive, symmetric_index
from .s3core import (
    DEFAULT_BATCHES,
    DEFAULT_WARMUP,
    UnstableFrame,
    advance,
    advance_frame,
    batch_stderr,
    init_state,
    seed_streams,
)
from .terminal import ColorPrinter


@dataclass
class FdConfig:
    delta_s: float = 0.01
    n_samples: int = 1_000_000
    warmup: int = DEFAULT_WARMUP
    seed: int = 0
    n_chains: int = 1
    n_batches: int = DEFAULT_BATCHES

    def validate(self):
        if not self.delta_s > 0:
            raise ValueError(f"delta_s must be > 0, got {self.delta_s}")
        if self.n_samples <= self.warmup:
            raise ValueError(f"n_samples ({self.n_samples}) must exceed warmup ({self.warmup})")
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")


@dataclass
class FdResult:
    value: float
    stderr: float
    mean_plus: float
    mean_minus: float
    n_samples: int
    n_chains: int


def _lockstep_batches(maps, observable, n_samples, warmup, seed, n_chains, n_batches, verbose=False, label="mean"):
    """
    Iterate every map from the same seeded start and collect per-batch sums of J.

    Returns:
        tuple: (sums (len(maps), n_chains, n_batches), counts (n_batches,)).
    """
    x_rng, _ = seed_streams(seed)
    x0, _ = maps[0].nudge(maps[0].sample_initial(x_rng, n_chains))
    states = [x0.copy() for _ in maps]
    sums = np.zeros((len(maps), n_chains, n_batches))
    counts = np.zeros(n_batches, dtype=np.int64)
    total = warmup + n_samples
    report_every = max(total // 10, 1)

    for k in range(total):
        if k >= warmup:
            batch = (k - warmup) * n_batches // n_samples
            for i, x in enumerate(states):
                sums[i, :, batch] += observable.evaluate(x)
            counts[batch] += 1
        states = [m.nudge(m.apply(x))[0] for m, x in zip(maps, states)]
        if verbose and (k + 1) % report_every == 0:
            ColorPrinter.progress(label, k + 1, total)
    return sums, counts


def _batch_means(sums, counts):
    used = counts > 0
    return np.mean(sums[..., used], axis=-2) / counts[used]


def mean_observable(map_system, observable, n_samples, warmup=DEFAULT_WARMUP, seed=0, n_chains=1,
                    n_batches=DEFAULT_BATCHES, verbose=False):
    """
    Long-time average <J> over ``n_samples`` post-warmup states per chain.

    Returns:
        tuple: (mean, batch-means standard error).
    """
    sums, counts = _lockstep_batches(
        [map_system], observable, n_samples, warmup, seed, n_chains, n_batches, verbose, "mean"
    )
    means = _batch_means(sums, counts)[0]
    return float(np.sum(sums) / (n_chains * n_samples)), batch_stderr(means)


def fd_sensitivity(map_system, observable, fd=None, verbose=False):
    """
    Central difference (<J>(s + ds) - <J>(s - ds)) / (2 ds) along perturb_dir.

    Both endpoint trajectories start from the same seeded state, and the
    standard error comes from batch means of the per-sample differences.
    """
    fd = fd or FdConfig()
    fd.validate()
    maps = [map_system.shifted(fd.delta_s), map_system.shifted(-fd.delta_s)]
    if verbose:
        ColorPrinter.info(f"[fd] {map_system!r}, ds={fd.delta_s}, N={fd.n_samples}, chains={fd.n_chains}")
    sums, counts = _lockstep_batches(
        maps, observable, fd.n_samples, fd.warmup, fd.seed, fd.n_chains, fd.n_batches, verbose, "fd"
    )
    norm = float(fd.n_chains * fd.n_samples)
    mean_plus = float(np.sum(sums[0]) / norm)
    mean_minus = float(np.sum(sums[1]) / norm)
    diff_batches = _batch_means(sums[0] - sums[1], counts) / (2.0 * fd.delta_s)
    return FdResult(
        value=(mean_plus - mean_minus) / (2.0 * fd.delta_s),
        stderr=batch_stderr(diff_batches),
        mean_plus=mean_plus,
        mean_minus=mean_minus,
        n_samples=fd.n_samples,
        n_chains=fd.n_chains,
    )


def lyapunov_exponents(map_system, n_steps, warmup=DEFAULT_WARMUP, seed=0, n_chains=1,
                       n_batches=DEFAULT_BATCHES, return_stderr=False):
    """
    The m leading Lyapunov exponents as time averages of log R_ii.

    Returns:
        ndarray: exponents in descending order; with ``return_stderr`` a
        tuple (exponents, batch-means standard errors).
    """
    if n_steps <= warmup:
        raise ValueError(f"n_steps ({n_steps}) must exceed warmup ({warmup})")
    x_rng, init_rng = seed_streams(seed)
    n, m = map_system.dim, map_system.unstable_dim
    x, _ = map_system.nudge(map_system.sample_initial(x_rng, n_chains))
    q = qr_positive(init_rng.standard_normal((n_chains, n, m))).q
    samples = n_steps - warmup
    sums = np.zeros((n_chains, n_batches, m))
    counts = np.zeros(n_batches, dtype=np.int64)

    for k in range(n_steps):
        pair = qr_positive(np.matmul(map_system.jacobian(x), q))
        q = pair.q
        if k >= warmup:
            batch = (k - warmup) * n_batches // samples
            sums[:, batch] += np.log(np.diagonal(pair.r, axis1=-2, axis2=-1))
            counts[batch] += 1
        x, _ = map_system.nudge(map_system.apply(x))

    exponents = np.sum(sums, axis=(0, 1)) / (n_chains * samples)
    order = np.argsort(exponents)[::-1]
    if not return_stderr:
        return exponents[order]
    used = counts > 0
    batch_means = np.mean(sums[:, used], axis=0) / counts[used, None]
    stderr = np.array([batch_stderr(batch_means[:, i]) for i in range(m)])
    return exponents[order], stderr[order]


def _column_signs(q_first, q_second):
    """(B, m) signs s with q_second^i * s_i the column closest to q_first^i."""
    dots = np.einsum("...si,...si->...i", q_first, q_second)
    return np.where(dots < 0.0, -1.0, 1.0)


def _differences(first, second):
    m = first.frame.q.shape[-1]
    signs = _column_signs(first.frame.q, second.frame.q)
    rows, cols = symmetric_index(m)
    a_second = second.bundle.a * (signs[..., rows] * signs[..., cols])[..., None]
    w_second = second.tangent.w * signs[..., None]
    q_second = second.frame.q * signs[..., None, :]
    return {
        "delta_a": float(np.max(np.linalg.norm(first.bundle.a - a_second, axis=(-2, -1)))),
        "delta_w": float(np.max(np.linalg.norm(first.tangent.w - w_second, axis=(-2, -1)))),
        "delta_q": float(np.max(np.linalg.norm(first.frame.q - q_second, axis=(-2, -1)))),
    }


def convergence_probe(map_system, observable, config, seed_pair, n_steps=None, vary_frame=False):
    """
    Step two S3 replicas over one primal trajectory and record how fast
    their recursions forget the initialization.

    Both replicas draw x0 from ``config.seed``; (a0, w0) come from the two
    ``seed_pair`` streams. Q0 is shared unless ``vary_frame`` is set.

    The frame recursion keeps the sign of every column of Q, so frames are
    compared column by column up to sign, with a^{ij} and w^i of the second
    replica flipped to match. u does not depend on those signs.

    Returns:
        DataFrame: columns k, delta_a, delta_w, delta_q, delta_u (max over chains).
    """
    if len(seed_pair) != 2:
        raise ValueError(f"seed_pair needs exactly two seeds, got {list(seed_pair)}")
    n_steps = config.n_steps if n_steps is None else n_steps
    replicas = [
        init_state(map_system, replace(config, init_seed=s, record_trace=False), observable)
        for s in seed_pair
    ]
    first, second = replicas
    if not vary_frame:
        second.frame = replace(first.frame, q=first.frame.q.copy())

    rows = []
    for k in range(n_steps + 1):
        row = {"k": k, **_differences(first, second)}
        row["delta_u"] = (
            float(np.max(np.abs(first.accumulator.latest() - second.accumulator.latest()))) if k > 0 else 0.0
        )
        rows.append(row)
        if k < n_steps:
            advance(first)
            advance(second)
    return pd.DataFrame(rows, columns=["k", "delta_a", "delta_w", "delta_q", "delta_u"])


def tangent_growth_probe(map_system, n_steps, seed=0):
    """
    Norms of the conventional tangent u_{k+1} = Dphi_k u_k + chi_{k+1} next
    to the regularized v recursion on the same trajectory.

    The conventional tangent is renormalized whenever it gets large and its
    size is carried as a log, so the series stays finite however long it runs.

    Returns:
        DataFrame: columns k, log10_conventional, log10_regularized.
    """
    x_rng, init_rng = seed_streams(seed)
    n, m = map_system.dim, map_system.unstable_dim
    x, _ = map_system.nudge(map_system.sample_initial(x_rng, 1))
    q0 = qr_positive(init_rng.standard_normal((1, n, m))).q
    eye = np.eye(m)[None]
    frame = UnstableFrame(q=q0, r=eye.copy(), r_inv=eye.copy())
    u = np.zeros((1, n))
    v = np.zeros((1, n))
    log_scale = 0.0
    rows = []
    for k in range(n_steps + 1):
        u_norm = float(np.linalg.norm(u))
        rows.append(
            {
                "k": k,
                "log10_conventional": np.log10(u_norm) + log_scale / np.log(10.0) if u_norm > 0 else -np.inf,
                "log10_regularized": np.log10(float(np.linalg.norm(v))) if np.any(v) else -np.inf,
            }
        )
        if k == n_steps:
            break
        jac = map_system.jacobian(x)
        chi = map_system.perturbation(x)
        u = np.einsum("...ij,...j->...i", jac, u) + chi * np.exp(-log_scale)
        frame = advance_frame(frame, jac)
        f = np.einsum("...ij,...j->...i", jac, v) + chi
        v = f - np.einsum("...si,...i->...s", frame.q, np.einsum("...si,...s->...i", frame.q, f))
        size = float(np.linalg.norm(u))
        if size > 1e100:
            u = u / size
            log_scale += np.log(size)
        x, _ = map_system.nudge(map_system.apply(x))
    return pd.DataFrame(rows, columns=["k", "log10_conventional", "log10_regularized"])


def polyfit_sensitivity(s_grid, means, degree, at=None):
    """
    Differentiate a least-squares polynomial fit of <J>(s).

    Args:
        s_grid: sweep values.
        means: <J> at each sweep value.
        degree: polynomial degree, smaller than the number of points.
        at: where to evaluate the derivative (default: ``s_grid``).

    Returns:
        ndarray: d<J>/ds of the fit.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    means = np.asarray(means, dtype=float)
    if s_grid.shape != means.shape:
        raise ValueError(f"s_grid and means differ in shape: {s_grid.shape} vs {means.shape}")
    if not 0 <= degree < s_grid.size:
        raise ValueError(f"degree must be in [0, {s_grid.size - 1}] for {s_grid.size} points, got {degree}")
    fit = Polynomial.fit(s_grid, means, degree)
    return fit.deriv()(s_grid if at is None else np.asarray(at, dtype=float))

"""
Space-split sensitivity (S3) recursions for discrete maps.

One call to :func:`advance` performs a full time step k -> k+1:

    accumulate (state at k) -> frame -> second order a -> dR, g
    -> regularized tangent v, c -> p, b -> w -> u_{k+1} -> primal step

All arrays carry a leading chain axis B; chains are independent
trajectories advanced in lockstep and averaged together at the end.

Shapes (n = state dim, m = unstable dim, P = m(m+1)/2):
    q (B, n, m)   r, r_inv (B, m, m)
    a (B, P, n) packed i >= j      p (B, m, m, n) p[i, j]
    dr (B, m, m, m) dr[l] = d_{xi^l} R     g, c (B, m)    b (B, m, m)
    v (B, n)      w (B, m, n) w[i]          grad_f (B, n, m)
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import NonFinite, RankDeficient, RunFailed, Singular
from .linalg import (
    check_finite,
    congruence_rescale,
    packed_size,
    qr_positive,
    symmetric_index,
    unpack_symmetric,
    upper_tri_inverse,
)
from .terminal import ColorPrinter

DEFAULT_K_GRID = (1, 2, 3, 5, 8, 11, 16, 20)
DEFAULT_WARMUP = 100
DEFAULT_BATCHES = 100
MIN_CHAIN_SAMPLES = 1000


@dataclass
class S3Config:
    """Run settings for :func:`run`."""

    n_steps: int = 1_000_000
    warmup: int = DEFAULT_WARMUP
    k_grid: Sequence[int] = DEFAULT_K_GRID
    select_k: Optional[int] = None
    n_chains: int = 1
    seed: int = 0
    # Separate stream for Q0, a0, w0; the primal x0 always comes from ``seed``
    init_seed: Optional[int] = None
    deterministic_init: bool = False
    center_observable: bool = False
    record_trace: bool = False
    n_batches: int = DEFAULT_BATCHES
    unstable_dim: Optional[int] = None

    def __post_init__(self):
        self.k_grid = tuple(sorted(set(int(k) for k in self.k_grid)))

    @property
    def k_max(self):
        return max(self.k_grid) if self.k_grid else 0

    def validate(self, map_system):
        """Raise ValueError for settings the recursion cannot run with."""
        if self.unstable_dim is not None and self.unstable_dim != map_system.unstable_dim:
            raise ValueError(
                f"unstable_dim {self.unstable_dim} does not match map '{map_system.NAME}' "
                f"(m = {map_system.unstable_dim})"
            )
        if self.warmup < 1:
            raise ValueError(f"warmup must be >= 1, got {self.warmup}")
        if not self.k_grid or min(self.k_grid) < 0:
            raise ValueError(f"k_grid must hold non-negative integers, got {list(self.k_grid)}")
        if self.n_steps <= self.warmup + self.k_max:
            raise ValueError(
                f"n_steps ({self.n_steps}) must exceed warmup ({self.warmup}) + max(k_grid) ({self.k_max})"
            )
        if self.select_k is not None and self.select_k not in self.k_grid:
            raise ValueError(f"select_k {self.select_k} is not in k_grid {list(self.k_grid)}")
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if self.n_batches < 2:
            raise ValueError(f"n_batches must be >= 2, got {self.n_batches}")


@dataclass
class UnstableFrame:
    """Orthonormal basis q of the unstable subspace with the rescaling r and its inverse."""

    q: np.ndarray
    r: np.ndarray
    r_inv: np.ndarray


@dataclass
class SecondOrderBundle:
    a: np.ndarray
    p: np.ndarray
    dr: np.ndarray


@dataclass
class RegularizedTangent:
    v: np.ndarray
    w: np.ndarray
    c: np.ndarray
    b: np.ndarray
    g: np.ndarray
    grad_f: np.ndarray


@dataclass
class StepEvaluation:
    """Everything the step needs from the map and the observable at x_k."""

    jacobian: np.ndarray
    chi: np.ndarray
    chi_jacobian: np.ndarray
    j_value: np.ndarray
    j_gradient: np.ndarray


@dataclass
class SensitivityResult:
    stable: float
    unstable_by_K: Dict[int, float]
    total_by_K: Dict[int, float]
    selected_K: int
    total: float
    stderr_by_K: Dict[int, float] = field(default_factory=dict)
    stable_stderr: float = float("nan")
    n_samples: int = 0
    n_chains: int = 1
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def stderr(self):
        return self.stderr_by_K.get(self.selected_K, float("nan"))

    def to_rows(self):
        """Long-format rows, one per K."""
        return [
            {
                "K": k,
                "stable": self.stable,
                "unstable": self.unstable_by_K[k],
                "total": self.total_by_K[k],
                "stderr": self.stderr_by_K.get(k, float("nan")),
                "selected": k == self.selected_K,
            }
            for k in sorted(self.total_by_K)
        ]


def select_truncation(k_grid, totals, stderr_by_k=None):
    """
    Pick K where the estimates stop settling.

    Successive differences |total(K_{i+1}) - total(K_i)| shrink while the
    truncation bias decays and grow once the variance takes over; the K
    preceding the first growth is returned (the last K if they never grow).

    A difference counts only when it exceeds the standard error of
    total(K_{i+1}) from ``stderr_by_k``. Leading differences that do not
    count are skipped: the window has not reached the correlated part of
    the observable yet.
    """
    ks = sorted(k_grid)
    if len(ks) < 3:
        return ks[-1]
    diffs = [abs(totals[ks[i + 1]] - totals[ks[i]]) for i in range(len(ks) - 1)]
    noise = [(stderr_by_k or {}).get(k, 0.0) for k in ks[1:]]
    significant = [d > (e if np.isfinite(e) else 0.0) for d, e in zip(diffs, noise)]
    if not any(significant):
        return ks[-1]
    start = significant.index(True)
    for i in range(start + 1, len(diffs)):
        if significant[i] and diffs[i] > diffs[i - 1]:
            return ks[i]
    return ks[-1]


def spread_samples(n_samples, max_chains, warmup, k_max, min_chain_samples=MIN_CHAIN_SAMPLES):
    """
    Split a budget of accepted samples over lockstep chains.

    Uses as many chains as possible, up to ``max_chains``, while keeping at
    least ``min_chain_samples`` per chain. A chain accepts its samples from
    step max(warmup, k_max) on.

    Returns:
        tuple: (n_chains, n_steps) with n_chains * (n_steps - max(warmup, k_max)) >= n_samples.
    """
    chains = max(1, min(max_chains, n_samples // min_chain_samples))
    per_chain = -(-n_samples // chains)
    n_steps = max(warmup, k_max) + per_chain
    return chains, max(n_steps, warmup + k_max + 1)


class SensitivityAccumulator:
    """
    Ergodic sums of the stable integrand DJ.v and of the windowed unstable
    integrand -J_k (u_k + ... + u_{k-K+1}) for every K of the grid at once.

    A sample is taken only when k >= warmup and the ring of past u values is
    full, so every K-window sums exactly K valid entries.
    """

    def __init__(self, k_grid, n_chains, warmup, n_steps, n_batches=DEFAULT_BATCHES, center=False):
        self.k_grid = tuple(sorted(k_grid))
        self.k_max = max(self.k_grid) if self.k_grid else 0
        self.warmup = warmup
        self.center = center
        self.n_batches = n_batches
        self._expected = max(n_steps - warmup, 1)
        self._size = max(self.k_max, 1)
        self.u_ring = np.zeros((n_chains, self._size))
        self._head = -1
        self.ring_count = 0
        self.j_count = 0
        self.stable_sum = np.zeros(n_chains)
        self.unstable_sums = np.zeros((n_chains, len(self.k_grid)))
        self._j_sum = np.zeros(n_chains)
        self._batch_stable = np.zeros((n_chains, n_batches))
        self._batch_unstable = np.zeros((n_chains, n_batches, len(self.k_grid)))
        self._batch_count = np.zeros(n_batches, dtype=np.int64)
        self._k_index = np.array(self.k_grid, dtype=np.int64) - 1

    def push(self, u):
        """Store u_{k+1} as the newest ring entry."""
        self._head = (self._head + 1) % self._size
        self.u_ring[:, self._head] = u
        self.ring_count += 1

    def latest(self):
        """The newest u per chain (zeros before the first push)."""
        if self.ring_count == 0:
            return np.zeros(self.u_ring.shape[0])
        return self.u_ring[:, self._head].copy()

    def window_sums(self):
        """(B, len(k_grid)) sums of the last K ring entries for each K."""
        order = (self._head - np.arange(self._size)) % self._size
        csum = np.cumsum(self.u_ring[:, order], axis=1)
        sums = np.zeros((self.u_ring.shape[0], len(self.k_grid)))
        positive = self._k_index >= 0
        sums[:, positive] = csum[:, self._k_index[positive]]
        return sums

    def accumulate(self, k, j_value, j_gradient, v):
        """Add the samples of step k. Returns False while warming up."""
        if k < self.warmup or self.ring_count < self.k_max:
            return False
        stable_term = np.sum(j_gradient * v, axis=-1)
        weight = j_value
        if self.center:
            self._j_sum += j_value
            weight = j_value - self._j_sum / (self.j_count + 1)
        unstable_term = -weight[:, None] * self.window_sums()

        self.stable_sum += stable_term
        self.unstable_sums += unstable_term
        batch = min(self.j_count * self.n_batches // self._expected, self.n_batches - 1)
        self._batch_stable[:, batch] += stable_term
        self._batch_unstable[:, batch] += unstable_term
        self._batch_count[batch] += 1
        self.j_count += 1
        return True

    def result(self, select_k=None, diagnostics=None):
        """Normalize the sums by the number of accepted samples."""
        n_chains = self.stable_sum.shape[0]
        norm = float(n_chains * self.j_count)
        stable = float(np.sum(self.stable_sum) / norm)
        unstable = np.sum(self.unstable_sums, axis=0) / norm
        unstable_by_k = {k: float(unstable[i]) for i, k in enumerate(self.k_grid)}
        total_by_k = {k: stable + unstable_by_k[k] for k in self.k_grid}

        used = self._batch_count > 0
        counts = self._batch_count[used].astype(float)
        stable_batches = np.mean(self._batch_stable[:, used], axis=0) / counts
        unstable_batches = np.mean(self._batch_unstable[:, used, :], axis=0) / counts[:, None]
        stable_stderr = batch_stderr(stable_batches)
        stderr_by_k = {
            k: batch_stderr(stable_batches + unstable_batches[:, i]) for i, k in enumerate(self.k_grid)
        }

        selected = select_k if select_k is not None else select_truncation(self.k_grid, total_by_k, stderr_by_k)
        return SensitivityResult(
            stable=stable,
            unstable_by_K=unstable_by_k,
            total_by_K=total_by_k,
            selected_K=selected,
            total=total_by_k[selected],
            stderr_by_K=stderr_by_k,
            stable_stderr=stable_stderr,
            n_samples=self.j_count,
            n_chains=n_chains,
            diagnostics=diagnostics or {},
        )


def batch_stderr(batch_means):
    """Standard error of the grand mean from equally weighted batch means."""
    batch_means = np.asarray(batch_means, dtype=float)
    if batch_means.size < 2:
        return float("nan")
    return float(np.std(batch_means, ddof=1) / np.sqrt(batch_means.size))


@dataclass
class S3State:
    """Everything carried from step k to step k+1. Owned by exactly one run."""

    map_system: object
    observable: object
    k: int
    x: np.ndarray
    frame: UnstableFrame
    bundle: SecondOrderBundle
    tangent: RegularizedTangent
    accumulator: SensitivityAccumulator
    evaluation: StepEvaluation
    nudges: int = 0
    trace: Optional[Dict[str, List[np.ndarray]]] = None


def seed_streams(seed, init_seed=None):
    """Generators for the primal start (from ``seed``) and for Q0, a0, w0."""
    x_seq, init_seq = np.random.SeedSequence(seed).spawn(2)
    if init_seed is not None:
        init_seq = np.random.SeedSequence(init_seed).spawn(2)[1]
    return np.random.default_rng(x_seq), np.random.default_rng(init_seq)


def evaluate(map_system, observable, x):
    return StepEvaluation(
        jacobian=map_system.jacobian(x),
        chi=map_system.perturbation(x),
        chi_jacobian=map_system.perturbation_jacobian(x),
        j_value=np.asarray(observable.evaluate(x), dtype=float),
        j_gradient=observable.gradient(x),
    )


def init_state(map_system, config, observable, rng=None):
    """
    Random start: x0 uniform in the map's sampling box, Q0 from the QR of a
    Gaussian matrix, a0 and w0 standard normal (zeros with
    ``deterministic_init``), v0 = 0.

    w0 is scaled by |perturb_dir| so the tangent system stays linear in the
    perturbation: a zero direction gives an identically zero state.
    """
    config.validate(map_system)
    n, m, b = map_system.dim, map_system.unstable_dim, config.n_chains
    if rng is None:
        x_rng, init_rng = seed_streams(config.seed, config.init_seed)
    else:
        x_rng = init_rng = rng

    x0, nudges = map_system.nudge(map_system.sample_initial(x_rng, b))
    q0 = qr_positive(init_rng.standard_normal((b, n, m))).q
    if config.deterministic_init:
        a0 = np.zeros((b, packed_size(m), n))
        w0 = np.zeros((b, m, n))
    else:
        a0 = init_rng.standard_normal((b, packed_size(m), n))
        w0 = init_rng.standard_normal((b, m, n)) * np.linalg.norm(map_system.perturb_dir)

    eye = np.broadcast_to(np.eye(m), (b, m, m)).copy()
    return S3State(
        map_system=map_system,
        observable=observable,
        k=0,
        x=x0,
        frame=UnstableFrame(q=q0, r=eye.copy(), r_inv=eye.copy()),
        bundle=SecondOrderBundle(a=a0, p=np.zeros((b, m, m, n)), dr=np.zeros((b, m, m, m))),
        tangent=RegularizedTangent(
            v=np.zeros((b, n)),
            w=w0,
            c=np.zeros((b, m)),
            b=np.zeros((b, m, m)),
            g=np.zeros((b, m)),
            grad_f=np.zeros((b, n, m)),
        ),
        accumulator=SensitivityAccumulator(
            config.k_grid, b, config.warmup, config.n_steps, config.n_batches, config.center_observable
        ),
        evaluation=evaluate(map_system, observable, x0),
        nudges=nudges,
        trace={} if config.record_trace else None,
    )


# ----------------------------------------------------------------------
# Recursions
# ----------------------------------------------------------------------
def advance_frame(frame, jacobian):
    """S_k = Dphi_k Q_k, then Q_{k+1} R_{k+1} = S_k and R_{k+1}^-1."""
    pair = qr_positive(np.matmul(jacobian, frame.q))
    return UnstableFrame(q=pair.q, r=pair.r, r_inv=upper_tri_inverse(pair.r))


def advance_second_order(map_system, x, q, a, jacobian, r_inv_next):
    """a_{k+1}^{ij} = (D^2phi_k(q^p, q^q) + Dphi_k a^{pq}) (R^-1)^{pi} (R^-1)^{qj}."""
    m = q.shape[-1]
    rows, cols = symmetric_index(m)
    q_rows = np.swapaxes(q, -1, -2)
    curvature = map_system.hessian_contract(x[..., None, :], q_rows[..., rows, :], q_rows[..., cols, :])
    a_tilde = curvature + np.einsum("...ij,...pj->...pi", jacobian, a)
    return congruence_rescale(a_tilde, r_inv_next)


def compute_r_derivatives_and_g(a, q):
    """
    Upper-triangular d_{xi^l} R from a and q, and g^l = -tr(d_{xi^l} R).

    (dR^l)^{pq} = q^p.a^{pl} on the diagonal, q^p.a^{ql} + q^q.a^{pl} above
    it, zero below.
    """
    m = q.shape[-1]
    full = unpack_symmetric(a, m)
    # proj[..., l, p, j] = q^p . a^{j l}
    proj = np.einsum("...sp,...jls->...lpj", q, full)
    dr = np.triu(proj + np.swapaxes(proj, -1, -2), k=1)
    diag = np.arange(m)
    dr[..., diag, diag] = proj[..., diag, diag]
    g = -np.trace(dr, axis1=-2, axis2=-1)
    return dr, g


def advance_regularized_tangent(map_system, x, q, q_next, v, w, jacobian, chi, chi_jacobian):
    """
    f_k = Dphi_k v_k + chi_{k+1}, c^i = q_{k+1}^i . f_k, v_{k+1} = f_k - c^i q_{k+1}^i,
    and the columns d_{xi_k^i} f_k = D^2phi_k(v_k, q_k^i) + Dphi_k w_k^i + D d_s phi_k q_k^i.

    Returns:
        tuple: (v_next, c, f, df) with df of shape (B, n, m).
    """
    f = np.einsum("...ij,...j->...i", jacobian, v) + chi
    c = np.einsum("...si,...s->...i", q_next, f)
    v_next = f - np.einsum("...si,...i->...s", q_next, c)

    q_rows = np.swapaxes(q, -1, -2)
    df_rows = (
        map_system.hessian_contract(x[..., None, :], v[..., None, :], q_rows)
        + np.einsum("...ij,...lj->...li", jacobian, w)
        + np.einsum("...ij,...lj->...li", chi_jacobian, q_rows)
    )
    return v_next, c, f, np.swapaxes(df_rows, -1, -2)


def compute_p_b(a, dr, frame_next, f, df):
    """
    grad_f = df R^-1, p^{ij} = a^{ij} - q^l (dR^j)^{li}, b^{ij} = p^{ij}.f + q^i.grad_f^{:j}.

    Returns:
        tuple: (p, b, grad_f).
    """
    q = frame_next.q
    m = q.shape[-1]
    grad_f = np.einsum("...sl,...lj->...sj", df, frame_next.r_inv)
    p = unpack_symmetric(a, m) - np.einsum("...sl,...jli->...ijs", q, dr)
    b = np.einsum("...ijs,...s->...ij", p, f) + np.einsum("...si,...sj->...ij", q, grad_f)
    return p, b, grad_f


def advance_w(grad_f, b, p, c, q):
    """w^i_{k+1} = grad_f^{:i} - b^{li} q^l + c^l p^{li}."""
    return (
        np.swapaxes(grad_f, -1, -2)
        - np.einsum("...li,...sl->...is", b, q)
        + np.einsum("...l,...lis->...is", c, p)
    )


def unstable_integrand(b, c, g):
    """u = b^{ii} + c^i g^i."""
    return np.trace(b, axis1=-2, axis2=-1) + np.sum(c * g, axis=-1)


def _record(trace, **values):
    for name, value in values.items():
        trace.setdefault(name, []).append(np.array(value, copy=True))


def advance(state):
    """Run one full time step in place (accumulate at k, then everything to k+1)."""
    map_system = state.map_system
    ev = state.evaluation
    frame, bundle, tangent = state.frame, state.bundle, state.tangent

    state.accumulator.accumulate(state.k, ev.j_value, ev.j_gradient, tangent.v)

    frame_next = advance_frame(frame, ev.jacobian)
    a_next = advance_second_order(map_system, state.x, frame.q, bundle.a, ev.jacobian, frame_next.r_inv)
    dr, g = compute_r_derivatives_and_g(a_next, frame_next.q)
    v_next, c, f, df = advance_regularized_tangent(
        map_system, state.x, frame.q, frame_next.q, tangent.v, tangent.w, ev.jacobian, ev.chi, ev.chi_jacobian
    )
    p, b, grad_f = compute_p_b(a_next, dr, frame_next, f, df)
    w_next = advance_w(grad_f, b, p, c, frame_next.q)
    u = unstable_integrand(b, c, g)
    check_finite(u, f"recursions at step {state.k}")

    state.accumulator.push(u)
    x_next, nudged = map_system.nudge(map_system.apply(state.x))

    if state.trace is not None:
        q_next = frame_next.q
        v_norm = np.linalg.norm(v_next, axis=-1)
        _record(
            state.trace,
            u=u,
            g=g,
            c=c,
            b=b,
            v_norm=v_norm,
            w_norm=np.linalg.norm(w_next, axis=(-2, -1)),
            a_norm=np.linalg.norm(a_next, axis=(-2, -1)),
            v_ortho=np.max(np.abs(np.einsum("...si,...s->...i", q_next, v_next)), axis=-1)
            / np.maximum(1.0, v_norm),
            frame_ortho=np.linalg.norm(
                np.einsum("...si,...sj->...ij", q_next, q_next) - np.eye(q_next.shape[-1]), axis=(-2, -1)
            ),
        )

    state.frame = frame_next
    state.bundle = SecondOrderBundle(a=a_next, p=p, dr=dr)
    state.tangent = RegularizedTangent(v=v_next, w=w_next, c=c, b=b, g=g, grad_f=grad_f)
    state.x = x_next
    state.nudges += nudged
    state.k += 1
    state.evaluation = evaluate(map_system, state.observable, x_next)
    return state


def trace_arrays(trace):
    """Stack per-step trace lists into arrays with the step index first."""
    if trace is None:
        return {}
    return {name: np.stack(values) for name, values in trace.items()}


def run(map_system, observable, config, verbose=False, label="run"):
    """
    Estimate d<J>/ds along map_system.perturb_dir.

    Executes ``config.n_steps`` iterations from a seeded random start and
    normalizes the sums by the accepted sample count.

    Raises:
        RunFailed: on rank loss or non-finite values mid-run; ``partial``
            holds the estimate over the samples gathered so far.
    """
    state = init_state(map_system, config, observable)
    report_every = max(config.n_steps // 10, 1)
    if verbose:
        ColorPrinter.info(
            f"[{label}] {map_system!r}, observable={observable.name}, N={config.n_steps}, "
            f"T={config.warmup}, chains={config.n_chains}"
        )
    try:
        for _ in range(config.n_steps):
            advance(state)
            if verbose and state.k % report_every == 0:
                ColorPrinter.progress(label, state.k, config.n_steps)
    except (RankDeficient, NonFinite, Singular) as exc:
        partial = None
        if state.accumulator.j_count > 0:
            partial = state.accumulator.result(config.select_k, _diagnostics(state))
        raise RunFailed(state.k, exc, partial) from exc

    if state.nudges and verbose:
        ColorPrinter.warning(f"[{label}] nudged {state.nudges} state(s) off derivative discontinuities")
    return state.accumulator.result(config.select_k, _diagnostics(state))


def _diagnostics(state):
    diagnostics = {"nudges": state.nudges, "steps": state.k}
    if state.trace is not None:
        diagnostics["trace"] = trace_arrays(state.trace)
    return diagnostics

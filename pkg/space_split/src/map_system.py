import numpy as np

from .errors import NonFinite

TWO_PI = 2.0 * np.pi
NUDGE_TOL = 1e-12
NUDGE_STEP = 1e-10


class MapSystem:
    """
    Base class for parameterized discrete maps x_{k+1} = phi(x_k; s).

    Subclasses supply the analytic pieces (``_step``, ``jacobian``,
    ``hessian_contract``, ``parameter_gradient``, ``parameter_jacobian``) and
    the class-level description below. Every callback broadcasts over leading
    dimensions: states are (..., n).

    The scalar parameter s of the sensitivity d<J>/ds is the direction
    ``perturb_dir`` in parameter space, so one map can be differentiated along
    s1, along s1 = s2, and so on.
    """

    NAME = ""
    DIM = 0
    UNSTABLE_DIM = 0
    PARAM_NAMES = ()
    DEFAULT_PARAMS = ()
    DEFAULT_PERTURB_DIR = ()
    DEFAULT_OBSERVABLE = ""
    # Components reduced mod 2*pi after every step
    ANGULAR = ()
    # Box sampled for random initial states: ((low, high), ...) per component
    SAMPLING_BOX = ()
    # (component, spacing): derivative jumps where x[component] is a multiple of spacing
    DISCONTINUITIES = ()

    def __init__(self, params=None, perturb_dir=None):
        """Initialize the map; missing params/perturb_dir fall back to the class defaults."""
        params = self.DEFAULT_PARAMS if params is None else params
        perturb_dir = self.DEFAULT_PERTURB_DIR if perturb_dir is None else perturb_dir
        params = np.array(params, dtype=float).reshape(-1)
        perturb_dir = np.array(perturb_dir, dtype=float).reshape(-1)
        for label, values in (("params", params), ("perturb_dir", perturb_dir)):
            if values.size != len(self.PARAM_NAMES):
                raise ValueError(
                    f"{self.NAME} map takes {len(self.PARAM_NAMES)} {label} "
                    f"{list(self.PARAM_NAMES)}, got {values.size}"
                )
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{self.NAME} map {label} must be finite, got {values.tolist()}")
        params.setflags(write=False)
        perturb_dir.setflags(write=False)
        self._params = params
        self._perturb_dir = perturb_dir

    def __repr__(self):
        return (
            f"{type(self).__name__}(params={self._params.tolist()}, "
            f"perturb_dir={self._perturb_dir.tolist()})"
        )

    def __reduce__(self):
        return (type(self), (self._params.tolist(), self._perturb_dir.tolist()))

    @property
    def dim(self):
        return self.DIM

    @property
    def unstable_dim(self):
        return self.UNSTABLE_DIM

    @property
    def n_params(self):
        return len(self.PARAM_NAMES)

    @property
    def params(self):
        return self._params

    @property
    def perturb_dir(self):
        return self._perturb_dir

    def shifted(self, delta):
        """Return a new map with params moved by ``delta`` along perturb_dir."""
        return type(self)(self._params + delta * self._perturb_dir, self._perturb_dir)

    def with_params(self, params):
        return type(self)(params, self._perturb_dir)

    # ------------------------------------------------------------------
    # Primal step
    # ------------------------------------------------------------------
    def apply(self, x):
        """Advance the state one step; angular components are wrapped into [0, 2*pi)."""
        y = self._step(np.asarray(x, dtype=float))
        for comp in self.ANGULAR:
            y[..., comp] = wrap_angle(y[..., comp])
        if not np.all(np.isfinite(y)):
            raise NonFinite(f"{self.NAME}.apply")
        return y

    def _step(self, x):
        raise NotImplementedError

    def sample_initial(self, rng, n_chains=1):
        """Draw (n_chains, n) states uniformly from SAMPLING_BOX."""
        box = np.asarray(self.SAMPLING_BOX, dtype=float)
        return rng.uniform(box[:, 0], box[:, 1], size=(n_chains, self.DIM))

    def nudge(self, x):
        """
        Move states lying within 1e-12 of a derivative discontinuity by 1e-10.

        Returns:
            tuple: (states, number of nudged states).
        """
        count = 0
        for comp, spacing in self.DISCONTINUITIES:
            coord = x[..., comp]
            dist = np.abs(coord - spacing * np.round(coord / spacing))
            near = dist < NUDGE_TOL
            if np.any(near):
                x = x.copy()
                x[..., comp] = np.where(near, coord + NUDGE_STEP, coord)
                count += int(np.count_nonzero(near))
        return x, count

    # ------------------------------------------------------------------
    # Derivatives
    # ------------------------------------------------------------------
    def jacobian(self, x):
        """Analytic Dphi at x, shape (..., n, n); mod/floor shifts contribute nothing."""
        raise NotImplementedError

    def hessian_contract(self, x, a, b):
        """(D^2 phi(a, b))^(i) = d_p d_q phi^(i) a^(p) b^(q), shape (..., n)."""
        raise NotImplementedError

    def parameter_gradient(self, x):
        """d phi / d params, shape (..., n, n_params)."""
        raise NotImplementedError

    def parameter_jacobian(self, x):
        """D (d phi / d params), shape (..., n_params, n, n)."""
        raise NotImplementedError

    def perturbation(self, x):
        """d_s phi at x along perturb_dir; chi_{k+1} = perturbation(x_k)."""
        return np.einsum("...ip,p->...i", self.parameter_gradient(x), self._perturb_dir)

    def perturbation_jacobian(self, x):
        """D d_s phi at x along perturb_dir, shape (..., n, n)."""
        return np.einsum("...pij,p->...ij", self.parameter_jacobian(x), self._perturb_dir)


def wrap_angle(values):
    """Reduce into [0, 2*pi); mod can round up to exactly 2*pi for tiny negatives."""
    wrapped = np.mod(values, TWO_PI)
    return np.where(wrapped >= TWO_PI, wrapped - TWO_PI, wrapped)


def symmetric_products(a, b):
    """
    Products a_p b_q + a_q b_p (p < q) and a_p b_p, keyed by (p, q).

    Assembling Hessian contractions from these keeps D^2 phi(a, b) and
    D^2 phi(b, a) bitwise equal.
    """
    n = a.shape[-1]
    out = {}
    for p in range(n):
        out[p, p] = a[..., p] * b[..., p]
        for q in range(p + 1, n):
            out[p, q] = a[..., p] * b[..., q] + a[..., q] * b[..., p]
    return out

"""
Perturbed baker's map on the torus [0, 2*pi)^2.

    x1' = 2 x1 + s1 sin x1 + s2 sin x1 sin(2 x2) / 2                      mod 2*pi
    x2' = x2 / 2 + pi floor(x1 / pi) + s3 sin x1 sin(2 x2) / 2
          + s4 sin(2 x2) / 2                                              mod 2*pi

The dough is stretched along x1 and folded by the floor term, which is read
as pi * floor(x1 / pi) (stacking paired with the doubling coordinate). One
positive Lyapunov exponent, log 2 at zero parameters.
"""

import numpy as np

from .map_system import MapSystem, symmetric_products


class BakerMap(MapSystem):
    NAME = "baker"
    DIM = 2
    UNSTABLE_DIM = 1
    PARAM_NAMES = ("s1", "s2", "s3", "s4")
    DEFAULT_PARAMS = (0.0, 0.0, 0.0, 0.0)
    # s = s1 = s2, s3 = s4 = 0
    DEFAULT_PERTURB_DIR = (1.0, 1.0, 0.0, 0.0)
    DEFAULT_OBSERVABLE = "cos4x2"
    ANGULAR = (0, 1)
    SAMPLING_BOX = ((0.0, 2.0 * np.pi), (0.0, 2.0 * np.pi))
    DISCONTINUITIES = ((0, np.pi),)

    def _trig(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.sin(x1), np.cos(x1), np.sin(2.0 * x2), np.cos(2.0 * x2)

    def _step(self, x):
        s1, s2, s3, s4 = self.params
        x1, x2 = x[..., 0], x[..., 1]
        sin1, _, sin2, _ = self._trig(x)
        y = np.empty_like(x)
        y[..., 0] = 2.0 * x1 + s1 * sin1 + s2 * sin1 * sin2 / 2.0
        y[..., 1] = (
            x2 / 2.0
            + np.pi * np.floor(x1 / np.pi)
            + s3 * sin1 * sin2 / 2.0
            + s4 * sin2 / 2.0
        )
        return y

    def jacobian(self, x):
        s1, s2, s3, s4 = self.params
        sin1, cos1, sin2, cos2 = self._trig(np.asarray(x, dtype=float))
        jac = np.empty(sin1.shape + (2, 2))
        jac[..., 0, 0] = 2.0 + s1 * cos1 + s2 * cos1 * sin2 / 2.0
        jac[..., 0, 1] = s2 * sin1 * cos2
        jac[..., 1, 0] = s3 * cos1 * sin2 / 2.0
        jac[..., 1, 1] = 0.5 + s3 * sin1 * cos2 + s4 * cos2
        return jac

    def hessian_contract(self, x, a, b):
        s1, s2, s3, s4 = self.params
        sin1, cos1, sin2, cos2 = self._trig(np.asarray(x, dtype=float))
        prod = symmetric_products(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        out = np.empty(np.broadcast_shapes(sin1.shape, prod[0, 0].shape) + (2,))
        out[..., 0] = (
            (-s1 * sin1 - s2 * sin1 * sin2 / 2.0) * prod[0, 0]
            + (s2 * cos1 * cos2) * prod[0, 1]
            + (-2.0 * s2 * sin1 * sin2) * prod[1, 1]
        )
        out[..., 1] = (
            (-s3 * sin1 * sin2 / 2.0) * prod[0, 0]
            + (s3 * cos1 * cos2) * prod[0, 1]
            + (-2.0 * s3 * sin1 * sin2 - 2.0 * s4 * sin2) * prod[1, 1]
        )
        return out

    def parameter_gradient(self, x):
        sin1, _, sin2, _ = self._trig(np.asarray(x, dtype=float))
        grad = np.zeros(sin1.shape + (2, 4))
        grad[..., 0, 0] = sin1
        grad[..., 0, 1] = sin1 * sin2 / 2.0
        grad[..., 1, 2] = sin1 * sin2 / 2.0
        grad[..., 1, 3] = sin2 / 2.0
        return grad

    def parameter_jacobian(self, x):
        sin1, cos1, sin2, cos2 = self._trig(np.asarray(x, dtype=float))
        pjac = np.zeros(sin1.shape + (4, 2, 2))
        pjac[..., 0, 0, 0] = cos1
        pjac[..., 1, 0, 0] = cos1 * sin2 / 2.0
        pjac[..., 1, 0, 1] = sin1 * cos2
        pjac[..., 2, 1, 0] = cos1 * sin2 / 2.0
        pjac[..., 2, 1, 1] = sin1 * cos2
        pjac[..., 3, 1, 1] = cos2
        return pjac

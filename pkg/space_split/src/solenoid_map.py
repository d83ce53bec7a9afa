"""
Extended solenoid map on R x [0, 2*pi)^2.

    x1' = 0.05 x1 + 0.1 cos(8 x2) - 0.1 sin(5 x3)
    x2' = 2 x2 + s (1 + x1) sin(8 x2)                                     mod 2*pi
    x3' = 3 x3 + s (1 + x1) cos(2 x3)                                     mod 2*pi

A Smale-Williams style solenoid with an extra expanding rotation; two
positive Lyapunov exponents (log 3 and log 2 at s = 0) and one contracting
direction.
"""

import numpy as np

from .map_system import MapSystem, symmetric_products

CONTRACTION = 0.05
COUPLING = 0.1


class SolenoidMap(MapSystem):
    NAME = "solenoid"
    DIM = 3
    UNSTABLE_DIM = 2
    PARAM_NAMES = ("s",)
    DEFAULT_PARAMS = (0.0,)
    DEFAULT_PERTURB_DIR = (1.0,)
    DEFAULT_OBSERVABLE = "sin_cos_x3"
    ANGULAR = (1, 2)
    # The attractor sits in |x1| < 0.22; starting points may lie off it.
    SAMPLING_BOX = ((-0.5, 0.5), (0.0, 2.0 * np.pi), (0.0, 2.0 * np.pi))
    DISCONTINUITIES = ()

    def _step(self, x):
        (s,) = self.params
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        y = np.empty_like(x)
        y[..., 0] = CONTRACTION * x1 + COUPLING * np.cos(8.0 * x2) - COUPLING * np.sin(5.0 * x3)
        y[..., 1] = 2.0 * x2 + s * (1.0 + x1) * np.sin(8.0 * x2)
        y[..., 2] = 3.0 * x3 + s * (1.0 + x1) * np.cos(2.0 * x3)
        return y

    def jacobian(self, x):
        (s,) = self.params
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        sin8, cos8 = np.sin(8.0 * x2), np.cos(8.0 * x2)
        sin2, cos2 = np.sin(2.0 * x3), np.cos(2.0 * x3)
        jac = np.zeros(x1.shape + (3, 3))
        jac[..., 0, 0] = CONTRACTION
        jac[..., 0, 1] = -8.0 * COUPLING * sin8
        jac[..., 0, 2] = -5.0 * COUPLING * np.cos(5.0 * x3)
        jac[..., 1, 0] = s * sin8
        jac[..., 1, 1] = 2.0 + 8.0 * s * (1.0 + x1) * cos8
        jac[..., 2, 0] = s * cos2
        jac[..., 2, 2] = 3.0 - 2.0 * s * (1.0 + x1) * sin2
        return jac

    def hessian_contract(self, x, a, b):
        (s,) = self.params
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        sin8, cos8 = np.sin(8.0 * x2), np.cos(8.0 * x2)
        sin2, cos2 = np.sin(2.0 * x3), np.cos(2.0 * x3)
        prod = symmetric_products(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        out = np.empty(np.broadcast_shapes(x1.shape, prod[0, 0].shape) + (3,))
        out[..., 0] = (
            (-64.0 * COUPLING * cos8) * prod[1, 1]
            + (25.0 * COUPLING * np.sin(5.0 * x3)) * prod[2, 2]
        )
        out[..., 1] = (8.0 * s * cos8) * prod[0, 1] + (-64.0 * s * (1.0 + x1) * sin8) * prod[1, 1]
        out[..., 2] = (-2.0 * s * sin2) * prod[0, 2] + (-4.0 * s * (1.0 + x1) * cos2) * prod[2, 2]
        return out

    def parameter_gradient(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        grad = np.zeros(x1.shape + (3, 1))
        grad[..., 1, 0] = (1.0 + x1) * np.sin(8.0 * x2)
        grad[..., 2, 0] = (1.0 + x1) * np.cos(2.0 * x3)
        return grad

    def parameter_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        pjac = np.zeros(x1.shape + (1, 3, 3))
        pjac[..., 0, 1, 0] = np.sin(8.0 * x2)
        pjac[..., 0, 1, 1] = 8.0 * (1.0 + x1) * np.cos(8.0 * x2)
        pjac[..., 0, 2, 0] = np.cos(2.0 * x3)
        pjac[..., 0, 2, 2] = -2.0 * (1.0 + x1) * np.sin(2.0 * x3)
        return pjac

"""Independent reference computations used to freeze derived test values."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import fsolve


def _geodesic_rhs(_t, y):
    # metric dr^2/2 + sinh^2(2r) dtheta^2/8
    r, th, vr, vth = y
    return [vr, vth, 0.25 * np.sinh(4 * r) * vth**2, -4.0 / np.tanh(2 * r) * vr * vth]


def squeezed_geodesic_shooting(p1, p2, guess=None):
    """Geodesic distance on the squeezed-vacuum manifold by shooting.

    Solves the geodesic equations from ``p1`` with unknown initial velocity so
    that the curve reaches ``p2`` at unit parameter time, then integrates the
    line element along it.
    """
    r1, t1 = p1
    r2, t2 = p2

    def endpoint(v):
        sol = solve_ivp(_geodesic_rhs, (0, 1), [r1, t1, v[0], v[1]], rtol=1e-12, atol=1e-13)
        return sol.y[:2, -1]

    v0 = guess if guess is not None else [0.0, t2 - t1]
    v = fsolve(lambda v: endpoint(v) - [r2, t2], v0, xtol=1e-13)
    sol = solve_ivp(_geodesic_rhs, (0, 1), [r1, t1, *v], rtol=1e-12, atol=1e-13, dense_output=True)

    def speed(t):
        r, _, vr, vth = sol.sol(t)
        return np.sqrt(0.5 * vr**2 + np.sinh(2 * r) ** 2 * vth**2 / 8)

    length, _ = quad(speed, 0, 1, epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(length), sol


def squeezed_symmetric_geodesic(r, half_angle):
    """Distance between ``(r, pi - half_angle)`` and ``(r, pi + half_angle)`` by shooting.

    By mirror symmetry the geodesic is tangent to the circle ``theta = pi`` at its
    midpoint. A unit-speed geodesic is launched from ``(r_m, pi)`` and ``r_m`` is
    tuned so that it crosses ``theta = pi + half_angle`` at radius ``r``.
    """
    from scipy.optimize import brentq

    def crossing(r_m):
        vth = np.sqrt(8.0) / np.sinh(2 * r_m)

        def hit(_t, y):
            return y[1] - (np.pi + half_angle)

        hit.terminal = True
        sol = solve_ivp(_geodesic_rhs, (0, 50), [r_m, np.pi, 0.0, vth], events=hit, rtol=1e-12, atol=1e-13)
        if sol.t_events[0].size == 0:
            # the geodesic escapes to the boundary before reaching the angle
            return np.inf, np.inf
        return sol.t_events[0][0], sol.y_events[0][0][0]

    r_m = brentq(lambda rm: min(crossing(rm)[1], 2 * r + 10) - r, 1e-6, r, xtol=1e-15)
    return 2 * crossing(r_m)[0]


def qubit_ground_state(theta, phi):
    """Manifold state ``cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>``."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])

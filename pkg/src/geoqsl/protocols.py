"""
Control protocols ``t -> lambda(t)`` and the hold-time search.

A :class:`Protocol` carries a vectorized schedule, its duration and the
times at which the schedule has kinks, so that integrators can align their
grids with them. Every protocol built here has a JSON description
``{"type", "parameters", "duration"}`` from which it can be rebuilt.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import HamiltonianFamily, QubitFamily, SqueezedOscillatorFamily

log = logging.getLogger(__name__)

BISECTION_MAX_ITER = 200


class ProtocolError(ValueError):
    pass


class HoldTimeError(ValueError):
    """Raised when no hold time satisfying the mirror condition can be found."""


@dataclass(frozen=True)
class RampSpec:
    s: float
    T: float

    def __post_init__(self):
        if not (self.s > 0 and self.T > 0):
            raise ProtocolError("ramp time s and hold time T must be positive")

    @property
    def duration(self) -> float:
        return self.T + 2 * self.s


@dataclass(frozen=True)
class Protocol:
    duration: float
    schedule: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    dim: int = 1
    breakpoints: tuple[float, ...] = ()
    kind: str = "custom"
    parameters: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ProtocolError("protocol duration must be positive")

    def __call__(self, t):
        """Control point(s) at time(s) ``t``; shape ``(dim,)`` or ``(n, dim)``."""
        t_arr = np.asarray(t, dtype=float)
        slack = 1e-12 * max(1.0, self.duration)
        if np.any(t_arr < -slack) or np.any(t_arr > self.duration + slack):
            raise ProtocolError(f"protocol undefined outside [0, {self.duration}]")
        flat = np.clip(np.atleast_1d(t_arr), 0.0, self.duration)
        pts = np.asarray(self.schedule(flat), dtype=float).reshape(flat.size, self.dim)
        return pts[0] if t_arr.ndim == 0 else pts

    def segments(self) -> list[tuple[float, float]]:
        """Smooth pieces ``[(t0, t1), ...]`` covering ``[0, duration]``."""
        cuts = [0.0] + [b for b in sorted(self.breakpoints) if 0 < b < self.duration] + [self.duration]
        return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]

    def reversed(self) -> "Protocol":
        d = self.duration
        return Protocol(
            d,
            lambda t: self.schedule(d - np.asarray(t)),
            self.dim,
            tuple(d - b for b in self.breakpoints),
            kind=f"reversed-{self.kind}",
            parameters={"of": self.to_json()},
        )

    def to_json(self) -> dict:
        return {"type": self.kind, "parameters": dict(self.parameters), "duration": self.duration}


def beta(t, spec: RampSpec):
    """Ramp-hold-ramp profile: ``t/s``, then ``1``, then ``(t - T)/s``."""
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * spec.duration
    if np.any(t_arr < -slack) or np.any(t_arr > spec.duration + slack):
        raise ProtocolError(f"beta undefined outside [0, {spec.duration}]")
    out = np.where(
        t_arr <= spec.s,
        t_arr / spec.s,
        np.where(t_arr <= spec.T + spec.s, 1.0, (t_arr - spec.T) / spec.s),
    )
    return float(out) if out.ndim == 0 else out


def qubit_ramp_protocol(spec: RampSpec) -> Protocol:
    """Azimuth schedule ``phi(t) = -beta(t) pi/2`` from ``0`` to ``-pi``."""
    return Protocol(
        spec.duration,
        lambda t: -beta(t, spec) * np.pi / 2,
        1,
        (spec.s, spec.s + spec.T),
        kind="qubit-ramp",
        parameters={"s": spec.s, "T": spec.T},
    )


def squeezed_ramp_protocol(spec: RampSpec, r: float) -> Protocol:
    """Fixed-radius schedule ``(r, (beta(t) - 1) 2pi/3)``."""

    def schedule(t):
        th = (beta(t, spec) - 1) * 2 * np.pi / 3
        return np.stack([np.full_like(th, r), th], axis=-1)

    return Protocol(
        spec.duration,
        schedule,
        2,
        (spec.s, spec.s + spec.T),
        kind="squeezed-ramp",
        parameters={"s": spec.s, "T": spec.T, "r": r},
    )


def ho_semicircle_protocol(omega: float) -> Protocol:
    """``lq = 2 sin^2(wt/2)``, ``lp = -sin(wt)`` on ``[0, pi/w]``."""
    if omega <= 0:
        raise ProtocolError("omega must be positive")

    def schedule(t):
        wt = omega * np.asarray(t)
        return np.stack([2 * np.sin(wt / 2) ** 2, -np.sin(wt)], axis=-1)

    return Protocol(np.pi / omega, schedule, 2, kind="ho-semicircle", parameters={"omega": omega})


def constant_protocol(point, duration: float) -> Protocol:
    p = np.atleast_1d(np.asarray(point, dtype=float))
    return Protocol(
        duration,
        lambda t: np.broadcast_to(p, (np.size(t), p.size)),
        p.size,
        kind="constant",
        parameters={"point": p.tolist()},
    )


def qutrit_static_protocol(omega: float) -> Protocol:
    """``lambda(t) = 0`` for ``t`` in ``[0, pi/omega]``."""
    if omega <= 0:
        raise ProtocolError("omega must be positive")
    proto = constant_protocol([0.0], np.pi / omega)
    return Protocol(proto.duration, proto.schedule, 1, kind="qutrit-static", parameters={"omega": omega})


def adiabatic_protocol(
    family: HamiltonianFamily,
    control_path: Callable[[np.ndarray], np.ndarray],
    total_time: float,
    n_grid: int = 4096,
    profile: str = "linear",
) -> Protocol:
    """Traverse ``control_path(u)``, ``u in [0, 1]``, at constant metric speed.

    The arc-length parametrization is tabulated on ``n_grid`` midpoint
    segments and inverted by linear interpolation. A path of zero length
    yields the constant protocol at its start point.

    Parameters
    ----------
    profile : {"linear", "smooth"}
        ``"linear"`` keeps the metric speed constant. ``"smooth"`` uses the
        arc fraction ``x - sin(2 pi x) / (2 pi)`` of the time fraction ``x``,
        so the speed vanishes at both ends. A sudden start leaves a
        precession whose energy spread does not average out, and only the
        smooth profile gives ``l_E -> l_g`` as ``total_time`` grows.
    """
    if profile not in ("linear", "smooth"):
        raise ProtocolError(f"unknown profile {profile!r}")
    from .geometry import _metric_batch  # local: geometry imports model only

    if total_time <= 0:
        raise ProtocolError("total_time must be positive")
    u = np.linspace(0.0, 1.0, n_grid + 1)
    pts = np.asarray(control_path(u), dtype=float).reshape(u.size, family.dim)
    steps = np.diff(pts, axis=0)
    g = _metric_batch(family, 0.5 * (pts[1:] + pts[:-1]), "analytic")
    ds = np.sqrt(np.clip(np.einsum("ki,kij,kj->k", steps, g, steps), 0.0, None))
    arc = np.concatenate([[0.0], np.cumsum(ds)])
    params = {"total_time": total_time, "length": float(arc[-1]), "profile": profile}
    if arc[-1] <= 0.0:
        proto = constant_protocol(pts[0], total_time)
        return Protocol(total_time, proto.schedule, family.dim, kind="adiabatic", parameters=params)

    def schedule(t):
        x = np.asarray(t) / total_time
        if profile == "smooth":
            x = x - np.sin(2 * np.pi * x) / (2 * np.pi)
        target = x * arc[-1]
        uu = np.interp(target, arc, u)
        return np.asarray(control_path(uu), dtype=float).reshape(np.size(t), family.dim)

    return Protocol(total_time, schedule, family.dim, kind="adiabatic", parameters=params)


# ---------------------------------------------------------------------------
# hold-time search
# ---------------------------------------------------------------------------


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def _bisect(f, lo, hi, f_lo, tol, label):
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < tol or hi - lo < 4 * np.finfo(float).eps * max(abs(mid), 1e-300):
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise HoldTimeError(f"{label}: bisection did not converge")


def _first_root(f, bracket, explicit, tol, label, jump_guard=None, n_scan=400):
    lo, hi = bracket
    if not 0 <= lo < hi:
        raise HoldTimeError(f"{label}: invalid bracket {bracket}")
    if explicit:
        f_lo, f_hi = f(lo), f(hi)
        if np.sign(f_lo) == np.sign(f_hi):
            raise HoldTimeError(f"{label}: residual has equal signs at bracket ends {bracket}")
        return _bisect(f, lo, hi, f_lo, tol, label)
    grid = np.linspace(lo, hi, n_scan + 1)
    grid[0] = max(lo, 1e-15 * hi)
    prev_t, prev_f = grid[0], f(grid[0])
    for t in grid[1:]:
        ft = f(t)
        if np.sign(ft) != np.sign(prev_f):
            if jump_guard is None or max(abs(ft), abs(prev_f)) < jump_guard:
                return _bisect(f, prev_t, t, prev_f, tol, label)
        prev_t, prev_f = t, ft
    raise HoldTimeError(f"{label}: no sign change of the residual in {bracket}")


def find_hold_time(
    family: HamiltonianFamily,
    s: float,
    bracket: tuple[float, float] | None = None,
    *,
    r: float | None = None,
    tol: float = 1e-10,
    config=None,
) -> float:
    """Hold time ``T`` making the ramp-hold-ramp protocol end on the target.

    Qubit circle (``family.theta`` set): the Bloch azimuth of the state at
    ``T + s`` must equal ``pi`` minus its azimuth at ``s``. Squeezed circle of
    radius ``r``: the unwrapped squeezing angle of the state at ``s + T/2``
    must equal ``pi``. The smallest positive root inside ``bracket`` is
    returned; an explicit bracket must show a sign change at its ends.
    """
    from . import dynamics  # local: dynamics depends on protocols

    if s <= 0:
        raise HoldTimeError("ramp time s must be positive")
    explicit = bracket is not None

    if isinstance(family, QubitFamily):
        if family.theta is None:
            raise HoldTimeError("qubit hold-time search needs a fixed-theta circle family")
        ramp = Protocol(s, lambda t: -np.asarray(t) / s * np.pi / 2, 1, kind="ramp-up")
        psi0 = family.ground_state([0.0])
        psi_s = dynamics.evolve_matrix(family, ramp, psi0, config=config).states[-1]
        phi_s = dynamics.bloch_azimuth(psi_s)
        energies, vecs = np.linalg.eigh(family.hamiltonian([-np.pi / 2]))
        coeffs = vecs.conj().T @ psi_s

        def residual(T):
            psi = vecs @ (np.exp(-1j * energies * T) * coeffs)
            return float(_wrap(dynamics.bloch_azimuth(psi) - (np.pi - phi_s)))

        if bracket is None:
            bracket = (0.0, 4 * np.pi / abs(family.omega))
        T = _first_root(residual, bracket, explicit, tol, "qubit", jump_guard=np.pi / 2)
        log.info("qubit hold time T=%.10g for s=%g", T, s)
        return T

    if isinstance(family, SqueezedOscillatorFamily):
        if r is None:
            raise HoldTimeError("squeezed hold-time search needs the circle radius r")
        theta_i = 4 * np.pi / 3
        ramp = Protocol(
            s,
            lambda t: np.stack([np.full(np.size(t), r), (np.asarray(t) / s - 1) * 2 * np.pi / 3], -1),
            2,
            kind="ramp-up",
        )
        traj = dynamics.evolve_gaussian(ramp, (r, theta_i), omega=family.omega, config=config)
        mu_r_s, mu_th_s = traj.coords[-1]
        if mu_th_s <= np.pi:
            raise HoldTimeError(
                f"precondition failed: squeezing angle after the ramp is {mu_th_s:.6f} <= pi; "
                "choose a shorter ramp time s"
            )
        cov_s = traj.covariances[-1]
        gen = dynamics.symplectic_generator(family.omega, r, 0.0)

        def residual(T):
            S = dynamics.symplectic_exp(gen * (T / 2))
            cov = S @ cov_s @ S.T
            _, th = dynamics.squeezed_coords(cov)
            # continuity with the post-ramp angle
            th = mu_th_s + _wrap(th - mu_th_s)
            return float(th - np.pi)

        if bracket is None:
            bracket = (0.0, np.pi / family.omega)
        T = _first_root(residual, bracket, explicit, tol, "squeezed", jump_guard=np.pi / 2)
        log.info("squeezed hold time T=%.10g for s=%g", T, s)
        return T

    raise HoldTimeError(f"no hold-time condition defined for {type(family).__name__}")

"""
Time evolution under accessible Hamiltonians and the energetic length l_E.

Three engines are provided, each preserving the structure its invariants
rely on:

``evolve_matrix``
    state vectors of qubits, qutrits or truncated oscillators; every step is
    the exact exponential of a Hermitian fourth-order Magnus generator, so
    steps are unitary by construction.
``evolve_coherent``
    displaced-vacuum amplitude ``mu`` obeying ``dmu_c/dt = -i w (mu_c - lambda_c)``,
    integrated with step-doubling RK4.
``evolve_gaussian``
    2x2 covariance matrix of a squeezed vacuum, propagated by symplectic
    exponentials.

``delta_e`` is the instantaneous energy standard deviation; for the two
parametric engines it is the Fubini-Study speed of the manifold coordinates,
which equals the energy spread because the state never leaves its manifold.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import expm_multiply

from .model import (
    SIGMA_X,
    SIGMA_Y,
    HamiltonianFamily,
    ShiftedOscillatorFamily,
    SqueezedOscillatorFamily,
    coherent_amplitudes,
    squeezed_amplitudes,
)
from .protocols import Protocol, ProtocolError

log = logging.getLogger(__name__)

_GAUSS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)
_DENSE_LIMIT = 64
OMEGA_2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    """Step control shared by the engines.

    ``rtol`` bounds the change of the final state under step halving (and the
    per-step error of the RK4 engine); ``min_steps`` is the number of
    recorded intervals, which also sets the resolution of the ``l_E``
    quadrature.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    min_steps: int = 2048
    max_step: float | None = None
    max_refinements: int = 8
    renormalize: bool = True

    def __post_init__(self):
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if self.min_steps < 2:
            raise ValueError("min_steps must be >= 2")


@dataclass
class Trajectory:
    """Time-sampled evolution record.

    Exactly one of ``states`` (rows are state vectors) and ``coords``
    (manifold coordinates) is set. ``cumulative_length`` is the running
    trapezoid integral of ``delta_e``.
    """

    times: np.ndarray
    delta_e: np.ndarray
    cumulative_length: np.ndarray
    states: np.ndarray | None = None
    coords: np.ndarray | None = None
    covariances: np.ndarray | None = None
    kind: str = "matrix"
    meta: dict = field(default_factory=dict)

    @property
    def l_E(self) -> float:
        return float(self.cumulative_length[-1])

    def state_vectors(self, n_max: int | None = None) -> np.ndarray:
        """State vectors; coordinate trajectories are expanded in a Fock basis."""
        if self.states is not None:
            return self.states
        if self.kind == "coherent":
            alphas = (self.coords[:, 0] + 1j * self.coords[:, 1]) / np.sqrt(2.0)
            fam = ShiftedOscillatorFamily()
            n_max = n_max or fam.default_cutoff(self.coords)
            return np.array([coherent_amplitudes(a, n_max) for a in alphas])
        fam = SqueezedOscillatorFamily()
        n_max = n_max or fam.default_cutoff(self.coords)
        return np.array([squeezed_amplitudes(r, th, n_max) for r, th in self.coords])

    def to_rows(self) -> tuple[list[str], np.ndarray]:
        """Column names and table for CSV export."""
        if self.coords is not None:
            names = ["mu_q", "mu_p"] if self.kind == "coherent" else ["mu_r", "mu_theta"]
            body = self.coords
        else:
            d = self.states.shape[1]
            names = [f"{part}{k}" for k in range(d) for part in ("re_", "im_")]
            body = np.empty((self.states.shape[0], 2 * d))
            body[:, 0::2] = self.states.real
            body[:, 1::2] = self.states.imag
        table = np.column_stack([self.times, body, self.delta_e, self.cumulative_length])
        return ["t", *names, "deltaE", "cumulative_length"], table


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def energy_variance(psi: np.ndarray, H) -> float:
    """``<psi|H^2|psi> - <psi|H|psi>^2`` for a normalized state.

    Computed as ``|(H - <H>) psi|^2`` so eigenstates give zero to rounding
    instead of the cancellation error of the difference of moments.
    """
    h_psi = H @ psi
    mean = np.vdot(psi, h_psi).real
    resid = h_psi - mean * psi
    return float(np.vdot(resid, resid).real)


def fidelity(psi: np.ndarray, target: np.ndarray) -> float:
    """``|<target|psi>|^2``."""
    return float(min(abs(np.vdot(target, psi)) ** 2, 1.0))


def bloch_azimuth(psi: np.ndarray) -> float:
    """``atan2(<sigma_y>, <sigma_x>)`` of a qubit state."""
    return float(np.arctan2(np.vdot(psi, SIGMA_Y @ psi).real, np.vdot(psi, SIGMA_X @ psi).real))


def l_E_of_trajectory(traj: Trajectory) -> float:
    """Trapezoid integral of ``delta_e`` over the recorded times."""
    return float(np.trapezoid(traj.delta_e, traj.times))


def _cumulative(delta_e, times):
    return np.concatenate([[0.0], cumulative_trapezoid(delta_e, times)])


def _grid(protocol: Protocol, duration: float, n_steps: int) -> np.ndarray:
    """Grid on ``[0, duration]`` whose nodes include the protocol breakpoints."""
    segs = [(a, min(b, duration)) for a, b in protocol.segments() if a < duration]
    total = sum(b - a for a, b in segs)
    pieces = []
    for a, b in segs:
        n = max(2, int(np.ceil(n_steps * (b - a) / total)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append([segs[-1][1]])
    return np.concatenate(pieces)


def _check_duration(protocol: Protocol, duration: float | None) -> float:
    if duration is None:
        return protocol.duration
    if not 0 < duration <= protocol.duration * (1 + 1e-12):
        raise ProtocolError(f"duration {duration:g} outside (0, {protocol.duration:g}]")
    return min(float(duration), protocol.duration)


def _steps_for(config: EngineConfig, duration: float) -> int:
    n = config.min_steps
    if config.max_step is not None:
        n = max(n, int(np.ceil(duration / config.max_step)))
    return n


# ---------------------------------------------------------------------------
# state-vector engine
# ---------------------------------------------------------------------------


def _hamiltonians(family, protocol, times, n_max, sign, sparse):
    pts = protocol(np.asarray(times))
    if family.oscillator:
        return [sign * family.hamiltonian(p, n_max, sparse=sparse) for p in pts]
    return np.array([sign * family.hamiltonian(p) for p in pts])


def _propagate_dense(family, protocol, psi0, grid, n_max, sign):
    h = np.diff(grid)
    t1 = grid[:-1] + _GAUSS[0] * h
    t2 = grid[:-1] + _GAUSS[1] * h
    H1 = _hamiltonians(family, protocol, t1, n_max, sign, False)
    H2 = _hamiltonians(family, protocol, t2, n_max, sign, False)
    if family.oscillator:
        H1, H2 = np.array(H1), np.array(H2)
    comm = H2 @ H1 - H1 @ H2
    h3 = h[:, None, None]
    h_eff = 0.5 * (H1 + H2) - 1j * (np.sqrt(3) / 12) * h3 * comm
    h_eff = 0.5 * (h_eff + np.conj(np.swapaxes(h_eff, 1, 2)))
    energies, vecs = np.linalg.eigh(h_eff)
    phases = np.exp(-1j * energies * h[:, None])
    states = np.empty((grid.size, psi0.size), dtype=complex)
    states[0] = psi0
    psi = psi0
    for k in range(h.size):
        v = vecs[k]
        psi = v @ (phases[k] * (v.conj().T @ psi))
        states[k + 1] = psi
    return states


def _propagate_sparse(family, protocol, psi0, grid, n_max, sign, renormalize):
    states = np.empty((grid.size, psi0.size), dtype=complex)
    states[0] = psi0
    psi = psi0
    for k in range(grid.size - 1):
        h = grid[k + 1] - grid[k]
        p1, p2 = protocol(np.array([grid[k] + _GAUSS[0] * h, grid[k] + _GAUSS[1] * h]))
        H1 = sign * family.hamiltonian(p1, n_max, sparse=True)
        H2 = sign * family.hamiltonian(p2, n_max, sparse=True)
        gen = -1j * h * 0.5 * (H1 + H2) - (np.sqrt(3) / 12) * h**2 * (H2 @ H1 - H1 @ H2)
        psi = expm_multiply(sp.csr_matrix(gen), psi)
        if renormalize:
            psi = psi / np.linalg.norm(psi)
        states[k + 1] = psi
    return states


def evolve_matrix(
    family: HamiltonianFamily,
    protocol: Protocol,
    psi0: np.ndarray,
    duration: float | None = None,
    config: EngineConfig | None = None,
    *,
    n_max: int | None = None,
    sign: float = 1.0,
) -> Trajectory:
    """Integrate ``i d/dt psi = sign * H(lambda(t)) psi`` on a finite basis.

    The step count starts at ``config.min_steps`` and is doubled until the
    final state changes by less than ``config.rtol``. ``sign = -1`` together
    with ``protocol.reversed()`` runs the evolution backwards.

    Raises
    ------
    ProtocolError
        if the protocol is queried outside its domain.
    EngineError
        if the tolerance is not met within ``config.max_refinements`` doublings.
    """
    config = config or EngineConfig()
    duration = _check_duration(protocol, duration)
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if family.oscillator and n_max is None:
        n_max = psi0.size - 1
    dense = psi0.size <= _DENSE_LIMIT

    def run(n):
        grid = _grid(protocol, duration, n)
        if dense:
            return grid, _propagate_dense(family, protocol, psi0, grid, n_max, sign)
        return grid, _propagate_sparse(family, protocol, psi0, grid, n_max, sign, config.renormalize)

    n = _steps_for(config, duration)
    grid, states = run(n)
    for _ in range(config.max_refinements):
        grid2, states2 = run(2 * n)
        change = np.linalg.norm(states2[-1] - states[-1])
        grid, states, n = grid2, states2, 2 * n
        if change < config.rtol:
            break
    else:
        raise EngineError(f"state did not converge to {config.rtol:g} after refinement")

    hams = _hamiltonians(family, protocol, grid, n_max, 1.0, not dense)
    delta_e = np.sqrt([energy_variance(psi, H) for psi, H in zip(states, hams)])
    return Trajectory(
        grid,
        delta_e,
        _cumulative(delta_e, grid),
        states=states,
        kind="matrix",
        meta={"steps": int(n), "engine": "magnus4"},
    )


def line_element_length(states: np.ndarray) -> float:
    """Sum of Fubini-Study distances between consecutive recorded states."""
    s = states / np.linalg.norm(states, axis=1, keepdims=True)
    ov = np.einsum("ki,ki->k", s[:-1].conj(), s[1:])
    mag = np.abs(ov)
    phase = np.where(mag > 0, mag / np.where(mag > 0, ov, 1.0), 1.0)
    chord = np.linalg.norm(s[:-1] - phase[:, None] * s[1:], axis=1)
    return float(np.sum(2 * np.arcsin(np.minimum(chord / 2, np.sin(np.pi / 4)))))


# ---------------------------------------------------------------------------
# coherent-state engine
# ---------------------------------------------------------------------------


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_adaptive(f, t0, t1, y, tol, max_halvings=40):
    """Integrate from ``t0`` to ``t1`` with step-doubling error control."""
    t, h = t0, t1 - t0
    halvings = 0
    while t < t1:
        h = min(h, t1 - t)
        full = _rk4(f, t, y, h)
        half = _rk4(f, t + h / 2, _rk4(f, t, y, h / 2), h / 2)
        err = abs(half - full) / 15
        if err <= tol * max(1.0, abs(half)):
            y = half + (half - full) / 15
            t += h
            if err < tol / 64:
                h *= 2
        else:
            h /= 2
            halvings += 1
            if halvings > max_halvings:
                raise EngineError("RK4 step control failed")
    return y


def evolve_coherent(
    protocol: Protocol,
    mu0,
    duration: float | None = None,
    config: EngineConfig | None = None,
    *,
    omega: float = 1.0,
    sign: float = 1.0,
) -> Trajectory:
    """Displaced-vacuum dynamics under shifted-oscillator Hamiltonians.

    ``mu_c = (mu_q + i mu_p)/sqrt(2)`` rotates clockwise about ``lambda_c``
    at angular frequency ``omega``. ``delta_e = omega |mu_c - lambda_c|``.
    """
    config = config or EngineConfig()
    duration = _check_duration(protocol, duration)

    grid = _grid(protocol, duration, _steps_for(config, duration))

    # control values at the stage times of an accepted first step, in one batch
    t0, h = grid[:-1], np.diff(grid)
    mid = t0 + h / 2
    stages = np.concatenate([t0, t0 + h / 4, mid, mid + h / 4, mid + h / 2, t0 + h])
    stages = np.clip(stages, 0.0, duration)
    lam_stage = (protocol(stages) @ np.array([1.0, 1j])) / np.sqrt(2.0)
    cache = dict(zip(stages.tolist(), lam_stage.tolist()))

    def lam_c(t):
        v = cache.get(t)
        if v is None:
            lq, lp = protocol(t)
            v = complex(lq, lp) / np.sqrt(2.0)
        return v

    def rhs(t, y):
        return -1j * sign * omega * (y - lam_c(t))

    mu = np.empty(grid.size, dtype=complex)
    mu[0] = complex(*np.asarray(mu0, dtype=float)) / np.sqrt(2.0)
    for k in range(grid.size - 1):
        mu[k + 1] = _rk4_adaptive(rhs, grid[k], grid[k + 1], mu[k], config.rtol)
    lam = (protocol(grid) @ np.array([1.0, 1j])) / np.sqrt(2.0)
    delta_e = omega * np.abs(mu - lam)
    coords = np.sqrt(2.0) * np.column_stack([mu.real, mu.imag])
    return Trajectory(
        grid,
        delta_e,
        _cumulative(delta_e, grid),
        coords=coords,
        kind="coherent",
        meta={"omega": omega, "engine": "rk4-step-doubling"},
    )


# ---------------------------------------------------------------------------
# Gaussian (squeezed vacuum) engine
# ---------------------------------------------------------------------------


def quadratic_form(omega: float, r, theta) -> np.ndarray:
    """Matrix ``M`` with ``H(r, theta) = x^T M x / 2``, ``x = (q, p)``."""
    r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    m = np.empty(r.shape + (2, 2))
    m[..., 0, 0] = c + s * np.cos(theta)
    m[..., 1, 1] = c - s * np.cos(theta)
    m[..., 0, 1] = m[..., 1, 0] = s * np.sin(theta)
    return omega * m


def symplectic_generator(omega: float, r, theta) -> np.ndarray:
    """``Omega M``: ``dx/dt = Omega M x`` under ``H(r, theta)``."""
    return OMEGA_2 @ quadratic_form(omega, r, theta)


def symplectic_exp(a: np.ndarray) -> np.ndarray:
    """``exp(A)`` for (stacks of) traceless real 2x2 matrices.

    Uses ``A^2 = -det(A) I``, so ``exp(A) = cosh(k) I + sinh(k)/k A`` with
    ``k = sqrt(-det A)``.
    """
    a = np.asarray(a, dtype=float)
    k2 = -(a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0])
    k = np.sqrt(np.abs(k2))
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.where(k2 >= 0, np.cosh(k), np.cos(k))
        sh_k = np.where(k2 >= 0, np.sinh(k) / k, np.sin(k) / k)
    small = k < 1e-8
    sh_k = np.where(small, 1.0 + k2 / 6, sh_k)
    ch = np.where(small, 1.0 + k2 / 2, ch)
    return ch[..., None, None] * np.eye(2) + sh_k[..., None, None] * a


def squeezed_covariance(r, theta) -> np.ndarray:
    """Covariance of ``S(r e^{i theta})|0>`` (vacuum = identity/2)."""
    r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    v = np.empty(r.shape + (2, 2))
    v[..., 0, 0] = c - s * np.cos(theta)
    v[..., 1, 1] = c + s * np.cos(theta)
    v[..., 0, 1] = v[..., 1, 0] = -s * np.sin(theta)
    return 0.5 * v


def squeezed_coords(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Principal-value ``(r, theta)`` of (stacks of) squeezed-vacuum covariances."""
    c = cov[..., 0, 0] + cov[..., 1, 1]
    x = cov[..., 1, 1] - cov[..., 0, 0]
    y = -2 * cov[..., 0, 1]
    return 0.5 * np.arccosh(np.maximum(c, 1.0)), np.arctan2(y, x)


def _squeezed_speed(cov: np.ndarray, gen: np.ndarray) -> np.ndarray:
    """Fubini-Study speed ``sqrt((dX^2 + dY^2 - dC^2)/8)`` of the coordinates.

    ``C = tr V = cosh 2r``, ``X = sinh 2r cos theta``, ``Y = sinh 2r sin theta``
    parametrize the hyperboloid on which the metric takes this form.
    """
    dv = gen @ cov + cov @ np.swapaxes(gen, -1, -2)
    dc = dv[..., 0, 0] + dv[..., 1, 1]
    dx = dv[..., 1, 1] - dv[..., 0, 0]
    dy = -2 * dv[..., 0, 1]
    return np.sqrt(np.clip((dx**2 + dy**2 - dc**2) / 8, 0.0, None))


def _gaussian_run(protocol, cov0, grid, omega, sign):
    h = np.diff(grid)
    p1 = protocol(grid[:-1] + _GAUSS[0] * h)
    p2 = protocol(grid[:-1] + _GAUSS[1] * h)
    a1 = sign * symplectic_generator(omega, p1[:, 0], p1[:, 1])
    a2 = sign * symplectic_generator(omega, p2[:, 0], p2[:, 1])
    comm = a2 @ a1 - a1 @ a2
    omega4 = 0.5 * h[:, None, None] * (a1 + a2) + (np.sqrt(3) / 12) * h[:, None, None] ** 2 * comm
    steps = symplectic_exp(omega4)
    covs = np.empty((grid.size, 2, 2))
    covs[0] = cov0
    v = cov0
    for k in range(h.size):
        v = steps[k] @ v @ steps[k].T
        v = 0.5 * (v + v.T)
        covs[k + 1] = v
    return covs


def purity_tolerance(covs: np.ndarray) -> float:
    """Allowed ``|det(2V) - 1|`` along a covariance trajectory.

    ``det(2V) = 1`` makes ``cond(2V) = |2V|^2``, and the rounding floor of the
    determinant grows with it; strongly squeezed excursions would otherwise
    fail a flat ``1e-9`` on rounding alone.
    """
    cond = np.max(np.linalg.norm(2 * np.asarray(covs), ord=2, axis=(-2, -1))) ** 2
    return max(1e-9, 1e3 * np.finfo(float).eps * cond)


def evolve_gaussian(
    protocol: Protocol,
    state0,
    duration: float | None = None,
    config: EngineConfig | None = None,
    *,
    omega: float = 1.0,
    sign: float = 1.0,
) -> Trajectory:
    """Squeezed-vacuum dynamics via symplectic covariance propagation.

    Coordinates are returned as ``(mu_r, mu_theta)`` with ``mu_theta``
    unwrapped for continuity and starting at the given ``state0`` angle.
    """
    config = config or EngineConfig()
    duration = _check_duration(protocol, duration)
    r0, th0 = (float(v) for v in state0)
    cov0 = squeezed_covariance(r0, th0)

    n = _steps_for(config, duration)
    grid = _grid(protocol, duration, n)
    covs = _gaussian_run(protocol, cov0, grid, omega, sign)
    for _ in range(config.max_refinements):
        grid2 = _grid(protocol, duration, 2 * n)
        covs2 = _gaussian_run(protocol, cov0, grid2, omega, sign)
        change = np.max(np.abs(covs2[-1] - covs[-1])) / max(1.0, np.max(np.abs(covs2[-1])))
        grid, covs, n = grid2, covs2, 2 * n
        if change < config.rtol:
            break
    else:
        raise EngineError(f"covariance did not converge to {config.rtol:g}")

    purity = np.abs(4 * np.linalg.det(covs) - 1)
    if purity.max() > purity_tolerance(covs):
        raise EngineError(f"purity drift det(2V) - 1 = {purity.max():.2e}")
    asym = np.abs(covs[:, 0, 1] - covs[:, 1, 0]).max()
    if asym > 1e-9:
        raise EngineError("covariance lost symmetry")

    r, th = squeezed_coords(covs)
    th = np.unwrap(th)
    th += th0 - th[0]
    pts = protocol(grid)
    gen = symplectic_generator(omega, pts[:, 0], pts[:, 1])
    delta_e = _squeezed_speed(covs, gen)
    return Trajectory(
        grid,
        delta_e,
        _cumulative(delta_e, grid),
        coords=np.column_stack([r, th]),
        covariances=covs,
        kind="squeezed",
        meta={"omega": omega, "steps": int(n), "engine": "symplectic-magnus4"},
    )

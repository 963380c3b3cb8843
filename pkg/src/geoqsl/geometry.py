"""
Quantum geometric tensor, induced metrics, path lengths and geodesic distances.

The quantum geometric tensor of the ground-state family is

    chi_{mu nu} = <d_mu psi| (1 - |psi><psi|) |d_nu psi>,

whose real part is the Fubini-Study metric ``g`` on control space. All
lengths in this module are Fubini-Study lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .model import (
    HamiltonianFamily,
    MatrixFamily,
    QubitFamily,
    QutritFamily,
    ShiftedOscillatorFamily,
    SqueezedOscillatorFamily,
)

MetricSource = Literal["analytic", "finite-difference"]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ParamPath:
    """Time-ordered samples ``(t_k, lambda_k)`` of a control path.

    When built with :meth:`from_curve` the underlying curve is kept so that
    :func:`path_length` can refine the sampling.
    """

    times: np.ndarray
    points: np.ndarray
    curve: Callable | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if t.size < 2 or pts.shape[0] != t.size:
            raise GeometryError("a path needs at least two samples, one point per time")
        if np.any(np.diff(t) <= 0):
            raise GeometryError("path times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_curve(cls, curve: Callable, t0: float, t1: float, n: int = 64) -> "ParamPath":
        t = np.linspace(t0, t1, n + 1)
        return cls(t, _eval_curve(curve, t), curve)

    def resampled(self, n: int) -> "ParamPath":
        if self.curve is None:
            raise GeometryError("cannot resample a path without its curve")
        return ParamPath.from_curve(self.curve, self.times[0], self.times[-1], n)


def _eval_curve(curve: Callable, t: np.ndarray) -> np.ndarray:
    pts = np.asarray(curve(t), dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


# ---------------------------------------------------------------------------
# quantum geometric tensor and metrics
# ---------------------------------------------------------------------------


def _aligned(psi: np.ndarray, ref: np.ndarray) -> np.ndarray:
    ov = np.vdot(ref, psi)
    return psi * (np.conj(ov) / abs(ov))


def _state_derivatives(family, point, step, n_max, richardson):
    base = family.point(point)
    psi = family.ground_state(base, n_max)

    def central(mu, h):
        e = np.zeros_like(base)
        e[mu] = h
        plus = _aligned(family.ground_state(base + e, n_max), psi)
        minus = _aligned(family.ground_state(base - e, n_max), psi)
        return (plus - minus) / (2 * h)

    derivs = []
    for mu in range(base.size):
        d = central(mu, step)
        if richardson:
            d = (4 * central(mu, step / 2) - d) / 3
        derivs.append(d)
    return psi, np.array(derivs)


def qgt_from_derivatives(psi: np.ndarray, derivs: np.ndarray) -> np.ndarray:
    """``chi_{mu nu} = <d_mu|d_nu> - <d_mu|psi><psi|d_nu>`` for rows ``derivs``."""
    perp = derivs - np.outer(derivs @ psi.conj(), psi)
    chi = perp.conj() @ perp.T
    return 0.5 * (chi + chi.conj().T)


def qgt_finite_difference(
    family: HamiltonianFamily,
    point,
    step: float = 1e-4,
    n_max: int | None = None,
    richardson: bool = True,
) -> np.ndarray:
    """Quantum geometric tensor from central differences of the ground state.

    Neighbouring states are phase-aligned to the central state before
    differencing and the component along the central state is projected out,
    so the result does not depend on the gauge of the input states.

    Parameters
    ----------
    family : HamiltonianFamily
    point : array_like
        Control point.
    step : float
        Finite-difference step, in ``[1e-6, 1e-2]``.
    n_max : int, optional
        Fock truncation for oscillator families; chosen from the tail bound
        of the stencil points when omitted.
    richardson : bool
        Combine steps ``h`` and ``h/2`` to cancel the ``O(h^2)`` error.

    Returns
    -------
    ndarray, shape (p, p)
        Hermitian tensor ``chi``; ``chi.real`` is the metric.
    """
    if not 1e-6 <= step <= 1e-2:
        raise GeometryError(f"step {step:g} outside [1e-6, 1e-2]")
    if family.oscillator and n_max is None:
        base = family.point(point)
        stencil = [base + s * step * e for e in np.eye(base.size) for s in (-1, 1)]
        n_max = family.default_cutoff(stencil + [base])
    psi, derivs = _state_derivatives(family, point, step, n_max, richardson)
    return qgt_from_derivatives(psi, derivs)


def perturbative_qgt(family: HamiltonianFamily, point, dh_step: float = 1e-6) -> np.ndarray:
    """QGT from the first-order perturbative tangent of the ground state.

    ``d_nu psi_0 = sum_{k>0} |k><k|d_nu H|0> / (E_0 - E_k)``; the derivative of
    ``H`` is exact for the qutrit and a central difference otherwise.
    """
    base = family.point(point)
    h = family.hamiltonian(base)
    energies, vecs = np.linalg.eigh(h)
    if isinstance(family, QutritFamily):
        dhs = [family.control_operator]
    else:
        dhs = []
        for mu in range(base.size):
            e = np.zeros_like(base)
            e[mu] = dh_step
            dhs.append((family.hamiltonian(base + e) - family.hamiltonian(base - e)) / (2 * dh_step))
    ground = vecs[:, 0]
    # rows: <k|dH_mu|0> for k > 0
    elems = np.array([vecs[:, 1:].conj().T @ dh @ ground for dh in dhs])
    weights = 1.0 / (energies[1:] - energies[0]) ** 2
    return (elems.conj() * weights) @ elems.T


def analytic_metric(family: HamiltonianFamily, point) -> np.ndarray:
    """Closed-form Fubini-Study metric for the known families.

    The qutrit (and any :class:`MatrixFamily`) has no closed form; its metric
    is the real part of :func:`perturbative_qgt`.
    """
    c = family.point(point)
    if isinstance(family, ShiftedOscillatorFamily):
        return 0.5 * np.eye(2)
    if isinstance(family, QubitFamily):
        theta, _ = family.angles(c)
        if family.theta is None:
            return 0.25 * np.diag([1.0, np.sin(theta) ** 2])
        return np.array([[0.25 * np.sin(theta) ** 2]])
    if isinstance(family, SqueezedOscillatorFamily):
        return np.diag([0.5, np.sinh(2 * c[0]) ** 2 / 8])
    if isinstance(family, (QutritFamily, MatrixFamily)):
        return perturbative_qgt(family, c).real
    raise GeometryError(f"no metric available for {type(family).__name__}")


def analytic_qgt(family: HamiltonianFamily, point) -> np.ndarray:
    """Closed-form quantum geometric tensor (metric plus Berry curvature part)."""
    c = family.point(point)
    if isinstance(family, ShiftedOscillatorFamily):
        return 0.5 * np.array([[1, 1j], [-1j, 1]])
    if isinstance(family, QubitFamily) and family.theta is None:
        s = np.sin(c[0])
        return 0.25 * np.array([[1, 1j * s], [-1j * s, s**2]])
    if isinstance(family, SqueezedOscillatorFamily):
        s = np.sinh(2 * c[0])
        return np.array([[0.5, 0.25j * s], [-0.25j * s, s**2 / 8]])
    if isinstance(family, (QutritFamily, MatrixFamily)):
        return perturbative_qgt(family, c)
    return analytic_metric(family, c).astype(complex)


def metric(family: HamiltonianFamily, point, source: MetricSource = "analytic") -> np.ndarray:
    if source == "analytic":
        return analytic_metric(family, point)
    if source == "finite-difference":
        return qgt_finite_difference(family, point).real
    raise GeometryError(f"unknown metric source {source!r}")


def _metric_batch(family, points: np.ndarray, source: MetricSource) -> np.ndarray:
    if source == "analytic":
        if isinstance(family, ShiftedOscillatorFamily):
            return np.broadcast_to(0.5 * np.eye(2), (len(points), 2, 2))
        if isinstance(family, SqueezedOscillatorFamily):
            out = np.zeros((len(points), 2, 2))
            out[:, 0, 0] = 0.5
            out[:, 1, 1] = np.sinh(2 * points[:, 0]) ** 2 / 8
            return out
        if isinstance(family, QubitFamily):
            if family.theta is not None:
                return np.full((len(points), 1, 1), 0.25 * np.sin(family.theta) ** 2)
            out = np.zeros((len(points), 2, 2))
            out[:, 0, 0] = 0.25
            out[:, 1, 1] = 0.25 * np.sin(points[:, 0]) ** 2
            return out
    return np.array([metric(family, p, source) for p in points])


# ---------------------------------------------------------------------------
# lengths
# ---------------------------------------------------------------------------


def _polyline_length(family, points: np.ndarray, source: MetricSource) -> float:
    steps = np.diff(points, axis=0)
    mids = 0.5 * (points[1:] + points[:-1])
    try:
        g = _metric_batch(family, mids, source)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise GeometryError(f"metric evaluation failed: {exc}") from exc
    quad = np.einsum("ki,kij,kj->k", steps, g, steps)
    return float(np.sum(np.sqrt(np.clip(quad, 0.0, None))))


def path_length(
    family: HamiltonianFamily,
    path: ParamPath,
    metric_source: MetricSource = "analytic",
    rtol: float = 1e-8,
    max_levels: int = 14,
) -> float:
    """Fubini-Study length ``int sqrt(g(dl, dl))`` of a control path.

    Each segment contributes ``sqrt(dl^T g(mid) dl)``. Paths that carry their
    curve are refined by halving the segments until the (Richardson
    extrapolated) length changes by less than ``rtol``; bare sample paths are
    summed as given.
    """
    if path.curve is None:
        return _polyline_length(family, path.points, metric_source)
    n = path.times.size - 1
    coarse = _polyline_length(family, path.points, metric_source)
    prev_extrap = None
    for _ in range(max_levels):
        n *= 2
        fine = _polyline_length(family, path.resampled(n).points, metric_source)
        extrap = (4 * fine - coarse) / 3
        if prev_extrap is not None and abs(extrap - prev_extrap) <= rtol * max(abs(extrap), 1e-300):
            return float(extrap)
        if extrap == 0.0 and coarse == 0.0:
            return 0.0
        prev_extrap, coarse = extrap, fine
    raise GeometryError("path length did not converge; supply a smoother or finer path")


def fs_distance(psi1: np.ndarray, psi2: np.ndarray) -> float:
    """Fubini-Study geodesic distance ``arccos |<psi1|psi2>|`` in ``[0, pi/2]``.

    Evaluated as ``2 arcsin(|psi1 - e^{i phi} psi2| / 2)`` on normalized,
    phase-aligned vectors, which stays accurate for nearby states where
    ``arccos`` loses half the digits.
    """
    a = np.asarray(psi1, dtype=complex)
    b = np.asarray(psi2, dtype=complex)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    ov = np.vdot(a, b)
    if abs(ov) > 0:
        b = b * (abs(ov) / ov)
    chord = np.linalg.norm(a - b)
    return float(2 * np.arcsin(min(chord / 2, np.sin(np.pi / 4))))


def geodesic_distance_coherent(mu1, mu2) -> float:
    """Distance between displaced vacua under the flat metric ``(dq^2 + dp^2)/2``."""
    d = np.asarray(mu1, dtype=float) - np.asarray(mu2, dtype=float)
    return float(np.hypot(*d) / np.sqrt(2.0))


def _disk_coordinate(p) -> complex:
    r, theta = (float(v) for v in p)
    if r < 0:
        raise GeometryError("squeezing radius must be non-negative")
    return np.tanh(r) * np.exp(1j * theta)


def geodesic_distance_squeezed(p1, p2) -> float:
    """Hyperbolic distance between squeezed vacua ``(r1, theta1)``, ``(r2, theta2)``.

    The metric ``dr^2/2 + sinh^2(2r) dtheta^2/8`` becomes a Poincare disk of
    curvature scale ``1/sqrt(2)`` in ``w = tanh(r) e^{i theta}``.
    """
    w1, w2 = _disk_coordinate(p1), _disk_coordinate(p2)
    if abs(w1 - w2) == 0.0:
        return 0.0
    arg = abs(w1 - w2) / abs(1 - np.conj(w1) * w2)
    if arg >= 1.0:
        raise GeometryError("points on the disk boundary")
    arg = min(arg, 1 - 1e-15)
    return float(np.arctanh(arg) / np.sqrt(2.0))


def min_arc(angle1: float, angle2: float) -> tuple[float, int]:
    """Shorter arc between two angles and its direction (+1 ccw, -1 cw).

    Ties at ``pi`` resolve counterclockwise.
    """
    delta = (angle2 - angle1) % (2 * np.pi)
    if np.isclose(delta, 2 * np.pi, rtol=0, atol=1e-14):
        delta = 0.0
    if delta <= np.pi:
        return float(delta), 1
    return float(2 * np.pi - delta), -1


def arc_distance_in_control_circle(
    family: HamiltonianFamily, fixed_coord: float, angle1: float, angle2: float
) -> float:
    """Length of the shorter arc between two points of a circular control space.

    ``fixed_coord`` is the polar angle of a qubit circle or the squeezing
    radius of a squeezed circle.
    """
    delta, _ = min_arc(angle1, angle2)
    if isinstance(family, QubitFamily):
        return delta * np.sin(fixed_coord) / 2
    if isinstance(family, SqueezedOscillatorFamily):
        return delta * np.sinh(2 * fixed_coord) / (2 * np.sqrt(2.0))
    raise GeometryError(f"{type(family).__name__} has no circular control space")

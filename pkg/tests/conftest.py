"""Suite-wide trajectory checks.

Every trajectory produced by the three engines anywhere in the suite is
checked for norm conservation, the endpoint distance bound and
reversibility. A failure surfaces in the test that produced the trajectory.
"""

from __future__ import annotations

import numpy as np
import pytest

from geoqsl import dynamics, geometry
from geoqsl.model import (
    ShiftedOscillatorFamily,
    SqueezedOscillatorFamily,
    coherent_amplitudes,
    squeezed_amplitudes,
)
from geoqsl.protocols import Protocol

NORM_TOL = 1e-10
BOUND_TOL = 1e-8
REVERSAL_TOL = 1e-8

_ORIGINAL = {
    "matrix": dynamics.evolve_matrix,
    "coherent": dynamics.evolve_coherent,
    "gaussian": dynamics.evolve_gaussian,
}
CHECKED: list[dict] = []


def _window(protocol: Protocol, duration: float) -> Protocol:
    """Time reverse of ``protocol`` restricted to ``[0, duration]``."""
    return Protocol(
        duration,
        lambda t: protocol.schedule(duration - np.asarray(t)),
        protocol.dim,
        tuple(duration - b for b in protocol.breakpoints if 0 < b < duration),
    )


def _endpoint_states(traj):
    if traj.states is not None:
        return traj.states[0], traj.states[-1]
    ends = traj.coords[[0, -1]]
    if traj.kind == "coherent":
        n_max = ShiftedOscillatorFamily().default_cutoff(ends)
        return [coherent_amplitudes(complex(q, p) / np.sqrt(2.0), n_max) for q, p in ends]
    n_max = SqueezedOscillatorFamily().default_cutoff(ends)
    return [squeezed_amplitudes(r, th, n_max) for r, th in ends]


def check_trajectory(engine, traj, reversal_fidelity=None):
    """Assert the suite-wide properties; returns a summary record."""
    if traj.states is not None:
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.max(np.abs(norms - 1)) <= NORM_TOL, "norm not conserved"
    if traj.covariances is not None:
        assert np.max(np.abs(4 * np.linalg.det(traj.covariances) - 1)) <= dynamics.purity_tolerance(traj.covariances), (
            "purity not conserved"
        )
    psi0, psi1 = _endpoint_states(traj)
    d = geometry.fs_distance(psi0, psi1)
    assert traj.l_E >= d - BOUND_TOL, f"l_E={traj.l_E} below endpoint distance {d}"
    if reversal_fidelity is not None:
        assert reversal_fidelity >= 1 - REVERSAL_TOL, f"reversal fidelity {reversal_fidelity}"
    record = {"engine": engine, "l_E": traj.l_E, "d": d, "reversal": reversal_fidelity}
    CHECKED.append(record)
    return record


def _guarded_matrix(family, protocol, psi0, duration=None, config=None, *, n_max=None, sign=1.0):
    traj = _ORIGINAL["matrix"](family, protocol, psi0, duration, config, n_max=n_max, sign=sign)
    back = _ORIGINAL["matrix"](
        family, _window(protocol, traj.times[-1]), traj.states[-1], None, config, n_max=n_max, sign=-sign
    )
    check_trajectory("matrix", traj, dynamics.fidelity(back.states[-1], traj.states[0]))
    return traj


def _guarded_coherent(protocol, mu0, duration=None, config=None, *, omega=1.0, sign=1.0):
    traj = _ORIGINAL["coherent"](protocol, mu0, duration, config, omega=omega, sign=sign)
    back = _ORIGINAL["coherent"](
        _window(protocol, traj.times[-1]), traj.coords[-1], None, config, omega=omega, sign=-sign
    )
    err = (back.coords[-1] - traj.coords[0]) / np.sqrt(2.0)
    check_trajectory("coherent", traj, float(np.exp(-(err @ err))))
    return traj


def _guarded_gaussian(protocol, state0, duration=None, config=None, *, omega=1.0, sign=1.0):
    traj = _ORIGINAL["gaussian"](protocol, state0, duration, config, omega=omega, sign=sign)
    back = _ORIGINAL["gaussian"](
        _window(protocol, traj.times[-1]), traj.coords[-1], None, config, omega=omega, sign=-sign
    )
    fid = float(1 / np.sqrt(np.linalg.det(back.covariances[-1] + traj.covariances[0])))
    check_trajectory("gaussian", traj, fid)
    return traj


@pytest.fixture(autouse=True, scope="session")
def guard_trajectories():
    mp = pytest.MonkeyPatch()
    mp.setattr(dynamics, "evolve_matrix", _guarded_matrix)
    mp.setattr(dynamics, "evolve_coherent", _guarded_coherent)
    mp.setattr(dynamics, "evolve_gaussian", _guarded_gaussian)
    yield CHECKED
    mp.undo()

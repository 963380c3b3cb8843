"""
Hamiltonian families, their ground states and spectra.

Four concrete families are provided:

* :class:`QubitFamily` -- ``H = -(omega/2) n(theta, phi) . sigma``
* :class:`QutritFamily` -- ``H = H0 + lam K`` with a coupling asymmetry ``a``
* :class:`ShiftedOscillatorFamily` -- ``H = omega/2 ((q - lq)^2 + (p - lp)^2)``
* :class:`SqueezedOscillatorFamily` -- ``H = S(z) H0 S(z)^dagger``, ``z = r e^{i theta}``

plus :class:`MatrixFamily`, a thin wrapper around any callable returning a
Hermitian matrix. Oscillator families are realized in a truncated Fock basis
of dimension ``n_max + 1``; their ground states are the closed-form Fock
expansions of the displaced and squeezed vacuum.

All states returned here are in a fixed gauge: the first amplitude with
non-negligible modulus is real and positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

DEGENERACY_TOL = 1e-9
TAIL_TOL = 1e-10
HERMITIAN_RTOL = 1e-12


class DegenerateGroundStateError(ValueError):
    """Raised when the ground state is (nearly) degenerate."""


class TruncationError(ValueError):
    """Raised when a Fock truncation leaves too much probability in the tail."""


class Spectrum(NamedTuple):
    energies: np.ndarray
    gap: float


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def fix_gauge(psi: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Normalize ``psi`` and rotate its global phase.

    The first amplitude whose modulus exceeds ``rel_tol * max|psi|`` is made
    real and positive.
    """
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    mags = np.abs(psi)
    idx = int(np.argmax(mags > rel_tol * mags.max()))
    phase = psi[idx] / mags[idx]
    return psi * np.conj(phase)


def annihilation(dim: int, sparse: bool = False):
    """Truncated annihilation operator on ``dim`` Fock levels."""
    off = np.sqrt(np.arange(1, dim, dtype=float))
    a = sp.diags(off, 1, shape=(dim, dim), format="csr", dtype=complex)
    return a if sparse else a.toarray()


def _check_hermitian(h: np.ndarray) -> None:
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > HERMITIAN_RTOL * scale:
        raise AssertionError("Hamiltonian matrix is not Hermitian")


def _as_point(point, dim: int) -> np.ndarray:
    coords = np.atleast_1d(np.asarray(point, dtype=float))
    if coords.shape != (dim,):
        raise ValueError(f"control point must have {dim} coordinate(s), got {coords.shape}")
    return coords


def coherent_cutoff(alpha_sq: float, tail: float = 1e-13) -> int:
    """Smallest ``n_max`` whose Poisson(|alpha|^2) tail is below ``tail``."""
    n = max(8, int(8 * max(1.0, alpha_sq)))
    while poisson.sf(n, alpha_sq) >= tail:
        n += max(4, n // 8)
    return n


def squeezed_pair_probabilities(r: float, n_pairs: int) -> np.ndarray:
    """Occupation probabilities of the Fock levels ``0, 2, 4, ...`` of S(r)|0>."""
    n = np.arange(n_pairs)
    if r == 0.0:
        out = np.zeros(n_pairs)
        out[0] = 1.0
        return out
    logp = (
        -np.log(np.cosh(r))
        + 2 * n * np.log(np.tanh(r))
        + gammaln(2 * n + 1)
        - 2 * n * np.log(2.0)
        - 2 * gammaln(n + 1)
    )
    return np.exp(logp)


def squeezed_cutoff(r: float, tail: float = 1e-13) -> int:
    """Smallest even ``n_max`` for which the squeezed-vacuum tail is below ``tail``."""
    if not 0 < tail < 1:
        raise ValueError("tail must lie in (0, 1)")
    n_pairs = 64
    while True:
        p = squeezed_pair_probabilities(r, n_pairs)
        # terms decay at least geometrically with ratio tanh^2 r
        beyond = p[-1] * np.cosh(r) ** 2
        if beyond < 1e-3 * tail:
            # rest[k] = mass above level 2k, summed from the small end
            rest = np.append(np.cumsum(p[::-1])[::-1][1:], 0.0) + beyond
            return max(2, 2 * int(np.nonzero(rest < tail)[0][0]))
        n_pairs *= 2


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


class HamiltonianFamily:
    """Common interface of the parametrized Hamiltonian families."""

    dim: int = 1
    oscillator: bool = False
    #: index of the angular coordinate for families with a circular control space
    circle_axis: int | None = None

    def point(self, point) -> np.ndarray:
        return _as_point(point, self.dim)

    def hamiltonian(self, point, n_max: int | None = None):
        raise NotImplementedError

    def ground_state(self, point, n_max: int | None = None) -> np.ndarray:
        h = self.hamiltonian(point, n_max)
        energies, vecs = np.linalg.eigh(h)
        if energies[1] - energies[0] < DEGENERACY_TOL:
            raise DegenerateGroundStateError(
                f"gap {energies[1] - energies[0]:.3e} below {DEGENERACY_TOL:g}"
            )
        return fix_gauge(vecs[:, 0])

    def default_cutoff(self, points: Sequence) -> int | None:
        return None

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class QubitFamily(HamiltonianFamily):
    """Two-level system ``H = -(omega/2)(sin t cos f sx + sin t sin f sy + cos t sz)``.

    With ``theta`` left as ``None`` the control point is ``(theta, phi)``;
    otherwise the polar angle is frozen and the control is the azimuth alone,
    i.e. the circle control space of fixed ``theta``.

    The ground-state manifold is taken to be ``cos(t/2)|0> + sin(t/2)e^{if}|1>``
    irrespective of the sign of ``omega``; for ``omega < 0`` this is the
    excited state of ``H``.
    """

    omega: float = 1.0
    theta: float | None = None

    def __post_init__(self):
        if self.theta is not None and not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return 2 if self.theta is None else 1

    @property
    def circle_axis(self) -> int:  # type: ignore[override]
        return 1 if self.theta is None else 0

    def angles(self, point) -> tuple[float, float]:
        c = self.point(point)
        if self.theta is None:
            return float(c[0]), float(c[1])
        return float(self.theta), float(c[0])

    def bloch_vector(self, point) -> np.ndarray:
        t, f = self.angles(point)
        return np.array([np.sin(t) * np.cos(f), np.sin(t) * np.sin(f), np.cos(t)])

    def hamiltonian(self, point, n_max=None):
        nx, ny, nz = self.bloch_vector(point)
        return -0.5 * self.omega * (nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z)

    def ground_state(self, point, n_max=None):
        t, f = self.angles(point)
        return fix_gauge(np.array([np.cos(t / 2), np.sin(t / 2) * np.exp(1j * f)]))

    def describe(self):
        return {"family": "qubit", "omega": self.omega, "theta": self.theta}


@dataclass(frozen=True)
class QutritFamily(HamiltonianFamily):
    """Linearly controlled qutrit ``H(lam) = diag(-w, 0, w) + lam K``."""

    omega: float = 1.0
    a: float = 1.0
    dim = 1

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def h0(self) -> np.ndarray:
        return np.diag([-self.omega, 0.0, self.omega]).astype(complex)

    @property
    def control_operator(self) -> np.ndarray:
        a = self.a
        return np.array([[0, 1j, 0], [-1j, 0, 1j * a], [0, -1j * a, 0]], dtype=complex)

    def hamiltonian(self, point, n_max=None):
        (lam,) = self.point(point)
        return self.h0 + lam * self.control_operator

    def characteristic_coefficients(self, lam: float) -> np.ndarray:
        """Coefficients of ``mu^3 - mu(l^2 + a^2 l^2 + w^2) + l^2 w - a^2 l^2 w``."""
        w, a = self.omega, self.a
        return np.array([1.0, 0.0, -(lam**2 + a**2 * lam**2 + w**2), lam**2 * w - a**2 * lam**2 * w])

    def discriminant(self, lam: float) -> float:
        _, _, p, q = self.characteristic_coefficients(lam)
        return float(-4 * p**3 - 27 * q**2)

    def eigenvector_formula(self, lam: float, mu: float) -> np.ndarray:
        """Unnormalized closed-form eigenvector for eigenvalue ``mu`` (zero at ``lam = 0``)."""
        w, a = self.omega, self.a
        return np.array([a**2 * lam**2 + mu * (w - mu), -1j * lam * (w - mu), a * lam**2])

    def describe(self):
        return {"family": "qutrit", "omega": self.omega, "a": self.a}


@dataclass(frozen=True)
class ShiftedOscillatorFamily(HamiltonianFamily):
    """Harmonic oscillator with linearly shifted quadratures, control ``(lq, lp)``."""

    omega: float = 1.0
    dim = 2
    oscillator = True

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @staticmethod
    def amplitude(point) -> complex:
        lq, lp = _as_point(point, 2)
        return complex(lq, lp) / np.sqrt(2.0)

    def hamiltonian(self, point, n_max=None, sparse=False):
        if n_max is None or n_max < 1:
            raise ValueError("oscillator families need a truncation n_max >= 1")
        alpha = self.amplitude(point)
        d = n_max + 1
        a = annihilation(d, sparse=True)
        num = sp.diags(np.arange(d) + 0.5 + abs(alpha) ** 2, 0, format="csr", dtype=complex)
        h = self.omega * (num - np.conj(alpha) * a - alpha * a.T)
        return h.tocsr() if sparse else h.toarray()

    def ground_state(self, point, n_max=None):
        alpha = self.amplitude(point)
        if n_max is None:
            n_max = coherent_cutoff(abs(alpha) ** 2)
        tail = poisson.sf(n_max, abs(alpha) ** 2)
        if tail > TAIL_TOL:
            raise TruncationError(f"coherent tail {tail:.2e} beyond n_max={n_max}")
        return coherent_amplitudes(alpha, n_max)

    def default_cutoff(self, points):
        return max(coherent_cutoff(abs(self.amplitude(p)) ** 2) for p in points)

    def describe(self):
        return {"family": "shifted-oscillator", "omega": self.omega}


@dataclass(frozen=True)
class SqueezedOscillatorFamily(HamiltonianFamily):
    """Squeezed harmonic oscillator ``S(z) H0 S(z)^dagger``, control ``(r, theta)``."""

    omega: float = 1.0
    dim = 2
    oscillator = True
    circle_axis = 1

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    def point(self, point):
        c = _as_point(point, 2)
        if c[0] < 0:
            raise ValueError("squeezing radius r must be non-negative")
        return c

    def hamiltonian(self, point, n_max=None, sparse=False):
        if n_max is None or n_max < 1:
            raise ValueError("oscillator families need a truncation n_max >= 1")
        r, th = self.point(point)
        d = n_max + 1
        a = annihilation(d, sparse=True)
        a2 = a @ a
        num = sp.diags(np.arange(d) + 0.5, 0, format="csr", dtype=complex)
        h = self.omega * (
            np.cosh(2 * r) * num
            + 0.5 * np.sinh(2 * r) * (np.exp(1j * th) * a2.T + np.exp(-1j * th) * a2)
        )
        return h.tocsr() if sparse else h.toarray()

    def ground_state(self, point, n_max=None):
        r, th = self.point(point)
        if n_max is None:
            n_max = squeezed_cutoff(r)
        p = squeezed_pair_probabilities(r, n_max // 2 + 1)
        tail = max(0.0, 1.0 - p.sum())
        if tail > TAIL_TOL:
            raise TruncationError(f"squeezed tail {tail:.2e} beyond n_max={n_max}")
        return squeezed_amplitudes(r, th, n_max)

    def default_cutoff(self, points):
        return max(squeezed_cutoff(float(self.point(p)[0])) for p in points)

    def describe(self):
        return {"family": "squeezed-oscillator", "omega": self.omega}


@dataclass(frozen=True)
class MatrixFamily(HamiltonianFamily):
    """Generic family defined by a callable ``point -> Hermitian matrix``."""

    builder: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    dim: int = 1  # type: ignore[misc]
    name: str = "matrix"

    def hamiltonian(self, point, n_max=None):
        h = np.asarray(self.builder(self.point(point)), dtype=complex)
        _check_hermitian(h)
        return h

    def describe(self):
        return {"family": self.name, "dim": self.dim}


# ---------------------------------------------------------------------------
# closed-form Fock amplitudes and operator oracles
# ---------------------------------------------------------------------------


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Truncated, renormalized Fock expansion of the coherent state ``|alpha>``."""
    n = np.arange(n_max + 1)
    amp = np.empty(n_max + 1, dtype=complex)
    if alpha == 0:
        amp[:] = 0
        amp[0] = 1
        return amp
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    amp = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return fix_gauge(amp)


def squeezed_amplitudes(r: float, theta: float, n_max: int) -> np.ndarray:
    """Truncated, renormalized Fock expansion of ``S(r e^{i theta})|0>``."""
    amp = np.zeros(n_max + 1, dtype=complex)
    k = np.arange(n_max // 2 + 1)
    mags = np.sqrt(squeezed_pair_probabilities(r, k.size))
    amp[::2] = mags * np.exp(1j * k * (theta + np.pi))
    return fix_gauge(amp)


def _padded_exponential(generator: Callable[[int], np.ndarray], n_max: int, pad: int) -> np.ndarray:
    d = n_max + 1 + pad
    return expm(generator(d))[: n_max + 1, : n_max + 1]


def displacement_fock(lambda_q: float, lambda_p: float, n_max: int) -> np.ndarray:
    """Truncated matrix of the displacement operator ``D_lambda``.

    Computed as the exponential of the generator on a padded Fock space and
    cut back to ``n_max + 1`` levels.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    alpha = complex(lambda_q, lambda_p) / np.sqrt(2.0)
    tail = poisson.sf(n_max, abs(alpha) ** 2)
    if tail > 1e-8:
        raise TruncationError(f"displacement tail {tail:.2e} beyond n_max={n_max}")

    def gen(d):
        a = annihilation(d)
        return alpha * a.conj().T - np.conj(alpha) * a

    pad = coherent_cutoff(abs(alpha) ** 2) + 16
    return _padded_exponential(gen, n_max, pad)


def squeeze_fock(r: float, theta: float, n_max: int) -> np.ndarray:
    """Truncated matrix of ``S(z) = exp(z*/2 a^2 - z/2 a^dag^2)``, ``z = r e^{i theta}``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    p = squeezed_pair_probabilities(r, n_max // 2 + 1)
    if 1.0 - p.sum() > 1e-8:
        raise TruncationError(f"squeezing tail {1.0 - p.sum():.2e} beyond n_max={n_max}")
    z = r * np.exp(1j * theta)

    def gen(d):
        a = annihilation(d)
        a2 = a @ a
        return 0.5 * np.conj(z) * a2 - 0.5 * z * a2.conj().T

    pad = squeezed_cutoff(r) + 32
    return _padded_exponential(gen, n_max, pad)


# ---------------------------------------------------------------------------
# functional front end
# ---------------------------------------------------------------------------


def hamiltonian_matrix(family: HamiltonianFamily, point, n_max: int | None = None) -> np.ndarray:
    """Dense Hermitian matrix of ``H(point)``; oscillators need ``n_max``."""
    if family.oscillator and n_max is None:
        raise ValueError("n_max is required for oscillator families")
    return family.hamiltonian(point, n_max)


def ground_state(family: HamiltonianFamily, point, n_max: int | None = None) -> np.ndarray:
    return family.ground_state(point, n_max)


def spectrum(family: HamiltonianFamily, point, n_max: int | None = None) -> Spectrum:
    """Ascending eigenvalues of ``H(point)`` and the gap ``E1 - E0``."""
    h = hamiltonian_matrix(family, point, n_max)
    _check_hermitian(h)
    energies = np.linalg.eigvalsh(h)
    return Spectrum(energies, float(energies[1] - energies[0]))


def bloch_vector(psi: np.ndarray) -> np.ndarray:
    """Expectation values of the Pauli matrices for a qubit state."""
    psi = np.asarray(psi)
    return np.real([psi.conj() @ s @ psi for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])

"""Closed-form 2x2 algebra for a single qubit.

Operators are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype complex.
Evolution over a constant segment uses the half-generator convention

    U = exp(-i (a sigma_x + eta sigma_z) dt / 2),

so a field ``a`` applied for time ``dt`` rotates the Bloch vector by ``a * dt``.
Energies are in units of ``a_max`` and times in units of ``hbar / a_max``.
"""

import numpy as np

from .validation import check_operator

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

# below this rotation angle the first-order series replaces sin(theta)/omega
SMALL_ANGLE = 1e-8


def pauli(axis):
    """Return a copy of the Pauli matrix for ``axis`` in ``{'x', 'y', 'z'}``."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def propagator_step(a, eta, dt):
    """Propagator of one constant segment with control ``a`` and noise ``eta``.

    Parameters
    ----------
    a : float
        Control amplitude along x.
    eta : float
        Energy-splitting perturbation along z.
    dt : float
        Segment duration, ``dt >= 0``.

    Returns
    -------
    numpy.ndarray
        The SU(2) matrix ``exp(-i (a X + eta Z) dt / 2)``.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    omega = np.hypot(a, eta)
    generator = a * SIGMA_X + eta * SIGMA_Z
    if omega * dt < SMALL_ANGLE:
        return IDENTITY - 0.5j * dt * generator
    theta = 0.5 * omega * dt
    return np.cos(theta) * IDENTITY - 1j * (np.sin(theta) / omega) * generator


def conjugate(U, rho):
    """Return ``U rho U^dagger``."""
    U = check_operator(U, "U")
    rho = check_operator(rho, "rho")
    return U @ rho @ U.conj().T


def overlap(A, B):
    """Real part of the Hilbert-Schmidt product ``tr(A^dagger B)``."""
    A = check_operator(A, "A")
    B = check_operator(B, "B")
    return float(np.real(np.vdot(A, B)))


def bloch_to_density(v):
    """Density matrix ``(I + c . sigma) / 2`` for a Bloch vector ``c``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"Bloch vector must have 3 components, got shape {v.shape}")
    if np.linalg.norm(v) > 1 + 1e-9:
        raise ValueError(f"Bloch vector has norm {np.linalg.norm(v)} > 1")
    return 0.5 * (IDENTITY + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)


def density_to_bloch(rho):
    """Inverse of :func:`bloch_to_density`: ``c_i = tr(rho sigma_i)``."""
    rho = check_operator(rho, "rho")
    return np.array([np.real(np.trace(rho @ s)) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])


def ket_density(index):
    """Projector ``|index><index|`` onto a computational basis state."""
    rho = np.zeros((2, 2), dtype=complex)
    rho[index, index] = 1.0
    return rho


def not_gate_distance(U):
    """Distance ``1 - |tr(X^dagger U)| / 2`` of ``U`` from NOT up to global phase."""
    U = check_operator(U, "U")
    return float(1.0 - abs(np.trace(SIGMA_X.conj().T @ U)) / 2.0)

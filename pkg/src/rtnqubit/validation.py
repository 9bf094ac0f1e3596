"""Input validation helpers shared by the estimators and the free functions."""

import numbers

import numpy as np

ATOL = 1e-12


def check_operator(A, name="operator"):
    """Return ``A`` as a complex (2, 2) array or raise ``ValueError``."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def check_unitary(U, name="U", atol=1e-10):
    U = check_operator(U, name)
    if np.max(np.abs(U @ U.conj().T - np.eye(2))) > atol:
        raise ValueError(f"{name} is not unitary")
    return U


def check_density(rho, name="rho", atol=1e-10):
    """Check Hermiticity, unit trace and positivity of a one-qubit state."""
    rho = check_operator(rho, name)
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError(f"{name} does not have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_amplitudes(amplitudes, a_max, name="amplitudes"):
    """Return a float array of amplitudes, rejecting any with ``|a| > a_max``."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(amplitudes)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(np.abs(amplitudes) > a_max):
        worst = float(np.max(np.abs(amplitudes)))
        raise ValueError(f"{name} exceed the bound a_max={a_max} (max |a| = {worst})")
    return amplitudes

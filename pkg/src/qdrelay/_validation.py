"""Input validation helpers shared by the estimators and functional API."""

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""


class ConfigurationError(ValueError):
    """Raised for physically inconsistent optical configurations."""


RHO_TOL = 1e-10
NORM_TOL = 1e-12


def check_unit_interval(value, name):
    value = float(value)
    if not (0.0 <= value <= 1.0) or np.isnan(value):
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_positive(value, name, strict=True):
    value = float(value)
    ok = value > 0 if strict else value >= 0
    if not ok or np.isnan(value):
        bound = "> 0" if strict else ">= 0"
        raise ValidationError(f"{name} must be {bound}, got {value!r}")
    return value


def check_density_matrix(rho, tol=RHO_TOL):
    """Return ``rho`` as a complex 4x4 array after checking physicality."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError(f"density matrix must be 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValidationError(f"density matrix trace is {np.trace(rho).real:.3g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


def check_tags(t, name="tags"):
    """Return a 1-D int64 view of time tags, checking they are sorted."""
    t = np.ascontiguousarray(t, dtype=np.int64)
    if t.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if t.size > 1 and np.any(t[1:] < t[:-1]):
        raise ValidationError(f"{name} must be sorted by time")
    return t

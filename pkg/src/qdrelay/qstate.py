"""Two-qubit polarisation algebra.

Ordering convention for two-photon objects is (HH, HV, VH, VV) with the
biexciton (XX) photon in the first slot and the exciton (X) photon in the
second. Single-photon bases:

    D = (H + V)/sqrt2,  A = (H - V)/sqrt2,
    R = (H + iV)/sqrt2, L = (H - iV)/sqrt2

Outcome 0 of an analyzer basis is the first state listed in ``BASES``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import NORM_TOL, ValidationError, check_density_matrix, check_unit_interval
from .constants import phase_rate

_S = 1.0 / np.sqrt(2.0)

POL_VECTORS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}

BASES = {"HV": ("H", "V"), "DA": ("D", "A"), "RL": ("R", "L")}

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_YY = np.kron(SIGMA_Y, SIGMA_Y)


@dataclass(frozen=True)
class PolState:
    """Normalised single-photon polarisation state."""

    amplitude_h: complex
    amplitude_v: complex

    def __post_init__(self):
        norm = abs(self.amplitude_h) ** 2 + abs(self.amplitude_v) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"PolState not normalised (|psi|^2 = {norm!r})")

    @classmethod
    def from_label(cls, label):
        try:
            h, v = POL_VECTORS[label]
        except KeyError:
            raise ValidationError(f"unknown polarisation label {label!r}") from None
        return cls(complex(h), complex(v))

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(complex(vec[0]), complex(vec[1]))

    @property
    def vector(self):
        return np.array([self.amplitude_h, self.amplitude_v], dtype=complex)

    def projector(self):
        v = self.vector
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class TwoQubitState:
    """Pure two-photon state, amplitudes ordered (HH, HV, VH, VV)."""

    amplitudes: tuple

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (4,):
            raise ValidationError("TwoQubitState needs exactly four amplitudes")
        if abs(np.vdot(amps, amps).real - 1.0) > NORM_TOL:
            raise ValidationError("TwoQubitState not normalised")
        object.__setattr__(self, "amplitudes", tuple(complex(a) for a in amps))

    @property
    def vector(self):
        return np.array(self.amplitudes, dtype=complex)

    def density_matrix(self):
        v = self.vector
        return np.outer(v, v.conj())


def bell_state(name):
    """One of ``phi+``, ``phi-``, ``psi+``, ``psi-``."""
    table = {
        "phi+": (_S, 0, 0, _S),
        "phi-": (_S, 0, 0, -_S),
        "psi+": (0, _S, _S, 0),
        "psi-": (0, _S, -_S, 0),
    }
    try:
        return TwoQubitState(table[name.lower()])
    except KeyError:
        raise ValidationError(f"unknown Bell state {name!r}") from None


PHI_PLUS = bell_state("phi+")
MAXIMALLY_MIXED = np.eye(4, dtype=complex) / 4.0


def pair_state_at_delay(fss, tau):
    """Cascade pair state after the exciton has lived for ``tau`` ps.

    Parameters
    ----------
    fss : float
        Fine-structure splitting in ueV.
    tau : float
        Exciton dwell time (X emission minus XX emission) in ps.
    """
    if tau < 0 or fss < 0:
        raise ValidationError("fss and tau must be non-negative")
    phi = phase_rate(fss) * tau
    return TwoQubitState((_S, 0.0, 0.0, _S * np.exp(1j * phi)))


def fidelity(rho, target):
    """<target| rho |target>, clamped to [0, 1]."""
    rho = check_density_matrix(rho)
    vec = target.vector if isinstance(target, TwoQubitState) else np.asarray(target, dtype=complex)
    f = np.vdot(vec, rho @ vec).real
    return float(min(1.0, max(0.0, f)))


def concurrence(rho):
    """Wootters concurrence of a two-qubit density matrix."""
    rho = check_density_matrix(rho)
    # rho = W W^dag; the Wootters lambdas are the singular values of W^T YY W
    evals, evecs = np.linalg.eigh(rho)
    w = evecs * np.sqrt(np.clip(evals, 0.0, None))
    lam = np.linalg.svd(w.T @ _YY @ w, compute_uv=False)
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def apply_teleport_correction(state):
    """Channel of the Psi+ herald with an uncorrected analyzer: a bit flip."""
    return PolState.from_vector(SIGMA_X @ state.vector)


def projector_equal(a, b, atol=1e-9):
    """Compare two pure states up to global phase."""
    pa = a.projector() if hasattr(a, "projector") else np.outer(a, np.conj(a))
    pb = b.projector() if hasattr(b, "projector") else np.outer(b, np.conj(b))
    return bool(np.allclose(pa, pb, atol=atol))


def basis_vectors(basis):
    try:
        labels = BASES[basis]
    except (KeyError, TypeError):
        raise ValidationError(f"analyzer basis must be one of {sorted(BASES)}, got {basis!r}") from None
    return POL_VECTORS[labels[0]], POL_VECTORS[labels[1]]


def joint_outcome_probability(rho, basis_xx, basis_x, outcome):
    """Born probability of ``outcome = (k_xx, k_x)`` for the given analyzers."""
    rho = check_density_matrix(rho)
    vec = np.kron(basis_vectors(basis_xx)[outcome[0]], basis_vectors(basis_x)[outcome[1]])
    return float(min(1.0, max(0.0, np.vdot(vec, rho @ vec).real)))


def dephase_hv_coherence(rho, factor):
    """Scale the HH<->VV coherence by ``factor``."""
    factor = check_unit_interval(factor, "factor")
    out = check_density_matrix(rho).copy()
    out[0, 3] *= factor
    out[3, 0] *= factor
    return out


def reduced_xx(rho):
    """Reduced state of the first (XX) photon."""
    return np.trace(np.asarray(rho).reshape(2, 2, 2, 2), axis1=1, axis2=3)


def trace_distance(a, b):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())

"""Passive optics: time-bin transcoders, the HOM Bell-state measurement,
polarisation analyzers and single-photon detectors.

Each operation has a single-photon form (used for checking the algebra) and
array helpers that the pipeline applies to whole photon streams.
"""

from dataclasses import dataclass

import numba as nb
import numpy as np

from . import qstate as qs
from ._validation import (
    ConfigurationError, ValidationError, check_density_matrix, check_positive, check_unit_interval,
)
from .constants import rate_per_ps

FLAG_NON_OVERLAPPED = 1

CHANNEL_CHARLIE_H = 0
CHANNEL_CHARLIE_V = 1
CHANNEL_BOB_P = 2
CHANNEL_BOB_Q = 3
CHANNEL_AUX_A = 4
CHANNEL_AUX_B = 5
CHANNEL_AUX_C = 6

TAG_DTYPE = np.dtype([("t", np.int64), ("channel", np.uint8), ("flags", np.uint8)])

# decoder output slots relative to the early-bin time
SLOT_EARLY_SHORT, SLOT_RECOMBINED, SLOT_LATE_LONG = 0, 1, 2

TIMEBIN_LABELS = {
    "e": (1.0, 0.0),
    "l": (0.0, 1.0),
    "e+l": (np.sqrt(0.5), np.sqrt(0.5)),
    "e+il": (np.sqrt(0.5), 1j * np.sqrt(0.5)),
    "e-l": (np.sqrt(0.5), -np.sqrt(0.5)),
    "e-il": (np.sqrt(0.5), -1j * np.sqrt(0.5)),
}

AMZI_MODES = ("pol_to_timebin", "timebin_to_pol")
PHASE_MATCH_TOLERANCE = 1.0  # ps


@dataclass
class AMZIParams:
    delay: float = 5000.0  # ps
    phase: float = 0.0  # rad
    insertion_loss: float = 0.0
    mode: str = "pol_to_timebin"

    def __post_init__(self):
        check_positive(self.delay, "amzi.delay")
        if not 0.0 <= self.insertion_loss < 1.0:
            raise ValidationError("amzi.insertion_loss must be in [0, 1)")
        if self.mode not in AMZI_MODES:
            raise ValidationError(f"amzi.mode must be one of {AMZI_MODES}")


@dataclass
class DetectorParams:
    jitter_sigma: float = 30.0  # ps
    efficiency: float = 1.0
    dark_rate: float = 0.0  # counts/s
    dead_time: float = 0.0  # ps

    def __post_init__(self):
        check_positive(self.jitter_sigma, "detector.jitter_sigma", strict=False)
        check_unit_interval(self.efficiency, "detector.efficiency")
        check_positive(self.dark_rate, "detector.dark_rate", strict=False)
        check_positive(self.dead_time, "detector.dead_time", strict=False)


@dataclass
class BSMConfig:
    visibility: float = 1.0
    coincidence_window: float = 100.0  # ps, full width of the temporal-overlap gate

    def __post_init__(self):
        check_unit_interval(self.visibility, "bsm.visibility")
        check_positive(self.coincidence_window, "bsm.coincidence_window")


@dataclass
class Herald:
    t_h: float
    t_v: float
    genuine: bool


@dataclass
class PolPhoton:
    t: float
    state: qs.PolState
    flags: int = 0


@dataclass
class TimeBinPhoton:
    """Photon in an early/late superposition.

    ``t`` is the sampled detection time (early bin at ``t_early``), the
    amplitudes keep the coherent two-bin description.
    """

    t_early: float
    amplitude_early: complex
    amplitude_late: complex
    delay: float
    t: float
    flags: int = 0

    @property
    def bin(self):
        return "early" if self.t == self.t_early else "late"

    @property
    def amplitudes(self):
        return np.array([self.amplitude_early, self.amplitude_late], dtype=complex)


def _require_mode(amzi, mode):
    if amzi.mode != mode:
        raise ConfigurationError(f"AMZI in mode {amzi.mode!r}, expected {mode!r}")


def timebin_amplitudes(label):
    try:
        return np.array(TIMEBIN_LABELS[label], dtype=complex)
    except KeyError:
        raise ValidationError(f"unknown time-bin label {label!r}") from None


def encode_amplitudes(pol_vec, phase):
    """Polarisation amplitudes (H, V) -> time-bin amplitudes (early, late)."""
    pol_vec = np.asarray(pol_vec, dtype=complex)
    return np.stack([pol_vec[..., 1], np.exp(1j * phase) * pol_vec[..., 0]], axis=-1)


def decode_slots(tb_amplitudes, phase):
    """Slot probabilities and polarisation of a decoded time-bin photon.

    The early bin leaves the decoder V polarised through the long arm and
    the late bin H polarised through the short arm; both meet in the
    recombined slot. Returns ``(probs, pol)`` with ``probs`` of shape
    (..., 3) over (early-short, recombined, late-long) and ``pol`` the
    normalised (H, V) amplitudes in the recombined slot.
    """
    amps = np.asarray(tb_amplitudes, dtype=complex)
    c_e, c_l = amps[..., 0], amps[..., 1]
    probs = np.stack([np.abs(c_e) ** 2 / 2, np.full(c_e.shape, 0.5), np.abs(c_l) ** 2 / 2], axis=-1)
    pol = np.stack([c_l, np.exp(1j * phase) * c_e], axis=-1)
    return probs, pol / np.linalg.norm(pol, axis=-1, keepdims=True)


def transcode_pol_to_timebin(photon, amzi, seed):
    """V goes to the early bin at ``t``, H to the late bin at ``t + delay``."""
    _require_mode(amzi, "pol_to_timebin")
    rng = np.random.default_rng(seed)
    amps = encode_amplitudes(photon.state.vector, amzi.phase)
    late = rng.random() < abs(amps[1]) ** 2
    return TimeBinPhoton(
        t_early=photon.t, amplitude_early=complex(amps[0]), amplitude_late=complex(amps[1]),
        delay=amzi.delay, t=photon.t + (amzi.delay if late else 0.0), flags=photon.flags,
    )


def transcode_timebin_to_pol(photon, amzi, seed):
    """Map a time-bin photon back to polarisation.

    Returns a :class:`PolPhoton` in one of three slots: the recombined slot
    at ``t_early + delay`` carrying the decoded qubit, or one of the two
    satellites (``t_early`` as H, ``t_early + 2*delay`` as V) flagged as
    non-overlapped.
    """
    _require_mode(amzi, "timebin_to_pol")
    if abs(amzi.delay - photon.delay) > PHASE_MATCH_TOLERANCE:
        raise ConfigurationError(
            f"decoder delay {amzi.delay} ps does not match encoder delay {photon.delay} ps")
    rng = np.random.default_rng(seed)
    probs, pol = decode_slots(photon.amplitudes, amzi.phase)
    slot = rng.choice(3, p=probs / probs.sum())
    if slot == SLOT_RECOMBINED:
        return PolPhoton(photon.t_early + amzi.delay, qs.PolState.from_vector(pol), photon.flags)
    label, t = ("H", photon.t_early) if slot == SLOT_EARLY_SHORT else ("V", photon.t_early + 2 * amzi.delay)
    return PolPhoton(t, qs.PolState.from_label(label), photon.flags | FLAG_NON_OVERLAPPED)


def bsm_conditional(input_vec, pair_vec):
    """Unnormalised XX-photon amplitudes after projecting (input, X) onto Psi+.

    Works on stacks: ``input_vec`` (..., 2), ``pair_vec`` (..., 4). The
    squared norm of the result is the Psi+ projection probability.
    """
    input_vec = np.asarray(input_vec, dtype=complex)
    pair = np.asarray(pair_vec, dtype=complex)
    pair = pair.reshape(pair.shape[:-1] + (2, 2))
    weights = np.stack([input_vec[..., 1], input_vec[..., 0]], axis=-1) / np.sqrt(2.0)
    return np.einsum("...bx,...x->...b", pair, weights)


def bsm_density(input_vec, pair_rho):
    """Psi+ projection of (input, X) for a mixed pair: (probability, Bob rho)."""
    v = np.array([input_vec[1], input_vec[0]], dtype=complex) / np.sqrt(2.0)
    rho4 = np.asarray(pair_rho).reshape(2, 2, 2, 2)
    rho_b = np.einsum("x,bxcy,y->bc", v, rho4, v.conj())
    return float(np.trace(rho_b).real), rho_b


def classical_cross_density(input_vec, pair_rho):
    """Distinguishable photons: H.V cross-click probability and Bob's state."""
    rho4 = np.asarray(pair_rho).reshape(2, 2, 2, 2)
    p_h, p_v = abs(input_vec[0]) ** 2, abs(input_vec[1]) ** 2
    # laser H with X V, or laser V with X H
    rho_b = p_h * rho4[:, 1, :, 1] + p_v * rho4[:, 0, :, 0]
    return 0.5 * float(np.trace(rho_b).real), rho_b


def hom_bsm(input_photon, x_photon_t, pair_rho, cfg, seed):
    """Bell-state measurement of the laser photon and the X photon.

    ``input_photon`` is a :class:`PolPhoton`; ``x_photon_t`` the X arrival
    time. Probabilities are normalised per interfering event over both BS
    output ports, so a perfect Phi+ pair heralds with probability 1/4.
    Returns ``None`` or ``(Herald, bob_rho)``.
    """
    check_density_matrix(pair_rho)
    rng = np.random.default_rng(seed)
    vec = input_photon.state.vector
    genuine = rng.random() < cfg.visibility
    if genuine:
        p, rho_b = bsm_density(vec, pair_rho)
    else:
        p, rho_b = classical_cross_density(vec, pair_rho)
    if p <= 0 or rng.random() >= p:
        return None
    if genuine and rng.random() < 0.5:
        t_h, t_v = x_photon_t, input_photon.t
    elif genuine:
        t_h, t_v = input_photon.t, x_photon_t
    else:
        # the laser photon clicked H when the laser-H/X-V branch fired
        w_laser_h = abs(vec[0]) ** 2 * np.trace(np.asarray(pair_rho).reshape(2, 2, 2, 2)[:, 1, :, 1]).real
        laser_h = rng.random() < w_laser_h / (2 * p)
        t_h, t_v = (input_photon.t, x_photon_t) if laser_h else (x_photon_t, input_photon.t)
    return Herald(t_h, t_v, genuine), rho_b / np.trace(rho_b).real


def psi_plus_probability(joint_rho):
    """Weight of Psi+ in a (input, X) two-photon density matrix."""
    psi = qs.bell_state("psi+").vector
    return float(np.vdot(psi, check_density_matrix(joint_rho) @ psi).real)


def hom_bsm_batch(input_vecs, pair_vecs, visibility, u):
    """Vectorised BSM over stacks of pure inputs and pure pair states.

    ``u`` holds four uniforms per event. Returns ``(herald, genuine,
    bob_states, laser_clicked_h)`` where ``bob_states`` are normalised XX
    amplitudes (H, V). Normalisation matches :func:`hom_bsm`.
    """
    input_vecs = np.asarray(input_vecs, dtype=complex)
    pair = np.asarray(pair_vecs, dtype=complex).reshape(-1, 2, 2)
    u = np.atleast_2d(u)
    genuine = u[:, 0] < visibility

    b = bsm_conditional(input_vecs, pair.reshape(-1, 4))
    p_genuine = np.einsum("ni,ni->n", b.conj(), b).real

    laser_h = u[:, 2] < np.abs(input_vecs[:, 0]) ** 2
    p_x_h = (np.abs(pair[:, :, 0]) ** 2).sum(axis=1)
    x_h = u[:, 3] < p_x_h
    cross = laser_h != x_h
    collapsed = np.where(x_h[:, None], pair[:, :, 0], pair[:, :, 1])

    herald = np.where(genuine, u[:, 1] < p_genuine, cross & (u[:, 1] < 0.5))
    bob = np.where(genuine[:, None], b, collapsed)
    norm = np.linalg.norm(bob, axis=1, keepdims=True)
    bob = np.divide(bob, norm, out=np.zeros_like(bob), where=norm > 0)
    # for genuine heralds either photon may have produced the H click
    laser_clicked_h = np.where(genuine, u[:, 3] < 0.5, laser_h)
    return herald, genuine, bob, laser_clicked_h


def analyze_polarization(state, basis, seed):
    """Projective measurement of one photon; returns (outcome, post state).

    ``state`` is a :class:`PolState` or a 2x2 density matrix.
    """
    vecs = qs.basis_vectors(basis)
    rho = state.projector() if isinstance(state, qs.PolState) else np.asarray(state, dtype=complex)
    p0 = float(np.clip(np.vdot(vecs[0], rho @ vecs[0]).real, 0.0, 1.0))
    outcome = int(np.random.default_rng(seed).random() >= p0)
    return outcome, qs.PolState.from_vector(vecs[outcome])


def analyze_pair(rho, basis_xx, basis_x, seed):
    """Joint measurement of a linked XX/X pair with exact correlations."""
    probs = np.array([qs.joint_outcome_probability(rho, basis_xx, basis_x, (i, j))
                      for i in (0, 1) for j in (0, 1)])
    k = int(np.random.default_rng(seed).choice(4, p=probs / probs.sum()))
    return k // 2, k % 2


def projection_probability(states, vec):
    """|<vec|psi>|^2 / |psi|^2 for a stack of (unnormalised) pure states."""
    states = np.asarray(states, dtype=complex)
    norm = np.einsum("...i,...i->...", states.conj(), states).real
    amp = states @ np.conj(vec)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norm > 0, np.abs(amp) ** 2 / norm, 0.5)


@nb.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.ones(t.size, dtype=np.bool_)
    last = np.iinfo(np.int64).min // 2
    for i in range(t.size):
        if t[i] - last < dead:
            keep[i] = False
        else:
            last = t[i]
    return keep


def detect(t_true, det, channel, rng, flags=None, t_range=None):
    """Turn photon arrival times on one detector into time tags.

    Photons survive with the detector efficiency, get Gaussian jitter and
    are rounded to 1 ps; dark counts are a Poisson process over
    ``t_range``; clicks within the dead time of the previous accepted click
    are dropped. Returns a ``TAG_DTYPE`` array sorted by time.
    """
    t_true = np.asarray(t_true, dtype=float)
    flags = np.zeros(t_true.size, np.uint8) if flags is None else np.asarray(flags, np.uint8)
    alive = rng.random(t_true.size) < det.efficiency
    t = t_true[alive]
    if det.jitter_sigma > 0:
        t = t + rng.normal(0.0, det.jitter_sigma, t.size)
    t = np.rint(t).astype(np.int64)
    fl = flags[alive]
    if det.dark_rate > 0 and t_range is not None:
        lo, hi = t_range
        n_dark = rng.poisson(rate_per_ps(det.dark_rate) * (hi - lo))
        t = np.concatenate([t, np.rint(lo + rng.random(n_dark) * (hi - lo)).astype(np.int64)])
        fl = np.concatenate([fl, np.zeros(n_dark, np.uint8)])
    order = np.argsort(t, kind="stable")
    t, fl = t[order], fl[order]
    if det.dead_time > 0:
        keep = _dead_time_mask(t, int(round(det.dead_time)))
        t, fl = t[keep], fl[keep]
    out = np.empty(t.size, dtype=TAG_DTYPE)
    out["t"], out["channel"], out["flags"] = t, channel, fl
    return out


def merge_tags(*streams):
    """Merge tag arrays sorted by time, ties broken by channel id."""
    tags = np.concatenate(streams) if streams else np.zeros(0, TAG_DTYPE)
    return tags[np.lexsort((tags["channel"], tags["t"]))]

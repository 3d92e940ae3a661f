"""Monte Carlo emission: the biexciton cascade and the weak-coherent laser.

Event streams are numpy structured arrays; truth fields (``kind``,
``truth_tau``, ``t_exc``) travel with them for validation but analysis code
only ever sees detector time tags.
"""

import csv
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.special import ndtr, ndtri

from . import qstate as qs
from ._validation import ValidationError, check_positive, check_unit_interval
from .constants import phase_rate, rate_per_ps
from .rng import BLOCK_CYCLES, block_bounds, block_rng, map_blocks

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

CASCADE, REEXCITED, BACKGROUND_XX, BACKGROUND_X = 0, 1, 2, 3
KIND_NAMES = {CASCADE: "cascade", REEXCITED: "reexcited_cascade",
              BACKGROUND_XX: "background_xx", BACKGROUND_X: "background_x"}

EVENT_DTYPE = np.dtype([
    ("cycle_index", np.int64),
    ("t_exc", np.float64),
    ("t_xx", np.float64),
    ("t_x", np.float64),
    ("kind", np.int8),
    ("truth_tau", np.float64),
])

LASER_DTYPE = np.dtype([
    ("cycle_index", np.int64),
    ("t", np.float64),
    ("multiplicity", np.int32),
])

PULSE_SHAPES = ("gaussian", "square", "cw")


@dataclass
class ClockConfig:
    repetition_rate: float = 1.07  # GHz
    pulse_fwhm: float = 160.0  # ps
    n_cycles: int = 100_000
    epoch: float = 0.0  # ps, centre of the first pulse
    pulse_shape: str = "gaussian"

    def __post_init__(self):
        check_positive(self.repetition_rate, "clock.repetition_rate")
        check_positive(self.pulse_fwhm, "clock.pulse_fwhm")
        if self.pulse_fwhm >= self.period:
            raise ValidationError("clock.pulse_fwhm must be shorter than the clock period")
        if self.pulse_shape not in PULSE_SHAPES:
            raise ValidationError(f"clock.pulse_shape must be one of {PULSE_SHAPES}")
        if int(self.n_cycles) < 0:
            raise ValidationError("clock.n_cycles must be >= 0")

    @property
    def period(self):
        return 1000.0 / self.repetition_rate

    @property
    def duration(self):
        return self.n_cycles * self.period

    def pulse_centres(self, start, stop):
        return self.epoch + np.arange(start, stop) * self.period

    def sample_pulse_times(self, rng, centres):
        """Excitation times distributed over the pulse around each centre."""
        n = centres.size
        if self.pulse_shape == "gaussian":
            return centres + rng.normal(0.0, self.pulse_fwhm * FWHM_TO_SIGMA, n)
        if self.pulse_shape == "square":
            return centres + (rng.random(n) - 0.5) * self.pulse_fwhm
        return centres + (rng.random(n) - 0.5) * self.period

    def sample_after(self, rng, centres, t_after):
        """Pulse-distributed times truncated to ``> t_after``."""
        u = rng.random(centres.size)
        if self.pulse_shape == "gaussian":
            sigma = self.pulse_fwhm * FWHM_TO_SIGMA
            lo = ndtr((t_after - centres) / sigma)
            return centres + sigma * ndtri(lo + u * (1.0 - lo))
        half = (self.pulse_fwhm if self.pulse_shape == "square" else self.period) / 2
        lo = np.maximum(t_after, centres - half)
        return lo + u * np.maximum(centres + half - lo, 0.0)

    def in_envelope(self, t, centres):
        half = {"gaussian": self.pulse_fwhm, "square": self.pulse_fwhm / 2,
                "cw": self.period / 2}[self.pulse_shape]
        return np.abs(t - centres) <= half


@dataclass
class QDParams:
    lifetime_xx: float = 256.0  # ps
    lifetime_x: float = 1560.0  # ps
    fss: float = 6.2  # ueV
    p_excite: float = 0.9
    p_reexcite: float = 0.0
    shelving_prob: float = 0.0
    shelving_lifetime: float = 5000.0  # ps
    background_rate: float = 0.0  # counts/s per line
    hv_coherence_floor: float = 0.0
    purity: float = 1.0
    single_emitter: bool = True

    def __post_init__(self):
        check_positive(self.lifetime_xx, "qd.lifetime_xx")
        check_positive(self.lifetime_x, "qd.lifetime_x")
        check_positive(self.shelving_lifetime, "qd.shelving_lifetime")
        check_positive(self.fss, "qd.fss", strict=False)
        check_positive(self.background_rate, "qd.background_rate", strict=False)
        for name in ("p_excite", "p_reexcite", "shelving_prob", "hv_coherence_floor", "purity"):
            check_unit_interval(getattr(self, name), f"qd.{name}")
        if self.purity + self.hv_coherence_floor > 1.0 + 1e-12:
            raise ValidationError("qd.purity + qd.hv_coherence_floor must not exceed 1")


@nb.njit(cache=True, nogil=True)
def _blocking_scan(excited, t_exc, t_end, free_from):
    """Accept an excitation only if the dot has emptied; returns mask and carry."""
    n = excited.size
    keep = np.zeros(n, dtype=np.bool_)
    free = free_from
    for i in range(n):
        if excited[i] and t_exc[i] >= free:
            keep[i] = True
            free = t_end[i]
    return keep, free


def _draw_block(qd, clock, seed, block, start, stop):
    rng = block_rng(seed, "cascade", block)
    centres = clock.pulse_centres(start, stop)
    n = centres.size
    excited = rng.random(n) < qd.p_excite
    t_exc = clock.sample_pulse_times(rng, centres)
    shelved = rng.random(n) < qd.shelving_prob
    delay = np.where(shelved, rng.exponential(qd.shelving_lifetime, n), 0.0)
    t_xx = t_exc + delay + rng.exponential(qd.lifetime_xx, n)
    t_x = t_xx + rng.exponential(qd.lifetime_x, n)

    # at most one re-excitation, only while the pulse is still on
    re = (rng.random(n) < qd.p_reexcite) & clock.in_envelope(t_xx, centres)
    t_exc2 = clock.sample_after(rng, centres, t_xx)
    t_xx2 = t_exc2 + rng.exponential(qd.lifetime_xx, n)
    t_x2 = t_xx2 + rng.exponential(qd.lifetime_x, n)
    t_end = np.where(re, np.maximum(t_x, t_x2), t_x)
    return dict(cycle=np.arange(start, stop), excited=excited, t_exc=t_exc, t_xx=t_xx,
                t_x=t_x, re=re, t_exc2=t_exc2, t_xx2=t_xx2, t_x2=t_x2, t_end=t_end)


def _background_block(qd, clock, seed, block, start, stop):
    rate = rate_per_ps(qd.background_rate)
    t0 = clock.epoch + (start - 0.5) * clock.period
    span = (stop - start) * clock.period
    rng = block_rng(seed, "background", block)
    parts = []
    for kind in (BACKGROUND_XX, BACKGROUND_X):
        n = rng.poisson(rate * span) if rate > 0 else 0
        t = np.sort(t0 + rng.random(n) * span)
        ev = np.zeros(n, dtype=EVENT_DTYPE)
        ev["cycle_index"] = np.floor((t - clock.epoch) / clock.period + 0.5).astype(np.int64)
        ev["t_exc"] = np.nan
        ev["truth_tau"] = np.nan
        ev["kind"] = kind
        if kind == BACKGROUND_XX:
            ev["t_xx"], ev["t_x"] = t, np.nan
        else:
            ev["t_xx"], ev["t_x"] = np.nan, t
        parts.append(ev)
    return np.concatenate(parts)


CHUNK_BLOCKS = 64


def iter_cascades(qd, clock, seed, threads=1, chunk_blocks=CHUNK_BLOCKS):
    """Yield cascade events chunk by chunk (``chunk_blocks`` RNG blocks each).

    Random draws are pre-generated per fixed block of cycles (in parallel if
    ``threads > 1``); the only sequential step is the single-emitter blocking
    scan, which carries the time the dot becomes empty across blocks.
    Concatenating the chunks gives the same events for any chunk size.
    """
    bounds = list(block_bounds(clock.n_cycles))
    free = -np.inf
    for c0 in range(0, len(bounds), chunk_blocks):
        group = bounds[c0:c0 + chunk_blocks]
        drawn = map_blocks(lambda b: _draw_block(qd, clock, seed, *b), group, threads)
        background = map_blocks(lambda b: _background_block(qd, clock, seed, *b), group, threads)
        out = []
        for d, bg in zip(drawn, background):
            if qd.single_emitter:
                keep, free = _blocking_scan(d["excited"], d["t_exc"], d["t_end"], free)
            else:
                keep = d["excited"]
            first = np.zeros(int(keep.sum()), dtype=EVENT_DTYPE)
            first["cycle_index"] = d["cycle"][keep]
            first["t_exc"] = d["t_exc"][keep]
            first["t_xx"] = d["t_xx"][keep]
            first["t_x"] = d["t_x"][keep]
            first["kind"] = CASCADE
            first["truth_tau"] = first["t_x"] - first["t_xx"]

            re = keep & d["re"]
            second = np.zeros(int(re.sum()), dtype=EVENT_DTYPE)
            second["cycle_index"] = d["cycle"][re]
            second["t_exc"] = d["t_exc2"][re]
            second["t_xx"] = d["t_xx2"][re]
            second["t_x"] = d["t_x2"][re]
            second["kind"] = REEXCITED
            second["truth_tau"] = second["t_x"] - second["t_xx"]

            block = np.concatenate([first, second, bg])
            order = np.lexsort((block["kind"], _event_time(block), block["cycle_index"]))
            out.append(block[order])
        yield np.concatenate(out)


def simulate_cascades(qd, clock, seed, threads=1):
    """Simulate the cascade emission for ``clock.n_cycles`` pulses."""
    parts = list(iter_cascades(qd, clock, seed, threads))
    if not parts:
        return np.zeros(0, dtype=EVENT_DTYPE)
    return np.concatenate(parts)


def _event_time(ev):
    return np.where(np.isnan(ev["t_xx"]), ev["t_x"], ev["t_xx"])


def line_times(events, line):
    """Sorted emission times on the ``"xx"`` or ``"x"`` line."""
    t = events["t_xx" if line == "xx" else "t_x"]
    return np.sort(t[~np.isnan(t)])


def iter_laser(mean_photon, clock, seed, offset=0.0, threads=1, chunk_blocks=CHUNK_BLOCKS):
    """Weak coherent pulses, chunked like :func:`iter_cascades`.

    Poissonian photon number per clock cycle; one record per photon, each
    with its own time inside the pulse centred at ``offset``.
    """
    check_positive(mean_photon, "mean_photon")

    def one(b):
        block, start, stop = b
        rng = block_rng(seed, "laser", block)
        n = rng.poisson(mean_photon, stop - start)
        cycles = np.repeat(np.arange(start, stop), n)
        centres = clock.epoch + offset + cycles * clock.period
        rec = np.zeros(cycles.size, dtype=LASER_DTYPE)
        rec["cycle_index"] = cycles
        rec["t"] = clock.sample_pulse_times(rng, centres)
        rec["multiplicity"] = np.repeat(n, n)
        return rec

    bounds = list(block_bounds(clock.n_cycles))
    for c0 in range(0, len(bounds), chunk_blocks):
        yield np.concatenate(map_blocks(one, bounds[c0:c0 + chunk_blocks], threads))


def simulate_laser(state, mean_photon, clock, seed, offset=0.0, threads=1):
    """All laser photons of a run; ``state`` is returned alongside the records."""
    parts = list(iter_laser(mean_photon, clock, seed, offset, threads))
    rec = np.concatenate(parts) if parts else np.zeros(0, dtype=LASER_DTYPE)
    return rec, state


def pair_density(tau, qd, purity=None):
    """Ensemble two-photon state of a cascade with dwell time ``tau``."""
    purity = qd.purity if purity is None else check_unit_interval(purity, "purity")
    w_cl = qd.hv_coherence_floor
    if purity + w_cl > 1.0 + 1e-12:
        raise ValidationError("purity + hv_coherence_floor must not exceed 1")
    pure = qs.pair_state_at_delay(qd.fss, max(float(tau), 0.0)).density_matrix()
    classical = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    return purity * pure + (1.0 - purity - w_cl) * qs.MAXIMALLY_MIXED + w_cl * classical


def sample_pair_density(event, qd, purity=None):
    """Density matrix carried by one emission event."""
    if int(event["kind"]) not in (CASCADE, REEXCITED):
        raise ValidationError("only cascade events carry a photon pair")
    return pair_density(event["truth_tau"], qd, purity)


# Pair ensemble components. Non-entangled components are drawn as definite
# H/V product states so that every event stays a pure state downstream.
ENTANGLED, PRODUCT = 0, 1


def sample_pair_components(tau, qd, u):
    """Pick one pure component per pair from uniforms ``u`` of shape (n, 3).

    Returns ``(component, phase, pol_xx, pol_x)``; polarisation bits are
    0 = H, 1 = V and only meaningful for product components.
    """
    u = np.atleast_2d(u)
    entangled = u[:, 0] < qd.purity
    classical = ~entangled & (u[:, 0] < qd.purity + qd.hv_coherence_floor)
    pol_xx = (u[:, 1] >= 0.5).astype(np.int8)
    pol_x = np.where(classical, pol_xx, (u[:, 2] >= 0.5).astype(np.int8)).astype(np.int8)
    component = np.where(entangled, ENTANGLED, PRODUCT).astype(np.int8)
    phase = phase_rate(qd.fss) * np.nan_to_num(np.asarray(tau, dtype=float))
    return component, phase, pol_xx, pol_x


def write_events_csv(path, events):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle_index", "t_xx", "t_x", "kind", "truth_tau"])
        for ev in events:
            w.writerow([int(ev["cycle_index"]), repr(float(ev["t_xx"])), repr(float(ev["t_x"])),
                        KIND_NAMES[int(ev["kind"])], repr(float(ev["truth_tau"]))])


def read_events_csv(path):
    names = {v: k for k, v in KIND_NAMES.items()}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ev = np.zeros(len(rows), dtype=EVENT_DTYPE)
    for i, r in enumerate(rows):
        ev[i] = (int(r["cycle_index"]), np.nan, float(r["t_xx"]), float(r["t_x"]),
                 names[r["kind"]], float(r["truth_tau"]))
    return ev


__all__ = [
    "BLOCK_CYCLES", "ClockConfig", "QDParams", "simulate_cascades", "simulate_laser",
    "iter_cascades", "iter_laser",
    "sample_pair_density", "pair_density", "sample_pair_components", "line_times",
]

"""Time-tag correlation analysis.

All coincidence searches are linear two-pointer sweeps over sorted int64
tag arrays. Histograms carry enough metadata to be merged chunk by chunk.
"""

import csv
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator

from ._validation import ValidationError, check_positive, check_tags
from .source import FWHM_TO_SIGMA

HERALD_WINDOW = 500  # ps
ACCIDENTAL_SHIFT_PERIODS = 20
N_ACCIDENTAL_SHIFTS = 8


class AnalysisError(RuntimeError):
    """An analysis could not produce a defined result."""


# --------------------------------------------------------------------------
# containers


@dataclass
class Histogram1D:
    bin_width: int
    t_min: int
    counts: np.ndarray
    n_singles_a: int = 0
    n_singles_b: int = 0
    duration: float = 0.0

    @property
    def edges(self):
        return self.t_min + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def centers(self):
        return self.t_min + self.bin_width * (np.arange(self.counts.size) + 0.5)

    @property
    def normalization_defined(self):
        return self.n_singles_a > 0 and self.n_singles_b > 0 and self.duration > 0

    def normalized(self):
        """Counts divided by the Poissonian expectation rate_a * rate_b * bin * duration."""
        if not self.normalization_defined:
            return np.full(self.counts.shape, np.nan)
        expected = self.n_singles_a * self.n_singles_b * self.bin_width / self.duration
        return self.counts / expected

    def same_geometry(self, other):
        return (self.bin_width == other.bin_width and self.t_min == other.t_min
                and self.counts.shape == other.counts.shape)

    def merge(self, other):
        if not self.same_geometry(other):
            raise ValidationError("cannot merge histograms with different geometry")
        return Histogram1D(self.bin_width, self.t_min, self.counts + other.counts,
                           self.n_singles_a + other.n_singles_a,
                           self.n_singles_b + other.n_singles_b,
                           self.duration + other.duration)

    __add__ = merge

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.edges.tolist())
            w.writerow(self.counts.tolist())


@dataclass
class Grid2D:
    """2-D coincidence histogram; axis ``a`` is rows, axis ``b`` columns."""

    bin: int
    a_min: int
    b_min: int
    counts: np.ndarray
    clock_period: float = 0.0
    accidental_level: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def a_edges(self):
        return self.a_min + self.bin * np.arange(self.counts.shape[0] + 1)

    @property
    def b_edges(self):
        return self.b_min + self.bin * np.arange(self.counts.shape[1] + 1)

    @property
    def a_centers(self):
        return self.a_edges[:-1] + self.bin / 2

    @property
    def b_centers(self):
        return self.b_edges[:-1] + self.bin / 2

    def same_geometry(self, other):
        return (self.bin == other.bin and self.a_min == other.a_min and self.b_min == other.b_min
                and self.counts.shape == other.counts.shape)

    def merge(self, other):
        if not self.same_geometry(other):
            raise ValidationError("cannot merge grids with different geometry")
        return Grid2D(self.bin, self.a_min, self.b_min, self.counts + other.counts, self.clock_period)

    __add__ = merge

    def normalized(self):
        if not np.isfinite(self.accidental_level) or self.accidental_level <= 0:
            return np.full(self.counts.shape, np.nan)
        return self.counts / self.accidental_level

    def _window_cells(self, width, center):
        check_positive(width, "window width")
        ra = (self.a_centers >= center[0] - width / 2) & (self.a_centers < center[0] + width / 2)
        rb = (self.b_centers >= center[1] - width / 2) & (self.b_centers < center[1] + width / 2)
        return np.ix_(ra, rb)

    def window_sum(self, width, center=(0.0, 0.0)):
        """Counts in the square window whose bin centres fall in [c - w/2, c + w/2)."""
        return int(self.counts[self._window_cells(width, center)].sum())

    def accidental_window_sum(self, width, center=(0.0, 0.0)):
        """Expected accidental counts in the same window, from the shifted-clock grid."""
        acc = self.extra.get("accidental_grid")
        if acc is None:
            return float("nan")
        return float(acc[self._window_cells(width, center)].sum())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.b_edges.tolist())
            for edge, row in zip(self.a_edges[:-1], self.counts):
                w.writerow([int(edge)] + row.tolist())


@dataclass(frozen=True)
class Window:
    center: float = 0.0
    width: float = 228.0

    def __post_init__(self):
        check_positive(self.width, "window width")

    def contains(self, t):
        t = np.asarray(t)
        return (t >= self.center - self.width / 2) & (t < self.center + self.width / 2)


# --------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, nogil=True)
def _g2_kernel(a, b, lo, bin_width, n_bins, counts):
    j0 = 0
    nb_ = b.size
    hi = lo + bin_width * n_bins
    for i in range(a.size):
        ta = a[i]
        while j0 < nb_ and b[j0] - ta < lo:
            j0 += 1
        j = j0
        while j < nb_:
            d = b[j] - ta
            if d >= hi:
                break
            counts[(d - lo) // bin_width] += 1
            j += 1


@nb.njit(cache=True, nogil=True)
def _block_kernel(a, blk_a, ph_a, b, blk_b, ph_b, k_side, bin_width, n_phase, grid, per_block):
    j0 = 0
    for i in range(a.size):
        ba = blk_a[i]
        while j0 < b.size and blk_b[j0] < ba - k_side:
            j0 += 1
        j = j0
        while j < b.size and blk_b[j] <= ba + k_side:
            delta = blk_b[j] - ba
            per_block[delta + k_side] += 1
            row = ph_a[i] // bin_width
            col = (delta + k_side) * n_phase + ph_b[j] // bin_width
            grid[row, col] += 1
            j += 1


@nb.njit(cache=True, nogil=True)
def _herald_kernel(h, v, window):
    """All (i, j) with |h_i - v_j| <= window."""
    out_i = []
    out_j = []
    j0 = 0
    for i in range(h.size):
        while j0 < v.size and v[j0] < h[i] - window:
            j0 += 1
        j = j0
        while j < v.size and v[j] <= h[i] + window:
            out_i.append(i)
            out_j.append(j)
            j += 1
    return np.array(out_i, dtype=np.int64), np.array(out_j, dtype=np.int64)


@nb.njit(cache=True, nogil=True)
def _triple_kernel(mid2, charlie, bob, shift, a_min, b_min, bin_width, grid):
    """Histogram (t_charlie, t_bob) with t_bob = bob - mid - shift; ``mid2`` is 2*mid."""
    n_a, n_b = grid.shape
    b_hi = b_min + bin_width * n_b
    order_j = 0
    for i in range(mid2.size):
        row = (charlie[i] - a_min) // bin_width
        if row < 0 or row >= n_a:
            continue
        # work in doubled units to keep (t_h + t_v)/2 exact
        lo2 = mid2[i] + 2 * (shift + b_min)
        while order_j < bob.size and 2 * bob[order_j] < lo2:
            order_j += 1
        j = order_j
        while j < bob.size:
            d2 = 2 * bob[j] - mid2[i] - 2 * shift
            if d2 >= 2 * b_hi:
                break
            grid[row, (d2 - 2 * b_min) // (2 * bin_width)] += 1
            j += 1


# --------------------------------------------------------------------------
# g2


def _as_tags(t, name):
    t = np.asarray(t)
    if t.dtype != np.int64:
        if t.size and not np.all(np.mod(t, 1) == 0):
            raise ValidationError(f"{name}: tags must be integer picoseconds")
        t = t.astype(np.int64)
    return check_tags(np.ascontiguousarray(t), name)


def _duration(a, b, duration):
    if duration is not None:
        return float(duration)
    both = [x for x in (a, b) if x.size]
    if not both:
        return 0.0
    return float(max(x[-1] for x in both) - min(x[0] for x in both))


def g2_histogram(a, b, bin_width, t_range, duration=None):
    """Histogram of delays ``b - a`` in [-t_range, t_range) with half-open bins."""
    a, b = _as_tags(a, "a"), _as_tags(b, "b")
    bin_width, t_range = int(bin_width), int(t_range)
    check_positive(bin_width, "bin_width")
    n_bins = int(np.ceil(2 * t_range / bin_width))
    counts = np.zeros(n_bins, dtype=np.int64)
    if a.size and b.size:
        _g2_kernel(a, b, -t_range, bin_width, n_bins, counts)
    return Histogram1D(bin_width, -t_range, counts, int(a.size), int(b.size), _duration(a, b, duration))


def count_in_window(a, b, lo, hi):
    """Number of pairs with ``lo <= b - a < hi``."""
    a, b = _as_tags(a, "a"), _as_tags(b, "b")
    if not (a.size and b.size) or hi <= lo:
        return 0
    lo, hi = int(np.ceil(lo)), int(np.ceil(hi))
    return int((np.searchsorted(b, a + hi, "left") - np.searchsorted(b, a + lo, "left")).sum())


def chunk_bounds(a, n_chunks):
    """Split stream ``a`` into ``n_chunks`` contiguous index ranges."""
    edges = np.linspace(0, a.size, n_chunks + 1).astype(np.int64)
    return list(zip(edges[:-1], edges[1:]))


def g2_histogram_chunked(a, b, bin_width, t_range, n_chunks=1, duration=None):
    """Chunked g2: each chunk owns a slice of ``a`` and sees ``b`` padded by the range.

    Every ``a`` tag belongs to exactly one chunk, so merged counts equal the
    single-pass result bit for bit.
    """
    a, b = _as_tags(a, "a"), _as_tags(b, "b")
    est = G2Histogrammer(bin_width=bin_width, t_range=t_range)
    for lo, hi in chunk_bounds(a, n_chunks):
        part = a[lo:hi]
        if part.size:
            j0 = np.searchsorted(b, part[0] - t_range, "left")
            j1 = np.searchsorted(b, part[-1] + t_range, "right")
            bpart = b[j0:j1]
        else:
            bpart = b[:0]
        est.partial_fit(part, bpart, singles_b=0)
    hist = est.histogram_
    hist.n_singles_b = int(b.size)
    hist.duration = _duration(a, b, duration)
    return hist


class G2Histogrammer(BaseEstimator):
    """Accumulating g2 histogrammer.

    ``partial_fit`` adds the pairs whose ``a`` tag is in the given chunk;
    the ``b`` chunk must cover the ``a`` span padded by ``t_range``.
    """

    def __init__(self, bin_width=40, t_range=50_000):
        self.bin_width = bin_width
        self.t_range = t_range

    def fit(self, a, b, duration=None):
        self.histogram_ = g2_histogram(a, b, self.bin_width, self.t_range, duration)
        return self

    def partial_fit(self, a, b, singles_b=None, duration=0.0):
        part = g2_histogram(a, b, self.bin_width, self.t_range, duration=duration)
        if singles_b is not None:
            part.n_singles_b = singles_b
        if not hasattr(self, "histogram_"):
            self.histogram_ = part
        else:
            self.histogram_ = self.histogram_.merge(part)
        return self

    def transform(self, a=None, b=None):
        return self.histogram_.normalized()


def windowed_g2_zero(hist, period, width):
    """Ratio of coincidences in a window at zero delay to side peaks at +-k periods."""
    centers = hist.centers
    zero = hist.counts[np.abs(centers) < width / 2].sum()
    sides = []
    k = 1
    while (k + 0.5) * period < -hist.t_min:
        for s in (-1, 1):
            sides.append(hist.counts[np.abs(centers - s * k * period) < width / 2].sum())
        k += 1
    if not sides or np.mean(sides) == 0:
        raise AnalysisError("no side peaks to normalise the zero-delay window")
    return float(zero / np.mean(sides))


# --------------------------------------------------------------------------
# clocked grid


def detect_period(t, bin_width=64, max_samples=1 << 22):
    """Dominant repetition period of a tag stream from its binned spectrum.

    Returns ``nan`` when no spectral line stands out.
    """
    t = np.asarray(t)
    if t.size < 100:
        return float("nan")
    span = t[-1] - t[0]
    n = int(min(max_samples, span // bin_width + 1))
    idx = ((t - t[0]) // bin_width).astype(np.int64)
    series = np.bincount(idx[idx < n], minlength=n)
    power = np.abs(np.fft.rfft(series - series.mean())) ** 2
    power[:2] = 0
    k = int(np.argmax(power))
    # noise power is exponential: its maximum over m lines is ~ mean * ln(m)
    noise_mean = np.median(power[2:]) / np.log(2.0)
    if power[k] < noise_mean * (np.log(power.size) + 12.0):
        return float("nan")
    # refine with the neighbouring bins (parabolic)
    if 0 < k < power.size - 1:
        y0, y1, y2 = np.log(power[k - 1] + 1), np.log(power[k] + 1), np.log(power[k + 1] + 1)
        den = y0 - 2 * y1 + y2
        k = k + (0.5 * (y0 - y2) / den if den != 0 else 0.0)
    freq = k / (n * bin_width)
    return float(1.0 / freq)


def _block_phase(t, clock, offset):
    rel = t.astype(np.float64) - clock.epoch - offset
    blk = np.floor(rel / clock.period).astype(np.int64)
    phase = rel - blk * clock.period
    return blk, phase


def clocked_g2_grid(a, b, clock, bin_width=40, clock_offset=None, k_side=5):
    """Clock-referenced two-time coincidence grid and the block g2.

    Tags are assigned to clock blocks of one period; by default each block
    is centred on its excitation pulse (``clock_offset = -period/2``).
    Rows are the phase of ``a`` inside its block, columns the phase of
    ``b`` across blocks ``-k_side .. k_side`` relative to ``a``.
    ``g2_block(0)`` is the zero-block pair count over the mean of the
    non-zero blocks.
    """
    a, b = _as_tags(a, "a"), _as_tags(b, "b")
    offset = -clock.period / 2 if clock_offset is None else float(clock_offset)
    n_phase = int(np.ceil(clock.period / bin_width))
    grid = np.zeros((n_phase, (2 * k_side + 1) * n_phase), dtype=np.int64)
    per_block = np.zeros(2 * k_side + 1, dtype=np.int64)
    blk_a, ph_a = _block_phase(a, clock, offset)
    blk_b, ph_b = _block_phase(b, clock, offset)
    if a.size and b.size:
        _block_kernel(a, blk_a, np.floor(ph_a).astype(np.int64), b, blk_b,
                      np.floor(ph_b).astype(np.int64), k_side, int(bin_width), n_phase, grid, per_block)
    out = Grid2D(int(bin_width), 0, -k_side * n_phase * int(bin_width), grid, clock.period)
    side = np.delete(per_block, k_side)
    out.extra["per_block"] = per_block
    if side.sum():
        out.accidental_level = float(side.mean() / n_phase ** 2)
    if side.mean() > 0:
        g2 = per_block[k_side] / side.mean()
        sigma = g2 * np.sqrt(1 / max(per_block[k_side], 1) + 1 / side.sum())
    else:
        g2, sigma = float("nan"), float("nan")
    period_found = detect_period(np.sort(np.concatenate([a, b]))) if a.size + b.size else float("nan")
    mismatch = bool(np.isfinite(period_found) and abs(period_found / clock.period - 1) > 0.05)
    out.extra.update(g2_block_zero=float(g2), g2_block_sigma=float(sigma),
                     detected_period=period_found, period_warning=mismatch)
    return out


# --------------------------------------------------------------------------
# triple coincidences


def find_heralds(h, v, window=HERALD_WINDOW):
    """Pairs of Charlie-H / Charlie-V clicks within ``window``.

    Returns ``(mid2, t_charlie)`` as int64 where ``mid2 = t_h + t_v``
    (twice the herald midpoint) sorted ascending.
    """
    h, v = _as_tags(h, "herald_h"), _as_tags(v, "herald_v")
    if not (h.size and v.size):
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    i, j = _herald_kernel(h, v, int(window))
    mid2 = h[i] + v[j]
    charlie = h[i] - v[j]
    order = np.argsort(mid2, kind="stable")
    return mid2[order], charlie[order]


def g3_grid(herald_h, herald_v, bob, bin_width=4, herald_window=HERALD_WINDOW,
            bob_range=(-1000, 1000), bob_offset=0, clock_period=None,
            accidental_shift=ACCIDENTAL_SHIFT_PERIODS, n_shifts=N_ACCIDENTAL_SHIFTS):
    """Triple-coincidence grid over (t_charlie, t_bob).

    ``t_charlie = t_h - t_v`` and ``t_bob = t_bob_click - (t_h + t_v)/2 -
    bob_offset``. The accidental level is the mean cell count when Bob's
    stream is displaced by ``accidental_shift`` (and following) clock
    periods, which destroys every genuine correlation.
    """
    bob = _as_tags(bob, "bob")
    mid2, charlie = find_heralds(herald_h, herald_v, herald_window)
    bin_width = int(bin_width)
    n_a = int(np.ceil(2 * herald_window / bin_width))
    a_min = -n_a * bin_width // 2
    n_b = int(np.ceil((bob_range[1] - bob_range[0]) / bin_width))
    b_min = int(bob_range[0])
    grid = np.zeros((n_a, n_b), dtype=np.int64)
    out = Grid2D(bin_width, a_min, b_min, grid, float(clock_period or 0.0))
    out.extra["n_heralds"] = int(mid2.size)
    if not (mid2.size and bob.size):
        return out
    _triple_kernel(mid2, charlie, bob, int(bob_offset), a_min, b_min, bin_width, grid)
    if clock_period:
        acc = np.zeros_like(grid)
        for k in range(n_shifts):
            shift = int(round((accidental_shift + k) * clock_period)) + int(bob_offset)
            _triple_kernel(mid2, charlie, bob, shift, a_min, b_min, bin_width, acc)
        out.accidental_level = float(acc.sum() / (n_shifts * acc.size))
        out.extra["accidental_grid"] = acc / n_shifts
    return out


def teleport_fidelity(pass_grid, fail_grid, window):
    """``pass / (pass + fail)`` in the square window at (0, 0), binomial sigma."""
    if not pass_grid.same_geometry(fail_grid):
        raise ValidationError("pass and fail grids must share geometry")
    width = window.width if isinstance(window, Window) else float(window)
    center = (window.center, window.center) if isinstance(window, Window) else (0.0, 0.0)
    n_pass = pass_grid.window_sum(width, center)
    n_fail = fail_grid.window_sum(width, center)
    total = n_pass + n_fail
    if total == 0:
        raise AnalysisError(f"no counts inside the {width} ps window")
    f = n_pass / total
    sigma = np.sqrt(f * (1 - f) / total)
    return float(f), float(sigma)


def window_sweep(pass_grid, fail_grid, widths):
    """Fidelity per window width, rows ordered by width.

    Rows whose window holds no counts get ``nan`` fidelity.
    """
    rows = []
    for w in sorted(widths):
        check_positive(w, "window width")
        try:
            f, s = teleport_fidelity(pass_grid, fail_grid, Window(0.0, w))
        except AnalysisError:
            f, s = float("nan"), float("nan")
        rows.append((float(w), f, s))
    return rows


# --------------------------------------------------------------------------
# clock-phase intensity and lifetimes


def intensity_vs_clock_phase(tags, clock, bin_width=16, clock_offset=0.0):
    """Fold tags modulo the clock period; phase 0 is the pulse centre."""
    t = _as_tags(tags, "tags")
    rel = t.astype(np.float64) - clock.epoch - clock_offset
    phase = np.mod(rel, clock.period)
    n_bins = int(np.ceil(clock.period / bin_width))
    counts = np.bincount(np.minimum((phase // bin_width).astype(np.int64), n_bins - 1),
                         minlength=n_bins).astype(np.int64)
    return Histogram1D(int(bin_width), 0, counts, int(t.size), 0, float(clock.duration))


def clock_phase_gate(tags, clock, center, width):
    """Boolean mask of tags whose clock phase lies within ``width/2`` of ``center``."""
    t = _as_tags(tags, "tags")
    rel = np.mod(t.astype(np.float64) - clock.epoch - center + clock.period / 2, clock.period)
    return np.abs(rel - clock.period / 2) <= width / 2


def on_off_contrast(hist):
    """Max-bin over min-bin contrast ``(max - min) / max`` of a folded histogram."""
    c = hist.counts.astype(float)
    if c.max() <= 0:
        return float("nan")
    return float((c.max() - c.min()) / c.max())


@dataclass
class LifetimeFit:
    tau: float
    stderr: float
    wrapped: bool
    n_bins: int
    first_bin: int


def _folded_component(t, tau, period, sigma):
    # exponential decay convolved with a Gaussian pulse (valid well after the
    # pulse), summed over all earlier periods when a period is given
    scale = np.exp(0.5 * (sigma / tau) ** 2) * np.exp(-t / tau)
    if period is None:
        return scale
    return scale / -np.expm1(-period / tau)


def lifetime_estimate(hist, period=None, pulse_fwhm=0.0, rise_time=None, min_tags=1000,
                      floor_fraction=0.05, min_bins=5):
    """Exponential lifetime from the decaying tail of a folded histogram.

    Only full bins are used. The tail starts two bins after the peak and no
    earlier than one pulse FWHM after phase zero, and ends at the first bin
    below ``floor_fraction`` of the peak. With a period it also ends one
    pulse FWHM before the period wraps, where the next pulse starts to
    contribute; reaching that limit marks the fit as ``wrapped`` and the
    folded model ``exp(-t/tau) / (1 - exp(-T/tau))`` is used. ``rise_time``
    adds a fixed feeding stage (a cascade-fed line), making the model the
    difference of two folded exponentials. Weighted least squares on log
    counts with weights equal to the counts.
    """
    counts = hist.counts.astype(float)
    if counts.sum() < min_tags:
        raise AnalysisError(f"lifetime estimate needs at least {min_tags} tags")
    bw = float(hist.bin_width)
    right = hist.t_min + bw * np.arange(1, counts.size + 1)
    n_full = counts.size if period is None else int(np.sum(right <= period + 1e-9))
    counts = counts[:n_full]
    centers = hist.t_min + bw * (np.arange(n_full) + 0.5)
    peak = int(np.argmax(counts))
    floor = floor_fraction * counts[peak]
    first = max(peak + 2, int(np.searchsorted(centers - bw / 2, pulse_fwhm)))
    limit = n_full if period is None else int(np.sum(right[:n_full] <= period - pulse_fwhm + 1e-9))
    below = np.nonzero(counts[first:limit] < floor)[0]
    stop = first + int(below[0]) if below.size else limit
    wrapped = bool(period is not None and not below.size)
    if stop - first < min_bins:
        raise AnalysisError("decaying tail shorter than the minimum number of bins")
    t, y = centers[first:stop], counts[first:stop]
    if np.any(y <= 0):
        raise AnalysisError("empty bins inside the decaying tail")
    slope = np.polyfit(t, np.log(y), 1, w=np.sqrt(y))[0]
    if slope >= 0:
        raise AnalysisError("tail is not decaying")
    folded = period if wrapped else None
    sigma = pulse_fwhm * FWHM_TO_SIGMA

    def log_model(t, log_amp, tau):
        shape = _folded_component(t, tau, folded, sigma)
        if rise_time:
            shape = (shape - _folded_component(t, rise_time, folded, sigma)) / (tau - rise_time)
        return log_amp + np.log(np.maximum(shape, 1e-300))

    tau0 = -1.0 / slope
    if rise_time and abs(tau0 - rise_time) < 0.05 * rise_time:
        tau0 = 2.0 * rise_time
    amp0 = np.log(y[0]) - log_model(t[:1], 0.0, tau0)[0]
    try:
        popt, pcov = optimize.curve_fit(log_model, t, np.log(y), p0=(amp0, tau0),
                                        sigma=1.0 / np.sqrt(y), absolute_sigma=False,
                                        bounds=([-np.inf, bw / 10], [np.inf, np.inf]))
    except RuntimeError as exc:
        raise AnalysisError(f"lifetime fit did not converge: {exc}") from None
    tau = float(popt[1])
    if rise_time and abs(tau - rise_time) < 1e-6 * rise_time:
        raise AnalysisError("lifetime fit collapsed onto the rise time")
    return LifetimeFit(tau, float(np.sqrt(pcov[1, 1])), wrapped, int(stop - first), int(first))


class LifetimeEstimator(BaseEstimator):
    """Fold tags on the clock and fit the exponential tail."""

    def __init__(self, bin_width=16, floor_fraction=0.05, min_bins=5, rise_time=None):
        self.bin_width = bin_width
        self.floor_fraction = floor_fraction
        self.min_bins = min_bins
        self.rise_time = rise_time

    def fit(self, tags, clock):
        self.histogram_ = intensity_vs_clock_phase(tags, clock, self.bin_width)
        fit = lifetime_estimate(self.histogram_, period=clock.period, pulse_fwhm=clock.pulse_fwhm,
                                rise_time=self.rise_time, floor_fraction=self.floor_fraction,
                                min_bins=self.min_bins)
        self.lifetime_, self.stderr_, self.wrapped_ = fit.tau, fit.stderr, fit.wrapped
        return self

    def predict(self, phase):
        """Model intensity shape (unit amplitude) at the given clock phases."""
        phase = np.asarray(phase, dtype=float)
        return np.exp(-phase / self.lifetime_)

"""Two-photon polarisation tomography from coincidence counts.

Nine analyzer settings (XX basis x X basis over HV, DA, RL) with four
outcomes each give 36 projectors. Counts are stored as an array indexed
``[basis_xx, basis_x, outcome_xx, outcome_x]`` in ``BASIS_ORDER``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import qstate as qs
from ._validation import ValidationError, check_positive
from .correlator import Window, count_in_window

BASIS_ORDER = ("HV", "DA", "RL")
SETTINGS = tuple((bxx, bx) for bxx in BASIS_ORDER for bx in BASIS_ORDER)
MIN_WINDOW_COUNTS = 100
DILUTION = 0.5
LIKELIHOOD_TOL = 1e-10
MAX_ITERATIONS = 10_000

_PAULI = {"HV": qs.SIGMA_Z, "DA": qs.SIGMA_X, "RL": qs.SIGMA_Y}
_IDENTITY2 = np.eye(2, dtype=complex)


def _projector_stack():
    out = np.empty((3, 3, 2, 2, 4, 4), dtype=complex)
    for i, bxx in enumerate(BASIS_ORDER):
        for j, bx in enumerate(BASIS_ORDER):
            for oxx, vxx in enumerate(qs.basis_vectors(bxx)):
                for ox, vx in enumerate(qs.basis_vectors(bx)):
                    v = np.kron(vxx, vx)
                    out[i, j, oxx, ox] = np.outer(v, v.conj())
    return out


PROJECTORS = _projector_stack()
_FLAT_PROJECTORS = PROJECTORS.reshape(36, 4, 4)
# eigenvalue (+1/-1) of each basis Pauli operator for outcomes 0 and 1
_OUTCOME_SIGN = {b: np.array([np.vdot(v, _PAULI[b] @ v).real for v in qs.basis_vectors(b)])
                 for b in BASIS_ORDER}

# magic basis: maximally entangled states are exactly the real unit vectors
_MAGIC = np.column_stack([
    qs.bell_state("phi+").vector,
    1j * qs.bell_state("phi-").vector,
    1j * qs.bell_state("psi+").vector,
    qs.bell_state("psi-").vector,
])


@dataclass
class TomoCounts:
    """Coincidence counts for the 36 projectors."""

    counts: np.ndarray
    window: Window = field(default_factory=Window)
    duration: float = 0.0
    singles: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (3, 3, 2, 2):
            raise ValidationError("TomoCounts needs all 36 entries (shape (3, 3, 2, 2))")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValidationError("TomoCounts entries must be finite and non-negative")
        self.counts = c

    @classmethod
    def from_dict(cls, table, **kwargs):
        """Build from ``{(basis_xx, basis_x, outcome_xx, outcome_x): count}`` with state labels."""
        c = np.zeros((3, 3, 2, 2), dtype=np.int64)
        seen = set()
        for (bxx, bx, oxx, ox), n in table.items():
            i, j = BASIS_ORDER.index(bxx), BASIS_ORDER.index(bx)
            k, m = qs.BASES[bxx].index(oxx), qs.BASES[bx].index(ox)
            c[i, j, k, m] = n
            seen.add((i, j, k, m))
        if len(seen) != 36:
            raise ValidationError(f"TomoCounts needs 36 entries, got {len(seen)}")
        return cls(c, **kwargs)

    def as_dict(self):
        out = {}
        for (i, j, k, m), n in np.ndenumerate(self.counts):
            bxx, bx = BASIS_ORDER[i], BASIS_ORDER[j]
            out[(bxx, bx, qs.BASES[bxx][k], qs.BASES[bx][m])] = n.item()
        return out

    @property
    def total(self):
        return float(self.counts.sum())

    def setting_totals(self):
        return self.counts.sum(axis=(2, 3))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["setting", "outcome", "count"])
            for (bxx, bx, oxx, ox), n in self.as_dict().items():
                w.writerow([f"{bxx}-{bx}", f"{oxx}-{ox}", n])

    @classmethod
    def from_csv(cls, path, **kwargs):
        table = {}
        with open(path, newline="") as fh:
            rows = csv.DictReader(fh)
            for row in rows:
                try:
                    bxx, bx = row["setting"].split("-")
                    oxx, ox = row["outcome"].split("-")
                    n = float(row["count"])
                except (KeyError, ValueError, AttributeError):
                    raise ValidationError(f"malformed tomography row {row!r}") from None
                table[(bxx, bx, oxx, ox)] = int(n) if n.is_integer() else n
        try:
            return cls.from_dict(table, **kwargs)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


def expected_counts(rho, n_per_setting):
    """Exact expectation values ``N * p`` for every projector (not rounded)."""
    rho = qs.check_density_matrix(rho)
    p = projector_probabilities(rho)
    return TomoCounts(np.clip(n_per_setting * p, 0.0, None))


def projector_probabilities(rho):
    """Born probabilities of the 36 projectors, shape (3, 3, 2, 2)."""
    p = np.einsum("kij,ji->k", _FLAT_PROJECTORS, rho).real
    return p.reshape(3, 3, 2, 2)


def assemble_counts(xx_tags, x_tags, window):
    """Windowed XX-X coincidences per setting and outcome.

    ``xx_tags[(basis_xx, basis_x)]`` and ``x_tags[...]`` are pairs of sorted
    tag arrays, one per analyzer outcome. A coincidence counts when the
    delay ``t_x - t_xx`` lies in ``[center - width/2, center + width/2)``.
    """
    lo, hi = window.center - window.width / 2, window.center + window.width / 2
    c = np.zeros((3, 3, 2, 2), dtype=np.int64)
    for i, j in np.ndindex(3, 3):
        key = (BASIS_ORDER[i], BASIS_ORDER[j])
        if key not in xx_tags or key not in x_tags:
            raise ValidationError(f"missing analyzer setting {key}")
        for k in range(2):
            for m in range(2):
                c[i, j, k, m] = count_in_window(xx_tags[key][k], x_tags[key][m], lo, hi)
    return TomoCounts(c, window)


def _setting_frequencies(counts):
    c = np.asarray(counts.counts, dtype=float)
    totals = c.sum(axis=(2, 3))
    if np.any(totals <= 0):
        raise ValidationError("every analyzer setting needs counts for a reconstruction")
    return c / totals[:, :, None, None]


def linear_reconstruct(counts):
    """Linear inversion through the two-photon Pauli correlators.

    Hermitian with unit trace by construction; may have negative eigenvalues.
    """
    f = _setting_frequencies(counts)
    paulis = [_IDENTITY2] + [_PAULI[b] for b in BASIS_ORDER]
    stokes = np.zeros((4, 4))
    stokes[0, 0] = 1.0
    for i, bxx in enumerate(BASIS_ORDER):
        sxx = _OUTCOME_SIGN[bxx]
        for j, bx in enumerate(BASIS_ORDER):
            sx = _OUTCOME_SIGN[bx]
            stokes[i + 1, j + 1] = sxx @ f[i, j] @ sx
        # single-photon terms averaged over the partner's three settings
        stokes[i + 1, 0] = np.mean([sxx @ f[i, j].sum(axis=1) for j in range(3)])
        stokes[0, i + 1] = np.mean([f[j, i].sum(axis=0) @ sxx for j in range(3)])
    rho = sum(stokes[a, b] * np.kron(paulis[a], paulis[b]) for a in range(4) for b in range(4)) / 4.0
    return 0.5 * (rho + rho.conj().T)


def project_to_physical(matrix):
    """Closest density matrix by clipping negative eigenvalues and renormalising."""
    h = 0.5 * (matrix + matrix.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return qs.MAXIMALLY_MIXED.copy()
    rho = (v * (w / w.sum())) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def log_likelihood(rho, counts):
    """Multinomial log-likelihood ``sum n_k log p_k`` (``0 log 0 = 0``)."""
    n = np.asarray(counts.counts, dtype=float).ravel()
    p = projector_probabilities(rho).ravel()
    used = n > 0
    if np.any(p[used] <= 0):
        return float("-inf")
    return float(np.sum(n[used] * np.log(p[used])))


def fully_entangled_fraction(rho):
    """Largest fidelity of ``rho`` with any maximally entangled state."""
    m = _MAGIC.conj().T @ rho @ _MAGIC
    return float(min(1.0, max(0.0, np.linalg.eigvalsh(m.real)[-1])))


@dataclass
class TomoResult:
    rho: np.ndarray
    fidelity_phi_plus: float
    fidelity_max_ent: float
    concurrence: float
    log_likelihood: float
    iterations: int
    converged: bool
    min_linear_eigenvalue: float = float("nan")

    def to_dict(self):
        return {
            "rho": [[float(z.real), float(z.imag)] for z in self.rho.ravel()],
            "fidelity_phi_plus": self.fidelity_phi_plus,
            "fidelity_max_ent": self.fidelity_max_ent,
            "concurrence": self.concurrence,
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _summarise(rho, counts, iterations, converged, target, min_eig):
    rho = qs.check_density_matrix(rho)
    f_max = qs.fidelity(rho, target) if target is not None else fully_entangled_fraction(rho)
    return TomoResult(rho, qs.fidelity(rho, qs.PHI_PLUS), f_max, qs.concurrence(rho),
                      log_likelihood(rho, counts), iterations, converged, min_eig)


def mle_reconstruct(counts, dilution=DILUTION, tol=LIKELIHOOD_TOL, max_iter=MAX_ITERATIONS, target=None):
    """Maximum-likelihood state by the diluted R-rho-R iteration.

    Starts from the maximally mixed state. Each step applies
    ``(1 + d R) rho (1 + d R) / norm`` with
    ``R = sum_k (n_k / p_k) P_k / N``, which equals the identity at the
    maximum. Stops when the log-likelihood per count improves by less than
    ``tol``. ``target`` sets the state used for ``fidelity_max_ent``;
    by default the best maximally entangled state is used.
    """
    _setting_frequencies(counts)
    n = np.asarray(counts.counts, dtype=float).ravel()
    total = n.sum()
    weights = n / total
    used = weights > 0
    proj_used = _FLAT_PROJECTORS[used]
    w_used = weights[used]
    eye = np.eye(4, dtype=complex)
    rho = qs.MAXIMALLY_MIXED.copy()

    def per_count_ll(p):
        return float(np.sum(w_used * np.log(p)))

    p = np.einsum("kij,ji->k", proj_used, rho).real
    ll = per_count_ll(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = np.einsum("k,kij->ij", w_used / p, proj_used)
        step = eye + dilution * r
        nxt = step @ rho @ step
        nxt = nxt / np.trace(nxt).real
        nxt = 0.5 * (nxt + nxt.conj().T)
        p_next = np.einsum("kij,ji->k", proj_used, nxt).real
        ll_next = per_count_ll(p_next)
        gain = ll_next - ll
        rho, p, ll = nxt, p_next, ll_next
        if gain < tol:
            converged = True
            break
    try:
        min_eig = float(np.linalg.eigvalsh(linear_reconstruct(counts))[0])
    except ValidationError:
        min_eig = float("nan")
    return _summarise(rho, counts, it, converged, target, min_eig)


class MLETomography(BaseEstimator):
    """Estimator wrapper: ``fit`` on TomoCounts, ``predict`` projector probabilities."""

    def __init__(self, dilution=DILUTION, tol=LIKELIHOOD_TOL, max_iter=MAX_ITERATIONS):
        self.dilution = dilution
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, counts, target=None):
        self.result_ = mle_reconstruct(counts, self.dilution, self.tol, self.max_iter, target)
        self.rho_ = self.result_.rho
        return self

    def predict(self, counts=None):
        return projector_probabilities(self.rho_)

    def score(self, counts):
        return log_likelihood(self.rho_, counts) / max(counts.total, 1.0)


def bootstrap_sigma(counts, n_boot=50, seed=0, max_iter=2000):
    """Poisson-resampled spread of fidelity to Phi+ and concurrence."""
    rng = np.random.default_rng(seed)
    base = np.asarray(counts.counts, dtype=float)
    fid, conc = [], []
    for _ in range(n_boot):
        sample = TomoCounts(rng.poisson(base))
        try:
            res = mle_reconstruct(sample, max_iter=max_iter)
        except ValidationError:
            continue
        fid.append(res.fidelity_phi_plus)
        conc.append(res.concurrence)
    if len(fid) < 2:
        return float("nan"), float("nan")
    return float(np.std(fid, ddof=1)), float(np.std(conc, ddof=1))


@dataclass
class WindowedPoint:
    center: float
    fidelity_phi_plus: float
    fidelity_max_ent: float
    n_counts: float
    skipped: bool


def windowed_fidelity_series(xx_tags, x_tags, width, step, fss, start=0.0, stop=2000.0,
                             max_iter=MAX_ITERATIONS):
    """Reconstruct the pair state in sliding delay windows.

    Window centres run from ``start`` to ``stop`` inclusive. Windows with
    fewer than ``MIN_WINDOW_COUNTS`` coincidences are marked skipped. The
    maximally entangled reference is the pair state for the window centre.
    """
    check_positive(width, "width")
    check_positive(step, "step")
    out = []
    for center in np.arange(start, stop + step / 2, step):
        counts = assemble_counts(xx_tags, x_tags, Window(float(center), float(width)))
        if counts.total < MIN_WINDOW_COUNTS or np.any(counts.setting_totals() == 0):
            out.append(WindowedPoint(float(center), float("nan"), float("nan"), counts.total, True))
            continue
        target = qs.pair_state_at_delay(fss, max(float(center), 0.0))
        res = mle_reconstruct(counts, max_iter=max_iter, target=target)
        out.append(WindowedPoint(float(center), res.fidelity_phi_plus, res.fidelity_max_ent,
                                 counts.total, False))
    return out


def oscillation_period(centers, values, oversample=64):
    """Period of the dominant oscillation from the zero-padded DFT peak."""
    centers = np.asarray(centers, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values)
    centers, values = centers[keep], values[keep]
    if centers.size < 4:
        return float("nan")
    step = np.median(np.diff(centers))
    grid = np.arange(centers[0], centers[-1] + step / 2, step)
    series = np.interp(grid, centers, values)
    series = (series - series.mean()) * np.hanning(series.size)
    n_fft = oversample * series.size
    power = np.abs(np.fft.rfft(series, n_fft)) ** 2
    power[0] = 0.0
    k = int(np.argmax(power))
    if k == 0:
        return float("nan")
    return float(n_fft * step / k)


def entanglement_summary(series_by_config):
    """Rows ``(config, best fidelity to Phi+, window centre of the best)``."""
    rows = []
    for name, series in series_by_config.items():
        points = [p for p in series if not p.skipped]
        if not points:
            rows.append((name, float("nan"), float("nan")))
            continue
        best = max(points, key=lambda p: p.fidelity_phi_plus)
        rows.append((name, best.fidelity_phi_plus, best.center))
    return rows

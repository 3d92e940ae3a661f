"""Experiment pipelines: source -> optics -> detectors -> analysis.

Each pipeline streams the run in fixed chunks of RNG blocks and returns
the detected time tags plus a list of analysis sections. Random draws are
keyed by (seed, stream, block), so results do not depend on threads.

Channel use per preset:
  emission      X line split 50:50 onto channels 4 and 5, XX line on 6
  entanglement  XX analyzer outcomes on 0/1, X analyzer outcomes on 2/3
  teleport      Charlie H/V on 0/1, Bob pass/fail on 2/3 (time-bin: Bob on 2)
"""

from dataclasses import dataclass, field

import numpy as np

from . import qstate as qs
from .correlator import (
    AnalysisError, Window, clock_phase_gate, clocked_g2_grid, g2_histogram, g3_grid, intensity_vs_clock_phase,
    lifetime_estimate, on_off_contrast, teleport_fidelity, window_sweep, windowed_g2_zero,
)
from .optics import (
    CHANNEL_AUX_A, CHANNEL_AUX_B, CHANNEL_AUX_C, CHANNEL_BOB_P, CHANNEL_BOB_Q, CHANNEL_CHARLIE_H,
    CHANNEL_CHARLIE_V, FLAG_NON_OVERLAPPED, TAG_DTYPE, bsm_conditional, decode_slots, detect,
    timebin_amplitudes,
)
from .rng import BLOCK_CYCLES, block_rng, per_item_uniforms
from .source import (
    CASCADE, CHUNK_BLOCKS, ENTANGLED, REEXCITED, iter_cascades, iter_laser,
    sample_pair_components,
)
from .tomography import (
    BASIS_ORDER, assemble_counts, bootstrap_sigma, mle_reconstruct, oscillation_period,
    windowed_fidelity_series,
)

ENTANGLEMENT_SETTINGS = tuple((a, b) for a in BASIS_ORDER for b in BASIS_ORDER)


@dataclass
class Section:
    """One analysis result: JSON values, CSV tables and an optional error."""

    name: str
    values: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    error: str = None


@dataclass
class RunOutput:
    sections: list
    tags: np.ndarray
    duration: float


def _section(name, fn):
    sec = Section(name)
    try:
        fn(sec)
    except AnalysisError as exc:
        sec.error = str(exc)
    return sec


# --------------------------------------------------------------------------
# shared helpers


def _blocks(cycles):
    return np.asarray(cycles, dtype=np.int64) // BLOCK_CYCLES


def _chunk_range(clock, chunk):
    first = chunk * CHUNK_BLOCKS * BLOCK_CYCLES
    last = min((chunk + 1) * CHUNK_BLOCKS * BLOCK_CYCLES, clock.n_cycles)
    return (clock.epoch + (first - 0.5) * clock.period, clock.epoch + (last - 0.5) * clock.period)


class _TagCollector:
    """Per-channel detection, keyed by (seed, channel, chunk)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.parts = {}

    def add(self, times, channel, chunk, flags=None):
        rng = block_rng(self.cfg.seed, f"detector-{channel}", chunk)
        tags = detect(times, self.cfg.detector_for(channel), channel, rng, flags,
                      _chunk_range(self.cfg.clock, chunk))
        self.parts.setdefault(channel, []).append(tags)

    def channel(self, channel):
        parts = self.parts.get(channel, [])
        if not parts:
            return np.zeros(0, np.int64)
        return np.sort(np.concatenate(parts)["t"], kind="stable")

    def merged(self):
        parts = [p for ch in sorted(self.parts) for p in self.parts[ch]]
        if not parts:
            return np.zeros(0, TAG_DTYPE)
        tags = np.concatenate(parts)
        return tags[np.lexsort((tags["channel"], tags["t"]))]


def pair_vectors(events, qd, seed):
    """Pure two-photon state of each event, (HH, HV, VH, VV); zero rows for background.

    Entangled components carry the dwell-time phase; the other components
    are definite H/V products whose ensemble reproduces the pair density.
    """
    u = per_item_uniforms(seed, "pair", _blocks(events["cycle_index"]), 3)
    comp, phase, pol_xx, pol_x = sample_pair_components(events["truth_tau"], qd, u)
    is_pair = (events["kind"] == CASCADE) | (events["kind"] == REEXCITED)
    vec = np.zeros((events.size, 4), dtype=complex)
    ent = is_pair & (comp == ENTANGLED)
    vec[ent, 0] = 1 / np.sqrt(2)
    vec[ent, 3] = np.exp(1j * phase[ent]) / np.sqrt(2)
    prod = np.flatnonzero(is_pair & ~ent)
    vec[prod, 2 * pol_xx[prod] + pol_x[prod]] = 1.0
    return vec


def _sample_index(probs, u):
    """Categorical draw per row from probabilities ``probs`` (n, k)."""
    return np.minimum((u[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1), probs.shape[1] - 1)


def _histogram_table(hist, normalized=True):
    rows = [hist.edges[:-1].tolist(), hist.edges[1:].tolist(), hist.counts.tolist()]
    header = ["t_lo", "t_hi", "counts"]
    if normalized:
        rows.append(hist.normalized().tolist())
        header.append("normalized")
    return header, [list(r) for r in zip(*rows)]


def _grid_table(grid):
    header = ["a_lo"] + [f"{e:g}" for e in grid.b_edges[:-1]]
    rows = [[float(a)] + row.tolist() for a, row in zip(grid.a_edges[:-1], grid.counts)]
    return header, rows


# --------------------------------------------------------------------------
# emission: HBT on the X line, clocked grid, lifetimes


def run_emission(cfg, threads=1):
    clock, seed = cfg.clock, cfg.seed
    tags = _TagCollector(cfg)
    for chunk, ev in enumerate(iter_cascades(cfg.qd, clock, seed, threads)):
        has_x = ~np.isnan(ev["t_x"])
        x = ev["t_x"][has_x]
        arm = per_item_uniforms(seed, "hbt", _blocks(ev["cycle_index"][has_x]))[:, 0] < 0.5
        tags.add(x[arm], CHANNEL_AUX_A, chunk)
        tags.add(x[~arm], CHANNEL_AUX_B, chunk)
        tags.add(ev["t_xx"][~np.isnan(ev["t_xx"])], CHANNEL_AUX_C, chunk)

    a, b, xx = tags.channel(CHANNEL_AUX_A), tags.channel(CHANNEL_AUX_B), tags.channel(CHANNEL_AUX_C)
    an = cfg.analysis
    sections = []

    def g2(sec):
        hist = g2_histogram(a, b, an.g2_bin, an.g2_range, duration=clock.duration)
        sec.tables["g2_histogram"] = _histogram_table(hist)
        width = an.g2_zero_window or clock.period / 2
        sec.values.update(singles_a=int(a.size), singles_b=int(b.size), zero_window=float(width),
                          normalization_defined=hist.normalization_defined)
        sec.values["g2_zero"] = windowed_g2_zero(hist, clock.period, width)

    def grid(sec):
        g = clocked_g2_grid(a, b, clock, an.grid_bin, k_side=an.grid_blocks)
        sec.tables["clocked_grid"] = _grid_table(g)
        sec.values.update(
            g2_block_zero=g.extra["g2_block_zero"], g2_block_sigma=g.extra["g2_block_sigma"],
            per_block=g.extra["per_block"].tolist(), detected_period=g.extra["detected_period"],
            period_warning=g.extra["period_warning"], clock_period=clock.period)

    fits = {}

    def lifetime(name, times, rise):
        def fn(sec):
            hist = intensity_vs_clock_phase(times, clock, an.lifetime_bin)
            sec.tables["intensity"] = _histogram_table(hist, normalized=False)
            sec.values["contrast"] = on_off_contrast(hist)
            rise_time = fits.get(rise)
            fit = lifetime_estimate(hist, period=clock.period, pulse_fwhm=clock.pulse_fwhm,
                                    rise_time=rise_time)
            fits[name] = fit.tau
            sec.values.update(lifetime=fit.tau, stderr=fit.stderr, wrapped=fit.wrapped,
                              fit_bins=fit.n_bins, rise_time=rise_time)
        return fn

    sections.append(_section("g2", g2))
    sections.append(_section("clocked_grid", grid))
    sections.append(_section("lifetime_xx", lifetime("xx", xx, None)))
    x_all = np.sort(np.concatenate([a, b]), kind="stable")
    # the X line is fed by the XX decay: its rise time is the fitted XX lifetime
    sections.append(_section("lifetime_x", lifetime("x", x_all, "xx")))
    return RunOutput(sections, tags.merged(), clock.duration)


# --------------------------------------------------------------------------
# entanglement: nine analyzer settings, tomography


def _setting_of_cycle(cycles, n_cycles):
    return np.clip((np.asarray(cycles, np.int64) * 9) // max(n_cycles, 1), 0, 8)


def entanglement_streams(streams, clock):
    """Split channel streams 0-3 into per-setting (XX, X) outcome pairs by clock cycle."""
    xx_tags, x_tags = {}, {}
    cycles = {ch: np.floor((t - clock.epoch) / clock.period + 0.5).astype(np.int64) for ch, t in streams.items()}
    for s, key in enumerate(ENTANGLEMENT_SETTINGS):
        def part(ch):
            return streams[ch][_setting_of_cycle(cycles[ch], clock.n_cycles) == s]
        xx_tags[key] = (part(0), part(1))
        x_tags[key] = (part(2), part(3))
    return xx_tags, x_tags


def run_entanglement(cfg, threads=1):
    clock, seed, qd = cfg.clock, cfg.seed, cfg.qd
    tags = _TagCollector(cfg)
    analyzers = {}
    for s, (bxx, bx) in enumerate(ENTANGLEMENT_SETTINGS):
        vecs = np.array([np.kron(a, b) for a in qs.basis_vectors(bxx) for b in qs.basis_vectors(bx)])
        analyzers[s] = vecs.conj()
    for chunk, ev in enumerate(iter_cascades(qd, clock, seed, threads)):
        setting = _setting_of_cycle(ev["cycle_index"], clock.n_cycles)
        u = per_item_uniforms(seed, "analyzer", _blocks(ev["cycle_index"]), 3)
        pair = pair_vectors(ev, qd, seed)
        is_pair = (ev["kind"] == CASCADE) | (ev["kind"] == REEXCITED)
        out_xx = (u[:, 1] >= 0.5).astype(np.int8)
        out_x = (u[:, 2] >= 0.5).astype(np.int8)
        for s in range(9):
            rows = np.flatnonzero(is_pair & (setting == s))
            probs = np.abs(pair[rows] @ analyzers[s].T) ** 2
            k = _sample_index(probs, u[rows, 0])
            out_xx[rows], out_x[rows] = k // 2, k % 2
        has_xx = ~np.isnan(ev["t_xx"])
        has_x = ~np.isnan(ev["t_x"])
        for k in (0, 1):
            tags.add(ev["t_xx"][has_xx & (out_xx == k)], CHANNEL_CHARLIE_H + k, chunk)
            tags.add(ev["t_x"][has_x & (out_x == k)], CHANNEL_BOB_P + k, chunk)

    xx_tags, x_tags = entanglement_streams({ch: tags.channel(ch) for ch in range(4)}, clock)
    an = cfg.analysis

    def series(sec):
        pts = windowed_fidelity_series(xx_tags, x_tags, an.tomo_window, an.series_step, qd.fss,
                                       an.series_start, an.series_stop)
        sec.tables["fidelity_series"] = (
            ["center", "fidelity_phi_plus", "fidelity_max_ent", "counts", "skipped"],
            [[p.center, p.fidelity_phi_plus, p.fidelity_max_ent, p.n_counts, int(p.skipped)] for p in pts])
        good = [p for p in pts if not p.skipped]
        if not good:
            raise AnalysisError("no delay window holds enough coincidences")
        top = max(good, key=lambda p: p.fidelity_phi_plus)
        sec.values.update(
            oscillation_period=oscillation_period([p.center for p in pts], [p.fidelity_phi_plus for p in pts]),
            best_center=top.center, best_fidelity_phi_plus=top.fidelity_phi_plus,
            min_fidelity_max_ent=min(p.fidelity_max_ent for p in good), windows=len(pts),
            skipped=len(pts) - len(good))

    def tomography(sec):
        window = Window(an.tomo_center, an.tomo_window)
        counts = assemble_counts(xx_tags, x_tags, window)
        if counts.total == 0:
            raise AnalysisError("no coincidences in the tomography window")
        target = qs.pair_state_at_delay(qd.fss, max(window.center, 0.0))
        res = mle_reconstruct(counts, target=target)
        sig_f, sig_c = bootstrap_sigma(counts, n_boot=an.bootstrap, seed=seed)
        sec.values.update(res.to_dict())
        sec.values.update(window_center=window.center, window_width=window.width,
                          total_counts=counts.total, fidelity_sigma=sig_f, concurrence_sigma=sig_c,
                          min_linear_eigenvalue=res.min_linear_eigenvalue)
        sec.tables["tomo_counts"] = (["setting", "outcome", "count"],
                                     [[f"{a}-{b}", f"{c}-{d}", n] for (a, b, c, d), n in counts.as_dict().items()])

    sections = [_section("fidelity_series", series), _section("tomography", tomography)]
    return RunOutput(sections, tags.merged(), clock.duration)


# --------------------------------------------------------------------------
# teleportation


def expected_output(cfg):
    """Decoded input polarisation and the state Bob should receive (sigma_x applied)."""
    _, pol_in = decode_slots(timebin_amplitudes(cfg.laser.state), cfg.amzi_charlie.phase)
    return pol_in, qs.SIGMA_X @ pol_in


def _match_nearest(t_query, t_ref, half_width):
    """Index into ``t_ref`` of the nearest element within ``half_width``, else -1.

    Each reference element is claimed at most once (earliest query wins).
    """
    if t_ref.size == 0 or t_query.size == 0:
        return np.full(t_query.size, -1)
    order = np.argsort(t_ref, kind="stable")
    ts = t_ref[order]
    j = np.searchsorted(ts, t_query)
    lo = np.clip(j - 1, 0, ts.size - 1)
    hi = np.clip(j, 0, ts.size - 1)
    pick = np.where(np.abs(ts[hi] - t_query) < np.abs(ts[lo] - t_query), hi, lo)
    ok = np.abs(ts[pick] - t_query) <= half_width
    match = np.where(ok, order[pick], -1)
    claimed = np.flatnonzero(match >= 0)
    _, first = np.unique(match[claimed], return_index=True)
    keep = np.zeros(match.size, bool)
    keep[claimed[first]] = True
    return np.where(keep, match, -1)


def _teleport_chunk(cfg, ev, las, chunk, pol_in, bob_vec, tags, timebin):
    seed, qd = cfg.seed, cfg.qd
    delay = cfg.amzi_charlie.delay
    pair = pair_vectors(ev, qd, seed)
    pair_m = pair.reshape(-1, 2, 2)  # [event, xx, x]
    is_pair = (ev["kind"] == CASCADE) | (ev["kind"] == REEXCITED)

    # laser photons through Charlie's decoder
    slot_p, _ = decode_slots(timebin_amplitudes(cfg.laser.state), cfg.amzi_charlie.phase)
    lb = _blocks(las["cycle_index"])
    slot = _sample_index(np.broadcast_to(slot_p, (las.size, 3)),
                         per_item_uniforms(seed, "decoder", lb)[:, 0])
    t_las = las["t"] + (slot - 1) * delay
    p_h_las = np.choose(slot, [1.0, abs(pol_in[0]) ** 2, 0.0])
    flags_las = np.where(slot == 1, 0, FLAG_NON_OVERLAPPED).astype(np.uint8)

    # X photons meet the recombined laser photons at the BSM
    ix = np.flatnonzero(~np.isnan(ev["t_x"]))
    t_x = ev["t_x"][ix]
    rec = np.flatnonzero(slot == 1)
    m = _match_nearest(t_x, t_las[rec], cfg.bsm.coincidence_window / 2)
    matched_laser = np.where(m >= 0, rec[np.maximum(m, 0)], -1)
    u = per_item_uniforms(seed, "bsm", _blocks(ev["cycle_index"][ix]), 4)
    genuine = (matched_laser >= 0) & is_pair[ix] & (u[:, 0] < cfg.bsm.visibility)

    g = np.flatnonzero(genuine)
    b = bsm_conditional(np.broadcast_to(pol_in, (g.size, 2)), pair[ix[g]])
    p_psi = np.einsum("ni,ni->n", b.conj(), b).real
    # Psi+ sends both photons to the same port; only port a is monitored
    heralded = (u[g, 1] < p_psi) & (u[g, 2] < 0.5)
    x_is_h = u[g, 3] < 0.5
    gh = g[heralded]
    t_lg = t_las[matched_laser[gh]]
    herald_h = np.where(x_is_h[heralded], t_x[gh], t_lg)
    herald_v = np.where(x_is_h[heralded], t_lg, t_x[gh])

    # every other photon reaches port a with probability 1/2, then an H/V detector
    free_x = ~genuine
    r = per_item_uniforms(seed, "route-x", _blocks(ev["cycle_index"][ix]), 2)
    p_h_x = np.where(is_pair[ix], (np.abs(pair_m[ix, :, 0]) ** 2).sum(axis=1), 0.5)
    x_port_a = free_x & (r[:, 0] < 0.5)
    x_h = r[:, 1] < p_h_x
    used_laser = np.zeros(las.size, bool)
    used_laser[matched_laser[g]] = True
    rl = per_item_uniforms(seed, "route-laser", lb, 2)
    l_port_a = ~used_laser & (rl[:, 0] < 0.5)
    l_h = rl[:, 1] < p_h_las

    h_times = np.concatenate([herald_h, t_x[x_port_a & x_h], t_las[l_port_a & l_h]])
    h_flags = np.concatenate([np.zeros(gh.size, np.uint8), np.zeros(int((x_port_a & x_h).sum()), np.uint8),
                              flags_las[l_port_a & l_h]])
    v_times = np.concatenate([herald_v, t_x[x_port_a & ~x_h], t_las[l_port_a & ~l_h]])
    v_flags = np.concatenate([np.zeros(gh.size, np.uint8), np.zeros(int((x_port_a & ~x_h).sum()), np.uint8),
                              flags_las[l_port_a & ~l_h]])
    tags.add(h_times, CHANNEL_CHARLIE_H, chunk, h_flags)
    tags.add(v_times, CHANNEL_CHARLIE_V, chunk, v_flags)

    # Bob: probability that the XX photon passes the projection onto bob_vec
    n = ev.size
    rho_xx = np.einsum("nax,nbx->nab", pair_m, pair_m.conj())
    p_pass = np.einsum("a,nab,b->n", bob_vec.conj(), rho_xx, bob_vec).real
    p_pass[~is_pair] = 0.5
    measured = ix[is_pair[ix] & x_port_a]
    outcome = np.where(x_h, 0, 1)[is_pair[ix] & x_port_a]
    collapsed = pair_m[measured, :, outcome]
    norm = np.einsum("na,na->n", collapsed.conj(), collapsed).real
    p_pass[measured] = np.abs(collapsed @ bob_vec.conj()) ** 2 / np.where(norm > 0, norm, 1.0)
    ib = ix[gh]
    bn = b[heralded]
    p_pass[ib] = np.abs(bn @ bob_vec.conj()) ** 2 / np.einsum("na,na->n", bn.conj(), bn).real

    has_xx = ~np.isnan(ev["t_xx"])
    ub = per_item_uniforms(seed, "bob", _blocks(ev["cycle_index"]))[:, 0]
    passed = ub < p_pass
    t_xx = ev["t_xx"]
    if timebin:
        # Bob re-encodes polarisation into time bins: H late, V early
        late = has_xx & passed
        times = np.concatenate([t_xx[late] + cfg.amzi_bob.delay, t_xx[has_xx & ~passed]])
        tags.add(np.sort(times), CHANNEL_BOB_P, chunk)
    else:
        tags.add(t_xx[has_xx & passed], CHANNEL_BOB_P, chunk)
        tags.add(t_xx[has_xx & ~passed], CHANNEL_BOB_Q, chunk)
    return {"genuine_heralds": int(gh.size), "genuine_pass_probability": float(p_pass[ib].sum()),
            "overlaps": int((matched_laser >= 0).sum()),
            "events": int(n), "laser_photons": int(las.size)}


def run_teleport(cfg, threads=1):
    timebin = cfg.preset == "teleport_timebin"
    clock, seed = cfg.clock, cfg.seed
    pol_in, expected = expected_output(cfg)
    # time-bin readout: the pass projection is onto H (late bin)
    bob_vec = np.array([1.0, 0.0], complex) if timebin else expected
    tags = _TagCollector(cfg)
    truth = {"genuine_heralds": 0, "genuine_pass_probability": 0.0, "overlaps": 0, "events": 0, "laser_photons": 0}
    chunks = zip(iter_cascades(cfg.qd, clock, seed, threads),
                 iter_laser(cfg.laser.mean_photon, clock, seed, cfg.laser.offset, threads))
    for chunk, (ev, las) in enumerate(chunks):
        for k, v in _teleport_chunk(cfg, ev, las, chunk, pol_in, bob_vec, tags, timebin).items():
            truth[k] += v

    h, v = tags.channel(CHANNEL_CHARLIE_H), tags.channel(CHANNEL_CHARLIE_V)
    an = cfg.analysis
    if an.charlie_gate > 0:
        # keep Charlie clicks near the recombined laser slot; the decoder side slots fall outside
        h = h[clock_phase_gate(h, clock, cfg.laser.offset, an.charlie_gate)]
        v = v[clock_phase_gate(v, clock, cfg.laser.offset, an.charlie_gate)]
    grid_kw = dict(bin_width=an.g3_bin, herald_window=an.herald_window, bob_range=(an.bob_min, an.bob_max),
                   clock_period=clock.period)
    if timebin:
        bob = tags.channel(CHANNEL_BOB_P)
        expected_late = abs(expected[0]) ** 2 > 0.5
        d_bob = cfg.amzi_bob.delay
        pass_offset, fail_offset = (d_bob, 0.0) if expected_late else (0.0, d_bob)
        pass_grid = g3_grid(h, v, bob, bob_offset=pass_offset, **grid_kw)
        fail_grid = g3_grid(h, v, bob, bob_offset=fail_offset, **grid_kw)
    else:
        bob_p, bob_q = tags.channel(CHANNEL_BOB_P), tags.channel(CHANNEL_BOB_Q)
        pass_grid = g3_grid(h, v, bob_p, **grid_kw)
        fail_grid = g3_grid(h, v, bob_q, **grid_kw)

    window = Window(0.0, an.fidelity_window)
    sections = []

    def summary(sec):
        sec.values.update(truth)
        if truth["genuine_heralds"]:
            sec.values["genuine_pass_probability"] = truth["genuine_pass_probability"] / truth["genuine_heralds"]
        sec.values.update(input_state=cfg.laser.state, decoded_input=[[z.real, z.imag] for z in pol_in],
                          expected_output=[[z.real, z.imag] for z in expected],
                          heralds=pass_grid.extra["n_heralds"], charlie_h=int(h.size), charlie_v=int(v.size))

    def g3(sec):
        for name, grid in (("pass", pass_grid), ("fail", fail_grid)):
            sec.tables[f"g3_{name}"] = _grid_table(grid)
            inside = grid.window_sum(window.width)
            sec.values[f"{name}_window_counts"] = inside
            sec.values[f"{name}_accidental_level"] = grid.accidental_level
            expected = grid.accidental_window_sum(window.width)
            sec.values[f"{name}_window_accidentals"] = expected
            sec.values[f"{name}_window_normalized"] = inside / expected if expected > 0 else float("nan")

    def fidelity(sec):
        f, s = teleport_fidelity(pass_grid, fail_grid, window)
        sec.values.update(fidelity=f, sigma=s, window=window.width)
        rows = window_sweep(pass_grid, fail_grid, an.sweep_widths)
        sec.tables["window_sweep"] = (["width", "fidelity", "sigma"], [list(r) for r in rows])
        sec.values["sweep"] = [list(r) for r in rows]

    sections.append(_section("summary", summary))
    sections.append(_section("g3", g3))
    sections.append(_section("fidelity", fidelity))
    if timebin:
        def mapping(sec):
            # fixed frame: the late bin sits at t_bob = 0 and the early bin at -delay
            wide = g3_grid(h, v, bob, bin_width=an.g3_bin * 10, herald_window=an.herald_window,
                           bob_range=(-d_bob - 1000, 1000), bob_offset=d_bob, clock_period=clock.period)
            peak_at, wrong_at = (0.0, -d_bob) if expected_late else (-d_bob, 0.0)
            peak = wide.window_sum(window.width, (0.0, peak_at))
            absent = wide.window_sum(window.width, (0.0, wrong_at))
            sec.values.update(peak_counts=peak, wrong_bin_counts=absent, peak_offset=peak_at,
                              wrong_bin_offset=wrong_at, expected_bin="late" if expected_late else "early",
                              ratio=float(peak / absent) if absent else float("inf"))
            sec.tables["g3_wide"] = _grid_table(wide)
        sections.append(_section("timebin_mapping", mapping))
    return RunOutput(sections, tags.merged(), clock.duration)


PIPELINES = {
    "emission": run_emission,
    "entanglement": run_entanglement,
    "teleport_superposition": run_teleport,
    "teleport_timebin": run_teleport,
}


def run_pipeline(cfg, threads=1):
    return PIPELINES[cfg.preset](cfg, threads)

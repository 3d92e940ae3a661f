import numpy as np
import pytest
from scipy import stats

from qdrelay import qstate as qs
from qdrelay._validation import ValidationError
from qdrelay.source import (
    BACKGROUND_X, BACKGROUND_XX, CASCADE, REEXCITED, ClockConfig, QDParams, line_times,
    pair_density, read_events_csv, sample_pair_components, sample_pair_density,
    simulate_cascades, simulate_laser, write_events_csv,
)


def same_bits(a, b):
    return a.dtype == b.dtype and a.tobytes() == b.tobytes()


class TestClock:
    def test_ghz_period(self):
        assert ClockConfig(repetition_rate=1.07).period == pytest.approx(934.6, abs=0.1)

    def test_pulse_must_fit_period(self):
        with pytest.raises(ValidationError):
            ClockConfig(repetition_rate=1.07, pulse_fwhm=1000.0)

    @pytest.mark.parametrize("rate", [0.0, -1.0])
    def test_rate_positive(self, rate):
        with pytest.raises(ValidationError):
            ClockConfig(repetition_rate=rate)


class TestQDParams:
    @pytest.mark.parametrize("field", ["p_excite", "p_reexcite", "shelving_prob", "purity"])
    def test_probability_range(self, field):
        with pytest.raises(ValidationError):
            QDParams(**{field: 1.5})

    def test_lifetime_positive(self):
        with pytest.raises(ValidationError):
            QDParams(lifetime_x=0.0)


class TestCascades:
    def test_one_pair_per_cycle(self):
        qd = QDParams(p_excite=1.0, single_emitter=False)
        ev = simulate_cascades(qd, ClockConfig(n_cycles=5000), seed=3)
        assert len(ev) == 5000
        assert np.array_equal(np.sort(ev["cycle_index"]), np.arange(5000))
        assert np.all(ev["t_xx"] < ev["t_x"])
        assert np.all(ev["kind"] == CASCADE)

    def test_mean_xx_delay(self):
        qd = QDParams(p_excite=1.0)
        ev = simulate_cascades(qd, ClockConfig(n_cycles=1_000_000), seed=11)
        mean = np.mean(ev["t_xx"] - ev["t_exc"])
        assert mean == pytest.approx(256.0, rel=0.02)

    def test_late_x_fraction_independent_cycles(self):
        # exponential CDF: exp(-934.6/1560) of X decays land beyond one period
        clock = ClockConfig(repetition_rate=1.07, n_cycles=200_000)
        qd = QDParams(p_excite=1.0, single_emitter=False)
        ev = simulate_cascades(qd, clock, seed=5)
        within = np.mean(ev["t_x"] - ev["t_xx"] <= clock.period)
        assert within == pytest.approx(1 - np.exp(-clock.period / 1560.0), abs=0.01)
        assert within == pytest.approx(0.451, abs=0.01)

    @pytest.mark.parametrize("single", [True, False])
    def test_ks_delays(self, single):
        qd = QDParams(p_excite=1.0, single_emitter=single)
        ev = simulate_cascades(qd, ClockConfig(repetition_rate=0.1, n_cycles=100_000), seed=7)
        assert stats.kstest(ev["t_xx"] - ev["t_exc"], "expon", args=(0, 256.0)).pvalue > 0.01
        assert stats.kstest(ev["truth_tau"], "expon", args=(0, 1560.0)).pvalue > 0.01

    def test_shelving_delays_emission(self):
        qd = QDParams(p_excite=1.0, shelving_prob=1.0, shelving_lifetime=3000.0, single_emitter=False)
        ev = simulate_cascades(qd, ClockConfig(repetition_rate=0.1, n_cycles=20_000), seed=2)
        assert np.mean(ev["t_xx"] - ev["t_exc"]) == pytest.approx(3256.0, rel=0.03)

    def test_single_emitter_never_overlaps(self):
        ev = simulate_cascades(QDParams(), ClockConfig(n_cycles=50_000), seed=9)
        ev = ev[np.argsort(ev["t_exc"])]
        assert np.all(ev["t_exc"][1:] >= ev["t_x"][:-1])

    def test_reexcitation_inside_pulse(self):
        clock = ClockConfig(n_cycles=50_000, repetition_rate=0.1)
        qd = QDParams(p_excite=1.0, p_reexcite=1.0, single_emitter=False)
        ev = simulate_cascades(qd, clock, seed=4)
        re = ev[ev["kind"] == REEXCITED]
        assert len(re) > 0
        first = ev[ev["kind"] == CASCADE]
        by_cycle = dict(zip(first["cycle_index"], first["t_xx"]))
        t_first = np.array([by_cycle[c] for c in re["cycle_index"]])
        assert np.all(re["t_exc"] >= t_first)
        assert np.all(np.abs(t_first - clock.pulse_centres(0, 1)[0] - re["cycle_index"] * clock.period)
                      <= clock.pulse_fwhm + 1e-9)

    def test_background_rate(self):
        rate = 2e7  # per second per line
        clock = ClockConfig(n_cycles=200_000)
        ev = simulate_cascades(QDParams(p_excite=0.0, background_rate=rate), clock, seed=1)
        expected = rate * clock.duration * 1e-12
        for kind in (BACKGROUND_XX, BACKGROUND_X):
            n = np.sum(ev["kind"] == kind)
            assert abs(n - expected) < 4 * np.sqrt(expected)

    def test_partner_matching(self):
        ev = simulate_cascades(QDParams(), ClockConfig(n_cycles=20_000), seed=8)
        has_x = ~np.isnan(ev["t_x"])
        assert np.all(~np.isnan(ev["t_xx"][has_x]))
        _, counts = np.unique(ev["cycle_index"][has_x], return_counts=True)
        assert np.all(counts == 1)

    def test_line_times_strictly_increasing(self):
        qd = QDParams(p_reexcite=0.3, background_rate=1e7)
        ev = simulate_cascades(qd, ClockConfig(n_cycles=100_000), seed=12)
        for line in ("xx", "x"):
            assert np.all(np.diff(line_times(ev, line)) > 0)

    def test_deterministic(self):
        qd = QDParams(p_reexcite=0.2, background_rate=1e6)
        clock = ClockConfig(n_cycles=150_000)
        a = simulate_cascades(qd, clock, seed=42)
        b = simulate_cascades(qd, clock, seed=42)
        c = simulate_cascades(qd, clock, seed=43)
        assert same_bits(a, b)
        assert not same_bits(a, c)

    def test_thread_count_invariance(self):
        qd = QDParams(p_reexcite=0.2, background_rate=1e6)
        clock = ClockConfig(n_cycles=200_000)
        a = simulate_cascades(qd, clock, seed=42, threads=1)
        b = simulate_cascades(qd, clock, seed=42, threads=4)
        assert same_bits(a, b)

    def test_prefix_stability(self):
        # the first cycles do not depend on how many cycles follow
        qd = QDParams(single_emitter=False)
        a = simulate_cascades(qd, ClockConfig(n_cycles=70_000), seed=6)
        b = simulate_cascades(qd, ClockConfig(n_cycles=140_000), seed=6)
        assert same_bits(a[a["cycle_index"] < 65_536], b[b["cycle_index"] < 65_536])

    @pytest.mark.parametrize("shape", ["square", "cw"])
    def test_pulse_shapes(self, shape):
        clock = ClockConfig(n_cycles=50_000, pulse_shape=shape)
        qd = QDParams(p_excite=1.0, single_emitter=False)
        ev = simulate_cascades(qd, clock, seed=1)
        offset = ev["t_exc"] - ev["cycle_index"] * clock.period
        half = clock.pulse_fwhm / 2 if shape == "square" else clock.period / 2
        assert np.all(np.abs(offset) <= half)
        assert np.std(offset) == pytest.approx(2 * half / np.sqrt(12), rel=0.02)


class TestLaser:
    def test_multiphoton_fraction(self):
        rec, state = simulate_laser(qs.PolState.from_label("H"), 0.1, ClockConfig(n_cycles=400_000), seed=1)
        _, counts = np.unique(rec["cycle_index"], return_counts=True)
        assert np.all(rec["multiplicity"] >= 1)
        p = stats.poisson(0.1)
        expected = (1 - p.cdf(1)) / (1 - p.cdf(0))
        assert expected == pytest.approx(0.049, abs=0.001)
        assert np.mean(counts >= 2) == pytest.approx(expected, abs=0.003)
        assert state == qs.PolState.from_label("H")

    def test_pulse_width(self):
        clock = ClockConfig(n_cycles=200_000, pulse_fwhm=130.0)
        rec, _ = simulate_laser(qs.PolState.from_label("D"), 0.5, clock, seed=2)
        offset = rec["t"] - rec["cycle_index"] * clock.period
        assert np.std(offset) * 2.3548 == pytest.approx(130.0, rel=0.02)

    def test_mean_photon_positive(self):
        with pytest.raises(ValidationError):
            simulate_laser(qs.PolState.from_label("H"), 0.0, ClockConfig(), seed=1)


class TestPairDensity:
    def event(self, tau, kind=CASCADE):
        ev = np.zeros(1, dtype=simulate_cascades(QDParams(), ClockConfig(n_cycles=0), 0).dtype)[0]
        ev["truth_tau"] = tau
        ev["kind"] = kind
        return ev

    def test_pure_phi_plus(self):
        rho = sample_pair_density(self.event(123.0), QDParams(fss=0.0), purity=1.0)
        assert qs.fidelity(rho, qs.PHI_PLUS) == pytest.approx(1.0)

    def test_fully_mixed(self):
        rho = sample_pair_density(self.event(50.0), QDParams(), purity=0.0)
        assert np.allclose(rho, qs.MAXIMALLY_MIXED)
        assert qs.fidelity(rho, qs.PHI_PLUS) == pytest.approx(0.25)

    def test_classical_floor(self):
        rho = sample_pair_density(self.event(0.0), QDParams(hv_coherence_floor=1.0, purity=0.0), purity=0.0)
        assert qs.fidelity(rho, qs.PHI_PLUS) == pytest.approx(0.5)
        assert qs.concurrence(rho) == pytest.approx(0.0, abs=1e-12)

    def test_background_rejected(self):
        with pytest.raises(ValidationError):
            sample_pair_density(self.event(0.0, BACKGROUND_X), QDParams(), purity=1.0)

    def test_components_reproduce_density(self):
        # averaging the sampled pure components recovers the ensemble matrix
        qd = QDParams(purity=0.6, hv_coherence_floor=0.15)
        n = 200_000
        u = np.random.default_rng(0).random((n, 3))
        tau = np.full(n, 100.0)
        comp, phase, pxx, px = sample_pair_components(tau, qd, u)
        rho = np.zeros((4, 4), complex)
        ent = comp == 0
        psi = qs.pair_state_at_delay(qd.fss, 100.0).vector
        rho += ent.mean() * np.outer(psi, psi.conj())
        idx = 2 * pxx[~ent] + px[~ent]
        rho += np.diag(np.bincount(idx, minlength=4) / n)
        assert np.abs(rho - pair_density(100.0, qd)).max() < 0.005


def test_events_csv_roundtrip(tmp_path):
    ev = simulate_cascades(QDParams(background_rate=1e7), ClockConfig(n_cycles=3000), seed=1)
    path = tmp_path / "events.csv"
    write_events_csv(path, ev)
    header = path.read_text().splitlines()[0]
    assert header == "cycle_index,t_xx,t_x,kind,truth_tau"
    back = read_events_csv(path)
    for name in ("cycle_index", "kind"):
        assert np.array_equal(back[name], ev[name])
    for name in ("t_xx", "t_x", "truth_tau"):
        assert np.array_equal(np.isnan(back[name]), np.isnan(ev[name]))
        assert np.allclose(np.nan_to_num(back[name]), np.nan_to_num(ev[name]), rtol=0, atol=0)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdrelay import qstate as qs
from qdrelay._validation import ConfigurationError, ValidationError
from qdrelay.optics import (
    FLAG_NON_OVERLAPPED, AMZIParams, BSMConfig, DetectorParams, PolPhoton, analyze_pair,
    analyze_polarization, bsm_density, classical_cross_density, decode_slots, detect,
    encode_amplitudes, hom_bsm, hom_bsm_batch, merge_tags, psi_plus_probability,
    transcode_pol_to_timebin, transcode_timebin_to_pol,
)
from qdrelay.tags import read_tags, write_tags

from conftest import random_density_matrix

ENC = AMZIParams(delay=5000.0, mode="pol_to_timebin")
DEC = AMZIParams(delay=5000.0, mode="timebin_to_pol")
CARDINAL = ["H", "V", "D", "A", "R", "L"]
PHI = qs.PHI_PLUS.density_matrix()


def pol(label, t=0.0):
    return PolPhoton(t, qs.PolState.from_label(label))


def bell_projection_oracle(input_vec, pair_rho):
    """Brute force in the full three-photon space ordered (input, XX, X)."""
    rho = np.kron(np.outer(input_vec, np.conj(input_vec)), pair_rho)
    psi_plus = qs.bell_state("psi+").vector  # on (input, X)
    proj = np.kron(np.outer(psi_plus, psi_plus.conj()), np.eye(2))  # ordering (input, X, XX)
    proj = proj.reshape([2] * 6).transpose(0, 2, 1, 3, 5, 4).reshape(8, 8)
    out = (proj @ rho @ proj).reshape([2] * 6)
    rho_b = np.einsum("ibxjcy,ij,xy->bc", out, np.eye(2), np.eye(2))
    return np.trace(rho_b).real, rho_b


def distinguishable_oracle(input_vec, pair_rho):
    """Independent H/V measurements of both photons, keep H.V cross clicks, both ports counted."""
    rho_b = np.zeros((2, 2), complex)
    total = 0.0
    for laser_out, x_out in ((0, 1), (1, 0)):
        p_laser = abs(input_vec[laser_out]) ** 2
        block = pair_rho.reshape(2, 2, 2, 2)[:, x_out, :, x_out]
        rho_b += p_laser * block
    total = np.trace(rho_b).real
    return total / 2, rho_b


class TestTranscoders:
    def test_v_early(self):
        out = transcode_pol_to_timebin(pol("V"), ENC, seed=1)
        assert out.t == 0.0 and out.bin == "early"

    def test_h_late(self):
        out = transcode_pol_to_timebin(pol("H"), ENC, seed=1)
        assert out.t == 5000.0 and out.bin == "late"

    def test_d_superposition(self):
        amzi = AMZIParams(phase=0.7)
        amps = encode_amplitudes(qs.POL_VECTORS["D"], amzi.phase)
        assert np.allclose(np.abs(amps) ** 2, [0.5, 0.5])
        assert np.angle(amps[1] / amps[0]) == pytest.approx(0.7)
        bins = [transcode_pol_to_timebin(pol("D"), amzi, seed=s).bin for s in range(400)]
        assert 150 < bins.count("early") < 250

    def test_wrong_mode(self):
        with pytest.raises(ConfigurationError):
            transcode_pol_to_timebin(pol("H"), DEC, seed=0)
        tb = transcode_pol_to_timebin(pol("H"), ENC, seed=0)
        with pytest.raises(ConfigurationError):
            transcode_timebin_to_pol(tb, ENC, seed=0)

    def test_delay_mismatch(self):
        tb = transcode_pol_to_timebin(pol("D"), ENC, seed=0)
        with pytest.raises(ConfigurationError):
            transcode_timebin_to_pol(tb, AMZIParams(delay=4900.0, mode="timebin_to_pol"), seed=0)
        transcode_timebin_to_pol(tb, AMZIParams(delay=5000.5, mode="timebin_to_pol"), seed=0)

    @pytest.mark.parametrize("label", CARDINAL)
    def test_round_trip(self, label):
        vec = qs.POL_VECTORS[label]
        _, out = decode_slots(encode_amplitudes(vec, 0.3), 0.3)
        assert qs.trace_distance(np.outer(out, out.conj()), np.outer(vec, vec.conj())) < 1e-9

    @settings(max_examples=100)
    @given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), st.floats(-np.pi, np.pi))
    def test_round_trip_any_state(self, theta, phi, phase):
        vec = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
        _, out = decode_slots(encode_amplitudes(vec, phase), phase)
        assert qs.trace_distance(np.outer(out, out.conj()), np.outer(vec, vec.conj())) < 1e-9

    def test_recombined_slot_sampled(self):
        tb = transcode_pol_to_timebin(pol("A", t=100.0), ENC, seed=3)
        slots = {}
        for s in range(300):
            out = transcode_timebin_to_pol(tb, DEC, seed=s)
            slots.setdefault(out.t, []).append(out)
        assert set(slots) <= {100.0, 5100.0, 10100.0}
        for out in slots[5100.0]:
            assert out.flags == 0
            assert qs.projector_equal(out.state, qs.PolState.from_label("A"))

    def test_early_satellite(self):
        # an early photon through the short arm leaves one delay before the recombined slot
        tb = transcode_pol_to_timebin(pol("V"), ENC, seed=0)
        outs = [transcode_timebin_to_pol(tb, DEC, seed=s) for s in range(200)]
        sats = [o for o in outs if o.flags & FLAG_NON_OVERLAPPED]
        rec = [o for o in outs if not o.flags & FLAG_NON_OVERLAPPED]
        assert sats and rec
        assert {o.t for o in sats} == {rec[0].t - 5000.0}
        assert {o.t for o in outs} == {0.0, 5000.0}

    def test_pi_phase_offset(self):
        _, out = decode_slots(encode_amplitudes(qs.POL_VECTORS["D"], 0.0), np.pi)
        assert qs.projector_equal(out, qs.POL_VECTORS["A"])

    def test_slot_probabilities(self):
        probs, _ = decode_slots(np.array([np.sqrt(0.3), np.sqrt(0.7)]), 0.0)
        assert np.allclose(probs, [0.15, 0.5, 0.35])


class TestBSM:
    def test_psi_minus_never_heralds(self):
        psi_minus = qs.bell_state("psi-").density_matrix()
        assert psi_plus_probability(psi_minus) == pytest.approx(0.0, abs=1e-15)

    def test_h_input_gives_v(self):
        p, rho_b = bsm_density(qs.POL_VECTORS["H"], PHI)
        assert p == pytest.approx(0.25)
        assert np.allclose(rho_b / p, np.outer(qs.POL_VECTORS["V"], qs.POL_VECTORS["V"].conj()))

    def test_hom_bsm_h_input(self):
        cfg = BSMConfig(visibility=1.0)
        results = [hom_bsm(pol("H"), 0.0, PHI, cfg, seed=s) for s in range(200)]
        heralds = [r for r in results if r is not None]
        assert 25 < len(heralds) < 80
        for herald, rho in heralds:
            assert herald.genuine
            assert np.allclose(rho, np.diag([0, 1]))

    def test_against_three_photon_oracle(self, rng):
        for _ in range(30):
            vec = rng.normal(size=2) + 1j * rng.normal(size=2)
            vec /= np.linalg.norm(vec)
            pair = random_density_matrix(rng)
            p, rho_b = bsm_density(vec, pair)
            p_o, rho_o = bell_projection_oracle(vec, pair)
            assert p == pytest.approx(p_o, abs=1e-12)
            assert np.allclose(rho_b, rho_o, atol=1e-12)
            p_c, rho_c = classical_cross_density(vec, pair)
            p_co, rho_co = distinguishable_oracle(vec, pair)
            assert p_c == pytest.approx(p_co, abs=1e-12)
            assert np.allclose(rho_c, rho_co, atol=1e-12)

    @pytest.mark.parametrize("label", ["D", "A", "R", "L"])
    def test_zero_visibility_superposition(self, label):
        vec = qs.POL_VECTORS[label]
        p, rho_b = classical_cross_density(vec, PHI)
        bob = rho_b / np.trace(rho_b).real
        expected = qs.SIGMA_X @ vec
        assert np.vdot(expected, bob @ expected).real == pytest.approx(0.5)

    @pytest.mark.parametrize("label", ["H", "V"])
    def test_zero_visibility_logical(self, label):
        vec = qs.POL_VECTORS[label]
        _, rho_b = classical_cross_density(vec, PHI)
        bob = rho_b / np.trace(rho_b).real
        expected = qs.SIGMA_X @ vec
        assert np.vdot(expected, bob @ expected).real == pytest.approx(1.0)

    def test_rate_monotonic_in_visibility(self):
        n = 100_000
        rng = np.random.default_rng(5)
        inputs = np.tile(qs.POL_VECTORS["D"], (n, 1))
        pairs = np.tile(qs.PHI_PLUS.vector, (n, 1))
        rates = []
        for vis in (0.0, 0.5, 1.0):
            herald, *_ = hom_bsm_batch(inputs, pairs, vis, rng.random((n, 4)))
            rates.append(herald.mean())
        sigma = np.sqrt(0.25 * 0.75 / n)
        assert rates[1] >= rates[0] - 3 * sigma
        assert rates[2] >= rates[1] - 3 * sigma
        assert rates[2] == pytest.approx(0.25, abs=4 * sigma)

    @pytest.mark.parametrize("label", CARDINAL)
    def test_bob_ensemble_is_bit_flip(self, label):
        vec = qs.POL_VECTORS[label]
        n = 420_000
        rng = np.random.default_rng(hash(label) % 2 ** 32)
        herald, genuine, bob, _ = hom_bsm_batch(
            np.tile(vec, (n, 1)), np.tile(qs.PHI_PLUS.vector, (n, 1)), 1.0, rng.random((n, 4)))
        assert herald.sum() >= 100_000
        states = bob[herald]
        ensemble = np.einsum("ni,nj->ij", states, states.conj()) / len(states)
        target = qs.SIGMA_X @ vec
        assert qs.trace_distance(ensemble, np.outer(target, target.conj())) < 0.01

    def test_scalar_and_batch_agree(self):
        vec = qs.POL_VECTORS["R"]
        cfg = BSMConfig(visibility=0.6)
        rate_scalar = np.mean([hom_bsm(pol("R"), 0.0, PHI, cfg, seed=s) is not None for s in range(4000)])
        n = 200_000
        herald, *_ = hom_bsm_batch(np.tile(vec, (n, 1)), np.tile(qs.PHI_PLUS.vector, (n, 1)), 0.6,
                                   np.random.default_rng(1).random((n, 4)))
        assert rate_scalar == pytest.approx(herald.mean(), abs=4 * np.sqrt(0.19 / 4000))


class TestAnalyzer:
    def test_h_in_hv(self):
        for s in range(50):
            outcome, post = analyze_polarization(qs.PolState.from_label("H"), "HV", seed=s)
            assert outcome == 0
            assert qs.projector_equal(post, qs.PolState.from_label("H"))

    def test_h_in_da(self):
        outcomes = [analyze_polarization(qs.PolState.from_label("H"), "DA", seed=s)[0] for s in range(4000)]
        assert np.mean(np.array(outcomes) == 0) == pytest.approx(0.5, abs=0.03)

    def test_invalid_basis(self):
        with pytest.raises(ValidationError):
            analyze_polarization(qs.PolState.from_label("H"), "XY", seed=0)

    def test_pair_da_correlated(self):
        for s in range(200):
            a, b = analyze_pair(PHI, "DA", "DA", seed=s)
            assert a == b


class TestDetector:
    def test_identity(self):
        t = np.sort(np.random.default_rng(0).uniform(0, 1e6, 1000))
        tags = detect(t, DetectorParams(jitter_sigma=0.0), channel=2, rng=np.random.default_rng(1))
        assert np.array_equal(tags["t"], np.rint(t).astype(np.int64))
        assert np.all(tags["channel"] == 2)

    def test_jitter_std(self):
        t = np.arange(100_000) * 1e4
        tags = detect(t, DetectorParams(jitter_sigma=100.0), channel=0, rng=np.random.default_rng(2))
        assert np.std(tags["t"] - t) == pytest.approx(100.0, rel=0.03)

    def test_dark_counts(self):
        rate, span = 5e4, 1e12  # 1 s
        tags = detect([], DetectorParams(dark_rate=rate), channel=1, rng=np.random.default_rng(3),
                      t_range=(0.0, span))
        expected = rate * span * 1e-12
        assert abs(len(tags) - expected) < 4 * np.sqrt(expected)
        assert np.all(np.diff(tags["t"]) >= 0)

    def test_efficiency(self):
        tags = detect(np.arange(100_000.0), DetectorParams(efficiency=0.3, jitter_sigma=0.0), 0,
                      np.random.default_rng(4))
        assert len(tags) == pytest.approx(30_000, abs=4 * np.sqrt(100_000 * 0.21))

    def test_dead_time(self):
        t = np.array([0.0, 10.0, 50.0, 120.0, 130.0])
        tags = detect(t, DetectorParams(jitter_sigma=0.0, dead_time=100.0), 0, np.random.default_rng(0))
        assert list(tags["t"]) == [0, 120]

    def test_zero_jitter_preserves_order(self):
        t = np.sort(np.random.default_rng(7).uniform(0, 1e5, 5000))
        flags = (np.arange(5000) % 2).astype(np.uint8)
        tags = detect(t, DetectorParams(jitter_sigma=0.0), 0, np.random.default_rng(1), flags=flags)
        assert np.array_equal(tags["flags"], flags)

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            DetectorParams(efficiency=1.2)
        with pytest.raises(ValidationError):
            DetectorParams(dead_time=-1.0)


def test_tag_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    a = detect(np.sort(rng.uniform(0, 1e6, 300)), DetectorParams(), 0, rng)
    b = detect(np.sort(rng.uniform(0, 1e6, 300)), DetectorParams(), 3, rng, flags=np.ones(300, np.uint8))
    tags = merge_tags(a, b)
    path = tmp_path / "run.qtt"
    write_tags(path, tags, duration=1_000_000)
    assert path.stat().st_size == 16 + 12 * len(tags)
    assert path.read_bytes()[:4] == b"QTT1"
    back, duration = read_tags(path)
    assert duration == 1_000_000
    assert back.tobytes() == tags.tobytes()


def test_tag_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.qtt"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValidationError):
        read_tags(path)

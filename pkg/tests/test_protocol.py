import numpy as np
import pytest

from dpsqkd.bounds import closed_form_Q
from dpsqkd.oracle import channel_detection_stats
from dpsqkd.protocol import (
    SIM_CSV_HEADER,
    OutcomeTable,
    ProtocolConfig,
    ProtocolTally,
    run_protocol,
    sample_block,
    simulate_csv,
)
from dpsqkd.source import CoherentSourceSpec


SPEC = CoherentSourceSpec(0.05, 0.0)


@pytest.fixture(scope="module")
def table() -> OutcomeTable:
    return OutcomeTable.from_channel(SPEC, 0.5)


class TestOutcomeTable:
    def test_row_sums_are_detection_probability(self, table):
        q = closed_form_Q(0.5, 0.05)
        assert np.allclose(table.probs.sum(axis=1), q, atol=1e-9)

    def test_negative_probability_rejected(self):
        probs = np.zeros((8, 4))
        probs[0, 0] = -0.1
        with pytest.raises(ValueError):
            OutcomeTable(probs)

    def test_oversized_row_rejected(self):
        probs = np.full((8, 4), 0.3)
        with pytest.raises(ValueError):
            OutcomeTable(probs)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            OutcomeTable(np.zeros((4, 4)))

    def test_ordered_cdf_monotone(self, table):
        cdf = table.ordered_cdf()
        assert np.all(np.diff(cdf, axis=1) >= -1e-15)
        assert np.all(cdf[:, -1] <= 1.0 + 1e-12)


class TestSampleBlock:
    def test_zero_mass_never_detects(self):
        dist = OutcomeTable(np.zeros((8, 4)))
        rng = np.random.default_rng(0)
        for _ in range(50):
            out = sample_block(dist, rng)
            assert not out.detected
            assert out.bob_bit == -1

    def test_replay_determinism(self, table):
        rng = np.random.default_rng(7)
        run1 = [sample_block(table, rng) for _ in range(200)]
        rng = np.random.default_rng(7)
        run2 = [sample_block(table, rng) for _ in range(200)]
        assert run1 == run2

    def test_alice_bit_is_adjacent_parity(self, table):
        rng = np.random.default_rng(3)
        seen_detected = 0
        for _ in range(2000):
            out = sample_block(table, rng)
            if out.detected:
                seen_detected += 1
                bits = ((out.pattern >> 2) & 1, (out.pattern >> 1) & 1, out.pattern & 1)
                assert out.alice_bit == bits[out.slot - 1] ^ bits[out.slot]
        assert seen_detected > 0

    def test_ideal_channel_bits_agree(self, table):
        rng = np.random.default_rng(5)
        for _ in range(2000):
            out = sample_block(table, rng)
            if out.detected:
                assert out.bob_bit == out.alice_bit

    def test_empirical_detection_fraction(self, table):
        rng = np.random.default_rng(11)
        n = 20_000
        detected = sum(sample_block(table, rng).detected for _ in range(n))
        q = closed_form_Q(0.5, 0.05)
        sigma = np.sqrt(q * (1 - q) / n)
        assert abs(detected / n - q) < 3 * sigma

    def test_malformed_distribution_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_block(np.full((8, 4), 0.5), rng)


class TestRunProtocol:
    def test_deterministic(self, table):
        cfg = ProtocolConfig(50_000, SPEC, 0.5, seed=99)
        assert run_protocol(cfg, table) == run_protocol(cfg, table)

    def test_ideal_channel_no_errors(self, table):
        cfg = ProtocolConfig(50_000, SPEC, 0.5, seed=1)
        tally = run_protocol(cfg, table)
        assert tally.n_sample_errors == 0
        assert tally.ebit_hat == 0.0
        assert tally.n_detected > 0

    def test_detection_fraction_within_three_sigma(self):
        cfg = ProtocolConfig(10**6, SPEC, 0.5, seed=13)
        tally = run_protocol(cfg)
        q, _ = channel_detection_stats(SPEC, 0.5)
        sigma = np.sqrt(q * (1 - q) / cfg.n_blocks)
        assert abs(tally.q_hat - q) < 3 * sigma

    def test_counts_add_up(self, table):
        cfg = ProtocolConfig(30_000, SPEC, 0.5, seed=21, sample_fraction=0.1)
        tally = run_protocol(cfg, table)
        assert sum(tally.counts_by_outcome) == tally.n_detected
        assert tally.sifted_length == tally.n_detected - tally.n_sampled
        assert tally.n_emitted == 30_000

    def test_misalignment_produces_errors(self):
        spec = CoherentSourceSpec(0.05, 0.0)
        cfg = ProtocolConfig(200_000, spec, 0.5, misalignment_phase=0.3, seed=5)
        tally = run_protocol(cfg)
        expected = np.sin(0.15) ** 2
        sigma = np.sqrt(expected / max(tally.n_sampled, 1))
        assert abs(tally.ebit_hat - expected) < 4 * sigma

    def test_ebit_override_injects_errors(self, table):
        cfg = ProtocolConfig(200_000, SPEC, 0.5, seed=17, ebit_override=0.1)
        tally = run_protocol(cfg, table)
        sigma = np.sqrt(0.1 * 0.9 / tally.n_sampled)
        assert abs(tally.ebit_hat - 0.1) < 4 * sigma

    def test_key_monotone_in_misalignment(self):
        spec = CoherentSourceSpec(0.01, 0.0)
        keys = []
        for phi in (0.0, 0.1, 0.2, 0.4):
            cfg = ProtocolConfig(200_000, spec, 1.0, misalignment_phase=phi, seed=123)
            keys.append(run_protocol(cfg).final_key_bits)
        assert keys[0] > 0.0
        assert all(k1 >= k2 for k1, k2 in zip(keys, keys[1:]))

    def test_heavy_sampling_starves_the_key(self, table):
        cfg = ProtocolConfig(20_000, SPEC, 0.5, seed=31, sample_fraction=0.999)
        tally = run_protocol(cfg, table)
        assert tally.sifted_length <= tally.n_detected * 0.05
        assert tally.final_key_bits <= tally.sifted_length

    def test_no_detections_flag(self):
        spec = CoherentSourceSpec(1e-6, 0.0)
        cfg = ProtocolConfig(100, spec, 1e-6, seed=3)
        tally = run_protocol(cfg)
        assert tally.no_detections
        assert tally.final_key_bits == 0.0
        assert tally.eph_upper == 1.0

    def test_detections_independent_of_sampling_stream(self, table):
        base = ProtocolConfig(40_000, SPEC, 0.5, seed=77, sample_fraction=0.05)
        heavy = ProtocolConfig(40_000, SPEC, 0.5, seed=77, sample_fraction=0.5)
        t1, t2 = run_protocol(base, table), run_protocol(heavy, table)
        assert t1.n_detected == t2.n_detected
        assert t1.counts_by_outcome == t2.counts_by_outcome

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ProtocolConfig(0, SPEC, 0.5)
        with pytest.raises(ValueError):
            ProtocolConfig(10, SPEC, 1.5)
        with pytest.raises(ValueError):
            ProtocolConfig(10, SPEC, 0.5, sample_fraction=1.0)
        with pytest.raises(ValueError):
            ProtocolConfig(10, SPEC, 0.5, ebit_override=1.5)


class TestTallyOutput:
    def test_record_round_trip_fields(self, table):
        cfg = ProtocolConfig(10_000, SPEC, 0.5, seed=2)
        tally = run_protocol(cfg, table)
        record = tally.to_record()
        assert "n_emitted=10000" in record
        assert "count_slot1_bit0=" in record
        parsed = dict(line.split("=") for line in record.strip().splitlines())
        assert int(parsed["n_detected"]) == tally.n_detected
        assert float(parsed["rate_per_pulse"]) == tally.rate_per_pulse

    def test_csv_header_frozen(self):
        assert SIM_CSV_HEADER == (
            "n_blocks,eta,mu,a_percent,seed,Q_hat,ebit_hat,sifted,ec_bits,pa_bits,key_bits,rate_per_pulse"
        )

    def test_csv_row(self, table):
        cfg = ProtocolConfig(10_000, SPEC, 0.5, seed=2)
        tally = run_protocol(cfg, table)
        text = simulate_csv(cfg, tally)
        header, row = text.strip().split("\n")
        assert header == SIM_CSV_HEADER
        values = row.split(",")
        assert int(values[0]) == 10_000
        assert float(values[5]) == tally.q_hat
        assert float(values[-1]) == tally.rate_per_pulse

    def test_tally_invariants_enforced(self):
        with pytest.raises(ValueError):
            ProtocolTally(
                n_emitted=10, n_detected=20, counts_by_outcome=(0, 0, 0, 0),
                n_sampled=0, n_sample_errors=0, sifted_length=20, q_hat=1.0,
                ebit_hat=0.0, eph_upper=0.1, ec_cost_bits=0.0, pa_removed_bits=0.0,
                final_key_bits=0.0, rate_per_pulse=0.0,
            )

"""
synth のテスト — シナリオ・チャネルモデル・合成キャプチャ
"""
from dataclasses import replace

import numpy as np
import pytest

from capture_ingest import read_capture
from errors import ConfigError, ShapeError
from respiration import FLAG_DEGENERATE, PipelineConfig, sliding_estimate
from synth import (
    BreathingScenario,
    frame_times,
    generate_capture,
    generate_channel_at,
    ground_truth,
    make_channel_model,
    read_scenario,
    scenario_from_dict,
    scenario_path,
    scenario_to_dict,
    sweep_snr,
)

CFG = PipelineConfig()
SMALL = BreathingScenario(duration=60.0, n_rows=4, n_cols=4, n_subcarriers=60, seed=7)


class TestScenario:
    def test_defaults(self):
        s = BreathingScenario()
        assert s.dims == (4, 4, 250)
        assert (s.quantization.b_psi, s.quantization.b_phi) == (4, 6)
        assert s.duration == 300.0
        assert s.feedback_interval_mean == 0.2

    @pytest.mark.parametrize("kw", [
        {"rate": -1.0},
        {"duration": 0.0},
        {"feedback_interval_jitter": 0.2},
        {"breathing_gain": -0.1},
        {"noise_sigma": -0.1},
        {"n_subcarriers": 0},
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            BreathingScenario(**kw)

    def test_rejects_bad_dims(self):
        with pytest.raises(ShapeError):
            BreathingScenario(n_rows=2, n_cols=3)

    def test_dict_round_trip(self):
        s = replace(SMALL, rate=0.0, noise_sigma=0.5)
        assert scenario_from_dict(scenario_to_dict(s)) == s

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            scenario_from_dict({"rate": 15.0, "distance": 2.0})


class TestChannel:
    def test_static_without_gain_or_noise(self):
        s = replace(SMALL, breathing_gain=0.0, noise_sigma=0.0)
        model = make_channel_model(s, np.random.default_rng(0))
        for t in (0.0, 1.3, 42.0):
            np.testing.assert_array_equal(generate_channel_at(t, model, s), model.static_h)

    def test_period_is_four_seconds_at_15(self):
        s = replace(SMALL, noise_sigma=0.0)
        model = make_channel_model(s, np.random.default_rng(0))
        np.testing.assert_allclose(generate_channel_at(1.0, model, s), generate_channel_at(5.0, model, s), atol=1e-12)
        assert not np.allclose(generate_channel_at(1.0, model, s), generate_channel_at(2.0, model, s))

    def test_direction_is_unit_norm(self):
        model = make_channel_model(SMALL, np.random.default_rng(0))
        norms = np.linalg.norm(model.breathing_direction, axis=(1, 2))
        np.testing.assert_allclose(norms, 1.0)
        assert model.static_h.shape == (60, 4, 4)

    def test_seeded_sequences_match(self):
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        ma, mb = make_channel_model(SMALL, a), make_channel_model(SMALL, b)
        np.testing.assert_array_equal(generate_channel_at(2.0, ma, SMALL, a), generate_channel_at(2.0, mb, SMALL, b))


class TestCapture:
    def test_frame_count_without_jitter(self):
        s = BreathingScenario(feedback_interval_jitter=0.0, n_rows=2, n_cols=2, n_subcarriers=1)
        assert len(frame_times(s, np.random.default_rng(0))) == 1500
        assert len(generate_capture(s).records) == 1500

    def test_jittered_times_are_increasing(self):
        times = frame_times(BreathingScenario(), np.random.default_rng(1))
        assert times[0] == 0.0
        assert np.all(np.diff(times) > 0.15)
        assert times[-1] < 300.0

    def test_full_dims_fixture_round_trip(self, tmp_path):
        s = BreathingScenario(duration=1.0, feedback_interval_jitter=0.0)
        out = str(tmp_path / "cap.jsonl")
        stream = generate_capture(s, out_path=out)
        back = read_capture(out)
        assert back.records[0].n_subcarriers == 250
        assert len(back.records) == len(stream.records) == 5
        assert back.duration == 1.0
        assert read_scenario(scenario_path(out)) == s

    def test_pcap_output(self, tmp_path):
        s = replace(SMALL, duration=2.0)
        out = str(tmp_path / "cap.pcap")
        stream = generate_capture(s, out_path=out, fmt="pcap")
        back = read_capture(out)
        assert len(back.records) == len(stream.records)
        assert all(a.same_angles(b) for a, b in zip(stream.records, back.records))

    def test_static_scene_repeats_angles(self):
        s = replace(SMALL, breathing_gain=0.0, noise_sigma=0.0)
        stream = generate_capture(s)
        first = stream.records[0]
        assert all(r.same_angles(first) for r in stream.records)
        estimates = sliding_estimate(stream, CFG)
        assert len(estimates) == 1
        assert not estimates[0].detected
        assert FLAG_DEGENERATE in estimates[0].flags

    def test_byte_identical_for_same_seed(self, tmp_path):
        s = replace(SMALL, duration=3.0)
        a, b = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
        generate_capture(s, out_path=a)
        generate_capture(s, out_path=b)
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

    def test_short_breathing_capture(self):
        stream = generate_capture(replace(SMALL, duration=70.0))
        estimates = sliding_estimate(stream, CFG, workers=2)
        assert len(estimates) == 11
        assert sum(e.rate == 15.0 for e in estimates) >= 9


class TestGroundTruth:
    def test_300s(self):
        truth = ground_truth(BreathingScenario(), CFG)
        assert len(truth) == 241
        assert {rate for _, rate in truth} == {15.0}

    def test_breath_hold(self):
        assert {rate for _, rate in ground_truth(BreathingScenario(rate=0.0), CFG)} == {0.0}

    def test_single_window(self):
        assert ground_truth(replace(SMALL, duration=60.0), CFG) == [(0.0, 15.0)]


class TestSweep:
    def test_rows_per_ratio_and_seed(self):
        base = replace(SMALL, n_subcarriers=20)
        rows = sweep_snr([10.0, 1.0], [1, 2], base, CFG, workers=1)
        assert [(r["ratio"], r["seed"]) for r in rows] == [(10.0, 1), (10.0, 2), (1.0, 1), (1.0, 2)]
        assert all(r["rmse"] >= 0.0 for r in rows)

    def test_rejects_non_positive_ratio(self):
        with pytest.raises(ConfigError):
            sweep_snr([0.0], [1], SMALL, CFG)

"""
BreathBFM Synth — 正解付き合成キャプチャ生成
静的マルチパス CSI + 呼吸正弦波摂動 + 雑音 → SVD の右特異行列 V → Givens 分解 → 量子化

CSI の向きは H: n_cols x n_rows (STA x AP)、V: n_rows x n_cols。
乱数は seed から作る 1 本のストリームだけを使うので、同じシナリオは同じ出力になる。
"""
import json
import math
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np

import config
from bfm_codec import QuantizationConfig, check_dims, decompose_batch
from capture_ingest import BfmFrameRecord, CaptureStream, write_capture
from errors import ConfigError, SynthesisError
from respiration import PipelineConfig, rmse, sliding_estimate, window_starts

STA_MAC = bytes.fromhex("020000000002")
AP_MAC  = bytes.fromhex("020000000001")


# ═══════════════════════════════════════════
#  1. シナリオ / チャネルモデル
# ═══════════════════════════════════════════
@dataclass(frozen=True)
class BreathingScenario:
    """rate = 0 は息止め。既定値は 300 s / 0.20 s 間隔 / 4x4x250。"""
    rate: float = 15.0
    duration: float = config.CAPTURE_DURATION
    feedback_interval_mean: float = config.FEEDBACK_INTERVAL
    feedback_interval_jitter: float = config.SYNTH_JITTER
    breathing_gain: float = config.SYNTH_BREATHING_GAIN
    noise_sigma: float = config.SYNTH_NOISE_SIGMA
    seed: int = config.SYNTH_SEED
    n_rows: int = config.N_AP
    n_cols: int = config.N_STA
    n_subcarriers: int = config.N_SC
    b_psi: int = config.DEFAULT_PRESET[0]
    b_phi: int = config.DEFAULT_PRESET[1]

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError(f"rate must be >= 0 (got {self.rate})")
        if not self.duration > 0:
            raise ConfigError(f"duration must be > 0 (got {self.duration})")
        if not 0 <= self.feedback_interval_jitter < self.feedback_interval_mean:
            raise ConfigError("need 0 <= feedback_interval_jitter < feedback_interval_mean")
        if self.breathing_gain < 0 or self.noise_sigma < 0:
            raise ConfigError("breathing_gain and noise_sigma must be >= 0")
        if self.n_subcarriers < 1:
            raise ConfigError("n_subcarriers must be >= 1")
        check_dims(self.n_rows, self.n_cols)
        self.quantization  # b_phi / b_psi の検証

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n_rows, self.n_cols, self.n_subcarriers)

    @property
    def quantization(self) -> QuantizationConfig:
        return QuantizationConfig.from_pair(self.b_psi, self.b_phi)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BreathingScenario":
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid scenario: {e}")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    static_h: np.ndarray             # (n_subcarriers, n_cols, n_rows)
    breathing_direction: np.ndarray  # 同形、サブキャリアごとに Frobenius ノルム 1


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def make_channel_model(scenario: BreathingScenario, rng: np.random.Generator) -> ChannelModel:
    shape = (scenario.n_subcarriers, scenario.n_cols, scenario.n_rows)
    static_h = _complex_gaussian(rng, shape)
    direction = _complex_gaussian(rng, shape)
    direction /= np.linalg.norm(direction, axis=(1, 2), keepdims=True)
    return ChannelModel(static_h=static_h, breathing_direction=direction)


def generate_channel_at(t: float, model: ChannelModel, scenario: BreathingScenario,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """H(t) = static + gain * sin(2 pi (rate/60) t) * direction + noise_sigma * CN(0, 1)"""
    h = model.static_h.copy()
    if scenario.rate > 0 and scenario.breathing_gain > 0:
        h += scenario.breathing_gain * math.sin(2.0 * math.pi * scenario.rate / 60.0 * t) * model.breathing_direction
    if scenario.noise_sigma > 0:
        if rng is None:
            raise SynthesisError("noise_sigma > 0 needs a random generator")
        h += scenario.noise_sigma * _complex_gaussian(rng, h.shape)
    return h


def frame_times(scenario: BreathingScenario, rng: np.random.Generator) -> list[float]:
    """t_0 = 0, t_{i+1} = t_i + mean + U(-jitter, +jitter)、duration 未満まで"""
    times = []
    jitter_sum = 0.0
    i = 0
    while True:
        t = i * scenario.feedback_interval_mean + jitter_sum
        if t >= scenario.duration - 1e-9:
            break
        times.append(t)
        if scenario.feedback_interval_jitter > 0:
            jitter_sum += rng.uniform(-scenario.feedback_interval_jitter, scenario.feedback_interval_jitter)
        i += 1
    return times


def _right_singular(h: np.ndarray) -> np.ndarray:
    """H = U S V^H の V (列は特異値の降順)。(S, n_cols, n_rows) → (S, n_rows, n_cols)"""
    _, _, vh = np.linalg.svd(h, full_matrices=False)
    return np.conj(np.swapaxes(vh, -1, -2))


# ═══════════════════════════════════════════
#  2. キャプチャ生成
# ═══════════════════════════════════════════
def generate_capture(scenario: BreathingScenario, out_path: str | None = None,
                     fmt: str = "fixture", verbose: bool = False) -> CaptureStream:
    """out_path を渡すとキャプチャ (fmt: fixture | pcap) とサイドカー JSON も書き出す。"""
    rng = np.random.default_rng(scenario.seed)
    model = make_channel_model(scenario, rng)
    qc = scenario.quantization
    times = frame_times(scenario, rng)

    records = []
    for t in times:
        for attempt in range(config.SVD_MAX_RETRIES + 1):
            h = generate_channel_at(t, model, scenario, rng)
            try:
                v = _right_singular(h)
                break
            except np.linalg.LinAlgError:
                if verbose:
                    print(f"  [RETRY {attempt + 1}] SVD did not converge at t={t:.3f}s", file=sys.stderr, flush=True)
        else:
            raise SynthesisError(f"SVD did not converge at t={t:.3f}s after {config.SVD_MAX_RETRIES} retries")
        phi, psi = decompose_batch(v, qc)
        records.append(BfmFrameRecord(
            timestamp=t,
            n_rows=scenario.n_rows,
            n_cols=scenario.n_cols,
            config=qc,
            phi_indices=phi,
            psi_indices=psi,
            source=STA_MAC,
            dest=AP_MAC,
        ))

    if verbose:
        print(f"  [SYNTH] {len(records)} frames, rate {scenario.rate:g} breaths/minute, "
              f"dims {scenario.n_rows}x{scenario.n_cols}x{scenario.n_subcarriers}", file=sys.stderr, flush=True)
    stream = CaptureStream(
        records=tuple(records),
        source=f"synth:rate={scenario.rate:g},seed={scenario.seed}",
        parsed=len(records),
        duration=scenario.duration,
    )
    if out_path:
        write_capture(stream, out_path, fmt)
        write_scenario(scenario, scenario_path(out_path))
    return stream


def ground_truth(scenario: BreathingScenario, cfg: PipelineConfig) -> list[tuple[float, float]]:
    """sliding_estimate と同じ窓ごとの一定呼吸数"""
    return [(start, float(scenario.rate)) for start in window_starts(scenario.duration, cfg)]


# ═══════════════════════════════════════════
#  3. サイドカー JSON
# ═══════════════════════════════════════════
def scenario_to_dict(scenario: BreathingScenario) -> dict:
    return scenario.to_dict()


def scenario_from_dict(data: dict) -> BreathingScenario:
    return BreathingScenario.from_dict(data)


def scenario_path(out_path: str) -> str:
    return out_path + ".scenario.json"


def write_scenario(scenario: BreathingScenario, path: str):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(scenario), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def read_scenario(path: str) -> BreathingScenario:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not JSON ({e.msg})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(data)


# ═══════════════════════════════════════════
#  4. SNR スイープ (LOS からの距離の代わり)
# ═══════════════════════════════════════════
def sweep_snr(ratios: list[float], seeds: list[int], base: BreathingScenario,
              cfg: PipelineConfig, workers: int | None = None,
              verbose: bool = False) -> list[dict]:
    """breathing_gain / noise_sigma の比ごとに RMSE を測る。比が小さいほど遠い被験者に相当。"""
    if base.breathing_gain <= 0:
        raise ConfigError("sweep needs breathing_gain > 0")
    rows = []
    for ratio in ratios:
        if ratio <= 0:
            raise ConfigError(f"gain/noise ratio must be > 0 (got {ratio})")
        for seed in seeds:
            scenario = replace(base, noise_sigma=base.breathing_gain / ratio, seed=seed)
            stream = generate_capture(scenario)
            estimates = sliding_estimate(stream, cfg, workers=workers)
            err = rmse(estimates, ground_truth(scenario, cfg))
            rows.append({"ratio": ratio, "seed": seed, "rmse": err})
            if verbose:
                print(f"  [SWEEP] ratio={ratio:g} seed={seed} rmse={err:.3f}", file=sys.stderr, flush=True)
    return rows


if __name__ == "__main__":
    demo = BreathingScenario(duration=70.0, n_subcarriers=60)
    cfg = PipelineConfig()
    stream = generate_capture(demo, verbose=True)
    estimates = sliding_estimate(stream, cfg, verbose=True)
    print(f"RMSE: {rmse(estimates, ground_truth(demo, cfg)):.3f} breaths/minute")

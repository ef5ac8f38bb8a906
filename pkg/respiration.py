"""
BreathBFM Respiration Pipeline — 呼吸数推定エンジン
時間窓 → BFM 振幅行列 → PCA 第 1 主成分 → 線形補間 → DFT → バンドパス → ピーク/平均 判定

全関数は純関数。sliding_estimate の各窓は独立しているのでスレッドで並列評価し、
出力は常に window_start 順に並べる。
"""
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import signal
from scipy.fft import rfft
from sklearn.decomposition import PCA

import config
from bfm_codec import reconstruct_batch
from errors import (
    AlignmentError,
    ConfigError,
    DegenerateError,
    InsufficientDataError,
    ShapeError,
    WindowRangeError,
)

# 総分散 / (1 フレームあたりの二乗和) がこれ以下なら定数入力とみなす
DEGENERATE_RTOL = 1e-20
# 周波数・時刻比較の丸め許容
EPS = 1e-9
# 1 回の再構成でまとめるフレーム数 (メモリ上限)
RECONSTRUCT_CHUNK = 256

FLAG_INSUFFICIENT = "insufficient-frames"
FLAG_DEGENERATE   = "degenerate"
FLAG_LOW_CONF     = "low-confidence"
FLAG_NON_MONO     = "non-monotonic-time"


# ═══════════════════════════════════════════
#  1. 設定
# ═══════════════════════════════════════════
@dataclass(frozen=True)
class PipelineConfig:
    """既定値は config.py。taper / zero_pad は既定で無効。"""
    window_length: float = config.WINDOW_LENGTH
    window_step: float = config.WINDOW_STEP
    interp_interval: float = config.INTERP_INTERVAL
    band_low: float = config.BAND_LOW
    band_high: float = config.BAND_HIGH
    theta: float = config.THETA
    taper: str | None = None
    zero_pad: int = 1
    gap_limit: float = config.GAP_LIMIT

    def __post_init__(self):
        if not self.window_length > 0:
            raise ConfigError(f"window_length must be > 0 (got {self.window_length})")
        if not 0 < self.window_step <= self.window_length:
            raise ConfigError(f"window_step must be in (0, window_length] (got {self.window_step})")
        if not self.interp_interval > 0:
            raise ConfigError(f"interp_interval must be > 0 (got {self.interp_interval})")
        nyquist = 60.0 / (2.0 * self.interp_interval)
        if not 0 < self.band_low < self.band_high < nyquist:
            raise ConfigError(
                f"band must satisfy 0 < band_low < band_high < {nyquist:g} breaths/minute "
                f"(got [{self.band_low}, {self.band_high}])"
            )
        if self.theta < 0:
            raise ConfigError(f"theta must be >= 0 (got {self.theta})")
        if not isinstance(self.zero_pad, int) or self.zero_pad < 1:
            raise ConfigError(f"zero_pad must be an integer >= 1 (got {self.zero_pad})")
        if self.taper is not None:
            try:
                signal.get_window(self.taper, 8)
            except (ValueError, TypeError):
                raise ConfigError(f"unknown taper window: {self.taper}")
        if self.n_interp < 2:
            raise ConfigError("window_length / interp_interval must give at least 2 samples")

    @property
    def n_interp(self) -> int:
        return int(math.floor(self.window_length / self.interp_interval + EPS))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_sources(cls, file_path: str | None = None, overrides: dict | None = None) -> "PipelineConfig":
        """既定値 < JSON 設定ファイル < コマンドライン の順に上書き"""
        values = asdict(cls())
        known = {f.name for f in fields(cls)}
        if file_path:
            with open(file_path, encoding="utf-8") as f:
                try:
                    loaded = json.load(f)
                except json.JSONDecodeError as e:
                    raise ConfigError(f"{file_path}: not JSON ({e.msg})")
            if not isinstance(loaded, dict):
                raise ConfigError(f"{file_path}: config file must hold a JSON object")
            for key in loaded:
                if key not in known:
                    raise ConfigError(f"{file_path}: unknown config key '{key}'")
            values.update(loaded)
        for key, v in (overrides or {}).items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            if v is not None:
                values[key] = v
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e))


# ═══════════════════════════════════════════
#  2. 型
# ═══════════════════════════════════════════
@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """N_frame x (n_rows * n_cols * n_subcarriers) の |V| 行列。
    列順: サブキャリア優先、その中は行列要素の行優先。"""
    values: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.timestamps):
            raise ShapeError(
                f"feature rows ({self.values.shape}) must match timestamps ({len(self.timestamps)})"
            )

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def rows(self, lo: int, hi: int) -> "FeatureMatrix":
        return FeatureMatrix(self.values[lo:hi], self.timestamps[lo:hi])

    def scaled(self, c: float) -> "FeatureMatrix":
        return FeatureMatrix(self.values * c, self.timestamps)


@dataclass(frozen=True, eq=False)
class PrincipalSeries:
    scores: np.ndarray
    contribution_rates: np.ndarray
    loading: np.ndarray
    component_scores: np.ndarray | None = None  # (n_frames, n_components)、列ごとに符号固定


@dataclass(frozen=True, eq=False)
class UniformSeries:
    values: np.ndarray
    step: float
    start: float = 0.0
    extrapolated: int = 0


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: np.ndarray
    bin_width: float

    @property
    def frequencies(self) -> np.ndarray:
        """各ビンの周波数 [breaths/minute]"""
        return np.arange(len(self.magnitudes)) * self.bin_width


@dataclass(frozen=True)
class RespirationEstimate:
    window_start: float
    detected: bool
    rate: float
    ratio: float
    flags: tuple[str, ...] = ()
    n_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "window_start": self.window_start,
            "detected": self.detected,
            "rate": self.rate,
            "ratio": self.ratio,
            "flags": "|".join(self.flags),
            "n_frames": self.n_frames,
        }


@dataclass(frozen=True, eq=False)
class WindowTrace:
    """1 窓分の中間結果 (プロット用コマンドで使う)"""
    estimate: RespirationEstimate
    principal: PrincipalSeries | None = None
    uniform: UniformSeries | None = None
    spectrum: Spectrum | None = None
    filtered: Spectrum | None = None
    timestamps: np.ndarray | None = None  # 重複除去後のフレーム時刻


# ═══════════════════════════════════════════
#  3. 前処理
# ═══════════════════════════════════════════
def build_feature_matrix(frames) -> FeatureMatrix:
    """BFM を再構成し、振幅をサブキャリア優先・行優先の並びに平坦化する。"""
    frames = list(frames)
    if not frames:
        raise InsufficientDataError("no frames to arrange")
    layout = frames[0].layout()
    for rec in frames[1:]:
        if rec.layout() != layout:
            raise ShapeError(
                f"mixed frame layouts: {layout[:2]}x{layout[3]} vs {rec.layout()[:2]}x{rec.layout()[3]}"
            )
    timestamps = np.array([rec.timestamp for rec in frames], dtype=np.float64)
    if np.any(np.diff(timestamps) < 0):
        raise ShapeError("frames must be sorted by timestamp")

    n_rows, n_cols, qc, n_sc = layout
    values = np.empty((len(frames), n_sc * n_rows * n_cols), dtype=np.float64)
    for lo in range(0, len(frames), RECONSTRUCT_CHUNK):
        chunk = frames[lo:lo + RECONSTRUCT_CHUNK]
        phi = np.stack([rec.phi_indices for rec in chunk])
        psi = np.stack([rec.psi_indices for rec in chunk])
        v = reconstruct_batch(n_rows, n_cols, phi, psi, qc)  # (n, n_sc, n_rows, n_cols)
        values[lo:lo + len(chunk)] = np.abs(v).reshape(len(chunk), -1)
    return FeatureMatrix(values, timestamps)


def apply_pca(m: FeatureMatrix) -> PrincipalSeries:
    """窓平均で中心化し、標本共分散の最大固有ベクトルへの射影を返す。
    負荷量の絶対値最大成分が正になるよう符号を固定する。"""
    x = np.asarray(m.values, dtype=np.float64)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"PCA needs at least 2 frames (got {x.shape[0]})")
    centered = x - x.mean(axis=0)
    total_var = float((centered ** 2).sum()) / (x.shape[0] - 1)
    energy = float((x ** 2).sum()) / x.shape[0]
    if total_var <= DEGENERATE_RTOL * energy:
        raise DegenerateError("feature matrix has zero total variance (constant input)")

    pca = PCA(svd_solver="full")
    pca.fit(x)
    components = pca.components_.copy()
    pivots = np.argmax(np.abs(components), axis=1)
    components[components[np.arange(len(components)), pivots] < 0] *= -1.0
    component_scores = centered @ components.T
    return PrincipalSeries(
        scores=component_scores[:, 0],
        contribution_rates=np.asarray(pca.explained_variance_ratio_, dtype=np.float64),
        loading=components[0],
        component_scores=component_scores,
    )


def interpolate_uniform(scores, timestamps, cfg: PipelineConfig, start: float | None = None) -> UniformSeries:
    """t0 + k*step (k = 0..N_interp-1) で線形補間。範囲外は端の値を保持する。"""
    t = np.asarray(timestamps, dtype=np.float64)
    y = np.asarray(scores, dtype=np.float64)
    if len(t) < 2 or len(y) != len(t):
        raise InsufficientDataError(f"interpolation needs >= 2 matching points (got {len(t)}/{len(y)})")
    if np.any(np.diff(t) <= 0):
        raise ShapeError("timestamps must be strictly increasing")
    t0 = t[0] if start is None else float(start)
    grid = t0 + np.arange(cfg.n_interp) * cfg.interp_interval
    values = np.interp(grid, t, y)
    extrapolated = int(np.count_nonzero(grid > t[-1]) + np.count_nonzero(grid < t[0]))
    return UniformSeries(values=values, step=cfg.interp_interval, start=t0, extrapolated=extrapolated)


# ═══════════════════════════════════════════
#  4. 周波数領域
# ═══════════════════════════════════════════
def compute_spectrum(u: UniformSeries, cfg: PipelineConfig | None = None) -> Spectrum:
    """|DFT| の k = 0..floor(N/2)。既定ではテーパ・ゼロ詰めなし。"""
    x = np.asarray(u.values, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise InsufficientDataError("spectrum needs at least 2 samples")
    taper = cfg.taper if cfg else None
    zero_pad = cfg.zero_pad if cfg else 1
    if taper:
        x = x * signal.get_window(taper, n)
    n_fft = n * zero_pad
    magnitudes = np.abs(rfft(x, n=n_fft))
    return Spectrum(magnitudes=magnitudes, bin_width=60.0 / (n_fft * u.step))


def band_mask(s: Spectrum, cfg: PipelineConfig) -> np.ndarray:
    f = s.frequencies
    mask = (f >= cfg.band_low - EPS) & (f <= cfg.band_high + EPS)
    if not mask.any():
        raise ConfigError(
            f"no spectrum bins inside [{cfg.band_low}, {cfg.band_high}] breaths/minute "
            f"(bin width {s.bin_width:g}, {len(f)} bins)"
        )
    return mask


def band_pass(s: Spectrum, cfg: PipelineConfig) -> Spectrum:
    """帯域外のビンを 0 にする (境界は含む)"""
    mask = band_mask(s, cfg)
    return Spectrum(magnitudes=np.where(mask, s.magnitudes, 0.0), bin_width=s.bin_width)


def detect_and_estimate(s: Spectrum, cfg: PipelineConfig, window_start: float = 0.0,
                        flags: tuple[str, ...] = (), n_frames: int = 0) -> RespirationEstimate:
    """ratio = 帯域内 max / 帯域内 mean。ratio >= theta なら最大ビンの周波数 (同値は低い側)。"""
    mask = band_mask(s, cfg)
    y = s.magnitudes[mask]
    mean = float(y.mean())
    if mean <= 0.0:
        return RespirationEstimate(window_start, False, 0.0, 0.0, flags, n_frames)
    ratio = float(y.max()) / mean
    if ratio < cfg.theta:
        return RespirationEstimate(window_start, False, 0.0, ratio, flags, n_frames)
    peak = int(np.argmax(y))
    rate = round(float(s.frequencies[mask][peak]), 9)
    return RespirationEstimate(window_start, True, rate, ratio, flags, n_frames)


# ═══════════════════════════════════════════
#  5. 時間窓
# ═══════════════════════════════════════════
def window_starts(duration: float, cfg: PipelineConfig) -> list[float]:
    """t = 0, step, 2*step, ... (t + window_length <= duration)"""
    if duration + EPS < cfg.window_length:
        return []
    n = int(math.floor((duration - cfg.window_length) / cfg.window_step + EPS)) + 1
    return [round(k * cfg.window_step, 9) for k in range(n)]


def window_bounds(timestamps: np.ndarray, start: float, cfg: PipelineConfig) -> tuple[int, int]:
    """[start, start + window_length) に入るフレームの添字範囲"""
    lo = int(np.searchsorted(timestamps, start - EPS, side="left"))
    hi = int(np.searchsorted(timestamps, start + cfg.window_length - EPS, side="left"))
    return lo, hi


def run_window(m: FeatureMatrix, cfg: PipelineConfig, window_start: float = 0.0) -> WindowTrace:
    """1 窓分の全処理。縮退した窓は例外にせずフラグ付きで返す。"""
    t = np.asarray(m.timestamps, dtype=np.float64)
    values = m.values
    flags = []
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        _, keep = np.unique(t, return_index=True)
        t, values = t[keep], values[keep]
        flags.append(FLAG_NON_MONO)
    n = len(t)
    if n < 2:
        flags.append(FLAG_INSUFFICIENT)
        return WindowTrace(RespirationEstimate(window_start, False, 0.0, 0.0, tuple(flags), n))

    edges = [t[0] - window_start, window_start + cfg.window_length - t[-1]]
    largest_gap = max(float(np.max(np.diff(t))), *edges)
    if largest_gap > cfg.gap_limit:
        flags.append(FLAG_LOW_CONF)

    try:
        principal = apply_pca(FeatureMatrix(values, t))
    except DegenerateError:
        # 定数入力: 主成分スコアは 0 のまま扱い、スペクトルも 0 になる
        flags.append(FLAG_DEGENERATE)
        uniform = interpolate_uniform(np.zeros(n), t, cfg, start=window_start)
        spectrum = compute_spectrum(uniform, cfg)
        estimate = RespirationEstimate(window_start, False, 0.0, 0.0, tuple(flags), n)
        return WindowTrace(estimate, None, uniform, spectrum, band_pass(spectrum, cfg), t)

    uniform = interpolate_uniform(principal.scores, t, cfg, start=window_start)
    spectrum = compute_spectrum(uniform, cfg)
    filtered = band_pass(spectrum, cfg)
    estimate = detect_and_estimate(filtered, cfg, window_start, tuple(flags), n)
    return WindowTrace(estimate, principal, uniform, spectrum, filtered, t)


def estimate_window(m: FeatureMatrix, cfg: PipelineConfig, window_start: float = 0.0) -> RespirationEstimate:
    return run_window(m, cfg, window_start).estimate


def trace_at(stream, cfg: PipelineConfig, window_start: float, matrix: FeatureMatrix | None = None) -> WindowTrace:
    """window_start の窓を 1 つだけ評価する (cmd_spectrum / cmd_pca 用)"""
    starts = window_starts(stream.effective_duration(), cfg)
    if not any(abs(s - window_start) <= 1e-6 for s in starts):
        last = f"{starts[-1]:g}" if starts else "none"
        raise WindowRangeError(
            f"window_start {window_start:g} is not on the window grid (step {cfg.window_step:g}, last {last})"
        )
    matrix = matrix or build_feature_matrix(stream.records)
    lo, hi = window_bounds(matrix.timestamps, window_start, cfg)
    return run_window(matrix.rows(lo, hi), cfg, window_start)


def sliding_estimate(stream, cfg: PipelineConfig, workers: int | None = None,
                     verbose: bool = False) -> list[RespirationEstimate]:
    """60 s 窓を window_step ずつずらして全窓を推定する"""
    if not stream.records:
        raise InsufficientDataError("capture stream is empty")
    starts = window_starts(stream.effective_duration(), cfg)
    if not starts:
        return []
    matrix = build_feature_matrix(stream.records)

    def _one(start: float) -> RespirationEstimate:
        lo, hi = window_bounds(matrix.timestamps, start, cfg)
        return estimate_window(matrix.rows(lo, hi), cfg, start)

    workers = workers or config.MAX_WORKERS
    if workers <= 1:
        estimates = [_one(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(_one, starts))

    if verbose:
        detected = sum(1 for e in estimates if e.detected)
        print(f"  [WINDOW] {len(estimates)} windows, detected {detected}", file=sys.stderr, flush=True)
    return estimates


# ═══════════════════════════════════════════
#  6. 評価
# ═══════════════════════════════════════════
def rmse(estimates: list[RespirationEstimate], truth: list[tuple[float, float]]) -> float:
    """sqrt(mean((rate - truth)^2))。rate = 0 の窓も含める。"""
    if len(estimates) != len(truth):
        raise AlignmentError(f"{len(estimates)} estimates vs {len(truth)} ground-truth windows")
    if not estimates:
        raise AlignmentError("no windows to compare")
    diffs = []
    for est, (start, rate) in zip(estimates, truth):
        if abs(est.window_start - start) > 1e-6:
            raise AlignmentError(f"window_start mismatch: {est.window_start} vs {start}")
        diffs.append(est.rate - rate)
    return float(np.sqrt(np.mean(np.square(diffs))))

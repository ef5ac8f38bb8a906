"""
BreathBFM Configuration
量子化プリセット、パイプライン既定値、しきい値
"""
import os
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # CI では env vars が直接注入されるため不要

# ── 量子化プリセット (b_psi, b_phi) ──
QUANT_PRESETS = {
    "su-low":  (2, 4),
    "su-high": (4, 6),
    "mu-low":  (5, 7),
    "mu-high": (7, 9),
}

# VHT MIMO Control: (feedback_type, codebook) → (b_psi, b_phi)
# feedback_type 0 = SU, 1 = MU
VHT_CODEBOOK_BITS = {
    (0, 0): (2, 4),
    (0, 1): (4, 6),
    (1, 0): (5, 7),
    (1, 1): (7, 9),
}


def _parse_preset(raw: str) -> tuple[int, int]:
    try:
        b_psi, b_phi = (int(x) for x in raw.split(","))
        return b_psi, b_phi
    except ValueError:
        return QUANT_PRESETS["su-high"]


DEFAULT_PRESET = _parse_preset(os.getenv("BFM_DEFAULT_PRESET", "4,6"))

# ── パイプライン既定値 ──
FEEDBACK_INTERVAL = 0.20             # 平均フィードバック間隔 (秒)
CAPTURE_DURATION  = 300.0            # キャプチャ時間 (秒)
N_AP              = 4                # AP アンテナ数 (n_rows)
N_STA             = 4                # STA アンテナ数 (n_cols)
N_SC              = 250              # BFM を持つサブキャリア数

WINDOW_LENGTH     = 60.0             # 時間窓 (秒)
WINDOW_STEP       = 1.0              # 窓のずらし幅 (秒)
INTERP_INTERVAL   = 0.1              # 線形補間の間隔 (秒)
BAND_LOW          = 10.0             # バンドパス下限 (breaths/minute)
BAND_HIGH         = 50.0             # バンドパス上限 (breaths/minute)
THETA             = 5.0              # 検出しきい値 θ (peak / mean)

# ── 数値しきい値 ──
PIVOT_EPS         = 1e-12            # これ未満のピボットは角度 0 とみなす
ORTHO_TOL         = 1e-6             # decompose_v の直交性許容誤差
GAP_LIMIT         = 5.0              # これを超えるフレーム欠落で low-confidence (秒)
SVD_MAX_RETRIES   = 3                # SVD 非収束時のノイズ再生成回数

# ── 合成シナリオ既定値 ──
SYNTH_BREATHING_GAIN = 0.3
SYNTH_NOISE_SIGMA    = 0.03          # gain / noise = 10
SYNTH_JITTER         = 0.02          # ± 秒
SYNTH_SEED           = 20240917

# ── 並列評価 ──
MAX_WORKERS = int(os.getenv("BFM_WORKERS", "4"))

# ── フォーマット ──
FIXTURE_FORMAT = "bfm-fixture/1"
DLT_IEEE802_11_RADIO = 127

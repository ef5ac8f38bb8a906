"""
BreathBFM Codec — 圧縮ビームフォーミング行列 (BFM) の Givens 回転コーデック
量子化角度インデックス (k_phi, k_psi) ⇔ 複素 BFM 行列 V

角度の並び (列優先, 1-based):
  i = 1..min(n_cols, n_rows-1) ごとに
    phi ブロック  phi_{i,i} .. phi_{n_rows-1,i}
    psi ブロック  psi_{i+1,i} .. psi_{n_rows,i}
AngleSet では phi と psi を別リストに保持し、各リストの中はこの順に並ぶ。

全関数は純関数 (共有状態なし) なので、任意のスレッドから同時に呼べる。
"""
from dataclasses import dataclass

import numpy as np

import config
from errors import DecompositionError, InvalidAngleError, ShapeError

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


# ═══════════════════════════════════════════
#  1. 型
# ═══════════════════════════════════════════
@dataclass(frozen=True)
class QuantizationConfig:
    """phi / psi の量子化ビット幅"""
    b_phi: int
    b_psi: int

    def __post_init__(self):
        if self.b_phi < 1 or self.b_psi < 1:
            raise InvalidAngleError(
                f"bit widths must be >= 1 (b_phi={self.b_phi}, b_psi={self.b_psi})"
            )

    @classmethod
    def from_pair(cls, b_psi: int, b_phi: int) -> "QuantizationConfig":
        return cls(b_phi=int(b_phi), b_psi=int(b_psi))

    @classmethod
    def preset(cls, name: str) -> "QuantizationConfig":
        if name not in config.QUANT_PRESETS:
            raise InvalidAngleError(f"unknown quantization preset: {name}")
        return cls.from_pair(*config.QUANT_PRESETS[name])

    @classmethod
    def default(cls) -> "QuantizationConfig":
        return cls.from_pair(*config.DEFAULT_PRESET)

    @classmethod
    def from_codebook(cls, feedback_type: int, codebook: int) -> "QuantizationConfig":
        """VHT MIMO Control の feedback type / codebook ビットからプリセットを選ぶ"""
        return cls.from_pair(*config.VHT_CODEBOOK_BITS[(feedback_type & 1, codebook & 1)])

    @property
    def phi_levels(self) -> int:
        return 1 << self.b_phi

    @property
    def psi_levels(self) -> int:
        return 1 << self.b_psi


def check_dims(n_rows: int, n_cols: int):
    if n_rows < 2 or n_cols < 1 or n_cols > n_rows:
        raise ShapeError(f"unsupported BFM shape {n_rows}x{n_cols} (need 2 <= n_rows, 1 <= n_cols <= n_rows)")


def angle_counts(n_rows: int, n_cols: int) -> int:
    """phi (= psi) の個数: sum_{i=1..min(n_cols, n_rows-1)} (n_rows - i)"""
    check_dims(n_rows, n_cols)
    return sum(n_rows - i for i in range(1, min(n_cols, n_rows - 1) + 1))


def angle_order(n_rows: int, n_cols: int) -> list[tuple[str, int, int]]:
    """報告フレーム上の角度順 [("phi", l, i), ..., ("psi", l, i), ...] (1-based)"""
    check_dims(n_rows, n_cols)
    order = []
    for i in range(1, min(n_cols, n_rows - 1) + 1):
        order += [("phi", l, i) for l in range(i, n_rows)]
        order += [("psi", l, i) for l in range(i + 1, n_rows + 1)]
    return order


def bits_per_subcarrier(n_rows: int, n_cols: int, qc: QuantizationConfig) -> int:
    return angle_counts(n_rows, n_cols) * (qc.b_phi + qc.b_psi)


def validate_indices(phi_idx, psi_idx, qc: QuantizationConfig):
    """インデックス範囲チェック。最初の違反位置を例外に含める。
    phi_idx / psi_idx は (..., count) の整数配列。"""
    for kind, arr, levels in (("phi", phi_idx, qc.phi_levels), ("psi", psi_idx, qc.psi_levels)):
        arr = np.asarray(arr)
        bad = (arr < 0) | (arr >= levels)
        if bad.any():
            pos = np.unravel_index(int(np.argmax(bad)), arr.shape)
            flat = int(pos[-1]) if pos else 0
            raise InvalidAngleError(
                f"{kind} index {int(arr[pos])} at position {tuple(int(p) for p in pos)} "
                f"outside [0, {levels - 1}]",
                position=flat,
            )


@dataclass(frozen=True)
class AngleSet:
    """1 サブキャリア分の量子化 Givens 角度"""
    n_rows: int
    n_cols: int
    phi_indices: tuple[int, ...]
    psi_indices: tuple[int, ...]
    config: QuantizationConfig

    def __post_init__(self):
        object.__setattr__(self, "phi_indices", tuple(int(k) for k in self.phi_indices))
        object.__setattr__(self, "psi_indices", tuple(int(k) for k in self.psi_indices))
        count = angle_counts(self.n_rows, self.n_cols)
        if len(self.phi_indices) != count or len(self.psi_indices) != count:
            raise ShapeError(
                f"{self.n_rows}x{self.n_cols} needs {count} phi and {count} psi indices, "
                f"got {len(self.phi_indices)} / {len(self.psi_indices)}"
            )
        validate_indices(self.phi_indices, self.psi_indices, self.config)


@dataclass(frozen=True)
class BfmMatrix:
    """V (n_rows x n_cols), 列は正規直交"""
    entries: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    def orthonormality_residual(self) -> float:
        return orthonormality_residual(self.entries)


def orthonormality_residual(v: np.ndarray) -> float:
    """max |V^H V - I| (バッチ軸があれば全体の最大)"""
    v = np.asarray(v)
    gram = np.conj(np.swapaxes(v, -1, -2)) @ v
    eye = np.eye(v.shape[-1])
    return float(np.max(np.abs(gram - eye))) if gram.size else 0.0


# ═══════════════════════════════════════════
#  2. 量子化 / 逆量子化
# ═══════════════════════════════════════════
def dequantize_phi(k, b_phi: int) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    return k * np.pi / 2 ** (b_phi - 1) + np.pi / 2 ** b_phi


def dequantize_psi(k, b_psi: int) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    return k * np.pi / 2 ** (b_psi + 1) + np.pi / 2 ** (b_psi + 2)


def quantize_phi(phis, b_phi: int) -> np.ndarray:
    """最近傍のビン中心へ。phi は先に 2pi で剰余をとる。"""
    step = np.pi / 2 ** (b_phi - 1)
    wrapped = np.mod(np.asarray(phis, dtype=np.float64), TWO_PI)
    k = np.floor(wrapped / step).astype(np.int64)
    return np.clip(k, 0, (1 << b_phi) - 1)


def quantize_psi(psis, b_psi: int) -> np.ndarray:
    """最近傍のビン中心へ。psi は [0, pi/2] にクランプ。"""
    step = np.pi / 2 ** (b_psi + 1)
    clamped = np.clip(np.asarray(psis, dtype=np.float64), 0.0, HALF_PI)
    k = np.floor(clamped / step).astype(np.int64)
    return np.clip(k, 0, (1 << b_psi) - 1)


def dequantize_angles(a: AngleSet) -> tuple[np.ndarray, np.ndarray]:
    """AngleSet → (phis, psis) [rad]。順序はインデックス順のまま。"""
    phis = dequantize_phi(a.phi_indices, a.config.b_phi)
    psis = dequantize_psi(a.psi_indices, a.config.b_psi)
    return phis, psis


def _check_finite(kind: str, values: np.ndarray):
    bad = ~np.isfinite(values)
    if bad.any():
        pos = int(np.argmax(bad.ravel()))
        raise InvalidAngleError(f"non-finite {kind} angle at position {pos}", position=pos)


def quantize_angles(phis, psis, qc: QuantizationConfig, n_rows: int, n_cols: int) -> AngleSet:
    """(phis, psis) [rad] → AngleSet。

    n_rows / n_cols は明示する (4x4 と 4x3 は角度数が同じ 6 個になるため)。
    """
    phis = np.asarray(phis, dtype=np.float64)
    psis = np.asarray(psis, dtype=np.float64)
    _check_finite("phi", phis)
    _check_finite("psi", psis)
    return AngleSet(
        n_rows=n_rows,
        n_cols=n_cols,
        phi_indices=tuple(quantize_phi(phis, qc.b_phi).tolist()),
        psi_indices=tuple(quantize_psi(psis, qc.b_psi).tolist()),
        config=qc,
    )


# ═══════════════════════════════════════════
#  3. 再構成 V = [prod_i D_i prod_l G_{l,i}^T] I~
# ═══════════════════════════════════════════
def reconstruct_from_angles(n_rows: int, n_cols: int, phis, psis) -> np.ndarray:
    """連続角度 (量子化なし) から V を組み立てる。

    phis / psis: (..., count)。先頭のバッチ軸はそのまま保たれ、戻り値は (..., n_rows, n_cols)。
    """
    count = angle_counts(n_rows, n_cols)
    phis = np.asarray(phis, dtype=np.float64)
    psis = np.asarray(psis, dtype=np.float64)
    if phis.shape[-1:] != (count,) or psis.shape[-1:] != (count,):
        raise ShapeError(f"{n_rows}x{n_cols} needs {count} angles per kind")
    batch = phis.shape[:-1]

    m = np.broadcast_to(np.eye(n_rows, dtype=np.complex128), batch + (n_rows, n_rows)).copy()
    p_phi = 0
    p_psi = 0
    for i in range(min(n_cols, n_rows - 1)):
        # 右から D_i を掛ける = 列 i..n_rows-2 に位相を乗じる
        n = n_rows - 1 - i
        m[..., :, i:n_rows - 1] *= np.exp(1j * phis[..., p_phi:p_phi + n])[..., None, :]
        p_phi += n
        # 右から G_{l,i}^T を掛ける = 列 i と列 l の回転
        for l in range(i + 1, n_rows):
            psi = psis[..., p_psi]
            p_psi += 1
            c = np.cos(psi)[..., None]
            s = np.sin(psi)[..., None]
            col_i = m[..., :, i].copy()
            col_l = m[..., :, l].copy()
            m[..., :, i] = c * col_i + s * col_l
            m[..., :, l] = -s * col_i + c * col_l
    return m[..., :, :n_cols]


def reconstruct_v(a: AngleSet) -> BfmMatrix:
    phis, psis = dequantize_angles(a)
    return BfmMatrix(reconstruct_from_angles(a.n_rows, a.n_cols, phis, psis))


def reconstruct_batch(n_rows: int, n_cols: int, phi_idx, psi_idx, qc: QuantizationConfig) -> np.ndarray:
    """インデックス配列 (..., count) からまとめて V (..., n_rows, n_cols) を再構成"""
    phis = dequantize_phi(phi_idx, qc.b_phi)
    psis = dequantize_psi(psi_idx, qc.b_psi)
    return reconstruct_from_angles(n_rows, n_cols, phis, psis)


# ═══════════════════════════════════════════
#  4. 分解 (合成器用の逆変換)
# ═══════════════════════════════════════════
def align_last_row(v) -> np.ndarray:
    """各列の位相を回して最終行を実数・非負にする。最終行がほぼ 0 の列は回さない。"""
    v = np.asarray(v, dtype=np.complex128)
    last = v[..., -1, :]
    phase = np.where(np.abs(last) < config.PIVOT_EPS, 0.0, np.angle(last))
    return v * np.exp(-1j * phase)[..., None, :]


def decompose_angles(v) -> tuple[np.ndarray, np.ndarray]:
    """V → 連続角度 (phis, psis)。reconstruct_from_angles の逆。

    (..., n_rows, n_cols) のバッチ入力に対応。
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim < 2:
        raise ShapeError(f"expected a matrix, got shape {v.shape}")
    n_rows, n_cols = v.shape[-2:]
    check_dims(n_rows, n_cols)
    residual = orthonormality_residual(v)
    if residual > config.ORTHO_TOL:
        raise DecompositionError("columns are not orthonormal", residual)

    w = align_last_row(v).copy()
    phis = []
    psis = []
    for i in range(min(n_cols, n_rows - 1)):
        # D_i^H を左から掛けて列 i の位相を剥がす
        for l in range(i, n_rows - 1):
            x = w[..., l, i]
            ang = np.where(np.abs(x) < config.PIVOT_EPS, 0.0, np.angle(x))
            ang = np.mod(ang, TWO_PI)
            phis.append(ang)
            w[..., l, :] *= np.exp(-1j * ang)[..., None]
        # G_{l,i} を左から掛けて副対角を 0 にする (l = i+1, ..., n_rows の順)
        for l in range(i + 1, n_rows):
            a = w[..., i, i].real
            b = w[..., l, i].real
            r = np.hypot(a, b)
            ang = np.where(r < config.PIVOT_EPS, 0.0, np.clip(np.arctan2(b, a), 0.0, HALF_PI))
            psis.append(ang)
            c = np.cos(ang)[..., None]
            s = np.sin(ang)[..., None]
            row_i = w[..., i, :].copy()
            row_l = w[..., l, :].copy()
            w[..., i, :] = c * row_i + s * row_l
            w[..., l, :] = -s * row_i + c * row_l
    return np.stack(phis, axis=-1), np.stack(psis, axis=-1)


def decompose_v(v, qc: QuantizationConfig) -> AngleSet:
    """V → 量子化 AngleSet。v は BfmMatrix でも ndarray でもよい。"""
    entries = v.entries if isinstance(v, BfmMatrix) else np.asarray(v)
    if entries.ndim != 2:
        raise ShapeError(f"decompose_v takes one matrix, got shape {entries.shape}")
    phis, psis = decompose_angles(entries)
    n_rows, n_cols = entries.shape
    return quantize_angles(phis, psis, qc, n_rows, n_cols)


def decompose_batch(v, qc: QuantizationConfig) -> tuple[np.ndarray, np.ndarray]:
    """(..., n_rows, n_cols) → (phi_idx, psi_idx) 整数配列 (..., count)"""
    phis, psis = decompose_angles(v)
    return quantize_phi(phis, qc.b_phi), quantize_psi(psis, qc.b_psi)


def givens(n_rows: int, l: int, i: int, psi: float) -> np.ndarray:
    """G_{l,i}(psi) (1-based l, i)。テストとデバッグ用の明示的な行列形。"""
    g = np.eye(n_rows)
    c, s = np.cos(psi), np.sin(psi)
    g[i - 1, i - 1] = c
    g[i - 1, l - 1] = s
    g[l - 1, i - 1] = -s
    g[l - 1, l - 1] = c
    return g


if __name__ == "__main__":
    qc = QuantizationConfig.preset("su-high")
    a = AngleSet(4, 4, [3] * 6, [5] * 6, qc)
    v = reconstruct_v(a)
    print("residual:", v.orthonormality_residual())
    print("round-trip:", decompose_v(v, qc) == a)

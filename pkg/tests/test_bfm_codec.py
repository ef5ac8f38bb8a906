"""
bfm_codec のテスト — 量子化・再構成・分解
"""
import numpy as np
import pytest

import config
from bfm_codec import (
    AngleSet,
    QuantizationConfig,
    align_last_row,
    angle_counts,
    angle_order,
    bits_per_subcarrier,
    decompose_angles,
    decompose_batch,
    decompose_v,
    dequantize_angles,
    dequantize_phi,
    dequantize_psi,
    givens,
    orthonormality_residual,
    quantize_angles,
    reconstruct_batch,
    reconstruct_from_angles,
    reconstruct_v,
)
from conftest import random_unitary_columns
from errors import DecompositionError, InvalidAngleError, ShapeError

DIMS = [(r, c) for r in range(2, 5) for c in range(1, r + 1)]
PRESETS = [QuantizationConfig.preset(name) for name in config.QUANT_PRESETS]


def random_angle_set(rng, n_rows, n_cols, qc) -> AngleSet:
    count = angle_counts(n_rows, n_cols)
    return AngleSet(
        n_rows, n_cols,
        tuple(rng.integers(0, qc.phi_levels, count).tolist()),
        tuple(rng.integers(0, qc.psi_levels, count).tolist()),
        qc,
    )


class TestQuantizationConfig:
    def test_presets(self):
        assert QuantizationConfig.preset("su-low") == QuantizationConfig(b_phi=4, b_psi=2)
        assert QuantizationConfig.preset("su-high") == QuantizationConfig(b_phi=6, b_psi=4)
        assert QuantizationConfig.preset("mu-low") == QuantizationConfig(b_phi=7, b_psi=5)
        assert QuantizationConfig.preset("mu-high") == QuantizationConfig(b_phi=9, b_psi=7)

    def test_from_codebook(self):
        assert QuantizationConfig.from_codebook(0, 0) == QuantizationConfig(b_phi=4, b_psi=2)
        assert QuantizationConfig.from_codebook(0, 1) == QuantizationConfig(b_phi=6, b_psi=4)
        assert QuantizationConfig.from_codebook(1, 1) == QuantizationConfig(b_phi=9, b_psi=7)

    def test_rejects_zero_bits(self):
        with pytest.raises(InvalidAngleError):
            QuantizationConfig(b_phi=0, b_psi=2)

    def test_unknown_preset(self):
        with pytest.raises(InvalidAngleError):
            QuantizationConfig.preset("he-ultra")

    def test_dequantize_known_values(self):
        qc = QuantizationConfig.preset("su-low")
        phis, psis = dequantize_angles(AngleSet(2, 1, (7,), (3,), qc))
        assert phis[0] == pytest.approx(15 * np.pi / 16)
        assert psis[0] == pytest.approx(7 * np.pi / 16)
        assert dequantize_phi(0, 4) == pytest.approx(np.pi / 16)

    @pytest.mark.parametrize("bits", range(1, 10))
    def test_dequantized_ranges(self, bits):
        k = np.arange(2 ** bits)
        phis = dequantize_phi(k, bits)
        psis = dequantize_psi(k, bits)
        assert np.all((phis > 0) & (phis < 2 * np.pi))
        assert np.all((psis > 0) & (psis < np.pi / 2))
        assert phis.max() == pytest.approx(2 * np.pi - np.pi / 2 ** bits)
        assert psis.max() == pytest.approx(np.pi / 2 - np.pi / 2 ** (bits + 2))
        assert np.all(np.diff(phis) > 0) and np.all(np.diff(psis) > 0)


class TestLayout:
    @pytest.mark.parametrize("n_rows,n_cols,expected", [
        (2, 1, 1), (2, 2, 1), (3, 1, 2), (3, 3, 3), (4, 1, 3), (4, 2, 5), (4, 3, 6), (4, 4, 6),
    ])
    def test_angle_counts(self, n_rows, n_cols, expected):
        assert angle_counts(n_rows, n_cols) == expected

    @pytest.mark.parametrize("n_rows,n_cols", [(1, 1), (2, 3), (4, 0)])
    def test_bad_dims(self, n_rows, n_cols):
        with pytest.raises(ShapeError):
            angle_counts(n_rows, n_cols)

    def test_order_is_phi_block_then_psi_block(self):
        assert angle_order(3, 2) == [
            ("phi", 1, 1), ("phi", 2, 1), ("psi", 2, 1), ("psi", 3, 1),
            ("phi", 2, 2), ("psi", 3, 2),
        ]

    def test_bits_per_subcarrier(self):
        assert bits_per_subcarrier(4, 4, QuantizationConfig.preset("su-high")) == 60
        assert bits_per_subcarrier(2, 1, QuantizationConfig.preset("su-low")) == 6

    def test_angle_set_count_mismatch(self):
        with pytest.raises(ShapeError):
            AngleSet(4, 4, (0,) * 5, (0,) * 6, QuantizationConfig.default())

    def test_angle_set_out_of_range_reports_position(self):
        with pytest.raises(InvalidAngleError) as exc:
            AngleSet(3, 1, (0, 16), (0, 0), QuantizationConfig.preset("su-low"))
        assert exc.value.position == 1


class TestReconstruct:
    def test_zero_indices_give_bin_centres(self):
        qc = QuantizationConfig.preset("su-low")
        v = reconstruct_v(AngleSet(2, 1, (0,), (0,), qc)).entries
        phi, psi = np.pi / 16, np.pi / 16
        expected = np.array([[np.cos(psi) * np.exp(1j * phi)], [np.sin(psi)]])
        np.testing.assert_allclose(v, expected, atol=1e-15)

    def test_quarter_turn_example(self):
        v = reconstruct_from_angles(2, 1, [np.pi / 2], [np.pi / 4])
        np.testing.assert_allclose(v, [[1j / np.sqrt(2)], [1 / np.sqrt(2)]], atol=1e-15)

    @pytest.mark.parametrize("n_rows", [2, 3, 4])
    def test_givens_factors_are_orthogonal(self, n_rows):
        for psi in np.linspace(0.0, np.pi / 2, 33):
            for i in range(1, n_rows):
                for l in range(i + 1, n_rows + 1):
                    g = givens(n_rows, l, i, psi)
                    np.testing.assert_allclose(g @ g.T, np.eye(n_rows), atol=1e-15)

    def test_dequantize_su_high(self):
        qc = QuantizationConfig.preset("su-high")
        phis, psis = dequantize_angles(AngleSet(2, 1, (3,), (5,), qc))
        assert phis[0] == pytest.approx(3 * np.pi / 32 + np.pi / 64)
        assert psis[0] == pytest.approx(5 * np.pi / 32 + np.pi / 64)

    def test_matches_explicit_givens_product(self, rng):
        phis = rng.uniform(0, 2 * np.pi, 3)
        psis = rng.uniform(0, np.pi / 2, 3)
        v = reconstruct_from_angles(3, 2, phis, psis)
        d1 = np.diag([np.exp(1j * phis[0]), np.exp(1j * phis[1]), 1.0])
        d2 = np.diag([1.0, np.exp(1j * phis[2]), 1.0])
        m = d1 @ givens(3, 2, 1, psis[0]).T @ givens(3, 3, 1, psis[1]).T @ d2 @ givens(3, 3, 2, psis[2]).T
        np.testing.assert_allclose(v, m[:, :2], atol=1e-12)

    def test_batch_matches_per_subcarrier(self, rng):
        qc = QuantizationConfig.preset("su-high")
        sets = [random_angle_set(rng, 4, 2, qc) for _ in range(8)]
        phi = np.array([a.phi_indices for a in sets])
        psi = np.array([a.psi_indices for a in sets])
        batch = reconstruct_batch(4, 2, phi, psi, qc)
        for s, a in enumerate(sets):
            np.testing.assert_array_equal(batch[s], reconstruct_v(a).entries)

    def test_unitarity(self, rng):
        worst = 0.0
        for _ in range(1000):
            n_rows, n_cols = DIMS[rng.integers(len(DIMS))]
            qc = PRESETS[rng.integers(len(PRESETS))]
            worst = max(worst, reconstruct_v(random_angle_set(rng, n_rows, n_cols, qc)).orthonormality_residual())
        assert worst <= 1e-9

    def test_last_row_is_real_non_negative(self, rng):
        qc = QuantizationConfig.preset("mu-high")
        v = reconstruct_v(random_angle_set(rng, 4, 4, qc)).entries
        assert np.all(np.abs(v[-1].imag) < 1e-12)
        assert np.all(v[-1].real >= -1e-12)


class TestDecompose:
    def test_quantized_round_trip_is_exact(self, rng):
        for _ in range(1000):
            n_rows, n_cols = DIMS[rng.integers(len(DIMS))]
            qc = PRESETS[rng.integers(len(PRESETS))]
            a = random_angle_set(rng, n_rows, n_cols, qc)
            assert decompose_v(reconstruct_v(a), qc) == a

    def test_continuous_round_trip(self, rng):
        worst = 0.0
        for _ in range(1000):
            n_rows, n_cols = DIMS[rng.integers(len(DIMS))]
            v = random_unitary_columns(rng, n_rows, n_cols)
            phis, psis = decompose_angles(v)
            back = reconstruct_from_angles(n_rows, n_cols, phis, psis)
            worst = max(worst, float(np.max(np.abs(back - align_last_row(v)))))
        assert worst <= 1e-8

    def test_quantization_error_within_half_bin(self, rng):
        for _ in range(1000):
            n_rows, n_cols = DIMS[rng.integers(len(DIMS))]
            qc = PRESETS[rng.integers(len(PRESETS))]
            v = random_unitary_columns(rng, n_rows, n_cols)
            phis, psis = decompose_angles(v)
            q_phis, q_psis = dequantize_angles(decompose_v(v, qc))
            assert np.all(np.abs(q_phis - phis) <= np.pi / 2 ** qc.b_phi + 1e-12)
            assert np.all(np.abs(q_psis - psis) <= np.pi / 2 ** (qc.b_psi + 2) + 1e-12)

    def test_batch_matches_single(self, rng):
        qc = QuantizationConfig.default()
        vs = np.stack([random_unitary_columns(rng, 4, 3) for _ in range(6)])
        phi, psi = decompose_batch(vs, qc)
        for s in range(6):
            a = decompose_v(vs[s], qc)
            assert tuple(phi[s].tolist()) == a.phi_indices
            assert tuple(psi[s].tolist()) == a.psi_indices

    def test_rejects_non_orthonormal(self):
        v = np.array([[1.0], [1.0]], dtype=np.complex128)
        with pytest.raises(DecompositionError) as exc:
            decompose_v(v, QuantizationConfig.default())
        assert exc.value.residual == pytest.approx(1.0)

    def test_quarter_turn_example(self):
        phis, psis = decompose_angles(np.array([[1j], [1.0]]) / np.sqrt(2))
        assert phis[0] == pytest.approx(np.pi / 2)
        assert psis[0] == pytest.approx(np.pi / 4)

    def test_identity_column_gives_zero_pivots(self):
        # 最終行が 0 でも角度 0 として扱う
        v = np.array([[1.0], [0.0]], dtype=np.complex128)
        phis, psis = decompose_angles(v)
        assert phis[0] == 0.0 and psis[0] == 0.0

    def test_quantize_rejects_nan(self):
        with pytest.raises(InvalidAngleError):
            quantize_angles([np.nan], [0.1], QuantizationConfig.default(), 2, 1)

    def test_residual_helper(self):
        assert orthonormality_residual(np.eye(3, 2)) == 0.0

import itertools
import math

import numpy as np
import pytest

from gsmas.config import SystemConfig
from gsmas.errors import ConfigError, FramingError
from gsmas.gsm import (GsmSymbol, bpcu, demap, enumerate_combinations, map_bits, ml_detect, modulate,
                       qam_constellation, transmit)
from gsmas.selection import partition_subsets


def brute_force_detect(y, h, subset, constellation):
    """Independent scan of ||y - H x||^2 over explicitly built transmit vectors."""
    best, arg = np.inf, None
    for c in range(len(subset)):
        for q in range(len(constellation)):
            x = modulate(GsmSymbol(c, q), subset, constellation)
            d = float(np.sum(np.abs(y - h @ x) ** 2))
            if d < best:
                best, arg = d, GsmSymbol(c, q)
    return arg


class TestCombinations:
    def test_four_choose_two(self):
        masks = enumerate_combinations(4, 2)
        assert masks.shape == (6, 4)
        assert masks[0].tolist() == [1, 1, 0, 0]
        assert masks[-1].tolist() == [0, 0, 1, 1]

    @pytest.mark.parametrize("n_tx, n_active, count", [(16, 2, 120), (12, 2, 66), (8, 2, 28), (5, 5, 1)])
    def test_counts(self, n_tx, n_active, count):
        masks = enumerate_combinations(n_tx, n_active)
        assert len(masks) == count
        assert np.all(masks.sum(axis=1) == n_active)
        assert len({m.tobytes() for m in masks}) == count

    def test_testbed_twelve_gives_eight_subsets(self):
        part = partition_subsets(enumerate_combinations(12, 2), 3)
        assert part.n_subsets == 8

    def test_overflow_rejected(self):
        with pytest.raises(ConfigError):
            enumerate_combinations(64, 32)

    def test_invalid_counts(self):
        with pytest.raises(ConfigError):
            enumerate_combinations(4, 5)


class TestBpcu:
    def test_desk_example(self):
        cfg = SystemConfig(n_tx=4, n_active=2, spatial_bits=1, mod_order=4)
        assert bpcu(cfg)[0] == 4

    def test_testbed(self):
        cfg = SystemConfig(n_tx=12, n_active=2, spatial_bits=3, mod_order=4)
        assert bpcu(cfg) == (8, 5)

    def test_boundary(self):
        # C = 2 would give K = 2 only with zero spatial bits; the formula itself:
        cfg = SystemConfig(n_tx=4, n_active=1, spatial_bits=1, mod_order=4)
        assert bpcu(cfg) == (4, 3)
        assert math.floor(math.log2(4) + math.log2(2)) == 3


class TestQam:
    def test_qpsk(self):
        pts = qam_constellation(4)
        expected = {complex(a, b) / np.sqrt(2) for a in (1, -1) for b in (1, -1)}
        assert {complex(round(p.real, 12), round(p.imag, 12)) for p in pts} == {
            complex(round(p.real, 12), round(p.imag, 12)) for p in expected}
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("m", [4, 16, 64])
    def test_unit_energy(self, m):
        assert np.mean(np.abs(qam_constellation(m)) ** 2) == pytest.approx(1.0, abs=1e-14)

    def test_sixteen_min_distance(self):
        pts = qam_constellation(16)
        d = np.abs(pts[:, None] - pts[None, :])
        assert d[d > 0].min() == pytest.approx(2 / np.sqrt(10), abs=1e-14)

    @pytest.mark.parametrize("m", [16, 64])
    def test_gray_neighbours(self, m):
        pts = qam_constellation(m)
        dmin = np.abs(pts[:, None] - pts[None, :])
        step = dmin[dmin > 0].min()
        for a, b in itertools.combinations(range(m), 2):
            if abs(abs(pts[a] - pts[b]) - step) < 1e-9:
                assert bin(a ^ b).count("1") == 1

    def test_unsupported(self):
        with pytest.raises(ConfigError):
            qam_constellation(8)


class TestBitMapping:
    def test_examples(self):
        assert map_bits([0, 0, 0, 0], 2, 4) == GsmSymbol(0, 0)
        assert map_bits([1, 1, 0, 1], 2, 4) == GsmSymbol(3, 1)

    @pytest.mark.parametrize("rho, m", [(1, 4), (2, 4), (3, 16), (2, 64)])
    def test_exhaustive_round_trip(self, rho, m):
        width = rho + int(math.log2(m))
        blocks = np.array(list(itertools.product([0, 1], repeat=width)), dtype=np.uint8)
        sym = map_bits(blocks, rho, m)
        assert np.array_equal(demap(sym, rho, m), blocks)
        # bijective: every (combo, qam) pair hit exactly once
        pairs = set(zip(sym.combo_index.tolist(), sym.qam_index.tolist()))
        assert len(pairs) == 2 ** width

    def test_demap_extremes(self):
        assert demap(GsmSymbol(0, 0), 2, 4).tolist() == [0, 0, 0, 0]
        assert demap(GsmSymbol(3, 3), 2, 4).tolist() == [1, 1, 1, 1]
        assert demap(GsmSymbol(7, 15), 3, 16).tolist() == [1] * 7

    def test_wrong_length(self):
        with pytest.raises(FramingError):
            map_bits([0, 1, 0], 2, 4)


class TestModulate:
    def test_single_active(self):
        subset = np.array([[1, 0, 0], [0, 1, 0]])
        const = qam_constellation(4)
        x = modulate(GsmSymbol(1, 2), subset, const)
        assert np.count_nonzero(x) == 1 and x[1] == const[2]

    def test_two_active_normalised(self):
        subset = np.array([[1, 1, 0, 0]])
        s = (1 + 1j) / np.sqrt(2)
        const = np.array([s])
        x = modulate(GsmSymbol(0, 0), subset, const)
        np.testing.assert_allclose(x[:2], (1 + 1j) / 2)
        assert np.sum(np.abs(x) ** 2) == pytest.approx(1.0)

    def test_energy_equals_symbol_energy(self):
        masks = enumerate_combinations(6, 3)
        const = qam_constellation(16)
        for c in range(len(masks)):
            for q in range(16):
                x = modulate(GsmSymbol(c, q), masks, const)
                assert np.sum(np.abs(x) ** 2) == pytest.approx(abs(const[q]) ** 2)


class TestTransmit:
    def test_identity_noise_free(self):
        x = np.array([0.3 + 0.1j, 0, -1j])
        np.testing.assert_allclose(transmit(np.eye(3), x, np.inf, None), x)

    def test_zero_input_is_noise(self):
        y = transmit(np.ones((2, 2)), np.zeros(2), 0.0, np.random.default_rng(0))
        assert np.all(y != 0)

    def test_direct_product(self):
        s = qam_constellation(4)[1]
        x = modulate(GsmSymbol(0, 1), np.array([[1, 1, 0, 0]]), qam_constellation(4))
        y = transmit(np.array([[1.0, 1.0, 0.0, 0.0]]), x, np.inf, None)
        np.testing.assert_allclose(y, [2 * s / np.sqrt(2)])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            transmit(np.ones((2, 3)), np.ones(4), 0.0, np.random.default_rng(0))


class TestMlDetect:
    def test_noise_free_recovery(self):
        rng = np.random.default_rng(11)
        masks = enumerate_combinations(8, 2)[:4]
        const = qam_constellation(4)
        for _ in range(200):
            h = (rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))) / np.sqrt(2)
            sym = GsmSymbol(int(rng.integers(4)), int(rng.integers(4)))
            y = transmit(h, modulate(sym, masks, const), np.inf, rng)
            assert ml_detect(y, h, masks, const) == sym

    def test_single_combination_is_nearest_neighbour(self):
        const = qam_constellation(4)
        masks = np.array([[1, 0]])
        h = np.array([[1.0, 0.0]])
        for y0 in [0.5 + 0.2j, -0.1 + 0.9j, -0.7 - 0.3j, 0.2 - 2j]:
            got = ml_detect(np.array([y0]), h, masks, const)
            assert got.qam_index == int(np.argmin(np.abs(const - y0)))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        masks = enumerate_combinations(4, 2)[:4]
        const = qam_constellation(4)
        for _ in range(300):
            h = (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) / np.sqrt(2)
            sym = GsmSymbol(int(rng.integers(4)), int(rng.integers(4)))
            y = transmit(h, modulate(sym, masks, const), 5.0, rng)
            assert ml_detect(y, h, masks, const) == brute_force_detect(y, h, masks, const)

    def test_tie_goes_to_lowest_index(self):
        const = qam_constellation(4)
        masks = np.array([[1, 0], [0, 1]])
        h = np.array([[1.0, 1.0]])  # both combinations look identical
        y = np.array([const[2]])
        assert ml_detect(y, h, masks, const) == GsmSymbol(0, 2)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        masks = enumerate_combinations(6, 2)[:8]
        const = qam_constellation(16)
        h = (rng.standard_normal((20, 3, 6)) + 1j * rng.standard_normal((20, 3, 6))) / np.sqrt(2)
        y = (rng.standard_normal((20, 3)) + 1j * rng.standard_normal((20, 3)))
        batch = ml_detect(y, h, masks, const)
        for i in range(20):
            single = ml_detect(y[i], h[i], masks, const)
            assert single == GsmSymbol(int(batch.combo_index[i]), int(batch.qam_index[i]))

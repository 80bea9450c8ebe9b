import numpy as np
import pytest

from jointgrand.modem import bit_subset, get_constellation, map_bits, qam16, qpsk

R2 = np.sqrt(2)


def test_qpsk_labels():
    c = qpsk()
    assert map_bits([0, 0], c)[0] == pytest.approx((1 + 1j) / R2)
    assert map_bits([1, 0], c)[0] == pytest.approx((-1 + 1j) / R2)
    assert map_bits([0, 1], c)[0] == pytest.approx((1 - 1j) / R2)
    np.testing.assert_allclose(map_bits([0, 0, 0, 0], c), [(1 + 1j) / R2] * 2)


def test_qam16_levels_and_gray_axis():
    c = qam16()
    levels = np.array([-3, -1, 1, 3]) / np.sqrt(10)
    np.testing.assert_allclose(np.unique(c.points.real.round(12)), levels.round(12))
    np.testing.assert_allclose(np.unique(c.points.imag.round(12)), levels.round(12))
    # 00, 01, 11, 10 -> -3, -1, +1, +3 on the real axis
    for pair, lv in zip(["00", "01", "11", "10"], levels):
        sym = map_bits([int(pair[0]), int(pair[1]), 0, 0], c)[0]
        assert sym.real == pytest.approx(lv)


@pytest.mark.parametrize("name", ["qpsk", "qam16"])
def test_unit_energy(name):
    c = get_constellation(name)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12


@pytest.mark.parametrize("name", ["qpsk", "qam16"])
def test_gray_property(name):
    c = get_constellation(name)
    step = 2 / np.sqrt(2 if name == "qpsk" else 10)
    for p in range(c.size):
        for q in range(c.size):
            d = c.points[q] - c.points[p]
            adjacent = (np.isclose(abs(d.real), step) and np.isclose(d.imag, 0)) or (
                np.isclose(abs(d.imag), step) and np.isclose(d.real, 0))
            if adjacent:
                assert np.sum(c.labels[p] != c.labels[q]) == 1


@pytest.mark.parametrize("name", ["qpsk", "qam16"])
def test_bit_subsets_partition(name):
    c = get_constellation(name)
    m = c.bits_per_symbol
    for j in range(m):
        s0, s1 = bit_subset(c, j, 0), bit_subset(c, j, 1)
        assert len(s0) == len(s1) == 2 ** (m - 1)
        assert set(np.round(np.concatenate([s0, s1]), 12)) == set(np.round(c.points, 12))
        assert not set(np.round(s0, 12)) & set(np.round(s1, 12))


def test_qpsk_first_bit_subset_is_right_half_plane():
    s = bit_subset(qpsk(), 0, 0)
    assert np.all(s.real > 0)


def test_errors():
    c = qpsk()
    with pytest.raises(ValueError):
        map_bits([0, 1, 1], c)
    with pytest.raises(ValueError):
        bit_subset(c, 2, 0)
    with pytest.raises(ValueError):
        get_constellation("qam64")


@pytest.mark.parametrize("name", ["qpsk", "qam16"])
def test_nearest_point_demapping_inverts_mapping(name):
    c = get_constellation(name)
    rng = np.random.default_rng(0)
    b = rng.integers(0, 2, (5, 64), dtype=np.uint8)
    x = map_bits(b, c)
    idx = np.argmin(np.abs(x[..., None] - c.points), axis=-1)
    assert np.array_equal(c.labels[idx].reshape(5, 64), b)

import numpy as np
import pytest

from jointgrand.channel import (
    ChannelDraw,
    make_draw,
    sample_cee,
    sample_rician,
    snr_db_to_noise_var,
    transmit,
)

N = 1_000_000


def test_rician_infinite_k_is_constant():
    rng = np.random.default_rng(0)
    assert sample_rician(np.inf, rng) == 1
    assert np.all(sample_rician(np.inf, rng, 10) == 1)


@pytest.mark.parametrize("k", [0.0, 10.0])
def test_rician_unit_power(k):
    h = sample_rician(k, np.random.default_rng(1), N)
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 0.01


def test_rician_los_mean():
    h = sample_rician(10.0, np.random.default_rng(2), N)
    assert abs(h.mean() - np.sqrt(10 / 11)) < 0.005


def test_rician_negative_k():
    with pytest.raises(ValueError):
        sample_rician(-1, np.random.default_rng())


def test_cee_moments():
    rng = np.random.default_rng(3)
    assert sample_cee(0.0, rng) == 0
    e = sample_cee(0.01, rng, N)
    assert abs(np.mean(np.abs(e) ** 2) / 0.01 - 1) < 0.02
    assert abs(e.mean()) < 3 * 0.1 / 1e3
    assert abs(e.real.var() - e.imag.var()) < 0.02 * 0.005
    with pytest.raises(ValueError):
        sample_cee(-0.1, rng)


def test_transmit_noise_variance():
    rng = np.random.default_rng(4)
    draw = ChannelDraw(1.0, 1.0, 0.0, 0.5, 0.0, np.inf)
    x = np.exp(2j * np.pi * rng.random(N))
    y = transmit(x, draw, rng)
    assert abs(np.var(y - x) / 0.5 - 1) < 0.02
    z = transmit(np.zeros(N), draw, rng)
    assert abs(np.mean(np.abs(z) ** 2) / 0.5 - 1) < 0.02


def test_transmit_tiny_noise_identity():
    rng = np.random.default_rng(5)
    x = np.array([1 + 1j, -1 - 1j]) / np.sqrt(2)
    y = transmit(x, ChannelDraw(1.0, 1.0, 0.0, 1e-30, 0.0, np.inf), rng)
    np.testing.assert_allclose(y, x, atol=1e-12)


def test_transmit_requires_positive_noise():
    with pytest.raises(ValueError):
        transmit([1.0], ChannelDraw(1.0, 1.0, 0.0, 0.0, 0.0, 1.0), np.random.default_rng())


def test_make_draw_identity_and_estimate_error_distribution():
    rng = np.random.default_rng(6)
    errs = []
    for _ in range(20_000):
        d = make_draw(10.0, 0.01, 0.1, rng)
        assert d.h == d.h_hat + d.h_e
        errs.append(d.h - d.h_hat)
    errs = np.array(errs)
    assert abs(np.mean(np.abs(errs) ** 2) / 0.01 - 1) < 0.05
    assert abs(errs.mean()) < 0.003
    d0 = make_draw(10.0, 0.0, 0.1, rng)
    assert d0.h_hat == d0.h


def test_draws_reproducible():
    a = [make_draw(10, 0.1, 0.1, np.random.default_rng(42)) for _ in range(2)]
    assert a[0] == a[1]


def test_snr_convention():
    assert snr_db_to_noise_var(0) == 1
    assert snr_db_to_noise_var(20) == pytest.approx(0.01)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointgrand.detect import (
    LLR_CLIP,
    VoronoiRect,
    cee_log_terms,
    cee_log_terms_quadrature,
    compute_llrs,
    llr_ml,
    llr_ml_cee,
    llr_ml_cee_quadrature,
    llr_ml_exact,
    llr_mmse,
    llr_zf,
)
from jointgrand.channel import sample_rician
from jointgrand.jointdec import candidates_grid9
from jointgrand.modem import map_bits, qam16, qpsk

QPSK, QAM16 = qpsk(), qam16()
FULL = VoronoiRect(-np.inf, np.inf, -np.inf, np.inf)


def rand_c(rng, *shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_exact_llr_zero_at_origin():
    np.testing.assert_allclose(llr_ml_exact([0j], 1.0, 0.3, QPSK), [0, 0], atol=1e-15)


def test_exact_llr_qpsk_closed_form():
    # for QPSK the exact LLR collapses to -2*sqrt(2)*Re(y)/sigma_w2 (bit 0)
    y = 0.9 * (1 + 1j) / np.sqrt(2)
    llr = llr_ml_exact([y], 1.0, 0.5, QPSK)
    assert llr[0] == pytest.approx(-2 * np.sqrt(2) * y.real / 0.5, rel=1e-12)
    assert llr[0] == pytest.approx(-3.6, rel=1e-12)
    assert llr[1] == pytest.approx(-2 * np.sqrt(2) * y.imag / 0.5, rel=1e-12)


def test_exact_llr_matches_brute_force_sums():
    rng = np.random.default_rng(0)
    y = rand_c(rng, 8)
    h, s2 = 0.7 - 0.4j, 0.2
    llr = llr_ml_exact(y, h, s2, QAM16)
    for i in range(8):
        for j in range(4):
            num = sum(math.exp(-abs(y[i] - h * v) ** 2 / s2) for v in QAM16.bit_subset(j, 1))
            den = sum(math.exp(-abs(y[i] - h * v) ** 2 / s2) for v in QAM16.bit_subset(j, 0))
            assert llr[4 * i + j] == pytest.approx(math.log(num / den), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("fn", [llr_ml_exact, llr_ml, llr_zf, llr_mmse])
def test_rotation_invariance_of_ml_family(fn):
    rng = np.random.default_rng(1)
    y = rand_c(rng, 16)
    h = 0.8 + 0.3j
    rot = np.exp(1j * 0.77)
    np.testing.assert_allclose(fn(y * rot, h * rot, 0.1, QAM16), fn(y, h, 0.1, QAM16), rtol=1e-9, atol=1e-9)


def test_maxlog_equals_exact_for_qpsk():
    rng = np.random.default_rng(2)
    y = rand_c(rng, 100, 100)
    h = rand_c(rng, 100)
    np.testing.assert_allclose(llr_ml(y, h, 0.3, QPSK), llr_ml_exact(y, h, 0.3, QPSK), rtol=1e-9, atol=1e-9)


def test_maxlog_sign_agrees_with_exact_for_qam16():
    rng = np.random.default_rng(3)
    h = sample_rician(10.0, rng, 10_000)
    x = QAM16.points[rng.integers(0, 16, 10_000)]
    y = (h * x + rand_c(rng, 10_000, scale=0.1))[:, None]  # sigma_w2 = 0.02
    assert np.array_equal(np.sign(llr_ml(y, h, 0.02, QAM16)), np.sign(llr_ml_exact(y, h, 0.02, QAM16)))


def test_maxlog_sign_flips_only_near_zero():
    # at very low effective SNR max-log may flip small LLRs, never confident ones
    rng = np.random.default_rng(3)
    y = rand_c(rng, 10_000, 1)
    h = rand_c(rng, 10_000, scale=0.7)
    a = llr_ml(y, h, 0.2, QAM16)
    b = llr_ml_exact(y, h, 0.2, QAM16)
    flipped = np.sign(a) != np.sign(b)
    assert np.all(np.abs(b[flipped]) < 0.5)


@pytest.mark.parametrize("fn", [llr_ml_exact, llr_ml, llr_zf, llr_mmse])
@pytest.mark.parametrize("c", [QPSK, QAM16], ids=["qpsk", "qam16"])
def test_noiseless_hard_decisions(fn, c):
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, 128, dtype=np.uint8)
    h = 1.3 * np.exp(1j * 2.1)
    llr = fn(h * map_bits(bits, c), h, 1e-3, c)
    assert llr.shape == (128,)
    assert np.array_equal((llr > 0).astype(np.uint8), bits)


def test_zf_equals_ml():
    rng = np.random.default_rng(5)
    y = rand_c(rng, 50, 32)
    np.testing.assert_allclose(llr_zf(y, 1.7, 0.2, QAM16), llr_ml(y, 1.7, 0.2, QAM16), rtol=1e-12, atol=1e-12)
    h = 2 * np.exp(1j * np.pi / 4)
    np.testing.assert_allclose(llr_zf(y, h, 0.2, QAM16), llr_ml(y, h, 0.2, QAM16), rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.05, 3.0), st.floats(-math.pi, math.pi), st.floats(1e-3, 2.0),
    st.integers(0, 2**32 - 1),
)
def test_zf_ml_identity_property(mag, phase, s2, seed):
    rng = np.random.default_rng(seed)
    y = rand_c(rng, 8)
    h = mag * np.exp(1j * phase)
    np.testing.assert_allclose(llr_zf(y, h, s2, QAM16), llr_ml(y, h, s2, QAM16), rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10.0), st.integers(0, 2**32 - 1))
def test_maxlog_scales_inversely_with_noise(t, seed):
    rng = np.random.default_rng(seed)
    y = rand_c(rng, 8)
    h = complex(*rng.standard_normal(2))
    a = llr_ml(y, h, 0.5, QAM16)
    b = llr_ml(y, h, 0.5 * t, QAM16)
    mask = np.abs(a) < LLR_CLIP / max(1.0, 1 / t)
    np.testing.assert_allclose(b[mask], a[mask] / t, rtol=1e-12, atol=1e-12)


def test_mmse_tends_to_zf():
    rng = np.random.default_rng(6)
    y = rand_c(rng, 32)
    h = 0.9 - 0.5j
    np.testing.assert_allclose(llr_mmse(y, h, 1e-9, QAM16) * 1e-9, llr_zf(y, h, 1e-9, QAM16) * 1e-9, atol=1e-6)


def test_mmse_qpsk_hard_decisions_match_zf():
    rng = np.random.default_rng(7)
    y = rand_c(rng, 10_000, 1)
    h = rand_c(rng, 10_000)
    assert np.array_equal(llr_mmse(y, h, 0.4, QPSK) > 0, llr_zf(y, h, 0.4, QPSK) > 0)


def test_mmse_zero_estimate():
    assert np.all(llr_mmse(np.ones(4, dtype=complex), 0.0, 0.1, QPSK) == 0)


def test_detector_errors():
    with pytest.raises(ValueError):
        llr_ml([1j], 1.0, 0.0, QPSK)
    with pytest.raises(ZeroDivisionError):
        llr_zf([1j], 0.0, 0.1, QPSK)
    with pytest.raises(ValueError):
        llr_ml_cee([1j], 1.0, 0.0, (0.0, 0.0, 0.0, 0.0), 0.1, 0.1, QPSK)
    with pytest.raises(ValueError):
        llr_ml_cee([1j], 1.0, 0.0, FULL, 0.1, 0.0, QPSK)
    with pytest.raises(ValueError):
        compute_llrs("ml-cee", [1j], 1.0, 0.1, QPSK)


def test_llrs_are_clipped_and_finite():
    y = np.array([50 + 50j])
    for fn in (llr_ml, llr_ml_exact, llr_zf, llr_mmse):
        out = fn(y, 1.0, 1e-6, QPSK)
        assert np.all(np.isfinite(out)) and np.all(np.abs(out) <= LLR_CLIP)


def test_batched_estimates_broadcast_per_block():
    rng = np.random.default_rng(8)
    y = rand_c(rng, 3, 4)
    h = rand_c(rng, 3)
    batched = llr_ml(y, h, 0.1, QPSK)
    for b in range(3):
        np.testing.assert_allclose(batched[b], llr_ml(y[b], h[b], 0.1, QPSK))


# --------------------------------------------------------------------------
# residual-CEE-aware LLRs


def test_cee_closed_form_matches_quadrature_grid9():
    rng = np.random.default_rng(9)
    se2 = 0.1
    cands = candidates_grid9(math.sqrt(se2))
    for m in range(9):
        h = rand_c(rng, 1)[0] * 0.3 + 1
        y = h * QPSK.points[rng.integers(0, 4, 6)] + rand_c(rng, 6, scale=0.2)
        s2 = 10 ** (-rng.uniform(0.5, 2.0))
        a = cee_log_terms(y, h + cands.deltas[m], cands.deltas[m], cands.cells[m], s2, se2, QPSK)
        b = cee_log_terms_quadrature(y, h + cands.deltas[m], cands.deltas[m], cands.cells[m], s2, se2, QPSK)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-6)


def test_cee_full_plane_reduces_to_inflated_noise():
    rng = np.random.default_rng(10)
    y = rand_c(rng, 16)
    h, s2, se2 = 0.8 + 0.1j, 0.05, 0.1
    got = llr_ml_cee(y, h, 0.0, FULL, s2, se2, QAM16)
    # CEE folded into the noise: variance s2 + |v|^2 se2 for each point
    var = s2 + np.abs(QAM16.points) ** 2 * se2
    logt = -np.abs(y[:, None] - h * QAM16.points) ** 2 / var - np.log(var)
    want = np.empty((16, 4))
    for j in range(4):
        mk = QAM16.bit_masks[j]
        want[:, j] = np.logaddexp.reduce(logt[:, mk], axis=1) - np.logaddexp.reduce(logt[:, ~mk], axis=1)
    np.testing.assert_allclose(got, want.ravel(), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(llr_ml_cee_quadrature(y, h, 0.0, FULL, s2, se2, QAM16), want.ravel(),
                               rtol=1e-6, atol=1e-6)


def test_cee_vanishing_error_recovers_exact_ml():
    rng = np.random.default_rng(11)
    y = rand_c(rng, 16)
    h, s2 = 0.9 + 0.2j, 0.1
    want = llr_ml_exact(y, h, s2, QPSK)
    centre = candidates_grid9(1e-4).cells[0]
    np.testing.assert_allclose(llr_ml_cee(y, h, 0.0, centre, s2, 1e-8, QPSK), want, rtol=1e-5, atol=1e-5)
    tiny = VoronoiRect(-1e-9, 1e-9, -1e-9, 1e-9)
    np.testing.assert_allclose(llr_ml_cee(y, h, 0.0, tiny, s2, 0.1, QPSK), want, rtol=1e-6, atol=1e-6)


def test_cee_far_cell_stays_finite_in_log_domain():
    far = VoronoiRect(1e3, 1e3 + 1, 1e3, 1e3 + 1)
    llr, flag = llr_ml_cee([0.5 + 0.5j], 1.0, 0.0, far, 1e-4, 1e-4, QPSK, return_underflow=True)
    assert not flag.any() and np.all(np.isfinite(llr))


def test_cee_underflow_flag():
    # so far out that even the log-domain exponent overflows
    far = VoronoiRect(1e200, 1e201, 1e200, 1e201)
    llr, flag = llr_ml_cee([0.5 + 0.5j], 1.0, 0.0, far, 1e-4, 0.1, QPSK, return_underflow=True)
    assert flag.all() and np.all(llr == 0)


@pytest.mark.parametrize("fn", [llr_ml_exact, llr_ml, llr_zf, llr_mmse])
def test_batched_and_single_block_llrs_are_bit_identical(fn):
    rng = np.random.default_rng(12)
    y = rand_c(rng, 300, 32)
    h = 1 + rand_c(rng, 300, scale=0.3)
    batched = fn(y, h, 0.01, QAM16)
    assert all(np.array_equal(fn(y[b], h[b], 0.01, QAM16), batched[b]) for b in range(300))

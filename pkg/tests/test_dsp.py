import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixgraph import dsp


def naive_convolve(x, h):
    """y[n] = sum_k h[k] x[n - k], full length."""
    y = np.zeros(len(x) + len(h) - 1)
    for n in range(len(y)):
        for k in range(len(h)):
            if 0 <= n - k < len(x):
                y[n] += h[k] * x[n - k]
    return y


def dft_taps(log_mags, n_taps):
    """Direct evaluation of the windowed inverse DFT at n = -(N-1)/2 .. (N-1)/2."""
    half = (n_taps - 1) // 2
    mag = [np.exp(log_mags[min(k, n_taps - k)]) for k in range(n_taps)]
    taps = []
    for n in range(-half, half + 1):
        acc = sum(mag[k] * np.exp(2j * np.pi * k * n / n_taps) for k in range(n_taps)) / n_taps
        taps.append(acc.real)
    i = np.arange(n_taps)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * i / (n_taps - 1))
    return np.array(taps) * window


@pytest.mark.parametrize("length", [1, 7, 64, 257, 1000])
def test_fft_convolve_delta_is_identity(length):
    x = np.random.default_rng(length).normal(size=length)
    assert np.allclose(dsp.fft_convolve(x, np.array([1.0])), x, atol=1e-12)
    assert np.allclose(dsp.fft_convolve(x, np.array([0.0, 1.0, 0.0]), "zero_phase"), x, atol=1e-12)


def test_fft_convolve_zeros():
    assert np.all(dsp.fft_convolve(np.zeros(100), np.ones(9)) == 0)


def test_fft_convolve_matches_naive():
    rng = np.random.default_rng(0)
    x, h = rng.normal(size=257), rng.normal(size=64)
    ref = naive_convolve(x, h)[:257]
    got = dsp.fft_convolve(x, h)
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) <= 1e-6


def test_zero_phase_convolve_matches_naive_centered():
    rng = np.random.default_rng(1)
    x, h = rng.normal(size=200), rng.normal(size=31)
    ref = naive_convolve(x, h)[15:215]
    assert np.allclose(dsp.fft_convolve(x, h, "zero_phase"), ref, atol=1e-10)
    assert np.allclose(dsp.direct_convolve(x, h, "zero_phase"), ref, atol=1e-10)


def test_fft_convolve_broadcasts_batch():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 2, 100))
    h = rng.normal(size=(3, 1, 10))
    got = dsp.fft_convolve(x, h)
    for i in range(3):
        for c in range(2):
            assert np.allclose(got[i, c], naive_convolve(x[i, c], h[i, 0])[:100], atol=1e-10)


def test_direct_convolve_sparse_path():
    rng = np.random.default_rng(3)
    x = rng.normal(size=300)
    h = np.zeros(400)
    h[[5, 120, 399]] = [0.5, -1.0, 2.0]
    assert np.allclose(dsp.direct_convolve(x, h), naive_convolve(x, h)[:300], atol=1e-12)


def test_zero_phase_requires_odd_kernel():
    with pytest.raises(ValueError):
        dsp.fft_convolve(np.ones(10), np.ones(4), "zero_phase")


def test_zero_phase_fir_flat_is_centered_delta():
    h = dsp.zero_phase_fir(np.zeros(4), 7)
    expected = np.zeros(7)
    expected[3] = 1.0
    assert np.allclose(h, expected, atol=1e-15)


def test_zero_phase_fir_constant_scales_delta():
    h = dsp.zero_phase_fir(np.full(4, 0.7), 7)
    assert np.isclose(h[3], np.exp(0.7))
    assert np.allclose(np.delete(h, 3), 0, atol=1e-15)


def test_zero_phase_fir_single_raised_bin():
    log_mags = np.zeros(4)
    log_mags[1] = np.log(2)
    n = np.arange(-3, 4)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(7) / 6)
    closed_form = window * ((n == 0) + (2 / 7) * np.cos(2 * np.pi * n / 7))
    got = dsp.zero_phase_fir(log_mags, 7)
    assert np.allclose(got, dft_taps(log_mags, 7), atol=1e-12)
    assert np.allclose(got, closed_form, atol=1e-12)


def test_zero_phase_fir_rejects_length_mismatch():
    with pytest.raises(ValueError):
        dsp.zero_phase_fir(np.zeros(5), 7)
    with pytest.raises(ValueError):
        dsp.zero_phase_fir(np.zeros(4), 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_zero_phase_fir_is_even(half, seed):
    n_taps = 2 * half - 1
    log_mags = np.random.default_rng(seed).normal(size=half)
    h = dsp.zero_phase_fir(log_mags, n_taps)
    assert np.max(np.abs(h - h[::-1])) <= 1e-12


def test_zero_phase_fir_random_matches_dft():
    log_mags = np.random.default_rng(4).normal(size=10)
    assert np.allclose(dsp.zero_phase_fir(log_mags, 19), dft_taps(log_mags, 19), atol=1e-12)


def test_stft_zeros():
    spec = dsp.stft(np.zeros(2000))
    assert np.all(spec.frames == 0)
    assert np.all(dsp.istft(spec) == 0)


def test_stft_round_trip_on_noise():
    x = np.random.default_rng(5).uniform(-1, 1, size=88200)
    y = dsp.istft(dsp.stft(x, 384, 192))
    interior = slice(384, -384)
    assert np.max(np.abs(y[interior] - x[interior])) / np.max(np.abs(x)) <= 1e-6
    assert y.shape == x.shape


def test_stft_impulse_support():
    x = np.zeros(3000)
    x[500] = 1.0
    spec = dsp.stft(x, 384, 192)
    active = np.flatnonzero(np.any(np.abs(spec.frames) > 1e-12, axis=0))
    # frame m spans samples [(m - 1) * hop, (m - 1) * hop + fft_len)
    window = dsp.stft_window(384)
    covering = [m for m in range(spec.num_frames) if 0 <= 500 - (m - 1) * 192 < 384 and window[500 - (m - 1) * 192] > 0]
    assert list(active) == covering
    assert spec.num_bins == 193


def test_stft_rejects_large_hop():
    with pytest.raises(ValueError):
        dsp.stft(np.zeros(100), 64, 65)


def test_surrogate_delay_on_grid_is_exact():
    z = np.exp(-2j * np.pi * 3 / 8)
    expected = np.zeros(8)
    expected[3] = 1
    assert np.allclose(dsp.surrogate_delay(z, 8), expected, atol=1e-12)
    assert np.allclose(dsp.surrogate_delay(1.0, 8), np.eye(8)[0], atol=1e-12)


def test_surrogate_delay_damped_matches_direct_sum():
    z = 0.9 * np.exp(-2j * np.pi * 3 / 8)
    n = np.arange(8)
    direct = [sum(z**k * np.exp(2j * np.pi * k * m / 8) for k in range(8)).real / 8 for m in n]
    assert np.allclose(dsp.surrogate_delay(z, 8), direct, atol=1e-12)


def test_surrogate_delay_rejects_outside_disk():
    with pytest.raises(ValueError):
        dsp.surrogate_delay(1.01, 8)


def surrogate_fd_grad(z, n, h=1e-6):
    d_re = (dsp.surrogate_delay(z + h, n) - dsp.surrogate_delay(z - h, n)) / (2 * h)
    d_im = (dsp.surrogate_delay(z + 1j * h, n) - dsp.surrogate_delay(z - 1j * h, n)) / (2 * h)
    return d_re, d_im


@pytest.mark.parametrize("seed", range(10))
def test_surrogate_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 257))
    z = rng.uniform(0.3, 0.95) * np.exp(1j * rng.uniform(-np.pi, np.pi))
    g = dsp.surrogate_delay_grad(z, n)
    d_re, d_im = surrogate_fd_grad(z, n)
    assert np.max(np.abs(g.real - d_re)) <= 1e-4 * np.max(np.abs(g.real))
    assert np.max(np.abs(-g.imag - d_im)) <= 1e-4 * np.max(np.abs(g.imag))

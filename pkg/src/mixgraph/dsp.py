"""FFT convolution, zero-phase FIR design, STFT and the surrogate delay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.signal import windows


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def fft_convolve(x: np.ndarray, h: np.ndarray, mode: str = "causal") -> np.ndarray:
    """Linear convolution along the last axis, trimmed to the length of ``x``.

    ``x`` and ``h`` broadcast over their leading axes.  In ``"zero_phase"``
    mode ``h`` must have odd length and is treated as centered on its middle tap.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    n, m = x.shape[-1], h.shape[-1]
    if n < 1 or m < 1:
        raise ValueError("signal and kernel must be non-empty")
    head = _head(m, mode)
    nfft = next_pow2(n + m - 1)
    spec = scipy.fft.rfft(x, nfft) * scipy.fft.rfft(h, nfft)
    y = scipy.fft.irfft(spec, nfft)
    return y[..., head:head + n]


def direct_convolve(x: np.ndarray, h: np.ndarray, mode: str = "causal") -> np.ndarray:
    """Time-domain counterpart of :func:`fft_convolve` for 1-D inputs."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.ndim != 1 or h.ndim != 1:
        raise ValueError("direct_convolve takes 1-D arrays")
    n, m = len(x), len(h)
    head = _head(m, mode)
    h = h[:head + n]
    taps = np.flatnonzero(h)
    if len(taps) * 8 < len(h):
        full = np.zeros(n + len(h) - 1)
        for k in taps:
            full[k:k + n] += h[k] * x
    else:
        full = np.convolve(x, h)
    return full[head:head + n]


def _head(m: int, mode: str) -> int:
    if mode == "causal":
        return 0
    if mode == "zero_phase":
        if m % 2 == 0:
            raise ValueError("zero-phase convolution needs an odd-length kernel")
        return (m - 1) // 2
    raise ValueError(f"unknown convolution mode {mode!r}")


def zero_phase_fir(log_mags: np.ndarray, n_taps: int) -> np.ndarray:
    """Windowed zero-phase FIR from one-sided log-magnitudes.

    ``log_mags`` has shape ``(..., (n_taps + 1) // 2)``; the result has shape
    ``(..., n_taps)`` with tap ``(n_taps - 1) // 2`` at time zero.
    """
    log_mags = np.asarray(log_mags, dtype=float)
    if n_taps % 2 == 0:
        raise ValueError("zero-phase FIR length must be odd")
    half = (n_taps + 1) // 2
    if log_mags.shape[-1] != half:
        raise ValueError(f"expected {half} log-magnitudes for {n_taps} taps, got {log_mags.shape[-1]}")
    k = np.arange(n_taps)
    mag = np.exp(log_mags[..., np.minimum(k, n_taps - k)])
    h = scipy.fft.ifft(mag, axis=-1).real
    h = np.roll(h, (n_taps - 1) // 2, axis=-1)
    return h * fir_window(n_taps)


def fir_window(n: int) -> np.ndarray:
    return windows.hann(n, sym=True)


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (..., bins, frames), complex
    fft_len: int
    hop: int
    length: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[-1]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[-2]


def stft(x: np.ndarray, fft_len: int = 384, hop: int = 192) -> Spectrogram:
    """Periodic-Hann STFT along the last axis.

    The signal is padded by ``hop`` zeros in front so that every sample is
    covered by two frames at 50% overlap.
    """
    if hop > fft_len:
        raise ValueError("hop must not exceed the FFT length")
    x = np.asarray(x, dtype=float)
    length = x.shape[-1]
    num_frames = -(-(length + hop) // hop)
    total = (num_frames - 1) * hop + fft_len
    pad = [(0, 0)] * (x.ndim - 1) + [(hop, total - length - hop)]
    padded = np.pad(x, pad)
    idx = np.arange(num_frames)[:, None] * hop + np.arange(fft_len)[None, :]
    segments = padded[..., idx] * stft_window(fft_len)
    frames = scipy.fft.rfft(segments, axis=-1)
    return Spectrogram(np.swapaxes(frames, -1, -2), fft_len, hop, length)


def istft(spec: Spectrogram) -> np.ndarray:
    """Overlap-add inverse of :func:`stft` with rectangular synthesis."""
    fft_len, hop = spec.fft_len, spec.hop
    segments = scipy.fft.irfft(np.swapaxes(spec.frames, -1, -2), fft_len, axis=-1)
    num_frames = segments.shape[-2]
    total = (num_frames - 1) * hop + fft_len
    out = np.zeros(segments.shape[:-2] + (total,))
    wsum = np.zeros(total)
    win = stft_window(fft_len)
    for m in range(num_frames):
        out[..., m * hop:m * hop + fft_len] += segments[..., m, :]
        wsum[m * hop:m * hop + fft_len] += win
    out = out / np.where(wsum > 1e-8, wsum, 1.0)
    return out[..., hop:hop + spec.length]


def stft_window(n: int) -> np.ndarray:
    return windows.hann(n, sym=False)


def surrogate_delay(z: complex, n: int) -> np.ndarray:
    """Smooth stand-in for an integer delay: real part of the inverse DFT of ``z**k``."""
    if abs(z) > 1 + 1e-9:
        raise ValueError(f"|z| = {abs(z)} exceeds the unit disk")
    powers = z ** np.arange(n)
    return scipy.fft.ifft(powers).real


def surrogate_delay_grad(z: complex, n: int) -> np.ndarray:
    """Complex derivative of the (complex) surrogate with respect to ``z``.

    The derivative of the real output along Re z is its real part, along Im z
    minus its imaginary part.
    """
    k = np.arange(n)
    coeffs = np.zeros(n, dtype=complex)
    coeffs[1:] = k[1:] * z ** (k[1:] - 1)
    return scipy.fft.ifft(coeffs)

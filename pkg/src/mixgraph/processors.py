"""Batched audio processors.

Every processor maps a batch of node inputs ``u`` of shape ``(n, B, 2, L)``
and parameter rows ``p`` of shape ``(n, width)`` to outputs shaped like ``u``.
``reference`` computes a single node ``(B, 2, L)`` with direct time-domain
arithmetic; the renderer's oracle uses it.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from . import dsp
from .graph import (
    DEFAULT_SAMPLE_RATE,
    DELAY_CHANNELS,
    DELAY_FIR_BINS,
    DELAY_TAP_WIDTH,
    DELAY_TAPS,
    NodeType,
    check_delay_rows,
    check_dynamics_rows,
    delay_geometry,
)

ENERGY_FLOOR = 1e-7
ENVELOPE_TAPS = 32768
EQ_TAPS = 2047
DELAY_FIR_TAPS = 39
DELAY_DISABLED = -60.0
REVERB_FFT = 384
REVERB_HOP = 192
REVERB_BINS = 192


def _as_batch(p: np.ndarray, width: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[1] != width:
        raise ValueError(f"expected parameter rows of width {width}, got shape {p.shape}")
    return p


class Processor:
    node_type: NodeType

    @property
    def width(self) -> int:
        return self.node_type.width

    def __call__(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reference(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        return self(u[None], np.asarray(p, dtype=float)[None])[0]


class Passthrough(Processor):
    """``in``, ``out`` and ``mix``: summation happens at aggregation."""

    def __init__(self, node_type: NodeType = NodeType.MIX):
        self.node_type = node_type

    def __call__(self, u, p=None):
        return np.array(u, dtype=float, copy=True)

    def reference(self, u, p=None):
        return np.array(u, dtype=float, copy=True)


class Gain(Processor):
    node_type = NodeType.GAIN

    def __call__(self, u, p):
        p = _as_batch(p, 2)
        return u * np.exp(p)[:, None, :, None]

    def reference(self, u, p):
        out = np.empty_like(u, dtype=float)
        for c in range(2):
            out[:, c] = np.exp(p[c]) * u[:, c]
        return out


class StereoImager(Processor):
    node_type = NodeType.IMAGER

    def __call__(self, u, p):
        p = _as_batch(p, 1)
        mid = u[:, :, 0] + u[:, :, 1]
        side = np.exp(p[:, :1, None]) * (u[:, :, 0] - u[:, :, 1])
        return np.stack([(mid + side) / 2, (mid - side) / 2], axis=2)

    def reference(self, u, p):
        left, right = u[:, 0], u[:, 1]
        side = np.exp(p[0]) * (left - right)
        mid = left + right
        return np.stack([(mid + side) / 2, (mid - side) / 2], axis=1)


class ZeroPhaseEQ(Processor):
    """Single zero-phase FIR shared by both channels."""

    node_type = NodeType.EQ

    def __init__(self, n_taps: int = EQ_TAPS):
        self.n_taps = n_taps

    def fir(self, p: np.ndarray) -> np.ndarray:
        return dsp.zero_phase_fir(p, self.n_taps)

    def __call__(self, u, p):
        h = self.fir(_as_batch(p, self.width))
        return dsp.fft_convolve(u, h[:, None, None, :], mode="zero_phase")

    def reference(self, u, p):
        h = self.fir(np.asarray(p, dtype=float))
        out = np.empty_like(u, dtype=float)
        for b in range(u.shape[0]):
            for c in range(u.shape[1]):
                out[b, c] = dsp.direct_convolve(u[b, c], h, mode="zero_phase")
        return out


class FilteredNoiseReverb(Processor):
    """Mid/side filtered-noise reverb.

    Parameter row layout: ``(mid, side) x (initial coloration, decay) x 192``
    log-magnitudes.  The Nyquist bin reuses the value of the last parameter bin.
    """

    node_type = NodeType.REVERB

    def __init__(self, sample_rate: int = DEFAULT_SAMPLE_RATE, seed: int = 0, seconds: float = 2.0):
        self.sample_rate = sample_rate
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.noise = rng.uniform(-1.0, 1.0, size=(2, int(round(seconds * sample_rate))))
        self.noise.setflags(write=False)
        self._noise_spec = dsp.stft(self.noise, REVERB_FFT, REVERB_HOP)

    def impulse_response(self, p: np.ndarray) -> np.ndarray:
        """Stereo FIRs of shape ``(n, 2, len(noise))`` for rows ``p``."""
        p = _as_batch(p, self.width).reshape(-1, 2, 2, REVERB_BINS)
        init = np.concatenate([p[:, :, 0], p[:, :, 0, -1:]], axis=-1)
        decay = np.concatenate([p[:, :, 1], p[:, :, 1, -1:]], axis=-1)
        frames = np.arange(self._noise_spec.num_frames)
        mask = np.exp(init[..., None] + frames * decay[..., None])
        spec = dsp.Spectrogram(
            self._noise_spec.frames[None] * mask,
            REVERB_FFT,
            REVERB_HOP,
            self._noise_spec.length,
        )
        h_mid, h_side = np.moveaxis(dsp.istft(spec), 1, 0)
        return np.stack([(h_mid + h_side) / 2, (h_mid - h_side) / 2], axis=1)

    def __call__(self, u, p):
        length = u.shape[-1]
        h = self.impulse_response(p)[..., :length]
        return dsp.fft_convolve(u, h[:, None], mode="causal")

    def reference(self, u, p):
        h = self.impulse_response(np.asarray(p, dtype=float)[None])[0]
        out = np.empty_like(u, dtype=float)
        for b in range(u.shape[0]):
            for c in range(2):
                out[b, c] = dsp.direct_convolve(u[b, c], h[c], mode="causal")
        return out


def compressor_curve(log_energy, threshold, knee, ratio):
    """Quadratic-knee compressor output log-energy."""
    above = threshold + (log_energy - threshold) / ratio
    mid = log_energy + (1 / ratio - 1) * (log_energy - threshold + knee) ** 2 / (4 * knee)
    return np.where(
        log_energy >= threshold + knee,
        above,
        np.where(log_energy < threshold - knee, log_energy, mid),
    )


def noisegate_curve(log_energy, threshold, knee, ratio):
    """Quadratic-knee downward expander output log-energy."""
    mid = log_energy + (1 - ratio) * (log_energy - threshold - knee) ** 2 / (4 * knee)
    below = threshold + ratio * (log_energy - threshold)
    return np.where(
        log_energy >= threshold + knee,
        log_energy,
        np.where(log_energy < threshold - knee, below, mid),
    )


class _Dynamics(Processor):
    curve = staticmethod(compressor_curve)

    def __init__(self, envelope_taps: int = ENVELOPE_TAPS, floor: float = ENERGY_FLOOR):
        self.envelope_taps = envelope_taps
        self.floor = floor

    def __call__(self, u, p):
        p = _as_batch(p, 4)
        check_dynamics_rows(p, self.node_type.tag)
        alpha, threshold, knee, ratio = (p[:, i, None, None] for i in range(4))
        energy = (u[:, :, 0] + u[:, :, 1]) ** 2
        taps = min(self.envelope_taps, u.shape[-1])
        h = (1 - alpha) * alpha ** np.arange(taps)
        envelope = dsp.fft_convolve(energy, h, mode="causal")
        return u * self._gain(envelope, threshold, knee, ratio)[:, :, None, :]

    def reference(self, u, p):
        p = np.asarray(p, dtype=float)
        check_dynamics_rows(p[None], self.node_type.tag)
        alpha, threshold, knee, ratio = p
        energy = (u[:, 0] + u[:, 1]) ** 2
        # one-pole recursion with zero initial state
        envelope = lfilter([1 - alpha], [1, -alpha], energy, axis=-1)
        return u * self._gain(envelope, threshold, knee, ratio)[:, None, :]

    def _gain(self, envelope, threshold, knee, ratio):
        log_energy = np.log(np.maximum(envelope, self.floor))
        return np.exp(self.curve(log_energy, threshold, knee, ratio) - log_energy)


class Compressor(_Dynamics):
    node_type = NodeType.COMPRESSOR
    curve = staticmethod(compressor_curve)


class NoiseGate(_Dynamics):
    node_type = NodeType.NOISEGATE
    curve = staticmethod(noisegate_curve)


class MultitapDelay(Processor):
    """Up to one filtered echo per 100 ms window over 2 s, per channel.

    Parameter row layout: ``2 channels x 20 taps x (Re z, Im z, 20 log-mags)``.
    The delay of a tap is read from the angle of ``z`` and clamped into its
    window; a tap whose log-magnitudes are all at or below -60 is silent.
    """

    node_type = NodeType.DELAY

    def __init__(self, sample_rate: int = DEFAULT_SAMPLE_RATE):
        self.sample_rate = sample_rate
        self.length, self.window = delay_geometry(sample_rate)

    def delays(self, z: np.ndarray) -> np.ndarray:
        d = np.round(-np.angle(z) * self.length / (2 * np.pi)).astype(np.int64) % self.length
        lo = np.arange(DELAY_TAPS) * self.window
        return np.clip(d, lo, lo + self.window - 1)

    def impulse_response(self, p: np.ndarray, length: int | None = None) -> np.ndarray:
        """Stereo FIRs of shape ``(n, 2, length)``; ``length`` defaults to 2 s."""
        p = _as_batch(p, self.width)
        check_delay_rows(p)
        length = self.length if length is None else min(length, self.length)
        taps = p.reshape(-1, DELAY_CHANNELS, DELAY_TAPS, DELAY_TAP_WIDTH)
        delays = self.delays(taps[..., 0] + 1j * taps[..., 1])
        log_mags = taps[..., 2:2 + DELAY_FIR_BINS]
        firs = dsp.zero_phase_fir(log_mags, DELAY_FIR_TAPS)
        firs[np.all(log_mags <= DELAY_DISABLED, axis=-1)] = 0.0
        half = (DELAY_FIR_TAPS - 1) // 2
        h = np.zeros((taps.shape[0], DELAY_CHANNELS, length))
        for node, ch, tap in np.ndindex(*delays.shape):
            start = delays[node, ch, tap] - half
            lo, hi = max(start, 0), min(start + DELAY_FIR_TAPS, length)
            if lo < hi:
                h[node, ch, lo:hi] += firs[node, ch, tap, lo - start:hi - start]
        return h

    def __call__(self, u, p):
        h = self.impulse_response(p, u.shape[-1])
        return dsp.fft_convolve(u, h[:, None], mode="causal")

    def reference(self, u, p):
        h = self.impulse_response(np.asarray(p, dtype=float)[None], u.shape[-1])[0]
        out = np.empty_like(u, dtype=float)
        for b in range(u.shape[0]):
            for c in range(2):
                out[b, c] = dsp.direct_convolve(u[b, c], h[c], mode="causal")
        return out


def default_processors(sample_rate: int = DEFAULT_SAMPLE_RATE, seed: int = 0) -> dict[NodeType, Processor]:
    return {
        NodeType.IN: Passthrough(NodeType.IN),
        NodeType.OUT: Passthrough(NodeType.OUT),
        NodeType.MIX: Passthrough(NodeType.MIX),
        NodeType.GAIN: Gain(),
        NodeType.EQ: ZeroPhaseEQ(),
        NodeType.COMPRESSOR: Compressor(),
        NodeType.NOISEGATE: NoiseGate(),
        NodeType.IMAGER: StereoImager(),
        NodeType.REVERB: FilteredNoiseReverb(sample_rate, seed),
        NodeType.DELAY: MultitapDelay(sample_rate),
    }

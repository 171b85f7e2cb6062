"""Multichannel STFT analysis and weighted overlap-add synthesis.

Conventions: one-sided spectrum, periodic Hamming analysis window, no
zero-padding (trailing partial windows are dropped), all scaling deferred
to the synthesis normalization so that istft(stft(x)) reconstructs interior
samples exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = 16000
    window_len: int | None = None  # defaults to 64 ms at sample_rate
    hop: int | None = None  # defaults to window_len // 2
    window: str = "hamming"

    def resolved(self):
        """Return a config with window_len/hop filled in from the defaults."""
        wl = self.window_len
        if wl is None:
            wl = int(round(0.064 * self.sample_rate))
        hop = self.hop if self.hop is not None else wl // 2
        if wl % 2 != 0:
            raise ValueError("window_len must be even, got %d" % wl)
        if not (0 < hop <= wl):
            raise ValueError("hop must satisfy 0 < hop <= window_len")
        return StftConfig(self.sample_rate, wl, hop, self.window)


def _window(kind, n):
    if kind == "hamming":
        # periodic form: clean overlap-add at 50% overlap
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if kind in ("rect", "rectangular", "boxcar"):
        return np.ones(n)
    raise ValueError("unknown window kind: %r" % (kind,))


@dataclass
class Spectrogram:
    """Complex multichannel time-frequency tensor, values indexed (f, m, t).

    A frame vector is the length M*F concatenation of per-bin channel
    blocks, i.e. ``values[:, :, t].ravel()``.
    """

    values: np.ndarray  # (F, M, T) complex
    config: StftConfig | None = None

    @property
    def bins(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]

    @property
    def frames(self):
        return self.values.shape[2]

    def frame_matrix(self):
        """(M*F, T) matrix whose column t is the frame vector y_t."""
        F, M, T = self.values.shape
        return self.values.reshape(F * M, T)

    @classmethod
    def from_frame_matrix(cls, frames, channels, config=None):
        frames = np.asarray(frames, dtype=np.complex128)
        mf, T = frames.shape
        if mf % channels != 0:
            raise ValueError("frame length %d not divisible by %d channels" % (mf, channels))
        F = mf // channels
        return cls(values=frames.reshape(F, channels, T), config=config)


def stft(signal, cfg):
    """Short-time Fourier transform of a (samples, channels) signal.

    Frame t covers samples [t*hop, t*hop + window_len); trailing partial
    windows are dropped, so T = floor((len - window_len)/hop) + 1.
    """
    cfg = cfg.resolved()
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim == 1:
        signal = signal[:, None]
    if signal.ndim != 2:
        raise ValueError("signal must be 2-D (samples, channels)")
    n, channels = signal.shape
    wl, hop = cfg.window_len, cfg.hop
    if n < wl:
        raise ValueError("input too short: %d samples < window_len %d" % (n, wl))
    w = _window(cfg.window, wl)
    T = (n - wl) // hop + 1
    F = wl // 2 + 1
    starts = np.arange(T) * hop
    out = np.empty((F, channels, T), dtype=np.complex128)
    for t, s in enumerate(starts):
        seg = signal[s : s + wl, :] * w[:, None]
        out[:, :, t] = np.fft.rfft(seg, axis=0)
    return Spectrogram(values=out, config=cfg)


def istft(spec):
    """Weighted overlap-add inverse with squared-window normalization.

    Perfect reconstruction on interior samples for unmodified spectrograms.
    """
    cfg = spec.config.resolved()
    F, M, T = spec.values.shape
    wl, hop = cfg.window_len, cfg.hop
    if F != wl // 2 + 1:
        raise ValueError("spectrogram bins inconsistent with window_len")
    w = _window(cfg.window, wl)
    n = (T - 1) * hop + wl
    out = np.zeros((n, M))
    wsum = np.zeros(n)
    for t in range(T):
        seg = np.fft.irfft(spec.values[:, :, t], n=wl, axis=0)
        s = t * hop
        out[s : s + wl, :] += seg * w[:, None]
        wsum[s : s + wl] += w * w
    if np.any(wsum < 1e-8):
        raise ValueError("non-invertible config: window-sum below 1e-8")
    out /= wsum[:, None]
    return out

"""Seeded speech-like test material: harmonic tone complexes and coloured noise."""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .signal import Waveform


def _envelope(rng, n, rate, syllable_hz=4.0):
    # smoothed positive noise at roughly syllabic rate
    n_ctrl = max(int(np.ceil(n / rate * syllable_hz)) + 2, 3)
    ctrl = rng.uniform(0.0, 1.0, n_ctrl) ** 2
    env = np.interp(np.linspace(0, n_ctrl - 1, n), np.arange(n_ctrl), ctrl)
    return 0.05 + env


def tone_complex(rng, n: int, rate: int, f0_range=(90.0, 260.0), n_harmonics: int = 12) -> np.ndarray:
    """Harmonic complex with slow pitch drift and a syllabic envelope."""
    t = np.arange(n) / rate
    f0 = rng.uniform(*f0_range)
    drift = 1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * drift) / rate
    out = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        if k * f0 * 1.1 >= rate / 2:
            break
        out += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    return out * _envelope(rng, n, rate)


def filtered_noise(rng, n: int, rate: int, order: int = 4) -> np.ndarray:
    """White noise through a random Butterworth band-pass."""
    nyq = rate / 2
    lo = rng.uniform(100.0, 0.3 * nyq)
    hi = rng.uniform(lo + 0.1 * nyq, 0.95 * nyq)
    sos = sps.butter(order, [lo / nyq, hi / nyq], btype="bandpass", output="sos")
    return sps.sosfilt(sos, rng.standard_normal(n))


def synthetic_source(rng, n: int, rate: int) -> Waveform:
    """Voiced tone complex plus a weaker filtered-noise component."""
    voiced = tone_complex(rng, n, rate)
    breath = filtered_noise(rng, n, rate)
    breath *= 0.2 * np.std(voiced) / max(np.std(breath), 1e-12)
    x = voiced + breath
    return Waveform(0.3 * x / np.max(np.abs(x)), rate)


def synthetic_noise(rng, n: int, rate: int) -> Waveform:
    """Low-pass tilted background noise."""
    b, a = sps.butter(1, 0.25)
    x = sps.lfilter(b, a, rng.standard_normal(n))
    return Waveform(0.1 * x / np.std(x), rate)

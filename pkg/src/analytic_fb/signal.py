"""Waveforms, WAV I/O, framing / overlap-add and SNR-controlled mixing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, DegenerateSignalError, FormatError, ShapeError

log = logging.getLogger(__name__)

PAD_POLICIES = ("default", "none")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono real signal with its sample rate (Hz)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).reshape(-1)
        if x.size < 1:
            raise DegenerateSignalError("waveform must contain at least one sample")
        if not np.all(np.isfinite(x)):
            raise DegenerateSignalError("waveform contains NaN or Inf")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def power(self) -> float:
        return float(np.mean(self.samples**2))

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class MixtureSpec:
    num_sources: int
    speaker_snr_db: float
    noise_snr_db: float | None = None

    def __post_init__(self):
        if self.num_sources < 2:
            raise ConfigError("a separation mixture needs at least two sources")


@dataclass(frozen=True)
class FrameGrid:
    """Framing metadata: enough to undo padding after overlap-add."""

    num_frames: int
    frame_len: int
    hop: int
    pad_front: int
    original_len: int

    @property
    def padded_len(self) -> int:
        return (self.num_frames - 1) * self.hop + self.frame_len


def read_wav(path) -> Waveform:
    """Read a mono PCM-16 or IEEE float32 WAV file.

    PCM-16 codes are divided by 32768, so the output lies in [-1, 1).
    """
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise FormatError(f"{path}: channels={data.shape[1]}, only mono is supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: encoding={data.dtype}, expected PCM-16 or float32")
    return Waveform(samples, rate)


def write_wav(path, wav: Waveform, encoding: str = "float32") -> int:
    """Write ``wav`` to ``path``. Returns the number of clipped samples (pcm16 only)."""
    path = Path(path)
    if encoding == "float32":
        wavfile.write(str(path), wav.sample_rate, wav.samples.astype(np.float32))
        return 0
    if encoding != "pcm16":
        raise ConfigError(f"encoding must be 'pcm16' or 'float32', got {encoding!r}")
    codes = np.round(wav.samples * 32768.0)
    n_clipped = int(np.count_nonzero((codes > 32767) | (codes < -32768)))
    if n_clipped:
        log.warning("%s: %d samples clipped to the PCM-16 range", path, n_clipped)
    wavfile.write(str(path), wav.sample_rate, np.clip(codes, -32768, 32767).astype(np.int16))
    return n_clipped


def _as_samples(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64).reshape(-1)


def frame_signal(x, frame_len: int, hop: int, pad_policy: str = "default"):
    """Cut ``x`` into overlapping frames.

    With the default policy ``frame_len - hop`` zeros are prepended and the
    tail is zero-padded so that every sample is covered by the same number of
    frames as an interior sample. ``"none"`` keeps only complete frames.

    Returns
    -------
    frames : ndarray, shape (K, frame_len)
    grid : FrameGrid
    """
    samples = _as_samples(x)
    if samples.size == 0:
        raise DegenerateSignalError("cannot frame an empty signal")
    if frame_len < 1 or not 1 <= hop <= frame_len:
        raise ConfigError(f"need frame_len >= 1 and 1 <= hop <= frame_len, got L={frame_len}, H={hop}")
    if pad_policy not in PAD_POLICIES:
        raise ConfigError(f"unknown pad_policy {pad_policy!r}")

    T = samples.size
    if pad_policy == "default":
        front = frame_len - hop
        body = front + T + (frame_len - hop)
        back = frame_len - hop + (-(body - frame_len)) % hop
        padded = np.concatenate([np.zeros(front), samples, np.zeros(back)])
    else:
        if T < frame_len:
            raise ConfigError(f"signal of length {T} is shorter than one frame ({frame_len})")
        front = 0
        padded = samples
    windows = np.lib.stride_tricks.sliding_window_view(padded, frame_len)[::hop]
    frames = np.ascontiguousarray(windows)
    grid = FrameGrid(frames.shape[0], frame_len, hop, front, T)
    return frames, grid


def overlap_add(frames, grid: FrameGrid, trim: bool = True) -> np.ndarray:
    """Sum hop-shifted frames; the adjoint of :func:`frame_signal`.

    Returns the trimmed signal of ``grid.original_len`` samples, or the full
    padded accumulation when ``trim`` is False.
    """
    frames = np.asarray(frames)
    if frames.shape != (grid.num_frames, grid.frame_len):
        raise ShapeError(f"frames have shape {frames.shape}, grid expects "
                         f"{(grid.num_frames, grid.frame_len)}")
    K, L, H = grid.num_frames, grid.frame_len, grid.hop
    out = np.zeros(grid.padded_len, dtype=frames.dtype)
    stop = (K - 1) * H + 1
    for ell in range(L):
        out[ell:ell + stop:H] += frames[:, ell]
    if not trim:
        return out
    seg = out[grid.pad_front:grid.pad_front + grid.original_len]
    if seg.size < grid.original_len:
        seg = np.concatenate([seg, np.zeros(grid.original_len - seg.size, dtype=out.dtype)])
    return seg


def _power(x: np.ndarray) -> float:
    return float(np.mean(x**2))


def mix_sources(s1: Waveform, s2: Waveform, speaker_snr_db: float,
                noise: Waveform | None = None, noise_snr_db: float | None = None):
    """Mix two sources (and optional noise) at the requested SNRs.

    ``s1`` keeps unit gain, ``s2`` is rescaled so that the s1-to-s2 power ratio
    equals ``speaker_snr_db``. Noise is scaled relative to the louder of the two
    scaled speakers. All inputs are truncated to the shortest length.

    Returns
    -------
    mixture : Waveform
    refs : list of Waveform
        The scaled sources ``[s1, s2']`` that sum (with noise) to the mixture.
    noise : Waveform or None
        The scaled noise actually added.
    """
    if s1.sample_rate != s2.sample_rate or (noise is not None and noise.sample_rate != s1.sample_rate):
        raise ConfigError("all signals must share one sample rate")
    if (noise is None) != (noise_snr_db is None):
        raise ConfigError("noise and noise_snr_db must be given together")
    lengths = [len(s1), len(s2)] + ([len(noise)] if noise is not None else [])
    T = min(lengths)
    a, b = s1.samples[:T], s2.samples[:T]
    pa, pb = _power(a), _power(b)
    if pa == 0.0 or pb == 0.0:
        raise DegenerateSignalError("source has zero power")
    b = b * np.sqrt(pa / (pb * 10.0 ** (speaker_snr_db / 10.0)))
    mix = a + b
    scaled_noise = None
    if noise is not None:
        n = noise.samples[:T]
        pn = _power(n)
        if pn == 0.0:
            raise DegenerateSignalError("noise has zero power")
        loudest = max(pa, _power(b))
        n = n * np.sqrt(loudest / (pn * 10.0 ** (noise_snr_db / 10.0)))
        mix = mix + n
        scaled_noise = Waveform(n, s1.sample_rate)
    rate = s1.sample_rate
    return Waveform(mix, rate), [Waveform(a, rate), Waveform(b, rate)], scaled_noise

"""Filterbank construction: STFT, parameterized sinc and free families.

Conventions shared by every family
----------------------------------
* Analysis rows ``u_n`` are applied by correlation (``X = frames @ U.T``) and
  carry the ``exp(-2j*pi*f*t)`` orientation; synthesis rows ``v_n`` carry
  ``exp(+2j*pi*f*t)``. For analytic families this means ``v_n`` and
  ``conj(u_n)`` have one-sided (positive-frequency) spectra.
* The decoder output is ``Re(sum_n Y_n * scale_n * v_n)``, so a complex
  coefficient acts like the pair of real filters ``(Re v_n, -Im v_n)``.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError

EPS_WIDTH = 1e-3
DUMP_FORMAT = "analytic-fb/filterbank"
DUMP_VERSION = 1


class Family(str, enum.Enum):
    STFT = "stft"
    PARAM_SINC = "param-sinc"
    PARAM_SINC_ANALYTIC = "param-sinc-analytic"
    FREE = "free"
    FREE_ANALYTIC = "free-analytic"

    @property
    def is_parametric(self) -> bool:
        return self in (Family.PARAM_SINC, Family.PARAM_SINC_ANALYTIC)

    @property
    def is_analytic(self) -> bool:
        return self in (Family.STFT, Family.PARAM_SINC_ANALYTIC, Family.FREE_ANALYTIC)


@dataclass(frozen=True)
class FilterbankConfig:
    family: Family
    n_filters: int
    kernel_len: int
    hop: int | None = None
    sample_rate: int = 8000

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        L = self.kernel_len
        if L < 1:
            raise ConfigError(f"kernel_len must be >= 1, got {L}")
        if self.hop is None:
            object.__setattr__(self, "hop", max(L // 2, 1))
        if not 1 <= self.hop <= L:
            raise ConfigError(f"hop must satisfy 1 <= H <= L, got H={self.hop}, L={L}")
        if self.family is Family.STFT:
            if L % 2:
                raise ConfigError(f"STFT needs an even kernel_len, got {L}")
            object.__setattr__(self, "n_filters", L // 2 + 1)
        if self.n_filters < 1:
            raise ConfigError(f"n_filters must be >= 1, got {self.n_filters}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "n_filters": self.n_filters,
                "kernel_len": self.kernel_len, "hop": self.hop,
                "sample_rate": self.sample_rate}


@dataclass(frozen=True, eq=False)
class ParamSincParams:
    """Normalized band edges (cycles/sample) and synthesis gains per filter."""

    f1: np.ndarray
    f2: np.ndarray
    gains: np.ndarray | None = None

    def __post_init__(self):
        f1 = np.atleast_1d(np.asarray(self.f1, dtype=np.float64))
        f2 = np.atleast_1d(np.asarray(self.f2, dtype=np.float64))
        if f1.shape != f2.shape or f1.ndim != 1:
            raise ShapeError("f1 and f2 must be 1-D arrays of equal length")
        gains = np.ones_like(f1) if self.gains is None else np.atleast_1d(
            np.asarray(self.gains, dtype=np.float64))
        if gains.shape != f1.shape:
            raise ShapeError("gains must have one entry per filter")
        if np.any(f1 < 0) or np.any(f2 > 0.5):
            raise ConfigError("band edges must satisfy 0 <= f1 and f2 <= 0.5")
        if np.any(f2 - f1 < EPS_WIDTH * (1 - 1e-9)):
            raise ConfigError(f"bandwidth f2 - f1 must be >= {EPS_WIDTH}")
        for name, arr in (("f1", f1), ("f2", f2), ("gains", gains)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_unconstrained(cls, theta_low, theta_width, gains=None):
        """Map free real parameters onto valid bands.

        ``f1 = |theta_low|``, ``f2 = min(f1 + EPS_WIDTH + |theta_width|, 0.5)``.
        """
        f1 = np.abs(np.asarray(theta_low, dtype=np.float64))
        f1 = np.minimum(f1, 0.5 - EPS_WIDTH)
        f2 = np.minimum(f1 + EPS_WIDTH + np.abs(np.asarray(theta_width, dtype=np.float64)), 0.5)
        return cls(f1, f2, gains)

    @property
    def n_filters(self) -> int:
        return self.f1.size

    @property
    def width(self) -> np.ndarray:
        return self.f2 - self.f1

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.f1 + self.f2)

    def with_gains(self, gains) -> "ParamSincParams":
        return ParamSincParams(self.f1, self.f2, gains)


@dataclass(frozen=True, eq=False)
class Filterbank:
    config: FilterbankConfig
    analysis: np.ndarray
    synthesis: np.ndarray
    params: ParamSincParams | None = None
    windows: tuple | None = None
    synthesis_scale: np.ndarray | None = field(default=None)

    def __post_init__(self):
        U = np.asarray(self.analysis, dtype=np.complex128)
        V = np.asarray(self.synthesis, dtype=np.complex128)
        shape = (self.config.n_filters, self.config.kernel_len)
        if U.shape != shape or V.shape != shape:
            raise ShapeError(f"filters must have shape {shape}, got {U.shape} and {V.shape}")
        scale = np.ones(shape[0]) if self.synthesis_scale is None else np.asarray(
            self.synthesis_scale, dtype=np.float64)
        if scale.shape != (shape[0],):
            raise ShapeError("synthesis_scale needs one entry per filter")
        for name, arr in (("analysis", U), ("synthesis", V), ("synthesis_scale", scale)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def family(self) -> Family:
        return self.config.family

    @property
    def n_filters(self) -> int:
        return self.config.n_filters

    @property
    def kernel_len(self) -> int:
        return self.config.kernel_len

    @property
    def hop(self) -> int:
        return self.config.hop

    @property
    def id(self) -> str:
        h = hashlib.sha1(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for arr in (self.analysis, self.synthesis, self.synthesis_scale):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# Hilbert transform


def discrete_hilbert(u) -> np.ndarray:
    """Discrete analytic signal ``u + 1j * H[u]`` computed with the DFT.

    Bin 0 (and bin L/2 for even L) is kept, positive bins are doubled and
    negative bins are zeroed. Works along the last axis.
    """
    u = np.asarray(u, dtype=np.float64)
    L = u.shape[-1]
    if L < 2:
        raise ConfigError(f"Hilbert transform needs at least 2 samples, got {L}")
    h = np.zeros(L)
    h[0] = 1.0
    if L % 2 == 0:
        h[1:L // 2] = 2.0
        h[L // 2] = 1.0
    else:
        h[1:(L + 1) // 2] = 2.0
    z = np.fft.ifft(np.fft.fft(u, axis=-1) * h, axis=-1)
    # the real part is u up to roundoff; restore it exactly
    return u + 1j * z.imag


def make_analytic_bank(real_bank) -> np.ndarray:
    """Row-wise analytic extension of a real N x L filter matrix."""
    real_bank = np.atleast_2d(np.asarray(real_bank, dtype=np.float64))
    return discrete_hilbert(real_bank)


def sinc_bandpass_hilbert(f1, f2, t) -> np.ndarray:
    """Exact Hilbert transform of the ideal band-pass ``2 f2 sinc - 2 f1 sinc``.

    Evaluated on the (untruncated) continuous-time impulse response at the
    sample times ``t``; used as an oracle for filter analyticity.
    """
    t = np.asarray(t, dtype=np.float64)
    f1 = np.atleast_1d(np.asarray(f1, dtype=np.float64))[:, None]
    f2 = np.atleast_1d(np.asarray(f2, dtype=np.float64))[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (np.cos(2 * np.pi * f1 * t) - np.cos(2 * np.pi * f2 * t)) / (np.pi * t)
    return np.where(t == 0, 0.0, out)


# --------------------------------------------------------------------------
# Parameterized sinc family


def centered_time(L: int) -> np.ndarray:
    """Sample times ``0..L-1`` shifted so the grid is centred on zero."""
    return np.arange(L) - (L - 1) / 2.0


def _sinc(x):
    # sin(x)/x with sinc(0) = 1
    return np.sinc(x / np.pi)


def sinc_envelope(width, t) -> np.ndarray:
    """Low-pass envelope ``2 f_w sinc(pi f_w t)`` whose modulation by
    ``cos(2 pi f_c t)`` equals the difference of low-passes at f2 and f1."""
    width = np.atleast_1d(np.asarray(width, dtype=np.float64))[:, None]
    return 2.0 * width * _sinc(np.pi * width * t)


def lowpass_difference(f1, f2, t) -> np.ndarray:
    """``2 f2 sinc(2 pi f2 t) - 2 f1 sinc(2 pi f1 t)``, rows per filter."""
    f1 = np.atleast_1d(np.asarray(f1, dtype=np.float64))[:, None]
    f2 = np.atleast_1d(np.asarray(f2, dtype=np.float64))[:, None]
    return 2 * f2 * _sinc(2 * np.pi * f2 * t) - 2 * f1 * _sinc(2 * np.pi * f1 * t)


def param_sinc_filters(params: ParamSincParams, L: int, analytic: bool = True,
                       window: bool = True):
    """Raw analysis / synthesis matrices of a sinc bank (no config checks)."""
    t = centered_time(L)
    env = sinc_envelope(params.width, t)
    phase = 2 * np.pi * params.center[:, None] * t
    if analytic:
        U = env * np.exp(-1j * phase)
        V = params.gains[:, None] * env * np.exp(1j * phase)
    else:
        U = (env * np.cos(phase)).astype(np.complex128)
        V = params.gains[:, None] * U
    if window:
        w = np.hamming(L)
        U, V = U * w, V * w
    return U, V


def build_param_sinc(params: ParamSincParams, analytic: bool, config: FilterbankConfig) -> Filterbank:
    """Windowed sinc band-pass bank, analytic or real (even) form."""
    if params.n_filters != config.n_filters:
        raise ConfigError(f"params describe {params.n_filters} filters, config wants {config.n_filters}")
    expected = Family.PARAM_SINC_ANALYTIC if analytic else Family.PARAM_SINC
    if config.family is not expected:
        config = FilterbankConfig(expected, config.n_filters, config.kernel_len,
                                  config.hop, config.sample_rate)
    U, V = param_sinc_filters(params, config.kernel_len, analytic)
    w = np.hamming(config.kernel_len)
    return Filterbank(config, U, V, params=params, windows=(w, w))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def init_param_frequencies(N: int, sample_rate: int, f_min_hz: float = 30.0) -> ParamSincParams:
    """Mel-spaced bands between ``f_min_hz`` and Nyquist.

    N + 2 mel-equidistant edge points are drawn; filter n spans points
    n .. n+2, so its bandwidth is the spacing to both neighbours. Widths are
    raised to ``EPS_WIDTH`` where the mel grid is finer than that.
    """
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    nyq = sample_rate / 2.0
    if not 0 <= f_min_hz < nyq:
        raise ConfigError(f"f_min_hz must lie in [0, {nyq}), got {f_min_hz}")
    edges = _mel_to_hz(np.linspace(_hz_to_mel(f_min_hz), _hz_to_mel(nyq), N + 2)) / sample_rate
    edges[-1] = 0.5
    f1 = edges[:-2]
    f2 = np.minimum(np.maximum(edges[2:], f1 + EPS_WIDTH), 0.5)
    fc = 0.5 * (f1 + f2)
    if np.any(f2 - f1 < EPS_WIDTH * (1 - 1e-9)) or np.any(np.diff(fc) <= 0):
        raise ConfigError(f"cannot place {N} distinct bands of width >= {EPS_WIDTH} "
                          f"between {f_min_hz} Hz and Nyquist")
    return ParamSincParams(f1, f2)


# --------------------------------------------------------------------------
# STFT


def _window(kind: str, L: int) -> np.ndarray:
    n = np.arange(L)
    if kind == "sqrt-hann":
        return np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * n / L))
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / L)
    if kind in ("rect", "boxcar"):
        return np.ones(L)
    raise ConfigError(f"unknown window kind {kind!r}")


def cola_sum(h_a, h_s, hop: int) -> np.ndarray:
    """Overlap-added product window, one value per phase ``t mod hop``."""
    prod = np.asarray(h_a) * np.asarray(h_s)
    L = prod.size
    acc = np.zeros(hop)
    for start in range(0, L, hop):
        chunk = prod[start:start + hop]
        acc[:chunk.size] += chunk
    return acc


def build_stft_filterbank(config: FilterbankConfig, window_kind: str = "sqrt-hann") -> Filterbank:
    """One-sided STFT bank with ``L/2 + 1`` bins.

    The per-bin synthesis scale folds in the Hermitian weighting (1 for DC and
    Nyquist, 2 elsewhere), the 1/L of the inverse DFT and the COLA constant.
    """
    if config.family is not Family.STFT:
        config = FilterbankConfig(Family.STFT, 0, config.kernel_len, config.hop, config.sample_rate)
    L, H = config.kernel_len, config.hop
    h_a = _window(window_kind, L)
    h_s = h_a.copy()
    cola = cola_sum(h_a, h_s, H)
    if np.ptp(cola) > 1e-10 * np.max(np.abs(cola)) or np.max(np.abs(cola)) == 0:
        raise ConfigError(f"window {window_kind!r} with L={L} is not COLA at hop {H}")
    n = np.arange(L // 2 + 1)[:, None]
    t = np.arange(L)
    U = h_a * np.exp(-2j * np.pi * n * t / L)
    V = h_s * np.exp(2j * np.pi * n * t / L)
    weight = np.full(L // 2 + 1, 2.0)
    weight[0] = weight[-1] = 1.0
    scale = weight / (L * cola.mean())
    return Filterbank(config, U, V, windows=(h_a, h_s), synthesis_scale=scale)


# --------------------------------------------------------------------------
# Free family


def dual_synthesis(analysis_real, hop: int, analytic: bool) -> np.ndarray:
    """Real synthesis filters giving perfect reconstruction for fixed analysis.

    For the real bank this is the scaled pseudo-inverse. For the analytic
    extension the quadrature pair already doubles every bin except DC and
    Nyquist, so the real-part product is set to the circulant that halves
    those bins' complement.
    """
    A = np.atleast_2d(np.asarray(analysis_real, dtype=np.float64))
    N, L = A.shape
    c = hop / L
    if analytic:
        d = np.full(L, 0.5)
        d[0] = 1.0
        if L % 2 == 0:
            d[L // 2] = 1.0
        M = c * np.real(np.fft.ifft(d[:, None] * np.fft.fft(np.eye(L), axis=0), axis=0))
    else:
        M = c * np.eye(L)
    return np.linalg.pinv(A).T @ M.T


def default_free_weights(N: int, L: int, hop: int | None = None, analytic: bool = False,
                         seed: int = 0):
    """Seeded Gaussian analysis filters plus their reconstruction dual."""
    hop = hop or max(L // 2, 1)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, L)) / np.sqrt(L)
    return A, dual_synthesis(A, hop, analytic)


def build_free_filterbank(analysis_real, synthesis_real, analytic: bool,
                          config: FilterbankConfig) -> Filterbank:
    """Free bank from externally supplied real weights.

    With ``analytic`` the stored analysis rows are ``conj(u + jH[u])`` and the
    synthesis rows ``v + jH[v]``, matching the orientation of the other
    families.
    """
    A = np.atleast_2d(np.asarray(analysis_real, dtype=np.float64))
    S = np.atleast_2d(np.asarray(synthesis_real, dtype=np.float64))
    family = Family.FREE_ANALYTIC if analytic else Family.FREE
    if config.family is not family:
        config = FilterbankConfig(family, config.n_filters, config.kernel_len,
                                  config.hop, config.sample_rate)
    if analytic:
        U, V = np.conj(make_analytic_bank(A)), make_analytic_bank(S)
    else:
        U, V = A, S
    return Filterbank(config, U, V)


def build_filterbank(config: FilterbankConfig, params: ParamSincParams | None = None,
                     free_weights=None, window_kind: str = "sqrt-hann",
                     seed: int = 0) -> Filterbank:
    """Dispatch on ``config.family`` with sensible defaults for each family."""
    fam = config.family
    if fam is Family.STFT:
        return build_stft_filterbank(config, window_kind)
    if fam.is_parametric:
        if params is None:
            params = init_param_frequencies(config.n_filters, config.sample_rate)
        return build_param_sinc(params, fam is Family.PARAM_SINC_ANALYTIC, config)
    analytic = fam is Family.FREE_ANALYTIC
    if free_weights is None:
        free_weights = default_free_weights(config.n_filters, config.kernel_len,
                                            config.hop, analytic, seed)
    return build_free_filterbank(free_weights[0], free_weights[1], analytic, config)


# --------------------------------------------------------------------------
# Inspection


def filter_frequency_response(filt, n_fft: int) -> np.ndarray:
    """Magnitude of the ``n_fft``-point zero-padded DFT of one filter."""
    filt = np.asarray(filt)
    if n_fft < filt.shape[-1]:
        raise ConfigError(f"n_fft={n_fft} is shorter than the filter ({filt.shape[-1]})")
    return np.abs(np.fft.fft(filt, n=n_fft, axis=-1))


def peak_frequency(filt, n_fft: int = 4096) -> np.ndarray:
    """Signed normalized frequency (cycles/sample) of each filter's peak."""
    resp = filter_frequency_response(filt, n_fft)
    freqs = np.fft.fftfreq(n_fft)
    return freqs[np.argmax(resp, axis=-1)]


# --------------------------------------------------------------------------
# Dump format


def _complex_block(M) -> dict:
    return {"real": np.real(M).tolist(), "imag": np.imag(M).tolist()}


def filterbank_to_dict(bank: Filterbank, extra: dict | None = None) -> dict:
    out = {
        "format": DUMP_FORMAT,
        "version": DUMP_VERSION,
        "config": bank.config.to_dict(),
        "params": None,
        "windows": None,
        "synthesis_scale": bank.synthesis_scale.tolist(),
        "analysis": _complex_block(bank.analysis),
        "synthesis": _complex_block(bank.synthesis),
    }
    if bank.params is not None:
        out["params"] = {"f1": bank.params.f1.tolist(), "f2": bank.params.f2.tolist(),
                         "gains": bank.params.gains.tolist()}
    if bank.windows is not None:
        out["windows"] = {"analysis": list(map(float, bank.windows[0])),
                          "synthesis": list(map(float, bank.windows[1]))}
    if extra:
        out.update(extra)
    return out


def filterbank_from_dict(d: dict) -> Filterbank:
    if d.get("format") != DUMP_FORMAT:
        raise FormatError(f"format={d.get('format')!r}, expected {DUMP_FORMAT!r}")
    if d.get("version") != DUMP_VERSION:
        raise FormatError(f"version={d.get('version')!r}, expected {DUMP_VERSION}")
    cfg = d["config"]
    config = FilterbankConfig(Family(cfg["family"]), cfg["n_filters"], cfg["kernel_len"],
                              cfg["hop"], cfg["sample_rate"])
    def block(b):
        return np.asarray(b["real"], dtype=np.float64) + 1j * np.asarray(b["imag"], dtype=np.float64)
    params = None
    if d.get("params"):
        p = d["params"]
        params = ParamSincParams(p["f1"], p["f2"], p["gains"])
    windows = None
    if d.get("windows"):
        windows = (np.asarray(d["windows"]["analysis"]), np.asarray(d["windows"]["synthesis"]))
    return Filterbank(config, block(d["analysis"]), block(d["synthesis"]), params=params,
                      windows=windows, synthesis_scale=d.get("synthesis_scale"))


def save_filterbank(path, bank: Filterbank, extra: dict | None = None) -> None:
    """Write a JSON dump; floats are emitted as shortest round-trip decimals."""
    Path(path).write_text(json.dumps(filterbank_to_dict(bank, extra), indent=1))


def load_filterbank(path) -> Filterbank:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON filterbank dump ({exc})") from exc
    return filterbank_from_dict(d)

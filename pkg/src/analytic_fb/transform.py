"""Encoder / decoder: framed analysis, overlap-add synthesis, network inputs."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .filterbank import Filterbank
from .signal import FrameGrid, Waveform, frame_signal, overlap_add


@dataclass(frozen=True, eq=False)
class TFRepresentation:
    coeffs: np.ndarray
    grid: FrameGrid
    bank_id: str

    def __post_init__(self):
        X = np.asarray(self.coeffs, dtype=np.complex128)
        if X.ndim != 2 or X.shape[0] != self.grid.num_frames:
            raise ShapeError(f"coefficients {X.shape} do not match {self.grid.num_frames} frames")
        if not np.all(np.isfinite(X)):
            raise ShapeError("coefficients must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "coeffs", X)

    @property
    def shape(self):
        return self.coeffs.shape

    def with_coeffs(self, coeffs) -> "TFRepresentation":
        return TFRepresentation(coeffs, self.grid, self.bank_id)


class InputKind(str, enum.Enum):
    MAG = "mag"
    REIM = "reim"
    MAGREIM = "magreim"


@dataclass(frozen=True, eq=False)
class InputRep:
    kind: InputKind
    data: np.ndarray


def analyze(x: Waveform, bank: Filterbank, method: str = "direct") -> TFRepresentation:
    """X[k, n] = sum_t x_pad[k*H + t] * u_n[t]  (a correlation, not a convolution).

    ``method="fft"`` computes the same correlations through full-length FFTs;
    the direct product is the reference.
    """
    if x.sample_rate != bank.config.sample_rate:
        raise ConfigError(f"signal rate {x.sample_rate} Hz differs from filterbank rate "
                          f"{bank.config.sample_rate} Hz")
    frames, grid = frame_signal(x, bank.kernel_len, bank.hop)
    if method == "direct":
        X = frames @ bank.analysis.T
    elif method == "fft":
        X = _analyze_fft(frames, grid, bank.analysis)
    else:
        raise ConfigError(f"unknown analysis method {method!r}")
    return TFRepresentation(X, grid, bank.id)


def _analyze_fft(frames, grid: FrameGrid, U) -> np.ndarray:
    # rebuild the padded signal from the frames, correlate every filter with it
    K, L, H = grid.num_frames, grid.frame_len, grid.hop
    padded = np.empty(grid.padded_len)
    for k in range(K):
        padded[k * H:k * H + L] = frames[k]
    n_fft = 1 << int(np.ceil(np.log2(padded.size + L - 1)))
    Xs = np.fft.fft(padded, n_fft)
    Uf = np.fft.fft(U[:, ::-1], n_fft, axis=-1)
    # conv(x, reversed u)[tau + L - 1] == sum_t x[tau + t] u[t]
    full = np.fft.ifft(Xs[None, :] * Uf, axis=-1)
    return full[:, np.arange(K) * H + L - 1].T


def synthesize(Y: TFRepresentation, bank: Filterbank) -> Waveform:
    """Transposed convolution: overlap-add of Re(sum_n Y[k, n] v_n), trimmed."""
    if Y.coeffs.shape[1] != bank.n_filters or Y.grid.frame_len != bank.kernel_len \
            or Y.grid.hop != bank.hop:
        raise ShapeError(f"representation {Y.coeffs.shape} (L={Y.grid.frame_len}, "
                         f"H={Y.grid.hop}) does not match the filterbank "
                         f"(N={bank.n_filters}, L={bank.kernel_len}, H={bank.hop})")
    frames = np.real((Y.coeffs * bank.synthesis_scale) @ bank.synthesis)
    return Waveform(overlap_add(frames, Y.grid), bank.config.sample_rate)


def input_representation(X: TFRepresentation, kind) -> InputRep:
    """Mag, Re+Im, or Mag+Re+Im features, concatenated along the filter axis."""
    kind = InputKind(kind)
    C = X.coeffs
    if kind is InputKind.MAG:
        data = np.abs(C)
    elif kind is InputKind.REIM:
        data = np.concatenate([C.real, C.imag], axis=1)
    else:
        data = np.concatenate([np.abs(C), C.real, C.imag], axis=1)
    return InputRep(kind, data)


# --------------------------------------------------------------------------
# decimal-text matrix dump (debugging / external masks)


def save_matrix_text(path, M, kind: str) -> None:
    """Frame-major text dump; complex entries are written as ``re im`` pairs."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ShapeError("only 2-D matrices can be dumped")
    rows, cols = M.shape
    if np.iscomplexobj(M):
        body = np.empty((rows, 2 * cols))
        body[:, 0::2], body[:, 1::2] = M.real, M.imag
        dtype = "complex"
    else:
        body, dtype = M, "real"
    header = f"tfdump kind={kind} dtype={dtype} rows={rows} cols={cols}"
    np.savetxt(path, body, fmt="%.17g", header=header)


def load_matrix_text(path):
    """Inverse of :func:`save_matrix_text`. Returns ``(matrix, kind)``."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    if not first.startswith("# tfdump"):
        raise FormatError(f"{path}: missing '# tfdump' header")
    meta = dict(item.split("=", 1) for item in first[2:].split()[1:])
    try:
        rows, cols, dtype, kind = int(meta["rows"]), int(meta["cols"]), meta["dtype"], meta["kind"]
    except KeyError as exc:
        raise FormatError(f"{path}: header lacks field {exc}") from exc
    body = np.loadtxt(path, ndmin=2)
    width = 2 * cols if dtype == "complex" else cols
    if body.shape != (rows, width):
        raise FormatError(f"{path}: body has shape {body.shape}, header says {(rows, width)}")
    if dtype == "complex":
        return body[:, 0::2] + 1j * body[:, 1::2], kind
    return body, kind


def save_tf_text(path, X: TFRepresentation) -> None:
    save_matrix_text(path, X.coeffs, "tf")

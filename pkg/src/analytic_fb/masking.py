"""Mask application (Mag, Compl, Re+Im) and oracle masks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .transform import TFRepresentation, load_matrix_text, save_matrix_text

EPS = 1e-8
M_MAX = 10.0


class MaskKind(str, enum.Enum):
    MAG = "mag"
    COMPL = "compl"
    REIM = "reim"


@dataclass(frozen=True, eq=False)
class Mask:
    kind: MaskKind
    data: np.ndarray

    def __post_init__(self):
        kind = MaskKind(self.kind)
        dtype = np.complex128 if kind is MaskKind.COMPL else np.float64
        data = np.asarray(self.data)
        if kind is not MaskKind.COMPL and np.iscomplexobj(data):
            raise ShapeError(f"{kind.value} masks must be real")
        data = data.astype(dtype)
        if data.ndim != 2:
            raise ShapeError("mask data must be 2-D")
        if kind is MaskKind.MAG and np.any(data < 0):
            raise ShapeError("Mag masks must be non-negative")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", data)

    def expected_shape(self, X: TFRepresentation):
        K, N = X.coeffs.shape
        return (K, 2 * N) if self.kind is MaskKind.REIM else (K, N)


def apply_mask(X: TFRepresentation, m: Mask) -> TFRepresentation:
    """Point-wise masking.

    Mag masks scale the complex coefficients (mixture phase is kept), Compl
    masks multiply as complex numbers, Re+Im masks scale the real and
    imaginary parts independently.
    """
    if m.data.shape != m.expected_shape(X):
        raise ShapeError(f"{m.kind.value} mask of shape {m.data.shape} cannot be applied to "
                         f"coefficients of shape {X.coeffs.shape}")
    C = X.coeffs
    if m.kind is MaskKind.REIM:
        N = C.shape[1]
        Y = m.data[:, :N] * C.real + 1j * (m.data[:, N:] * C.imag)
    else:
        Y = m.data * C
    return X.with_coeffs(Y)


def _check_grids(S, X):
    for s in S:
        if s.grid != X.grid or s.bank_id != X.bank_id or s.coeffs.shape != X.coeffs.shape:
            raise ShapeError("source and mixture representations must share bank and frame grid")


def _guarded(den, eps):
    # keep the sign, push magnitudes below eps up to eps
    sign = np.where(den < 0, -1.0, 1.0)
    return sign * np.maximum(np.abs(den), eps)


def ideal_masks(S, X: TFRepresentation, kind, clip: float = M_MAX, eps: float = EPS):
    """Oracle masks mapping the mixture representation onto each source.

    Parameters
    ----------
    S : list of TFRepresentation
        Source representations, same bank and grid as ``X``.
    X : TFRepresentation
        Mixture representation.
    kind : MaskKind or str
    clip : float
        Upper bound on mask magnitude (per component for Re+Im).
    eps : float
        Floor on denominators.
    """
    kind = MaskKind(kind)
    _check_grids(S, X)
    C = X.coeffs
    masks = []
    for s in S:
        Sc = s.coeffs
        if kind is MaskKind.MAG:
            data = np.minimum(np.abs(Sc) / np.maximum(np.abs(C), eps), clip)
        elif kind is MaskKind.COMPL:
            data = Sc * np.conj(C) / np.maximum(np.abs(C), eps) ** 2
            data = data * np.minimum(1.0, clip / np.maximum(np.abs(data), eps))
        else:
            m_re = np.clip(Sc.real / _guarded(C.real, eps), -clip, clip)
            m_im = np.clip(Sc.imag / _guarded(C.imag, eps), -clip, clip)
            data = np.concatenate([m_re, m_im], axis=1)
        masks.append(Mask(kind, data))
    return masks


def irm(S, noise: TFRepresentation | None = None, eps: float = EPS):
    """Ideal ratio masks ``|S_i| / (sum_c |S_c| + |noise| + eps)``."""
    if noise is not None:
        _check_grids(S, noise)
    elif len(S) > 1:
        _check_grids(S[1:], S[0])
    mags = [np.abs(s.coeffs) for s in S]
    den = np.sum(mags, axis=0) + eps
    if noise is not None:
        den = den + np.abs(noise.coeffs)
    return [Mask(MaskKind.MAG, m / den) for m in mags]


def save_mask(path, m: Mask) -> None:
    save_matrix_text(path, m.data, m.kind.value)


def load_mask(path) -> Mask:
    data, kind = load_matrix_text(path)
    return Mask(MaskKind(kind), data)

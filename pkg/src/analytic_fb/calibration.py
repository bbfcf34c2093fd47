"""Least-squares synthesis gains and gradients of the sinc filters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, ConfigError, InvalidStepError
from .filterbank import (Filterbank, FilterbankConfig, ParamSincParams, build_param_sinc,
                         centered_time, sinc_envelope)
from .signal import Waveform, frame_signal
from .transform import analyze

DAMPING = 1e-8


def calibration_noise(n_signals: int = 4, sample_rate: int = 8000, duration: float = 1.0,
                      seed: int = 0):
    """Seeded white-noise calibration signals."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    return [Waveform(rng.standard_normal(n), sample_rate) for _ in range(n_signals)]


def per_filter_reconstructions(x: Waveform, bank: Filterbank) -> np.ndarray:
    """T x N matrix whose column n is the output synthesized from filter n alone."""
    X = analyze(x, bank).coeffs * bank.synthesis_scale
    _, grid = frame_signal(x, bank.kernel_len, bank.hop)
    K, L, H = grid.num_frames, grid.frame_len, grid.hop
    out = np.zeros((grid.padded_len, bank.n_filters))
    stop = (K - 1) * H + 1
    for ell in range(L):
        # contribution of every (frame, filter) pair at in-frame offset ell
        out[ell:ell + stop:H] += np.real(X * bank.synthesis[:, ell])
    return out[grid.pad_front:grid.pad_front + grid.original_len]


def _unit_gain_bank(bank: Filterbank) -> Filterbank:
    if bank.params is None or not bank.family.is_parametric:
        raise ConfigError(f"gain fitting needs a parametric sinc bank, got {bank.family.value}")
    return build_param_sinc(bank.params.with_gains(np.ones(bank.n_filters)),
                            bank.family.value.endswith("analytic"), bank.config)


def reconstruction_objective(bank: Filterbank, calib, gains) -> float:
    """Sum of squared reconstruction errors of ``calib`` for given gains."""
    unit = _unit_gain_bank(bank)
    total = 0.0
    for x in calib:
        r = x.samples - per_filter_reconstructions(x, unit) @ np.asarray(gains, dtype=np.float64)
        total += float(r @ r)
    return total


def fit_synthesis_gains(bank: Filterbank, calib=None) -> np.ndarray:
    """Closed-form gains minimizing the calibration reconstruction error.

    The decoder is linear in the gains, so the optimum solves the normal
    equations ``(A + lam I) g = b + lam 1`` with ``A = sum R^T R``,
    ``b = sum R^T x`` and ``lam = 1e-8 * trace(A) / N``. The damping pulls
    towards unit gains, which guarantees the result is never worse than g = 1.
    """
    unit = _unit_gain_bank(bank)
    if calib is None:
        calib = calibration_noise(sample_rate=bank.config.sample_rate)
    if len(calib) == 0:
        raise ConfigError("calibration set is empty")
    N = bank.n_filters
    A = np.zeros((N, N))
    b = np.zeros(N)
    for x in calib:
        R = per_filter_reconstructions(x, unit)
        A += R.T @ R
        b += R.T @ x.samples
    lam = DAMPING * np.trace(A) / N
    if not np.isfinite(lam) or lam <= 0:
        raise ConditioningError("calibration signals produce no filter response")
    lhs = A + lam * np.eye(N)
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise ConditioningError(f"normal equations are singular (condition number {cond:.3g})")
    return np.linalg.solve(lhs, b + lam * np.ones(N))


def with_gains(bank: Filterbank, gains) -> Filterbank:
    return build_param_sinc(bank.params.with_gains(gains),
                            bank.family.value.endswith("analytic"), bank.config)


# --------------------------------------------------------------------------
# gradients


def param_filter_gradients(params: ParamSincParams, config: FilterbankConfig,
                           window: bool = True):
    """Partial derivatives of the analytic analysis filters.

    With ``u = 2 f_w sinc(pi f_w t) exp(-2j pi f_c t) * w(t)``:

    * ``du/df_c = -2j pi t * u``
    * ``du/df_w = 2 cos(pi f_w t) exp(-2j pi f_c t) * w(t)``, which is
      continuous at t = 0.

    Returns two complex arrays of shape (N, L): ``(d_width, d_center)``.
    Chain rule to band edges: ``d/df1 = -d/df_w + d/df_c / 2`` and
    ``d/df2 = d/df_w + d/df_c / 2``.
    """
    L = config.kernel_len
    t = centered_time(L)
    carrier = np.exp(-2j * np.pi * params.center[:, None] * t)
    w = np.hamming(L) if window else np.ones(L)
    u = sinc_envelope(params.width, t) * carrier * w
    d_center = -2j * np.pi * t * u
    d_width = 2.0 * np.cos(np.pi * params.width[:, None] * t) * carrier * w
    return d_width, d_center


def analytic_filter(width: float, center: float, L: int, window: bool = True) -> np.ndarray:
    """One analytic analysis filter as a function of (f_w, f_c)."""
    t = centered_time(L)
    u = sinc_envelope(width, t)[0] * np.exp(-2j * np.pi * center * t)
    return u * np.hamming(L) if window else u


@dataclass
class GradReport:
    max_rel_error: float
    errors: list
    step: float
    params: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"max_rel_error": self.max_rel_error, "errors": list(self.errors),
                "step": self.step, "params": list(self.params)}


def finite_diff_check(objective, gradient, params, step: float = 1e-6) -> GradReport:
    """Compare ``gradient(params)`` with central differences of ``objective``.

    ``objective`` maps a 1-D parameter vector to a scalar or array;
    ``gradient`` returns one derivative (same shape as the objective value)
    per parameter. The error for parameter i is
    ``|fd_i - g_i| / max(|g_i|, |fd_i|)`` in the 2-norm.
    """
    p = np.asarray(params, dtype=np.float64).reshape(-1)
    if not np.isfinite(step) or step <= 0:
        raise InvalidStepError(f"step must be a positive finite number, got {step}")
    if np.any(p + step == p):
        raise InvalidStepError(f"step {step} underflows relative to the parameters")
    analytic = list(gradient(p))
    if len(analytic) != p.size:
        raise ConfigError(f"gradient returned {len(analytic)} partials for {p.size} parameters")
    errors = []
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = step
        fd = (np.asarray(objective(p + e)) - np.asarray(objective(p - e))) / (2 * step)
        g = np.asarray(analytic[i])
        scale = max(np.linalg.norm(g), np.linalg.norm(fd))
        err = 0.0 if scale == 0 else float(np.linalg.norm(fd - g) / scale)
        errors.append(err)
    return GradReport(max(errors), errors, step, p.tolist())

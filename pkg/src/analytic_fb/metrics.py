"""SI-SDR, SI-SDR improvement and permutation-invariant scoring."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateSignalError, ShapeError
from .signal import Waveform

# serialized stand-in for an infinite score
SENTINEL_DB = 300.0
_RESIDUAL_FLOOR = 1e-30
MAX_PIT_SOURCES = 6


def _samples(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64).reshape(-1)


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, after removing the mean of both signals.

    Returns ``inf`` when the residual is negligible (relative energy below
    1e-30) and ``-inf`` when the estimate has no component along the reference.
    """
    e, r = _samples(est), _samples(ref)
    if e.shape != r.shape:
        raise ShapeError(f"length mismatch: estimate {e.size}, reference {r.size}")
    e = e - e.mean()
    r = r - r.mean()
    r_energy = float(np.dot(r, r))
    if r_energy == 0.0:
        raise DegenerateSignalError("reference has zero energy after mean removal")
    target = (np.dot(e, r) / r_energy) * r
    residual = e - target
    t_energy = float(np.dot(target, target))
    res_energy = float(np.dot(residual, residual))
    if res_energy <= _RESIDUAL_FLOOR * t_energy and t_energy > 0:
        return math.inf
    if t_energy == 0.0:
        return -math.inf
    return 10.0 * math.log10(t_energy / res_energy)


def si_sdr_improvement(est, ref, mixture) -> float:
    gain = si_sdr(est, ref)
    base = si_sdr(mixture, ref)
    if math.isinf(gain) and math.isinf(base) and gain == base:
        return 0.0
    return gain - base


@dataclass(frozen=True)
class ScoreReport:
    per_source_si_sdr: tuple
    per_source_si_sdri: tuple
    permutation: tuple
    mean_si_sdri: float

    @property
    def mean_si_sdr(self) -> float:
        return float(np.mean(self.per_source_si_sdr))

    def to_dict(self) -> dict:
        return {
            "per_source_si_sdr": [cap_db(v) for v in self.per_source_si_sdr],
            "per_source_si_sdri": [cap_db(v) for v in self.per_source_si_sdri],
            "permutation": list(self.permutation),
            "mean_si_sdri": cap_db(self.mean_si_sdri),
        }


def cap_db(value: float) -> float:
    """Clamp infinities to +/- SENTINEL_DB for serialization."""
    return float(np.clip(value, -SENTINEL_DB, SENTINEL_DB))


def pit_score(ests, refs, mixture) -> ScoreReport:
    """Best assignment of estimates to references by exhaustive search.

    ``permutation[i]`` is the index of the estimate matched to reference ``i``.
    Ties keep the first permutation in lexicographic order.
    """
    C = len(refs)
    if len(ests) != C:
        raise ShapeError(f"{len(ests)} estimates for {C} references")
    if not 1 <= C <= MAX_PIT_SOURCES:
        raise ConfigError(f"PIT supports 1..{MAX_PIT_SOURCES} sources, got {C}")
    table = np.array([[si_sdr(e, r) for e in ests] for r in refs])
    best, best_perm = -math.inf, None
    for perm in itertools.permutations(range(C)):
        with np.errstate(invalid="ignore"):
            score = float(np.mean([table[i, p] for i, p in enumerate(perm)]))
        if best_perm is None or score > best:
            best, best_perm = score, perm
    per_sdr = tuple(float(table[i, p]) for i, p in enumerate(best_perm))
    base = [si_sdr(mixture, r) for r in refs]
    per_sdri = []
    for v, b in zip(per_sdr, base):
        per_sdri.append(0.0 if (math.isinf(v) and v == b) else v - b)
    return ScoreReport(per_sdr, tuple(per_sdri), best_perm, float(np.mean(per_sdri)))

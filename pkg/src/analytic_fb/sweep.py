"""Mixture sets and the oracle-mask evaluation sweep."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import calibration_noise, fit_synthesis_gains, with_gains
from .errors import ConfigError, FormatError
from .filterbank import Family, Filterbank, FilterbankConfig, build_filterbank
from .masking import MaskKind, apply_mask, ideal_masks, irm
from .metrics import cap_db, pit_score
from .signal import Waveform, mix_sources, read_wav, write_wav
from .synthetic import synthetic_noise, synthetic_source
from .transform import analyze, synthesize

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "analytic-fb/manifest"
DEFAULT_WINDOWS_MS = (2.0, 5.0, 10.0, 25.0, 50.0)
ORACLE_KINDS = ("mag", "compl", "reim", "irm")


def window_to_samples(window_ms: float, sample_rate: int) -> int:
    """Convert a window length in ms to an even number of samples."""
    exact = window_ms * sample_rate / 1000.0
    L = int(round(exact))
    if abs(exact - L) > 1e-9 or L < 2 or L % 2:
        raise ConfigError(f"{window_ms} ms at {sample_rate} Hz is {exact:g} samples; "
                          "need an even integer")
    return L


# --------------------------------------------------------------------------
# mixtures


def _speaker_of(path: Path, root: Path) -> str:
    rel = path.relative_to(root)
    return rel.parts[0] if len(rel.parts) > 1 else path.stem[:3]


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    return np.resize(x, n) if x.size < n else x[:n]


def create_mixtures(out_dir, n: int, seed: int, sample_rate: int = 8000, duration: float = 2.0,
                    snr_range=(0.0, 5.0), noise_snr_range=None, input_dir=None,
                    noise_dir=None, encoding: str = "float32") -> dict:
    """Write ``n`` two-source mixtures, their scaled references and a manifest.

    Sources are drawn from ``input_dir`` (pairs of different speakers; the
    speaker is the first sub-directory, or the first three characters of the
    file name for a flat directory) or generated synthetically. Noise, when a
    noise SNR range is given, comes from ``noise_dir`` or is synthetic.
    """
    out = Path(out_dir)
    if n < 1:
        raise ConfigError("need at least one mixture")
    rng = np.random.default_rng(seed)
    by_speaker: dict[str, list[Path]] = {}
    if input_dir is not None:
        root = Path(input_dir)
        for p in sorted(root.rglob("*.wav")):
            by_speaker.setdefault(_speaker_of(p, root), []).append(p)
        if len(by_speaker) < 2:
            raise ConfigError(f"{root}: need WAV files from at least two speakers")
    noise_files = sorted(Path(noise_dir).rglob("*.wav")) if noise_dir else []
    if noise_dir and not noise_files:
        raise ConfigError(f"{noise_dir}: no noise WAV files")

    for sub in ("mix", "s1", "s2") + (("noise",) if noise_snr_range else ()):
        (out / sub).mkdir(parents=True, exist_ok=True)
    n_samples = int(round(duration * sample_rate))
    utts = []
    for i in range(n):
        uid = f"mix{i:04d}"
        if by_speaker:
            spk = rng.choice(sorted(by_speaker), size=2, replace=False)
            picks = [by_speaker[s][rng.integers(len(by_speaker[s]))] for s in spk]
            s1, s2 = (read_wav(p) for p in picks)
            if s1.sample_rate != sample_rate or s2.sample_rate != sample_rate:
                raise ConfigError(f"{picks}: sample rate differs from {sample_rate} Hz")
            origin = [str(p) for p in picks]
        else:
            s1 = synthetic_source(rng, n_samples, sample_rate)
            s2 = synthetic_source(rng, n_samples, sample_rate)
            origin = ["synthetic", "synthetic"]
        snr = float(rng.uniform(*snr_range))
        noise, noise_snr = None, None
        if noise_snr_range:
            noise_snr = float(rng.uniform(*noise_snr_range))
            if noise_files:
                nw = read_wav(noise_files[rng.integers(len(noise_files))])
                noise = Waveform(_fit_length(nw.samples, min(len(s1), len(s2))), nw.sample_rate)
            else:
                noise = synthetic_noise(rng, min(len(s1), len(s2)), sample_rate)
        mix, refs, scaled_noise = mix_sources(s1, s2, snr, noise, noise_snr)
        entry = {"id": uid, "mixture": f"mix/{uid}.wav",
                 "sources": [f"s1/{uid}.wav", f"s2/{uid}.wav"],
                 "noise": f"noise/{uid}.wav" if scaled_noise is not None else None,
                 "speaker_snr_db": snr, "noise_snr_db": noise_snr, "origin": origin}
        write_wav(out / entry["mixture"], mix, encoding)
        for path, ref in zip(entry["sources"], refs):
            write_wav(out / path, ref, encoding)
        if scaled_noise is not None:
            write_wav(out / entry["noise"], scaled_noise, encoding)
        utts.append(entry)

    manifest = {"format": MANIFEST_FORMAT, "version": 1, "seed": seed,
                "sample_rate": sample_rate, "synthetic": input_dir is None,
                "speaker_snr_range": list(snr_range),
                "noise_snr_range": list(noise_snr_range) if noise_snr_range else None,
                "encoding": encoding, "utterances": utts}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: format={manifest.get('format')!r}, expected {MANIFEST_FORMAT!r}")
    if not manifest.get("utterances"):
        raise ConfigError(f"{path}: manifest lists no utterances")
    manifest["_root"] = str(path.parent)
    return manifest


def load_utterance(manifest: dict, entry: dict):
    root = Path(manifest["_root"])
    mix = read_wav(root / entry["mixture"])
    refs = [read_wav(root / p) for p in entry["sources"]]
    noise = read_wav(root / entry["noise"]) if entry.get("noise") else None
    return mix, refs, noise


# --------------------------------------------------------------------------
# oracle sweep


@dataclass
class SweepConfig:
    manifest: str
    families: list = field(default_factory=lambda: ["stft", "param-sinc-analytic"])
    window_ms: list = field(default_factory=lambda: list(DEFAULT_WINDOWS_MS))
    n_filters: int = 512
    n_filters_for: dict = field(default_factory=dict)
    mask_kinds: list = field(default_factory=lambda: ["mag", "compl", "reim", "irm"])
    sample_rate: int | None = None
    seed: int = 0
    fit_gains: bool = False
    null_mask: bool = False
    free_weights: str | None = None

    def __post_init__(self):
        self.families = [Family(f).value for f in self.families]
        for kind in self.mask_kinds:
            if kind not in ORACLE_KINDS:
                raise ConfigError(f"unknown mask kind {kind!r}; choose from {ORACLE_KINDS}")
        for fam in self.n_filters_for:
            Family(fam)


@dataclass(frozen=True)
class EvalRecord:
    family: str
    window_ms: float
    kernel_len: int
    n_filters: int
    hop: int
    mask_kind: str
    utterance: str
    si_sdr: tuple
    si_sdri: tuple
    mean_si_sdri: float
    permutation: tuple

    def sort_key(self):
        return (self.family, self.kernel_len, self.mask_kind, self.utterance)


def _bank_for(cfg: SweepConfig, family: str, L: int, rate: int) -> Filterbank:
    N = int(cfg.n_filters_for.get(family, cfg.n_filters))
    config = FilterbankConfig(family, N, L, None, rate)
    weights = None
    if cfg.free_weights and family in ("free", "free-analytic"):
        data = np.load(cfg.free_weights)
        weights = (data["analysis"], data["synthesis"])
        if weights[0].shape != (N, L):
            raise ConfigError(f"{cfg.free_weights}: weights have shape {weights[0].shape}, "
                              f"sweep needs {(N, L)}")
    bank = build_filterbank(config, free_weights=weights, seed=cfg.seed)
    if cfg.fit_gains and bank.family.is_parametric:
        calib = calibration_noise(sample_rate=rate, seed=cfg.seed)
        bank = with_gains(bank, fit_synthesis_gains(bank, calib))
    return bank


def separate(mixture: Waveform, bank: Filterbank, masks) -> list:
    """Analyze, mask and resynthesize one estimate per mask."""
    X = analyze(mixture, bank)
    return [synthesize(apply_mask(X, m), bank) for m in masks]


def oracle_masks(kind: str, X, S, noise_tf):
    if kind == "irm":
        return irm(S, noise_tf)
    return ideal_masks(S, X, MaskKind(kind))


def run_oracle_eval(cfg: SweepConfig) -> list:
    """Score every (family, window, mask kind, utterance) with oracle masks."""
    manifest = load_manifest(cfg.manifest)
    rate = manifest["sample_rate"]
    if cfg.sample_rate is not None and cfg.sample_rate != rate:
        raise ConfigError(f"manifest rate {rate} Hz differs from requested {cfg.sample_rate} Hz")
    utterances = [(e["id"], *load_utterance(manifest, e)) for e in manifest["utterances"]]
    for uid, mix, refs, noise in utterances:
        if mix.sample_rate != rate:
            raise ConfigError(f"{uid}: file rate {mix.sample_rate} Hz, manifest says {rate} Hz")
    kinds = ["null"] if cfg.null_mask else list(cfg.mask_kinds)
    records = []
    for family in cfg.families:
        for ms in cfg.window_ms:
            L = window_to_samples(ms, rate)
            bank = _bank_for(cfg, family, L, rate)
            log.info("family=%s L=%d N=%d", family, L, bank.n_filters)
            for uid, mix, refs, noise in utterances:
                X = analyze(mix, bank) if not cfg.null_mask else None
                S = [analyze(r, bank) for r in refs] if not cfg.null_mask else None
                noise_tf = analyze(noise, bank) if (noise is not None and X is not None) else None
                for kind in kinds:
                    if kind == "null":
                        ests = [mix for _ in refs]
                    else:
                        masks = oracle_masks(kind, X, S, noise_tf)
                        ests = [synthesize(apply_mask(X, m), bank) for m in masks]
                    rep = pit_score(ests, refs, mix)
                    records.append(EvalRecord(family, float(ms), L, bank.n_filters, bank.hop,
                                              kind, uid, rep.per_source_si_sdr,
                                              rep.per_source_si_sdri, rep.mean_si_sdri,
                                              rep.permutation))
    records.sort(key=EvalRecord.sort_key)
    return records


def _fmt(v: float) -> str:
    return repr(cap_db(v))


def records_to_csv(records) -> str:
    C = max(len(r.si_sdr) for r in records) if records else 2
    header = (["family", "window_ms", "kernel_len", "n_filters", "hop", "mask_kind", "utterance"]
              + [f"si_sdr_{i + 1}" for i in range(C)] + [f"si_sdri_{i + 1}" for i in range(C)]
              + ["mean_si_sdri", "permutation"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in records:
        w.writerow([r.family, repr(r.window_ms), r.kernel_len, r.n_filters, r.hop, r.mask_kind,
                    r.utterance, *map(_fmt, r.si_sdr), *map(_fmt, r.si_sdri),
                    _fmt(r.mean_si_sdri), " ".join(map(str, r.permutation))])
    return buf.getvalue()


def summarize(records) -> list:
    """Per-config means, computed from the capped values written to CSV."""
    groups: dict = {}
    for r in records:
        key = (r.family, r.kernel_len, r.mask_kind)
        groups.setdefault(key, []).append(r)
    out = []
    for (family, L, kind), rows in sorted(groups.items()):
        sdri = [cap_db(r.mean_si_sdri) for r in rows]
        sdr = [float(np.mean([cap_db(v) for v in r.si_sdr])) for r in rows]
        out.append({"family": family, "window_ms": rows[0].window_ms, "kernel_len": L,
                    "n_filters": rows[0].n_filters, "hop": rows[0].hop, "mask_kind": kind,
                    "n_utterances": len(rows), "mean_si_sdri": float(np.mean(sdri)),
                    "mean_si_sdr": float(np.mean(sdr))})
    return out


def read_records_csv(text: str) -> list:
    """Parse a CSV written by :func:`records_to_csv` into dicts of floats/strings."""
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for k, v in row.items():
            if k.startswith("si_sdr") or k in ("mean_si_sdri", "window_ms"):
                row[k] = float(v)
    return rows


"""Command-line entry point: ``analytic-fb <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .calibration import (analytic_filter, calibration_noise, finite_diff_check,
                          fit_synthesis_gains, param_filter_gradients, with_gains)
from .errors import AnalyticFBError
from .filterbank import (Family, FilterbankConfig, ParamSincParams, build_filterbank,
                         load_filterbank, peak_frequency, save_filterbank)
from .metrics import cap_db, si_sdr
from .signal import Waveform, read_wav
from .sweep import (DEFAULT_WINDOWS_MS, ORACLE_KINDS, SweepConfig, create_mixtures,
                    records_to_csv, run_oracle_eval, summarize, window_to_samples)
from .transform import analyze, synthesize

log = logging.getLogger("analytic_fb")

EXIT_CODES = {"format": 3, "config": 4, "shape": 5, "degenerate-signal": 6,
              "conditioning": 7, "invalid-step": 8, "gradcheck-failed": 9, "io": 10}
FAMILIES = [f.value for f in Family]


def _kernel_len(args) -> int:
    if args.kernel_len is not None:
        return args.kernel_len
    return window_to_samples(args.window_ms, args.sample_rate)


def _add_bank_args(p, default_family="param-sinc-analytic"):
    p.add_argument("--family", choices=FAMILIES, default=default_family)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--window-ms", type=float, default=2.0, help="window length in ms (default 2)")
    g.add_argument("--kernel-len", type=int, help="window length in samples")
    p.add_argument("--hop", type=int, help="hop in samples (default L/2)")
    p.add_argument("--n-filters", type=int, default=512)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--window", default="sqrt-hann", help="STFT window: sqrt-hann, hann, rect")
    p.add_argument("--fit-gains", action="store_true",
                   help="calibrate synthesis gains of parametric banks on seeded noise")
    p.add_argument("--seed", type=int, default=0)


def _bank_from_args(args):
    config = FilterbankConfig(args.family, args.n_filters, _kernel_len(args), args.hop,
                              args.sample_rate)
    return build_filterbank(config, window_kind=args.window, seed=args.seed)


def cmd_mix(args) -> int:
    if not args.synthetic and args.input_dir is None:
        raise SystemExit("mix: give --synthetic or --input-dir")
    manifest = create_mixtures(
        args.out, args.n, args.seed, args.sample_rate, args.duration,
        tuple(args.snr_range), tuple(args.noise_snr) if args.noise_snr else None,
        None if args.synthetic else args.input_dir, args.noise_dir, args.encoding)
    print(json.dumps({"manifest": str(Path(args.out) / "manifest.json"),
                      "n_utterances": len(manifest["utterances"])}))
    return 0


def cmd_dump_fb(args) -> int:
    bank = _bank_from_args(args)
    extra = {}
    if args.fit_gains and bank.family.is_parametric:
        bank = with_gains(bank, fit_synthesis_gains(
            bank, calibration_noise(sample_rate=args.sample_rate, seed=args.seed)))
        extra["gains_fitted"] = True
    save_filterbank(args.out, bank, extra)
    if args.csv:
        rate = bank.config.sample_rate
        L = bank.kernel_len
        peaks = np.abs(peak_frequency(bank.analysis, max(args.n_fft, L)))
        if bank.params is not None:
            centers, widths = bank.params.center, bank.params.width
        elif bank.family is Family.STFT:
            centers = np.arange(bank.n_filters) / L
            widths = np.full(bank.n_filters, 1.0 / L)
        else:
            centers = widths = np.full(bank.n_filters, np.nan)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["filter", "center_hz", "bandwidth_hz", "peak_hz"])
            for n in range(bank.n_filters):
                w.writerow([n, repr(float(centers[n] * rate)), repr(float(widths[n] * rate)),
                            repr(float(peaks[n] * rate))])
    print(json.dumps({"dump": str(args.out), "family": bank.family.value,
                      "n_filters": bank.n_filters, "kernel_len": bank.kernel_len}))
    return 0


def cmd_roundtrip(args) -> int:
    if args.input:
        x = read_wav(args.input)
        args.sample_rate = x.sample_rate
    else:
        rng = np.random.default_rng(args.seed + 1)
        x = Waveform(rng.standard_normal(int(args.duration * args.sample_rate)), args.sample_rate)
    bank = load_filterbank(args.bank) if args.bank else _bank_from_args(args)
    out = {"family": bank.family.value, "kernel_len": bank.kernel_len,
           "n_filters": bank.n_filters, "hop": bank.hop}
    sdr = si_sdr(synthesize(analyze(x, bank), bank), x)
    if args.fit_gains and bank.family.is_parametric:
        out["si_sdr_db_unit_gains"] = cap_db(sdr)
        bank = with_gains(bank, fit_synthesis_gains(
            bank, calibration_noise(sample_rate=bank.config.sample_rate, seed=args.seed)))
        sdr = si_sdr(synthesize(analyze(x, bank), bank), x)
    out["si_sdr_db"] = cap_db(sdr)
    print(json.dumps(out))
    return 0


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        fam, _, n = item.partition("=")
        if not n:
            raise SystemExit(f"--n-filters-for expects FAMILY=N, got {item!r}")
        out[Family(fam).value] = int(n)
    return out


def cmd_oracle_eval(args) -> int:
    cfg = SweepConfig(manifest=args.manifest, families=args.families, window_ms=args.window_ms,
                      n_filters=args.n_filters, n_filters_for=_parse_overrides(args.n_filters_for),
                      mask_kinds=args.mask_kinds, sample_rate=args.sample_rate, seed=args.seed,
                      fit_gains=args.fit_gains, null_mask=args.null_mask,
                      free_weights=args.free_weights)
    records = run_oracle_eval(cfg)
    text = records_to_csv(records)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = summarize(records)
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n")
    for row in summary:
        log.info("%-20s L=%-4d %-6s mean SI-SDRi %.2f dB", row["family"], row["kernel_len"],
                 row["mask_kind"], row["mean_si_sdri"])
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    L = args.kernel_len
    config = FilterbankConfig(Family.PARAM_SINC_ANALYTIC, 1, L)
    reports = []
    for _ in range(args.draws):
        f1, f2 = np.sort(rng.uniform(0.05, 0.45, 2))
        f2 = max(f2, f1 + 2e-3)
        p0 = np.array([f2 - f1, 0.5 * (f1 + f2)])

        def objective(p):
            return analytic_filter(p[0], p[1], L)

        def gradient(p):
            params = ParamSincParams([p[1] - p[0] / 2], [p[1] + p[0] / 2])
            dw, dc = param_filter_gradients(params, config)
            return [dw[0], dc[0]]

        reports.append(finite_diff_check(objective, gradient, p0, args.step))
    worst = max(r.max_rel_error for r in reports)
    result = {"draws": args.draws, "kernel_len": L, "step": args.step,
              "max_rel_error": worst, "tolerance": args.tol, "passed": worst <= args.tol}
    if args.out:
        Path(args.out).write_text(json.dumps({**result, "reports": [r.to_dict() for r in reports]},
                                             indent=1))
    print(json.dumps(result))
    if worst > args.tol:
        sys.stderr.write(json.dumps({"error": "gradcheck-failed",
                                     "message": f"max relative error {worst:.3g} > {args.tol}"}) + "\n")
        return EXIT_CODES["gradcheck-failed"]
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="analytic-fb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mix", help="create two-speaker mixtures and a manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--synthetic", action="store_true", help="use seeded synthetic sources")
    p.add_argument("--input-dir", help="directory of mono WAV utterances")
    p.add_argument("--noise-dir", help="directory of noise WAVs (default: synthetic noise)")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--duration", type=float, default=2.0, help="synthetic length in s")
    p.add_argument("--snr-range", type=float, nargs=2, default=[0.0, 5.0], metavar=("LO", "HI"))
    p.add_argument("--noise-snr", type=float, nargs=2, metavar=("LO", "HI"),
                   help="add noise at an SNR drawn from [LO, HI] dB vs the loudest speaker")
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("dump-fb", help="write a filterbank dump and response table")
    _add_bank_args(p)
    p.add_argument("--out", required=True, help="JSON dump path")
    p.add_argument("--csv", help="per-filter center/bandwidth/peak table")
    p.add_argument("--n-fft", type=int, default=4096)
    p.set_defaults(func=cmd_dump_fb)

    p = sub.add_parser("roundtrip", help="analysis -> identity mask -> synthesis SI-SDR")
    _add_bank_args(p)
    p.add_argument("--input", help="WAV file (default: seeded white noise)")
    p.add_argument("--bank", help="load the filterbank from a dump instead")
    p.add_argument("--duration", type=float, default=1.0)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("oracle-eval", help="oracle-mask SI-SDRi sweep over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--families", nargs="+", choices=FAMILIES,
                   default=["stft", "param-sinc-analytic"])
    p.add_argument("--window-ms", type=float, nargs="+", default=list(DEFAULT_WINDOWS_MS))
    p.add_argument("--n-filters", type=int, default=512)
    p.add_argument("--n-filters-for", nargs="*", metavar="FAMILY=N",
                   help="per-family filter count, e.g. param-sinc=1536")
    p.add_argument("--mask-kinds", nargs="+", choices=ORACLE_KINDS,
                   default=["mag", "compl", "reim", "irm"])
    p.add_argument("--null-mask", action="store_true", help="score the unprocessed mixture")
    p.add_argument("--fit-gains", action="store_true")
    p.add_argument("--free-weights", help=".npz with 'analysis' and 'synthesis' N x L arrays")
    p.add_argument("--sample-rate", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--summary", help="per-config summary JSON path")
    p.set_defaults(func=cmd_oracle_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of sinc filter gradients")
    p.add_argument("--draws", type=int, default=50)
    p.add_argument("--kernel-len", type=int, default=64)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AnalyticFBError as exc:
        sys.stderr.write(json.dumps({"error": exc.category, "message": str(exc)}) + "\n")
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())

import csv
import json

import numpy as np
import pytest

from analytic_fb.cli import main
from analytic_fb.filterbank import load_filterbank
from analytic_fb.signal import Waveform, write_wav
from analytic_fb.sweep import load_manifest, load_utterance


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def mixdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("mix")
    assert main(["mix", "--synthetic", "--n", "3", "--seed", "4", "--duration", "0.5",
                 "--noise-snr", "10", "20", "--out", str(d)]) == 0
    return d


def test_mix_manifest(mixdir):
    m = load_manifest(mixdir / "manifest.json")
    assert len(m["utterances"]) == 3 and m["seed"] == 4
    for u in m["utterances"]:
        assert 0 <= u["speaker_snr_db"] <= 5 and 10 <= u["noise_snr_db"] <= 20
        mix, sources, noise = load_utterance(m, u)
        np.testing.assert_allclose(mix.samples, sources[0].samples + sources[1].samples
                                   + noise.samples, atol=1e-6)
        p1, p2 = sources[0].power(), sources[1].power()
        assert 10 * np.log10(p1 / p2) == pytest.approx(u["speaker_snr_db"], abs=1e-4)


def test_mix_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "mix", "--synthetic", "--n", "2", "--seed", "9", "--duration", "0.25",
            "--out", tmp_path / d)
    for name in ("mix/mix0001.wav", "s1/mix0000.wav", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_mix_from_input_dir(tmp_path, capsys, rng):
    src = tmp_path / "in"
    src.mkdir()
    for i in range(3):
        write_wav(src / f"u{i}.wav", Waveform(0.1 * rng.standard_normal(2000 + 100 * i), 8000))
    code, _, _ = run(capsys, "mix", "--input-dir", src, "--n", "2", "--out", tmp_path / "o")
    assert code == 0
    m = load_manifest(tmp_path / "o" / "manifest.json")
    assert not m["synthetic"] and len(m["utterances"]) == 2


def test_dump_fb_sinc(tmp_path, capsys):
    code, out, _ = run(capsys, "dump-fb", "--family", "param-sinc-analytic", "--window-ms", "2",
                       "--out", tmp_path / "fb.json", "--csv", tmp_path / "fb.csv")
    assert code == 0 and json.loads(out)["n_filters"] == 512
    rows = list(csv.DictReader(open(tmp_path / "fb.csv")))
    assert len(rows) == 512
    centers = [float(r["center_hz"]) for r in rows]
    assert all(b > a for a, b in zip(centers, centers[1:])) and centers[-1] < 4000
    assert load_filterbank(tmp_path / "fb.json").kernel_len == 16


def test_dump_fb_stft(tmp_path, capsys):
    code, _, _ = run(capsys, "dump-fb", "--family", "stft", "--kernel-len", "16",
                     "--out", tmp_path / "fb.json", "--csv", tmp_path / "fb.csv")
    rows = list(csv.DictReader(open(tmp_path / "fb.csv")))
    assert code == 0 and len(rows) == 9
    np.testing.assert_allclose([float(r["peak_hz"]) for r in rows], np.arange(9) * 500, atol=2)


def test_roundtrip(tmp_path, capsys):
    code, out, _ = run(capsys, "roundtrip", "--family", "stft", "--window-ms", "5")
    assert code == 0 and json.loads(out)["si_sdr_db"] > 200
    run(capsys, "dump-fb", "--family", "free-analytic", "--kernel-len", "16", "--n-filters", "64",
        "--out", tmp_path / "free.json")
    code, out, _ = run(capsys, "roundtrip", "--bank", tmp_path / "free.json")
    assert code == 0 and json.loads(out)["si_sdr_db"] > 200


def test_roundtrip_fit_gains(capsys):
    code, out, _ = run(capsys, "roundtrip", "--n-filters", "64", "--fit-gains", "--duration", "0.5")
    res = json.loads(out)
    assert code == 0 and res["si_sdr_db"] > res["si_sdr_db_unit_gains"]


def test_roundtrip_wav(tmp_path, capsys, rng):
    write_wav(tmp_path / "x.wav", Waveform(0.1 * rng.standard_normal(1600), 16000))
    code, out, _ = run(capsys, "roundtrip", "--input", tmp_path / "x.wav", "--family", "stft",
                       "--kernel-len", "32")
    assert code == 0 and json.loads(out)["si_sdr_db"] > 100


def test_oracle_eval_and_null_mask(mixdir, tmp_path, capsys):
    code, _, _ = run(capsys, "oracle-eval", "--manifest", mixdir / "manifest.json",
                     "--families", "stft", "--window-ms", "5", "--mask-kinds", "compl", "irm",
                     "--out", tmp_path / "r.csv", "--summary", tmp_path / "s.json")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == 6 and {r["mask_kind"] for r in rows} == {"compl", "irm"}
    summary = json.loads((tmp_path / "s.json").read_text())
    compl = [s for s in summary if s["mask_kind"] == "compl"][0]
    assert compl["mean_si_sdri"] > 10
    code, out, _ = run(capsys, "oracle-eval", "--manifest", mixdir / "manifest.json",
                       "--families", "stft", "--window-ms", "5", "--null-mask")
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and all(abs(float(r["mean_si_sdri"])) < 1e-9 for r in rows)


def test_gradcheck(tmp_path, capsys):
    code, out, _ = run(capsys, "gradcheck", "--draws", "5", "--out", tmp_path / "g.json")
    assert code == 0 and json.loads(out)["passed"]
    assert len(json.loads((tmp_path / "g.json").read_text())["reports"]) == 5


@pytest.mark.parametrize("argv, code, category", [
    (["roundtrip", "--family", "stft", "--kernel-len", "15"], 4, "config"),
    (["roundtrip", "--window-ms", "3.3"], 4, "config"),
    (["gradcheck", "--draws", "1", "--step", "0"], 8, "invalid-step"),
    (["gradcheck", "--draws", "2", "--step", "0.3"], 9, "gradcheck-failed"),
])
def test_error_exit_codes(argv, code, category, capsys):
    got, _, err = run(capsys, *argv)
    assert got == code
    assert json.loads(err.strip().splitlines()[-1])["error"] == category


def test_bad_dump_and_missing_file(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{}")
    got, _, err = run(capsys, "roundtrip", "--bank", tmp_path / "bad.json")
    assert got == 3 and json.loads(err)["error"] == "format"
    got, _, err = run(capsys, "roundtrip", "--input", tmp_path / "nope.wav")
    assert got == 10 and json.loads(err)["error"] == "io"

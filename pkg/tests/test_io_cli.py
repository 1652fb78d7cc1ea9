import json
import struct
import subprocess
import sys

import numpy as np
import pytest

from renyisphere.cli import parse_q, run_command, UsageError
from renyisphere.errors import FormatError
from renyisphere.estimator import SphericalMap
from renyisphere.io import (build_result, read_curve_csv, read_map, read_map_csv, read_result,
                            validate_result, write_map, write_map_csv, write_result)
from renyisphere.sphere import PixelGrid


def run(args, capsys):
    code = run_command([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_map_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for ordering in ("nested", "ring"):
        sky = SphericalMap(PixelGrid(8, ordering), rng.normal(size=768) * 1e300)
        write_map(tmp_path / "m.srfm", sky)
        back = read_map(tmp_path / "m.srfm")
        assert back.grid == sky.grid and np.array_equal(back.values, sky.values)


def test_map_header_layout(tmp_path):
    sky = SphericalMap(PixelGrid(2, "ring"), np.arange(48.0))
    write_map(tmp_path / "m.srfm", sky)
    data = (tmp_path / "m.srfm").read_bytes()
    assert data[:4] == b"SRFM"
    assert struct.unpack("<IIBQ", data[4:21]) == (1, 2, 0, 48)
    assert len(data) == 21 + 8 * 48
    assert np.array_equal(np.frombuffer(data[21:], "<f8"), np.arange(48.0))


@pytest.mark.parametrize("mutate, message", [
    (lambda d: b"XXXX" + d[4:], "magic"),
    (lambda d: d[:4] + struct.pack("<I", 2) + d[8:], "version"),
    (lambda d: d[:12] + bytes([7]) + d[13:], "ordering"),
    (lambda d: d[:-8], "payload"),
    (lambda d: d[:10], "truncated"),
    (lambda d: d[:8] + struct.pack("<I", 3) + d[12:], "power of two"),
])
def test_malformed_map_files(tmp_path, mutate, message):
    write_map(tmp_path / "m.srfm", SphericalMap(PixelGrid(2), np.ones(48)))
    bad = tmp_path / "bad.srfm"
    bad.write_bytes(mutate((tmp_path / "m.srfm").read_bytes()))
    with pytest.raises(FormatError, match=message):
        read_map(bad)


def test_map_csv_roundtrip(tmp_path):
    sky = SphericalMap(PixelGrid(4), np.random.default_rng(1).random(192))
    write_map_csv(tmp_path / "m.csv", sky)
    back = read_map_csv(tmp_path / "m.csv")
    assert np.array_equal(back.values, sky.values)
    (tmp_path / "bad.csv").write_text("pixel_index,value\n0,1\n0,2\n")
    with pytest.raises(FormatError):
        read_map_csv(tmp_path / "bad.csv", nside=1)
    (tmp_path / "bad2.csv").write_text("idx,value\n0,1\n")
    with pytest.raises(FormatError, match="missing"):
        read_map_csv(tmp_path / "bad2.csv")


def test_result_schema(tmp_path):
    doc = build_result([1.0, 2.0], [0.0, 0.5], [1.0, 0.4], [1.0, 0.3],
                       provenance={"seed": 3, "config": {"x": 1}})
    write_result(tmp_path / "r.json", doc)
    assert read_result(tmp_path / "r.json") == doc
    for breaker in (lambda d: d.pop("provenance"), lambda d: d.update(T=[0.0]),
                    lambda d: d.update(format="other"), lambda d: d.update(fits=[{"family": "x"}])):
        bad = json.loads(json.dumps(doc))
        breaker(bad)
        with pytest.raises(FormatError):
            validate_result(bad)
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(FormatError):
        read_result(tmp_path / "junk.json")


def test_parse_q():
    q = parse_q("0.1:3:0.01")
    assert q.size == 291 and q[0] == 0.1 and q[-1] == 3.0 and 2.0 in q
    assert np.array_equal(parse_q("1:2:0.5"), [1.0, 1.5, 2.0])
    assert np.array_equal(parse_q("2"), [2.0])
    for bad in ("1:2", "a:b:c", "2:1:0.1", "1:2:0"):
        with pytest.raises(UsageError):
            parse_q(bad)


def test_theory_example(capsys):
    code, out, _ = run(["theory", "--model", "lognormal", "--b", "2", "--sigma2", "1", "--q", "0.1:3:0.01"], capsys)
    assert code == 0
    rows = np.loadtxt(out.splitlines()[1:], delimiter=",")
    assert out.splitlines()[0] == "q,T,alpha,f"
    assert rows[rows[:, 0] == 2.0, 1][0] == pytest.approx(0.2786525, abs=5e-8)


def test_validate_command(capsys, tmp_path):
    code, out, _ = run(["validate", "--model", "loggamma", "--lam", "2", "--beta", "2"], capsys)
    assert code == 0 and json.loads(out)["satisfied"] is False
    code, _, _ = run(["validate", "--model", "loggamma", "--lam", "2", "--beta", "2", "--strict"], capsys)
    assert code == 1


@pytest.mark.parametrize("args, code, fragment", [
    (["theory", "--model", "lognormal"], 2, "requires --sigma2"),
    (["theory", "--model", "chisquare", "--lam", "3"], 2, "does not take"),
    (["theory", "--model", "lognormal", "--sigma2", "1", "--verbatim"], 2, "--verbatim"),
    (["theory", "--model", "loggamma", "--lam", "3", "--beta", "2", "--q", "1:4:0.5"], 4, "domain error"),
    (["theory", "--model", "lognormal", "--sigma2", "1", "--q", "x"], 2, "bad q range"),
    (["theory", "--model", "lognormal", "--sigma2", "1", "--b", "1"], 4, "domain error"),
    (["estimate", "missing.srfm"], 9, "i/o error"),
    (["fit", "missing.csv", "--family", "lognormal"], 3, "malformed input"),
    (["fit", "x.csv", "--family", "nonsense"], 2, "unknown family"),
    (["simulate", "--model", "loggamma", "--lam", "3", "--beta", "2", "--out", "m.srfm"], 4, "domain error"),
    (["simulate", "--out", "m.srfm"], 2, "needs --model"),
])
def test_error_exits(capsys, tmp_path, monkeypatch, args, code, fragment):
    monkeypatch.chdir(tmp_path)
    got, _, err = run(args, capsys)
    assert got == code
    assert fragment in err and len(err.strip().splitlines()) == 1


def test_argparse_usage_exit(capsys):
    assert run_command(["frobnicate"]) == 2


def test_estimate_uniform_map(tmp_path, capsys):
    write_map(tmp_path / "u.srfm", SphericalMap(PixelGrid(8), np.full(768, 3.0)))
    code, out, _ = run(["estimate", tmp_path / "u.srfm", "--group-order", "1", "--q", "0.5:3:0.25", "--no-shift"], capsys)
    assert code == 0
    doc = validate_result(json.loads(out))
    q = np.array(doc["q"])
    assert np.abs(np.array(doc["T"]) - (q - 1)).max() <= 1e-12
    assert doc["provenance"]["config_hash"]


def test_estimate_csv_map_and_window(tmp_path, capsys):
    sky = SphericalMap(PixelGrid(16), np.random.default_rng(3).gamma(1.0, size=3072))
    write_map_csv(tmp_path / "m.csv", sky)
    code, _, _ = run(["estimate", tmp_path / "m.csv", "--window-area", "1.231", "--window-center", "1.0,2.0",
                      "--group-order", "1", "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    doc = read_result(tmp_path / "r.json")
    assert doc["provenance"]["config"]["window"]["area"] == pytest.approx(1.231)
    code, _, err = run(["estimate", tmp_path / "m.csv", "--window-center", "1,2"], capsys)
    assert code == 2


def test_pipeline_deterministic(tmp_path, capsys):
    paths = []
    for rep in range(2):
        m = tmp_path / f"m{rep}.srfm"
        r = tmp_path / f"r{rep}.json"
        f = tmp_path / f"f{rep}.json"
        assert run(["simulate", "--model", "lognormal", "--b", "3", "--variance", "2", "--levels", "6",
                    "--nside", "4", "--seed", "7", "--out", m], capsys)[0] == 0
        assert run(["estimate", m, "--group-order", "1", "--out", r], capsys)[0] == 0
        assert run(["fit", r, "--family", "lognormal,chisquare", "--family", "loggamma", "--starts", "2",
                    "--b", "3", "--out", f], capsys)[0] == 0
        paths.append((m, r, f))
    for a, b in zip(*paths):
        assert a.read_bytes() == b.read_bytes()
    doc = read_result(paths[0][2])
    assert [fit["family"] for fit in doc["fits"]] == ["lognormal", "chisquare", "loggamma"]
    assert "fit_config" in doc["provenance"]


def test_fit_csv_curve(tmp_path, capsys):
    q = np.round(np.arange(1, 2.0001, 0.05), 12)
    a = 0.000513
    lines = ["q,T"] + [f"{float(x)!r},{float(x - 1 + a * (x - x * x))!r}" for x in q]
    (tmp_path / "c.csv").write_text("\n".join(lines) + "\n")
    assert read_curve_csv(tmp_path / "c.csv").q.size == q.size
    code, out, _ = run(["fit", tmp_path / "c.csv", "--family", "lognormal"], capsys)
    assert code == 0
    fit = json.loads(out)["fits"][0]
    assert fit["params"]["a"] == pytest.approx(a, rel=1e-10)


def test_simulate_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "chisquare", "levels": 2, "nside": 2, "seed": 4}))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "a.srfm"], capsys)[0] == 0
    assert read_map(tmp_path / "a.srfm").grid.nside == 2
    cfg.write_text(json.dumps({"model": "chisquare", "colour": "red"}))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "b.srfm"], capsys)[0] == 3


def test_threads_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("RENYISPHERE_THREADS", "zero")
    (tmp_path / "c.csv").write_text("q,T\n1,0\n2,0.9\n")
    code, _, err = run(["fit", tmp_path / "c.csv", "--family", "lognormal"], capsys)
    assert code == 2 and "RENYISPHERE_THREADS" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "renyisphere", "theory", "--model", "chisquare", "--q", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("2.0,")

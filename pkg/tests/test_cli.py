import json

import numpy as np
import pytest

from fockprep.cli import build_parser, build_sweep_config, main, parse_complex
from fockprep.sweep import read_records


def test_parse_complex():
    assert parse_complex("3-2i") == 3 - 2j
    assert parse_complex("0.5") == 0.5
    assert parse_complex(" 1 + 1j ") == 1 + 1j


def test_find_dim(capsys):
    assert main(["find-dim", "--xi", "1", "--d0", "70"]) == 0
    assert capsys.readouterr().out.strip() == "91"


def test_find_dim_with_cache(tmp_path, capsys):
    cache = tmp_path / "d1.json"
    for _ in range(2):
        assert main(["find-dim", "--xi", "0.5", "--d0", "12", "--cache", str(cache)]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == out[1]
    assert len(json.loads(cache.read_text())["entries"]) == 1


def test_find_dim_no_solution(capsys):
    assert main(["find-dim", "--xi", "5", "--d0", "10", "--h", "1.5"]) == 3
    assert "No solution found" in capsys.readouterr().err


def test_find_d0(capsys):
    assert main(["find-d0", "--gamma-star", "1", "--xi-star", "1"]) == 0
    assert capsys.readouterr().out.strip() == "68"
    assert main(["find-d0", "--max-dim", "30"]) == 3


@pytest.mark.parametrize("method", ["tame", "closed", "recurrent", "expm"])
def test_build_disp_and_verify(tmp_path, method):
    out = tmp_path / "m.npz"
    assert main(["build-disp", "--xi", "0.8-0.3i", "--d0", "20", "--method", method, "--out", str(out)]) == 0
    data = np.load(out)
    assert data["matrix"].shape == (20, 20)
    meta = json.loads((tmp_path / "m.npz.json").read_text())
    assert meta["method"] == method and len(meta["error_stats"]) == 20
    assert (meta["guard_report"] is not None) == (method == "closed")
    table = tmp_path / "v.csv"
    assert main(["verify", str(out), "--out", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "column,mean_log10,std_log10,max_log10" and len(lines) == 21


def test_build_disp_guard(tmp_path, capsys):
    code = main(["build-disp", "--xi", "20", "--d0", "1500", "--method", "recurrent",
                 "--out", str(tmp_path / "r.npz")])
    assert code == 4
    assert "not finite" in capsys.readouterr().err


def test_norms(tmp_path):
    out = tmp_path / "n.csv"
    assert main(["norms", "--xi", "3-2i", "--d0", "101", "--d1", "161", "--out", str(out)]) == 0
    rows = [line.split(",") for line in out.read_text().splitlines()]
    assert rows[0] == ["column", "closed_form", "tame", "recurrent"]
    assert len(rows) == 102
    assert abs(float(rows[1][1]) - float(rows[1][2])) < 1e-12


def test_config_errors(tmp_path, capsys):
    assert main(["build-disp", "--xi", "1", "--d0", "0", "--d1", "5", "--out", str(tmp_path / "x.npz")]) == 2
    assert main(["sweep", "--gamma-range", "0", "1", "1", "--out", str(tmp_path / "s.csv")]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": 3}))
    assert main(["sweep", "--config", str(bad)]) == 2
    assert main(["reduce", str(tmp_path / "none.csv")]) == 2
    with pytest.raises(SystemExit):
        main(["find-dim", "--xi", "abc", "--d0", "3"])


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"etas": [0.5], "detectors": ["apd"], "d0": 9, "bins": 7}))
    args = build_parser().parse_args(["sweep", "--config", str(cfg), "--desk", "--eta", "0.9",
                                      "--out", "x.csv"])
    c = build_sweep_config(args)
    assert c.etas == (0.9,) and c.detectors == ("apd",) and c.d0 == 9 and c.bins == 7
    assert c.gamma_range == (0.0, 1.0, 101) and c.output_path == "x.csv"
    args = build_parser().parse_args(["sweep", "--config", str(cfg), "--desk",
                                      "--gamma-range", "0", "0.5", "3"])
    assert build_sweep_config(args).gamma_range == (0.0, 0.5, 3)


def test_sweep_and_reduce(tmp_path, capsys):
    out = tmp_path / "s.csv"
    args = ["sweep", "--gamma-range", "0", "1", "3", "--xi-range", "0", "1", "3", "--eta", "1",
            "--eta", "0.8", "--detector", "apd", "--detector", "fock:1", "--d0", "16", "--jobs", "2",
            "--out", str(out)]
    assert main(args) == 0
    records, meta = read_records(out)
    assert len(records) == 36 and meta["d0"] == 16

    m = tmp_path / "m.csv"
    assert main(["reduce", str(out), "--bins", "4", "--out", str(m)]) == 0
    lines = m.read_text().splitlines()
    assert lines[0] == "eta,detector,lo,hi,max_probability" and len(lines) == 1 + 4 * 4

    f = tmp_path / "f.csv"
    assert main(["reduce", str(out), "--metric", "fidelity", "--target", "1", "--out", str(f)]) == 0
    assert len(f.read_text().splitlines()) == 1 + 4 * 21

    assert main(["reduce", str(out), "--relative", "apd"]) == 0
    text = capsys.readouterr().out.splitlines()
    assert "eta,tau,detector,L" in text
    assert sum(line.split(",")[2] == "fock:1" for line in text[text.index("eta,tau,detector,L") + 1:]) == 2 * 21
    assert main(["reduce", str(out), "--relative", "fock:4"]) == 2

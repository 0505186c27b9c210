import json
import subprocess
import sys

import pytest

from zeromodes import cli, pipeline
from zeromodes.pipeline import Check


def run(tmp_path, *args, out="out"):
    return cli.main([*args, "--out", str(tmp_path / out), "--cache", str(tmp_path / "cache")])


def manifest(tmp_path, out="out"):
    return json.loads((tmp_path / out / "manifest.json").read_text())


def inventory_matches(d):
    m = json.loads((d / "manifest.json").read_text())
    files = sorted(p.name for p in d.iterdir() if p.name != "manifest.json")
    return sorted(m["files"]) == files


def test_count_header_and_values(tmp_path):
    assert run(tmp_path, "count", "--field", "constant", "--k-max", "4") == 0
    lines = (tmp_path / "out" / "counts.csv").read_text().splitlines()
    assert lines[0] == "k,N,M,n_eps,d_eps_R,eps,R,tangency_flags"
    assert [tuple(l.split(",")[1:3]) for l in lines[1:]] == [(str(k), "0") for k in range(1, 5)]
    assert (tmp_path / "out" / "asymptotics.csv").read_text().startswith("k,N,ratio,target,deviation\n")
    assert inventory_matches(tmp_path / "out")


def test_warm_cache_is_identical(tmp_path):
    assert run(tmp_path, "count", "--k", "1", "2", "3", out="a") == 0
    assert manifest(tmp_path, "a")["cache"]["misses"] > 0
    assert run(tmp_path, "count", "--k", "1", "2", "3", out="b") == 0
    mb = manifest(tmp_path, "b")
    assert mb["cache"]["misses"] == 0
    assert mb["files"] == manifest(tmp_path, "a")["files"]
    for name in mb["files"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_equals_serial(tmp_path):
    assert run(tmp_path, "count", "--k", "1", "2", "3", "--jobs", "3", out="p") == 0
    other = tmp_path / "fresh"
    assert cli.main(["count", "--k", "1", "2", "3", "--out", str(other), "--cache", str(tmp_path / "c2")]) == 0
    assert (tmp_path / "p" / "counts.csv").read_bytes() == (other / "counts.csv").read_bytes()


def test_branches_and_spectrum(tmp_path):
    assert run(tmp_path, "branches", "--k", "2") == 0
    assert (tmp_path / "out" / "branches.csv").read_text().startswith("k,branch_id,t,mu,is_zero_branch\n")
    assert run(tmp_path, "spectrum", "--k", "1", "2", "--t", "1.5", out="s") == 0
    s3 = (tmp_path / "s" / "s3_spectrum.csv").read_text().splitlines()
    assert s3[0] == "value,multiplicity,provenance"
    assert "-1.0,2,Sigma(2)" in s3
    assert inventory_matches(tmp_path / "s")


def test_zcount_constant(tmp_path):
    assert run(tmp_path, "zcount", "--field", "constant", "--T-max", "4.5") == 0
    rows = [l.split(",") for l in (tmp_path / "out" / "ztable.csv").read_text().splitlines()]
    assert rows[0] == ["T", "lower", "exact_partial", "upper"]
    last = rows[-1]
    assert float(last[0]) == 4.5 and int(last[2]) == 10


def test_pencil_check(tmp_path):
    assert run(tmp_path, "pencil-check", "--k", "2") == 0
    assert (tmp_path / "out" / "pencil.csv").read_text().splitlines() == ["k,N_direct,N_pencil,agree", "2,2,2,1"]
    header = (tmp_path / "out" / "audit.csv").read_text().splitlines()[0]
    assert {"lhs", "rhs", "margin"} <= set(header.split(","))


def test_field_inspect_json_lines(tmp_path):
    assert run(tmp_path, "field-inspect", "--format", "json-lines") == 0
    rows = [json.loads(l) for l in (tmp_path / "out" / "field.jsonl").read_text().splitlines()]
    q = {r["quantity"]: r["value"] for r in rows}
    assert abs(q["flux"] - 1) < 1e-12 and q["sup_norm_raw"] == 0.5


def test_validate_constant(tmp_path):
    assert run(tmp_path, "validate", "--field", "constant", "--k", "1", "2") == 0
    assert inventory_matches(tmp_path / "out")


def test_validation_failure_exit_2(tmp_path, monkeypatch):
    monkeypatch.setattr(pipeline, "validate", lambda cfg, *a: [Check("x", "forced", 1, 1.0, 0.0, False)])
    assert run(tmp_path, "validate", "--k", "1") == 2
    assert (tmp_path / "out" / "validation.csv").exists()
    assert inventory_matches(tmp_path / "out")


def test_errors_exit_1(tmp_path, capsys):
    assert run(tmp_path, "count", "--field", "wavy") == 1
    assert "unknown field preset" in capsys.readouterr().err
    assert run(tmp_path, "count", "--config", str(tmp_path / "missing.yaml")) == 1
    assert run(tmp_path, "count", "--k-max", "0") == 1


def test_stage_error_context(tmp_path, monkeypatch, capsys):
    def boom(*a, **kw):
        raise RuntimeError("eigensolver blew up")

    monkeypatch.setattr(pipeline, "spectrum", boom)
    assert run(tmp_path, "spectrum", "--k", "3", "--t", "2.75") == 1
    err = capsys.readouterr().err
    assert "stage spectrum k=3 t=2.75" in err


def test_console_script(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "zeromodes.cli", "count", "--field", "constant", "--k", "1", "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stderr
    with pytest.raises(SystemExit):
        cli.main(["nonsense"])

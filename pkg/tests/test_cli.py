import json

import numpy as np
import pytest

from qubo_unwrap import gridio
from qubo_unwrap.cli import EXIT_DATA, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main
from qubo_unwrap.metrics import match_labels
from qubo_unwrap.phase import LabelGrid, PhaseGrid, PhaseKind


@pytest.fixture
def generated(tmp_path):
    prefix = tmp_path / "g"
    assert main(["generate", "--width", "20", "--height", "20", "--seed", "3",
                 "--max-ambiguity", "3", "--out-prefix", str(prefix)]) == EXIT_OK
    return prefix


def test_generate_outputs(generated, capsys):
    for suffix in (".truth.fpg", ".wrapped.fpg", ".labels.lbg", ".truth.pgm", ".wrapped.pgm",
                   ".manifest.json"):
        assert generated.with_name("g" + suffix).exists()
    labels = gridio.read_labels(generated.with_name("g.labels.lbg"))
    assert labels.domain_size == 4
    manifest = json.loads(generated.with_name("g.manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["flags"]["max_ambiguity"] == 3
    assert len(manifest["outputs"]) == 5


def test_unwrap_and_evaluate(generated, tmp_path, capsys):
    out = tmp_path / "u"
    rc = main(["unwrap", "--in", str(generated.with_name("g.wrapped.fpg")), "--solver", "pticm",
               "--tile", "10x10", "--tile-domain", "4", "--offset-domain", "8",
               "--offset-solver", "pticm", "--offset-sweeps", "300", "--sweeps", "300",
               "--out-prefix", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "pairwise=" in text and "clamp_count=" in text
    result = gridio.read_labels(tmp_path / "u.labels.lbg")
    truth = gridio.read_labels(generated.with_name("g.labels.lbg"))
    assert match_labels(result, truth).raw_match_pct == 100.0

    rc = main(["evaluate", "--result", str(tmp_path / "u.labels.lbg"),
               "--truth", str(generated.with_name("g.labels.lbg")), "--out-prefix", str(tmp_path / "m")])
    assert rc == EXIT_OK
    assert "raw_match_pct=100.0" in capsys.readouterr().out
    assert json.loads((tmp_path / "m.metrics.json").read_text())["mismatch_count"] == 0


def test_unwrap_is_deterministic(generated, tmp_path, capsys):
    args = ["unwrap", "--in", str(generated.with_name("g.wrapped.fpg")), "--sweeps", "50",
            "--offset-sweeps", "50", "--seed", "5"]
    main(args + ["--out-prefix", str(tmp_path / "a")])
    main(args + ["--out-prefix", str(tmp_path / "b")])
    for suffix in (".labels.lbg", ".unwrapped.fpg", ".energy.txt"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_csv_input(tmp_path, capsys):
    p = tmp_path / "in.csv"
    p.write_text("0.0,1.0,2.0\n0.5,1.5,2.5\n")
    assert main(["unwrap", "--in", str(p), "--no-tiling", "--solver", "exhaustive",
                 "--domain", "2", "--out-prefix", str(tmp_path / "c")]) == EXIT_OK
    assert gridio.read_labels(tmp_path / "c.labels.lbg").labels.tolist() == [[0, 0, 0], [0, 0, 0]]


def test_unwrapped_input_is_data_error(tmp_path, capsys):
    p = tmp_path / "t.fpg"
    gridio.write_phase(PhaseGrid(np.zeros((2, 2)), PhaseKind.UNWRAPPED), p)
    assert main(["unwrap", "--in", str(p), "--out-prefix", str(tmp_path / "x")]) == EXIT_DATA
    assert "unwrapped" in capsys.readouterr().err


def test_missing_and_malformed_files(tmp_path, capsys):
    assert main(["unwrap", "--in", str(tmp_path / "nope.fpg"), "--out-prefix", "x"]) == EXIT_DATA
    bad = tmp_path / "bad.fpg"
    bad.write_bytes(b"FPG1")
    assert main(["unwrap", "--in", str(bad), "--out-prefix", str(tmp_path / "x")]) == EXIT_DATA


def test_shape_mismatch_is_data_error(tmp_path, capsys):
    gridio.write_labels(LabelGrid(np.zeros((2, 2), int), 4), tmp_path / "a.lbg")
    gridio.write_labels(LabelGrid(np.zeros((2, 3), int), 4), tmp_path / "b.lbg")
    assert main(["evaluate", "--result", str(tmp_path / "a.lbg"),
                 "--truth", str(tmp_path / "b.lbg")]) == EXIT_DATA


def test_exhaustive_too_large_is_solver_error(generated, tmp_path, capsys):
    rc = main(["unwrap", "--in", str(generated.with_name("g.wrapped.fpg")), "--no-tiling",
               "--solver", "exhaustive", "--out-prefix", str(tmp_path / "x")])
    assert rc == EXIT_SOLVER


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as ei:
        main(["unwrap", "--in", "x", "--tile", "10by10", "--out-prefix", "x"])
    assert ei.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == EXIT_USAGE
    assert main(["generate", "--width", "0", "--out-prefix", str(tmp_path / "z")]) == EXIT_USAGE


def test_generation_failure(tmp_path, capsys):
    assert main(["generate", "--width", "2", "--height", "1", "--out-prefix",
                 str(tmp_path / "z")]) == EXIT_SOLVER


def test_experiment_small(tmp_path, capsys):
    out = tmp_path / "exp"
    rc = main(["experiment", "--images", "2", "--size", "12", "--tile", "6", "--solvers", "pticm",
               "--offset-sweeps", "300", "--max-ambiguity", "2", "--out-dir", str(out)])
    assert rc == EXIT_OK
    assert "pticm" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rows"][0]["solver"] == "pticm"
    assert (out / "noise-free" / "img000" / "pticm.labels.lbg").exists()

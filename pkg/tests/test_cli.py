import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spinbridge import hamiltonians as hm
from spinbridge import protocols as pr
from spinbridge.cli import parse_config, run
from spinbridge.cli.__main__ import main
from spinbridge.errors import AlignmentError, ConfigError

CK_MIN = """\
protocol: cross-kerr
model: ideal
parameters: {alpha: 0.5, epsilon: 0.2, eta: 0.1, lambda: 10}
"""

N00M_DUMP = """\
protocol: n00m
parameters: {eta: 0.31, epsilon: 1/750, lambda_over_epsilon: 2.5, n: 2, m: 2}
grid: {points: 1}
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_echoes_resolved_defaults(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, CK_MIN))]) == 0
    out = capsys.readouterr().out
    for key in ("points: 201", "scheme: cf4", "log_base: e", "pulse: true", "target_order: 2", "alpha: 0.5"):
        assert key in out


def test_empty_config_reports_missing_protocol(tmp_path, capsys):
    path = write(tmp_path, "")
    with pytest.raises(ConfigError, match="protocol missing"):
        parse_config(path)
    assert main(["validate", str(path)]) == 2
    assert "protocol missing" in capsys.readouterr().err


def test_unknown_keys_are_listed(tmp_path):
    with pytest.raises(ConfigError, match="colour, speed"):
        parse_config(write(tmp_path, CK_MIN + "speed: 1\ncolour: red\n"))
    with pytest.raises(ConfigError, match="parameters: bogus"):
        parse_config(write(tmp_path, CK_MIN.replace("lambda: 10", "lambda: 10, bogus: 1")))


def test_invariant_violations_name_the_field(tmp_path):
    with pytest.raises(ConfigError, match="parameters.eta must be positive"):
        parse_config(write(tmp_path, CK_MIN.replace("eta: 0.1", "eta: -0.1")))
    with pytest.raises(ConfigError, match="epsilon"):
        parse_config(write(tmp_path, CK_MIN.replace("epsilon: 0.2", "epsilon: 1/0")))
    with pytest.raises(ConfigError, match="missing alpha"):
        parse_config(write(tmp_path, CK_MIN.replace("alpha: 0.5, ", "")))


def test_fraction_sweep_is_accepted(tmp_path):
    cfg = parse_config(write(tmp_path, N00M_DUMP + "sweep: {epsilon: [1/250, 1/500, 1/750]}\n"))
    pts = cfg.points()
    assert [p.values["epsilon"] for p in pts] == [1 / 250, 1 / 500, 1 / 750]
    lam = [p.parameters["lambda_over_epsilon"] * p.parameters["epsilon"] for p in pts]
    assert lam[0] == pytest.approx(2.5 / 250)


def test_zero_sweep_points_succeed_with_empty_inventory(tmp_path):
    cfg = write(tmp_path, CK_MIN + "sweep: {alpha: []}\n")
    out = tmp_path / "run"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["points"] == []
    assert manifest["files"] == ["manifest.json"]


def test_ideal_ck_csv_matches_in_process_series(tmp_path):
    cfg_path = write(tmp_path, CK_MIN)
    out = tmp_path / "run"
    assert main(["simulate", str(cfg_path), "--out", str(out)]) == 0
    rows = read_csv(out / "point_000" / "series.csv")
    assert list(rows[0]) == ["tau", "logneg", "fidelity", "pop_fidelity"]
    s = hm.SubsystemParams(0.1, (hm.DriveSpec(0.2),))
    ref = pr.run_ck(pr.CkRunSpec(hm.ModelParams(s, s, 10.0), 0.5, 0.5, model="ideal"))
    got = np.array([float(r["logneg"]) for r in rows])
    assert np.array_equal(got, ref.series("logneg"))
    raw = (out / "point_000" / "series.csv").read_bytes()
    assert b"\r" not in raw
    manifest = json.loads((out / "manifest.json").read_text())
    rec = manifest["points"][0]
    assert all(math.isfinite(v) for v in rec["diagnostics"].values())
    assert rec["summary"]["logneg_window_average"] > 0
    for f in manifest["files"]:
        assert (out / f).is_file()
    assert manifest["config"]["grid"]["points"] == 201


def test_log_base_flag(tmp_path):
    cfg = write(tmp_path, CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 3}"))
    a, b = tmp_path / "e", tmp_path / "two"
    main(["simulate", str(cfg), "--out", str(a)])
    main(["simulate", str(cfg), "--out", str(b), "--log-base", "2"])
    ea = [float(r["logneg"]) for r in read_csv(a / "point_000" / "series.csv")]
    eb = [float(r["logneg"]) for r in read_csv(b / "point_000" / "series.csv")]
    assert np.allclose(np.array(eb) * math.log(2), ea)


def test_compare_identical_and_misaligned(tmp_path):
    cfg = write(tmp_path, CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 5}"))
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", str(cfg), "--out", str(a)])
    main(["simulate", str(cfg), "--out", str(b)])
    assert main(["compare", str(a), str(b), "--out", str(tmp_path / "cmp")]) == 0
    rows = read_csv(tmp_path / "cmp" / "compare.csv")
    assert len(rows) == 5
    for r in rows:
        assert all(float(r[k]) == 0 for k in r if k.startswith("abs_diff_"))
    other = write(tmp_path, CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 4}"), "other.yaml")
    c = tmp_path / "c"
    main(["simulate", str(other), "--out", str(c)])
    from spinbridge.cli import compare

    with pytest.raises(AlignmentError):
        compare(a, c)
    assert main(["compare", str(a), str(c)]) == 2


def test_compare_ideal_vs_exact_is_bounded_by_series_gap(tmp_path):
    base = CK_MIN.replace("model: ideal", "model: MODEL\ngrid: {points: 6}")
    ideal = write(tmp_path, base.replace("MODEL", "ideal"), "ideal.yaml")
    exact = write(tmp_path, base.replace("MODEL", "exact"), "exact.yaml")
    a, b = tmp_path / "ideal", tmp_path / "exact"
    main(["simulate", str(ideal), "--out", str(a)])
    main(["simulate", str(exact), "--out", str(b)])
    from spinbridge.cli import compare

    rows = read_csv(compare(a, b))
    diff = np.array([float(r["abs_diff_logneg"]) for r in rows])
    la = np.array([float(r["logneg"]) for r in read_csv(a / "point_000" / "series.csv")])
    lb = np.array([float(r["logneg"]) for r in read_csv(b / "point_000" / "series.csv")])
    assert diff.max() > 0
    assert diff.max() <= np.max(np.abs(la - lb)) + 1e-15


def test_serial_and_parallel_runs_are_byte_identical(tmp_path):
    text = CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 4}") + "sweep: {alpha: [0.5, 1.0, 1.5]}\n"
    cfg = write(tmp_path, text)
    s, p, again = tmp_path / "serial", tmp_path / "parallel", tmp_path / "again"
    assert main(["simulate", str(cfg), "--out", str(s), "--dump-states"]) == 0
    assert main(["simulate", str(cfg), "--out", str(p), "--dump-states", "--threads", "3"]) == 0
    assert main(["simulate", str(cfg), "--out", str(again), "--dump-states"]) == 0
    files = sorted(f.relative_to(s) for f in s.rglob("*.csv"))
    assert len(files) == 6
    for f in files:
        assert (s / f).read_bytes() == (p / f).read_bytes() == (again / f).read_bytes()
    m = json.loads((p / "manifest.json").read_text())
    assert [r["index"] for r in m["points"]] == [0, 1, 2]


def test_failing_point_is_recorded_and_others_continue(tmp_path):
    text = CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 3}").replace(
        "lambda: 10", "lambda: 10, cutoff1: 8, cutoff2: 8"
    ) + "sweep: {alpha: [0.5, 3.0]}\n"
    out = tmp_path / "run"
    assert main(["simulate", str(write(tmp_path, text)), "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["errors"] == 1
    assert "TruncationError" in manifest["points"][1]["error"]
    assert (out / "point_000" / "series.csv").is_file()


def test_n00m_density_dump(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(write(tmp_path, N00M_DUMP)), "--out", str(out), "--dump-states"]) == 0
    rows = read_csv(out / "point_000" / "density.csv")
    assert list(rows[0]) == ["p1", "q1", "p2", "q2", "re", "im"]
    entry = {(int(r["p1"]), int(r["q1"]), int(r["p2"]), int(r["q2"])): complex(float(r["re"]), float(r["im"])) for r in rows}
    assert entry[(2, 0, 2, 0)].real == pytest.approx(0.574, abs=0.01)
    assert entry[(0, 2, 0, 2)].real == pytest.approx(1 - 0.574, abs=0.01)
    assert sum(entry[(p, q, p, q)].real for p in range(8) for q in range(8)) == pytest.approx(1)


def test_run_api_without_cli(tmp_path):
    cfg = parse_config(write(tmp_path, CK_MIN.replace("model: ideal", "model: ideal\ngrid: {points: 2}")))
    manifest = run(cfg, out=tmp_path / "api")
    assert manifest["status"] == "ok"
    assert Path(tmp_path / "api" / manifest["files"][1]).is_file()

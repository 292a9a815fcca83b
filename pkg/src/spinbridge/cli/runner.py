"""Sweep execution, output files and run comparison."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import AlignmentError, SamplingError
from ..protocols import ProtocolResult, avg_entanglement, run_ck, run_n00m, theta_sweep
from .config import Point, RunConfig, ck_spec, n00m_spec

SERIES_COLUMNS = ("tau", "logneg", "fidelity", "pop_fidelity")
MANIFEST = "manifest.json"


def fmt(x: float) -> str:
    """17 significant digits, the round-trip precision of a double."""
    return format(float(x), ".17g")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def series_csv(result: ProtocolResult) -> str:
    rows = zip(
        result.grid,
        result.series("logneg"),
        result.series("fidelity"),
        result.series("pop_fidelity"),
    )
    return _csv_text(SERIES_COLUMNS, ([fmt(v) for v in row] for row in rows))


def density_csv(result: ProtocolResult) -> str:
    """One row per element ``<p1 q1| rho |p2 q2>``."""
    rho = np.asarray(result.final_state.matrix)
    n1, n2 = result.final_state.space.dims
    t = rho.reshape(n1, n2, n1, n2)
    rows = []
    for p1 in range(n1):
        for q1 in range(n2):
            for p2 in range(n1):
                for q2 in range(n2):
                    z = t[p1, q1, p2, q2]
                    rows.append((p1, q1, p2, q2, fmt(z.real), fmt(z.imag)))
    return _csv_text(("p1", "q1", "p2", "q2", "re", "im"), rows)


def _finite(d: dict) -> dict:
    return {k: (float(v) if math.isfinite(float(v)) else None) for k, v in d.items()}


def run_point(cfg: RunConfig, point: Point) -> tuple[ProtocolResult, dict]:
    """Execute one sweep point; return the result and its summary."""
    if cfg.protocol == "cross-kerr":
        result = run_ck(ck_spec(cfg, point.parameters))
        summary = {"logneg_final": float(result.series("logneg")[-1])}
        try:
            summary["logneg_window_average"] = avg_entanglement(result)
        except SamplingError:
            pass  # grid too coarse for the window average
        return result, summary
    result = run_n00m(n00m_spec(cfg, point.parameters))
    meta = result.meta
    summary = {
        "population_n0": meta["population_n0"],
        "population_0m": meta["population_0m"],
        "probability": meta["probability"],
        "logneg_final": float(result.series("logneg")[-1]),
        "delta_logneg": meta["delta_logneg"],
        "fidelity_final": float(result.series("fidelity")[-1]),
    }
    return result, summary


def _point_dir(out: Path, point: Point) -> Path:
    return out / f"point_{point.index:03d}"


class Runner:
    """Executes a :class:`RunConfig` and maintains its manifest."""

    def __init__(self, cfg: RunConfig, out: str | os.PathLike | None = None, threads: int | None = None,
                 dump_states: bool | None = None):
        self.cfg = cfg
        self.out = Path(out if out is not None else cfg.output)
        self.threads = threads or cfg.threads
        self.dump_states = cfg.dump_states if dump_states is None else dump_states
        self.manifest: dict = {}

    def _save_manifest(self):
        _write_text(self.out / MANIFEST, json.dumps(self.manifest, indent=2, sort_keys=False) + "\n")

    def _execute(self, point: Point) -> dict:
        try:
            result, summary = run_point(self.cfg, point)
        except Exception as exc:
            return {"index": point.index, "values": point.values, "error": f"{type(exc).__name__}: {exc}",
                    "traceback": traceback.format_exc()}
        files = {}
        pdir = _point_dir(self.out, point)
        pdir.mkdir(parents=True, exist_ok=True)
        files["series"] = series_csv(result)
        if self.dump_states:
            files["density"] = density_csv(result)
        if self.cfg.protocol == "theta-sweep":
            th = theta_sweep(result, self.cfg.thetas())
            files["theta"] = _csv_text(("theta", "fidelity"), ([fmt(a), fmt(b)] for a, b in zip(th.grid, th.values)))
            k = int(np.argmax(th.values))
            summary.update(theta_argmax=float(th.grid[k]), theta_fidelity_max=float(th.values[k]))
        written = []
        for kind, text in files.items():
            path = pdir / f"{kind}.csv"
            _write_text(path, text)
            written.append(str(path.relative_to(self.out)))
        meta = {k: v for k, v in result.meta.items() if isinstance(v, (int, float, str, bool, list))}
        return {
            "index": point.index,
            "values": point.values,
            "parameters": point.parameters,
            "summary": _finite(summary),
            "diagnostics": _finite(result.diagnostics),
            "meta": meta,
            "files": written,
        }

    def run(self) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        points = self.cfg.points()
        self.manifest = {
            "tool": "spinbridge",
            "version": __version__,
            "config": self.cfg.resolved(),
            "source": self.cfg.source,
            "started": _now(),
            "finished": None,
            "status": "running",
            "threads": self.threads,
            "dump_states": self.dump_states,
            "points": [],
            "files": [MANIFEST],
        }
        self._save_manifest()
        if self.threads > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                records = list(pool.map(self._execute, points))
        else:
            records = [self._execute(p) for p in points]
        records.sort(key=lambda r: r["index"])
        errors = [r for r in records if "error" in r]
        self.manifest["points"] = records
        self.manifest["files"] = [MANIFEST] + sorted(f for r in records for f in r.get("files", []))
        self.manifest["finished"] = _now()
        self.manifest["status"] = "failed" if errors else "ok"
        self.manifest["errors"] = len(errors)
        self._save_manifest()
        return self.manifest


def run(cfg: RunConfig, out=None, threads=None, dump_states=None) -> dict:
    """Run every sweep point of ``cfg``; return the manifest."""
    return Runner(cfg, out, threads, dump_states).run()


# -- comparison -----------------------------------------------------------------


def _load_manifest(d: Path) -> dict:
    try:
        return json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise AlignmentError(f"{d} has no {MANIFEST}") from None


def _read_series(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))


def compare(dir_a, dir_b, out=None) -> Path:
    """Pointwise ``|a - b|`` for every shared metric of two runs.

    Points are matched by index and must carry identical time grids.
    Writes ``compare.csv`` (into ``out`` or ``dir_a``) and returns its path.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    ma, mb = _load_manifest(dir_a), _load_manifest(dir_b)
    pa = [p for p in ma["points"] if "error" not in p]
    pb = {p["index"]: p for p in mb["points"] if "error" not in p}
    if {p["index"] for p in pa} != set(pb):
        raise AlignmentError("runs contain different sets of successful points")
    sweep_names = sorted({k for p in pa for k in p["values"]})
    header = ["point"] + sweep_names + ["tau"]
    rows = []
    metrics = None
    for p in pa:
        q = pb[p["index"]]
        fa = next(f for f in p["files"] if f.endswith("series.csv"))
        fb = next(f for f in q["files"] if f.endswith("series.csv"))
        ha, a = _read_series(dir_a / fa)
        hb, b = _read_series(dir_b / fb)
        shared = [c for c in ha[1:] if c in hb[1:]]
        if metrics is None:
            metrics = shared
            header += [f"abs_diff_{c}" for c in shared]
        if a.shape[0] != b.shape[0] or not np.allclose(a[:, 0], b[:, 0], rtol=0, atol=1e-12):
            raise AlignmentError(f"point {p['index']}: time grids differ")
        ia = [ha.index(c) for c in metrics]
        ib = [hb.index(c) for c in metrics]
        diff = np.abs(a[:, ia] - b[:, ib])
        vals = [fmt(p["values"].get(k, math.nan)) for k in sweep_names]
        for k in range(a.shape[0]):
            rows.append([str(p["index"])] + vals + [fmt(a[k, 0])] + [fmt(x) for x in diff[k]])
    if metrics is None:
        header += [f"abs_diff_{c}" for c in SERIES_COLUMNS[1:]]
    target = Path(out) if out is not None else dir_a
    target.mkdir(parents=True, exist_ok=True)
    path = target / "compare.csv"
    _write_text(path, _csv_text(header, rows))
    return path

"""Batch execution: run scenarios, write reports, tables and figures.

Each scenario runs independently; its outputs are written atomically
(temp file, then rename).  Report JSON and CSV numbers are formatted to
17 significant digits and carry no timestamps, so identical runs produce
byte-identical reports; wall-clock timestamps live only in the run
manifest.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .forcing import MovingAverageField, moving_average_field
from .report import format_value, to_json
from .scenarios import CrossCheckResult, Scenario, cross_check


@dataclass
class RunManifest:
    entries: List[dict]
    started: str
    finished: str
    version: str = __version__

    @property
    def counts(self) -> dict:
        out = {"ok": 0, "error": 0, "agree": 0, "disagree": 0,
               "inconclusive": 0}
        for e in self.entries:
            out[e["status"]] = out.get(e["status"], 0) + 1
            if e["status"] == "ok":
                out[e["consistency"]] = out.get(e["consistency"], 0) + 1
        return out

    @property
    def exit_code(self) -> int:
        return 1 if any(e["status"] == "error" for e in self.entries) else 0

    def as_dict(self) -> dict:
        return {"tool": "odeasym", "version": self.version,
                "started": self.started, "finished": self.finished,
                "counts": self.counts, "scenarios": self.entries}


def _atomic_write(path: str, data: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_trajectory_csv(path: str, result: CrossCheckResult) -> None:
    traj = result.solution
    t = traj.t
    vals = traj.values
    if vals.ndim == 1:
        header = "t,y"
        rows = (f"{format_value(ti)},{format_value(v)}"
                for ti, v in zip(t, vals))
    else:
        d = vals.shape[1]
        header = "t," + ",".join(f"x_{i + 1}" for i in range(d))
        rows = (format_value(ti) + ","
                + ",".join(format_value(v) for v in row)
                for ti, row in zip(t, vals))
    _atomic_write(path, header + "\n" + "\n".join(rows) + "\n")


def _scenario_field(scenario: Scenario,
                    result: CrossCheckResult) -> MovingAverageField:
    if result.avg_field is not None:
        return result.avg_field
    thetas = np.linspace(0.0, scenario.delta, scenario.theta_count)
    if len(scenario.forcing) == 1:
        return moving_average_field(scenario.forcing[0], thetas,
                                    scenario.grid, scenario.quad_tol)
    parts = [moving_average_field(f, thetas, scenario.grid,
                                  scenario.quad_tol).values
             for f in scenario.forcing]
    norm_vals = np.sum(np.abs(parts), axis=0)
    return MovingAverageField(theta_grid=thetas, grid=scenario.grid,
                              values=norm_vals,
                              quad_tol=scenario.quad_tol, label="norm")


def _write_field_csv(path: str, fld: MovingAverageField) -> None:
    header = "t," + ",".join(f"theta={format_value(th)}"
                             for th in fld.theta_grid)
    lines = [header]
    for i, ti in enumerate(fld.t):
        lines.append(format_value(ti) + ","
                     + ",".join(format_value(v) for v in fld.values[:, i]))
    _atomic_write(path, "\n".join(lines) + "\n")


def _plotdata_rows(scenario: Scenario, result: CrossCheckResult) -> List[str]:
    rows: List[str] = []

    def emit(series: str, xs, ys):
        for x, y in zip(xs, ys):
            rows.append(f"{series},{format_value(x)},{format_value(y)}")

    if result.solution is not None:
        emit("y", result.solution.t, result.solution.norms(1))
    if result.ratio_series is not None:
        t, ratio = result.ratio_series
        emit("abs_y_over_gamma", t, ratio)
    if result.window_rows:
        emit("window_max", [w[0] for w in result.window_rows],
             [w[1] for w in result.window_rows])
    fld = result.avg_field
    if fld is not None:
        gvals = np.asarray(scenario.weight(fld.t), dtype=float)
        # plot-ready subset: at most 8 window lengths
        stride = max(1, (len(fld.theta_grid) - 1) // 8)
        for j in range(1, len(fld.theta_grid), stride):
            emit(f"ftheta_{fld.theta_grid[j]:g}", fld.t,
                 np.abs(fld.values[j]) / gvals)
    if result.profile is not None:
        emit("Ltheta", result.profile.theta_grid, result.profile.L_hat)
    return rows


def _render_figures(scenario: Scenario, result: CrossCheckResult,
                    out_dir: str) -> List[str]:
    written: List[str] = []
    if result.ratio_series is not None:
        t, ratio = result.ratio_series
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        finite = np.isfinite(ratio)
        ax.plot(t[finite], ratio[finite], lw=0.8,
                label="solution over weight")
        if result.window_rows:
            ax.plot([w[0] for w in result.window_rows],
                    [w[1] for w in result.window_rows],
                    "o", ms=4, label="window max")
        pos = ratio[finite & (ratio > 0)]
        if pos.size and np.max(pos) / max(np.min(pos), 1e-300) > 1e3:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("ratio")
        ax.set_title(scenario.id)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{scenario.id}_ratio.png")
        fig.savefig(path, dpi=110, metadata={})
        plt.close(fig)
        written.append(path)
    if result.profile is not None:
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        ax.plot(result.profile.theta_grid, result.profile.L_hat, "-o", ms=3)
        ax.set_xlabel("window length")
        ax.set_ylabel("limsup estimate")
        ax.set_title(f"{scenario.id}: window-ratio profile")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{scenario.id}_profile.png")
        fig.savefig(path, dpi=110, metadata={})
        plt.close(fig)
        written.append(path)
    return written


def run_one(scenario: Scenario, out_dir: str) -> dict:
    """Execute a scenario and write its requested outputs."""
    entry = {"id": scenario.id, "theorem": scenario.theorem,
             "status": "ok", "consistency": "", "outputs": []}
    try:
        result = cross_check(scenario)
        report = result.report
        entry["consistency"] = report.consistency
        outputs = scenario.outputs
        if "report" in outputs:
            path = os.path.join(out_dir, f"{scenario.id}_report.json")
            payload = report.as_dict()
            payload["policy"] = scenario.policy.as_dict()
            _atomic_write(path, to_json(payload) + "\n")
            entry["outputs"].append(path)
        if "trajectories" in outputs and result.solution is not None:
            path = os.path.join(out_dir, f"{scenario.id}_traj.csv")
            _write_trajectory_csv(path, result)
            entry["outputs"].append(path)
        if "field" in outputs:
            path = os.path.join(out_dir, f"{scenario.id}_field.csv")
            _write_field_csv(path, _scenario_field(scenario, result))
            entry["outputs"].append(path)
        if "plotdata" in outputs:
            path = os.path.join(out_dir, f"{scenario.id}_plotdata.csv")
            rows = _plotdata_rows(scenario, result)
            _atomic_write(path, "series,t,value\n" + "\n".join(rows) + "\n")
            entry["outputs"].append(path)
            entry["outputs"].extend(_render_figures(scenario, result,
                                                    out_dir))
    except Exception as e:                      # noqa: BLE001
        entry["status"] = "error"
        entry["consistency"] = ""
        entry["error"] = f"{type(e).__name__}: {e}"
    return entry


def _utc_stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run(scenarios: Sequence[Scenario], out_dir: str, jobs: int = 1,
        only: Optional[str] = None) -> RunManifest:
    """Run scenarios (optionally a single id), write outputs and the
    manifest, and return the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    selected = [sc for sc in scenarios if only is None or sc.id == only]
    if only is not None and not selected:
        raise KeyError(f"no scenario with id {only!r}")
    started = _utc_stamp()
    if jobs > 1 and len(selected) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(run_one, selected,
                                    [out_dir] * len(selected)))
    else:
        entries = [run_one(sc, out_dir) for sc in selected]
    entries.sort(key=lambda e: e["id"])
    manifest = RunManifest(entries=entries, started=started,
                           finished=_utc_stamp())
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  to_json(manifest.as_dict()) + "\n")
    return manifest

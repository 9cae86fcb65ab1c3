"""Report emission: solution dumps, metrics files, sweep artifacts.

All writers are deterministic byte-for-byte for identical inputs (no
timestamps, fixed row ordering, repr float formatting), and every CSV
written here has a matching reader that round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .cost import EV_CLASS, GV_CLASS
from .metrics import MetricsReport
from .network import Network

SOLUTION_COLUMNS = ["link_id", "flow_gv", "flow_ev", "flow_total", "time", "voc"]
SWEEP_COLUMNS = ["penetration", "t_mue", "ps", "dps", "voc_total", "rur"]
METRICS_SUMMARY_FIELDS = [
    "avg_travel_time_mue", "avg_travel_time_ff", "voc_total", "rur",
]
METRICS_LINK_FIELDS = ["voc", "congested_time", "delay_factor"]


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


# -- solution dumps ------------------------------------------------------


def solution_records(solution, network: Network) -> list[dict]:
    """Per-link flow/time/voc rows in network link order."""
    ids = solution.link_flows.link_ids
    gv = solution.link_flows.class_flows.get(GV_CLASS)
    ev = solution.link_flows.class_flows.get(EV_CLASS)
    out = []
    for i, lid in enumerate(ids):
        fg = float(gv[i]) if gv is not None else 0.0
        fe = float(ev[i]) if ev is not None else 0.0
        out.append({
            "link_id": lid,
            "flow_gv": fg,
            "flow_ev": fe,
            "flow_total": fg + fe,
            "time": float(solution.link_times[i]),
            "voc": (fg + fe) / network.links[lid].capacity,
        })
    return out


def write_solution_json(solution, network: Network, path) -> None:
    payload = {
        "method": solution.method,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "objective": solution.objective,
        "wardrop_gap": solution.wardrop_gap,
        "skipped_intrazonal_demand": solution.skipped_intrazonal,
        "duals": dict(solution.duals),
        "links": solution_records(solution, network),
        "gap_trace": solution.gap_trace,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def write_solution_csv(solution, network: Network, path) -> None:
    rows = [
        [r["link_id"]] + [_fmt(r[c]) for c in SOLUTION_COLUMNS[1:]]
        for r in solution_records(solution, network)
    ]
    _write_rows(path, SOLUTION_COLUMNS, rows)


def read_solution_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SOLUTION_COLUMNS:
            raise ValueError(
                f"{path}: expected columns {SOLUTION_COLUMNS}, "
                f"got {reader.fieldnames}"
            )
        return [
            {
                "link_id": row["link_id"],
                **{c: float(row[c]) for c in SOLUTION_COLUMNS[1:]},
            }
            for row in reader
        ]


# -- metrics reports -----------------------------------------------------


def metrics_to_dict(report: MetricsReport) -> dict:
    return {
        "avg_travel_time_mue": report.avg_travel_time_mue,
        "avg_travel_time_ff": report.avg_travel_time_ff,
        "voc_total": report.voc_total,
        "rur": report.rur,
        "voc_per_link": dict(report.voc_per_link),
        "link_congested_time": dict(report.link_congested_time),
        "delay_factor": dict(report.delay_factor),
    }


def write_metrics_json(report: MetricsReport, path) -> None:
    Path(path).write_text(json.dumps(metrics_to_dict(report), indent=2) + "\n")


def write_metrics_csv(report: MetricsReport, path) -> None:
    """One summary row for the scalars, then one row per road link."""
    header = (["kind", "link_id"] + METRICS_SUMMARY_FIELDS + METRICS_LINK_FIELDS)
    summary = (
        ["summary", ""]
        + [_fmt(getattr(report, f)) for f in METRICS_SUMMARY_FIELDS]
        + [""] * len(METRICS_LINK_FIELDS)
    )
    rows = [summary]
    for lid in report.voc_per_link:
        rows.append(
            ["link", lid]
            + [""] * len(METRICS_SUMMARY_FIELDS)
            + [
                _fmt(report.voc_per_link[lid]),
                _fmt(report.link_congested_time[lid]),
                _fmt(report.delay_factor[lid]),
            ]
        )
    _write_rows(path, header, rows)


def read_metrics_csv(path) -> tuple[dict, dict]:
    """Returns (scalars, per-link rows keyed by link id)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        scalars = {}
        links = {}
        for row in reader:
            if row["kind"] == "summary":
                scalars = {
                    f: float(row[f]) for f in METRICS_SUMMARY_FIELDS
                }
            elif row["kind"] == "link":
                links[row["link_id"]] = {
                    f: float(row[f]) for f in METRICS_LINK_FIELDS
                }
            else:
                raise ValueError(f"{path}: unknown row kind {row['kind']!r}")
    return scalars, links


# -- sweep artifacts -----------------------------------------------------


def write_sweep_csv(sweep, path) -> None:
    """One row per level: penetration, T, PS, step dPS, VOC total, RUR."""
    rows = []
    for i, level in enumerate(sweep.levels):
        rec = sweep.records[i] if sweep.records else None
        ps = sweep.potential_savings[i] if sweep.potential_savings else None
        dps = sweep.ps_diffs[i - 1] if i and sweep.ps_diffs else None
        rows.append([
            _fmt(level),
            _fmt(sweep.avg_times[i]),
            _fmt(ps),
            _fmt(dps),
            _fmt(rec.report.voc_total) if rec else "",
            _fmt(rec.report.rur) if rec else "",
        ])
    _write_rows(path, SWEEP_COLUMNS, rows)


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_COLUMNS:
            raise ValueError(
                f"{path}: expected columns {SWEEP_COLUMNS}, got {reader.fieldnames}"
            )
        out = []
        for row in reader:
            out.append({
                c: (float(row[c]) if row[c] != "" else None)
                for c in SWEEP_COLUMNS
            })
        return out


def sweep_to_dict(sweep) -> dict:
    payload = {
        "levels": list(sweep.levels),
        "avg_travel_time_mue": list(sweep.avg_times),
        "gradient": list(sweep.gradient),
        "potential_savings": list(sweep.potential_savings or []),
        "potential_savings_diff": list(sweep.ps_diffs or []),
        "plateau_intervals": [list(iv) for iv in sweep.plateau_intervals],
        "transition_intervals": [list(iv) for iv in sweep.transition_intervals],
        "critical_thresholds": list(sweep.critical_thresholds),
        "city_type": sweep.city_type,
        "classification": sweep.classification,
    }
    if sweep.records is not None:
        payload["overlap_ratio"] = [rec.overlap_ratio for rec in sweep.records]
        payload["voc_total"] = [rec.report.voc_total for rec in sweep.records]
        payload["rur"] = [rec.report.rur for rec in sweep.records]
    return payload


def write_sweep_json(sweep, path) -> None:
    Path(path).write_text(json.dumps(sweep_to_dict(sweep), indent=2) + "\n")


def write_sweep_series(sweep, outdir) -> dict:
    """Plot-ready two-column series files; returns {name: path}."""
    outdir = Path(outdir)
    series = {
        "t_vs_re": sweep.avg_times,
        "ps_vs_re": sweep.potential_savings or [None] * len(sweep.levels),
        "voc_vs_re": [r.report.voc_total for r in sweep.records]
        if sweep.records else [None] * len(sweep.levels),
        "rur_vs_re": [r.report.rur for r in sweep.records]
        if sweep.records else [None] * len(sweep.levels),
    }
    paths = {}
    for name, values in series.items():
        path = outdir / f"{name}.csv"
        _write_rows(
            path,
            ["penetration", "value"],
            [[_fmt(lv), _fmt(v)] for lv, v in zip(sweep.levels, values)],
        )
        paths[name] = path
    return paths


def read_series_csv(path) -> list[tuple[float, float | None]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["penetration", "value"]:
            raise ValueError(f"{path}: expected penetration,value columns")
        return [
            (
                float(row["penetration"]),
                float(row["value"]) if row["value"] != "" else None,
            )
            for row in reader
        ]

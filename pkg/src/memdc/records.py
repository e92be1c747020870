"""Delimited text records for every result type, and their exact inverses.

Tables are CSV with unit-bearing headers, preceded by ``# key = value``
metadata lines. Floats are written with ``repr`` so they parse back to the
identical binary value.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import fields
from typing import Any, Dict, List, Sequence, Tuple, Type

from .circuit import OutputSample
from .experiments import ProgramOutcome, StabilityResult, SweepResult, TransferRow
from .programming import ProgramReport
from .scaling import PowerRow, ScanRow, TechRow

# dataclass field -> column header
SCAN_COLUMNS = {
    "r_min": "r_min_ohm",
    "i_b": "i_b_A",
    "power": "power_W",
    "n_max": "n_max",
    "quantum_dots": "quantum_dots",
    "footprint": "footprint_x",
}
TECH_COLUMNS = {"tech": "tech", "r_min": "r_min_ohm", "r_max": "r_max_ohm", **{
    k: v for k, v in SCAN_COLUMNS.items() if k != "r_min"}}
POWER_COLUMNS = {"i_b": "i_b_A", "power": "power_W", "n_max": "n_max",
                 "quantum_dots": "quantum_dots"}
TRANSFER_COLUMNS = {
    "temperature": "temperature_K",
    "v_in": "v_in_V",
    "v_out": "v_out_V",
    "gain_factor": "gain_factor",
    "idle_current": "idle_current_A",
}
TRACE_COLUMNS = {"timestamp": "t_s", "v_out": "v_out_V", "supply_current": "supply_current_A"}


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(text: str, kind: type) -> Any:
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _header_text(meta: Dict[str, Any]) -> str:
    return "".join(f"# {key} = {_cell(value)}\n" for key, value in meta.items())


def _split(text: str) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def format_table(rows: Sequence[Any], columns: Dict[str, str], meta: Dict[str, Any] = None) -> str:
    out = io.StringIO()
    out.write(_header_text(meta or {}))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns.values())
    for row in rows:
        writer.writerow(_cell(getattr(row, name)) for name in columns)
    return out.getvalue()


def parse_table(text: str, cls: Type, columns: Dict[str, str]) -> Tuple[Dict[str, str], list]:
    types = {f.name: f.type for f in fields(cls)}
    kinds = {"int": int, "float": float, "str": str}
    meta, records = _split(text)
    rows = [
        cls(**{name: _convert(rec[header], kinds[types[name]]) for name, header in columns.items()})
        for rec in records
    ]
    return meta, rows


# -- sweeps ----------------------------------------------------------------


def format_sweep(result: SweepResult, meta: Dict[str, Any] = None) -> str:
    head = dict(meta or {})
    head.update(
        slope_V_per_V=result.slope,
        intercept_V=result.intercept,
        resolution_V=result.resolution,
        mean_mre_pct=result.mean_mre,
    )
    reps = len(result.samples)
    out = io.StringIO()
    out.write(_header_text(head))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["target_V", "mean_V", "std_V", "mre_pct"] + [f"rep_{r:03d}_V" for r in range(reps)]
    )
    for j, target in enumerate(result.targets):
        writer.writerow(
            [_cell(target), _cell(result.means[j]), _cell(result.stds[j]), _cell(result.mre[j])]
            + [_cell(result.samples[r][j]) for r in range(reps)]
        )
    return out.getvalue()


def parse_sweep(text: str) -> SweepResult:
    meta, records = _split(text)
    reps = sorted(k for k in records[0] if k.startswith("rep_"))
    return SweepResult(
        targets=tuple(float(r["target_V"]) for r in records),
        means=tuple(float(r["mean_V"]) for r in records),
        stds=tuple(float(r["std_V"]) for r in records),
        slope=float(meta["slope_V_per_V"]),
        intercept=float(meta["intercept_V"]),
        mre=tuple(float(r["mre_pct"]) for r in records),
        samples=tuple(tuple(float(r[k]) for r in records) for k in reps),
        resolution=float(meta["resolution_V"]),
    )


# -- stability -------------------------------------------------------------


def format_stability(result: StabilityResult, meta: Dict[str, Any] = None) -> str:
    head = dict(meta or {})
    head.update(
        slope_V_per_s=result.slope,
        intercept_V=result.intercept,
        noise_std_V=result.noise_std,
        normality_p=result.normality_pvalue,
        bins=len(result.histogram[0]),
    )
    return format_table(result.trace, TRACE_COLUMNS, head)


def parse_stability(text: str) -> StabilityResult:
    meta, trace = parse_table(text, OutputSample, TRACE_COLUMNS)
    return StabilityResult.from_trace(trace, bins=int(meta["bins"]))


def format_histogram(result: StabilityResult) -> str:
    counts, edges = result.histogram
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bin_lo_V", "bin_hi_V", "count"])
    for k, c in enumerate(counts):
        writer.writerow([_cell(edges[k]), _cell(edges[k + 1]), str(c)])
    return out.getvalue()


def parse_histogram(text: str) -> Tuple[Tuple[int, ...], Tuple[float, ...]]:
    _, records = _split(text)
    counts = tuple(int(r["count"]) for r in records)
    edges = tuple(float(r["bin_lo_V"]) for r in records) + (float(records[-1]["bin_hi_V"]),)
    return counts, edges


# -- programming sessions --------------------------------------------------


def format_program_log(outcomes: Sequence[ProgramOutcome]) -> str:
    lines = [
        json.dumps({"v_out_V": o.v_out, "report": o.report.to_record()}, sort_keys=True)
        for o in outcomes
    ]
    return "".join(line + "\n" for line in lines)


def parse_program_log(text: str) -> List[ProgramOutcome]:
    outcomes = []
    for line in text.splitlines():
        if line.strip():
            rec = json.loads(line)
            outcomes.append(ProgramOutcome(ProgramReport.from_record(rec["report"]), rec["v_out_V"]))
    return outcomes


# -- scaling and amplifier tables ------------------------------------------


def format_scan(rows: Sequence[ScanRow], meta: Dict[str, Any] = None) -> str:
    return format_table(rows, SCAN_COLUMNS, meta)


def parse_scan(text: str) -> List[ScanRow]:
    return parse_table(text, ScanRow, SCAN_COLUMNS)[1]


def format_techs(rows: Sequence[TechRow], meta: Dict[str, Any] = None) -> str:
    return format_table(rows, TECH_COLUMNS, meta)


def parse_techs(text: str) -> List[TechRow]:
    return parse_table(text, TechRow, TECH_COLUMNS)[1]


def format_power(rows: Sequence[PowerRow], meta: Dict[str, Any] = None) -> str:
    return format_table(rows, POWER_COLUMNS, meta)


def parse_power(text: str) -> List[PowerRow]:
    return parse_table(text, PowerRow, POWER_COLUMNS)[1]


def format_transfer(rows: Sequence[TransferRow], meta: Dict[str, Any] = None) -> str:
    return format_table(rows, TRANSFER_COLUMNS, meta)


def parse_transfer(text: str) -> List[TransferRow]:
    return parse_table(text, TransferRow, TRANSFER_COLUMNS)[1]

"""Run a configured experiment and persist its records with a manifest.

All output files are rendered in memory, written to temporary names in the
output directory, then renamed into place. Any failure removes every file of
the run, so a directory never holds a partial result set.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__, records
from .config import (
    ConfigError,
    ExperimentConfig,
    build_calibration,
    build_scaling_amp,
    build_sweep,
    build_tune,
    characterize_settings,
    stability_settings,
    validate,
)
from .experiments import (
    programmed_stability,
    run_characterization,
    run_dc_sweep,
    run_program,
)
from .scaling import ENVM_TECHS, ScalingScenario, power_curve, scan_rmin, tech_rows

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    seed: int
    version: str
    files: Dict[str, str]
    duration_s: float
    kind: str = ""
    summary: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.kind}_{cfg.calibration}_seed{cfg.master_seed}"


def _sweep(cfg: ExperimentConfig) -> Tuple[Dict[str, str], dict]:
    spec, workers = build_sweep(cfg)
    result = run_dc_sweep(spec, workers=workers)
    meta = {"calibration": cfg.calibration, "master_seed": cfg.master_seed,
            "offset_mode": spec.offset_mode}
    summary = {
        "a_f": result.slope,
        "intercept_V": result.intercept,
        "mean_mre_pct": result.mean_mre,
        "nonconverged": result.nonconverged,
    }
    return {f"{_stem(cfg)}.csv": records.format_sweep(result, meta)}, summary


def _stability(cfg: ExperimentConfig) -> Tuple[Dict[str, str], dict]:
    s = stability_settings(cfg)
    result, report = programmed_stability(
        build_calibration(cfg), s["v_target"], s["duration"], s["dt"], build_tune(cfg),
        cfg.master_seed, bins=int(s["bins"]),
    )
    meta = {"calibration": cfg.calibration, "master_seed": cfg.master_seed,
            "v_target_V": float(s["v_target"])}
    stem = _stem(cfg)
    files = {
        f"{stem}_trace.csv": records.format_stability(result, meta),
        f"{stem}_histogram.csv": records.format_histogram(result),
    }
    summary = {
        "slope_V_per_s": result.slope,
        "noise_std_V": result.noise_std,
        "normality_p": result.normality_pvalue,
        "programming_converged": report.converged,
    }
    return files, summary


def _program(cfg: ExperimentConfig) -> Tuple[Dict[str, str], dict]:
    targets = [float(v) for v in cfg.section("program")["v_targets"]]
    cal = build_calibration(cfg)
    outcomes = run_program(cal, targets, build_tune(cfg), cfg.master_seed)
    offset = cal.amplifier.offset
    summary = {
        "targets": len(outcomes),
        "converged": sum(o.report.converged for o in outcomes),
        "max_abs_error_V": max(abs(o.v_out - offset - o.report.v_target) for o in outcomes),
    }
    return {f"{_stem(cfg)}.jsonl": records.format_program_log(outcomes)}, summary


def _scale(cfg: ExperimentConfig) -> Tuple[Dict[str, str], dict]:
    s = cfg.section("scale")
    techs = list(s.get("techs", []))
    template = ScalingScenario(
        ENVM_TECHS[techs[0]] if techs else ENVM_TECHS["VCM"],
        build_scaling_amp(cfg),
        s.get("cooling_power", 1.5),
        s.get("gates_per_dot", 2),
        s.get("power_per_source"),
    )
    meta = {"cooling_power_W": float(template.cooling_power),
            "gates_per_dot": template.gates_per_dot}
    files, summary = {}, {}
    if techs:
        rows = tech_rows(template, techs)
        files["scale_techs.csv"] = records.format_techs(rows, meta)
        summary.update({f"n_max_{r.tech}": r.n_max for r in rows})
    if s.get("r_min_grid"):
        rows = scan_rmin(template, s["r_min_grid"])
        files["scale_scan.csv"] = records.format_scan(rows, meta)
        summary["scan_rows"] = len(rows)
    if s.get("i_b_grid"):
        rows = power_curve(template, s["i_b_grid"])
        files["scale_power.csv"] = records.format_power(rows, meta)
        summary["power_rows"] = len(rows)
    return files, summary


def _characterize(cfg: ExperimentConfig) -> Tuple[Dict[str, str], dict]:
    s = characterize_settings(cfg)
    amp = build_calibration(cfg).amplifier
    steps = int(round(s["v_in_stop"] / s["v_in_step"]))
    grid = np.round(s["v_in_step"] * np.arange(steps + 1), 12)
    rows = run_characterization(amp, s["temperatures"], grid, s["r_fb"], s["r_in"])
    meta = {"r_fb_ohm": float(s["r_fb"]), "r_in_ohm": float(s["r_in"]),
            "v_dd_V": amp.v_dd, "v_ss_V": amp.v_ss}
    summary = {
        f"gain_at_{t:g}K": rows[i * len(grid)].gain_factor * s["r_fb"] / s["r_in"]
        for i, t in enumerate(s["temperatures"])
    }
    return {f"characterize_{cfg.calibration}.csv": records.format_transfer(rows, meta)}, summary


DISPATCH = {
    "sweep": _sweep,
    "stability": _stability,
    "program": _program,
    "scale": _scale,
    "characterize": _characterize,
}


def _write_all(out_dir: Path, files: Dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    staged: List[Tuple[str, Path]] = []
    placed: List[Path] = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=out_dir)
            staged.append((name, Path(tmp)))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
        for name, tmp in staged:
            os.replace(tmp, out_dir / name)
            placed.append(out_dir / name)
    except BaseException:
        for _, tmp in staged:
            tmp.unlink(missing_ok=True)
        for path in placed:
            path.unlink(missing_ok=True)
        raise


def verify_manifest(out_dir: Path, manifest: Optional[RunManifest] = None) -> List[str]:
    """Names of files whose contents no longer match the manifest."""
    out_dir = Path(out_dir)
    if manifest is None:
        manifest = RunManifest.from_json((out_dir / MANIFEST_NAME).read_text())
    bad = []
    for name, digest in manifest.files.items():
        path = out_dir / name
        if not path.is_file() or hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            bad.append(name)
    return bad


def run(cfg: ExperimentConfig, out_dir=None) -> RunManifest:
    """Validate, execute, and persist one experiment; returns its manifest."""
    diags = validate(cfg)
    if diags:
        raise ConfigError(diags)
    out = Path(out_dir or cfg.output_dir or Path("results") / cfg.kind)
    start = time.perf_counter()
    files, summary = DISPATCH[cfg.kind](cfg)
    manifest = RunManifest(
        config_digest=cfg.digest(),
        seed=cfg.master_seed,
        version=__version__,
        files={name: sha256_text(text) for name, text in sorted(files.items())},
        duration_s=time.perf_counter() - start,
        kind=cfg.kind,
        summary=summary,
    )
    _write_all(out, {**files, MANIFEST_NAME: manifest.to_json()})
    bad = verify_manifest(out, manifest)
    if bad:
        for name in list(files) + [MANIFEST_NAME]:
            (out / name).unlink(missing_ok=True)
        raise OSError(f"checksum mismatch after write: {', '.join(bad)}")
    return manifest

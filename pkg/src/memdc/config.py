"""Experiment configuration documents (TOML) and their validation.

A document names a calibration preset and overrides any of its fields::

    kind = "sweep"
    master_seed = 2024
    calibration = "room"

    [bank]        # n, r_in, v_in
    [device]      # DeviceParams fields, or tech = "VCM" for its resistance window
    [amplifier]   # offset, v_dd, v_ss, output_headroom, nominal_closed_loop_gain
    [tune]        # TuneParams fields
    [sweep]       # v_start, v_stop, resolution, replications, offset_mode, workers
    [stability]   # v_target, duration, dt, bins
    [program]     # v_targets
    [scale]       # techs, r_min_grid, i_b_grid, cooling_power, gates_per_dot, anchors
    [characterize]  # temperatures, v_in_stop, v_in_step, r_fb, r_in
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .calibration import CALIBRATIONS, Calibration, DeviceParams
from .experiments import SweepSpec
from .programming import TuneParams, target_resistance
from .scaling import ENVM_TECHS, AmplifierScalingModel

KINDS = ("sweep", "stability", "program", "scale", "characterize")

SECTION_KEYS = {
    "bank": {"n", "r_in", "v_in"},
    "device": {f.name for f in dataclasses.fields(DeviceParams)} | {"tech"},
    "amplifier": {"offset", "v_dd", "v_ss", "output_headroom", "nominal_closed_loop_gain"},
    "tune": {f.name for f in dataclasses.fields(TuneParams)},
    "sweep": {"v_start", "v_stop", "resolution", "replications", "offset_mode", "workers"},
    "stability": {"v_target", "duration", "dt", "bins"},
    "program": {"v_targets"},
    "scale": {
        "techs",
        "r_min_grid",
        "i_b_grid",
        "cooling_power",
        "gates_per_dot",
        "power_per_source",
        "p_ref",
        "p_floor",
        "i_b_ref",
        "i_b_floor",
        "r_min_ref",
        "v_dd",
        "v_ss",
    },
    "characterize": {"temperatures", "v_in_stop", "v_in_step", "r_fb", "r_in"},
}


class ConfigError(ValueError):
    def __init__(self, diagnostics: List["Diagnostic"]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass
class ExperimentConfig:
    kind: str
    master_seed: int = 0
    calibration: str = "room"
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    output_dir: Optional[str] = None
    description: str = ""

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ExperimentConfig":
        return cls(
            kind=doc.get("kind", ""),
            master_seed=doc.get("master_seed", 0),
            calibration=doc.get("calibration", "room"),
            sections={k: dict(v) for k, v in doc.items() if isinstance(v, dict)},
            output_dir=doc.get("output_dir"),
            description=doc.get("description", ""),
        )

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "kind": self.kind,
            "master_seed": self.master_seed,
            "calibration": self.calibration,
        }
        if self.output_dir is not None:
            doc["output_dir"] = self.output_dir
        if self.description:
            doc["description"] = self.description
        doc.update({k: dict(v) for k, v in self.sections.items()})
        return doc

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections.get(name, {})

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; key order in the document is irrelevant."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def preset_names() -> List[str]:
    files = resources.files("memdc") / "presets"
    return sorted(p.name[: -len(".toml")] for p in files.iterdir() if p.name.endswith(".toml"))


def load_document(source: str) -> Dict[str, Any]:
    """Parse a TOML file, or a bundled preset when ``source`` names one."""
    path = Path(source)
    if path.is_file():
        return tomllib.loads(path.read_text())
    preset = resources.files("memdc") / "presets" / f"{source}.toml"
    if preset.is_file():
        return tomllib.loads(preset.read_text())
    raise FileNotFoundError(
        f"no config file or preset named {source!r}; presets: {', '.join(preset_names())}"
    )


def load_config(source: str) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_document(source))


# -- building model objects -------------------------------------------------


def build_calibration(cfg: ExperimentConfig) -> Calibration:
    cal = CALIBRATIONS[cfg.calibration]
    device_over = dict(cfg.section("device"))
    tech = device_over.pop("tech", None)
    if tech is not None:
        t = ENVM_TECHS[tech]
        device_over.setdefault("r_low", t.r_min)
        device_over.setdefault("r_high", t.r_max)
    device = dataclasses.replace(cal.device, **device_over)
    amplifier = dataclasses.replace(cal.amplifier, **cfg.section("amplifier"))
    return dataclasses.replace(cal, device=device, amplifier=amplifier, **cfg.section("bank"))


def build_tune(cfg: ExperimentConfig) -> TuneParams:
    return TuneParams(**cfg.section("tune"))


def build_sweep(cfg: ExperimentConfig) -> Tuple[SweepSpec, int]:
    s = dict(cfg.section("sweep"))
    workers = int(s.pop("workers", 1))
    spec = SweepSpec(
        calibration=build_calibration(cfg),
        params=build_tune(cfg),
        master_seed=cfg.master_seed,
        **s,
    )
    return spec, workers


def build_scaling_amp(cfg: ExperimentConfig) -> AmplifierScalingModel:
    s = cfg.section("scale")
    anchors = {k: s[k] for k in ("p_ref", "p_floor", "i_b_ref", "i_b_floor") if k in s}
    extra = {k: s[k] for k in ("r_min_ref", "v_dd", "v_ss") if k in s}
    if anchors:
        return AmplifierScalingModel.from_anchors(**anchors, **extra)
    return AmplifierScalingModel(**extra)


def stability_settings(cfg: ExperimentConfig) -> Dict[str, Any]:
    s = {"v_target": 0.5, "duration": 300.0, "dt": 0.1, "bins": 30}
    s.update(cfg.section("stability"))
    return s


def characterize_settings(cfg: ExperimentConfig) -> Dict[str, Any]:
    s = {
        "temperatures": [1.2, 35.0, 300.0],
        "v_in_stop": 1.5,
        "v_in_step": 0.05,
        "r_fb": 2e3,
        "r_in": 1e3,
    }
    s.update(cfg.section("characterize"))
    return s


# -- validation -------------------------------------------------------------


def _positive(diags: List[Diagnostic], section: Dict[str, Any], name: str, path: str) -> None:
    if name in section:
        value = section[name]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            diags.append(Diagnostic(f"{path}.{name}", f"must be a positive number, got {value!r}"))


def _reachability(diags: List[Diagnostic], cal: Calibration, targets, path: str) -> None:
    for v in targets:
        try:
            r = target_resistance(float(v), cal.v_in, cal.n, cal.r_in)
        except ValueError as exc:
            diags.append(Diagnostic(path, f"target {v!r} V: {exc}"))
            continue
        if not cal.device.r_low <= r <= cal.device.r_high:
            diags.append(
                Diagnostic(
                    path,
                    f"target {v!r} V needs {r:.6g} ohm per device, outside "
                    f"[{cal.device.r_low:.6g}, {cal.device.r_high:.6g}] ohm",
                )
            )
        lo, hi = cal.amplifier.output_range
        if not lo <= float(v) + cal.amplifier.offset <= hi:
            diags.append(
                Diagnostic(path, f"target {v!r} V outside the amplifier swing [{lo:g}, {hi:g}] V")
            )


def validate(cfg) -> List[Diagnostic]:
    """Every problem with a config, without running anything."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    diags: List[Diagnostic] = []

    if cfg.kind not in KINDS:
        diags.append(Diagnostic("kind", f"must be one of {', '.join(KINDS)}, got {cfg.kind!r}"))
    seed = cfg.master_seed
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        diags.append(Diagnostic("master_seed", f"must be an integer in [0, 2**64), got {seed!r}"))
    if cfg.calibration not in CALIBRATIONS:
        diags.append(
            Diagnostic(
                "calibration",
                f"unknown calibration {cfg.calibration!r}; known: {', '.join(sorted(CALIBRATIONS))}",
            )
        )
    for name, section in cfg.sections.items():
        if name not in SECTION_KEYS:
            diags.append(Diagnostic(name, "unknown section"))
            continue
        for key in sorted(set(section) - SECTION_KEYS[name]):
            diags.append(Diagnostic(f"{name}.{key}", "unknown field"))
    if diags:
        return diags

    bank = cfg.section("bank")
    for key in ("n", "r_in"):
        _positive(diags, bank, key, "bank")
    for key in ("r_low", "r_high", "write_gain", "write_threshold", "max_write_voltage"):
        _positive(diags, cfg.section("device"), key, "device")
    tech = cfg.section("device").get("tech")
    if tech is not None and tech not in ENVM_TECHS:
        diags.append(Diagnostic("device.tech", f"unknown technology {tech!r}"))
    for key in ("resolution", "replications"):
        _positive(diags, cfg.section("sweep"), key, "sweep")
    for key in ("duration", "dt", "bins"):
        _positive(diags, cfg.section("stability"), key, "stability")
    for key in ("cooling_power", "gates_per_dot", "power_per_source"):
        _positive(diags, cfg.section("scale"), key, "scale")
    if diags:
        return diags

    cal = None
    for name, build in (
        ("device", lambda: build_calibration(cfg)),
        ("tune", lambda: build_tune(cfg)),
    ):
        try:
            obj = build()
        except (TypeError, ValueError, KeyError) as exc:
            diags.append(Diagnostic(name, str(exc)))
        else:
            if name == "device":
                cal = obj
    if cal is None or diags:
        return diags

    if cfg.kind == "sweep":
        try:
            spec, _ = build_sweep(cfg)
        except (TypeError, ValueError) as exc:
            diags.append(Diagnostic("sweep", str(exc)))
        else:
            _reachability(diags, cal, spec.targets, "sweep")
    elif cfg.kind == "stability":
        s = stability_settings(cfg)
        if s["duration"] < 10 * s["dt"]:
            diags.append(Diagnostic("stability.duration", "must span at least ten samples"))
        _reachability(diags, cal, [s["v_target"]], "stability.v_target")
    elif cfg.kind == "program":
        targets = cfg.section("program").get("v_targets", [])
        if not targets:
            diags.append(Diagnostic("program.v_targets", "needs at least one target"))
        _reachability(diags, cal, targets, "program.v_targets")
    elif cfg.kind == "scale":
        s = cfg.section("scale")
        for t in s.get("techs", []):
            if t not in ENVM_TECHS:
                diags.append(Diagnostic("scale.techs", f"unknown technology {t!r}"))
        for key in ("r_min_grid", "i_b_grid"):
            grid = s.get(key, [])
            if any(not r > 0 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
                diags.append(Diagnostic(f"scale.{key}", "must be positive and strictly ascending"))
        if not any(s.get(k) for k in ("techs", "r_min_grid", "i_b_grid")):
            diags.append(Diagnostic("scale", "needs at least one of techs, r_min_grid, i_b_grid"))
        try:
            build_scaling_amp(cfg)
        except (TypeError, ValueError) as exc:
            diags.append(Diagnostic("scale", str(exc)))
    elif cfg.kind == "characterize":
        s = characterize_settings(cfg)
        if any(not t > 0 for t in s["temperatures"]):
            diags.append(Diagnostic("characterize.temperatures", "must be positive"))
        for key in ("v_in_stop", "v_in_step", "r_fb", "r_in"):
            _positive(diags, s, key, "characterize")
    return diags

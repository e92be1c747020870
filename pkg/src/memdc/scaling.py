"""Power and density scaling of integrated eNVM-based DC sources.

A behavioral power law stands in for the two-stage Miller op-amp: the bias
current falls inversely with the minimum feedback resistance down to a floor,
and per-source power is affine in the bias current. The defaults put 96 uW on
a 1 uA bias and 4.8 uW on the 20 nA floor (a factor of 20 apart).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

# Footprint grows ~4x once the output device is widened for R_min >= 50 kOhm.
WIDE_OUTPUT_R_MIN = 50e3
WIDE_OUTPUT_FOOTPRINT = 4.0


@dataclass(frozen=True)
class EnvmTech:
    name: str
    r_min: float
    r_max: float
    cryo_validated: bool = False

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError(f"{self.name}: need 0 < r_min < r_max")


# Anchor powers: sub-100 uW at the 1 uA reference bias, 20x less on the 20 nA floor.
P_REF, I_B_REF = 96e-6, 1e-6
P_FLOOR, I_B_FLOOR = P_REF / 20, 20e-9
DEFAULT_RAILS = 6.0
_SLOPE = (P_REF - P_FLOOR) / (I_B_REF - I_B_FLOOR)

ENVM_TECHS: Dict[str, EnvmTech] = {
    "VCM": EnvmTech("VCM", 10e3, 100e3, cryo_validated=True),
    "FTJ": EnvmTech("FTJ", 1e6, 100e6, cryo_validated=True),
}


@dataclass(frozen=True)
class AmplifierScalingModel:
    """Supply current = ``stage_current_multiplier * I_B`` on ``v_dd - v_ss`` rails."""

    stage_current_multiplier: float = _SLOPE / DEFAULT_RAILS
    i_b_floor: float = I_B_FLOOR
    i_b_ref: float = I_B_REF
    r_min_ref: float = 10e3
    v_dd: float = DEFAULT_RAILS / 2
    v_ss: float = -DEFAULT_RAILS / 2
    static_power: float = P_REF - _SLOPE * I_B_REF

    def __post_init__(self):
        if not self.stage_current_multiplier > 0:
            raise ValueError("stage_current_multiplier must be positive")
        if not self.i_b_floor > 0:
            raise ValueError("i_b_floor must be positive")
        if not self.v_dd > self.v_ss:
            raise ValueError("v_dd must exceed v_ss")
        if self.static_power < 0:
            raise ValueError("static_power must be non-negative")

    @property
    def rails(self) -> float:
        return self.v_dd - self.v_ss

    @classmethod
    def from_anchors(
        cls,
        p_ref: float = P_REF,
        p_floor: float = P_FLOOR,
        i_b_ref: float = I_B_REF,
        i_b_floor: float = I_B_FLOOR,
        **kwargs,
    ) -> "AmplifierScalingModel":
        """Solve multiplier and static power so P(i_b_ref)=p_ref and P(i_b_floor)=p_floor."""
        v_dd = kwargs.get("v_dd", cls.v_dd)
        v_ss = kwargs.get("v_ss", cls.v_ss)
        slope = (p_ref - p_floor) / (i_b_ref - i_b_floor)
        static = p_ref - slope * i_b_ref
        if static < 0:
            raise ValueError("anchors imply negative static power")
        return cls(
            stage_current_multiplier=slope / (v_dd - v_ss),
            i_b_floor=i_b_floor,
            i_b_ref=i_b_ref,
            static_power=static,
            **kwargs,
        )


@dataclass(frozen=True)
class ScalingScenario:
    tech: EnvmTech
    amp: AmplifierScalingModel = AmplifierScalingModel()
    cooling_power: float = 1.5
    gates_per_dot: int = 2
    power_per_source_override: Optional[float] = None

    def __post_init__(self):
        if not self.cooling_power > 0:
            raise ValueError("cooling_power must be positive")
        if self.gates_per_dot < 1:
            raise ValueError("gates_per_dot must be at least 1")


@dataclass(frozen=True)
class SourceCount:
    sources: int
    quantum_dots: int
    power_per_source: float


def bias_current_for(amp: AmplifierScalingModel, r_min: float) -> float:
    if not r_min > 0:
        raise ValueError("r_min must be positive")
    return max(amp.i_b_floor, amp.i_b_ref * amp.r_min_ref / r_min)


def power_per_source(amp: AmplifierScalingModel, i_b: float) -> float:
    if i_b < amp.i_b_floor * (1 - 1e-12):
        raise ValueError(f"bias current {i_b!r} A below the floor {amp.i_b_floor!r} A")
    return amp.static_power + amp.stage_current_multiplier * i_b * amp.rails


def max_sources(scenario: ScalingScenario) -> SourceCount:
    """Sources that fit in the cooling budget, and the dots they can bias."""
    if scenario.power_per_source_override is not None:
        p = scenario.power_per_source_override
    else:
        p = power_per_source(scenario.amp, bias_current_for(scenario.amp, scenario.tech.r_min))
    return _count(scenario.cooling_power, p, scenario.gates_per_dot)


def _count(cooling_power: float, p: float, gates_per_dot: int) -> SourceCount:
    if not p > 0:
        raise ValueError("power per source must be positive")
    # guard against 1.5/1e-6 landing a hair under an integer
    n = math.floor(cooling_power / p * (1 + 1e-12))
    return SourceCount(n, n // gates_per_dot, p)


def resolution_for(n_memristors: int, base_resolution: float = 10e-3, base_n: int = 2) -> float:
    """Voltage step halves with every added feedback device."""
    if n_memristors < 1:
        raise ValueError("need at least one memristor")
    return base_resolution * 2.0 ** (base_n - n_memristors)


def footprint_multiplier(r_min: float) -> float:
    return WIDE_OUTPUT_FOOTPRINT if r_min >= WIDE_OUTPUT_R_MIN else 1.0


@dataclass(frozen=True)
class ScanRow:
    r_min: float
    i_b: float
    power: float
    n_max: int
    quantum_dots: int
    footprint: float


def scan_rmin(template: ScalingScenario, r_min_grid: Iterable[float]) -> List[ScanRow]:
    grid = [float(r) for r in r_min_grid]
    if not grid:
        raise ValueError("empty r_min grid")
    if any(r <= 0 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("r_min grid must be positive and strictly ascending")
    rows = []
    for r in grid:
        i_b = bias_current_for(template.amp, r)
        count = _count(template.cooling_power, power_per_source(template.amp, i_b),
                       template.gates_per_dot)
        rows.append(ScanRow(r, i_b, count.power_per_source, count.sources,
                            count.quantum_dots, footprint_multiplier(r)))
    return rows


def circuit_settings(scenario: ScalingScenario, v_in: float = 0.1) -> dict:
    """Bank settings for a circuit built on this technology (R_in = R_min / 4)."""
    return {
        "r_in": scenario.tech.r_min / 4.0,
        "v_in": v_in,
        "r_low": scenario.tech.r_min,
        "r_high": scenario.tech.r_max,
        "v_dd": scenario.amp.v_dd,
        "v_ss": scenario.amp.v_ss,
    }


@dataclass(frozen=True)
class TechRow:
    tech: str
    r_min: float
    r_max: float
    i_b: float
    power: float
    n_max: int
    quantum_dots: int
    footprint: float


def tech_rows(template: ScalingScenario, techs: Iterable[str]) -> List[TechRow]:
    """Capacity at each technology's minimum resistance."""
    rows = []
    for name in techs:
        tech = ENVM_TECHS[name]
        scenario = ScalingScenario(tech, template.amp, template.cooling_power,
                                   template.gates_per_dot, template.power_per_source_override)
        count = max_sources(scenario)
        rows.append(TechRow(name, tech.r_min, tech.r_max, bias_current_for(template.amp, tech.r_min),
                            count.power_per_source, count.sources, count.quantum_dots,
                            footprint_multiplier(tech.r_min)))
    return rows


@dataclass(frozen=True)
class PowerRow:
    i_b: float
    power: float
    n_max: int
    quantum_dots: int


def power_curve(template: ScalingScenario, i_b_grid: Iterable[float]) -> List[PowerRow]:
    rows = []
    for i_b in i_b_grid:
        count = _count(template.cooling_power, power_per_source(template.amp, float(i_b)),
                       template.gates_per_dot)
        rows.append(PowerRow(float(i_b), count.power_per_source, count.sources, count.quantum_dots))
    return rows

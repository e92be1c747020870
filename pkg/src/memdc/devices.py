"""Behavioral models of a single memristor and of the op-amp DC characteristics.

Device states are values: every operation returns a new state and leaves the
input untouched. The random stream (a ``numpy.random.Generator``) is carried by
reference, so two states built from the same seed replay identical draws.
Use ``copy.deepcopy`` on a state to fork its stream.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

MAX_WRITE_VOLTAGE = 3.0
PLATEAU_TEMPERATURE = 4.2


@dataclass(frozen=True)
class PulseSpec:
    """A rectangular write pulse. The sign of ``amplitude`` is the polarity."""

    amplitude: float
    width: float

    def validate(self, max_amplitude: float = MAX_WRITE_VOLTAGE) -> None:
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width!r} s")
        if not abs(self.amplitude) <= max_amplitude:
            raise ValueError(
                f"pulse amplitude {self.amplitude!r} V exceeds the maximum "
                f"write voltage of {max_amplitude} V"
            )


@dataclass(frozen=True)
class MemristorState:
    """True conductance of one device plus its stochastic-model parameters.

    ``read_noise_alpha`` is the relative std of one short programming read.
    ``output_noise_alpha`` is the relative resistance fluctuation seen by the
    feedback loop at the output sampling rate; it falls back to
    ``read_noise_alpha`` when left as ``None``. ``slow_noise_alpha`` is the
    low-frequency part of that fluctuation: it is frozen into ``fluctuation``
    for the duration of a programming burst, shifts every read alike, and so
    escapes verification. ``read_noise_floor`` is an
    additive read-noise std in ohms. ``iv_nonlinearity`` (1/V^2) makes the
    apparent conductance at voltage v equal to G*(1 + beta*v^2).
    """

    conductance: float
    g_min: float
    g_max: float
    write_gain: float
    write_threshold: float = 0.8
    c2c_sigma: float = 0.0
    read_noise_alpha: float = 0.0
    drift_rate: float = 0.0
    rng: np.random.Generator = field(
        default_factory=lambda: np.random.default_rng(0), compare=False, repr=False
    )
    output_noise_alpha: Optional[float] = None
    read_noise_floor: float = 0.0
    iv_nonlinearity: float = 0.0
    max_write_voltage: float = MAX_WRITE_VOLTAGE
    slow_noise_alpha: float = 0.0
    fluctuation: float = 0.0

    def __post_init__(self):
        if not self.g_min > 0:
            raise ValueError(f"g_min must be positive, got {self.g_min!r}")
        if not self.g_max > self.g_min:
            raise ValueError(f"g_max ({self.g_max!r}) must exceed g_min ({self.g_min!r})")
        if not self.g_min <= self.conductance <= self.g_max:
            raise ValueError(
                f"conductance {self.conductance!r} S outside [{self.g_min!r}, {self.g_max!r}]"
            )
        for name in (
            "c2c_sigma",
            "read_noise_alpha",
            "read_noise_floor",
            "write_gain",
            "slow_noise_alpha",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.output_noise_alpha is not None and self.output_noise_alpha < 0:
            raise ValueError("output_noise_alpha must be non-negative")
        if self.slow_noise_alpha > self.fluctuation_alpha:
            raise ValueError("slow_noise_alpha cannot exceed the total output fluctuation")

    @property
    def resistance(self) -> float:
        return 1.0 / self.conductance

    @property
    def fluctuation_alpha(self) -> float:
        if self.output_noise_alpha is None:
            return self.read_noise_alpha
        return self.output_noise_alpha

    def apparent_conductance(self, voltage: float) -> float:
        return self.conductance * (1.0 + self.iv_nonlinearity * voltage * voltage)

    def can_reach(self, resistance: float) -> bool:
        return resistance > 0 and self.g_min <= 1.0 / resistance <= self.g_max


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def apply_write_pulse(state: MemristorState, pulse: PulseSpec) -> MemristorState:
    """Apply one write pulse; positive amplitude raises the conductance.

    The update is linear in the overdrive above ``write_threshold`` and scaled
    by a Gaussian cycle-to-cycle factor ``1 + xi``. A normal draw is consumed
    only when ``c2c_sigma > 0``.
    """
    pulse.validate(state.max_write_voltage)
    overdrive = max(0.0, abs(pulse.amplitude) - state.write_threshold)
    if overdrive == 0.0 or pulse.amplitude == 0.0:
        return state
    xi = state.rng.normal(0.0, state.c2c_sigma) if state.c2c_sigma > 0 else 0.0
    delta = math.copysign(state.write_gain * overdrive * (1.0 + xi), pulse.amplitude)
    g = _clamp(state.conductance + delta, state.g_min, state.g_max)
    return dataclasses.replace(state, conductance=g)


def read_resistance(state: MemristorState, v_read: float, width: float) -> float:
    """Noisy resistance measurement at ``v_read``; the device is not disturbed."""
    if v_read == 0:
        raise ValueError("read voltage must be non-zero")
    if not width > 0:
        raise ValueError(f"read width must be positive, got {width!r} s")
    r = (1.0 + state.fluctuation) / state.apparent_conductance(v_read)
    if state.read_noise_alpha > 0:
        r *= 1.0 + state.rng.normal(0.0, state.read_noise_alpha)
    if state.read_noise_floor > 0:
        r += state.rng.normal(0.0, state.read_noise_floor)
    return r


def refresh_fluctuation(state: MemristorState) -> MemristorState:
    """Draw a new frozen low-frequency deviation; no draw when ``slow_noise_alpha`` is 0."""
    if state.slow_noise_alpha == 0:
        return state
    return dataclasses.replace(state, fluctuation=state.rng.normal(0.0, state.slow_noise_alpha))


def drift_step(state: MemristorState, dt: float) -> MemristorState:
    """Relax the conductance over ``dt`` seconds; positive rate raises resistance."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt!r}")
    if dt == 0 or state.drift_rate == 0:
        return state
    g = _clamp(state.conductance * (1.0 - state.drift_rate * dt), state.g_min, state.g_max)
    return dataclasses.replace(state, conductance=g)


class RegimeLabel(str, enum.Enum):
    ROOM = "room"
    CRYO = "cryo"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TemperatureRegime:
    temperature: float
    label: RegimeLabel = RegimeLabel.CUSTOM

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r} K")
        object.__setattr__(self, "label", RegimeLabel(self.label))

    @classmethod
    def room(cls) -> "TemperatureRegime":
        return cls(300.0, RegimeLabel.ROOM)

    @classmethod
    def cryo(cls) -> "TemperatureRegime":
        return cls(1.2, RegimeLabel.CRYO)


# Closed-loop gain 1.68 measured on a nominal gain-2 TIA below 4.2 K.
CRYO_GAIN_FACTOR = 1.68 / 2.0
# Gain factor recovered at 1.2 K by raising the supply from +/-2.7 V to +/-3.0 V.
BOOSTED_GAIN_FACTOR = 0.939


def _default_gain_table() -> dict:
    return {PLATEAU_TEMPERATURE: CRYO_GAIN_FACTOR, 300.0: 1.0}


def _default_idle_table() -> dict:
    return {PLATEAU_TEMPERATURE: 1.4e-3, 77.0: 350e-6, 300.0: 1.0e-3}


def _default_boost_table() -> dict:
    return {2.7: 1.0, 3.0: BOOSTED_GAIN_FACTOR / CRYO_GAIN_FACTOR}


@dataclass(frozen=True)
class AmplifierModel:
    """DC behavior of the TIA op-amp versus temperature and supply.

    Table keys are kelvin (gain, idle current) or supply half-span in volts
    (boost). ``gain_factor_table`` holds eta(T), the realized fraction of the
    nominal closed-loop gain.
    """

    nominal_closed_loop_gain: float = 2.0
    gain_factor_table: Mapping[float, float] = field(default_factory=_default_gain_table)
    offset: float = 8e-3
    idle_current_table: Mapping[float, float] = field(default_factory=_default_idle_table)
    v_dd: float = 2.7
    v_ss: float = -2.7
    output_headroom: float = 0.2
    supply_boost_table: Mapping[float, float] = field(default_factory=_default_boost_table)

    def __post_init__(self):
        if not self.v_dd > self.v_ss:
            raise ValueError(f"v_dd ({self.v_dd}) must exceed v_ss ({self.v_ss})")
        if self.output_headroom < 0 or 2 * self.output_headroom >= self.v_dd - self.v_ss:
            raise ValueError(f"output headroom {self.output_headroom} V leaves no swing")
        for t, eta in self.gain_factor_table.items():
            if not (t > 0 and 0 < eta <= 1.05):
                raise ValueError(f"gain factor {eta!r} at {t!r} K outside (0, 1.05]")
        for t, i in self.idle_current_table.items():
            if not (t > 0 and i > 0):
                raise ValueError(f"idle current {i!r} A at {t!r} K must be positive")
        if not self.gain_factor_table or not self.idle_current_table:
            raise ValueError("gain and idle-current tables need at least one anchor")

    @property
    def rails(self) -> float:
        return self.v_dd - self.v_ss

    @property
    def output_range(self) -> tuple:
        return self.v_ss + self.output_headroom, self.v_dd - self.output_headroom


def _log_interp(table: Mapping[float, float], temperature: float) -> float:
    ts = sorted(table)
    return float(np.interp(math.log(temperature), np.log(ts), [table[t] for t in ts]))


def amplifier_gain_factor(model: AmplifierModel, temperature: float) -> float:
    """eta(T): log-linear through the anchors above 4.2 K, flat below."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature!r} K")
    return _log_interp(model.gain_factor_table, max(temperature, PLATEAU_TEMPERATURE))


def amplifier_idle_current(model: AmplifierModel, temperature: float) -> float:
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature!r} K")
    return _log_interp(model.idle_current_table, max(temperature, PLATEAU_TEMPERATURE))


def supply_boost(model: AmplifierModel) -> float:
    """kappa(V): gain compensation from the supply, linear between known points."""
    half_span = 0.5 * model.rails
    vs = sorted(model.supply_boost_table)
    return float(np.interp(half_span, vs, [model.supply_boost_table[v] for v in vs]))


def effective_gain_factor(model: AmplifierModel, temperature: float) -> float:
    return amplifier_gain_factor(model, temperature) * supply_boost(model)

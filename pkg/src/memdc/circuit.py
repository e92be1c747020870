"""One programmable DC source: N parallel memristors in the feedback of a TIA."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .devices import (
    AmplifierModel,
    MemristorState,
    TemperatureRegime,
    amplifier_idle_current,
    drift_step,
    effective_gain_factor,
)


class SwitchStateError(RuntimeError):
    """Raised when an operation needs a switch configuration the bank is not in."""


class SwitchMode(str, enum.Enum):
    FEEDBACK = "feedback"
    PROGRAM = "program"


class TopElectrode(str, enum.Enum):
    LOOP = "loop"
    APMU = "apmu"


@dataclass(frozen=True)
class SwitchMatrixState:
    mode: SwitchMode = SwitchMode.FEEDBACK
    device_index: Optional[int] = None
    top_electrode: TopElectrode = TopElectrode.LOOP

    def __post_init__(self):
        object.__setattr__(self, "mode", SwitchMode(self.mode))
        object.__setattr__(self, "top_electrode", TopElectrode(self.top_electrode))
        if self.mode is SwitchMode.FEEDBACK:
            if self.top_electrode is not TopElectrode.LOOP or self.device_index is not None:
                raise ValueError("feedback mode connects the top electrode to the loop only")
        elif self.device_index is None:
            raise ValueError("program mode needs a device index")

    @classmethod
    def feedback(cls) -> "SwitchMatrixState":
        return cls()

    @classmethod
    def program(cls, index: int) -> "SwitchMatrixState":
        return cls(SwitchMode.PROGRAM, index, TopElectrode.APMU)


@dataclass(frozen=True)
class SourceBank:
    memristors: Tuple[MemristorState, ...]
    r_in: float
    amplifier: AmplifierModel
    v_in: float
    regime: TemperatureRegime
    switch_state: SwitchMatrixState = field(default_factory=SwitchMatrixState.feedback)

    def __post_init__(self):
        object.__setattr__(self, "memristors", tuple(self.memristors))
        if not self.memristors:
            raise ValueError("a source bank needs at least one memristor")
        if not self.r_in > 0:
            raise ValueError(f"r_in must be positive, got {self.r_in!r}")
        if not self.amplifier.v_ss < self.v_in < self.amplifier.v_dd:
            raise ValueError(f"v_in {self.v_in!r} V outside the amplifier supply range")
        _check_switch(self.switch_state, len(self.memristors))

    @property
    def n(self) -> int:
        return len(self.memristors)

    def with_device(self, index: int, state: MemristorState) -> "SourceBank":
        devices = list(self.memristors)
        devices[index] = state
        return dataclasses.replace(self, memristors=tuple(devices))


@dataclass(frozen=True)
class OutputSample:
    v_out: float
    supply_current: float
    timestamp: float = 0.0


@dataclass(frozen=True)
class PowerBreakdown:
    amplifier: float
    feedback: float

    @property
    def total(self) -> float:
        return self.amplifier + self.feedback


def _check_switch(state: SwitchMatrixState, n: int) -> None:
    if state.mode is SwitchMode.PROGRAM and not 0 <= state.device_index < n:
        raise IndexError(f"program({state.device_index}) out of range for {n} devices")


def _require_feedback(bank: SourceBank) -> None:
    if bank.switch_state.mode is not SwitchMode.FEEDBACK:
        raise SwitchStateError(
            f"feedback loop is open (switch in program({bank.switch_state.device_index}))"
        )


def set_switch_state(bank: SourceBank, new: SwitchMatrixState) -> SourceBank:
    _check_switch(new, bank.n)
    return dataclasses.replace(bank, switch_state=new)


def feedback_resistance(bank: SourceBank) -> float:
    """Parallel resistance of all feedback devices, 1 / sum(G_i)."""
    _require_feedback(bank)
    return 1.0 / sum(m.conductance for m in bank.memristors)


def _ideal_output(bank: SourceBank, conductances: Sequence[float], eta: float) -> float:
    # Apparent conductance depends on the voltage across the devices, which
    # depends on the output: iterate to the fixed point when nonlinear.
    g = float(sum(conductances))
    v = eta * bank.v_in / (bank.r_in * g)
    betas = [m.iv_nonlinearity for m in bank.memristors]
    if any(betas):
        for _ in range(100):
            dv = abs(v - bank.v_in)
            g_eff = sum(gi * (1.0 + b * dv * dv) for gi, b in zip(conductances, betas))
            v_next = eta * bank.v_in / (bank.r_in * g_eff)
            if abs(v_next - v) <= 1e-15 * abs(v):
                v = v_next
                break
            v = v_next
    return v


def _sample(bank: SourceBank, conductances: Sequence[float], timestamp: float) -> OutputSample:
    amp = bank.amplifier
    eta = effective_gain_factor(amp, bank.regime.temperature)
    ideal = _ideal_output(bank, conductances, eta)
    lo, hi = amp.output_range
    v_out = min(max(ideal + amp.offset, lo), hi)
    load = abs(v_out - bank.v_in) * float(sum(conductances))
    current = amplifier_idle_current(amp, bank.regime.temperature) + load
    return OutputSample(v_out, current, timestamp)


def output_voltage(bank: SourceBank) -> OutputSample:
    """Noiseless DC output of the source, clamped to the usable swing."""
    _require_feedback(bank)
    return _sample(bank, [m.conductance for m in bank.memristors], 0.0)


def _fluctuated(bank: SourceBank) -> List[float]:
    gs = []
    for m in bank.memristors:
        alpha = m.fluctuation_alpha
        r = m.resistance
        if alpha > 0:
            r *= 1.0 + m.rng.normal(0.0, alpha)
        gs.append(1.0 / r)
    return gs


def advance(bank: SourceBank, dt: float) -> SourceBank:
    return dataclasses.replace(
        bank, memristors=tuple(drift_step(m, dt) for m in bank.memristors)
    )


def measure_output_trace(
    bank: SourceBank, duration: float, dt: float
) -> Tuple[List[OutputSample], SourceBank]:
    """Sample the output every ``dt`` from 0 to ``duration``; also return the drifted bank."""
    if not dt > 0 or duration < dt:
        raise ValueError(f"need duration >= dt > 0, got duration={duration!r}, dt={dt!r}")
    _require_feedback(bank)
    n_steps = int(np.floor(duration / dt + 1e-9))
    samples = []
    for k in range(n_steps + 1):
        if k:
            bank = advance(bank, dt)
        samples.append(_sample(bank, _fluctuated(bank), k * dt))
    return samples, bank


def measure_output(bank: SourceBank, duration: float, dt: float) -> List[OutputSample]:
    return measure_output_trace(bank, duration, dt)[0]


def power_draw(bank: SourceBank) -> PowerBreakdown:
    """Amplifier supply power and resistive-feedback dissipation, kept separate."""
    sample = output_voltage(bank)
    r_mem = feedback_resistance(bank)
    amplifier = bank.amplifier.rails * sample.supply_current
    feedback = (sample.v_out - bank.v_in) ** 2 / r_mem
    return PowerBreakdown(amplifier, feedback)


def tia_transfer(
    amplifier: AmplifierModel, temperature: float, r_fb: float, r_in: float, v_in: float
) -> float:
    """Output of the TIA with a fixed feedback resistor, as in the bare op-amp test."""
    eta = effective_gain_factor(amplifier, temperature)
    lo, hi = amplifier.output_range
    return min(max(eta * (r_fb / r_in) * v_in + amplifier.offset, lo), hi)

"""Read-write-verify programming of the feedback memristors.

The companion devices are tuned one after another to a common target; the
last device absorbs their accumulated error and is tuned at a tighter
tolerance. Every path, including failures, leaves the bank in feedback mode.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .circuit import SourceBank, SwitchMatrixState, set_switch_state
from .devices import (
    MemristorState,
    PulseSpec,
    apply_write_pulse,
    read_resistance,
    refresh_fluctuation,
)


class UnreachableTargetError(ValueError):
    """A resistance target lies outside what the devices can hold."""


class ProgrammingError(RuntimeError):
    """Programming aborted; ``bank`` is the bank restored to feedback mode."""

    def __init__(self, stage: str, message: str, bank: SourceBank, report: "ProgramReport"):
        super().__init__(f"programming failed at {stage}: {message}")
        self.stage = stage
        self.bank = bank
        self.report = report


@dataclass(frozen=True)
class TuneParams:
    write_width: float = 200e-9
    amplitude_step: float = 10e-3
    start_amplitude: float = 0.81
    max_amplitude: float = 2.5
    read_width_per_volt: float = 10e-6
    tolerance: float = 0.01
    balance_tolerance: float = 0.005
    stability_reads: int = 10
    max_iterations: int = 1000

    def __post_init__(self):
        for name in ("tolerance", "balance_tolerance"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
        if not self.amplitude_step > 0:
            raise ValueError("amplitude_step must be positive")
        if not self.max_iterations > 0:
            raise ValueError("max_iterations must be positive")
        if self.stability_reads < 0:
            raise ValueError("stability_reads must be non-negative")
        if not 0 < self.start_amplitude <= self.max_amplitude:
            raise ValueError("need 0 < start_amplitude <= max_amplitude")
        if not self.write_width > 0 or not self.read_width_per_volt > 0:
            raise ValueError("pulse widths must be positive")


@dataclass(frozen=True)
class DeviceReport:
    index: int
    target_resistance: float
    tolerance: float
    pulses_applied: int
    reads: int
    iterations: int
    final_resistance: float
    true_resistance: float
    relative_error: float
    converged: bool
    pulse_time: float

    def to_record(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "DeviceReport":
        return cls(**record)


@dataclass(frozen=True)
class ProgramReport:
    v_target: float
    r_target: float
    r_balance: Optional[float] = None
    devices: Tuple[DeviceReport, ...] = ()
    failed_stage: Optional[str] = None

    @property
    def iterations(self) -> int:
        return sum(d.iterations for d in self.devices)

    @property
    def pulse_time(self) -> float:
        return sum(d.pulse_time for d in self.devices)

    @property
    def converged(self) -> bool:
        return self.failed_stage is None and all(d.converged for d in self.devices)

    def to_record(self) -> dict:
        return {
            "v_target": self.v_target,
            "r_target": self.r_target,
            "r_balance": self.r_balance,
            "failed_stage": self.failed_stage,
            "converged": self.converged,
            "iterations": self.iterations,
            "pulse_time": self.pulse_time,
            "devices": [d.to_record() for d in self.devices],
        }

    @classmethod
    def from_record(cls, record: dict) -> "ProgramReport":
        return cls(
            v_target=record["v_target"],
            r_target=record["r_target"],
            r_balance=record["r_balance"],
            devices=tuple(DeviceReport.from_record(d) for d in record["devices"]),
            failed_stage=record["failed_stage"],
        )


def target_resistance(v_trg: float, v_in: float, n: int, r_in: float) -> float:
    """Common per-device target n * r_in * v_trg / v_in."""
    if v_in == 0:
        raise ValueError("v_in must be non-zero")
    if n < 1:
        raise ValueError(f"need at least one device, got n={n}")
    if not r_in > 0:
        raise ValueError("r_in must be positive")
    if not v_trg / v_in > 0:
        raise UnreachableTargetError(
            f"v_trg={v_trg!r} V and v_in={v_in!r} V differ in sign; "
            "unreachable with resistive feedback"
        )
    return n * r_in * v_trg / v_in


def balance_resistance(r_trg: float, programmed_conductances: Sequence[float], n: int) -> float:
    """Resistance the last device needs so the bank totals n / r_trg."""
    if len(programmed_conductances) != n - 1:
        raise ValueError(
            f"expected {n - 1} companion conductances, got {len(programmed_conductances)}"
        )
    residual = n / r_trg - float(sum(programmed_conductances))
    if not residual > 0:
        raise UnreachableTargetError(
            "companions are over-programmed: their conductance "
            f"{sum(programmed_conductances):.6g} S already meets or exceeds {n / r_trg:.6g} S"
        )
    return 1.0 / residual


def tune_resistance(
    device: MemristorState,
    r_target: float,
    params: TuneParams,
    v_read: float,
    tolerance: Optional[float] = None,
    index: int = 0,
) -> Tuple[MemristorState, DeviceReport]:
    """Drive one device to ``r_target`` by alternating reads and write pulses.

    Positive pulses lower the resistance. Consecutive pulses of the same
    polarity ramp up by ``amplitude_step``; a polarity change restarts the ramp
    at ``start_amplitude``. A read within tolerance is confirmed by
    ``stability_reads`` further reads, all of which must stay in tolerance;
    otherwise tuning resumes from the offending read.
    """
    tol = params.tolerance if tolerance is None else tolerance
    if not device.can_reach(r_target):
        raise UnreachableTargetError(
            f"target {r_target:.6g} ohm outside device range "
            f"[{1 / device.g_max:.6g}, {1 / device.g_min:.6g}] ohm"
        )
    read_width = params.read_width_per_volt * abs(v_read)
    device = refresh_fluctuation(device)
    pulses = reads = 0
    polarity = 0
    amplitude = params.start_amplitude
    converged = False
    final = float("nan")
    iteration = 0

    def read() -> float:
        nonlocal reads
        reads += 1
        return read_resistance(device, v_read, read_width)

    while iteration < params.max_iterations:
        iteration += 1
        r = read()
        if abs(r - r_target) <= tol * r_target:
            verify = [r]
            for _ in range(params.stability_reads):
                r = read()
                if abs(r - r_target) > tol * r_target:
                    break
                verify.append(r)
            else:
                converged = True
                final = verify[-1]
                break
        final = r
        sign = 1 if r > r_target else -1
        if sign == polarity:
            amplitude = min(amplitude + params.amplitude_step, params.max_amplitude)
        else:
            amplitude = params.start_amplitude
            polarity = sign
        device = apply_write_pulse(device, PulseSpec(sign * amplitude, params.write_width))
        pulses += 1

    report = DeviceReport(
        index=index,
        target_resistance=r_target,
        tolerance=tol,
        pulses_applied=pulses,
        reads=reads,
        iterations=iteration,
        final_resistance=final,
        true_resistance=device.resistance,
        relative_error=abs(final - r_target) / r_target,
        converged=converged,
        pulse_time=pulses * params.write_width + reads * read_width,
    )
    return device, report


def program_source(
    bank: SourceBank,
    v_trg: float,
    params: TuneParams = TuneParams(),
    v_read: Optional[float] = None,
) -> Tuple[SourceBank, ProgramReport]:
    """Program every feedback device so the source outputs ``v_trg``.

    Devices are read at ``v_trg - v_in``, the voltage they will carry in the
    loop, unless ``v_read`` overrides it. The balancing step uses each
    companion's last verification read, not its true conductance.
    """
    n = bank.n
    r_trg = target_resistance(v_trg, bank.v_in, n, bank.r_in)
    for i, m in enumerate(bank.memristors):
        if not m.can_reach(r_trg):
            raise UnreachableTargetError(
                f"device {i} cannot reach target {r_trg:.6g} ohm for v_trg={v_trg!r} V"
            )
    if v_read is None:
        v_read = v_trg - bank.v_in
    if v_read == 0:
        # Unity gain with one device leaves no voltage across it; read at v_in.
        v_read = bank.v_in
    report = ProgramReport(v_target=v_trg, r_target=r_trg)
    measured: List[float] = []
    stage = "companion 0"
    try:
        for i in range(n - 1):
            stage = f"companion {i}"
            bank = set_switch_state(bank, SwitchMatrixState.program(i))
            device, dev_report = tune_resistance(
                bank.memristors[i], r_trg, params, v_read, params.tolerance, index=i
            )
            bank = bank.with_device(i, device)
            report = dataclasses.replace(report, devices=report.devices + (dev_report,))
            measured.append(1.0 / dev_report.final_resistance)
        stage = "balance"
        r_bal = balance_resistance(r_trg, measured, n)
        report = dataclasses.replace(report, r_balance=r_bal)
        bank = set_switch_state(bank, SwitchMatrixState.program(n - 1))
        device, dev_report = tune_resistance(
            bank.memristors[n - 1], r_bal, params, v_read, params.balance_tolerance, index=n - 1
        )
        bank = bank.with_device(n - 1, device)
        report = dataclasses.replace(report, devices=report.devices + (dev_report,))
    except Exception as exc:
        bank = set_switch_state(bank, SwitchMatrixState.feedback())
        report = dataclasses.replace(report, failed_stage=stage)
        raise ProgrammingError(stage, str(exc), bank, report) from exc
    bank = set_switch_state(bank, SwitchMatrixState.feedback())
    return bank, report

"""Measurement campaigns on simulated sources: repeated DC sweeps and stability traces."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .calibration import PROGRAM, STABILITY, SWEEP, Calibration
from .circuit import OutputSample, SourceBank, measure_output, output_voltage, tia_transfer
from .devices import AmplifierModel, amplifier_idle_current, effective_gain_factor
from .programming import (
    ProgramReport,
    ProgrammingError,
    TuneParams,
    UnreachableTargetError,
    program_source,
    target_resistance,
)


def fit_linear(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, float]:
    """Ordinary least squares y = slope*x + intercept; also the residual std (ddof=2)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two points to fit a line")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("degenerate fit: all x values are equal")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    residual_std = float(np.sqrt(resid @ resid / dof)) if dof > 0 else 0.0
    return slope, intercept, residual_std


def compute_mre(samples, a_f: float, delta_v: float) -> np.ndarray:
    """Mean resolution error in percent, 100 * std(V) / (a_f * delta_v), per target.

    ``samples`` has shape (replications, targets); std is the sample std.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < 2:
        raise ValueError("MRE needs at least two replications per target")
    if a_f == 0:
        raise ValueError("fitted slope must be non-zero")
    if not delta_v > 0:
        raise ValueError("resolution must be positive")
    return 100.0 * s.std(axis=0, ddof=1) / (a_f * delta_v)


@dataclass(frozen=True)
class SweepSpec:
    calibration: Calibration
    v_start: float = 0.4
    v_stop: float = 0.65
    resolution: float = 0.01
    replications: int = 10
    params: TuneParams = field(default_factory=TuneParams)
    master_seed: int = 0
    offset_mode: str = "known"

    def __post_init__(self):
        if not self.v_stop > self.v_start:
            raise ValueError("v_stop must exceed v_start")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        steps = (self.v_stop - self.v_start) / self.resolution
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(
                f"sweep span {self.v_stop - self.v_start!r} V is not a whole number "
                f"of {self.resolution!r} V steps"
            )
        if self.offset_mode not in ("known", "estimate"):
            raise ValueError(f"offset_mode must be 'known' or 'estimate', got {self.offset_mode!r}")

    @property
    def targets(self) -> np.ndarray:
        steps = int(round((self.v_stop - self.v_start) / self.resolution))
        return np.round(self.v_start + self.resolution * np.arange(steps + 1), 12)


@dataclass(frozen=True)
class SweepResult:
    """Offset-corrected sweep statistics; ``samples[r][j]`` is replication r at target j."""

    targets: Tuple[float, ...]
    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    slope: float
    intercept: float
    mre: Tuple[float, ...]
    samples: Tuple[Tuple[float, ...], ...]
    resolution: float
    reports: Tuple[ProgramReport, ...] = field(default=(), compare=False, repr=False)

    @classmethod
    def from_samples(cls, targets, samples, resolution: float, reports=()) -> "SweepResult":
        s = np.asarray(samples, dtype=float)
        means = s.mean(axis=0)
        stds = s.std(axis=0, ddof=1) if s.shape[0] > 1 else np.zeros(s.shape[1])
        slope, intercept, _ = fit_linear(targets, means)
        if s.shape[0] > 1:
            mre = compute_mre(s, slope, resolution)
        else:
            mre = np.full(s.shape[1], np.nan)
        return cls(
            targets=tuple(float(t) for t in targets),
            means=tuple(means.tolist()),
            stds=tuple(stds.tolist()),
            slope=slope,
            intercept=intercept,
            mre=tuple(mre.tolist()),
            samples=tuple(tuple(row) for row in s.tolist()),
            resolution=float(resolution),
            reports=tuple(reports),
        )

    @property
    def mean_mre(self) -> float:
        return float(np.mean(self.mre))

    @property
    def nonconverged(self) -> int:
        return sum(not r.converged for r in self.reports)


def check_reachable(cal: Calibration, targets: Sequence[float]) -> None:
    device = cal.device
    for v in targets:
        r = target_resistance(float(v), cal.v_in, cal.n, cal.r_in)
        if not device.g_min <= 1.0 / r <= device.g_max:
            raise UnreachableTargetError(
                f"sweep target {float(v)!r} V needs {r:.6g} ohm per device, outside "
                f"[{device.r_low:.6g}, {device.r_high:.6g}] ohm"
            )


def _replication(spec: SweepSpec, rep: int) -> Tuple[List[float], List[ProgramReport]]:
    bank = spec.calibration.bank(spec.master_seed, SWEEP, rep)
    values, reports = [], []
    for v in spec.targets:
        bank, report = program_source(bank, float(v), spec.params)
        values.append(output_voltage(bank).v_out)
        reports.append(report)
    return values, reports


def run_dc_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Program every target in every replication and collect the achieved outputs.

    Each replication starts from fresh devices on its own stream and walks the
    targets in ascending order, reusing the devices from target to target.
    """
    targets = spec.targets
    check_reachable(spec.calibration, targets)
    reps = range(spec.replications)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_replication, [spec] * spec.replications, reps))
    else:
        results = [_replication(spec, r) for r in reps]
    raw = np.array([values for values, _ in results])
    reports = [r for _, rs in results for r in rs]
    if spec.offset_mode == "known":
        offset = spec.calibration.amplifier.offset
    else:
        mid = len(targets) // 2
        offset = float(np.mean(raw[:, mid] - targets[mid]))
    return SweepResult.from_samples(targets, raw - offset, spec.resolution, reports)


@dataclass(frozen=True)
class StabilityResult:
    trace: Tuple[OutputSample, ...]
    slope: float
    intercept: float
    noise_std: float
    histogram: Tuple[Tuple[int, ...], Tuple[float, ...]] = field(compare=False, repr=False)
    normality_pvalue: float = field(default=float("nan"), compare=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.trace])

    @property
    def voltages(self) -> np.ndarray:
        return np.array([s.v_out for s in self.trace])

    @property
    def residuals(self) -> np.ndarray:
        return self.voltages - (self.slope * self.times + self.intercept)

    @classmethod
    def from_trace(cls, trace: Sequence[OutputSample], bins: int = 30) -> "StabilityResult":
        if not trace:
            raise ValueError("empty trace")
        t = np.array([s.timestamp for s in trace])
        v = np.array([s.v_out for s in trace])
        slope, intercept, noise = fit_linear(t, v)
        resid = v - (slope * t + intercept)
        counts, edges = np.histogram(resid, bins=bins)
        pvalue = float("nan")
        if len(resid) >= 20:
            with warnings.catch_warnings():
                # flat traces trip scipy's precision-loss warning
                warnings.simplefilter("ignore", RuntimeWarning)
                pvalue = float(stats.normaltest(resid).pvalue)
        return cls(
            trace=tuple(trace),
            slope=slope,
            intercept=intercept,
            noise_std=noise,
            histogram=(tuple(counts.tolist()), tuple(edges.tolist())),
            normality_pvalue=pvalue,
        )


def run_stability(
    bank: SourceBank, duration: float = 300.0, dt: float = 0.1, bins: int = 30
) -> StabilityResult:
    """Record the programmed output over ``duration`` and fit V(t) = a*t + b."""
    if duration < 10 * dt:
        raise ValueError("stability run needs at least ten samples (duration >= 10*dt)")
    return StabilityResult.from_trace(measure_output(bank, duration, dt), bins)


def programmed_stability(
    cal: Calibration,
    v_target: float,
    duration: float = 300.0,
    dt: float = 0.1,
    params: TuneParams = TuneParams(),
    master_seed: int = 0,
    replication: int = 0,
    bins: int = 30,
) -> Tuple[StabilityResult, ProgramReport]:
    """Program a fresh bank to ``v_target`` and record its stability trace."""
    check_reachable(cal, [v_target])
    bank = cal.bank(master_seed, STABILITY, replication)
    bank, report = program_source(bank, v_target, params)
    return run_stability(bank, duration, dt, bins), report


@dataclass(frozen=True)
class ProgramOutcome:
    """One entry of a programming session: the report and the settled output."""

    report: ProgramReport
    v_out: float


def run_program(
    cal: Calibration,
    v_targets: Sequence[float],
    params: TuneParams = TuneParams(),
    master_seed: int = 0,
) -> List[ProgramOutcome]:
    """Reprogram one bank through ``v_targets`` in order.

    A failed target is recorded with its report and the session continues
    from the bank as the failure left it.
    """
    check_reachable(cal, v_targets)
    bank = cal.bank(master_seed, PROGRAM, 0)
    outcomes = []
    for v in v_targets:
        try:
            bank, report = program_source(bank, float(v), params)
        except ProgrammingError as exc:
            bank, report = exc.bank, exc.report
        outcomes.append(ProgramOutcome(report, output_voltage(bank).v_out))
    return outcomes


@dataclass(frozen=True)
class TransferRow:
    temperature: float
    v_in: float
    v_out: float
    gain_factor: float
    idle_current: float


def run_characterization(
    amplifier: AmplifierModel,
    temperatures: Sequence[float],
    v_in_grid: Sequence[float],
    r_fb: float = 2e3,
    r_in: float = 1e3,
) -> List[TransferRow]:
    """Transfer curves of the bare TIA with a fixed feedback resistor."""
    rows = []
    for t in temperatures:
        eta = effective_gain_factor(amplifier, t)
        idle = amplifier_idle_current(amplifier, t)
        for v in v_in_grid:
            v_out = tia_transfer(amplifier, t, r_fb, r_in, float(v))
            rows.append(TransferRow(float(t), float(v), v_out, eta, idle))
    return rows

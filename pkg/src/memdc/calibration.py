"""Named parameter sets for the room-temperature and 1.2 K prototypes.

Seeding: every random stream is derived from one master seed through
``numpy.random.SeedSequence(master_seed, spawn_key=(domain, replication, device))``.
The key is a pure counter, so adding replications or devices never changes
the streams of existing ones.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .circuit import SourceBank
from .devices import AmplifierModel, MemristorState, RegimeLabel, TemperatureRegime

# spawn-key domains
SWEEP, STABILITY, PROGRAM, CONVERGENCE = 1, 2, 3, 4


def stream(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class DeviceParams:
    """Per-regime device model; resistances in ohms, ``write_gain`` in S/V.

    With ``write_gain`` unset, a 1.5 V pulse moves the conductance by 2% of the
    regime's conductance range. With ``initial_resistance`` unset, each fresh
    device starts at a conductance drawn uniformly from the regime bounds.
    """

    r_low: float
    r_high: float
    write_gain: Optional[float] = None
    write_threshold: float = 0.8
    c2c_sigma: float = 0.05
    read_noise_alpha: float = 0.002
    output_noise_alpha: Optional[float] = None
    read_noise_floor: float = 0.0
    drift_rate: float = 0.0
    iv_nonlinearity: float = 0.0
    max_write_voltage: float = 3.0
    slow_noise_alpha: float = 0.0
    initial_resistance: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.r_low < self.r_high:
            raise ValueError(f"need 0 < r_low < r_high, got {self.r_low!r}, {self.r_high!r}")
        r0 = self.initial_resistance
        if r0 is not None and not self.r_low <= r0 <= self.r_high:
            raise ValueError(f"initial_resistance {r0!r} outside [{self.r_low!r}, {self.r_high!r}]")

    @property
    def g_min(self) -> float:
        return 1.0 / self.r_high

    @property
    def g_max(self) -> float:
        return 1.0 / self.r_low

    @property
    def effective_write_gain(self) -> float:
        if self.write_gain is not None:
            return self.write_gain
        return 0.02 * (self.g_max - self.g_min) / (1.5 - self.write_threshold)

    def make(self, rng: np.random.Generator, conductance: Optional[float] = None) -> MemristorState:
        """Build a device at ``conductance``, else the configured or a random start."""
        if conductance is None and self.initial_resistance is not None:
            conductance = 1.0 / self.initial_resistance
        if conductance is None:
            conductance = float(rng.uniform(self.g_min, self.g_max))
        return MemristorState(
            conductance=conductance,
            g_min=self.g_min,
            g_max=self.g_max,
            write_gain=self.effective_write_gain,
            write_threshold=self.write_threshold,
            c2c_sigma=self.c2c_sigma,
            read_noise_alpha=self.read_noise_alpha,
            drift_rate=self.drift_rate,
            rng=rng,
            output_noise_alpha=self.output_noise_alpha,
            read_noise_floor=self.read_noise_floor,
            iv_nonlinearity=self.iv_nonlinearity,
            max_write_voltage=self.max_write_voltage,
            slow_noise_alpha=self.slow_noise_alpha,
        )


@dataclass(frozen=True)
class Calibration:
    name: str
    regime: TemperatureRegime
    device: DeviceParams
    amplifier: AmplifierModel = field(default_factory=AmplifierModel)
    n: int = 2
    r_in: float = 3e3
    v_in: float = 0.25

    def bank(
        self,
        master_seed: int,
        *key: int,
        conductances: Optional[Sequence[float]] = None,
    ) -> SourceBank:
        """A feedback-mode bank whose device ``i`` draws from stream ``key + (i,)``."""
        devices = []
        for i in range(self.n):
            g = None if conductances is None else conductances[i]
            devices.append(self.device.make(stream(master_seed, *key, i), g))
        return SourceBank(tuple(devices), self.r_in, self.amplifier, self.v_in, self.regime)

    def replace(self, **changes) -> "Calibration":
        return dataclasses.replace(self, **changes)


ROOM = Calibration(
    name="room",
    regime=TemperatureRegime(300.0, RegimeLabel.ROOM),
    device=DeviceParams(
        r_low=5e3,
        r_high=100e3,
        c2c_sigma=0.05,
        read_noise_alpha=0.002,
        output_noise_alpha=0.00283,
        drift_rate=1e-4,
    ),
    amplifier=AmplifierModel(v_dd=2.7, v_ss=-2.7),
    v_in=0.25,
)

# Cryo-reformed devices sit at higher resistance; supply raised to +/-3.0 V.
CRYO = Calibration(
    name="cryo",
    regime=TemperatureRegime(1.2, RegimeLabel.CRYO),
    device=DeviceParams(
        r_low=20e3,
        r_high=200e3,
        c2c_sigma=0.05,
        read_noise_alpha=0.004,
        output_noise_alpha=0.012,
        slow_noise_alpha=0.0035,
        drift_rate=1e-5,
    ),
    amplifier=AmplifierModel(v_dd=3.0, v_ss=-3.0),
    v_in=0.075,
)

CALIBRATIONS: Dict[str, Calibration] = {c.name: c for c in (ROOM, CRYO)}


def get_calibration(name: str) -> Calibration:
    try:
        return CALIBRATIONS[name]
    except KeyError:
        raise KeyError(f"unknown calibration {name!r}; known: {sorted(CALIBRATIONS)}") from None

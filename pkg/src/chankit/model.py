"""Core domain types: sweep configuration, sample grids, and multipath components.

All angles are degrees at the interface and converted to radians only at the
point of use. Power values are dB relative to whatever reference the data was
ingested with (dBm for dBm sources); the toolkit never mixes references
within one analysis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class Case(enum.Enum):
    """Sight condition of a Tx-Rx link."""

    LOS = "los"
    NLOS = "nlos"
    OLOS = "olos"


@dataclass(frozen=True)
class SystemConfig:
    """Measurement-system configuration shared by every sweep of a campaign.

    The azimuth/elevation grids are the Rx pointing directions of the scan,
    in degrees, strictly ascending. Azimuth values may include both 0 and 360
    (a full rotation scans the 0 direction twice).
    """

    f_start_hz: float
    f_stop_hz: float
    n_points: int
    tx_gain_dbi: float
    rx_gain_dbi: float
    rx_hpbw_deg: float
    noise_floor_dbm: float
    az_grid_deg: tuple[float, ...]
    el_grid_deg: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "az_grid_deg", tuple(float(a) for a in self.az_grid_deg))
        object.__setattr__(self, "el_grid_deg", tuple(float(e) for e in self.el_grid_deg))
        if not self.f_stop_hz > self.f_start_hz:
            raise ValueError("f_stop_hz must exceed f_start_hz (zero bandwidth)")
        if self.n_points < 2:
            raise ValueError("a sweep needs at least 2 frequency points")
        if not self.az_grid_deg or not self.el_grid_deg:
            raise ValueError("pointing grids must be non-empty")
        if any(a < 0.0 or a > 360.0 for a in self.az_grid_deg):
            raise ValueError("azimuth grid values must lie in [0, 360]")
        if any(e < -90.0 or e > 90.0 for e in self.el_grid_deg):
            raise ValueError("elevation grid values must lie in [-90, 90]")
        if any(b <= a for a, b in zip(self.az_grid_deg, self.az_grid_deg[1:])):
            raise ValueError("azimuth grid must be strictly ascending")
        if any(b <= a for a, b in zip(self.el_grid_deg, self.el_grid_deg[1:])):
            raise ValueError("elevation grid must be strictly ascending")
        if self.rx_hpbw_deg <= 0.0:
            raise ValueError("rx_hpbw_deg must be positive")

    @property
    def bandwidth_hz(self) -> float:
        return self.f_stop_hz - self.f_start_hz

    @property
    def freq_step_hz(self) -> float:
        return self.bandwidth_hz / (self.n_points - 1)

    @property
    def center_frequency_hz(self) -> float:
        return 0.5 * (self.f_start_hz + self.f_stop_hz)

    @property
    def n_directions(self) -> int:
        return len(self.az_grid_deg) * len(self.el_grid_deg)

    def frequencies_hz(self) -> np.ndarray:
        return self.f_start_hz + np.arange(self.n_points) * self.freq_step_hz


def _freeze_complex(samples, shape, what: str) -> np.ndarray:
    arr = np.asarray(samples, dtype=complex)
    if arr.shape != shape:
        raise ValueError(f"{what} samples have shape {arr.shape}, expected {shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} samples contain non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SweepGrid:
    """Complex channel transfer function samples over (azimuth, elevation, frequency)."""

    config: SystemConfig
    position_id: str
    samples: np.ndarray  # complex, shape (n_az, n_el, n_points)
    case: Case = Case.LOS
    tx_rx_distance_m: float | None = None

    def __post_init__(self):
        shape = (len(self.config.az_grid_deg), len(self.config.el_grid_deg), self.config.n_points)
        object.__setattr__(self, "samples", _freeze_complex(self.samples, shape, "sweep"))
        if self.tx_rx_distance_m is not None and not self.tx_rx_distance_m > 0.0:
            raise ValueError("tx_rx_distance_m must be positive when given")


@dataclass(frozen=True, eq=False)
class CirGrid:
    """Complex impulse-response samples over (azimuth, elevation, delay).

    The delay axis starts at zero excess delay, with ``n_points`` bins of
    width ``delay_step_s`` spanning one full alias period 1/freq_step.
    """

    config: SystemConfig
    position_id: str
    samples: np.ndarray  # complex, shape (n_az, n_el, n_points)
    delay_step_s: float

    def __post_init__(self):
        shape = (len(self.config.az_grid_deg), len(self.config.el_grid_deg), self.config.n_points)
        object.__setattr__(self, "samples", _freeze_complex(self.samples, shape, "cir"))
        if not self.delay_step_s > 0.0:
            raise ValueError("delay_step_s must be positive")

    @property
    def n_delay_bins(self) -> int:
        return self.config.n_points

    def delay_axis_s(self) -> np.ndarray:
        return np.arange(self.n_delay_bins) * self.delay_step_s


@dataclass(frozen=True, order=True)
class Mpc:
    """One multipath component: time of arrival, arrival angles, power."""

    toa_s: float
    az_deg: float
    el_deg: float
    power_db: float
    position_id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.power_db):
            raise ValueError("power_db must be finite")
        if not (math.isfinite(self.toa_s) and self.toa_s >= 0.0):
            raise ValueError("toa_s must be finite and non-negative")


@dataclass(frozen=True)
class ResolutionSummary:
    """Derived resolution quantities of a sweep configuration."""

    time_res_s: float
    space_res_m: float
    max_excess_delay_s: float
    max_path_m: float


def derive_resolution(config: SystemConfig) -> ResolutionSummary:
    """Derive delay/space resolution and the maximum unambiguous excess delay.

    time_res = 1/B with B the swept bandwidth; space_res = c * time_res;
    max_excess_delay = 1/freq_step; max_path = c * max_excess_delay.
    """
    bandwidth = config.bandwidth_hz
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    step = config.freq_step_hz
    time_res = 1.0 / bandwidth
    max_delay = 1.0 / step
    return ResolutionSummary(
        time_res_s=time_res,
        space_res_m=SPEED_OF_LIGHT * time_res,
        max_excess_delay_s=max_delay,
        max_path_m=SPEED_OF_LIGHT * max_delay,
    )

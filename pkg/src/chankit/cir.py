"""Transfer-function to impulse-response transforms and power profiles."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import CirGrid, SweepGrid


def ctf_to_cir(sweep: SweepGrid, window: str = "rect") -> CirGrid:
    """Inverse DFT of the transfer function, per pointing direction.

    Uses h[t] = (1/N) sum_k H[k] exp(+j 2 pi k t / N); the 1/N normalization
    sits on the inverse transform, so sum_k |H[k]|^2 == N * sum_t |h[t]|^2.
    Delay bin t maps to t / (N * freq_step) seconds; N bins span one alias
    period 1/freq_step.

    ``window="hann"`` applies a Hann taper to the spectrum before the
    transform. Meant for sidelobe studies only; it biases absolute power.
    """
    samples = sweep.samples
    n = sweep.config.n_points
    if window == "hann":
        samples = samples * np.hanning(n)[None, None, :]
    elif window != "rect":
        raise ValueError(f"unknown window '{window}'")
    cir = np.fft.ifft(samples, axis=2)
    delay_step = 1.0 / (n * sweep.config.freq_step_hz)
    return CirGrid(
        config=sweep.config,
        position_id=sweep.position_id,
        samples=cir,
        delay_step_s=delay_step,
    )


def power_db_grid(cir: CirGrid) -> np.ndarray:
    """Per-sample power 10*log10(|h|^2); exact zeros map to -inf."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.abs(cir.samples) ** 2)


def direction_power(cir: CirGrid, az_idx: int, el_idx: int, mask: np.ndarray | None = None) -> float:
    """Total linear received power sum_t |h|^2 for one pointing direction.

    ``mask`` optionally restricts the sum to surviving delay bins (boolean,
    one flag per bin).
    """
    n_az, n_el = cir.samples.shape[:2]
    if not (0 <= az_idx < n_az and 0 <= el_idx < n_el):
        raise IndexError(f"direction index ({az_idx}, {el_idx}) outside grid {n_az}x{n_el}")
    pencil = np.abs(cir.samples[az_idx, el_idx]) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pencil.shape:
            raise ValueError(f"mask shape {mask.shape} does not match delay axis {pencil.shape}")
        pencil = pencil[mask]
    return float(pencil.sum())


@dataclass(frozen=True, eq=False)
class Pdap:
    """Power-delay-angular profile: power per (azimuth, delay) cell.

    Cells whose source power is exactly zero carry the ``below_floor`` flag;
    their ``power_db`` entry is a placeholder 0.0, never -inf.
    """

    power_db: np.ndarray  # (n_az, n_delay)
    below_floor: np.ndarray  # bool, same shape
    delay_axis_s: np.ndarray
    az_axis_deg: np.ndarray
    elevation_mode: str  # "max" or "slice:<idx>"

    def __post_init__(self):
        for name in ("power_db", "below_floor", "delay_axis_s", "az_axis_deg"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.power_db.shape != self.below_floor.shape:
            raise ValueError("power_db and below_floor shapes differ")
        if self.power_db.shape != (self.az_axis_deg.size, self.delay_axis_s.size):
            raise ValueError("pdap axes do not match the power matrix")
        if not np.isfinite(self.power_db).all():
            raise ValueError("pdap power_db must contain only finite values")


def compute_pdap(cir: CirGrid, mode: str = "max", el_idx: int | None = None) -> Pdap:
    """Reduce a CIR grid over elevation into an azimuth-delay power map.

    ``mode="slice"`` picks one elevation index; ``mode="max"`` takes the
    maximum power over elevation per (azimuth, delay) cell.
    """
    power = np.abs(cir.samples) ** 2
    if mode == "slice":
        if el_idx is None:
            raise ValueError("slice mode needs el_idx")
        n_el = power.shape[1]
        if not 0 <= el_idx < n_el:
            raise IndexError(f"elevation index {el_idx} outside grid of {n_el}")
        reduced = power[:, el_idx, :]
        label = f"slice:{el_idx}"
    elif mode == "max":
        reduced = power.max(axis=1)
        label = "max"
    else:
        raise ValueError(f"unknown elevation mode '{mode}'")

    below = reduced <= 0.0
    power_db = np.zeros_like(reduced)
    np.log10(reduced, out=power_db, where=~below)
    power_db *= 10.0
    power_db[below] = 0.0
    return Pdap(
        power_db=power_db,
        below_floor=below,
        delay_axis_s=cir.delay_axis_s(),
        az_axis_deg=np.asarray(cir.config.az_grid_deg, dtype=float),
        elevation_mode=label,
    )


def write_pdap_csv(pdap: Pdap, fp) -> None:
    """Write one row per above-floor cell: az_deg, delay_ns, power_db."""
    writer = csv.writer(fp)
    writer.writerow(["az_deg", "delay_ns", "power_db"])
    for i, az in enumerate(pdap.az_axis_deg):
        for t, delay in enumerate(pdap.delay_axis_s):
            if pdap.below_floor[i, t]:
                continue
            writer.writerow(
                [repr(float(az)), repr(float(delay) * 1e9), repr(float(pdap.power_db[i, t]))]
            )

"""Multipath-component extraction from CIR grids.

Every delay sample in every direction is a candidate component: no peak
picking, no local-maximum filtering. Samples whose power falls below the
active threshold are noise; everything else becomes one component with
ToA = bin delay and AoA = pointing direction. Adjacent bins of one physical
path may therefore yield several components; clustering absorbs them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cir import power_db_grid
from .errors import ParseError
from .model import CirGrid, Mpc

MPC_SCHEMA = "mpc/1"

RELATIVE_MARGIN_DB = 40.0  # below the strongest sample
NOISE_MARGIN_DB = 10.0  # above the noise floor


def noise_threshold(p_max_db: float, noise_floor_db: float) -> float:
    """Noise threshold: max(p_max - 40 dB, noise floor + 10 dB)."""
    if not (math.isfinite(p_max_db) and math.isfinite(noise_floor_db)):
        raise ValueError("threshold inputs must be finite")
    return max(p_max_db - RELATIVE_MARGIN_DB, noise_floor_db + NOISE_MARGIN_DB)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Noise-cut policy for component extraction.

    Modes:
      * ``relative``       max(peak - 40 dB, noise floor + 10 dB)
      * ``absolute``       fixed level in the ingest dB reference
      * ``dynamic_range``  keep samples within ``range_db`` of the global peak
    """

    mode: str
    level_db: float | None = None
    range_db: float | None = None

    def __post_init__(self):
        if self.mode == "relative":
            if self.level_db is not None or self.range_db is not None:
                raise ValueError("relative mode takes no parameters")
        elif self.mode == "absolute":
            if self.level_db is None or not math.isfinite(self.level_db):
                raise ValueError("absolute mode needs a finite level_db")
        elif self.mode == "dynamic_range":
            if self.range_db is None or not self.range_db > 0.0:
                raise ValueError("dynamic_range mode needs range_db > 0")
        else:
            raise ValueError(f"unknown threshold mode '{self.mode}'")

    @classmethod
    def relative(cls) -> "ThresholdPolicy":
        return cls(mode="relative")

    @classmethod
    def absolute(cls, level_db: float) -> "ThresholdPolicy":
        return cls(mode="absolute", level_db=level_db)

    @classmethod
    def dynamic_range(cls, range_db: float) -> "ThresholdPolicy":
        return cls(mode="dynamic_range", range_db=range_db)

    def threshold_db(self, p_max_db: float, noise_floor_db: float) -> float:
        if self.mode == "relative":
            return noise_threshold(p_max_db, noise_floor_db)
        if self.mode == "absolute":
            return float(self.level_db)
        return p_max_db - float(self.range_db)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "level_db": self.level_db, "range_db": self.range_db}

    @classmethod
    def from_dict(cls, doc: dict) -> "ThresholdPolicy":
        return cls(mode=doc["mode"], level_db=doc.get("level_db"), range_db=doc.get("range_db"))


@dataclass(frozen=True, eq=False)
class ExtractionResult:
    """Components surviving the threshold, plus the survivor mask and levels."""

    mpcs: tuple[Mpc, ...]
    mask: np.ndarray  # bool, shape (n_az, n_el, n_points)
    threshold_db: float
    p_max_db: float
    position_id: str

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def is_empty(self) -> bool:
        return len(self.mpcs) == 0


def extract_mpcs(cir: CirGrid, policy: ThresholdPolicy | None = None) -> ExtractionResult:
    """Threshold a CIR grid and keep every surviving sample as one component.

    Comparisons run in dB on 10*log10(|h|^2); samples exactly at the threshold
    are kept. Output is sorted by (ToA, azimuth, elevation). An empty result
    is legal (all-noise grid) and flagged via ``ExtractionResult.is_empty``.
    """
    if policy is None:
        policy = ThresholdPolicy.relative()
    power_db = power_db_grid(cir)
    p_max = float(power_db.max()) if power_db.size else -math.inf
    if math.isfinite(p_max):
        threshold = policy.threshold_db(p_max, cir.config.noise_floor_dbm)
    else:
        # all-zero grid: relative rule degenerates to the noise-floor branch
        threshold = (
            policy.threshold_db(0.0, cir.config.noise_floor_dbm)
            if policy.mode == "absolute"
            else cir.config.noise_floor_dbm + NOISE_MARGIN_DB
        )
    mask = power_db >= threshold

    az_grid = np.asarray(cir.config.az_grid_deg)
    el_grid = np.asarray(cir.config.el_grid_deg)
    idx = np.argwhere(mask)
    if idx.size:
        order = np.lexsort((idx[:, 1], idx[:, 0], idx[:, 2]))  # el, az within toa
        idx = idx[order]
    mpcs = tuple(
        Mpc(
            toa_s=float(t * cir.delay_step_s),
            az_deg=float(az_grid[i]),
            el_deg=float(el_grid[j]),
            power_db=float(power_db[i, j, t]),
            position_id=cir.position_id,
        )
        for i, j, t in idx
    )
    return ExtractionResult(
        mpcs=mpcs,
        mask=mask,
        threshold_db=float(threshold),
        p_max_db=p_max,
        position_id=cir.position_id,
    )


def mpcs_to_dict(position_id: str, mpcs) -> dict:
    """JSON-ready component list (schema mpc/1); ToA serialized in ns."""
    return {
        "schema": MPC_SCHEMA,
        "position_id": position_id,
        "mpcs": [
            {
                "toa_ns": m.toa_s * 1e9,
                "az_deg": m.az_deg,
                "el_deg": m.el_deg,
                "power_db": m.power_db,
            }
            for m in mpcs
        ],
    }


def parse_mpc_file(data) -> tuple[str, tuple[Mpc, ...]]:
    """Parse a component list document back into (position_id, mpcs)."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if doc.get("schema") != MPC_SCHEMA:
        raise ParseError(f"unknown mpc schema '{doc.get('schema')}'")
    position_id = str(doc.get("position_id", ""))
    try:
        mpcs = tuple(
            Mpc(
                toa_s=float(m["toa_ns"]) * 1e-9,
                az_deg=float(m["az_deg"]),
                el_deg=float(m["el_deg"]),
                power_db=float(m["power_db"]),
                position_id=position_id,
            )
            for m in doc["mpcs"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid mpc entry: {exc}") from exc
    return position_id, mpcs

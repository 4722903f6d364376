"""Sweep/calibration file parsing and removal of the measurement-system response.

File formats (JSON, version tagged via a ``schema`` field):

Sweep file, schema ``sweep/1``::

    { "schema": "sweep/1", "position_id": str, "case": "los"|"nlos"|"olos",
      "tx_rx_distance_m": number|null,
      "config": { "f_start_hz": num, "f_stop_hz": num, "n_points": int,
                  "az_grid_deg": [num], "el_grid_deg": [num],
                  "tx_gain_dbi": num, "rx_gain_dbi": num, "rx_hpbw_deg": num,
                  "noise_floor_dbm": num },
      "samples": [ { "az_deg": num, "el_deg": num, "s21": [[re, im], ...] } ] }

Calibration file, schema ``calib/1``::

    { "schema": "calib/1", "attenuator_db": num, "s21": [[re, im], ...] }

``attenuator_db`` is the through-gain of the back-to-back attenuator in dB
(negative for attenuation, e.g. -40).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ParseError
from .model import Case, SweepGrid, SystemConfig

SWEEP_SCHEMA = "sweep/1"
CALIB_SCHEMA = "calib/1"

# Linear |S_calib| magnitudes below this are considered degenerate.
DEFAULT_CALIB_FLOOR = 1e-15


@dataclass(frozen=True, eq=False)
class CalibrationRecord:
    """Back-to-back reference sweep plus the known through-path constants."""

    s_calib: np.ndarray  # complex, shape (n_points,)
    attenuator_db: float
    tx_gain_dbi: float
    rx_gain_dbi: float

    def __post_init__(self):
        arr = np.asarray(self.s_calib, dtype=complex)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("s_calib must be a 1-D array with >= 2 points")
        if not np.isfinite(arr).all():
            raise ValueError("s_calib contains non-finite values")
        if not (np.abs(arr) > 0.0).all():
            raise CalibrationError("s_calib magnitude must be strictly positive at every point")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "s_calib", arr)

    @property
    def n_points(self) -> int:
        return self.s_calib.size


def _require(doc: dict, key: str, what: str):
    if key not in doc:
        raise ParseError(f"{what}: missing required field '{key}'")
    return doc[key]


def _as_complex_array(pairs, n_expected: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: s21 entries must be [re, im] number pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParseError(f"{what}: s21 entries must be [re, im] number pairs")
    if arr.shape[0] != n_expected:
        raise ParseError(f"{what}: s21 has {arr.shape[0]} points, expected {n_expected}")
    if not np.isfinite(arr).all():
        raise ParseError(f"{what}: s21 contains non-finite values")
    return arr[:, 0] + 1j * arr[:, 1]


def _load_json(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8", errors="strict")
    try:
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    return doc


def parse_sweep_file(data) -> SweepGrid:
    """Parse one sweep document (bytes or str) into a validated SweepGrid."""
    doc = _load_json(data)
    schema = _require(doc, "schema", "sweep file")
    if schema != SWEEP_SCHEMA:
        raise ParseError(f"unknown sweep schema '{schema}', expected '{SWEEP_SCHEMA}'")

    cfg_doc = _require(doc, "config", "sweep file")
    try:
        config = SystemConfig(
            f_start_hz=float(_require(cfg_doc, "f_start_hz", "config")),
            f_stop_hz=float(_require(cfg_doc, "f_stop_hz", "config")),
            n_points=int(_require(cfg_doc, "n_points", "config")),
            tx_gain_dbi=float(_require(cfg_doc, "tx_gain_dbi", "config")),
            rx_gain_dbi=float(_require(cfg_doc, "rx_gain_dbi", "config")),
            rx_hpbw_deg=float(_require(cfg_doc, "rx_hpbw_deg", "config")),
            noise_floor_dbm=float(_require(cfg_doc, "noise_floor_dbm", "config")),
            az_grid_deg=tuple(_require(cfg_doc, "az_grid_deg", "config")),
            el_grid_deg=tuple(_require(cfg_doc, "el_grid_deg", "config")),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid sweep config: {exc}") from exc

    case_str = _require(doc, "case", "sweep file")
    try:
        case = Case(case_str)
    except ValueError as exc:
        raise ParseError(f"unknown case '{case_str}'") from exc

    distance = doc.get("tx_rx_distance_m")
    if distance is not None:
        distance = float(distance)
        if not (math.isfinite(distance) and distance > 0.0):
            raise ParseError("tx_rx_distance_m must be positive when given")

    entries = _require(doc, "samples", "sweep file")
    n_az, n_el = len(config.az_grid_deg), len(config.el_grid_deg)
    if not isinstance(entries, list) or len(entries) != n_az * n_el:
        got = len(entries) if isinstance(entries, list) else "non-list"
        raise ParseError(f"sweep file: expected {n_az * n_el} sample entries, got {got}")

    samples = np.zeros((n_az, n_el, config.n_points), dtype=complex)
    seen = set()
    for entry in entries:
        az = float(_require(entry, "az_deg", "sample entry"))
        el = float(_require(entry, "el_deg", "sample entry"))
        i = _grid_index(config.az_grid_deg, az, "azimuth")
        j = _grid_index(config.el_grid_deg, el, "elevation")
        if (i, j) in seen:
            raise ParseError(f"duplicate sample entry for az={az}, el={el}")
        seen.add((i, j))
        samples[i, j] = _as_complex_array(
            _require(entry, "s21", "sample entry"), config.n_points, f"sample az={az} el={el}"
        )

    try:
        return SweepGrid(
            config=config,
            position_id=str(_require(doc, "position_id", "sweep file")),
            samples=samples,
            case=case,
            tx_rx_distance_m=distance,
        )
    except ValueError as exc:
        raise ParseError(f"invalid sweep grid: {exc}") from exc


def _grid_index(grid: tuple[float, ...], value: float, what: str) -> int:
    for idx, g in enumerate(grid):
        if math.isclose(g, value, rel_tol=0.0, abs_tol=1e-9):
            return idx
    raise ParseError(f"sample {what} {value} not on the configured grid")


def parse_calib_file(data, *, tx_gain_dbi: float, rx_gain_dbi: float) -> CalibrationRecord:
    """Parse a calibration document; antenna gains come from the campaign config."""
    doc = _load_json(data)
    schema = _require(doc, "schema", "calibration file")
    if schema != CALIB_SCHEMA:
        raise ParseError(f"unknown calibration schema '{schema}', expected '{CALIB_SCHEMA}'")
    attenuator_db = float(_require(doc, "attenuator_db", "calibration file"))
    if not math.isfinite(attenuator_db):
        raise ParseError("attenuator_db must be finite")
    s21 = _require(doc, "s21", "calibration file")
    try:
        arr = np.asarray(s21, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError("calibration s21 must be [re, im] number pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ParseError("calibration s21 must be a list of [re, im] pairs (>= 2 points)")
    if not np.isfinite(arr).all():
        raise ParseError("calibration s21 contains non-finite values")
    return CalibrationRecord(
        s_calib=arr[:, 0] + 1j * arr[:, 1],
        attenuator_db=attenuator_db,
        tx_gain_dbi=tx_gain_dbi,
        rx_gain_dbi=rx_gain_dbi,
    )


def _db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


def calibrate(raw: SweepGrid, cal: CalibrationRecord, floor: float = DEFAULT_CALIB_FLOOR) -> SweepGrid:
    """Remove the measurement-system response from a raw S21 grid.

    Per frequency point: H_channel = (S_measure / S_calib) * H_att / (G_tx * G_rx),
    with the dB quantities converted to linear amplitude (10^(x/20)) first.
    Raises CalibrationError when any |S_calib| falls below ``floor``.
    """
    if cal.n_points != raw.config.n_points:
        raise CalibrationError(
            f"calibration has {cal.n_points} points, sweep expects {raw.config.n_points}"
        )
    mag = np.abs(cal.s_calib)
    if (mag < floor).any():
        raise CalibrationError(f"|S_calib| below the safe floor {floor:g}; calibration degenerate")
    scale = _db_to_amplitude(cal.attenuator_db) / (
        _db_to_amplitude(cal.tx_gain_dbi) * _db_to_amplitude(cal.rx_gain_dbi)
    )
    h_channel = raw.samples / cal.s_calib[None, None, :] * scale
    return SweepGrid(
        config=raw.config,
        position_id=raw.position_id,
        samples=h_channel,
        case=raw.case,
        tx_rx_distance_m=raw.tx_rx_distance_m,
    )


def apply_system_response(h_channel: SweepGrid, cal: CalibrationRecord) -> SweepGrid:
    """Forward model: wrap a channel response back into raw-measurement form.

    Exact inverse of :func:`calibrate`; used to build synthetic raw sweeps and
    round-trip checks.
    """
    if cal.n_points != h_channel.config.n_points:
        raise CalibrationError(
            f"calibration has {cal.n_points} points, sweep expects {h_channel.config.n_points}"
        )
    scale = _db_to_amplitude(cal.attenuator_db) / (
        _db_to_amplitude(cal.tx_gain_dbi) * _db_to_amplitude(cal.rx_gain_dbi)
    )
    s_measure = h_channel.samples * cal.s_calib[None, None, :] / scale
    return SweepGrid(
        config=h_channel.config,
        position_id=h_channel.position_id,
        samples=s_measure,
        case=h_channel.case,
        tx_rx_distance_m=h_channel.tx_rx_distance_m,
    )


def sweep_to_dict(grid: SweepGrid) -> dict:
    """JSON-ready representation of a SweepGrid (schema sweep/1)."""
    cfg = grid.config
    entries = []
    for i, az in enumerate(cfg.az_grid_deg):
        for j, el in enumerate(cfg.el_grid_deg):
            s = grid.samples[i, j]
            entries.append(
                {
                    "az_deg": az,
                    "el_deg": el,
                    "s21": [[float(v.real), float(v.imag)] for v in s],
                }
            )
    return {
        "schema": SWEEP_SCHEMA,
        "position_id": grid.position_id,
        "case": grid.case.value,
        "tx_rx_distance_m": grid.tx_rx_distance_m,
        "config": {
            "f_start_hz": cfg.f_start_hz,
            "f_stop_hz": cfg.f_stop_hz,
            "n_points": cfg.n_points,
            "az_grid_deg": list(cfg.az_grid_deg),
            "el_grid_deg": list(cfg.el_grid_deg),
            "tx_gain_dbi": cfg.tx_gain_dbi,
            "rx_gain_dbi": cfg.rx_gain_dbi,
            "rx_hpbw_deg": cfg.rx_hpbw_deg,
            "noise_floor_dbm": cfg.noise_floor_dbm,
        },
        "samples": entries,
    }


def calib_to_dict(cal: CalibrationRecord) -> dict:
    """JSON-ready representation of a CalibrationRecord (schema calib/1)."""
    return {
        "schema": CALIB_SCHEMA,
        "attenuator_db": cal.attenuator_db,
        "s21": [[float(v.real), float(v.imag)] for v in cal.s_calib],
    }

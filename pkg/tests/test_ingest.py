import json

import numpy as np
import pytest

from chankit import (
    CalibrationError,
    CalibrationRecord,
    Case,
    ParseError,
    SweepGrid,
    apply_system_response,
    calibrate,
    parse_calib_file,
    parse_sweep_file,
)
from chankit.ingest import calib_to_dict, sweep_to_dict

from helpers import full_scale_config, make_config


def sweep_doc(config, samples, position_id="rx1", case="los", distance=None):
    entries = []
    for i, az in enumerate(config.az_grid_deg):
        for j, el in enumerate(config.el_grid_deg):
            s = np.asarray(samples[i, j])
            entries.append(
                {"az_deg": az, "el_deg": el, "s21": np.column_stack([s.real, s.imag]).tolist()}
            )
    return {
        "schema": "sweep/1",
        "position_id": position_id,
        "case": case,
        "tx_rx_distance_m": distance,
        "config": {
            "f_start_hz": config.f_start_hz,
            "f_stop_hz": config.f_stop_hz,
            "n_points": config.n_points,
            "az_grid_deg": list(config.az_grid_deg),
            "el_grid_deg": list(config.el_grid_deg),
            "tx_gain_dbi": config.tx_gain_dbi,
            "rx_gain_dbi": config.rx_gain_dbi,
            "rx_hpbw_deg": config.rx_hpbw_deg,
            "noise_floor_dbm": config.noise_floor_dbm,
        },
        "samples": entries,
    }


def test_parse_minimal_grid():
    cfg = make_config(n_points=2, az=(0.0,), el=(0.0,))
    samples = np.array([[[1 + 1j, 2 - 1j]]])
    grid = parse_sweep_file(json.dumps(sweep_doc(cfg, samples, distance=7.8)))
    assert grid.samples.shape == (1, 1, 2)
    assert grid.case is Case.LOS
    assert grid.tx_rx_distance_m == 7.8
    np.testing.assert_array_equal(grid.samples, samples)


def test_parse_full_scale_scan():
    # 37 azimuths x 5 elevations x 6001 sweep points
    cfg = full_scale_config()
    rng = np.random.default_rng(7)
    samples = rng.standard_normal((37, 5, 6001)) + 1j * rng.standard_normal((37, 5, 6001))
    grid = parse_sweep_file(json.dumps(sweep_doc(cfg, samples, case="nlos")).encode())
    assert grid.samples.shape == (37, 5, 6001)
    assert grid.case is Case.NLOS
    np.testing.assert_allclose(grid.samples, samples, rtol=0, atol=0)


def test_parse_rejects_wrong_sample_length():
    cfg = make_config(n_points=4, az=(0.0,), el=(0.0,))
    doc = sweep_doc(cfg, np.zeros((1, 1, 4), dtype=complex))
    doc["samples"][0]["s21"] = [[0.0, 0.0]] * 3  # one point short
    with pytest.raises(ParseError, match="expected 4"):
        parse_sweep_file(json.dumps(doc))


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda d: d.update(schema="sweep/2"), "unknown sweep schema"),
        (lambda d: d.update(case="indoor"), "unknown case"),
        (lambda d: d.pop("position_id"), "missing required field"),
        (lambda d: d["config"].update(n_points=1), "invalid sweep config"),
        (lambda d: d["samples"].pop(), "sample entries"),
        (lambda d: d["samples"][0].update(az_deg=5.0), "not on the configured grid"),
        (lambda d: d["samples"][0]["s21"].__setitem__(0, [float("nan"), 0.0]), "non-finite"),
        (lambda d: d.update(tx_rx_distance_m=-3.0), "tx_rx_distance_m"),
    ],
)
def test_parse_rejects_malformed_documents(mutate, match):
    cfg = make_config(n_points=3, az=(0.0, 10.0), el=(0.0,))
    doc = sweep_doc(cfg, np.zeros((2, 1, 3), dtype=complex))
    mutate(doc)
    with pytest.raises(ParseError, match=match):
        parse_sweep_file(json.dumps(doc))


def test_parse_rejects_duplicate_direction():
    cfg = make_config(n_points=3, az=(0.0, 10.0), el=(0.0,))
    doc = sweep_doc(cfg, np.zeros((2, 1, 3), dtype=complex))
    doc["samples"][1]["az_deg"] = 0.0
    with pytest.raises(ParseError, match="duplicate"):
        parse_sweep_file(json.dumps(doc))


def test_parse_rejects_non_json():
    with pytest.raises(ParseError, match="not valid JSON"):
        parse_sweep_file(b"\x00\x01 not json")


def test_calibration_record_rejects_zero_magnitude():
    with pytest.raises(CalibrationError):
        CalibrationRecord(
            s_calib=np.array([1.0, 0.0, 1.0], dtype=complex),
            attenuator_db=-40.0, tx_gain_dbi=7.0, rx_gain_dbi=26.0,
        )


def test_calibrate_constant_collapse():
    # S_measure == S_calib: |H| = 10^((-40 - 7 - 26)/20) everywhere
    cfg = make_config(n_points=16, az=(0.0,), el=(0.0,))
    rng = np.random.default_rng(3)
    s_calib = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    cal = CalibrationRecord(s_calib=s_calib, attenuator_db=-40.0, tx_gain_dbi=7.0, rx_gain_dbi=26.0)
    raw = SweepGrid(config=cfg, position_id="p", samples=s_calib[None, None, :])
    out = calibrate(raw, cal)
    np.testing.assert_allclose(np.abs(out.samples), 10.0 ** ((-40.0 - 7.0 - 26.0) / 20.0), rtol=1e-12)


def test_calibrate_identity():
    cfg = make_config(n_points=8, az=(0.0,), el=(0.0,))
    cal = CalibrationRecord(
        s_calib=np.ones(8, dtype=complex), attenuator_db=0.0, tx_gain_dbi=0.0, rx_gain_dbi=0.0
    )
    rng = np.random.default_rng(5)
    samples = rng.standard_normal((1, 1, 8)) + 1j * rng.standard_normal((1, 1, 8))
    out = calibrate(SweepGrid(config=cfg, position_id="p", samples=samples), cal)
    np.testing.assert_array_equal(out.samples, samples)


def test_calibrate_inverts_forward_model():
    cfg = make_config(n_points=32)
    rng = np.random.default_rng(11)
    shape = (4, 3, 32)
    h_known = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    s_calib = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    s_calib += 3.0  # keep magnitudes away from zero
    cal = CalibrationRecord(s_calib=s_calib, attenuator_db=-40.0, tx_gain_dbi=7.0, rx_gain_dbi=26.0)
    truth = SweepGrid(config=cfg, position_id="p", samples=h_known)
    recovered = calibrate(apply_system_response(truth, cal), cal)
    np.testing.assert_allclose(recovered.samples, h_known, rtol=1e-12, atol=1e-15)


def test_calibrate_is_linear():
    cfg = make_config(n_points=16, az=(0.0, 10.0), el=(0.0,))
    rng = np.random.default_rng(13)
    shape = (2, 1, 16)
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    s_calib = rng.standard_normal(16) + 1j * rng.standard_normal(16) + 4.0
    cal = CalibrationRecord(s_calib=s_calib, attenuator_db=-12.0, tx_gain_dbi=3.0, rx_gain_dbi=9.0)
    a, b = 0.7 - 1.2j, -2.1 + 0.4j

    def cal_of(arr):
        return calibrate(SweepGrid(config=cfg, position_id="p", samples=arr), cal).samples

    np.testing.assert_allclose(cal_of(a * x + b * y), a * cal_of(x) + b * cal_of(y), rtol=1e-12)


def test_calibrate_degenerate_floor():
    cfg = make_config(n_points=4, az=(0.0,), el=(0.0,))
    s_calib = np.array([1.0, 1.0, 1e-20, 1.0], dtype=complex)
    cal = CalibrationRecord(s_calib=s_calib, attenuator_db=0.0, tx_gain_dbi=0.0, rx_gain_dbi=0.0)
    raw = SweepGrid(config=cfg, position_id="p", samples=np.ones((1, 1, 4), dtype=complex))
    with pytest.raises(CalibrationError, match="floor"):
        calibrate(raw, cal)
    # a looser floor admits the same record
    assert calibrate(raw, cal, floor=1e-21).samples.shape == (1, 1, 4)


def test_calibrate_point_count_mismatch():
    cfg = make_config(n_points=4, az=(0.0,), el=(0.0,))
    cal = CalibrationRecord(
        s_calib=np.ones(5, dtype=complex), attenuator_db=0.0, tx_gain_dbi=0.0, rx_gain_dbi=0.0
    )
    raw = SweepGrid(config=cfg, position_id="p", samples=np.ones((1, 1, 4), dtype=complex))
    with pytest.raises(CalibrationError, match="points"):
        calibrate(raw, cal)


def test_calib_file_roundtrip():
    rng = np.random.default_rng(17)
    s = rng.standard_normal(8) + 1j * rng.standard_normal(8) + 2.0
    cal = CalibrationRecord(s_calib=s, attenuator_db=-40.0, tx_gain_dbi=7.0, rx_gain_dbi=26.0)
    parsed = parse_calib_file(json.dumps(calib_to_dict(cal)), tx_gain_dbi=7.0, rx_gain_dbi=26.0)
    np.testing.assert_array_equal(parsed.s_calib, cal.s_calib)
    assert parsed.attenuator_db == -40.0


def test_calib_file_rejects_bad_schema():
    with pytest.raises(ParseError, match="unknown calibration schema"):
        parse_calib_file(json.dumps({"schema": "calib/9", "attenuator_db": 0, "s21": [[1, 0], [1, 0]]}),
                         tx_gain_dbi=0.0, rx_gain_dbi=0.0)


def test_sweep_file_roundtrip():
    cfg = make_config(n_points=6, az=(0.0, 10.0), el=(-10.0, 0.0))
    rng = np.random.default_rng(19)
    samples = rng.standard_normal((2, 2, 6)) + 1j * rng.standard_normal((2, 2, 6))
    grid = SweepGrid(config=cfg, position_id="rx9", samples=samples, case=Case.OLOS, tx_rx_distance_m=12.5)
    back = parse_sweep_file(json.dumps(sweep_to_dict(grid)))
    assert back.position_id == "rx9"
    assert back.case is Case.OLOS
    assert back.tx_rx_distance_m == 12.5
    np.testing.assert_array_equal(back.samples, grid.samples)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chankit import SPEED_OF_LIGHT, Case, Mpc, SweepGrid, SystemConfig, derive_resolution

from helpers import full_scale_config, make_config


def test_full_scale_resolutions():
    # 15 GHz sweep at 2.5 MHz spacing: 66.7 ps, ~2 cm, 400 ns, ~120 m
    r = derive_resolution(full_scale_config())
    assert r.time_res_s == pytest.approx(66.7e-12, rel=5e-3)
    assert r.space_res_m == pytest.approx(0.02, rel=5e-3)
    assert r.max_excess_delay_s == pytest.approx(400e-9, rel=1e-12)
    assert r.max_path_m == pytest.approx(120.0, rel=5e-3)


def test_unit_bandwidth_case():
    cfg = make_config(n_points=2, bandwidth=1.0, f_start=1.0)
    r = derive_resolution(cfg)
    assert r.time_res_s == 1.0
    assert r.max_excess_delay_s == 1.0


def test_30ghz_direct_evaluation():
    # oracle: the four closed forms evaluated by hand
    bandwidth, step = 30e9, 5e6
    n_points = int(bandwidth / step) + 1
    cfg = make_config(n_points=n_points, bandwidth=bandwidth)
    r = derive_resolution(cfg)
    assert r.time_res_s == pytest.approx(1.0 / 30e9, rel=1e-12)
    assert r.max_excess_delay_s == pytest.approx(200e-9, rel=1e-12)
    assert r.space_res_m == pytest.approx(SPEED_OF_LIGHT / 30e9, rel=1e-12)
    assert r.max_path_m == pytest.approx(SPEED_OF_LIGHT * 200e-9, rel=1e-12)


@given(
    bandwidth=st.floats(1e3, 1e12),
    n_minus_1=st.integers(1, 100_000),
)
@settings(max_examples=200)
def test_resolution_identities(bandwidth, n_minus_1):
    cfg = make_config(n_points=n_minus_1 + 1, bandwidth=bandwidth, f_start=1e9)
    r = derive_resolution(cfg)
    assert r.space_res_m / r.time_res_s == pytest.approx(SPEED_OF_LIGHT, rel=1e-14)
    assert r.max_path_m / r.max_excess_delay_s == pytest.approx(SPEED_OF_LIGHT, rel=1e-14)


def test_halving_step_doubles_max_delay():
    base = make_config(n_points=101, bandwidth=10e9)
    fine = make_config(n_points=201, bandwidth=10e9)  # same span, half the step
    assert derive_resolution(fine).max_excess_delay_s == 2.0 * derive_resolution(base).max_excess_delay_s


def test_doubling_bandwidth_halves_time_res():
    base = make_config(n_points=101, bandwidth=10e9)
    wide = make_config(n_points=101, bandwidth=20e9)
    assert derive_resolution(wide).time_res_s == derive_resolution(base).time_res_s / 2.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(f_start_hz=321e9, f_stop_hz=306e9),  # inverted band
        dict(f_start_hz=306e9, f_stop_hz=306e9),  # zero bandwidth
        dict(n_points=1),  # single sweep point
        dict(az_grid_deg=(0.0, 370.0)),
        dict(az_grid_deg=(10.0, 5.0)),
        dict(el_grid_deg=(-95.0, 0.0)),
        dict(el_grid_deg=()),
        dict(rx_hpbw_deg=0.0),
    ],
)
def test_invalid_configs_rejected(kwargs):
    base = dict(
        f_start_hz=306e9, f_stop_hz=321e9, n_points=11, tx_gain_dbi=7.0, rx_gain_dbi=26.0,
        rx_hpbw_deg=8.0, noise_floor_dbm=-180.0, az_grid_deg=(0.0, 10.0), el_grid_deg=(0.0,),
    )
    base.update(kwargs)
    with pytest.raises(ValueError):
        SystemConfig(**base)


def test_azimuth_grid_admits_full_rotation():
    # the 0..360 scan carries both endpoints: 37 azimuth values
    cfg = full_scale_config()
    assert len(cfg.az_grid_deg) == 37
    assert cfg.az_grid_deg[0] == 0.0 and cfg.az_grid_deg[-1] == 360.0


def test_sweep_grid_validation_and_immutability():
    cfg = make_config(n_points=8, az=(0.0, 10.0), el=(0.0,))
    good = np.zeros((2, 1, 8), dtype=complex)
    grid = SweepGrid(config=cfg, position_id="p", samples=good, case=Case.NLOS)
    with pytest.raises(ValueError):
        grid.samples[0, 0, 0] = 1.0  # read-only after construction
    with pytest.raises(ValueError):
        SweepGrid(config=cfg, position_id="p", samples=np.zeros((2, 1, 7), dtype=complex))
    bad = good.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        SweepGrid(config=cfg, position_id="p", samples=bad)
    with pytest.raises(ValueError):
        SweepGrid(config=cfg, position_id="p", samples=good, tx_rx_distance_m=0.0)


def test_mpc_validation():
    Mpc(toa_s=1e-9, az_deg=0.0, el_deg=0.0, power_db=-100.0)
    with pytest.raises(ValueError):
        Mpc(toa_s=-1e-9, az_deg=0.0, el_deg=0.0, power_db=-100.0)
    with pytest.raises(ValueError):
        Mpc(toa_s=1e-9, az_deg=0.0, el_deg=0.0, power_db=math.inf)

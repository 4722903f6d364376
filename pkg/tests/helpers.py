"""Shared construction helpers for the test suite."""

import numpy as np

from chankit import CirGrid, SystemConfig


def make_config(
    n_points=64,
    az=(0.0, 10.0, 20.0, 30.0),
    el=(-10.0, 0.0, 10.0),
    f_start=306e9,
    bandwidth=15e9,
    noise_floor=-180.0,
    hpbw=8.0,
):
    return SystemConfig(
        f_start_hz=f_start,
        f_stop_hz=f_start + bandwidth,
        n_points=n_points,
        tx_gain_dbi=7.0,
        rx_gain_dbi=26.0,
        rx_hpbw_deg=hpbw,
        noise_floor_dbm=noise_floor,
        az_grid_deg=tuple(float(a) for a in az),
        el_grid_deg=tuple(float(e) for e in el),
    )


def full_scale_config():
    """The full-scale scan: 37 azimuths, 5 elevations, 6001 points over 15 GHz."""
    return SystemConfig(
        f_start_hz=306e9,
        f_stop_hz=321e9,
        n_points=6001,
        tx_gain_dbi=7.0,
        rx_gain_dbi=26.0,
        rx_hpbw_deg=8.0,
        noise_floor_dbm=-180.0,
        az_grid_deg=tuple(float(a) for a in range(0, 361, 10)),
        el_grid_deg=(-20.0, -10.0, 0.0, 10.0, 20.0),
    )


def delay_step(config):
    return 1.0 / (config.n_points * config.freq_step_hz)


def make_cir(config, samples, position_id="test"):
    return CirGrid(
        config=config,
        position_id=position_id,
        samples=np.asarray(samples, dtype=complex),
        delay_step_s=delay_step(config),
    )


def impulse_cir(config, entries, position_id="test"):
    """CIR grid with complex impulses at the given (az_idx, el_idx, bin, amplitude)."""
    samples = np.zeros(
        (len(config.az_grid_deg), len(config.el_grid_deg), config.n_points), dtype=complex
    )
    for i, j, t, amp in entries:
        samples[i, j, t] += amp
    return make_cir(config, samples, position_id)

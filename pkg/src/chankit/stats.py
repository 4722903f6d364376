"""Path losses, propagation-model fits, and dispersion statistics.

Conventions: linear power is 10^(dB/10); every spread is computed with
linear-power weights. Delay spread is the power-weighted second central
moment of ToA. Angular spreads wrap offsets about the power-weighted
circular mean before taking the weighted RMS. Shadow-fading sigma uses
population normalization (divide by n), i.e. the RMS residual minimized
by the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, NoSignalError, RankDeficientError
from .model import SPEED_OF_LIGHT, Case, CirGrid

FORMULAS = {
    "pl_best": "PL_best [dB] = -10*log10(max_ij P_ij), P_ij = sum_t |h_ijt|^2",
    "pl_omni": "PL_omni [dB] = -10*log10(sum_ij P_ij), P_ij = sum_t |h_ijt|^2",
    "fspl": "FSPL(d, f) [dB] = 20*log10(4*pi*f*d/c)",
    "ci_model": "PL(d) = 10*PLE*log10(d/d0) + FSPL(d0) + X_sigmaSF",
    "alpha_beta_model": "PL(d) = 10*alpha*log10(d) + beta + X_sigmaSF",
    "rms_delay_spread": "DS = sqrt(sum_i P_i*(toa_i - mean)^2 / sum_i P_i), P linear",
    "angular_spread": (
        "AS = sqrt(sum_i P_i*wrap(angle_i - circmean)^2 / sum_i P_i), "
        "P linear, offsets wrapped to (-180, 180]"
    ),
    "cluster_arrival": "mean interval = mean of consecutive centroid-ToA differences",
}


def fspl(d_m: float, f_hz: float) -> float:
    """Free-space path loss 20*log10(4 pi f d / c) in dB."""
    if not d_m > 0.0:
        raise ValueError("distance must be positive")
    if not f_hz > 0.0:
        raise ValueError("frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * f_hz * d_m / SPEED_OF_LIGHT)


def path_losses(cir: CirGrid, mask: np.ndarray | None = None) -> tuple[float, float]:
    """Best-direction and omni-directional path loss of one position.

    Per direction P_ij = sum_t |h|^2, optionally restricted to surviving
    samples via ``mask``. Best uses the maximum over directions, omni the sum
    over all directions; both returned in dB loss (positive numbers for
    sub-unity power). Raises NoSignalError when nothing survives.
    """
    power = np.abs(cir.samples) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != power.shape:
            raise ValueError(f"mask shape {mask.shape} does not match grid {power.shape}")
        power = np.where(mask, power, 0.0)
    per_direction = power.sum(axis=2)
    total = float(per_direction.sum())
    if total <= 0.0:
        raise NoSignalError("no surviving power in any direction")
    pl_best = -10.0 * math.log10(float(per_direction.max()))
    pl_omni = -10.0 * math.log10(total)
    return pl_best, pl_omni


@dataclass(frozen=True)
class PathLossSample:
    """Measured path losses of one position at a known Tx-Rx distance."""

    position_id: str
    distance_m: float
    pl_best_db: float
    pl_omni_db: float
    case: Case

    def __post_init__(self):
        if not self.distance_m > 0.0:
            raise ValueError("distance_m must be positive")
        if self.pl_omni_db > self.pl_best_db + 1e-9:
            raise ValueError("pl_omni_db cannot exceed pl_best_db (sum dominates max)")


@dataclass(frozen=True)
class CiFit:
    """Close-in model fit: PL = 10*PLE*log10(d/d0) + FSPL(d0) + X_sigma."""

    ple: float
    sigma_sf_db: float
    d0_m: float
    f_hz: float

    def __post_init__(self):
        if self.sigma_sf_db < 0.0:
            raise ValueError("sigma_sf_db must be non-negative")
        if not self.d0_m > 0.0:
            raise ValueError("d0_m must be positive")

    def predict(self, d_m) -> np.ndarray:
        d = np.asarray(d_m, dtype=float)
        return 10.0 * self.ple * np.log10(d / self.d0_m) + fspl(self.d0_m, self.f_hz)


@dataclass(frozen=True)
class AlphaBetaFit:
    """Floating-intercept fit: PL = 10*alpha*log10(d) + beta + X_sigma."""

    alpha: float
    beta_db: float
    sigma_sf_db: float

    def __post_init__(self):
        if self.sigma_sf_db < 0.0:
            raise ValueError("sigma_sf_db must be non-negative")

    def predict(self, d_m) -> np.ndarray:
        return 10.0 * self.alpha * np.log10(np.asarray(d_m, dtype=float)) + self.beta_db


def _select_losses(samples, which: str) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    if which == "best":
        pl = np.array([s.pl_best_db for s in samples])
    elif which == "omni":
        pl = np.array([s.pl_omni_db for s in samples])
    else:
        raise ValueError("which must be 'best' or 'omni'")
    d = np.array([s.distance_m for s in samples])
    if d.size < 2 or np.unique(d).size < 2:
        raise RankDeficientError("need at least 2 samples at distinct distances")
    return d, pl


def fit_ci(samples, which: str, d0_m: float = 1.0, f_hz: float = 0.0) -> CiFit:
    """Fit the close-in model by minimizing the RMS shadow-fading residual.

    With x = 10*log10(d/d0) and y = PL - FSPL(d0), the minimizer is the
    through-origin slope PLE = sum(x*y)/sum(x^2); sigma is the population RMS
    of the residuals.
    """
    d, pl = _select_losses(samples, which)
    x = 10.0 * np.log10(d / d0_m)
    y = pl - fspl(d0_m, f_hz)
    ple = float((x * y).sum() / (x * x).sum())
    resid = y - ple * x
    return CiFit(
        ple=ple,
        sigma_sf_db=float(np.sqrt((resid**2).mean())),
        d0_m=d0_m,
        f_hz=f_hz,
    )


def fit_alpha_beta(samples, which: str) -> AlphaBetaFit:
    """Ordinary least squares of PL on (10*log10 d, 1)."""
    d, pl = _select_losses(samples, which)
    x = 10.0 * np.log10(d)
    design = np.column_stack([x, np.ones_like(x)])
    (alpha, beta), *_ = np.linalg.lstsq(design, pl, rcond=None)
    resid = pl - (alpha * x + beta)
    return AlphaBetaFit(
        alpha=float(alpha),
        beta_db=float(beta),
        sigma_sf_db=float(np.sqrt((resid**2).mean())),
    )


def _linear_weights(mpcs) -> np.ndarray:
    return np.array([10.0 ** (m.power_db / 10.0) for m in mpcs])


def rms_delay_spread(mpcs) -> float:
    """Power-weighted RMS delay spread in seconds."""
    mpcs = list(mpcs)
    if not mpcs:
        raise InsufficientDataError("delay spread needs at least one component")
    w = _linear_weights(mpcs)
    toa = np.array([m.toa_s for m in mpcs])
    total = w.sum()
    mean = (w * toa).sum() / total
    second = (w * (toa - mean) ** 2).sum() / total
    return float(np.sqrt(max(second, 0.0)))


def _wrap_deg(offset: np.ndarray) -> np.ndarray:
    """Wrap angle offsets to (-180, 180]."""
    return -((-np.asarray(offset) + 180.0) % 360.0 - 180.0)


def angular_spread(mpcs, axis: str = "azimuth") -> float:
    """Power-weighted circular angular spread in degrees.

    Offsets are wrapped about the power-weighted circular mean before the
    weighted RMS, so the result is invariant under a global rotation and
    under the 0/360 wrap of the input angles.
    """
    mpcs = list(mpcs)
    if not mpcs:
        raise InsufficientDataError("angular spread needs at least one component")
    if axis == "azimuth":
        angles = np.array([m.az_deg for m in mpcs])
    elif axis == "elevation":
        angles = np.array([m.el_deg for m in mpcs])
    else:
        raise ValueError("axis must be 'azimuth' or 'elevation'")
    w = _linear_weights(mpcs)
    rad = np.radians(angles)
    mean = math.degrees(math.atan2((w * np.sin(rad)).sum(), (w * np.cos(rad)).sum()))
    offsets = _wrap_deg(angles - mean)
    return float(np.sqrt((w * offsets**2).sum() / w.sum()))


def cluster_intervals(clusters) -> np.ndarray:
    """Consecutive differences of cluster centroid ToAs, sorted ascending."""
    toas = np.sort(np.array([c.centroid_toa_s for c in clusters]))
    return np.diff(toas)


def cluster_arrival_fit(clusters) -> float:
    """Maximum-likelihood exponential mean of inter-cluster intervals.

    Equals the arithmetic mean of consecutive centroid-ToA differences.
    """
    clusters = list(clusters)
    if len(clusters) < 2:
        raise InsufficientDataError("arrival fit needs at least 2 clusters")
    return float(cluster_intervals(clusters).mean())


@dataclass(frozen=True)
class DispersionStats:
    """Per-position dispersion summary."""

    ds_s: float
    asa_deg: float
    esa_deg: float
    n_clusters: int
    mean_cluster_interval_s: float | None

    def __post_init__(self):
        if self.ds_s < 0.0 or self.asa_deg < 0.0 or self.esa_deg < 0.0 or self.n_clusters < 0:
            raise ValueError("dispersion statistics must be non-negative")


def dispersion_stats(mpcs, clusters) -> DispersionStats:
    """Compute DS/ASA/ESA plus cluster-arrival summary for one position."""
    clusters = list(clusters)
    try:
        mean_interval = cluster_arrival_fit(clusters)
    except InsufficientDataError:
        mean_interval = None
    return DispersionStats(
        ds_s=rms_delay_spread(mpcs),
        asa_deg=angular_spread(mpcs, "azimuth"),
        esa_deg=angular_spread(mpcs, "elevation"),
        n_clusters=len(clusters),
        mean_cluster_interval_s=mean_interval,
    )

"""End-to-end per-position analysis and campaign-level report assembly.

A report is self-describing: it embeds the run manifest (inputs with content
hashes plus every numeric parameter) and the formula definitions used for the
statistics, so identical manifests and inputs always reproduce it byte for
byte.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cir import Pdap, compute_pdap, ctf_to_cir
from .cluster import (
    Cluster,
    DEFAULT_EPS,
    DEFAULT_MIN_PTS,
    DEFAULT_XI,
    DbscanResult,
    McdParams,
    dbscan,
    summarize_clusters,
)
from .errors import NoSignalError
from .extract import ExtractionResult, ThresholdPolicy, extract_mpcs
from .ingest import CalibrationRecord, calibrate
from .model import Case, Mpc, SweepGrid
from .stats import (
    FORMULAS,
    DispersionStats,
    PathLossSample,
    cluster_intervals,
    dispersion_stats,
    fit_alpha_beta,
    fit_ci,
    path_losses,
)

REPORT_SCHEMA = "report/1"


@dataclass(frozen=True)
class AnalysisOptions:
    """Every knob of the analysis pipeline, echoed verbatim into reports."""

    policy: ThresholdPolicy = field(default_factory=ThresholdPolicy.relative)
    eps: float = DEFAULT_EPS
    min_pts: int = DEFAULT_MIN_PTS
    xi: float = DEFAULT_XI
    d0_m: float = 1.0
    f_hz: float | None = None  # None: use the sweep's center frequency
    window: str = "rect"

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.to_dict(),
            "eps": self.eps,
            "min_pts": self.min_pts,
            "xi": self.xi,
            "d0_m": self.d0_m,
            "f_hz": self.f_hz,
            "window": self.window,
        }


def build_manifest(input_files, options: AnalysisOptions, seed: int | None = None) -> dict:
    """Run manifest: input content hashes plus the full parameter block."""
    inputs = []
    for path in input_files:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        inputs.append({"path": str(path), "sha256": digest})
    inputs.sort(key=lambda e: e["path"])
    return {
        "toolkit_version": __version__,
        "inputs": inputs,
        "options": options.to_dict(),
        "seed": seed,
    }


@dataclass(eq=False)
class PositionResult:
    """Everything the pipeline derives from one position's sweep."""

    position_id: str
    case: Case
    distance_m: float | None
    threshold_db: float
    pl_best_db: float
    pl_omni_db: float
    dispersion: DispersionStats
    mpcs: tuple[Mpc, ...]
    clusters: tuple[Cluster, ...]
    clustering: DbscanResult
    extraction: ExtractionResult
    pdap: Pdap | None = None


def analyze_position(
    sweep: SweepGrid,
    cal: CalibrationRecord | None,
    options: AnalysisOptions,
    keep_pdap: bool = False,
) -> PositionResult:
    """Run calibrate -> transform -> extract -> cluster -> statistics.

    Raises NoSignalError when no sample survives thresholding.
    """
    grid = calibrate(sweep, cal) if cal is not None else sweep
    cir = ctf_to_cir(grid, window=options.window)
    extraction = extract_mpcs(cir, options.policy)
    if extraction.is_empty:
        raise NoSignalError(f"position '{sweep.position_id}': nothing above the threshold")
    pl_best, pl_omni = path_losses(cir, extraction.mask)
    mpcs = list(extraction.mpcs)
    clustering = dbscan(
        mpcs, eps=options.eps, min_pts=options.min_pts,
        params=McdParams.from_mpcs(mpcs, options.xi),
    )
    clusters = summarize_clusters(mpcs, clustering.labels)
    return PositionResult(
        position_id=sweep.position_id,
        case=sweep.case,
        distance_m=sweep.tx_rx_distance_m,
        threshold_db=extraction.threshold_db,
        pl_best_db=pl_best,
        pl_omni_db=pl_omni,
        dispersion=dispersion_stats(mpcs, clusters),
        mpcs=extraction.mpcs,
        clusters=clusters,
        clustering=clustering,
        extraction=extraction,
        pdap=compute_pdap(cir, "max") if keep_pdap else None,
    )


def path_loss_samples(results) -> list[PathLossSample]:
    """Path-loss samples of every position with a known distance."""
    return [
        PathLossSample(
            position_id=r.position_id,
            distance_m=r.distance_m,
            pl_best_db=r.pl_best_db,
            pl_omni_db=r.pl_omni_db,
            case=r.case,
        )
        for r in results
        if r.distance_m is not None
    ]


def _ci_fit_dict(fit) -> dict:
    return {"ple": fit.ple, "sigma_sf_db": fit.sigma_sf_db, "d0_m": fit.d0_m, "f_hz": fit.f_hz}


def _ab_fit_dict(fit) -> dict:
    return {"alpha": fit.alpha, "beta_db": fit.beta_db, "sigma_sf_db": fit.sigma_sf_db}


def campaign_fits(results, options: AnalysisOptions, f_hz: float) -> dict:
    """Per-case model fits. Cases with fewer than two distance-bearing
    positions yield nulls; two or more at one single distance raise
    RankDeficientError (deliberately fatal: the request cannot be met)."""
    samples = path_loss_samples(results)
    fits = {}
    for case in Case:
        case_samples = [s for s in samples if s.case == case]
        if not case_samples:
            continue
        entry = {"n_samples": len(case_samples)}
        if len(case_samples) >= 2:
            for which in ("best", "omni"):
                ci = fit_ci(case_samples, which, d0_m=options.d0_m, f_hz=f_hz)
                ab = fit_alpha_beta(case_samples, which)
                entry[f"ci_fit_{which}"] = _ci_fit_dict(ci)
                entry[f"alpha_beta_{which}"] = _ab_fit_dict(ab)
        else:
            for which in ("best", "omni"):
                entry[f"ci_fit_{which}"] = None
                entry[f"alpha_beta_{which}"] = None
        fits[case.value] = entry
    return fits


def pooled_intervals_s(results, case: Case) -> np.ndarray:
    """All inter-cluster intervals of one case, pooled across positions."""
    chunks = [cluster_intervals(r.clusters) for r in results if r.case == case and len(r.clusters) >= 2]
    if not chunks:
        return np.empty(0)
    return np.concatenate(chunks)


def _position_dict(r: PositionResult) -> dict:
    d = r.dispersion
    intervals = cluster_intervals(r.clusters)
    return {
        "position_id": r.position_id,
        "case": r.case.value,
        "distance_m": r.distance_m,
        "threshold_db": r.threshold_db,
        "pl_best_db": r.pl_best_db,
        "pl_omni_db": r.pl_omni_db,
        "ds_ns": d.ds_s * 1e9,
        "asa_deg": d.asa_deg,
        "esa_deg": d.esa_deg,
        "n_mpcs": len(r.mpcs),
        "n_clusters": d.n_clusters,
        "cluster_intervals_ns": [v * 1e9 for v in intervals],
        "mean_cluster_interval_ns": (
            d.mean_cluster_interval_s * 1e9 if d.mean_cluster_interval_s is not None else None
        ),
    }


def build_report(results, options: AnalysisOptions, manifest: dict, f_hz: float) -> dict:
    """Assemble the campaign report (schema report/1), positions sorted by id."""
    ordered = sorted(results, key=lambda r: r.position_id)
    campaign = {"f_hz": f_hz, "fits": campaign_fits(ordered, options, f_hz)}
    for case in Case:
        pooled = pooled_intervals_s(ordered, case)
        campaign[f"exp_mean_{case.value}_ns"] = float(pooled.mean()) * 1e9 if pooled.size else None
    return {
        "schema": REPORT_SCHEMA,
        "manifest": manifest,
        "definitions": dict(FORMULAS),
        "positions": [_position_dict(r) for r in ordered],
        "campaign": campaign,
    }


REPORT_CSV_COLUMNS = [
    "position_id", "case", "distance_m", "threshold_db", "pl_best_db", "pl_omni_db",
    "ds_ns", "asa_deg", "esa_deg", "n_mpcs", "n_clusters", "mean_cluster_interval_ns",
]


def write_report_csv(results, fp) -> None:
    """Delimited per-position summary, one row per position, sorted by id."""
    writer = csv.writer(fp)
    writer.writerow(REPORT_CSV_COLUMNS)
    for r in sorted(results, key=lambda x: x.position_id):
        row = _position_dict(r)
        writer.writerow(["" if row[c] is None else row[c] for c in REPORT_CSV_COLUMNS])

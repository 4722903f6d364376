"""Post-processing and statistical characterization of wideband directional
channel-sounding data: raw frequency sweeps to multipath components, clusters,
path-loss fits, and dispersion statistics, plus a synthetic forward model for
oracle-grade validation."""

__version__ = "0.1.0"

from .errors import (
    CalibrationError,
    ChankitError,
    InsufficientDataError,
    NoSignalError,
    ParseError,
    RankDeficientError,
)
from .model import (
    SPEED_OF_LIGHT,
    Case,
    CirGrid,
    Mpc,
    ResolutionSummary,
    SweepGrid,
    SystemConfig,
    derive_resolution,
)
from .ingest import (
    CalibrationRecord,
    apply_system_response,
    calibrate,
    parse_calib_file,
    parse_sweep_file,
)
from .cir import Pdap, compute_pdap, ctf_to_cir, direction_power, write_pdap_csv
from .extract import ExtractionResult, ThresholdPolicy, extract_mpcs, noise_threshold
from .cluster import (
    Cluster,
    DbscanResult,
    McdParams,
    brute_force_reference,
    dbscan,
    mcd,
    mcd_matrix,
    summarize_clusters,
)
from .stats import (
    AlphaBetaFit,
    CiFit,
    DispersionStats,
    PathLossSample,
    angular_spread,
    cluster_arrival_fit,
    fit_alpha_beta,
    fit_ci,
    fspl,
    path_losses,
    rms_delay_spread,
)
from .synth import (
    AntennaModel,
    GroundTruthPath,
    RoundtripReport,
    StatGenParams,
    draw_cluster_onsets,
    evaluate_retrieval,
    generate_statistical,
    render_sweep,
    roundtrip_check,
)
from .pipeline import AnalysisOptions, analyze_position, build_report

__all__ = [name for name in dir() if not name.startswith("_")]

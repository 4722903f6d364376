"""Synthetic forward model: ground-truth paths, directional rendering through
an antenna pattern, a statistical path generator, and the round-trip oracle.

Randomness comes exclusively from numpy's counter-based Philox generator so
every statistical artifact is reproducible from its integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cir import ctf_to_cir
from .cluster import DEFAULT_EPS, DEFAULT_MIN_PTS, DEFAULT_XI, McdParams, dbscan, mcd, summarize_clusters
from .errors import ParseError
from .extract import ThresholdPolicy, extract_mpcs
from .model import Case, CirGrid, Mpc, SweepGrid, SystemConfig
from .stats import fspl

TRUTH_SCHEMA = "truth/1"


@dataclass(frozen=True)
class GroundTruthPath:
    """One true propagation path, with continuous (not grid-snapped) angles."""

    toa_s: float
    az_deg: float
    el_deg: float
    amplitude_linear: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if not self.amplitude_linear > 0.0:
            raise ValueError("amplitude_linear must be positive")
        if not (math.isfinite(self.toa_s) and self.toa_s >= 0.0):
            raise ValueError("toa_s must be finite and non-negative")

    @property
    def amp_db(self) -> float:
        return 20.0 * math.log10(self.amplitude_linear)


@dataclass(frozen=True)
class AntennaModel:
    """Gaussian main lobe with a hard sidelobe floor.

    The power gain is exp(-4 ln2 (offset/HPBW)^2), i.e. -3 dB at half the
    beamwidth, floored at ``sidelobe_floor_db``.
    """

    hpbw_deg: float
    sidelobe_floor_db: float = -40.0

    def __post_init__(self):
        if not self.hpbw_deg > 0.0:
            raise ValueError("hpbw_deg must be positive")

    def power_gain(self, offset_deg) -> np.ndarray:
        offset = np.asarray(offset_deg, dtype=float)
        g = np.exp(-4.0 * math.log(2.0) * (offset / self.hpbw_deg) ** 2)
        return np.maximum(g, 10.0 ** (self.sidelobe_floor_db / 10.0))

    def amplitude_gain(self, offset_deg) -> np.ndarray:
        return np.sqrt(self.power_gain(offset_deg))


def great_circle_deg(az1_deg, el1_deg, az2_deg, el2_deg) -> np.ndarray:
    """Great-circle angle between two directions, in degrees."""
    az1, el1, az2, el2 = (np.radians(np.asarray(a, dtype=float)) for a in (az1_deg, el1_deg, az2_deg, el2_deg))
    cosang = np.sin(el1) * np.sin(el2) + np.cos(el1) * np.cos(el2) * np.cos(az1 - az2)
    return np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))


def render_sweep(
    paths,
    config: SystemConfig,
    pattern: AntennaModel | None = None,
    *,
    position_id: str = "synthetic",
    case: Case = Case.LOS,
    tx_rx_distance_m: float | None = None,
    noise_seed: int | None = None,
) -> SweepGrid:
    """Render ground-truth paths into a directional transfer-function grid.

    Per pointing direction, H(f) = sum_k a_k g(offset_k) e^{j phase_k}
    e^{-j 2 pi f toa_k}, with g the Rx amplitude pattern evaluated at the
    great-circle angle between pointing and arrival. The Tx is treated as
    isotropic over the scan sector. Rendering is deterministic; when
    ``noise_seed`` is given, complex Gaussian noise at the configured noise
    floor is added from a per-direction Philox stream, so parallel and serial
    renders produce identical grids.
    """
    if pattern is None:
        pattern = AntennaModel(hpbw_deg=config.rx_hpbw_deg)
    paths = list(paths)
    max_delay = 1.0 / config.freq_step_hz
    for p in paths:
        if p.toa_s >= max_delay:
            raise ValueError(f"path ToA {p.toa_s} exceeds the maximum excess delay {max_delay}")

    az = np.asarray(config.az_grid_deg)
    el = np.asarray(config.el_grid_deg)
    freqs = config.frequencies_hz()
    n_az, n_el = az.size, el.size
    h = np.zeros((n_az, n_el, config.n_points), dtype=complex)
    if paths:
        az_grid, el_grid = np.meshgrid(az, el, indexing="ij")
        gains = np.stack(
            [
                p.amplitude_linear * pattern.amplitude_gain(great_circle_deg(az_grid, el_grid, p.az_deg, p.el_deg))
                for p in paths
            ]
        )
        phasors = np.stack(
            [np.exp(1j * p.phase_rad) * np.exp(-2j * np.pi * freqs * p.toa_s) for p in paths]
        )
        h = np.einsum("pae,pk->aek", gains, phasors)

    if noise_seed is not None:
        sigma = math.sqrt(10.0 ** (config.noise_floor_dbm / 10.0))
        h = np.array(h)
        for flat in range(n_az * n_el):
            i, j = divmod(flat, n_el)
            rng = np.random.Generator(np.random.Philox(key=np.array([noise_seed, flat], dtype=np.uint64)))
            noise = rng.standard_normal(config.n_points) + 1j * rng.standard_normal(config.n_points)
            h[i, j] += noise * (sigma / math.sqrt(2.0))

    return SweepGrid(
        config=config,
        position_id=position_id,
        samples=h,
        case=case,
        tx_rx_distance_m=tx_rx_distance_m,
    )


@dataclass(frozen=True)
class StatGenParams:
    """Parameters of the statistical path generator."""

    mean_cluster_interval_s: float
    n_clusters_mean: float
    intra_cluster_count_mean: float
    intra_toa_jitter_s: float
    intra_angle_jitter_deg: float
    ple: float
    seed: int

    def __post_init__(self):
        for name in ("mean_cluster_interval_s", "n_clusters_mean", "intra_cluster_count_mean"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.intra_toa_jitter_s < 0.0 or self.intra_angle_jitter_deg < 0.0:
            raise ValueError("jitters must be non-negative")
        if not self.ple > 0.0:
            raise ValueError("ple must be positive")


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(int(seed_or_rng)))


def draw_cluster_onsets(mean_interval_s: float, n: int, seed_or_rng) -> np.ndarray:
    """Arrival times of a Poisson process: cumulative sums of exponential gaps."""
    if not mean_interval_s > 0.0:
        raise ValueError("mean_interval_s must be positive")
    rng = _as_rng(seed_or_rng)
    return rng.exponential(mean_interval_s, int(n)).cumsum()


def generate_statistical(
    params: StatGenParams,
    distance_m: float,
    f_hz: float,
    *,
    max_toa_s: float | None = None,
) -> list[GroundTruthPath]:
    """Draw a random channel: Poisson cluster onsets, jittered intra-cluster
    paths, and total power pinned to the close-in model at ``distance_m``.

    The total linear power of the returned paths equals
    10^(-(FSPL(1 m, f) + 10 PLE log10 d)/10) exactly. Identical seeds give
    identical outputs.
    """
    if not distance_m > 0.0:
        raise ValueError("distance_m must be positive")
    rng = _as_rng(params.seed)
    n_clusters = max(1, int(rng.poisson(params.n_clusters_mean)))
    onsets = draw_cluster_onsets(params.mean_cluster_interval_s, n_clusters, rng)

    raw = []  # (toa, az, el, relative linear power, phase)
    for onset in onsets:
        count = max(1, int(rng.poisson(params.intra_cluster_count_mean)))
        center_az = rng.uniform(0.0, 360.0)
        center_el = rng.uniform(-10.0, 10.0)
        for k in range(count):
            if k == 0:
                toa, path_az, path_el = float(onset), center_az, center_el
            else:
                toa = float(onset + rng.exponential(params.intra_toa_jitter_s))
                path_az = (center_az + rng.normal(0.0, params.intra_angle_jitter_deg)) % 360.0
                path_el = float(np.clip(center_el + rng.normal(0.0, params.intra_angle_jitter_deg), -90.0, 90.0))
            raw.append((toa, path_az, path_el, rng.exponential(1.0), rng.uniform(0.0, 2.0 * math.pi)))

    if max_toa_s is not None:
        raw = [r for r in raw if r[0] < max_toa_s]
        if not raw:
            raise ValueError("no generated path below max_toa_s; shorten the intervals")

    pl_db = fspl(1.0, f_hz) + 10.0 * params.ple * math.log10(distance_m)
    target_power = 10.0 ** (-pl_db / 10.0)
    total_rel = sum(r[3] for r in raw)
    return [
        GroundTruthPath(
            toa_s=toa,
            az_deg=az,
            el_deg=el,
            amplitude_linear=math.sqrt(rel / total_rel * target_power),
            phase_rad=phase,
        )
        for toa, az, el, rel, phase in raw
    ]


@dataclass(frozen=True)
class MatchedPath:
    """One greedy truth-to-cluster match with its recovery errors."""

    truth_index: int
    cluster_id: int
    mcd: float
    toa_error_s: float
    az_error_deg: float
    el_error_deg: float
    power_error_db: float


@dataclass(frozen=True)
class RoundtripReport:
    """Outcome of matching extracted clusters against ground truth."""

    n_truth: int
    n_clusters: int
    matched: tuple[MatchedPath, ...]
    missed_truth: tuple[int, ...]
    spurious_clusters: tuple[int, ...]

    @property
    def n_matched(self) -> int:
        return len(self.matched)

    def to_dict(self) -> dict:
        return {
            "n_truth": self.n_truth,
            "n_clusters": self.n_clusters,
            "n_matched": self.n_matched,
            "matched": [
                {
                    "truth_index": m.truth_index,
                    "cluster_id": m.cluster_id,
                    "mcd": m.mcd,
                    "toa_error_ns": m.toa_error_s * 1e9,
                    "az_error_deg": m.az_error_deg,
                    "el_error_deg": m.el_error_deg,
                    "power_error_db": m.power_error_db,
                }
                for m in self.matched
            ],
            "missed_truth": list(self.missed_truth),
            "spurious_clusters": list(self.spurious_clusters),
        }


def _wrap_angle_deg(x: float) -> float:
    return -((-x + 180.0) % 360.0 - 180.0)


def evaluate_retrieval(
    paths,
    cir: CirGrid,
    *,
    policy: ThresholdPolicy | None = None,
    eps: float = DEFAULT_EPS,
    min_pts: int = DEFAULT_MIN_PTS,
    xi: float = DEFAULT_XI,
) -> RoundtripReport:
    """Extract and cluster a CIR grid, then greedily match clusters to truth.

    Each cluster is represented by its strongest member; matching removes the
    globally closest (truth, cluster) pair under the component distance until
    one side runs out. Leftover truths are missed, leftover clusters spurious.
    """
    paths = list(paths)
    extraction = extract_mpcs(cir, policy or ThresholdPolicy.relative())
    mpcs = list(extraction.mpcs)
    if mpcs:
        result = dbscan(mpcs, eps=eps, min_pts=min_pts, params=McdParams.from_mpcs(mpcs, xi))
        clusters = summarize_clusters(mpcs, result.labels)
    else:
        clusters = ()

    reps = []
    for c in clusters:
        strongest = max(c.member_indices, key=lambda i: mpcs[i].power_db)
        reps.append((c, mpcs[strongest]))

    truth_mpcs = [
        Mpc(toa_s=p.toa_s, az_deg=p.az_deg % 360.0, el_deg=p.el_deg, power_db=p.amp_db)
        for p in paths
    ]
    all_toas = [m.toa_s for m in truth_mpcs] + [r.toa_s for _, r in reps]
    match_params = McdParams(xi=xi, tau_max_s=max(all_toas, default=0.0))

    remaining_truth = set(range(len(truth_mpcs)))
    remaining_cluster = set(range(len(reps)))
    matches = []
    while remaining_truth and remaining_cluster:
        best = None
        for t in sorted(remaining_truth):
            for c in sorted(remaining_cluster):
                d = mcd(truth_mpcs[t], reps[c][1], match_params)
                if best is None or d < best[0]:
                    best = (d, t, c)
        d, t, c = best
        cluster, rep = reps[c]
        truth = truth_mpcs[t]
        matches.append(
            MatchedPath(
                truth_index=t,
                cluster_id=cluster.id,
                mcd=d,
                toa_error_s=rep.toa_s - truth.toa_s,
                az_error_deg=_wrap_angle_deg(rep.az_deg - truth.az_deg),
                el_error_deg=rep.el_deg - truth.el_deg,
                power_error_db=rep.power_db - truth.power_db,
            )
        )
        remaining_truth.discard(t)
        remaining_cluster.discard(c)

    return RoundtripReport(
        n_truth=len(truth_mpcs),
        n_clusters=len(reps),
        matched=tuple(matches),
        missed_truth=tuple(sorted(remaining_truth)),
        spurious_clusters=tuple(sorted(reps[c][0].id for c in remaining_cluster)),
    )


def roundtrip_check(
    paths,
    config: SystemConfig,
    *,
    pattern: AntennaModel | None = None,
    policy: ThresholdPolicy | None = None,
    eps: float = DEFAULT_EPS,
    min_pts: int = DEFAULT_MIN_PTS,
    xi: float = DEFAULT_XI,
    window: str = "rect",
) -> RoundtripReport:
    """Render truth paths, run the extraction pipeline, and score recovery."""
    sweep = render_sweep(paths, config, pattern)
    cir = ctf_to_cir(sweep, window=window)
    return evaluate_retrieval(paths, cir, policy=policy, eps=eps, min_pts=min_pts, xi=xi)


def truth_to_dict(paths) -> dict:
    """JSON-ready ground-truth path list (schema truth/1)."""
    return {
        "schema": TRUTH_SCHEMA,
        "paths": [
            {
                "toa_ns": p.toa_s * 1e9,
                "az_deg": p.az_deg,
                "el_deg": p.el_deg,
                "amp_db": p.amp_db,
                "phase_rad": p.phase_rad,
            }
            for p in paths
        ],
    }


def parse_truth_file(data) -> list[GroundTruthPath]:
    """Parse a ground-truth document back into paths."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if doc.get("schema") != TRUTH_SCHEMA:
        raise ParseError(f"unknown truth schema '{doc.get('schema')}'")
    try:
        return [
            GroundTruthPath(
                toa_s=float(p["toa_ns"]) * 1e-9,
                az_deg=float(p["az_deg"]),
                el_deg=float(p["el_deg"]),
                amplitude_linear=10.0 ** (float(p["amp_db"]) / 20.0),
                phase_rad=float(p.get("phase_rad", 0.0)),
            )
            for p in doc["paths"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid truth entry: {exc}") from exc

"""Joint angular/temporal distance between multipath components and
density-based clustering under that metric.

The distance embeds each component into R^4: the unit arrival-direction
vector (3 spatial coordinates) concatenated with the ToA scaled by
sqrt(weight)/tau_max (1 temporal coordinate). The metric is the Euclidean
norm of coordinate differences, so symmetry and the triangle inequality are
inherited rather than asserted.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .model import Mpc

CLUSTER_SCHEMA = "cluster/1"

DEFAULT_XI = 4.0
DEFAULT_EPS = 0.2
DEFAULT_MIN_PTS = 5

NOISE_LABEL = -1
_UNVISITED = -2


@dataclass(frozen=True)
class McdParams:
    """Temporal weight and the ToA normalizer of the component set.

    ``tau_max_s`` must be the maximum ToA over the set being clustered;
    recompute it per set, never reuse it across sets.
    """

    xi: float = DEFAULT_XI
    tau_max_s: float = 0.0

    def __post_init__(self):
        if not self.xi > 0.0:
            raise ValueError("xi must be positive")
        if self.tau_max_s < 0.0:
            raise ValueError("tau_max_s must be non-negative")

    @classmethod
    def from_mpcs(cls, mpcs, xi: float = DEFAULT_XI) -> "McdParams":
        tau_max = max((m.toa_s for m in mpcs), default=0.0)
        return cls(xi=xi, tau_max_s=tau_max)


def direction_vector(az_deg, el_deg) -> np.ndarray:
    """Unit arrival-direction vector (cos el cos az, cos el sin az, sin el)."""
    az = np.radians(np.asarray(az_deg, dtype=float))
    el = np.radians(np.asarray(el_deg, dtype=float))
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def mcd(a: Mpc, b: Mpc, params: McdParams) -> float:
    """Multipath component distance sqrt(d^2 + xi * d_tau^2)."""
    d2 = float(((direction_vector(a.az_deg, a.el_deg) - direction_vector(b.az_deg, b.el_deg)) ** 2).sum())
    dt = abs(a.toa_s - b.toa_s)
    if dt == 0.0:
        return math.sqrt(d2)
    if params.tau_max_s == 0.0:
        raise ValueError("tau_max_s is 0 but ToAs differ; normalizer degenerate")
    d_tau = dt / params.tau_max_s
    return math.sqrt(d2 + params.xi * d_tau * d_tau)


def _embed(mpcs, params: McdParams) -> np.ndarray:
    """R^4 coordinates whose Euclidean distance equals the component distance."""
    n = len(mpcs)
    coords = np.zeros((n, 4))
    if n == 0:
        return coords
    coords[:, :3] = direction_vector([m.az_deg for m in mpcs], [m.el_deg for m in mpcs])
    toas = np.array([m.toa_s for m in mpcs])
    if params.tau_max_s > 0.0:
        coords[:, 3] = math.sqrt(params.xi) * toas / params.tau_max_s
    elif np.ptp(toas) > 0.0:
        raise ValueError("tau_max_s is 0 but ToAs differ; normalizer degenerate")
    return coords


def mcd_matrix(mpcs, params: McdParams | None = None) -> np.ndarray:
    """Pairwise distance matrix, row by row."""
    if params is None:
        params = McdParams.from_mpcs(mpcs)
    coords = _embed(mpcs, params)
    n = coords.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        out[i] = np.sqrt(((coords - coords[i]) ** 2).sum(axis=1))
    return out


@dataclass(frozen=True, eq=False)
class DbscanResult:
    """Cluster labels in input order; NOISE_LABEL (-1) marks noise points."""

    labels: np.ndarray
    core_mask: np.ndarray
    params: McdParams
    eps: float
    min_pts: int

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size and self.labels.max() >= 0 else 0

    @property
    def noise_indices(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.labels == NOISE_LABEL))


def _scan_order(mpcs) -> np.ndarray:
    toa = np.array([m.toa_s for m in mpcs])
    az = np.array([m.az_deg for m in mpcs])
    el = np.array([m.el_deg for m in mpcs])
    return np.lexsort((el, az, toa))


def dbscan(mpcs, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS,
           params: McdParams | None = None) -> DbscanResult:
    """Density-based clustering under the component distance.

    Core points have >= min_pts neighbors within the closed ball of radius
    eps, counting themselves. Clusters grow from core points in a fixed scan
    order (ToA, then azimuth, then elevation), and border points join the
    first cluster that claims them under that order, which makes the labeling
    independent of the input permutation. Remaining points are noise.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    mpcs = list(mpcs)
    if params is None:
        params = McdParams.from_mpcs(mpcs)
    n = len(mpcs)
    if n == 0:
        return DbscanResult(
            labels=np.empty(0, dtype=int), core_mask=np.empty(0, dtype=bool),
            params=params, eps=eps, min_pts=min_pts,
        )

    order = _scan_order(mpcs)
    coords = _embed(mpcs, params)[order]
    eps2 = eps * eps

    def neighbors(i: int) -> np.ndarray:
        return np.flatnonzero(((coords - coords[i]) ** 2).sum(axis=1) <= eps2)

    labels = np.full(n, _UNVISITED, dtype=int)
    core = np.zeros(n, dtype=bool)
    cluster_id = -1
    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        nbrs = neighbors(i)
        if nbrs.size < min_pts:
            labels[i] = NOISE_LABEL
            continue
        core[i] = True
        cluster_id += 1
        labels[i] = cluster_id
        # expansion frontier ordered by scan rank so claims are deterministic
        seen = set(int(q) for q in nbrs)
        frontier = [int(q) for q in nbrs if q != i]
        heapq.heapify(frontier)
        while frontier:
            j = heapq.heappop(frontier)
            if labels[j] == NOISE_LABEL:
                labels[j] = cluster_id  # noise point becomes a border member
                continue
            if labels[j] != _UNVISITED:
                continue
            labels[j] = cluster_id
            nbrs_j = neighbors(j)
            if nbrs_j.size >= min_pts:
                core[j] = True
                for q in nbrs_j:
                    q = int(q)
                    if q not in seen:
                        seen.add(q)
                        heapq.heappush(frontier, q)

    out_labels = np.empty(n, dtype=int)
    out_core = np.empty(n, dtype=bool)
    out_labels[order] = labels
    out_core[order] = core
    return DbscanResult(labels=out_labels, core_mask=out_core, params=params, eps=eps, min_pts=min_pts)


@dataclass(frozen=True, eq=False)
class BruteForceReference:
    """Independent clustering oracle: connected components over core points."""

    core_mask: np.ndarray
    core_components: tuple[frozenset, ...]  # partition of core indices
    noise_mask: np.ndarray  # points with no core neighbor at all
    neighbor_matrix: np.ndarray  # closed-ball adjacency, self-inclusive


def brute_force_reference(mpcs, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS,
                          params: McdParams | None = None) -> BruteForceReference:
    """Reference clustering from the full distance matrix.

    Core points are found by counting closed-ball neighbors; their partition
    is the set of connected components of the core-core adjacency graph.
    Points (core or not) with no core neighbor are noise. Border assignment
    is ambiguous by construction and deliberately not resolved here.
    """
    mpcs = list(mpcs)
    if params is None:
        params = McdParams.from_mpcs(mpcs)
    n = len(mpcs)
    dist = mcd_matrix(mpcs, params)
    adjacent = dist <= eps
    core = adjacent.sum(axis=1) >= min_pts
    noise = ~(adjacent[:, core].any(axis=1)) if core.any() else np.ones(n, dtype=bool)

    components = []
    unvisited = set(int(i) for i in np.flatnonzero(core))
    while unvisited:
        start = min(unvisited)
        stack = [start]
        comp = set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            for w in np.flatnonzero(adjacent[v] & core):
                w = int(w)
                if w in unvisited and w not in comp:
                    stack.append(w)
        unvisited -= comp
        components.append(frozenset(comp))
    return BruteForceReference(
        core_mask=core,
        core_components=tuple(components),
        noise_mask=noise,
        neighbor_matrix=adjacent,
    )


@dataclass(frozen=True)
class Cluster:
    """A labeled group of components with aggregate power and centroid."""

    id: int
    member_indices: tuple[int, ...]
    total_power_db: float
    centroid_toa_s: float
    centroid_az_deg: float
    centroid_el_deg: float
    n_members: int

    def __post_init__(self):
        if not self.member_indices:
            raise ValueError("a cluster needs at least one member")
        if self.n_members != len(self.member_indices):
            raise ValueError("n_members does not match member_indices")


def _circular_mean_deg(angles_deg: np.ndarray, weights: np.ndarray) -> float:
    rad = np.radians(angles_deg)
    s = float((weights * np.sin(rad)).sum())
    c = float((weights * np.cos(rad)).sum())
    return math.degrees(math.atan2(s, c))


def summarize_clusters(mpcs, labels) -> tuple[Cluster, ...]:
    """Aggregate labeled components: linear power sum, power-weighted centroid
    ToA, and power-weighted circular-mean centroid angles."""
    mpcs = list(mpcs)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (len(mpcs),):
        raise ValueError("labels must have one entry per component")
    clusters = []
    for cid in sorted(int(c) for c in np.unique(labels) if c >= 0):
        members = np.flatnonzero(labels == cid)
        w = np.array([10.0 ** (mpcs[i].power_db / 10.0) for i in members])
        toas = np.array([mpcs[i].toa_s for i in members])
        az = np.array([mpcs[i].az_deg for i in members])
        el = np.array([mpcs[i].el_deg for i in members])
        total = float(w.sum())
        centroid_az = _circular_mean_deg(az, w) % 360.0
        if centroid_az == 360.0:  # negative-epsilon wrap
            centroid_az = 0.0
        clusters.append(
            Cluster(
                id=cid,
                member_indices=tuple(int(i) for i in members),
                total_power_db=10.0 * math.log10(total),
                centroid_toa_s=float((w * toas).sum() / total),
                centroid_az_deg=centroid_az,
                centroid_el_deg=_circular_mean_deg(el, w),
                n_members=int(members.size),
            )
        )
    return tuple(clusters)


def clusters_to_dict(result: DbscanResult, clusters) -> dict:
    """JSON-ready clustering output (schema cluster/1)."""
    return {
        "schema": CLUSTER_SCHEMA,
        "eps": result.eps,
        "min_pts": result.min_pts,
        "xi": result.params.xi,
        "clusters": [
            {
                "id": c.id,
                "member_indices": list(c.member_indices),
                "total_power_db": c.total_power_db,
                "centroid_toa_ns": c.centroid_toa_s * 1e9,
                "centroid_az_deg": c.centroid_az_deg,
                "centroid_el_deg": c.centroid_el_deg,
                "n_members": c.n_members,
            }
            for c in clusters
        ],
        "noise_indices": list(result.noise_indices),
    }


def parse_cluster_file(data) -> dict:
    """Parse a clustering document; returns the raw dict after schema check."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if doc.get("schema") != CLUSTER_SCHEMA:
        raise ParseError(f"unknown cluster schema '{doc.get('schema')}'")
    return doc

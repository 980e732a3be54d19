"""Dominant-subgraph extraction and topological profiling of edge masks.

Masks are averaged into a dominant subgraph (top-k edges), or swept over
connection densities and summarized per node by six graph metrics whose
area under the density curve is aggregated into brain-system scores.

Disconnected-graph conventions: efficiency counts unreachable pairs as 0,
and a node with no reachable peers records a path length equal to the node
count.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DENSITIES = (0.10, 0.20, 0.30, 0.40, 0.50)
METRICS = ("bc", "dc", "cp", "eff", "loceff", "lp")


@dataclass(frozen=True)
class SystemMap:
    """Total assignment of node index -> brain-system name."""

    assignment: tuple

    def __post_init__(self):
        names = tuple(str(s) for s in self.assignment)
        if not names:
            raise ValueError("system map is empty")
        if any(not s for s in names):
            raise ValueError("every node needs a non-empty system name")
        object.__setattr__(self, "assignment", names)

    def __len__(self) -> int:
        return len(self.assignment)

    @property
    def systems(self) -> tuple:
        return tuple(sorted(set(self.assignment)))

    @classmethod
    def from_csv(cls, path) -> "SystemMap":
        """Read `node_index,system_name` rows; every index must appear exactly once."""
        entries = {}
        for line in Path(path).read_text().strip().splitlines():
            tokens = [t.strip() for t in line.split(",")]
            if len(tokens) != 2:
                raise ValueError(f"bad system-map row: {line!r}")
            if tokens[0].lower() in ("node_index", "node", "index"):
                continue
            idx = int(tokens[0])
            if idx in entries:
                raise ValueError(f"node {idx} assigned twice in system map")
            entries[idx] = tokens[1]
        n = len(entries)
        if sorted(entries) != list(range(n)):
            raise ValueError("system map must cover node indices 0..n-1 exactly once")
        return cls(tuple(entries[i] for i in range(n)))


def _mean_mask(masks: Sequence[np.ndarray]) -> np.ndarray:
    if not masks:
        raise ValueError("no masks given")
    shape = np.asarray(masks[0]).shape
    acc = np.zeros(shape, dtype=np.float64)
    for m in masks:
        arr = np.asarray(m, dtype=np.float64)
        if arr.shape != shape:
            raise ValueError(f"mask shape {arr.shape} differs from {shape}")
        acc += arr
    return acc / len(masks)


def _ranked_edges(weights: np.ndarray):
    """Undirected edges sorted by descending weight, ties by (i, j)."""
    n = weights.shape[0]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges.sort(key=lambda ij: (-weights[ij[0], ij[1]], ij[0], ij[1]))
    return edges


def dominant_subgraph(masks: Sequence[np.ndarray], top_k: int = 50):
    """Top-k undirected edges of the element-wise mean mask, as (i, j, weight)."""
    mean = _mean_mask(masks)
    if mean.ndim != 2 or mean.shape[0] != mean.shape[1]:
        raise ValueError("masks must be square matrices")
    edges = _ranked_edges(mean)
    if top_k > len(edges):
        warnings.warn(
            f"top_k={top_k} exceeds the {len(edges)} available edges; returning all",
            stacklevel=2,
        )
        top_k = len(edges)
    return [(i, j, float(mean[i, j])) for i, j in edges[:top_k]]


def sparsify_density(weights: np.ndarray, density: float) -> np.ndarray:
    """Binary graph keeping the floor(density * n(n-1)/2) strongest edges."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    edges = _ranked_edges(w)
    keep = int(math.floor(density * len(edges) + 1e-9))
    adj = np.zeros_like(w)
    for i, j in edges[:keep]:
        adj[i, j] = adj[j, i] = 1.0
    return adj


def _bfs_all(adj: np.ndarray):
    """All-pairs hop distances (-1 if unreachable) and shortest-path counts."""
    n = adj.shape[0]
    a = adj.astype(np.float64)
    dist = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    sigma = np.eye(n, dtype=np.float64)
    frontier = np.eye(n, dtype=bool)
    for level in range(1, n):
        contrib = (sigma * frontier) @ a
        newly = (contrib > 0) & (dist == -1)
        if not newly.any():
            break
        dist[newly] = level
        sigma[newly] = contrib[newly]
        frontier = newly
    return dist, sigma


def _validate_binary_graph(adj) -> np.ndarray:
    a = np.asarray(adj, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if not np.isin(a, (0.0, 1.0)).all():
        raise ValueError("adjacency must be binary")
    if np.any(np.diag(a) != 0.0):
        raise ValueError("adjacency must have a zero diagonal")
    return a


def _betweenness(dist: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Pair-dependency sums over unordered pairs excluding the node itself."""
    n = dist.shape[0]
    bc = np.zeros(n)
    connected = dist >= 1
    for v in range(n):
        d_v = dist[:, v]
        on_path = (
            connected
            & (d_v[:, None] >= 1)
            & (d_v[None, :] >= 1)
            & (d_v[:, None] + d_v[None, :] == dist)
        )
        on_path[v, :] = False
        on_path[:, v] = False
        on_path &= np.triu(np.ones((n, n), dtype=bool), k=1)
        s_idx, t_idx = np.nonzero(on_path)
        if s_idx.size:
            terms = sigma[s_idx, v] * sigma[v, t_idx] / sigma[s_idx, t_idx]
            bc[v] = math.fsum(terms.tolist())
    return bc


def _global_efficiency(adj: np.ndarray) -> float:
    m = adj.shape[0]
    if m < 2:
        return 0.0
    dist, _ = _bfs_all(adj)
    reachable = dist >= 1
    inv = np.where(reachable, 1.0 / np.maximum(dist, 1), 0.0)
    return math.fsum(inv[reachable].tolist()) / (m * (m - 1))


def node_metrics(adj) -> dict:
    """Per-node {bc, dc, cp, eff, loceff, lp} for a simple undirected graph."""
    a = _validate_binary_graph(adj)
    n = a.shape[0]
    dist, sigma = _bfs_all(a)
    degree = a.sum(axis=1)

    triangles = np.diag(a @ a @ a) / 2.0
    cp = np.zeros(n)
    for v in range(n):
        d = degree[v]
        if d >= 2:
            cp[v] = 2.0 * triangles[v] / (d * (d - 1))

    reachable = dist >= 1
    inv = np.where(reachable, 1.0 / np.maximum(dist, 1), 0.0)
    eff = np.array([math.fsum(inv[v][reachable[v]].tolist()) / (n - 1) for v in range(n)])

    lp = np.zeros(n)
    for v in range(n):
        finite = dist[v][reachable[v]]
        lp[v] = math.fsum(float(d) for d in finite) / finite.size if finite.size else float(n)

    loceff = np.zeros(n)
    for v in range(n):
        nb = np.flatnonzero(a[v] > 0)
        if nb.size >= 2:
            loceff[v] = _global_efficiency(a[np.ix_(nb, nb)])

    return {
        "bc": _betweenness(dist, sigma),
        "dc": degree,
        "cp": cp,
        "eff": eff,
        "loceff": loceff,
        "lp": lp,
    }


def density_auc(values: np.ndarray, densities: Sequence[float] = DENSITIES) -> np.ndarray:
    """Trapezoidal area under a per-node metric across the density sweep.

    ``values`` has shape (len(densities), n_nodes).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != len(densities):
        raise ValueError("one row of values per density is required")
    return np.trapz(values, x=np.asarray(densities, dtype=np.float64), axis=0)


@dataclass(frozen=True)
class SystemProfile:
    """System x metric AUC table plus the top-2 systems per metric."""

    auc: dict
    ranking: dict
    systems: tuple
    densities: tuple
    n_subjects: int


def profile_systems(masks: Sequence[np.ndarray], system_map: SystemMap,
                    densities: Sequence[float] = DENSITIES) -> SystemProfile:
    """Density-sweep metric AUCs averaged within systems, then over subjects."""
    if not masks:
        raise ValueError("no masks given")
    n = np.asarray(masks[0]).shape[0]
    if len(system_map) != n:
        raise ValueError(
            f"system map covers {len(system_map)} nodes but masks have {n}"
        )
    systems = system_map.systems
    members = {s: np.flatnonzero(np.array(system_map.assignment) == s) for s in systems}

    subject_tables = []
    for mask in masks:
        per_density = {m: [] for m in METRICS}
        for d in densities:
            metrics = node_metrics(sparsify_density(np.asarray(mask), d))
            for m in METRICS:
                per_density[m].append(metrics[m])
        table = {}
        for m in METRICS:
            auc = density_auc(np.stack(per_density[m]), densities)
            table[m] = {s: float(auc[members[s]].mean()) for s in systems}
        subject_tables.append(table)

    auc = {
        m: {s: float(np.mean([t[m][s] for t in subject_tables])) for s in systems}
        for m in METRICS
    }
    ranking = {
        m: tuple(sorted(systems, key=lambda s: (-auc[m][s], s))[:2])
        for m in METRICS
    }
    return SystemProfile(auc=auc, ranking=ranking, systems=systems,
                         densities=tuple(densities), n_subjects=len(masks))


def write_edge_list(path, edges) -> None:
    lines = ["i,j,weight"]
    lines += [f"{i},{j},{w!r}" for i, j, w in edges]
    Path(path).write_text("\n".join(lines) + "\n")


def write_system_auc_csv(path, profile: SystemProfile) -> None:
    lines = ["system," + ",".join(METRICS)]
    for s in profile.systems:
        lines.append(s + "," + ",".join(repr(profile.auc[m][s]) for m in METRICS))
    Path(path).write_text("\n".join(lines) + "\n")


def write_ranking_json(path, profile: SystemProfile) -> None:
    payload = {m: list(profile.ranking[m]) for m in METRICS}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

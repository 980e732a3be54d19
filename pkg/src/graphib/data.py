"""Graph data model, functional-connectivity construction, synthetic data, and disk I/O.

A sample is a :class:`Graph`: a binary adjacency matrix plus a symmetric
node-feature matrix whose row ``i`` is the connectivity profile of node
``i``. A :class:`Dataset` is an immutable collection of graphs sharing the
same node count, with an optional planted-edge ground truth for synthetic
data.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

# Pearson r is clamped into [-1 + R_CLAMP, 1 - R_CLAMP] before atanh so that
# perfectly correlated series stay finite.
R_CLAMP = 1e-7


def _as_square(matrix, name: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def _check_symmetric_hollow(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if not np.array_equal(arr, arr.T):
        raise ValueError(f"{name} must be symmetric")
    if np.any(np.diag(arr) != 0.0):
        raise ValueError(f"{name} must have an all-zero diagonal")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """One subject: binary adjacency, connectivity node features, label, site tag."""

    adjacency: np.ndarray
    node_features: np.ndarray
    label: int
    group: str = ""

    def __post_init__(self):
        adj = _as_square(self.adjacency, "adjacency")
        feats = _as_square(self.node_features, "node_features")
        if adj.shape != feats.shape:
            raise ValueError(
                f"adjacency {adj.shape} and node_features {feats.shape} disagree"
            )
        if adj.shape[0] < 2:
            raise ValueError("a graph needs at least 2 nodes")
        _check_symmetric_hollow(adj, "adjacency")
        _check_symmetric_hollow(feats, "node_features")
        if not np.isin(adj, (0.0, 1.0)).all():
            raise ValueError("adjacency must be binary")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "adjacency", _freeze(adj))
        object.__setattr__(self, "node_features", _freeze(feats))

    @property
    def n_rois(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of graphs sharing a node count.

    ``truth_mask`` is only present for synthetic data and marks the planted
    edges as a binary symmetric matrix.
    """

    graphs: tuple
    n_rois: int
    class_names: tuple
    truth_mask: np.ndarray | None = None

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if len(self.class_names) != 2:
            raise ValueError("exactly two class names are required")
        for g in graphs:
            if g.n_rois != self.n_rois:
                raise ValueError(
                    f"graph with {g.n_rois} nodes in a dataset of n_rois={self.n_rois}"
                )
        counts = [sum(1 for g in graphs if g.label == c) for c in (0, 1)]
        if min(counts, default=0) < 2:
            raise ValueError(f"need at least 2 samples per class, got counts {counts}")
        mask = self.truth_mask
        if mask is not None:
            mask = _as_square(mask, "truth_mask")
            if mask.shape[0] != self.n_rois:
                raise ValueError("truth_mask size must match n_rois")
            _check_symmetric_hollow(mask, "truth_mask")
            if not np.isin(mask, (0.0, 1.0)).all():
                raise ValueError("truth_mask must be binary")
            mask = _freeze(mask)
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "truth_mask", mask)

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, i: int) -> Graph:
        return self.graphs[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @property
    def groups(self) -> tuple:
        return tuple(g.group for g in self.graphs)


def compute_fc(timeseries) -> np.ndarray:
    """Fisher z-transformed Pearson correlation between ROI time-series columns.

    Takes a T x n array (rows = time points, columns = ROIs) and returns the
    n x n matrix z = atanh(r) with a zero diagonal. r is clamped away from
    +/-1 so the transform stays finite.
    """
    ts = np.asarray(timeseries, dtype=np.float64)
    if ts.ndim != 2:
        raise ValueError(f"timeseries must be 2-D, got shape {ts.shape}")
    t_len, n = ts.shape
    if t_len < 3:
        raise ValueError(f"need at least 3 time points, got {t_len}")
    sd = ts.std(axis=0)
    scale = 1.0 + np.abs(ts.mean(axis=0))
    dead = np.flatnonzero(sd <= 1e-12 * scale)
    if dead.size:
        raise ValueError(f"ROI {int(dead[0])} has zero variance")
    r = np.corrcoef(ts, rowvar=False)
    r = np.clip(r, -1.0 + R_CLAMP, 1.0 - R_CLAMP)
    z = np.arctanh(r)
    z = (z + z.T) / 2.0
    np.fill_diagonal(z, 0.0)
    return z


def _ranked_pairs(weights: np.ndarray):
    """Undirected (i, j) pairs sorted by descending |weight|, ties by (i, j)."""
    n = weights.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pairs.sort(key=lambda ij: (-abs(weights[ij[0], ij[1]]), ij[0], ij[1]))
    return pairs


def build_graph(fc, label: int, group: str = "", adjacency_rule: str = "complete",
                top_fraction: float = 1.0) -> Graph:
    """Wrap an FC matrix as a Graph, deriving the binary adjacency.

    ``complete`` connects every node pair. ``top_fraction`` keeps the
    floor(q * n(n-1)/2) strongest pairs by |fc|.
    """
    fc = _as_square(fc, "fc")
    if not np.all(np.isfinite(fc)):
        raise ValueError("fc contains non-finite entries")
    if not np.array_equal(fc, fc.T):
        raise ValueError("fc must be symmetric")
    n = fc.shape[0]
    if adjacency_rule == "complete":
        adj = np.ones((n, n)) - np.eye(n)
    elif adjacency_rule == "top_fraction":
        if not 0.0 < top_fraction <= 1.0:
            raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
        pairs = _ranked_pairs(fc)
        keep = int(math.floor(top_fraction * len(pairs) + 1e-9))
        adj = np.zeros((n, n))
        for i, j in pairs[:keep]:
            adj[i, j] = adj[j, i] = 1.0
    else:
        raise ValueError(f"unknown adjacency_rule {adjacency_rule!r}")
    return Graph(adjacency=adj, node_features=fc, label=label, group=group)


@dataclass(frozen=True)
class SyntheticConfig:
    """Planted-subgraph generator settings.

    Class 0 connectivity is pure noise; class 1 additionally shifts the mean
    of ``planted_edges`` randomly chosen edges by ``effect_size``.
    """

    n_rois: int
    n_per_class: int
    planted_edges: int
    effect_size: float
    noise_sd: float
    seed: int
    n_sites: int = 2

    def __post_init__(self):
        if self.n_rois < 2:
            raise ValueError("n_rois must be >= 2")
        if self.n_per_class < 2:
            raise ValueError("n_per_class must be >= 2")
        max_edges = self.n_rois * (self.n_rois - 1) // 2
        if not 0 < self.planted_edges <= max_edges:
            raise ValueError(
                f"planted_edges must be in [1, {max_edges}], got {self.planted_edges}"
            )
        if self.effect_size < 0:
            raise ValueError("effect_size must be non-negative")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")


SYNTHETIC_CLASS_NAMES = ("control", "case")


def _planted_pairs(rng: np.random.Generator, n: int, n_edges: int) -> np.ndarray:
    """Edge indices of a dense subgraph on the smallest node set that fits.

    Concentrating the planted edges on a few nodes (a clique when the count
    is triangular) is what makes them a recoverable subgraph rather than
    scattered singleton edges.
    """
    m = 2
    while m * (m - 1) // 2 < n_edges:
        m += 1
    nodes = np.sort(rng.choice(n, size=m, replace=False))
    iu, ju = np.triu_indices(n, k=1)
    pair_index = {(int(i), int(j)): idx for idx, (i, j) in enumerate(zip(iu, ju))}
    clique = [pair_index[(int(a), int(b))]
              for k, a in enumerate(nodes) for b in nodes[k + 1:]]
    chosen = rng.choice(len(clique), size=n_edges, replace=False)
    return np.sort(np.array(clique, dtype=np.int64)[chosen])


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Draw a planted-subgraph dataset; a pure function of the config."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_rois
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = iu.size
    planted = _planted_pairs(rng, n, cfg.planted_edges)

    truth = np.zeros((n, n))
    truth[iu[planted], ju[planted]] = 1.0
    truth = truth + truth.T

    graphs = []
    for label in (0, 1):
        for _ in range(cfg.n_per_class):
            vals = rng.normal(0.0, cfg.noise_sd, size=n_pairs)
            if label == 1:
                vals[planted] += cfg.effect_size
            fc = np.zeros((n, n))
            fc[iu, ju] = vals
            fc = fc + fc.T
            group = f"site{len(graphs) % cfg.n_sites}"
            graphs.append(build_graph(fc, label=label, group=group))
    return Dataset(graphs=tuple(graphs), n_rois=n,
                   class_names=SYNTHETIC_CLASS_NAMES, truth_mask=truth)


# ---------------------------------------------------------------------------
# Disk format: one CSV matrix per subject plus a JSON manifest. Values are
# written with repr() so a load/save cycle is byte-identical.

def write_matrix_csv(path, matrix) -> None:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("only 2-D matrices are written")
    lines = [",".join(repr(float(v)) for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing matrix file: {path}")
    rows = []
    for line in path.read_text().strip().splitlines():
        rows.append([float(tok) for tok in line.split(",")])
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValueError(f"ragged rows in {path}")
    return np.array(rows, dtype=np.float64)


MANIFEST_NAME = "manifest.json"
TRUTH_MASK_NAME = "truth_mask.csv"


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write matrices, manifest, and (if present) the truth mask; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects = []
    for i, g in enumerate(dataset.graphs):
        fname = f"subject_{i:04d}.csv"
        write_matrix_csv(out / fname, g.node_features)
        subjects.append({
            "file": fname,
            "label": dataset.class_names[g.label],
            "group": g.group,
        })
    manifest = {
        "n_rois": dataset.n_rois,
        "subjects": subjects,
        "classes": list(dataset.class_names),
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if dataset.truth_mask is not None:
        write_matrix_csv(out / TRUTH_MASK_NAME, dataset.truth_mask)
    return path


def load_dataset(manifest_path, adjacency_rule: str = "complete",
                 top_fraction: float = 1.0) -> Dataset:
    """Load a dataset from its manifest.

    The binary adjacency is rebuilt from the stored FC matrices with the
    given rule; it is not persisted in the manifest.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("n_rois", "subjects", "classes"):
        if key not in manifest:
            raise ValueError(f"manifest lacks required key {key!r}")
    classes = tuple(manifest["classes"])
    if len(classes) != 2:
        raise ValueError(f"manifest must declare exactly 2 classes, got {classes}")
    n_rois = int(manifest["n_rois"])
    base = manifest_path.parent
    graphs = []
    for entry in manifest["subjects"]:
        fc = read_matrix_csv(base / entry["file"])
        if fc.shape != (n_rois, n_rois):
            raise ValueError(
                f"dimension mismatch: {entry['file']} is {fc.shape}, "
                f"manifest says n_rois={n_rois}"
            )
        if entry["label"] not in classes:
            raise ValueError(
                f"unknown label {entry['label']!r} in {entry['file']}; "
                f"classes are {classes}"
            )
        graphs.append(build_graph(
            fc, label=classes.index(entry["label"]), group=entry.get("group", ""),
            adjacency_rule=adjacency_rule, top_fraction=top_fraction))
    mask_path = base / TRUTH_MASK_NAME
    truth = read_matrix_csv(mask_path) if mask_path.is_file() else None
    return Dataset(graphs=tuple(graphs), n_rois=n_rois, class_names=classes,
                   truth_mask=truth)

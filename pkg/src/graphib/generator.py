"""Differentiable edge-mask generator and connectivity regularizer.

Each node's connectivity profile is mapped by a small MLP to per-edge
scores; a symmetrized sigmoid gives edge probabilities and a two-category
Gumbel-Softmax relaxation samples a soft in/out decision per edge. Because
the node features are themselves the edge weights, masking features is edge
selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn

from .data import Graph

PROB_CLAMP = 1e-7
UNIFORM_CLAMP = 1e-12
# float64 sigmoid saturates to exactly 0/1 beyond |x| ~ 36; keep samples open
SAMPLE_CLAMP = 1e-12


class SubgraphGenerator(nn.Module):
    """Two-layer MLP mapping each node's profile to edge scores for that node."""

    def __init__(self, n_rois: int, hidden_dim: int = 16, tau: float = 1.0,
                 row_softmax: bool = False):
        super().__init__()
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        self.n_rois = n_rois
        self.hidden_dim = hidden_dim
        self.tau = tau
        self.row_softmax = row_softmax
        self.fc1 = nn.Linear(n_rois, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, n_rois)
        self.double()

    def forward(self, x: Tensor) -> Tensor:
        return edge_scores(x, self)


def _off_diagonal(n: int, dtype) -> Tensor:
    return 1.0 - torch.eye(n, dtype=dtype)


def edge_scores(x: Tensor, generator: SubgraphGenerator) -> Tensor:
    """Symmetric edge probabilities in [0, 1) with a zero diagonal.

    Accepts a single (n, n) feature matrix or a batch (B, n, n).
    """
    if x.shape[-1] != generator.fc1.in_features:
        raise ValueError(
            f"feature dimension {x.shape[-1]} does not match generator input "
            f"{generator.fc1.in_features}"
        )
    raw = torch.sigmoid(generator.fc2(torch.relu(generator.fc1(x))))
    probs = 0.5 * (raw + raw.mT)
    return probs * _off_diagonal(probs.shape[-1], probs.dtype)


def sample_gumbel(shape, rng: torch.Generator | None = None) -> Tensor:
    u = torch.rand(shape, generator=rng, dtype=torch.float64)
    u = u.clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
    return -torch.log(-torch.log(u))


def gumbel_sample(probs: Tensor, tau: float, rng: torch.Generator | None = None,
                  noise: tuple[Tensor, Tensor] | None = None,
                  row_softmax: bool = False) -> Tensor:
    """Relaxed binary edge mask from edge probabilities.

    Per upper-triangle edge, two Gumbel-perturbed logits (keep vs drop) pass
    through a temperature-tau softmax; the keep coordinate is mirrored to the
    lower triangle. Entries are strictly inside (0, 1). ``noise`` fixes the
    Gumbel draws, which makes the sample a deterministic function of probs.

    ``row_softmax`` switches to an n-way softmax per node row (one-edge-per-
    node relaxation), kept for fidelity experiments.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    p = probs.to(torch.float64).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    if noise is None:
        g_in = sample_gumbel(p.shape, rng)
        g_out = sample_gumbel(p.shape, rng)
    else:
        g_in, g_out = noise
    if row_softmax:
        s = torch.softmax((torch.log(p) + g_in) / tau, dim=-1)
        s = 0.5 * (s + s.mT)
    else:
        logits = (torch.log(p) + g_in) - (torch.log1p(-p) + g_out)
        s = torch.sigmoid(logits / tau)
        s = s.clamp(SAMPLE_CLAMP, 1.0 - SAMPLE_CLAMP)
        upper = torch.triu(s, diagonal=1)
        s = upper + upper.mT
    return s * _off_diagonal(s.shape[-1], s.dtype)


@dataclass(frozen=True)
class EdgeMask:
    """Edge probabilities plus one relaxed sample, both symmetric and hollow."""

    probs: np.ndarray
    sampled: np.ndarray

    def __post_init__(self):
        for name in ("probs", "sampled"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.array_equal(arr, arr.T):
                raise ValueError(f"{name} must be symmetric")
            if np.any(np.diag(arr) != 0.0):
                raise ValueError(f"{name} must have a zero diagonal")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError(f"{name} entries must lie in [0, 1]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_tensors(cls, probs: Tensor, sampled: Tensor) -> "EdgeMask":
        return cls(probs.detach().cpu().numpy(), sampled.detach().cpu().numpy())


def apply_mask(g: Graph, mask: EdgeMask) -> Graph:
    """Subgraph view: features gated by the sampled mask, adjacency untouched."""
    if mask.sampled.shape != g.node_features.shape:
        raise ValueError(
            f"mask shape {mask.sampled.shape} does not match graph "
            f"{g.node_features.shape}"
        )
    return Graph(adjacency=g.adjacency, node_features=g.node_features * mask.sampled,
                 label=g.label, group=g.group)


def connectivity_loss(s: Tensor, adj: Tensor) -> Tensor:
    """Frobenius distance between the row-normalized S^T A S and the identity.

    Rows of S^T A S that sum to zero are left unchanged. Batched inputs give
    one loss per batch element.
    """
    s = s.to(torch.float64)
    adj = adj.to(torch.float64)
    if s.shape != adj.shape:
        raise ValueError(f"shape mismatch: S {tuple(s.shape)} vs A {tuple(adj.shape)}")
    with torch.no_grad():
        vals = torch.unique(adj.detach())
        if not bool(torch.isin(vals, torch.tensor([0.0, 1.0], dtype=adj.dtype)).all()):
            raise ValueError("adjacency must be binary")
        if bool((adj != adj.mT).any()):
            raise ValueError("adjacency must be symmetric")
    m = s.mT @ adj @ s
    row_sums = m.sum(dim=-1, keepdim=True)
    denom = torch.where(row_sums == 0, torch.ones_like(row_sums), row_sums)
    normed = m / denom
    eye = torch.eye(s.shape[-1], dtype=s.dtype)
    return ((normed - eye) ** 2).sum(dim=(-2, -1)).sqrt()

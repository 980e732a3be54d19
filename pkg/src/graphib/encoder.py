"""GIN encoder with bilinear second-order pooling and a linear classifier head.

Message passing is sum aggregation with a learnable self-weight, a 2-layer
MLP per layer, and batch-norm + ReLU after each affine map. The graph
embedding is flatten(W^T H^T H W), invariant to node order. Dropout is
applied to the flattened embedding just before the classifier.
"""

from __future__ import annotations

import math
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor, nn


class GinLayer(nn.Module):
    """One round of (1 + eps) * h_v + sum of neighbours, then MLP."""

    def __init__(self, in_dim: int, hidden_dim: int):
        super().__init__()
        self.eps = nn.Parameter(torch.zeros(()))
        self.lin1 = nn.Linear(in_dim, hidden_dim)
        self.bn1 = nn.BatchNorm1d(hidden_dim)
        self.lin2 = nn.Linear(hidden_dim, hidden_dim)
        self.bn2 = nn.BatchNorm1d(hidden_dim)

    def _norm(self, bn: nn.BatchNorm1d, x: Tensor) -> Tensor:
        # Batch statistics pool nodes across all graphs in the batch.
        flat = x.reshape(-1, x.shape[-1])
        return bn(flat).reshape(x.shape)

    def forward(self, h: Tensor, adj: Tensor) -> Tensor:
        agg = (1.0 + self.eps) * h + adj @ h
        x = torch.relu(self._norm(self.bn1, self.lin1(agg)))
        return torch.relu(self._norm(self.bn2, self.lin2(x)))


class GraphEncoder(nn.Module):
    """Stack of GIN layers, bilinear pooling map, and classifier head."""

    def __init__(self, in_dim: int, hidden_dim: int = 128, n_layers: int = 5,
                 pool_dim: int = 16, n_classes: int = 2, dropout: float = 0.5):
        super().__init__()
        if n_layers < 1 or pool_dim < 1:
            raise ValueError("n_layers and pool_dim must be >= 1")
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.pool_dim = pool_dim
        self.n_classes = n_classes
        self.dropout_rate = dropout
        dims = [in_dim] + [hidden_dim] * n_layers
        self.layers = nn.ModuleList(
            GinLayer(dims[k], dims[k + 1]) for k in range(n_layers)
        )
        bound = 1.0 / math.sqrt(hidden_dim)
        self.pool_map = nn.Parameter(
            torch.empty(hidden_dim, pool_dim).uniform_(-bound, bound)
        )
        self.classifier = nn.Linear(pool_dim * pool_dim, n_classes)
        self.double()

    def node_representations(self, x: Tensor, adj: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"feature dimension {x.shape[-1]} does not match encoder input {self.in_dim}"
            )
        if x.shape[-2] != adj.shape[-1]:
            raise ValueError("node count of features and adjacency disagree")
        h = x
        for layer in self.layers:
            h = layer(h, adj)
        return h

    def embed(self, x: Tensor, adj: Tensor) -> Tensor:
        return sopool_embed(self.node_representations(x, adj), self.pool_map)


def gin_forward(x: Tensor, adj: Tensor, encoder: GraphEncoder, train: bool = False) -> Tensor:
    """Node representations; ``train`` switches batch-norm to batch statistics."""
    was_training = encoder.training
    encoder.train(train)
    try:
        return encoder.node_representations(x, adj)
    finally:
        encoder.train(was_training)


def sopool_embed(h: Tensor, w: Tensor) -> Tensor:
    """Flatten((HW)^T (HW)): a pool_dim^2 embedding, invariant to row order of H."""
    hw = h @ w
    m = hw.mT @ hw
    return m.reshape(*m.shape[:-2], -1)


def dropout(x: Tensor, p: float, rng: torch.Generator | None = None) -> Tensor:
    """Inverted dropout with an explicit generator for reproducibility."""
    if p == 0.0:
        return x
    keep = (torch.rand(x.shape, generator=rng, dtype=x.dtype) >= p).to(x.dtype)
    return x * keep / (1.0 - p)


def classify_loss(emb: Tensor, labels: Tensor, encoder: GraphEncoder,
                  train: bool = False, rng: torch.Generator | None = None):
    """Logits and mean cross-entropy; dropout on the embedding in train mode only."""
    e = dropout(emb, encoder.dropout_rate, rng) if train else emb
    if e.ndim == 1:
        e = e.unsqueeze(0)
    logits = encoder.classifier(e)
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    loss = F.cross_entropy(logits, labels)
    return logits, loss


CHECKPOINT_FORMAT = "graphib-checkpoint"


def save_checkpoint(path, encoder: GraphEncoder, generator, extra: dict | None = None) -> None:
    """Single-file container: architecture config, state dicts, and a config echo."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "arch": {
            "n_rois": generator.n_rois,
            "gen_hidden": generator.hidden_dim,
            "tau": generator.tau,
            "row_softmax": generator.row_softmax,
            "in_dim": encoder.in_dim,
            "hidden_dim": encoder.hidden_dim,
            "n_layers": len(encoder.layers),
            "pool_dim": encoder.pool_dim,
            "n_classes": encoder.n_classes,
            "dropout": encoder.dropout_rate,
        },
        "extra": dict(extra or {}),
        "encoder_state": encoder.state_dict(),
        "generator_state": generator.state_dict(),
    }
    torch.save(payload, Path(path))


def load_checkpoint(path):
    """Rebuild (encoder, generator, arch dict) from a checkpoint file."""
    from .generator import SubgraphGenerator

    payload = torch.load(Path(path), weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a graphib checkpoint")
    arch = payload["arch"]
    encoder = GraphEncoder(
        in_dim=arch["in_dim"], hidden_dim=arch["hidden_dim"],
        n_layers=arch["n_layers"], pool_dim=arch["pool_dim"],
        n_classes=arch["n_classes"], dropout=arch["dropout"],
    )
    generator = SubgraphGenerator(
        n_rois=arch["n_rois"], hidden_dim=arch["gen_hidden"],
        tau=arch["tau"], row_softmax=arch["row_softmax"],
    )
    encoder.load_state_dict(payload["encoder_state"])
    generator.load_state_dict(payload["generator_state"])
    encoder.eval()
    generator.eval()
    return encoder, generator, {**arch, **payload.get("extra", {})}

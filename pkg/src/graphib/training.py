"""Joint training of the edge-mask generator and graph encoder.

The objective per mini-batch is

    L = CE(subgraph, labels) + conn_weight * L_con + mi_weight * I(Z_sub, Z)

where Z and Z_sub are the batch embeddings of the full graphs and their
masked subgraphs under the shared encoder. Optimization uses adaptive
moments with bias correction and decoupled weight decay; the learning rate
halves on a fixed epoch schedule. Everything runs in float64.
"""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import Tensor

from .data import Graph
from .encoder import GraphEncoder, classify_loss, gin_forward, sopool_embed
from .entropy import EntropyConfig, joint_entropy, kernel_width, rbf_gram, renyi_entropy
from .generator import SubgraphGenerator, connectivity_loss, edge_scores, gumbel_sample


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 50
    weight_decay: float = 1e-4
    batch_size: int = 32
    epochs: int = 350
    conn_weight: float = 1e-3
    mi_weight: float = 0.1
    renyi_alpha: float = 1.01
    knn_k: int = 10
    eig_floor: float = 1e-12
    tau: float = 1.0
    hidden_dim: int = 128
    n_layers: int = 5
    pool_dim: int = 16
    gen_hidden: int = 16
    dropout: float = 0.5
    row_softmax: bool = False
    seed: int = 0

    def __post_init__(self):
        positives = {
            "lr": self.lr, "lr_decay": self.lr_decay, "batch_size": self.batch_size,
            "tau": self.tau, "hidden_dim": self.hidden_dim, "n_layers": self.n_layers,
            "pool_dim": self.pool_dim, "gen_hidden": self.gen_hidden,
            "lr_decay_every": self.lr_decay_every, "knn_k": self.knn_k,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        non_negative = {
            "weight_decay": self.weight_decay, "conn_weight": self.conn_weight,
            "mi_weight": self.mi_weight, "dropout": self.dropout,
        }
        for name, value in non_negative.items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        # Delegate the Renyi-order check (rejects alpha == 1).
        EntropyConfig(renyi_alpha=self.renyi_alpha, knn_k=self.knn_k,
                      eig_floor=self.eig_floor)


@dataclass
class Model:
    generator: SubgraphGenerator
    encoder: GraphEncoder
    n_rois: int

    def parameters(self):
        yield from self.generator.parameters()
        yield from self.encoder.parameters()

    def named_parameters(self):
        for name, p in self.generator.named_parameters():
            yield f"generator.{name}", p
        for name, p in self.encoder.named_parameters():
            yield f"encoder.{name}", p

    def state_dicts(self):
        return {
            "generator": copy.deepcopy(self.generator.state_dict()),
            "encoder": copy.deepcopy(self.encoder.state_dict()),
        }

    def load_state_dicts(self, state):
        self.generator.load_state_dict(state["generator"])
        self.encoder.load_state_dict(state["encoder"])


@dataclass
class RngStreams:
    """Independent per-purpose streams derived from one master seed."""

    shuffle: np.random.Generator
    gumbel: torch.Generator
    dropout: torch.Generator
    init_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        ints = [int(c.generate_state(1)[0]) for c in children]
        gumbel = torch.Generator().manual_seed(ints[1])
        drop = torch.Generator().manual_seed(ints[2])
        return cls(shuffle=np.random.default_rng(children[0]), gumbel=gumbel,
                   dropout=drop, init_seed=ints[3])


def build_model(n_rois: int, cfg: TrainConfig, init_seed: int | None = None) -> Model:
    torch.manual_seed(cfg.seed if init_seed is None else init_seed)
    generator = SubgraphGenerator(n_rois, hidden_dim=cfg.gen_hidden, tau=cfg.tau,
                                  row_softmax=cfg.row_softmax)
    encoder = GraphEncoder(in_dim=n_rois, hidden_dim=cfg.hidden_dim,
                           n_layers=cfg.n_layers, pool_dim=cfg.pool_dim,
                           dropout=cfg.dropout)
    return Model(generator=generator, encoder=encoder, n_rois=n_rois)


def stack_graphs(graphs: Sequence[Graph]):
    """Batch tensors (features, adjacency, labels) from a list of graphs."""
    x = torch.from_numpy(np.stack([g.node_features for g in graphs]))
    adj = torch.from_numpy(np.stack([g.adjacency for g in graphs]))
    y = torch.tensor([g.label for g in graphs], dtype=torch.long)
    return x, adj, y


def make_optimizer(model: Model, cfg: TrainConfig) -> torch.optim.AdamW:
    """AdamW with weight decay exempting batch-norm affines and GIN self-weights."""
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        if ".bn" in name or name.endswith(".eps"):
            no_decay.append(p)
        else:
            decay.append(p)
    groups = [
        {"params": decay, "weight_decay": cfg.weight_decay},
        {"params": no_decay, "weight_decay": 0.0},
    ]
    return torch.optim.AdamW(groups, lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)


@dataclass
class LossParts:
    total: Tensor
    ce: Tensor
    conn: Tensor
    mi: Tensor

    def named(self):
        return (("cross-entropy", self.ce), ("connectivity", self.conn),
                ("mutual-information", self.mi), ("total", self.total))


def _batch_mi(z: Tensor, z_sub: Tensor, cfg: TrainConfig,
              sigmas: tuple[float, float] | None = None) -> Tensor:
    n = z.shape[0]
    k_eff = min(cfg.knn_k, n - 1)
    if sigmas is None:
        with torch.no_grad():
            sigmas = (kernel_width(z.detach(), k_eff), kernel_width(z_sub.detach(), k_eff))
    gram = rbf_gram(z, sigmas[0]).normalize()
    gram_sub = rbf_gram(z_sub, sigmas[1]).normalize()
    h = renyi_entropy(gram, cfg.renyi_alpha, cfg.eig_floor)
    h_sub = renyi_entropy(gram_sub, cfg.renyi_alpha, cfg.eig_floor)
    h_joint = joint_entropy(gram, gram_sub, cfg.renyi_alpha, cfg.eig_floor)
    return h + h_sub - h_joint


def batch_objective(model: Model, x: Tensor, adj: Tensor, y: Tensor, cfg: TrainConfig,
                    rngs: RngStreams | None = None, train: bool = True,
                    gumbel_noise: tuple[Tensor, Tensor] | None = None,
                    sigmas: tuple[float, float] | None = None) -> LossParts:
    """All loss components for one batch.

    ``gumbel_noise`` and ``sigmas`` pin the stochastic draws and kernel
    widths, making the objective a deterministic function of the parameters
    (used by the finite-difference checks).
    """
    probs = edge_scores(x, model.generator)
    sampled = gumbel_sample(probs, cfg.tau, rng=rngs.gumbel if rngs else None,
                            noise=gumbel_noise, row_softmax=cfg.row_softmax)
    x_sub = x * sampled

    h_full = gin_forward(x, adj, model.encoder, train=train)
    z = sopool_embed(h_full, model.encoder.pool_map)
    h_sub = gin_forward(x_sub, adj, model.encoder, train=train)
    z_sub = sopool_embed(h_sub, model.encoder.pool_map)

    _, ce = classify_loss(z_sub, y, model.encoder, train=train,
                          rng=rngs.dropout if rngs else None)
    conn = connectivity_loss(sampled, adj)
    if conn.ndim > 0:
        conn = conn.mean()
    mi = _batch_mi(z, z_sub, cfg, sigmas=sigmas)
    total = ce + cfg.conn_weight * conn + cfg.mi_weight * mi
    return LossParts(total=total, ce=ce, conn=conn, mi=mi)


def train_step(model: Model, optimizer: torch.optim.Optimizer,
               batch: Sequence[Graph], cfg: TrainConfig, rngs: RngStreams) -> dict:
    """One optimizer update on a batch; returns the detached loss components."""
    if len(batch) < 2:
        raise ValueError(f"batch must have at least 2 graphs, got {len(batch)}")
    x, adj, y = stack_graphs(batch)
    parts = batch_objective(model, x, adj, y, cfg, rngs=rngs, train=True)
    for name, value in parts.named():
        if not bool(torch.isfinite(value.detach())):
            raise RuntimeError(f"{name} loss is not finite: {float(value.detach())!r}")
    optimizer.zero_grad()
    parts.total.backward()
    optimizer.step()
    return {name: float(v.detach()) for name, v in
            (("total", parts.total), ("ce", parts.ce), ("conn", parts.conn),
             ("mi", parts.mi))}


def predict(model: Model, graphs: Sequence[Graph]) -> np.ndarray:
    """Deterministic labels: the probability matrix itself gates the features."""
    x, adj, _ = stack_graphs(graphs)
    with torch.no_grad():
        probs = edge_scores(x, model.generator)
        x_sub = x * probs
        h = gin_forward(x_sub, adj, model.encoder, train=False)
        emb = sopool_embed(h, model.encoder.pool_map)
        logits, _ = classify_loss(emb, torch.zeros(len(graphs), dtype=torch.long),
                                  model.encoder, train=False)
    return logits.argmax(dim=1).numpy()


def accuracy(model: Model, graphs: Sequence[Graph]) -> float:
    if not graphs:
        raise ValueError("cannot score an empty graph list")
    preds = predict(model, graphs)
    truth = np.array([g.label for g in graphs])
    return float((preds == truth).mean())


@dataclass
class EpochRecord:
    epoch: int
    loss_total: float
    loss_ce: float
    loss_con: float
    mi_bits: float
    acc_train: float
    acc_val: float
    lr: float


LOG_COLUMNS = ("epoch", "loss_total", "loss_ce", "loss_con", "mi_bits",
               "acc_train", "acc_val", "lr")


def write_train_log(path, records: Sequence[EpochRecord]) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for r in records:
            writer.writerow([getattr(r, c) for c in LOG_COLUMNS])


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        if len(chunk) >= 2:  # mutual information needs at least two samples
            yield chunk


def fit(train_graphs: Sequence[Graph], val_graphs: Sequence[Graph],
        cfg: TrainConfig) -> tuple[Model, list[EpochRecord]]:
    """Train for cfg.epochs and return the parameters with the best validation
    accuracy (ties resolved to the earliest epoch), plus the per-epoch log."""
    if not train_graphs or not val_graphs:
        raise ValueError("train and validation splits must both be non-empty")
    if len(train_graphs) < 2:
        raise ValueError("need at least 2 training graphs")
    rngs = RngStreams.from_seed(cfg.seed)
    model = build_model(train_graphs[0].n_rois, cfg, init_seed=rngs.init_seed)
    optimizer = make_optimizer(model, cfg)

    best_state = model.state_dicts()
    best_acc = -1.0
    log: list[EpochRecord] = []
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = rngs.shuffle.permutation(len(train_graphs))
        sums = {"total": 0.0, "ce": 0.0, "conn": 0.0, "mi": 0.0}
        seen = 0
        for chunk in _batches(order, cfg.batch_size):
            batch = [train_graphs[i] for i in chunk]
            parts = train_step(model, optimizer, batch, cfg, rngs)
            for key in sums:
                sums[key] += parts[key] * len(chunk)
            seen += len(chunk)
        if seen == 0:
            raise ValueError("no usable batches; check batch_size and split sizes")
        acc_train = accuracy(model, train_graphs)
        acc_val = accuracy(model, val_graphs)
        record = EpochRecord(
            epoch=epoch, loss_total=sums["total"] / seen, loss_ce=sums["ce"] / seen,
            loss_con=sums["conn"] / seen, mi_bits=sums["mi"] / seen,
            acc_train=acc_train, acc_val=acc_val, lr=lr,
        )
        log.append(record)
        if acc_val > best_acc:
            best_acc = acc_val
            best_state = model.state_dicts()
    model.load_state_dicts(best_state)
    model.generator.eval()
    model.encoder.eval()
    return model, log

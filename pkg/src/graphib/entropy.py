"""Matrix-based Renyi entropy and mutual information over batches of embeddings.

Entropy of a batch is read off the eigenspectrum of a trace-normalized RBF
Gram matrix; joint entropy uses the Hadamard product of the two normalized
Grams. All values are in bits. Functions accept numpy arrays or torch
tensors and compute in float64; entropies returned as 0-d torch tensors so
they can sit inside an autograd graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

LN2 = math.log(2.0)


@dataclass(frozen=True)
class EntropyConfig:
    """Estimator settings: Renyi order, k for kernel-width selection, spectrum floor."""

    renyi_alpha: float = 1.01
    knn_k: int = 10
    eig_floor: float = 1e-12

    def __post_init__(self):
        if not self.renyi_alpha > 0 or self.renyi_alpha == 1.0:
            raise ValueError(
                f"renyi_alpha must be positive and != 1, got {self.renyi_alpha}; "
                "use e.g. 1.01 to approximate Shannon entropy"
            )
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.eig_floor <= 0:
            raise ValueError(f"eig_floor must be positive, got {self.eig_floor}")


@dataclass
class GramMatrix:
    """Kernel Gram matrix over a batch, with a trace-normalization flag."""

    values: Tensor
    normalized: bool = False

    def normalize(self) -> "GramMatrix":
        if self.normalized:
            return self
        tr = torch.trace(self.values)
        if float(tr.detach()) <= 0:
            raise ValueError("Gram matrix has non-positive trace")
        return GramMatrix(self.values / tr, normalized=True)


def _as_2d_tensor(z, name: str = "Z") -> Tensor:
    if isinstance(z, torch.Tensor):
        t = z.to(torch.float64)
    else:
        t = torch.as_tensor(np.asarray(z), dtype=torch.float64)
    if t.ndim != 2:
        raise ValueError(f"{name} must be 2-D (samples x features), got shape {tuple(t.shape)}")
    return t


def pairwise_sq_dists(z: Tensor) -> Tensor:
    """Exactly symmetric matrix of squared Euclidean distances with a zero diagonal."""
    sq_norms = (z * z).sum(dim=1, keepdim=True)
    d = sq_norms + sq_norms.T - 2.0 * (z @ z.T)
    d = 0.5 * (d + d.T)
    d = d.clamp_min(0.0)
    n = z.shape[0]
    return d * (1.0 - torch.eye(n, dtype=d.dtype))


def kernel_width(z, k: int) -> float:
    """Mean k-nearest-neighbour distance, averaged over samples.

    Zero distances (duplicate samples) are excluded; a sample with fewer
    than k distinct neighbours contributes the mean of what it has.
    """
    zt = _as_2d_tensor(z)
    n = zt.shape[0]
    if n <= k:
        raise ValueError(f"kernel_width needs more than k={k} samples, got {n}")
    dist = pairwise_sq_dists(zt).sqrt()
    means = []
    for i in range(n):
        row = dist[i]
        nonzero = row[row > 0]
        if nonzero.numel() == 0:
            continue
        vals, _ = torch.sort(nonzero)
        means.append(float(vals[: min(k, vals.numel())].mean()))
    if not means:
        raise ValueError("all samples are identical; kernel width would be zero")
    return float(np.mean(means))


def rbf_gram(z, sigma: float) -> GramMatrix:
    """Unnormalized RBF Gram matrix K[i,j] = exp(-|z_i - z_j|^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    zt = _as_2d_tensor(z)
    sq = pairwise_sq_dists(zt)
    return GramMatrix(torch.exp(-sq / (2.0 * sigma * sigma)), normalized=False)


def _spectrum(gram: GramMatrix) -> Tensor:
    k = gram.values
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {tuple(k.shape)}")
    asym = float((k - k.T).abs().max().detach())
    if asym > 1e-10:
        raise ValueError(f"Gram matrix is not symmetric (max asymmetry {asym:.3g})")
    if gram.normalized:
        tr = float(torch.trace(k).detach())
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"Gram flagged normalized but trace is {tr!r}")
        d = k
    else:
        d = gram.normalize().values
    lam = torch.linalg.eigvalsh(d)
    min_lam = float(lam.min().detach())
    if min_lam < -1e-6:
        raise ValueError(
            f"Gram matrix is not positive semi-definite (min eigenvalue {min_lam:.3g})"
        )
    return lam


def renyi_entropy(gram: GramMatrix, alpha: float, eig_floor: float = 1e-12) -> Tensor:
    """Renyi entropy in bits from the eigenspectrum of the normalized Gram.

    Eigenvalues at or below ``eig_floor`` are treated as exact zeros and
    dropped, so degenerate spectra hit their analytic limits (rank-1 -> 0).
    """
    if alpha == 1.0:
        raise ValueError("alpha must differ from 1")
    lam = _spectrum(gram)
    kept = lam[lam > eig_floor]
    total = (kept ** alpha).sum()
    return torch.log2(total) / (1.0 - alpha)


def shannon_entropy(gram: GramMatrix, eig_floor: float = 1e-12) -> Tensor:
    """Shannon entropy in bits of the normalized Gram eigenspectrum (alpha -> 1 limit)."""
    lam = _spectrum(gram)
    kept = lam[lam > eig_floor]
    return -(kept * torch.log2(kept)).sum()


def joint_entropy(gram_a: GramMatrix, gram_b: GramMatrix, alpha: float,
                  eig_floor: float = 1e-12) -> Tensor:
    """Renyi entropy of the normalized Hadamard product of two normalized Grams."""
    if gram_a.values.shape != gram_b.values.shape:
        raise ValueError(
            f"Gram size mismatch: {tuple(gram_a.values.shape)} vs {tuple(gram_b.values.shape)}"
        )
    if not (gram_a.normalized and gram_b.normalized):
        raise ValueError("joint_entropy expects trace-normalized Gram matrices")
    prod = gram_a.values * gram_b.values
    tr = torch.trace(prod)
    if float(tr.detach()) <= 0:
        raise ValueError("Hadamard product has non-positive trace")
    return renyi_entropy(GramMatrix(prod / tr, normalized=True), alpha, eig_floor)


def mutual_information(z, z_sub, cfg: EntropyConfig = EntropyConfig()) -> Tensor:
    """I(Z; Z_sub) = H(Z) + H(Z_sub) - H(Z, Z_sub), in bits.

    Each embedding set gets its own kernel width from its k-nearest-neighbour
    statistic; the widths are data-dependent constants outside any gradient.
    """
    za = _as_2d_tensor(z, "Z")
    zb = _as_2d_tensor(z_sub, "Z_sub")
    if za.shape[0] != zb.shape[0]:
        raise ValueError(f"sample counts differ: {za.shape[0]} vs {zb.shape[0]}")
    if za.shape[0] < 2:
        raise ValueError("mutual information needs at least 2 samples")
    gram_a = rbf_gram(za, kernel_width(za, cfg.knn_k)).normalize()
    gram_b = rbf_gram(zb, kernel_width(zb, cfg.knn_k)).normalize()
    h_a = renyi_entropy(gram_a, cfg.renyi_alpha, cfg.eig_floor)
    h_b = renyi_entropy(gram_b, cfg.renyi_alpha, cfg.eig_floor)
    h_ab = joint_entropy(gram_a, gram_b, cfg.renyi_alpha, cfg.eig_floor)
    return h_a + h_b - h_ab


def entropy_gradient(z, sigma: float, alpha: float, eig_floor: float = 1e-12) -> Tensor:
    """Analytic gradient of renyi_entropy(rbf_gram(Z, sigma)) with respect to Z.

    Chains d/dD of the spectral functional through trace normalization and
    the RBF kernel; sigma is held constant. Eigenvalues at or below the
    floor contribute nothing, matching the entropy's dropped spectrum.
    """
    if alpha == 1.0:
        raise ValueError("alpha must differ from 1")
    with torch.no_grad():
        zt = _as_2d_tensor(z)
        n = zt.shape[0]
        k = rbf_gram(zt, sigma).values
        tr_k = torch.trace(k)
        d = k / tr_k
        lam, vec = torch.linalg.eigh(d)
        if float(lam.min()) < -1e-6:
            raise ValueError("Gram matrix is not positive semi-definite")
        keep = lam > eig_floor
        powered = torch.where(keep, lam.clamp_min(eig_floor) ** alpha, torch.zeros_like(lam))
        total = powered.sum()
        fprime = torch.where(
            keep, alpha * lam.clamp_min(eig_floor) ** (alpha - 1.0), torch.zeros_like(lam)
        )
        # dH/dD for H = log2(sum lam^alpha) / (1 - alpha)
        grad_d = (vec * fprime) @ vec.T / ((1.0 - alpha) * LN2 * total)
        # through D = K / tr(K)
        grad_k = (grad_d - (grad_d * d).sum() * torch.eye(n, dtype=d.dtype)) / tr_k
        # through K_ij = exp(-|z_i - z_j|^2 / (2 sigma^2)); diagonal is constant
        w = grad_k * k
        w = w * (1.0 - torch.eye(n, dtype=w.dtype))
        row = w.sum(dim=1, keepdim=True)
        return (2.0 / (sigma * sigma)) * (w @ zt - row * zt)

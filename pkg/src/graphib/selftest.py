"""User-runnable oracle suite behind the `selftest` CLI subcommand.

Each check pits a library computation against an independent route:
analytic limits, finite differences, Monte Carlo with a separate RNG, or a
brute-force graph algorithm. Returns (name, passed, detail) triples.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import torch

from .entropy import (EntropyConfig, GramMatrix, entropy_gradient, joint_entropy,
                      kernel_width, mutual_information, rbf_gram, renyi_entropy,
                      shannon_entropy)
from .generator import connectivity_loss, gumbel_sample
from .interpret import node_metrics


def _check_entropy_limits():
    worst = 0.0
    for n in (2, 8, 32):
        for alpha in (1.01, 2.0):
            uniform = GramMatrix(torch.eye(n, dtype=torch.float64) / n, normalized=True)
            worst = max(worst, abs(float(renyi_entropy(uniform, alpha)) - math.log2(n)))
            rank1 = GramMatrix(torch.ones(n, n, dtype=torch.float64) / n, normalized=True)
            worst = max(worst, abs(float(renyi_entropy(rank1, alpha))))
    return worst < 1e-9, f"max deviation {worst:.3g} (tolerance 1e-9)"


def _random_normalized_psd(rng, n):
    b = rng.standard_normal((n, n))
    k = b @ b.T
    k = k / np.trace(k)
    return GramMatrix(torch.from_numpy(k), normalized=True)


def _check_shannon_limit():
    rng = np.random.default_rng(7)
    hits = 0
    trials = 25
    for _ in range(trials):
        gram = _random_normalized_psd(rng, 16)
        h_s = float(shannon_entropy(gram))
        close = abs(float(renyi_entropy(gram, 1.001)) - h_s)
        far = abs(float(renyi_entropy(gram, 1.01)) - h_s)
        hits += close < far
    return hits == trials, f"{hits}/{trials} cases with alpha=1.001 closer to Shannon"


def _check_mi_properties():
    rng = np.random.default_rng(11)
    cfg = EntropyConfig(knn_k=5)
    worst_sym, worst_neg, worst_joint = 0.0, 0.0, 0.0
    for _ in range(40):
        z_a = rng.standard_normal((16, 4))
        z_b = rng.standard_normal((16, 4))
        mi_ab = float(mutual_information(z_a, z_b, cfg))
        mi_ba = float(mutual_information(z_b, z_a, cfg))
        worst_sym = max(worst_sym, abs(mi_ab - mi_ba))
        worst_neg = min(worst_neg, mi_ab)
        ga = rbf_gram(z_a, kernel_width(z_a, cfg.knn_k)).normalize()
        gb = rbf_gram(z_b, kernel_width(z_b, cfg.knn_k)).normalize()
        joint = float(joint_entropy(ga, gb, cfg.renyi_alpha))
        top = max(float(renyi_entropy(ga, cfg.renyi_alpha)),
                  float(renyi_entropy(gb, cfg.renyi_alpha)))
        worst_joint = min(worst_joint, joint - top)
    ok = worst_sym < 1e-12 and worst_neg > -1e-6 and worst_joint > -1e-6
    return ok, (f"asymmetry {worst_sym:.3g}, min MI {worst_neg:.3g}, "
                f"min joint-minus-marginal {worst_joint:.3g}")


def _check_entropy_gradient():
    rng = np.random.default_rng(3)
    alpha = 1.01
    worst = 0.0
    for _ in range(5):
        z = rng.standard_normal((8, 4))
        sigma = kernel_width(z, 3)
        grad = entropy_gradient(z, sigma, alpha).numpy()
        step = 1e-5
        fd = np.zeros_like(z)
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += step
                zm[i, j] -= step
                hp = float(renyi_entropy(rbf_gram(zp, sigma), alpha))
                hm = float(renyi_entropy(rbf_gram(zm, sigma), alpha))
                fd[i, j] = (hp - hm) / (2 * step)
        rel = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12)
        worst = max(worst, rel)
    return worst < 1e-4, f"max relative error {worst:.3g} (tolerance 1e-4)"


def _check_connectivity_values():
    worst = 0.0
    for n in (4, 8):
        eye = torch.eye(n, dtype=torch.float64)
        worst = max(worst, abs(float(connectivity_loss(eye, eye))))
        ones = torch.ones(n, n, dtype=torch.float64)
        complete = ones - eye
        got = float(connectivity_loss(ones, complete))
        worst = max(worst, abs(got - math.sqrt(n - 1)))
    return worst < 1e-10, f"max deviation {worst:.3g} (tolerance 1e-10)"


def _check_gumbel_mean():
    p, tau, draws = 0.7, 0.5, 10_000
    rng = torch.Generator().manual_seed(99)
    probs = torch.full((2, 2), p, dtype=torch.float64)
    probs.fill_diagonal_(0.0)
    total = 0.0
    for _ in range(draws):
        total += float(gumbel_sample(probs, tau, rng)[0, 1])
    impl_mean = total / draws
    # Independent Monte Carlo route: numpy RNG, direct softmax formula.
    np_rng = np.random.default_rng(12345)
    g = np_rng.gumbel(size=(draws, 2))
    logits = np.stack([np.log(p) + g[:, 0], np.log(1 - p) + g[:, 1]], axis=1) / tau
    oracle_mean = float((1.0 / (1.0 + np.exp(-(logits[:, 0] - logits[:, 1])))).mean())
    diff = abs(impl_mean - oracle_mean)
    return diff < 0.03, f"impl {impl_mean:.4f} vs oracle {oracle_mean:.4f} (tolerance 0.03)"


def _floyd_warshall(adj):
    n = adj.shape[0]
    inf = float("inf")
    d = np.where(adj > 0, 1.0, inf)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def _enumerate_betweenness(adj, dist):
    """Count shortest paths by explicit DFS enumeration."""
    n = adj.shape[0]
    paths_between = {}

    def extend(node, target, length, via):
        if length == 0:
            if node == target:
                for v in via:
                    counts[v] += 1
                counts["total"] += 1
            return
        for nxt in np.flatnonzero(adj[node] > 0):
            if dist[nxt, target] == length - 1:
                extend(nxt, target, length - 1, via + [nxt] if length > 1 else via)

    bc = np.zeros(n)
    for s in range(n):
        for t in range(s + 1, n):
            if not np.isfinite(dist[s, t]) or dist[s, t] < 1:
                continue
            counts = {v: 0 for v in range(n)}
            counts["total"] = 0
            extend(s, t, int(dist[s, t]), [])
            paths_between[(s, t)] = counts
    for v in range(n):
        terms = [
            c[v] / c["total"]
            for (s, t), c in sorted(paths_between.items())
            if v not in (s, t) and c["total"] > 0
        ]
        bc[v] = math.fsum(terms)
    return bc


def _check_graph_metrics():
    rng = np.random.default_rng(21)
    graphs = []
    path3 = np.zeros((3, 3)); path3[0, 1] = path3[1, 0] = path3[1, 2] = path3[2, 1] = 1
    tri = np.ones((3, 3)) - np.eye(3)
    k5 = np.ones((5, 5)) - np.eye(5)
    graphs += [path3, tri, k5]
    for _ in range(30):
        n = int(rng.integers(3, 8))
        upper = rng.random((n, n)) < 0.45
        a = np.triu(upper, 1).astype(float)
        graphs.append(a + a.T)
    for a in graphs:
        got = node_metrics(a)
        dist = _floyd_warshall(a)
        n = a.shape[0]
        bc = _enumerate_betweenness(a, dist)
        if not np.array_equal(got["bc"], bc):
            return False, "betweenness mismatch vs path enumeration"
        deg = a.sum(1)
        if not np.array_equal(got["dc"], deg):
            return False, "degree mismatch"
        for v in range(n):
            finite = [dist[v, u] for u in range(n) if u != v and np.isfinite(dist[v, u])]
            eff = math.fsum(1.0 / d for d in finite) / (n - 1)
            lp = math.fsum(finite) / len(finite) if finite else float(n)
            if abs(got["eff"][v] - eff) > 1e-12 or abs(got["lp"][v] - lp) > 1e-12:
                return False, f"efficiency or path length mismatch at node {v}"
    return True, f"{len(graphs)} graphs matched Floyd-Warshall/path-enumeration oracles"


CHECKS = (
    ("entropy-analytic-limits", _check_entropy_limits),
    ("shannon-limit-convergence", _check_shannon_limit),
    ("mutual-information-properties", _check_mi_properties),
    ("entropy-gradient-vs-finite-differences", _check_entropy_gradient),
    ("connectivity-loss-values", _check_connectivity_values),
    ("gumbel-softmax-mean", _check_gumbel_mean),
    ("graph-metrics-vs-oracle", _check_graph_metrics),
)


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, check in CHECKS:
        ok, detail = check()
        all_ok &= ok
        if verbose:
            print(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok

"""Brute-force reference implementations the tests check the library against.

Every oracle takes a different route than the library: scalar formulas,
Floyd-Warshall distances, explicit shortest-path enumeration, Monte Carlo
with an independent RNG, or plain finite differences.
"""

import math

import numpy as np


def pearson_fisher_z(x, y):
    """Scalar two-pass Pearson r followed by 0.5 * ln((1+r)/(1-r))."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    r = cov / math.sqrt(vx * vy)
    r = min(max(r, -1.0 + 1e-7), 1.0 - 1e-7)
    return 0.5 * math.log((1.0 + r) / (1.0 - r))


def trapezoid(ys, xs):
    """Manual trapezoid rule, one interval at a time."""
    total = 0.0
    for k in range(len(xs) - 1):
        total += 0.5 * (ys[k] + ys[k + 1]) * (xs[k + 1] - xs[k])
    return total


def floyd_warshall(adj):
    n = adj.shape[0]
    dist = np.where(np.asarray(adj) > 0, 1.0, np.inf)
    np.fill_diagonal(dist, 0.0)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def _all_shortest_paths(adj, dist, s, t):
    """Every shortest path s -> t as a node tuple, via DFS on the distance DAG."""
    n = adj.shape[0]
    paths = []

    def walk(node, acc):
        if node == t:
            paths.append(tuple(acc))
            return
        for nxt in range(n):
            if adj[node, nxt] > 0 and dist[nxt, t] == dist[node, t] - 1:
                walk(nxt, acc + [nxt])

    walk(s, [s])
    return paths


def betweenness_by_enumeration(adj):
    """Unordered-pair dependency sums from explicitly enumerated paths."""
    adj = np.asarray(adj)
    n = adj.shape[0]
    dist = floyd_warshall(adj)
    terms = {v: [] for v in range(n)}
    for s in range(n):
        for t in range(s + 1, n):
            if not np.isfinite(dist[s, t]) or dist[s, t] < 1:
                continue
            paths = _all_shortest_paths(adj, dist, s, t)
            total = len(paths)
            for v in range(n):
                if v in (s, t):
                    continue
                through = sum(1 for p in paths if v in p[1:-1])
                terms[v].append(through / total)
    return np.array([math.fsum(terms[v]) for v in range(n)])


def degree_oracle(adj):
    return np.asarray(adj).sum(axis=1)


def clustering_oracle(adj):
    adj = np.asarray(adj)
    n = adj.shape[0]
    cp = np.zeros(n)
    for v in range(n):
        nb = [u for u in range(n) if adj[v, u] > 0]
        d = len(nb)
        if d < 2:
            continue
        links = sum(
            1 for a in range(d) for b in range(a + 1, d) if adj[nb[a], nb[b]] > 0
        )
        cp[v] = 2.0 * links / (d * (d - 1))
    return cp


def efficiency_oracle(adj):
    adj = np.asarray(adj)
    n = adj.shape[0]
    dist = floyd_warshall(adj)
    eff = np.zeros(n)
    for v in range(n):
        eff[v] = math.fsum(
            1.0 / dist[v, u] for u in range(n) if u != v and np.isfinite(dist[v, u])
        ) / (n - 1)
    return eff


def path_length_oracle(adj):
    adj = np.asarray(adj)
    n = adj.shape[0]
    dist = floyd_warshall(adj)
    lp = np.zeros(n)
    for v in range(n):
        finite = [dist[v, u] for u in range(n) if u != v and np.isfinite(dist[v, u])]
        lp[v] = math.fsum(finite) / len(finite) if finite else float(n)
    return lp


def global_efficiency_oracle(adj):
    adj = np.asarray(adj)
    m = adj.shape[0]
    if m < 2:
        return 0.0
    dist = floyd_warshall(adj)
    total = math.fsum(
        1.0 / dist[u, w]
        for u in range(m) for w in range(m)
        if u != w and np.isfinite(dist[u, w])
    )
    return total / (m * (m - 1))


def local_efficiency_oracle(adj):
    adj = np.asarray(adj)
    n = adj.shape[0]
    out = np.zeros(n)
    for v in range(n):
        nb = [u for u in range(n) if adj[v, u] > 0]
        if len(nb) >= 2:
            out[v] = global_efficiency_oracle(adj[np.ix_(nb, nb)])
    return out


def random_binary_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, 1).astype(float)
    return upper + upper.T


def mc_gumbel_mean(p, tau, draws, seed):
    """Independent Monte Carlo estimate of the two-category concrete mean."""
    rng = np.random.default_rng(seed)
    g = rng.gumbel(size=(draws, 2))
    top = (math.log(p) + g[:, 0]) / tau
    bottom = (math.log(1.0 - p) + g[:, 1]) / tau
    return float((1.0 / (1.0 + np.exp(bottom - top))).mean())


def random_psd_normalized(rng, n):
    b = rng.standard_normal((n, n))
    k = b @ b.T
    return k / np.trace(k)


def shannon_bits(matrix, floor=1e-12):
    lam = np.linalg.eigvalsh(np.asarray(matrix))
    lam = lam[lam > floor]
    return float(-(lam * np.log2(lam)).sum())


def central_difference(f, x, step=1e-5):
    """Central finite differences of a scalar function over a numpy array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (f(xp) - f(xm)) / (2.0 * step)
        it.iternext()
    return grad

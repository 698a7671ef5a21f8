"""Brute-force reference implementations used by the tests.

Everything here works on individual subjects or enumerates whole spaces
(labelled trees, pairings, label assignments).  None of it shares code with
the package beyond the input types.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations, product

import numpy as np


def random_distance(rng, K, values=(1, 2, 3)):
    d = np.zeros((K, K), dtype=np.int64)
    for i, j in combinations(range(K), 2):
        d[i, j] = d[j, i] = rng.choice(values)
    return d


def random_counts(rng, K, n_max, n_min=None):
    """Per-category (a, b) counts with every margin positive and N <= n_max."""
    n_min = K if n_min is None else max(K, n_min)
    N = int(rng.integers(n_min, n_max + 1))
    m = np.ones(K, dtype=np.int64)
    for k in rng.integers(0, K, N - K):
        m[k] += 1
    a = np.array([rng.integers(0, mk + 1) for mk in m])
    return a, m - a


def subjects(m):
    return [k for k, mk in enumerate(m) for _ in range(mk)]


def labels_for(a, m):
    """Group labels in category-major order, group a first in each category."""
    out = []
    for ak, mk in zip(a, m):
        out += [0] * int(ak) + [1] * int(mk - ak)
    return out


@lru_cache(maxsize=None)
def all_labelled_trees(n):
    """Every labelled tree on ``n`` nodes, decoded from Pruefer sequences.

    Returned as an int array of shape (n ** (n - 2), n - 1, 2).
    """
    if n == 1:
        return np.zeros((1, 0, 2), dtype=np.int64)
    if n == 2:
        return np.array([[[0, 1]]])
    trees = []
    for seq in product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        edges = []
        for x in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            edges.append((leaf, x))
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = [i for i in range(n) if degree[i] == 1]
        edges.append((u, v))
        trees.append(edges)
    return np.array(trees)


def subject_distance(d, m):
    cats = subjects(m)
    return np.array([[d[ci][cj] for cj in cats] for ci in cats])


def amst_bruteforce(d, a, m):
    """Mean cross-group edge count over every minimum spanning tree on subjects."""
    cats = subjects(m)
    n = len(cats)
    if n == 1:
        return 0.0
    D = subject_distance(d, m)
    lab = np.array(labels_for(a, m))
    trees = all_labelled_trees(n)
    w = D[trees[..., 0], trees[..., 1]].sum(axis=1)
    best = trees[w == w.min()]
    cross = (lab[best[..., 0]] != lab[best[..., 1]]).sum(axis=1)
    return float(cross.mean())


def spanning_trees_bruteforce(d):
    """All spanning trees of the complete graph on ``len(d)`` nodes with weights."""
    K = len(d)
    edges = list(combinations(range(K), 2))
    out = []
    for sub in combinations(edges, K - 1):
        parent = list(range(K))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for u, v in sub:
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            out.append((frozenset(sub), sum(d[u][v] for u, v in sub)))
    return out


def msts_bruteforce(d):
    trees = spanning_trees_bruteforce(d)
    best = min(w for _, w in trees)
    return [t for t, w in trees if w == best], best


def perfect_pairings(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in perfect_pairings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + tail


def amdp_bruteforce(d, a, m):
    """Mean cross-group pairs over minimum-weight perfect pairings of subjects.

    For odd N a pseudo subject at distance 0 from everyone is added and its
    pair dropped.
    """
    D = subject_distance(d, m).astype(float)
    lab = labels_for(a, m)
    n = len(lab)
    pseudo = None
    if n % 2:
        pseudo = n
        D = np.pad(D, ((0, 1), (0, 1)))
        lab = lab + [-1]
        n += 1
    scored = []
    for p in perfect_pairings(range(n)):
        w = sum(D[i, j] for i, j in p)
        cross = sum(1 for i, j in p if pseudo not in (i, j) and lab[i] != lab[j])
        scored.append((w, cross))
    best = min(w for w, _ in scored)
    hits = [c for w, c in scored if abs(w - best) < 1e-9]
    return sum(hits) / len(hits)


def category_pair_set(c0_edges, m):
    """Subject pairs joined when categories are equal or adjacent in C0."""
    cats = subjects(m)
    adj = {frozenset(e) for e in c0_edges}
    n = len(cats)
    return [(i, j) for i, j in combinations(range(n), 2)
            if cats[i] == cats[j] or frozenset((cats[i], cats[j])) in adj]


def r_c0_loop(a, m, c0_edges):
    """The averaged mixing statistic by explicit loops over categories and edges."""
    b = [mk - ak for ak, mk in zip(a, m)]
    total = 0.0
    for k in range(len(m)):
        total += 2 * a[k] * b[k] / m[k]
    for u, v in c0_edges:
        total += (a[u] * b[v] + a[v] * b[u]) / (m[u] * m[v])
    return total


def exhaustive_moments(m, n_a, fn):
    """Mean and variance of ``fn(subject_labels)`` over every choice of n_a subjects."""
    N = sum(m)
    vals = []
    for chosen in combinations(range(N), n_a):
        lab = [1] * N
        for i in chosen:
            lab[i] = 0
        vals.append(fn(lab))
    vals = np.array(vals, dtype=float)
    return vals.mean(), vals.var()


def counts_from_labels(lab, m):
    a, i = [], 0
    for mk in m:
        a.append(sum(1 for x in lab[i:i + mk] if x == 0))
        i += mk
    return a

"""Graphs on categories: MSTs and their union, MST counting and enumeration,
nearest-neighbour graphs, minimum-distance pairings and tree embeddings.

Everything here works on dense category indices ``0..K-1``.  Edge weights are
first mapped to integer *weight levels* (``weight_levels``) so that ties are
decided once, exactly for integer matrices and with an absolute tolerance of
``TIE_TOL`` for real-valued ones.  All MST-type algorithms then run on levels.

MST structure is handled by weight class: processing levels in increasing
order, the components of the forest built from strictly lighter edges are the
same for every MST.  The edges of the current level that join two different
components form a small multigraph on those components (a *block* per
connected piece); the MSTs are exactly the products of one spanning tree per
block over all levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb, prod
from typing import Iterable, Iterator, Sequence

import numpy as np

from .distance import DistanceMatrix
from .table import ContingencyTable

TIE_TOL = 1e-9
DEFAULT_CAP = 10**6
MAX_MATCHING_NODES = 16
PSEUDO = -1


class CapExceeded(RuntimeError):
    """An enumeration would produce more objects than allowed."""

    def __init__(self, count: int, cap: int, what: str = "MSTs"):
        self.count = count
        self.cap = cap
        super().__init__(f"{what}: count {count} exceeds cap {cap}")


class SubsetTooLarge(ValueError):
    pass


class GraphError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class CategoryGraph:
    """Simple undirected graph on categories ``0..K-1``."""

    K: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self loop at {u}")
            if not (0 <= u < self.K and 0 <= v < self.K):
                raise GraphError(f"edge ({u}, {v}) out of range for K={self.K}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, edge) -> bool:
        u, v = edge
        return (min(u, v), max(u, v)) in set(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.K, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.K)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return nb

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        e = np.asarray(self.edges, dtype=np.int64)
        return e[:, 0], e[:, 1]

    def is_spanning_tree(self) -> bool:
        if len(self.edges) != self.K - 1:
            return False
        uf = UnionFind(self.K)
        return all(uf.union(u, v) for u, v in self.edges)

    def weight(self, d: DistanceMatrix):
        return sum(d.values[u, v] for u, v in self.edges)

    def to_csv(self, ids: Sequence[str]) -> str:
        return "".join(f"{ids[u]},{ids[v]}\n" for u, v in self.edges)

    def to_dot(self, ids: Sequence[str], table: ContingencyTable | None = None, name: str = "C0") -> str:
        lines = [f"graph {name} {{"]
        for k in range(self.K):
            label = ids[k]
            if table is not None:
                label = f"{label} ({table.counts_a[k]}, {table.counts_b[k]})"
            lines.append(f'  n{k} [label="{label}"];')
        for u, v in self.edges:
            lines.append(f"  n{u} -- n{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GraphSummary:
    degree: np.ndarray           # |E_u|
    two_hop: np.ndarray          # |E_{u,2}|: edges touching a neighbour of u
    neighbor_mass: np.ndarray    # sum of m_v over neighbours v of u
    margins: np.ndarray
    n_edges: int
    max_degree: int              # lambda
    max_count: int               # beta
    sum_deg_over_m: float
    sum_deg2_over_m: float
    sum_inv_edge_mass: float     # sum over edges of 1/(m_u m_v)
    sum_inv_m: float


Matching = tuple[tuple[int, int], ...]


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.n_sets = n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        self.n_sets -= 1
        return True


# ---------------------------------------------------------------------------
# weight levels and weight-class blocks


def weight_levels(d: DistanceMatrix, tol: float = TIE_TOL) -> np.ndarray:
    """Replace distances by dense integer tie classes (0 = lightest).

    Integer matrices compare exactly; real matrices merge sorted values whose
    consecutive gaps are at most ``tol``.
    """
    vals = d.values
    uniq = np.unique(vals)
    if d.is_integer or uniq.size < 2:
        codes = np.arange(uniq.size)
    else:
        codes = np.concatenate([[0], np.cumsum(np.diff(uniq) > tol)])
    return codes[np.searchsorted(uniq, vals)]


def _sorted_edges(levels: np.ndarray) -> np.ndarray:
    """All pairs u < v as rows (level, u, v), sorted lexicographically."""
    K = levels.shape[0]
    iu, iv = np.triu_indices(K, k=1)
    lv = levels[iu, iv]
    order = np.lexsort((iv, iu, lv))
    return np.stack([lv[order], iu[order], iv[order]], axis=1)


@dataclass(frozen=True)
class _Block:
    level: int
    nodes: tuple[int, ...]                  # component representatives
    edges: tuple[tuple[int, int], ...]      # original category pairs
    ends: tuple[tuple[int, int], ...]       # block-local endpoints per edge


def _weight_class_blocks(d: DistanceMatrix) -> list[_Block]:
    """Blocks of every weight class that contribute to some MST."""
    K = d.K
    if K <= 1:
        return []
    edges = _sorted_edges(weight_levels(d))
    bounds = np.flatnonzero(np.diff(edges[:, 0])) + 1
    starts = np.concatenate([[0], bounds])
    stops = np.concatenate([bounds, [len(edges)]])
    uf = UnionFind(K)
    blocks: list[_Block] = []
    for start, stop in zip(starts.tolist(), stops.tolist()):
        if uf.n_sets == 1:
            break
        level = int(edges[start, 0])
        live = []
        for u, v in edges[start:stop, 1:].tolist():
            ru, rv = uf.find(u), uf.find(v)
            if ru != rv:
                live.append((u, v, ru, rv))
        if not live:
            continue
        # connected pieces of the class multigraph on current components
        comps = sorted({t[2] for t in live} | {t[3] for t in live})
        pos = {c: i for i, c in enumerate(comps)}
        local = UnionFind(len(comps))
        for _, _, ru, rv in live:
            local.union(pos[ru], pos[rv])
        groups: dict[int, list] = {}
        for t in live:
            groups.setdefault(local.find(pos[t[2]]), []).append(t)
        for grp in groups.values():
            nodes = sorted({t[2] for t in grp} | {t[3] for t in grp})
            lpos = {c: i for i, c in enumerate(nodes)}
            blocks.append(_Block(
                level=level,
                nodes=tuple(nodes),
                edges=tuple((t[0], t[1]) for t in grp),
                ends=tuple((lpos[t[2]], lpos[t[3]]) for t in grp),
            ))
        for u, v, _, _ in live:
            uf.union(u, v)
    return blocks


# ---------------------------------------------------------------------------
# MST, uMST, counting


def mst_single(d: DistanceMatrix) -> CategoryGraph:
    """One MST, choosing the lexicographically smallest edge among ties.

    Edges are scanned in ``(weight level, u, v)`` order (Kruskal), which
    gives the same deterministic tree on every call.
    """
    K = d.K
    uf = UnionFind(K)
    chosen = []
    if K > 1:
        for _, u, v in _sorted_edges(weight_levels(d)):
            if uf.union(int(u), int(v)):
                chosen.append((int(u), int(v)))
                if len(chosen) == K - 1:
                    break
    return CategoryGraph(K, tuple(chosen))


def umst_edges(d: DistanceMatrix) -> CategoryGraph:
    """Union of all MSTs.

    An edge lies in some MST iff its endpoints are in different components
    of the forest spanned by all strictly lighter edges.
    """
    edges = [e for b in _weight_class_blocks(d) for e in b.edges]
    return CategoryGraph(d.K, tuple(edges))


def bareiss_det(mat: list[list[int]]) -> int:
    """Exact determinant of an integer matrix (fraction-free elimination)."""
    a = [list(map(int, row)) for row in mat]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        akk = a[k][k]
        rowk = a[k]
        for i in range(k + 1, n):
            aik = a[i][k]
            rowi = a[i]
            for j in range(k + 1, n):
                rowi[j] = (rowi[j] * akk - aik * rowk[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def count_spanning_trees(n_nodes: int, ends: Iterable[tuple[int, int]]) -> int:
    """Matrix-Tree count for a multigraph given as endpoint pairs."""
    if n_nodes <= 1:
        return 1
    lap = [[0] * n_nodes for _ in range(n_nodes)]
    for u, v in ends:
        if u == v:
            continue
        lap[u][u] += 1
        lap[v][v] += 1
        lap[u][v] -= 1
        lap[v][u] -= 1
    return bareiss_det([row[1:] for row in lap[1:]])


def count_msts(d: DistanceMatrix) -> int:
    """Exact number of distinct MSTs, without enumerating them."""
    return prod(count_spanning_trees(len(b.nodes), b.ends) for b in _weight_class_blocks(d))


def hypercube_tree_count(length: int) -> int:
    """Closed-form spanning-tree count of the ``length``-dimensional hypercube.

    With all ``2**length`` binary strings present and Hamming distance, the
    unit-distance edges form the hypercube and every MST is one of its
    spanning trees.
    """
    n = length
    return 2 ** (2**n - n - 1) * prod(i ** comb(n, i) for i in range(2, n + 1))


# ---------------------------------------------------------------------------
# enumeration


def _block_spanning_trees(n_nodes: int, ends: Sequence[tuple[int, int]]) -> Iterator[tuple[int, ...]]:
    """Spanning trees of a connected multigraph, as tuples of edge indices.

    Binary include/exclude search over edges in index order.  Excluding an
    edge is only tried when the remaining graph stays connected, and
    including one only when it closes no cycle, so every leaf is a tree.
    """
    m = len(ends)

    def connected(labels: list[int], start: int) -> bool:
        uf = UnionFind(n_nodes)
        for x in range(n_nodes):
            uf.union(x, labels[x])
        for i in range(start, m):
            uf.union(*ends[i])
        return uf.n_sets == 1

    def find(labels, x):
        while labels[x] != x:
            x = labels[x]
        return x

    def rec(labels: list[int], i: int, chosen: list[int], needed: int):
        if needed == 0:
            yield tuple(chosen)
            return
        while i < m:
            ru, rv = find(labels, ends[i][0]), find(labels, ends[i][1])
            if ru != rv:
                break
            i += 1
        if i >= m:
            return
        new = labels.copy()
        new[max(ru, rv)] = min(ru, rv)
        chosen.append(i)
        yield from rec(new, i + 1, chosen, needed - 1)
        chosen.pop()
        if connected(labels, i + 1):
            yield from rec(labels, i + 1, chosen, needed)

    if n_nodes <= 1:
        yield ()
        return
    yield from rec(list(range(n_nodes)), 0, [], n_nodes - 1)


def _block_trees(b: _Block) -> list[tuple[tuple[int, int], ...]]:
    return [tuple(b.edges[i] for i in t) for t in _block_spanning_trees(len(b.nodes), b.ends)]


def enumerate_msts(d: DistanceMatrix, cap: int = DEFAULT_CAP) -> list[CategoryGraph]:
    """All distinct MSTs, in a deterministic order.

    Raises :class:`CapExceeded` when there are more than ``cap`` of them.
    """
    blocks = _weight_class_blocks(d)
    M = prod(count_spanning_trees(len(b.nodes), b.ends) for b in blocks)
    if M > cap:
        raise CapExceeded(M, cap)
    per_block = [_block_trees(b) for b in blocks]
    return [
        CategoryGraph(d.K, tuple(e for part in combo for e in part))
        for combo in product(*per_block)
    ]


def amst_edge_weights(d: DistanceMatrix, margins: Sequence[int], cap: int = DEFAULT_CAP) -> dict[tuple[int, int], float]:
    """Share of embedding-weighted MSTs that contain each uMST edge.

    An MST ``t`` on categories is weighted by its number of embeddings on
    subjects, ``prod_k m_k ** deg_k(t)`` = ``prod_{(u,v) in t} m_u m_v``.
    Because that weight factorises over edges and the MST set factorises over
    weight-class blocks, the share of an edge is computed inside its own
    block; the result equals the sum over the full MST list.
    """
    blocks = _weight_class_blocks(d)
    M = prod(count_spanning_trees(len(b.nodes), b.ends) for b in blocks)
    if M > cap:
        raise CapExceeded(M, cap)
    m = [int(x) for x in margins]
    out: dict[tuple[int, int], float] = {}
    for b in blocks:
        trees = _block_trees(b)
        if len(trees) == 1:
            for e in trees[0]:
                out[e] = 1.0
            continue
        total = 0
        acc = {e: 0 for e in b.edges}
        for t in trees:
            w = prod(m[u] * m[v] for u, v in t)
            total += w
            for e in t:
                acc[e] += w
        for e, s in acc.items():
            if s:
                out[e] = s / total
    return out


def count_embeddings(tree: CategoryGraph, table: ContingencyTable) -> int:
    """Number of ways to realise a category tree on subjects."""
    if tree.K != table.K or not tree.is_spanning_tree():
        raise GraphError("not a spanning tree of the table's categories")
    deg = tree.degrees()
    return prod(int(m) ** int(k) for m, k in zip(table.margins, deg))


def cayley_count(m: int) -> int:
    """Labelled trees on ``m`` nodes."""
    if m < 1:
        raise ValueError("cayley_count needs m >= 1")
    return 1 if m <= 2 else m ** (m - 2)


# ---------------------------------------------------------------------------
# nearest-neighbour graph


def unng_categories(d: DistanceMatrix) -> CategoryGraph:
    """Link each category to every category at its minimum distance."""
    K = d.K
    if K < 2:
        raise GraphError("nearest-neighbour graph needs K >= 2")
    lv = weight_levels(d).astype(np.int64)
    np.fill_diagonal(lv, np.iinfo(np.int64).max)
    row_min = lv.min(axis=1)
    hit = lv == row_min[:, None]
    hit |= hit.T
    iu, iv = np.nonzero(np.triu(hit, k=1))
    return CategoryGraph(K, tuple(zip(iu.tolist(), iv.tolist())))


# ---------------------------------------------------------------------------
# minimum-distance pairings


def _pair_costs(d: DistanceMatrix, nodes: Sequence[int]) -> np.ndarray:
    idx = [n for n in nodes if n != PSEUDO]
    n = len(nodes)
    cost = np.zeros((n, n), dtype=d.values.dtype)
    pos = [i for i, x in enumerate(nodes) if x != PSEUDO]
    cost[np.ix_(pos, pos)] = d.values[np.ix_(idx, idx)]
    return cost


def enumerate_min_matchings(
    d: DistanceMatrix,
    nodes: Sequence[int],
    cap: int = DEFAULT_CAP,
    pseudo: bool = False,
    max_nodes: int = MAX_MATCHING_NODES,
) -> list[Matching]:
    """All minimum-total-distance perfect pairings of ``nodes``.

    With ``pseudo=True`` an extra node :data:`PSEUDO` at distance 0 from
    every other node is added.  Pairs are reported as ``(u, v)`` with
    ``u < v`` (the pseudo node sorts first), pairings sorted.
    """
    nodes = [int(x) for x in nodes]
    if len(set(nodes)) != len(nodes):
        raise GraphError("duplicate node")
    if pseudo:
        nodes = [PSEUDO] + nodes
    n = len(nodes)
    if n % 2:
        raise GraphError("perfect pairing needs an even number of nodes")
    if n > max_nodes:
        raise SubsetTooLarge(f"{n} nodes exceeds the brute-force limit of {max_nodes}")
    if n == 0:
        return [()]
    cost = _pair_costs(d, nodes).tolist()
    exact = d.is_integer
    tol = 0 if exact else TIE_TOL * n
    full = (1 << n) - 1

    best: dict[int, float] = {0: 0}

    def solve(mask: int):
        if mask in best:
            return best[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        val = None
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            c = cost[i][j] + solve(rest & ~(1 << j))
            if val is None or c < val:
                val = c
        best[mask] = val
        return val

    solve(full)

    counts: dict[int, int] = {0: 1}

    def n_opt(mask: int) -> int:
        if mask in counts:
            return counts[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            sub = rest & ~(1 << j)
            if cost[i][j] + solve(sub) <= best[mask] + tol:
                total += n_opt(sub)
        counts[mask] = total
        return total

    total = n_opt(full)
    if total > cap:
        raise CapExceeded(total, cap, "minimum pairings")

    out: list[Matching] = []

    def walk(mask: int, acc: list):
        if mask == 0:
            out.append(tuple(sorted(acc)))
            return
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            sub = rest & ~(1 << j)
            if cost[i][j] + solve(sub) <= best[mask] + tol:
                a, b = nodes[i], nodes[j]
                acc.append((min(a, b), max(a, b)))
                walk(sub, acc)
                acc.pop()

    walk(full, [])
    return sorted(out)


# ---------------------------------------------------------------------------
# summaries


def graph_summary(g: CategoryGraph, table: ContingencyTable) -> GraphSummary:
    if g.K != table.K:
        raise GraphError(f"graph has K={g.K}, table has K={table.K}")
    m = table.margins.astype(np.int64)
    deg = g.degrees()
    nb = g.neighbors()
    two_hop = np.zeros(g.K, dtype=np.int64)
    mass = np.zeros(g.K, dtype=np.int64)
    for u in range(g.K):
        vs = set(nb[u])
        # edges with at least one endpoint among u's neighbours
        touching = {e for v in vs for e in _incident(nb, v)}
        two_hop[u] = len(touching)
        mass[u] = int(m[list(vs)].sum()) if vs else 0
    U, V = g.edge_arrays()
    return GraphSummary(
        degree=deg,
        two_hop=two_hop,
        neighbor_mass=mass,
        margins=m,
        n_edges=len(g),
        max_degree=int(deg.max(initial=0)),
        max_count=int(m.max(initial=0)),
        sum_deg_over_m=float(np.sum(deg / m)),
        sum_deg2_over_m=float(np.sum(deg.astype(float) ** 2 / m)),
        sum_inv_edge_mass=float(np.sum(1.0 / (m[U] * m[V]))) if len(U) else 0.0,
        sum_inv_m=float(np.sum(1.0 / m)),
    )


def _incident(nb: list[list[int]], v: int):
    return ((min(v, w), max(v, w)) for w in nb[v])


def build_graph(kind: str, d: DistanceMatrix) -> CategoryGraph:
    """Category graph by name: ``mst``, ``umst`` or ``c-unng``."""
    kind = kind.lower()
    if kind == "mst":
        return mst_single(d)
    if kind in ("umst", "c-umst"):
        return umst_edges(d)
    if kind in ("c-unng", "unng"):
        return unng_categories(d) if d.K > 1 else CategoryGraph(d.K, ())
    raise GraphError(f"unknown graph kind {kind!r}")

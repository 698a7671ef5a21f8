"""Test statistics for two-sample comparison of categorical data.

Every graph statistic counts (or averages) edges joining subjects of
different groups, so *small* values are evidence that the groups differ.
Pearson and deviance statistics point the other way; their prepared forms
carry ``tail="upper"``.

Under relabelling with fixed category margins, each statistic is a function
of the group-a count vector alone.  :func:`prepare` builds that function once
per table; the public ``r_*`` / ``t_c0`` / ``chisq`` helpers evaluate it on the
observed counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import comb, factorial, prod
from typing import Any, Sequence

import numpy as np

from . import catgraph
from .catgraph import CategoryGraph, DEFAULT_CAP, PSEUDO
from .distance import DistanceMatrix
from .table import ContingencyTable

MAX_ODD_CATEGORIES = 16

GRAPH_KINDS = ("aMST", "uMST", "aMDP", "uNNG", "C-uMST", "C-uNNG", "C-MST", "R_C0", "T_C0")
KINDS = GRAPH_KINDS + ("pearson", "deviance")


class TooManyOddCategories(ValueError):
    def __init__(self, k0: int, limit: int):
        self.k0 = k0
        super().__init__(f"{k0} categories with odd counts; limit is {limit}")


@dataclass(frozen=True)
class StatisticValue:
    kind: str
    value: float
    metadata: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# subject-level definition


def cross_edge_count(edges, labels: Sequence[str]) -> int:
    """Edges of a graph on subjects whose endpoints carry different labels."""
    return sum(1 for i, j in edges if labels[i] != labels[j])


# ---------------------------------------------------------------------------
# prepared statistics


class PreparedStatistic:
    """A statistic as a function of group-a counts for fixed margins.

    Calling it with an array of shape ``(..., K)`` returns values of shape
    ``(...)``.
    """

    kind: str
    tail = "lower"

    def __init__(self, kind: str, margins: np.ndarray, metadata: dict | None = None):
        self.kind = kind
        self.margins = np.asarray(margins, dtype=np.int64)
        self.metadata = metadata or {}

    def __call__(self, counts_a) -> np.ndarray:
        raise NotImplementedError

    def value(self, table: ContingencyTable) -> StatisticValue:
        if not np.array_equal(table.margins, self.margins):
            raise ValueError("table margins differ from the prepared statistic")
        return StatisticValue(self.kind, float(self(table.counts_a)), dict(self.metadata))


class EdgeMixing(PreparedStatistic):
    """Node mixing plus weighted edge mixing over a category graph.

    ``normalized=True`` gives the averaged form
    ``sum 2 a b / m + sum w (a_u b_v + a_v b_u) / (m_u m_v)``;
    ``normalized=False`` gives the raw cross-pair count
    ``sum a b + sum w (a_u b_v + a_v b_u)``.
    """

    def __init__(self, kind, margins, graph: CategoryGraph, normalized: bool,
                 weights=None, metadata=None):
        super().__init__(kind, margins, metadata)
        self.graph = graph
        self.normalized = normalized
        self.U, self.V = graph.edge_arrays()
        w = np.ones(len(self.U)) if weights is None else np.asarray(weights, dtype=float)
        m = self.margins.astype(float)
        if normalized:
            self.node_coef = 2.0 / m
            self.edge_coef = w / (m[self.U] * m[self.V])
        else:
            self.node_coef = np.ones_like(m)
            self.edge_coef = w

    def __call__(self, counts_a):
        a = np.asarray(counts_a, dtype=float)
        b = self.margins - a
        node = (a * b) @ self.node_coef
        if len(self.U) == 0:
            return node
        cross = a[..., self.U] * b[..., self.V] + a[..., self.V] * b[..., self.U]
        return node + cross @ self.edge_coef


class MinPairing(PreparedStatistic):
    """Average cross-group pairs over minimum-distance pairings of subjects."""

    def __init__(self, margins, d: DistanceMatrix, cap=DEFAULT_CAP, max_odd=MAX_ODD_CATEGORIES):
        margins = np.asarray(margins, dtype=np.int64)
        odd = np.flatnonzero(margins % 2 == 1)
        pseudo = int(margins.sum()) % 2 == 1
        k0 = len(odd) + pseudo
        if k0 > max_odd:
            raise TooManyOddCategories(k0, max_odd)
        matchings = catgraph.enumerate_min_matchings(
            d, odd.tolist(), cap=cap, pseudo=pseudo, max_nodes=max_odd)
        freq: dict[tuple[int, int], float] = {}
        for mt in matchings:
            for u, v in mt:
                if u != PSEUDO:
                    freq[(u, v)] = freq.get((u, v), 0.0) + 1.0
        super().__init__("aMDP", margins, {
            "odd_categories": len(odd), "pseudo_category": pseudo,
            "n_min_pairings": len(matchings),
        })
        self.matchings = matchings
        self.odd = odd
        pairs = sorted(freq)
        self.PU = np.array([p[0] for p in pairs], dtype=np.int64)
        self.PV = np.array([p[1] for p in pairs], dtype=np.int64)
        self.pair_freq = np.array([freq[p] / len(matchings) for p in pairs])
        # per category lookup over a = 0..m_k of the within-category terms
        width = int(margins.max()) + 1
        table = np.zeros((len(margins), width))
        for k, m in enumerate(margins.tolist()):
            for a in range(m + 1):
                b = m - a
                if m % 2 == 0:
                    table[k, a] = r0(a, b)
                else:
                    # one representative leaves the category to pair elsewhere
                    ra = r0(a - 1, b) if a else 0.0
                    rb = r0(a, b - 1) if b else 0.0
                    table[k, a] = (a * ra + b * rb) / m
        self.lookup = table
        self.rows = np.arange(len(margins))

    def __call__(self, counts_a):
        a = np.asarray(counts_a, dtype=np.int64)
        within = self.lookup[self.rows, a].sum(axis=-1)
        if len(self.PU) == 0:
            return within
        p = a / self.margins
        pu, pv = p[..., self.PU], p[..., self.PV]
        return within + (pu * (1 - pv) + pv * (1 - pu)) @ self.pair_freq


class ChiSquare(PreparedStatistic):
    tail = "upper"

    def __init__(self, kind, margins, n_a: int):
        super().__init__(kind, margins)
        m = self.margins.astype(float)
        N = m.sum()
        if n_a <= 0 or n_a >= N:
            raise ValueError("chi-square needs both groups non-empty")
        self.exp_a = n_a * m / N
        self.exp_b = (N - n_a) * m / N

    def __call__(self, counts_a):
        a = np.asarray(counts_a, dtype=float)
        b = self.margins - a
        if self.kind == "pearson":
            return ((a - self.exp_a) ** 2 / self.exp_a).sum(-1) + ((b - self.exp_b) ** 2 / self.exp_b).sum(-1)
        return 2 * (_xlogy_ratio(a, self.exp_a).sum(-1) + _xlogy_ratio(b, self.exp_b).sum(-1))


def _xlogy_ratio(o, e):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(o > 0, o * np.log(np.where(o > 0, o, 1) / e), 0.0)


def unng_subject_graph(margins, d: DistanceMatrix) -> CategoryGraph:
    """Category pairs joined in the union nearest-neighbour graph on subjects.

    A subject with category-mates has them at distance 0 and links only to
    them; a subject alone in its category links to every subject of its
    nearest categories.
    """
    margins = np.asarray(margins)
    if d.K < 2:
        return CategoryGraph(d.K, ())
    nn = catgraph.unng_categories(d)
    lv = catgraph.weight_levels(d).astype(np.int64)
    np.fill_diagonal(lv, np.iinfo(np.int64).max)
    row_min = lv.min(axis=1)
    edges = []
    for u, v in nn.edges:
        if (margins[u] == 1 and lv[u, v] == row_min[u]) or (margins[v] == 1 and lv[u, v] == row_min[v]):
            edges.append((u, v))
    return CategoryGraph(d.K, tuple(edges))


def prepare(kind: str, table: ContingencyTable, d: DistanceMatrix | None = None,
            c0: CategoryGraph | None = None, cap: int = DEFAULT_CAP) -> PreparedStatistic:
    """Build the count-vector form of statistic ``kind`` for ``table``."""
    m = table.margins
    if kind in ("pearson", "deviance"):
        return ChiSquare(kind, m, table.n_a)
    if kind in ("R_C0", "T_C0"):
        if c0 is None:
            raise ValueError(f"{kind} needs a category graph")
        _check_size(c0, table)
        return EdgeMixing(kind, m, c0, normalized=(kind == "R_C0"), metadata={"graph": "custom", "edges": len(c0)})
    if d is None:
        raise ValueError(f"{kind} needs a distance matrix")
    if d.K != table.K:
        raise ValueError(f"distance matrix has K={d.K}, table has K={table.K}")
    if kind == "aMST":
        M = catgraph.count_msts(d)
        weights = catgraph.amst_edge_weights(d, m, cap=cap)
        g = CategoryGraph(table.K, tuple(weights))
        w = [weights[e] for e in g.edges]
        return EdgeMixing(kind, m, g, normalized=True, weights=w,
                          metadata={"graph": "MST", "n_msts": M, "edges": len(g)})
    if kind == "uMST":
        g = catgraph.umst_edges(d)
        return EdgeMixing(kind, m, g, normalized=False, metadata={"graph": "uMST", "edges": len(g)})
    if kind in ("C-uMST", "C-uNNG", "C-MST"):
        g = catgraph.build_graph({"C-uMST": "umst", "C-uNNG": "c-unng", "C-MST": "mst"}[kind], d)
        return EdgeMixing(kind, m, g, normalized=True, metadata={"graph": kind, "edges": len(g)})
    if kind == "aMDP":
        return MinPairing(m, d, cap=cap)
    if kind == "uNNG":
        g = unng_subject_graph(m, d)
        return EdgeMixing(kind, m, g, normalized=False, metadata={"graph": "uNNG on subjects", "edges": len(g)})
    raise ValueError(f"unknown statistic {kind!r}")


def _check_size(c0: CategoryGraph, table: ContingencyTable):
    if c0.K != table.K:
        raise ValueError(f"graph has K={c0.K}, table has K={table.K}")


# ---------------------------------------------------------------------------
# public statistics


def r_amst(table: ContingencyTable, d: DistanceMatrix, cap: int = DEFAULT_CAP) -> StatisticValue:
    """Average cross-group edge count over all MSTs on subjects.

    Raises :class:`~gbtest.catgraph.CapExceeded` when the categories have more
    than ``cap`` MSTs; ``r_c0`` on the uMST is the tractable alternative.
    """
    return prepare("aMST", table, d, cap=cap).value(table)


def r_umst(table: ContingencyTable, d: DistanceMatrix) -> StatisticValue:
    return prepare("uMST", table, d).value(table)


def r_c0(table: ContingencyTable, c0: CategoryGraph) -> StatisticValue:
    return prepare("R_C0", table, c0=c0).value(table)


def t_c0(table: ContingencyTable, c0: CategoryGraph) -> StatisticValue:
    return prepare("T_C0", table, c0=c0).value(table)


def r_amdp(table: ContingencyTable, d: DistanceMatrix, cap: int = DEFAULT_CAP,
           max_odd: int = MAX_ODD_CATEGORIES) -> StatisticValue:
    """Average cross-group pairs over minimum-distance pairings.

    Subjects of a category with an even count are paired among themselves;
    one subject from each odd-count category is paired across categories by
    a minimum pairing.  For odd N a zero-distance pseudo category joins the
    odd set and its pair is discarded.
    """
    if d.K != table.K:
        raise ValueError(f"distance matrix has K={d.K}, table has K={table.K}")
    return MinPairing(table.margins, d, cap=cap, max_odd=max_odd).value(table)


def r_unng_subjects(table: ContingencyTable, d: DistanceMatrix) -> StatisticValue:
    if table.N < 2:
        raise ValueError("need at least two subjects")
    return prepare("uNNG", table, d).value(table)


def chisq(table: ContingencyTable, kind: str = "pearson") -> StatisticValue:
    if kind not in ("pearson", "deviance"):
        raise ValueError(f"unknown chi-square kind {kind!r}")
    if table.n_a == 0 or table.n_b == 0:
        raise ValueError("a group margin is zero")
    return prepare(kind, table).value(table)


def compute(kind: str, table: ContingencyTable, d=None, c0=None, cap=DEFAULT_CAP) -> StatisticValue:
    return prepare(kind, table, d, c0, cap).value(table)


# ---------------------------------------------------------------------------
# pairing combinatorics


def double_factorial(n: int) -> int:
    """``n!!`` with ``(-1)!! = 0!! = 1``."""
    if n <= 0:
        return 1
    return prod(range(n, 0, -2))


@lru_cache(maxsize=None)
def r0(n_a: int, n_b: int) -> float:
    """Mean cross-group pairs over all perfect pairings of one category.

    Sums over the possible numbers ``i`` of cross pairs, weighting each by the
    number of pairings that realise it.  ``n_a + n_b`` must be even.
    """
    if n_a < 0 or n_b < 0:
        raise ValueError("negative count")
    if (n_a + n_b) % 2:
        raise ValueError("odd number of subjects cannot be perfectly paired")
    if n_a == 0 or n_b == 0:
        return 0.0
    start = n_a % 2
    num = sum(
        i * comb(n_a, i) * comb(n_b, i) * factorial(i)
        * double_factorial(n_a - i - 1) * double_factorial(n_b - i - 1)
        for i in range(start, min(n_a, n_b) + 1, 2)
    )
    return num / double_factorial(n_a + n_b - 1)


def r_amdp_by_group_patterns(table: ContingencyTable, d: DistanceMatrix, cap: int = DEFAULT_CAP) -> float:
    """Same value as :func:`r_amdp`, summing over every group pattern of the
    odd-category representatives instead of averaging analytically.

    Exponential in the number of odd categories; meant for cross-checks.
    """
    m = table.margins
    na, nb = table.counts_a, table.counts_b
    odd = [int(k) for k in np.flatnonzero(m % 2 == 1)]
    pseudo = table.N % 2 == 1
    matchings = catgraph.enumerate_min_matchings(d, odd, cap=cap, pseudo=pseudo)
    total = sum(r0(int(na[k]), int(nb[k])) for k in range(table.K) if m[k] % 2 == 0)
    acc = 0.0
    for x in product("ab", repeat=len(odd)):
        grp = dict(zip(odd, x))
        weight = prod(int(na[k] if g == "a" else nb[k]) for k, g in grp.items())
        if weight == 0:
            continue
        r_x = sum(
            sum(1 for u, v in mt if u != PSEUDO and grp[u] != grp[v]) for mt in matchings
        ) / len(matchings)
        rest = sum(
            r0(int(na[k]) - 1, int(nb[k])) if g == "a" else r0(int(nb[k]) - 1, int(na[k]))
            for k, g in grp.items()
        )
        acc += weight * (r_x + rest)
    return total + acc / prod(int(m[k]) for k in odd)

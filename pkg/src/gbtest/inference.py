"""Null distributions and p-values.

Permutation null: group labels are shuffled with both group sizes fixed.
Bootstrap null: labels are redrawn independently with the observed group
frequencies.  Tests are one-sided; graph statistics use the lower tail.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from math import comb, prod
from typing import Any, Callable

import numpy as np
from scipy.special import ndtr

from . import stats as _stats
from .catgraph import DEFAULT_CAP, CategoryGraph, graph_summary
from .distance import DistanceMatrix
from .stats import StatisticValue
from .table import ContingencyTable, subject_categories

logger = logging.getLogger(__name__)

CHUNK = 1024
MAX_EXACT = 10**6
# relative slack when comparing permuted values with the observed one
TIE_RTOL = 1e-9


class DegenerateGroups(UserWarning):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class NullMoments:
    mean: float
    variance: float
    p1: float | None = None
    p2: float | None = None
    p3: float | None = None
    p4: float | None = None


@dataclass(frozen=True)
class Diagnostics:
    ratios: dict[str, float]
    flags: list[str]
    threshold: float

    @property
    def questionable(self) -> bool:
        return bool(self.flags)


@dataclass
class TestResult:
    __test__ = False  # not a pytest class

    statistic: StatisticValue
    moments: NullMoments | None = None
    z: float | None = None
    p_normal: float | None = None
    p_perm: float | None = None
    B: int | None = None
    seed: int | None = None
    diagnostics: Diagnostics | None = None
    p_exact: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "statistic": self.statistic.value,
            "kind": self.statistic.kind,
            "mean": None if self.moments is None else self.moments.mean,
            "variance": None if self.moments is None else self.moments.variance,
            "z": self.z,
            "p_normal": self.p_normal,
            "p_perm": self.p_perm,
            "B": self.B,
            "seed": self.seed,
            "diagnostics": None if self.diagnostics is None else {
                "flags": list(self.diagnostics.flags),
                "ratios": dict(self.diagnostics.ratios),
            },
        }
        if self.p_exact is not None:
            out["p_exact"] = self.p_exact
        if self.statistic.metadata:
            out["metadata"] = _jsonable(self.statistic.metadata)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, int) and obj.bit_length() > 53:
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# moments


def _p1_p2(n_a: int, n_b: int) -> tuple[float, float]:
    N = n_a + n_b
    p1 = n_a * n_b / (N * (N - 1))
    p2 = 4 * n_a * (n_a - 1) * n_b * (n_b - 1) / (N * (N - 1) * (N - 2) * (N - 3))
    return p1, p2


def perm_moments_r(table: ContingencyTable, c0: CategoryGraph) -> NullMoments:
    """Permutation mean and variance of the averaged mixing statistic on ``c0``."""
    N, K = table.N, table.K
    if N < 4:
        raise ValueError("permutation moments need N >= 4")
    s = graph_summary(c0, table)
    p1, p2 = _p1_p2(table.n_a, table.n_b)
    C = s.n_edges
    base = N - K + C
    mean = base * 2 * p1
    var = (
        4 * (p1 - p2) * (N - K + 2 * C + s.sum_deg2_over_m / 4 - s.sum_deg_over_m)
        + (6 * p2 - 4 * p1) * (K - s.sum_inv_m)
        + p2 * s.sum_inv_edge_mass
        + base**2 * (p2 - 4 * p1**2)
    )
    return NullMoments(mean, max(var, 0.0), p1, p2)


def perm_moments_t(table: ContingencyTable, c0: CategoryGraph) -> NullMoments:
    """Permutation mean and variance of the raw cross-pair count on ``c0``.

    ``pairs`` is twice the number of subject pairs joined in the union graph
    on subjects; the squared-mean correction uses the pair count itself.
    """
    if table.N < 4:
        raise ValueError("permutation moments need N >= 4")
    s = graph_summary(c0, table)
    m = s.margins.astype(float)
    U, V = c0.edge_arrays()
    pairs = float(np.sum(m * (m - 1)) + 2 * np.sum(m[U] * m[V]))
    p1, p2 = _p1_p2(table.n_a, table.n_b)
    reach = m + s.neighbor_mass
    var = (
        (p1 - p2) * float(np.sum(m * (reach - 1) * (reach - 2)))
        + (p1 - p2 / 2) * pairs
        + (p2 - 4 * p1**2) * (pairs / 2) ** 2
    )
    return NullMoments(pairs * p1, max(var, 0.0), p1, p2)


def bootstrap_moments_r(table: ContingencyTable, c0: CategoryGraph) -> NullMoments:
    """Bootstrap-null mean and variance of the averaged mixing statistic."""
    N, K = table.N, table.K
    s = graph_summary(c0, table)
    p3 = table.n_a * table.n_b / N**2
    p4 = 4 * p3**2
    C = s.n_edges
    mean = (N - K + C) * 2 * p3
    var = (
        4 * (p3 - p4) * (N - K + 2 * C + s.sum_deg2_over_m / 4 - s.sum_deg_over_m)
        + (6 * p4 - 4 * p3) * (K - s.sum_inv_m)
        + p4 * s.sum_inv_edge_mass
    )
    return NullMoments(mean, max(var, 0.0), p3=p3, p4=p4)


def moments_for(kind: str, table: ContingencyTable, graph: CategoryGraph | None) -> NullMoments | None:
    """Analytic permutation moments when the statistic admits them."""
    if graph is None or table.N < 4:
        return None
    if kind in ("R_C0", "C-uMST", "C-uNNG", "C-MST"):
        return perm_moments_r(table, graph)
    if kind in ("T_C0", "uMST", "uNNG"):
        return perm_moments_t(table, graph)
    return None


# ---------------------------------------------------------------------------
# p-values


def normal_pvalue(value: float, moments: NullMoments, tail: str = "lower") -> tuple[float, float]:
    if not moments.variance > 0:
        raise ValueError("zero variance")
    z = (value - moments.mean) / np.sqrt(moments.variance)
    p = float(ndtr(z) if tail == "lower" else ndtr(-z))
    return float(z), p


def _chunk_counts(cats: np.ndarray, K: int, n_a: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Group-a counts for ``size`` uniform relabellings."""
    N = cats.size
    keys = rng.random((size, N))
    chosen = np.argpartition(keys, n_a - 1, axis=1)[:, :n_a] if n_a < N else np.tile(np.arange(N), (size, 1))
    flat = (cats[chosen] + K * np.arange(size)[:, None]).ravel()
    return np.bincount(flat, minlength=size * K).reshape(size, K)


def permutation_draws(statistic_fn: Callable, table: ContingencyTable, B: int, seed: int,
                      threads: int | None = None) -> np.ndarray:
    """``B`` statistic values under the permutation null.

    Draws come in chunks of :data:`CHUNK`; chunk ``c`` uses its own stream
    seeded by ``(seed, c)``, so the output does not depend on ``threads``.
    """
    cats = subject_categories(table)
    K, n_a = table.K, table.n_a
    n_chunks = -(-B // CHUNK)

    def run(c: int) -> np.ndarray:
        size = min(CHUNK, B - c * CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(c,)))
        return np.asarray(statistic_fn(_chunk_counts(cats, K, n_a, size, rng)), dtype=float)

    threads = resolve_threads(threads)
    if threads <= 1 or n_chunks == 1:
        parts = [run(c) for c in range(n_chunks)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    return np.concatenate(parts) if parts else np.zeros(0)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CATGRAPH_THREADS", "1") or 1)
    return max(1, int(threads))


def _tail_count(draws: np.ndarray, observed: float, tail: str) -> int:
    slack = TIE_RTOL * max(1.0, abs(observed))
    if tail == "lower":
        return int(np.count_nonzero(draws <= observed + slack))
    return int(np.count_nonzero(draws >= observed - slack))


def mc_perm_pvalue(statistic_fn: Callable, table: ContingencyTable, B: int, seed: int,
                   tail: str | None = None, threads: int | None = None,
                   observed: float | None = None) -> tuple[float, dict]:
    """Monte Carlo permutation p-value ``(1 + #{S_b <= S_obs}) / (B + 1)``.

    ``statistic_fn`` maps an array of group-a count vectors to statistic
    values.  ``tail`` defaults to the function's own ``tail`` attribute, else
    ``"lower"``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    tail = tail or getattr(statistic_fn, "tail", "lower")
    if table.n_a == 0 or table.n_b == 0:
        warnings.warn("one group is empty; returning p = 1", DegenerateGroups, stacklevel=2)
        return 1.0, {"B": B, "degenerate": True}
    if observed is None:
        observed = float(statistic_fn(table.counts_a[None, :])[0])
    draws = permutation_draws(statistic_fn, table, B, seed, threads)
    hits = _tail_count(draws, observed, tail)
    p = (1 + hits) / (B + 1)
    summary = {
        "B": B,
        "observed": observed,
        "hits": hits,
        "mean": float(draws.mean()),
        "variance": float(draws.var()),
        "min": float(draws.min()),
        "max": float(draws.max()),
    }
    return p, summary


@dataclass(frozen=True)
class ExactDistribution:
    """Statistic values over all relabellings, with multiplicities."""

    values: np.ndarray
    counts: np.ndarray   # number of label assignments giving each value

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def mean(self) -> float:
        w = self.counts / self.counts.sum()
        return float(w @ self.values)

    def variance(self) -> float:
        w = self.counts / self.counts.sum()
        mu = w @ self.values
        return float(w @ (self.values - mu) ** 2)

    def pvalue(self, observed: float, tail: str = "lower") -> float:
        slack = TIE_RTOL * max(1.0, abs(observed))
        mask = self.values <= observed + slack if tail == "lower" else self.values >= observed - slack
        return float(self.counts[mask].sum() / self.counts.sum())


def count_vectors(margins, n_a: int):
    """Every group-a count vector with the given margins and total,
    together with the number of label assignments producing it."""
    margins = [int(m) for m in margins]
    K = len(margins)
    suffix = np.cumsum(margins[::-1])[::-1].tolist() + [0]
    vecs, mult = [], []

    def rec(k, left, acc, w):
        if k == K:
            if left == 0:
                vecs.append(list(acc))
                mult.append(w)
            return
        lo = max(0, left - suffix[k + 1])
        for a in range(lo, min(margins[k], left) + 1):
            acc.append(a)
            rec(k + 1, left - a, acc, w * comb(margins[k], a))
            acc.pop()

    rec(0, n_a, [], 1)
    return np.array(vecs, dtype=np.int64).reshape(-1, K), mult


def exact_perm_distribution(statistic_fn: Callable, table: ContingencyTable,
                            max_assignments: int = MAX_EXACT) -> ExactDistribution:
    n_assign = comb(table.N, table.n_a)
    if n_assign > max_assignments:
        raise TooLarge(f"{n_assign} label assignments exceeds {max_assignments}")
    vecs, mult = count_vectors(table.margins, table.n_a)
    values = np.asarray(statistic_fn(vecs), dtype=float)
    return ExactDistribution(values, np.array(mult, dtype=float))


def exact_bootstrap_moments(statistic_fn: Callable, table: ContingencyTable) -> tuple[float, float]:
    """Mean and variance when every label is drawn i.i.d. with P(a) = n_a/N.

    Sums over every per-category count vector; use on small tables only.
    """
    pa = table.n_a / table.N
    mean = sq = 0.0
    for a in product(*[range(int(m) + 1) for m in table.margins]):
        a = np.array(a)
        w = prod(comb(int(m), int(x)) * pa**int(x) * (1 - pa) ** int(m - x)
                 for m, x in zip(table.margins, a))
        v = float(statistic_fn(a[None, :])[0])
        mean += w * v
        sq += w * v * v
    return mean, sq - mean**2


# ---------------------------------------------------------------------------
# diagnostics


HUB_RATIOS = ("hub_nodes_over_K1.5", "hub_edges_over_K1.5", "beta6_lambda2_over_K", "lambda8_over_K")
GROWTH_RATIOS = ("N_over_K", "edges_over_K", "inv_edge_mass_over_K", "t_reach_over_N")


def condition_diagnostics(table: ContingencyTable, c0: CategoryGraph, threshold: float = 1.0,
                          growth_threshold: float = 100.0) -> Diagnostics:
    """Size ratios behind the normal approximation; advisory only.

    Hub ratios should vanish as K grows and are flagged above ``threshold``.
    The remaining ratios only need to stay bounded, so they are flagged above
    the looser ``growth_threshold``.
    """
    s = graph_summary(c0, table)
    m = s.margins.astype(float)
    deg = s.degree.astype(float)
    e2 = s.two_hop.astype(float)
    K, N = table.K, table.N
    nb = c0.neighbors()
    hub_nodes = float(np.sum(m * (m + deg) * (m + s.neighbor_mass + e2)))
    hub_edges = 0.0
    for u, v in c0.edges:
        mass = float(sum(m[w] for w in set(nb[u]) | set(nb[v])))
        hub_edges += float((m[u] + m[v] + deg[u] + deg[v]) * (m[u] + m[v] + mass + e2[u] + e2[v]))
    lam, beta = s.max_degree, s.max_count
    ratios = {
        "hub_nodes_over_K1.5": hub_nodes / K**1.5,
        "hub_edges_over_K1.5": hub_edges / K**1.5,
        "beta6_lambda2_over_K": beta**6 * lam**2 / K,
        "lambda8_over_K": lam**8 / K,
        "N_over_K": N / K,
        "edges_over_K": s.n_edges / K,
        "inv_edge_mass_over_K": s.sum_inv_edge_mass / K,
        "t_reach_over_N": float(np.sum(m * (m + s.neighbor_mass) ** 2)) / N,
    }
    flags = [k for k in HUB_RATIOS if ratios[k] > threshold]
    flags += [k for k in GROWTH_RATIOS if ratios[k] > growth_threshold]
    return Diagnostics(ratios, flags, threshold)


# ---------------------------------------------------------------------------
# one-shot test


def run_test(table: ContingencyTable, kind: str, d: DistanceMatrix | None = None,
             c0: CategoryGraph | None = None, method: str = "both", B: int = 1000,
             seed: int | None = None, cap: int = DEFAULT_CAP,
             threads: int | None = None) -> TestResult:
    """Compute a statistic and its p-value(s).

    ``method`` is ``"perm"``, ``"normal"``, ``"exact"`` or ``"both"``
    (permutation and normal).  Normal p-values exist for statistics with
    analytic moments: the C0 family and the raw cross-pair counts.
    """
    prepared = _stats.prepare(kind, table, d, c0, cap)
    value = prepared.value(table)
    result = TestResult(statistic=value, seed=seed)
    graph = getattr(prepared, "graph", None)
    if method in ("normal", "both"):
        moments = moments_for(kind, table, graph)
        if moments is None:
            result.notes.append(f"no analytic null moments for {kind}")
        elif moments.variance > 0:
            result.moments = moments
            result.z, result.p_normal = normal_pvalue(value.value, moments, prepared.tail)
            result.diagnostics = condition_diagnostics(table, graph)
        else:
            result.moments = moments
            result.notes.append("zero null variance; normal p-value undefined")
    if method in ("perm", "both"):
        if seed is None:
            raise ValueError("permutation p-values need a seed")
        result.p_perm, _ = mc_perm_pvalue(prepared, table, B, seed, threads=threads,
                                          observed=value.value)
        result.B = B
    if method == "exact":
        dist = exact_perm_distribution(prepared, table)
        result.p_exact = dist.pvalue(value.value, prepared.tail)
    return result

"""Scenario generators and study drivers.

Every generator takes an integer seed and draws from numpy's PCG64.
Replicate ``r`` of a study with master seed ``s`` draws its data from
``SeedSequence(s, spawn_key=(r, 0))`` and the permutations for its j-th
statistic from ``spawn_key=(r, j + 1)``, so studies reproduce bit-for-bit
and do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Any, Callable, Sequence

import numpy as np

from . import distance as dist
from .distance import DistanceMatrix, pairwise_distance
from .inference import mc_perm_pvalue, moments_for, normal_pvalue, resolve_threads
from .stats import prepare
from .table import ContingencyTable, from_records

MAX_MALLOWS_OBJECTS = 8
MAX_HAPLOTYPE_LENGTH = 16


class ScenarioError(ValueError):
    pass


def _rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# generators


def _draw(params: Sequence, n: int, rng: np.random.Generator) -> np.ndarray:
    """``("normal", mean, variance)`` or ``("uniform", lo, hi)``."""
    name, p, q = params
    if name == "normal":
        if q <= 0:
            raise ScenarioError("normal variance must be positive")
        return rng.normal(p, math.sqrt(q), n)
    if name == "uniform":
        if not q > p:
            raise ScenarioError("uniform needs lo < hi")
        return rng.uniform(p, q, n)
    raise ScenarioError(f"unknown distribution {name!r}")


def bin_samples(x: np.ndarray, y: np.ndarray, bins: int) -> tuple[ContingencyTable, DistanceMatrix]:
    """Equal-width bins over the pooled range; empty bins dropped.

    The pooled maximum falls in the last bin.  Distances are differences of
    ranks among the nonempty bins.
    """
    pooled = np.concatenate([x, y])
    lo, hi = pooled.min(), pooled.max()
    if not hi > lo:
        raise ScenarioError("degenerate sample: all values equal")
    idx = np.minimum(((pooled - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    a = np.bincount(idx[: x.size], minlength=bins)
    b = np.bincount(idx[x.size:], minlength=bins)
    keep = np.flatnonzero(a + b)
    ids = [f"bin{k + 1}" for k in keep]
    table = from_records(zip(ids, a[keep], b[keep]))
    d = pairwise_distance("rank_diff", list(range(1, keep.size + 1)), ids)
    return table, d


def binned_scenario(dist_a: Sequence, dist_b: Sequence, n_per_group: int, bins: int,
                    seed: int) -> tuple[ContingencyTable, DistanceMatrix]:
    """Sample both groups, then bin the pooled sample."""
    if n_per_group < 1:
        raise ScenarioError("n_per_group must be >= 1")
    if bins < 2:
        raise ScenarioError("bins must be >= 2")
    rng = _rng(seed)
    x = _draw(dist_a, n_per_group, rng)
    y = _draw(dist_b, n_per_group, rng)
    return bin_samples(x, y, bins)


_METRICS = {"kendall": dist.kendall, "spearman_sq": dist.spearman_sq,
            "spearman_footrule": dist.spearman_footrule}


def mallows_table(zeta0, theta: float, metric: str = "kendall"):
    """All rankings of ``len(zeta0)`` objects with their exact probabilities."""
    zeta0 = dist.parse_ranking(zeta0)
    n = len(zeta0)
    if n > MAX_MALLOWS_OBJECTS:
        raise ScenarioError(f"{n} objects; exact enumeration supports at most {MAX_MALLOWS_OBJECTS}")
    try:
        fn = _METRICS[metric]
    except KeyError:
        raise ScenarioError(f"unknown metric {metric!r}") from None
    rankings = list(permutations(range(1, n + 1)))
    dists = np.array([fn(r, zeta0) for r in rankings], dtype=float)
    logw = -theta * dists
    w = np.exp(logw - logw.max())
    return rankings, w / w.sum()


def mallows_sample(n: int, zeta0, theta: float, metric: str = "kendall",
                   seed: int = 0) -> list[tuple[int, ...]]:
    rankings, p = mallows_table(zeta0, theta, metric)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, _rng(seed).random(n), side="right")
    return [rankings[i] for i in idx]


def haplotype_scenario(n_subjects: int, length: int, informative: Sequence[int] = (),
                       target: str | None = None, seed: int = 0, base: float = 0.3,
                       step: float = 0.1) -> tuple[ContingencyTable, DistanceMatrix]:
    """Uniform haplotypes; group ``a`` (patients) with probability
    ``base + step * matches`` where ``matches`` counts informative positions
    agreeing with ``target``.

    ``target`` is a full-length binary string.  With no informative
    positions the labels are independent of haplotype.
    """
    if not 1 <= length <= MAX_HAPLOTYPE_LENGTH:
        raise ScenarioError(f"length must be in 1..{MAX_HAPLOTYPE_LENGTH}")
    informative = sorted(set(int(i) for i in informative))
    if informative and (informative[0] < 0 or informative[-1] >= length):
        raise ScenarioError("informative position out of range")
    if target is None:
        target = "1" * length
    if len(target) != length or set(target) - {"0", "1"}:
        raise ScenarioError("target must be a binary string of the haplotype length")
    top = base + step * len(informative)
    if not (0 <= base <= 1 and 0 <= top <= 1):
        raise ScenarioError(f"disease probability out of [0, 1]: {base}..{top}")
    rng = _rng(seed)
    hap = rng.integers(0, 2, size=(n_subjects, length))
    want = np.array([int(c) for c in target])
    matches = (hap[:, informative] == want[informative]).sum(axis=1) if informative else np.zeros(n_subjects)
    is_a = rng.random(n_subjects) < base + step * matches
    code = hap @ (1 << np.arange(length - 1, -1, -1))
    a = np.bincount(code[is_a], minlength=2**length)
    b = np.bincount(code[~is_a], minlength=2**length)
    keep = np.flatnonzero(a + b)
    ids = [format(int(k), f"0{length}b") for k in keep]
    return from_records(zip(ids, a[keep], b[keep])), pairwise_distance("hamming", ids, ids)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    """Named, seeded generator of ``(table, distance)`` replicates."""

    name: str
    make: Callable[[int], tuple[ContingencyTable, DistanceMatrix]]
    params: dict[str, Any] = field(default_factory=dict)

    def sample(self, seed: int) -> tuple[ContingencyTable, DistanceMatrix]:
        return self.make(seed)


def binned(name: str, dist_a, dist_b, n_per_group: int = 30, bins: int = 12) -> Scenario:
    return Scenario(name, lambda s: binned_scenario(dist_a, dist_b, n_per_group, bins, s),
                    {"a": dist_a, "b": dist_b, "n_per_group": n_per_group, "bins": bins})


def haplotype(name: str, n_subjects: int, length: int, informative=(), target=None,
              base: float = 0.3) -> Scenario:
    return Scenario(name, lambda s: haplotype_scenario(n_subjects, length, informative, target, s, base),
                    {"n_subjects": n_subjects, "length": length, "informative": tuple(informative),
                     "base": base})


def null_haplotype(n_subjects: int, length: int) -> Scenario:
    """Haplotypes assigned to either group with equal probability."""
    return haplotype(f"haplotype-null-l{length}-n{n_subjects}", n_subjects, length, base=0.5)


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "normal-shift": lambda: binned("normal-shift", ("normal", 0, 1), ("normal", 1, 1)),
    "normal-scale": lambda: binned("normal-scale", ("normal", 0, 1), ("normal", 0, 4)),
    "normal-both": lambda: binned("normal-both", ("normal", 0, 1), ("normal", 1, 4)),
    "uniform-shift": lambda: binned("uniform-shift", ("uniform", 0, 5), ("uniform", 1, 6)),
    "normal-null": lambda: binned("normal-null", ("normal", 0, 1), ("normal", 0, 1)),
    "haplotype": lambda: haplotype("haplotype", 1000, 11, (0, 1, 2, 3), "1" * 11),
    "haplotype-null": lambda: null_haplotype(500, 8),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


# ---------------------------------------------------------------------------
# studies


def _map(fn, n: int, threads: int | None):
    threads = resolve_threads(threads)
    if threads <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, range(n)))


def replicate_pvalues(scenario: Scenario, kinds: Sequence[str], runs: int, B: int, seed: int,
                      threads: int | None = None) -> dict[str, np.ndarray]:
    """Permutation p-value of each statistic on each replicate."""
    if runs < 1:
        raise ScenarioError("runs must be >= 1")

    def one(r: int):
        table, d = scenario.sample(int(_rng(seed, r, 0).integers(2**63)))
        out = []
        for j, kind in enumerate(kinds):
            stat = prepare(kind, table, d)
            perm_seed = int(_rng(seed, r, j + 1).integers(2**63))
            p, _ = mc_perm_pvalue(stat, table, B, perm_seed)
            out.append(p)
        return out

    rows = np.array(_map(one, runs, threads), dtype=float).reshape(runs, len(kinds))
    return {k: rows[:, j] for j, k in enumerate(kinds)}


@dataclass
class PowerTable:
    scenario: str
    runs: int
    B: int
    rows: list[dict[str, Any]]
    pvalues: dict[str, np.ndarray]

    def power(self, kind: str, alpha: float) -> float:
        for row in self.rows:
            if row["statistic"] == kind and row["alpha"] == alpha:
                return row["power"]
        raise KeyError((kind, alpha))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "statistic", "alpha", "power", "stderr", "runs", "B"])
        for row in self.rows:
            w.writerow([self.scenario, row["statistic"], row["alpha"], f"{row['power']:.6f}",
                        f"{row['stderr']:.6f}", self.runs, self.B])
        return buf.getvalue()


def power_study(scenario: Scenario, kinds: Sequence[str], alphas: Sequence[float] = (0.05,),
                runs: int = 100, B: int = 200, seed: int = 0,
                threads: int | None = None) -> PowerTable:
    """Rejection rate of each statistic at each level, with binomial standard errors."""
    pv = replicate_pvalues(scenario, kinds, runs, B, seed, threads)
    rows = []
    for kind in kinds:
        for alpha in alphas:
            power = float(np.mean(pv[kind] <= alpha))
            rows.append({"statistic": kind, "alpha": alpha, "power": power,
                         "stderr": math.sqrt(power * (1 - power) / runs)})
    return PowerTable(scenario.name, runs, B, rows, pv)


ACCURACY_KINDS = ("C-uMST", "C-uNNG", "uMST")


@dataclass
class AccuracyStudy:
    runs: int
    B: int
    samples: list[dict[str, Any]]   # length, N, statistic, run, diff

    def diffs(self, length: int, N: int, kind: str) -> np.ndarray:
        return np.array([s["diff"] for s in self.samples
                         if s["length"] == length and s["N"] == N and s["statistic"] == kind])

    def quartiles(self) -> list[dict[str, Any]]:
        cells = sorted({(s["length"], s["N"], s["statistic"]) for s in self.samples})
        out = []
        for length, N, kind in cells:
            x = self.diffs(length, N, kind)
            x = x[np.isfinite(x)]
            q = np.quantile(x, [0, 0.25, 0.5, 0.75, 1]).tolist() if x.size else [math.nan] * 5
            out.append({"length": length, "N": N, "statistic": kind, "n": int(x.size),
                        "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "N", "statistic", "run", "diff"])
        for s in self.samples:
            w.writerow([s["length"], s["N"], s["statistic"], s["run"], f"{s['diff']:.6f}"])
        return buf.getvalue()

    def quartiles_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["length", "N", "statistic", "n", "min", "q1", "median", "q3", "max"]
        w.writerow(cols)
        for row in self.quartiles():
            w.writerow([row[c] if c in ("length", "N", "statistic", "n") else f"{row[c]:.6f}" for c in cols])
        return buf.getvalue()


def pvalue_accuracy(lengths: Sequence[int], sizes: Sequence[int], runs: int = 50, B: int = 2000,
                    seed: int = 0, kinds: Sequence[str] = ACCURACY_KINDS,
                    threads: int | None = None) -> AccuracyStudy:
    """``p_normal - p_perm`` per run on null haplotype data.

    A run whose statistic has zero null variance contributes NaN.
    """
    if runs < 1:
        raise ScenarioError("runs must be >= 1")
    samples = []
    for ci, (length, N) in enumerate((l, n) for l in lengths for n in sizes):
        scen = null_haplotype(N, length)

        def one(r: int, ci=ci, scen=scen):
            table, d = scen.sample(int(_rng(seed, ci, r, 0).integers(2**63)))
            out = []
            for j, kind in enumerate(kinds):
                stat = prepare(kind, table, d)
                moments = moments_for(kind, table, stat.graph)
                obs = stat.value(table).value
                if moments is None or not moments.variance > 0:
                    out.append(math.nan)
                    continue
                _, p_norm = normal_pvalue(obs, moments, stat.tail)
                p_perm, _ = mc_perm_pvalue(stat, table, B, int(_rng(seed, ci, r, j + 1).integers(2**63)),
                                           observed=obs)
                out.append(p_norm - p_perm)
            return out

        for r, diffs in enumerate(_map(one, runs, threads)):
            for kind, diff in zip(kinds, diffs):
                samples.append({"length": length, "N": N, "statistic": kind, "run": r, "diff": diff})
    return AccuracyStudy(runs, B, samples)

from math import log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import (
    amdp_bruteforce,
    amst_bruteforce,
    category_pair_set,
    labels_for,
    perfect_pairings,
    r_c0_loop,
    random_counts,
    random_distance,
    subject_distance,
)
from scipy.stats import chi2_contingency, power_divergence

from gbtest import catgraph
from gbtest.catgraph import CategoryGraph
from gbtest.distance import DistanceMatrix
from gbtest.stats import (
    KINDS,
    TooManyOddCategories,
    chisq,
    compute,
    cross_edge_count,
    double_factorial,
    prepare,
    r0,
    r_amdp,
    r_amdp_by_group_patterns,
    r_amst,
    r_c0,
    r_umst,
    r_unng_subjects,
    t_c0,
)
from gbtest.table import ContingencyTable


def make(a, b):
    return ContingencyTable(tuple(f"k{i}" for i in range(len(a))), np.array(a), np.array(b))


@st.composite
def instances(draw, max_k=4, max_n=7, values=(1, 2, 3)):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, max_k + 1))
    d = random_distance(rng, K, values)
    a, b = random_counts(rng, K, max_n, 2)
    return make(a, b), DistanceMatrix(d), d


def test_chain_values(chain, chain_c0):
    t, d = chain
    assert r_amst(t, d).value == 2.0
    assert r_umst(t, d).value == 5
    assert r_c0(t, chain_c0).value == 2.0
    assert r_c0(t, CategoryGraph(3, ((0, 2),))).value == 2.0
    assert t_c0(t, catgraph.umst_edges(d)).value == 5
    assert r_unng_subjects(t, d).value == 1
    assert r_amdp(t, d).value == 1


def test_cross_edge_count_triangle():
    assert cross_edge_count([(0, 1), (1, 2), (0, 2)], ["a", "a", "b"]) == 2


def test_chi_square_chain(chain):
    t, _ = chain
    assert chisq(t).value == pytest.approx(4.0)
    # deviance is twice the log-likelihood ratio: 2 * (2 ln 2 + 2 ln 2)
    assert chisq(t, "deviance").value == pytest.approx(8 * log(2))


def test_chi_square_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(30):
        K = int(rng.integers(2, 8))
        a = rng.integers(1, 6, K)
        b = rng.integers(0, 6, K)
        t = make(a, b)
        obs = np.vstack([a, b])
        stat, *_ = chi2_contingency(obs, correction=False)
        assert chisq(t).value == pytest.approx(stat)
        expected = np.outer(obs.sum(1), obs.sum(0)) / obs.sum()
        g, _ = power_divergence(obs.ravel(), expected.ravel(), lambda_="log-likelihood")
        assert chisq(t, "deviance").value == pytest.approx(g)


def test_chi_square_is_upper_tail(chain):
    t, _ = chain
    assert prepare("pearson", t).tail == "upper"
    assert prepare("uMST", t, chain[1]).tail == "lower"


def test_r0_small():
    assert r0(2, 2) == pytest.approx(4 / 3)
    assert r0(0, 0) == 0
    assert double_factorial(-1) == 1 and double_factorial(7) == 105


def test_r0_by_enumeration():
    for na in range(6):
        for nb in range(6):
            if (na + nb) % 2 or na + nb == 0:
                continue
            lab = [0] * na + [1] * nb
            vals = [sum(lab[i] != lab[j] for i, j in p) for p in perfect_pairings(range(na + nb))]
            assert r0(na, nb) == pytest.approx(np.mean(vals), abs=1e-12)


@settings(max_examples=120, deadline=None)
@given(instances())
def test_amst_matches_subject_trees(inst):
    t, d, raw = inst
    assert r_amst(t, d).value == pytest.approx(amst_bruteforce(raw, t.counts_a, t.margins), abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(instances(max_k=3, max_n=8, values=(3, 4, 5)))
def test_amdp_matches_subject_pairings(inst):
    t, d, raw = inst
    expect = amdp_bruteforce(raw, t.counts_a, t.margins)
    assert r_amdp(t, d).value == pytest.approx(expect, abs=1e-9)
    assert r_amdp_by_group_patterns(t, d) == pytest.approx(expect, abs=1e-9)


@settings(max_examples=120, deadline=None)
@given(instances(max_k=6, max_n=12))
def test_umst_counts_cross_pairs_of_joined_categories(inst):
    t, d, _ = inst
    lab = labels_for(t.counts_a, t.margins)
    pairs = category_pair_set(catgraph.umst_edges(d).edges, t.margins)
    assert r_umst(t, d).value == sum(lab[i] != lab[j] for i, j in pairs)


@settings(max_examples=120, deadline=None)
@given(instances(max_k=6, max_n=12))
def test_unng_on_subjects(inst):
    t, d, raw = inst
    D = subject_distance(raw, t.margins).astype(float)
    n = len(D)
    if n < 2:
        return
    np.fill_diagonal(D, np.inf)
    lab = labels_for(t.counts_a, t.margins)
    edges = set()
    for i in range(n):
        for j in np.flatnonzero(D[i] == D[i].min()):
            edges.add((min(i, j), max(i, j)))
    assert r_unng_subjects(t, d).value == sum(lab[i] != lab[j] for i, j in edges)


@settings(max_examples=100, deadline=None)
@given(instances(max_k=6, max_n=12))
def test_c0_family_against_loops(inst):
    t, d, _ = inst
    for kind, gk in (("C-uMST", "umst"), ("C-uNNG", "c-unng"), ("C-MST", "mst")):
        g = catgraph.build_graph(gk, d)
        expect = r_c0_loop(t.counts_a.tolist(), t.margins.tolist(), g.edges)
        assert compute(kind, t, d).value == pytest.approx(expect, abs=1e-12)
        assert r_c0(t, g).value == pytest.approx(expect, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(instances(max_k=5, max_n=10))
def test_batch_evaluation_matches_single(inst):
    t, d, _ = inst
    # relabellings keep n_a, which the prepared forms rely on
    rng = np.random.default_rng(0)
    cats = np.repeat(np.arange(t.K), t.margins)
    batch = np.array([np.bincount(rng.permutation(cats)[: t.n_a], minlength=t.K) for _ in range(5)])
    kinds = ["aMST", "uMST", "aMDP", "uNNG", "C-uMST"]
    if t.n_a and t.n_b:
        kinds.append("pearson")
    for kind in kinds:
        vals = prepare(kind, t, d)(batch)
        for a, v in zip(batch, vals):
            u = t.with_counts_a(a)
            assert v == pytest.approx(compute(kind, u, d).value, abs=1e-12)


def test_too_many_odd_categories():
    K = 18
    t = make([1] * K, [0] * K)
    d = DistanceMatrix(np.ones((K, K), dtype=int) - np.eye(K, dtype=int))
    with pytest.raises(TooManyOddCategories):
        r_amdp(t, d)


def test_amst_metadata_and_cap(chain):
    t, d = chain
    assert r_amst(t, d).metadata["n_msts"] == 1
    hc = DistanceMatrix(np.array([[bin(i ^ j).count("1") for j in range(64)] for i in range(64)]))
    big = make([1] * 64, [1] * 64)
    with pytest.raises(catgraph.CapExceeded):
        r_amst(big, hc)


def test_errors(chain):
    t, d = chain
    with pytest.raises(ValueError, match="unknown"):
        compute("bogus", t, d)
    with pytest.raises(ValueError, match="needs a distance"):
        compute("uMST", t)
    with pytest.raises(ValueError, match="needs a category graph"):
        compute("R_C0", t)
    with pytest.raises(ValueError):
        r_umst(t, DistanceMatrix(np.array([[0, 1], [1, 0]])))
    with pytest.raises(ValueError):
        chisq(make([2, 1], [0, 0]))
    assert set(KINDS) >= {"aMST", "uMST", "aMDP", "uNNG", "R_C0", "T_C0", "pearson", "deviance"}

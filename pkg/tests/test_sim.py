from math import exp, sqrt

import numpy as np
import pytest
from scipy.stats import chisquare

from gbtest import sim
from gbtest.distance import kendall, spearman_sq


def test_binned_shape_and_determinism():
    t, d = sim.binned_scenario(("normal", 0, 1), ("normal", 0, 1), 30, 12, seed=8)
    assert t.K <= 12 and t.N == 60 and t.n_a == t.n_b == 30
    t2, d2 = sim.binned_scenario(("normal", 0, 1), ("normal", 0, 1), 30, 12, seed=8)
    assert t == t2 and np.array_equal(d.values, d2.values)
    # ranks are recomputed over nonempty bins
    assert d.values[0].tolist() == list(range(t.K))


def test_binning_rules():
    x = np.array([0.0, 0.1, 1.0])
    y = np.array([0.95, 0.5])
    t, d = sim.bin_samples(x, y, 4)
    # bins of width 0.25; 0.5 opens the third bin, the maximum closes the last
    assert t.category_ids == ("bin1", "bin3", "bin4")
    assert t.counts_a.tolist() == [2, 0, 1] and t.counts_b.tolist() == [0, 1, 1]
    assert d[0, 2] == 2
    with pytest.raises(sim.ScenarioError, match="degenerate"):
        sim.bin_samples(np.ones(3), np.ones(2), 4)


@pytest.mark.parametrize("args", [
    (("normal", 0, 1), ("normal", 0, 1), 0, 12),
    (("normal", 0, 1), ("normal", 0, 1), 5, 1),
    (("normal", 0, -1), ("normal", 0, 1), 5, 12),
    (("uniform", 2, 1), ("normal", 0, 1), 5, 12),
    (("cauchy", 0, 1), ("normal", 0, 1), 5, 12),
])
def test_binned_errors(args):
    with pytest.raises(sim.ScenarioError):
        sim.binned_scenario(*args, seed=0)


def test_mallows_uniform_at_theta_zero():
    rankings, p = sim.mallows_table("1234", 0.0)
    assert len(rankings) == 24
    assert np.allclose(p, 1 / 24)


@pytest.mark.parametrize("metric, fn", [("kendall", kendall), ("spearman_sq", spearman_sq)])
def test_mallows_probability_ratio(metric, fn):
    zeta0 = (2, 1, 4, 3)
    rankings, p = sim.mallows_table(zeta0, 0.7, metric)
    p0 = p[rankings.index(zeta0)]
    for r, pr in zip(rankings, p):
        assert p0 / pr == pytest.approx(exp(0.7 * fn(r, zeta0)))


def test_mallows_sampling_matches_table():
    zeta0 = (1, 2, 3, 4)
    rankings, p = sim.mallows_table(zeta0, 0.5)
    draws = sim.mallows_sample(100_000, zeta0, 0.5, seed=3)
    idx = {r: i for i, r in enumerate(rankings)}
    counts = np.bincount([idx[x] for x in draws], minlength=len(rankings))
    assert counts.argmax() == idx[zeta0]
    assert chisquare(counts, p * counts.sum()).pvalue > 0.001
    assert sim.mallows_sample(10, zeta0, 0.5, seed=3) == draws[:10]


def test_mallows_limits():
    with pytest.raises(sim.ScenarioError):
        sim.mallows_table(tuple(range(1, 10)), 1.0)
    with pytest.raises(sim.ScenarioError):
        sim.mallows_table("123", 1.0, "hamming")


def test_haplotype_disease_probabilities():
    t, _ = sim.haplotype_scenario(200_000, 4, informative=(0, 1, 2, 3), target="1111", seed=1)
    frac = t.counts_a / t.margins
    assert frac[t.index("0000")] == pytest.approx(0.3, abs=0.02)
    assert frac[t.index("1111")] == pytest.approx(0.7, abs=0.02)
    assert frac[t.index("1100")] == pytest.approx(0.5, abs=0.02)


def test_haplotype_category_counts():
    ks = [sim.haplotype_scenario(1000, 11, (0, 1, 2, 3), "1" * 11, seed=s)[0].K for s in range(20)]
    assert 770 <= np.mean(ks) <= 810
    assert all(740 <= k <= 840 for k in ks)


def test_haplotype_null_and_checks():
    t, d = sim.haplotype_scenario(300, 6, seed=2)
    t2, _ = sim.haplotype_scenario(300, 6, seed=2)
    assert t == t2 and d.K == t.K
    assert d[0, 1] >= 1
    with pytest.raises(sim.ScenarioError, match="out of"):
        sim.haplotype_scenario(10, 10, informative=range(8), seed=0)
    with pytest.raises(sim.ScenarioError):
        sim.haplotype_scenario(10, 17, seed=0)
    with pytest.raises(sim.ScenarioError):
        sim.haplotype_scenario(10, 4, target="11", seed=0)


def test_power_study_single_run():
    table = sim.power_study(sim.get_scenario("normal-shift"), ["aMST", "pearson"], [0.05], runs=1, B=50, seed=4)
    assert all(row["power"] in (0.0, 1.0) for row in table.rows)
    assert table.to_csv().splitlines()[0] == "scenario,statistic,alpha,power,stderr,runs,B"
    assert len(table.to_csv().splitlines()) == 3


def test_power_study_thread_independent():
    s = sim.get_scenario("normal-shift")
    a = sim.power_study(s, ["uMST"], [0.05], runs=12, B=99, seed=5, threads=1)
    b = sim.power_study(s, ["uMST"], [0.05], runs=12, B=99, seed=5, threads=3)
    assert a.to_csv() == b.to_csv()


def test_null_power_near_alpha():
    runs = 400
    table = sim.power_study(sim.get_scenario("normal-null"), ["aMST"], [0.05, 0.1], runs=runs, B=199, seed=6)
    for alpha in (0.05, 0.1):
        se = sqrt(alpha * (1 - alpha) / runs)
        assert abs(table.power("aMST", alpha) - alpha) <= 3 * se


def test_pvalue_accuracy_output():
    study = sim.pvalue_accuracy([4], [60], runs=3, B=99, seed=2)
    assert len(study.samples) == 9
    lines = study.to_csv().splitlines()
    assert lines[0] == "length,N,statistic,run,diff" and len(lines) == 10
    q = study.quartiles()
    assert {row["statistic"] for row in q} == set(sim.ACCURACY_KINDS)
    assert study.quartiles_csv().splitlines()[0] == "length,N,statistic,n,min,q1,median,q3,max"


def test_unknown_scenario():
    with pytest.raises(sim.ScenarioError):
        sim.get_scenario("nope")

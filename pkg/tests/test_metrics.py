"""Metrics: P/R/F1, agreement coefficients, aggregates.

The alpha oracle below is the textbook coincidence-matrix formulation,
implemented independently of the library's within-unit pairwise route;
the two must agree to 1e-9 wherever both are defined.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import Counter

import pytest

from guiverify.metrics import (
    ClassCounts,
    DegenerateMarginals,
    IdMismatch,
    NoVariance,
    aggregate_runs,
    bootstrap_ci,
    cohens_kappa,
    confusion,
    compute_agreement,
    krippendorff_alpha,
    prf1,
)


# -- independent oracle --------------------------------------------------------


def alpha_coincidence_oracle(matrix, scale="ordinal"):
    """Coincidence-matrix alpha, written before the library route."""
    n_items = len(matrix[0])
    units = []
    for i in range(n_items):
        values = [row[i] for row in matrix if row[i] is not None]
        if len(values) >= 2:
            units.append(values)
    if not units:
        raise ValueError("nothing pairable")
    values = sorted({v for unit in units for v in unit})
    coincidence = {c: {k: 0.0 for k in values} for c in values}
    for unit in units:
        m = len(unit)
        counts = Counter(unit)
        for c in values:
            for k in values:
                if counts[c] == 0 or counts[k] == 0:
                    continue
                pairs = counts[c] * (counts[c] - 1) if c == k else counts[c] * counts[k]
                coincidence[c][k] += pairs / (m - 1)
    marginal = {c: sum(coincidence[c].values()) for c in values}
    n = sum(marginal.values())

    def delta2(c, k):
        if c == k:
            return 0.0
        if scale == "nominal":
            return 1.0
        lo, hi = (c, k) if values.index(c) < values.index(k) else (k, c)
        between = sum(
            marginal[g] for g in values[values.index(lo) : values.index(hi) + 1]
        )
        d = between - (marginal[lo] + marginal[hi]) / 2.0
        return d * d

    observed = sum(
        coincidence[c][k] * delta2(c, k) for c in values for k in values
    ) / n
    expected = sum(
        marginal[c] * marginal[k] * delta2(c, k) for c in values for k in values
    ) / (n * (n - 1))
    if expected == 0.0:
        raise NoVariance("oracle: no variance")
    return 1.0 - observed / expected


def assert_both_routes_agree(matrix, scale="ordinal"):
    try:
        expected = alpha_coincidence_oracle(matrix, scale)
    except NoVariance:
        with pytest.raises(NoVariance):
            krippendorff_alpha(matrix, scale)
        return
    assert krippendorff_alpha(matrix, scale) == pytest.approx(expected, abs=1e-9)


# -- confusion / prf1 -----------------------------------------------------------


class TestConfusion:
    def test_hand_filled_matrix(self):
        gold = {"i1": "M", "i2": "M", "i3": "U", "i4": "P"}
        pred = {"i1": "M", "i2": "U", "i3": "U", "i4": "P"}
        counts = confusion(gold, pred)
        assert counts["M"] == ClassCounts(tp=1, fp=0, fn=1)
        assert counts["U"] == ClassCounts(tp=1, fp=1, fn=0)
        assert counts["P"] == ClassCounts(tp=1, fp=0, fn=0)

    def test_identical_vectors(self):
        gold = {"a": "x", "b": "y"}
        counts = confusion(gold, dict(gold))
        assert all(c.fp == 0 and c.fn == 0 for c in counts.values())

    def test_disjoint_ids(self):
        with pytest.raises(IdMismatch):
            confusion({"a": "x"}, {"b": "x"})


class TestPRF1:
    def test_table_row_f1_from_p_and_r(self):
        # P=1.000, R=0.944 must land on F1=0.971
        scores = prf1(ClassCounts(tp=17, fp=0, fn=1))
        assert scores.precision == pytest.approx(1.0)
        assert scores.recall == pytest.approx(17 / 18, abs=1e-3)
        assert scores.f1 == pytest.approx(0.971, abs=1e-3)

    def test_perfect(self):
        assert prf1(ClassCounts(tp=5, fp=0, fn=0)) == prf1(ClassCounts(5, 0, 0))
        assert prf1(ClassCounts(5, 0, 0)).f1 == 1.0

    def test_empty_class_convention(self):
        scores = prf1(ClassCounts(0, 0, 0))
        assert (scores.precision, scores.recall, scores.f1) == (0.0, 0.0, 0.0)

    def test_bounds_and_degeneracy_over_random_counts(self):
        rng = random.Random(3)
        for _ in range(500):
            counts = ClassCounts(rng.randint(0, 20), rng.randint(0, 20), rng.randint(0, 20))
            scores = prf1(counts)
            assert 0.0 <= scores.precision <= 1.0
            assert 0.0 <= scores.recall <= 1.0
            assert 0.0 <= scores.f1 <= max(scores.precision, scores.recall) + 1e-12
            assert (scores.f1 == 0.0) == (scores.precision == 0.0 or scores.recall == 0.0)


# -- Krippendorff's alpha --------------------------------------------------------


class TestAlpha:
    def test_perfect_agreement_with_variance(self):
        matrix = [[0, 1, 2, 0, 1, 2]] * 3
        assert krippendorff_alpha(matrix) == pytest.approx(1.0)

    def test_ordinal_distance_ordering(self):
        near = [[0, 1, 2, 1], [0, 1, 2, 2]]  # one disagreement, one rank apart
        far = [[0, 1, 2, 0], [0, 1, 2, 2]]  # one disagreement, two ranks apart
        assert krippendorff_alpha(far) < krippendorff_alpha(near)

    def test_no_variance_is_an_error(self):
        with pytest.raises(NoVariance):
            krippendorff_alpha([[1, 1, 1], [1, 1, 1]])

    def test_missing_values_are_skipped(self):
        matrix = [[0, 1, None, 2], [0, 1, 2, None], [None, 1, 2, 2]]
        assert_both_routes_agree(matrix)

    def test_matches_oracle_on_random_two_rater_matrices(self):
        rng = random.Random(11)
        for _ in range(300):
            matrix = [[rng.randint(0, 2) for _ in range(5)] for _ in range(2)]
            assert_both_routes_agree(matrix)
            assert_both_routes_agree(matrix, scale="nominal")

    def test_matches_oracle_exhaustively_small(self):
        for n_items in (2, 3):
            for cells in itertools.product(range(3), repeat=2 * n_items):
                matrix = [list(cells[:n_items]), list(cells[n_items:])]
                assert_both_routes_agree(matrix)

    def test_three_raters(self):
        matrix = [[0, 1, 2, 2, 0], [0, 1, 2, 1, 0], [0, 2, 2, 1, 0]]
        assert_both_routes_agree(matrix)
        assert_both_routes_agree(matrix, scale="nominal")

    def test_monotone_recoding_invariance(self):
        rng = random.Random(5)
        for _ in range(50):
            matrix = [[rng.randint(0, 2) for _ in range(6)] for _ in range(3)]
            recoded = [[{0: 10, 1: 40, 2: 41}[v] for v in row] for row in matrix]
            try:
                original = krippendorff_alpha(matrix)
            except NoVariance:
                continue
            assert krippendorff_alpha(recoded) == pytest.approx(original, abs=1e-9)


class TestBootstrap:
    MATRIX = [[0, 1, 2, 1, 0, 2, 2, 1], [0, 1, 2, 2, 0, 2, 1, 1]]

    def test_seed_determinism(self):
        first = bootstrap_ci(self.MATRIX, resamples=1000, seed=9)
        second = bootstrap_ci(self.MATRIX, resamples=1000, seed=9)
        assert first == second

    def test_perfect_agreement_degenerate_interval(self):
        matrix = [[0, 1, 2, 0, 1, 2]] * 2
        ci = bootstrap_ci(matrix, resamples=1000, seed=1)
        assert (ci.low, ci.high) == (1.0, 1.0)
        assert ci.resamples_skipped > 0  # single-value resamples happen and are skipped

    def test_interval_brackets_alpha_and_is_ordered(self):
        ci = bootstrap_ci(self.MATRIX, resamples=1000, seed=3)
        alpha = krippendorff_alpha(self.MATRIX)
        assert ci.low <= alpha <= ci.high

    def test_width_shrinks_with_more_items(self):
        small = self.MATRIX
        big = [row * 4 for row in small]
        ci_small = bootstrap_ci(small, resamples=2000, seed=7)
        ci_big = bootstrap_ci(big, resamples=2000, seed=7)
        assert (ci_big.high - ci_big.low) < (ci_small.high - ci_small.low)

    def test_minimum_resamples_enforced(self):
        with pytest.raises(ValueError):
            bootstrap_ci(self.MATRIX, resamples=10, seed=0)


# -- Cohen's kappa ---------------------------------------------------------------


class TestKappa:
    def test_hand_case(self):
        # 2x2 counts a=20 b=5 c=10 d=15 -> po=0.7, pe=0.5, kappa=0.4
        gold = ["x"] * 20 + ["x"] * 5 + ["y"] * 10 + ["y"] * 15
        pred = ["x"] * 20 + ["y"] * 5 + ["x"] * 10 + ["y"] * 15
        stats = cohens_kappa(gold, pred)
        assert stats.observed_agreement == pytest.approx(0.7)
        assert stats.expected_agreement == pytest.approx(0.5)
        assert stats.kappa == pytest.approx(0.4)

    def test_identical_vectors(self):
        labels = ["a", "b", "a", "c", "b"]
        assert cohens_kappa(labels, list(labels)).kappa == pytest.approx(1.0)

    def test_observed_agreement_435_of_450(self):
        gold = ["met"] * 450
        pred = ["met"] * 435 + ["unmet"] * 15
        stats = cohens_kappa(gold, pred)
        assert stats.observed_agreement == pytest.approx(435 / 450)
        assert round(stats.observed_agreement, 4) == 0.9667

    def test_label_permutation_invariance(self):
        rng = random.Random(13)
        gold = [rng.choice(["a", "b", "c"]) for _ in range(60)]
        pred = [rng.choice(["a", "b", "c"]) for _ in range(60)]
        mapping = {"a": "z", "b": "q", "c": "m"}
        renamed = cohens_kappa([mapping[g] for g in gold], [mapping[p] for p in pred])
        assert renamed.kappa == pytest.approx(cohens_kappa(gold, pred).kappa, abs=1e-12)

    def test_degenerate_marginals(self):
        with pytest.raises(DegenerateMarginals):
            cohens_kappa(["a", "a"], ["a", "a"])


# -- aggregates -------------------------------------------------------------------


def synthetic_metrics(i: int) -> dict[str, float]:
    return {
        "steps": 10 + 3 * i,
        "time": 50.0 + 7.5 * i,
        "input_tokens": 1000 * (i + 1),
        "output_tokens": 40 * (i + 1),
        "cost": 0.1 * (i + 1),
    }


class TestAggregates:
    def test_single_run_sd_zero(self):
        result = aggregate_runs([synthetic_metrics(0)])
        assert all(stats.sd == 0.0 for stats in result.values())

    def test_two_runs_hand_arithmetic(self):
        rows = [dict(synthetic_metrics(0), steps=10), dict(synthetic_metrics(0), steps=30)]
        stats = aggregate_runs(rows)["steps"]
        assert stats.mean == pytest.approx(20.0)
        assert stats.sd == pytest.approx(10.0)

    def test_sample_sd_option(self):
        rows = [dict(synthetic_metrics(0), steps=10), dict(synthetic_metrics(0), steps=30)]
        stats = aggregate_runs(rows, sample_sd=True)["steps"]
        assert stats.sd == pytest.approx(math.sqrt(200.0))

    def test_matches_spreadsheet_oracle_on_twenty_logs(self):
        rows = [synthetic_metrics(i) for i in range(20)]
        result = aggregate_runs(rows)
        for name in ("steps", "time", "input_tokens", "output_tokens", "cost"):
            values = [float(r[name]) for r in rows]
            mean = sum(values) / len(values)
            sd = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
            assert result[name].mean == pytest.approx(mean, abs=1e-9)
            assert result[name].sd == pytest.approx(sd, abs=1e-9)

    def test_one_pass_two_pass_equivalence(self):
        rng = random.Random(2)
        values = [rng.uniform(0, 1000) for _ in range(200)]
        rows = [dict(synthetic_metrics(0), steps=v) for v in values]
        two_pass = aggregate_runs(rows)["steps"]
        n = len(values)
        mean = sum(values) / n
        var_one_pass = sum(v * v for v in values) / n - mean * mean
        assert two_pass.sd == pytest.approx(math.sqrt(max(0.0, var_one_pass)), abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_runs([])


def test_compute_agreement_bundle():
    matrix = [[2, 1, 0, 2, 2, 1, 0, 2], [2, 1, 0, 2, 1, 1, 0, 2]]
    stats = compute_agreement(matrix, ["met"] * 9 + ["unmet"], ["met"] * 10, resamples=1000, seed=4)
    assert stats.ci_low <= stats.alpha <= stats.ci_high
    assert stats.alpha <= 1.0 and stats.kappa <= 1.0
    assert stats.observed_agreement == pytest.approx(0.9)

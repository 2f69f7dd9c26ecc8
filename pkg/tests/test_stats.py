"""Tests for follow-up statistics: cross-tabs, chi-square, Spearman, reweighting."""

import numpy as np
import pytest

from conftest import make_record
from civicbudget import fixtures
from civicbudget.aggregate import knapsack_aggregate, tally_distribution
from civicbudget.ballots import (
    UNANSWERED,
    ExpenditureBallot,
    Question,
    validate_expenditure,
)
from civicbudget.errors import DataError
from civicbudget.stats import (
    CrossTab,
    WeightScheme,
    chi_square_gof,
    crosstab,
    demographic_distribution,
    expand_crosstab,
    poststratification_weights,
    spearman_rho,
    weighted_tally,
    weights_for_records,
)


class TestCrossTab:
    def test_pairs_tabulate_in_declared_order(self):
        ct = crosstab(
            [("a", "x"), ("a", "y"), ("b", "x"), ("a", "x")],
            row_categories=("a", "b"),
            col_categories=("x", "y"),
        )
        assert ct.counts.tolist() == [[2, 1], [1, 0]]
        assert ct.n == 4

    def test_expand_round_trip(self):
        ct, _, _ = fixtures.followup_crosstab()
        rebuilt = crosstab(
            expand_crosstab(ct), ct.row_categories, ct.col_categories
        )
        assert np.array_equal(rebuilt.counts, ct.counts)

    def test_unknown_categories_rejected(self):
        with pytest.raises(DataError, match="row"):
            crosstab([("z", "x")], ("a",), ("x",))
        with pytest.raises(DataError, match="column"):
            crosstab([("a", "z")], ("a",), ("x",))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            crosstab([], ("a",), ("x",))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            CrossTab("r", "c", ("a", "b"), ("x",), np.zeros((1, 1), dtype=np.int64))

    def test_published_table_dimensions(self):
        ct, row_codes, col_codes = fixtures.followup_crosstab()
        assert ct.row_categories == ("larger", "same", "smaller")
        assert ct.counts[0].tolist() == [40, 5, 4, 0]
        assert ct.n == 195
        assert len(row_codes) == 3 and len(col_codes) == 4


class TestChiSquareGof:
    def test_perfect_fit(self):
        result = chi_square_gof((10, 20, 30), (1, 2, 3))
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)
        assert result.df == 2
        assert result.expected == (10.0, 20.0, 30.0)

    def test_scenario_preference_shifts_by_cluster(self):
        # each cluster's preferred-scenario counts against the pooled split
        table = fixtures.followup_scenario_counts()["revenue"]
        counts = np.array(table["counts_by_cluster"])
        pooled = counts.sum(axis=0)
        results = [chi_square_gof(row, pooled) for row in counts]
        assert results[0].statistic == pytest.approx(6.19, abs=0.01)
        assert 0.03 < results[0].p_value < 0.06
        assert results[1].p_value == pytest.approx(0.00134, rel=0.02)
        assert results[2].p_value < 1e-4

    def test_agreement_shift_is_strongest_in_middle_cluster(self):
        table = fixtures.followup_agreement_counts()
        counts = np.array(table["counts_by_cluster"])
        pooled = counts.sum(axis=0)
        result = chi_square_gof(counts[1], pooled)
        assert result.statistic == pytest.approx(34.21, abs=0.05)
        assert result.df == 3
        assert result.p_value < 1e-5

    def test_zero_reference_with_observations_rejected(self):
        with pytest.raises(DataError, match="zero"):
            chi_square_gof((5, 5, 1), (1, 1, 0))

    def test_reference_scale_invariance(self):
        obs = (12, 7, 31)
        a = chi_square_gof(obs, (0.2, 0.3, 0.5))
        b = chi_square_gof(obs, (20, 30, 50))
        assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
        assert a.p_value == pytest.approx(b.p_value, rel=1e-12)

    def test_bad_inputs_rejected(self):
        with pytest.raises(DataError):
            chi_square_gof((-1, 2), (1, 1))
        with pytest.raises(DataError):
            chi_square_gof((5,), (1,))
        with pytest.raises(DataError):
            chi_square_gof((0, 0), (1, 1))
        with pytest.raises(ValueError):
            chi_square_gof((1, 2), (1, 2, 3))


class TestSpearman:
    def test_concordant_pairs(self):
        ct = CrossTab("r", "c", ("lo", "hi"), ("lo", "hi"), np.array([[5, 0], [0, 7]]))
        result = spearman_rho(ct)
        assert result.rho == pytest.approx(1.0)
        assert result.p_value == 0.0

    def test_exact_independence_is_zero(self):
        counts = np.outer([2, 3], [4, 5])  # joint = product of margins
        ct = CrossTab("r", "c", ("a", "b"), ("x", "y"), counts)
        assert spearman_rho(ct).rho == pytest.approx(0.0, abs=1e-12)

    def test_published_association(self):
        ct, row_codes, col_codes = fixtures.followup_crosstab()
        result = spearman_rho(ct, row_scores=row_codes, col_scores=col_codes)
        assert result.rho == pytest.approx(0.3733, abs=1e-3)
        assert result.p_value < 1e-6
        assert result.n == 195

    def test_negated_scores_flip_sign(self):
        ct, row_codes, col_codes = fixtures.followup_crosstab()
        fwd = spearman_rho(ct, row_scores=row_codes, col_scores=col_codes)
        rev = spearman_rho(
            ct, row_scores=[-c for c in row_codes], col_scores=col_codes
        )
        assert rev.rho == pytest.approx(-fwd.rho, rel=1e-12)
        assert rev.p_value == pytest.approx(fwd.p_value, rel=1e-12)

    def test_constant_axis_rejected(self):
        ct = CrossTab("r", "c", ("only",), ("x", "y"), np.array([[3, 4]]))
        with pytest.raises(DataError, match="constant"):
            spearman_rho(ct)

    def test_too_few_pairs_rejected(self):
        ct = CrossTab("r", "c", ("a", "b"), ("x", "y"), np.array([[1, 0], [0, 1]]))
        with pytest.raises(DataError):
            spearman_rho(ct)

    def test_score_length_mismatch_rejected(self):
        ct = CrossTab("r", "c", ("a", "b"), ("x", "y"), np.array([[1, 1], [1, 1]]))
        with pytest.raises(ValueError):
            spearman_rho(ct, row_scores=(1.0,))


class TestPoststratification:
    def test_three_to_one_sample(self):
        scheme = poststratification_weights(
            ["a", "a", "a", "b"], "axis", {"a": 0.5, "b": 0.5}
        )
        assert scheme.weight_for("a") == pytest.approx(2 / 3)
        assert scheme.weight_for("b") == pytest.approx(2.0)

    def test_matched_sample_has_unit_weights(self):
        scheme = poststratification_weights(
            ["a", "b", "a", "b"], "axis", {"a": 1, "b": 1}
        )
        assert scheme.weight_for("a") == pytest.approx(1.0)
        assert scheme.weight_for("b") == pytest.approx(1.0)

    def test_unanswered_ignored(self):
        scheme = poststratification_weights(
            ["a", UNANSWERED, "b", UNANSWERED], "axis", {"a": 0.5, "b": 0.5}
        )
        assert scheme.weight_for("a") == pytest.approx(1.0)

    def test_sample_category_missing_from_target(self):
        with pytest.raises(DataError, match="'c'"):
            poststratification_weights(["a", "c"], "axis", {"a": 0.5, "b": 0.5})

    def test_target_category_without_respondents(self):
        with pytest.raises(DataError, match="'c'"):
            poststratification_weights(
                ["a", "b"], "axis", {"a": 0.5, "b": 0.25, "c": 0.25}
            )

    def test_zero_share_target_category_skipped(self):
        scheme = poststratification_weights(
            ["a", "b"], "axis", {"a": 0.5, "b": 0.5, "c": 0.0}
        )
        assert "c" not in scheme.category_weights

    def test_weighted_marginal_matches_target(self):
        rng = np.random.default_rng(13)
        cats = rng.choice(["a", "b", "c"], size=500, p=[0.6, 0.3, 0.1]).tolist()
        target = {"a": 0.4, "b": 0.4, "c": 0.2}
        scheme = poststratification_weights(cats, "axis", target)
        weights = np.array([scheme.weight_for(c) for c in cats])
        assert weights.mean() == pytest.approx(1.0, abs=1e-12)
        for cat, share in target.items():
            mask = np.array([c == cat for c in cats])
            assert weights[mask].sum() / weights.sum() == pytest.approx(
                share, abs=1e-12
            )

    def test_empty_or_zero_target_rejected(self):
        with pytest.raises(DataError):
            poststratification_weights([], "axis", {"a": 1.0})
        with pytest.raises(DataError):
            poststratification_weights(["a"], "axis", {"a": 0.0})

    def test_unlisted_category_lookup_names_axis(self):
        scheme = WeightScheme("own", {"own": 1.0})
        with pytest.raises(DataError, match="own"):
            scheme.weight_for("rent")


class TestRecordWeighting:
    def test_weights_for_records_drops_unanswered(self, small_spec):
        records = [
            make_record(small_spec, "r1", demographics={"own": "own"}),
            make_record(small_spec, "r2", demographics={"own": "rent"}),
            make_record(small_spec, "r3"),
        ]
        scheme = WeightScheme("own", {"own": 0.5, "rent": 1.5})
        kept, weights = weights_for_records(records, scheme)
        assert [r.respondent_id for r in kept] == ["r1", "r2"]
        assert weights == [0.5, 1.5]

    def test_balanced_sample_matches_unweighted_tally(self, small_spec):
        records = [
            make_record(small_spec, "r1", fee=1, demographics={"own": "own"}),
            make_record(small_spec, "r2", fee=1, demographics={"own": "own"}),
            make_record(small_spec, "r3", fee=2, demographics={"own": "rent"}),
            make_record(small_spec, "r4", fee=2, demographics={"own": "rent"}),
        ]
        scheme = poststratification_weights(
            ["own", "own", "rent", "rent"], "own", {"own": 0.5, "rent": 0.5}
        )
        question = Question("fee:golf", "fee", "golf")
        weighted = weighted_tally(records, scheme, question)
        plain = tally_distribution([1, 1, 2, 2], "fee:golf")
        assert weighted.proportions == pytest.approx(plain.proportions)
        assert weighted.n == 4

    def test_weight_five_counts_fivefold(self, small_spec):
        records = [make_record(small_spec, "r0", fee=2, demographics={"own": "own"})]
        records += [
            make_record(small_spec, f"r{i}", fee=0, demographics={"own": "rent"})
            for i in range(1, 6)
        ]
        scheme = WeightScheme("own", {"own": 5.0, "rent": 1.0})
        dist = weighted_tally(records, scheme, Question("fee:golf", "fee", "golf"))
        assert dist.proportions[2] == pytest.approx(0.5)
        assert dist.proportions[0] == pytest.approx(0.5)
        assert dist.n == 6

    def test_reweighted_aggregate_still_balances(self, small_spec):
        # steps sum to zero and respect the -1/-2/-3 floors
        valid_steps = [
            (0, 0, 0),
            (1, -1, 0),
            (-1, 2, -1),
            (1, 1, -2),
            (0, -2, 2),
            (-1, -1, 2),
            (2, 0, -2),
        ]
        rng = np.random.default_rng(29)
        records = [
            make_record(
                small_spec,
                f"r{i}",
                steps=valid_steps[rng.integers(len(valid_steps))],
                demographics={"own": rng.choice(["own", "rent"])},
            )
            for i in range(30)
        ]
        cats = [r.demographics["own"] for r in records]
        scheme = poststratification_weights(cats, "own", {"own": 0.7, "rent": 0.3})
        kept, weights = weights_for_records(records, scheme)
        agg = knapsack_aggregate(
            small_spec, [r.expenditure for r in kept], weights, "own"
        )
        assert agg.total_change == 0
        assert agg.weight_scheme_id == "own"
        result_alloc = ExpenditureBallot(
            {c.area_id: c.baseline + c.change for c in agg.changes}
        )
        assert validate_expenditure(small_spec, result_alloc).valid

    def test_demographic_distribution_counts_answered(self, small_spec):
        records = [
            make_record(small_spec, "r1", demographics={"own": "own"}),
            make_record(small_spec, "r2", demographics={"own": "own"}),
            make_record(small_spec, "r3", demographics={"own": "rent"}),
            make_record(small_spec, "r4"),
        ]
        dist = demographic_distribution(records, "own")
        assert dist.n == 3
        assert dist.proportions["own"] == pytest.approx(2 / 3)
        assert dist.proportions["rent"] == pytest.approx(1 / 3)

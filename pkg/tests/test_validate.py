import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_record, random_dataset
from taskatlas.core import Channel, Margin
from taskatlas.ingest import deduplicate
from taskatlas.linkage import HashEmbedder
from taskatlas.validate import (
    PredictedLabel,
    RationalePair,
    ValidateError,
    agreement_suite,
    chance_baseline,
    consistency_screen,
    content_tokens,
    distribution_check,
    jaccard,
    paraphrase_stability,
    rationale_divergence,
    rationale_harness,
    stratified_sample,
)


def dataset_with_levels(levels, country="AAA", prefix="t"):
    records = [
        make_record(f"{prefix}{i}", country=country, exposure=lvl,
                    margin=Margin.BOTH if lvl >= 2 else Margin.UNCLEAR,
                    channel=Channel.RULE_BASED_WORKFLOW if lvl >= 2 else Channel.NONE)
        for i, lvl in enumerate(levels)
    ]
    return deduplicate(records)


class TestAgreementSuite:
    def test_self_comparison_is_one_everywhere(self, rng):
        dataset = random_dataset(rng, {"AAA": 60}, unclear_rate=0.1)
        report = agreement_suite(dataset, dataset)
        assert report.exact_level == 1.0
        assert report.within_one_level == 1.0
        assert report.binary_exposed == 1.0
        for field, value in report.per_field.items():
            if value is not None:
                assert value == 1.0
        for i in range(4):
            for j in range(4):
                if i != j:
                    assert report.confusion[i][j] == 0

    def test_four_record_fixture(self):
        run_a = dataset_with_levels([0, 2, 3, 0])
        run_b = dataset_with_levels([1, 2, 2, 3])
        report = agreement_suite(run_a, run_b)
        assert report.exact_level == pytest.approx(0.25)
        assert report.within_one_level == pytest.approx(0.75)
        assert report.binary_exposed == pytest.approx(0.75)
        assert sum(sum(row) for row in report.confusion) == report.n == 4

    def test_ordering_invariants(self, rng):
        a = random_dataset(rng, {"AAA": 80}, unclear_rate=0.2)
        b = random_dataset(np.random.default_rng(99), {"AAA": 80}, unclear_rate=0.2)
        report = agreement_suite(a, b)
        assert report.exact_level <= report.within_one_level <= 1.0
        assert report.exact_level <= report.binary_exposed

    def test_empty_intersection_errors(self):
        run_a = dataset_with_levels([2], country="AAA")
        run_b = dataset_with_levels([2], country="BBB")
        with pytest.raises(ValidateError):
            agreement_suite(run_a, run_b)


class TestChanceBaseline:
    def test_uniform_five_categories(self):
        uniform = {c: 0.2 for c in "abcde"}
        assert chance_baseline(uniform, uniform) == pytest.approx(0.2)

    def test_point_masses_agree(self):
        assert chance_baseline({"x": 1.0}, {"x": 1.0}) == 1.0

    def test_hand_computed(self):
        assert chance_baseline({"a": 0.5, "b": 0.5}, {"a": 0.8, "b": 0.2}) == pytest.approx(0.5)

    @settings(max_examples=30, deadline=None)
    @given(
        pa=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6),
        pb=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6),
    )
    def test_bounded(self, pa, pb):
        size = min(len(pa), len(pb))
        pa, pb = pa[:size], pb[:size]
        ma = {str(i): v / sum(pa) for i, v in enumerate(pa)}
        mb = {str(i): v / sum(pb) for i, v in enumerate(pb)}
        value = chance_baseline(ma, mb)
        assert 0.0 <= value <= 1.0 + 1e-12

    def test_one_only_for_matching_point_masses(self):
        assert chance_baseline({"a": 1.0}, {"b": 1.0}) == 0.0
        assert chance_baseline({"a": 0.9, "b": 0.1}, {"a": 0.9, "b": 0.1}) < 1.0


class TestParaphraseStability:
    def test_identical_variants_joint_one(self, rng):
        original = random_dataset(rng, {"AAA": 40})
        report = paraphrase_stability(original, [original, original, original])
        assert report.joint_within_one == 1.0
        assert all(r.exact_level == 1.0 for r in report.per_variant)

    def test_range_one_counts_as_stable(self):
        original = dataset_with_levels([2])
        variants = [dataset_with_levels([2]), dataset_with_levels([3]), dataset_with_levels([2])]
        report = paraphrase_stability(original, variants)
        assert report.joint_within_one == 1.0

    def test_range_two_not_stable(self):
        original = dataset_with_levels([2])
        variants = [dataset_with_levels([1]), dataset_with_levels([3])]
        report = paraphrase_stability(original, variants)
        assert report.joint_within_one == 0.0

    def test_needs_two_variants(self):
        original = dataset_with_levels([2])
        with pytest.raises(ValidateError):
            paraphrase_stability(original, [original])


class TestConsistencyScreen:
    def _dataset(self, rationale, exposure=3, margin=Margin.BOTH):
        record = make_record("t1", exposure=exposure, margin=margin, rationale=rationale)
        return deduplicate([record])

    def test_direct_contradiction_flagged(self):
        report = consistency_screen(self._dataset("Automation is not possible here."))
        assert report.n_flagged_records == 1
        assert report.flags[0].rule_id == "r1_level3_denies"

    def test_negator_outside_phrase_suppresses(self):
        report = consistency_screen(self._dataset("It is wrong to say automation is not possible."))
        assert report.n_flagged_records == 0

    def test_rule_eligibility_respected(self):
        # same denial phrase on a level-0 record is not an r1 conflict
        report = consistency_screen(self._dataset("Automation is not possible here.", exposure=0))
        assert all(f.rule_id != "r1_level3_denies" for f in report.flags)

    def test_ai_invocation_on_not_material(self):
        record = make_record("t1", exposure=2, margin=Margin.BOTH, ai_material=False,
                             rationale="An LLM could draft this text end to end.")
        report = consistency_screen(deduplicate([record]))
        assert any(f.rule_id == "r5_notai_invokes_ai" for f in report.flags)

    def test_sentence_boundary_isolates_negator(self):
        # negator in a different sentence does not suppress
        text = "This is never trivial. Automation is not possible here."
        report = consistency_screen(self._dataset(text))
        assert report.n_flagged_records == 1

    def test_monotone_in_lexicon(self, rng):
        dataset = random_dataset(rng, {"AAA": 50})
        small = {"r1_level3_denies": ("cannot be automated",)}
        large = {"r1_level3_denies": ("cannot be automated", "routine structured workflow")}
        flags_small = {f.key for f in consistency_screen(dataset, lexicon=small).flags}
        flags_large = {f.key for f in consistency_screen(dataset, lexicon=large).flags}
        assert flags_small <= flags_large

    def test_eligibility_counts(self, rng):
        dataset = random_dataset(rng, {"AAA": 60})
        report = consistency_screen(dataset)
        level3 = sum(1 for _, r in dataset.items_sorted() if r.exposure == 3)
        assert report.per_rule["r1_level3_denies"].eligible == level3

    def test_empty_lexicon_rejected(self):
        with pytest.raises(ValidateError):
            consistency_screen(self._dataset("x"), lexicon={})
        with pytest.raises(ValidateError):
            consistency_screen(self._dataset("x"), lexicon={"r1_level3_denies": ()})

    def test_word_boundary_matching(self):
        # "ai" must not match inside "said"
        record = make_record("t1", exposure=2, margin=Margin.BOTH, ai_material=False,
                             rationale="The supervisor said this is manual work.")
        report = consistency_screen(deduplicate([record]))
        assert report.n_flagged_records == 0


class TestRationaleDivergence:
    def test_identical_texts_jaccard_one(self):
        pairs = [RationalePair("manual welding of pipes", "manual welding of pipes")]
        report = rationale_divergence(pairs)
        assert report.pairs[0].jaccard == 1.0

    def test_hand_computed_half(self):
        assert jaccard(frozenset("abc"), frozenset("bcd")) == pytest.approx(0.5)

    def test_disjoint_zero(self):
        pairs = [RationalePair("alpha beta gamma", "delta epsilon zeta")]
        assert rationale_divergence(pairs).pairs[0].jaccard == 0.0

    def test_empty_token_pair_skipped(self):
        pairs = [RationalePair("the of and", "welding pipes")]
        report = rationale_divergence(pairs)
        assert report.n_skipped == 1
        assert report.pairs == ()

    def test_token_rules(self):
        tokens = content_tokens("The 99 robots; a welder's torch!")
        assert "robots" in tokens and "torch" in tokens
        assert "99" not in tokens and "the" not in tokens and "a" not in tokens

    def test_cosine_and_quadrants(self):
        provider = HashEmbedder(dim=32)
        pairs = [RationalePair("welding pipes daily", "welding pipes daily")]
        report = rationale_divergence(pairs, embedder=provider)
        assert report.pairs[0].cosine == pytest.approx(1.0, abs=1e-9)
        assert report.quadrant_shares["high_jaccard/high_cosine"] == 1.0

    def test_country_mention_flag(self):
        pairs = [RationalePair("In Kenya this is manual.", "Automated everywhere.", "Kenya", "Japan")]
        metrics = rationale_divergence(pairs).pairs[0]
        assert metrics.mentions_a is True
        assert metrics.mentions_b is False

    def test_jaccard_symmetric_bounded(self, rng):
        for _ in range(20):
            a = frozenset(f"w{i}" for i in rng.integers(0, 30, size=rng.integers(1, 10)))
            b = frozenset(f"w{i}" for i in rng.integers(0, 30, size=rng.integers(1, 10)))
            assert jaccard(a, b) == jaccard(b, a)
            assert 0.0 <= jaccard(a, b) <= 1.0


class _OraclePredictor:
    def __init__(self, dataset):
        self.records = dataset.records

    def predict(self, task_id, country, rationale):
        record = self.records[(country, task_id)]
        return PredictedLabel(exposure=record.exposure, channel=record.channel,
                              margin=record.margin, ai_material=record.ai_material)


class _FixedPredictor:
    def predict(self, task_id, country, rationale):
        return PredictedLabel(exposure=2)


class _FlakyPredictor:
    def __init__(self, fail_times):
        self.failures = fail_times

    def predict(self, task_id, country, rationale):
        if self.failures > 0:
            self.failures -= 1
            raise RuntimeError("transient")
        return PredictedLabel(exposure=0)


def balanced_dataset(per_level=10):
    records = []
    for lvl in range(4):
        for i in range(per_level):
            records.append(
                make_record(f"L{lvl}_{i}", exposure=lvl, margin=Margin.BOTH if lvl >= 2 else Margin.UNCLEAR)
            )
    return deduplicate(records)


class TestRationaleHarness:
    def test_oracle_predictor_perfect(self):
        dataset = balanced_dataset()
        report = rationale_harness(dataset, _OraclePredictor(dataset), per_level=5, seed=3)
        assert report.exact_level == 1.0
        assert report.binary_exposed == 1.0

    def test_fixed_predictor_quarter_exact(self):
        dataset = balanced_dataset()
        report = rationale_harness(dataset, _FixedPredictor(), per_level=5, seed=3)
        assert report.exact_level == pytest.approx(0.25)

    def test_sampling_deterministic_under_seed(self):
        dataset = balanced_dataset()
        a = stratified_sample(dataset, per_level=4, seed=11)
        b = stratified_sample(dataset, per_level=4, seed=11)
        assert [r.key for r in a] == [r.key for r in b]
        c = stratified_sample(dataset, per_level=4, seed=12)
        assert [r.key for r in a] != [r.key for r in c]

    def test_stratification_equal_counts(self):
        sample = stratified_sample(balanced_dataset(), per_level=6, seed=0)
        counts = {lvl: sum(1 for r in sample if r.exposure == lvl) for lvl in range(4)}
        assert counts == {0: 6, 1: 6, 2: 6, 3: 6}

    def test_insufficient_level_errors(self):
        with pytest.raises(ValidateError, match="only"):
            stratified_sample(balanced_dataset(per_level=2), per_level=5, seed=0)

    def test_retries_then_error(self):
        dataset = balanced_dataset()
        report = rationale_harness(dataset, _FlakyPredictor(2), per_level=1, seed=0, retries=2)
        assert report.n == 4
        with pytest.raises(ValidateError, match="failed"):
            rationale_harness(dataset, _FlakyPredictor(100), per_level=1, seed=0, retries=1)


class TestDistributionCheck:
    def test_singleton_point_mass(self):
        dataset = deduplicate([make_record("t1", exposure=2, margin=Margin.BOTH)])
        tables = distribution_check(dataset).groups["overall"]
        assert tables["exposure_level"] == {"2": 1.0}
        assert tables["margin"] == {"both": 1.0}

    def test_tables_sum_to_one(self, rng):
        dataset = random_dataset(rng, {"AAA": 70, "BBB": 50}, unclear_rate=0.15)
        tables = distribution_check(dataset).groups["overall"]
        for field, table in tables.items():
            assert abs(math.fsum(table.values()) - 1.0) < 1e-12

    def test_margin_raw_vs_normalized(self):
        # a sub-threshold record with a raw margin shows up only in margin_raw
        record = make_record("t1", exposure=1, margin=Margin.SUBSTITUTE)
        tables = distribution_check(deduplicate([record])).groups["overall"]
        assert tables["margin"] == {"unclear": 1.0}
        assert tables["margin_raw"] == {"substitute": 1.0}

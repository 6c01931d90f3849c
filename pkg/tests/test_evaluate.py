import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from shapebench.core import BinaryShape
from shapebench.evaluate import (EvalRecord, bin_by_input_iou, bin_scores,
                                 evaluate_method, mark_best,
                                 paired_one_sided_t_test,
                                 regularized_incomplete_beta, student_t_cdf)
from shapebench.noise import salt_pepper
from shapebench.synth import disk


def make_records(input_ious, kind="salt_pepper"):
    truth = disk(16, 5.0)
    return [
        EvalRecord(item_id=f"item{i:04d}", truth=truth, noisy=truth,
                   input_iou=v, noise_kind=kind)
        for i, v in enumerate(input_ious)
    ]


class TestBinning:
    def test_boundary_assignment(self):
        bins = bin_by_input_iou(make_records([0.95, 1.0, 0.6, 0.5, 0.49, 0.7]))
        by_range = {(b.lo, b.hi): [r.input_iou for r in b.records] for b in bins}
        assert by_range[(0.9, 1.0)] == [0.95, 1.0]
        assert by_range[(0.6, 0.7)] == [0.6]
        assert by_range[(0.5, 0.6)] == [0.5]
        assert by_range[(0.7, 0.8)] == [0.7]
        # 0.49 discarded
        assert sum(len(b.records) for b in bins) == 5

    def test_partition_no_duplicates(self):
        rng = np.random.default_rng(1)
        records = make_records(rng.uniform(0, 1, size=400).tolist())
        bins = bin_by_input_iou(records)
        seen = [r.item_id for b in bins for r in b.records]
        assert len(seen) == len(set(seen))
        for b in bins:
            for r in b.records:
                assert b.lo <= r.input_iou <= (b.hi if b.hi == 1.0 else math.nextafter(b.hi, 0))

    def test_cap_downsamples_deterministically(self):
        records = make_records(np.linspace(0.70, 0.7999, 2500).tolist())
        bins1 = bin_by_input_iou(records, cap=1000, seed=7)
        bins2 = bin_by_input_iou(records, cap=1000, seed=7)
        target1 = next(b for b in bins1 if b.lo == 0.7)
        target2 = next(b for b in bins2 if b.lo == 0.7)
        assert len(target1.records) == 1000
        assert [r.item_id for r in target1.records] == [r.item_id for r in target2.records]
        bins3 = bin_by_input_iou(records, cap=1000, seed=8)
        target3 = next(b for b in bins3 if b.lo == 0.7)
        assert [r.item_id for r in target3.records] != [r.item_id for r in target1.records]

    def test_unsorted_edges_rejected(self):
        with pytest.raises(ValueError):
            bin_by_input_iou([], edges=(0.5, 0.5, 0.7))
        with pytest.raises(ValueError):
            bin_by_input_iou([], edges=(0.9,))

    @settings(max_examples=30)
    @given(st.lists(st.floats(0.0, 1.0), max_size=60))
    def test_every_retained_record_in_exactly_one_bin(self, values):
        records = make_records(values)
        bins = bin_by_input_iou(records)
        retained = sum(len(b.records) for b in bins)
        expected = sum(1 for v in values if v >= 0.5)
        assert retained == expected


class TestEvaluateMethod:
    def _bins(self):
        truth = disk(32, 10.0)
        records = []
        for i in range(12):
            noisy = salt_pepper(truth, 0.04 * (i % 3), seed=i)
            records.append(EvalRecord.from_shapes(f"r{i}", truth, noisy, "salt_pepper"))
        return bin_by_input_iou(records, edges=(0.0, 0.5, 1.0))

    def test_identity_reproduces_input_means(self):
        bins = self._bins()
        means = evaluate_method("input", lambda rec: rec.noisy, bins)
        for b, mean in zip(bins, means):
            if b.records:
                assert mean == pytest.approx(np.mean([r.input_iou for r in b.records]))

    def test_oracle_scores_one_everywhere(self):
        bins = self._bins()
        means = evaluate_method("oracle", lambda rec: rec.truth, bins)
        for b, mean in zip(bins, means):
            if b.records:
                assert mean == 1.0

    def test_simple_mean(self):
        # outputs overlapping 8, 9, and 10 of 10 truth pixels score
        # 0.8, 0.9, and 1.0; the bin mean is 0.9
        truth = BinaryShape.from_foreground(12, 3, [(x, 1) for x in range(10)])
        records = [
            EvalRecord(item_id=f"r{k}", truth=truth, noisy=truth,
                       input_iou=1.0, noise_kind="salt_pepper")
            for k in range(3)
        ]
        bins = bin_by_input_iou(records, edges=(0.9, 1.0))
        outputs = {
            "r0": BinaryShape.from_foreground(12, 3, [(x, 1) for x in range(8)]),
            "r1": BinaryShape.from_foreground(12, 3, [(x, 1) for x in range(9)]),
            "r2": truth,
        }
        means = evaluate_method("m", lambda rec: outputs[rec.item_id], bins)
        assert means[0] == pytest.approx(0.9)
        assert sorted(r.output_iou["m"] for r in bins[0].records) == [0.8, 0.9, 1.0]

    def test_failures_flagged_not_dropped(self):
        bins = self._bins()

        def flaky(rec):
            if rec.item_id == "r0":
                raise RuntimeError("boom")
            return rec.noisy

        evaluate_method("flaky", flaky, bins)
        flagged = [r for b in bins for r in b.records if "flaky" in r.failed]
        assert len(flagged) == 1
        assert flagged[0].output_iou["flaky"] == 0.0
        counts = sum(len(b.records) for b in bins)
        scored = sum(1 for b in bins for r in b.records if "flaky" in r.output_iou)
        assert counts == scored


class TestStudentT:
    def test_reference_point(self):
        res = paired_one_sided_t_test([0.0, 0.0, 0.0], [1.0, 2.0, 3.0])
        assert res.t_stat == pytest.approx(2.0 * math.sqrt(3.0), abs=1e-4)
        assert res.df == 2
        assert res.p_value == pytest.approx(0.0371, abs=5e-4)
        assert res.significant

    def test_identical_scores(self):
        res = paired_one_sided_t_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
        assert res.t_stat == 0.0
        assert res.p_value == 0.5
        assert not res.significant

    def test_zero_variance_differences(self):
        res = paired_one_sided_t_test([0.5, 1.5], [1.0, 2.0])
        assert res.p_value == 0.0 and res.significant and res.t_stat == math.inf
        res = paired_one_sided_t_test([1.0, 2.0], [0.5, 1.5])
        assert res.p_value == 1.0 and not res.significant

    def test_needs_two_pairs(self):
        with pytest.raises(ValueError):
            paired_one_sided_t_test([0.5], [0.6])

    def test_cdf_against_scipy_oracle(self):
        for df in (1, 2, 3, 10, 50, 500):
            for t in np.linspace(-8, 8, 33):
                assert student_t_cdf(float(t), df) == pytest.approx(
                    scipy.stats.t.cdf(t, df), abs=1e-10)

    def test_p_value_against_scipy_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(3, 30))
            x = rng.normal(0.5, 0.1, size=n)
            y = x + rng.normal(0.01, 0.05, size=n)
            res = paired_one_sided_t_test(x.tolist(), y.tolist())
            t_ref, p_ref = scipy.stats.ttest_rel(y, x, alternative="greater")
            assert res.t_stat == pytest.approx(t_ref, abs=1e-10)
            assert res.p_value == pytest.approx(p_ref, abs=1e-10)

    def test_antisymmetry(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = int(rng.integers(2, 40))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            if np.std(y - x, ddof=1) == 0.0:
                continue
            p_xy = paired_one_sided_t_test(x, y).p_value
            p_yx = paired_one_sided_t_test(y, x).p_value
            assert abs(p_xy + p_yx - 1.0) < 1e-9

    def test_incomplete_beta_domain(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
        with pytest.raises(ValueError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)

    def test_incomplete_beta_against_scipy(self):
        import scipy.special
        rng = np.random.default_rng(2)
        for _ in range(200):
            a = float(rng.uniform(0.1, 50.0))
            b = float(rng.uniform(0.1, 50.0))
            x = float(rng.uniform(0.0, 1.0))
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                scipy.special.betainc(a, b, x), abs=1e-10)


class TestMarkBest:
    def test_single_method_bolded(self):
        assert mark_best({"only": [0.5, 0.6]}) == {"only"}

    def test_identical_methods_both_bolded(self):
        scores = {"a": [0.5, 0.6, 0.7], "b": [0.5, 0.6, 0.7]}
        assert mark_best(scores) == {"a", "b"}

    def test_clearly_worse_method_excluded(self):
        rng = np.random.default_rng(5)
        best = rng.uniform(0.9, 0.95, size=50).tolist()
        worse = [v - 0.2 for v in best]
        assert mark_best({"good": best, "bad": worse}) == {"good"}

    def test_noisy_tie_keeps_both(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(0.8, 0.9, size=30)
        b = a + rng.normal(0.0, 0.02, size=30)
        bold = mark_best({"a": a.tolist(), "b": b.tolist()})
        assert max("ab", key=lambda nm: np.mean({"a": a, "b": b}[nm])) in bold

    @settings(max_examples=40)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12),
           st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12))
    def test_argmax_always_bolded(self, a, b):
        n = min(len(a), len(b))
        scores = {"a": a[:n], "b": b[:n]}
        means = {nm: np.mean(v) for nm, v in scores.items()}
        best = min(nm for nm in scores if means[nm] == max(means.values()))
        assert best in mark_best(scores)

    def test_bolding_invariant_under_constant_shift(self):
        rng = np.random.default_rng(8)
        scores = {nm: rng.uniform(0.5, 0.9, size=25).tolist() for nm in "abc"}
        shifted = {nm: [v + 0.05 for v in vals] for nm, vals in scores.items()}
        assert mark_best(scores) == mark_best(shifted)

    def test_single_record_bolds_everything(self):
        assert mark_best({"a": [0.9], "b": [0.1]}) == {"a", "b"}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mark_best({})
        with pytest.raises(ValueError):
            mark_best({"a": []})
        with pytest.raises(ValueError):
            mark_best({"a": [0.5], "b": [0.5, 0.6]})

    def test_bin_scores_alignment(self):
        records = make_records([0.95, 0.96])
        bins = bin_by_input_iou(records, edges=(0.9, 1.0))
        evaluate_method("m1", lambda rec: rec.truth, bins)
        evaluate_method("m2", lambda rec: rec.noisy, bins)
        scores = bin_scores(bins[0], ["m1", "m2"])
        assert scores["m1"] == [1.0, 1.0]
        assert len(scores["m2"]) == 2

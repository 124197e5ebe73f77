"""Metric values against hand derivations and brute-force references."""

import math

import numpy as np
import pytest

from licap.metrics import (
    evaluate,
    kfold_split,
    median_ae,
    ndcg_at_k,
    over_at_k,
    rmse,
    spearman,
)

from reference import (
    naive_median_ae,
    naive_ndcg,
    naive_over,
    naive_rmse,
    naive_spearman,
)


class TestRmse:
    def test_identical_vectors(self):
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_value(self):
        assert rmse([1, 2], [1, 4]) == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_constant_offset(self):
        pred = np.array([1.0, 5.0, 9.0])
        assert rmse(pred + 0.7, pred) == pytest.approx(0.7, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1, 2], [1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rmse([], [])


class TestMedianAe:
    def test_identical(self):
        assert median_ae([4, 4], [4, 4]) == 0.0

    def test_odd_count(self):
        assert median_ae([0, 1, 2], [0, 0, 0]) == 1.0

    def test_even_count_mean_of_middle(self):
        assert median_ae([0, 2], [0, 0]) == 1.0


class TestNdcg:
    def test_perfect_ranking(self):
        assert ndcg_at_k([3, 2, 1], [9, 5, 1], k=3) == 1.0

    def test_hand_dcg(self):
        # predicted order already ideal; DCG = 3 + 1/log2(3)
        pred = [2.0, 1.0]
        truth = [3.0, 1.0]
        dcg = 3 + 1 / math.log2(3)
        assert dcg == pytest.approx(3.63093, abs=1e-5)
        assert ndcg_at_k(pred, truth, k=2) == 1.0

    def test_all_zero_truth_convention(self):
        assert ndcg_at_k([1, 2, 3], [0, 0, 0], k=2) == 0.0

    def test_k_out_of_range(self):
        for k in (0, 4):
            with pytest.raises(ValueError):
                ndcg_at_k([1, 2, 3], [1, 2, 3], k=k)

    def test_tie_break_by_index(self):
        # tied predictions: item 0 ranked before item 1
        assert ndcg_at_k([5, 5], [1, 3], k=1) == pytest.approx(1 / 3)


class TestSpearman:
    def test_identical_rankings(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_value(self):
        assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)

    def test_constant_side_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_ties_use_average_ranks(self):
        assert spearman([1, 1, 2], [1, 1, 2]) == pytest.approx(1.0)


class TestOver:
    def test_identical_topk(self):
        assert over_at_k([5, 4, 1], [9, 8, 0], k=2) == 1.0

    def test_disjoint(self):
        assert over_at_k([9, 0, 0, 0], [0, 0, 0, 9], k=1) == 0.0

    def test_half_overlap(self):
        assert over_at_k([9, 8, 0, 0], [9, 0, 8, 0], k=2) == 0.5


class TestKfold:
    def test_even_split(self):
        folds = kfold_split(10, 5, seed=0)
        assert [f.size for f in folds] == [2, 2, 2, 2, 2]

    def test_partition(self):
        folds = kfold_split(23, 4, seed=1)
        merged = np.concatenate(folds)
        assert sorted(merged.tolist()) == list(range(23))
        assert max(f.size for f in folds) - min(f.size for f in folds) <= 1

    def test_deterministic(self):
        a = kfold_split(30, 5, seed=3)
        b = kfold_split(30, 5, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            kfold_split(3, 5, seed=0)
        with pytest.raises(ValueError):
            kfold_split(5, 1, seed=0)

    def test_partition_for_many_shapes(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(4, 100))
            k = int(rng.integers(2, min(n, 9) + 1))
            folds = kfold_split(n, k, seed=int(rng.integers(1000)))
            merged = sorted(np.concatenate(folds).tolist())
            assert merged == list(range(n))


class TestBruteForceEquivalence:
    def test_500_random_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(500):
            n = int(rng.integers(2, 51))
            pred = rng.normal(size=n)
            truth = rng.uniform(0, 5, size=n)
            k = int(rng.integers(1, n + 1))
            assert rmse(pred, truth) == pytest.approx(
                naive_rmse(pred, truth), abs=1e-10
            )
            assert median_ae(pred, truth) == pytest.approx(
                naive_median_ae(pred, truth), abs=1e-10
            )
            assert ndcg_at_k(pred, truth, k) == pytest.approx(
                naive_ndcg(list(pred), list(truth), k), abs=1e-10
            )
            assert spearman(pred, truth) == pytest.approx(
                naive_spearman(list(pred), list(truth)), abs=1e-10
            )
            assert over_at_k(pred, truth, k) == naive_over(
                list(pred), list(truth), k
            )

    def test_ties_against_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            n = int(rng.integers(3, 30))
            pred = rng.integers(0, 4, size=n).astype(float)
            truth = rng.integers(0, 4, size=n).astype(float)
            k = int(rng.integers(1, n + 1))
            if len(set(pred)) > 1 and len(set(truth)) > 1:
                assert spearman(pred, truth) == pytest.approx(
                    naive_spearman(list(pred), list(truth)), abs=1e-10
                )
            assert over_at_k(pred, truth, k) == naive_over(list(pred), list(truth), k)
            assert ndcg_at_k(pred, truth, k) == pytest.approx(
                naive_ndcg(list(pred), list(truth), k), abs=1e-10
            )


class TestRankOnlyDependence:
    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(2, 40))
            pred = rng.normal(size=n)
            truth = rng.uniform(0, 3, size=n)
            k = int(rng.integers(1, n + 1))
            warped = pred**3 + 1
            assert ndcg_at_k(pred, truth, k) == ndcg_at_k(warped, truth, k)
            assert over_at_k(pred, truth, k) == over_at_k(warped, truth, k)


class TestEvaluate:
    def test_perfect_predictions(self):
        truth = np.array([3.0, 2.0, 1.0, 0.5])
        report = evaluate(truth, truth, ks=[1, 2])
        assert report.rmse == 0.0
        assert report.median_ae == 0.0
        assert report.spearman == pytest.approx(1.0)
        assert all(v == 1.0 for v in report.ndcg_at_k.values())
        assert all(v == 1.0 for v in report.over_at_k.values())

    def test_fields_for_every_k(self):
        rng = np.random.default_rng(2)
        report = evaluate(rng.normal(size=20), rng.uniform(0, 2, size=20), ks=[3, 7, 11])
        assert set(report.ndcg_at_k) == {3, 7, 11}
        assert set(report.over_at_k) == {3, 7, 11}
        assert report.sample_count == 20

    def test_matches_individual_calls(self):
        rng = np.random.default_rng(8)
        pred = rng.normal(size=15)
        truth = rng.uniform(0, 2, size=15)
        report = evaluate(pred, truth, ks=[5])
        assert report.rmse == rmse(pred, truth)
        assert report.median_ae == median_ae(pred, truth)
        assert report.spearman == spearman(pred, truth)
        assert report.ndcg_at_k[5] == ndcg_at_k(pred, truth, 5)
        assert report.over_at_k[5] == over_at_k(pred, truth, 5)

import math

import numpy as np
import pytest

from ai.losses import hybrid_loss, ranking_loss, ranking_margins, softmax_xent
from crf_core import nll


class TestRankingLoss:
    def test_margins_satisfied(self):
        loss, dP = ranking_loss(np.array([[4.5, -2.5]]), [0])
        assert loss == 0.0
        assert not dP.any()

    def test_zero_scores(self):
        loss, dP = ranking_loss(np.array([[0.0, 0.0]]), [0])
        assert loss == 4.0
        assert dP.tolist() == [[-1.0, 1.0]]

    def test_gamma_scales_margin_terms(self):
        loss, dP = ranking_loss(np.array([[0.0, 0.0]]), [0], gamma=2.0)
        assert loss == 7.0
        assert dP.tolist() == [[-2.0, 2.0]]

    def test_sums_over_tokens(self):
        P = np.array([[0.0, 0.0], [4.5, -2.5], [0.0, 0.0]])
        assert ranking_loss(P, [0, 0, 1])[0] == 8.0

    def test_competitor_is_best_non_gold(self):
        P = np.array([[0.0, 1.0, 3.0]])
        _, dP = ranking_loss(P, [1])
        assert dP.tolist() == [[0.0, -1.0, 1.0]]

    def test_competitor_tie_takes_lowest_index(self):
        _, dP = ranking_loss(np.array([[0.0, 1.0, 1.0]]), [0])
        assert dP.tolist() == [[-1.0, 1.0, 0.0]]

    def test_single_tag_has_no_competitor(self):
        assert ranking_loss(np.array([[3.0], [1.0]]), [0, 0])[0] == 0.0

    def test_margins_are_hinge_arguments(self):
        values = ranking_margins(np.array([[4.5, -2.5], [0.0, 0.0]]), [0, 0])
        assert values.tolist() == [-3.0, 4.0]


def fixture_suite(count=20, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, k = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        yield (rng.normal(size=(n, k)), rng.normal(size=(k + 2, k + 2)),
               rng.integers(0, k, size=n).tolist())


class TestHybridLoss:
    @pytest.mark.parametrize('P,A,y', list(fixture_suite()))
    def test_alpha_zero_is_exactly_nll(self, P, A, y):
        loss, dP, dA = hybrid_loss(P, A, y, alpha=0.0)
        ref_loss, ref_dP, ref_dA = nll(P, A, y)
        assert loss == ref_loss
        assert np.array_equal(dP, ref_dP)
        assert np.array_equal(dA, ref_dA)

    def test_inactive_hinge_is_exactly_nll(self):
        P = np.array([[10.0, -10.0], [-10.0, 10.0]])
        A = np.zeros((4, 4))
        assert hybrid_loss(P, A, [0, 1], alpha=1.0)[0] == nll(P, A, [0, 1])[0]

    @pytest.mark.parametrize('seed', range(30))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(1, 5)), int(rng.integers(2, 5))
        P = rng.normal(scale=2.0, size=(n, k))
        A = rng.normal(size=(k + 2, k + 2))
        y = rng.integers(0, k, size=n).tolist()
        if np.any(np.abs(ranking_margins(P, y)) < 1e-3):
            pytest.skip("hinge kink")
        loss, dP, dA = hybrid_loss(P, A, y, alpha=0.7)
        h = 1e-5
        for M, G in ((P, dP), (A, dA)):
            for idx in np.ndindex(M.shape):
                old = M[idx]
                M[idx] = old + h
                up = hybrid_loss(P, A, y, alpha=0.7)[0]
                M[idx] = old - h
                down = hybrid_loss(P, A, y, alpha=0.7)[0]
                M[idx] = old
                numeric = (up - down) / (2 * h)
                assert abs(G[idx] - numeric) / max(1e-4, abs(G[idx]) + abs(numeric)) < 1e-4


class TestSoftmaxXent:
    def test_uniform_logits(self):
        loss, _ = softmax_xent(np.zeros((3, 8)), [0, 5, 7])
        assert loss == pytest.approx(3 * math.log(8))

    def test_gradient_rows_sum_to_zero(self, rng):
        _, d = softmax_xent(rng.normal(size=(4, 6)), [1, 2, 3, 0])
        np.testing.assert_allclose(d.sum(axis=1), 0.0, atol=1e-12)

    def test_empty(self):
        loss, d = softmax_xent(np.zeros((0, 3)), [])
        assert loss == 0.0
        assert d.shape == (0, 3)

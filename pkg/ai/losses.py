#!/usr/bin/env python3
"""
Tagger losses
=============
Ranking hinge, hybrid CRF + ranking, and softmax cross-entropy for the
auxiliary heads.

Every function returns the loss together with its gradient(s).
"""

from typing import Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from crf_core import nll


def ranking_loss(P: np.ndarray, y: Sequence[int], gamma: float = 1.0,
                 margin_pos: float = 2.5, margin_neg: float = 0.5
                 ) -> Tuple[float, np.ndarray]:
    """
    Per-token hinge between the gold score and the best competitor:

        max(0, 1 + gamma * (m+ - s_gold) + gamma * (m- + s_competitor))

    summed over tokens. The subgradient touches only the gold entry and the
    competitor (lowest index on ties) of tokens with a positive hinge. With
    a single tag there is no competitor and the loss is 0.
    """
    n, k = P.shape
    dP = np.zeros((n, k))
    if k < 2 or n == 0:
        return 0.0, dP
    loss = 0.0
    for i in range(n):
        gold = int(y[i])
        others = P[i].copy()
        others[gold] = -np.inf
        competitor = int(np.argmax(others))
        value = 1.0 + gamma * (margin_pos - P[i, gold]) + gamma * (margin_neg + P[i, competitor])
        if value > 0:
            loss += value
            dP[i, gold] -= gamma
            dP[i, competitor] += gamma
    return float(loss), dP


def ranking_margins(P: np.ndarray, y: Sequence[int], gamma: float = 1.0,
                    margin_pos: float = 2.5, margin_neg: float = 0.5) -> np.ndarray:
    """Per-token hinge arguments (before the max with 0); used to spot kinks."""
    n, k = P.shape
    values = np.full(n, -np.inf)
    if k < 2:
        return values
    for i in range(n):
        others = P[i].copy()
        others[int(y[i])] = -np.inf
        values[i] = (1.0 + gamma * (margin_pos - P[i, int(y[i])])
                     + gamma * (margin_neg + others.max()))
    return values


def hybrid_loss(P: np.ndarray, A: np.ndarray, y: Sequence[int], alpha: float = 1.0,
                gamma: float = 1.0, margin_pos: float = 2.5, margin_neg: float = 0.5
                ) -> Tuple[float, np.ndarray, np.ndarray]:
    """CRF negative log-likelihood plus alpha times the ranking loss."""
    loss, dP, dA = nll(P, A, y)
    if alpha == 0:
        return loss, dP, dA
    rank, dP_rank = ranking_loss(P, y, gamma, margin_pos, margin_neg)
    return loss + alpha * rank, dP + alpha * dP_rank, dA


def softmax_xent(logits: np.ndarray, targets: Sequence[int]) -> Tuple[float, np.ndarray]:
    """Summed cross-entropy of row-wise softmax predictions."""
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    targets = np.asarray(targets, dtype=int)
    logp = log_softmax(logits, axis=1)
    loss = -logp[np.arange(n), targets].sum()
    dlogits = softmax(logits, axis=1)
    dlogits[np.arange(n), targets] -= 1.0
    return float(loss), dlogits

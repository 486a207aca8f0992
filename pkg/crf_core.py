#!/usr/bin/env python3
"""
Linear-chain CRF
================
Sequence scoring, forward/backward recursions, Viterbi decoding and the
negative log-likelihood with its exact gradients.

Conventions:
- P is an n x k emission matrix, P[i, j] the score of tag j at token i
- A is a (k+2) x (k+2) transition matrix; index k is START, k+1 is END
- all dynamic programming runs in log space
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

logger = logging.getLogger('CRF')

# Score given to transitions that a valid sequence never takes
FORBIDDEN = -1e4


def _shapes(P: np.ndarray, A: np.ndarray) -> Tuple[int, int]:
    P = np.asarray(P)
    if P.ndim != 2:
        raise ValueError(f"emission matrix must be 2-D, got shape {P.shape}")
    n, k = P.shape
    if A.shape != (k + 2, k + 2):
        raise ValueError(f"transition matrix must be {(k + 2, k + 2)}, got {A.shape}")
    return n, k


def score_sequence(P: np.ndarray, A: np.ndarray, y: Sequence[int]) -> float:
    """A[start, y1] + sum P[i, yi] + sum A[yi, yi+1] + A[yn, end]."""
    n, k = _shapes(P, A)
    if len(y) != n:
        raise ValueError(f"tag sequence of length {len(y)} for {n} tokens")
    start, end = k, k + 1
    if n == 0:
        return float(A[start, end])
    y = np.asarray(y, dtype=int)
    score = A[start, y[0]] + P[np.arange(n), y].sum()
    score += A[y[:-1], y[1:]].sum() + A[y[-1], end]
    return float(score)


def forward(P: np.ndarray, A: np.ndarray) -> np.ndarray:
    """alpha[i, j]: log-sum of scores of all prefixes ending in tag j at token i."""
    n, k = _shapes(P, A)
    alpha = np.empty((n, k))
    if n == 0:
        return alpha
    trans = A[:k, :k]
    alpha[0] = A[k, :k] + P[0]
    for i in range(1, n):
        alpha[i] = logsumexp(alpha[i - 1][:, None] + trans, axis=0) + P[i]
    return alpha


def backward(P: np.ndarray, A: np.ndarray) -> np.ndarray:
    """beta[i, j]: log-sum of scores of all suffixes after tag j at token i."""
    n, k = _shapes(P, A)
    beta = np.empty((n, k))
    if n == 0:
        return beta
    trans = A[:k, :k]
    beta[n - 1] = A[:k, k + 1]
    for i in range(n - 2, -1, -1):
        beta[i] = logsumexp(trans + (P[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(P: np.ndarray, A: np.ndarray) -> float:
    """log of the summed exp-scores of all k**n tag sequences."""
    n, k = _shapes(P, A)
    if n == 0:
        return float(A[k, k + 1])
    alpha = forward(P, A)
    return float(logsumexp(alpha[-1] + A[:k, k + 1]))


def marginals(P: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-token tag posteriors (n x k)."""
    n, k = _shapes(P, A)
    if n == 0:
        return np.zeros((0, k))
    alpha, beta = forward(P, A), backward(P, A)
    log_z = logsumexp(alpha[-1] + A[:k, k + 1])
    return np.exp(alpha + beta - log_z)


def nll(P: np.ndarray, A: np.ndarray, y: Sequence[int]
        ) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Negative log-likelihood of y with gradients w.r.t. P and A.

    Each gradient entry is the expected count under the model minus the
    count in y.
    """
    n, k = _shapes(P, A)
    gold = score_sequence(P, A, y)
    dP = np.zeros((n, k))
    dA = np.zeros_like(A, dtype=np.float64)
    start, end = k, k + 1
    if n == 0:
        return float(A[start, end]) - gold, dP, dA

    alpha, beta = forward(P, A), backward(P, A)
    log_z = logsumexp(alpha[-1] + A[:k, end])
    mu = np.exp(alpha + beta - log_z)

    dP += mu
    dA[start, :k] += mu[0]
    dA[:k, end] += mu[-1]
    trans = A[:k, :k]
    for i in range(n - 1):
        dA[:k, :k] += np.exp(alpha[i][:, None] + trans
                             + (P[i + 1] + beta[i + 1])[None, :] - log_z)

    y = np.asarray(y, dtype=int)
    dP[np.arange(n), y] -= 1.0
    dA[start, y[0]] -= 1.0
    np.add.at(dA, (y[:-1], y[1:]), -1.0)
    dA[y[-1], end] -= 1.0
    return float(log_z) - gold, dP, dA


def viterbi(P: np.ndarray, A: np.ndarray) -> Tuple[List[int], float]:
    """
    Highest-scoring tag sequence and its score.

    Ties go to the lowest tag index at every backpointer step.
    """
    n, k = _shapes(P, A)
    start, end = k, k + 1
    if n == 0:
        return [], float(A[start, end])
    trans = A[:k, :k]
    delta = A[start, :k] + P[0]
    backptr = np.zeros((n, k), dtype=int)
    for i in range(1, n):
        cand = delta[:, None] + trans
        backptr[i] = np.argmax(cand, axis=0)
        delta = cand[backptr[i], np.arange(k)] + P[i]
    final = delta + A[:k, end]
    best = int(np.argmax(final))
    path = [best]
    for i in range(n - 1, 0, -1):
        path.append(int(backptr[i, path[-1]]))
    path.reverse()
    return path, float(final[best])

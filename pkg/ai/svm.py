#!/usr/bin/env python3
"""
Kernel SVM
==========
One-vs-rest RBF support vector machine trained by sequential minimal
optimization.

Each binary subproblem maximizes the dual

    D(a) = sum(a) - 1/2 a'Qa,   Q_ij = y_i y_j K(x_i, x_j)

subject to sum(a_i y_i) = 0 and 0 <= a_i <= C * weight(label_i). Every
step moves the maximal violating pair, so D never decreases.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.metrics.pairwise import rbf_kernel

from exceptions import TrainingError

logger = logging.getLogger('SvmTrainer')

# curvature floor for pairs with identical kernel rows
TAU = 1e-12


@dataclass
class BinarySolution:
    """
    Attributes:
        alpha: Dual multipliers
        bias: Intercept of f(x) = sum(alpha_i y_i K(x_i, x)) + bias
        iterations: SMO steps taken
        residual: Maximal KKT violation at exit (m - M, floored at 0)
        dual_history: Dual objective after every step, starting at a = 0;
            empty unless the solve recorded it
    """
    alpha: np.ndarray
    bias: float
    iterations: int
    residual: float
    dual_history: List[float] = field(default_factory=list)


def dual_objective(alpha: np.ndarray, grad: np.ndarray) -> float:
    """D(a) from the multipliers and g = 1 - Qa."""
    return float(0.5 * np.sum(alpha * (1.0 + grad)))


def _violation_sets(alpha, y, upper):
    up = np.where(y > 0, alpha < upper, alpha > 0)
    low = np.where(y > 0, alpha > 0, alpha < upper)
    return up, low


def smo_solve(K: np.ndarray, y: np.ndarray, upper: np.ndarray, tol: float = 1e-3,
              max_iter: int = 100000, record_history: bool = False) -> BinarySolution:
    """
    Solve one binary dual problem.

    Args:
        K: Kernel matrix (n x n)
        y: Labels in {-1, +1}
        upper: Per-example box bound
        tol: Stop once the maximal violating pair gap drops below tol
        record_history: Keep the dual objective of every step in dual_history
    """
    y = np.asarray(y, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    n = len(y)
    alpha = np.zeros(n)
    grad = np.ones(n)
    lower_y = np.where(y > 0, 0.0, -upper)   # bounds on y_k * alpha_k
    upper_y = np.where(y > 0, upper, 0.0)
    history = [0.0] if record_history else []

    iterations = 0
    while iterations < max_iter:
        crit = y * grad
        up, low = _violation_sets(alpha, y, upper)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(crit[up])])
        j = int(np.flatnonzero(low)[np.argmin(crit[low])])
        gap = crit[i] - crit[j]
        if gap < tol:
            break

        curvature = max(K[i, i] + K[j, j] - 2.0 * K[i, j], TAU)
        room_i = upper_y[i] - y[i] * alpha[i]
        room_j = y[j] * alpha[j] - lower_y[j]
        step = min(room_i, room_j, gap / curvature)

        grad += step * y * (K[j] - K[i])
        alpha[i] = y[i] * upper_y[i] if step == room_i else alpha[i] + y[i] * step
        alpha[j] = y[j] * lower_y[j] if step == room_j else alpha[j] - y[j] * step
        iterations += 1
        if record_history:
            history.append(dual_objective(alpha, grad))
    else:
        logger.warning(f"SMO stopped at max_iter={max_iter} before reaching tol={tol}")

    crit = y * grad
    up, low = _violation_sets(alpha, y, upper)
    m = crit[up].max() if up.any() else -np.inf
    M = crit[low].min() if low.any() else np.inf
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        bias = float(crit[free].mean())
    elif np.isfinite(m) and np.isfinite(M):
        bias = float((m + M) / 2.0)
    else:
        bias = float(m if np.isfinite(m) else M)
    residual = float(max(0.0, m - M)) if np.isfinite(m) and np.isfinite(M) else 0.0
    return BinarySolution(alpha, bias, iterations, residual, history)


@dataclass
class BinaryModel:
    """One-vs-rest classifier of one label."""
    label: str
    support_vectors: object          # ndarray or csr_matrix rows
    dual_coef: np.ndarray            # alpha_i * y_i of the support vectors
    bias: float
    residual: float
    iterations: int


@dataclass
class SvmModel:
    """
    Attributes:
        classes: Labels in name order (the tie-break order)
        models: One BinaryModel per class
        gamma: RBF kernel width
        C: Penalty parameter
        class_weights: Label -> box multiplier (missing labels weigh 1)
    """
    classes: List[str]
    models: List[BinaryModel]
    gamma: float
    C: float
    class_weights: Dict[str, float] = field(default_factory=dict)

    def decision_function(self, X) -> np.ndarray:
        """Margins of every row of X, one column per class."""
        n = X.shape[0]
        margins = np.zeros((n, len(self.classes)))
        for c, model in enumerate(self.models):
            margins[:, c] = model.bias
            if len(model.dual_coef) and n:
                margins[:, c] += rbf_kernel(X, model.support_vectors, gamma=self.gamma) @ \
                    model.dual_coef
        return margins

    def predict(self, X) -> List[str]:
        if X.shape[0] == 0:
            return []
        # argmax keeps the first of tied classes
        return [self.classes[c] for c in np.argmax(self.decision_function(X), axis=1)]


def _check_features(X):
    values = X.data if sp.issparse(X) else np.asarray(X)
    if not np.all(np.isfinite(values)):
        raise ValueError("feature matrix holds non-finite values")


def svm_train(X, labels: Sequence[str], C: float = 1.0,
              class_weights: Optional[Dict[str, float]] = None,
              gamma: Optional[float] = None, tol: float = 1e-3,
              max_iter: int = 100000) -> SvmModel:
    """
    Train one-vs-rest RBF classifiers.

    The box bound of example i is C * class_weights[label_i]; gamma
    defaults to 1 / feature count.

    Raises:
        TrainingError: fewer than two classes
        ValueError: non-finite features or a length mismatch
    """
    labels = list(labels)
    if X.shape[0] != len(labels):
        raise ValueError(f"{X.shape[0]} feature rows for {len(labels)} labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError(f"SVM training needs at least two classes, got {classes}")
    _check_features(X)
    if gamma is None:
        if X.shape[1] == 0:
            raise ValueError("empty feature space")
        gamma = 1.0 / X.shape[1]
    class_weights = dict(class_weights or {})

    K = rbf_kernel(X, X, gamma=gamma)
    label_array = np.array(labels, dtype=object)
    upper = C * np.array([class_weights.get(label, 1.0) for label in labels])

    models = []
    for label in classes:
        y = np.where(label_array == label, 1.0, -1.0)
        solution = smo_solve(K, y, upper, tol, max_iter)
        support = np.flatnonzero(solution.alpha > 0)
        models.append(BinaryModel(
            label=label,
            support_vectors=X[support],
            dual_coef=solution.alpha[support] * y[support],
            bias=solution.bias,
            residual=solution.residual,
            iterations=solution.iterations,
        ))
        logger.info(f"SVM {label} vs rest: {len(support)} support vectors, "
                    f"{solution.iterations} steps, KKT residual {solution.residual:.2e}")
    return SvmModel(classes, models, float(gamma), float(C), class_weights)


def svm_predict(model: SvmModel, x) -> Tuple[str, Dict[str, float]]:
    """Label of one feature row with the margin of every class."""
    if not sp.issparse(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    margins = model.decision_function(x)[0]
    label = model.classes[int(np.argmax(margins))]
    return label, dict(zip(model.classes, margins.tolist()))

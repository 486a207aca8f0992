"""
Slot Error Rate for joint entity recognition and normalization.

Within each document gold and predicted entities are matched one-to-one,
maximizing the summed pair score

    s(r, p) = jaccard(r, p) * [same type] * (1 if same norm id else w_norm)

Matched pairs cost 1 - s (substitution), unmatched predictions are
insertions, unmatched gold entities deletions:

    SER = (S + I + D) / N,  N = number of gold entities
"""

import logging
from dataclasses import asdict, dataclass
from typing import Iterable, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from corpus_io import Span

logger = logging.getLogger('SlotError')

EXACT_ASSIGNMENT_LIMIT = 500


@dataclass
class SerReport:
    substitutions: float
    insertions: int
    deletions: int
    n_reference: int
    matched: int
    ser: float

    def to_dict(self):
        return asdict(self)


def jaccard(a: Span, b: Span) -> float:
    """Character-overlap Jaccard of two spans."""
    inter = max(0, min(a.char_end, b.char_end) - max(a.char_start, b.char_start))
    union = (a.char_end - a.char_start) + (b.char_end - b.char_start) - inter
    return inter / union if union else 0.0


def pair_score(gold: Span, pred: Span, w_norm: float = 0.5) -> float:
    if gold.entity_type != pred.entity_type:
        return 0.0
    overlap = jaccard(gold, pred)
    if overlap == 0.0:
        return 0.0
    return overlap * (1.0 if gold.norm_id == pred.norm_id else w_norm)


def _greedy(scores: np.ndarray) -> List[Tuple[int, int]]:
    rows, cols = np.nonzero(scores > 0)
    order = sorted(zip(rows, cols), key=lambda rc: (-scores[rc], rc[0], rc[1]))
    used_r, used_c, pairs = set(), set(), []
    for r, c in order:
        if r not in used_r and c not in used_c:
            used_r.add(r)
            used_c.add(c)
            pairs.append((int(r), int(c)))
    return pairs


def match(gold: Sequence[Span], pred: Sequence[Span], w_norm: float = 0.5
          ) -> List[Tuple[int, int, float]]:
    """Positive-score (gold index, pred index, score) pairs of the best matching."""
    if not gold or not pred:
        return []
    scores = np.array([[pair_score(g, p, w_norm) for p in pred] for g in gold])
    if len(gold) > EXACT_ASSIGNMENT_LIMIT and len(pred) > EXACT_ASSIGNMENT_LIMIT:
        logger.warning(f"{len(gold)}x{len(pred)} matching problem, using greedy assignment")
        pairs = _greedy(scores)
    else:
        rows, cols = linear_sum_assignment(scores, maximize=True)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    return [(r, c, float(scores[r, c])) for r, c in pairs if scores[r, c] > 0]


def ser(pred: Mapping[str, Iterable[Span]], gold: Mapping[str, Iterable[Span]],
        w_norm: float = 0.5) -> SerReport:
    """
    Corpus SER over doc_id -> spans mappings.

    Raises ValueError when there is no gold entity.
    """
    if not 0.0 <= w_norm <= 1.0:
        raise ValueError("w_norm must lie in [0, 1]")
    gold = {doc_id: list(spans) for doc_id, spans in gold.items()}
    pred = {doc_id: list(spans) for doc_id, spans in pred.items()}
    n_reference = sum(len(spans) for spans in gold.values())
    if n_reference == 0:
        raise ValueError("SER is undefined without reference entities")
    subs, ins, dels, matched = 0.0, 0, 0, 0
    for doc_id in sorted(set(gold) | set(pred)):
        g = gold.get(doc_id, [])
        p = pred.get(doc_id, [])
        pairs = match(g, p, w_norm)
        subs += sum(1.0 - s for _, _, s in pairs)
        matched += len(pairs)
        ins += len(p) - len(pairs)
        dels += len(g) - len(pairs)
    return SerReport(subs, ins, dels, n_reference, matched, (subs + ins + dels) / n_reference)

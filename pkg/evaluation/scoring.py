"""
Strict-boundary precision / recall / F1
=======================================
Spans are compared as hashable keys whose last element is the entity type,
normally (doc_id, char_start, char_end, entity_type). Relations are compared
as (doc_id, relation_type, arg1 key, arg2 key).
"""

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Hashable, Iterable, Mapping, Sequence, Tuple, Union

from corpus_io import Document, Relation, Span


class Mode(Enum):
    MICRO = 'micro'
    MACRO = 'macro'


@dataclass
class TypeScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass
class PrfReport:
    """
    Attributes:
        precision, recall, f1: Pooled (micro) or type-averaged (macro) scores
        tp, fp, fn: Pooled counts
        mode: 'micro' or 'macro'
        per_type: Scores of every type seen in pred or gold
    """
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    mode: str = Mode.MICRO.value
    per_type: Dict[str, TypeScore] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    """P is 0 without predictions, R is 0 without gold items."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def span_key(doc_id: str, span: Span) -> Tuple[str, int, int, str]:
    return (doc_id, span.char_start, span.char_end, span.entity_type)


def document_keys(docs: Union[Iterable[Document], Mapping[str, Iterable[Span]]]):
    """Span keys of gold documents, or of a doc_id -> spans mapping."""
    if isinstance(docs, Mapping):
        return {span_key(doc_id, s) for doc_id, spans in docs.items() for s in spans}
    return {span_key(doc.doc_id, s) for doc in docs for s in doc.gold_spans}


def _score(pred: set, gold: set, type_of) -> PrfReport:
    counts = defaultdict(lambda: [0, 0, 0])
    for item in pred:
        counts[type_of(item)][0 if item in gold else 1] += 1
    for item in gold - pred:
        counts[type_of(item)][2] += 1
    per_type = {}
    for etype in sorted(counts):
        tp, fp, fn = counts[etype]
        per_type[etype] = TypeScore(tp, fp, fn, *prf(tp, fp, fn))
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    return PrfReport(*prf(tp, fp, fn), tp, fp, fn, per_type=per_type)


def span_prf(pred: Iterable[Hashable], gold: Iterable[Hashable],
             mode: Union[str, Mode] = Mode.MICRO) -> PrfReport:
    """
    Exact-match scoring of typed spans.

    MICRO pools the counts; MACRO averages P, R and F1 over the entity types
    present in pred or gold. Identical empty inputs score perfectly.
    """
    mode = Mode(mode)
    pred, gold = set(pred), set(gold)
    if not pred and not gold:
        return PrfReport(1.0, 1.0, 1.0, 0, 0, 0, mode.value)
    report = _score(pred, gold, lambda item: item[-1])
    report.mode = mode.value
    if mode is Mode.MACRO:
        scores = list(report.per_type.values())
        report.precision = sum(s.precision for s in scores) / len(scores)
        report.recall = sum(s.recall for s in scores) / len(scores)
        report.f1 = sum(s.f1 for s in scores) / len(scores)
    return report


def relation_key(doc_id: str, relation: Relation):
    a1, a2 = relation.arg1, relation.arg2
    return (doc_id, relation.relation_type,
            (a1.char_start, a1.char_end, a1.entity_type),
            (a2.char_start, a2.char_end, a2.entity_type))


def relation_prf(pred: Iterable[Hashable], gold: Iterable[Hashable]) -> PrfReport:
    """Micro P/R/F1 over relation keys; per_type is keyed by relation type."""
    pred, gold = set(pred), set(gold)
    if not pred and not gold:
        return PrfReport(1.0, 1.0, 1.0, 0, 0, 0)
    return _score(pred, gold, lambda item: item[1])


def relation_keys(items: Union[Iterable[Document], Mapping[str, Sequence[Relation]]]):
    if isinstance(items, Mapping):
        return {relation_key(doc_id, r) for doc_id, rels in items.items() for r in rels}
    return {relation_key(doc.doc_id, r) for doc in items for r in doc.gold_relations}

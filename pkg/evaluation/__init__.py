# evaluation/__init__.py
"""
Evaluation package for the extraction pipeline.

Provides:
- span_prf / relation_prf: strict-boundary precision, recall and F1
- ser: Slot Error Rate for recognition + normalization
- format_table / format_key_values / check_thresholds: reporting and gating
"""

from .scoring import (
    Mode,
    PrfReport,
    TypeScore,
    document_keys,
    prf,
    relation_key,
    relation_keys,
    relation_prf,
    span_key,
    span_prf,
)
from .slot_error import SerReport, jaccard, match, pair_score, ser
from .report import check_thresholds, format_key_values, format_table

__all__ = [
    'Mode',
    'PrfReport',
    'TypeScore',
    'document_keys',
    'prf',
    'relation_key',
    'relation_keys',
    'relation_prf',
    'span_key',
    'span_prf',
    'SerReport',
    'jaccard',
    'match',
    'pair_score',
    'ser',
    'check_thresholds',
    'format_key_values',
    'format_table',
]

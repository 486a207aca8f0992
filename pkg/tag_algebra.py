#!/usr/bin/env python3
"""
Tag Algebra
===========
Label-sequence utilities shared by the taggers and the ensemble.

Provides:
- IOBES / BIO encoding of token span sets and decoding back to spans
- Boundary repair of inconsistent label sequences
- Class-then-boundary token voting across ensemble members
- Span-set aggregation (union, optionally without overlaps)
- Conversion between character spans and token spans
"""

import logging
from collections import Counter
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from corpus_io import Span, Token
from exceptions import SpanOverlapError

logger = logging.getLogger('TagAlgebra')

OUTSIDE = 'O'

# (token_start, token_end inclusive, entity_type)
SpanTriple = Tuple[int, int, str]
SpanSet = Set[SpanTriple]


class Scheme(Enum):
    """Supported tagging schemes."""
    BIO = "BIO"
    IOBES = "IOBES"

    @property
    def prefixes(self) -> Tuple[str, ...]:
        return ('B', 'I') if self is Scheme.BIO else ('B', 'I', 'E', 'S')


def split_label(label: str) -> Tuple[str, Optional[str]]:
    """'B-Habitat' -> ('B', 'Habitat'); 'O' -> ('O', None)."""
    if label == OUTSIDE:
        return OUTSIDE, None
    prefix, sep, entity_type = label.partition('-')
    if not sep or prefix not in ('B', 'I', 'E', 'S') or not entity_type:
        raise ValueError(f"not a tag label: {label!r}")
    return prefix, entity_type


def join_label(prefix: str, entity_type: Optional[str]) -> str:
    return OUTSIDE if prefix == OUTSIDE else f"{prefix}-{entity_type}"


def tag_inventory(entity_types: Iterable[str], scheme: Scheme = Scheme.IOBES) -> List[str]:
    """All labels of a scheme over the given types, O first."""
    return [OUTSIDE] + [join_label(p, t) for t in sorted(set(entity_types))
                        for p in scheme.prefixes]


def collapse_types(tags: Sequence[str]) -> List[str]:
    """Drop entity types, keeping only the boundary prefix (NED labels)."""
    return [split_label(tag)[0] for tag in tags]


# ---------------------------------------------------------------------------
# Encoding / decoding
# ---------------------------------------------------------------------------

def encode(spans: Iterable[SpanTriple], n_tokens: int,
           scheme: Scheme = Scheme.IOBES) -> List[str]:
    """
    Encode a non-overlapping span set as a label sequence.

    Raises:
        SpanOverlapError: two spans share a token
        ValueError: a span outside [0, n_tokens)
    """
    ordered = sorted(set(spans))
    tags = [OUTSIDE] * n_tokens
    previous = None
    for span in ordered:
        start, end, entity_type = span
        if not 0 <= start <= end < n_tokens:
            raise ValueError(f"span {span} outside a {n_tokens}-token sentence")
        if previous is not None and start <= previous[1]:
            raise SpanOverlapError(previous, span)
        if start == end:
            tags[start] = join_label('S' if scheme is Scheme.IOBES else 'B', entity_type)
        else:
            tags[start] = join_label('B', entity_type)
            for i in range(start + 1, end):
                tags[i] = join_label('I', entity_type)
            tags[end] = join_label('E' if scheme is Scheme.IOBES else 'I', entity_type)
        if previous is None or end > previous[1]:
            previous = span
    return tags


def encode_iobes(spans: Iterable[SpanTriple], n_tokens: int) -> List[str]:
    return encode(spans, n_tokens, Scheme.IOBES)


def repair_boundaries(tags: Sequence[str], scheme: Scheme = Scheme.IOBES) -> List[str]:
    """
    Rewrite prefixes so the sequence is valid under the scheme.

    Entity types are never changed. Valid sequences come back unchanged.
    """
    if scheme is Scheme.BIO:
        return _repair_bio(tags)

    parsed = [split_label(tag) for tag in tags]
    repaired: List[str] = []
    prev_prefix, prev_type = OUTSIDE, None
    for i, (prefix, entity_type) in enumerate(parsed):
        if prefix == OUTSIDE:
            repaired.append(OUTSIDE)
            prev_prefix, prev_type = OUTSIDE, None
            continue
        nxt_prefix, nxt_type = parsed[i + 1] if i + 1 < len(parsed) else (OUTSIDE, None)
        continues = nxt_type == entity_type and nxt_prefix in ('I', 'E')
        inside = prev_prefix in ('B', 'I') and prev_type == entity_type

        if prefix in ('I', 'E') and inside:
            new_prefix = 'E' if prefix == 'E' or not continues else 'I'
        elif prefix in ('I', 'E', 'B'):
            new_prefix = 'B' if continues else 'S'
        else:
            new_prefix = 'S'
        repaired.append(join_label(new_prefix, entity_type))
        prev_prefix, prev_type = new_prefix, entity_type
    return repaired


def _repair_bio(tags: Sequence[str]) -> List[str]:
    repaired: List[str] = []
    prev_type = None
    for tag in tags:
        prefix, entity_type = split_label(tag)
        if prefix == OUTSIDE:
            repaired.append(OUTSIDE)
            prev_type = None
            continue
        # S/E labels fed to a BIO repair act as B/I
        if prefix in ('I', 'E') and prev_type == entity_type:
            repaired.append(join_label('I', entity_type))
        else:
            repaired.append(join_label('B', entity_type))
        prev_type = entity_type
    return repaired


def is_valid(tags: Sequence[str], scheme: Scheme = Scheme.IOBES) -> bool:
    return list(tags) == repair_boundaries(tags, scheme)


def decode_spans(tags: Sequence[str], scheme: Scheme = Scheme.IOBES) -> SpanSet:
    """Span set of a label sequence, repaired first."""
    spans: SpanSet = set()
    start = None
    for i, tag in enumerate(repair_boundaries(tags, scheme)):
        prefix, entity_type = split_label(tag)
        if scheme is Scheme.BIO:
            if start is not None and prefix != 'I':
                spans.add((start, i - 1, current))
                start = None
            if prefix == 'B':
                start, current = i, entity_type
            continue
        if prefix == 'S':
            spans.add((i, i, entity_type))
        elif prefix == 'B':
            start = i
        elif prefix == 'E':
            spans.add((start, i, entity_type))
            start = None
    if scheme is Scheme.BIO and start is not None:
        spans.add((start, len(tags) - 1, current))
    return spans


def convert_scheme(tags: Sequence[str], source: Scheme, target: Scheme) -> List[str]:
    """Re-encode a label sequence in another scheme (repairing it first)."""
    if source is target:
        return repair_boundaries(tags, source)
    return encode(decode_spans(tags, source), len(tags), target)


# ---------------------------------------------------------------------------
# Ensemble voting
# ---------------------------------------------------------------------------

def majority_label(votes: Sequence[Tuple[int, str]], confident_index: int) -> str:
    """Majority value; ties go to the confident model, else the earliest voter."""
    counts = Counter(value for _, value in votes)
    best = max(counts.values())
    tied = {value for value, count in counts.items() if count == best}
    if len(tied) == 1:
        return next(iter(tied))
    for model, value in votes:
        if model == confident_index and value in tied:
            return value
    for _, value in votes:
        if value in tied:
            return value
    raise AssertionError("unreachable")


def vote(tag_seqs: Sequence[Sequence[str]], confident_index: int = 0,
         scheme: Scheme = Scheme.IOBES, repair: bool = True) -> List[str]:
    """
    Token-level ensemble vote: the class decides, then its voters pick the
    boundary prefix.

    O counts as a class of its own. Ties at either stage go to the model at
    confident_index when it is among the tied, otherwise to the earliest
    tied model. The voted sequence is repaired unless repair is False.
    """
    if not tag_seqs:
        raise ValueError("no tag sequences to vote over")
    length = len(tag_seqs[0])
    if any(len(seq) != length for seq in tag_seqs):
        raise ValueError("tag sequences differ in length")
    if not 0 <= confident_index < len(tag_seqs):
        raise ValueError(f"confident index {confident_index} out of range")

    voted = []
    for i in range(length):
        parsed = [split_label(seq[i]) for seq in tag_seqs]
        classes = [(m, entity_type or OUTSIDE) for m, (_, entity_type) in enumerate(parsed)]
        winner = majority_label(classes, confident_index)
        if winner == OUTSIDE:
            voted.append(OUTSIDE)
            continue
        prefixes = [(m, parsed[m][0]) for m, cls in classes if cls == winner]
        voted.append(join_label(majority_label(prefixes, confident_index), winner))
    return repair_boundaries(voted, scheme) if repair else voted


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _overlaps(a: SpanTriple, b: SpanTriple) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def aggregate_spans(span_sets: Sequence[Iterable[SpanTriple]],
                    drop_overlapping: bool = False) -> SpanSet:
    """
    Union of span sets from the same sentence.

    With drop_overlapping, a span overlapping one already kept is skipped;
    earlier sets take precedence.
    """
    if not drop_overlapping:
        union: SpanSet = set()
        for spans in span_sets:
            union.update(spans)
        return union

    kept: List[SpanTriple] = []
    for spans in span_sets:
        for span in sorted(set(spans)):
            if not any(_overlaps(span, other) for other in kept):
                kept.append(span)
    return set(kept)


# ---------------------------------------------------------------------------
# Character <-> token coordinates
# ---------------------------------------------------------------------------

def char_spans_to_tokens(tokens: Sequence[Token], spans: Iterable[Span]
                         ) -> List[Tuple[SpanTriple, Span]]:
    """
    Token span of every character span that touches the sentence.

    A span covers every token it overlaps; spans touching no token are left
    out.
    """
    mapped = []
    for span in spans:
        covered = [i for i, tok in enumerate(tokens)
                   if tok.char_start < span.char_end and span.char_start < tok.char_end]
        if covered:
            mapped.append(((covered[0], covered[-1], span.entity_type), span))
    return mapped


def token_spans_to_char(tokens: Sequence[Token], triples: Iterable[SpanTriple],
                        norm_ids: Optional[Dict[SpanTriple, str]] = None) -> List[Span]:
    """Character spans of token spans, in text order."""
    norm_ids = norm_ids or {}
    return [Span(tokens[start].char_start, tokens[end].char_end, entity_type,
                 norm_id=norm_ids.get((start, end, entity_type)))
            for start, end, entity_type in sorted(triples)]


# ---------------------------------------------------------------------------
# Transition constraints
# ---------------------------------------------------------------------------

def allowed_start(label: str, scheme: Scheme = Scheme.IOBES) -> bool:
    prefix = split_label(label)[0]
    if prefix == OUTSIDE:
        return True
    return prefix in scheme.prefixes and prefix not in ('I', 'E')


def allowed_end(label: str, scheme: Scheme = Scheme.IOBES) -> bool:
    if scheme is Scheme.BIO:
        return True
    return split_label(label)[0] not in ('B', 'I')


def allowed_transition(prev: str, nxt: str, scheme: Scheme = Scheme.IOBES) -> bool:
    """Whether nxt may directly follow prev in a valid sequence."""
    prev_prefix, prev_type = split_label(prev)
    nxt_prefix, nxt_type = split_label(nxt)
    if scheme is Scheme.BIO:
        if nxt_prefix == 'I':
            return prev_prefix in ('B', 'I') and prev_type == nxt_type
        return True
    if prev_prefix in ('B', 'I'):
        return nxt_prefix in ('I', 'E') and nxt_type == prev_type
    return nxt_prefix in (OUTSIDE, 'B', 'S')

#!/usr/bin/env python3
"""
Nested Entity Pipeline
======================
Two-level recognition of nested entities.

Level1 tags the outermost (parent) entities of a sentence. Every parent it
predicts is re-tagged on its own tokens by Level2, which finds the entities
nested one level inside. The output is the union of both levels; Level2
output is never fed back, so nesting depth stops at two.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from ai.tagger_model import TaggerModel
from ai.train_model import (
    TaggedSentence,
    build_tagger,
    gold_sentences,
    outermost_spans,
    tagger_examples,
    train_tagger,
)
from corpus_io import Document, EmbeddingTable, Span, Token
from exceptions import TrainingError
from pipeline_config import RankingConfig, TaggerConfig
from tag_algebra import Scheme, SpanSet, SpanTriple, decode_spans, encode, token_spans_to_char

logger = logging.getLogger('NestedPipeline')


@dataclass
class NestedPrediction:
    """
    Attributes:
        parents: Level1 spans in sentence coordinates
        nested: (parent, inner spans relative to the parent's first token)
        level1_tags: Level1 label sequence the parents were decoded from
    """
    parents: SpanSet = field(default_factory=set)
    nested: List[Tuple[SpanTriple, SpanSet]] = field(default_factory=list)
    level1_tags: List[str] = field(default_factory=list)

    def spans(self) -> SpanSet:
        """Parents plus re-offset inner spans; an inner span equal to its parent is dropped."""
        out = set(self.parents)
        for (start, end, _), inner in self.nested:
            for s, e, entity_type in inner:
                s, e = s + start, e + start
                if (s, e) != (start, end):
                    out.add((s, e, entity_type))
        return out


def inner_spans(parent: SpanTriple, spans: Iterable[SpanTriple]) -> SpanSet:
    """Spans strictly inside a parent, relative to its first token (outermost only)."""
    start, end, _ = parent
    inside = {(s - start, e - start, t) for s, e, t in spans
              if start <= s and e <= end and (s, e) != (start, end)}
    return outermost_spans(inside)


def nested_examples(docs: Iterable[Document], scheme: Scheme = Scheme.IOBES
                    ) -> List[TaggedSentence]:
    """Token sub-sequences of gold parents holding at least one inner gold span."""
    examples = []
    for tokens, spans in gold_sentences(docs, outermost=False):
        for parent in sorted(outermost_spans(spans)):
            inside = inner_spans(parent, spans)
            if inside:
                sub = tokens[parent[0]:parent[1] + 1]
                examples.append((sub, encode(inside, len(sub), scheme)))
    return examples


def train_level1(train_docs: Sequence[Document], config: TaggerConfig, ranking: RankingConfig,
                 dev_docs: Sequence[Document] = (), alpha_patterns=None,
                 embeddings: Optional[EmbeddingTable] = None,
                 curve_path: Optional[Path] = None) -> TaggerModel:
    """Parent-entity tagger over the outermost gold spans."""
    scheme = Scheme(config.scheme)
    examples = tagger_examples(train_docs, scheme)
    model = build_tagger(config, ranking, examples, alpha_patterns=alpha_patterns,
                         embeddings=embeddings)
    model, _ = train_tagger(model, examples, gold_sentences(dev_docs), curve_path)
    return model


def train_level2(train_docs: Sequence[Document], config: TaggerConfig, ranking: RankingConfig,
                 dev_docs: Sequence[Document] = (), alpha_patterns=None,
                 embeddings: Optional[EmbeddingTable] = None,
                 curve_path: Optional[Path] = None) -> TaggerModel:
    """
    Nested-entity tagger trained on gold parents, without the auxiliary
    objectives.

    Raises:
        TrainingError: the corpus has no nested entity
    """
    config = replace(config, multitask_enabled=False)
    scheme = Scheme(config.scheme)
    examples = nested_examples(train_docs, scheme)
    if not examples:
        raise TrainingError("training corpus has no nested entities; "
                            "set flags.nested=false to skip the nested level")
    logger.info(f"Level2 training set: {len(examples)} parent entities with nested spans")
    dev = [(sub, decode_spans(tags, scheme)) for sub, tags in nested_examples(dev_docs, scheme)]
    model = build_tagger(config, ranking, examples, alpha_patterns=alpha_patterns,
                         embeddings=embeddings)
    model, _ = train_tagger(model, examples, dev, curve_path)
    return model


def nested_prediction(level1: TaggerModel, level2: Optional[TaggerModel],
                      tokens: Sequence[Token]) -> NestedPrediction:
    tags = level1.predict(tokens)
    result = NestedPrediction(decode_spans(tags, level1.scheme), level1_tags=tags)
    if level2 is None:
        return result
    for parent in sorted(result.parents):
        sub = tokens[parent[0]:parent[1] + 1]
        inside = decode_spans(level2.predict(sub), level2.scheme)
        if inside:
            result.nested.append((parent, inside))
    return result


def predict_nested(level1: TaggerModel, level2: Optional[TaggerModel],
                   tokens: Sequence[Token]) -> SpanSet:
    """Level1 spans plus the Level2 spans found inside them."""
    return nested_prediction(level1, level2, tokens).spans()


def tag_document(level1: TaggerModel, level2: Optional[TaggerModel], doc: Document) -> List[Span]:
    """Character spans predicted for every sentence of a document."""
    spans = []
    for tokens in doc.sentences:
        if tokens:
            spans.extend(token_spans_to_char(tokens, predict_nested(level1, level2, tokens)))
    return spans

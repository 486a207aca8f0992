#!/usr/bin/env python3
"""
Relation Extractor
==================
Intra-sentence binary relation extraction with a one-vs-rest RBF SVM.

Pipeline:
1. Candidate pairs: ordered entity pairs of one sentence whose types fit the
   relation schema and that lie at most tau tokens apart
2. Features: bag-of-words blocks, shortest-dependency-path blocks, entity
   descriptors and keyword / pattern flags, as a sparse named-feature dict
3. Classification: every candidate gets a relation type or NEGATIVE
4. Ensemble: per-candidate majority vote over fold models
"""

import logging
import pickle
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
from sklearn.feature_extraction import DictVectorizer

from ai.svm import SvmModel, svm_train
from corpus_io import Document, EmbeddingTable, Relation, Span, Token, make_folds
from exceptions import ConfigError, MissingArtifactError, ParseError, TrainingError
from pipeline_config import RelationConfig
from tag_algebra import char_spans_to_tokens, majority_label

logger = logging.getLogger('RelationExtractor')

NEGATIVE = 'NEGATIVE'
CONTEXT_WINDOW = 3

# (upper bound inclusive, bucket name)
DISTANCE_BUCKETS = ((0, '0'), (2, '1-2'), (5, '3-5'), (10, '6-10'), (20, '11-20'))
COUNT_BUCKETS = ((0, '0'), (1, '1'), (2, '2'))

EntityKey = Tuple[int, int, str]


class Mode(Enum):
    TRAIN = 'train'
    EVAL = 'eval'


def bucket(value: int, buckets, overflow: str) -> str:
    for bound, name in buckets:
        if value <= bound:
            return name
    return overflow


def entity_key(span: Span) -> EntityKey:
    return span.char_start, span.char_end, span.entity_type


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass
class RelationSchema:
    """
    Valid (arg1 type, arg2 type, relation) combinations; direction matters.

    Attributes:
        valid_combos: Set of (arg1 entity type, arg2 entity type, relation type)
        roles: Relation type -> (arg1 role, arg2 role) written on R lines
    """
    valid_combos: Set[Tuple[str, str, str]] = field(default_factory=set)
    roles: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    @property
    def relation_types(self) -> List[str]:
        return sorted({combo[2] for combo in self.valid_combos})

    @property
    def entity_types(self) -> List[str]:
        return sorted({t for combo in self.valid_combos for t in combo[:2]})

    def relations_for(self, arg1_type: str, arg2_type: str) -> List[str]:
        return sorted(r for t1, t2, r in self.valid_combos if (t1, t2) == (arg1_type, arg2_type))

    def allows(self, arg1_type: str, arg2_type: str, relation_type: Optional[str] = None) -> bool:
        if relation_type is None:
            return bool(self.relations_for(arg1_type, arg2_type))
        return (arg1_type, arg2_type, relation_type) in self.valid_combos

    def role_names(self, relation_type: str) -> Tuple[str, str]:
        return self.roles.get(relation_type, ('Arg1', 'Arg2'))

    @classmethod
    def parse(cls, content: str) -> 'RelationSchema':
        """
        Tab-separated lines: relation, arg1 type, arg2 type and optionally
        the two role names. '#' starts a comment.
        """
        schema = cls()
        for line_no, line in enumerate(content.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            cols = [c.strip() for c in line.split('\t')]
            if len(cols) not in (3, 5) or not all(cols):
                raise ParseError(f"expected relation, arg1 type, arg2 type [, roles], got {line!r}",
                                 line_no)
            relation_type, arg1_type, arg2_type = cols[:3]
            schema.valid_combos.add((arg1_type, arg2_type, relation_type))
            if len(cols) == 5:
                roles = (cols[3], cols[4])
                if schema.roles.setdefault(relation_type, roles) != roles:
                    raise ParseError(f"conflicting roles for {relation_type}", line_no)
        return schema

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RelationSchema':
        """
        Raises:
            ConfigError: no schema file, or one without any combination
        """
        path = Path(path) if path else None
        if path is None or not path.is_file():
            raise ConfigError(f"relation schema {path} not found", 'paths.schema_file')
        schema = cls.parse(path.read_text(encoding='utf-8'))
        if not schema.valid_combos:
            raise ConfigError(f"relation schema {path} is empty", 'paths.schema_file')
        logger.info(f"Schema: {len(schema.relation_types)} relations over "
                    f"{len(schema.entity_types)} entity types")
        return schema


def load_keyword_lists(directory: Union[str, Path, None]) -> Dict[str, Set[str]]:
    """<relation>.txt files holding one lowercase term per line."""
    if not directory:
        return {}
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"keyword directory {directory} not found", 'paths.keyword_dir')
    keywords = {}
    for path in sorted(directory.glob('*.txt')):
        terms = {line.strip().lower() for line in path.read_text(encoding='utf-8').splitlines()}
        keywords[path.stem] = {t for t in terms if t and not t.startswith('#')}
    return keywords


# ---------------------------------------------------------------------------
# Candidates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CandidatePair:
    """
    An ordered entity pair inside one sentence.

    Attributes:
        e1_tokens / e2_tokens: Inclusive token ranges of the arguments
        others: Token ranges and types of the sentence's remaining entities
        token_distance: Tokens strictly between the two arguments
        label: Relation type, or NEGATIVE
    """
    doc_id: str
    sentence_index: int
    e1: Span
    e2: Span
    e1_tokens: Tuple[int, int]
    e2_tokens: Tuple[int, int]
    token_distance: int
    label: str = NEGATIVE
    tokens: Tuple[Token, ...] = field(default=(), repr=False, compare=False)
    others: Tuple[Tuple[int, int, str], ...] = field(default=(), repr=False, compare=False)

    @property
    def key(self):
        return self.doc_id, self.sentence_index, entity_key(self.e1), entity_key(self.e2)


def token_distance(a: Tuple[int, int], b: Tuple[int, int]) -> int:
    first, second = sorted([a, b])
    return max(0, second[0] - first[1] - 1)


def _relation_entities(spans: Iterable[Span]) -> List[Span]:
    """One span per entity (first fragment of a discontinuous one), no duplicates."""
    seen, groups, out = set(), set(), []
    for span in spans:
        if span.fragment_group is not None:
            if span.fragment_group in groups:
                continue
            groups.add(span.fragment_group)
        key = entity_key(span)
        if key not in seen:
            seen.add(key)
            out.append(span)
    return out


class CandidateGenerator:
    """
    Builds candidate pairs and keeps count of the gold relations it cannot
    represent (beyond tau, across sentences, outside the schema).
    """

    def __init__(self, schema: Optional[RelationSchema], tau: Optional[int] = 20):
        if schema is None or not schema.valid_combos:
            raise ConfigError("candidate generation needs a relation schema", 'paths.schema_file')
        self.schema = schema
        self.tau = tau
        self.dropped: Counter = Counter()

    def _gold_labels(self, doc: Document) -> Dict[Tuple[EntityKey, EntityKey], str]:
        labels: Dict[Tuple[EntityKey, EntityKey], str] = {}
        for relation in doc.gold_relations:
            pair = (entity_key(relation.arg1), entity_key(relation.arg2))
            if not self.schema.allows(pair[0][2], pair[1][2], relation.relation_type):
                self.dropped['outside_schema'] += 1
                continue
            # an ordered pair carries one label; the first type by name wins
            if pair not in labels or relation.relation_type < labels[pair]:
                labels[pair] = relation.relation_type
        return labels

    def generate(self, doc: Document, mode: Mode = Mode.EVAL,
                 entities: Optional[Iterable[Span]] = None) -> List[CandidatePair]:
        """
        TRAIN mode keeps negatives only from sentences without a gold
        relation; EVAL mode keeps every valid pair. Gold labels are attached
        in both modes.
        """
        mode = Mode(mode)
        entities = _relation_entities(doc.gold_spans if entities is None else entities)
        gold = self._gold_labels(doc)
        placed = set()
        candidates = []
        for index, tokens in enumerate(doc.sentences):
            mapped = char_spans_to_tokens(tokens, entities)
            mapped = [(triple, span) for triple, span in mapped
                      if tokens[0].char_start <= span.char_start
                      and span.char_end <= tokens[-1].char_end]
            keys = {entity_key(span) for _, span in mapped}
            has_gold = any(a in keys and b in keys for a, b in gold)
            others_all = tuple(sorted(triple for triple, _ in mapped))

            for (t1, s1), (t2, s2) in ((a, b) for a in mapped for b in mapped if a is not b):
                pair = (entity_key(s1), entity_key(s2))
                if not self.schema.allows(s1.entity_type, s2.entity_type):
                    continue
                label = gold.get(pair, NEGATIVE)
                if label != NEGATIVE:
                    placed.add(pair)
                distance = token_distance(t1[:2], t2[:2])
                if self.tau is not None and distance > self.tau:
                    if label != NEGATIVE:
                        self.dropped['beyond_tau'] += 1
                    continue
                if mode is Mode.TRAIN and label == NEGATIVE and has_gold:
                    continue
                others = tuple(o for o in others_all if o not in (t1, t2))
                candidates.append(CandidatePair(doc.doc_id, index, s1, s2, t1[:2], t2[:2],
                                                distance, label, tuple(tokens), others))
        self.dropped['cross_sentence'] += sum(
            1 for pair in gold if pair not in placed and
            {pair[0], pair[1]} <= {entity_key(s) for s in entities})
        candidates.sort(key=lambda c: (c.sentence_index, c.e1_tokens, c.e2_tokens,
                                       c.e1.entity_type, c.e2.entity_type))
        return candidates


def generate_candidates(doc: Document, schema: RelationSchema, tau: Optional[int] = 20,
                        mode: Mode = Mode.EVAL,
                        entities: Optional[Iterable[Span]] = None) -> List[CandidatePair]:
    return CandidateGenerator(schema, tau).generate(doc, mode, entities)


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def head_token(tokens: Sequence[Token], start: int, end: int) -> int:
    """First token of the range whose head lies outside it; the last token otherwise."""
    for i in range(start, end + 1):
        head = tokens[i].dep_head
        if head is None or not start <= head <= end:
            return i
    return end


def dependency_graph(tokens: Sequence[Token]) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(tokens)))
    for i, token in enumerate(tokens):
        if token.dep_head is not None and 0 <= token.dep_head < len(tokens):
            graph.add_edge(i, token.dep_head)
    return graph


def shortest_dependency_path(tokens: Sequence[Token], a: int, b: int) -> Optional[List[int]]:
    """Token indices from a to b along dependency edges, None when unconnected."""
    try:
        return nx.shortest_path(dependency_graph(tokens), a, b)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return None


def _word(token: Token) -> str:
    return token.surface.lower()


def featurize_pair(cand: CandidatePair, embeddings: Optional[EmbeddingTable] = None,
                   keywords: Optional[Dict[str, Set[str]]] = None,
                   entity_patterns: Sequence[str] = ()) -> Dict[str, float]:
    """Named sparse features of a candidate; values are left unscaled."""
    tokens = cand.tokens
    features: Dict[str, float] = defaultdict(float)
    (s1, e1), (s2, e2) = cand.e1_tokens, cand.e2_tokens
    left, right = sorted([(s1, e1), (s2, e2)])
    between = range(left[1] + 1, right[0])

    for token in tokens:
        features[f'bow={_word(token)}'] += 1.0
        if token.lemma:
            features[f'lemma={token.lemma.lower()}'] += 1.0
    for i in between:
        features[f'between={_word(tokens[i])}'] += 1.0
        features[f'pos={tokens[i].pos}'] += 1.0
    window = list(range(max(0, left[0] - CONTEXT_WINDOW), left[0])) + \
        list(range(right[1] + 1, min(len(tokens), right[1] + 1 + CONTEXT_WINDOW)))
    for i in window:
        features[f'context={_word(tokens[i])}'] += 1.0

    h1, h2 = head_token(tokens, s1, e1), head_token(tokens, s2, e2)
    features[f'e1_type={cand.e1.entity_type}'] = 1.0
    features[f'e2_type={cand.e2.entity_type}'] = 1.0
    features[f'e1_pos={tokens[h1].pos}'] = 1.0
    features[f'e2_pos={tokens[h2].pos}'] = 1.0
    if cand.e1.entity_type == cand.e2.entity_type:
        features['same_type'] = 1.0

    features['dist'] = float(cand.token_distance)
    features[f'dist_cat={bucket(cand.token_distance, DISTANCE_BUCKETS, ">20")}'] = 1.0
    inside = [o for o in cand.others if left[1] < o[0] and o[1] < right[0]]
    features['entity_count'] = float(len(inside))
    features[f'entity_count_cat={bucket(len(inside), COUNT_BUCKETS, ">=3")}'] = 1.0

    path = shortest_dependency_path(tokens, h1, h2)
    if path is not None:
        features['sdp_len'] = float(len(path) - 1)
        on_path = set(path)
        for i in path:
            features[f'sdp={_word(tokens[i])}'] += 1.0
        for a, b in zip(path, path[1:]):
            child = a if tokens[a].dep_head == b else b
            features[f'sdp_rel={tokens[child].dep_rel or "_"}'] += 1.0
        for start, end, entity_type in cand.others:
            if on_path & set(range(start, end + 1)):
                features[f'sdp_entity={entity_type}'] = 1.0
        if embeddings is not None:
            rows = [embeddings.row(tokens[i].surface) for i in path]
            rows = [r for r in rows if r is not None]
            if rows:
                for k, value in enumerate(embeddings.vectors[rows].mean(axis=0)):
                    features[f'emb_sdp:{k}'] = float(value)

    if keywords:
        sentence = ' ' + ' '.join(_word(t) for t in tokens) + ' '
        for relation_type in sorted(keywords):
            if any(f' {term} ' in sentence for term in keywords[relation_type]):
                features[f'keyword:{relation_type}'] = 1.0

    if entity_patterns:
        span = ' '.join(t.surface for t in tokens[max(0, left[0] - CONTEXT_WINDOW):
                                                   right[1] + 1 + CONTEXT_WINDOW])
        for k, pattern in enumerate(entity_patterns):
            if re.search(pattern, span):
                features[f'pattern:{k}'] = 1.0
    return dict(features)


class FeatureSpace:
    """Feature name -> column map, frozen by fit."""

    def __init__(self):
        self.vectorizer = DictVectorizer(sparse=True, sort=True)
        self.fitted = False

    def __len__(self) -> int:
        return len(self.vectorizer.vocabulary_) if self.fitted else 0

    def fit(self, feature_dicts: Sequence[Dict[str, float]]) -> 'FeatureSpace':
        self.vectorizer.fit(feature_dicts)
        self.fitted = True
        return self

    def vectorize(self, feature_dicts: Sequence[Dict[str, float]]):
        """csr_matrix of the dicts; names unseen at fit time are dropped."""
        if not self.fitted:
            raise ValueError("feature space used before fit")
        return self.vectorizer.transform(feature_dicts).tocsr()


# ---------------------------------------------------------------------------
# Training helpers
# ---------------------------------------------------------------------------

def oversample(X, labels: Sequence[str], seed: int = 0):
    """Duplicate random examples of every class up to the majority count."""
    labels = list(labels)
    rng = np.random.default_rng(seed)
    counts = Counter(labels)
    target = max(counts.values())
    extra = []
    for label in sorted(counts):
        members = np.array([i for i, l in enumerate(labels) if l == label])
        if counts[label] < target:
            extra.extend(sorted(rng.choice(members, size=target - counts[label]).tolist()))
    order = list(range(len(labels))) + extra
    return X[order], [labels[i] for i in order]


def micro_f1(predicted: Sequence[str], gold: Sequence[str]) -> float:
    """Micro F1 over non-NEGATIVE labels of aligned candidate lists."""
    tp = sum(1 for p, g in zip(predicted, gold) if p == g != NEGATIVE)
    fp = sum(1 for p, g in zip(predicted, gold) if p != NEGATIVE and p != g)
    fn = sum(1 for p, g in zip(predicted, gold) if g != NEGATIVE and p != g)
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def _class_weights(labels: Iterable[str], weight: float) -> Dict[str, float]:
    return {label: weight for label in set(labels) if label != NEGATIVE}


def grid_search_c(fold_data, config: RelationConfig,
                  grid: Optional[Sequence[float]] = None) -> Tuple[float, Dict[float, float]]:
    """
    Pick C by fold-averaged micro F1; ties keep the earlier grid value.

    fold_data holds (X_train, y_train, X_dev, y_dev) tuples.
    """
    grid = list(grid if grid is not None else config.c_grid)
    scores = {}
    for C in grid:
        fold_scores = []
        for X_train, y_train, X_dev, y_dev in fold_data:
            if len(set(y_train)) < 2:
                continue
            model = svm_train(X_train, y_train, C, _class_weights(y_train, config.class_weight),
                              config.rbf_gamma, config.tol, config.max_iter)
            fold_scores.append(micro_f1(model.predict(X_dev), y_dev))
        scores[C] = float(np.mean(fold_scores)) if fold_scores else 0.0
        logger.info(f"C={C}: fold-averaged F1 {scores[C]:.4f}")
    best = max(grid, key=lambda c: (scores[c], -grid.index(c)))
    return best, scores


# ---------------------------------------------------------------------------
# Extractor
# ---------------------------------------------------------------------------

class RelationExtractor:
    """Schema, feature space and SVM bundled for prediction and persistence."""

    def __init__(self, schema: RelationSchema, space: FeatureSpace, model: SvmModel,
                 config: RelationConfig, keywords: Optional[Dict[str, Set[str]]] = None,
                 uses_embeddings: bool = False):
        self.schema = schema
        self.space = space
        self.model = model
        self.config = config
        self.keywords = keywords or {}
        self.uses_embeddings = uses_embeddings
        self.dropped: Dict[str, int] = {}

    def _features(self, candidates, embeddings):
        return [featurize_pair(c, embeddings, self.keywords, self.config.entity_patterns)
                for c in candidates]

    @classmethod
    def train(cls, docs: Sequence[Document], schema: RelationSchema, config: RelationConfig,
              keywords: Optional[Dict[str, Set[str]]] = None,
              embeddings: Optional[EmbeddingTable] = None, seed: int = 0
              ) -> 'RelationExtractor':
        """
        Raises:
            TrainingError: no candidates, or a single label among them
        """
        generator = CandidateGenerator(schema, config.tau)
        per_doc = {doc.doc_id: generator.generate(doc, Mode.TRAIN) for doc in docs}
        candidates = [c for doc in docs for c in per_doc[doc.doc_id]]
        if not candidates:
            raise TrainingError("no relation candidates in the training documents")
        dropped = dict(generator.dropped)
        if dropped.get('beyond_tau'):
            logger.info(f"{dropped['beyond_tau']} gold relations lie beyond tau={config.tau}")

        extractor = cls(schema, FeatureSpace(), None, config, keywords, embeddings is not None)
        extractor.dropped = dropped
        feature_dicts = extractor._features(candidates, embeddings)
        extractor.space.fit(feature_dicts)
        X = extractor.space.vectorize(feature_dicts)
        labels = [c.label for c in candidates]

        C = config.C
        if config.grid_search and len(docs) >= 2:
            offsets, start = {}, 0
            for doc in docs:
                offsets[doc.doc_id] = (start, start + len(per_doc[doc.doc_id]))
                start += len(per_doc[doc.doc_id])
            fold_data = []
            for fold in make_folds([d.doc_id for d in docs], min(3, len(docs)), seed):
                train_rows = [i for d in fold.train_doc_ids for i in range(*offsets[d])]
                dev_rows = [i for d in fold.dev_doc_ids for i in range(*offsets[d])]
                fold_data.append((X[train_rows], [labels[i] for i in train_rows],
                                  X[dev_rows], [labels[i] for i in dev_rows]))
            C, _ = grid_search_c(fold_data, config)
        if config.oversample:
            X, labels = oversample(X, labels, seed)

        logger.info(f"Training relation SVM on {X.shape[0]} candidates, "
                    f"{X.shape[1]} features, C={C}")
        extractor.model = svm_train(X, labels, C, _class_weights(labels, config.class_weight),
                                    config.rbf_gamma, config.tol, config.max_iter)
        return extractor

    def score(self, doc: Document, entities: Optional[Iterable[Span]] = None,
              embeddings: Optional[EmbeddingTable] = None
              ) -> List[Tuple[CandidatePair, str]]:
        """Every EVAL-mode candidate with its predicted label."""
        if self.uses_embeddings and embeddings is None:
            logger.warning("model was trained with embedding features but none were given")
        candidates = CandidateGenerator(self.schema, self.config.tau).generate(
            doc, Mode.EVAL, entities)
        if not candidates:
            return []
        X = self.space.vectorize(self._features(candidates, embeddings))
        return list(zip(candidates, self.model.predict(X)))

    def to_relations(self, scored: Iterable[Tuple[CandidatePair, str]]) -> List[Relation]:
        """Relations of the non-NEGATIVE labels allowed by the schema."""
        relations = []
        for cand, label in scored:
            if label == NEGATIVE or not self.schema.allows(cand.e1.entity_type,
                                                           cand.e2.entity_type, label):
                continue
            role1, role2 = self.schema.role_names(label)
            relations.append(Relation(label, cand.e1, cand.e2, role1, role2))
        return relations

    def predict(self, doc: Document, entities: Optional[Iterable[Span]] = None,
                embeddings: Optional[EmbeddingTable] = None) -> List[Relation]:
        return self.to_relations(self.score(doc, entities, embeddings))

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            pickle.dump(self, f)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RelationExtractor':
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(path, "run relate --train first")
        with open(path, 'rb') as f:
            return pickle.load(f)


def ensemble_vote_relations(per_fold: Sequence[Sequence[Tuple[CandidatePair, str]]],
                            confident_index: int = 0) -> List[Tuple[CandidatePair, str]]:
    """
    Per-candidate majority label across fold models; ties go to the
    confident model.

    Raises:
        ValueError: the folds scored different candidate lists
    """
    if not per_fold:
        raise ValueError("no fold predictions to vote over")
    keys = [c.key for c, _ in per_fold[0]]
    for predictions in per_fold[1:]:
        if [c.key for c, _ in predictions] != keys:
            raise ValueError("fold models scored different candidate lists")
    voted = []
    for i, (cand, _) in enumerate(per_fold[0]):
        votes = [(m, predictions[i][1]) for m, predictions in enumerate(per_fold)]
        voted.append((cand, majority_label(votes, confident_index)))
    return voted

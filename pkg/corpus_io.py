#!/usr/bin/env python3
"""
Corpus I/O
==========
Readers and writers for every external data format the pipeline touches.

Formats:
- brat standoff (.txt + .ann, or .a1/.a2)
- CoNLL-style token files (surface, POS, head, relation, lemma)
- OBO 1.2 ontologies (OntoBiotope)
- NCBI taxonomy names.dmp
- whitespace-delimited embedding text files

Also builds the bagging folds used to train the ensemble members.
"""

import io
import json
import logging
import re
from collections import OrderedDict
from dataclasses import dataclass, field, asdict, replace
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import KFold

from exceptions import EmbeddingFormatError, MissingArtifactError, OffsetError, ParseError

logger = logging.getLogger('CorpusIO')

NCBI_RESOURCE = 'NCBI_Taxonomy'
OBT_RESOURCE = 'OntoBiotope'
MICROORGANISM = 'Microorganism'

# OBO roots whose descendants carry an entity type
DEFAULT_OBO_TYPE_ROOTS = {
    'OBT:000001': 'Habitat',
    'OBT:000002': 'Phenotype',
}


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    """
    A token aligned to its document text.

    Attributes:
        surface: Token text, equal to text[char_start:char_end]
        char_start: Start offset (inclusive)
        char_end: End offset (exclusive)
        pos: POS tag
        dep_head: Index of the head token in the sentence, None for root
        dep_rel: Dependency relation to the head
        lemma: Lemma if the token file provides one
    """
    surface: str
    char_start: int
    char_end: int
    pos: str = '_'
    dep_head: Optional[int] = None
    dep_rel: Optional[str] = None
    lemma: Optional[str] = None


@dataclass(frozen=True)
class Span:
    """
    A typed character span.

    Fragments of one discontinuous brat entity share a fragment_group and
    are otherwise ordinary spans.
    """
    char_start: int
    char_end: int
    entity_type: str
    norm_id: Optional[str] = None
    fragment_group: Optional[str] = None
    ann_id: Optional[str] = None
    norm_resource: Optional[str] = None


@dataclass(frozen=True)
class Relation:
    """A binary relation between two spans."""
    relation_type: str
    arg1: Span
    arg2: Span
    arg1_role: str = 'Arg1'
    arg2_role: str = 'Arg2'


@dataclass(frozen=True)
class Document:
    """
    A document with its tokenized sentences and gold annotations.

    Sentences are tuples of tokens in text order and never overlap.
    """
    doc_id: str
    text: str
    sentences: Tuple[Tuple[Token, ...], ...] = ()
    gold_spans: Tuple[Span, ...] = ()
    gold_relations: Tuple[Relation, ...] = ()

    def sentence_text(self, index: int) -> str:
        tokens = self.sentences[index]
        if not tokens:
            return ''
        return self.text[tokens[0].char_start:tokens[-1].char_end]


@dataclass(frozen=True)
class Concept:
    """
    A canonical ontology entry.

    Attributes:
        concept_id: Identifier (OBT:000001, or an NCBI tax id)
        name: Canonical name
        synonyms: Alternative surface forms
        entity_type: Entity type the concept normalizes
        obsolete: Flagged obsolete in the source ontology
        parents: is_a parents (OBO only)
    """
    concept_id: str
    name: str
    synonyms: Tuple[str, ...] = ()
    entity_type: Optional[str] = None
    obsolete: bool = False
    parents: Tuple[str, ...] = ()

    @property
    def surfaces(self) -> Tuple[str, ...]:
        """Canonical name followed by distinct synonyms."""
        seen = OrderedDict()
        for surface in (self.name,) + self.synonyms:
            if surface:
                seen.setdefault(surface, None)
        return tuple(seen)


@dataclass(frozen=True)
class FoldSplit:
    """One train/dev split of the bagging folds."""
    fold_id: int
    train_doc_ids: Tuple[str, ...]
    dev_doc_ids: Tuple[str, ...]

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


class OovStrategy(Enum):
    """Vector returned for words missing from an embedding table."""
    MEAN = 'mean'
    ZERO = 'zero'


class EmbeddingTable:
    """
    Word → vector table loaded from a text embedding file.

    Lookup tries the exact word, then its lowercase form, then falls back
    to the OOV vector.
    """

    def __init__(self, words: Sequence[str], vectors: np.ndarray,
                 oov: OovStrategy = OovStrategy.MEAN):
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.index = {word: i for i, word in enumerate(self.words)}
        self.oov = oov
        if oov is OovStrategy.MEAN and len(self.words):
            self.oov_vector = self.vectors.mean(axis=0)
        else:
            self.oov_vector = np.zeros(self.dim)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] if self.vectors.ndim == 2 else 0

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index or word.lower() in self.index

    def row(self, word: str) -> Optional[int]:
        """Row index of a word, or None when out of vocabulary."""
        if word in self.index:
            return self.index[word]
        return self.index.get(word.lower())

    def lookup(self, word: str) -> np.ndarray:
        row = self.row(word)
        if row is None:
            return self.oov_vector
        return self.vectors[row]


# ---------------------------------------------------------------------------
# brat standoff
# ---------------------------------------------------------------------------

_T_LINE = re.compile(r'^(T\w+)\t(\S+) ((?:\d+ \d+)(?:;\d+ \d+)*)(?:\t(.*))?$')


def _squash(text: str) -> str:
    return ' '.join(text.split())


def _parse_fragments(raw: str, line_no: int) -> List[Tuple[int, int]]:
    fragments = []
    for piece in raw.split(';'):
        start, end = piece.split()
        start, end = int(start), int(end)
        if start >= end:
            raise ParseError(f"empty fragment {start} {end}", line_no)
        fragments.append((start, end))
    return fragments


def _check_offsets(text: str, fragments: List[Tuple[int, int]], surface: Optional[str],
                   line_no: int):
    for start, end in fragments:
        if start < 0 or end > len(text):
            raise OffsetError(f"line {line_no}: offsets {start} {end} outside text of "
                              f"length {len(text)}")
    if surface is None:
        return
    covered = ' '.join(text[s:e] for s, e in fragments)
    if _squash(covered) != _squash(surface):
        raise OffsetError(f"line {line_no}: text {covered!r} does not match "
                          f"annotated surface {surface!r}")


def _parse_norm_line(body: str, line_no: int) -> Tuple[str, str, str]:
    """Return (target T-id, resource, concept id) of an N line body."""
    parts = body.split()
    if len(parts) == 3 and parts[0] == 'Reference':
        target, ref = parts[1], parts[2]
        if ':' not in ref:
            raise ParseError(f"normalization reference without resource: {ref}", line_no)
        resource, concept_id = ref.split(':', 1)
        return target, resource, concept_id
    target = concept_id = None
    for part in parts[1:]:
        if part.startswith('Annotation:'):
            target = part[len('Annotation:'):]
        elif part.startswith('Referent:'):
            concept_id = part[len('Referent:'):]
    if not parts or target is None or concept_id is None:
        raise ParseError(f"unrecognized normalization line {body!r}", line_no)
    return target, parts[0], concept_id


def parse_brat(text: str, ann: str, doc_id: str = '') -> Document:
    """
    Parse a brat standoff annotation string against its document text.

    T lines with k fragments yield k spans sharing one fragment_group.
    N lines attach normalization ids, R and E lines become relations
    between the first fragments of their arguments.

    Raises:
        ParseError: malformed line (the message names the line number)
        OffsetError: offsets outside the text or not matching the surface
    """
    lines = ann.splitlines()
    spans_by_id: Dict[str, List[Span]] = OrderedDict()
    deferred = []

    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith('#'):
            continue
        kind = line[0]
        if kind == 'T':
            match = _T_LINE.match(line)
            if match is None:
                raise ParseError(f"malformed entity line {line!r}", line_no)
            ann_id, entity_type, raw_frags, surface = match.groups()
            fragments = _parse_fragments(raw_frags, line_no)
            _check_offsets(text, fragments, surface, line_no)
            group = ann_id if len(fragments) > 1 else None
            spans_by_id[ann_id] = [
                Span(start, end, entity_type, fragment_group=group, ann_id=ann_id)
                for start, end in fragments
            ]
        elif kind in 'NRE':
            deferred.append((line_no, line))
        elif kind in 'AM*':
            continue
        else:
            raise ParseError(f"unknown annotation kind {kind!r}", line_no)

    relations = []
    for line_no, line in deferred:
        fields = line.split('\t')
        if len(fields) < 2:
            raise ParseError(f"malformed line {line!r}", line_no)
        body = fields[1]
        if line[0] == 'N':
            target, resource, concept_id = _parse_norm_line(body, line_no)
            if target not in spans_by_id:
                raise ParseError(f"normalization of unknown entity {target}", line_no)
            if spans_by_id[target][0].norm_id is None:
                spans_by_id[target] = [replace(s, norm_id=concept_id, norm_resource=resource)
                                       for s in spans_by_id[target]]
            continue

        parts = body.split()
        if len(parts) < 3:
            raise ParseError(f"relation needs a type and two arguments: {body!r}", line_no)
        relation_type = parts[0].split(':')[0]
        args = []
        for part in parts[1:]:
            if ':' not in part:
                raise ParseError(f"malformed argument {part!r}", line_no)
            role, target = part.split(':', 1)
            args.append((role, target))
        (role1, id1), (role2, id2) = args[0], args[1]
        if id1 not in spans_by_id or id2 not in spans_by_id:
            logger.warning(f"{doc_id}: line {line_no} refers to a non-entity argument, skipped")
            continue
        relations.append(Relation(relation_type, spans_by_id[id1][0], spans_by_id[id2][0],
                                  role1, role2))

    spans = [span for group in spans_by_id.values() for span in group]
    return Document(doc_id=doc_id, text=text, gold_spans=tuple(spans),
                    gold_relations=tuple(relations))


def default_resource(entity_type: str) -> str:
    """Normalization resource used for an entity type."""
    return NCBI_RESOURCE if entity_type == MICROORGANISM else OBT_RESOURCE


def _ann_number(ann_id: Optional[str]) -> int:
    if ann_id and ann_id[1:].isdigit():
        return int(ann_id[1:])
    return 0


def write_brat(doc: Document, spans: Optional[Iterable[Span]] = None,
               relations: Optional[Iterable[Relation]] = None) -> str:
    """
    Serialize spans (default: the gold spans) and relations to brat standoff.

    Spans sharing an ann_id or fragment_group are written as one T line.
    Spans without ids receive fresh T ids after the highest existing one.
    """
    spans = list(doc.gold_spans if spans is None else spans)
    relations = list(doc.gold_relations if relations is None else relations)

    groups: Dict[object, List[Span]] = OrderedDict()
    for span in spans:
        key = span.ann_id or span.fragment_group or ('anon', span.char_start, span.char_end,
                                                     span.entity_type)
        groups.setdefault(key, []).append(span)

    next_id = max([_ann_number(s.ann_id) for s in spans] + [0]) + 1
    ordered = sorted(groups.values(),
                     key=lambda g: (min(s.char_start for s in g), max(s.char_end for s in g),
                                    g[0].entity_type))
    lines = []
    ids_of: Dict[Span, str] = {}
    for group in ordered:
        first = group[0]
        ann_id = first.ann_id
        if not ann_id:
            ann_id = f"T{next_id}"
            next_id += 1
        fragments = sorted({(s.char_start, s.char_end) for s in group})
        offsets = ';'.join(f"{s} {e}" for s, e in fragments)
        surface = ' '.join(doc.text[s:e] for s, e in fragments)
        lines.append(f"{ann_id}\t{first.entity_type} {offsets}\t{surface}")
        for span in group:
            ids_of[span] = ann_id

    norm_no = 1
    for group in ordered:
        first = group[0]
        if first.norm_id is None:
            continue
        resource = first.norm_resource or default_resource(first.entity_type)
        lines.append(f"N{norm_no}\tReference {ids_of[first]} {resource}:{first.norm_id}")
        norm_no += 1

    for rel_no, relation in enumerate(relations, start=1):
        id1, id2 = ids_of.get(relation.arg1), ids_of.get(relation.arg2)
        if id1 is None or id2 is None:
            raise ValueError(f"relation {relation.relation_type} refers to a span not written")
        lines.append(f"R{rel_no}\t{relation.relation_type} {relation.arg1_role}:{id1} "
                     f"{relation.arg2_role}:{id2}")

    return '\n'.join(lines) + ('\n' if lines else '')


# ---------------------------------------------------------------------------
# CoNLL-style token files
# ---------------------------------------------------------------------------

ConllRow = Tuple[str, str, Optional[int], Optional[str], Optional[str]]
_NONE_MARKS = {'', '_', '-'}


def load_conll(content: str) -> List[List[ConllRow]]:
    """
    Parse a token file: one token per line, blank line between sentences.

    Columns (tab-separated): surface, POS, head, relation, lemma. Only the
    surface is required. Heads are 1-based with 0 for the root; the root
    and absent heads map to None, the rest to 0-based sentence indices.
    """
    sentences: List[List[ConllRow]] = []
    current: List[ConllRow] = []
    for line_no, line in enumerate(content.splitlines(), start=1):
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = line.rstrip('\n').split('\t')
        cols += [''] * (5 - len(cols))
        surface, pos, head, rel, lemma = cols[:5]
        if not surface:
            raise ParseError("token line without surface", line_no)
        if head in _NONE_MARKS:
            head_idx = None
        else:
            try:
                head_idx = int(head) - 1
            except ValueError:
                raise ParseError(f"non-integer head {head!r}", line_no) from None
            if head_idx < 0:
                head_idx = None
        current.append((surface,
                        pos if pos not in _NONE_MARKS else '_',
                        head_idx,
                        rel if rel not in _NONE_MARKS else None,
                        lemma if lemma not in _NONE_MARKS else None))
    if current:
        sentences.append(current)
    return sentences


def align_tokens(text: str, sentences: List[List[ConllRow]]) -> Tuple[Tuple[Token, ...], ...]:
    """
    Attach character offsets to token rows by left-to-right search.

    Raises:
        OffsetError: a surface cannot be found after the previous token
    """
    cursor = 0
    aligned = []
    for sent_no, rows in enumerate(sentences):
        tokens = []
        for surface, pos, head, rel, lemma in rows:
            start = text.find(surface, cursor)
            if start < 0:
                raise OffsetError(f"sentence {sent_no}: token {surface!r} not found after "
                                  f"offset {cursor}")
            end = start + len(surface)
            tokens.append(Token(surface, start, end, pos, head, rel, lemma))
            cursor = end
        aligned.append(tuple(tokens))
    return tuple(aligned)


def write_conll(sentences: Sequence[Sequence[Token]]) -> str:
    lines = []
    for tokens in sentences:
        for tok in tokens:
            head = '0' if tok.dep_head is None else str(tok.dep_head + 1)
            lines.append('\t'.join([tok.surface, tok.pos or '_', head, tok.dep_rel or '_',
                                    tok.lemma or '_']))
        lines.append('')
    return '\n'.join(lines) + '\n'


def load_document(directory: Union[str, Path], doc_id: str) -> Document:
    """
    Load <doc_id>.txt, <doc_id>.conll and the annotations if present
    (<doc_id>.ann, or <doc_id>.a1 followed by <doc_id>.a2).
    """
    directory = Path(directory)
    text = (directory / f'{doc_id}.txt').read_text(encoding='utf-8')
    conll_path = directory / f'{doc_id}.conll'
    if not conll_path.exists():
        raise MissingArtifactError(conll_path, 'token file required for every document')

    ann_parts = []
    if (directory / f'{doc_id}.ann').exists():
        ann_parts.append((directory / f'{doc_id}.ann').read_text(encoding='utf-8'))
    else:
        for suffix in ('.a1', '.a2'):
            path = directory / f'{doc_id}{suffix}'
            if path.exists():
                ann_parts.append(path.read_text(encoding='utf-8'))
    ann = '\n'.join(part.rstrip('\n') for part in ann_parts)

    doc = parse_brat(text, ann, doc_id)
    sentences = align_tokens(text, load_conll(conll_path.read_text(encoding='utf-8')))
    return replace(doc, sentences=sentences)


def list_doc_ids(directory: Union[str, Path]) -> List[str]:
    return sorted(p.stem for p in Path(directory).glob('*.txt'))


def load_corpus(directory: Union[str, Path]) -> List[Document]:
    """Load every document of a directory, ordered by doc id."""
    docs = [load_document(directory, doc_id) for doc_id in list_doc_ids(directory)]
    logger.info(f"Loaded {len(docs)} documents from {directory}")
    return docs


# ---------------------------------------------------------------------------
# Ontologies
# ---------------------------------------------------------------------------

_OBO_QUOTED = re.compile(r'^"((?:[^"\\]|\\.)*)"')


def _text_stream(stream: BinaryIO) -> io.TextIOWrapper:
    return io.TextIOWrapper(stream, encoding='utf-8')


def load_obo(stream: BinaryIO, default_type: Optional[str] = None) -> List[Concept]:
    """
    Parse the [Term] stanzas of an OBO 1.2 flat file.

    Synonym quoting and scope qualifiers are stripped. Obsolete terms are
    returned with obsolete=True; index builders skip them by default.

    Raises:
        ParseError: a [Term] stanza without an id line
    """
    concepts = []
    stanza: Optional[Dict[str, list]] = None
    stanza_line = 0

    def flush():
        if stanza is None:
            return
        if not stanza.get('id'):
            raise ParseError("[Term] stanza without id", stanza_line)
        synonyms = []
        for raw in stanza.get('synonym', []):
            match = _OBO_QUOTED.match(raw)
            synonyms.append(match.group(1).replace('\\"', '"') if match else raw)
        parents = tuple(p.split('!')[0].strip() for p in stanza.get('is_a', []))
        concepts.append(Concept(
            concept_id=stanza['id'][0],
            name=(stanza.get('name') or [''])[0],
            synonyms=tuple(synonyms),
            entity_type=default_type,
            obsolete=(stanza.get('is_obsolete') or ['false'])[0].lower() == 'true',
            parents=parents,
        ))

    for line_no, line in enumerate(_text_stream(stream), start=1):
        line = line.strip()
        if line.startswith('['):
            flush()
            stanza = {} if line == '[Term]' else None
            stanza_line = line_no
            continue
        if stanza is None or not line or line.startswith('!'):
            continue
        if ':' not in line:
            continue
        key, value = line.split(':', 1)
        stanza.setdefault(key.strip(), []).append(value.strip())
    flush()

    logger.info(f"Parsed {len(concepts)} OBO terms "
                f"({sum(1 for c in concepts if c.obsolete)} obsolete)")
    return concepts


def assign_obo_types(concepts: List[Concept],
                     type_roots: Optional[Dict[str, str]] = None) -> List[Concept]:
    """
    Type each concept by the first typed root among its is_a ancestors.

    Concepts reaching no typed root keep their current type.
    """
    type_roots = DEFAULT_OBO_TYPE_ROOTS if type_roots is None else type_roots
    by_id = {c.concept_id: c for c in concepts}
    resolved: Dict[str, Optional[str]] = {}

    def resolve(concept_id: str) -> Optional[str]:
        # iterative DFS: the ontology can be deep
        stack, seen = [concept_id], set()
        while stack:
            current = stack.pop()
            if current in type_roots:
                return type_roots[current]
            if current in resolved and resolved[current]:
                return resolved[current]
            if current in seen or current not in by_id:
                continue
            seen.add(current)
            stack.extend(reversed(by_id[current].parents))
        return None

    typed = []
    for concept in concepts:
        found = resolve(concept.concept_id)
        resolved[concept.concept_id] = found
        typed.append(replace(concept, entity_type=found or concept.entity_type))
    return typed


def load_ncbi_names(stream: BinaryIO,
                    name_classes: Optional[Iterable[str]] = None) -> List[Concept]:
    """
    Group names.dmp rows by tax id.

    The "scientific name" row becomes the canonical name, every other row a
    synonym. name_classes restricts the indexed classes (None = all).

    Raises:
        ParseError: a row whose tax id is not an integer
    """
    allowed = set(name_classes) if name_classes is not None else None
    names: Dict[int, Dict[str, object]] = {}
    for line_no, line in enumerate(_text_stream(stream), start=1):
        if not line.strip():
            continue
        cols = [c.strip() for c in line.rstrip('\n').rstrip('|').split('|')]
        if len(cols) < 4:
            raise ParseError(f"expected 4 columns, got {len(cols)}", line_no)
        raw_id, name, _unique, name_class = cols[:4]
        try:
            tax_id = int(raw_id)
        except ValueError:
            raise ParseError(f"non-integer tax_id {raw_id!r}", line_no) from None
        entry = names.setdefault(tax_id, {'scientific': None, 'others': OrderedDict()})
        if name_class == 'scientific name':
            entry['scientific'] = name
        elif allowed is None or name_class in allowed:
            entry['others'].setdefault(name, None)

    concepts = []
    for tax_id in sorted(names):
        entry = names[tax_id]
        others = [n for n in entry['others'] if n != entry['scientific']]
        canonical = entry['scientific'] or (others.pop(0) if others else '')
        concepts.append(Concept(concept_id=str(tax_id), name=canonical,
                                synonyms=tuple(others), entity_type=MICROORGANISM))
    logger.info(f"Parsed {len(concepts)} NCBI taxa")
    return concepts


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

def load_embeddings(stream: BinaryIO, oov: Union[str, OovStrategy] = OovStrategy.MEAN
                    ) -> EmbeddingTable:
    """
    Read a text embedding file with an optional "<count> <dim>" header.

    Raises:
        EmbeddingFormatError: rows of differing dimension, or a header
            count that disagrees with the rows
    """
    oov = OovStrategy(oov)
    words, rows = [], []
    expected_count = dim = None
    for line_no, line in enumerate(_text_stream(stream), start=1):
        parts = line.rstrip('\n').split()
        if not parts:
            continue
        if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            expected_count, dim = int(parts[0]), int(parts[1])
            continue
        if dim is None:
            dim = len(parts) - 1
        if len(parts) - 1 < dim or dim <= 0:
            raise EmbeddingFormatError(f"line {line_no}: expected {dim} values, "
                                       f"got {len(parts) - 1}")
        word = ' '.join(parts[:len(parts) - dim])
        if len(parts) - 1 != dim and expected_count is None:
            raise EmbeddingFormatError(f"line {line_no}: expected {dim} values, "
                                       f"got {len(parts) - 1}")
        try:
            rows.append([float(v) for v in parts[-dim:]])
        except ValueError:
            raise EmbeddingFormatError(f"line {line_no}: non-numeric vector value") from None
        words.append(word)

    if expected_count is not None and expected_count != len(words):
        raise EmbeddingFormatError(f"header announces {expected_count} vectors, "
                                   f"file holds {len(words)}")
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0)
    logger.info(f"Loaded {len(words)} embeddings of dimension {dim}")
    return EmbeddingTable(words, vectors, oov)


def concat_embeddings(tables: Sequence[EmbeddingTable]) -> EmbeddingTable:
    """Feature-wise concatenation over the words shared by all tables."""
    if not tables:
        raise ValueError("no embedding tables to concatenate")
    shared = [w for w in tables[0].words if all(w in t.index for t in tables[1:])]
    vectors = np.hstack([
        np.stack([t.vectors[t.index[w]] for w in shared]) if shared else np.zeros((0, t.dim))
        for t in tables
    ])
    return EmbeddingTable(shared, vectors, tables[0].oov)


def load_embeddings_file(path: Union[str, Path], oov: Union[str, OovStrategy] = 'mean'
                         ) -> EmbeddingTable:
    with open(path, 'rb') as f:
        return load_embeddings(f, oov)


# ---------------------------------------------------------------------------
# Bagging folds
# ---------------------------------------------------------------------------

def make_folds(doc_ids: Sequence[str], n: int = 3, seed: int = 0,
               original_dev: Optional[Iterable[str]] = None) -> List[FoldSplit]:
    """
    Split documents into n train/dev folds; every document is in exactly one
    dev set.

    With original_dev, fold 1 reproduces the original train/dev split (the
    confident model) and the remaining folds partition the original train
    documents.
    """
    ids = sorted(set(doc_ids))
    if len(ids) != len(doc_ids):
        raise ValueError("duplicate document ids")
    if n < 2:
        raise ValueError(f"need at least 2 folds, got {n}")
    if len(ids) < n:
        raise ValueError(f"{len(ids)} documents cannot fill {n} folds")

    if original_dev is not None:
        dev = sorted(set(original_dev) & set(ids))
        rest = [d for d in ids if d not in set(dev)]
        if not dev or len(rest) < n - 1:
            raise ValueError("original split too small for the requested folds")
        blocks = [dev] + [sorted(rest[i] for i in block)
                          for _, block in KFold(n_splits=n - 1, shuffle=True,
                                                random_state=seed).split(rest)] \
            if n > 2 else [dev, rest]
    else:
        splitter = KFold(n_splits=n, shuffle=True, random_state=seed)
        blocks = [sorted(ids[i] for i in dev_idx) for _, dev_idx in splitter.split(ids)]

    folds = []
    for fold_no, dev_block in enumerate(blocks, start=1):
        dev_set = set(dev_block)
        folds.append(FoldSplit(fold_id=fold_no,
                               train_doc_ids=tuple(d for d in ids if d not in dev_set),
                               dev_doc_ids=tuple(dev_block)))
    logger.info(f"Created {len(folds)} folds over {len(ids)} documents (seed={seed})")
    return folds


def save_folds(folds: Sequence[FoldSplit], path: Union[str, Path]):
    with open(path, 'w') as f:
        json.dump([fold.to_dict() for fold in folds], f, indent=2)


def load_folds(path: Union[str, Path]) -> List[FoldSplit]:
    with open(path, 'r') as f:
        data = json.load(f)
    return [FoldSplit(d['fold_id'], tuple(d['train_doc_ids']), tuple(d['dev_doc_ids']))
            for d in data]

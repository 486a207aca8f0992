#!/usr/bin/env python3
"""
Entity Normalizer
=================
Links predicted entity mentions to ontology identifiers.

Search order depends on the predicted type:

- Microorganism: exact then fuzzy search in the NCBI taxonomy
- any other type: exact then fuzzy search in the NCBI taxonomy first; a hit
  relabels the entity as Microorganism. Otherwise exact search in
  OntoBiotope, then embedding (semantic) search.

Resolutions are memoized per (normalized mention, type).
"""

import json
import logging
import re
import string
import struct
import threading
from collections import defaultdict
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from rapidfuzz.distance import Levenshtein

from corpus_io import MICROORGANISM, NCBI_RESOURCE, OBT_RESOURCE, Concept, EmbeddingTable, Span
from exceptions import MissingArtifactError, ParseError
from pipeline_config import NormalizerConfig, UnresolvedFallback

logger = logging.getLogger('Normalizer')

INDEX_MAGIC = b'BXOI'
INDEX_VERSION = 1

_WHITESPACE = re.compile(r'\s+')
_WORD = re.compile(r'\w+')


class Method(Enum):
    EXACT = 'exact'
    FUZZY = 'fuzzy'
    SEMANTIC = 'semantic'
    NONE = 'none'


@dataclass(frozen=True)
class Candidate:
    concept_id: str
    score: float


@dataclass(frozen=True)
class Resolution:
    """
    Attributes:
        ref_id: Top candidate, None when unresolved
        candidates: Ranked (id, score) candidates, at most top_k
        relabeled_type: 'Microorganism' when the label update fired
        method: Search that produced the result
        resource: Ontology of ref_id
    """
    ref_id: Optional[str]
    candidates: Tuple[Candidate, ...] = ()
    relabeled_type: Optional[str] = None
    method: Method = Method.NONE
    resource: Optional[str] = None

    def to_dict(self):
        data = asdict(self)
        data['method'] = self.method.value
        return data


UNRESOLVED = Resolution(None)


def normalize_mention(text: str) -> str:
    """Lowercase, collapse whitespace, strip surrounding punctuation."""
    return _WHITESPACE.sub(' ', text.lower()).strip().strip(string.punctuation).strip()


def concept_sort_key(concept_id: str):
    """Numeric ids sort numerically and before any other id."""
    return (0, int(concept_id), '') if concept_id.isdigit() else (1, 0, concept_id)


def _ranked(scores: Dict[str, float], top_k: int) -> List[Candidate]:
    order = sorted(scores.items(), key=lambda kv: (-kv[1], concept_sort_key(kv[0])))
    return [Candidate(cid, score) for cid, score in order[:top_k]]


def mention_vector(text: str, embeddings: EmbeddingTable) -> Optional[np.ndarray]:
    """Mean vector of the in-vocabulary words, None when there are none."""
    rows = [embeddings.row(word) for word in _WORD.findall(text)]
    rows = [r for r in rows if r is not None]
    if not rows:
        return None
    return embeddings.vectors[rows].mean(axis=0)


class OntologyIndex:
    """
    Search structures over one ontology.

    Attributes:
        resource: Resource name written on normalization lines
        concepts: concept id -> Concept (obsolete terms excluded unless asked)
        exact_table: normalized surface -> concept ids (sorted)
        buckets: surface length -> [(normalized surface, concept id)]
        embed_ids / embed_matrix: concept rows for semantic search
    """

    def __init__(self, resource: str, concepts: Dict[str, Concept],
                 embed_ids: Sequence[str] = (), embed_matrix: Optional[np.ndarray] = None):
        self.resource = resource
        self.concepts = concepts
        self.embed_ids = list(embed_ids)
        self.embed_matrix = embed_matrix if embed_matrix is not None else np.zeros((0, 0))
        self.exact_table: Dict[str, List[str]] = {}
        self.buckets: Dict[int, List[Tuple[str, str]]] = defaultdict(list)

        table = defaultdict(set)
        for cid, concept in concepts.items():
            for surface in concept.surfaces:
                key = normalize_mention(surface)
                if key:
                    table[key].add(cid)
        for key in sorted(table):
            ids = sorted(table[key], key=concept_sort_key)
            self.exact_table[key] = ids
            for cid in ids:
                self.buckets[len(key)].append((key, cid))

    @classmethod
    def build(cls, concepts: Iterable[Concept], resource: str,
              embeddings: Optional[EmbeddingTable] = None, embed_synonyms: bool = False,
              include_obsolete: bool = False) -> 'OntologyIndex':
        kept = {c.concept_id: c for c in concepts if include_obsolete or not c.obsolete}
        kept = {cid: kept[cid] for cid in sorted(kept, key=concept_sort_key)}
        embed_ids, rows = [], []
        if embeddings is not None:
            for cid, concept in kept.items():
                surfaces = concept.surfaces if embed_synonyms else (concept.name,)
                for surface in surfaces:
                    vector = mention_vector(surface.lower(), embeddings)
                    if vector is not None and np.all(np.isfinite(vector)):
                        embed_ids.append(cid)
                        rows.append(vector)
        matrix = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 0))
        index = cls(resource, kept, embed_ids, matrix)
        logger.info(f"Indexed {resource}: {len(kept)} concepts, "
                    f"{len(index.exact_table)} surfaces, {len(embed_ids)} embedded")
        return index

    # -- search ---------------------------------------------------------------

    def exact_match(self, mention: str) -> Tuple[bool, Optional[str]]:
        ids = self.exact_table.get(normalize_mention(mention))
        return (True, ids[0]) if ids else (False, None)

    def fuzzy_match(self, mention: str, top_k: int = 5, threshold: float = 0.85
                    ) -> List[Candidate]:
        """
        Surfaces with similarity 1 - dist/max(len) >= threshold, best per
        concept, ranked by similarity then id.
        """
        query = normalize_mention(mention)
        n = len(query)
        if not n:
            return []
        slack = 1.0 - threshold
        best: Dict[str, float] = {}
        for length, entries in self.buckets.items():
            longest = max(length, n)
            # similarity can't reach the threshold past this length difference
            if abs(length - n) > slack * longest + 1e-9:
                continue
            cutoff = int(slack * longest) + 1
            for surface, cid in entries:
                dist = Levenshtein.distance(query, surface, score_cutoff=cutoff)
                sim = 1.0 - dist / longest
                if sim >= threshold and sim > best.get(cid, -1.0):
                    best[cid] = sim
        return _ranked(best, top_k)

    def semantic_search(self, mention: str, embeddings: EmbeddingTable, top_k: int = 5,
                        threshold: float = 0.5) -> List[Candidate]:
        """Cosine ranking of concept vectors; empty unless the best reaches threshold."""
        if not self.embed_ids:
            return []
        vector = mention_vector(normalize_mention(mention), embeddings)
        if vector is None:
            return []
        norms = np.linalg.norm(self.embed_matrix, axis=1) * np.linalg.norm(vector)
        with np.errstate(divide='ignore', invalid='ignore'):
            cosines = np.where(norms > 0, self.embed_matrix @ vector / norms, 0.0)
        best: Dict[str, float] = {}
        for cid, cosine in zip(self.embed_ids, cosines.tolist()):
            if cosine >= threshold and cosine > best.get(cid, -np.inf):
                best[cid] = cosine
        return _ranked(best, top_k)

    def root_id(self, entity_type: Optional[str] = None) -> Optional[str]:
        """Lowest parentless concept of a type; fallback id for unresolved mentions."""
        for cid, concept in self.concepts.items():
            if not concept.parents and (entity_type is None or concept.entity_type == entity_type):
                return cid
        return None

    # -- persistence ----------------------------------------------------------

    def dumps(self) -> bytes:
        header = {
            'resource': self.resource,
            'concepts': [asdict(c) for c in self.concepts.values()],
            'embed_ids': self.embed_ids,
            'embed_shape': list(self.embed_matrix.shape),
        }
        raw = json.dumps(header, sort_keys=True).encode('utf-8')
        return b''.join([INDEX_MAGIC, struct.pack('<HI', INDEX_VERSION, len(raw)), raw,
                         np.ascontiguousarray(self.embed_matrix, dtype='<f8').tobytes()])

    @classmethod
    def loads(cls, blob: bytes) -> 'OntologyIndex':
        if blob[:4] != INDEX_MAGIC:
            raise ParseError("not an ontology index (bad magic)")
        version, size = struct.unpack_from('<HI', blob, 4)
        if version != INDEX_VERSION:
            raise ParseError(f"unsupported index version {version}")
        offset = 4 + struct.calcsize('<HI')
        if len(blob) < offset + size:
            raise ParseError("ontology index truncated")
        header = json.loads(blob[offset:offset + size].decode('utf-8'))
        shape = tuple(header['embed_shape'])
        payload = blob[offset + size:]
        if len(payload) != 8 * int(np.prod(shape)):
            raise ParseError("ontology index truncated")
        matrix = np.frombuffer(payload, dtype='<f8').astype(np.float64)
        concepts = {}
        for data in header['concepts']:
            data['synonyms'] = tuple(data['synonyms'])
            data['parents'] = tuple(data['parents'])
            concepts[data['concept_id']] = Concept(**data)
        return cls(header['resource'], concepts, header['embed_ids'], matrix.reshape(shape))

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.dumps())
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'OntologyIndex':
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(path, "build the ontology index first")
        return cls.loads(path.read_bytes())


class Normalizer:
    """
    Routes mentions through the two ontology indices.

    The memo cache is shared between threads; cache_enabled=False bypasses
    it entirely.
    """

    def __init__(self, ncbi: OntologyIndex, obt: OntologyIndex,
                 embeddings: Optional[EmbeddingTable] = None,
                 config: Optional[NormalizerConfig] = None):
        self.ncbi = ncbi
        self.obt = obt
        self.embeddings = embeddings
        self.config = config or NormalizerConfig()
        self.cache: Dict[Tuple[str, str], Resolution] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def _search_ncbi(self, mention: str) -> Optional[Resolution]:
        found, ref_id = self.ncbi.exact_match(mention)
        if found:
            return Resolution(ref_id, (Candidate(ref_id, 1.0),), method=Method.EXACT,
                              resource=self.ncbi.resource)
        candidates = self.ncbi.fuzzy_match(mention, self.config.top_k,
                                           self.config.fuzzy_threshold)
        if candidates:
            return Resolution(candidates[0].concept_id, tuple(candidates), method=Method.FUZZY,
                              resource=self.ncbi.resource)
        return None

    def _search_obt(self, mention: str) -> Resolution:
        found, ref_id = self.obt.exact_match(mention)
        if found:
            return Resolution(ref_id, (Candidate(ref_id, 1.0),), method=Method.EXACT,
                              resource=self.obt.resource)
        if self.embeddings is not None:
            candidates = self.obt.semantic_search(mention, self.embeddings, self.config.top_k,
                                                  self.config.semantic_threshold)
            if candidates:
                return Resolution(candidates[0].concept_id, tuple(candidates),
                                  method=Method.SEMANTIC, resource=self.obt.resource)
        return UNRESOLVED

    def resolve(self, mention: str, entity_type: str) -> Resolution:
        """One uncached pass of the type-dependent search."""
        ncbi_hit = self._search_ncbi(mention)
        if entity_type == MICROORGANISM:
            return ncbi_hit or UNRESOLVED
        if ncbi_hit is not None:
            return replace(ncbi_hit, relabeled_type=MICROORGANISM)
        return self._search_obt(mention)

    def normalize(self, mention: str, entity_type: str) -> Resolution:
        if not self.config.cache_enabled:
            return self.resolve(mention, entity_type)
        key = (normalize_mention(mention), entity_type)
        with self._lock:
            cached = self.cache.get(key)
            if cached is not None:
                self.hits += 1
                return cached
        result = self.resolve(mention, entity_type)
        with self._lock:
            return self.cache.setdefault(key, result)

    def fallback_id(self, entity_type: str) -> Optional[str]:
        if UnresolvedFallback(self.config.unresolved_fallback) is UnresolvedFallback.OMIT:
            return None
        index = self.ncbi if entity_type == MICROORGANISM else self.obt
        return index.root_id(entity_type)

    def normalize_spans(self, text: str, spans: Iterable[Span]) -> List[Span]:
        """Attach ids (and label updates) to predicted spans of a document."""
        out = []
        for span in spans:
            result = self.normalize(text[span.char_start:span.char_end], span.entity_type)
            entity_type = result.relabeled_type or span.entity_type
            if result.ref_id is not None:
                out.append(replace(span, entity_type=entity_type, norm_id=result.ref_id,
                                   norm_resource=result.resource))
                continue
            root = self.fallback_id(entity_type)
            resource = self.ncbi.resource if entity_type == MICROORGANISM else self.obt.resource
            out.append(replace(span, entity_type=entity_type, norm_id=root,
                               norm_resource=resource if root else None))
        return out


def build_indices(ncbi_concepts: Iterable[Concept], obt_concepts: Iterable[Concept],
                  embeddings: Optional[EmbeddingTable] = None,
                  config: Optional[NormalizerConfig] = None
                  ) -> Tuple[OntologyIndex, OntologyIndex]:
    config = config or NormalizerConfig()
    ncbi = OntologyIndex.build(ncbi_concepts, NCBI_RESOURCE,
                               include_obsolete=config.include_obsolete)
    obt = OntologyIndex.build(obt_concepts, OBT_RESOURCE, embeddings, config.embed_synonyms,
                              config.include_obsolete)
    return ncbi, obt

#!/usr/bin/env python3
"""
Gazetteer Tagger
================
Exhaustive dictionary search: every ontology surface form is matched
against every sentence.

Matching works on lowercased, whitespace-collapsed text and is aligned to
token boundaries. Within one ontology matches are leftmost-longest and never
overlap; the two ontologies are matched independently, so an NCBI span may
overlap an OntoBiotope span.
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from corpus_io import MICROORGANISM, Document, Span, Token
from normalizer import OntologyIndex, concept_sort_key
from pipeline_config import BruteForceConfig
from tag_algebra import SpanTriple

logger = logging.getLogger('Gazetteer')

_WHITESPACE = re.compile(r'\s+')


def match_key(text: str) -> str:
    """Surface key used by the dictionary: lowercase, single spaces."""
    return _WHITESPACE.sub(' ', text.lower()).strip()


def _char_class(c: str) -> str:
    if c.isspace():
        return ' '
    if c.isdigit():
        return '0'
    if c.isalpha():
        return 'a'
    return c


def piece_prefixes(key: str) -> List[str]:
    """Prefixes of key ending at a possible token boundary, key included."""
    out = []
    for i in range(1, len(key)):
        if _char_class(key[i - 1]) != _char_class(key[i]):
            prefix = key[:i].rstrip()
            if prefix and (not out or out[-1] != prefix):
                out.append(prefix)
    out.append(key)
    return out


@dataclass(frozen=True)
class Entry:
    concept_id: str
    entity_type: str


class SurfaceDictionary:
    """
    Compiled surface table of one ontology.

    prefixes holds the prefixes of every key that end where a token may
    end (before a space, or where letters, digits and punctuation meet), so
    a growing token window can stop as soon as it leaves the dictionary.
    A tokenizer splitting inside a run of letters or digits is not matched.
    """

    def __init__(self, resource: str, entries: Dict[str, Entry]):
        self.resource = resource
        self.entries = entries
        self.prefixes: Set[str] = set()
        for key in entries:
            self.prefixes.update(piece_prefixes(key))

    @classmethod
    def from_index(cls, index: OntologyIndex, fixed_type: Optional[str] = None,
                   min_chars: int = 3) -> 'SurfaceDictionary':
        """
        One entry per surface; an ambiguous surface keeps its lowest typed id.
        Concepts without an entity type are skipped unless fixed_type is set.
        """
        candidates: Dict[str, List[Tuple[str, str]]] = {}
        for cid, concept in index.concepts.items():
            entity_type = fixed_type or concept.entity_type
            if entity_type is None:
                continue
            for surface in concept.surfaces:
                key = match_key(surface)
                if len(key) >= min_chars:
                    candidates.setdefault(key, []).append((cid, entity_type))
        entries = {}
        for key, options in candidates.items():
            cid, entity_type = min(options, key=lambda o: concept_sort_key(o[0]))
            entries[key] = Entry(cid, entity_type)
        logger.info(f"{index.resource}: {len(entries)} surfaces compiled "
                    f"(min_chars={min_chars})")
        return cls(index.resource, entries)

    def scan(self, text: str, tokens: Sequence[Token]) -> Dict[SpanTriple, str]:
        """Leftmost-longest token-aligned matches in one sentence."""
        found: Dict[SpanTriple, str] = {}
        start = 0
        while start < len(tokens):
            longest = None
            for end in range(start, len(tokens)):
                key = match_key(text[tokens[start].char_start:tokens[end].char_end])
                if key not in self.prefixes:
                    break
                if key in self.entries:
                    longest = (end, self.entries[key])
            if longest is None:
                start += 1
                continue
            end, entry = longest
            found[(start, end, entry.entity_type)] = entry.concept_id
            start = end + 1
        return found


class Gazetteer:
    """Brute-force tagger over the NCBI and OntoBiotope dictionaries."""

    def __init__(self, ncbi: OntologyIndex, obt: OntologyIndex,
                 config: Optional[BruteForceConfig] = None):
        config = config or BruteForceConfig()
        self.dictionaries = [
            SurfaceDictionary.from_index(ncbi, MICROORGANISM, config.min_chars),
            SurfaceDictionary.from_index(obt, None, config.min_chars),
        ]

    def tag_sentence(self, text: str, tokens: Sequence[Token]) -> Dict[SpanTriple, str]:
        """Token spans with their concept ids; `text` is the document text."""
        found: Dict[SpanTriple, str] = {}
        for dictionary in self.dictionaries:
            found.update(dictionary.scan(text, tokens))
        return found

    def tag_document(self, doc: Document) -> List[Span]:
        spans = []
        for tokens in doc.sentences:
            for dictionary in self.dictionaries:
                for (start, end, entity_type), cid in sorted(dictionary.scan(doc.text,
                                                                             tokens).items()):
                    spans.append(Span(tokens[start].char_start, tokens[end].char_end,
                                      entity_type, norm_id=cid,
                                      norm_resource=dictionary.resource))
        spans.sort(key=lambda s: (s.char_start, -s.char_end, s.entity_type))
        return spans


def brute_force_tag(tokens: Sequence[Token], gazetteer: Gazetteer,
                    text: Optional[str] = None) -> Dict[SpanTriple, str]:
    """
    Dictionary spans of one sentence mapped to concept ids.

    Without the document text the sentence is rebuilt from token surfaces,
    keeping the original character offsets.
    """
    if text is None:
        text = _rebuild_text(tokens)
    return gazetteer.tag_sentence(text, tokens)


def _rebuild_text(tokens: Iterable[Token]) -> str:
    chars: List[str] = []
    for token in tokens:
        if len(chars) < token.char_start:
            chars.extend(' ' * (token.char_start - len(chars)))
        chars[token.char_start:token.char_end] = token.surface
    return ''.join(chars)

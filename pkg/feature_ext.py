#!/usr/bin/env python3
"""
Word-level Features
===================
Per-token features fed to the tagger next to the word and character
embeddings.

Features:
- capitalization class
- POS tag
- orthographic shape ("Egg Pulp, 97" -> "Ccc Ccccp nn")
- 3- and 5-character prefix/suffix n-grams
- word length bucket (capped at 20)
- dependency relation to the head
- two alpha-pattern flags (current word, next word)

Vocabulary tables are built from training sentences and frozen; unseen
values map to the reserved UNK index 0 of each table.
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from corpus_io import Token

logger = logging.getLogger('FeatureExt')

UNK = '<unk>'
NO_REL = '<none>'
MAX_LENGTH_BUCKET = 20

# No pattern list is prescribed for these flags; digits and hyphens are a guess.
DEFAULT_ALPHA_PATTERNS = (r'\d', r'-')


class CapClass(Enum):
    """Capitalization classes."""
    ALL_LOWER = "all_lower"
    ALL_CAPS = "all_caps"
    INIT_CAP = "init_cap"
    MIXED = "mixed"
    OTHER = "other"


CAP_CLASSES = list(CapClass)


def _require_word(word: str):
    if not word:
        raise ValueError("empty word")


def ortho_shape(word: str) -> str:
    """Map uppercase to C, lowercase to c, digits to n, anything else to p."""
    _require_word(word)
    shape = []
    for ch in word:
        if ch.isupper():
            shape.append('C')
        elif ch.islower():
            shape.append('c')
        elif ch.isdigit():
            shape.append('n')
        else:
            shape.append('p')
    return ''.join(shape)


def cap_class(word: str) -> CapClass:
    _require_word(word)
    letters = [ch for ch in word if ch.isalpha()]
    if not letters:
        return CapClass.OTHER
    if all(ch.isupper() for ch in letters):
        return CapClass.ALL_CAPS
    if all(ch.islower() for ch in letters):
        return CapClass.ALL_LOWER
    if word[0].isupper() and all(ch.islower() for ch in letters[1:]):
        return CapClass.INIT_CAP
    return CapClass.MIXED


def length_bucket(word: str) -> int:
    return min(len(word), MAX_LENGTH_BUCKET)


def normalize_word(word: str) -> str:
    """Lowercase with every digit mapped to 0."""
    return re.sub(r'\d', '0', word.lower())


class Vocabulary:
    """Value -> index table with UNK at index 0."""

    def __init__(self, name: str, values: Iterable[str] = ()):
        self.name = name
        self.items: List[str] = [UNK]
        self.index: Dict[str, int] = {UNK: 0}
        self.frozen = False
        for value in values:
            self.add(value)

    def add(self, value: str) -> int:
        if value in self.index:
            return self.index[value]
        if self.frozen:
            raise RuntimeError(f"vocabulary {self.name} is frozen")
        self.index[value] = len(self.items)
        self.items.append(value)
        return self.index[value]

    def freeze(self) -> 'Vocabulary':
        self.frozen = True
        return self

    def __getitem__(self, value: str) -> int:
        return self.index.get(value, 0)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, value: str) -> bool:
        return value in self.index


@dataclass(frozen=True)
class TokenFeatures:
    """Table indices of one token."""
    word_id: int
    char_ids: Tuple[int, ...]
    cap_class: int
    pos_id: int
    ortho_id: int
    trigram_ids: Tuple[int, int]
    fivegram_ids: Tuple[int, int]
    length_bucket: int
    sdp_rel_id: int
    alpha_flags: Tuple[int, int]


def _ngrams(word: str, size: int) -> Tuple[str, str]:
    return f"<{word[:size]}", f"{word[-size:]}>"


class FeatureTables:
    """
    The vocabulary tables behind TokenFeatures.

    Build with fit() over the training sentences, then freeze(); after that
    featurize() is read-only.
    """

    TABLES = ('word', 'char', 'pos', 'ortho', 'trigram', 'fivegram', 'sdp_rel')

    def __init__(self, alpha_patterns: Optional[Sequence[str]] = None):
        self.alpha_patterns = list(DEFAULT_ALPHA_PATTERNS if alpha_patterns is None
                                   else alpha_patterns)
        self._compiled = [re.compile(p) for p in self.alpha_patterns]
        self.vocabs: Dict[str, Vocabulary] = {name: Vocabulary(name) for name in self.TABLES}
        self.vocabs['sdp_rel'].add(NO_REL)

    def __getattr__(self, name):
        vocabs = self.__dict__.get('vocabs', {})
        if name in vocabs:
            return vocabs[name]
        raise AttributeError(name)

    @property
    def frozen(self) -> bool:
        return all(v.frozen for v in self.vocabs.values())

    def fit(self, sentences: Iterable[Sequence[Token]], extra_words: Iterable[str] = ()
            ) -> 'FeatureTables':
        for tokens in sentences:
            for tok in tokens:
                self.vocabs['word'].add(normalize_word(tok.surface))
                for ch in tok.surface:
                    self.vocabs['char'].add(ch)
                self.vocabs['pos'].add(tok.pos)
                self.vocabs['ortho'].add(ortho_shape(tok.surface))
                for gram in _ngrams(tok.surface, 3):
                    self.vocabs['trigram'].add(gram)
                for gram in _ngrams(tok.surface, 5):
                    self.vocabs['fivegram'].add(gram)
                self.vocabs['sdp_rel'].add(tok.dep_rel or NO_REL)
        for word in extra_words:
            self.vocabs['word'].add(normalize_word(word))
        return self

    def freeze(self) -> 'FeatureTables':
        for vocab in self.vocabs.values():
            vocab.freeze()
        logger.info("Feature tables frozen: " +
                    ", ".join(f"{name}={len(v)}" for name, v in self.vocabs.items()))
        return self

    def matches_pattern(self, word: str) -> int:
        return int(any(p.search(word) for p in self._compiled))

    def featurize(self, tokens: Sequence[Token]) -> List[TokenFeatures]:
        features = []
        for i, tok in enumerate(tokens):
            word = tok.surface
            next_flag = self.matches_pattern(tokens[i + 1].surface) if i + 1 < len(tokens) else 0
            features.append(TokenFeatures(
                word_id=self.vocabs['word'][normalize_word(word)],
                char_ids=tuple(self.vocabs['char'][ch] for ch in word),
                cap_class=CAP_CLASSES.index(cap_class(word)),
                pos_id=self.vocabs['pos'][tok.pos],
                ortho_id=self.vocabs['ortho'][ortho_shape(word)],
                trigram_ids=tuple(self.vocabs['trigram'][g] for g in _ngrams(word, 3)),
                fivegram_ids=tuple(self.vocabs['fivegram'][g] for g in _ngrams(word, 5)),
                length_bucket=length_bucket(word),
                sdp_rel_id=self.vocabs['sdp_rel'][tok.dep_rel or NO_REL],
                alpha_flags=(self.matches_pattern(word), next_flag),
            ))
        return features

    def sizes(self) -> Dict[str, int]:
        sizes = {name: len(v) for name, v in self.vocabs.items()}
        sizes['cap'] = len(CAP_CLASSES)
        sizes['length'] = MAX_LENGTH_BUCKET + 1
        return sizes

    def to_dict(self) -> Dict[str, object]:
        return {
            'alpha_patterns': self.alpha_patterns,
            'vocabs': {name: v.items for name, v in self.vocabs.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> 'FeatureTables':
        tables = cls(data['alpha_patterns'])
        for name, items in data['vocabs'].items():
            vocab = Vocabulary(name, items[1:])
            tables.vocabs[name] = vocab.freeze()
        return tables


def featurize_sentence(tokens: Sequence[Token], tables: FeatureTables,
                       patterns: Optional[Sequence[str]] = None) -> List[TokenFeatures]:
    """
    Features of one sentence. A patterns list overrides the tables' own
    alpha patterns.
    """
    if patterns is not None and list(patterns) != tables.alpha_patterns:
        view = FeatureTables(patterns)
        view.vocabs = tables.vocabs
        return view.featurize(tokens)
    return tables.featurize(tokens)

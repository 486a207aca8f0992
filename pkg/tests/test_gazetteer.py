import numpy as np
import pytest

from corpus_io import NCBI_RESOURCE, OBT_RESOURCE, Concept, Token
from evaluation import span_prf, span_key
from gazetteer import (
    Entry,
    Gazetteer,
    SurfaceDictionary,
    brute_force_tag,
    match_key,
    piece_prefixes,
)
from normalizer import OntologyIndex, build_indices
from pipeline_config import BruteForceConfig
from tag_algebra import Scheme, aggregate_spans, decode_spans, encode, token_spans_to_char


@pytest.fixture
def gazetteer(ncbi_concepts, obt_concepts):
    return Gazetteer(*build_indices(ncbi_concepts, obt_concepts))


def tokenize(text):
    tokens, offset = [], 0
    for word in text.split(' '):
        tokens.append(Token(word, offset, offset + len(word)))
        offset += len(word) + 1
    return tokens


def naive_scan(text, tokens, surfaces):
    """Substring search of every surface, kept when token-aligned, then leftmost-longest."""
    lowered = text.lower()
    starts = {t.char_start: i for i, t in enumerate(tokens)}
    ends = {t.char_end: i for i, t in enumerate(tokens)}
    hits = {}
    for key, (cid, entity_type) in surfaces.items():
        pos = lowered.find(key)
        while pos != -1:
            if pos in starts and pos + len(key) in ends:
                s, e = starts[pos], ends[pos + len(key)]
                if e > hits.get(s, (-1,))[0]:
                    hits[s] = (e, entity_type, cid)
            pos = lowered.find(key, pos + 1)
    found, i = {}, 0
    while i < len(tokens):
        if i in hits:
            e, entity_type, cid = hits[i]
            found[(i, e, entity_type)] = cid
            i = e + 1
        else:
            i += 1
    return found


def test_match_key():
    assert match_key('  Fish\t FARM ') == 'fish farm'


class TestSurfaceDictionary:
    def test_prefixes_follow_pieces_not_characters(self):
        key = 'bacterium strain number 00000001 sp'
        assert piece_prefixes(key) == [
            'bacterium', 'bacterium strain', 'bacterium strain number',
            'bacterium strain number 00000001', key,
        ]
        short = SurfaceDictionary('R', {'ab cd': Entry('1', 'Habitat')})
        long = SurfaceDictionary('R', {'abcdefghijkl mnopqrstuvwx': Entry('1', 'Habitat')})
        assert len(short.prefixes) == len(long.prefixes) == 2

    def test_multi_word_keys_still_match(self):
        dictionary = SurfaceDictionary('NCBI', {
            'escherichia coli k-12': Entry('562', 'Microorganism'),
            'e. coli': Entry('562', 'Microorganism'),
        })
        text = 'Escherichia coli K-12 and E. coli'
        assert dictionary.scan(text, tokenize(text)) == {
            (0, 2, 'Microorganism'): '562',
            (4, 5, 'Microorganism'): '562',
        }

    def test_punctuation_split_tokens(self):
        dictionary = SurfaceDictionary('NCBI', {'e. coli k-12': Entry('562', 'Microorganism')})
        text = 'E. coli K-12'
        # E | . | coli | K | - | 12
        bounds = [(0, 1), (1, 2), (3, 7), (8, 9), (9, 10), (10, 12)]
        tokens = [Token(text[s:e], s, e) for s, e in bounds]
        assert dictionary.scan(text, tokens) == {(0, 5, 'Microorganism'): '562'}


class TestTagSentence:
    def test_document_sentences(self, gazetteer, document):
        first, second = document.sentences
        assert gazetteer.tag_sentence(document.text, first) == {
            (2, 2, 'Habitat'): 'OBT:000010',
            (3, 3, 'Phenotype'): 'OBT:000011',
            (4, 5, 'Microorganism'): '70',
            (7, 8, 'Habitat'): 'OBT:000012',
        }
        assert gazetteer.tag_sentence(document.text, second) == {(3, 3, 'Microorganism'): '2'}

    def test_no_dictionary_word(self, gazetteer):
        tokens = tokenize('nothing to see here')
        assert brute_force_tag(tokens, gazetteer) == {}

    def test_longest_match_wins(self, ncbi_concepts, obt_concepts):
        ncbi = ncbi_concepts + [Concept('662', 'Vibrio', entity_type='Microorganism')]
        gazetteer = Gazetteer(*build_indices(ncbi, obt_concepts))
        tokens = tokenize('Vibrio salmonicida in fish farm')
        assert brute_force_tag(tokens, gazetteer) == {
            (0, 1, 'Microorganism'): '70',
            (3, 4, 'Habitat'): 'OBT:000012',
        }
        assert brute_force_tag(tokenize('Vibrio sp. in soil'), gazetteer) == \
            {(0, 0, 'Microorganism'): '662'}

    def test_token_alignment(self, gazetteer):
        # "fishes" contains "fish" but only whole tokens match
        assert brute_force_tag(tokenize('catfishes'), gazetteer) == {}

    def test_ontologies_may_overlap(self, obt_concepts):
        ncbi = [Concept('8000', 'fish', entity_type='Microorganism')]
        gazetteer = Gazetteer(*build_indices(ncbi, obt_concepts))
        assert brute_force_tag(tokenize('a fish'), gazetteer) == {
            (1, 1, 'Microorganism'): '8000',
            (1, 1, 'Habitat'): 'OBT:000010',
        }

    def test_min_chars(self, obt_concepts):
        ncbi = [Concept('9', 'Ab', entity_type='Microorganism')]
        indices = build_indices(ncbi, obt_concepts)
        tokens = tokenize('ab fish')
        assert brute_force_tag(tokens, Gazetteer(*indices)) == {(1, 1, 'Habitat'): 'OBT:000010'}
        assert (0, 0, 'Microorganism') in brute_force_tag(
            tokens, Gazetteer(*indices, BruteForceConfig(min_chars=1)))

    def test_rebuilt_text_matches_document(self, gazetteer, document):
        for tokens in document.sentences:
            assert brute_force_tag(tokens, gazetteer) == \
                brute_force_tag(tokens, gazetteer, document.text)


class TestNaiveScanOracle:
    @pytest.fixture
    def sample(self):
        rng = np.random.default_rng(3)
        vocab = [f'w{i}' for i in range(40)]
        surfaces = set()
        while len(surfaces) < 1000:
            surfaces.add(' '.join(rng.choice(vocab, size=rng.integers(1, 4))))
        concepts = [Concept(f'OBT:{i:06d}', s, entity_type='Habitat')
                    for i, s in enumerate(sorted(surfaces))]
        obt = OntologyIndex.build(concepts, OBT_RESOURCE)
        gazetteer = Gazetteer(OntologyIndex.build([], NCBI_RESOURCE), obt,
                              BruteForceConfig(min_chars=1))
        table = {match_key(c.name): (c.concept_id, 'Habitat') for c in concepts}
        sentences = [' '.join(rng.choice(vocab, size=rng.integers(1, 15))) for _ in range(200)]
        return gazetteer, table, sentences

    def test_equals_naive_scan(self, sample):
        gazetteer, table, sentences = sample
        for text in sentences:
            tokens = tokenize(text)
            assert gazetteer.tag_sentence(text, tokens) == naive_scan(text, tokens, table)

    def test_sentence_order_irrelevant(self, sample):
        gazetteer, _, sentences = sample
        forward = {text: gazetteer.tag_sentence(text, tokenize(text)) for text in sentences}
        for text in reversed(sentences):
            assert gazetteer.tag_sentence(text, tokenize(text)) == forward[text]


def test_tag_document_spans(gazetteer, document):
    spans = gazetteer.tag_document(document)
    assert [(s.char_start, s.char_end, s.entity_type, s.norm_id, s.norm_resource)
            for s in spans] == [
        (12, 16, 'Habitat', 'OBT:000010', OBT_RESOURCE),
        (17, 25, 'Phenotype', 'OBT:000011', OBT_RESOURCE),
        (26, 44, 'Microorganism', '70', NCBI_RESOURCE),
        (48, 57, 'Habitat', 'OBT:000012', OBT_RESOURCE),
        (75, 83, 'Microorganism', '2', NCBI_RESOURCE),
    ]


class FixedTagger:
    def __init__(self, spans_by_length):
        self.spans_by_length = spans_by_length
        self.scheme = Scheme.IOBES

    def predict(self, tokens):
        return encode(self.spans_by_length.get(len(tokens), set()), len(tokens))


def test_union_recall_not_below_components(gazetteer, document):
    level1 = FixedTagger({10: {(2, 3, 'Phenotype')}, 5: {(0, 1, 'Habitat')}})
    predictions = {'level1': [], 'brute': [], 'union': []}
    for tokens in document.sentences:
        tagged = decode_spans(level1.predict(tokens))
        found = set(gazetteer.tag_sentence(document.text, tokens))
        for name, triples in (('level1', tagged), ('brute', found),
                              ('union', aggregate_spans([tagged, found]))):
            predictions[name].extend(token_spans_to_char(tokens, triples))

    gold = {span_key(document.doc_id, s) for s in document.gold_spans}
    recall = {name: span_prf({span_key(document.doc_id, s) for s in spans}, gold).recall
              for name, spans in predictions.items()}
    assert recall['level1'] == pytest.approx(2 / 6)
    assert recall['brute'] == pytest.approx(4 / 6)
    assert recall['union'] >= max(recall['level1'], recall['brute'])
    assert recall['union'] == pytest.approx(1.0)

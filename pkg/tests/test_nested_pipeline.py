import pytest

from tests.conftest import DOC_ANN, build_document
from exceptions import TrainingError
from nested_pipeline import (
    NestedPrediction,
    inner_spans,
    nested_examples,
    nested_prediction,
    predict_nested,
    tag_document,
    train_level2,
)
from pipeline_config import RankingConfig, TaggerConfig
from tag_algebra import Scheme, encode


class StubTagger:
    """Returns fixed spans for any sentence of a given length."""

    def __init__(self, spans_by_length, scheme=Scheme.IOBES):
        self.spans_by_length = spans_by_length
        self.scheme = scheme
        self.calls = []

    def predict(self, tokens):
        self.calls.append([t.surface for t in tokens])
        return encode(self.spans_by_length.get(len(tokens), set()), len(tokens), self.scheme)


def test_nested_examples(document):
    examples = nested_examples([document])
    assert len(examples) == 1
    tokens, tags = examples[0]
    assert [t.surface for t in tokens] == ['fish', 'pathogen']
    assert tags == ['S-Habitat', 'O']


def test_inner_spans_exclude_parent_copy():
    spans = {(2, 3, 'Phenotype'), (2, 3, 'Habitat'), (3, 3, 'Habitat')}
    assert inner_spans((2, 3, 'Phenotype'), spans) == {(1, 1, 'Habitat')}


def test_no_nested_entities_is_training_error():
    ann = "\n".join(line for line in DOC_ANN.splitlines()
                    if not line.startswith(('T1\t', 'N2\t')))
    flat = build_document(ann=ann)
    with pytest.raises(TrainingError, match="nested"):
        train_level2([flat], TaggerConfig(), RankingConfig())


def test_level2_has_no_auxiliary_heads(document):
    config = TaggerConfig(char_dim=2, char_hidden=2, word_hidden=2, word_dim=2, pos_dim=2,
                          ortho_dim=2, cap_dim=2, ngram_dim=2, length_dim=2, sdp_rel_dim=2,
                          epochs=1, dropout=0.0)
    model = train_level2([document], config, RankingConfig())
    assert model.config.multitask_enabled is False
    assert 'ned.W' not in model.params and 'lm_f.W' not in model.params
    assert model.labels[0] == 'O'


class TestPredictNested:
    def test_nothing_found_skips_level2(self, document):
        level1 = StubTagger({})
        level2 = StubTagger({})
        assert predict_nested(level1, level2, document.sentences[0]) == set()
        assert level2.calls == []

    def test_offsets(self, document):
        level1 = StubTagger({10: {(2, 3, 'Phenotype')}})
        level2 = StubTagger({2: {(0, 0, 'Habitat')}})
        assert predict_nested(level1, level2, document.sentences[0]) == \
            {(2, 3, 'Phenotype'), (2, 2, 'Habitat')}
        assert level2.calls == [['fish', 'pathogen']]

    def test_two_token_sentence(self, document):
        sentence = document.sentences[0][2:4]
        level1 = StubTagger({2: {(0, 1, 'Phenotype')}})
        level2 = StubTagger({2: {(0, 0, 'Habitat')}})
        prediction = nested_prediction(level1, level2, sentence)
        assert prediction.parents == {(0, 1, 'Phenotype')}
        assert prediction.spans() == {(0, 1, 'Phenotype'), (0, 0, 'Habitat')}

    def test_inner_equal_to_parent_dropped(self, document):
        level1 = StubTagger({10: {(2, 3, 'Phenotype')}})
        level2 = StubTagger({2: {(0, 1, 'Habitat')}})
        assert predict_nested(level1, level2, document.sentences[0]) == {(2, 3, 'Phenotype')}

    def test_all_outside_level2_reduces_to_level1(self, document):
        parents = {(2, 3, 'Phenotype'), (7, 8, 'Habitat')}
        level1 = StubTagger({10: parents})
        level2 = StubTagger({})
        assert predict_nested(level1, level2, document.sentences[0]) == parents
        assert len(level2.calls) == 2

    def test_level2_output_not_refed(self, document):
        level1 = StubTagger({10: {(2, 5, 'Phenotype')}})
        level2 = StubTagger({4: {(0, 1, 'Habitat')}, 2: {(0, 0, 'Habitat')}})
        assert predict_nested(level1, level2, document.sentences[0]) == \
            {(2, 5, 'Phenotype'), (2, 3, 'Habitat')}
        assert len(level2.calls) == 1

    def test_nested_spans_inside_parents(self):
        prediction = NestedPrediction({(3, 6, 'P')}, [((3, 6, 'P'), {(1, 2, 'H'), (0, 3, 'H')})])
        for s, e, t in prediction.spans() - prediction.parents:
            assert 3 <= s and e <= 6 and (s, e) != (3, 6)

    def test_tag_document_char_offsets(self, document):
        level1 = StubTagger({10: {(2, 3, 'Phenotype')}})
        level2 = StubTagger({2: {(0, 0, 'Habitat')}})
        spans = tag_document(level1, level2, document)
        assert {(s.char_start, s.char_end, s.entity_type) for s in spans} == \
            {(12, 25, 'Phenotype'), (12, 16, 'Habitat')}

import pytest

from corpus_io import Token
from feature_ext import (
    MAX_LENGTH_BUCKET,
    CapClass,
    FeatureTables,
    cap_class,
    featurize_sentence,
    ortho_shape,
)


def tokens(*words, pos='NN', rel='dep'):
    out, offset = [], 0
    for word in words:
        out.append(Token(word, offset, offset + len(word), pos, None, rel))
        offset += len(word) + 1
    return out


@pytest.mark.parametrize('word,shape', [('Egg', 'Ccc'), ('97', 'nn'), ('Pulp,', 'Ccccp')])
def test_ortho_shape(word, shape):
    assert ortho_shape(word) == shape


def test_ortho_shape_alphabet():
    for word in ['E. coli', 'IL-2', 'α-toxin', 'x']:
        shape = ortho_shape(word)
        assert len(shape) == len(word)
        assert set(shape) <= set('Ccnp')


@pytest.mark.parametrize('word,expected', [
    ('DNA', CapClass.ALL_CAPS),
    ('Vibrio', CapClass.INIT_CAP),
    ('97', CapClass.OTHER),
    ('fish', CapClass.ALL_LOWER),
    ('mRNA', CapClass.MIXED),
])
def test_cap_class(word, expected):
    assert cap_class(word) == expected


@pytest.mark.parametrize('fn', [ortho_shape, cap_class])
def test_empty_word_rejected(fn):
    with pytest.raises(ValueError):
        fn('')


class TestFeatureTables:
    def test_alpha_flags(self):
        tables = FeatureTables().fit([tokens('fish', 'pathogen')]).freeze()
        feats = featurize_sentence(tokens('fish', 'pathogen'), tables, patterns=['pathogen'])
        assert feats[0].alpha_flags == (0, 1)
        assert feats[1].alpha_flags == (1, 0)

    def test_default_patterns(self):
        tables = FeatureTables().fit([]).freeze()
        feats = tables.featurize(tokens('IL-2', 'gene'))
        assert feats[0].alpha_flags == (1, 0)

    def test_length_bucket_capped(self):
        tables = FeatureTables().freeze()
        (feat,) = tables.featurize(tokens('x' * 37))
        assert feat.length_bucket == MAX_LENGTH_BUCKET

    def test_unseen_values_map_to_unk(self):
        tables = FeatureTables().fit([tokens('fish', pos='NN')]).freeze()
        (feat,) = tables.featurize(tokens('cod', pos='XYZ', rel='weird'))
        assert feat.pos_id == 0
        assert feat.word_id == 0
        assert feat.sdp_rel_id == 0

    def test_missing_relation_has_own_index(self):
        tables = FeatureTables().fit([tokens('fish', rel=None)]).freeze()
        (feat,) = tables.featurize(tokens('fish', rel=None))
        assert feat.sdp_rel_id != 0

    def test_ids_in_bounds(self, document):
        tables = FeatureTables().fit(document.sentences).freeze()
        sizes = tables.sizes()
        for sentence in document.sentences:
            for feat in tables.featurize(sentence):
                assert 0 <= feat.word_id < sizes['word']
                assert all(0 <= c < sizes['char'] for c in feat.char_ids)
                assert 0 <= feat.ortho_id < sizes['ortho']
                assert all(0 <= g < sizes['trigram'] for g in feat.trigram_ids)
                assert 0 <= feat.length_bucket < sizes['length']
                assert set(feat.alpha_flags) <= {0, 1}

    def test_frozen_tables_are_stable(self, document):
        tables = FeatureTables().fit(document.sentences).freeze()
        first = [tables.featurize(s) for s in document.sentences]
        second = [tables.featurize(s) for s in reversed(document.sentences)]
        assert first == list(reversed(second))
        with pytest.raises(RuntimeError):
            tables.word.add('brand-new')

    def test_serialization(self, document):
        tables = FeatureTables(['fish']).fit(document.sentences).freeze()
        again = FeatureTables.from_dict(tables.to_dict())
        assert again.featurize(document.sentences[0]) == tables.featurize(document.sentences[0])

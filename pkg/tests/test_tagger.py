import math
import struct
from dataclasses import replace

import numpy as np
import pytest

from ai.checkpoint import MAGIC, VERSION, dumps, load_model, loads, save_model
from ai.losses import hybrid_loss, ranking_margins
from ai.tagger_model import LM_BOS, LM_EOS, TaggerModel
from ai.train_model import (
    build_tagger,
    evaluate_tagger,
    generate_synthetic_corpus,
    gold_sentences,
    outermost_spans,
    tagger_examples,
    train_tagger,
)
from exceptions import MissingArtifactError, ParseError, TrainingError
from pipeline_config import RankingConfig, TaggerConfig
from tag_algebra import encode, is_valid


def tiny_config(**overrides):
    base = dict(char_dim=3, char_hidden=2, word_hidden=3, word_dim=3, pos_dim=2, ortho_dim=2,
                cap_dim=2, ngram_dim=2, length_dim=2, sdp_rel_dim=2, lm_vocab_size=20,
                dropout=0.0, epochs=2, patience=2, learning_rate=0.05, seed=0)
    base.update(overrides)
    return TaggerConfig(**base)


def tiny_model(document, **overrides):
    return build_tagger(tiny_config(**overrides), RankingConfig(), tagger_examples([document]))


class TestTrainingData:
    def test_outermost_spans_drop_nested(self):
        assert outermost_spans({(2, 3, 'Phenotype'), (2, 2, 'Habitat'), (7, 8, 'Habitat')}) == \
            {(2, 3, 'Phenotype'), (7, 8, 'Habitat')}

    def test_crossing_spans_keep_first(self):
        assert outermost_spans({(0, 2, 'A'), (1, 3, 'B')}) == {(0, 2, 'A')}

    def test_examples_tag_parents(self, document):
        tokens, tags = tagger_examples([document])[0]
        assert [t.surface for t in tokens][2:4] == ['fish', 'pathogen']
        assert tags[2:4] == ['B-Phenotype', 'E-Phenotype']
        assert tags[4:6] == ['B-Microorganism', 'E-Microorganism']

    def test_synthetic_corpus_is_deterministic(self):
        first = generate_synthetic_corpus(12, seed=3)
        assert first == generate_synthetic_corpus(12, seed=3)
        assert sum(len(d.sentences) for d in first) == 12
        for doc in first:
            for span in doc.gold_spans:
                assert span.char_end <= len(doc.text)
            for tokens in doc.sentences:
                for tok in tokens:
                    assert doc.text[tok.char_start:tok.char_end] == tok.surface


class TestEncode:
    def test_zero_model_gives_zero_states(self, document):
        model = tiny_model(document)
        model.params = {name: np.zeros_like(value) for name, value in model.params.items()}
        H = model.encode(model.tables.featurize(document.sentences[0]))
        assert H.shape == (10, 6)
        assert np.all(H == 0.0)

    def test_identical_sentences_identical_states(self, document):
        model = tiny_model(document)
        feats = model.tables.featurize(document.sentences[1])
        assert np.array_equal(model.encode(feats), model.encode(list(feats)))

    def test_reversal_swaps_directions_for_symmetric_weights(self, document):
        model = build_tagger(tiny_config(), RankingConfig(), tagger_examples([document]),
                             alpha_patterns=['@@@'])
        for suffix in ('Wz', 'Uz', 'bz', 'Wr', 'Ur', 'br', 'Wh', 'Uh', 'bh'):
            model.params[f'word_b.{suffix}'] = model.params[f'word_f.{suffix}'].copy()
        sentence = document.sentences[1]
        H = model.encode(model.tables.featurize(sentence))
        R = model.encode(model.tables.featurize(sentence[::-1]))
        h = model.config.word_hidden
        np.testing.assert_allclose(R[:, :h], H[::-1, h:])
        np.testing.assert_allclose(R[:, h:], H[::-1, :h])

    def test_vocabulary_drift_is_an_index_error(self, document):
        model = tiny_model(document)
        feats = model.tables.featurize(document.sentences[1])
        feats[0] = replace(feats[0], word_id=10 ** 6)
        with pytest.raises(IndexError):
            model.encode(feats)


class TestMultitask:
    def test_one_token_sentence_targets_boundaries(self, document):
        model = tiny_model(document)
        inst = model.make_instance(document.sentences[1][:1], ['O'])
        assert inst.lm_next == [model.lm_index[LM_EOS]]
        assert inst.lm_prev == [model.lm_index[LM_BOS]]

    def test_uniform_heads(self, document):
        model = tiny_model(document)
        for name in ('ned.W', 'ned.b', 'lm_f.W', 'lm_f.b', 'lm_b.W', 'lm_b.b'):
            model.params[name] = np.zeros_like(model.params[name])
        tokens, tags = tagger_examples([document])[1]
        inst = model.make_instance(tokens, tags)
        H = model.encode(inst.features)
        loss, _, _ = model.multitask_loss(H, inst)
        V = len(model.lm_vocab)
        expected = model.config.aux_loss_weight * len(tokens) * (math.log(5) + 2 * math.log(V))
        assert loss == pytest.approx(expected)

    def test_disabled_multitask_is_hybrid_loss(self, document):
        model = tiny_model(document, multitask_enabled=False)
        assert 'ned.W' not in model.params
        tokens, tags = tagger_examples([document])[0]
        inst = model.make_instance(tokens, tags)
        loss, _ = model.loss_and_grads(inst, train=False)
        P = model.emissions(model.encode(inst.features))
        r = model.ranking
        expected = hybrid_loss(P, model.params['crf.A'], inst.gold, r.alpha, r.gamma,
                               r.margin_pos, r.margin_neg)[0]
        assert loss == expected


def _random_instance(model, document, rng):
    sentence = document.sentences[0]
    n = int(rng.integers(1, 5))
    start = int(rng.integers(0, len(sentence) - n + 1))
    tokens = sentence[start:start + n]
    types = [label[2:] for label in model.labels if label.startswith('S-')]
    spans = set()
    if rng.random() < 0.7:
        s = int(rng.integers(0, n))
        e = int(rng.integers(s, n))
        spans.add((s, e, types[int(rng.integers(len(types)))]))
    return model.make_instance(tokens, encode(spans, n, model.scheme))


def _near_kink(model, inst):
    P = model.emissions(model.encode(inst.features))
    r = model.ranking
    if np.any(np.abs(ranking_margins(P, inst.gold, r.gamma, r.margin_pos, r.margin_neg)) < 1e-3):
        return True
    for row, gold in zip(P, inst.gold):
        others = np.sort(np.delete(row, gold))
        if len(others) > 1 and others[-1] - others[-2] < 1e-3:
            return True
    return False


@pytest.mark.parametrize('seed', range(100))
def test_end_to_end_gradient(document, seed):
    rng = np.random.default_rng(seed)
    model = tiny_model(document, seed=seed)
    inst = _random_instance(model, document, rng)
    if _near_kink(model, inst):
        pytest.skip("hinge kink")
    _, grads = model.loss_and_grads(inst, train=False)

    h = 1e-5
    for name, param in model.params.items():
        flat = np.abs(grads[name]).ravel()
        picks = set(np.argsort(flat)[-2:].tolist())
        picks.add(int(rng.integers(flat.size)))
        for pick in picks:
            idx = np.unravel_index(pick, param.shape)
            old = param[idx]
            param[idx] = old + h
            up = model.total_loss(inst)
            param[idx] = old - h
            down = model.total_loss(inst)
            param[idx] = old
            numeric = (up - down) / (2 * h)
            analytic = grads[name][idx]
            error = abs(analytic - numeric) / max(1e-4, abs(analytic) + abs(numeric))
            assert error < 1e-4, (name, idx, analytic, numeric)


class TestPredict:
    def test_empty_sentence(self, document):
        assert tiny_model(document).predict(()) == []

    def test_prediction_is_valid(self, document):
        model = tiny_model(document)
        for sentence in document.sentences:
            tags = model.predict(sentence)
            assert len(tags) == len(sentence)
            assert is_valid(tags)

    def test_prediction_ignores_dropout(self, document):
        a = tiny_model(document, dropout=0.5)
        b = tiny_model(document, dropout=0.0)
        assert a.predict(document.sentences[0]) == b.predict(document.sentences[0])


class TestTraining:
    def test_zero_learning_rate_leaves_parameters(self, document):
        model = tiny_model(document, learning_rate=0.0, dropout=0.5, epochs=1)
        before = {name: value.copy() for name, value in model.params.items()}
        trained, curve = train_tagger(model, tagger_examples([document]))
        assert len(curve) == 1
        for name, value in trained.params.items():
            assert np.array_equal(value, before[name])

    def test_same_seed_same_parameters(self, document):
        examples = tagger_examples([document])
        runs = []
        for _ in range(2):
            model = tiny_model(document, dropout=0.5, epochs=2)
            runs.append(train_tagger(model, examples)[0])
        for name in runs[0].params:
            assert np.array_equal(runs[0].params[name], runs[1].params[name])

    def test_divergence_names_step(self, document):
        model = tiny_model(document)
        model.params['ner.b'][:] = np.nan
        with pytest.raises(TrainingError) as err:
            train_tagger(model, tagger_examples([document]))
        assert err.value.step == 1

    def test_no_sentences(self, document):
        with pytest.raises(TrainingError):
            train_tagger(tiny_model(document), [])

    def test_curve_written(self, document, tmp_path):
        model = tiny_model(document, epochs=3, patience=10)
        path = tmp_path / 'fold1' / 'train_curve.jsonl'
        _, curve = train_tagger(model, tagger_examples([document]),
                                gold_sentences([document]), path)
        lines = path.read_text().splitlines()
        assert len(lines) == len(curve) == 3
        assert '"dev_f1"' in lines[0] and '"timestamp"' in lines[0]

    def test_pretrained_vectors(self, document, toy_embeddings):
        model = build_tagger(tiny_config(), RankingConfig(), tagger_examples([document]),
                             embeddings=toy_embeddings)
        row = model.tables.word['pathogen']
        np.testing.assert_array_equal(model.params['emb.word'][row], [0.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            tiny_model(document, word_dim=4).load_pretrained(toy_embeddings)


@pytest.mark.slow
def test_overfit_synthetic_corpus():
    docs = generate_synthetic_corpus(50, seed=0)
    config = TaggerConfig(char_dim=8, char_hidden=8, word_hidden=16, word_dim=16, pos_dim=4,
                          ortho_dim=4, cap_dim=2, ngram_dim=4, length_dim=2, sdp_rel_dim=2,
                          learning_rate=0.05, dropout=0.0, epochs=100, patience=25, seed=0)
    examples = tagger_examples(docs)
    model = build_tagger(config, RankingConfig(), examples)
    model, _ = train_tagger(model, examples, gold_sentences(docs))
    assert evaluate_tagger(model, gold_sentences(docs)).f1 >= 0.95
    reproduced = sum(model.predict(tokens) == tags for tokens, tags in examples)
    assert reproduced >= 0.9 * len(examples)


class TestCheckpoint:
    def test_round_trip(self, document, tmp_path):
        model = tiny_model(document)
        path = save_model(model, tmp_path / 'm' / 'tagger.bxtg')
        again = load_model(path)
        assert again.labels == model.labels
        for name, value in model.params.items():
            assert np.array_equal(again.params[name], value)
        for sentence in document.sentences:
            assert again.predict(sentence) == model.predict(sentence)
        assert dumps(again) == path.read_bytes()

    def test_bad_magic(self):
        with pytest.raises(ParseError):
            loads(b'NOPE' + bytes(10))

    def test_truncated(self, document):
        blob = dumps(tiny_model(document))
        with pytest.raises(ParseError):
            loads(blob[:-8])

    @pytest.mark.parametrize('cut', [5, 8, 9])
    def test_truncated_preamble(self, document, cut):
        blob = dumps(tiny_model(document))
        with pytest.raises(ParseError, match='preamble'):
            loads(blob[:cut])

    def test_version_without_length(self):
        with pytest.raises(ParseError):
            loads(MAGIC + b'\x01\x00')

    def test_truncated_header(self, document):
        blob = dumps(tiny_model(document))
        with pytest.raises(ParseError, match='header'):
            loads(blob[:30])

    def test_corrupt_header(self):
        raw = b'{"manifest": [["w", [2'
        blob = MAGIC + struct.pack('<HI', VERSION, len(raw)) + raw
        with pytest.raises(ParseError, match='corrupt'):
            loads(blob)

    def test_header_not_utf8(self):
        raw = b'\xff\xfe{}'
        with pytest.raises(ParseError, match='corrupt'):
            loads(MAGIC + struct.pack('<HI', VERSION, len(raw)) + raw)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_model(tmp_path / 'absent.bxtg')

import itertools

import networkx as nx
import numpy as np
import pytest

from ai.train_model import generate_synthetic_corpus
from corpus_io import EmbeddingTable, Span, Token
from exceptions import ConfigError, MissingArtifactError, ParseError, TrainingError
from pipeline_config import RelationConfig
from relation_svm import (
    NEGATIVE,
    CandidateGenerator,
    CandidatePair,
    FeatureSpace,
    Mode,
    RelationExtractor,
    RelationSchema,
    ensemble_vote_relations,
    featurize_pair,
    generate_candidates,
    grid_search_c,
    load_keyword_lists,
    micro_f1,
    oversample,
    shortest_dependency_path,
    token_distance,
)
from tests.conftest import DOC_ANN, build_document

SCHEMA_TEXT = """\
# relation\targ1 type\targ2 type\troles
Lives_In\tMicroorganism\tHabitat\tMicroorganism\tLocation
Exhibits\tMicroorganism\tPhenotype\tMicroorganism\tProperty
"""


@pytest.fixture
def schema():
    return RelationSchema.parse(SCHEMA_TEXT)


def summary(candidates):
    return [(c.e1.ann_id, c.e2.ann_id, c.token_distance, c.label) for c in candidates]


class TestSchema:
    def test_parse(self, schema):
        assert schema.relation_types == ['Exhibits', 'Lives_In']
        assert schema.entity_types == ['Habitat', 'Microorganism', 'Phenotype']
        assert schema.role_names('Lives_In') == ('Microorganism', 'Location')
        assert schema.allows('Microorganism', 'Habitat')
        assert not schema.allows('Habitat', 'Microorganism')

    def test_default_roles(self):
        schema = RelationSchema.parse("Binds\tProtein\tGene\n")
        assert schema.role_names('Binds') == ('Arg1', 'Arg2')

    def test_bad_line(self):
        with pytest.raises(ParseError, match="line 2"):
            RelationSchema.parse("Binds\tProtein\tGene\nBinds\tProtein\n")

    def test_conflicting_roles(self):
        with pytest.raises(ParseError, match="conflicting"):
            RelationSchema.parse("R\tA\tB\tx\ty\nR\tA\tC\tx\tz\n")

    def test_load(self, tmp_path):
        path = tmp_path / 'schema.tsv'
        path.write_text(SCHEMA_TEXT)
        assert RelationSchema.load(path).relation_types == ['Exhibits', 'Lives_In']

    def test_missing_and_empty(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            RelationSchema.load(tmp_path / 'none.tsv')
        assert info.value.field == 'paths.schema_file'
        empty = tmp_path / 'empty.tsv'
        empty.write_text("# nothing\n")
        with pytest.raises(ConfigError, match="empty"):
            RelationSchema.load(empty)


def test_keyword_lists(tmp_path):
    (tmp_path / 'Lives_In.txt').write_text("Colonizes\n\n# comment\nisolated from\n")
    assert load_keyword_lists(tmp_path) == {'Lives_In': {'colonizes', 'isolated from'}}
    assert load_keyword_lists('') == {}
    with pytest.raises(ConfigError):
        load_keyword_lists(tmp_path / 'missing')


class TestCandidates:
    def test_eval_mode(self, schema, document):
        candidates = generate_candidates(document, schema, 20, Mode.EVAL)
        assert summary(candidates) == [
            ('T3', 'T1', 1, NEGATIVE),
            ('T3', 'T2', 0, NEGATIVE),
            ('T3', 'T4', 1, 'Lives_In'),
            ('T6', 'T5', 1, NEGATIVE),
        ]

    def test_train_mode_negatives_only_from_sentences_without_gold(self, schema, document):
        candidates = generate_candidates(document, schema, 20, Mode.TRAIN)
        assert summary(candidates) == [('T3', 'T4', 1, 'Lives_In'), ('T6', 'T5', 1, NEGATIVE)]

    def test_tau_drops_and_counts_gold(self, schema, document):
        generator = CandidateGenerator(schema, tau=0)
        assert summary(generator.generate(document)) == [('T3', 'T2', 0, NEGATIVE)]
        assert generator.dropped['beyond_tau'] == 1

    def test_invalid_type_combo_excluded(self, document):
        generator = CandidateGenerator(RelationSchema.parse("Exhibits\tMicroorganism\tPhenotype\n"))
        assert summary(generator.generate(document)) == [('T3', 'T2', 0, NEGATIVE)]
        assert generator.dropped['outside_schema'] == 1

    def test_cross_sentence_gold_counted(self, schema):
        doc = build_document(ann=DOC_ANN + "\nR2\tLives_In Microorganism:T6 Location:T4")
        generator = CandidateGenerator(schema)
        generator.generate(doc)
        assert generator.dropped['cross_sentence'] == 1

    def test_predicted_entities(self, schema, document):
        entities = [s for s in document.gold_spans if s.ann_id in ('T3', 'T4')]
        candidates = generate_candidates(document, schema, entities=entities)
        assert summary(candidates) == [('T3', 'T4', 1, 'Lives_In')]

    def test_missing_schema(self, document):
        with pytest.raises(ConfigError):
            generate_candidates(document, None)
        with pytest.raises(ConfigError):
            CandidateGenerator(RelationSchema())

    def test_count_monotone_in_tau(self):
        docs = generate_synthetic_corpus(40, seed=5)
        schema = RelationSchema.parse("Lives_In\tMicroorganism\tHabitat\n"
                                      "Exhibits\tMicroorganism\tPhenotype\n")
        previous = set()
        for tau in (0, 2, 5, 10, 20, None):
            keys = {c.key for doc in docs for c in generate_candidates(doc, schema, tau)}
            assert previous <= keys
            previous = keys

    def test_token_distance(self):
        assert token_distance((0, 0), (1, 1)) == 0
        assert token_distance((5, 6), (0, 1)) == 3
        assert token_distance((0, 3), (2, 5)) == 0


# Bacteria colonize roots of young plants ; heads are 0-based
PARSE = [
    ('Bacteria', 'NNS', 1, 'nsubj'),
    ('colonize', 'VBP', None, 'root'),
    ('roots', 'NNS', 1, 'obj'),
    ('of', 'IN', 2, 'nmod'),
    ('young', 'JJ', 3, 'amod'),
    ('plants', 'NNS', 3, 'pobj'),
]


def parsed_tokens():
    tokens, offset = [], 0
    for surface, pos, head, rel in PARSE:
        tokens.append(Token(surface, offset, offset + len(surface), pos, head, rel))
        offset += len(surface) + 1
    return tuple(tokens)


def pair(tokens, a, b, type_a='Microorganism', type_b='Habitat', others=()):
    e1 = Span(tokens[a[0]].char_start, tokens[a[1]].char_end, type_a)
    e2 = Span(tokens[b[0]].char_start, tokens[b[1]].char_end, type_b)
    return CandidatePair('d', 0, e1, e2, a, b, token_distance(a, b), NEGATIVE, tokens, others)


class TestFeaturizePair:
    def test_shortest_path_block(self):
        tokens = parsed_tokens()
        features = featurize_pair(pair(tokens, (0, 0), (5, 5)))
        graph = nx.Graph([(i, t.dep_head) for i, t in enumerate(tokens) if t.dep_head is not None])
        shortest = min(nx.all_simple_paths(graph, 0, 5), key=len)
        assert len(shortest) - 1 == 4
        assert features['sdp_len'] == 4.0
        assert {k[4:] for k in features if k.startswith('sdp=')} == \
            {'bacteria', 'colonize', 'roots', 'of', 'plants'}
        assert {k for k in features if k.startswith('sdp_rel=')} == \
            {'sdp_rel=nsubj', 'sdp_rel=obj', 'sdp_rel=nmod', 'sdp_rel=pobj'}
        assert features['dist'] == 4.0
        assert features['dist_cat=3-5'] == 1.0
        assert {k for k in features if k.startswith('between=')} == \
            {'between=colonize', 'between=roots', 'between=of', 'between=young'}

    def test_adjacent_entities(self):
        tokens = parsed_tokens()
        features = featurize_pair(pair(tokens, (0, 0), (1, 1)))
        assert features['dist'] == 0.0
        assert features['dist_cat=0'] == 1.0
        assert not any(k.startswith('between=') for k in features)

    def test_entity_descriptors(self):
        tokens = parsed_tokens()
        features = featurize_pair(pair(tokens, (2, 2), (5, 5), 'Habitat', 'Habitat',
                                       others=((4, 4, 'Phenotype'), (0, 0, 'Microorganism'))))
        assert features['same_type'] == 1.0
        assert features['e1_type=Habitat'] == features['e2_type=Habitat'] == 1.0
        assert features['e1_pos=NNS'] == 1.0
        assert features['entity_count'] == 1.0
        assert features['entity_count_cat=1'] == 1.0
        # the path 2-3-5 skips "young"
        assert 'sdp_entity=Phenotype' not in features
        assert 'same_type' not in featurize_pair(pair(tokens, (0, 0), (5, 5)))

    def test_sdp_entity(self):
        tokens = parsed_tokens()
        features = featurize_pair(pair(tokens, (0, 0), (5, 5), others=((2, 2, 'Habitat'),)))
        assert features['sdp_entity=Habitat'] == 1.0

    def test_context_window(self):
        tokens = parsed_tokens()
        features = featurize_pair(pair(tokens, (1, 1), (2, 2)))
        assert {k for k in features if k.startswith('context=')} == \
            {'context=bacteria', 'context=of', 'context=young', 'context=plants'}

    def test_keywords_patterns_embeddings(self):
        tokens = parsed_tokens()
        table = EmbeddingTable(['roots', 'plants'], np.array([[1.0, 0.0], [0.0, 3.0]]))
        features = featurize_pair(pair(tokens, (0, 0), (5, 5)), embeddings=table,
                                  keywords={'Lives_In': {'colonize'}, 'Other': {'soil'}},
                                  entity_patterns=[r'^Bac', r'zzz'])
        assert features['keyword:Lives_In'] == 1.0
        assert 'keyword:Other' not in features
        assert features['pattern:0'] == 1.0 and 'pattern:1' not in features
        assert (features['emb_sdp:0'], features['emb_sdp:1']) == (0.5, 1.5)

    def test_no_parse_means_no_path_features(self):
        tokens = tuple(Token(t.surface, t.char_start, t.char_end, t.pos) for t in parsed_tokens())
        features = featurize_pair(pair(tokens, (0, 0), (5, 5)))
        assert not any(k.startswith('sdp') for k in features)
        assert shortest_dependency_path(tokens, 0, 5) is None

    def test_deterministic_and_order_independent(self, schema, document):
        candidates = generate_candidates(document, schema)
        forward = [featurize_pair(c) for c in candidates]
        backward = [featurize_pair(c) for c in reversed(candidates)][::-1]
        assert forward == backward

    def test_feature_space(self, schema, document):
        dicts = [featurize_pair(c) for c in generate_candidates(document, schema)]
        space = FeatureSpace().fit(dicts)
        X = space.vectorize(dicts + [{'never-seen': 1.0}])
        assert X.shape == (len(dicts) + 1, len(space))
        assert X[len(dicts)].nnz == 0
        with pytest.raises(ValueError):
            FeatureSpace().vectorize(dicts)


def test_micro_f1():
    assert micro_f1(['R', NEGATIVE, 'S'], ['R', 'R', NEGATIVE]) == pytest.approx(2 / 4)
    assert micro_f1([NEGATIVE], [NEGATIVE]) == 0.0


def test_oversample():
    X = np.arange(10.0).reshape(5, 2)
    labels = ['a', 'a', 'a', 'b', 'c']
    X2, labels2 = oversample(X, labels, seed=3)
    assert sorted(labels2) == ['a'] * 3 + ['b'] * 3 + ['c'] * 3
    assert np.array_equal(X2[:5], X)
    for row, label in zip(X2, labels2):
        assert labels[int(row[0]) // 2] == label
    X3, labels3 = oversample(X, labels, seed=3)
    assert np.array_equal(X2, X3) and labels2 == labels3


def test_grid_search_prefers_best_then_earliest():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 3.0], [3.0, 4.0]])
    y = ['R', 'R', NEGATIVE, NEGATIVE]
    fold_data = [(X, y, X, y), (X, y, X[:2], y[:2])]
    grid = [0.1, 1.0, 10.0]
    best, scores = grid_search_c(fold_data, RelationConfig(), grid)
    assert set(scores) == set(grid)
    assert best == next(c for c in grid if scores[c] == max(scores.values()))


@pytest.fixture(scope='module')
def relation_corpus():
    return generate_synthetic_corpus(60, seed=11)


@pytest.fixture(scope='module')
def extractor(relation_corpus):
    schema = RelationSchema.parse(SCHEMA_TEXT)
    # a large box keeps every distinct training point on the right side
    config = RelationConfig(C=1000.0, class_weight=1.0, rbf_gamma=0.5)
    return RelationExtractor.train(relation_corpus, schema, config)


class TestRelationExtractor:
    def test_training_candidates_reproduced(self, extractor, relation_corpus):
        generator = CandidateGenerator(extractor.schema, extractor.config.tau)
        candidates = [c for doc in relation_corpus for c in generator.generate(doc, Mode.TRAIN)]
        X = extractor.space.vectorize([featurize_pair(c) for c in candidates])
        labels = [c.label for c in candidates]
        assert set(labels) == {'Lives_In', NEGATIVE}
        assert extractor.model.predict(X) == labels

    def test_predict_respects_schema(self, extractor, relation_corpus):
        relations = [r for doc in relation_corpus for r in extractor.predict(doc)]
        assert relations
        for relation in relations:
            assert extractor.schema.allows(relation.arg1.entity_type, relation.arg2.entity_type,
                                           relation.relation_type)
            assert (relation.arg1_role, relation.arg2_role) == \
                extractor.schema.role_names(relation.relation_type)

    def test_save_load(self, extractor, relation_corpus, tmp_path):
        loaded = RelationExtractor.load(extractor.save(tmp_path / 'm' / 'relation.pkl'))
        doc = relation_corpus[0]
        assert [label for _, label in loaded.score(doc)] == \
            [label for _, label in extractor.score(doc)]

    def test_missing_model(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            RelationExtractor.load(tmp_path / 'relation.pkl')

    def test_deterministic(self, extractor, relation_corpus):
        again = RelationExtractor.train(relation_corpus, extractor.schema, extractor.config)
        X = extractor.space.vectorize(
            [featurize_pair(c) for c, _ in extractor.score(relation_corpus[1])])
        assert np.array_equal(extractor.model.decision_function(X),
                              again.model.decision_function(X))

    def test_single_label_corpus(self, schema, document):
        flat = build_document(ann="\n".join(l for l in DOC_ANN.splitlines()
                                            if not l.startswith('R1')))
        with pytest.raises(TrainingError):
            RelationExtractor.train([flat], schema, RelationConfig())

    def test_grid_search_and_oversampling_run(self, relation_corpus, schema):
        config = RelationConfig(grid_search=True, c_grid=[1.0, 10.0], oversample=True,
                                rbf_gamma=0.5)
        extractor = RelationExtractor.train(relation_corpus, schema, config)
        assert extractor.model.C in (1.0, 10.0)


class TestEnsembleVote:
    @pytest.fixture
    def candidates(self, schema, document):
        return generate_candidates(document, schema)

    def vote(self, candidates, labels_per_fold):
        per_fold = [list(zip(candidates, labels)) for labels in labels_per_fold]
        return [label for _, label in ensemble_vote_relations(per_fold)]

    def test_majority(self, candidates):
        n = len(candidates)
        assert self.vote(candidates, [['R'] * n, ['R'] * n, [NEGATIVE] * n]) == ['R'] * n

    def test_all_distinct_goes_to_confident(self, candidates):
        n = len(candidates)
        assert self.vote(candidates, [['R1'] * n, ['R2'] * n, ['R3'] * n]) == ['R1'] * n

    def test_unanimous(self, candidates):
        n = len(candidates)
        labels = [f'L{i}' for i in range(n)]
        assert self.vote(candidates, [labels] * 3) == labels

    def test_mismatched_candidates(self, candidates):
        per_fold = [[(c, NEGATIVE) for c in candidates],
                    [(c, NEGATIVE) for c in candidates[1:]]]
        with pytest.raises(ValueError):
            ensemble_vote_relations(per_fold)

    def test_permutation_of_folds_keeps_majority(self, candidates):
        labels = [['R'] * len(candidates), [NEGATIVE] * len(candidates), ['R'] * len(candidates)]
        for order in itertools.permutations(labels):
            assert set(self.vote(candidates, list(order))) == {'R'}

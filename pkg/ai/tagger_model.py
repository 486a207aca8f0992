#!/usr/bin/env python3
"""
Neural sequence tagger
======================
Word embedding + character-level bidirectional GRU + word-level features,
fed to a word-level bidirectional GRU. On top of the context states:

- an NER emission projection decoded by a linear-chain CRF
- an NED head (type-less boundary tags, softmax)
- forward / backward language-model heads over a truncated vocabulary

The NED and LM heads only contribute auxiliary training losses. All
gradients are computed by hand; parameters live in one name -> ndarray dict.
"""

import copy
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ai.gru import gru_backward, gru_forward, init_gru
from ai.losses import hybrid_loss, softmax_xent
from corpus_io import EmbeddingTable, Token
from crf_core import FORBIDDEN, viterbi
from feature_ext import FeatureTables, TokenFeatures, normalize_word
from pipeline_config import RankingConfig, TaggerConfig
from tag_algebra import (
    Scheme,
    allowed_end,
    allowed_start,
    allowed_transition,
    collapse_types,
    repair_boundaries,
    tag_inventory,
)

logger = logging.getLogger('TaggerModel')

Params = Dict[str, np.ndarray]

NED_LABELS = ['B', 'I', 'E', 'S', 'O']
LM_UNK, LM_BOS, LM_EOS = '<unk>', '<s>', '</s>'

# feature table -> TaggerConfig dimension attribute
FEATURE_EMBEDDINGS = (
    ('pos', 'pos_dim'),
    ('ortho', 'ortho_dim'),
    ('cap', 'cap_dim'),
    ('trigram', 'ngram_dim'),
    ('fivegram', 'ngram_dim'),
    ('length', 'length_dim'),
    ('sdp_rel', 'sdp_rel_dim'),
)


@dataclass
class Instance:
    """A featurized training sentence."""
    features: List[TokenFeatures]
    gold: List[int]
    ned: List[int]
    lm_next: List[int]
    lm_prev: List[int]


def build_lm_vocab(sentences: Iterable[Sequence[Token]], size: int) -> List[str]:
    """The `size` most frequent normalized words (ties by word), plus UNK/BOS/EOS."""
    counts = Counter(normalize_word(tok.surface) for tokens in sentences for tok in tokens)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return [LM_UNK, LM_BOS, LM_EOS] + [word for word, _ in ranked]


class TaggerModel:
    """
    Trainable tagger over a fixed label inventory.

    Attributes:
        config: Dimensions and training settings
        ranking: Hybrid loss settings
        tables: Frozen feature vocabularies
        labels: Tag inventory (index = CRF tag id)
        lm_vocab: Language-model output vocabulary (multitask only)
        params: Parameter tensors by name
    """

    def __init__(self, config: TaggerConfig, ranking: RankingConfig, tables: FeatureTables,
                 labels: Sequence[str], lm_vocab: Optional[Sequence[str]] = None,
                 params: Optional[Params] = None):
        self.config = config
        self.ranking = ranking
        self.tables = tables
        self.scheme = Scheme(config.scheme)
        self.labels = list(labels)
        self.label_index = {label: i for i, label in enumerate(self.labels)}
        self.lm_vocab = list(lm_vocab or [])
        self.lm_index = {word: i for i, word in enumerate(self.lm_vocab)}
        if config.multitask_enabled and not self.lm_vocab:
            self.lm_vocab = [LM_UNK, LM_BOS, LM_EOS]
            self.lm_index = {word: i for i, word in enumerate(self.lm_vocab)}
        self.params = params if params is not None else self._init_params()

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, config: TaggerConfig, ranking: RankingConfig, tables: FeatureTables,
               entity_types: Iterable[str], sentences: Iterable[Sequence[Token]] = (),
               embeddings: Optional[EmbeddingTable] = None) -> 'TaggerModel':
        """Fresh model; the LM vocabulary comes from the training sentences."""
        labels = tag_inventory(entity_types, Scheme(config.scheme))
        lm_vocab = build_lm_vocab(sentences, config.lm_vocab_size) \
            if config.multitask_enabled else None
        model = cls(config, ranking, tables, labels, lm_vocab)
        if embeddings is not None:
            model.load_pretrained(embeddings)
        return model

    @property
    def tf_dim(self) -> int:
        c = self.config
        return (c.pos_dim + c.ortho_dim + c.cap_dim + 4 * c.ngram_dim + c.length_dim
                + c.sdp_rel_dim + c.alpha_dim)

    @property
    def input_dim(self) -> int:
        return self.config.word_dim + 2 * self.config.char_hidden + self.tf_dim

    def _init_params(self) -> Params:
        c = self.config
        rng = np.random.default_rng(c.seed)
        sizes = self.tables.sizes()
        params: Params = {}

        def embedding(name: str, rows: int, dim: int):
            bound = np.sqrt(3.0 / dim)
            params[f'emb.{name}'] = rng.uniform(-bound, bound, (rows, dim))

        def linear(name: str, fan_in: int, fan_out: int):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[f'{name}.W'] = rng.uniform(-bound, bound, (fan_in, fan_out))
            params[f'{name}.b'] = np.zeros(fan_out)

        embedding('word', sizes['word'], c.word_dim)
        embedding('char', sizes['char'], c.char_dim)
        for table, dim_attr in FEATURE_EMBEDDINGS:
            embedding(table, sizes[table], getattr(c, dim_attr))
        params.update(init_gru(rng, 'char_f', c.char_dim, c.char_hidden))
        params.update(init_gru(rng, 'char_b', c.char_dim, c.char_hidden))
        params.update(init_gru(rng, 'word_f', self.input_dim, c.word_hidden))
        params.update(init_gru(rng, 'word_b', self.input_dim, c.word_hidden))
        linear('ner', 2 * c.word_hidden, len(self.labels))
        params['crf.A'] = self._initial_transitions()
        if c.multitask_enabled:
            linear('ned', 2 * c.word_hidden, len(NED_LABELS))
            linear('lm_f', c.word_hidden, len(self.lm_vocab))
            linear('lm_b', c.word_hidden, len(self.lm_vocab))
        return params

    def _initial_transitions(self) -> np.ndarray:
        k = len(self.labels)
        A = np.zeros((k + 2, k + 2))
        start, end = k, k + 1
        for i, prev in enumerate(self.labels):
            if not allowed_start(prev, self.scheme):
                A[start, i] = FORBIDDEN
            if not allowed_end(prev, self.scheme):
                A[i, end] = FORBIDDEN
            for j, nxt in enumerate(self.labels):
                if not allowed_transition(prev, nxt, self.scheme):
                    A[i, j] = FORBIDDEN
        A[:, start] = FORBIDDEN
        A[end, :] = FORBIDDEN
        return A

    def load_pretrained(self, embeddings: EmbeddingTable) -> int:
        """Copy pretrained vectors into the word table; returns rows filled."""
        if embeddings.dim != self.config.word_dim:
            raise ValueError(f"embedding dimension {embeddings.dim} does not match "
                             f"word_dim {self.config.word_dim}")
        table = self.params['emb.word']
        filled = 0
        for word, idx in self.tables.word.index.items():
            row = embeddings.row(word)
            if row is not None and idx:
                table[idx] = embeddings.vectors[row]
                filled += 1
        logger.info(f"Initialized {filled}/{len(self.tables.word) - 1} word vectors "
                    f"from pretrained embeddings")
        return filled

    def copy(self) -> 'TaggerModel':
        return TaggerModel(self.config, self.ranking, self.tables, self.labels, self.lm_vocab,
                           copy.deepcopy(self.params))

    # -- data -------------------------------------------------------------

    def lm_id(self, token: Token) -> int:
        return self.lm_index.get(normalize_word(token.surface), 0)

    def make_instance(self, tokens: Sequence[Token], tags: Sequence[str]) -> Instance:
        if len(tokens) != len(tags):
            raise ValueError("tokens and tags differ in length")
        ned = [NED_LABELS.index(p) for p in collapse_types(tags)]
        if self.lm_vocab:
            ids = [self.lm_id(tok) for tok in tokens]
            lm_next = ids[1:] + [self.lm_index[LM_EOS]]
            lm_prev = [self.lm_index[LM_BOS]] + ids[:-1]
        else:
            lm_next = lm_prev = []
        return Instance(self.tables.featurize(tokens), [self.label_index[t] for t in tags],
                        ned, lm_next, lm_prev)

    # -- forward ------------------------------------------------------------

    def _check_bounds(self, features: Sequence[TokenFeatures]):
        for name, value in (('word', max(f.word_id for f in features)),
                            ('pos', max(f.pos_id for f in features)),
                            ('ortho', max(f.ortho_id for f in features)),
                            ('sdp_rel', max(f.sdp_rel_id for f in features))):
            if value >= self.params[f'emb.{name}'].shape[0]:
                raise IndexError(f"{name} id {value} outside its embedding table "
                                 f"(vocabulary drift)")

    def _char_inputs(self, features: Sequence[TokenFeatures]):
        n = len(features)
        longest = max(len(f.char_ids) for f in features)
        ids_f = np.zeros((longest, n), dtype=int)
        ids_b = np.zeros((longest, n), dtype=int)
        mask = np.zeros((longest, n))
        for j, f in enumerate(features):
            length = len(f.char_ids)
            ids_f[:length, j] = f.char_ids
            ids_b[:length, j] = f.char_ids[::-1]
            mask[:length, j] = 1.0
        return ids_f, ids_b, mask

    def _forward(self, features: Sequence[TokenFeatures], train: bool = False,
                 rng: Optional[np.random.Generator] = None):
        p = self.params
        c = self.config
        self._check_bounds(features)
        n = len(features)

        ids_f, ids_b, mask = self._char_inputs(features)
        Hcf, cache_cf = gru_forward(p, 'char_f', p['emb.char'][ids_f], mask)
        Hcb, cache_cb = gru_forward(p, 'char_b', p['emb.char'][ids_b], mask)
        char_repr = np.hstack([Hcf[-1], Hcb[-1]])

        ids = {
            'word': np.array([f.word_id for f in features]),
            'pos': np.array([f.pos_id for f in features]),
            'ortho': np.array([f.ortho_id for f in features]),
            'cap': np.array([f.cap_class for f in features]),
            'trigram': np.array([f.trigram_ids for f in features]),
            'fivegram': np.array([f.fivegram_ids for f in features]),
            'length': np.array([f.length_bucket for f in features]),
            'sdp_rel': np.array([f.sdp_rel_id for f in features]),
        }
        blocks = [p['emb.word'][ids['word']], char_repr]
        for table, _ in FEATURE_EMBEDDINGS:
            blocks.append(p[f'emb.{table}'][ids[table]].reshape(n, -1))
        blocks.append(np.array([f.alpha_flags for f in features], dtype=np.float64))
        X = np.hstack(blocks)

        drop = None
        if train and c.dropout > 0:
            rng = rng or np.random.default_rng(c.seed)
            drop = (rng.random(X.shape) >= c.dropout) / (1.0 - c.dropout)
            X = X * drop

        Xw = X[:, None, :]
        Hf, cache_wf = gru_forward(p, 'word_f', Xw)
        Hb_rev, cache_wb = gru_forward(p, 'word_b', Xw[::-1])
        Hf, Hb = Hf[:, 0, :], Hb_rev[::-1, 0, :]
        H = np.hstack([Hf, Hb])
        cache = dict(ids=ids, ids_f=ids_f, ids_b=ids_b, cache_cf=cache_cf, cache_cb=cache_cb,
                     cache_wf=cache_wf, cache_wb=cache_wb, drop=drop, n=n)
        return H, cache

    def encode(self, features: Sequence[TokenFeatures]) -> np.ndarray:
        """Context matrix H (n x 2*word_hidden), dropout disabled."""
        if not features:
            return np.zeros((0, 2 * self.config.word_hidden))
        return self._forward(features)[0]

    def emissions(self, H: np.ndarray) -> np.ndarray:
        return H @ self.params['ner.W'] + self.params['ner.b']

    def predict(self, tokens: Sequence[Token]) -> List[str]:
        """Viterbi-decoded, boundary-repaired tags of one sentence."""
        if not tokens:
            return []
        P = self.emissions(self.encode(self.tables.featurize(tokens)))
        path, _ = viterbi(P, self.params['crf.A'])
        return repair_boundaries([self.labels[i] for i in path], self.scheme)

    # -- losses ---------------------------------------------------------------

    def multitask_loss(self, H: np.ndarray, instance: Instance
                       ) -> Tuple[float, np.ndarray, Params]:
        """
        Weighted NED + forward LM + backward LM cross-entropy.

        Returns the loss, its gradient w.r.t. H and the head gradients.
        """
        p = self.params
        h = self.config.word_hidden
        w = self.config.aux_loss_weight
        grads: Params = {}
        dH = np.zeros_like(H)

        ned_logits = H @ p['ned.W'] + p['ned.b']
        ned_loss, d_ned = softmax_xent(ned_logits, instance.ned)
        grads['ned.W'] = w * (H.T @ d_ned)
        grads['ned.b'] = w * d_ned.sum(axis=0)
        dH += w * (d_ned @ p['ned.W'].T)

        Hf, Hb = H[:, :h], H[:, h:]
        lm_f_loss, d_lf = softmax_xent(Hf @ p['lm_f.W'] + p['lm_f.b'], instance.lm_next)
        lm_b_loss, d_lb = softmax_xent(Hb @ p['lm_b.W'] + p['lm_b.b'], instance.lm_prev)
        grads['lm_f.W'] = w * (Hf.T @ d_lf)
        grads['lm_f.b'] = w * d_lf.sum(axis=0)
        grads['lm_b.W'] = w * (Hb.T @ d_lb)
        grads['lm_b.b'] = w * d_lb.sum(axis=0)
        dH[:, :h] += w * (d_lf @ p['lm_f.W'].T)
        dH[:, h:] += w * (d_lb @ p['lm_b.W'].T)
        return w * (ned_loss + lm_f_loss + lm_b_loss), dH, grads

    def loss_and_grads(self, instance: Instance, train: bool = True,
                       rng: Optional[np.random.Generator] = None) -> Tuple[float, Params]:
        """Total training loss of one sentence and the gradient of every parameter."""
        p = self.params
        c = self.config
        r = self.ranking
        grads = {name: np.zeros_like(value) for name, value in p.items()}
        if not instance.features:
            return 0.0, grads

        H, cache = self._forward(instance.features, train=train, rng=rng)
        P = self.emissions(H)
        loss, dP, dA = hybrid_loss(P, p['crf.A'], instance.gold, r.alpha, r.gamma,
                                   r.margin_pos, r.margin_neg)
        grads['crf.A'] += dA
        grads['ner.W'] += H.T @ dP
        grads['ner.b'] += dP.sum(axis=0)
        dH = dP @ p['ner.W'].T

        if c.multitask_enabled:
            aux_loss, dH_aux, head_grads = self.multitask_loss(H, instance)
            loss += aux_loss
            dH += dH_aux
            for name, g in head_grads.items():
                grads[name] += g

        self._backward(dH, cache, grads)
        return loss, grads

    def _backward(self, dH: np.ndarray, cache: dict, grads: Params):
        p = self.params
        c = self.config
        h = c.word_hidden
        n = cache['n']

        dXf = gru_backward(p, 'word_f', dH[:, None, :h], cache['cache_wf'], grads)
        dXb_rev = gru_backward(p, 'word_b', dH[::-1, None, h:], cache['cache_wb'], grads)
        dX = dXf[:, 0, :] + dXb_rev[::-1, 0, :]
        if cache['drop'] is not None:
            dX = dX * cache['drop']

        ids = cache['ids']
        offset = 0
        np.add.at(grads['emb.word'], ids['word'], dX[:, offset:offset + c.word_dim])
        offset += c.word_dim

        ch = c.char_hidden
        d_char = dX[:, offset:offset + 2 * ch]
        offset += 2 * ch
        steps = cache['ids_f'].shape[0]
        dHcf = np.zeros((steps, n, ch))
        dHcb = np.zeros((steps, n, ch))
        dHcf[-1] = d_char[:, :ch]
        dHcb[-1] = d_char[:, ch:]
        dXcf = gru_backward(p, 'char_f', dHcf, cache['cache_cf'], grads)
        dXcb = gru_backward(p, 'char_b', dHcb, cache['cache_cb'], grads)
        np.add.at(grads['emb.char'], cache['ids_f'], dXcf)
        np.add.at(grads['emb.char'], cache['ids_b'], dXcb)

        for table, dim_attr in FEATURE_EMBEDDINGS:
            dim = getattr(c, dim_attr)
            table_ids = ids[table]
            if table_ids.ndim == 2:
                for col in range(table_ids.shape[1]):
                    np.add.at(grads[f'emb.{table}'], table_ids[:, col],
                              dX[:, offset:offset + dim])
                    offset += dim
            else:
                np.add.at(grads[f'emb.{table}'], table_ids, dX[:, offset:offset + dim])
                offset += dim

    def total_loss(self, instance: Instance) -> float:
        """Deterministic (dropout-free) training loss; used by gradient checks."""
        return self.loss_and_grads(instance, train=False)[0]

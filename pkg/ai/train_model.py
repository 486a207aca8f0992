#!/usr/bin/env python3
"""
Tagger training
===============
Per-sentence SGD with gradient clipping, dev-based model selection and
early stopping. Every epoch is logged and appended to a newline-delimited
JSON training curve.

Also provides the synthetic toy corpus used for sanity runs:

    python -m ai.train_model --sentences 50 --out work/demo.bxtg
"""

import argparse
import json
import logging
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ai.checkpoint import save_model
from ai.tagger_model import TaggerModel
from corpus_io import Document, EmbeddingTable, Relation, Span, Token
from evaluation.scoring import Mode, span_prf
from exceptions import TrainingError
from feature_ext import FeatureTables
from pipeline_config import RankingConfig, TaggerConfig
from tag_algebra import (
    Scheme,
    SpanSet,
    SpanTriple,
    char_spans_to_tokens,
    decode_spans,
    encode,
    split_label,
)

logger = logging.getLogger('TaggerTrainer')

TaggedSentence = Tuple[Sequence[Token], List[str]]
GoldSentence = Tuple[Sequence[Token], SpanSet]


@dataclass
class EpochRecord:
    """One line of the training curve."""
    epoch: int
    steps: int
    train_loss: float
    dev_f1: Optional[float]
    best_f1: Optional[float]
    seconds: float
    timestamp: str

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Training data
# ---------------------------------------------------------------------------

def outermost_spans(triples: Iterable[SpanTriple]) -> SpanSet:
    """
    Spans not contained in another span. Of two crossing spans the one
    starting first (then the longer) is kept.
    """
    kept: List[SpanTriple] = []
    for triple in sorted(set(triples), key=lambda t: (t[0], -t[1], t[2])):
        if all(triple[0] > end or triple[1] < start for start, end, _ in kept):
            kept.append(triple)
    return set(kept)


def sentence_spans(doc: Document) -> List[SpanSet]:
    """Gold token spans of every sentence of a document."""
    return [{triple for triple, _ in char_spans_to_tokens(tokens, doc.gold_spans)}
            for tokens in doc.sentences]


def gold_sentences(docs: Iterable[Document], outermost: bool = True) -> List[GoldSentence]:
    examples = []
    for doc in docs:
        for tokens, spans in zip(doc.sentences, sentence_spans(doc)):
            if tokens:
                examples.append((tokens, outermost_spans(spans) if outermost else spans))
    return examples


def tagger_examples(docs: Iterable[Document], scheme: Scheme = Scheme.IOBES
                    ) -> List[TaggedSentence]:
    """(tokens, tags) of every sentence, tagging the outermost gold spans."""
    return [(tokens, encode(spans, len(tokens), scheme))
            for tokens, spans in gold_sentences(docs)]


def entity_types_of(examples: Iterable[TaggedSentence]) -> List[str]:
    types = {split_label(tag)[1] for _, tags in examples for tag in tags}
    types.discard(None)
    return sorted(types)


def build_tagger(config: TaggerConfig, ranking: RankingConfig,
                 examples: Sequence[TaggedSentence], entity_types: Optional[Iterable[str]] = None,
                 alpha_patterns: Optional[Sequence[str]] = None,
                 embeddings: Optional[EmbeddingTable] = None) -> TaggerModel:
    """Fit and freeze the feature tables, then create a fresh model."""
    sentences = [tokens for tokens, _ in examples]
    extra = embeddings.words if embeddings is not None else ()
    tables = FeatureTables(alpha_patterns).fit(sentences, extra).freeze()
    types = entity_types if entity_types is not None else entity_types_of(examples)
    return TaggerModel.create(config, ranking, tables, types, sentences, embeddings)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale grads in place to a global L2 norm of at most max_norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def evaluate_tagger(model: TaggerModel, sentences: Sequence[GoldSentence],
                    mode: Mode = Mode.MACRO):
    """Strict span P/R/F1 of the model's predictions on token-level gold."""
    pred, gold = set(), set()
    for i, (tokens, spans) in enumerate(sentences):
        key = str(i)
        gold.update((key, s, e, t) for s, e, t in spans)
        tags = model.predict(tokens)
        pred.update((key, s, e, t) for s, e, t in decode_spans(tags, model.scheme))
    return span_prf(pred, gold, mode)


def train_tagger(model: TaggerModel, train_data: Sequence[TaggedSentence],
                 dev_data: Sequence[GoldSentence] = (),
                 curve_path: Optional[Path] = None) -> Tuple[TaggerModel, List[EpochRecord]]:
    """
    Train in place and return the selected model with its training curve.

    The model with the best dev macro-F1 is returned; without dev data the
    final parameters are. Raises TrainingError when the loss stops being
    finite.
    """
    c = model.config
    rng = np.random.default_rng(c.seed)
    instances = [model.make_instance(tokens, tags) for tokens, tags in train_data if tokens]
    if not instances:
        raise TrainingError("no training sentences")

    curve: List[EpochRecord] = []
    curve_file = None
    if curve_path is not None:
        Path(curve_path).parent.mkdir(parents=True, exist_ok=True)
        curve_file = open(curve_path, 'w')

    logger.info(f"Training on {len(instances)} sentences, {len(dev_data)} dev sentences, "
                f"{len(model.labels)} labels, multitask={c.multitask_enabled}")
    best, best_f1, since_best, step = model, None, 0, 0
    try:
        for epoch in range(1, c.epochs + 1):
            started = time.time()
            total = 0.0
            for idx in rng.permutation(len(instances)):
                step += 1
                loss, grads = model.loss_and_grads(instances[idx], train=True, rng=rng)
                if not np.isfinite(loss):
                    raise TrainingError(f"loss diverged to {loss}", step)
                clip_gradients(grads, c.clip_norm)
                for name, grad in grads.items():
                    model.params[name] -= c.learning_rate * grad
                total += loss

            dev_f1 = None
            if dev_data:
                dev_f1 = evaluate_tagger(model, dev_data).f1
                if best_f1 is None or dev_f1 > best_f1:
                    best, best_f1, since_best = model.copy(), dev_f1, 0
                else:
                    since_best += 1

            record = EpochRecord(epoch, step, total, dev_f1, best_f1,
                                 round(time.time() - started, 3), datetime.now().isoformat())
            curve.append(record)
            if curve_file is not None:
                curve_file.write(json.dumps(record.to_dict()) + "\n")
                curve_file.flush()
            logger.info(f"Epoch {epoch}: loss={total:.4f} dev_f1={dev_f1} best={best_f1}")

            if dev_data and since_best >= c.patience:
                logger.info(f"No dev improvement for {c.patience} epochs, stopping")
                break
    finally:
        if curve_file is not None:
            curve_file.close()

    return (best if dev_data else model), curve


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

SYNTHETIC_MICROBES = {
    'Vibrio salmonicida': '70',
    'Escherichia coli': '562',
    'Bacillus subtilis': '1423',
    'Listeria monocytogenes': '1639',
    'Lactobacillus': '1578',
}
SYNTHETIC_HABITATS = {
    'fish farm': 'OBT:000012',
    'soil': 'OBT:000020',
    'cheese': 'OBT:000021',
    'seawater': 'OBT:000022',
    'milk': 'OBT:000023',
    'gut': 'OBT:000024',
}
SYNTHETIC_PHENOTYPES = {
    'pathogen': 'OBT:000011',
    'motile': 'OBT:000030',
    'aerobic': 'OBT:000031',
    'fish pathogen': 'OBT:000032',
}

# slot names: M microorganism, H habitat, P phenotype
SYNTHETIC_TEMPLATES = (
    ('M', 'was', 'isolated', 'from', 'H', '.'),
    ('M', 'is', 'a', 'P', '.'),
    ('The', 'P', 'M', 'grows', 'in', 'H', '.'),
    ('Samples', 'of', 'H', 'contained', 'M', '.'),
    ('No', 'bacteria', 'were', 'detected', '.'),
    ('M', 'colonizes', 'the', 'H', 'of', 'cattle', '.'),
)

_SLOTS = {
    'M': ('Microorganism', SYNTHETIC_MICROBES),
    'H': ('Habitat', SYNTHETIC_HABITATS),
    'P': ('Phenotype', SYNTHETIC_PHENOTYPES),
}


def _synthetic_sentence(rng: np.random.Generator, offset: int):
    template = SYNTHETIC_TEMPLATES[rng.integers(len(SYNTHETIC_TEMPLATES))]
    words, pieces = [], []
    for slot in template:
        if slot in _SLOTS:
            entity_type, lexicon = _SLOTS[slot]
            names = sorted(lexicon)
            name = names[rng.integers(len(names))]
            pieces.append((len(words), len(words) + len(name.split()) - 1, entity_type,
                           lexicon[name]))
            words.extend(name.split())
        else:
            words.append(slot)

    tokens, pos = [], offset
    for i, word in enumerate(words):
        head = i + 1 if i + 1 < len(words) else None
        tokens.append(Token(word, pos, pos + len(word), 'NN' if word[0].isupper() else 'X',
                            head, 'dep' if head else 'root'))
        pos += len(word) + 1

    spans, inner = [], []
    for start, end, entity_type, norm_id in pieces:
        spans.append(Span(tokens[start].char_start, tokens[end].char_end, entity_type, norm_id))
        if " ".join(words[start:end + 1]) == 'fish pathogen':
            inner.append(Span(tokens[start].char_start, tokens[start].char_end, 'Habitat',
                              'OBT:000010'))
    return " ".join(words), tuple(tokens), spans, inner


def generate_synthetic_corpus(n_sentences: int = 50, seed: int = 42,
                              sentences_per_doc: int = 5) -> List[Document]:
    """
    Deterministic toy corpus over a closed lexicon of microorganisms,
    habitats and phenotypes, with nested 'fish' inside 'fish pathogen' and
    Lives_In relations between each sentence's microorganism and habitat.
    """
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(0, n_sentences, sentences_per_doc):
        texts, sentences, spans, relations = [], [], [], []
        offset = 0
        for _ in range(min(sentences_per_doc, n_sentences - d)):
            text, tokens, outer, inner = _synthetic_sentence(rng, offset)
            texts.append(text)
            sentences.append(tokens)
            offset += len(text) + 1
            local = []
            for span in outer + inner:
                local.append(Span(span.char_start, span.char_end, span.entity_type, span.norm_id,
                                  ann_id=f"T{len(spans) + len(local) + 1}"))
            spans.extend(local)
            microbes = [s for s in local[:len(outer)] if s.entity_type == 'Microorganism']
            habitats = [s for s in local[:len(outer)] if s.entity_type == 'Habitat']
            for microbe in microbes:
                for habitat in habitats:
                    relations.append(Relation('Lives_In', microbe, habitat,
                                              'Microorganism', 'Location'))
        docs.append(Document(f"synth-{d // sentences_per_doc:03d}", " ".join(texts) + "\n",
                             tuple(sentences), tuple(spans), tuple(relations)))
    return docs


def synthetic_obo() -> str:
    """OntoBiotope-style ontology covering the synthetic habitats and phenotypes."""
    stanzas = ["[Term]\nid: OBT:000001\nname: habitat\n",
               "[Term]\nid: OBT:000002\nname: phenotype\n",
               "[Term]\nid: OBT:000010\nname: fish\nis_a: OBT:000001 ! habitat\n"]
    for lexicon, root in ((SYNTHETIC_HABITATS, 'OBT:000001'), (SYNTHETIC_PHENOTYPES, 'OBT:000002')):
        for name, concept_id in sorted(lexicon.items(), key=lambda kv: kv[1]):
            stanzas.append(f"[Term]\nid: {concept_id}\nname: {name}\nis_a: {root}\n")
    return "format-version: 1.2\n\n" + "\n".join(stanzas)


def synthetic_names_dmp() -> str:
    """NCBI names.dmp rows for the synthetic microorganisms."""
    rows = []
    for name, taxid in sorted(SYNTHETIC_MICROBES.items(), key=lambda kv: int(kv[1])):
        rows.append(f"{taxid}\t|\t{name}\t|\t\t|\tscientific name\t|")
    return "\n".join(rows) + "\n"


def main():
    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    parser = argparse.ArgumentParser(description='Train a tagger on the synthetic toy corpus')
    parser.add_argument('--sentences', type=int, default=50)
    parser.add_argument('--epochs', type=int, default=30)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', default='work/synthetic/tagger.bxtg')
    args = parser.parse_args()

    docs = generate_synthetic_corpus(args.sentences, args.seed)
    config = TaggerConfig(char_dim=8, char_hidden=8, word_hidden=16, word_dim=16, pos_dim=4,
                          ortho_dim=4, cap_dim=2, ngram_dim=4, length_dim=2, sdp_rel_dim=2,
                          learning_rate=0.05, epochs=args.epochs, seed=args.seed, dropout=0.0)
    examples = tagger_examples(docs)
    model = build_tagger(config, RankingConfig(), examples)
    out = Path(args.out)
    model, curve = train_tagger(model, examples, gold_sentences(docs),
                                out.with_name('train_curve.jsonl'))
    save_model(model, out)
    print(f"Best dev F1: {curve[-1].best_f1:.4f} after {len(curve)} epochs")


if __name__ == "__main__":
    main()

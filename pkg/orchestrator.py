#!/usr/bin/env python3
"""
Pipeline Orchestrator
=====================
Command-line front end running the extraction pipeline from one JSON
configuration file.

Commands:
- folds:       split the labeled documents into bagging folds
- train-ner:   train the Level1 (and nested Level2) taggers of each fold
- tag:         tag documents with one fold model, or every fold plus the ensemble
- ensemble:    combine per-fold predictions already on disk
- normalize:   attach ontology ids to predicted entities
- brute-force: match every ontology surface form against the text
- relate:      train or apply the relation SVM
- eval:        score predictions against gold annotations

Exit status: 0 ok, 1 pipeline error, 2 invalid configuration,
3 missing artifact, 4 evaluation below a configured threshold.

Usage:
    python orchestrator.py --config bb.json folds
    python orchestrator.py --config bb.json train-ner --fold 1
    python orchestrator.py --config bb.json tag --ensemble
    python orchestrator.py --config bb.json --override ranking.alpha=0 train-ner
"""

import argparse
import hashlib
import json
import logging
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pythonjsonlogger import jsonlogger

from ai.checkpoint import load_model, save_model
from corpus_io import (
    Document,
    EmbeddingTable,
    FoldSplit,
    Span,
    assign_obo_types,
    concat_embeddings,
    load_corpus,
    load_embeddings_file,
    load_folds,
    load_ncbi_names,
    load_obo,
    make_folds,
    parse_brat,
    save_folds,
    write_brat,
)
from evaluation import (
    check_thresholds,
    document_keys,
    format_key_values,
    format_table,
    relation_keys,
    relation_prf,
    ser,
    span_prf,
)
from exceptions import BioExtError, ConfigError, MissingArtifactError, ParseError, TrainingError
from gazetteer import Gazetteer
from nested_pipeline import nested_prediction, train_level1, train_level2
from normalizer import Normalizer, OntologyIndex, build_indices
from pipeline_config import ArtifactLayout, EnsembleMode, PipelineConfig, Task, load_config
from relation_svm import (
    RelationExtractor,
    RelationSchema,
    ensemble_vote_relations,
    load_keyword_lists,
)
from tag_algebra import (
    Scheme,
    SpanSet,
    aggregate_spans,
    char_spans_to_tokens,
    convert_scheme,
    decode_spans,
    token_spans_to_char,
    vote,
)

logger = logging.getLogger('Orchestrator')

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_THRESHOLD = 4

TAGS_SUFFIX = '.tags'
PRED_SUFFIX = '.a2'

_handler: Optional[logging.Handler] = None


def configure_logging(json_logs: bool = False, level: int = logging.INFO):
    """Install one stderr handler on the root logger (plain text or JSON lines)."""
    global _handler
    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    _handler = logging.StreamHandler()
    _handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT) if json_logs
                          else logging.Formatter(LOG_FORMAT))
    root.addHandler(_handler)
    root.setLevel(level)


# ---------------------------------------------------------------------------
# Prediction files
# ---------------------------------------------------------------------------

def write_tags(path: Path, doc: Document, tag_seqs: Sequence[Sequence[str]]):
    """One `surface<TAB>tag` line per token, a blank line after each sentence."""
    lines = []
    for tokens, tags in zip((t for t in doc.sentences if t), tag_seqs):
        lines.extend(f"{token.surface}\t{tag}" for token, tag in zip(tokens, tags))
        lines.append("")
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding='utf-8')


def read_tags(path: Path, doc: Document) -> List[List[str]]:
    if not path.exists():
        raise MissingArtifactError(path, "run tag for this fold first")
    sentences, current = [], []
    for line_no, line in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = line.split('\t')
        if len(cols) != 2:
            raise ParseError(f"{path.name}: expected surface and tag", line_no)
        current.append(cols[1])
    if current:
        sentences.append(current)
    lengths = [len(tokens) for tokens in doc.sentences if tokens]
    if [len(tags) for tags in sentences] != lengths:
        raise ParseError(f"{path.name} does not match the sentences of {doc.doc_id}")
    return sentences


def write_predictions(directory: Path, doc: Document, spans: Sequence[Span],
                      relations=()) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f'{doc.doc_id}{PRED_SUFFIX}'
    path.write_text(write_brat(doc, spans, relations), encoding='utf-8')
    return path


def read_predictions(directory: Path, docs: Sequence[Document], hint: str) -> List[Document]:
    """Predicted annotations of every document, parsed against its text."""
    predicted = []
    for doc in docs:
        path = directory / f'{doc.doc_id}{PRED_SUFFIX}'
        if not path.exists():
            raise MissingArtifactError(path, hint)
        parsed = parse_brat(doc.text, path.read_text(encoding='utf-8'), doc.doc_id)
        predicted.append(replace(parsed, sentences=doc.sentences))
    return predicted


def sentence_triples(doc: Document, spans: Sequence[Span]) -> List[SpanSet]:
    """Token spans of every non-empty sentence for character spans lying inside it."""
    out = []
    for tokens in (t for t in doc.sentences if t):
        out.append({triple for triple, span in char_spans_to_tokens(tokens, spans)
                    if tokens[0].char_start <= span.char_start
                    and span.char_end <= tokens[-1].char_end})
    return out


def _strictly_inside(triple, parents: SpanSet) -> bool:
    return any(p[0] <= triple[0] and triple[1] <= p[1] and triple[:2] != p[:2]
               for p in parents)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

class PipelineRunner:
    """
    Runs one command against the artifact layout of a validated config.

    Commands read and write only under paths.work_dir (and the ontology
    index cache).
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.layout = ArtifactLayout(config.paths.work_dir)
        self._embeddings: Optional[EmbeddingTable] = None
        self._indices: Optional[Tuple[OntologyIndex, OntologyIndex]] = None

    # -- inputs ------------------------------------------------------------

    @property
    def embeddings(self) -> Optional[EmbeddingTable]:
        paths = self.config.paths.embeddings
        if self._embeddings is None and paths:
            tables = [load_embeddings_file(p) for p in paths]
            self._embeddings = tables[0] if len(tables) == 1 else concat_embeddings(tables)
        return self._embeddings

    def labeled_docs(self) -> Dict[str, Document]:
        """Training documents plus the original development documents, by id."""
        paths = self.config.paths
        if not paths.train_dir:
            raise ConfigError("training documents are required", 'paths.train_dir')
        docs = {doc.doc_id: doc for doc in load_corpus(paths.train_dir)}
        if paths.dev_dir:
            for doc in load_corpus(paths.dev_dir):
                if doc.doc_id in docs:
                    raise ConfigError(f"document {doc.doc_id} is in both train and dev",
                                      'paths.dev_dir')
                docs[doc.doc_id] = doc
        return docs

    def input_docs(self, input_dir: Optional[str] = None) -> List[Document]:
        directory = input_dir or self.config.paths.test_dir
        if not directory:
            raise ConfigError("no documents to process; set it or pass --input",
                              'paths.test_dir')
        return load_corpus(directory)

    def folds(self) -> List[FoldSplit]:
        path = self.layout.folds_file
        if not path.exists():
            raise MissingArtifactError(path, "run folds first")
        return load_folds(path)

    def selected_folds(self, fold_id: Optional[int]) -> List[FoldSplit]:
        folds = self.folds()
        if fold_id is None:
            return folds
        chosen = [f for f in folds if f.fold_id == fold_id]
        if not chosen:
            raise ConfigError(f"fold {fold_id} not in {[f.fold_id for f in folds]}",
                              'ensemble.n_folds')
        return chosen

    def fold_docs(self, fold: FoldSplit, docs: Dict[str, Document]
                  ) -> Tuple[List[Document], List[Document]]:
        missing = sorted(set(fold.train_doc_ids + fold.dev_doc_ids) - set(docs))
        if missing:
            raise ConfigError(f"folds name documents missing from the corpus ({missing[:3]}); "
                              f"rerun folds", 'paths.train_dir')
        return [docs[d] for d in fold.train_doc_ids], [docs[d] for d in fold.dev_doc_ids]

    def confident_index(self, fold_ids: Sequence[int]) -> int:
        confident = self.config.ensemble.confident_fold
        return list(fold_ids).index(confident) if confident in fold_ids else 0

    def _index_key(self) -> str:
        """Digest of every input the compiled indices depend on."""
        paths, settings = self.config.paths, self.config.normalizer
        digest = hashlib.sha256()
        for name in [paths.obo_file, paths.ncbi_names] + list(paths.embeddings):
            with open(name, 'rb') as f:
                for chunk in iter(lambda: f.read(1 << 20), b''):
                    digest.update(chunk)
        digest.update(json.dumps({'embed_synonyms': settings.embed_synonyms,
                                  'include_obsolete': settings.include_obsolete,
                                  'ncbi_name_classes': settings.ncbi_name_classes},
                                 sort_keys=True).encode('utf-8'))
        return digest.hexdigest()[:16]

    def indices(self) -> Tuple[OntologyIndex, OntologyIndex]:
        """NCBI and OntoBiotope indices, compiled once per input set and cached."""
        if self._indices is not None:
            return self._indices
        paths = self.config.paths
        for key in ('ncbi_names', 'obo_file'):
            if not getattr(paths, key):
                raise ConfigError("ontology file required for normalization", f'paths.{key}')

        key = self._index_key()
        ncbi_path = self.layout.cache_dir / f'ncbi-{key}.bxoi'
        obt_path = self.layout.cache_dir / f'obt-{key}.bxoi'
        if ncbi_path.exists() and obt_path.exists():
            logger.info(f"Using cached ontology indices {key} from {self.layout.cache_dir}")
            self._indices = OntologyIndex.load(ncbi_path), OntologyIndex.load(obt_path)
            return self._indices

        with open(paths.obo_file, 'rb') as f:
            obt_concepts = assign_obo_types(load_obo(f))
        with open(paths.ncbi_names, 'rb') as f:
            ncbi_concepts = load_ncbi_names(f, self.config.normalizer.ncbi_name_classes)
        ncbi, obt = build_indices(ncbi_concepts, obt_concepts, self.embeddings,
                                  self.config.normalizer)
        ncbi.save(ncbi_path)
        obt.save(obt_path)
        logger.info(f"Compiled ontology indices {key}: {len(ncbi.concepts)} NCBI, "
                    f"{len(obt.concepts)} OntoBiotope concepts")
        self._indices = ncbi, obt
        return self._indices

    # -- commands ----------------------------------------------------------

    def run(self, args: argparse.Namespace) -> int:
        handler = {
            'folds': self.cmd_folds,
            'train-ner': self.cmd_train_ner,
            'tag': self.cmd_tag,
            'ensemble': self.cmd_ensemble,
            'normalize': self.cmd_normalize,
            'brute-force': self.cmd_brute_force,
            'relate': self.cmd_relate,
            'eval': self.cmd_eval,
        }[args.command]
        return handler(args)

    def cmd_folds(self, args) -> int:
        docs = self.labeled_docs()
        original_dev = None
        if self.config.paths.dev_dir:
            original_dev = [doc.doc_id for doc in load_corpus(self.config.paths.dev_dir)]
        try:
            folds = make_folds(sorted(docs), self.config.ensemble.n_folds, self.config.seed,
                               original_dev)
        except ValueError as e:
            raise ConfigError(str(e), 'ensemble.n_folds') from None
        self.layout.root.mkdir(parents=True, exist_ok=True)
        save_folds(folds, self.layout.folds_file)
        for fold in folds:
            logger.info(f"Fold {fold.fold_id}: {len(fold.train_doc_ids)} train, "
                        f"{len(fold.dev_doc_ids)} dev documents")
        return EXIT_OK

    def cmd_train_ner(self, args) -> int:
        docs = self.labeled_docs()
        c = self.config
        for fold in self.selected_folds(args.fold):
            train_docs, dev_docs = self.fold_docs(fold, docs)
            tagger = replace(c.tagger, seed=c.seed + fold.fold_id)
            model_dir = self.layout.model_dir(fold.fold_id)
            logger.info(f"Fold {fold.fold_id}: training Level1 on {len(train_docs)} documents")
            level1 = train_level1(train_docs, tagger, c.ranking, dev_docs,
                                  c.features.alpha_patterns, self.embeddings,
                                  model_dir / 'level1_curve.jsonl')
            save_model(level1, self.layout.level1_model(fold.fold_id))

            if not c.flags.nested:
                continue
            try:
                level2 = train_level2(train_docs, tagger, c.ranking, dev_docs,
                                      c.features.alpha_patterns, self.embeddings,
                                      model_dir / 'level2_curve.jsonl')
            except TrainingError as e:
                logger.warning(f"Fold {fold.fold_id}: no Level2 model ({e})")
                continue
            save_model(level2, self.layout.level2_model(fold.fold_id))
        return EXIT_OK

    def tag_fold(self, fold_id: int, docs: Sequence[Document]):
        """Write `.tags` (Level1) and `.a2` (both levels) of one fold model."""
        level1 = load_model(self.layout.level1_model(fold_id))
        level2 = None
        if self.config.flags.nested:
            path = self.layout.level2_model(fold_id)
            if path.exists():
                level2 = load_model(path)
            else:
                logger.warning(f"Fold {fold_id}: no Level2 model, nested entities skipped")
        out = self.layout.fold_predictions(fold_id)
        out.mkdir(parents=True, exist_ok=True)
        for doc in docs:
            tag_seqs, spans = [], []
            for tokens in doc.sentences:
                if not tokens:
                    continue
                prediction = nested_prediction(level1, level2, tokens)
                tag_seqs.append(prediction.level1_tags)
                spans.extend(token_spans_to_char(tokens, prediction.spans()))
            write_tags(out / f'{doc.doc_id}{TAGS_SUFFIX}', doc, tag_seqs)
            write_predictions(out, doc, spans)
        logger.info(f"Fold {fold_id}: tagged {len(docs)} documents into {out}")

    def cmd_tag(self, args) -> int:
        docs = self.input_docs(args.input)
        if not args.ensemble:
            self.tag_fold(args.fold or self.config.ensemble.confident_fold, docs)
            return EXIT_OK
        for fold in self.folds():
            self.tag_fold(fold.fold_id, docs)
        return self.ensemble(docs, args.mode)

    def cmd_ensemble(self, args) -> int:
        return self.ensemble(self.input_docs(args.input), args.mode)

    def ensemble(self, docs: Sequence[Document], mode: Optional[str] = None) -> int:
        """
        Combine the per-fold predictions of every document.

        vote: token-level vote over the Level1 tags (in ensemble.scheme), then
        the nested spans inside a voted parent that most folds agree on.
        union: every fold's spans. none: the confident fold alone.
        With flags.brute_force the dictionary matches are added last.
        """
        c = self.config
        mode = EnsembleMode(mode or c.flags.ensemble_mode)
        fold_ids = [f.fold_id for f in self.folds()]
        confident = self.confident_index(fold_ids)
        source, target = Scheme(c.tagger.scheme), Scheme(c.ensemble.scheme)
        gazetteer = Gazetteer(*self.indices(), c.brute_force) if c.flags.brute_force else None
        out = self.layout.predictions('ensemble')

        for doc in docs:
            per_fold = [read_predictions(self.layout.fold_predictions(f), [doc],
                                         f"run tag --fold {f} first")[0] for f in fold_ids]
            triples = [sentence_triples(doc, pred.gold_spans) for pred in per_fold]
            tags = [read_tags(self.layout.fold_predictions(f) / f'{doc.doc_id}{TAGS_SUFFIX}',
                              doc) for f in fold_ids] if mode is EnsembleMode.VOTE else None

            spans = []
            for s, tokens in enumerate(t for t in doc.sentences if t):
                if mode is EnsembleMode.VOTE:
                    voted = vote([convert_scheme(seqs[s], source, target) for seqs in tags],
                                 confident, target)
                    parents = decode_spans(voted, target)
                    inner = Counter(t for fold in triples for t in fold[s]
                                    if _strictly_inside(t, parents))
                    chosen = parents | {t for t, n in inner.items() if n * 2 > len(fold_ids)}
                elif mode is EnsembleMode.UNION:
                    chosen = aggregate_spans([fold[s] for fold in triples],
                                             c.ensemble.drop_overlapping)
                else:
                    chosen = set(triples[confident][s])

                norm_ids = {}
                if gazetteer is not None:
                    found = gazetteer.tag_sentence(doc.text, tokens)
                    chosen = aggregate_spans([chosen, set(found)], c.ensemble.drop_overlapping)
                    norm_ids = {t: cid for t, cid in found.items() if t in chosen}
                spans.extend(token_spans_to_char(tokens, chosen, norm_ids))
            write_predictions(out, doc, spans)
        logger.info(f"Ensemble ({mode.value}) of folds {fold_ids}: {len(docs)} documents "
                    f"into {out}")
        return EXIT_OK

    def cmd_normalize(self, args) -> int:
        docs = self.input_docs(args.input)
        predicted = read_predictions(self.layout.predictions(args.source), docs,
                                     "run tag (or brute-force) first")
        normalizer = Normalizer(*self.indices(), self.embeddings, self.config.normalizer)
        out = self.layout.predictions('norm')
        resolved = total = 0
        for pred in predicted:
            spans = normalizer.normalize_spans(pred.text, pred.gold_spans)
            resolved += sum(1 for s in spans if s.norm_id is not None)
            total += len(spans)
            write_predictions(out, pred, spans)
        logger.info(f"Normalized {resolved}/{total} entities "
                    f"({normalizer.hits} cache hits) into {out}")
        return EXIT_OK

    def cmd_brute_force(self, args) -> int:
        docs = self.input_docs(args.input)
        gazetteer = Gazetteer(*self.indices(), self.config.brute_force)
        out = self.layout.predictions('brute')
        for doc in docs:
            write_predictions(out, doc, gazetteer.tag_document(doc))
        logger.info(f"Dictionary matches of {len(docs)} documents written to {out}")
        return EXIT_OK

    def cmd_relate(self, args) -> int:
        c = self.config
        schema = RelationSchema.load(c.paths.schema_file)
        keywords = load_keyword_lists(c.paths.keyword_dir)

        if args.train:
            docs = self.labeled_docs()
            for fold in self.selected_folds(args.fold):
                train_docs, _ = self.fold_docs(fold, docs)
                extractor = RelationExtractor.train(train_docs, schema, c.relation, keywords,
                                                    self.embeddings, seed=c.seed + fold.fold_id)
                path = extractor.save(self.layout.relation_model(fold.fold_id))
                logger.info(f"Fold {fold.fold_id}: relation model saved to {path} "
                            f"(gold relations not representable: {extractor.dropped})")
            return EXIT_OK

        docs = self.input_docs(args.input)
        fold_ids = [f.fold_id for f in self.selected_folds(args.fold)]
        extractors = [RelationExtractor.load(self.layout.relation_model(f)) for f in fold_ids]
        confident = self.confident_index(fold_ids)
        if args.entities == 'gold':
            entity_docs = docs
        else:
            entity_docs = read_predictions(self.layout.predictions(args.entities), docs,
                                           "run tag first, or use --entities gold")
        out = self.layout.predictions('relations')
        n_relations = 0
        for doc, entity_doc in zip(docs, entity_docs):
            entities = list(entity_doc.gold_spans)
            per_fold = [ex.score(doc, entities, self.embeddings) for ex in extractors]
            scored = ensemble_vote_relations(per_fold, confident) if len(per_fold) > 1 \
                else per_fold[0]
            relations = extractors[confident].to_relations(scored)
            n_relations += len(relations)
            write_predictions(out, doc, entities, relations)
        logger.info(f"Predicted {n_relations} relations in {len(docs)} documents "
                    f"with folds {fold_ids}")
        return EXIT_OK

    def default_target(self) -> str:
        return {Task.BB_NORM_NER: 'norm', Task.PHARMACO: 'ner',
                Task.SEEDEV: 'relations'}[self.config.task_enum]

    def cmd_eval(self, args) -> int:
        c = self.config
        target = args.target or self.default_target()
        gold = load_corpus(args.gold or c.paths.test_dir or c.paths.dev_dir)
        default_dir = {'ner': 'ensemble', 'norm': 'norm', 'relations': 'relations'}[target]
        pred_dir = Path(args.pred) if args.pred else self.layout.predictions(default_dir)
        predicted = read_predictions(pred_dir, gold, f"no predictions in {pred_dir}")

        if target == 'ner':
            report = span_prf(document_keys({p.doc_id: p.gold_spans for p in predicted}),
                              document_keys(gold), c.evaluation.mode)
            title = f"NER ({c.evaluation.mode}) - {pred_dir}"
        elif target == 'norm':
            report = ser({p.doc_id: p.gold_spans for p in predicted},
                         {d.doc_id: d.gold_spans for d in gold}, c.evaluation.w_norm)
            title = f"NER + NORMALIZATION (SER) - {pred_dir}"
        else:
            report = relation_prf(relation_keys({p.doc_id: p.gold_relations for p in predicted}),
                                  relation_keys(gold))
            title = f"RELATIONS - {pred_dir}"

        print(format_table(report, title), end='')
        if args.output:
            Path(args.output).parent.mkdir(parents=True, exist_ok=True)
            Path(args.output).write_text(format_key_values(report), encoding='utf-8')
        logger.info(f"Evaluation: {json.dumps(report.to_dict(), sort_keys=True)}")

        violations = check_thresholds(report, c.evaluation.thresholds)
        for violation in violations:
            logger.error(f"Threshold violated: {violation}")
        return EXIT_THRESHOLD if violations else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Biomedical information extraction pipeline'
    )
    parser.add_argument('--config', '-c', help='JSON configuration file')
    parser.add_argument('--override', '-o', action='append', default=[], metavar='KEY=VALUE',
                        help='Set a dotted config key, e.g. ranking.alpha=0 (repeatable)')
    parser.add_argument('--work-dir', '-w', help='Artifact directory (paths.work_dir)')
    parser.add_argument('--dry-run', action='store_true',
                        help='Validate the configuration and exit without writing anything')
    parser.add_argument('--log-json', action='store_true', help='Log JSON lines')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('folds', help='Split labeled documents into bagging folds')

    p = sub.add_parser('train-ner', help='Train the taggers of one or every fold')
    p.add_argument('--fold', type=int, help='Fold id (default: every fold)')

    p = sub.add_parser('tag', help='Tag documents')
    p.add_argument('--fold', type=int, help='Fold model to use (default: the confident fold)')
    p.add_argument('--ensemble', action='store_true', help='Tag with every fold and combine')
    p.add_argument('--mode', choices=[m.value for m in EnsembleMode],
                   help='Ensemble mode (default: flags.ensemble_mode)')
    p.add_argument('--input', help='Document directory (default: paths.test_dir)')

    p = sub.add_parser('ensemble', help='Combine per-fold predictions on disk')
    p.add_argument('--mode', choices=[m.value for m in EnsembleMode])
    p.add_argument('--input', help='Document directory (default: paths.test_dir)')

    p = sub.add_parser('normalize', help='Attach ontology ids to predicted entities')
    p.add_argument('--source', default='ensemble',
                   help='Prediction directory under predictions/ (default: ensemble)')
    p.add_argument('--input', help='Document directory (default: paths.test_dir)')

    p = sub.add_parser('brute-force', help='Dictionary-match every ontology surface form')
    p.add_argument('--input', help='Document directory (default: paths.test_dir)')

    p = sub.add_parser('relate', help='Train or apply the relation extractor')
    p.add_argument('--train', action='store_true', help='Train instead of predicting')
    p.add_argument('--fold', type=int, help='Fold id (default: every fold, voted)')
    p.add_argument('--entities', default='gold',
                   help="'gold' for the documents' own entities, or a predictions/ directory")
    p.add_argument('--input', help='Document directory (default: paths.test_dir)')

    p = sub.add_parser('eval', help='Score predictions against gold annotations')
    p.add_argument('--target', choices=['ner', 'norm', 'relations'],
                   help='What to score (default depends on the task)')
    p.add_argument('--pred', help='Prediction directory')
    p.add_argument('--gold', help='Gold document directory (default: paths.test_dir)')
    p.add_argument('--output', help='Also write key=value scores to this file')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_json)
    try:
        config = load_config(args.config, args.override)
        if args.work_dir:
            config.paths.work_dir = args.work_dir
        config.ensure_valid()
        logger.info(f"Resolved configuration: {json.dumps(config.to_dict(), sort_keys=True)}")
        logger.info(f"Seed: {config.seed}")
        if args.dry_run:
            logger.info(f"Dry run: configuration valid, {args.command} not executed")
            return EXIT_OK
        return PipelineRunner(config).run(args)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except BioExtError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())

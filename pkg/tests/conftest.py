"""Shared fixtures: a two-sentence BB-style document, toy ontologies, embeddings."""

import io

import numpy as np
import pytest

from corpus_io import (
    EmbeddingTable,
    align_tokens,
    load_conll,
    load_ncbi_names,
    load_obo,
    assign_obo_types,
    parse_brat,
)
from dataclasses import replace

DOC_TEXT = ("Presence of fish pathogen Vibrio salmonicida in fish farm . "
            "Cod farms host bacteria .")

DOC_ANN = "\n".join([
    "T1\tHabitat 12 16\tfish",
    "T2\tPhenotype 12 25\tfish pathogen",
    "T3\tMicroorganism 26 44\tVibrio salmonicida",
    "T4\tHabitat 48 57\tfish farm",
    "T5\tHabitat 60 69\tCod farms",
    "T6\tMicroorganism 75 83\tbacteria",
    "N1\tReference T3 NCBI_Taxonomy:70",
    "N2\tReference T1 OntoBiotope:OBT:000010",
    "N3\tOntoBiotope Annotation:T4 Referent:OBT:000012",
    "R1\tLives_In Microorganism:T3 Location:T4",
])

# surface, POS, 1-based head, relation, lemma
DOC_CONLL = """\
Presence\tNN\t0\troot\tpresence
of\tIN\t4\tcase\tof
fish\tNN\t4\tcompound\tfish
pathogen\tNN\t1\tnmod\tpathogen
Vibrio\tNNP\t6\tcompound\tvibrio
salmonicida\tNNP\t4\tappos\tsalmonicida
in\tIN\t9\tcase\tin
fish\tNN\t9\tcompound\tfish
farm\tNN\t6\tnmod\tfarm
.\t.\t1\tpunct\t.

Cod\tNNP\t2\tcompound\tcod
farms\tNNS\t3\tnsubj\tfarm
host\tVBP\t0\troot\thost
bacteria\tNNS\t3\tobj\tbacterium
.\t.\t3\tpunct\t.
"""

OBO_TEXT = """\
format-version: 1.2
ontology: toy

[Term]
id: OBT:000001
name: microbial habitat

[Term]
id: OBT:000002
name: microbial phenotype

[Term]
id: OBT:000010
name: fish
synonym: "fishes" EXACT []
is_a: OBT:000001 ! microbial habitat

[Term]
id: OBT:000011
name: pathogen
is_a: OBT:000002 ! microbial phenotype

[Term]
id: OBT:000012
name: fish farm
synonym: "fish farming site" EXACT []
is_a: OBT:000010 ! fish

[Term]
id: OBT:000013
name: cattle farm
is_a: OBT:000001 ! microbial habitat

[Term]
id: OBT:000099
name: old habitat
is_obsolete: true

[Typedef]
id: part_of
name: part of
"""

NCBI_TEXT = """\
70\t|\tVibrio salmonicida\t|\t\t|\tscientific name\t|
70\t|\tAliivibrio salmonicida\t|\t\t|\tsynonym\t|
562\t|\tEscherichia coli\t|\t\t|\tscientific name\t|
562\t|\tbacterium coli\t|\t\t|\tsynonym\t|
562\t|\tE. coli\t|\t\t|\tcommon name\t|
2\t|\tBacteria\t|\tBacteria <bacteria>\t|\tscientific name\t|
2\t|\tbacteria\t|\t\t|\tblast name\t|
"""


def build_document(text=DOC_TEXT, ann=DOC_ANN, conll=DOC_CONLL, doc_id='doc1'):
    doc = parse_brat(text, ann, doc_id)
    return replace(doc, sentences=align_tokens(text, load_conll(conll)))


def write_corpus(directory, docs):
    """Write (doc_id, text, ann, conll) tuples as .txt/.ann/.conll files."""
    directory.mkdir(parents=True, exist_ok=True)
    for doc_id, text, ann, conll in docs:
        (directory / f'{doc_id}.txt').write_text(text, encoding='utf-8')
        (directory / f'{doc_id}.ann').write_text(ann, encoding='utf-8')
        (directory / f'{doc_id}.conll').write_text(conll, encoding='utf-8')
    return directory


@pytest.fixture
def document():
    return build_document()


@pytest.fixture
def corpus_dir(tmp_path):
    return write_corpus(tmp_path / 'corpus', [('doc1', DOC_TEXT, DOC_ANN, DOC_CONLL)])


@pytest.fixture
def obt_concepts():
    return assign_obo_types(load_obo(io.BytesIO(OBO_TEXT.encode('utf-8'))))


@pytest.fixture
def ncbi_concepts():
    return load_ncbi_names(io.BytesIO(NCBI_TEXT.encode('utf-8')))


@pytest.fixture
def toy_embeddings():
    """3-d vectors: habitat words along x, phenotype along y, microbes along z."""
    words = ['fish', 'farm', 'fishes', 'cattle', 'pathogen', 'pathogenic', 'habitat',
             'microbial', 'phenotype', 'site', 'farming', 'pond', 'old']
    vectors = np.array([
        [1.0, 0.0, 0.0],
        [0.8, 0.0, 0.2],
        [1.0, 0.1, 0.0],
        [0.6, 0.0, 0.3],
        [0.0, 1.0, 0.0],
        [0.1, 1.0, 0.0],
        [0.5, 0.5, 0.0],
        [0.3, 0.3, 0.3],
        [0.0, 0.9, 0.1],
        [0.7, 0.0, 0.1],
        [0.8, 0.1, 0.1],
        [0.9, 0.0, 0.1],
        [0.0, 0.0, 1.0],
    ])
    return EmbeddingTable(words, vectors)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

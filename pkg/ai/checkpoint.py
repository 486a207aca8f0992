#!/usr/bin/env python3
"""
Tagger checkpoint container
===========================
Layout (little-endian throughout):

    4 bytes   magic b'BXTG'
    uint16    format version
    uint32    header length in bytes
    header    UTF-8 JSON (sorted keys): config, ranking, labels, tables,
              lm_vocab and the tensor manifest [[name, shape], ...]
    tensors   float64 data of each manifest entry, in manifest order
"""

import json
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ai.tagger_model import TaggerModel
from exceptions import MissingArtifactError, ParseError
from feature_ext import FeatureTables
from pipeline_config import RankingConfig, TaggerConfig

logger = logging.getLogger('Checkpoint')

MAGIC = b'BXTG'
VERSION = 1


def dumps(model: TaggerModel) -> bytes:
    manifest = [[name, list(model.params[name].shape)] for name in sorted(model.params)]
    header = {
        'config': model.config.to_dict(),
        'ranking': model.ranking.to_dict(),
        'labels': model.labels,
        'tables': model.tables.to_dict(),
        'lm_vocab': model.lm_vocab,
        'manifest': manifest,
    }
    raw = json.dumps(header, sort_keys=True).encode('utf-8')
    chunks = [MAGIC, struct.pack('<HI', VERSION, len(raw)), raw]
    for name, _ in manifest:
        chunks.append(np.ascontiguousarray(model.params[name], dtype='<f8').tobytes())
    return b''.join(chunks)


def loads(blob: bytes) -> TaggerModel:
    if blob[:4] != MAGIC:
        raise ParseError("not a tagger checkpoint (bad magic)")
    offset = len(MAGIC) + struct.calcsize('<HI')
    if len(blob) < offset:
        raise ParseError("checkpoint truncated in the preamble")
    version, size = struct.unpack_from('<HI', blob, len(MAGIC))
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}")
    if len(blob) < offset + size:
        raise ParseError("checkpoint truncated in the header")
    try:
        header = json.loads(blob[offset:offset + size].decode('utf-8'))
        manifest = [(str(name), [int(d) for d in shape]) for name, shape in header['manifest']]
    except (ValueError, TypeError, KeyError) as e:
        raise ParseError(f"corrupt checkpoint header: {e}") from e
    offset += size

    params = {}
    for name, shape in manifest:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise ParseError(f"checkpoint truncated in tensor {name}")
        params[name] = np.frombuffer(blob[offset:end], dtype='<f8').astype(np.float64) \
            .reshape(shape)
        offset = end
    if offset != len(blob):
        raise ParseError("trailing bytes after the last tensor")

    return TaggerModel(
        TaggerConfig(**header['config']),
        RankingConfig(**header['ranking']),
        FeatureTables.from_dict(header['tables']),
        header['labels'],
        header['lm_vocab'],
        params,
    )


def save_model(model: TaggerModel, path: Union[str, Path]) -> Path:
    """Write the checkpoint; parent directories are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(model))
    logger.info(f"Saved tagger ({len(model.params)} tensors) to {path}")
    return path


def load_model(path: Union[str, Path]) -> TaggerModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, "run train-ner first")
    model = loads(path.read_bytes())
    logger.info(f"Loaded tagger from {path} ({len(model.labels)} labels)")
    return model

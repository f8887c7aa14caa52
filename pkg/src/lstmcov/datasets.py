"""Dataset loaders: IDX image/label binaries, JSON sequence sets, token files.

IDX is the classic big-endian binary layout used by the MNIST distribution
(magic 0x00000803 for unsigned-byte image tensors, 0x00000801 for label
vectors).  Image pixels are rescaled to [0, 1].  Files ending in .gz are
decompressed transparently.

The JSON format is `{"inputs": [[[...]]], "labels": [...]}` where inputs is a
(count, timesteps, features) array and labels is optional.

Token datasets are UTF-8 text: one whitespace-separated sequence per line,
with a vocabulary file of one surface form per line (the id is the line
number) and an optional synonym table `token<TAB>syn1,syn2,...`.
"""

from __future__ import annotations

import gzip
import json
import struct

import numpy as np

from .mutation import DiscreteInput

__all__ = [
    "DatasetError",
    "load_idx_images",
    "load_idx_labels",
    "load_json_dataset",
    "load_vocabulary",
    "load_synonyms",
    "load_token_dataset",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DatasetError(Exception):
    """A dataset file is malformed or inconsistent."""


def _open_binary(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DatasetError(f"{path}: truncated while reading {what}")
    return data


def load_idx_images(path) -> np.ndarray:
    """Read an IDX unsigned-byte image tensor, scaled to floats in [0, 1].

    Returns an array of shape (count, rows, cols).
    """
    with _open_binary(path) as fh:
        (magic,) = struct.unpack(">l", _read_exact(fh, 4, path, "magic"))
        if magic != IDX_IMAGE_MAGIC:
            raise DatasetError(
                f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x} (image file)"
            )
        count, rows, cols = struct.unpack(">lll", _read_exact(fh, 12, path, "dimensions"))
        if min(count, rows, cols) < 0:
            raise DatasetError(f"{path}: negative dimension in header")
        raw = _read_exact(fh, count * rows * cols, path, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Read an IDX unsigned-byte label vector."""
    with _open_binary(path) as fh:
        (magic,) = struct.unpack(">l", _read_exact(fh, 4, path, "magic"))
        if magic != IDX_LABEL_MAGIC:
            raise DatasetError(
                f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x} (label file)"
            )
        (count,) = struct.unpack(">l", _read_exact(fh, 4, path, "count"))
        if count < 0:
            raise DatasetError(f"{path}: negative count in header")
        raw = _read_exact(fh, count, path, "label data")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_json_dataset(path):
    """Read a JSON sequence dataset.  Returns (inputs, labels-or-None)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict) or "inputs" not in doc:
        raise DatasetError(f"{path}: expected an object with an 'inputs' field")
    try:
        inputs = np.asarray(doc["inputs"], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DatasetError(f"{path}: inputs are not a numeric array ({e})") from None
    if inputs.ndim != 3:
        raise DatasetError(
            f"{path}: inputs must have shape (count, timesteps, features), got {inputs.shape}"
        )
    labels = None
    if doc.get("labels") is not None:
        labels = np.asarray(doc["labels"], dtype=np.int64)
        if labels.shape != (inputs.shape[0],):
            raise DatasetError(
                f"{path}: {inputs.shape[0]} inputs but {labels.size} labels"
            )
    return inputs, labels


def load_vocabulary(path) -> dict[int, str]:
    """Read a vocabulary file: one token per line, id = line number (0-based)."""
    vocab = {}
    with open(path, "r", encoding="utf-8") as fh:
        for idx, line in enumerate(fh):
            token = line.rstrip("\n")
            if not token:
                raise DatasetError(f"{path}: empty token at line {idx + 1}")
            vocab[idx] = token
    if not vocab:
        raise DatasetError(f"{path}: empty vocabulary")
    return vocab


def load_synonyms(path, vocab: dict[int, str]) -> dict[int, tuple[int, ...]]:
    """Read a synonym table: lines of `token<TAB>syn1,syn2,...` (surface forms)."""
    by_word = {w: i for i, w in vocab.items()}
    table: dict[int, tuple[int, ...]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise DatasetError(f"{path}:{lineno}: expected `token<TAB>syn1,syn2,...`")
            word, _, rest = line.partition("\t")
            if word not in by_word:
                raise DatasetError(f"{path}:{lineno}: token {word!r} not in vocabulary")
            key = by_word[word]
            syns = []
            for syn in rest.split(","):
                syn = syn.strip()
                if not syn:
                    continue
                if syn not in by_word:
                    raise DatasetError(f"{path}:{lineno}: synonym {syn!r} not in vocabulary")
                sid = by_word[syn]
                if sid != key and sid not in syns:
                    syns.append(sid)
            table[key] = tuple(syns)
    return table


def load_token_dataset(path, vocab_path, synonyms_path=None) -> list[DiscreteInput]:
    """Read one token sequence per line against a vocabulary (and synonym table)."""
    vocab = load_vocabulary(vocab_path)
    synonyms = load_synonyms(synonyms_path, vocab) if synonyms_path else {}
    by_word = {w: i for i, w in vocab.items()}
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            words = line.split()
            if not words:
                continue
            try:
                tokens = tuple(by_word[w] for w in words)
            except KeyError as e:
                raise DatasetError(
                    f"{path}:{lineno}: token {e.args[0]!r} not in vocabulary"
                ) from None
            out.append(DiscreteInput(tokens=tokens, vocabulary=vocab, synonyms=synonyms))
    return out

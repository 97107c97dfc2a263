"""Dataset ingestion: LIBSVM sparse text, IDX image/label files, synthetic generators."""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .rng import RngStream

SYNTH_KINDS = ("two-gaussians", "xor-quadrants")

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class LibsvmParseError(ValueError):
    """Malformed LIBSVM line; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DatasetDimensionError(ValueError):
    """A feature index exceeded the declared dimension."""


@dataclass(frozen=True)
class SparseDataset:
    """Row-sparse feature matrix with 0/1 labels."""

    features: sp.csr_matrix
    labels: np.ndarray

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def cols(self) -> int:
        return self.features.shape[1]


def load_libsvm(path, expected_dim: int | None = None) -> SparseDataset:
    """Parse a LIBSVM file: "<label> <idx>:<val> ...", 1-based indices.

    Labels -1/+1 (or 0/1) map to 0/1. The feature dimension is ``expected_dim``
    when given (indices beyond it raise DatasetDimensionError), otherwise the
    maximum index seen.
    """
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    max_index = 0
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                raw = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(f"bad label {tokens[0]!r}", line_no) from None
            labels.append(1.0 if raw > 0 else 0.0)
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise LibsvmParseError(f"bad feature token {tok!r}", line_no) from None
                if idx < 1:
                    raise LibsvmParseError(f"index {idx} is not 1-based", line_no)
                if idx <= prev:
                    raise LibsvmParseError(f"indices not strictly increasing at {idx}", line_no)
                if expected_dim is not None and idx > expected_dim:
                    raise DatasetDimensionError(
                        f"line {line_no}: index {idx} exceeds declared dimension {expected_dim}"
                    )
                prev = idx
                indices.append(idx - 1)
                values.append(val)
                max_index = max(max_index, idx)
            indptr.append(len(indices))
    dim = expected_dim if expected_dim is not None else max_index
    features = sp.csr_matrix(
        (np.asarray(values), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(labels), dim),
    )
    return SparseDataset(features=features, labels=np.asarray(labels))


def _read_idx(path) -> tuple[int, np.ndarray]:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    magic = int.from_bytes(raw[:4], "big")
    ndim = magic & 0xFF
    dims = [int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndim)]
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    return magic, data.reshape(dims)


def load_idx_images(path) -> np.ndarray:
    """(n, rows, cols) uint8 array from a big-endian IDX image file (gzip ok)."""
    magic, data = _read_idx(path)
    if magic != IDX_IMAGE_MAGIC:
        raise ValueError(f"bad IDX image magic 0x{magic:08x}")
    return data


def load_idx_labels(path) -> np.ndarray:
    """(n,) uint8 label array from a big-endian IDX label file (gzip ok)."""
    magic, data = _read_idx(path)
    if magic != IDX_LABEL_MAGIC:
        raise ValueError(f"bad IDX label magic 0x{magic:08x}")
    return data


def synth_classification(n: int, kind: str, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Reproducible 2-D labeled dataset with classes balanced within one sample.

    two-gaussians: unit-variance blobs at (2, 2) and (-2, -2); nearly separable.
    xor-quadrants: label 1 iff the coordinates have opposite signs, with
    magnitudes kept away from the axes; not linearly separable.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTH_KINDS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = RngStream(seed).generator()
    if kind == "two-gaussians":
        labels = np.arange(n) % 2
        centers = np.where(labels[:, None] == 1, 2.0, -2.0)
        features = centers + gen.standard_normal((n, 2))
    else:
        quadrant = np.arange(n) % 4
        sign_x = np.where(np.isin(quadrant, (0, 3)), 1.0, -1.0)
        sign_y = np.where(quadrant < 2, 1.0, -1.0)
        mags = gen.uniform(0.2, 2.0, size=(n, 2))
        features = mags * np.column_stack([sign_x, sign_y])
        labels = (sign_x * sign_y < 0).astype(np.int64)
    order = gen.permutation(n)
    return features[order], labels[order].astype(np.int64)

"""Dataset ingestion, validation, horizontal partitioning and synthesis.

CSV layout: first column is the class label (-1 or +1), remaining columns
are the feature vector. No header line by default.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, InvalidParam, LabelError, ParseError, TooFewSamples

__all__ = [
    "Dataset",
    "NodePartition",
    "load_dataset",
    "write_dataset_csv",
    "partition",
    "gen_synthetic",
]


@dataclass(frozen=True)
class Dataset:
    """Labeled samples: features (n, d) and labels (n,) in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]


@dataclass(frozen=True)
class NodePartition:
    """Disjoint cover of a dataset by per-node sample index lists."""

    dataset: Dataset
    node_indices: tuple  # one int ndarray of original sample indices per node

    @property
    def node_count(self):
        return len(self.node_indices)

    @property
    def counts(self):
        return tuple(len(ix) for ix in self.node_indices)


def load_dataset(path, header=False):
    """Read a dataset from CSV.

    Parameters
    ----------
    path : str or Path
        File to read.
    header : bool
        Skip one leading header line.

    Raises
    ------
    ParseError, LabelError, DimMismatch
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if len(values) < 2:
                raise ParseError(f"{path}: line {lineno}: need a label and at least one feature")
            rows.append((lineno, values))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != width:
            raise DimMismatch(
                f"{path}: line {lineno}: row has {len(values)} columns, expected {width}"
            )
    labels = np.array([v[0] for _, v in rows])
    for (lineno, _), y in zip(rows, labels):
        if y not in (-1.0, 1.0):
            raise LabelError(f"{path}: line {lineno}: label {y} not in {{-1, +1}}")
    features = np.array([v[1:] for _, v in rows])
    dataset = Dataset(features, labels)
    _warn_single_class(dataset)
    return dataset


def _warn_single_class(dataset):
    if len(dataset) and (np.all(dataset.labels > 0) or np.all(dataset.labels < 0)):
        warnings.warn("dataset contains a single class; runs will be trivial", stacklevel=3)


def write_dataset_csv(dataset, path):
    """Write a dataset in the CSV layout accepted by `load_dataset`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for y, x in zip(dataset.labels, dataset.features):
            writer.writerow([_fmt(y)] + [_fmt(v) for v in x])


def _fmt(value):
    return format(float(value), ".17g")


def partition(dataset, m, strategy="contiguous"):
    """Split a dataset across m nodes.

    'contiguous' gives the first (n mod m) nodes one extra sample each;
    'round_robin' assigns sample i to node i mod m.

    Raises
    ------
    TooFewSamples
        If the dataset has fewer samples than nodes.
    """
    n = len(dataset)
    m = int(m)
    if n < m:
        raise TooFewSamples(f"{n} samples cannot cover {m} nodes")
    indices = np.arange(n)
    if strategy == "contiguous":
        base, extra = divmod(n, m)
        sizes = [base + 1 if j < extra else base for j in range(m)]
        bounds = np.cumsum([0] + sizes)
        node_indices = tuple(indices[bounds[j]:bounds[j + 1]] for j in range(m))
    elif strategy == "round_robin":
        node_indices = tuple(indices[j::m] for j in range(m))
    else:
        raise InvalidParam(f"unknown partition strategy {strategy!r}")
    return NodePartition(dataset, node_indices)


def gen_synthetic(n_per_class, dim, separation, seed):
    """Two unit-variance Gaussian blobs at +-(separation/2) along the first axis.

    The +1 block is drawn first, then the -1 block, both from a PCG64
    generator (`numpy.random.default_rng`) seeded with `seed`, so the output
    is bit-identical across runs and platforms.

    Raises
    ------
    InvalidParam
        For non-positive counts, dimension or separation.
    """
    if n_per_class < 1:
        raise InvalidParam(f"n_per_class must be >= 1, got {n_per_class}")
    if dim < 1:
        raise InvalidParam(f"dim must be >= 1, got {dim}")
    if not separation > 0:
        raise InvalidParam(f"separation must be > 0, got {separation}")
    rng = np.random.default_rng(int(seed))
    center = np.zeros(dim)
    center[0] = separation / 2.0
    pos = rng.standard_normal((n_per_class, dim)) + center
    neg = rng.standard_normal((n_per_class, dim)) - center
    features = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
    return Dataset(features, labels)

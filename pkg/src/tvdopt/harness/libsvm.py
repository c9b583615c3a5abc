"""Reading, writing and splitting LibSVM-format classification data."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LibsvmParseError",
    "LibsvmDataset",
    "parse_libsvm",
    "parse_libsvm_text",
    "format_libsvm",
    "write_libsvm",
    "partition_dataset",
    "synthetic_dataset",
]


class LibsvmParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None, token: str | None = None):
        self.lineno = lineno
        self.token = token
        where = f"line {lineno}: " if lineno is not None else ""
        what = f" (token {token!r})" if token is not None else ""
        super().__init__(f"{where}{message}{what}")


@dataclass
class LibsvmDataset:
    """Sparse rows with 0-based feature indices and raw labels.

    ``dim`` is the largest feature index seen plus one; a bias column is
    added later by the objective, not here.
    """

    rows: list[dict[int, float]]
    labels: np.ndarray
    dim: int

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def label_set(self) -> tuple[int, ...]:
        return tuple(sorted({int(v) for v in self.labels}))

    def to_dense(self, dim: int | None = None) -> np.ndarray:
        dim = self.dim if dim is None else dim
        A = np.zeros((self.m, dim))
        for r, row in enumerate(self.rows):
            for j, v in row.items():
                A[r, j] = v
        return A

    def subset(self, index) -> LibsvmDataset:
        index = np.asarray(index, dtype=int)
        return LibsvmDataset([self.rows[i] for i in index], self.labels[index], self.dim)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LibsvmDataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.rows == other.rows
            and np.array_equal(self.labels, other.labels)
        )


_LABEL_CONVENTIONS = ({0, 1}, {-1, 1})


def _parse_label(token: str, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise LibsvmParseError("malformed label", lineno, token) from None
    if value not in (-1.0, 0.0, 1.0):
        raise LibsvmParseError("label must be one of -1, 0, +1", lineno, token)
    return int(value)


def parse_libsvm_text(text: str) -> LibsvmDataset:
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    max_index = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_parse_label(tokens[0], lineno))
        row: dict[int, float] = {}
        for token in tokens[1:]:
            idx, sep, val = token.partition(":")
            if not sep:
                raise LibsvmParseError("expected <index>:<value>", lineno, token)
            try:
                j = int(idx)
                v = float(val)
            except ValueError:
                raise LibsvmParseError("malformed feature", lineno, token) from None
            if j < 1:
                raise LibsvmParseError("feature indices are 1-based", lineno, token)
            if not np.isfinite(v):
                raise LibsvmParseError("non-finite feature value", lineno, token)
            if j - 1 in row:
                raise LibsvmParseError(f"duplicate feature index {j}", lineno, token)
            row[j - 1] = v
            max_index = max(max_index, j - 1)
        rows.append(row)
    if not rows:
        raise LibsvmParseError("no samples found")
    seen = set(labels)
    if not any(seen <= conv for conv in _LABEL_CONVENTIONS):
        raise LibsvmParseError(f"mixed label conventions {sorted(seen)}; use {{0, 1}} or {{-1, +1}}")
    return LibsvmDataset(rows, np.array(labels, dtype=int), max_index + 1)


def parse_libsvm(path: str | Path) -> LibsvmDataset:
    """Parse a LibSVM file of binary-labelled samples.

    Raises:
        LibsvmParseError: malformed tokens, duplicate indices within a row,
            mixed label conventions, or an empty file.  Errors name the line
            and offending token.
    """
    return parse_libsvm_text(Path(path).read_text())


def format_libsvm(ds: LibsvmDataset) -> str:
    """Canonical text: ``+1``/``-1``/``0`` labels, indices ascending, ``repr`` values."""
    lines = []
    for label, row in zip(ds.labels, ds.rows):
        head = "+1" if label == 1 else str(int(label))
        feats = " ".join(f"{j + 1}:{row[j]!r}" for j in sorted(row))
        lines.append(f"{head} {feats}".rstrip())
    return "\n".join(lines) + "\n"


def write_libsvm(path: str | Path, ds: LibsvmDataset) -> None:
    Path(path).write_text(format_libsvm(ds))


def partition_dataset(
    ds: LibsvmDataset, n: int, mode: str = "contiguous", seed: int | None = None
) -> list[LibsvmDataset]:
    """Split ``ds`` into ``n`` disjoint shards whose sizes differ by at most one.

    ``contiguous`` keeps file order; ``shuffled`` permutes rows with ``seed``
    first.  Larger shards come first.
    """
    if n < 1:
        raise ValueError(f"need at least one agent, got {n}")
    if n > ds.m:
        raise ValueError(f"cannot split {ds.m} samples across {n} agents")
    order = np.arange(ds.m)
    if mode == "shuffled":
        if seed is None:
            raise ValueError("shuffled partitioning needs an explicit seed")
        order = np.random.default_rng(seed).permutation(ds.m)
    elif mode != "contiguous":
        raise ValueError(f"unknown partition mode {mode!r}")
    return [ds.subset(chunk) for chunk in np.array_split(order, n)]


def synthetic_dataset(
    m: int,
    dim: int,
    seed: int,
    density: float = 0.3,
    noise: float = 0.5,
    labels: str = "01",
) -> LibsvmDataset:
    """Sparse nonnegative features with labels drawn from a logistic model.

    Stands in for the real LibSVM benchmarks at desk scale; features are
    rounded to 4 decimals so the text form round-trips exactly.
    """
    rng = np.random.default_rng(seed)
    mask = rng.random((m, dim)) < density
    A = np.where(mask, np.round(rng.random((m, dim)), 4), 0.0)
    w = rng.standard_normal(dim) * 2.0
    logits = A @ w - np.median(A @ w) + noise * rng.standard_normal(m)
    positive = rng.random(m) < 1.0 / (1.0 + np.exp(-logits))
    lo = 0 if labels == "01" else -1
    y = np.where(positive, 1, lo)
    rows = [{int(j): float(A[r, j]) for j in np.flatnonzero(A[r])} for r in range(m)]
    return LibsvmDataset(rows, y.astype(int), dim)

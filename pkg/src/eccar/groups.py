"""Partitions of the coefficient index set [p] x [q] for group penalties."""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidPartition


class GroupPartition:
    """Ordered collection of index groups over a ``p x q`` matrix.

    A partition is stored either as explicit groups (integer arrays of shape
    ``(T_g, 2)`` holding ``(row, col)`` pairs) or as a ``p x q`` label array
    giving each entry's group index. Builders use labels; explicit groups are
    kept for user-supplied partitions, which may be invalid until checked with
    :func:`validate_partition`. Instances are treated as immutable.
    """

    def __init__(self, p: int, q: int, groups: Sequence[np.ndarray] | None = None,
                 labels: np.ndarray | None = None):
        if (groups is None) == (labels is None):
            raise TypeError("pass exactly one of groups or labels")
        self.p = int(p)
        self.q = int(q)
        self._groups = None if groups is None else tuple(groups)
        self._labels = None
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (self.p, self.q):
                raise InvalidPartition(f"label array has shape {labels.shape}, "
                                       f"expected {(self.p, self.q)}")
            labels.setflags(write=False)
            self._labels = labels

    def __repr__(self) -> str:
        return f"GroupPartition(p={self.p}, q={self.q}, n_groups={self.n_groups})"

    @cached_property
    def groups(self) -> tuple[np.ndarray, ...]:
        if self._groups is not None:
            return self._groups
        flat = self._labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.cumsum(np.bincount(flat, minlength=self.n_groups))[:-1]
        rows, cols = np.divmod(order, self.q)
        pairs = np.column_stack([rows, cols])
        return tuple(np.split(pairs, bounds))

    @cached_property
    def n_groups(self) -> int:
        if self._groups is not None:
            return len(self._groups)
        return int(self._labels.max()) + 1 if self._labels.size else 0

    @cached_property
    def sizes(self) -> np.ndarray:
        if self._groups is not None:
            return np.array([len(g) for g in self._groups], dtype=np.int64)
        return np.bincount(self._labels.ravel(), minlength=self.n_groups)

    @cached_property
    def is_elementwise(self) -> bool:
        return bool(np.all(self.sizes == 1))

    @cached_property
    def labels(self) -> np.ndarray:
        """``p x q`` array mapping each entry to its group index."""
        if self._labels is not None:
            return self._labels
        if not validate_partition(self):
            raise InvalidPartition("partition is not a disjoint cover of the index set")
        out = np.empty((self.p, self.q), dtype=np.int64)
        for k, g in enumerate(self._groups):
            out[g[:, 0], g[:, 1]] = k
        out.setflags(write=False)
        return out

    def group_norms(self, m: np.ndarray) -> np.ndarray:
        """Frobenius norm of every group block of ``m``."""
        sq = np.bincount(self.labels.ravel(), weights=np.square(m).ravel(),
                         minlength=self.n_groups)
        return np.sqrt(sq)

    def canonical_labels(self) -> np.ndarray:
        """Labels renumbered by first appearance in row-major order."""
        flat = self.labels.ravel()
        _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
        rank = np.empty_like(first)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return rank[inverse].reshape(self.p, self.q)

    def same_as(self, other: "GroupPartition") -> bool:
        """Group-for-group equality, ignoring group and entry order."""
        if (self.p, self.q, self.n_groups) != (other.p, other.q, other.n_groups):
            return False
        return bool(np.array_equal(self.canonical_labels(), other.canonical_labels()))


def _pairs(rows, cols) -> np.ndarray:
    return np.column_stack([np.asarray(rows, dtype=np.int64).ravel(),
                            np.asarray(cols, dtype=np.int64).ravel()])


def _check_dims(p: int, q: int) -> None:
    if p < 1 or q < 1:
        raise InvalidPartition(f"dimensions must be positive, got p={p}, q={q}")


def elementwise_partition(p: int, q: int) -> GroupPartition:
    """One singleton group per entry, row-major. Encodes the plain l1 penalty."""
    _check_dims(p, q)
    return GroupPartition(p, q, labels=np.arange(p * q).reshape(p, q))


def row_partition(p: int, q: int) -> GroupPartition:
    _check_dims(p, q)
    return GroupPartition(p, q, labels=np.repeat(np.arange(p)[:, None], q, axis=1))


def block_partition(p: int, q: int, bp: int, bq: int) -> GroupPartition:
    """Contiguous ``bp x bq`` tiles in row-major order; trailing tiles may be ragged."""
    _check_dims(p, q)
    if bp < 1 or bq < 1:
        raise InvalidPartition(f"block sizes must be >= 1, got {bp}x{bq}")
    n_col_blocks = -(-q // bq)
    labels = (np.arange(p)[:, None] // bp) * n_col_blocks + np.arange(q)[None, :] // bq
    return GroupPartition(p, q, labels=labels)


def partition_from_groups(p: int, q: int,
                          groups: Iterable[Sequence[tuple[int, int]]]) -> GroupPartition:
    """Build a partition from explicit ``(i, j)`` lists (not validated)."""
    out = [np.asarray(list(g), dtype=np.int64).reshape(-1, 2) for g in groups]
    return GroupPartition(p, q, groups=out)


def validate_partition(g: GroupPartition) -> bool:
    """True iff the groups are non-empty, in range, disjoint and cover [p] x [q]."""
    if g.p < 1 or g.q < 1 or g.n_groups == 0:
        return False
    if g._groups is None:
        return bool(g._labels.min() >= 0 and np.all(g.sizes > 0))
    count = np.zeros((g.p, g.q), dtype=np.int64)
    for grp in g._groups:
        if grp.ndim != 2 or grp.shape[1] != 2 or len(grp) == 0:
            return False
        i, j = grp[:, 0], grp[:, 1]
        if i.min() < 0 or j.min() < 0 or i.max() >= g.p or j.max() >= g.q:
            return False
        np.add.at(count, (i, j), 1)
    return bool(np.all(count == 1))


def parse_partition(text: str, p: int, q: int) -> GroupPartition:
    """Parse the one-group-per-line format ``i,j;i,j;...`` (0-based).

    Blank lines and lines starting with ``#`` are ignored.
    """
    groups = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pairs = []
        for token in line.split(";"):
            token = token.strip()
            if not token:
                continue
            try:
                i, j = (int(v) for v in token.split(","))
            except ValueError:
                raise InvalidPartition(
                    f"line {lineno}: cannot parse index pair {token!r}") from None
            pairs.append((i, j))
        groups.append(pairs)
    part = partition_from_groups(p, q, groups)
    if not validate_partition(part):
        raise InvalidPartition(
            f"groups do not form a disjoint cover of a {p}x{q} index set")
    return part


def load_partition(path: str | Path, p: int, q: int) -> GroupPartition:
    return parse_partition(Path(path).read_text(), p, q)


def format_partition(g: GroupPartition) -> str:
    lines = [";".join(f"{i},{j}" for i, j in grp) for grp in g.groups]
    return "\n".join(lines) + "\n"


def partition_by_name(spec: str, p: int, q: int) -> GroupPartition:
    """Resolve ``elementwise``, ``rows``, ``blocks:BPxBQ`` or ``file:PATH``."""
    if spec == "elementwise":
        return elementwise_partition(p, q)
    if spec == "rows":
        return row_partition(p, q)
    if spec.startswith("blocks:"):
        try:
            bp, bq = (int(v) for v in spec[len("blocks:"):].lower().split("x"))
        except ValueError:
            raise InvalidPartition(f"malformed block spec {spec!r}, expected blocks:BPxBQ") from None
        return block_partition(p, q, bp, bq)
    if spec.startswith("file:"):
        return load_partition(spec[len("file:"):], p, q)
    raise InvalidPartition(f"unknown group spec {spec!r}")

"""Undirected population networks: CSR storage, generators, edge-list IO."""

from __future__ import annotations

import os
from typing import Iterable, Iterator, Union

import numpy as np

from . import kernels

_EDGE_HEADER = "# rdscensus edge-list v1"


class Graph:
    """Immutable undirected graph over dense vertex ids 0..n-1.

    Adjacency is stored compressed-row style (``indptr``/``indices``) with
    each neighbor list sorted, which keeps neighborhood queries allocation
    free and the representation canonical for equality checks.
    """

    __slots__ = ("n", "indptr", "indices")

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        indptr.flags.writeable = False
        indices.flags.writeable = False

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from an iterable of (u, v) pairs; duplicates collapse.

        Self-loops are rejected; both endpoints must lie in ``range(n)``.
        """
        us, vs = [], []
        for u, v in edges:
            us.append(u)
            vs.append(v)
        u_arr = np.asarray(us, dtype=np.int64)
        v_arr = np.asarray(vs, dtype=np.int64)
        return cls._from_edge_arrays(n, u_arr, v_arr)

    @classmethod
    def _from_edge_arrays(cls, n: int, u_arr: np.ndarray, v_arr: np.ndarray) -> "Graph":
        if u_arr.size:
            if u_arr.min() < 0 or v_arr.min() < 0 or u_arr.max() >= n or v_arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(u_arr == v_arr):
                raise ValueError("self-loops are not allowed")
        # canonical undirected key, dedupe, then mirror
        lo = np.minimum(u_arr, v_arr)
        hi = np.maximum(u_arr, v_arr)
        keys = lo * n + hi
        keys = np.unique(keys)
        lo = keys // n
        hi = keys % n
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src = src[order]
        dst = dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, dst)

    # -- queries --------------------------------------------------------------

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v`` (read-only view)."""
        if not 0 <= v < self.n:
            raise ValueError(f"vertex {v} out of range [0, {self.n})")
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        if not 0 <= v < self.n:
            raise ValueError(f"vertex {v} out of range [0, {self.n})")
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Each undirected edge once, as (u, v) with u < v, sorted."""
        for u in range(self.n):
            for v in self.indices[self.indptr[u] : self.indptr[u + 1]]:
                if u < v:
                    yield u, int(v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"

    def check_invariants(self) -> None:
        """Raise if adjacency is asymmetric, loopy, or has repeats."""
        for u in range(self.n):
            row = self.indices[self.indptr[u] : self.indptr[u + 1]]
            if np.any(row == u):
                raise AssertionError(f"self-loop at {u}")
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise AssertionError(f"unsorted or duplicated row at {u}")
            for v in row:
                back = self.indices[self.indptr[v] : self.indptr[v + 1]]
                if u not in back:
                    raise AssertionError(f"asymmetric edge ({u}, {v})")


# -- generators ----------------------------------------------------------------


def generate_ba(n: int, attach: int, rng_seed: int) -> Graph:
    """Preferential-attachment graph: complete core on attach+1 vertices,
    then ``attach`` degree-proportional edges per arriving vertex.

    Connected by construction, no parallel edges, heavy-tailed degrees.
    """
    us, vs = kernels.ba_edges(n, attach, _kernel_seed(rng_seed))
    return Graph._from_edge_arrays(n, us, vs)


def generate_er(n: int, mean_degree: float, rng_seed: int) -> Graph:
    """G(n, p) with p = mean_degree / (n - 1), via geometric skip sampling."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0 < mean_degree < n - 1:
        raise ValueError(f"need 0 < mean_degree < n-1, got {mean_degree}")
    p = mean_degree / (n - 1)
    total_pairs = n * (n - 1) // 2
    rng = np.random.default_rng(rng_seed)
    picks = []
    pos = -1
    # gaps between successive selected pairs are Geometric(p)
    batch = max(1024, int(total_pairs * p * 1.2))
    while pos < total_pairs:
        gaps = rng.geometric(p, size=batch)
        positions = pos + np.cumsum(gaps)
        take = positions[positions < total_pairs]
        picks.append(take)
        if positions[-1] >= total_pairs:
            break
        pos = int(positions[-1])
    idx = np.concatenate(picks) if picks else np.empty(0, dtype=np.int64)
    u, v = _pair_from_linear(idx, n)
    return Graph._from_edge_arrays(n, u, v)


def _pair_from_linear(idx: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the lexicographic pair index: idx = u*n - u(u+1)/2 + (v-u-1)."""
    if idx.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    idx = idx.astype(np.int64)
    b = 2 * n - 1
    u = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2.0).astype(np.int64)
    # fix float rounding at row boundaries
    for _ in range(2):
        base = u * n - u * (u + 1) // 2
        u = np.where(base > idx, u - 1, u)
        nxt = (u + 1) * n - (u + 1) * (u + 2) // 2
        u = np.where(idx >= nxt, u + 1, u)
    base = u * n - u * (u + 1) // 2
    v = idx - base + u + 1
    return u, v


def _kernel_seed(rng_seed) -> int:
    """Any seed-like value to a 64-bit kernel seed, via SeedSequence."""
    if isinstance(rng_seed, np.random.SeedSequence):
        return int(rng_seed.generate_state(1, np.uint64)[0])
    return int(np.random.SeedSequence(rng_seed).generate_state(1, np.uint64)[0])


# -- edge-list files -------------------------------------------------------------


def save_edge_list(graph: Graph, path: Union[str, os.PathLike]) -> None:
    """Write one ``u v`` line per edge, with a version header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_EDGE_HEADER + "\n")
        fh.write(f"# n={graph.n} edges={graph.num_edges}\n")
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")


def load_edge_list(path: Union[str, os.PathLike]) -> Graph:
    """Read whitespace-separated ``u v`` lines; ids are made dense by rank.

    Comment lines (``#``) are skipped.  Malformed lines, non-integer tokens
    and self-loops raise with the offending line number.  Vertices that
    appear in no edge are not representable in this format.
    """
    us, vs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 'u v', got {line!r}")
            try:
                u = int(parts[0])
                v = int(parts[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer vertex id in {line!r}") from None
            if u == v:
                raise ValueError(f"{path}: line {lineno}: self-loop {u} {v}")
            us.append(u)
            vs.append(v)
    if not us:
        raise ValueError(f"{path}: no edges found")
    u_arr = np.asarray(us, dtype=np.int64)
    v_arr = np.asarray(vs, dtype=np.int64)
    ids = np.unique(np.concatenate([u_arr, v_arr]))
    remap = {int(old): new for new, old in enumerate(ids)}
    u_arr = np.array([remap[int(x)] for x in u_arr], dtype=np.int64)
    v_arr = np.array([remap[int(x)] for x in v_arr], dtype=np.int64)
    return Graph._from_edge_arrays(len(ids), u_arr, v_arr)

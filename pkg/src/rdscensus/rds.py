"""Field-procedure simulations: coupon-driven capture and peer-report recapture.

The capture walk hands each interviewed subject ``c`` coupons for peers not
yet in the sample, restarting from a fresh random seed whenever the referral
frontier dies out before the target size is reached.  The recapture pass then
asks every subject for up to ``p`` reports drawn from their graph neighbors
*excluding* their recruiter and recruitees, amalgamated into a multiset that
keeps multiplicities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import Graph
from .multiset import Multiset


@dataclass
class RdsForest:
    """Outcome of a capture walk: subjects in discovery order plus the
    recruiter->recruitee referral edges (a forest rooted at the seeds)."""

    subjects: list[int]
    tree_edges: list[tuple[int, int]]
    seeds: list[int]
    exhausted: bool = False

    @property
    def size(self) -> int:
        return len(self.subjects)

    @property
    def subject_set(self) -> frozenset:
        return frozenset(self.subjects)

    def parent_map(self) -> dict[int, int]:
        return {child: parent for parent, child in self.tree_edges}

    def children_map(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for parent, child in self.tree_edges:
            out.setdefault(parent, []).append(child)
        return out

    def tree_neighbor_map(self) -> dict[int, set[int]]:
        """Per subject: recruiter and recruitees (neighbors within the forest)."""
        out: dict[int, set[int]] = {v: set() for v in self.subjects}
        for parent, child in self.tree_edges:
            out[parent].add(child)
            out[child].add(parent)
        return out

    def check_invariants(self, graph: Graph | None = None, c: int | None = None) -> None:
        subj = self.subject_set
        if len(subj) != len(self.subjects):
            raise AssertionError("repeat recruitment: subjects list has duplicates")
        inbound: dict[int, int] = {}
        outbound: dict[int, int] = {}
        for parent, child in self.tree_edges:
            if parent not in subj or child not in subj:
                raise AssertionError("tree edge endpoint outside the sample")
            inbound[child] = inbound.get(child, 0) + 1
            outbound[parent] = outbound.get(parent, 0) + 1
        if any(k > 1 for k in inbound.values()):
            raise AssertionError("a subject has two recruiters")
        if len(self.tree_edges) != len(self.subjects) - len(self.seeds):
            raise AssertionError("edge count does not match |S| - #seeds")
        if set(self.seeds) != subj - set(inbound):
            raise AssertionError("seed set is not exactly the root set")
        if c is not None and any(k > c for k in outbound.values()):
            raise AssertionError(f"a subject recruited more than c={c} peers")
        if graph is not None:
            for parent, child in self.tree_edges:
                if child not in graph.neighbors(parent):
                    raise AssertionError(f"tree edge ({parent}, {child}) not in the graph")


@dataclass
class ReportMultiset:
    """Amalgamated second-interview reports.

    ``reports`` is the multiset over reported ids; ``per_subject`` keeps each
    subject's own report set so subsample replays can be filtered later.
    """

    reports: Multiset
    per_subject: dict[int, tuple[int, ...]] = field(repr=False)

    def check_invariants(self, graph: Graph, forest: RdsForest, p: int) -> None:
        tree_nb = forest.tree_neighbor_map()
        rebuilt: dict[int, int] = {}
        for v, rv in self.per_subject.items():
            if len(rv) > p:
                raise AssertionError(f"subject {v} reported more than p={p} peers")
            if len(set(rv)) != len(rv):
                raise AssertionError(f"subject {v} repeated a report")
            nbrs = set(int(x) for x in graph.neighbors(v))
            for x in rv:
                if x not in nbrs:
                    raise AssertionError(f"subject {v} reported non-neighbor {x}")
                if x in tree_nb[v]:
                    raise AssertionError(f"subject {v} reported tree-neighbor {x}")
                rebuilt[x] = rebuilt.get(x, 0) + 1
        if Multiset(rebuilt) != self.reports:
            raise AssertionError("reports multiset is not the sum of per-subject reports")


def rds_capture(graph: Graph, s: int, c: int, n0: int, rng_seed) -> RdsForest:
    """Run the coupon-referral capture walk on ``graph``.

    Seeds are distinct uniform vertices; the next interviewee is uniform over
    the current frontier; each interview recruits up to ``c`` uniform
    not-yet-discovered neighbors.  A dead frontier with the sample still
    short triggers one fresh uniform seed from the undiscovered pool.
    Requesting more subjects than the population holds does not raise: the
    walk discovers everyone and returns with ``exhausted`` set.
    """
    if s < 1 or c < 1:
        raise ValueError(f"need s >= 1 and c >= 1, got s={s}, c={c}")
    if n0 < s:
        raise ValueError(f"target n0={n0} is smaller than the seed count s={s}")
    if s > graph.n:
        raise ValueError(f"cannot draw {s} distinct seeds from {graph.n} vertices")
    rng = np.random.default_rng(rng_seed)
    subjects, edges, seeds, exhausted = _capture_core(graph.neighbors, graph.n, s, c, n0, rng)
    return RdsForest(subjects=subjects, tree_edges=edges, seeds=seeds, exhausted=exhausted)


def _capture_core(
    neighbors_of: Callable[[int], np.ndarray],
    n: int,
    s: int,
    c: int,
    n0: int,
    rng: np.random.Generator,
) -> tuple[list[int], list[tuple[int, int]], list[int], bool]:
    in_sample = np.zeros(n, dtype=bool)
    # undiscovered pool with O(1) swap-removal, for uniform reseed draws
    pool = np.arange(n, dtype=np.int64)
    pool_pos = np.arange(n, dtype=np.int64)
    pool_len = n

    def discover(v: int) -> None:
        nonlocal pool_len
        i = pool_pos[v]
        last = pool[pool_len - 1]
        pool[i] = last
        pool_pos[last] = i
        pool_len -= 1
        in_sample[v] = True

    subjects: list[int] = []
    seeds: list[int] = []
    edges: list[tuple[int, int]] = []
    frontier: list[int] = []
    exhausted = False

    for v in rng.choice(n, size=s, replace=False):
        v = int(v)
        discover(v)
        subjects.append(v)
        seeds.append(v)
        frontier.append(v)

    while len(subjects) < n0:
        if not frontier:
            if pool_len == 0:
                exhausted = True
                break
            v = int(pool[rng.integers(pool_len)])
            discover(v)
            subjects.append(v)
            seeds.append(v)
            frontier.append(v)
            continue
        i = int(rng.integers(len(frontier)))
        x = frontier[i]
        frontier[i] = frontier[-1]
        frontier.pop()
        nbrs = neighbors_of(x)
        undiscovered = nbrs[~in_sample[nbrs]]
        if undiscovered.size <= c:
            recruits = undiscovered
        else:
            recruits = rng.choice(undiscovered, size=c, replace=False)
        for v in recruits:
            v = int(v)
            discover(v)
            subjects.append(v)
            edges.append((x, v))
            frontier.append(v)

    return subjects, edges, seeds, exhausted


def recapture(graph: Graph, forest: RdsForest, p: int, rng_seed) -> ReportMultiset:
    """Collect up to ``p`` peer reports per subject, excluding tree-neighbors.

    Candidates for subject ``v`` are ``v``'s graph neighbors minus its
    recruiter and recruitees; when more than ``p`` remain, a uniform size-p
    subset is taken.  Reports from all subjects amalgamate with multiplicity.
    """
    if p < 0:
        raise ValueError(f"need p >= 0, got {p}")
    rng = np.random.default_rng(rng_seed)
    tree_nb = forest.tree_neighbor_map()
    per_subject: dict[int, tuple[int, ...]] = {}
    counts: dict[int, int] = {}
    for v in forest.subjects:
        nbrs = graph.neighbors(v)
        excluded = tree_nb[v]
        if excluded:
            mask = np.isin(nbrs, sorted(excluded), invert=True)
            candidates = nbrs[mask]
        else:
            candidates = nbrs
        if candidates.size <= p:
            chosen = candidates
        else:
            chosen = rng.choice(candidates, size=p, replace=False)
        rv = tuple(sorted(int(x) for x in chosen))
        per_subject[v] = rv
        for x in rv:
            counts[x] = counts.get(x, 0) + 1
    return ReportMultiset(reports=Multiset(counts), per_subject=per_subject)


def tree_adjacency(n_nodes: int, edges: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    """Sorted adjacency arrays for an undirected tree/forest over 0..n_nodes-1."""
    lists: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, b in edges:
        lists[a].append(b)
        lists[b].append(a)
    return [np.array(sorted(row), dtype=np.int64) for row in lists]


def capture_on_forest(
    n_nodes: int,
    edges: Sequence[tuple[int, int]],
    s: int,
    c: int,
    n0: int,
    rng: np.random.Generator,
) -> tuple[list[int], bool]:
    """Replay the capture walk over a referral forest's own structure.

    Nodes are forest-local indices 0..n_nodes-1.  Returns the discovered
    node list (discovery order) and the exhaustion flag.
    """
    adj = tree_adjacency(n_nodes, edges)
    subjects, _, _, exhausted = _capture_core(lambda v: adj[v], n_nodes, s, c, n0, rng)
    return subjects, exhausted

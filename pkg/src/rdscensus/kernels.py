"""Hot numeric kernels: numba-jitted loops with pure-numpy fallbacks.

Two inner loops dominate harness runtime and live here:

* ``false_match_mass_mc`` -- Monte Carlo expectation of the collision mass
  between two disjoint element pools hashed into ``m`` codes, and
* ``ba_edges`` -- preferential-attachment edge construction.

Backend selection happens once at import.  Set ``RDSCENSUS_NO_NUMBA=1`` to
force the numpy fallbacks (they are also used automatically when numba is
not importable).  Both backends draw randomness from the same splitmix64
counter sequence, so for a given seed they return bit-identical results;
``benchmarks/bench_kernels.py`` times one against the other.

Randomness contract: draw ``k`` of a kernel call is ``mix64(seed, k)`` where
``mix64`` is the splitmix64 output function over counter ``k``.  Bounded
integers come from the top 53 bits mapped through a float64 in [0, 1), which
keeps the two backends' arithmetic identical (the ~2^-53 truncation bias is
irrelevant at the bounds used here).
"""

from __future__ import annotations

import os

import numpy as np

_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# bincount path allocates an m-sized table; beyond this, sort-merge instead
_BINCOUNT_MAX_M = 1 << 22

_env = os.environ.get("RDSCENSUS_NO_NUMBA", "").strip().lower()
_numba_disabled = _env not in ("", "0", "false", "no")

NUMBA_AVAILABLE = False
if not _numba_disabled:
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:
        NUMBA_AVAILABLE = False

BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


# -- splitmix64, three renditions of the same sequence -----------------------


def _mix64_py(seed: int, k: int) -> int:
    z = (seed + (k + 1) * _GOLD) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def splitmix_stream(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Vectorized uint64 outputs for counters start .. start+count-1."""
    ks = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + (ks + np.uint64(1)) * np.uint64(_GOLD)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return z


def _codes_from_words(words: np.ndarray, bound: int) -> np.ndarray:
    return (((words >> np.uint64(11)) * _INV53) * bound).astype(np.int64)


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _mix64_nb(seed, k):  # pragma: no cover - exercised via kernels
        z = seed + (k + np.uint64(1)) * np.uint64(_GOLD)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


# -- Monte Carlo false-match mass ---------------------------------------------
#
# One trial: hash a distinct elements (pool A, unit weight) and len(profile)
# distinct elements (pool B, weights = profile) independently and uniformly
# into codes 0..m-1, then record sum_x min(countA(x), weightB(x)).  The
# function returns the mean over `trials` trials.  Counter layout: trial t
# uses draws [t*(a+b), t*(a+b)+a) for A and the following b draws for B.

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _fm_bincount_nb(a, profile, m, trials, seed):
        b = profile.size
        per = a + b
        counts_a = np.zeros(m, np.int64)
        weights_b = np.zeros(m, np.int64)
        codes_a = np.empty(a, np.int64)
        codes_b = np.empty(b, np.int64)
        total = np.int64(0)
        for t in range(trials):
            base = np.uint64(t * per)
            for i in range(a):
                x = _mix64_nb(seed, base + np.uint64(i))
                c = np.int64(((x >> np.uint64(11)) * _INV53) * m)
                codes_a[i] = c
                counts_a[c] += 1
            for j in range(b):
                x = _mix64_nb(seed, base + np.uint64(a + j))
                c = np.int64(((x >> np.uint64(11)) * _INV53) * m)
                codes_b[j] = c
                weights_b[c] += profile[j]
            for i in range(a):
                c = codes_a[i]
                ca = counts_a[c]
                if ca > 0:
                    wb = weights_b[c]
                    total += min(ca, wb)
                    counts_a[c] = 0
            for j in range(b):
                weights_b[codes_b[j]] = 0
        return total / trials

    @njit(cache=True)
    def _fm_sortmerge_nb(a, profile, m, trials, seed):
        b = profile.size
        per = a + b
        codes_a = np.empty(a, np.int64)
        codes_b = np.empty(b, np.int64)
        total = np.int64(0)
        for t in range(trials):
            base = np.uint64(t * per)
            for i in range(a):
                x = _mix64_nb(seed, base + np.uint64(i))
                codes_a[i] = np.int64(((x >> np.uint64(11)) * _INV53) * m)
            for j in range(b):
                x = _mix64_nb(seed, base + np.uint64(a + j))
                codes_b[j] = np.int64(((x >> np.uint64(11)) * _INV53) * m)
            sa = np.sort(codes_a)
            order = np.argsort(codes_b)
            i = 0
            j = 0
            while i < a and j < b:
                ca = sa[i]
                cb = codes_b[order[j]]
                if ca < cb:
                    i += 1
                elif cb < ca:
                    j += 1
                else:
                    run_a = np.int64(0)
                    while i < a and sa[i] == ca:
                        run_a += 1
                        i += 1
                    run_b = np.int64(0)
                    while j < b and codes_b[order[j]] == ca:
                        run_b += profile[order[j]]
                        j += 1
                    total += min(run_a, run_b)
        return total / trials


def _fm_bincount_np(a, profile, m, trials, seed):
    b = profile.size
    per = a + b
    profile_f = profile.astype(np.float64)
    # chunk so the offset bincount table stays small
    chunk = max(1, int(4_000_000 // m))
    total = 0.0
    t0 = 0
    while t0 < trials:
        tc = min(chunk, trials - t0)
        words = splitmix_stream(seed, tc * per, start=t0 * per)
        codes = _codes_from_words(words, m).reshape(tc, per)
        offsets = (np.arange(tc, dtype=np.int64) * m)[:, None]
        flat_a = (codes[:, :a] + offsets).ravel()
        flat_b = (codes[:, a:] + offsets).ravel()
        counts_a = np.bincount(flat_a, minlength=tc * m)
        weights_b = np.bincount(flat_b, weights=np.broadcast_to(profile_f, (tc, b)).ravel(), minlength=tc * m)
        total += float(np.minimum(counts_a, weights_b).sum())
        t0 += tc
    return total / trials


def _fm_sortmerge_np(a, profile, m, trials, seed):
    b = profile.size
    per = a + b
    total = 0.0
    for t in range(trials):
        words = splitmix_stream(seed, per, start=t * per)
        codes = _codes_from_words(words, m)
        codes_a, codes_b = codes[:a], codes[a:]
        ua, ca = np.unique(codes_a, return_counts=True)
        order = np.argsort(codes_b, kind="stable")
        sb = codes_b[order]
        starts = np.flatnonzero(np.r_[True, sb[1:] != sb[:-1]])
        ub = sb[starts]
        wb = np.add.reduceat(profile[order], starts)
        common, ia, ib = np.intersect1d(ua, ub, assume_unique=True, return_indices=True)
        if common.size:
            total += float(np.minimum(ca[ia], wb[ib]).sum())
    return total / trials


def false_match_mass_mc(capture_size: int, profile, m: int, trials: int, seed: int) -> float:
    """Mean collision mass between disjoint pools hashed into ``m`` codes.

    ``capture_size`` unit-weight elements against ``len(profile)`` elements
    weighted by ``profile``; identical output on either backend.
    """
    if m < 1:
        raise ValueError(f"hash space size must be >= 1, got {m}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    profile = np.ascontiguousarray(profile, dtype=np.int64)
    if capture_size < 0 or np.any(profile <= 0):
        raise ValueError("capture size must be >= 0 and profile entries positive")
    if capture_size == 0 or profile.size == 0:
        return 0.0
    seed = int(seed) & _MASK64
    if NUMBA_AVAILABLE:
        if m <= _BINCOUNT_MAX_M:
            return float(_fm_bincount_nb(capture_size, profile, m, trials, np.uint64(seed)))
        return float(_fm_sortmerge_nb(capture_size, profile, m, trials, np.uint64(seed)))
    if m <= _BINCOUNT_MAX_M:
        return _fm_bincount_np(capture_size, profile, m, trials, seed)
    return _fm_sortmerge_np(capture_size, profile, m, trials, seed)


# -- preferential-attachment edge construction --------------------------------
#
# Start from a complete core on attach+1 vertices; every later vertex draws
# `attach` distinct targets with probability proportional to current degree
# (repeated-nodes table, rejecting duplicate targets).  Counter advances once
# per candidate draw including rejected ones.


def _ba_edge_count(n: int, attach: int) -> int:
    m0 = attach + 1
    return m0 * (m0 - 1) // 2 + (n - m0) * attach


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _ba_edges_nb(n, attach, seed):
        m0 = attach + 1
        n_edges = m0 * (m0 - 1) // 2 + (n - m0) * attach
        us = np.empty(n_edges, np.int64)
        vs = np.empty(n_edges, np.int64)
        rep = np.empty(2 * n_edges, np.int64)
        e = 0
        r = 0
        for i in range(m0):
            for j in range(i + 1, m0):
                us[e] = i
                vs[e] = j
                e += 1
                rep[r] = i
                r += 1
                rep[r] = j
                r += 1
        targets = np.empty(attach, np.int64)
        k = np.uint64(0)
        for v in range(m0, n):
            found = 0
            while found < attach:
                x = _mix64_nb(seed, k)
                k += np.uint64(1)
                idx = np.int64(((x >> np.uint64(11)) * _INV53) * r)
                cand = rep[idx]
                dup = False
                for q in range(found):
                    if targets[q] == cand:
                        dup = True
                        break
                if dup:
                    continue
                targets[found] = cand
                found += 1
            for q in range(attach):
                t = targets[q]
                us[e] = v
                vs[e] = t
                e += 1
                rep[r] = v
                r += 1
                rep[r] = t
                r += 1
        return us, vs


def _ba_edges_py(n, attach, seed):
    m0 = attach + 1
    n_edges = _ba_edge_count(n, attach)
    us = np.empty(n_edges, np.int64)
    vs = np.empty(n_edges, np.int64)
    rep = np.empty(2 * n_edges, np.int64)
    e = 0
    r = 0
    for i in range(m0):
        for j in range(i + 1, m0):
            us[e] = i
            vs[e] = j
            e += 1
            rep[r] = i
            rep[r + 1] = j
            r += 2
    rep_list = rep  # direct indexing; python ints for the counter math
    targets = [0] * attach
    k = 0
    for v in range(m0, n):
        found = 0
        while found < attach:
            x = _mix64_py(seed, k)
            k += 1
            idx = int(((x >> 11) * _INV53) * r)
            cand = int(rep_list[idx])
            dup = False
            for q in range(found):
                if targets[q] == cand:
                    dup = True
                    break
            if dup:
                continue
            targets[found] = cand
            found += 1
        for q in range(attach):
            t = targets[q]
            us[e] = v
            vs[e] = t
            e += 1
            rep_list[r] = v
            rep_list[r + 1] = t
            r += 2
    return us, vs


def ba_edges(n: int, attach: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Edge arrays of a preferential-attachment graph; deterministic in seed."""
    if attach < 1:
        raise ValueError(f"attach must be >= 1, got {attach}")
    if n <= attach:
        raise ValueError(f"need n > attach, got n={n}, attach={attach}")
    seed = int(seed) & _MASK64
    if NUMBA_AVAILABLE:
        return _ba_edges_nb(n, attach, np.uint64(seed))
    return _ba_edges_py(n, attach, seed)


# explicit handles for the benchmark and the backend-parity tests
FALSE_MATCH_IMPLS = {
    "numpy": lambda a, p, m, t, s: (
        _fm_bincount_np(a, np.ascontiguousarray(p, np.int64), m, t, int(s) & _MASK64)
        if m <= _BINCOUNT_MAX_M
        else _fm_sortmerge_np(a, np.ascontiguousarray(p, np.int64), m, t, int(s) & _MASK64)
    ),
}
BA_IMPLS = {"numpy": _ba_edges_py}
if NUMBA_AVAILABLE:
    FALSE_MATCH_IMPLS["numba"] = lambda a, p, m, t, s: float(
        _fm_bincount_nb(a, np.ascontiguousarray(p, np.int64), m, t, np.uint64(int(s) & _MASK64))
        if m <= _BINCOUNT_MAX_M
        else _fm_sortmerge_nb(a, np.ascontiguousarray(p, np.int64), m, t, np.uint64(int(s) & _MASK64))
    )
    BA_IMPLS["numba"] = lambda n, a, s: _ba_edges_nb(n, a, np.uint64(int(s) & _MASK64))

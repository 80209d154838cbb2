"""Population-size estimators and their corrections.

The ladder of estimators, in the order a study would reach for them:

* ``lincoln_peterson`` / ``chapman`` -- the classical two-independent-sample
  formulas, kept for reference and for degenerate-case fallbacks.
* ``estimate_n1`` -- capture/recapture on raw identities: sample size times
  distinct reported ids, over distinct reported ids that are themselves
  sample members.
* ``estimate_n2`` -- the same ratio computed on hashed codes using masses.
* ``estimate_n3`` -- n2 with two corrections: the match mass is debited by
  the expected mass of hash collisions between unrelated individuals
  (``expected_false_matches_*``), and the numerator factor recovers the
  pre-hash number of distinct reported ids from the observed number of
  distinct codes (``unique_count_correction``).
* ``bootstrapped_estimate`` -- replays truncated walks along the realized
  referral forest to average the corrected denominator over many replicas,
  rescuing the single-sample cases where it comes out negative.

Everything here is pure: given the same inputs and seeds, the same numbers
come back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .graph import Graph
from .hashing import HashAssignment, apply_hash
from .multiset import Multiset, matches
from .rds import RdsForest, ReportMultiset, capture_on_forest, recapture

FLAG_ZERO_MATCH = "zero-match"
FLAG_NEGATIVE_DENOMINATOR = "negative-denominator"
FLAG_CLAMPED_CORRECTION = "clamped-correction"
FLAG_EXHAUSTED_CAPTURE = "exhausted-capture"
FLAG_UNRECOVERABLE_DENOMINATOR = "unrecoverable-denominator"


@dataclass
class EstimateResult:
    """A point estimate with the intermediates needed to audit it.

    ``estimate`` is ``None`` when no finite estimate exists; in that case at
    least one flag explains why.
    """

    variant: str
    estimate: float | None
    capture_size: float = 0.0
    recapture_support: float = 0.0
    recapture_mass: float = 0.0
    match_mass: float = 0.0
    false_match_expectation: float = 0.0
    denominator: float = 0.0
    flags: tuple[str, ...] = ()
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.estimate is not None and math.isfinite(self.estimate) and not self.flags

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "estimate": self.estimate,
            "capture_size": self.capture_size,
            "recapture_support": self.recapture_support,
            "recapture_mass": self.recapture_mass,
            "match_mass": self.match_mass,
            "false_match_expectation": self.false_match_expectation,
            "denominator": self.denominator,
            "flags": list(self.flags),
            "detail": {k: self.detail[k] for k in sorted(self.detail)},
        }

    def to_csv_row(self) -> str:
        est = "" if self.estimate is None else repr(float(self.estimate))
        return ",".join(
            [
                self.variant,
                est,
                repr(float(self.capture_size)),
                repr(float(self.recapture_support)),
                repr(float(self.recapture_mass)),
                repr(float(self.match_mass)),
                repr(float(self.false_match_expectation)),
                repr(float(self.denominator)),
                ";".join(self.flags),
            ]
        )

    CSV_HEADER = "variant,estimate,capture_size,recapture_support,recapture_mass,match_mass,false_match_expectation,denominator,flags"


# -- classical estimators ------------------------------------------------------


def lincoln_peterson(capture: int, recapture: int, overlap: int) -> EstimateResult:
    """capture * recapture / overlap, for two independent samples."""
    if overlap > min(capture, recapture):
        raise ValueError("overlap cannot exceed either sample size")
    if overlap < 0 or capture < 0 or recapture < 0:
        raise ValueError("counts must be nonnegative")
    if overlap == 0:
        return EstimateResult(
            variant="LP",
            estimate=None,
            capture_size=capture,
            recapture_support=recapture,
            recapture_mass=recapture,
            match_mass=0,
            denominator=0,
            flags=(FLAG_ZERO_MATCH,),
        )
    return EstimateResult(
        variant="LP",
        estimate=capture * recapture / overlap,
        capture_size=capture,
        recapture_support=recapture,
        recapture_mass=recapture,
        match_mass=overlap,
        denominator=overlap,
    )


def chapman(capture: int, recapture: int, overlap: int) -> EstimateResult:
    """(capture+1)(recapture+1)/(overlap+1) - 1; finite even at zero overlap."""
    if overlap > min(capture, recapture):
        raise ValueError("overlap cannot exceed either sample size")
    if overlap < 0 or capture < 0 or recapture < 0:
        raise ValueError("counts must be nonnegative")
    return EstimateResult(
        variant="Chapman",
        estimate=(capture + 1) * (recapture + 1) / (overlap + 1) - 1,
        capture_size=capture,
        recapture_support=recapture,
        recapture_mass=recapture,
        match_mass=overlap,
        denominator=overlap + 1,
    )


# -- raw-identity estimator ----------------------------------------------------


def estimate_n1(forest: RdsForest, reports: ReportMultiset) -> EstimateResult:
    """Full-knowledge estimate: |S| * #distinct reports / #distinct matched reports.

    With zero matches the Chapman-style +1 adjustment is reported instead,
    under a zero-match flag, so a sweep cell never silently divides by zero.
    """
    s_size = forest.size
    rs = reports.reports
    support = rs.support_size
    match_support = matches(rs, Multiset(forest.subjects)).support_size
    flags: list[str] = []
    if forest.exhausted:
        flags.append(FLAG_EXHAUSTED_CAPTURE)
    if match_support == 0:
        flags.append(FLAG_ZERO_MATCH)
        estimate = s_size * (support + 1) / 1
        denominator = 1
    else:
        estimate = s_size * support / match_support
        denominator = match_support
    return EstimateResult(
        variant="n1",
        estimate=estimate,
        capture_size=s_size,
        recapture_support=support,
        recapture_mass=rs.mass,
        match_mass=match_support,
        denominator=denominator,
        flags=tuple(flags),
    )


# -- hashed estimators ----------------------------------------------------------


def estimate_n2(psi_s: Multiset, psi_rs: Multiset) -> EstimateResult:
    """Hashed analogue of n1 using masses: <psiS> * <psi rS> / <matches>."""
    match_mass = matches(psi_rs, psi_s).mass
    if match_mass == 0:
        return EstimateResult(
            variant="n2",
            estimate=None,
            capture_size=psi_s.mass,
            recapture_support=psi_rs.support_size,
            recapture_mass=psi_rs.mass,
            match_mass=0,
            denominator=0,
            flags=(FLAG_ZERO_MATCH,),
        )
    return EstimateResult(
        variant="n2",
        estimate=psi_s.mass * psi_rs.mass / match_mass,
        capture_size=psi_s.mass,
        recapture_support=psi_rs.support_size,
        recapture_mass=psi_rs.mass,
        match_mass=match_mass,
        denominator=match_mass,
    )


def expected_false_matches_closed(a: float, b_support: float, b_mass: float, m: int) -> float:
    """Series expectation of the collision mass between disjoint pools.

    Average report multiplicity (b_mass / b_support) times
    sum over k of k * C(a,k) * C(b_support,k) * (k/m)^(2k) * ((m-k)/m)^(a+b_support-2k),
    evaluated in log space so the binomials stay finite at survey scale.
    ``b_support`` may be fractional (it is often itself an estimate).
    """
    if m < 1:
        raise ValueError(f"hash space size must be >= 1, got {m}")
    if a < 0 or b_support < 0 or b_mass < 0:
        raise ValueError("sizes must be nonnegative")
    if a == 0 or b_support == 0 or b_mass == 0:
        return 0.0
    k_max = int(min(a, b_support, m))
    scale = b_mass / b_support
    log_m = math.log(m)
    total = 0.0
    for k in range(1, k_max + 1):
        tail_exp = a + b_support - 2 * k
        if k == m:
            if tail_exp != 0:
                continue  # ((m-k)/m)^positive vanishes; 0^0 = 1 handled below
            log_tail = 0.0
        else:
            log_tail = tail_exp * (math.log(m - k) - log_m)
        log_term = (
            math.log(k)
            + _log_choose(a, k)
            + _log_choose(b_support, k)
            + 2 * k * (math.log(k) - log_m)
            + log_tail
        )
        total += math.exp(log_term)
    return scale * total


def _log_choose(x: float, k: int) -> float:
    # real-valued upper argument: falls out of lgamma, requires x >= k
    return math.lgamma(x + 1) - math.lgamma(k + 1) - math.lgamma(x - k + 1)


def expected_false_matches_mc(
    capture_size: int,
    report_profile,
    m: int,
    trials: int,
    rng_seed,
) -> float:
    """Monte Carlo version: hash disjoint synthetic pools and average the
    collision mass.  Unlike the closed form this honors the full multiplicity
    profile of the reports rather than just (support, mass).
    """
    profile = _profile_array(report_profile)
    return kernels.false_match_mass_mc(capture_size, profile, m, trials, _as_kernel_seed(rng_seed))


def _profile_array(report_profile) -> np.ndarray:
    if isinstance(report_profile, Multiset):
        return np.array([mult for _, mult in report_profile.items()], dtype=np.int64)
    return np.ascontiguousarray(report_profile, dtype=np.int64)


def _as_kernel_seed(rng_seed) -> int:
    if isinstance(rng_seed, np.random.SeedSequence):
        return int(rng_seed.generate_state(1, np.uint64)[0])
    return int(np.random.SeedSequence(int(rng_seed)).generate_state(1, np.uint64)[0])


def balanced_profile(support: int, mass: int) -> np.ndarray:
    """Spread ``mass`` over ``support`` elements as evenly as integers allow."""
    if support < 1 or mass < support:
        raise ValueError(f"need 1 <= support <= mass, got support={support}, mass={mass}")
    q, r = divmod(mass, support)
    return np.array([q + 1] * r + [q] * (support - r), dtype=np.int64)


def unique_count_correction(observed_support: int, m: int) -> float:
    """Invert the balls-in-boxes expectation to recover a pre-hash support.

    Solves  m - observed = m * ((m-1)/m)^support  for the support, i.e.
    log(1 - observed/m) / log(1 - 1/m).  An image that covers the whole code
    space carries no support information, so ``observed == m`` is clamped to
    m - 1 (callers flag this).
    """
    if m < 2:
        raise ValueError(f"hash space size must be >= 2, got {m}")
    if not 0 <= observed_support <= m:
        raise ValueError(f"observed support {observed_support} outside [0, {m}]")
    if observed_support == 0:
        return 0.0
    x = min(observed_support, m - 1)
    return math.log1p(-x / m) / math.log1p(-1.0 / m)


def estimate_n3(
    psi_s: Multiset,
    psi_rs: Multiset,
    false_match_expectation: float,
    m: int,
) -> EstimateResult:
    """Corrected hashed estimate.

    The match mass is debited by the expected false-match mass; the report
    support enters through the unique-count correction.  A non-positive
    corrected denominator yields no estimate and a negative-denominator flag
    (the caller should fall back to the bootstrap).
    """
    match_mass = matches(psi_rs, psi_s).mass
    denominator = match_mass - false_match_expectation
    support_obs = psi_rs.support_size
    flags: list[str] = []
    if match_mass == 0:
        flags.append(FLAG_ZERO_MATCH)
    if support_obs >= m:
        flags.append(FLAG_CLAMPED_CORRECTION)
    correction = unique_count_correction(support_obs, m)
    if denominator <= 0:
        flags.append(FLAG_NEGATIVE_DENOMINATOR)
        estimate = None
    else:
        estimate = psi_s.mass / denominator * correction
    return EstimateResult(
        variant="n3",
        estimate=estimate,
        capture_size=psi_s.mass,
        recapture_support=support_obs,
        recapture_mass=psi_rs.mass,
        match_mass=match_mass,
        false_match_expectation=false_match_expectation,
        denominator=denominator,
        flags=tuple(flags),
        detail={"unique_count_correction": correction},
    )


# -- bootstrap ------------------------------------------------------------------


def estimate_false_matches(
    capture_size: int,
    psi_report_support: int,
    report_mass: int,
    m: int,
    *,
    method: str = "mc",
    mc_trials: int = 200,
    rng_seed=None,
    true_profile=None,
) -> float:
    """Expected false-match mass as computable from a hashed survey.

    When only hashed data exists, the report support is first recovered with
    the unique-count correction and the Monte Carlo pools use an (integer)
    evenly-balanced multiplicity profile.  Passing ``true_profile`` instead
    uses the actual pre-hash profile (simulation diagnostics only).
    """
    if capture_size == 0 or report_mass == 0 or psi_report_support == 0:
        return 0.0
    if true_profile is not None:
        profile = _profile_array(true_profile)
        support_est: float = float(profile.size)
    else:
        support_est = unique_count_correction(min(psi_report_support, m), m)
        support_int = max(1, min(int(round(support_est)), report_mass))
        profile = balanced_profile(support_int, report_mass)
    if method == "closed":
        if true_profile is not None:
            return expected_false_matches_closed(capture_size, profile.size, report_mass, m)
        return expected_false_matches_closed(capture_size, support_est, report_mass, m)
    if method != "mc":
        raise ValueError(f"unknown false-match method {method!r}")
    return kernels.false_match_mass_mc(capture_size, profile, m, mc_trials, _as_kernel_seed(rng_seed))


@dataclass
class _SubsampleView:
    """One bootstrap replica: rows kept, hashed report codes, true report ids."""

    rows: list[int]
    report_codes: np.ndarray
    report_ids: np.ndarray | None


def bootstrapped_estimate(
    forest: RdsForest,
    reports: ReportMultiset,
    psi: HashAssignment,
    alpha: float = 0.9,
    kappa: int = 100,
    rng_seed=None,
    *,
    s: int,
    c: int,
    n0: int | None = None,
    mc_trials: int = 200,
    efm_method: str = "mc",
    profile_mode: str = "hashed",
    report_mode: str = "restrict",
    graph: Graph | None = None,
    p: int | None = None,
) -> EstimateResult:
    """Average the corrected denominator over truncated replays of the walk.

    Each of ``kappa`` iterations re-runs the capture walk over the realized
    referral forest with target ceil(alpha * n0), derives that replica's
    hashed reports (by restricting the recorded ones, or with
    ``report_mode="rerun"`` by re-interviewing against the full graph), and
    computes match mass minus expected false matches.  Positive values
    accumulate; their average replaces the full-sample denominator.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"need 0 < alpha <= 1, got {alpha}")
    if kappa < 1:
        raise ValueError(f"need kappa >= 1, got {kappa}")
    if profile_mode not in ("hashed", "true"):
        raise ValueError(f"unknown profile mode {profile_mode!r}")
    if report_mode not in ("restrict", "rerun"):
        raise ValueError(f"unknown report mode {report_mode!r}")
    if report_mode == "rerun" and (graph is None or p is None):
        raise ValueError("report_mode='rerun' needs the graph and p")

    n_rows = forest.size
    row_of = {v: i for i, v in enumerate(forest.subjects)}
    row_edges = [(row_of[a], row_of[b]) for a, b in forest.tree_edges]
    subject_codes = np.array([psi.code_of(v) for v in forest.subjects], dtype=np.int64)
    flat_ids, row_ptr = _flatten_reports(forest.subjects, reports.per_subject)
    flat_codes = np.array([psi.code_of(int(v)) for v in flat_ids], dtype=np.int64)

    target = math.ceil(alpha * (n0 if n0 is not None else n_rows))

    def make_view(rng: np.random.Generator) -> _SubsampleView:
        rows, _ = capture_on_forest(n_rows, row_edges, min(s, n_rows), c, target, rng)
        if report_mode == "restrict":
            gathered = _gather_csr(flat_codes, row_ptr, rows)
            ids = _gather_csr(flat_ids, row_ptr, rows) if profile_mode == "true" else None
            return _SubsampleView(rows=rows, report_codes=gathered, report_ids=ids)
        # rerun: fresh second interviews for the replica, against the graph
        sub_subjects = [forest.subjects[r] for r in rows]
        kept = set(rows)
        sub_edges = [
            (forest.subjects[a], forest.subjects[b]) for a, b in row_edges if a in kept and b in kept
        ]
        sub_forest = RdsForest(
            subjects=sub_subjects,
            tree_edges=sub_edges,
            seeds=[v for v in sub_subjects if v not in {ch for _, ch in sub_edges}],
        )
        sub_reports = recapture(graph, sub_forest, p, rng)
        ids = np.array(
            [x for v in sub_subjects for x in sub_reports.per_subject[v]], dtype=np.int64
        )
        codes = np.array([psi.code_of(int(v)) for v in ids], dtype=np.int64)
        return _SubsampleView(rows=rows, report_codes=codes, report_ids=ids if profile_mode == "true" else None)

    return _bootstrap_core(
        subject_codes=subject_codes,
        full_report_codes=flat_codes,
        m=psi.m,
        kappa=kappa,
        rng_seed=rng_seed,
        make_view=make_view,
        efm_method=efm_method,
        mc_trials=mc_trials,
        extra_flags=(FLAG_EXHAUSTED_CAPTURE,) if forest.exhausted else (),
        alpha=alpha,
    )


def _bootstrap_core(
    *,
    subject_codes: np.ndarray,
    full_report_codes: np.ndarray,
    m: int,
    kappa: int,
    rng_seed,
    make_view: Callable[[np.random.Generator], _SubsampleView],
    efm_method: str,
    mc_trials: int,
    extra_flags: tuple[str, ...] = (),
    alpha: float,
) -> EstimateResult:
    """Shared bootstrap loop for simulation objects and survey records."""
    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    children = ss.spawn(kappa)

    code_present = np.zeros(m + 1, dtype=bool)
    d_values: list[float] = []
    ef_values: list[float] = []
    positive: list[float] = []
    for child in children:
        rng = np.random.default_rng(child)
        view = make_view(rng)
        rows = np.asarray(view.rows, dtype=np.int64)
        code_present[:] = False
        code_present[subject_codes[rows]] = True
        rep_codes = view.report_codes
        match_mass = int(code_present[rep_codes].sum())
        mass = int(rep_codes.size)
        if view.report_ids is not None:
            _, true_mults = np.unique(view.report_ids, return_counts=True)
            profile = true_mults.astype(np.int64)
        else:
            profile = None
        support_obs = int(np.unique(rep_codes).size)
        ef = estimate_false_matches(
            rows.size,
            support_obs,
            mass,
            m,
            method=efm_method,
            mc_trials=mc_trials,
            rng_seed=int(rng.integers(1 << 62)),
            true_profile=profile,
        )
        d = match_mass - ef
        d_values.append(d)
        ef_values.append(ef)
        if d > 0:
            positive.append(d)

    full_psi_s = Multiset(subject_codes.tolist())
    full_psi_rs = Multiset(full_report_codes.tolist())
    support_obs = full_psi_rs.support_size
    flags = list(extra_flags)
    if support_obs >= m:
        flags.append(FLAG_CLAMPED_CORRECTION)
    correction = unique_count_correction(min(support_obs, m), m)
    match_full = matches(full_psi_rs, full_psi_s).mass

    if not positive:
        flags.append(FLAG_UNRECOVERABLE_DENOMINATOR)
        estimate = None
        ave_d = 0.0
    else:
        ave_d = float(np.mean(positive))
        estimate = full_psi_s.mass / ave_d * correction

    return EstimateResult(
        variant="n3-bootstrap",
        estimate=estimate,
        capture_size=full_psi_s.mass,
        recapture_support=support_obs,
        recapture_mass=full_psi_rs.mass,
        match_mass=match_full,
        false_match_expectation=float(np.mean(ef_values)),
        denominator=ave_d,
        flags=tuple(flags),
        detail={
            "alpha": alpha,
            "kappa": float(kappa),
            "positive_denominators": float(len(positive)),
            "mean_raw_denominator": float(np.mean(d_values)),
            "unique_count_correction": correction,
        },
    )


def bootstrap_from_survey(
    subject_codes: Sequence[int],
    row_edges: Sequence[tuple[int, int]],
    report_codes_per_row: Sequence[Sequence[int]],
    m: int,
    *,
    s: int,
    c: int,
    n0: int | None = None,
    alpha: float = 0.9,
    kappa: int = 100,
    rng_seed=None,
    mc_trials: int = 200,
    efm_method: str = "mc",
) -> EstimateResult:
    """Bootstrapped estimate straight from anonymized survey records.

    Rows are subjects in interview order; ``row_edges`` are recruiter ->
    recruitee pairs of row indices.  Only hashed information is consumed, so
    a survey exported from a simulation trial reproduces that trial's
    bootstrap estimate exactly (given the same seed).
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"need 0 < alpha <= 1, got {alpha}")
    if kappa < 1:
        raise ValueError(f"need kappa >= 1, got {kappa}")
    n_rows = len(subject_codes)
    if n_rows == 0:
        raise ValueError("survey has no subjects")
    codes_arr = np.asarray(subject_codes, dtype=np.int64)
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    for i, row in enumerate(report_codes_per_row):
        ptr[i + 1] = ptr[i] + len(row)
    flat_codes = np.array([x for row in report_codes_per_row for x in row], dtype=np.int64)
    target = math.ceil(alpha * (n0 if n0 is not None else n_rows))
    row_edges = list(row_edges)

    def make_view(rng: np.random.Generator) -> _SubsampleView:
        rows, _ = capture_on_forest(n_rows, row_edges, min(s, n_rows), c, target, rng)
        return _SubsampleView(rows=rows, report_codes=_gather_csr(flat_codes, ptr, rows), report_ids=None)

    return _bootstrap_core(
        subject_codes=codes_arr,
        full_report_codes=flat_codes,
        m=m,
        kappa=kappa,
        rng_seed=rng_seed,
        make_view=make_view,
        efm_method=efm_method,
        mc_trials=mc_trials,
        alpha=alpha,
    )


def _flatten_reports(
    subjects: Sequence[int], per_subject: dict[int, tuple[int, ...]]
) -> tuple[np.ndarray, np.ndarray]:
    """CSR layout of per-subject reports, rows ordered like ``subjects``."""
    ptr = np.zeros(len(subjects) + 1, dtype=np.int64)
    chunks: list[tuple[int, ...]] = []
    for i, v in enumerate(subjects):
        rv = per_subject.get(v, ())
        chunks.append(rv)
        ptr[i + 1] = ptr[i] + len(rv)
    flat = np.array([x for rv in chunks for x in rv], dtype=np.int64)
    return flat, ptr


def _gather_csr(flat: np.ndarray, ptr: np.ndarray, rows: Sequence[int]) -> np.ndarray:
    """Concatenate the CSR slices of ``rows`` (in the given order)."""
    rows = np.asarray(rows, dtype=np.int64)
    starts = ptr[rows]
    lengths = ptr[rows + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=flat.dtype)
    ends = np.cumsum(lengths)
    idx = np.arange(total, dtype=np.int64) + np.repeat(starts - (ends - lengths), lengths)
    return flat[idx]

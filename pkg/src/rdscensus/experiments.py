"""Monte Carlo harness: single trials, one-parameter sweeps, aggregation.

A sweep holds four of the five survey parameters (n0, s, c, p, m) at their
baseline values and walks the fifth over a grid, running every (population
size, graph, grid value) cell for a configured number of trials.  Every
random stage draws from a seed derived as

    SeedSequence(master_seed, spawn_key=(0, size_idx, graph_idx))          # graph build
    SeedSequence(master_seed, spawn_key=(1, size_idx, graph_idx, value_idx, trial_idx))

so any cell or trial can be replayed bit-exactly in isolation, and trials
can run in parallel without seed collisions.
"""

from __future__ import annotations

import configparser
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .estimators import (
    EstimateResult,
    FLAG_EXHAUSTED_CAPTURE,
    FLAG_NEGATIVE_DENOMINATOR,
    bootstrapped_estimate,
    estimate_false_matches,
    estimate_n1,
    estimate_n3,
)
from .graph import Graph, generate_ba
from .hashing import draw_hash, apply_hash
from .multiset import Multiset
from .rds import rds_capture, recapture

log = logging.getLogger(__name__)

SWEEPABLE = ("n0", "s", "c", "p", "m")
ESTIMATOR_NAMES = ("n1", "n3", "n3-bootstrap")

RESULTS_HEADER = "# rdscensus sweep-results v1"
TRIALS_HEADER = "# rdscensus trials v1"


@dataclass(frozen=True)
class TrialParams:
    """The five survey parameters of a single capture/recapture trial."""

    n0: int = 500
    s: int = 6
    c: int = 3
    p: int = 25
    m: int = 3125

    def with_value(self, name: str, value: int) -> "TrialParams":
        if name not in SWEEPABLE:
            raise ValueError(f"not a sweepable parameter: {name!r}")
        return replace(self, **{name: value})

    def validate(self) -> None:
        if self.s < 1:
            raise ValueError(f"need s >= 1, got {self.s}")
        if self.n0 < self.s:
            raise ValueError(f"need n0 >= s, got n0={self.n0}, s={self.s}")
        if self.c < 1:
            raise ValueError(f"need c >= 1, got {self.c}")
        if self.p < 1:
            raise ValueError(f"need p >= 1, got {self.p}")
        if self.m < 2:
            raise ValueError(f"need m >= 2, got {self.m}")


BASELINE = TrialParams()


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    population_sizes: tuple[int, ...] = (6250, 12500)
    graphs_per_size: int = 3
    trials_per_graph: int = 30
    attach: int = 3
    baseline: TrialParams = field(default_factory=TrialParams)
    sweep_parameter: str = "n0"
    sweep_values: tuple[int, ...] = (200, 400, 600, 800, 1000)
    estimators: tuple[str, ...] = ("n1", "n3-bootstrap")
    master_seed: int = 1
    alpha: float = 0.9
    kappa: int = 100
    mc_trials: int = 200
    efm_method: str = "mc"
    workers: int = 1

    def validate(self) -> None:
        if not self.population_sizes:
            raise ConfigError("population_sizes is empty")
        if self.sweep_parameter not in SWEEPABLE:
            raise ConfigError(
                f"sweep parameter must be one of {', '.join(SWEEPABLE)}, got {self.sweep_parameter!r}"
            )
        if not self.sweep_values:
            raise ConfigError("sweep values are empty")
        for name in self.estimators:
            if name not in ESTIMATOR_NAMES:
                raise ConfigError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATOR_NAMES)}")
        if not self.estimators:
            raise ConfigError("estimator set is empty")
        if self.graphs_per_size < 1 or self.trials_per_graph < 1:
            raise ConfigError("graphs_per_size and trials_per_graph must be >= 1")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"need 0 < alpha <= 1, got {self.alpha}")
        if self.kappa < 1 or self.mc_trials < 1:
            raise ConfigError("kappa and mc_trials must be >= 1")
        if self.efm_method not in ("mc", "closed"):
            raise ConfigError(f"efm_method must be 'mc' or 'closed', got {self.efm_method!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for value in self.sweep_values:
            params = self.baseline.with_value(self.sweep_parameter, value)
            try:
                params.validate()
            except ValueError as exc:
                raise ConfigError(f"sweep value {value} for {self.sweep_parameter}: {exc}") from None
            for size in self.population_sizes:
                if params.n0 > size:
                    raise ConfigError(
                        f"capture target n0={params.n0} exceeds population size {size}"
                    )
        if self.attach < 1 or any(n <= self.attach for n in self.population_sizes):
            raise ConfigError("need population sizes > attach >= 1")

    @property
    def total_trials(self) -> int:
        return (
            len(self.population_sizes)
            * self.graphs_per_size
            * len(self.sweep_values)
            * self.trials_per_graph
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        if "experiment" not in parser:
            raise ConfigError(f"{path}: missing [experiment] section")
        if "sweep" not in parser:
            raise ConfigError(f"{path}: missing [sweep] section")
        exp = parser["experiment"]
        sweep = parser["sweep"]
        known_exp = {
            "population_sizes", "graphs_per_size", "trials_per_graph", "attach",
            "n0", "s", "c", "p", "m", "estimators", "master_seed",
            "alpha", "kappa", "mc_trials", "efm_method", "workers",
        }
        for key in exp:
            if key not in known_exp:
                raise ConfigError(f"{path}: unknown key {key!r} in [experiment]")
        for key in sweep:
            if key not in ("parameter", "values"):
                raise ConfigError(f"{path}: unknown key {key!r} in [sweep]")
        try:
            baseline = TrialParams(
                n0=exp.getint("n0", BASELINE.n0),
                s=exp.getint("s", BASELINE.s),
                c=exp.getint("c", BASELINE.c),
                p=exp.getint("p", BASELINE.p),
                m=exp.getint("m", BASELINE.m),
            )
            config = cls(
                population_sizes=_int_list(exp.get("population_sizes", "6250, 12500")),
                graphs_per_size=exp.getint("graphs_per_size", 3),
                trials_per_graph=exp.getint("trials_per_graph", 30),
                attach=exp.getint("attach", 3),
                baseline=baseline,
                sweep_parameter=sweep.get("parameter", "").strip(),
                sweep_values=_int_list(sweep.get("values", "")),
                estimators=_str_list(exp.get("estimators", "n1, n3-bootstrap")),
                master_seed=exp.getint("master_seed", 1),
                alpha=exp.getfloat("alpha", 0.9),
                kappa=exp.getint("kappa", 100),
                mc_trials=exp.getint("mc_trials", 200),
                efm_method=exp.get("efm_method", "mc").strip(),
                workers=exp.getint("workers", 1),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        config.validate()
        return config


def _int_list(text: str) -> tuple[int, ...]:
    items = [tok.strip() for tok in text.split(",") if tok.strip()]
    return tuple(int(tok) for tok in items)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


# -- single trial ---------------------------------------------------------------


def run_trial(
    graph: Graph,
    params: TrialParams,
    trial_seed,
    estimators: Sequence[str] = ("n1", "n3"),
    *,
    alpha: float = 0.9,
    kappa: int = 100,
    mc_trials: int = 200,
    efm_method: str = "mc",
) -> list[EstimateResult]:
    """One capture/recapture draw, estimated on raw ids and on hashed codes.

    The hashed estimate uses only information a hashed survey would yield
    (support recovered by the unique-count correction, evenly-balanced
    Monte Carlo profile).  When the raw corrected denominator is negative the
    bootstrap rescue runs even if not requested explicitly.
    """
    params.validate()
    ss = trial_seed if isinstance(trial_seed, np.random.SeedSequence) else np.random.SeedSequence(trial_seed)
    cap_ss, rec_ss, hash_ss, efm_ss, boot_ss = ss.spawn(5)

    forest = rds_capture(graph, params.s, params.c, params.n0, cap_ss)
    reports = recapture(graph, forest, params.p, rec_ss)

    results: list[EstimateResult] = []
    if "n1" in estimators:
        results.append(estimate_n1(forest, reports))

    wants_hashed = "n3" in estimators or "n3-bootstrap" in estimators
    if not wants_hashed:
        return results

    psi = draw_hash(range(graph.n), params.m, hash_ss)
    psi_s = apply_hash(psi, Multiset(forest.subjects))
    psi_rs = apply_hash(psi, reports.reports)
    ef = estimate_false_matches(
        forest.size,
        psi_rs.support_size,
        psi_rs.mass,
        params.m,
        method=efm_method,
        mc_trials=mc_trials,
        rng_seed=efm_ss,
    )
    n3 = estimate_n3(psi_s, psi_rs, ef, params.m)
    if forest.exhausted:
        n3 = replace(n3, flags=n3.flags + (FLAG_EXHAUSTED_CAPTURE,))
    if "n3" in estimators:
        results.append(n3)
    if "n3-bootstrap" in estimators or (
        "n3" in estimators and FLAG_NEGATIVE_DENOMINATOR in n3.flags
    ):
        results.append(
            bootstrapped_estimate(
                forest,
                reports,
                psi,
                alpha=alpha,
                kappa=kappa,
                rng_seed=boot_ss,
                s=params.s,
                c=params.c,
                n0=params.n0,
                mc_trials=mc_trials,
                efm_method=efm_method,
            )
        )
    return results


# -- aggregation ------------------------------------------------------------------


def aggregate_stats(results: Iterable[EstimateResult]) -> tuple[float, float, dict[str, int]]:
    """Mean and sample stddev over clean estimates; flagged trials tallied.

    A trial contributes to the moments only when it carries a finite
    estimate and no flag.  Returns NaN moments when nothing qualifies.
    """
    values: list[float] = []
    flag_counts: dict[str, int] = {}
    for r in results:
        if r.flags:
            for f in r.flags:
                flag_counts[f] = flag_counts.get(f, 0) + 1
            continue
        if r.estimate is None or not math.isfinite(r.estimate):
            flag_counts["non-finite"] = flag_counts.get("non-finite", 0) + 1
            continue
        values.append(r.estimate)
    if not values:
        return math.nan, math.nan, flag_counts
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std, flag_counts


@dataclass
class CellStats:
    pop_size: int
    param: str
    value: int
    estimator: str
    mean: float
    stddev: float
    n_trials: int
    n_flagged: int
    flag_counts: dict[str, int] = field(default_factory=dict)

    def to_csv_row(self) -> str:
        return ",".join(
            [
                str(self.pop_size),
                self.param,
                str(self.value),
                self.estimator,
                repr(self.mean),
                repr(self.stddev),
                str(self.n_trials),
                str(self.n_flagged),
            ]
        )


@dataclass
class SweepResult:
    cells: list[CellStats]

    def find(self, pop_size: int, value: int, estimator: str) -> CellStats:
        for cell in self.cells:
            if (cell.pop_size, cell.value, cell.estimator) == (pop_size, value, estimator):
                return cell
        raise KeyError((pop_size, value, estimator))


# -- sweep driver -------------------------------------------------------------------


def _graph_seed(master_seed: int, size_idx: int, graph_idx: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(0, size_idx, graph_idx))


def _trial_seed(
    master_seed: int, size_idx: int, graph_idx: int, value_idx: int, trial_idx: int
) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        master_seed, spawn_key=(1, size_idx, graph_idx, value_idx, trial_idx)
    )


def _run_cell(
    graph: Graph,
    config: ExperimentConfig,
    size_idx: int,
    graph_idx: int,
    value_idx: int,
) -> list[list[EstimateResult]]:
    params = config.baseline.with_value(config.sweep_parameter, config.sweep_values[value_idx])
    out = []
    for trial_idx in range(config.trials_per_graph):
        seed = _trial_seed(config.master_seed, size_idx, graph_idx, value_idx, trial_idx)
        out.append(
            run_trial(
                graph,
                params,
                seed,
                estimators=config.estimators,
                alpha=config.alpha,
                kappa=config.kappa,
                mc_trials=config.mc_trials,
                efm_method=config.efm_method,
            )
        )
    return out


def run_sweep(
    config: ExperimentConfig,
    results_file: IO[str] | None = None,
    trials_file: IO[str] | None = None,
) -> SweepResult:
    """Execute the full grid; stream aggregated cells to ``results_file``.

    Cells are aggregated over all graphs of a population size.  With
    ``workers > 1`` the (graph, value) cells of a size run in a process
    pool; merge order is fixed by index, so output is identical to a serial
    run.
    """
    config.validate()
    if results_file is not None:
        results_file.write(RESULTS_HEADER + "\n")
        results_file.write("pop_size,param,value,estimator,mean,stddev,n_trials,n_flagged\n")
        results_file.flush()
    if trials_file is not None:
        trials_file.write(TRIALS_HEADER + "\n")
        trials_file.write("pop_size,param,value,graph_index,trial_index,estimator,estimate,flags\n")
        trials_file.flush()

    cells: list[CellStats] = []
    for size_idx, pop_size in enumerate(config.population_sizes):
        graphs = [
            generate_ba(pop_size, config.attach, _graph_seed(config.master_seed, size_idx, g))
            for g in range(config.graphs_per_size)
        ]
        log.info("generated %d graphs of size %d", len(graphs), pop_size)
        # trial results per (value_idx, graph_idx)
        per_value: list[list[list[list[EstimateResult]]]] = [
            [None] * config.graphs_per_size for _ in config.sweep_values  # type: ignore[list-item]
        ]
        tasks = [
            (size_idx, g, v)
            for v in range(len(config.sweep_values))
            for g in range(config.graphs_per_size)
        ]
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = {
                    (g, v): pool.submit(_run_cell, graphs[g], config, size_idx, g, v)
                    for (_, g, v) in tasks
                }
                for (g, v), fut in futures.items():
                    per_value[v][g] = fut.result()
        else:
            for _, g, v in tasks:
                per_value[v][g] = _run_cell(graphs[g], config, size_idx, g, v)

        for value_idx, value in enumerate(config.sweep_values):
            by_estimator: dict[str, list[EstimateResult]] = {}
            for graph_idx in range(config.graphs_per_size):
                for trial_idx, trial_results in enumerate(per_value[value_idx][graph_idx]):
                    for res in trial_results:
                        by_estimator.setdefault(res.variant, []).append(res)
                        if trials_file is not None:
                            est = "" if res.estimate is None else repr(float(res.estimate))
                            trials_file.write(
                                f"{pop_size},{config.sweep_parameter},{value},"
                                f"{graph_idx},{trial_idx},{res.variant},{est},{';'.join(res.flags)}\n"
                            )
            for estimator in config.estimators:
                if estimator not in by_estimator:
                    continue
                results = by_estimator[estimator]
                mean, std, flag_counts = aggregate_stats(results)
                cell = CellStats(
                    pop_size=pop_size,
                    param=config.sweep_parameter,
                    value=value,
                    estimator=estimator,
                    mean=mean,
                    stddev=std,
                    n_trials=len(results) - sum(1 for r in results if r.flags or r.estimate is None),
                    n_flagged=sum(1 for r in results if r.flags or r.estimate is None),
                    flag_counts=flag_counts,
                )
                cells.append(cell)
                log.info(
                    "cell size=%d %s=%d %s: mean=%.1f sd=%.1f (%d trials, %d flagged)",
                    pop_size, config.sweep_parameter, value, estimator,
                    mean, std, cell.n_trials, cell.n_flagged,
                )
                if results_file is not None:
                    results_file.write(cell.to_csv_row() + "\n")
                    results_file.flush()
            if trials_file is not None:
                trials_file.flush()
    return SweepResult(cells=cells)

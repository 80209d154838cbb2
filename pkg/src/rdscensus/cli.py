"""Command-line entry point.

Subcommands::

    generate   write a random population graph as an edge list
    simulate   run one capture/recapture trial on a graph file
    sweep      execute a parameter sweep from a config file
    estimate   estimate population size from anonymized survey records

Exit codes: 0 success, 2 validation error, 3 estimation pathology (no
finite estimate).  Every command honors ``--seed``; all randomness is
derived from it, so reruns with the same arguments produce byte-identical
output files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

import numpy as np

from . import kernels
from .estimators import (
    EstimateResult,
    FLAG_NEGATIVE_DENOMINATOR,
    bootstrap_from_survey,
    bootstrapped_estimate,
    estimate_false_matches,
    estimate_n1,
    estimate_n3,
)
from .experiments import ConfigError, ExperimentConfig, TrialParams, run_sweep
from .graph import generate_ba, generate_er, load_edge_list, save_edge_list
from .hashing import apply_hash, draw_hash, telefunken_space
from .multiset import Multiset
from .rds import rds_capture, recapture

log = logging.getLogger(__name__)

SURVEY_HEADER = "# rdscensus survey v1"
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PATHOLOGY = 3

# hold off paper-scale runs behind an explicit heads-up
RUNTIME_WARN_TRIALS = 20_000


def _stage_seed(seed: int, stage: int) -> int:
    """CLI seed derivation: one 64-bit integer per pipeline stage."""
    return int(np.random.SeedSequence(seed, spawn_key=(stage,)).generate_state(1, np.uint64)[0])


_STAGE_CAPTURE, _STAGE_RECAPTURE, _STAGE_HASH, _STAGE_EFM, _STAGE_BOOTSTRAP = range(5)


# -- generate -------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.family == "ba":
        if args.attach is None:
            raise ValueError("--attach is required for --family ba")
        graph = generate_ba(args.n, args.attach, args.seed)
    else:
        if args.mean_degree is None:
            raise ValueError("--mean-degree is required for --family er")
        graph = generate_er(args.n, args.mean_degree, args.seed)
    save_edge_list(graph, args.output)
    degrees = graph.degrees
    print(
        f"wrote {args.output}: n={graph.n} edges={graph.num_edges} "
        f"mean_degree={degrees.mean():.2f} max_degree={int(degrees.max())}"
    )
    return EXIT_OK


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    graph = load_edge_list(args.graph)
    params = TrialParams(n0=args.n0, s=args.s, c=args.c, p=args.p, m=args.m)
    params.validate()
    if params.n0 > graph.n:
        log.warning("capture target %d exceeds population %d; expect exhaustion", params.n0, graph.n)

    forest = rds_capture(graph, params.s, params.c, params.n0, _stage_seed(args.seed, _STAGE_CAPTURE))
    reports = recapture(graph, forest, params.p, _stage_seed(args.seed, _STAGE_RECAPTURE))
    n1 = estimate_n1(forest, reports)

    psi = draw_hash(range(graph.n), params.m, _stage_seed(args.seed, _STAGE_HASH))
    psi_s = apply_hash(psi, Multiset(forest.subjects))
    psi_rs = apply_hash(psi, reports.reports)
    ef = estimate_false_matches(
        forest.size,
        psi_rs.support_size,
        psi_rs.mass,
        params.m,
        method=args.efm_method,
        mc_trials=args.mc_trials,
        rng_seed=_stage_seed(args.seed, _STAGE_EFM),
    )
    n3 = estimate_n3(psi_s, psi_rs, ef, params.m)

    results = [n1, n3]
    boot_seed = _stage_seed(args.seed, _STAGE_BOOTSTRAP)
    boot = None
    if args.bootstrap:
        boot = bootstrapped_estimate(
            forest,
            reports,
            psi,
            alpha=args.alpha,
            kappa=args.kappa,
            rng_seed=boot_seed,
            s=params.s,
            c=params.c,
            n0=params.n0,
            mc_trials=args.mc_trials,
            efm_method=args.efm_method,
        )
        results.append(boot)

    _print_result("RDS full-knowledge", n1)
    _print_result("RDS + ANON/hashing", n3)
    if boot is not None:
        _print_result("RDS + ANON/hashing (bootstrap)", boot)

    if args.json:
        payload = {
            "command": "simulate",
            "graph": args.graph,
            "seed": args.seed,
            "params": {"n0": params.n0, "s": params.s, "c": params.c, "p": params.p, "m": params.m},
            "bootstrap": {"enabled": args.bootstrap, "alpha": args.alpha, "kappa": args.kappa,
                          "mc_trials": args.mc_trials, "efm_method": args.efm_method,
                          "seed": boot_seed},
            "results": [r.to_json_dict() for r in results],
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if args.export_survey:
        _write_survey(args.export_survey, forest, reports, psi, params,
                      alpha=args.alpha, kappa=args.kappa, mc_trials=args.mc_trials,
                      efm_method=args.efm_method, bootstrap_seed=boot_seed)

    hashed_ok = (boot is not None and boot.estimate is not None) or n3.estimate is not None
    if not hashed_ok:
        print("no finite hashed estimate; rerun with --bootstrap or a larger hash space", file=sys.stderr)
        return EXIT_PATHOLOGY
    return EXIT_OK


def _print_result(label: str, res: EstimateResult) -> None:
    est = "none" if res.estimate is None else f"{res.estimate:.2f}"
    flags = f"  [{';'.join(res.flags)}]" if res.flags else ""
    print(f"{label} ({res.variant}): {est}{flags}")
    print(
        f"    capture={res.capture_size:.0f} reports: support={res.recapture_support:.0f} "
        f"mass={res.recapture_mass:.0f}; match_mass={res.match_mass:.0f} "
        f"E[false]={res.false_match_expectation:.3f} denominator={res.denominator:.3f}"
    )


# -- survey interchange -----------------------------------------------------------


def _write_survey(path, forest, reports, psi, params: TrialParams, *, alpha, kappa,
                  mc_trials, efm_method, bootstrap_seed) -> None:
    row_of = {v: i for i, v in enumerate(forest.subjects)}
    parent = forest.parent_map()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SURVEY_HEADER + "\n")
        fh.write(f"# m={params.m} p={params.p} s={params.s} c={params.c} n0={params.n0}\n")
        fh.write(
            f"# bootstrap_seed={bootstrap_seed} alpha={alpha} kappa={kappa} "
            f"mc_trials={mc_trials} efm_method={efm_method}\n"
        )
        fh.write("subject_code,recruiter_row,report_codes\n")
        for v in forest.subjects:
            code = psi.code_of(v)
            rec = "" if v not in parent else str(row_of[parent[v]] + 1)
            rep = ";".join(str(psi.code_of(x)) for x in reports.per_subject[v])
            fh.write(f"{code},{rec},{rep}\n")


@dataclass
class SurveyData:
    subject_codes: list[int]
    row_edges: list[tuple[int, int]]
    report_codes_per_row: list[tuple[int, ...]]
    header: dict[str, str]


def read_survey(path) -> SurveyData:
    """Parse survey records; raises ValueError naming the offending row."""
    subject_codes: list[int] = []
    row_edges: list[tuple[int, int]] = []
    reports: list[tuple[int, ...]] = []
    header: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        row = 0
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line.lstrip("#").split():
                    if "=" in token:
                        key, _, value = token.partition("=")
                        header[key] = value
                continue
            if line.startswith("subject_code"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 comma-separated fields")
            row += 1
            try:
                code = int(parts[0])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: subject code is not an integer") from None
            recruiter = parts[1].strip()
            if recruiter:
                try:
                    rec_row = int(recruiter)
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: recruiter row is not an integer") from None
                if not 1 <= rec_row < row:
                    raise ValueError(
                        f"{path}: line {lineno}: recruiter row {rec_row} does not precede row {row}"
                    )
                row_edges.append((rec_row - 1, row - 1))
            rep_field = parts[2].strip()
            if rep_field:
                try:
                    rv = tuple(int(tok) for tok in rep_field.split(";"))
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: report code is not an integer") from None
            else:
                rv = ()
            subject_codes.append(code)
            reports.append(rv)
    if not subject_codes:
        raise ValueError(f"{path}: survey has no records")
    return SurveyData(subject_codes=subject_codes, row_edges=row_edges,
                      report_codes_per_row=reports, header=header)


def cmd_estimate(args) -> int:
    survey = read_survey(args.survey)
    header = survey.header

    if args.d is not None:
        m = telefunken_space(args.d)
    elif args.m is not None:
        m = args.m
    elif "m" in header:
        m = int(header["m"])
    else:
        raise ValueError("hash space size unknown: pass --m or --d (or a survey header with m=...)")
    if m < 2:
        raise ValueError(f"need hash space size >= 2, got {m}")

    p = args.p if args.p is not None else int(header.get("p", 0)) or None
    s = args.s if args.s is not None else int(header.get("s", 1))
    c = args.c if args.c is not None else int(header.get("c", 3))
    n0 = args.n0 if args.n0 is not None else (int(header["n0"]) if "n0" in header else None)
    alpha = args.alpha if args.alpha is not None else float(header.get("alpha", 0.9))
    kappa = args.kappa if args.kappa is not None else int(header.get("kappa", 100))
    mc_trials = args.mc_trials if args.mc_trials is not None else int(header.get("mc_trials", 200))
    efm_method = args.efm_method or header.get("efm_method", "mc")
    if args.seed is not None:
        seed = args.seed
    elif "bootstrap_seed" in header:
        seed = int(header["bootstrap_seed"])
    else:
        seed = None  # ambient entropy, documented

    for i, code in enumerate(survey.subject_codes, start=1):
        if not 1 <= code <= m:
            raise ValueError(f"record {i}: subject code {code} outside [1, {m}]")
    for i, rv in enumerate(survey.report_codes_per_row, start=1):
        if p is not None and len(rv) > p:
            raise ValueError(f"record {i}: {len(rv)} reports exceed p={p}")
        for code in rv:
            if not 1 <= code <= m:
                raise ValueError(f"record {i}: report code {code} outside [1, {m}]")

    result = bootstrap_from_survey(
        survey.subject_codes,
        survey.row_edges,
        survey.report_codes_per_row,
        m,
        s=s,
        c=c,
        n0=n0,
        alpha=alpha,
        kappa=kappa,
        rng_seed=seed,
        mc_trials=mc_trials,
        efm_method=efm_method,
    )
    _print_result("survey estimate", result)
    if args.json:
        payload = {
            "command": "estimate",
            "survey": args.survey,
            "m": m,
            "s": s,
            "c": c,
            "n0": n0,
            "alpha": alpha,
            "kappa": kappa,
            "mc_trials": mc_trials,
            "efm_method": efm_method,
            "seed": seed,
            "result": result.to_json_dict(),
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if result.estimate is None:
        print("bootstrap produced no positive denominators; estimate unavailable", file=sys.stderr)
        return EXIT_PATHOLOGY
    return EXIT_OK


# -- sweep ------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.workers is not None:
        config.workers = args.workers
        config.validate()
    if config.total_trials >= RUNTIME_WARN_TRIALS:
        log.warning(
            "config requests %d trials; paper-scale grids can run for hours",
            config.total_trials,
        )
    trials_fh = open(args.per_trial, "w", encoding="utf-8") if args.per_trial else None
    try:
        with open(args.output, "w", encoding="utf-8") as out:
            run_sweep(config, results_file=out, trials_file=trials_fh)
    finally:
        if trials_fh is not None:
            trials_fh.close()
    print(f"wrote {args.output}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdscensus",
        description="Hidden-population size estimation from respondent-driven samples.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random population graph")
    g.add_argument("--family", choices=("ba", "er"), required=True)
    g.add_argument("--n", type=int, required=True, help="number of vertices")
    g.add_argument("--attach", type=int, help="edges per new vertex (ba)")
    g.add_argument("--mean-degree", type=float, help="expected degree (er)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="one capture/recapture trial on a graph file")
    s.add_argument("--graph", required=True)
    s.add_argument("--n0", type=int, default=500, help="capture target size")
    s.add_argument("--s", type=int, default=6, help="number of seeds")
    s.add_argument("--c", type=int, default=3, help="coupons per subject")
    s.add_argument("--p", type=int, default=25, help="max reports per subject")
    s.add_argument("--m", type=int, default=3125, help="hash space size")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bootstrap", dest="bootstrap", action="store_true", default=True)
    s.add_argument("--no-bootstrap", dest="bootstrap", action="store_false")
    s.add_argument("--alpha", type=float, default=0.9)
    s.add_argument("--kappa", type=int, default=100)
    s.add_argument("--mc-trials", type=int, default=200)
    s.add_argument("--efm-method", choices=("mc", "closed"), default="mc")
    s.add_argument("--json", help="write a JSON detail record here")
    s.add_argument("--export-survey", help="write the hashed view as survey records")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    w.add_argument("--config", required=True)
    w.add_argument("-o", "--output", required=True, help="aggregated results CSV")
    w.add_argument("--per-trial", help="optional long-format per-trial CSV")
    w.add_argument("--workers", type=int, help="process pool size (default from config)")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("estimate", help="bootstrapped estimate from survey records")
    e.add_argument("--survey", required=True)
    e.add_argument("--m", type=int, help="hash space size (or use --d)")
    e.add_argument("--d", type=int, help="telefunken digit count; implies m = 2^(2d)")
    e.add_argument("--p", type=int, help="max reports per record (validation)")
    e.add_argument("--s", type=int, help="seed count used in the walk replays")
    e.add_argument("--c", type=int, help="coupon count used in the walk replays")
    e.add_argument("--n0", type=int, help="capture target (defaults to record count)")
    e.add_argument("--alpha", type=float)
    e.add_argument("--kappa", type=int)
    e.add_argument("--mc-trials", type=int)
    e.add_argument("--efm-method", choices=("mc", "closed"))
    e.add_argument("--seed", type=int, help="bootstrap seed (default: survey header)")
    e.add_argument("--json", help="write a JSON detail record here")
    e.set_defaults(func=cmd_estimate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (ValueError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

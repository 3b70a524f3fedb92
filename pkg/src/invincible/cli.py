"""Command-line entry point: ``invincible <subcommand> ...``.

Machine-readable output goes to stdout (or ``--out``), one-line human
summaries go to stderr.  Exit codes: 0 success, 1 a verification or property
check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import evolution as evo
from .invincibility import (CloudGrid, classify_edge_case, cloud_summary, corner_pattern,
                            find_counterexample, is_invincible_with_opening,
                            sample_cloud, verify_invincible_empirically, write_cloud_csv)
from .markov import stationary_analytic
from .strategies import (DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, StrategyError,
                         fit_extortion, format_literal, is_invincible,
                         is_semi_cooperative_invincible, is_zero_determinant, named_catalog,
                         parse_literal, parse_rule, strategy_from_mapping, zd_residual)
from .tournament import MatchConfig, play_match, run_tournament, write_trajectory_csv
from .verification import run_suite

SCHEMA_VERSION = 1
SEED_ENV = "INVINCIBLE_SEED"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _payoffs(text: Optional[str]) -> PayoffMatrix:
    if text is None:
        return DEFAULT_PAYOFFS
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--payoffs needs T,R,P,S, got {text!r}")
    try:
        return PayoffMatrix(*(float(x) for x in parts))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _literal(text: str) -> MemoryOneStrategy:
    rule = parse_rule(text)
    if not isinstance(rule, MemoryOneStrategy):
        raise UsageError(f"{text!r} is not a memory-one strategy")
    return rule


def _emit(doc_or_text, out: Optional[str]):
    text = doc_or_text if isinstance(doc_or_text, str) else json.dumps(doc_or_text, indent=2)
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _note(msg: str):
    print(msg, file=sys.stderr)


def _doc(config: dict, **body) -> dict:
    return {"schema_version": SCHEMA_VERSION, "config": config, **body}


# -- subcommands ------------------------------------------------------------------------

def cmd_classify(args) -> int:
    payoffs = _payoffs(args.payoffs)
    s = parse_literal(args.strategy)
    fit = fit_extortion(s, payoffs)
    corner = corner_pattern(s)
    doc = _doc({"payoffs": payoffs.as_dict()},
               strategy=format_literal(s),
               invincible=is_invincible_with_opening(s),
               conditions_hold=is_invincible(s),
               edge_case=corner.as_dict() if corner else None,
               zero_determinant=is_zero_determinant(s, payoffs),
               zd_residual=zd_residual(s, payoffs),
               extortionate={"chi": fit.chi, "phi": fit.phi} if fit else None,
               semi_cooperative_invincible=is_semi_cooperative_invincible(s))
    _emit(doc, args.out)
    _note(f"{format_literal(s)}: invincible={doc['invincible']} ZD={doc['zero_determinant']}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    payoffs = _payoffs(args.payoffs)
    p, q = _literal(args.p), _literal(args.q)
    res = stationary_analytic(p, q, payoffs)
    edge = classify_edge_case(p, q, payoffs)
    doc = _doc({"payoffs": payoffs.as_dict()}, p=format_literal(p), q=format_literal(q),
               **res.as_dict(), edge_case=edge.case_id.value, verdict=edge.verdict.value)
    _emit(doc, args.out)
    _note(f"v={[round(float(x), 4) for x in res.v]} winner={res.winner} method={res.method}")
    return EXIT_OK


def cmd_cloud(args) -> int:
    payoffs = _payoffs(args.payoffs)
    p = _literal(args.p)
    grid = CloudGrid(step=args.step, n_random=args.random, seed=args.seed)
    samples = sample_cloud(p, grid, payoffs)
    summary = cloud_summary(samples)
    if args.format == "csv":
        _emit(write_cloud_csv(samples), args.out)
    else:
        config = {"p": format_literal(p), "step": grid.step, "n_random": grid.n_random,
                  "seed": grid.seed, "payoffs": payoffs.as_dict()}
        _emit(_doc(config, **summary), args.out)
    _note(f"{summary['n']} opponents, {summary['fraction_above_diagonal']:.4f} "
          f"with v3 >= v2, worst margin {summary['worst_margin']:.3g}")
    return EXIT_OK


def cmd_counterexample(args) -> int:
    payoffs = _payoffs(args.payoffs)
    p = _literal(args.p)
    ce = find_counterexample(p, payoffs, budget=args.budget, seed=args.seed)
    config = {"p": format_literal(p), "budget": args.budget, "seed": args.seed,
              "payoffs": payoffs.as_dict()}
    body = {"found": ce is not None}
    if ce is not None:
        body.update(q=format_literal(ce.q), sX=ce.sx, sY=ce.sy)
    _emit(_doc(config, **body), args.out)
    _note(f"counterexample: {body.get('q', 'none within budget')}")
    return EXIT_OK


def read_roster(path: str) -> list:
    """One catalog name or ``p0:p1,p2,p3,p4`` literal per line; ``#`` starts a comment."""
    roster = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rule = parse_rule(line)
            roster.append((rule.label if ":" in line else line, rule))
    return roster


def cmd_tournament(args) -> int:
    payoffs = _payoffs(args.payoffs)
    roster = read_roster(args.roster) if args.roster else named_catalog()
    cfg = MatchConfig(rounds=args.rounds, seed=args.seed, payoffs=payoffs)
    if args.trajectory:
        names = dict(roster)
        x, y = (names.get(n) or parse_rule(n) for n in args.trajectory.split(","))
        traced = MatchConfig(args.rounds, args.seed, payoffs, record_trajectory=True)
        _emit(write_trajectory_csv(play_match(x, y, traced).trajectory), args.out)
        return EXIT_OK
    report = run_tournament(roster, cfg, replicates=args.seeds)
    _emit(report.to_json(), args.out)
    for name in report.ranking[:5]:
        rec = report.record(name)
        _note(f"{name}: {rec['wins']}W {rec['ties']}T {rec['losses']}L")
    return EXIT_OK


def load_scenario(path: str) -> tuple[evo.Population, dict]:
    """YAML (or JSON) scenario: ``population`` or ``parties``, plus optional ``config``."""
    doc = yaml.safe_load(Path(path).read_text()) or {}

    def groups(entries):
        return [(strategy_from_mapping(e), int(e.get("count", 1))) for e in entries]

    if "parties" in doc:
        parties = doc["parties"]
        pop = evo.Population.two_party(groups(parties["A"]), groups(parties["B"]))
    elif "population" in doc:
        pop = evo.Population.well_mixed(groups(doc["population"]))
    else:
        raise UsageError("scenario needs a 'population' list or 'parties' with A and B")
    return pop, dict(doc.get("config") or {})


_CONFIG_KEYS = {"steps", "rounds", "seed", "intensity", "mutation", "mode", "replicates"}


def cmd_evolve(args) -> int:
    payoffs = _payoffs(args.payoffs)
    pop, file_cfg = load_scenario(args.scenario)
    unknown = set(file_cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown scenario config keys: {sorted(unknown)}")
    for key in ("steps", "seed", "mode", "intensity"):
        value = getattr(args, key)
        if value is not None:
            file_cfg[key] = value
    file_cfg.setdefault("seed", _default_seed())
    try:
        cfg = evo.EvolutionConfig(payoffs=payoffs, **file_cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    cache = evo.PayoffCache()
    lines, winners = [], {}
    for k in range(args.runs):
        run_cfg = evo.EvolutionConfig(**{**cfg.__dict__, "seed": cfg.seed + k})
        trace = evo.run_evolution(pop, run_cfg, cache)
        key = ",".join(f"{p}={w}" for p, w in sorted(trace.fixed.items())) if trace.fixed else "none"
        winners[key] = winners.get(key, 0) + 1
        csv_text = evo.write_trace_csv(trace, run=k if args.runs > 1 else None)
        lines.append(csv_text if k == 0 else csv_text.split("\n", 1)[1])
    _emit("".join(lines), args.out)
    summary = _doc({k: v for k, v in cfg.__dict__.items() if k != "payoffs"}
                   | {"payoffs": payoffs.as_dict(), "runs": args.runs, "size": pop.size,
                      "bipartite": pop.bipartite},
                   fixations=winners)
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n")
    _note(f"fixations over {args.runs} runs: {winners}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    passed = all(r.passed for r in results)
    _emit(_doc({"suite": args.suite}, passed=passed, results=[r.as_dict() for r in results]),
          args.out)
    for r in results:
        line = f"{r.name}: {'pass' if r.passed else 'FAIL'} n={r.n_checked} worst={r.worst:.3g}"
        if r.witness:
            line += f" witness={r.witness}"
        _note(line)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_check(args) -> int:
    """Empirical invincibility check of one strategy against a sampled panel."""
    payoffs = _payoffs(args.payoffs)
    rep = verify_invincible_empirically(_literal(args.p), payoffs, args.samples, args.seed)
    _emit(_doc({"samples": args.samples, "seed": args.seed}, **rep.as_dict()), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- parser -----------------------------------------------------------------------------

def build_parser(default_seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invincible",
                                     description="Memory-one IPD strategy analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--payoffs", help="T,R,P,S (default 5,3,1,0)")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.set_defaults(func=fn)
        return sp

    sp = add("classify", cmd_classify, "invincible / ZD / extortion flags for a strategy")
    sp.add_argument("strategy", help="p0:p1,p2,p3,p4")

    sp = add("analyze", cmd_analyze, "stationary distribution of a pair")
    sp.add_argument("p")
    sp.add_argument("q")

    sp = add("cloud", cmd_cloud, "(v2, v3) for a grid of opponents")
    sp.add_argument("p")
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--random", type=int, default=0, help="extra random opponents")
    sp.add_argument("--seed", type=int, default=default_seed)
    sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = add("counterexample", cmd_counterexample, "search for an opponent that beats p")
    sp.add_argument("p")
    sp.add_argument("--budget", type=int, default=10 ** 5)
    sp.add_argument("--seed", type=int, default=default_seed)

    sp = add("tournament", cmd_tournament, "round-robin tournament")
    sp.add_argument("--roster", help="file with one name or literal per line (default: catalog)")
    sp.add_argument("--rounds", type=int, default=1000)
    sp.add_argument("--seeds", type=int, default=10, help="replicates per pairing")
    sp.add_argument("--seed", type=int, default=default_seed)
    sp.add_argument("--trajectory", metavar="X,Y", help="emit one match's running distribution as CSV")

    sp = add("evolve", cmd_evolve, "Moran-process evolution from a scenario file")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--runs", type=int, default=1)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--intensity", type=float)
    sp.add_argument("--mode", choices=evo.MODES)
    sp.add_argument("--summary", help="also write a JSON summary of fixations here")

    sp = add("verify", cmd_verify, "run a property suite")
    sp.add_argument("suite", choices=["theorem1", "theorem2", "theorem4", "theorem5",
                                      "akin", "oracle", "all"])

    sp = add("check", cmd_check, "empirical invincibility check against sampled opponents")
    sp.add_argument("p")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=default_seed)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser(_default_seed())
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_USAGE
        return args.func(args)
    except (UsageError, StrategyError, KeyError, FileNotFoundError, yaml.YAMLError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        _note(f"error: {msg}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

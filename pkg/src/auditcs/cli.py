"""Command-line front door: simulations, file-driven audits, the API server.

Subcommands:

    simulate  run a scenario's trials and write summary.json/trials.csv/widths.csv
    sweep-cv  paired control-variate gain sweep over mixture coefficients
    audit     run one session against a population CSV; auto-answers from a
              true_f column when present, otherwise prompts per drawn item
    replay    restore a session JSON and print its interval trace
    serve     start the HTTP session service

All randomness flows through --seed; when an audit has to choose its own seed
the chosen value is printed so the run can be reproduced. Errors are emitted
as single machine-parseable lines `error: <kind>: <detail>`; exit codes are
0 (success), 1 (runtime error), 2 (usage error).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .confseq import CS_FAMILIES, canonical_family
from .engine import (
    STATUS_EXHAUSTED,
    SessionConfig,
    create_session,
    restore_session,
)
from .errors import AuditError, ValidationError
from .population import load_population_csv
from .rng import fresh_seed
from .sampling import STRATEGY_KINDS, SamplingStrategy
from .simulator import ScenarioConfig, cv_gain_sweep, run_trials

_CS_CHOICES = tuple(CS_FAMILIES) + ("eb",)
_DEFAULT_C_VALUES = "0.1,0.3,0.5,0.7,0.9"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems through the error contract."""

    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="auditcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    sim = sub.add_parser("simulate", help="run scenario trials and write results")
    sim.add_argument("--config", required=True, help="scenario JSON file")
    sim.add_argument("--out", required=True, help="output directory")
    _add_override_flags(sim)
    sim.add_argument("--trials", type=int)

    sweep = sub.add_parser("sweep-cv", help="paired control-variate gain sweep")
    sweep.add_argument("--config", required=True, help="scenario JSON file")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument(
        "--c-values",
        default=_DEFAULT_C_VALUES,
        help=f"comma-separated mixture coefficients (default {_DEFAULT_C_VALUES})",
    )
    _add_override_flags(sweep)
    sweep.add_argument("--trials", type=int)

    audit = sub.add_parser("audit", help="audit one population CSV")
    audit.add_argument("--population", required=True, help="population CSV file")
    audit.add_argument("--epsilon", type=float, required=True)
    audit.add_argument("--delta", type=float, required=True)
    audit.add_argument("--strategy", required=True, choices=STRATEGY_KINDS)
    audit.add_argument("--cs", default="betting", choices=_CS_CHOICES)
    audit.add_argument("--control-variates", action="store_true", default=False)
    audit.add_argument("--batch-size", type=int, default=1)
    audit.add_argument("--grid", type=int, default=None)
    audit.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("replay", help="restore a session JSON, print its trace")
    rep.add_argument("--config", required=True, help="session JSON document")
    rep.add_argument("--population", help="population CSV if not embedded")

    srv = sub.add_parser("serve", help="start the HTTP session service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--out", help="directory for session persistence")

    return parser


def _add_override_flags(cmd) -> None:
    """Scenario overrides; None means `keep the config file's value`."""
    cmd.add_argument("--epsilon", type=float, default=None)
    cmd.add_argument("--delta", type=float, default=None)
    cmd.add_argument("--strategy", choices=STRATEGY_KINDS, default=None)
    cmd.add_argument("--cs", choices=_CS_CHOICES, default=None)
    cmd.add_argument("--control-variates", action="store_true", default=None)
    cmd.add_argument("--batch-size", type=int, default=None)
    cmd.add_argument("--grid", type=int, default=None)
    cmd.add_argument("--seed", type=int, default=None)


def _scenario_from_args(args) -> ScenarioConfig:
    scenario = ScenarioConfig.from_json_file(args.config)
    overrides = {}
    for flag, field_name in [
        ("epsilon", "epsilon"),
        ("delta", "delta"),
        ("strategy", "strategy"),
        ("cs", "cs_family"),
        ("control_variates", "control_variates"),
        ("batch_size", "batch_size"),
        ("grid", "grid_size"),
        ("seed", "seed"),
        ("trials", "trials"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    if "cs_family" in overrides:
        overrides["cs_family"] = canonical_family(overrides["cs_family"])
    return replace(scenario, **overrides) if overrides else scenario


def _fmt_interval(lo: float, hi: float) -> str:
    return f"[{lo!r}, {hi!r}]"


def _cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    result = run_trials(scenario)
    print(f"trials={scenario.trials}")
    print(f"mean_tau={result.mean_tau!r}")
    print(f"median_tau={float(np.median(result.taus))!r}")
    print(f"miscoverage_rate={result.miscoverage_rate!r}")
    result.write(args.out)
    out = Path(args.out)
    for name in ("summary.json", "trials.csv", "widths.csv"):
        print(f"wrote {out / name}")
    return 0


def _parse_c_values(text: str):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad --c-values: {exc}") from exc
    if not values:
        raise ValidationError("--c-values must name at least one coefficient")
    return values


def _cmd_sweep_cv(args) -> int:
    scenario = _scenario_from_args(args)
    c_values = _parse_c_values(args.c_values)
    sweep = cv_gain_sweep(scenario, c_values)
    for c in c_values:
        print(
            f"c={c!r} mean_ratio={sweep.mean_ratio(c)!r} "
            f"mean_tau_cv={float(sweep.taus_cv[c].mean())!r} "
            f"mean_tau_plain={float(sweep.taus_plain[c].mean())!r}"
        )
    sweep.write(args.out)
    out = Path(args.out)
    for name in ("summary.json", "ratios.csv"):
        print(f"wrote {out / name}")
    return 0


def _session_config_from_args(args, seed: int) -> SessionConfig:
    kwargs = dict(
        epsilon=args.epsilon,
        delta=args.delta,
        strategy=SamplingStrategy(args.strategy),
        cs_family=canonical_family(args.cs),
        control_variates=args.control_variates,
        batch_size=args.batch_size,
        seed=seed,
    )
    if args.grid is not None:
        kwargs["grid_size"] = args.grid
    return SessionConfig(**kwargs)


def _prompt_fraction(session, index: int) -> float:
    item_id = session.population.ids[index]
    weight = float(session.population.weights[index])
    prompt = f"t={session.t + 1} audit index {item_id} (weight {weight!r}), enter f: "
    while True:
        try:
            line = input(prompt)
        except EOFError:
            raise ValidationError("stdin closed before the audit finished") from None
        try:
            value = float(line.strip())
        except ValueError:
            print(f"error: validation: {line.strip()!r} is not a number", file=sys.stderr)
            continue
        if not (0.0 <= value <= 1.0):
            print("error: validation: f must lie in [0, 1]", file=sys.stderr)
            continue
        return value


def _cmd_audit(args) -> int:
    population = load_population_csv(args.population)
    seed = args.seed
    if seed is None:
        seed = fresh_seed()
        print(f"seed={seed}")
    config = _session_config_from_args(args, seed)
    session = create_session(population, config)
    oracle = population.truth is not None
    while session.status != STATUS_EXHAUSTED and session.stopped_at is None:
        indices = session.next_draw()
        if oracle:
            fs = [float(population.truth[i]) for i in indices]
        else:
            fs = [_prompt_fraction(session, i) for i in indices]
        result = session.record_observation(fs)
        lo, hi = result.interval
        print(f"t={result.t} interval={_fmt_interval(lo, hi)} width={result.width!r}")
    tau = session.stopped_at if session.stopped_at is not None else session.t
    combined = session.intervals.combined
    print(f"tau={tau}")
    print(f"interval={_fmt_interval(combined.lo, combined.hi)}")
    print(f"status={session.status}")
    if args.epsilon < 1.0:
        print(f"decision={session.test_assertion(args.epsilon)}")
    return 0


def _cmd_replay(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON: {exc}") from exc
    population = load_population_csv(args.population) if args.population else None
    session = restore_session(doc, population=population)
    for row in session.trace:
        print(
            f"t={row['t']} interval={_fmt_interval(row['lo'], row['hi'])} "
            f"width={row['width']!r}"
        )
    tau = session.stopped_at if session.stopped_at is not None else session.t
    print(f"tau={tau}")
    print(f"status={session.status}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(store_dir=args.out)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "sweep-cv": _cmd_sweep_cv,
    "audit": _cmd_audit,
    "replay": _cmd_replay,
    "serve": _cmd_serve,
}


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.subcommand is None:
        print("error: usage: a subcommand is required", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.subcommand](args)
    except AuditError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

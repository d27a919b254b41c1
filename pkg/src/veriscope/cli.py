"""``veriscope`` command line: eval, mes, risky, reduce, baseline, experiment.

Every flag can also come from a ``--config`` file of ``key = value`` lines
(keys are flag names without the leading dashes); flags given on the
command line win.  Exit codes: 0 success, 2 input/config errors, 3 unmet
preconditions such as MES of an output with an unknown label.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .experiments import (
    SCENARIOS,
    Strategy,
    f1_auc,
    f1_from_labels,
    mes_log_ratio,
    output_truths,
    run_comparison,
)
from .mes import MesPreconditionError, averaged_mes, mes
from .model import DESError, format_label
from .provenance import ProvenanceError, serialize
from .query import QueryError, evaluate_with_provenance, output_names, parse_query
from .reduce import BASELINES, ReduceConfig, ReductionTrace, mes_reduce, re_verify, run_baseline
from .risky import RiskLimits, RiskPreconditionError, classify_tuples
from .verifier import FIXED_ORACLE, MAJORITY_VOTE, Budget, VerifierError, VerifierModel

EXIT_INPUT = 2
EXIT_PRECONDITION = 3


class ConfigError(ValueError):
    pass


# -- argument parsing ------------------------------------------------------------


def _common(p: argparse.ArgumentParser, truth: bool = False) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for any flag")
    p.add_argument("--schema", required=True, help="schema JSON file")
    p.add_argument("--relations", help="directory of relation CSVs (default: schema's directory)")
    p.add_argument("--labels", help="labels CSV (tuple_id,label,err)")
    p.add_argument("--query", required=True, help="SQL query file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--truth", required=truth, help="ground-truth CSV (tuple_id,label)")


def _verifier_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--verifier", choices=[MAJORITY_VOTE, FIXED_ORACLE], default=MAJORITY_VOTE)
    p.add_argument("--worker-error", type=float, default=0.3, help="per-vote error of a majority-vote verifier")
    p.add_argument("--oracle-error", type=float, default=0.0, help="error probability of a fixed oracle")
    p.add_argument("--vote-cap", type=int, default=10001)


def _reduce_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--outputs", help="comma-separated 1-based output ids (default: all)")
    _verifier_flags(p)


def _risk_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-candidates", type=int, default=64)
    p.add_argument("--deadline", type=float, default=10.0, help="seconds per risky-tuple search")


def _mes_reduce_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=1)
    p.add_argument("--mu", type=int, default=50)
    p.add_argument("--reverify-target", type=float, default=0.3)
    _risk_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veriscope", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a query with provenance")
    _common(p)

    p = sub.add_parser("mes", help="MES of every (or one) output")
    _common(p)
    p.add_argument("--output", type=int, help="1-based output id (default: all)")
    p.add_argument("--reverify", action="store_true", help="label unknown-output provenance first (needs --truth)")
    p.add_argument("--reverify-target", type=float, default=0.3)
    p.add_argument("--budget", type=int, default=1000, help="votes available for --reverify")
    _verifier_flags(p)

    p = sub.add_parser("risky", help="classify the input tuples of one output")
    _common(p)
    p.add_argument("--output", type=int, required=True, help="1-based output id")
    p.add_argument("--impairing", action="store_true", help="also probe just below each error (heuristic)")
    _risk_flags(p)

    p = sub.add_parser("reduce", help="run MESReduce")
    _common(p, truth=True)
    _reduce_flags(p)
    _mes_reduce_flags(p)

    p = sub.add_parser("baseline", help="run a baseline strategy")
    _common(p, truth=True)
    _reduce_flags(p)
    p.add_argument("--strategy", choices=BASELINES, required=True)
    p.add_argument("--p", type=float, default=0.01, help="target error probability per verified tuple")

    p = sub.add_parser("experiment", help="paired comparison of strategies over scenarios")
    _common(p)
    _reduce_flags(p)
    _mes_reduce_flags(p)
    p.add_argument("--scenario", default="avg", help="comma list of wcs, avg, rlbl")
    p.add_argument("--strategies", default="all", help="all, mesreduce, random, random:0.01, ...")
    p.add_argument("--repeats", type=int, default=30)
    return parser


def _read_config(path: str) -> list[tuple[str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{n}: expected key = value")
        pairs.append((key.strip().replace("_", "-"), value.strip()))
    return pairs


def _expand_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Splice config-file entries in as flags ahead of the command-line flags."""
    cfg = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            cfg = argv[i + 1]
        elif a.startswith("--config="):
            cfg = a.split("=", 1)[1]
    if cfg is None or not argv:
        return argv
    command = argv[0]
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices.get(command)
    if sub is None:
        return argv
    flags = {opt: act for act in sub._actions for opt in act.option_strings}
    extra = []
    for key, value in _read_config(cfg):
        act = flags.get("--" + key)
        if act is None or key == "config":
            raise ConfigError(f"{cfg}: unknown key {key!r} for command {command!r}")
        if isinstance(act, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append("--" + key)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"{cfg}: {key} expects true or false")
        else:
            extra += ["--" + key, value]
    return [command] + extra + argv[1:]


# -- shared loading ------------------------------------------------------------


def _load(args):
    des = io.load_database(args.schema, args.relations, args.labels)
    try:
        text = Path(args.query).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read query {args.query}: {exc.strerror}") from None
    plan = parse_query(text, des)
    outputs = evaluate_with_provenance(des, plan)
    truth = io.load_truth(args.truth) if getattr(args, "truth", None) else None
    if truth is not None:
        missing = [t for t in des.tuple_ids if t not in truth]
        if missing:
            raise ConfigError(f"ground truth missing for tuples {missing[:5]}")
    return des, plan, outputs, truth


def _model(args) -> VerifierModel:
    if args.verifier == FIXED_ORACLE:
        return VerifierModel(FIXED_ORACLE, args.oracle_error, args.vote_cap)
    return VerifierModel(MAJORITY_VOTE, args.worker_error, args.vote_cap)


def _pick(outputs, spec: Optional[str]) -> list[int]:
    if not spec:
        return list(range(len(outputs)))
    idx = []
    for part in spec.split(","):
        k = int(part)
        if not 1 <= k <= len(outputs):
            raise ConfigError(f"output id {k} out of range 1..{len(outputs)}")
        idx.append(k - 1)
    return idx


def _values(o) -> list[str]:
    return [io.render_value(v) for v in o.values]


def _out(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- commands ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    des, plan, outputs, _ = _load(args)
    names = list(output_names(plan))
    d = _out(args)
    io.write_csv(d / "outputs.csv", ["output_id"] + names, ([i + 1] + _values(o) for i, o in enumerate(outputs)))
    io.write_csv(
        d / "provenance.csv",
        ["output_id"] + names + ["provenance", "derived"],
        ([i + 1] + _values(o) + [serialize(o.prov), format_label(o.derived)] for i, o in enumerate(outputs)),
    )
    return 0


def cmd_mes(args) -> int:
    des, plan, outputs, truth = _load(args)
    chosen = [args.output - 1] if args.output else list(range(len(outputs)))
    if args.output and not 1 <= args.output <= len(outputs):
        raise ConfigError(f"output id {args.output} out of range 1..{len(outputs)}")
    if args.reverify:
        if truth is None:
            raise ConfigError("--reverify needs --truth to simulate the verifier")
        outcome = re_verify(des, [outputs[i] for i in chosen], Budget(args.budget), truth, _model(args),
                            np.random.default_rng(args.seed), args.reverify_target)
        des = outcome.des
        outputs = [o.relabel(des) for o in outputs]
    rows = []
    for i in chosen:
        o = outputs[i]
        s = mes(des, o)
        rows.append([i + 1] + _values(o) + [
            format_label(o.derived), io.fmt_num(s.value), io.fmt_num(s.log_value),
            io.fmt_num(averaged_mes(s.value, s.n_factors)), io.fmt_world(s.witness), s.method,
        ])
    names = list(output_names(plan))
    io.write_csv(_out(args) / "mes.csv",
                 ["output_id"] + names + ["derived", "mes", "log_mes", "averaged_mes", "witness", "method"], rows)
    return 0


def cmd_risky(args) -> int:
    des, _, outputs, _ = _load(args)
    if not 1 <= args.output <= len(outputs):
        raise ConfigError(f"output id {args.output} out of range 1..{len(outputs)}")
    reports = classify_tuples(des, outputs[args.output - 1], RiskLimits(args.max_candidates, args.deadline),
                              impairing=args.impairing)
    io.write_csv(
        _out(args) / "risky.csv",
        ["tuple_id", "classification", "baseline_mes", "zero_err_mes", "probed_q", "method", "impairing"],
        ([r.tuple_id, r.classification, io.fmt_num(r.baseline_mes), io.fmt_num(r.zero_err_mes),
          io.fmt_num(r.probed_q), r.method, "" if r.impairing is None else int(r.impairing)] for r in reports),
    )
    return 0


def _write_trace(path: Path, trace: ReductionTrace, actual: Optional[list[int]]) -> None:
    rows = []
    for s in trace.steps:
        f1 = io.fmt_num(f1_from_labels(s.derived, actual)[2]) if actual is not None else ""
        rows.append([
            s.index, s.cost, s.action, " ".join(map(str, s.verified)), " ".join(map(str, s.changed)),
            io.fmt_num(s.target_p), io.fmt_num(s.max_mes), io.fmt_num(s.max_log_mes),
            " ".join(format_label(d) for d in s.derived), f1,
        ])
    io.write_csv(path, ["step", "cost", "action", "verified", "changed", "target_p", "max_mes", "max_log_mes",
                        "derived", "f1"], rows)


def _json_num(x):
    if x is None or not isinstance(x, float) or math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def _finish_run(args, result, outputs, truth) -> int:
    d = _out(args)
    actual = output_truths(outputs, truth)
    trace = result.trace
    _write_trace(d / "trace.csv", trace, actual)
    io.write_labels(result.des, d / "labels_final.csv")
    summary = {
        "strategy": trace.strategy,
        "termination": trace.termination,
        "budget": trace.budget,
        "cost": trace.cost,
        "steps": len(trace.steps) - 1,
        "initial_max_mes": trace.steps[0].max_mes,
        "final_max_mes": trace.steps[-1].max_mes,
        "mes_log_ratio": _json_num(mes_log_ratio(trace)),
        "f1_auc": f1_auc(trace, actual),
        "seed": args.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    (d / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_reduce(args) -> int:
    des, _, outputs, truth = _load(args)
    chosen = [outputs[i] for i in _pick(outputs, args.outputs)]
    config = ReduceConfig(args.theta, args.top_k, args.mu, RiskLimits(args.max_candidates, args.deadline),
                          args.reverify_target)
    result = mes_reduce(des, chosen, args.budget, truth, _model(args), config, np.random.default_rng(args.seed))
    return _finish_run(args, result, chosen, truth)


def cmd_baseline(args) -> int:
    des, _, outputs, truth = _load(args)
    chosen = [outputs[i] for i in _pick(outputs, args.outputs)]
    result = run_baseline(args.strategy, args.p, des, chosen, args.budget, truth, _model(args),
                          np.random.default_rng(args.seed))
    return _finish_run(args, result, chosen, truth)


def cmd_experiment(args) -> int:
    des, _, outputs, truth = _load(args)
    chosen = [outputs[i] for i in _pick(outputs, args.outputs)]
    kinds = [k.strip().upper() for k in args.scenario.split(",") if k.strip()]
    for k in kinds:
        if k not in SCENARIOS:
            raise ConfigError(f"unknown scenario {k!r}")
    rlbl = None
    if "RLBL" in kinds:
        if truth is None or not args.labels:
            raise ConfigError("the RLBL scenario needs --labels and --truth")
        rlbl = {"labels": dict(des.labels), "errs": dict(des.errs), "truth": truth}
    strategies = Strategy.parse(args.strategies)
    config = ReduceConfig(args.theta, args.top_k, args.mu, RiskLimits(args.max_candidates, args.deadline),
                          args.reverify_target)
    reports = run_comparison(des, chosen, kinds, strategies, args.budget, args.repeats, args.seed, _model(args),
                             config, args.jobs, rlbl)
    d = _out(args)
    agg, curves = [], []
    for rep in reports:
        agg.append([rep.strategy, rep.scenario, "mean_mes_log_ratio", io.fmt_num(rep.mean_log_ratio)])
        agg.append([rep.strategy, rep.scenario, "worst_f1_auc", io.fmt_num(rep.worst_f1_auc)])
        for run in rep.runs:
            for cost, f1 in run.curve:
                curves.append([rep.strategy, rep.scenario, run.repeat, cost, io.fmt_num(f1)])
            name = f"{rep.scenario.lower()}_{rep.strategy.replace(':', '_')}_r{run.repeat}.csv"
            _write_trace(d / "runs" / name, run.trace, None)
    io.write_csv(d / "aggregate.csv", ["strategy", "scenario", "metric", "value"], agg)
    io.write_csv(d / "curves.csv", ["strategy", "scenario", "repeat", "cost", "f1"], curves)
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "mes": cmd_mes,
    "risky": cmd_risky,
    "reduce": cmd_reduce,
    "baseline": cmd_baseline,
    "experiment": cmd_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(parser, argv)
    except ConfigError as exc:
        print(f"veriscope: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    if args.jobs < 1:
        print("veriscope: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (MesPreconditionError, RiskPreconditionError) as exc:
        print(f"veriscope: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, DESError, QueryError, ProvenanceError, VerifierError, ValueError, OSError) as exc:
        print(f"veriscope: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

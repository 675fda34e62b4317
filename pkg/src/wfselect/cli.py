"""Command-line experiment runner.

Usage examples::

    wfselect scenario ii --replicates 100000 --seed 7 --out ii.csv --check
    wfselect audit --format json
    wfselect sample-prob --n1 3 --n2 10000 --theta1 0.2 --theta2 0.5 --beta -5
    wfselect posterior-sample --n1 2 --n2 10000 --theta1 0.3 --theta2 0.5 --beta -5000 --size 10

A config file is one JSON object with the fields of
:class:`~wfselect.experiments.ExperimentConfig`; command-line flags
override it. Results are written as CSV (RFC 4180 quoting via the
``csv`` module, floats with 17 significant digits) or JSON, with the
column order fixed by :data:`COLUMNS`.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import asg
from ._random import replicate_rng
from .ancestry import ReplicateError
from .experiments import (COLUMNS, SCENARIOS, ConfigError, ExperimentConfig, ResultTable, Row,
                          run)
from .stationary import ModelParams, SampleCounts, SamplerError, posterior_sample, sampling_prob

__all__ = ["COLUMNS", "ExperimentConfig", "ResultTable", "Row", "emit", "main", "read_table",
           "run"]

EXIT_OK, EXIT_FAILED_CHECK, EXIT_BAD_CONFIG, EXIT_SIM_ERROR = 0, 1, 2, 3


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit(table: ResultTable, fmt: str = "csv") -> str:
    """Render a table as CSV or JSON text."""
    recs = table.records()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in recs:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        doc = {"scenario": table.scenario, "seed": table.seed, "columns": list(COLUMNS),
               "rows": [[r[c] for c in COLUMNS] for r in recs]}
        return json.dumps(doc, indent=1, allow_nan=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def read_table(text: str, fmt: str = "csv") -> ResultTable:
    """Parse text produced by :func:`emit`."""
    if fmt == "json":
        doc = json.loads(text)
        recs = [dict(zip(doc["columns"], row)) for row in doc["rows"]]
        return ResultTable.from_records(doc["scenario"], doc["seed"], recs)
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return ResultTable("", 0)

    def opt(s, conv):
        return None if s == "" else conv(s)

    recs = [{"statistic": r["statistic"], "value": float(r["value"]), "se": opt(r["se"], float),
             "replicates": opt(r["replicates"], int), "threshold": opt(r["threshold"], str),
             "passed": opt(r["passed"], lambda s: s == "true")} for r in rows]
    return ResultTable.from_records(rows[0]["scenario"], int(rows[0]["seed"]), recs)


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _parse_value(s: str):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def _key_values(items, flag) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"{flag} expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


def _build_config(scenario: str, ns: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if ns.config:
        try:
            base = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {ns.config}: {e}") from e
        if not isinstance(base, dict):
            raise ConfigError("config must be a JSON object")
        if base.get("scenario", scenario) != scenario:
            raise ConfigError(f"config is for scenario {base['scenario']!r}, not {scenario!r}")
    base["scenario"] = scenario
    for name in ("seed", "replicates", "dt", "out", "format", "threads"):
        v = getattr(ns, name)
        if v is not None:
            base[name] = v
    if ns.counts is not None:
        base["counts"] = ns.counts
    base["params"] = {**base.get("params", {}), **_key_values(ns.param, "--param")}
    base["options"] = {**base.get("options", {}), **_key_values(ns.option, "--option")}
    return ExperimentConfig.from_dict(base)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--seed", type=int, help="64-bit seed (default 1)")
    p.add_argument("--replicates", type=int, help="number of replicates")
    p.add_argument("--dt", type=float, help="time step for path simulation")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("--check", action="store_true",
                   help="exit with status 1 if any thresholded statistic fails")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--counts", type=int, nargs=2, metavar=("N1", "N2"), help="sample counts")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="model parameter override, e.g. beta=-5 (repeatable)")
    p.add_argument("--option", action="append", metavar="KEY=VALUE",
                   help="scenario option override (repeatable)")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--theta1", type=float, required=True)
    p.add_argument("--theta2", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfselect",
        description="Simulate and evaluate rare-allele ancestry under selection and mutation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="run a named experiment")
    p.add_argument("name", choices=SCENARIOS)
    _add_common(p)
    for name, scen, text in (("asg", "asg_crosscheck", "ASG versus random-background cross-check"),
                             ("moran", "moran", "birth-death and Moran bridge checks"),
                             ("audit", "asymptotics_audit", "large-parameter error ladders")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.set_defaults(name=scen)
    p = sub.add_parser("asg-rates", help="print the conditional ASG rate table of one state")
    p.add_argument("--state", type=int, nargs=4, required=True, metavar=("R1", "R2", "V1", "V2"))
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--pi1", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--mode", choices=("reduced", "full"), default="reduced")

    p = sub.add_parser("sample-prob", help="exact log sampling probability")
    _model_args(p)
    p = sub.add_parser("posterior-sample", help="draws from the posterior of the A1 frequency")
    _model_args(p)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


def _cmd_experiment(ns) -> int:
    cfg = _build_config(ns.name, ns)
    try:
        table = run(cfg)
    except ReplicateError as e:
        print(f"wfselect: simulation error in {cfg.scenario}: {e}", file=sys.stderr)
        return EXIT_SIM_ERROR
    _write(emit(table, cfg.format), cfg.out)
    for r in table.checks:
        if not r.passed:
            print(f"FAIL {table.scenario}:{r.statistic} = {r.value:.6g} (need {r.threshold})",
                  file=sys.stderr)
    if ns.check and not table.passed:
        return EXIT_FAILED_CHECK
    return EXIT_OK


def _cmd_sample_prob(ns) -> int:
    counts = SampleCounts(ns.n1, ns.n2)
    params = ModelParams(ns.theta1, ns.theta2, ns.beta)
    lq = sampling_prob(counts, params)
    print(json.dumps({"n1": ns.n1, "n2": ns.n2, "theta1": ns.theta1, "theta2": ns.theta2,
                      "beta": ns.beta, "log_q": lq, "q": math.exp(lq)}))
    return EXIT_OK


def _cmd_posterior(ns) -> int:
    params = ModelParams(ns.theta1, ns.theta2, ns.beta)
    try:
        x = posterior_sample(SampleCounts(ns.n1, ns.n2), params, replicate_rng(ns.seed, 0),
                             size=ns.size)
    except SamplerError as e:
        print(f"wfselect: {e}", file=sys.stderr)
        return EXIT_SIM_ERROR
    _write("".join(format(float(v), ".17g") + "\n" for v in np.atleast_1d(x)), ns.out)
    return EXIT_OK


def _cmd_asg_rates(ns) -> int:
    mode = asg.AsgMode.Full if ns.mode == "full" else asg.AsgMode.Reduced
    text = asg.rate_table_json(asg.AsgState(*ns.state), asg.PimParams(ns.theta, ns.pi1),
                               ns.beta, mode)
    sys.stdout.write(text.rstrip("\n") + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "sample-prob":
            return _cmd_sample_prob(ns)
        if ns.command == "posterior-sample":
            return _cmd_posterior(ns)
        if ns.command == "asg-rates":
            return _cmd_asg_rates(ns)
        return _cmd_experiment(ns)
    except (ConfigError, ValueError) as e:
        print(f"wfselect: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())

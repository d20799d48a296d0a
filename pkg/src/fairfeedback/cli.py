"""
Command-line front end.

    fairfeedback score      tuples.json --attribute age
    fairfeedback synth      out.json [--spec synth.json]
    fairfeedback simulate   tuples.json --participants 75 --out feedback.json
    fairfeedback learn      tuples.json (--feedback feedback.json | --simulate)
    fairfeedback experiment --out-dir runs/
    fairfeedback report     runs/ [--out convergence.csv]

Every option may also come from ``--config file.json`` using the option name
with underscores (``precision_c``, ``learning_rate``, ...); flags given on the
command line win over the file.  Exit status: 0 ok, 1 runtime failure, 2 usage
or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from .data import SynthSpec, load_tuples, read_trace, synthesize_dataset, write_report, write_trace, write_tuples
from .errors import DataIOError, DomainError, FairFeedbackError, ParseError, SpecError, ValidationError
from .experiment import DEFAULT_POOL_SIZE, ExperimentGrid, run_experiment
from .fairness import ATTRIBUTES, GroupSpec, fairness_scores, is_scoreable
from .feedback import (
    NUM_SCORES,
    FeedbackParams,
    generate_population,
    normalize_scores,
    parse_scenario,
    scores_from_phibar,
)
from .saff import LearnerConfig, saff_learn_phibar, social_scores

log = logging.getLogger("fairfeedback")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
TRACE_RE = re.compile(r"^trace_(?P<attribute>[a-z]+)_N(?P<N>\d+)_M(?P<M>\d+)\.csv$")

_FEEDBACK_DEFAULTS = FeedbackParams()
COMMON_DEFAULTS = {
    "seed": 0,
    "precision_c": _FEEDBACK_DEFAULTS.precision,
    "temperature": _FEEDBACK_DEFAULTS.temperature,
    "learning_rate": LearnerConfig.learning_rate,
    "epochs": LearnerConfig.epochs,
    "score_mode": _FEEDBACK_DEFAULTS.score_mode,
}
COMMAND_DEFAULTS = {
    "score": {"attribute": "age", "out": None},
    "synth": {"spec": None, "num_tuples": None},
    "simulate": {"attribute": "age", "participants": 75, "scenario": "uniform_random"},
    "learn": {"attribute": "age", "participants": 75, "scenario": "uniform_random",
              "feedback": None, "simulate": False, "out_dir": "."},
    "experiment": {"participants": [25, 50, 75, 100], "tuples": [5, 10, 15], "iterations": 100,
                   "attributes": list(ATTRIBUTES), "scenario": "uniform_random",
                   "pool": None, "pool_size": DEFAULT_POOL_SIZE, "jobs": 1},
    "report": {"out": None},
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Options
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file of option values; flags override it")
    p.add_argument("--seed", type=int, default=S, help="master seed (default 0)")
    p.add_argument("--precision-c", type=float, default=S,
                   help=f"Beta precision c of perceived fairness (default {COMMON_DEFAULTS['precision_c']:g})")
    p.add_argument("--temperature", type=float, default=S,
                   help=f"logit temperature lambda (default {COMMON_DEFAULTS['temperature']:g})")
    p.add_argument("--learning-rate", type=float, default=S, help="gradient step delta (default 0.5)")
    p.add_argument("--epochs", type=int, default=S, help="learner epochs (default 100)")
    p.add_argument("--score-mode", choices=("argmax", "sampled"), default=S,
                   help="how simulated participants turn choice probabilities into a score")
    p.add_argument("-v", "--verbose", action="store_true", default=S)


def _attribute(p, S=argparse.SUPPRESS):
    p.add_argument("--attribute", choices=ATTRIBUTES, default=S, help="protected attribute (default age)")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="fairfeedback", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="fairness scores of a tuple file")
    p.add_argument("input")
    _attribute(p)
    p.add_argument("--out", default=S, help="report path (default: stdout)")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic tuple file")
    p.add_argument("out")
    p.add_argument("--spec", default=S, help="JSON generator spec; --seed overrides its seed")
    p.add_argument("--num-tuples", type=int, default=S)
    _common(p)

    p = sub.add_parser("simulate", help="simulate participant feedback on a tuple file")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="feedback file to write")
    _attribute(p)
    p.add_argument("--participants", type=int, default=S, help="population size N (default 75)")
    p.add_argument("--scenario", default=S,
                   help="uniform_random | fixed_atomic:<notion> | identical_split")
    _common(p)

    p = sub.add_parser("learn", help="learn the social preference vector")
    p.add_argument("input")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--feedback", default=S, help="feedback file (N x M Likert scores)")
    src.add_argument("--simulate", action="store_true", default=S,
                     help="simulate the population and its feedback internally")
    _attribute(p)
    p.add_argument("--participants", type=int, default=S)
    p.add_argument("--scenario", default=S)
    p.add_argument("--out-dir", default=S, help="where trace.csv and report.json go (default .)")
    _common(p)

    p = sub.add_parser(
        "experiment", help="run the simulation grid",
        description="Each iteration draws M distinct tuples from the pool; the pool is "
                    "reused across iterations, so draws overlap when the pool is smaller "
                    "than M x iterations.",
    )
    p.add_argument("--out-dir", required=True)
    p.add_argument("--participants", type=int, nargs="+", default=S, help="N grid (default 25 50 75 100)")
    p.add_argument("--tuples", type=int, nargs="+", default=S, help="M grid (default 5 10 15)")
    p.add_argument("--iterations", type=int, default=S, help="draws per cell (default 100)")
    p.add_argument("--attributes", nargs="+", choices=ATTRIBUTES, default=S)
    p.add_argument("--scenario", default=S)
    p.add_argument("--pool", default=S, help="tuple file to sample from (default: synthetic pool)")
    p.add_argument("--pool-size", type=int, default=S,
                   help=f"synthetic pool size when --pool is absent (default {DEFAULT_POOL_SIZE})")
    p.add_argument("--jobs", type=int, default=S, help="worker processes (default 1)")
    _common(p)

    p = sub.add_parser("report", help="collect averaged traces into one long CSV")
    p.add_argument("trace_dir")
    p.add_argument("--out", default=S, help="CSV path (default: stdout)")
    _common(p)
    return parser


def resolve_options(ns: argparse.Namespace) -> dict:
    """Merge built-in defaults, the --config file, and explicit flags, in that order."""
    given = vars(ns)
    cmd = given["command"]
    opts = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[cmd], "verbose": False}
    if "config" in given:
        path = Path(given["config"])
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: line {e.lineno}: {e.msg}") from e
        if not isinstance(cfg, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - set(opts))
        if unknown:
            raise UsageError(f"{path}: unknown option(s) for {cmd}: {', '.join(unknown)}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if k != "config"})
    opts["_explicit"] = set(given) | (set(cfg) if "config" in given else set())
    return opts


def learner_config(opts: dict) -> LearnerConfig:
    try:
        fb = FeedbackParams(precision=float(opts["precision_c"]), temperature=float(opts["temperature"]),
                            score_mode=opts["score_mode"])
        return LearnerConfig(learning_rate=float(opts["learning_rate"]), epochs=int(opts["epochs"]),
                             feedback=fb, seed=int(opts["seed"]))
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from e


def config_dict(cfg: LearnerConfig) -> dict:
    fb = cfg.feedback
    return {"precision_c": fb.precision, "temperature": fb.temperature, "psi_clamp": fb.psi_clamp,
            "score_mode": fb.score_mode, "learning_rate": cfg.learning_rate, "epochs": cfg.epochs}


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _existing(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    try:
        Path(out).write_text(text)
    except OSError as e:
        raise DataIOError(f"cannot write {out}: {e.strerror or e}") from e


def _scenario(opts) -> str:
    try:
        parse_scenario(opts["scenario"])
    except DomainError as e:
        raise UsageError(str(e)) from e
    return opts["scenario"]


def _scored_tuples(tuples, attribute: str, strict: bool):
    """Raw fairness scores (M, 3) of the scoreable tuples, plus skipped indices."""
    spec = GroupSpec.for_attribute(attribute)
    phi, skipped = [], []
    for i, t in enumerate(tuples):
        if not is_scoreable(t, spec):
            if strict:
                raise ValidationError(f"tuple[{i}]: empty {attribute} group; cannot be scored")
            skipped.append(i)
            continue
        try:
            phi.append(fairness_scores(t, spec).as_array())
        except (FairFeedbackError, ArithmeticError) as e:
            if strict:
                raise
            log.warning("tuple[%d]: %s", i, e)
            skipped.append(i)
    return np.array(phi).reshape(-1, 3), skipped


def _read_feedback(path, num_tuples: int) -> np.ndarray:
    path = _existing(path, "feedback file")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
    scores = raw.get("scores") if isinstance(raw, dict) else raw
    try:
        S = np.array(scores, dtype=float)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: scores must be an N x M array of integers") from e
    if S.ndim != 2 or S.shape[0] < 1:
        raise ValidationError(f"{path}: scores must be a nonempty N x M array, got shape {S.shape}")
    if S.shape[1] != num_tuples:
        raise ValidationError(f"{path}: {S.shape[1]} score columns for {num_tuples} tuples")
    if np.any(S != np.round(S)) or S.min() < 1 or S.max() > NUM_SCORES:
        raise ValidationError(f"{path}: scores must be integers in 1..{NUM_SCORES}")
    return S.astype(int)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_score(opts) -> int:
    tuples = load_tuples(_existing(opts["input"], "input file"))
    cfg = learner_config(opts)
    phi, skipped = _scored_tuples(tuples, opts["attribute"], strict=False)
    if len(phi) == 0:
        log.error("no tuple can be scored for %s", opts["attribute"])
        return EXIT_RUNTIME
    report = {
        "attribute": opts["attribute"],
        "phi": phi.mean(axis=0).tolist(),
        "beta_star": None,
        "social_score": None,
        "config": config_dict(cfg),
        "seed": cfg.seed,
        "tuples_scored": len(phi),
        "tuples_skipped": skipped,
        "per_tuple": phi.tolist(),
    }
    if opts["out"] is None:
        _emit(json.dumps(report, indent=2), None)
    else:
        write_report(report, opts["out"])
    return EXIT_OK


def cmd_synth(opts) -> int:
    if opts["spec"] is not None:
        path = _existing(opts["spec"], "spec file")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
        spec = SynthSpec.from_dict(raw)
    else:
        spec = SynthSpec()
    if "seed" in opts["_explicit"]:
        spec.seed = int(opts["seed"])
    if opts["num_tuples"] is not None:
        spec.num_tuples = int(opts["num_tuples"])
    write_tuples(synthesize_dataset(spec), opts["out"])
    log.info("wrote %d tuples to %s", spec.num_tuples, opts["out"])
    return EXIT_OK


def _population_and_scores(opts, phibar, cfg: LearnerConfig):
    scenario = _scenario(opts)
    N = int(opts["participants"])
    if N < 1:
        raise UsageError("--participants must be >= 1")
    pop = generate_population(N, scenario, seed=[cfg.seed, 1])
    return pop, scores_from_phibar(pop, phibar, cfg.feedback, seed=cfg.seed)


def cmd_simulate(opts) -> int:
    tuples = load_tuples(_existing(opts["input"], "input file"))
    cfg = learner_config(opts)
    phi, _ = _scored_tuples(tuples, opts["attribute"], strict=True)
    pop, scores = _population_and_scores(opts, normalize_scores(phi), cfg)
    out = {
        "attribute": opts["attribute"],
        "scenario": opts["scenario"],
        "seed": cfg.seed,
        "population": pop.tolist(),
        "scores": scores.tolist(),
    }
    _emit(json.dumps(out), opts["out"])
    return EXIT_OK


def cmd_learn(opts) -> int:
    tuples = load_tuples(_existing(opts["input"], "input file"))
    cfg = learner_config(opts)
    phi, _ = _scored_tuples(tuples, opts["attribute"], strict=True)
    phibar = normalize_scores(phi)
    if opts["simulate"]:
        _, scores = _population_and_scores(opts, phibar, cfg)
    else:
        scores = _read_feedback(opts["feedback"], len(tuples))
    beta, trace = saff_learn_phibar(scores, phibar, cfg)

    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    mean_phi = phi.mean(axis=0)
    social = int(social_scores(beta, normalize_scores(mean_phi)[None, :], cfg.feedback)[0])
    write_trace(trace, out_dir / "trace.csv")
    write_report({
        "attribute": opts["attribute"],
        "phi": mean_phi.tolist(),
        "beta_star": beta.tolist(),
        "social_score": social,
        "config": config_dict(cfg),
        "seed": cfg.seed,
        "final_hard_regret": trace.hard_regret[-1],
    }, out_dir / "report.json")
    print(f"beta* = {np.array2string(beta, precision=4)}  "
          f"regret {trace.hard_regret[0]:.4f} -> {trace.hard_regret[-1]:.4f}")
    return EXIT_OK


def cmd_experiment(opts) -> int:
    cfg = learner_config(opts)
    try:
        grid = ExperimentGrid(
            participant_counts=tuple(int(n) for n in opts["participants"]),
            tuple_counts=tuple(int(m) for m in opts["tuples"]),
            iterations=int(opts["iterations"]),
            attributes=tuple(opts["attributes"]),
            scenario=opts["scenario"],
            seed=cfg.seed,
        )
    except DomainError as e:
        raise UsageError(str(e)) from e
    if int(opts["jobs"]) < 1:
        raise UsageError("--jobs must be >= 1")
    if opts["pool"] is not None:
        pool = load_tuples(_existing(opts["pool"], "pool file"))
    else:
        pool = synthesize_dataset(SynthSpec(num_tuples=int(opts["pool_size"]), seed=cfg.seed))
    summary = run_experiment(pool, grid, cfg, opts["out_dir"], jobs=int(opts["jobs"]))
    print(summary)
    return EXIT_OK


def cmd_report(opts) -> int:
    trace_dir = _existing(opts["trace_dir"], "trace directory")
    found = []
    for path in sorted(trace_dir.iterdir()) if trace_dir.is_dir() else []:
        m = TRACE_RE.match(path.name)
        if m:
            found.append((m["attribute"], int(m["N"]), int(m["M"]), path))
    if not found:
        print(f"no traces found in {trace_dir}", file=sys.stderr)
        return EXIT_RUNTIME
    order = {a: i for i, a in enumerate(ATTRIBUTES)}
    found.sort(key=lambda f: (order.get(f[0], len(order)), f[0], f[1], f[2]))

    rows, failed = [], 0
    for attribute, N, M, path in found:
        try:
            trace = read_trace(path)
        except (ParseError, DataIOError) as e:
            print(f"skipping {path.name}: {e}", file=sys.stderr)
            failed += 1
            continue
        rows.extend([attribute, N, M, e, repr(h)] for e, h in enumerate(trace.hard_regret))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["attribute", "N", "M", "epoch", "avg_regret"])
    w.writerows(rows)
    _emit(buf.getvalue(), opts["out"])
    return EXIT_RUNTIME if failed else EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "learn": cmd_learn,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)   # exits 2 on usage errors
    try:
        opts = resolve_options(ns)
    except UsageError as e:
        parser.error(str(e))
    logging.basicConfig(level=logging.INFO if opts["verbose"] else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[opts["command"]](opts)
    except UsageError as e:
        print(f"fairfeedback {opts['command']}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, SpecError) as e:
        print(f"fairfeedback {opts['command']}: invalid input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FairFeedbackError, ArithmeticError, OSError) as e:
        print(f"fairfeedback {opts['command']}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Usage::

    netgame --config run.yaml --out results/ <subcommand> [options]

Every subcommand reads a JSON or YAML config document. Unknown keys are
rejected before any computation. Relative paths inside a config are
resolved against the config file's directory.

Exit codes: 0 success, 2 config or input-schema error, 3 numerical
non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import io as nio
from . import report
from .estimate import Dataset, OptimizerSettings, amle, choose_h
from .game import ConvergenceError, GameState, PayoffParams, contraction_modulus, solve_equilibrium
from .network import generate_circle, generate_random, make_rng
from .npest import NpConfig, default_h, np_estimate_detail
from .simulate import MCDesign, draw_actions, draw_covariates, run_montecarlo

SPEC_VERSION = "1.0"
EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
U64_MAX = 2**64 - 1

log = logging.getLogger("netgame")


class ConfigError(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config schemas

_num = {"type": "number"}
_matrix = {
    "anyOf": [
        _num,
        {"type": "array", "items": _num, "minItems": 1},
        {"type": "array", "items": {"type": "array", "items": _num, "minItems": 1}, "minItems": 1},
    ]
}
_spec = {"anyOf": [{"type": "string"}, {"type": "object"}]}
_path = {"type": "string", "minLength": 1}
_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_seed = {"type": "integer", "minimum": 0, "maximum": U64_MAX}
_data_props = {
    "edges": _path,
    "covariates": _path,
    "missing": {"enum": ["zero", "error"]},
    "constant": {"type": "boolean"},
}


def _schema(props, required):
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


SCHEMAS = {
    "generate": _schema(
        {
            "network": {"enum": ["circle", "random"]},
            "n": _pos_int,
            "x": {"type": "array", "items": _spec, "minItems": 1},
            "x_names": {"type": "array", "items": {"type": "string"}},
            "seed": _seed,
        },
        ["network", "n"],
    ),
    "solve": _schema(
        {**_data_props, "beta": _matrix, "alpha": _matrix, "tol": {"type": "number", "exclusiveMinimum": 0},
         "max_iter": _pos_int},
        ["edges", "covariates", "beta", "alpha"],
    ),
    "simulate": _schema(
        {**_data_props, "beta": _matrix, "alpha": _matrix, "tol": {"type": "number", "exclusiveMinimum": 0},
         "max_iter": _pos_int, "seed": _seed},
        ["edges", "covariates", "beta", "alpha"],
    ),
    "estimate": _schema(
        {
            **_data_props,
            "outcomes": _path,
            "K": _pos_int,
            "h": _nonneg_int,
            "h0": {"type": "number", "exclusiveMinimum": 0},
            "a": {"type": "number", "exclusiveMinimum": 0},
            "init": _schema({"beta": _matrix, "alpha": _matrix}, ["beta", "alpha"]),
            "box": {"anyOf": [{"type": "number", "exclusiveMinimum": 0},
                              {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]},
            "gtol": {"type": "number", "exclusiveMinimum": 0},
            "max_iter": _pos_int,
            "tol": {"type": "number", "exclusiveMinimum": 0},
        },
        ["edges", "covariates", "outcomes"],
    ),
    "montecarlo": _schema(
        {
            "network": {"enum": ["circle", "random"]},
            "n": _pos_int,
            "beta": _matrix,
            "alpha": _matrix,
            "R": _pos_int,
            "h": _nonneg_int,
            "base_seed": _seed,
            "x": {"type": "array", "items": _spec, "minItems": 1},
            "box": {"type": "number", "exclusiveMinimum": 0},
            "gtol": {"type": "number", "exclusiveMinimum": 0},
        },
        ["network", "n", "beta", "alpha"],
    ),
    "npestimate": _schema(
        {**_data_props, "outcomes": _path, "target": _pos_int, "h": _nonneg_int,
         "h0": {"type": "number", "exclusiveMinimum": 0}, "action": _pos_int},
        ["edges", "covariates", "outcomes"],
    ),
}

DEFAULT_X = ["uniform(-0.5, 0.5)", "normal(0, 1)"]


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()  # OSError propagates as an I/O failure
    try:
        doc = yaml.safe_load(text)  # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a key-value document")
    return doc


def validate_config(cmd: str, cfg: dict, source="config") -> None:
    try:
        jsonschema.validate(cfg, SCHEMAS[cmd])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None


# ---------------------------------------------------------------------------
# helpers


def _resolve(cfg, key, base: Path) -> Path:
    p = Path(cfg[key])
    return p if p.is_absolute() else base / p


def _load_state(cfg, base) -> tuple[GameState, list[str]]:
    X, names = nio.read_covariates(_resolve(cfg, "covariates", base), cfg.get("missing", "zero"))
    if cfg.get("constant", False):
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["Constant", *names]
    net = nio.read_edges(_resolve(cfg, "edges", base), X.shape[0])
    return GameState(net, X), names


def _params(cfg, d=None) -> PayoffParams:
    p = PayoffParams(cfg["beta"], cfg["alpha"])
    if d is not None and p.d != d:
        raise ConfigError(f"beta has {p.d} columns but the data have {d} covariates")
    return p


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n")


def _doc(cmd, cfg, **body):
    return {"spec_version": SPEC_VERSION, "command": cmd, "config": cfg, **body}


def _degree_summary(net) -> dict:
    q = net.out_degree
    return {
        "players": net.n,
        "edges": net.num_edges(),
        "mean_friends": float(q.mean()),
        "max_friends": int(q.max()),
        "friendless": int((q == 0).sum()),
        "max_centrality": int(net.in_degree.max()),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(cfg, args, base, out: Path) -> int:
    cfg.setdefault("x", list(DEFAULT_X))
    cfg.setdefault("seed", 0)
    if args.seed is not None:
        cfg["seed"] = args.seed
    names = cfg.get("x_names") or [f"x{c + 1}" for c in range(len(cfg["x"]))]
    if len(names) != len(cfg["x"]):
        raise ConfigError("x_names must match the number of x specs")
    ss_net, ss_x = np.random.SeedSequence(cfg["seed"]).spawn(2)
    if cfg["network"] == "circle":
        net = generate_circle(cfg["n"])
    else:
        net = generate_random(cfg["n"], ss_net)
    X = draw_covariates(cfg["x"], cfg["n"], make_rng(ss_x))
    nio.write_edges(out / "edges.csv", net)
    nio.write_covariates(out / "covariates.csv", X, names)
    summary = _degree_summary(net)
    _write_json(out / "generate.json", _doc("generate", cfg, degree_summary=summary))
    print(f"players {summary['players']}  edges {summary['edges']}  friendless {summary['friendless']}")
    print(f"friends per player: mean {summary['mean_friends']:.3f}  max {summary['max_friends']}")
    print(f"max centrality (times named as friend): {summary['max_centrality']}")
    return EXIT_OK


def _solve(cfg, base):
    state, names = _load_state(cfg, base)
    params = _params(cfg, state.X.shape[1])
    cfg.setdefault("tol", 1e-10)
    cfg.setdefault("max_iter", 10_000)
    profile, rep = solve_equilibrium(state, params, cfg["tol"], cfg["max_iter"])
    info = {
        "iterations": rep.iterations,
        "final_residual": rep.final_residual,
        "lambda": rep.lam,
        "converged": rep.converged,
    }
    return state, profile, info


def cmd_solve(cfg, args, base, out) -> int:
    _, profile, info = _solve(cfg, base)
    nio.write_profile(out / "profile.csv", profile.sigma)
    _write_json(out / "solve.json", _doc("solve", cfg, report=info))
    print(f"equilibrium: {info['iterations']} iterations, step {info['final_residual']:.3e}, "
          f"lambda {info['lambda']:.4f}")
    return EXIT_OK


def cmd_simulate(cfg, args, base, out) -> int:
    cfg.setdefault("seed", 0)
    if args.seed is not None:
        cfg["seed"] = args.seed
    _, profile, info = _solve(cfg, base)
    Y = draw_actions(profile, make_rng(cfg["seed"])).Y
    nio.write_profile(out / "profile.csv", profile.sigma)
    nio.write_outcomes(out / "outcomes.csv", Y)
    counts = np.bincount(Y, minlength=profile.sigma.shape[1]).tolist()
    _write_json(out / "simulate.json", _doc("simulate", cfg, report=info, action_counts=counts))
    print(f"simulated {Y.size} actions; counts by action {counts}")
    return EXIT_OK


def _load_data(cfg, base):
    state, names = _load_state(cfg, base)
    Y = nio.read_outcomes(_resolve(cfg, "outcomes", base), state.n)
    return Dataset(state, Y), names


def cmd_estimate(cfg, args, base, out) -> int:
    data, cov_names = _load_data(cfg, base)
    K = cfg.setdefault("K", max(int(data.Y.max()), 1))
    data.check_actions(K)
    if "h" not in cfg:
        cfg["h"] = choose_h(data.n, cfg.get("h0", 0.1), cfg.get("a", 0.5))
    init = None
    if "init" in cfg:
        init = PayoffParams(cfg["init"]["beta"], cfg["init"]["alpha"])
        if init.K != K or init.d != data.state.X.shape[1]:
            raise ConfigError(f"init must have K={K} and d={data.state.X.shape[1]}")
    settings = OptimizerSettings(
        gtol=cfg.setdefault("gtol", 1e-6),
        max_iter=cfg.setdefault("max_iter", 500),
        solve_tol=cfg.setdefault("tol", 1e-12),
    )
    box = cfg.get("box")
    res = amle(data, cfg["h"], init=init, box=tuple(box) if isinstance(box, list) else box,
               settings=settings, K=K)
    theta = res.theta_hat.to_vector()
    names = res.theta_hat.names(cov_names)
    if K == 1:
        names[-1] = "Peer Effects"
    table = report.coefficient_table(names, theta, res.std_errors, res.loglik * data.n, title=f"AMLE({cfg['h']})")
    print(table, end="")
    (out / "coefficients.txt").write_text(table)
    report.plot_coefficients(out / "coefficients.png", names, theta, res.std_errors)
    doc = _doc(
        "estimate", cfg,
        names=names,
        theta_hat=theta.tolist(),
        se=[None if not np.isfinite(s) else float(s) for s in res.std_errors],
        loglik=res.loglik * data.n,
        loglik_mean=res.loglik,
        h=res.h_used,
        converged=res.converged,
        optimizer=res.summary(),
    )
    _write_json(out / "estimate.json", doc)
    if not res.converged:
        raise NotConverged(f"optimizer stopped with projected gradient {res.grad_norm:.3e}: {res.message}")
    return EXIT_OK


def cmd_montecarlo(cfg, args, base, out) -> int:
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    design = MCDesign(**cfg)
    resolved = design.to_dict()
    cfg.clear()
    cfg.update(resolved)
    res = run_montecarlo(design, n_jobs=args.threads)
    P = len(res.names)
    header = ["replication", "converged", *res.names, *[f"se_{s}" for s in res.names], "error"]
    rows = [
        [r, int(res.converged[r]), *res.estimates[r], *res.std_errors[r], res.errors[r]]
        for r in range(res.replications)
    ]
    nio.write_table(out / "replications.csv", header, rows)
    summary = res.summary()
    _write_json(out / "summary.json", _doc("montecarlo", cfg, **summary))
    report.plot_montecarlo(out / "montecarlo.png", res.names, res.estimates, summary["true"], res.ok)
    print(f"{'param':<12}{'true':>10}{'mean':>10}{'sd':>10}{'mean se':>10}")
    for j in range(P):
        print(f"{res.names[j]:<12}{summary['true'][j]:>10.4f}{summary['mean'][j]:>10.4f}"
              f"{summary['sd'][j]:>10.4f}{summary['mean_se'][j]:>10.4f}")
    print(f"replications {res.replications}  failures {res.failures}")
    return EXIT_OK


def cmd_npestimate(cfg, args, base, out) -> int:
    if args.target is not None:
        cfg["target"] = args.target
    if args.h is not None:
        cfg["h"] = args.h
    if "target" not in cfg:
        raise ConfigError("npestimate needs a target player (--target or config key 'target')")
    data, _ = _load_data(cfg, base)
    if "h" not in cfg:
        cfg["h"] = default_h(data.n, cfg["h0"]) if "h0" in cfg else default_h(data.n)
    if not 1 <= cfg["target"] <= data.n:
        raise ConfigError(f"target {cfg['target']} outside 1..{data.n}")
    est = np_estimate_detail(data, NpConfig(cfg["h"], cfg["target"] - 1), cfg.get("action", 1))
    body = {"estimate": est.estimate, "matches": est.matches, "h": est.h}
    _write_json(out / "npestimate.json", _doc("npestimate", cfg, **body))
    print(json.dumps(body))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
    "npestimate": cmd_npestimate,
}


# ---------------------------------------------------------------------------
# entry point


def _seed_arg(text):
    v = int(text)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON or YAML config document")
    p.add_argument("--seed", type=_seed_arg, default=d(None), help="override the config seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes (montecarlo)")
    p.add_argument("--out", default=d("."), help="output directory (created if missing)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netgame", description="Logit network games: solve, simulate, estimate.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "write a circle or random network and covariates",
        "solve": "compute the equilibrium choice probabilities",
        "simulate": "draw equilibrium actions",
        "estimate": "approximated maximum likelihood with standard errors",
        "montecarlo": "simulate and re-estimate a design R times",
        "npestimate": "window-matching estimate on a circle network",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _global_flags(sp, suppress=True)
        if name == "npestimate":
            sp.add_argument("--target", type=int, default=None, help="player id (1-based)")
            sp.add_argument("--h", type=int, default=None, help="window half-width")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        if args.config is None:
            raise ConfigError("--config is required")
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg_path = Path(args.config)
        cfg = load_config(cfg_path)
        validate_config(args.command, cfg, str(cfg_path))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, cfg_path.parent, out)
    except (ConvergenceError, NotConverged) as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``mtem {simulate,certify,reproduce,check}``.

Configs are JSON documents with ``"schema": "mtem/1"``.  Either a named
example or an inline polynomial problem is given; command-line flags
override config values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import kernels
from .errors import ConfigError, MTEMError
from .experiments import (DEFAULT_SEED, DEFAULT_SEEDS, EXAMPLE_NAMES, NamedExperiment, build_example,
                          decay_table_csv, rate_certificates, run_reproduction)
from .integrator import SimulationGrid, ensemble_to_csv, ensemble_to_json, simulate_ensemble
from .model import (DEFAULT_T_GRID, SddeProblem, check_truncation_compatibility, constant_delay,
                    constant_history, pantograph_delay, relaxing_delay, stability_margin,
                    validate_problem)
from .polynomial import PolynomialFamily
from .stability import BOUNDED, UNBOUNDED, counting_check, mean_square_statistic
from .truncation import power_policy, validate_policy

SCHEMA = "mtem/1"
FORMATS = ("csv", "json", "both")
COMPAT_RADII = (10.0, 100.0, 1000.0, 10000.0)


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class DelaySpec:
    kind: str = "constant"
    tau: float = 0.0
    c: float = 0.5
    q: float = 0.5

    def build(self):
        if self.kind == "constant":
            return constant_delay(self.tau)
        if self.kind == "relaxing":
            return relaxing_delay(self.tau, self.c)
        if self.kind == "pantograph":
            return pantograph_delay(self.q)
        raise ConfigError(f"unknown delay kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    example: Optional[str] = None
    inline: Optional[dict] = None
    delay: Optional[DelaySpec] = None
    history: Optional[float] = None
    policy: dict = field(default_factory=lambda: {"kind": "power", "exponent": 1.0 / 9.0,
                                                  "delta_star": 1.0})
    dt: Optional[float] = None
    steps: Optional[int] = None
    n_paths: int = DEFAULT_SEEDS
    master_seed: int = DEFAULT_SEED
    epsilon: object = "midpoint"
    C: tuple = (0.0,)
    out: str = "mtem-run"
    formats: str = "csv"

    def to_dict(self):
        return {
            "schema": SCHEMA,
            **({"example": self.example} if self.example else {}),
            **({"inline": self.inline} if self.inline is not None else {}),
            **({"delay": dataclasses.asdict(self.delay)} if self.delay else {}),
            **({"history": self.history} if self.history is not None else {}),
            "policy": dict(self.policy),
            "grid": {"dt": self.dt, "steps": self.steps},
            "ensemble": {"n_paths": self.n_paths, "master_seed": self.master_seed},
            "analysis": {"epsilon": self.epsilon, "C": list(self.C)},
            "output": {"dir": self.out, "formats": self.formats},
        }


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


_TOP_KEYS = {"schema", "example", "inline", "delay", "history", "policy", "grid", "ensemble",
             "analysis", "output", "seeds", "out"}
_SECTION_KEYS = {
    "delay": {"kind", "tau", "c", "q"},
    "policy": {"kind", "exponent", "delta_star"},
    "grid": {"dt", "steps"},
    "ensemble": {"n_paths", "master_seed"},
    "analysis": {"epsilon", "C"},
    "output": {"dir", "formats"},
    "inline": {"drift", "diffusion", "lipschitz", "K", "lambda0", "lambda1", "lambda2", "eta"},
}


def _section(doc, name):
    sec = doc.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be an object")
    unknown = set(sec) - _SECTION_KEYS[name]
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in '{name}'")
    return sec


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> RunConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}")
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA!r}")
    example, inline = doc.get("example"), doc.get("inline")
    if (example is None) == (inline is None):
        raise ConfigError("exactly one of 'example' or 'inline' must be given")
    if example is not None and example not in EXAMPLE_NAMES:
        raise ConfigError(f"unknown example {example!r}; choose from {list(EXAMPLE_NAMES)}")
    kw = {"example": example}

    delay_sec = _section(doc, "delay")
    if example is not None and ("delay" in doc or "history" in doc):
        raise ConfigError("named examples lock 'delay' and 'history'; use an inline problem")
    if inline is not None:
        inl = _section(doc, "inline")
        for key in ("drift", "diffusion", "lipschitz", "lambda1", "lambda2"):
            if key not in inl:
                raise ConfigError(f"inline problem needs {key!r}")
        inline = {"drift": [list(t) for t in inl["drift"]],
                  "diffusion": [list(t) for t in inl["diffusion"]],
                  "lipschitz": [list(t) for t in inl["lipschitz"]],
                  "K": float(inl.get("K", 0.0)), "lambda0": float(inl.get("lambda0", 1.0)),
                  "lambda1": float(inl["lambda1"]), "lambda2": float(inl["lambda2"])}
        try:
            PolynomialFamily(inline["drift"], inline["diffusion"], inline["lipschitz"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid inline coefficients: {exc}") from None
        kw["inline"] = inline
        if delay_sec:
            spec = DelaySpec(**{k: (str(v) if k == "kind" else float(v)) for k, v in delay_sec.items()})
        elif "eta" in inl:
            # shorthand: constant-free relaxing delay with the requested slope bound
            spec = DelaySpec(kind="relaxing", tau=1.0, c=float(inl["eta"]))
        else:
            spec = DelaySpec()
        if spec.kind not in ("constant", "relaxing", "pantograph"):
            raise ConfigError(f"unknown delay kind {spec.kind!r}")
        kw["delay"] = spec
        hist = doc.get("history", 1.0)
        if isinstance(hist, dict):
            hist = hist.get("value", 1.0)
        kw["history"] = float(hist)

    pol = _section(doc, "policy")
    if pol:
        kind = pol.get("kind", "power")
        if kind == "custom":
            raise ConfigError("custom truncation policies require the library API")
        if kind != "power":
            raise ConfigError(f"unknown policy kind {kind!r}")
        exponent = float(pol.get("exponent", 1.0 / 9.0))
        if exponent <= 0:
            raise ConfigError("constraint violated: policy exponent > 0")
        kw["policy"] = {"kind": "power", "exponent": exponent,
                        "delta_star": float(pol.get("delta_star", 1.0))}

    grid = _section(doc, "grid")
    if grid.get("dt") is not None:
        kw["dt"] = float(grid["dt"])
        if not kw["dt"] > 0:
            raise ConfigError("constraint violated: dt > 0")
    if grid.get("steps") is not None:
        kw["steps"] = int(grid["steps"])
        if kw["steps"] < 1:
            raise ConfigError("constraint violated: steps >= 1")

    ens = _section(doc, "ensemble")
    n_paths = ens.get("n_paths", doc.get("seeds", DEFAULT_SEEDS))
    kw["n_paths"] = int(n_paths)
    if kw["n_paths"] < 1:
        raise ConfigError("constraint violated: n_paths >= 1")
    kw["master_seed"] = int(ens.get("master_seed", DEFAULT_SEED))
    if not 0 <= kw["master_seed"] < 2 ** 64:
        raise ConfigError("constraint violated: master_seed is an unsigned 64-bit integer")

    ana = _section(doc, "analysis")
    eps = ana.get("epsilon", "midpoint")
    if eps != "midpoint":
        try:
            eps = float(eps)
        except (TypeError, ValueError):
            raise ConfigError(f"constraint violated: epsilon is a number or 'midpoint', got {eps!r}") from None
    kw["epsilon"] = eps
    cs = ana.get("C", [0.0])
    kw["C"] = tuple(float(c) for c in (cs if isinstance(cs, list) else [cs]))

    out = _section(doc, "output")
    kw["out"] = str(out.get("dir", doc.get("out", "mtem-run")))
    fmt = out.get("formats", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"constraint violated: formats in {list(FORMATS)}")
    kw["formats"] = fmt
    cfg = RunConfig(**kw)
    # fail early on inadmissible grids so the message names the offending step size
    build_run(cfg)
    return cfg


def build_run(cfg: RunConfig) -> NamedExperiment:
    if cfg.example:
        base = build_example(cfg.example)
        problem, regime, expected, family = base.problem, base.regime, base.expected, base.family
        dt = cfg.dt if cfg.dt is not None else base.grid.dt
        steps = cfg.steps if cfg.steps is not None else base.grid.n_steps
    else:
        inl = cfg.inline
        family = PolynomialFamily(inl["drift"], inl["diffusion"], inl["lipschitz"], K=inl["K"],
                                  lambda0=inl["lambda0"], lambda1=inl["lambda1"],
                                  lambda2=inl["lambda2"])
        delay = cfg.delay.build()
        problem = SddeProblem(family.coefficients(), delay, constant_history(cfg.history, delay.tau))
        regime = BOUNDED if delay.is_bounded else UNBOUNDED
        expected = ()
        dt = cfg.dt if cfg.dt is not None else 0.1
        steps = cfg.steps if cfg.steps is not None else 1000
    policy = power_policy(cfg.policy["exponent"], cfg.policy.get("delta_star", 1.0))
    try:
        grid = SimulationGrid.for_delay(problem.delay.tau, dt, steps)
    except MTEMError as exc:
        raise ConfigError(str(exc)) from None
    if dt > policy.delta_star:
        raise ConfigError(f"constraint violated: dt={dt} <= delta_star={policy.delta_star}")
    return NamedExperiment(cfg.example or "inline", problem, policy, grid, expected, regime, family)


def _warnings(exp: NamedExperiment) -> list:
    margin = stability_margin(exp.problem)
    if margin <= 0:
        return [{"finding": "stability margin non-positive", "value": margin}]
    return []


# ---------------------------------------------------------------------------
# commands


class Run:
    def __init__(self, cfg: RunConfig, quiet: bool = False):
        self.cfg = cfg
        self.quiet = quiet
        self.exp = build_run(cfg)
        self.out = Path(cfg.out)
        self.warnings = _warnings(self.exp)

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)

    def metadata(self, **extra):
        return {"config": self.cfg.to_dict(), "master_seed": self.cfg.master_seed,
                "grid": self.exp.grid.to_dict(), "regime": self.exp.regime,
                "kernel": "numba" if kernels.numba_enabled() else "numpy",
                "warnings": self.warnings, **extra}

    def epsilon(self):
        return None if self.cfg.epsilon == "midpoint" else self.cfg.epsilon


def command_simulate(run: Run) -> int:
    exp, cfg = run.exp, run.cfg
    records = simulate_ensemble(exp.problem, exp.policy, exp.grid, cfg.master_seed, cfg.n_paths)
    meta = run.metadata(truncation_level=records[0].truncation_level)
    if cfg.formats in ("csv", "both"):
        run.write("paths.csv", ensemble_to_csv(records))
    if cfg.formats in ("json", "both"):
        run.write("paths.json", ensemble_to_json(records, meta))
    run.write("decay.csv", decay_table_csv(records))
    cols = {c: mean_square_statistic(records, c) for c in cfg.C}
    lines = ["k,t," + ",".join(f"C={c!r}" for c in cfg.C)]
    for k in range(exp.grid.n_steps + 1):
        lines.append(f"{k},{k * exp.grid.dt!r}," + ",".join(repr(float(v[k])) for v in cols.values()))
    run.write("mean_square.csv", "\n".join(lines) + "\n")
    run.write("metadata.json", json.dumps(meta, indent=2))
    run.say(f"simulated {cfg.n_paths} path(s) x {exp.grid.n_steps} steps -> {run.out}")
    return 0


def command_certify(run: Run) -> int:
    scheme, exact = rate_certificates(run.exp.problem, run.exp.regime, run.epsilon())
    doc = {"scheme": scheme.to_dict(), "exact": exact.to_dict(), "metadata": run.metadata()}
    run.write("certificate.json", json.dumps(doc, indent=2))
    run.say(f"{scheme.regime}: eps={scheme.epsilon:.6g} C0={scheme.c_tilde0:.12g} "
            f"C={scheme.c_tilde:.12g} residual={scheme.residual:.3g}")
    return 0


def command_reproduce(run: Run) -> int:
    exp, cfg = run.exp, run.cfg
    records = simulate_ensemble(exp.problem, exp.policy, exp.grid, cfg.master_seed, cfg.n_paths)
    report = run_reproduction(exp, cfg.master_seed, cfg.n_paths, epsilon=run.epsilon(),
                              records=records)
    doc = report.to_dict()
    doc["metadata"] = run.metadata()
    run.write("report.json", json.dumps(doc, indent=2))
    run.write("report.txt", report.to_text() + "\n")
    run.write("decay.csv", decay_table_csv(records))
    run.say(report.to_text())
    return 0 if report.passed else 1


def command_check(run: Run) -> int:
    exp = run.exp
    validation = validate_problem(exp.problem)
    policy_findings = validate_policy(exp.policy)
    k_max = max(exp.grid.n_steps, 10 ** 4)
    counting = counting_check(exp.problem.delay, exp.grid, k_max)
    compat = check_truncation_compatibility(exp.problem, exp.policy, COMPAT_RADII, DEFAULT_T_GRID)
    passed = (validation.passed and all(f.passed for f in policy_findings) and counting.holds
              and compat.decreasing)
    doc = {"passed": passed, "validation": validation.to_dict(),
           "policy": [f.to_dict() for f in policy_findings],
           "counting": {"max_count": counting.max_count, "bound": counting.bound,
                        "witness": counting.witness, "k_max": k_max, "holds": counting.holds},
           "truncation_compatibility": compat.to_dict(), "metadata": run.metadata()}
    run.write("validation.json", json.dumps(doc, indent=2))
    for f in validation.findings + policy_findings:
        run.say(f"[{'PASS' if f.passed else 'FAIL'}] {f.name}")
    run.say(f"[{'PASS' if counting.holds else 'FAIL'}] delay multiplicity "
            f"{counting.max_count} <= {counting.bound}")
    run.say(f"[{'PASS' if compat.decreasing else 'FAIL'}] truncation compatibility: {compat.verdict}")
    return 0 if passed else 1


COMMANDS = {"simulate": command_simulate, "certify": command_certify,
            "reproduce": command_reproduce, "check": command_check}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("example_name", nargs="?", choices=EXAMPLE_NAMES,
                        help="named example (same as --example)")
    common.add_argument("--config", type=Path, help="JSON config file (schema mtem/1)")
    common.add_argument("--example", choices=EXAMPLE_NAMES)
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", help="number or 'midpoint'")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--quiet", action="store_true")
    parser = argparse.ArgumentParser(prog="mtem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _resolve(args) -> RunConfig:
    doc = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    name = args.example or args.example_name
    if name:
        doc.pop("inline", None)
        doc["example"] = name
    if "example" not in doc and "inline" not in doc:
        raise ConfigError("give --config, --example or an example name")
    if args.dt is not None or args.steps is not None:
        grid = dict(doc.get("grid") or {})
        if args.dt is not None:
            grid["dt"] = args.dt
        if args.steps is not None:
            grid["steps"] = args.steps
        doc["grid"] = grid
    if args.paths is not None or args.seed is not None:
        ens = dict(doc.get("ensemble") or {})
        if args.paths is not None:
            ens["n_paths"] = args.paths
            doc.pop("seeds", None)
        if args.seed is not None:
            ens["master_seed"] = args.seed
        doc["ensemble"] = ens
    if args.epsilon is not None:
        ana = dict(doc.get("analysis") or {})
        ana["epsilon"] = args.epsilon
        doc["analysis"] = ana
    if args.out is not None or args.format is not None:
        out = dict(doc.get("output") or {})
        if args.out is not None:
            out["dir"] = args.out
            doc.pop("out", None)
        if args.format is not None:
            out["formats"] = args.format
        doc["output"] = out
    return config_from_dict(doc)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    out_dir = None
    try:
        cfg = _resolve(args)
        out_dir = Path(cfg.out)
        run = Run(cfg, quiet=args.quiet)
        return COMMANDS[args.command](run)
    except MTEMError as exc:
        record = {"error": exc.code, "type": type(exc).__name__, "message": str(exc)}
        for attr in ("step", "path_index", "failures"):
            if getattr(exc, attr, None) is not None:
                record[attr] = getattr(exc, attr)
        print(json.dumps(record), file=sys.stderr)
        if out_dir is not None:
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / "error.json").write_text(json.dumps(record, indent=2))
            except OSError:
                pass
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

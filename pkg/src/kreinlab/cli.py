"""
Command-line entry point.

    kreinlab convergence --config flagship.cfg --out results/ alpha=4.5
    kreinlab oracle --seeds 100 --dim 8 --codim 2

Config files are INI-style ``key = value`` lists with one section per
module ([mesh], [potential], [experiment], [output]); a JSON sidecar
written by a previous run is accepted too.  Exit codes: 0 success,
1 invalid configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
import typing

import numpy as np

from . import __version__
from .errors import ConfigError, KreinLabError
from .lab import (Experiment, ExperimentConfig, _jsonable, run_admissibility, run_convergence,
                  run_spectrum_tracking, write_atomic)
from .oracle import MAX_DIM, run_oracle

SECTIONS = {
    "mesh": ("L", "K_per_side", "grading_exponent"),
    "potential": ("kappa", "beta", "cap"),
    "experiment": ("alpha", "alpha_fraction", "eta", "z", "specs", "general_q", "schedule",
                   "seed", "power_iterations", "spectrum_k", "b_grid"),
    "output": ("output",),
}
FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_HINTS = typing.get_type_hints(ExperimentConfig)


def _parse_value(key: str, raw):
    """Convert a raw string (or JSON value) to the type of ExperimentConfig.<key>."""
    if key not in FIELDS:
        raise ConfigError(f"{key}: unknown configuration key", field=key)
    hint = _HINTS[key]
    optional = type(None) in typing.get_args(hint)
    if isinstance(raw, str):
        text = raw.strip()
        if optional and text.lower() in ("", "none", "null"):
            return None
    else:
        text = raw
        if raw is None:
            if optional:
                return None
            raise ConfigError(f"{key}: value required", field=key)
    try:
        if key == "specs":
            items = text.split(",") if isinstance(text, str) else list(text)
            return tuple(str(s).strip().lower() for s in items if str(s).strip())
        if key in ("schedule", "b_grid"):
            items = text.split(",") if isinstance(text, str) else list(text)
            return tuple(float(s) for s in items if str(s).strip())
        if key == "output":
            return str(text)
        if hint is int:
            v = float(text)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})", field=key) from None


def read_config_file(path: str) -> dict:
    """Key/value pairs from an INI config or a JSON sidecar."""
    if not os.path.exists(path):
        raise ConfigError(f"config: no such file {path!r}", field="config")
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("config", data)
        return {k: _parse_value(k, v) for k, v in data.items()}
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}", field="config") from None
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{section}: unknown config section", field=section)
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{key}: unknown key in section [{section}]", field=key)
            out[key] = _parse_value(key, raw)
    return out


def build_config(path: str | None, overrides, out: str | None) -> ExperimentConfig:
    values = read_config_file(path) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"{item}: overrides must look like key=value", field=item)
        key, raw = item.split("=", 1)
        values[key.strip()] = _parse_value(key.strip(), raw)
    if out is not None:
        values["output"] = out
    if "alpha" in values and values["alpha"] is not None:
        values.setdefault("alpha_fraction", None)
    return ExperimentConfig(**values)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kreinlab", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"kreinlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("convergence", "admissibility", "spectrum", "oracle", "form-bound"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="INI config or JSON sidecar")
        s.add_argument("--out", help="output directory (overrides [output] output)")
        if name == "oracle":
            s.add_argument("--seeds", type=int, default=100)
            s.add_argument("--dim", type=int, default=8)
            s.add_argument("--codim", type=int, default=2)
        s.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def _run(args) -> list:
    if args.command == "oracle":
        if args.overrides:
            raise ConfigError(f"{args.overrides[0]}: oracle takes no key=value overrides",
                              field=args.overrides[0])
        if args.seeds < 1:
            raise ConfigError("seeds: must be >= 1", field="seeds")
        if not 1 <= args.dim <= MAX_DIM:
            raise ConfigError(f"dim: need 2 <= dim <= {MAX_DIM}", field="dim")
        if not 1 <= args.codim < args.dim:
            raise ConfigError("codim: need 1 <= codim < dim", field="codim")
        out = args.out or "."
        reports = run_oracle(range(args.seeds), N=args.dim, d=args.codim)
        lines = [ln for r in reports for ln in r.failure_lines()]
        worst = max(c.residual for r in reports for c in r.checks)
        summary = {"seeds": args.seeds, "dim": args.dim, "codim": args.codim,
                   "reports": len(reports), "failures": len(lines),
                   "worst_residual": worst, "library_version": __version__}
        paths = {os.path.join(out, "oracle_failures.jsonl"): "".join(ln + "\n" for ln in lines),
                 os.path.join(out, "oracle.json"): json.dumps(summary, indent=2) + "\n"}
        write_atomic(paths)
        if lines:
            raise KreinLabError(f"{len(lines)} oracle checks failed; see oracle_failures.jsonl")
        return list(paths)

    config = build_config(args.config, args.overrides, args.out)
    exp = Experiment(config)
    if args.command == "form-bound":
        fb = exp.form_bound
        meta = {"a": fb.a, "b": fb.b, "b_grid_value": fb.b_grid_value,
                "alpha_max": fb.alpha_max if math.isfinite(fb.alpha_max) else "inf",
                "table": [list(t) for t in fb.table], "config": config.echo(),
                "config_hash": config.config_hash(), "library_version": __version__}
        path = os.path.join(config.output, "form_bound.json")
        write_atomic({path: json.dumps(meta, indent=2, default=_jsonable) + "\n"})
        return [path]
    run = {"convergence": run_convergence, "admissibility": run_admissibility,
           "spectrum": run_spectrum_tracking}[args.command]
    return list(run(exp).write(config.output))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with np.errstate(all="ignore"):
            paths = _run(args)
    except ConfigError as exc:
        print(f"kreinlab: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (KreinLabError, np.linalg.LinAlgError, ArithmeticError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("z", "lower_bound", "residual"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err, default=_jsonable), file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

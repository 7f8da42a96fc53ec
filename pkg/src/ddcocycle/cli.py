"""Command line driver: ``verify [--suite NAME ...] [--seed K] ...``.

Exit status: 0 all identities pass, 1 an identity fails, 2 configuration
error, 3 a sign probe disagrees with its frozen value or is inconclusive.
"""
from __future__ import annotations

import argparse
import configparser
import json
import platform
import sys
import time
from dataclasses import fields

import numpy as np
import scipy

from . import __version__
from . import signs as S
from .nerve import SignProbeError
from .suites import SUITES, SuiteConfig

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SIGN = 0, 1, 2, 3
SCHEMA = "1"

_CASTS = {"seed": int, "samples": int, "loop_samples": int, "band_limit": int, "su2_grid": int, "sheet_grid": int,
          "fd_step": float, "tol_algebraic": float, "tol_fd": float, "tol_quad": float, "tol_loop_fd": float, "report": str, "out": str}


class ConfigError(ValueError):
    pass


def read_config(path: str) -> dict:
    """Values from the [verify] section of an INI file."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not parser.has_section("verify"):
        raise ConfigError(f"{path}: missing [verify] section")
    out = {}
    for key, raw in parser.items("verify"):
        key = key.replace("-", "_")
        if key == "suites":
            out["suites"] = tuple(s for s in raw.replace(",", " ").split() if s)
        elif key == "timing":
            out["timing"] = parser.getboolean("verify", key)
        elif key in _CASTS:
            try:
                out[key] = _CASTS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from exc
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="verify", description="Residual checks of nerve cocycles on compact groups.")
    ap.add_argument("--suite", action="append", dest="suites", choices=sorted(SUITES), metavar="NAME",
                    help=f"suite to run (repeatable; default all): {', '.join(SUITES)}")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int, help="random probes per identity")
    ap.add_argument("--fd-step", type=float, dest="fd_step")
    ap.add_argument("--tol-algebraic", type=float, dest="tol_algebraic")
    ap.add_argument("--tol-fd", type=float, dest="tol_fd")
    ap.add_argument("--tol-quad", type=float, dest="tol_quad")
    ap.add_argument("--tol-loop-fd", type=float, dest="tol_loop_fd", help="tolerance of FD identities on loop spaces")
    ap.add_argument("--loop-samples", type=int, dest="loop_samples")
    ap.add_argument("--band-limit", type=int, dest="band_limit")
    ap.add_argument("--su2-grid", type=int, dest="su2_grid")
    ap.add_argument("--sheet-grid", type=int, dest="sheet_grid")
    ap.add_argument("--report", choices=("json", "md"))
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--config", help="INI file with a [verify] section; flags override it")
    ap.add_argument("--timing", action="store_true", default=None,
                    help="record wall time (reports are then no longer byte-identical)")
    return ap


def make_config(argv=None) -> SuiteConfig:
    args = build_parser().parse_args(argv)
    values = read_config(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key != "config" and val is not None:
            values[key] = tuple(val) if key == "suites" else val
    cfg = SuiteConfig(**values)
    if not cfg.suites:
        cfg.suites = tuple(SUITES)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def run_suite(cfg: SuiteConfig) -> tuple[dict, int]:
    """Run the selected suites; return the report dict and the exit status."""
    start = time.perf_counter()
    suites, status = [], EXIT_PASS
    for name in cfg.suites:
        try:
            result = SUITES[name](cfg)
        except SignProbeError as exc:
            suites.append({"name": name, "pass": False, "error": f"sign probe: {exc}", "entries": [],
                           "controls": [], "signs": {}})
            status = EXIT_SIGN
            continue
        suites.append({"name": name, "pass": result.passed, "entries": result.report.to_list(),
                       "controls": result.controls, "signs": result.signs})
        if not result.passed and status == EXIT_PASS:
            status = EXIT_FAIL
    config = {f.name: getattr(cfg, f.name) for f in fields(SuiteConfig) if f.name not in ("out", "timing")}
    config["suites"] = list(cfg.suites)
    report = {
        "schema": SCHEMA,
        "global": {
            "seed": cfg.seed,
            "versions": {"ddcocycle": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "wall_time": round(time.perf_counter() - start, 3) if cfg.timing else None,
        },
        "config": config,
        "frozen_signs": {k: {"value": v, "provenance": S.PROVENANCE[k]} for k, v in S.FROZEN.items()},
        "suites": suites,
        "pass": status == EXIT_PASS,
    }
    return report, status


def _fmt(x) -> str:
    return f"{x:.3e}" if isinstance(x, float) else str(x)


def to_markdown(report: dict) -> str:
    g = report["global"]
    lines = [f"# Verification report (schema {report['schema']})", "",
             f"- seed: {g['seed']}", "- versions: " + ", ".join(f"{k} {v}" for k, v in g["versions"].items()),
             f"- wall time: {g['wall_time'] if g['wall_time'] is not None else 'not recorded'}",
             f"- overall: {'PASS' if report['pass'] else 'FAIL'}", ""]
    for suite in report["suites"]:
        lines += [f"## {suite['name']}: {'PASS' if suite['pass'] else 'FAIL'}", ""]
        if "error" in suite:
            lines += [f"error: {suite['error']}", ""]
        if suite["entries"]:
            lines += ["| identity | anchor | probes | max residual | tolerance | signs | pass |",
                      "|---|---|---|---|---|---|---|"]
            for e in suite["entries"]:
                signs = ", ".join(f"{k}={v}" for k, v in e["signs"].items())
                note = f" ({e['note']})" if "note" in e else ""
                lines.append(f"| {e['identity']}{note} | {e['anchor']} | {e['probes']} | {_fmt(e['max_residual'])} "
                             f"| {_fmt(e['tolerance'])} | {signs} | {'yes' if e['pass'] else 'NO'} |")
            lines.append("")
        if suite["controls"]:
            lines += ["| negative control | residual | tolerance | rejected |", "|---|---|---|---|"]
            for c in suite["controls"]:
                lines.append(f"| {c['identity']} | {_fmt(c['max_residual'])} | {_fmt(c['tolerance'])} "
                             f"| {'yes' if c['rejected'] else 'NO'} |")
            lines.append("")
        if suite["signs"]:
            lines += ["| sign | frozen | probe evidence |", "|---|---|---|"]
            for k, v in suite["signs"].items():
                lines.append(f"| {k} | {v['frozen']} | {json.dumps(v['probe'], sort_keys=True)} |")
            lines.append("")
    return "\n".join(lines)


def render(report: dict, fmt: str) -> str:
    if fmt == "md":
        return to_markdown(report) + "\n"
    return json.dumps(report, indent=2) + "\n"


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except ConfigError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report, status = run_suite(cfg)
    text = render(report, cfg.report)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for suite in report["suites"]:
        print(f"{suite['name']}: {'pass' if suite['pass'] else 'FAIL'}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

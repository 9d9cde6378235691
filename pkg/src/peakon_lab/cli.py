"""Command-line entry point: ``peakon-lab run <config>`` and ``peakon-lab identities``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config
from .scenarios import run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peakon-lab", description="Peakon perturbation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario described by a key = value config file")
    r.add_argument("config", type=Path)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--dt", type=float, help="time step (overrides dt)")
    r.add_argument("--t-end", type=float, dest="t_end", help="final time (overrides t_end)")
    i = sub.add_parser("identities", help="run the seeded nonlocal identity suite")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", help="output directory")
    return p


def _load(args) -> ExperimentConfig:
    if args.command == "identities":
        return ExperimentConfig(scenario="identities").with_overrides(seed=args.seed, output_dir=args.out)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    return parse_config(text).with_overrides(dt=args.dt, t_end=args.t_end, output_dir=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    res = run(cfg)
    for a in res.audits:
        print(f"{a.result.status:7s} {a.name}: {a.result.detail}")
    fail = res.first_failure
    if fail is not None:
        print(f"FAILED {fail.name}: {fail.result.detail}", file=sys.stderr)
    print(f"artifacts in {cfg.output_dir}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``cones-es optimize`` and ``cones-es sweep``.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path

from .harness import ConfigError, NumericalAbort, RunConfig, emit, run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_TYPES = {
    "method": str,
    "benchmark": str,
    "dim": int,
    "pop": int,
    "iters": int,
    "lr_mean": float,
    "lr_logvar": float,
    "epsilon": float,
    "init_mean": float,
    "init_std": float,
    "seed": int,
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines (``#`` comments, optional ``[run]`` header)."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = key.replace("-", "_")
            if name == "seeds":
                out[name] = raw
                continue
            if name not in _TYPES:
                raise ConfigError(f"{path}: unknown key {key!r}")
            try:
                out[name] = _TYPES[name](raw)
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key!r}: {raw!r}") from None
    return out


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value file; flags override it")
    p.add_argument("--method", choices=("es", "nes", "cones"))
    p.add_argument("--benchmark", choices=("sphere", "rosenbrock", "rastrigin", "lunacek"))
    p.add_argument("--dim", type=int)
    p.add_argument("--pop", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--lr-mean", type=float)
    p.add_argument("--lr-logvar", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--init-mean", type=float)
    p.add_argument("--init-std", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--timing", action="store_true", help="record wall-clock ms (traces stop being reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cones-es", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    opt = sub.add_parser("optimize", help="run one optimization and write run.json + trace.csv")
    _add_run_flags(opt)
    opt.add_argument("--seed", type=int)
    sw = sub.add_parser("sweep", help="repeat a run over several seeds and summarize")
    _add_run_flags(sw)
    sw.add_argument("--seeds", help="comma separated list, e.g. 0,1,2")
    return parser


def _parse_seeds(text) -> list[int]:
    try:
        seeds = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad --seeds value {text!r}") from None
    if not seeds:
        raise ConfigError("--seeds is empty")
    return seeds


def resolve_config(args) -> tuple[RunConfig, dict]:
    values = read_config_file(args.config) if args.config else {}
    for name in _TYPES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if "seeds" in vars(args) and args.seeds is not None:
        values["seeds"] = args.seeds
    extra = {}
    if "seeds" in values:
        extra["seeds"] = _parse_seeds(values.pop("seeds"))
    if values.get("epsilon") is not None and values.get("method") != "cones":
        raise ConfigError("--epsilon is only accepted with --method cones")
    for required in ("method", "benchmark", "dim"):
        if required not in values:
            raise ConfigError(f"missing required setting {required!r}")
    return RunConfig.from_dict(values), extra


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config, extra = resolve_config(args)
        if args.command == "sweep" and "seeds" not in extra:
            raise ConfigError("sweep needs --seeds")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "optimize":
            record = run(config, timing=args.timing)
            emit(record, args.out)
            last = record.rows[-1]
            print(f"{config.method} on {config.benchmark}: final loss {last.loss:.6g} after {last.evals} evaluations")
        else:
            records = sweep(config, extra["seeds"], args.out, timing=args.timing)
            print(f"wrote {len(records)} runs and summary.csv to {args.out}")
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

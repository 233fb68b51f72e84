"""Command line entry point ``phs``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import system_to_dict
from .exceptions import PHSError
from .models import MODEL_NAMES, model
from .workbench import load_config, run_config

VERB_STAGE = {
    "simulate": "simulate",
    "observability": "observability",
    "hautus": "hautus-scan",
    "fundamental": "fundamental",
    "theorem2": "theorem2",
    "kalman": "kalman",
}


def _parse_param(items):
    params = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    return params


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="JSON run configuration")
    shared.add_argument("--out-dir", type=Path, default=None, help="output directory")
    shared.add_argument("--grid-n", type=int, default=None, help="number of grid cells")
    shared.add_argument("--seed", type=int, default=None, help="random seed")
    shared.add_argument("--model", choices=MODEL_NAMES, default=None,
                        help="model zoo entry (overrides the config source)")
    shared.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="model parameter, value parsed as JSON when possible")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="phs", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_STAGE:
        sub.add_parser(verb, parents=[shared], help=f"run the {VERB_STAGE[verb]} stage")
    sub.add_parser("run", parents=[shared], help="run the pipeline listed in the config")
    sub.add_parser("models", parents=[shared],
                   help="list zoo models, or write the resolved definition of --model")
    return parser


def _assemble_config(args) -> dict:
    config = load_config(args.config) if args.config else {}
    if args.model:
        for key in ("model", "system", "system_file"):
            config.pop(key, None)
        config["model"] = {"name": args.model, "params": _parse_param(args.param)}
    elif args.param and "model" in config:
        config["model"].setdefault("params", {}).update(_parse_param(args.param))
    if args.grid_n is not None:
        config["grid_n"] = args.grid_n
    if args.seed is not None:
        config["seed"] = args.seed
    if args.verb != "run":
        config["pipeline"] = [VERB_STAGE[args.verb]]
    return config


def _models(args) -> int:
    if args.model is None:
        for name in MODEL_NAMES:
            print(name)
        return 0
    spec = model(args.model, _parse_param(args.param))
    if spec.is_pde:
        data = system_to_dict(spec.system)
    else:
        t = spec.triple
        data = {k: [[[complex(v).real, complex(v).imag] for v in row] for row in getattr(t, k)]
                for k in ("A", "C", "G")}
    text = json.dumps(data, indent=2)
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / f"{args.model}.json").write_text(text)
    else:
        print(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "models":
            return _models(args)
        config = _assemble_config(args)
        out = args.out_dir or (args.config.parent / "out" if args.config else Path("phs-out"))
        base = args.config.parent if args.config else None
        manifest = run_config(config, out, base_dir=base)
    except (PHSError, OSError, json.JSONDecodeError) as exc:
        print(f"phs: error: {exc}", file=sys.stderr)
        return 2
    for name, st in manifest.stages.items():
        line = f"{name}: {st['status']}"
        if st.get("verdict") is not None:
            line += f" verdict={'pass' if st['verdict'] else 'fail'}"
        if "error" in st:
            line += f" ({st['error']})"
        print(line)
    print(f"manifest: {Path(out) / 'manifest.json'}")
    return 0 if manifest.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())

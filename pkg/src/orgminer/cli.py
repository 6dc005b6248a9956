"""Command-line entry point: ``orgminer <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import OrgMinerError, StageError
from .pipeline import STAGES, PipelineConfig, run_pipeline, score_new_record
from .synth import SynthSpec, write_synthetic

# SynthSpec fields that a JSON config may override
SYNTH_KEYS = (
    "n_rows",
    "n_groups",
    "signature_attributes_per_group",
    "noise_rate",
    "seed",
    "disjoint_signatures",
    "missing_rate",
    "background_dominance",
    "min_signature_levels",
    "signature_leak",
)


def _read_json(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _stage_config(args: argparse.Namespace) -> PipelineConfig:
    payload = _read_json(args.config)
    payload["data"] = args.data
    payload["codebook"] = args.codebook
    payload["out"] = args.out
    if args.seed is not None:
        payload["seed"] = args.seed
    return PipelineConfig.from_dict(payload)


def _run_stage(args: argparse.Namespace) -> int:
    config = _stage_config(args)
    stop = None if args.command == "pipeline" else args.command
    bundle = run_pipeline(config, stop_after=stop)
    print(f"{bundle.manifest['status']}: {len(bundle.manifest['files'])} files in {config.out}")
    return 0


def _synth(args: argparse.Namespace) -> int:
    payload = _read_json(args.config)
    unknown = set(payload) - set(SYNTH_KEYS)
    if unknown:
        raise ValueError(f"unknown synth config keys {sorted(unknown)}")
    if args.seed is not None:
        payload["seed"] = args.seed
    spec = dataclasses.replace(SynthSpec(), **payload)
    paths = write_synthetic(spec, args.out)
    for role, path in paths.items():
        print(f"{role}: {path}")
    return 0


def _score(args: argparse.Namespace) -> int:
    scored = score_new_record(args.bundle, args.record)
    print(json.dumps([s.to_dict() for s in scored], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orgminer", description="Informal-group mining for questionnaire data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pipeline",) + STAGES[1:]:
        help_text = "run every stage" if name == "pipeline" else f"run the stages up to and including {name}"
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", required=True, help="questionnaire CSV")
        p.add_argument("--codebook", required=True, help="codebook JSON")
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--out", required=True, help="bundle directory")
        p.add_argument("--seed", type=int)
        p.set_defaults(func=_run_stage)
    p = sub.add_parser("synth", help="write a synthetic dataset, codebook and ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON with SynthSpec overrides")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_synth)
    p = sub.add_parser("score", help="score new records against a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--record", required=True, help="CSV with a header of codebook attributes")
    p.set_defaults(func=_score)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"orgminer: [{exc.stage}] {type(exc.cause).__name__}: {exc.cause}", file=sys.stderr)
        return 2
    except (OrgMinerError, OSError, ValueError) as exc:
        print(f"orgminer: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

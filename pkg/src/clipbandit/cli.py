"""Command line interface: ``clipbandit {select,simulate,evaluate,acf}``.

Exit codes: 0 success, 2 configuration error, 3 input-data error,
4 internal invariant violation.  Errors are reported as one JSON object on
stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .harness import (
    POLICIES,
    acf,
    aggregate_acf,
    between_samples_instance,
    evaluate,
    planted_instance,
    summarize,
    trial_seed,
)
from .pipeline import ALGORITHMS, select_keyframes
from .providers import ScoreFileError, SyntheticSpec, generate_process, load_scores, write_scores
from .selector import ConfigError, SelectionConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

SELECTION_DEFAULTS = {
    "k": 64,
    "clip_seconds": 16.0,
    "alpha": 0.25,
    "q": 4,
    "z": 15,
    "m": None,
    "pulls_per_iteration": 1,
    "max_iterations": None,
    "seed": 0,
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_CONFIG, "usage", f"{self.prog}: {message}")


def _add_selection_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so an explicit flag can override a --config file
    p.add_argument("--frames", dest="k", type=int, help="keyframe budget k (default 64)")
    p.add_argument("--clip-seconds", type=float, help="clip length in seconds (default 16)")
    p.add_argument("--alpha", type=float, help="coarse-set fraction of arms (default 0.25)")
    p.add_argument("--q", type=int, help="initial pulls per arm (default 4)")
    p.add_argument("--z", type=int, help="stage-II pulls per coarse arm (default 15)")
    p.add_argument("--m", type=int, help="number of arms to select (default ceil(k/4))")
    p.add_argument("--pulls-per-iteration", type=int, help="iterative selector pulls per step (default 1)")
    p.add_argument("--max-iterations", type=int, help="iterative selector step cap (default 50*M)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")


def _selection_config(args, base: dict | None = None) -> SelectionConfig:
    values = dict(SELECTION_DEFAULTS)
    if base:
        values.update({k: v for k, v in base.items() if k in SELECTION_DEFAULTS})
    for key in SELECTION_DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return SelectionConfig(**values)
    except (ConfigError, TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clipbandit", description="Budgeted keyframe selection with clip-level bandits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="select keyframes for one video")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scores", help="CSV of per-frame scores (frame_index,score)")
    src.add_argument("--synthetic", help="JSON synthetic process spec")
    p.add_argument("--fps", type=float, help="frame rate of a score file (default 30)")
    p.add_argument("--algorithm", choices=ALGORITHMS, help="arm selector (default two-stage)")
    p.add_argument("--config", help="reuse the config embedded in a previous select output")
    p.add_argument("--output", "-o", help="write here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_selection_flags(p)

    p = sub.add_parser("simulate", help="materialise a synthetic process as score files")
    p.add_argument("--spec", required=True, help="JSON synthetic process spec")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--scores-out", required=True, help="where to write noisy scores")
    p.add_argument("--utility-out", required=True, help="where to write the true utility")

    p = sub.add_parser("evaluate", help="compare policies over seeded synthetic trials")
    p.add_argument("--policies", default="two-stage,uniform", help=f"comma list from {','.join(POLICIES)}")
    p.add_argument("--trials", type=int, default=1)
    inst = p.add_mutually_exclusive_group()
    inst.add_argument("--instance", help="JSON synthetic spec; its seed is replaced per trial")
    inst.add_argument("--suite", choices=("planted", "between-samples"), help="built-in instance family (default planted)")
    p.add_argument("--output", "-o", help="JSON-lines report file (default stdout)")
    p.add_argument("--summary", help="CSV summary file")
    p.add_argument("--workers", type=int, default=1)
    _add_selection_flags(p)

    p = sub.add_parser("acf", help="median autocorrelation of relevance sequences")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", nargs="+", help="one or more score CSV files")
    src.add_argument("--synthetic", help="JSON synthetic spec; sequences differ by seed")
    p.add_argument("--sequences", type=int, default=1, help="number of synthetic sequences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=30.0, help="frame rate of score files")
    p.add_argument("--max-lag-seconds", type=float, default=10.0)
    p.add_argument("--output", "-o", help="CSV output (default stdout)")
    return parser


# ---------------------------------------------------------------------------


def _load_spec(path) -> SyntheticSpec:
    try:
        return SyntheticSpec.from_json(path)
    except FileNotFoundError:
        raise CliError(EXIT_DATA, "input", f"no such file: {path}") from None
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_DATA, "input", f"{path}: {exc}") from None


def _load_score_file(path, fps):
    try:
        return load_scores(path, fps=fps)
    except FileNotFoundError:
        raise CliError(EXIT_DATA, "input", f"no such file: {path}") from None
    except ScoreFileError as exc:
        raise CliError(EXIT_DATA, "input", str(exc)) from None


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_select(args) -> int:
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise CliError(EXIT_CONFIG, "config", f"no such file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, "config", f"{args.config}: {exc}") from None
        base = doc.get("config", doc)
    source = base.get("source", {})
    if args.scores or args.synthetic:
        source = {"scores": args.scores} if args.scores else {"synthetic": args.synthetic}
    if len(source) != 1 or not set(source) <= {"scores", "synthetic"}:
        raise CliError(EXIT_CONFIG, "config", "exactly one of --scores or --synthetic is required")
    algorithm = args.algorithm or base.get("algorithm", "two-stage")
    fps = args.fps if args.fps is not None else base.get("fps", 30.0)
    if not fps > 0:
        raise CliError(EXIT_CONFIG, "config", f"fps must be positive, got {fps}")
    cfg = _selection_config(args, base)

    if "scores" in source:
        provider = _load_score_file(source["scores"], fps)
    else:
        spec = _load_spec(source["synthetic"])
        _, provider = generate_process(spec)
        fps = spec.fps
    try:
        sel, _ = select_keyframes(provider, cfg, algorithm)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None

    config = {"source": source, "algorithm": algorithm, "fps": fps, **cfg.to_dict()}
    if args.format == "csv":
        text = "frame_index\n" + "".join(f"{f}\n" for f in sel.frames)
    else:
        doc = {
            "video": {"frames": provider.total_frames, "fps": fps},
            "config": config,
            "selected_frames": sel.frames,
            "selected_arms": sel.selected_arms,
            "pulls": sel.pulls,
            "frames_seen_fraction": sel.frames_seen_fraction,
            "seed": cfg.seed,
            "warnings": sel.warnings,
        }
        text = json.dumps(doc, indent=2) + "\n"
    _emit(text, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    y, provider = generate_process(spec)
    r = provider.score_many(np.arange(spec.total_frames))
    write_scores(args.scores_out, r)
    write_scores(args.utility_out, y, header=("frame_index", "utility"))
    json.dump({"total_frames": spec.total_frames, "fps": spec.fps, "seed": spec.seed}, sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if bad or not policies:
        raise CliError(EXIT_CONFIG, "config", f"unknown policies {bad}; expected some of {list(POLICIES)}")
    if args.trials < 1 or args.workers < 1:
        raise CliError(EXIT_CONFIG, "config", "--trials and --workers must be >= 1")
    cfg = _selection_config(args)
    if args.instance:
        template = _load_spec(args.instance)
        make_spec = template.with_seed
    elif args.suite == "between-samples":
        make_spec = between_samples_instance
    else:
        make_spec = planted_instance
    try:
        reports = evaluate(policies, make_spec, cfg, args.trials, master_seed=cfg.seed, workers=args.workers)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None
    lines = "".join(json.dumps(r.to_dict()) + "\n" for r in reports)
    _emit(lines, args.output)
    if args.summary:
        rows = summarize(reports)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), args.summary)
    return EXIT_OK


def cmd_acf(args) -> int:
    if args.max_lag_seconds <= 0 or args.sequences < 1:
        raise CliError(EXIT_CONFIG, "config", "--max-lag-seconds and --sequences must be positive")
    if args.scores:
        seqs = [_load_score_file(p, args.fps).scores for p in args.scores]
        fps = args.fps
    else:
        spec = _load_spec(args.synthetic)
        fps = spec.fps
        seqs = []
        for i in range(args.sequences):
            _, prov = generate_process(spec.with_seed(trial_seed(args.seed, i)))
            seqs.append(prov.score_many(np.arange(spec.total_frames)))
    max_lag = int(round(args.max_lag_seconds * fps))
    try:
        curves = [acf(s, max_lag) for s in seqs]
        agg = aggregate_acf(curves, fps)
    except ValueError as exc:
        raise CliError(EXIT_DATA, "input", str(exc)) from None
    _emit(agg.to_csv(), args.output)
    sys.stderr.write(
        json.dumps({"half_life_seconds": agg.half_life_seconds, "n_curves": agg.n_curves, "n_skipped": agg.n_skipped})
        + "\n"
    )
    return EXIT_OK


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate, "evaluate": cmd_evaluate, "acf": cmd_acf}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        err = {"error": exc.kind, "message": str(exc), "exit_code": exc.code}
    except AssertionError as exc:
        err = {"error": "invariant", "message": str(exc) or "internal invariant violated", "exit_code": EXIT_INTERNAL}
    sys.stderr.write(json.dumps(err) + "\n")
    return err["exit_code"]


if __name__ == "__main__":
    sys.exit(main())

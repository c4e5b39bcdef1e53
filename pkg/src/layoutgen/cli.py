"""Command-line entry point.

Subcommands:
    generate      full two-stage run over a layout (or one-object regeneration)
    sog           stage 1 only, for a single object
    compose       stage 2 only, reusing a job directory's stage-1 artifacts
    eval          benchmark metrics over annotation-derived layouts or one job
    ablate-start  grid sweep of the stage-1 start timestep and flat color
    serve         HTTP API (and optionally the editor UI)

Settings precedence: built-in defaults < --config file < --set overrides.
Exit codes: 0 success, 2 invalid input (parse/validation), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import EngineConfig, load_config
from .engine import (
    JobPaths,
    build_backends,
    regenerate_object,
    run_layout,
    run_single_object,
)
from .errors import EngineError, ParseError, ValidationError
from .evaluation import (
    PROTOCOL_NOTES,
    evaluate_pairs,
    format_report,
    prepare_layouts,
    write_report,
)
from .images import load_image, save_image
from .layout import load_layout_file
from .sog import generate_object

log = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser, out_default: str | None = None) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key, e.g. --set sog.t_start=600 (repeatable)",
    )
    parser.add_argument("--out", default=out_default, help="output root directory")


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ValidationError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value
    return overrides


def _load(args) -> EngineConfig:
    return load_config(args.config, overrides=_parse_overrides(args.overrides))


def _out_root(args, config: EngineConfig) -> Path:
    return Path(args.out if args.out else config.output_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutgen",
        description="Training-free layout-conditional image generation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run both stages over a layout file")
    p.add_argument("--layout", help="layout JSON file")
    p.add_argument("--job-id", help="name the job directory (default: timestamped)")
    p.add_argument("--from-job", help="existing job directory (regeneration source)")
    p.add_argument("--regenerate-object", metavar="ID", help="rerun only this object, then recompose")
    p.add_argument("--seed", type=int, help="new seed for --regenerate-object, else scene seed override")
    p.add_argument("--dump-intermediate", metavar="DIR", help="write per-step decoded predictions")
    p.add_argument("--dump-attention", metavar="DIR", help="write attention-surgery heat/group maps")
    _common(p)

    p = sub.add_parser("sog", help="run stage 1 for one object of a layout")
    p.add_argument("--layout", required=True)
    p.add_argument("--object", required=True, metavar="ID")
    p.add_argument("--job-id")
    p.add_argument("--dump-intermediate", metavar="DIR")
    p.add_argument("--dump-attention", metavar="DIR")
    _common(p)

    p = sub.add_parser("compose", help="recompose the scene from a job's stage-1 artifacts")
    p.add_argument("--from-job", required=True, metavar="DIR")
    p.add_argument("--job-id")
    _common(p)

    p = sub.add_parser("eval", help="local CLIP / local IoU metrics")
    p.add_argument("--annotations", help="COCO-style instance annotation JSON")
    p.add_argument("--limit", type=int, help="cap the number of layouts")
    p.add_argument("--min-area-fraction", type=float, default=0.05)
    p.add_argument("--target-size", type=int, default=512)
    p.add_argument("--job", help="score one finished job directory instead")
    p.add_argument("--report", default="report.json", help="JSON report path")
    p.add_argument("--table", help="also write a plain-text table here")
    _common(p)

    p = sub.add_parser("ablate-start", help="sweep start timestep x flat color into a grid image")
    p.add_argument("--layout", required=True)
    p.add_argument("--object", required=True, metavar="ID")
    p.add_argument("--t-start", default="800,600,400,200", help="comma-separated start timesteps")
    p.add_argument("--flat-color", default="-1.0,0.0,1.0", help="comma-separated flat background values")
    p.add_argument("--grid", default="ablation.png", help="output grid image path")
    _common(p)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", help="built editor UI to serve at /")
    p.add_argument("--workers", type=int, help="job worker threads (default from backend safety)")
    _common(p)

    return parser


def _cmd_generate(args) -> int:
    overrides = _parse_overrides(args.overrides)
    if args.regenerate_object is None and args.seed is not None:
        overrides["seed"] = str(args.seed)
    config = load_config(args.config, overrides=overrides)
    out_root = _out_root(args, config)
    if args.regenerate_object:
        if not args.from_job:
            raise ValidationError("--regenerate-object requires --from-job <job dir>")
        scene, paths = regenerate_object(
            args.from_job, args.regenerate_object, config, out_root,
            new_seed=args.seed, job_id=args.job_id,
        )
    else:
        if not args.layout:
            raise ValidationError("generate requires --layout (or --from-job with --regenerate-object)")
        layout = load_layout_file(args.layout)
        scene, paths = run_layout(
            layout, config, out_root,
            job_id=args.job_id,
            dump_intermediate=args.dump_intermediate,
            dump_attention=args.dump_attention,
        )
    print(paths.job_dir)
    return 0


def _cmd_sog(args) -> int:
    config = _load(args)
    layout = load_layout_file(args.layout)
    _, paths = run_single_object(
        layout, args.object, config, _out_root(args, config),
        job_id=args.job_id,
        dump_intermediate=args.dump_intermediate,
        dump_attention=args.dump_attention,
    )
    print(paths.object_dir(args.object))
    return 0


def _cmd_compose(args) -> int:
    config = _load(args)
    source = JobPaths(Path(args.from_job))
    if not source.layout_json.exists():
        raise ValidationError(f"{source.job_dir} is not a job directory (no layout.json)")
    layout = load_layout_file(source.layout_json)
    _, paths = run_layout(
        layout, config, _out_root(args, config),
        job_id=args.job_id,
        reuse_from=source, only_regenerate=[],
        extra_provenance={"recomposed_from": str(source.job_dir)},
    )
    print(paths.job_dir)
    return 0


def _cmd_eval(args) -> int:
    config = _load(args)
    schedule = config.make_schedule()
    backends = build_backends(config, schedule)
    if bool(args.annotations) == bool(args.job):
        raise ValidationError("eval needs exactly one of --annotations or --job")
    pairs = []
    notes: tuple[str, ...] = ()
    if args.job:
        source = JobPaths(Path(args.job))
        if not source.scene_png.exists():
            raise ValidationError(f"{source.job_dir} has no scene.png to score")
        pairs.append((load_image(source.scene_png), load_layout_file(source.layout_json)))
    else:
        layouts = prepare_layouts(
            args.annotations,
            min_area_fraction=args.min_area_fraction,
            target_size=args.target_size,
            limit=args.limit,
        )
        if not layouts:
            raise ValidationError("no layouts survived the area filter")
        out_root = _out_root(args, config)
        for layout in layouts:
            scene, _ = run_layout(layout, config, out_root, backends=backends)
            pairs.append((scene.image, layout))
        notes = PROTOCOL_NOTES
    report = evaluate_pairs(pairs, backends.image_text_embedder, backends.segmenter, notes=notes)
    write_report(report, args.report, args.table)
    print(format_report(report), end="")
    return 0


def _cmd_ablate_start(args) -> int:
    config = _load(args)
    schedule = config.make_schedule()
    backends = build_backends(config, schedule)
    layout = load_layout_file(args.layout)
    spec = layout.object_by_id(args.object)
    t_values = [int(v) for v in args.t_start.split(",") if v.strip()]
    colors = [float(v) for v in args.flat_color.split(",") if v.strip()]
    if not t_values or not colors:
        raise ValidationError("--t-start and --flat-color must list at least one value each")
    base = config.sog_config()
    rows = []
    for t_start in t_values:
        row = []
        for color in colors:
            cfg = replace(base, t_start=t_start, flat_color=color)
            result = generate_object(spec, cfg, backends, schedule)
            row.append(result.image)
        rows.append(np.concatenate(row, axis=1))
    grid = np.concatenate(rows, axis=0)
    save_image(args.grid, grid)
    print(f"{args.grid}: rows t_start={t_values}, columns flat_color={colors}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .jobs import JobManager
    from .server import create_app

    config = _load(args)
    manager = JobManager(config, out_root=_out_root(args, config), max_workers=args.workers)
    app = create_app(manager, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "sog": _cmd_sog,
    "compose": _cmd_compose,
    "eval": _cmd_eval,
    "ablate-start": _cmd_ablate_start,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: unknown id {exc.args[0]!r}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

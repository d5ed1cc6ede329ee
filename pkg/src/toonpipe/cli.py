"""Command-line surface for batch use.

Every subcommand is a thin adapter over one module operation: no numeric
logic lives here.  Runs print a JSON manifest (inputs, effective config,
seed, outputs, config hash) to stdout so experiments are replayable.

Exit codes: 0 success, 1 usage error, 2 processing error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from fractions import Fraction

from . import denoise, evaluate, stylize, tiler, video
from .imagecore import Image, load_image, save_image
from .stylize import StylizeConfig

# the pipeline config doubles as the CLI config-file schema
PipelineConfig = StylizeConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for
    # processing errors, so usage problems are rethrown and mapped to 1
    def error(self, message):
        raise UsageError(message)


def _config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _manifest(subcommand, config, seed, inputs, outputs, results=None) -> dict:
    doc = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "config_hash": _config_hash(config),
    }
    if results is not None:
        doc["results"] = results
    return doc


_CONFIG_FLAGS = (
    ("strength", float),
    ("steps", int),
    ("palette_size", int),
    ("edge_strength", float),
    ("post_denoise", str),
    ("tile", int),
    ("overlap", int),
    ("window", str),
    ("seed", int),
    ("schedule_T", int),
    ("beta_start", float),
    ("beta_end", float),
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config; explicit flags win")
    p.add_argument("--dump-config", action="store_true", help="print effective config and exit")
    for name, typ in _CONFIG_FLAGS:
        flag = "--" + name.replace("_", "-").lower()
        p.add_argument(flag, dest=name, type=typ, default=None)


def _effective_config(args) -> StylizeConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config) as f:
                doc = json.load(f)
        except OSError as e:
            raise UsageError(f"--config: {e}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"--config {args.config}: invalid JSON ({e})") from None
    for name, _ in _CONFIG_FLAGS:
        val = getattr(args, name)
        if val is not None:
            doc[name] = val
    try:
        return StylizeConfig.from_dict(doc)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from None


def _load_images_dir(path) -> list[Image]:
    names = sorted(
        n for n in os.listdir(path) if n.lower().endswith((".png", ".ppm"))
    )
    if not names:
        raise FileNotFoundError(f"no images in {path}")
    return [load_image(os.path.join(path, n)) for n in names]


def _cmd_stylize_image(args):
    cfg = _effective_config(args)
    if args.dump_config:
        return None, cfg.to_json()
    content = load_image(args.content)
    style = load_image(args.style)
    out = stylize.inst_stylize(content, style, cfg)
    save_image(out, args.out)
    return (
        _manifest("stylize-image", asdict(cfg), cfg.seed, [args.content, args.style], [args.out]),
        None,
    )


def _cmd_stylize_video(args):
    cfg = _effective_config(args)
    if args.dump_config:
        return None, cfg.to_json()
    style = load_image(args.style)
    if args.video:
        seq = video.read_y4m(args.video)
        src = args.video
    else:
        seq = video.read_frame_dir(args.frames)
        src = args.frames
    styled = video.stylize_video(
        seq,
        lambda frame: stylize.inst_stylize(frame, style, cfg),
        smoothing=args.smoothing,
        alpha=args.alpha,
    )
    if args.out:
        video.write_y4m(styled, args.out, chroma=args.chroma)
        dst = args.out
    else:
        video.write_frame_dir(styled, args.out_frames)
        dst = args.out_frames
    return _manifest("stylize-video", asdict(cfg), cfg.seed, [src, args.style], [dst]), None


def _cmd_cartoonize(args):
    img = load_image(args.input)
    out = stylize.cartoonize(img, args.palette_size, args.edge_strength)
    save_image(out, args.out)
    config = {"palette_size": args.palette_size, "edge_strength": args.edge_strength}
    return _manifest("cartoonize", config, None, [args.input], [args.out]), None


def _cmd_adaattn(args):
    content = load_image(args.content)
    style = load_image(args.style)
    out = stylize.adaattn_transfer(content, style, levels=args.levels, temperature=args.temperature)
    save_image(out, args.out)
    config = {"levels": args.levels, "temperature": args.temperature}
    return _manifest("adaattn", config, None, [args.content, args.style], [args.out]), None


def _cmd_denoise(args):
    img = load_image(args.input)
    params = denoise.NlmParams(
        h_luma=args.h_luma,
        h_chroma=args.h_chroma,
        template_window=args.template_window,
        search_window=args.search_window,
    )
    out = denoise.denoise_stage(
        img, args.backend, params, tile=args.tile, overlap=args.overlap, window=args.window
    )
    save_image(out, args.out)
    config = {
        "backend": args.backend,
        "h_luma": args.h_luma,
        "h_chroma": args.h_chroma,
        "template_window": args.template_window,
        "search_window": args.search_window,
        "tile": args.tile,
        "overlap": args.overlap,
        "window": args.window,
    }
    return _manifest("denoise", config, None, [args.input], [args.out]), None


def _cmd_evaluate(args):
    generated = _load_images_dir(args.generated)
    styles = _load_images_dir(args.styles)
    contents = _load_images_dir(args.contents)
    if args.embedder == "remote":
        if not args.endpoint:
            raise UsageError("--embedder remote requires --endpoint")
        embedder = lambda img: evaluate.embed_remote(args.endpoint, img, timeout=args.timeout)
    else:
        embedder = evaluate.embed_builtin
    report = evaluate.similarity_report(
        generated, styles, contents, embedder=embedder, method=args.method
    )
    with open(args.out, "w") as f:
        f.write(evaluate.report_to_json(report))
    outputs = [args.out]
    if args.table:
        with open(args.table, "w") as f:
            f.write(evaluate.render_table(report))
        outputs.append(args.table)
    config = {"embedder": args.embedder, "method": args.method, "endpoint": args.endpoint}
    results = {"rows": len(report.rows)}
    return (
        _manifest("evaluate", config, None, [args.generated, args.styles, args.contents], outputs, results),
        None,
    )


def _cmd_metrics(args):
    seq = video.read_y4m(args.video)
    results = {}
    inputs = [args.video]
    if args.flicker:
        results["flicker"] = video.flicker_index(seq)
    if args.consistency:
        source = video.read_y4m(args.consistency)
        inputs.append(args.consistency)
        results["temporal_consistency_ratio"] = video.temporal_consistency_ratio(seq, source)
    if not results:
        raise UsageError("metrics needs --flicker and/or --consistency SOURCE")
    config = {"flicker": bool(args.flicker), "consistency": args.consistency}
    return _manifest("metrics", config, None, inputs, [], results), None


def build_parser() -> _Parser:
    parser = _Parser(prog="toonpipe", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("stylize-image", help="stylize one image")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_stylize_image)

    p = sub.add_parser("stylize-video", help="stylize every frame of a video")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--video", help="input .y4m")
    src.add_argument("--frames", help="input frame directory")
    dst = p.add_mutually_exclusive_group(required=True)
    dst.add_argument("--out", help="output .y4m")
    dst.add_argument("--out-frames", help="output frame directory")
    p.add_argument("--style", required=True)
    p.add_argument("--smoothing", choices=["none", "ema"], default="none")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--chroma", choices=["444", "420jpeg"], default="444")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_stylize_video)

    p = sub.add_parser("cartoonize", help="median-cut palette cartoonization")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--palette-size", type=int, default=16)
    p.add_argument("--edge-strength", type=float, default=0.3)
    p.set_defaults(fn=_cmd_cartoonize)

    p = sub.add_parser("adaattn", help="attention-matched statistics baseline")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--temperature", type=float, default=1.0)
    p.set_defaults(fn=_cmd_adaattn)

    p = sub.add_parser("denoise", help="post-denoise an image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["none", "nlm", "tiled-nlm"], default="nlm")
    p.add_argument("--h-luma", type=float, default=3 / 255)
    p.add_argument("--h-chroma", type=float, default=3 / 255)
    p.add_argument("--template-window", type=int, default=7)
    p.add_argument("--search-window", type=int, default=21)
    p.add_argument("--tile", type=int, default=48)
    p.add_argument("--overlap", type=int, default=16)
    p.add_argument("--window", choices=["rect", "linear", "hann"], default="hann")
    p.set_defaults(fn=_cmd_denoise)

    p = sub.add_parser("evaluate", help="similarity report for generated images")
    p.add_argument("--generated", required=True)
    p.add_argument("--styles", required=True)
    p.add_argument("--contents", required=True)
    p.add_argument("--embedder", choices=["builtin", "remote"], default="builtin")
    p.add_argument("--endpoint", help="remote embedding service URL")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--method", default="toonpipe")
    p.add_argument("--out", required=True)
    p.add_argument("--table", help="also render the text table to this file")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("metrics", help="temporal metrics of a video")
    p.add_argument("--video", required=True)
    p.add_argument("--flicker", action="store_true")
    p.add_argument("--consistency", metavar="SOURCE", help="source .y4m for the ratio")
    p.set_defaults(fn=_cmd_metrics)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        manifest, raw = args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if raw is not None:
        print(raw)
    else:
        print(json.dumps(manifest))
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

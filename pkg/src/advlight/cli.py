"""Command-line interface.

Subcommands: attack (batch run from a manifest), lightgen (render one
lighting image), eval-captions (BLEU / ROUGE-L / CIDEr over a fixture file),
niqe-fit / niqe-score (no-reference quality model), check-grad (finite
difference verification of the analytic gradients).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import PngError, UnsupportedFormatError
from .gradcheck import check_lightgen, check_relight, check_victim
from .harness import RunConfig, load_config, load_manifest, run_batch, write_report
from .imagecore import png_decode, png_encode
from .lightgen import Direction, LightingParams, generate_lighting_image, parse_hex_color
from .metrics.captions import bleu, cider, rouge_l
from .metrics.niqe import load_niqe_model, niqe_fit, niqe_score, save_niqe_model


def _cmd_attack(args) -> int:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.backend:
        overrides["backend"] = args.backend
    if args.endpoint:
        overrides["endpoint"] = args.endpoint
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    manifest = load_manifest(args.manifest)
    report = run_batch(config, manifest)
    write_report(report, args.out)
    agg = report.aggregates
    print(f"records: {agg['n_records']}  ok: {agg['n_ok']}  failed: {agg['n_failed']}")
    for key in ("mean_initial_loss", "mean_final_loss", "mean_loss_gain", "mean_match_sim_clean", "mean_match_sim_adv"):
        if key in agg:
            print(f"{key}: {agg[key]:.6f}")
    for key in ("mean_niqe_clean", "mean_niqe_adv"):
        if key in agg:
            print(f"{key}: {agg[key]:.4f}")
    print(f"report written to {args.out}")
    return 0 if agg["n_failed"] == 0 else 1


def _parse_size(text: str):
    try:
        h_str, w_str = text.lower().split("x")
        height, width = int(h_str), int(w_str)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be HxW, got {text!r}")
    if height < 1 or width < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return height, width


def _cmd_lightgen(args) -> int:
    params = LightingParams(
        start_color=parse_hex_color(args.start),
        end_color=parse_hex_color(args.end),
        direction=Direction(args.direction),
        weight=args.weight,
    )
    height, width = args.size
    image = generate_lighting_image(params, height, width)
    Path(args.out).write_bytes(png_encode(image))
    print(f"wrote {width}x{height} lighting image to {args.out}")
    return 0


def _cmd_eval_captions(args) -> int:
    candidates, references = [], []
    with open(args.fixtures) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "candidate" not in obj or "references" not in obj:
                print(f"line {lineno}: need 'candidate' and 'references'", file=sys.stderr)
                return 2
            candidates.append(obj["candidate"])
            references.append(list(obj["references"]))
    if not candidates:
        print("no fixture rows", file=sys.stderr)
        return 2
    bleu_score = bleu(candidates, references)
    rouge_mean = sum(rouge_l(c, r) for c, r in zip(candidates, references)) / len(candidates)
    cider_score = cider(candidates, references, corpus=references)
    print(f"candidates: {len(candidates)}")
    print(f"bleu4: {bleu_score:.6f}")
    print(f"rouge_l: {rouge_mean:.6f}")
    print(f"cider: {cider_score:.6f}")
    return 0


def _iter_pngs(directory: Path):
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")


def _cmd_niqe_fit(args) -> int:
    paths = _iter_pngs(Path(args.images))
    images = []
    for path in paths:
        try:
            images.append(png_decode(path.read_bytes()))
        except (PngError, UnsupportedFormatError) as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
    if not images:
        print("no decodable PNG images found", file=sys.stderr)
        return 2
    model = niqe_fit(images)
    save_niqe_model(model, args.out)
    print(f"fit on {model.meta['corpus_size']} images, {model.meta['patch_count']} patches")
    print(f"model written to {args.out}")
    return 0


def _cmd_niqe_score(args) -> int:
    model = load_niqe_model(args.model)
    image = png_decode(Path(args.image).read_bytes())
    score = niqe_score(model, image)
    print(f"niqe: {score:.6f}")
    return 0


def _cmd_check_grad(args) -> int:
    suites = {"lightgen": check_lightgen, "relight": check_relight, "victim": check_victim}
    names = [args.module] if args.module else list(suites)
    ok = True
    for name in names:
        result = suites[name]()
        status = "PASS" if result.passed else "FAIL"
        ok = ok and result.passed
        print(
            f"{result.module}: {result.instances} instances, "
            f"max rel err {result.max_rel_err:.3e} (tol {result.tolerance:.1e}) {status}"
        )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advlight", description="Adversarial relighting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="run a batch attack over a manifest")
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--manifest", required=True, help="JSON-lines dataset manifest")
    p.add_argument("--out", required=True, help="output directory for report + PNGs")
    p.add_argument("--backend", choices=["surrogate", "remote"], help="override backend mode")
    p.add_argument("--endpoint", help="remote backend base URL")
    p.add_argument("--seed", type=int, help="override master seed")
    p.add_argument("--workers", type=int, help="override worker count")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("lightgen", help="render a parametric lighting image")
    p.add_argument("--start", required=True, help='start color "#RRGGBB"')
    p.add_argument("--end", required=True, help='end color "#RRGGBB"')
    p.add_argument("--direction", required=True, choices=[d.value for d in Direction])
    p.add_argument("--weight", type=float, required=True, help="blend weight in [0, 2]")
    p.add_argument("--size", type=_parse_size, required=True, help="output size HxW")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=_cmd_lightgen)

    p = sub.add_parser("eval-captions", help="score candidates against references")
    p.add_argument(
        "--fixtures",
        required=True,
        help='JSON-lines file, each line {"candidate": str, "references": [str, ...]}',
    )
    p.set_defaults(func=_cmd_eval_captions)

    p = sub.add_parser("niqe-fit", help="fit a quality model on a pristine image directory")
    p.add_argument("--images", required=True, help="directory of PNG images")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=_cmd_niqe_fit)

    p = sub.add_parser("niqe-score", help="score one image against a fitted model")
    p.add_argument("--model", required=True, help="model JSON from niqe-fit")
    p.add_argument("--image", required=True, help="PNG image to score")
    p.set_defaults(func=_cmd_niqe_score)

    p = sub.add_parser("check-grad", help="finite-difference gradient verification")
    p.add_argument("--module", choices=["lightgen", "relight", "victim"], help="single suite (default: all)")
    p.set_defaults(func=_cmd_check_grad)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, PngError, UnsupportedFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

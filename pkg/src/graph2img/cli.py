"""Command-line surface.

Subcommands: caption, prompts, generate, edit, train-var.  Exit codes:
0 success, 2 validation error, 3 I/O error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .captions import DEFAULT_RELATION_CAP, s2cap, sg2prompts
from .diffusion import (
    DEFAULT_SAMPLE_STEPS,
    DEFAULT_SKIP,
    EditConfig,
    GaussianAnalyticDenoiser,
    build_schedule,
    latent_from_json,
    latent_to_json,
)
from .errors import NumericDivergenceError, ValidationError
from .pipeline import (
    EditRequest,
    GenerateRequest,
    PipelineConfig,
    PipelineModels,
    apply_instruction,
    load_extraction,
    parse_edit_script,
    unified_dispatch,
)
from .pixmaps import image_to_ppm, latent_from_pgm, latent_to_pgm
from .vargen import (
    TokenSequence,
    init_ar_params,
    params_from_json,
    params_to_json,
    train_step,
)

# the editor's stand-in noise predictor: analytic gaussian with this spread
DEFAULT_EDIT_SIGMA = 0.5

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _prefixed(prefix: str, text: str) -> str:
    return f"{prefix} {text}" if text else prefix


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _cmd_caption(args) -> int:
    graph = load_extraction(args.graph)
    caption = s2cap(graph, args.cap)
    print(_prefixed("CAP:", caption.text))
    return EXIT_OK


def _cmd_prompts(args) -> int:
    graph = load_extraction(args.graph)
    script = parse_edit_script(_read_text(args.script))
    edited = apply_instruction(graph, script)
    pair = sg2prompts(graph, edited, args.cap)
    print(_prefixed("SRC:", pair.source))
    print(_prefixed("TGT:", pair.target))
    return EXIT_OK


def _cmd_generate(args) -> int:
    graph = load_extraction(args.graph)
    params = params_from_json(_read_text(args.model))
    models = PipelineModels(ar_params=params)
    config = PipelineConfig(cap=args.cap, temperature=args.temperature, seed=args.seed)
    image = unified_dispatch(GenerateRequest(graph=graph), models, config)
    Path(args.output).write_text(image_to_ppm(image), encoding="utf-8")
    return EXIT_OK


def _load_latent(path: str):
    text = _read_text(path)
    if path.endswith(".pgm"):
        return latent_from_pgm(text)
    values, shape = latent_from_json(text)
    return values, shape


def _cmd_edit(args) -> int:
    values, shape = _load_latent(args.latent)
    graph = load_extraction(args.graph)
    script = parse_edit_script(_read_text(args.script))
    cfg = EditConfig(
        guidance_scale=args.scale,
        w_src=args.wsrc,
        w_tgt=args.wtgt,
        steps=args.steps,
        skip=args.skip,
    )
    models = PipelineModels(
        denoiser=GaussianAnalyticDenoiser(sigma=DEFAULT_EDIT_SIGMA),
        schedule=build_schedule(sample_steps=args.steps),
    )
    config = PipelineConfig(cap=args.cap, seed=args.seed, edit=cfg)
    request = EditRequest(source_latent=values, graph=graph, instruction=script)
    result = unified_dispatch(request, models, config)
    if args.output.endswith(".pgm"):
        if shape is None:
            side = math.isqrt(result.size)
            if side * side != result.size:
                raise ValidationError(
                    f"cannot infer a PGM shape for a latent of length {result.size}; use a .json output"
                )
            shape = (side, side)
        Path(args.output).write_text(latent_to_pgm(result, shape), encoding="utf-8")
    else:
        Path(args.output).write_text(latent_to_json(result, shape), encoding="utf-8")
    return EXIT_OK


def _cmd_train_var(args) -> int:
    doc = json.loads(_read_text(args.dataset))
    if not isinstance(doc, dict) or not isinstance(doc.get("examples"), list) or not doc["examples"]:
        raise ValidationError("dataset needs a non-empty 'examples' array")
    batch = []
    for i, ex in enumerate(doc["examples"]):
        try:
            batch.append((ex["caption"], TokenSequence(tokens=tuple(ex["tokens"]), grid=tuple(ex["grid"]))))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"dataset example #{i}: {e}") from e
    model_cfg = doc.get("model", {})
    params = init_ar_params(
        vocab_size=model_cfg.get("codebook_size", 32),
        embed_dim=model_cfg.get("embed_dim", 16),
        width=model_cfg.get("width", 32),
        seed=doc.get("seed", 0),
    )
    loss = float("nan")
    for _ in range(args.steps):
        params, loss = train_step(batch, params, args.lr)
    Path(args.output).write_text(params_to_json(params), encoding="utf-8")
    print(f"steps={args.steps} mean_nll={loss:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graph2img", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("caption", help="caption a scene graph")
    p.add_argument("graph")
    p.add_argument("--cap", type=int, default=DEFAULT_RELATION_CAP)
    p.set_defaults(func=_cmd_caption)

    p = sub.add_parser("prompts", help="source/target prompts for an edit script")
    p.add_argument("graph")
    p.add_argument("script")
    p.add_argument("--cap", type=int, default=DEFAULT_RELATION_CAP)
    p.set_defaults(func=_cmd_prompts)

    p = sub.add_parser("generate", help="sample an image from a scene graph")
    p.add_argument("graph")
    p.add_argument("--model", required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=DEFAULT_RELATION_CAP)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("edit", help="edit a latent according to an edit script")
    p.add_argument("latent", help="source latent (.pgm or .json)")
    p.add_argument("graph")
    p.add_argument("script")
    p.add_argument("--steps", type=int, default=DEFAULT_SAMPLE_STEPS)
    p.add_argument("--skip", type=int, default=DEFAULT_SKIP)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--wsrc", type=float, default=0.5)
    p.add_argument("--wtgt", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0, help="accepted for interface parity; the editor is deterministic")
    p.add_argument("--cap", type=int, default=DEFAULT_RELATION_CAP)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("train-var", help="train the toy next-token model")
    p.add_argument("dataset")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_train_var)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericDivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

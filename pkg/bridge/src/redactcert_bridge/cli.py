"""Bridge command line: build bundles, inspect predictions, serve."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from .bundle_builder import build_bundle
from .config import BridgeConfig, BridgeError
from .models import evaluate_flat, load_model
from .preprocess import load_image, preprocess
from .server import CaseRegistry, serve_stdio, serve_tcp


def _config_from(args) -> BridgeConfig:
    return BridgeConfig(
        model=args.model,
        preprocessing=args.preprocessing,
        ig_steps=args.steps,
        segmentation=args.segmentation,
        grid_rows=args.grid_rows,
        grid_cols=args.grid_cols,
        sam_checkpoint=args.sam_checkpoint,
        seed=args.seed,
        host=args.host,
        port=args.port,
    )


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--model", default="toy-cnn",
                   choices=["toy-cnn", "vgg16", "resnet50", "inception_v3"])
    p.add_argument("--preprocessing", default="resize", choices=["resize", "pad"])
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--segmentation", default="grid", choices=["sam", "grid"])
    p.add_argument("--grid-rows", type=int, default=8, dest="grid_rows")
    p.add_argument("--grid-cols", type=int, default=8, dest="grid_cols")
    p.add_argument("--sam-checkpoint", default=None, dest="sam_checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7733)


def cmd_build_bundle(args) -> int:
    config = _config_from(args)
    labels = [int(x) for x in args.labels.split(",") if x.strip()]
    path = build_bundle(args.image, config, labels, args.out)
    print(f"bundle: {path}")
    return 0


def cmd_top(args) -> int:
    config = _config_from(args)
    loaded = load_model(config)
    flat = preprocess(load_image(args.image), loaded, config.preprocessing)
    probs = evaluate_flat(loaded, flat)
    order = np.argsort(-probs)[: args.k]
    for i in order:
        print(f"{int(i)}\t{loaded.label_names[int(i)]}\t{probs[int(i)]:.6f}")
    return 0


def cmd_serve(args) -> int:
    config = _config_from(args)
    loaded = load_model(config)
    registry = CaseRegistry()
    for bundle_dir in args.bundle:
        digest = registry.register_bundle(bundle_dir, loaded)
        print(f"registered case {digest[:12]}... from {bundle_dir}", file=sys.stderr)
    if args.stdio:
        serve_stdio(registry)
        return 0
    server = serve_tcp(registry, config.host, config.port)
    print(f"serving on {config.host}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redactcert-bridge",
        description="Serve image classifiers and build case bundles for the "
        "redaction-certificate engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-bundle", help="preprocess, segment, attribute, and write a bundle")
    p.add_argument("image")
    p.add_argument("--labels", required=True, help="comma list of class indices of interest")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_build_bundle)

    p = sub.add_parser("top", help="print the top-k predictions for an image")
    p.add_argument("image")
    p.add_argument("--k", type=int, default=5)
    _add_model_flags(p)
    p.set_defaults(fn=cmd_top)

    p = sub.add_parser("serve", help="serve registered bundles over the wire protocol")
    p.add_argument("--bundle", action="append", default=[], help="bundle directory (repeatable)")
    p.add_argument("--stdio", action="store_true", help="serve over stdin/stdout instead of TCP")
    _add_model_flags(p)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

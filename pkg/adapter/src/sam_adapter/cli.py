"""`sam-adapter serve`: run the mask service."""
from __future__ import annotations

import argparse

import uvicorn

from .app import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sam-adapter")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("serve", help="serve /v1/auto_masks and /v1/segment")
    p.add_argument("--model", choices=("mock", "real"), default="mock")
    p.add_argument("--weights", help="checkpoint path (real mode)")
    p.add_argument("--backbone", default="vit_h",
                   help="registry key of the backbone (real mode)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8192)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    app = create_app(model=args.model, weights=args.weights, backbone=args.backbone)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command line entry point: advlight-shim serve."""

import argparse

from .app import create_app
from .config import DEFAULT_MAX_REQUEST_BYTES, ShimConfig


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advlight-shim", description="Serve the wire protocol over HTTP.")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--relight-model", default="echo", help="relight model id (default: echo)")
    p.add_argument("--victim-model", default="echo", help="victim model id (default: echo)")
    p.add_argument("--device", default="cpu", help="device selector passed to model constructors")
    p.add_argument(
        "--max-request-bytes",
        type=int,
        default=DEFAULT_MAX_REQUEST_BYTES,
        help="reject request bodies larger than this (default: 64 MiB)",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ShimConfig(
        host=args.host,
        port=args.port,
        relight_model=args.relight_model,
        victim_model=args.victim_model,
        device=args.device,
        max_request_bytes=args.max_request_bytes,
    )
    app = create_app(config)
    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

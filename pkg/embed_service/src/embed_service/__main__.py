"""Entry point: `embed-service` or `python -m embed_service`."""

import argparse

import uvicorn

from .app import create_app
from .config import ServiceConfig


def main():
    parser = argparse.ArgumentParser(prog="embed-service", description=__doc__)
    parser.add_argument("--host", default=None, help="bind address (or LISTEN_ADDR env)")
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--model", default=None, help="model name (or MODEL_NAME env)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-image-bytes", type=int, default=None)
    args = parser.parse_args()

    overrides = {"device": args.device}
    if args.host is not None:
        overrides["host"] = args.host
    if args.port is not None:
        overrides["port"] = args.port
    if args.model is not None:
        overrides["model_name"] = args.model
    if args.max_image_bytes is not None:
        overrides["max_image_bytes"] = args.max_image_bytes
    config = ServiceConfig.from_env(**overrides)

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()

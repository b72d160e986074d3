"""Run the server: ``python -m predictor_server [flags]``.

Flags override PREDICTOR_* environment variables, which override defaults.
"""

import argparse

import uvicorn

from .app import create_app
from .config import ServerConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="predictor-server")
    parser.add_argument("--model", default=None, help="HF model id or local path")
    parser.add_argument("--device", default=None)
    parser.add_argument("--max-batch", type=int, default=None)
    parser.add_argument("--max-seq", type=int, default=None)
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args(argv)

    config = ServerConfig.from_env(
        model=args.model,
        device=args.device,
        max_batch_size=args.max_batch,
        max_seq_len=args.max_seq,
        host=args.host,
        port=args.port,
    )
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

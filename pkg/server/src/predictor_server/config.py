"""Server configuration from environment variables or CLI flags."""

from __future__ import annotations

import os
from dataclasses import dataclass

ENV_PREFIX = "PREDICTOR_"


@dataclass(frozen=True)
class ServerConfig:
    """Runtime knobs for the masked-LM infill server.

    ``max_seq_len`` is a hard subword budget: requests whose concatenated
    encoding exceeds it are rejected with 413, never silently truncated.
    """

    model: str = "xlm-roberta-base"
    device: str = "cpu"
    max_batch_size: int = 16
    max_seq_len: int = 256
    host: str = "127.0.0.1"
    port: int = 8900

    @classmethod
    def from_env(cls, **overrides) -> "ServerConfig":
        def env(name, cast, default):
            raw = os.environ.get(ENV_PREFIX + name)
            return cast(raw) if raw is not None else default

        values = {
            "model": env("MODEL", str, cls.model),
            "device": env("DEVICE", str, cls.device),
            "max_batch_size": env("MAX_BATCH", int, cls.max_batch_size),
            "max_seq_len": env("MAX_SEQ", int, cls.max_seq_len),
            "host": env("HOST", str, cls.host),
            "port": env("PORT", int, cls.port),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

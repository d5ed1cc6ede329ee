"""Deploy-time configuration, settable via flags or environment."""

from __future__ import annotations

import os
from dataclasses import dataclass

MIN_IMAGE_BYTES = 1 << 20  # the cap itself must allow at least 1 MiB uploads
DEFAULT_MAX_IMAGE_BYTES = 16 << 20
DEFAULT_MODEL = "histogram-v1"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8901
    model_name: str = DEFAULT_MODEL
    device: str = "cpu"
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES

    def __post_init__(self):
        if self.max_image_bytes < MIN_IMAGE_BYTES:
            raise ValueError("max_image_bytes must be at least 1 MiB")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        addr = os.environ.get("LISTEN_ADDR")
        if addr and "host" not in overrides and "port" not in overrides:
            host, _, port = addr.rpartition(":")
            overrides["host"] = host or "127.0.0.1"
            overrides["port"] = int(port)
        if "model_name" not in overrides and os.environ.get("MODEL_NAME"):
            overrides["model_name"] = os.environ["MODEL_NAME"]
        return cls(**overrides)

"""Image-embedding microservice.

Wire protocol:
  POST /embed   body: PNG bytes             -> {"embedding": [...], "dim": N, "model": name}
  GET  /healthz                             -> {"status": "ok", "model": name}

Embeddings are L2-normalized server-side and deterministic per
(model, image).
"""

from .config import ServiceConfig
from .app import create_app

__all__ = ["ServiceConfig", "create_app"]

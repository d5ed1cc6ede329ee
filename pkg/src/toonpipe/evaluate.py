"""Embedding-similarity evaluation harness.

Scores generated images against their style and content sources by cosine
similarity of image embeddings, with a built-in deterministic embedder and a
client for a remote embedding service.  Reports serialize to JSON and render
as an aligned text table with 4-decimal scores.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np
import requests

from .imagecore import Image, encode_png
from .stylize import style_embed


class RemoteEmbedError(Exception):
    """Base for remote-embedding failures."""


class EmbedTimeoutError(RemoteEmbedError):
    """Service did not answer within the timeout; no retry is attempted."""


class EmbedHttpError(RemoteEmbedError):
    """Service answered with a non-200 status."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"embedding service returned {status}: {detail}")
        self.status = status


class EmbedResponseError(RemoteEmbedError):
    """Response body is not the expected JSON document."""


class EmbedDimensionError(RemoteEmbedError):
    """Declared dim field disagrees with the embedding length."""


@dataclass(frozen=True)
class Embedding:
    """Unit-norm feature vector plus the tag of the embedder that made it."""

    values: np.ndarray
    source: str = "builtin"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding entries must be finite")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding must be unit norm, got {norm}")
        if self.source == "builtin" and v.min() < 0:
            raise ValueError("builtin embeddings are non-negative")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size


def embed_builtin(img: Image) -> Embedding:
    """Histogram descriptor embedding; same construction as the style embed."""
    return Embedding(style_embed(img), source="builtin")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Dot product of unit vectors, clipped into [-1, 1].

    Builtin embeddings are non-negative, so their similarities land in
    [0, 1].
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


def embed_remote(endpoint: str, img: Image, timeout: float = 10.0) -> Embedding:
    """Fetch an embedding from a remote service.

    POSTs the PNG-encoded image to {endpoint}/embed and expects a JSON body
    {"embedding": [...], "dim": int, "model": str}.  The vector is
    re-normalized to unit norm client-side.  Never retries; callers own any
    retry policy.
    """
    url = endpoint.rstrip("/") + "/embed"
    try:
        resp = requests.post(
            url,
            data=encode_png(img),
            headers={"Content-Type": "image/png"},
            timeout=timeout,
        )
    except requests.exceptions.Timeout as e:
        raise EmbedTimeoutError(f"no response from {url} within {timeout}s") from e
    if resp.status_code != 200:
        raise EmbedHttpError(resp.status_code, resp.text[:200])
    try:
        doc = resp.json()
    except ValueError as e:
        raise EmbedResponseError(f"response is not JSON: {e}") from None
    if not isinstance(doc, dict) or not {"embedding", "dim", "model"} <= set(doc):
        raise EmbedResponseError("response missing embedding/dim/model fields")
    vec = np.asarray(doc["embedding"], dtype=np.float64)
    if vec.ndim != 1 or vec.size != int(doc["dim"]):
        raise EmbedDimensionError(
            f"declared dim {doc['dim']} but got {vec.size} values"
        )
    norm = float(np.linalg.norm(vec))
    if norm == 0 or not np.isfinite(norm):
        raise EmbedResponseError("embedding vector is zero or non-finite")
    return Embedding(vec / norm, source=f"remote({doc['model']})")


@dataclass(frozen=True)
class SimilarityReport:
    """Per-image generated-vs-style and generated-vs-content scores."""

    rows: tuple
    embedder: str
    method: str

    def __post_init__(self):
        if not self.rows:
            raise ValueError("report needs at least one row")
        for label, gen_style, gen_content in self.rows:
            if self.embedder == "builtin":
                for v in (gen_style, gen_content):
                    if not 0.0 <= v <= 1.0:
                        raise ValueError(f"builtin score out of [0, 1]: {v}")


Embedder = Callable[[Image], Embedding]


def similarity_report(
    generated: Sequence[Image],
    styles: Sequence[Image],
    contents: Sequence[Image],
    embedder: Embedder = embed_builtin,
    method: str = "toonpipe",
) -> SimilarityReport:
    """Embed every triple and score generated-vs-style / generated-vs-content."""
    if not generated:
        raise ValueError("need at least one generated image")
    if not (len(generated) == len(styles) == len(contents)):
        raise ValueError(
            f"list lengths differ: {len(generated)} generated, "
            f"{len(styles)} styles, {len(contents)} contents"
        )
    rows = []
    tag = None
    for i, (gen, sty, con) in enumerate(zip(generated, styles, contents)):
        e_gen = embedder(gen)
        e_sty = embedder(sty)
        e_con = embedder(con)
        tag = e_gen.source
        rows.append(
            (f"Img{i + 1}", cosine_similarity(e_gen, e_sty), cosine_similarity(e_gen, e_con))
        )
    return SimilarityReport(rows=tuple(rows), embedder=tag, method=method)


def report_to_json(report: SimilarityReport) -> str:
    return json.dumps(
        {
            "method": report.method,
            "embedder": report.embedder,
            "rows": [
                {"label": label, "gen_style": gs, "gen_content": gc}
                for label, gs, gc in report.rows
            ],
        }
    )


def report_from_json(text: str) -> SimilarityReport:
    doc = json.loads(text)
    rows = tuple((r["label"], r["gen_style"], r["gen_content"]) for r in doc["rows"])
    return SimilarityReport(rows=rows, embedder=doc["embedder"], method=doc["method"])


_COL_STYLE = "Generated & Style Img"
_COL_CONTENT = "Generated & Content Img"


def render_table(report: SimilarityReport) -> str:
    """Aligned text table, scores at 4-decimal fixed point."""
    label_w = max(len("Img"), max(len(r[0]) for r in report.rows))
    lines = [f"{'':<{label_w}}  {_COL_STYLE}  {_COL_CONTENT}"]
    for label, gen_style, gen_content in report.rows:
        lines.append(
            f"{label:<{label_w}}  {gen_style:<{len(_COL_STYLE)}.4f}  {gen_content:.4f}"
        )
    return "\n".join(lines) + "\n"

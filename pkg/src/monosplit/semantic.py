"""Per-class semantic feature matrices.

Deep embeddings are computed by an external provider (file or HTTP); this
module normalizes each vector to unit length and enforces shape/ordering
contracts. A self-contained TF-IDF variant over source tokens and
comments is provided as the no-external-model alternative.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from .ingest import ProjectGraph

log = logging.getLogger(__name__)


class FeatureError(Exception):
    """Raised for malformed or incomplete feature inputs."""


@dataclass
class FeatureMatrix:
    rows: np.ndarray  # (Y, d) float64, ordered by class_id
    kind: str  # "embedding" | "tfidf" | "structural-as-features"
    zero_rows: list[int] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rows": self.rows.tolist(), "zero_rows": self.zero_rows}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureMatrix":
        return cls(
            rows=np.asarray(data["rows"], dtype=np.float64),
            kind=str(data["kind"]),
            zero_rows=[int(i) for i in data.get("zero_rows", [])],
        )


def _normalize_rows(rows: np.ndarray) -> tuple[np.ndarray, list[int]]:
    norms = np.linalg.norm(rows, axis=1)
    zero_rows = [int(i) for i in np.nonzero(norms == 0)[0]]
    out = rows.copy()
    nonzero = norms > 0
    out[nonzero] = rows[nonzero] / norms[nonzero, None]
    return out, zero_rows


def _assemble_vectors(
    vectors: dict[int, list[float]], expected_y: int, source: str
) -> FeatureMatrix:
    missing = [i for i in range(expected_y) if i not in vectors]
    if missing:
        raise FeatureError(f"{source}: missing class ids {missing}")
    dims = {len(v) for v in vectors.values()}
    if len(dims) != 1:
        raise FeatureError(f"{source}: inconsistent vector dimensions {sorted(dims)}")
    d = dims.pop()
    if d < 2:
        raise FeatureError(f"{source}: vector dimension {d} < 2")
    rows = np.asarray([vectors[i] for i in range(expected_y)], dtype=np.float64)
    if not np.isfinite(rows).all():
        raise FeatureError(f"{source}: non-finite embedding values")
    normalized, zero_rows = _normalize_rows(rows)
    if zero_rows:
        log.warning("%s: zero-norm embedding rows for classes %s", source, zero_rows)
    return FeatureMatrix(rows=normalized, kind="embedding", zero_rows=zero_rows)


def load_embeddings(path: str | Path, expected_y: int) -> FeatureMatrix:
    """Load an embedding file (array of {class_id, vector}) and
    unit-normalize each row. Zero vectors stay zero and are flagged."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise FeatureError("embedding file must be an array of {class_id, vector}")
    vectors: dict[int, list[float]] = {}
    for record in data:
        if "class_id" not in record or "vector" not in record:
            raise FeatureError("embedding record missing class_id or vector")
        vectors[int(record["class_id"])] = record["vector"]
    return _assemble_vectors(vectors, expected_y, str(path))


def fetch_embeddings(
    endpoint: str,
    records: list[dict],
    batch_size: int = 64,
    client: httpx.Client | None = None,
    retry_base_delay: float = 0.5,
) -> FeatureMatrix:
    """POST request records to an embedding provider in batches and
    assemble the responses exactly as load_embeddings would.

    Each batch is retried up to 3 times with exponential backoff before
    the whole fetch fails; a response missing any requested class_id is
    an immediate contract violation.
    """
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=30.0)
    vectors: dict[int, list[float]] = {}
    try:
        for start in range(0, len(records), batch_size):
            batch = records[start : start + batch_size]
            payload = _post_with_retries(client, endpoint, batch, retry_base_delay)
            for item in payload:
                vectors[int(item["class_id"])] = item["vector"]
    finally:
        if own_client:
            client.close()
    return _assemble_vectors(vectors, len(records), endpoint)


def _post_with_retries(
    client: httpx.Client, endpoint: str, batch: list[dict], base_delay: float
) -> list[dict]:
    attempts = 3
    for attempt in range(attempts):
        try:
            response = client.post(endpoint, json=batch)
            response.raise_for_status()
            return response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            if attempt == attempts - 1:
                raise FeatureError(f"embedding provider failed after {attempts} attempts: {exc}") from exc
            delay = base_delay * (2 ** attempt)
            log.warning("embedding request failed (%s), retrying in %.1fs", exc, delay)
            time.sleep(delay)
    raise AssertionError("unreachable")


# --------------------------------------------------------------------------
# TF-IDF variant

# fixed 30-word stoplist: common English filler plus Java boilerplate
STOPWORDS = frozenset("""
    the a an and or of to in is it for this that with as on by be are was
    if else return new null true false void public private
""".split())
assert len(STOPWORDS) == 30

_WORD_RE = re.compile(r"[A-Za-z0-9]+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def split_identifier(token: str) -> list[str]:
    """Lowercased word parts of a source token: split on non-alphanumerics,
    underscores, and camelCase humps; drop single characters and stopwords."""
    parts: list[str] = []
    for chunk in _WORD_RE.findall(token):
        for part in _CAMEL_RE.split(chunk):
            word = part.lower()
            if len(word) > 1 and word not in STOPWORDS:
                parts.append(word)
    return parts


def class_document(tokens: list[str], comments: list[str]) -> list[str]:
    words: list[str] = []
    for token in tokens:
        words.extend(split_identifier(token))
    for comment in comments:
        for raw in comment.split():
            words.extend(split_identifier(raw))
    return words


def tfidf_features(graph: ProjectGraph) -> FeatureMatrix:
    """TF-IDF rows over per-class documents (source tokens plus word-split
    comments), idf = ln(Y / df), rows unit-normalized.

    A term present in every class gets idf 0 and therefore weight 0; a
    class with an empty document yields a zero row, kept (and flagged) so
    row indices stay aligned with the adjacency.
    """
    y = graph.n_classes
    if y < 2:
        raise FeatureError("TF-IDF needs at least 2 classes")
    documents = [class_document(c.tokens, c.comments) for c in graph.classes]
    vocabulary = sorted({w for doc in documents for w in doc})
    index = {w: i for i, w in enumerate(vocabulary)}
    df = np.zeros(len(vocabulary), dtype=np.float64)
    for doc in documents:
        for w in set(doc):
            df[index[w]] += 1
    idf = np.log(y / df) if len(vocabulary) else np.zeros(0)
    rows = np.zeros((y, max(len(vocabulary), 1)), dtype=np.float64)
    for k, doc in enumerate(documents):
        if not doc:
            log.warning("class %s has an empty document; zero TF-IDF row",
                        graph.classes[k].qualified_name)
            continue
        counts: dict[int, int] = {}
        for w in doc:
            counts[index[w]] = counts.get(index[w], 0) + 1
        for j, n in counts.items():
            rows[k, j] = (n / len(doc)) * idf[j]
    normalized, zero_rows = _normalize_rows(rows)
    return FeatureMatrix(rows=normalized, kind="tfidf", zero_rows=zero_rows)

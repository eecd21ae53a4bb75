"""Identity-preservation metrics between input foregrounds and composed crops.

The embedder is pluggable. The built-in reference embedder (bilinear
downsample to 16x16 RGB, flatten, L2-normalize) exists so results are
reproducible without model weights; absolute values are embedder-dependent
and only comparable within one embedder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, InputError
from .raster import resize_bilinear, validate_image


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    embedder_tag: str

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1:
            raise ContractError("embedding must be a vector")
        if not np.isfinite(self.values).all():
            raise ContractError("embedding contains non-finite entries")


class ReferenceEmbedder:
    """Deterministic stand-in embedder: 16x16 RGB thumbnail, unit L2 norm.

    An all-zero image embeds to the zero vector (left unnormalized);
    cosine against it is undefined by contract.
    """

    tag = "reference"
    grid = (16, 16)

    def __call__(self, image: np.ndarray) -> EmbeddingVector:
        validate_image(image, "image")
        small = resize_bilinear(image[..., :3], *self.grid)
        vec = small.reshape(-1)
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec = vec / norm
        return EmbeddingVector(vec, self.tag)


_EMBEDDERS = {"reference": ReferenceEmbedder}


def get_embedder(name: str):
    if name not in _EMBEDDERS:
        raise ConfigError(f"unknown embedder {name!r}; available: {sorted(_EMBEDDERS)}")
    return _EMBEDDERS[name]()


def register_embedder(name: str, factory) -> None:
    """Plug-in point for external embedding models."""
    _EMBEDDERS[name] = factory


def embed(image: np.ndarray, embedder) -> EmbeddingVector:
    return embedder(image)


def _vec(v) -> np.ndarray:
    if isinstance(v, EmbeddingVector):
        return v.values
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError("expected a vector")
    return arr


def cosine_similarity(a, b) -> float:
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ContractError("vectors must share length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InputError("cosine similarity is undefined for a zero vector")
    return float(a @ b / (na * nb))


def manhattan(a, b) -> float:
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ContractError("vectors must share length")
    return float(np.abs(a - b).sum())


def euclidean(a, b) -> float:
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ContractError("vectors must share length")
    return float(np.sqrt(((a - b) ** 2).sum()))


@dataclass
class PairMetrics:
    index: int
    cosine: float
    manhattan: float
    euclidean: float


@dataclass
class IdentityReport:
    embedder_tag: str
    pairs: list[PairMetrics]
    mean_cosine: float
    mean_manhattan: float
    mean_euclidean: float

    def to_jsonable(self) -> dict:
        return {
            "embedder": self.embedder_tag,
            "pairs": [
                {
                    "index": p.index,
                    "cosine": p.cosine,
                    "manhattan": p.manhattan,
                    "euclidean": p.euclidean,
                }
                for p in self.pairs
            ],
            "mean": {
                "cosine": self.mean_cosine,
                "manhattan": self.mean_manhattan,
                "euclidean": self.mean_euclidean,
            },
        }

    def format_table(self) -> str:
        header = f"{'pair':>6}  {'cosine':>10}  {'manhattan':>12}  {'euclidean':>12}"
        lines = [header, "-" * len(header)]
        for p in self.pairs:
            lines.append(
                f"{p.index:>6}  {p.cosine:>10.4f}  {p.manhattan:>12.4f}  {p.euclidean:>12.4f}"
            )
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':>6}  {self.mean_cosine:>10.4f}  {self.mean_manhattan:>12.4f}  "
            f"{self.mean_euclidean:>12.4f}"
        )
        return "\n".join(lines) + "\n"


def evaluate_pairs(pairs, embedder) -> IdentityReport:
    """Metrics per (foreground image, composed crop) pair plus corpus means."""
    pairs = list(pairs)
    if not pairs:
        raise InputError("no pairs to evaluate")
    rows = []
    for i, (foreground, composed) in enumerate(pairs):
        ea = embed(foreground, embedder)
        eb = embed(composed, embedder)
        rows.append(
            PairMetrics(
                index=i,
                cosine=cosine_similarity(ea, eb),
                manhattan=manhattan(ea, eb),
                euclidean=euclidean(ea, eb),
            )
        )
    return IdentityReport(
        embedder_tag=getattr(embedder, "tag", "unknown"),
        pairs=rows,
        mean_cosine=float(np.mean([r.cosine for r in rows])),
        mean_manhattan=float(np.mean([r.manhattan for r in rows])),
        mean_euclidean=float(np.mean([r.euclidean for r in rows])),
    )

"""Per-token foreground/background relevance from cross-attention maps.

A token's relevance to a region is the ratio of its masked attention
maximum to its global maximum, so scores live in [0, 1] and are invariant
to any positive rescaling of the maps. Tokens whose map is identically
zero score 0 for both regions (they attend nowhere and should never be
selected for identity injection).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import AttentionStack
from .errors import ContractError
from .masks import BinaryMask


@dataclass(eq=False)
class RelevanceScores:
    """Length-K score vectors, one per region."""

    r_fg: np.ndarray
    r_bg: np.ndarray

    def __post_init__(self):
        self.r_fg = np.asarray(self.r_fg, dtype=np.float64)
        self.r_bg = np.asarray(self.r_bg, dtype=np.float64)
        for name, vec in (("r_fg", self.r_fg), ("r_bg", self.r_bg)):
            if vec.ndim != 1:
                raise ContractError(f"{name} must be a vector")
            if not np.isfinite(vec).all() or vec.min() < 0 or vec.max() > 1:
                raise ContractError(f"{name} entries must be finite and in [0, 1]")
        if self.r_fg.shape != self.r_bg.shape:
            raise ContractError("score vectors must share length K")


@dataclass(frozen=True)
class TokenIndexSet:
    """Strictly increasing token indices (a selection within [0, K))."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ContractError("indices must be strictly increasing")
        if self.indices and self.indices[0] < 0:
            raise ContractError("indices must be >= 0")

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def aggregate_attention(stack: AttentionStack) -> np.ndarray:
    """Elementwise arithmetic mean over layers -> (K, H_lat, W_lat)."""
    if stack.n_layers < 1:
        raise ContractError("attention stack is empty")
    return stack.layers.mean(axis=0)


def relevance(ca: np.ndarray, m_fg: BinaryMask, m_bg: BinaryMask) -> RelevanceScores:
    """Score each token: max of the masked map over max of the whole map."""
    ca = np.asarray(ca, dtype=np.float64)
    if ca.ndim != 3:
        raise ContractError("aggregated attention must be (K, H, W)")
    if (ca < 0).any():
        raise ContractError("attention entries must be >= 0")
    spatial = ca.shape[1:]
    for name, mask in (("m_fg", m_fg), ("m_bg", m_bg)):
        if (mask.height, mask.width) != spatial:
            raise ContractError(
                f"{name} shape {(mask.height, mask.width)} does not match attention {spatial}"
            )
    global_max = ca.max(axis=(1, 2))
    fg_max = (ca * m_fg.grid).max(axis=(1, 2))
    bg_max = (ca * m_bg.grid).max(axis=(1, 2))
    nonzero = global_max > 0
    r_fg = np.where(nonzero, fg_max / np.where(nonzero, global_max, 1.0), 0.0)
    r_bg = np.where(nonzero, bg_max / np.where(nonzero, global_max, 1.0), 0.0)
    return RelevanceScores(r_fg=r_fg, r_bg=r_bg)


def select_top(scores: np.ndarray, n: int) -> TokenIndexSet:
    """Indices of the n largest scores; ties break toward the lowest index;
    result sorted ascending."""
    scores = np.asarray(scores, dtype=np.float64)
    k = scores.shape[0]
    if not 0 <= n <= k:
        raise ContractError(f"selection count {n} outside [0, {k}]")
    order = np.argsort(-scores, kind="stable")[:n]
    return TokenIndexSet(tuple(int(i) for i in np.sort(order)))

"""Conversions between flat token sequences and spatial token grids.

Transformer blocks see tokens as rows of an (N, C) matrix; the adapter's
convolutional stages need them arranged as a (C, H, W) image with
H * W = N. The class token never takes part in the spatial layout: it
rides along in a sidecar and is re-attached untouched. Both conversions
are pure reindexings, so gradients flow through bit-exactly. A leading
batch axis is supported everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

from histadapter import autodiff as ad
from histadapter.autodiff import ShapeError, Tensor

__all__ = ["TokenSequence", "TokenGrid", "seq_to_grid", "grid_to_seq"]


@dataclass
class TokenSequence:
    """Tokens as (..., N [+1 if has_class], C); row 0 is the class token."""

    tokens: Tensor
    grid_h: int
    grid_w: int
    has_class: bool = False

    def patch_count(self) -> int:
        return self.tokens.shape[-2] - (1 if self.has_class else 0)


@dataclass
class TokenGrid:
    """Tokens as (..., C, H, W) plus the class-token sidecar (..., C)."""

    grid: Tensor
    class_token: Tensor | None = None


def seq_to_grid(seq: TokenSequence) -> TokenGrid:
    """Lay patch tokens out row-major: sequence row h*W + w -> grid (h, w)."""
    h, w = seq.grid_h, seq.grid_w
    if seq.patch_count() != h * w:
        raise ShapeError(
            f"sequence holds {seq.patch_count()} patch tokens, grid needs {h}x{w}={h * w}"
        )
    tokens = seq.tokens
    cls = None
    if seq.has_class:
        batched = tokens.ndim == 3
        cls = tokens[:, 0, :] if batched else tokens[0, :]
        tokens = tokens[:, 1:, :] if batched else tokens[1:, :]
    c = tokens.shape[-1]
    if tokens.ndim == 2:
        grid = ad.transpose(ad.reshape(tokens, (h, w, c)), (2, 0, 1))
    elif tokens.ndim == 3:
        b = tokens.shape[0]
        grid = ad.transpose(ad.reshape(tokens, (b, h, w, c)), (0, 3, 1, 2))
    else:
        raise ShapeError(f"tokens must be 2D or 3D, got shape {tokens.shape}")
    return TokenGrid(grid=grid, class_token=cls)


def grid_to_seq(grid: TokenGrid) -> TokenSequence:
    """Inverse of :func:`seq_to_grid`; round trips are the identity."""
    g = grid.grid
    if g.ndim == 3:
        c, h, w = g.shape
        tokens = ad.reshape(ad.transpose(g, (1, 2, 0)), (h * w, c))
        if grid.class_token is not None:
            tokens = ad.concat([ad.reshape(grid.class_token, (1, c)), tokens], axis=0)
    elif g.ndim == 4:
        b, c, h, w = g.shape
        tokens = ad.reshape(ad.transpose(g, (0, 2, 3, 1)), (b, h * w, c))
        if grid.class_token is not None:
            tokens = ad.concat(
                [ad.reshape(grid.class_token, (b, 1, c)), tokens], axis=1
            )
    else:
        raise ShapeError(f"grid must be 3D or 4D, got shape {g.shape}")
    return TokenSequence(
        tokens=tokens, grid_h=h, grid_w=w, has_class=grid.class_token is not None
    )

"""The statistical token adapter: bottleneck, local token map, histogram, fuse.

The full pipeline applied to the patch tokens of a sequence is

    dim_down -> to grid -> central-difference conv -> soft histogram
             -> to sequence -> dim_up -> residual add

with the class token bypassing everything. ``dim_up`` starts at zero, so a
freshly inserted adapter is an exact identity and the frozen host network's
function is preserved at step 0.

Ablation variants prune or rearrange stages:

    full                 the pipeline above
    no_hist              drop the histogram stage
    no_hist_no_cdc       drop the histogram and run the conv with theta = 0
    vanilla_linear       plain bottleneck: dim_down -> gelu -> dim_up
    linear_plus_cdc      bottleneck nonlinearity, then the conv stage
    linear_plus_cdc_hist bottleneck nonlinearity, then conv and histogram

Fusion is residual summation by default; ``fusion="concat"`` instead
concatenates the branch output to the tokens and restores the width with a
trailing linear map (initialized to project back onto the original tokens).
"""

from __future__ import annotations

import numpy as np

from histadapter import autodiff as ad
from histadapter.autodiff import ShapeError, Tensor
from histadapter.cdc import CdcConv
from histadapter.histogram import SoftHistogram
from histadapter.nn import Linear, prefixed, set_trainable
from histadapter.tokens import TokenGrid, TokenSequence, grid_to_seq, seq_to_grid

__all__ = ["HistAdapter", "VARIANTS", "FUSIONS", "insert_into_block"]

VARIANTS = (
    "full",
    "no_hist",
    "no_hist_no_cdc",
    "vanilla_linear",
    "linear_plus_cdc",
    "linear_plus_cdc_hist",
)
FUSIONS = ("sum", "concat")

_USES_CDC = {"full", "no_hist", "no_hist_no_cdc", "linear_plus_cdc", "linear_plus_cdc_hist"}
_USES_HIST = {"full", "linear_plus_cdc_hist"}
_USES_GELU = {"vanilla_linear", "linear_plus_cdc", "linear_plus_cdc_hist"}


class HistAdapter:
    """Residual adapter over patch tokens of width ``model_dim``."""

    def __init__(self, model_dim: int, rng: np.random.Generator,
                 adapter_dim: int = 8, theta: float = 0.7,
                 variant: str = "full", fusion: str = "sum"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        if fusion not in FUSIONS:
            raise ValueError(f"unknown fusion {fusion!r}; choose from {FUSIONS}")
        if variant == "no_hist_no_cdc":
            theta = 0.0
        self.model_dim = model_dim
        self.adapter_dim = adapter_dim
        self.variant = variant
        self.fusion = fusion
        self.dim_down = Linear(model_dim, adapter_dim, rng)
        self.cdc = CdcConv(adapter_dim, adapter_dim, rng, theta=theta) \
            if variant in _USES_CDC else None
        self.hist = SoftHistogram(adapter_dim) if variant in _USES_HIST else None
        self.dim_up = Linear(adapter_dim, model_dim, init="zeros")
        self.fuse = Linear(2 * model_dim, model_dim, init="identity_top") \
            if fusion == "concat" else None
        # set to True to keep the post-conv token map around for style losses
        self.capture_style = False
        self.last_style_map: Tensor | None = None

    def apply(self, seq: TokenSequence) -> TokenSequence:
        tokens = seq.tokens
        if tokens.shape[-1] != self.model_dim:
            raise ShapeError(
                f"adapter built for width {self.model_dim}, got tokens {tokens.shape}"
            )
        batched = tokens.ndim == 3
        if seq.has_class:
            cls_rows = tokens[:, :1, :] if batched else tokens[:1, :]
            patches = tokens[:, 1:, :] if batched else tokens[1:, :]
        else:
            cls_rows, patches = None, tokens

        h = self.dim_down(patches)
        if self.variant in _USES_GELU:
            h = ad.gelu(h)

        if self.cdc is not None or self.capture_style:
            grid = seq_to_grid(TokenSequence(h, seq.grid_h, seq.grid_w, has_class=False))
            if self.cdc is not None:
                grid = self.cdc(grid)
            if self.capture_style:
                self.last_style_map = grid.grid
            if self.hist is not None:
                grid = self.hist(grid)
            if self.cdc is not None:
                h = grid_to_seq(grid).tokens

        branch = self.dim_up(h)
        if self.fuse is None:
            out = ad.add(patches, branch)
        else:
            out = self.fuse(ad.concat([patches, branch], axis=-1))
        if cls_rows is not None:
            out = ad.concat([cls_rows, out], axis=1 if batched else 0)
        return TokenSequence(out, seq.grid_h, seq.grid_w, has_class=seq.has_class)

    def style_grid(self) -> TokenGrid | None:
        return None if self.last_style_map is None else TokenGrid(self.last_style_map)

    def parameters(self) -> dict:
        params = prefixed("dim_down", self.dim_down.parameters())
        if self.cdc is not None:
            params.update(prefixed("cdc", self.cdc.parameters()))
        if self.hist is not None:
            params.update(prefixed("hist", self.hist.parameters()))
        params.update(prefixed("dim_up", self.dim_up.parameters()))
        if self.fuse is not None:
            params.update(prefixed("fuse", self.fuse.parameters()))
        return params


def insert_into_block(block, msa_adapter: HistAdapter, mlp_adapter: HistAdapter):
    """Attach adapters after a block's attention and MLP stages.

    The block's own weights are frozen; the adapters become the only
    trainable parameters inside the block.
    """
    block.msa_adapter = msa_adapter
    block.mlp_adapter = mlp_adapter
    set_trainable(block.backbone_parameters(), False)
    set_trainable(msa_adapter.parameters(), True)
    set_trainable(mlp_adapter.parameters(), True)
    return block

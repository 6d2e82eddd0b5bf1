"""The full rumor classifier and its ablation variants.

The structure network embeds per-window features, runs a BiGRU, and
pools with temporal attention (or a mean over real windows in the
no-attention variant). The content network convolves post vectors and
k-max pools. The fusion head concatenates whatever paths the variant
keeps, applies one ReLU layer with dropout, and emits a rumor
probability through a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import autodiff as ad
from . import layers
from .autodiff import Tensor
from .config import VARIANTS, TrainConfig
from .windows import WindowedStructure


@dataclass
class EventFeatures:
    """Model-ready inputs for one event."""

    event_id: str
    label: int
    structure: WindowedStructure | None
    content: np.ndarray | None  # (n, d_w) post vectors, zero-padded


@dataclass
class ModelParams:
    variant: str
    embed_w: Tensor | None = None
    embed_b: Tensor | None = None
    gru_fwd: layers.GruParams | None = None
    gru_bwd: layers.GruParams | None = None
    attention: layers.AttentionParams | None = None
    content: layers.ContentParams | None = None
    fusion_w1: Tensor | None = None
    fusion_b1: Tensor | None = None
    fusion_w2: Tensor | None = None
    fusion_b2: Tensor | None = None

    def named(self) -> Iterator[tuple[str, Tensor]]:
        if self.embed_w is not None:
            yield "embed.W", self.embed_w
            yield "embed.b", self.embed_b
        if self.gru_fwd is not None:
            yield from self.gru_fwd.named("gru_fwd")
            yield from self.gru_bwd.named("gru_bwd")
        if self.attention is not None:
            yield from self.attention.named("attention")
        if self.content is not None:
            yield from self.content.named("content")
        yield "fusion.W1", self.fusion_w1
        yield "fusion.b1", self.fusion_b1
        yield "fusion.W2", self.fusion_w2
        yield "fusion.b2", self.fusion_b2

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.named()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.named():
            src = arrays[name]
            if src.shape != t.values.shape:
                raise ValueError(f"checkpoint: {name} has shape {src.shape}, expected {t.shape}")
            t.values[...] = src


def uses_structure(variant: str) -> bool:
    return variant != "content_only"


def uses_content(variant: str) -> bool:
    return variant in ("full", "content_only")


def uses_attention(variant: str) -> bool:
    return variant in ("full", "structure_only")


def structure_output_dim(config: TrainConfig) -> int:
    if not uses_attention(config.variant):
        return 2 * config.hidden_size  # mean over hidden states
    if config.attend_over == "hidden":
        return 2 * config.hidden_size
    return config.attention_size


def content_output_dim(config: TrainConfig) -> int:
    return len(config.heights) * config.maps_per_height * config.k


def init_params(config: TrainConfig, rng: np.random.Generator) -> ModelParams:
    """Build all trainable tensors the configured variant needs."""
    if config.variant not in VARIANTS:
        raise ValueError(f"unknown variant {config.variant!r}")
    params = ModelParams(variant=config.variant)
    fusion_in = 0
    if uses_structure(config.variant):
        raw_dim = 3 * config.layer_cap
        params.embed_w = ad.parameter(layers.glorot(rng, (raw_dim, config.d_s)))
        params.embed_b = ad.parameter(np.zeros(config.d_s))
        params.gru_fwd = layers.init_gru(rng, config.d_s, config.hidden_size)
        params.gru_bwd = layers.init_gru(rng, config.d_s, config.hidden_size)
        if uses_attention(config.variant):
            params.attention = layers.init_attention(
                rng, 2 * config.hidden_size, config.attention_size
            )
        fusion_in += structure_output_dim(config)
    if uses_content(config.variant):
        params.content = layers.init_content(
            rng, config.heights, config.maps_per_height, config.d_w
        )
        fusion_in += content_output_dim(config)
    params.fusion_w1 = ad.parameter(layers.glorot(rng, (fusion_in, config.fusion_hidden)))
    params.fusion_b1 = ad.parameter(np.zeros(config.fusion_hidden))
    params.fusion_w2 = ad.parameter(layers.glorot(rng, (config.fusion_hidden, 1)))
    params.fusion_b2 = ad.parameter(np.zeros(1))
    return params


def structure_vector(
    ws: WindowedStructure, params: ModelParams, config: TrainConfig
) -> tuple[Tensor, np.ndarray]:
    """Run the structure network on one event; returns (S, attention weights)."""
    feats = ws.feature_matrix()
    mask = ws.mask.tolist()
    xs = [
        layers.embed_substructure(feats[t], params.embed_w, params.embed_b)
        for t in range(feats.shape[0])
    ]
    hs = layers.bigru_forward(xs, mask, params.gru_fwd, params.gru_bwd, config.candidate_nl)
    if uses_attention(config.variant):
        pooled, alphas = layers.temporal_attention(
            hs, mask, params.attention, config.attend_over
        )
        return pooled, alphas.values.copy()
    # Attention ablated: mean over the real (unmasked) windows.
    mask_arr = np.asarray(mask, dtype=float)
    weights = mask_arr / mask_arr.sum()
    pooled = (ad.constant(weights.reshape(1, -1)) @ ad.stack_rows(hs)).reshape((-1,))
    return pooled, weights


def forward(
    features: EventFeatures,
    params: ModelParams,
    config: TrainConfig,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, np.ndarray | None]:
    """Probability that one event is a rumor.

    Returns (y_hat, alphas); alphas is None for the content-only
    variant. Dropout applies to the fusion hidden layer only, and only
    when ``train`` is set.
    """
    parts = []
    alphas = None
    if uses_content(config.variant):
        parts.append(layers.content_forward(features.content, params.content, config.k))
    if uses_structure(config.variant):
        pooled, alphas = structure_vector(features.structure, params, config)
        parts.append(pooled)
    fused = parts[0] if len(parts) == 1 else ad.concat(parts)
    hidden = ad.relu(layers.dense(fused, params.fusion_w1, params.fusion_b1))
    hidden = ad.dropout(hidden, config.dropout, train, rng)
    logit = layers.dense(hidden, params.fusion_w2, params.fusion_b2)
    y_hat = ad.sigmoid(logit.reshape(()))
    return y_hat, alphas


def loss(y_hats: list[Tensor], labels: list[int]) -> Tensor:
    """Summed binary cross-entropy over a batch.

    Probabilities are clipped to [1e-12, 1 - 1e-12] before the logs so
    the loss stays finite.
    """
    if len(y_hats) != len(labels):
        raise ValueError(f"loss: {len(y_hats)} predictions vs {len(labels)} labels")
    probs = ad.concat([y.reshape((1,)) for y in y_hats])
    probs = ad.clip(probs, 1e-12, 1.0 - 1e-12)
    y = ad.constant(np.asarray(labels, dtype=np.float64))
    ones = ad.constant(np.ones(len(labels)))
    ll = y * ad.log(probs) + (ones - y) * ad.log(ones - probs)
    return -ll.sum()

"""Neural building blocks: structural embedding, GRU/BiGRU, temporal
attention, and the text convolution with k-max pooling.

All blocks operate on autodiff Tensors so gradients flow end to end.
Weights are Glorot-uniform initialized, biases zero, from a caller
supplied Generator so every model build is reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CANDIDATE_NLS = ("tanh", "sigmoid")
ATTEND_OVER = ("projected", "hidden")


def glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class GruParams:
    """Gate and candidate weights of one GRU direction."""

    U_z: Tensor
    W_z: Tensor
    b_z: Tensor
    U_r: Tensor
    W_r: Tensor
    b_r: Tensor
    U_h: Tensor
    W_h: Tensor
    b_h: Tensor

    @property
    def hidden_size(self) -> int:
        return self.b_z.shape[0]

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for field in ("U_z", "W_z", "b_z", "U_r", "W_r", "b_r", "U_h", "W_h", "b_h"):
            yield f"{prefix}.{field}", getattr(self, field)


def init_gru(rng: np.random.Generator, d_in: int, hidden: int) -> GruParams:
    def w(shape):
        return ad.parameter(glorot(rng, shape))

    def b():
        return ad.parameter(np.zeros(hidden))

    return GruParams(
        U_z=w((d_in, hidden)), W_z=w((hidden, hidden)), b_z=b(),
        U_r=w((d_in, hidden)), W_r=w((hidden, hidden)), b_r=b(),
        U_h=w((d_in, hidden)), W_h=w((hidden, hidden)), b_h=b(),
    )


@dataclass
class AttentionParams:
    """Projection, bias, and context vector of the temporal attention."""

    W_h: Tensor  # (2H, A)
    b_n: Tensor  # (A,)
    u_s: Tensor  # (A,)

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for field in ("W_h", "b_n", "u_s"):
            yield f"{prefix}.{field}", getattr(self, field)


def init_attention(rng: np.random.Generator, in_dim: int, attn_dim: int) -> AttentionParams:
    return AttentionParams(
        W_h=ad.parameter(glorot(rng, (in_dim, attn_dim))),
        b_n=ad.parameter(np.zeros(attn_dim)),
        u_s=ad.parameter(glorot(rng, (attn_dim,))),
    )


@dataclass
class ContentParams:
    """Per-height banks of convolution filters with scalar biases."""

    heights: tuple[int, ...]
    filters: list[list[Tensor]]  # filters[i][j] has shape (heights[i], d_w)
    biases: list[list[Tensor]]  # scalars, same indexing

    @property
    def maps_per_height(self) -> int:
        return len(self.filters[0])

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, h in enumerate(self.heights):
            for j in range(len(self.filters[i])):
                yield f"{prefix}.h{h}.f{j}.W", self.filters[i][j]
                yield f"{prefix}.h{h}.f{j}.b", self.biases[i][j]


def init_content(
    rng: np.random.Generator, heights: Sequence[int], maps_per_height: int, d_w: int
) -> ContentParams:
    filters = []
    biases = []
    for h in heights:
        filters.append([ad.parameter(glorot(rng, (h, d_w))) for _ in range(maps_per_height)])
        biases.append([ad.parameter(np.zeros(())) for _ in range(maps_per_height)])
    return ContentParams(heights=tuple(heights), filters=filters, biases=biases)


def embed_substructure(raw, weights: Tensor, bias: Tensor) -> Tensor:
    """tanh(W_e . raw + b_e): dense embedding of one window's raw features."""
    raw = raw if isinstance(raw, Tensor) else ad.constant(raw)
    return ad.tanh(raw @ weights + bias)


def gru_step(x: Tensor, h_prev: Tensor, params: GruParams, candidate_nl: str = "tanh") -> Tensor:
    """One GRU update.

    z = sigma(x U_z + h W_z + b_z), r = sigma(x U_r + h W_r + b_r),
    c = nl(x U_h + (r * h) W_h + b_h), h' = (1 - z) * h + z * c.
    The candidate nonlinearity defaults to tanh; "sigmoid" is available
    for a literal reading of the published update equations.
    """
    if candidate_nl not in CANDIDATE_NLS:
        raise ValueError(f"candidate_nl must be one of {CANDIDATE_NLS}, got {candidate_nl!r}")
    nl = ad.tanh if candidate_nl == "tanh" else ad.sigmoid
    z = ad.sigmoid(x @ params.U_z + h_prev @ params.W_z + params.b_z)
    r = ad.sigmoid(x @ params.U_r + h_prev @ params.W_r + params.b_r)
    c = nl(x @ params.U_h + (r * h_prev) @ params.W_h + params.b_h)
    one = ad.constant(np.ones(params.hidden_size))
    return (one - z) * h_prev + z * c


def bigru_forward(
    xs: Sequence[Tensor],
    mask: Sequence[bool],
    fwd: GruParams,
    bwd: GruParams,
    candidate_nl: str = "tanh",
) -> list[Tensor]:
    """Run both GRU directions from zero state and concatenate per step.

    Masked (padding) steps copy the running hidden state through
    unchanged in each direction.
    """
    T = len(xs)
    if T == 0:
        raise ValueError("bigru_forward: empty sequence")
    if len(mask) != T:
        raise ValueError(f"bigru_forward: {T} inputs but {len(mask)} mask entries")
    hidden = fwd.hidden_size

    h = ad.constant(np.zeros(hidden))
    forward_states = []
    for t in range(T):
        if mask[t]:
            h = gru_step(xs[t], h, fwd, candidate_nl)
        forward_states.append(h)

    h = ad.constant(np.zeros(hidden))
    backward_states: list[Tensor] = [None] * T  # type: ignore[list-item]
    for t in reversed(range(T)):
        if mask[t]:
            h = gru_step(xs[t], h, bwd, candidate_nl)
        backward_states[t] = h

    return [ad.concat([forward_states[t], backward_states[t]]) for t in range(T)]


def temporal_attention(
    hs: Sequence[Tensor],
    mask: Sequence[bool],
    params: AttentionParams,
    attend_over: str = "projected",
) -> tuple[Tensor, Tensor]:
    """Pool a hidden-state sequence into one vector by learned attention.

    u_t = tanh(W_h h_t + b_n); weights are a masked softmax of u_s . u_t;
    the default pools the projected u_t (S = sum_t alpha_t u_t), while
    attend_over="hidden" pools the raw h_t instead. Returns (S, alphas);
    masked positions get weight exactly 0.
    """
    if attend_over not in ATTEND_OVER:
        raise ValueError(f"attend_over must be one of {ATTEND_OVER}, got {attend_over!r}")
    T = len(hs)
    if T == 0:
        raise ValueError("temporal_attention: empty sequence")
    mask_arr = np.asarray(mask, dtype=bool)
    if not mask_arr.any():
        raise ValueError("temporal_attention: all positions masked")
    projected = [ad.tanh(h @ params.W_h + params.b_n) for h in hs]
    logits = ad.concat([ad.dot(params.u_s, u).reshape((1,)) for u in projected])
    alphas = ad.softmax_masked(logits, mask_arr)
    pool = ad.stack_rows(projected if attend_over == "projected" else list(hs))
    pooled = (alphas.reshape((1, T)) @ pool).reshape((-1,))
    return pooled, alphas


def content_forward(x_hat, params: ContentParams, k: int) -> Tensor:
    """Convolve post vectors with every filter bank and k-max pool.

    For each filter: valid 1-D convolution down the post axis, scalar
    bias, ReLU, then the k largest activations in original order. All
    pooled vectors are concatenated (dimension heights * maps * k).
    """
    x_hat = x_hat if isinstance(x_hat, Tensor) else ad.constant(x_hat)
    n = x_hat.shape[0]
    max_h = max(params.heights)
    if n < max_h:
        raise ValueError(f"content_forward: {n} posts but largest filter height is {max_h}")
    if k > n - max_h + 1:
        raise ValueError(f"content_forward: k={k} too large for {n} posts and height {max_h}")
    pooled = []
    for i in range(len(params.heights)):
        for filt, bias in zip(params.filters[i], params.biases[i]):
            fmap = ad.relu(ad.conv1d_valid(x_hat, filt) + bias)
            pooled.append(ad.kmax_pool(fmap, k))
    return ad.concat(pooled)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    return x @ weights + bias


# ---------------------------------------------------------------------------
# Checkpoint archive: JSON manifest line + little-endian float64 payload.


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 arrays bit-exactly to a single archive file."""
    manifest = {
        "meta": meta or {},
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays.items()],
    }
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(manifest).encode("utf-8"))
        fh.write(b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read an archive written by :func:`save_arrays`."""
    data = Path(path).read_bytes()
    newline = data.index(b"\n")
    manifest = json.loads(data[:newline].decode("utf-8"))
    payload = data[newline + 1 :]
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        block = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = block.reshape(shape).astype(np.float64)
        offset += count * 8
    return arrays, manifest.get("meta", {})

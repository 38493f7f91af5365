"""Desk-scale detection transformer.

A linear patch embedding stands in for the CNN backbone; the encoder and
decoder use dense multi-head attention over a single-scale feature grid.
The cross-attention weights of every decoder layer and head are averaged
into one attention map per query.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..autograd.functional import (
    add,
    layernorm,
    matmul,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax_axis,
    transpose,
)
from ..autograd.tensor import Tensor, as_tensor
from ..core.models import ConfigError, DimensionError
from .params import Linear, ParamGroup, new_param

__all__ = [
    "PAD_SCORE",
    "sinusoidal_positions",
    "extract_patches",
    "backbone_forward",
    "LayerNormParams",
    "AttentionParams",
    "EncoderLayer",
    "DecoderLayer",
    "DetectorParams",
    "DetectorOutput",
    "multihead_attention",
    "detect",
]

# Additive attention score on padded keys
PAD_SCORE = -1e9


# Section: Positional Encoding
def _sincos(coords: np.ndarray, dims: int, temperature: float) -> np.ndarray:
    i = np.arange(dims)
    freq = temperature ** (2.0 * (i // 2) / max(dims, 1))
    angles = coords[:, None] / freq[None, :]
    return np.where(i % 2 == 0, np.sin(angles), np.cos(angles))


def sinusoidal_positions(height: int, width: int, channels: int, temperature: float = 10000.0) -> np.ndarray:
    """Fixed 2-D sine/cosine encoding, shape [H*W, C] in row-major cell order.

    The first half of the channels encodes the row, the rest the column.
    """
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    y = (rows.reshape(-1) + 0.5) / height * 2.0 * np.pi
    x = (cols.reshape(-1) + 0.5) / width * 2.0 * np.pi
    half = channels // 2
    return np.concatenate([_sincos(y, half, temperature), _sincos(x, channels - half, temperature)], axis=1)


# Section: Backbone
def extract_patches(images: Union[np.ndarray, Tensor], patch: int) -> Tensor:
    """``[B, 3, H, W]`` images → ``[B, H/patch, W/patch, 3*patch*patch]`` patch vectors."""
    images = as_tensor(images)
    if images.ndim == 3:
        images = reshape(images, (1,) + images.shape)
    if images.ndim != 4:
        raise DimensionError(f"expected images shaped [B, 3, H, W], got {images.shape}")
    b, c, h, w = images.shape
    if h % patch or w % patch:
        raise ConfigError(f"image size {h}x{w} is not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    blocks = reshape(images, (b, c, gh, patch, gw, patch))
    blocks = transpose(blocks, (0, 2, 4, 1, 3, 5))
    return reshape(blocks, (b, gh, gw, c * patch * patch))


def backbone_forward(images: Union[np.ndarray, Tensor], patch_embed: Linear, patch: int) -> Tensor:
    """Linearly embed non-overlapping patches into ``[B, H, W, Cb]`` features."""
    return patch_embed(extract_patches(images, patch))


# Section: Parameters
@dataclass
class LayerNormParams(ParamGroup):
    gain: Tensor
    bias: Tensor

    @classmethod
    def init(cls, channels: int) -> "LayerNormParams":
        return cls(gain=new_param(np.ones(channels)), bias=new_param(np.zeros(channels)))

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.gain, self.bias, axis=-1)


@dataclass
class AttentionParams(ParamGroup):
    q: Linear
    k: Linear
    v: Linear
    o: Linear

    @classmethod
    def init(cls, rng: np.random.Generator, channels: int) -> "AttentionParams":
        return cls(*(Linear.init(rng, channels, channels) for _ in range(4)))


@dataclass
class EncoderLayer(ParamGroup):
    attn: AttentionParams
    norm1: LayerNormParams
    ffn1: Linear
    ffn2: Linear
    norm2: LayerNormParams

    @classmethod
    def init(cls, rng: np.random.Generator, channels: int, ffn_dim: int) -> "EncoderLayer":
        return cls(
            attn=AttentionParams.init(rng, channels),
            norm1=LayerNormParams.init(channels),
            ffn1=Linear.init(rng, channels, ffn_dim),
            ffn2=Linear.init(rng, ffn_dim, channels),
            norm2=LayerNormParams.init(channels),
        )


@dataclass
class DecoderLayer(ParamGroup):
    self_attn: AttentionParams
    norm1: LayerNormParams
    cross_attn: AttentionParams
    norm2: LayerNormParams
    ffn1: Linear
    ffn2: Linear
    norm3: LayerNormParams

    @classmethod
    def init(cls, rng: np.random.Generator, channels: int, ffn_dim: int) -> "DecoderLayer":
        return cls(
            self_attn=AttentionParams.init(rng, channels),
            norm1=LayerNormParams.init(channels),
            cross_attn=AttentionParams.init(rng, channels),
            norm2=LayerNormParams.init(channels),
            ffn1=Linear.init(rng, channels, ffn_dim),
            ffn2=Linear.init(rng, ffn_dim, channels),
            norm3=LayerNormParams.init(channels),
        )


@dataclass
class DetectorParams(ParamGroup):
    """Encoder, decoder, learned queries, class head (K+1) and 3-layer box MLP."""
    encoder: List[EncoderLayer]
    decoder: List[DecoderLayer]
    decoder_norm: LayerNormParams
    query_embed: Tensor
    class_head: Linear
    box_head: List[Linear]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        *,
        channels: int,
        ffn_dim: int,
        encoder_layers: int,
        decoder_layers: int,
        queries: int,
        num_classes: int,
    ) -> "DetectorParams":
        return cls(
            encoder=[EncoderLayer.init(rng, channels, ffn_dim) for _ in range(encoder_layers)],
            decoder=[DecoderLayer.init(rng, channels, ffn_dim) for _ in range(decoder_layers)],
            decoder_norm=LayerNormParams.init(channels),
            query_embed=new_param(rng.normal(0.0, 1.0, size=(queries, channels))),
            class_head=Linear.init(rng, channels, num_classes + 1),
            box_head=[
                Linear.init(rng, channels, channels),
                Linear.init(rng, channels, channels),
                Linear.init(rng, channels, 4),
            ],
        )

    @property
    def num_queries(self) -> int:
        return int(self.query_embed.shape[0])


@dataclass
class DetectorOutput:
    """Batched detector outputs; attention is detached numpy ``[B, Q, H, W]``."""
    class_logits: Tensor  # [B, Q, K+1]
    boxes: Tensor  # [B, Q, 4] (cx, cy, w, h) in (0, 1)
    attention: np.ndarray


# Section: Attention
def multihead_attention(
    query: Tensor,
    key: Tensor,
    value: Tensor,
    params: AttentionParams,
    heads: int,
    key_padding_mask: Optional[np.ndarray] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Dense scaled dot-product attention.

    Returns the projected output ``[B, Nq, C]`` and the post-softmax weights
    ``[B, heads, Nq, Nk]``. Keys flagged in ``key_padding_mask`` ``[B, Nk]``
    get an additive score of PAD_SCORE.
    """
    b, nq, c = query.shape
    nk = key.shape[1]
    if c % heads:
        raise DimensionError(f"{heads} heads do not divide {c} channels")
    d = c // heads
    q = transpose(reshape(params.q(query), (b, nq, heads, d)), (0, 2, 1, 3))
    k = transpose(reshape(params.k(key), (b, nk, heads, d)), (0, 2, 3, 1))
    v = transpose(reshape(params.v(value), (b, nk, heads, d)), (0, 2, 1, 3))
    scores = mul(matmul(q, k), 1.0 / np.sqrt(d))
    if key_padding_mask is not None:
        bias = np.where(np.asarray(key_padding_mask, dtype=bool), PAD_SCORE, 0.0)
        scores = add(scores, bias[:, None, None, :])
    weights = softmax_axis(scores, axis=-1)
    mixed = reshape(transpose(matmul(weights, v), (0, 2, 1, 3)), (b, nq, c))
    return params.o(mixed), weights.data


def _ffn(x: Tensor, first: Linear, second: Linear) -> Tensor:
    return second(relu(first(x)))


# Section: Detection
def detect(
    neck_output: Tensor,
    params: DetectorParams,
    heads: int,
    pad_mask: Optional[np.ndarray] = None,
) -> DetectorOutput:
    """Encode ``[B, H, W, C]`` features and decode one detection per query."""
    b, h, w, c = neck_output.shape
    pos = sinusoidal_positions(h, w, c)
    key_mask = None if pad_mask is None else np.asarray(pad_mask, dtype=bool).reshape(b, h * w)

    memory = reshape(neck_output, (b, h * w, c))
    for layer in params.encoder:
        with_pos = add(memory, pos)
        attended, _ = multihead_attention(with_pos, with_pos, memory, layer.attn, heads, key_mask)
        memory = layer.norm1(add(memory, attended))
        memory = layer.norm2(add(memory, _ffn(memory, layer.ffn1, layer.ffn2)))

    queries = params.query_embed
    tgt: Tensor = Tensor.wrap(np.zeros((b, params.num_queries, c)))
    memory_pos = add(memory, pos)
    attention_sum = np.zeros((b, params.num_queries, h * w))
    for layer in params.decoder:
        q = add(tgt, queries)
        attended, _ = multihead_attention(q, q, tgt, layer.self_attn, heads)
        tgt = layer.norm1(add(tgt, attended))
        attended, weights = multihead_attention(
            add(tgt, queries), memory_pos, memory, layer.cross_attn, heads, key_mask
        )
        attention_sum += weights.mean(axis=1)
        tgt = layer.norm2(add(tgt, attended))
        tgt = layer.norm3(add(tgt, _ffn(tgt, layer.ffn1, layer.ffn2)))
    tgt = params.decoder_norm(tgt)

    class_logits = params.class_head(tgt)
    hidden = relu(params.box_head[0](tgt))
    hidden = relu(params.box_head[1](hidden))
    boxes = sigmoid(params.box_head[2](hidden))

    attention = (attention_sum / max(len(params.decoder), 1)).reshape(b, params.num_queries, h, w)
    return DetectorOutput(class_logits=class_logits, boxes=boxes, attention=attention)

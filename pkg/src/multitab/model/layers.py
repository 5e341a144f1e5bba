"""Functional building blocks. Every function takes a parameter dict of
Tensors keyed by dotted names plus a name prefix."""
from __future__ import annotations

import functools

import numpy as np

from ..errors import ConfigError, ContractError
from ..numkit import tensor as T
from ..schema import CATEGORICAL
from .config import MaskScheme


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(shape, -bound, bound)


# ------------------------------------------------------------------ embedding


def init_embedding(params, rng, schema, e, prefix="embed"):
    num = schema.numeric_index
    if num:
        params[f"{prefix}.num.w"] = uniform_init(rng, (len(num), e), e)
        params[f"{prefix}.num.b"] = uniform_init(rng, (len(num), e), e)
    for j in schema.categorical_index:
        card = schema.columns[j].cardinality
        # last row is the out-of-vocabulary slot
        params[f"{prefix}.cat{j}"] = uniform_init(rng, (card + 1, e), e)


def embed(x, schema, params, prefix="embed", strict=True):
    """Raw n x d features -> n x d x e tokens, in schema column order.

    Numeric column j: ``value * w_j + b_j``. Categorical column j: a row of
    its table; codes outside ``[0, cardinality)`` raise when ``strict`` and
    map to the out-of-vocabulary row otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != schema.d:
        raise ContractError(f"embed: batch shape {x.shape} does not match {schema.d} schema columns")
    pieces, order = [], []
    num = schema.numeric_index
    if num:
        vals = T.Tensor(x[:, num][:, :, None])
        pieces.append(vals * params[f"{prefix}.num.w"] + params[f"{prefix}.num.b"])
        order.extend(num)
    for j in schema.categorical_index:
        card = schema.columns[j].cardinality
        codes = x[:, j]
        if np.any(codes != np.round(codes)):
            raise ContractError(f"embed: column {schema.columns[j].name!r} has non-integer category codes")
        codes = codes.astype(np.intp)
        unseen = (codes < 0) | (codes >= card)
        if unseen.any():
            if strict:
                bad = int(codes[unseen][0])
                raise ContractError(f"embed: category {bad} out of range for column "
                                    f"{schema.columns[j].name!r} (cardinality {card})")
            codes = np.where(unseen, card, codes)
        rows = T.take(params[f"{prefix}.cat{j}"], codes, axis=0)
        pieces.append(rows.reshape(x.shape[0], 1, -1))
        order.append(j)
    tokens = pieces[0] if len(pieces) == 1 else T.concat(pieces, axis=1)
    if order != sorted(order):
        tokens = T.take(tokens, np.argsort(order), axis=1)
    return tokens


# ---------------------------------------------------------------------- masks


def expand_mask(scheme, d, t):
    """Additive (d+t) x (d+t) mask; rows are queries, columns are keys."""
    scheme = MaskScheme.parse(scheme)
    if d < 1 or t < 1:
        raise ContractError("expand_mask: need d >= 1 and t >= 1")
    mask = np.zeros((d + t, d + t))
    if scheme in (MaskScheme.F_NOT_T, MaskScheme.BOTH):
        mask[:d, d:] = -np.inf
    if scheme in (MaskScheme.T_NOT_T, MaskScheme.BOTH):
        block = np.full((t, t), -np.inf)
        np.fill_diagonal(block, 0.0)
        mask[d:, d:] = block
    return mask


# ------------------------------------------------------------------ attention


def init_attention(params, rng, width, prefix):
    for name in ("wq", "wk", "wv", "wo"):
        params[f"{prefix}.{name}"] = uniform_init(rng, (width, width), width)


@functools.lru_cache(maxsize=64)
def rope_tables(length, dim, base=10_000.0):
    """cos/sin tables and the pair-swap permutation for interleaved rotary encoding.

    Cached; the returned arrays are read-only.
    """
    half = dim // 2
    inv_freq = base ** (-np.arange(half) * 2.0 / dim)
    angles = np.arange(length)[:, None] * inv_freq[None, :]
    cos = np.ones((length, dim))
    sin = np.zeros((length, dim))
    cos[:, 0:2 * half:2] = cos[:, 1:2 * half:2] = np.cos(angles)
    sin[:, 0:2 * half:2] = -np.sin(angles)
    sin[:, 1:2 * half:2] = np.sin(angles)
    perm = np.arange(dim)
    perm[0:2 * half:2] += 1
    perm[1:2 * half:2] -= 1
    for arr in (cos, sin, perm):
        arr.flags.writeable = False
    return cos, sin, perm


def apply_rope(x, base=10_000.0):
    """Rotate feature pairs (2i, 2i+1) of x[..., L, dk] by angle pos * base^(-2i/dk)."""
    length, dim = x.shape[-2], x.shape[-1]
    cos, sin, perm = rope_tables(length, dim, base)
    return x * cos + T.take(x, perm, axis=x.ndim - 1) * sin


def multihead_attention(x, params, prefix, heads, mask=None, rope=False, rope_base=10_000.0,
                        dropout=0.0, rng=None, return_weights=False):
    """Scaled dot-product attention over axis -2 of x[B, L, E] with ``heads`` heads."""
    b, length, width = x.shape
    if width % heads:
        raise ConfigError(f"heads={heads} does not divide width {width}")
    dk = width // heads

    def split(w):
        return T.transpose((x @ params[f"{prefix}.{w}"]).reshape(b, length, heads, dk), (0, 2, 1, 3))

    q, k, v = split("wq"), split("wk"), split("wv")
    if rope:
        q, k = apply_rope(q, rope_base), apply_rope(k, rope_base)
    scores = (q @ T.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dk))
    if mask is not None:
        scores = scores + mask
    weights = T.softmax(scores, axis=-1)
    attended = T.dropout(weights, dropout, rng) @ v
    merged = T.transpose(attended, (0, 2, 1, 3)).reshape(b, length, width)
    out = merged @ params[f"{prefix}.wo"]
    return (out, weights) if return_weights else out


def inter_feature_attention(x, params, prefix, heads, mask, **kw):
    """Attention across the d+t tokens of each sample: x[n, d+t, e]."""
    return multihead_attention(x, params, prefix, heads, mask=mask, **kw)


def inter_sample_attention(x, params, prefix, heads, use_rope=False, rope_base=10_000.0, **kw):
    """Attention across the n samples of a batch, each flattened to (d+t)*e."""
    n, length, e = x.shape
    flat = x.reshape(1, n, length * e)
    out = multihead_attention(flat, params, prefix, heads, rope=use_rope, rope_base=rope_base, **kw)
    if kw.get("return_weights"):
        out, weights = out
        return out.reshape(n, length, e), weights
    return out.reshape(n, length, e)


# ------------------------------------------------------------ feed-forward


def init_linear(params, rng, fan_in, fan_out, prefix):
    params[f"{prefix}.w"] = uniform_init(rng, (fan_in, fan_out), fan_in)
    params[f"{prefix}.b"] = uniform_init(rng, (fan_out,), fan_in)


def linear(x, params, prefix):
    return x @ params[f"{prefix}.w"] + params[f"{prefix}.b"]


def init_ffn(params, rng, width, hidden, prefix):
    init_linear(params, rng, width, hidden, f"{prefix}.fc1")
    init_linear(params, rng, hidden, width, f"{prefix}.fc2")


def feed_forward(x, params, prefix, dropout=0.0, rng=None):
    hidden = T.dropout(T.gelu(linear(x, params, f"{prefix}.fc1")), dropout, rng)
    return linear(hidden, params, f"{prefix}.fc2")


def init_layernorm(params, width, prefix):
    params[f"{prefix}.g"] = np.ones(width)
    params[f"{prefix}.b"] = np.zeros(width)


def layernorm(x, params, prefix, eps):
    return T.layernorm(x, params[f"{prefix}.g"], params[f"{prefix}.b"], eps)


# ------------------------------------------------------------- encoder block


def init_encoder_block(params, rng, config, tokens, prefix):
    e = config.e
    for i in range(1, 5):
        init_layernorm(params, e, f"{prefix}.ln{i}")
    init_attention(params, rng, e, f"{prefix}.feat")
    init_ffn(params, rng, e, config.ffn_hidden, f"{prefix}.ffn1")
    if config.inter_sample:
        init_attention(params, rng, tokens * e, f"{prefix}.samp")
    init_ffn(params, rng, e, config.ffn_hidden, f"{prefix}.ffn2")


def encoder_block(x, params, config, mask, prefix, rng=None):
    """Pre-norm block: feature attention, FFN, sample attention, FFN, each residual."""
    eps = config.ln_eps
    attn_drop = config.dropout_attention if rng is not None else 0.0
    ffn_drop = config.dropout_ffn if rng is not None else 0.0
    x = x + inter_feature_attention(layernorm(x, params, f"{prefix}.ln1", eps), params, f"{prefix}.feat",
                                    config.heads, mask, dropout=attn_drop, rng=rng)
    x = x + feed_forward(layernorm(x, params, f"{prefix}.ln2", eps), params, f"{prefix}.ffn1", ffn_drop, rng)
    if config.inter_sample:
        x = x + inter_sample_attention(layernorm(x, params, f"{prefix}.ln3", eps), params, f"{prefix}.samp",
                                       config.heads, use_rope=config.use_rope, rope_base=config.rope_base,
                                       dropout=attn_drop, rng=rng)
    x = x + feed_forward(layernorm(x, params, f"{prefix}.ln4", eps), params, f"{prefix}.ffn2", ffn_drop, rng)
    return x

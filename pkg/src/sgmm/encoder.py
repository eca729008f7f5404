"""Transformer encoder over a joint token/image-patch sequence.

Text is lowercased, whitespace-split, with punctuation broken out into
standalone tokens. Images become 16x16 patches, each flattened to a
768-vector (pixels row-major inside the patch, r,g,b interleaved per pixel,
values scaled to [0, 1]). The encoder embeds tokens, linearly projects
patches, adds positional embeddings (combined-sequence positions) plus a
per-segment modality embedding, runs post-norm encoder layers
(self-attention -> add&norm -> feed-forward -> add&norm -> dropout), and
mean-pools the final hidden states. Attention is bidirectional; there is no
causal mask.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .autodiff import (Tensor, add, concat, constant, dropout, gather_rows,
                       layernorm, matmul, mean_pool, mul, narrow, relu,
                       reshape, softmax, transpose)
from .errors import ConfigError, FormatError, InputError, ShapeError
from .rng import stream

PAD_ID, UNK_ID, MASK_ID = 0, 1, 2
SPECIALS = ("<pad>", "<unk>", "<mask>")

PATCH_SIZE = 16
PATCH_DIM = PATCH_SIZE * PATCH_SIZE * 3  # 768

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, punctuation as standalone tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]  # position = id; first three are the specials

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def index(self) -> dict[str, int]:
        cached = getattr(self, "_index_cache", None)
        if cached is None:
            cached = {t: i for i, t in enumerate(self.tokens)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    def encode(self, tokens: Iterable[str]) -> list[int]:
        idx = self.index
        return [idx.get(t, UNK_ID) for t in tokens]


# frozen dataclass with a lazy cache slot
Vocabulary._index_cache = None


def build_vocab(corpus: Iterable[str], max_size: int) -> Vocabulary:
    """Most frequent tokens up to max_size total entries (specials included);
    frequency ties break lexicographically."""
    if max_size < len(SPECIALS) + 1:
        raise ConfigError(f"vocabulary max_size must be at least {len(SPECIALS) + 1}")
    counts = Counter()
    for text in corpus:
        counts.update(tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[: max_size - len(SPECIALS)]]
    return Vocabulary(tokens=SPECIALS + tuple(kept))


def save_vocab(path: str | Path, vocab: Vocabulary) -> None:
    Path(path).write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if tuple(lines[:3]) != SPECIALS:
        raise FormatError(f"vocabulary file must start with {SPECIALS}")
    return Vocabulary(tokens=tuple(lines))


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class PatchGrid:
    width: int   # image width in pixels
    height: int
    patch_size: int
    vectors: np.ndarray  # (n_patches, patch_size*patch_size*3) in [0, 1]

    @property
    def n_patches(self) -> int:
        return self.vectors.shape[0]

    def patch_bounds(self, index: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) pixel rectangle of a patch, end-exclusive."""
        per_row = self.width // self.patch_size
        r, c = divmod(index, per_row)
        return (c * self.patch_size, r * self.patch_size,
                (c + 1) * self.patch_size, (r + 1) * self.patch_size)


def patchify(image: np.ndarray, patch_size: int = PATCH_SIZE) -> PatchGrid:
    """Split (h, w, 3) uint8 into row-major patches of flattened pixels."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"patchify: image must be (h, w, 3), got {img.shape}")
    h, w, _ = img.shape
    if h % patch_size or w % patch_size:
        raise ShapeError(
            f"patchify: {h}x{w} not divisible by patch size {patch_size}; no padding")
    scaled = img.astype(np.float64) / 255.0
    rows, cols = h // patch_size, w // patch_size
    vectors = (scaled
               .reshape(rows, patch_size, cols, patch_size, 3)
               .transpose(0, 2, 1, 3, 4)
               .reshape(rows * cols, patch_size * patch_size * 3))
    return PatchGrid(width=w, height=h, patch_size=patch_size, vectors=vectors.copy())


# ---------------------------------------------------------------------------
# encoder


@dataclass
class EncoderConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 128
    ln_eps: float = 1e-5

    def validate(self) -> None:
        if self.d_model < 1 or self.n_layers < 1 or self.d_ff < 1 or self.max_len < 1:
            raise ConfigError("encoder dims must be positive")
        if self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(
                f"d_model {self.d_model} must divide evenly into {self.n_heads} heads")


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape)


def init_encoder_params(vocab_size: int, cfg: EncoderConfig, rng: np.random.Generator,
                        prefix: str = "enc.") -> dict[str, Tensor]:
    """Fresh trainable tensors; draw order is fixed by construction order."""
    cfg.validate()
    d = cfg.d_model
    p: dict[str, Tensor] = {}

    def mat(name: str, shape: tuple[int, ...], fan_in: int) -> None:
        p[prefix + name] = Tensor(_uniform_init(rng, shape, fan_in), requires_grad=True)

    def vec(name: str, size: int, value: float = 0.0) -> None:
        p[prefix + name] = Tensor(np.full(size, value), requires_grad=True)

    mat("tok_emb", (vocab_size, d), d)
    mat("patch_proj", (PATCH_DIM, d), PATCH_DIM)
    mat("pos_emb", (cfg.max_len, d), d)
    mat("type_emb", (2, d), d)
    for i in range(cfg.n_layers):
        base = f"layer{i}."
        for proj in ("wq", "wk", "wv", "wo"):
            mat(base + "attn." + proj, (d, d), d)
        for bias in ("bq", "bk", "bv", "bo"):
            vec(base + "attn." + bias, d)
        vec(base + "ln1.g", d, 1.0)
        vec(base + "ln1.b", d)
        mat(base + "ffn.w1", (d, cfg.d_ff), d)
        vec(base + "ffn.b1", cfg.d_ff)
        mat(base + "ffn.w2", (cfg.d_ff, d), cfg.d_ff)
        vec(base + "ffn.b2", d)
        vec(base + "ln2.g", d, 1.0)
        vec(base + "ln2.b", d)
    return p


def multi_head_attention(x: Tensor, params: dict[str, Tensor], prefix: str,
                         n_heads: int) -> Tensor:
    """Bidirectional self-attention; length-1 input passes its value
    projection through unchanged (softmax over one position is exactly 1)."""
    d = x.shape[1]
    dk = d // n_heads
    scale = 1.0 / np.sqrt(dk)
    q = add(matmul(x, params[prefix + "wq"]), params[prefix + "bq"])
    k = add(matmul(x, params[prefix + "wk"]), params[prefix + "bk"])
    v = add(matmul(x, params[prefix + "wv"]), params[prefix + "bv"])
    heads = []
    for h in range(n_heads):
        qs = narrow(q, 1, h * dk, dk)
        ks = narrow(k, 1, h * dk, dk)
        vs = narrow(v, 1, h * dk, dk)
        weights = softmax(mul(matmul(qs, transpose(ks)), constant(scale)), axis=-1)
        heads.append(matmul(weights, vs))
    joined = concat(heads, axis=1) if n_heads > 1 else heads[0]
    return add(matmul(joined, params[prefix + "wo"]), params[prefix + "bo"])


def _layernorm_affine(x: Tensor, gain: Tensor, bias: Tensor, eps: float) -> Tensor:
    return add(mul(layernorm(x, eps), gain), bias)


def encoder_layer(x: Tensor, params: dict[str, Tensor], prefix: str,
                  cfg: EncoderConfig, drop_p: float, drop_key, training: bool) -> Tensor:
    attn = multi_head_attention(x, params, prefix + "attn.", cfg.n_heads)
    x = _layernorm_affine(add(x, attn), params[prefix + "ln1.g"],
                          params[prefix + "ln1.b"], cfg.ln_eps)
    hidden = relu(add(matmul(x, params[prefix + "ffn.w1"]), params[prefix + "ffn.b1"]))
    ff = add(matmul(hidden, params[prefix + "ffn.w2"]), params[prefix + "ffn.b2"])
    x = _layernorm_affine(add(x, ff), params[prefix + "ln2.g"],
                          params[prefix + "ln2.b"], cfg.ln_eps)
    return dropout(x, drop_p, drop_key, training=training)


def encode_sequence(token_ids: Sequence[int], patches: np.ndarray,
                    params: dict[str, Tensor], cfg: EncoderConfig,
                    prefix: str = "enc.", training: bool = False,
                    drop_p: float = 0.0, drop_seed: int = 0, step: int = 0) -> Tensor:
    """Pooled (d_model,) embedding of the joint token+patch sequence.

    Dropout masks are keyed by (seed, layer index, step) so a given training
    step is a pure function of its key.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or (patches.shape[0] > 0 and patches.shape[1] != PATCH_DIM):
        raise ShapeError(f"patches must be (n, {PATCH_DIM}), got {patches.shape}")
    n_tok = len(token_ids)
    n_patch = patches.shape[0]
    n = n_tok + n_patch
    if n == 0:
        raise InputError("encoder needs at least one token or patch")
    if n > cfg.max_len:
        raise InputError(f"sequence length {n} exceeds max_len {cfg.max_len}")
    segments = []
    if n_tok:
        segments.append(gather_rows(params[prefix + "tok_emb"], list(token_ids)))
    if n_patch:
        segments.append(matmul(constant(patches), params[prefix + "patch_proj"]))
    x = concat(segments, axis=0) if len(segments) > 1 else segments[0]
    x = add(x, gather_rows(params[prefix + "pos_emb"], np.arange(n)))
    x = add(x, gather_rows(params[prefix + "type_emb"], [0] * n_tok + [1] * n_patch))
    for i in range(cfg.n_layers):
        x = encoder_layer(x, params, f"{prefix}layer{i}.", cfg,
                          drop_p, (drop_seed, "enc-drop", i, step), training)
    return mean_pool(x)

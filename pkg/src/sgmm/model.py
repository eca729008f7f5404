"""The full classifier: joint sequence encoder + graph encoders + head.

The final feature vector is the concatenation (encoder embedding first) of
the pooled sequence embedding and the graph embedding; for the base fusion
variant the graph embedding is itself the concatenation of the text-graph
embedding followed by the visual-graph embedding. A two-layer head with a
ReLU hidden layer and sigmoid output yields the probability of the positive
("fake" = 1) class; examples score label 1 exactly when p >= 0.5.

Ablations are data-level: no_text empties the token list, no_image drops
all patches, no_tsg / no_vsg replace the graph with the empty graph (whose
encoding is exactly the zero vector of the right width, never a shorter
vector). When both encoder inputs are ablated the encoder embedding is a
zero vector of width d_model. Enabling all four flags is a config error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff import (Tensor, add, backward, bce_loss, concat, constant,
                       dropout, matmul, mean_tensors, relu, reshape, sigmoid,
                       zeros)
from .encoder import (EncoderConfig, PatchGrid, Vocabulary, build_vocab,
                      encode_sequence, init_encoder_params, patchify, tokenize,
                      PATCH_DIM)
from .errors import ConfigError, InputError, ShapeError
from .fusion import fuse_dummy_node, fuse_exact_merge, fuse_similarity_merge
from .gcn import GcnLayer, encode_fused_graph, encode_graph, normalized_adjacency
from .node2vec import Node2VecConfig, node2vec_embed
from .optim import Adam
from .rng import stream
from .scenegraph import SceneGraph, empty_scene_graph, to_plain_graph
from .wordvec import WordVectorTable, combine_features, featurize_node

ABLATION_FLAGS = ("no_vsg", "no_tsg", "no_image", "no_text")
FUSION_VARIANTS = ("base", "cmsg1", "cmsg2", "cmsg3")
FEATURE_MODES = ("glove", "n2v", "concat")

# dropout site ids (component of the mask key)
_SITE_HEAD = "head-drop"


@dataclass(frozen=True)
class Example:
    """One dataset record, eagerly loaded."""

    id: str
    text: str
    image: np.ndarray | None  # (h, w, 3) uint8, None once ablated
    tsg: SceneGraph
    vsg: SceneGraph
    label: int
    split: str


@dataclass(frozen=True)
class Prediction:
    probability: float
    label: int
    true_label: int | None = None


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    vocab_size: int = 512
    feature_mode: str = "glove"
    n2v: Node2VecConfig = field(default_factory=Node2VecConfig)
    word_dim: int = 50
    gcn_hidden: int = 32
    gcn_out: int = 32
    head_hidden: int = 128
    fusion: str = "base"
    cmsg_threshold: float | None = None

    def validate(self) -> None:
        self.encoder.validate()
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"unknown feature mode {self.feature_mode!r}")
        if self.fusion not in FUSION_VARIANTS:
            raise ConfigError(f"unknown fusion variant {self.fusion!r}")
        if self.fusion == "cmsg3":
            if self.cmsg_threshold is None or not 0.0 < self.cmsg_threshold <= 1.0:
                raise ConfigError("cmsg3 needs a similarity threshold in (0, 1]")
        if min(self.vocab_size, self.gcn_hidden, self.gcn_out, self.head_hidden) < 1:
            raise ConfigError("model dims must be positive")
        if self.word_dim < 1:
            raise ConfigError("word_dim must be positive")

    @property
    def node_feature_dim(self) -> int:
        if self.feature_mode == "glove":
            return self.word_dim
        if self.feature_mode == "n2v":
            return self.n2v.embedding_dim
        return self.word_dim + self.n2v.embedding_dim

    @property
    def graph_embedding_dim(self) -> int:
        return 2 * self.gcn_out if self.fusion == "base" else self.gcn_out

    @property
    def fused_dim(self) -> int:
        return self.encoder.d_model + self.graph_embedding_dim


@dataclass
class TrainConfig:
    lr: float = 1e-5
    weight_decay: float = 1e-7
    dropout: float = 0.3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    ablations: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigError("lr and weight_decay must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if not 8 <= self.batch_size <= 32:
            raise ConfigError(f"batch_size must be in [8, 32], got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        unknown = set(self.ablations) - set(ABLATION_FLAGS)
        if unknown:
            raise ConfigError(f"unknown ablation flags {sorted(unknown)}")
        if set(self.ablations) == set(ABLATION_FLAGS):
            raise ConfigError("ablating every input leaves the model no signal")


def desk_train_config(**overrides) -> TrainConfig:
    """Synthetic-corpus preset: same recipe, faster learning rate."""
    base = dict(lr=1e-3, epochs=30, batch_size=16)
    base.update(overrides)
    return TrainConfig(**base)


def desk_model_config(**overrides) -> ModelConfig:
    """Small dims that converge on the synthetic corpus in seconds."""
    base = dict(encoder=EncoderConfig(d_model=32, n_heads=4, n_layers=2,
                                      d_ff=64, max_len=128),
                vocab_size=256, gcn_hidden=32, gcn_out=32, head_hidden=64)
    base.update(overrides)
    return ModelConfig(**base)


# ---------------------------------------------------------------------------
# ablations


def apply_ablation(example: Example, flags: Sequence[str]) -> Example:
    """Data-level ablation; no flags returns the example unchanged."""
    flags = tuple(flags)
    unknown = set(flags) - set(ABLATION_FLAGS)
    if unknown:
        raise ConfigError(f"unknown ablation flags {sorted(unknown)}")
    if set(flags) == set(ABLATION_FLAGS):
        raise ConfigError("ablating every input leaves the model no signal")
    if not flags:
        return example
    changes: dict = {}
    if "no_text" in flags:
        changes["text"] = ""
    if "no_image" in flags:
        changes["image"] = None
    if "no_tsg" in flags:
        changes["tsg"] = empty_scene_graph("text")
    if "no_vsg" in flags:
        changes["vsg"] = empty_scene_graph("visual")
    return replace(example, **changes)


# ---------------------------------------------------------------------------
# parameter construction


def init_model_params(cfg: ModelConfig, vocab_size: int, seed: int) -> dict[str, Tensor]:
    """All trainable tensors, keyed by dotted names; draw order is fixed."""
    cfg.validate()
    rng = stream(seed, "init")
    params = init_encoder_params(vocab_size, cfg.encoder, rng, prefix="enc.")

    def mat(name: str, shape: tuple[int, int]) -> None:
        bound = float(np.sqrt(1.0 / shape[0]))
        params[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    def vec(name: str, size: int) -> None:
        params[name] = Tensor(np.zeros(size), requires_grad=True)

    d_in = cfg.node_feature_dim
    branches = ("tsg", "vsg") if cfg.fusion == "base" else ("cmsg",)
    for branch in branches:
        mat(f"gcn.{branch}.l1.w", (d_in, cfg.gcn_hidden))
        vec(f"gcn.{branch}.l1.b", cfg.gcn_hidden)
        mat(f"gcn.{branch}.l2.w", (cfg.gcn_hidden, cfg.gcn_out))
        vec(f"gcn.{branch}.l2.b", cfg.gcn_out)
    mat("head.w1", (cfg.fused_dim, cfg.head_hidden))
    vec("head.b1", cfg.head_hidden)
    mat("head.w2", (cfg.head_hidden, 1))
    vec("head.b2", 1)
    return params


def _gcn_layers(params: dict[str, Tensor], branch: str) -> tuple[GcnLayer, GcnLayer]:
    return (GcnLayer(params[f"gcn.{branch}.l1.w"], params[f"gcn.{branch}.l1.b"]),
            GcnLayer(params[f"gcn.{branch}.l2.w"], params[f"gcn.{branch}.l2.b"]))


# ---------------------------------------------------------------------------
# example preparation (everything constant across training steps)


@dataclass
class PreparedExample:
    id: str
    label: int
    tokens: list[str]
    token_ids: list[int]
    patch_grid: PatchGrid | None
    patches: np.ndarray  # (n, PATCH_DIM); zero rows when no image
    tsg: SceneGraph
    vsg: SceneGraph
    # per-branch (normalized operator, feature matrix); None for empty graphs
    tsg_s: np.ndarray | None
    tsg_feat: np.ndarray | None
    vsg_s: np.ndarray | None
    vsg_feat: np.ndarray | None
    fused: SceneGraph | None
    fused_s: np.ndarray | None
    fused_feat: np.ndarray | None
    split: str


def _graph_features(graph: SceneGraph, table: WordVectorTable, cfg: ModelConfig,
                    seed: int, tag: str, example_id: str
                    ) -> tuple[np.ndarray | None, np.ndarray | None]:
    n = len(graph.nodes)
    if n == 0:
        return None, None
    plain = to_plain_graph(graph)
    s = normalized_adjacency(plain.adjacency())
    need_words = cfg.feature_mode in ("glove", "concat")
    need_n2v = cfg.feature_mode in ("n2v", "concat")
    word_rows = [featurize_node(node, table, seed) for node in graph.nodes] \
        if need_words else None
    n2v_rows = None
    if need_n2v:
        n2v_cfg = replace(cfg.n2v, seed=_n2v_seed(seed, example_id, tag))
        n2v_rows = node2vec_embed(plain, n2v_cfg)
    feats = np.stack([
        combine_features(word_rows[i] if word_rows is not None else None,
                         n2v_rows[i] if n2v_rows is not None else None,
                         cfg.feature_mode)
        for i in range(n)])
    return s, feats


def _n2v_seed(seed: int, example_id: str, tag: str) -> int:
    digest = stream(seed, "n2v-seed", example_id, tag).integers(0, 2 ** 62)
    return int(digest)


def build_fused_graph(tsg: SceneGraph, vsg: SceneGraph, cfg: ModelConfig,
                      table: WordVectorTable, seed: int) -> SceneGraph:
    if cfg.fusion == "cmsg1":
        return fuse_dummy_node(tsg, vsg)
    if cfg.fusion == "cmsg2":
        return fuse_exact_merge(tsg, vsg)
    if cfg.fusion == "cmsg3":
        fused, _ = fuse_similarity_merge(tsg, vsg, table, cfg.cmsg_threshold, seed)
        return fused
    raise ConfigError(f"no fused graph for variant {cfg.fusion!r}")


def prepare_example(example: Example, vocab: Vocabulary, table: WordVectorTable,
                    cfg: ModelConfig, seed: int,
                    ablations: Sequence[str] = ()) -> PreparedExample:
    example = apply_ablation(example, ablations)
    tokens = tokenize(example.text)
    grid = patchify(example.image) if example.image is not None else None
    patches = grid.vectors if grid is not None else np.zeros((0, PATCH_DIM))
    prep = PreparedExample(
        id=example.id, label=example.label, tokens=tokens,
        token_ids=vocab.encode(tokens), patch_grid=grid, patches=patches,
        tsg=example.tsg, vsg=example.vsg,
        tsg_s=None, tsg_feat=None, vsg_s=None, vsg_feat=None,
        fused=None, fused_s=None, fused_feat=None, split=example.split)
    if cfg.fusion == "base":
        prep.tsg_s, prep.tsg_feat = _graph_features(
            example.tsg, table, cfg, seed, "tsg", example.id)
        prep.vsg_s, prep.vsg_feat = _graph_features(
            example.vsg, table, cfg, seed, "vsg", example.id)
    else:
        fused = build_fused_graph(example.tsg, example.vsg, cfg, table, seed)
        prep.fused = fused
        prep.fused_s, prep.fused_feat = _graph_features(
            fused, table, cfg, seed, "fused", example.id)
    return prep


# ---------------------------------------------------------------------------
# forward


def fuse_embeddings(encoder_emb: Tensor, graph_emb: Tensor, cfg: ModelConfig) -> Tensor:
    """Final feature vector: encoder embedding first, then graph embedding."""
    if encoder_emb.shape != (cfg.encoder.d_model,):
        raise ShapeError(f"encoder embedding has shape {encoder_emb.shape}, "
                         f"expected ({cfg.encoder.d_model},)")
    if graph_emb.shape != (cfg.graph_embedding_dim,):
        raise ShapeError(f"graph embedding has shape {graph_emb.shape}, "
                         f"expected ({cfg.graph_embedding_dim},)")
    return concat([encoder_emb, graph_emb], axis=0)


def classify_probability(fused: Tensor, params: dict[str, Tensor], cfg: ModelConfig,
                         training: bool = False, drop_p: float = 0.0,
                         drop_seed: int = 0, step: int = 0) -> Tensor:
    """Scalar probability tensor, strictly inside (0, 1)."""
    if fused.shape != (cfg.fused_dim,):
        raise ShapeError(f"fused vector has shape {fused.shape}, expected ({cfg.fused_dim},)")
    hidden = relu(add(matmul(fused, params["head.w1"]), params["head.b1"]))
    hidden = dropout(hidden, drop_p, (drop_seed, _SITE_HEAD, step), training=training)
    logit = add(matmul(hidden, params["head.w2"]), params["head.b2"])
    return reshape(sigmoid(logit), ())


def _feature_tensors(s: np.ndarray | None, feat: np.ndarray | None
                     ) -> tuple[Tensor | None, Tensor | None]:
    if s is None or feat is None:
        return None, None
    return constant(s), constant(feat)


def forward_probability(prep: PreparedExample, params: dict[str, Tensor],
                        cfg: ModelConfig, training: bool = False,
                        drop_p: float = 0.0, drop_seed: int = 0,
                        step: int = 0,
                        patches_override: np.ndarray | None = None,
                        token_ids_override: Sequence[int] | None = None,
                        tsg_feat_override: np.ndarray | None = None,
                        vsg_feat_override: np.ndarray | None = None) -> Tensor:
    """Probability of the fake class for one prepared example.

    The *_override arguments substitute masked inputs (attribution); they
    default to the prepared values.
    """
    token_ids = prep.token_ids if token_ids_override is None else list(token_ids_override)
    patches = prep.patches if patches_override is None else patches_override
    if len(token_ids) + patches.shape[0] == 0:
        encoder_emb = zeros(cfg.encoder.d_model)
    else:
        encoder_emb = encode_sequence(
            token_ids, patches, params, cfg.encoder, prefix="enc.",
            training=training, drop_p=drop_p, drop_seed=drop_seed, step=step)
    if cfg.fusion == "base":
        l1t, l2t = _gcn_layers(params, "tsg")
        l1v, l2v = _gcn_layers(params, "vsg")
        tsg_feat = prep.tsg_feat if tsg_feat_override is None else tsg_feat_override
        vsg_feat = prep.vsg_feat if vsg_feat_override is None else vsg_feat_override
        st, ft = _feature_tensors(prep.tsg_s, tsg_feat)
        sv, fv = _feature_tensors(prep.vsg_s, vsg_feat)
        graph_emb = concat([encode_graph(st, ft, l1t, l2t),
                            encode_graph(sv, fv, l1v, l2v)], axis=0)
    else:
        l1, l2 = _gcn_layers(params, "cmsg")
        sf, ff = _feature_tensors(prep.fused_s, prep.fused_feat)
        dummy = prep.fused.dummy if prep.fused is not None else None
        graph_emb = encode_fused_graph(sf, ff, l1, l2, dummy)
    fused = fuse_embeddings(encoder_emb, graph_emb, cfg)
    return classify_probability(fused, params, cfg, training=training,
                                drop_p=drop_p, drop_seed=drop_seed, step=step)


def classify(prep: PreparedExample, params: dict[str, Tensor], cfg: ModelConfig
             ) -> Prediction:
    p = float(forward_probability(prep, params, cfg).data)
    return Prediction(probability=p, label=int(p >= 0.5), true_label=prep.label)


# ---------------------------------------------------------------------------
# metrics


def metrics_report(pairs: Sequence[tuple[int, int]]) -> dict:
    """Accuracy plus per-class precision/recall/F1 from (predicted, true)
    label pairs; degenerate denominators score 0.0 and are flagged."""
    if not pairs:
        raise InputError("metrics need at least one prediction")
    tp = sum(1 for p, t in pairs if p == 1 and t == 1)
    fp = sum(1 for p, t in pairs if p == 1 and t == 0)
    fn = sum(1 for p, t in pairs if p == 0 and t == 1)
    tn = sum(1 for p, t in pairs if p == 0 and t == 0)
    flags: list[str] = []

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            flags.append(f"{name}: undefined (zero denominator), reported as 0.0")
            return 0.0
        return num / den

    def f1(precision: float, recall: float, name: str) -> float:
        if precision + recall == 0.0:
            flags.append(f"{name}: undefined (zero denominator), reported as 0.0")
            return 0.0
        return 2 * precision * recall / (precision + recall)

    fake_p = ratio(tp, tp + fp, "fake precision")
    fake_r = ratio(tp, tp + fn, "fake recall")
    real_p = ratio(tn, tn + fn, "real precision")
    real_r = ratio(tn, tn + fp, "real recall")
    return {
        "accuracy": (tp + tn) / len(pairs),
        "fake": {"precision": fake_p, "recall": fake_r,
                 "f1": f1(fake_p, fake_r, "fake f1")},
        "real": {"precision": real_p, "recall": real_r,
                 "f1": f1(real_p, real_r, "real f1")},
        "counts": {"tp": tp, "fp": fp, "fn": fn, "tn": tn, "total": len(pairs)},
        "flags": flags,
    }


def evaluate_prepared(preps: Sequence[PreparedExample], params: dict[str, Tensor],
                      cfg: ModelConfig) -> dict:
    pairs = []
    for prep in preps:
        pred = classify(prep, params, cfg)
        pairs.append((pred.label, prep.label))
    return metrics_report(pairs)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    vocab: Vocabulary
    log: list[dict]
    train_prepared: list[PreparedExample]
    test_prepared: list[PreparedExample]
    model_cfg: ModelConfig


def prepare_dataset(examples: Sequence[Example], vocab: Vocabulary,
                    table: WordVectorTable, cfg: ModelConfig, seed: int,
                    ablations: Sequence[str]) -> list[PreparedExample]:
    return [prepare_example(e, vocab, table, cfg, seed, ablations) for e in examples]


def train_model(examples: Sequence[Example], model_cfg: ModelConfig,
                train_cfg: TrainConfig, table: WordVectorTable) -> TrainResult:
    """Train on the 'train' split, logging one entry per epoch.

    Deterministic given (seed, configs, dataset): init, shuffles, dropout,
    and feature preparation all draw from keyed streams.
    """
    model_cfg.validate()
    train_cfg.validate()
    train_ex = [e for e in examples if e.split == "train"]
    test_ex = [e for e in examples if e.split == "test"]
    if not train_ex:
        raise ConfigError("no training examples in dataset")
    vocab = build_vocab((e.text for e in train_ex), model_cfg.vocab_size)
    seed = train_cfg.seed
    train_prep = prepare_dataset(train_ex, vocab, table, model_cfg, seed,
                                 train_cfg.ablations)
    test_prep = prepare_dataset(test_ex, vocab, table, model_cfg, seed,
                                train_cfg.ablations)
    params = init_model_params(model_cfg, len(vocab), seed)
    opt = Adam(params, lr=train_cfg.lr, weight_decay=train_cfg.weight_decay,
               beta1=train_cfg.beta1, beta2=train_cfg.beta2,
               epsilon=train_cfg.epsilon)
    log: list[dict] = []
    step = 0
    n = len(train_prep)
    for epoch in range(train_cfg.epochs):
        order = stream(seed, "shuffle", epoch).permutation(n)
        epoch_losses: list[float] = []
        train_pairs: list[tuple[int, int]] = []
        for start in range(0, n, train_cfg.batch_size):
            batch = [train_prep[int(i)] for i in order[start:start + train_cfg.batch_size]]
            opt.zero_grad()
            losses = []
            for prep in batch:
                p = forward_probability(prep, params, model_cfg, training=True,
                                        drop_p=train_cfg.dropout, drop_seed=seed,
                                        step=step)
                losses.append(bce_loss(p, prep.label))
                train_pairs.append((int(float(p.data) >= 0.5), prep.label))
            loss = mean_tensors(losses)
            backward(loss)
            opt.step()
            epoch_losses.extend(float(l.data) for l in losses)
            step += 1
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "train_acc": sum(1 for p, t in train_pairs if p == t) / len(train_pairs),
            "test_acc": (evaluate_prepared(test_prep, params, model_cfg)["accuracy"]
                         if test_prep else None),
        }
        log.append(entry)
    return TrainResult(params=params, vocab=vocab, log=log,
                       train_prepared=train_prep, test_prepared=test_prep,
                       model_cfg=model_cfg)


def evaluate(examples: Sequence[Example], params: dict[str, Tensor],
             cfg: ModelConfig, vocab: Vocabulary, table: WordVectorTable,
             seed: int = 0, ablations: Sequence[str] = ()) -> dict:
    """Metrics over a list of raw examples."""
    if not examples:
        raise InputError("evaluate needs at least one example")
    preps = prepare_dataset(examples, vocab, table, cfg, seed, ablations)
    return evaluate_prepared(preps, params, cfg)


def params_to_arrays(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in params.items()}


def arrays_to_params(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}

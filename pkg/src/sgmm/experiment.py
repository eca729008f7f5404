"""Experiment runs: config files, output directories, reload for inference.

A run config is a JSON object::

    {
      "dataset": "corpus/manifest.jsonl",     # relative to the config file
      "output_dir": "runs/exp1",              # relative to the config file
      "word_vectors": null,                   # null -> bundled table
      "model": { ...ModelConfig fields... },  # all optional
      "train": { ...TrainConfig fields... }   # all optional
    }

``run_experiment`` trains and writes into output_dir:

    config.json     resolved config (defaults filled, seed after override)
    vocab.txt       training vocabulary
    checkpoint.ckpt trained weights
    train_log.jsonl one JSON line per epoch
    metrics.json    final train/test reports embedding the exact config

Reruns of the same resolved config produce byte-identical checkpoint,
vocab, train log, and metrics files.

The environment variable ``SGMM_SEED`` overrides the training seed of a
config loaded from disk; the echoed config.json shows the effective seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import read_checkpoint, write_checkpoint
from .data import load_dataset
from .encoder import EncoderConfig, Vocabulary, load_vocab, save_vocab
from .errors import ConfigError
from .model import (ModelConfig, TrainConfig, arrays_to_params,
                    evaluate_prepared, params_to_arrays, train_model)
from .node2vec import Node2VecConfig
from .wordvec import WordVectorTable, bundled_word_vectors, load_word_vectors

SEED_ENV_VAR = "SGMM_SEED"


@dataclass
class ExperimentConfig:
    dataset: Path
    output_dir: Path
    model: ModelConfig
    train: TrainConfig
    word_vectors: Path | None = None


# ---------------------------------------------------------------------------
# JSON <-> dataclasses


def _check_type(doc: dict, key: str, want: type, where: str) -> None:
    value = doc[key]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return  # JSON integers are acceptable where floats are expected
    if isinstance(value, bool) and want is not bool:
        raise ConfigError(f"{where}: field {key!r} must be {want.__name__}")
    if not isinstance(value, want):
        raise ConfigError(f"{where}: field {key!r} must be {want.__name__}")


def _take(doc: dict, where: str, fields: dict[str, type]) -> dict:
    unknown = sorted(set(doc) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown fields {unknown}")
    out = {}
    for key, want in fields.items():
        if key in doc and doc[key] is not None:
            _check_type(doc, key, want, where)
            out[key] = doc[key]
    return out


def model_config_from_doc(doc: dict) -> ModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("'model' must be a JSON object")
    enc_doc = doc.get("encoder", {})
    if not isinstance(enc_doc, dict):
        raise ConfigError("'model.encoder' must be a JSON object")
    n2v_doc = doc.get("n2v", {})
    if not isinstance(n2v_doc, dict):
        raise ConfigError("'model.n2v' must be a JSON object")
    enc = EncoderConfig(**_take(enc_doc, "model.encoder", dict(
        d_model=int, n_heads=int, n_layers=int, d_ff=int, max_len=int,
        ln_eps=float)))
    n2v = Node2VecConfig(**_take(n2v_doc, "model.n2v", dict(
        p=float, q=float, walk_length=int, walks_per_node=int, window=int,
        embedding_dim=int, negative_samples=int, epochs=int, seed=int)))
    top = _take({k: v for k, v in doc.items() if k not in ("encoder", "n2v")},
                "model", dict(vocab_size=int, feature_mode=str, word_dim=int,
                              gcn_hidden=int, gcn_out=int, head_hidden=int,
                              fusion=str, cmsg_threshold=float))
    cfg = ModelConfig(encoder=enc, n2v=n2v, **top)
    cfg.validate()
    return cfg


def train_config_from_doc(doc: dict) -> TrainConfig:
    if not isinstance(doc, dict):
        raise ConfigError("'train' must be a JSON object")
    fields = _take(doc, "train", dict(
        lr=float, weight_decay=float, dropout=float, beta1=float, beta2=float,
        epsilon=float, batch_size=int, epochs=int, seed=int, ablations=list))
    if "ablations" in fields:
        flags = fields["ablations"]
        if not all(isinstance(f, str) for f in flags):
            raise ConfigError("train: 'ablations' must be a list of strings")
        fields["ablations"] = tuple(flags)
    cfg = TrainConfig(**fields)
    cfg.validate()
    return cfg


def model_config_to_doc(cfg: ModelConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    # nested dataclasses become dicts already; fix field order for stability
    return {
        "encoder": doc["encoder"],
        "n2v": doc["n2v"],
        "vocab_size": cfg.vocab_size,
        "feature_mode": cfg.feature_mode,
        "word_dim": cfg.word_dim,
        "gcn_hidden": cfg.gcn_hidden,
        "gcn_out": cfg.gcn_out,
        "head_hidden": cfg.head_hidden,
        "fusion": cfg.fusion,
        "cmsg_threshold": cfg.cmsg_threshold,
    }


def train_config_to_doc(cfg: TrainConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["ablations"] = list(cfg.ablations)
    return doc


def experiment_config_to_doc(cfg: ExperimentConfig) -> dict:
    return {
        "dataset": str(cfg.dataset),
        "output_dir": str(cfg.output_dir),
        "word_vectors": None if cfg.word_vectors is None else str(cfg.word_vectors),
        "model": model_config_to_doc(cfg.model),
        "train": train_config_to_doc(cfg.train),
    }


def parse_experiment_config(doc: dict, base_dir: Path) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = sorted(set(doc) - {"dataset", "output_dir", "word_vectors",
                                 "model", "train"})
    if unknown:
        raise ConfigError(f"experiment config: unknown fields {unknown}")
    for key in ("dataset", "output_dir"):
        if key not in doc or not isinstance(doc[key], str) or not doc[key]:
            raise ConfigError(f"experiment config needs a non-empty string {key!r}")
    wv = doc.get("word_vectors")
    if wv is not None and not isinstance(wv, str):
        raise ConfigError("'word_vectors' must be a path string or null")
    model = model_config_from_doc(doc.get("model", {}))
    train = train_config_from_doc(doc.get("train", {}))
    base = Path(base_dir)
    return ExperimentConfig(
        dataset=(base / doc["dataset"]).resolve(),
        output_dir=(base / doc["output_dir"]).resolve(),
        word_vectors=None if wv is None else (base / wv).resolve(),
        model=model, train=train)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read a config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    cfg = parse_experiment_config(doc, path.parent)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, "
                              f"got {env_seed!r}") from None
        cfg.train = dataclasses.replace(cfg.train, seed=seed)
    return cfg


# ---------------------------------------------------------------------------
# running and reloading


def _write_json(path: Path, doc: object) -> None:
    path.write_bytes((json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
                     .encode("utf-8"))


def load_table(word_vectors: Path | None) -> WordVectorTable:
    if word_vectors is None:
        return bundled_word_vectors()
    return load_word_vectors(Path(word_vectors).read_bytes())


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Train per config, write the run directory, return the metrics doc."""
    examples = load_dataset(cfg.dataset)
    table = load_table(cfg.word_vectors)
    result = train_model(examples, cfg.model, cfg.train, table)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", experiment_config_to_doc(cfg))
    save_vocab(out / "vocab.txt", result.vocab)
    write_checkpoint(out / "checkpoint.ckpt", params_to_arrays(result.params))
    log_lines = [json.dumps(entry, ensure_ascii=False) for entry in result.log]
    (out / "train_log.jsonl").write_bytes(("\n".join(log_lines) + "\n").encode("utf-8"))
    metrics = {
        "config": {"model": model_config_to_doc(cfg.model),
                   "train": train_config_to_doc(cfg.train)},
        "train": evaluate_prepared(result.train_prepared, result.params,
                                   cfg.model),
        "test": (evaluate_prepared(result.test_prepared, result.params,
                                   cfg.model)
                 if result.test_prepared else None),
    }
    _write_json(out / "metrics.json", metrics)
    return metrics


@dataclass
class LoadedRun:
    run_dir: Path
    model: ModelConfig
    train: TrainConfig
    params: dict
    vocab: Vocabulary
    word_vectors: Path | None

    def table(self) -> WordVectorTable:
        return load_table(self.word_vectors)


def load_run(checkpoint_path: str | Path) -> LoadedRun:
    """Reload a run from its checkpoint plus sibling config.json/vocab.txt."""
    ckpt = Path(checkpoint_path)
    run_dir = ckpt.parent
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise ConfigError(f"no config.json next to {ckpt}; expected a run "
                          "directory written by the train command")
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{config_path}: must hold a JSON object")
    model = model_config_from_doc(doc.get("model", {}))
    train = train_config_from_doc(doc.get("train", {}))
    wv = doc.get("word_vectors")
    params = arrays_to_params(read_checkpoint(ckpt))
    vocab = load_vocab(run_dir / "vocab.txt")
    return LoadedRun(run_dir=run_dir, model=model, train=train, params=params,
                     vocab=vocab,
                     word_vectors=None if wv is None else Path(wv))

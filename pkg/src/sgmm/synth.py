"""Synthetic planted-signal corpus generator.

Every example has text, a 3-channel image, a text scene graph, and a visual
scene graph. Exactly one chosen modality (or all of them, signal="mixed")
carries a class-separating pattern:

  text  - fake texts contain marker tokens, real texts contain a disjoint
          marker set (so lengths match);
  image - fake images get one full patch cell painted a marker color;
  tsg   - both classes receive the same six extra node labels
          (bot, robot, fabricates, reports, story, rumor) but wired
          differently (fake: bot-fabricates->story, robot-reports->rumor;
          real: bot-reports->story, robot-fabricates->rumor), so node
          identity alone cannot separate the classes; only which relation
          links which objects does. signal="vsg" plants the same scheme
          into the visual graphs;
  mixed - all four patterns at once.

Everything is drawn from streams keyed by (seed, split, index), so a spec
value maps to a byte-identical directory tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ManifestRecord, write_manifest
from .encoder import tokenize
from .errors import ConfigError
from .model import Example
from .ppm import encode_ppm
from .rng import stream
from .scenegraph import Node, SceneGraph, ensure_valid, make_scene_graph, serialize_scene_graph

SIGNALS = ("text", "image", "tsg", "vsg", "mixed")

OBJECT_POOL = ("man", "boy", "woman", "girl", "person", "crowd", "reporter",
               "podium", "microphone", "flag", "sign", "car", "banner",
               "camera", "table", "phone", "screen", "city", "street",
               "building", "stage", "market", "cat", "dog", "bird", "horse",
               "fox news", "city hall")
ATTRIBUTE_POOL = ("red", "blue", "green", "yellow", "bright", "dark", "tall",
                  "short", "old", "young", "large", "small", "angry", "happy",
                  "loud", "quiet")
RELATION_POOL = ("speaking", "holding", "standing", "wearing", "watching",
                 "near", "behind", "facing", "waving", "quoting")

# composition-level graph signal: both classes receive the SAME six labels,
# wired differently, so no single node identity separates them
FAKE_TRIPLES = (("bot", "fabricates", "story"), ("robot", "reports", "rumor"))
REAL_TRIPLES = (("bot", "reports", "story"), ("robot", "fabricates", "rumor"))

TEXT_POOL = ("the", "a", "on", "in", "at", "with", "man", "woman", "crowd",
             "city", "street", "news", "story", "report", "claim", "people",
             "today", "press", "stage", "market", "official", "witness",
             "panel", "camera", "phone", "paper", "radio", "flag", "car",
             "building", "park", "hall", "morning", "evening", "speech",
             "meeting", "photo", "video", "quote", "update")
FAKE_MARKERS = ("hoax", "fabricated", "clickbait", "exposed")
REAL_MARKERS = ("verified", "confirmed", "sourced", "documented")

MARKER_COLOR = (255, 0, 255)
BACKGROUND_PALETTE = ((60, 80, 100), (90, 70, 50), (50, 90, 60),
                      (100, 100, 100), (70, 60, 90), (110, 90, 70))


@dataclass
class SynthSpec:
    n_train: int = 200
    n_test: int = 50
    class_balance: float = 0.5
    seed: int = 0
    signal: str = "mixed"
    vocab_size: int = 40  # size of the base text pool actually used
    image_size: int = 32
    graph_min: int = 4
    graph_max: int = 9

    def validate(self) -> None:
        if self.n_train < 1 or self.n_test < 0:
            raise ConfigError("n_train must be >= 1 and n_test >= 0")
        if not 0.0 < self.class_balance < 1.0:
            raise ConfigError("class_balance must be in (0, 1)")
        if self.signal not in SIGNALS:
            raise ConfigError(f"signal must be one of {SIGNALS}, got {self.signal!r}")
        if self.image_size < 16 or self.image_size % 16:
            raise ConfigError("image_size must be a positive multiple of 16")
        if not 3 <= self.graph_min <= self.graph_max:
            raise ConfigError("need 3 <= graph_min <= graph_max")
        if not 8 <= self.vocab_size <= len(TEXT_POOL):
            raise ConfigError(f"vocab_size must be in [8, {len(TEXT_POOL)}]")


# ---------------------------------------------------------------------------
# random valid scene graphs (shared with tests)


def random_scene_graph(rng: np.random.Generator, min_nodes: int = 3,
                       max_nodes: int = 9, modality: str = "text") -> SceneGraph:
    """A random graph satisfying every structural invariant.

    Node ids are a random dense permutation so consumers cannot rely on
    kind-ordered ids.
    """
    target = int(rng.integers(min_nodes, max_nodes + 1))
    n_rel = int(rng.integers(1, 3))
    n_obj = max(2, min(3, target - n_rel))
    n_attr = max(0, min(3, target - n_obj - n_rel))
    # provisional ids: objects, then attributes, then relationships
    kinds = ["object"] * n_obj + ["attribute"] * n_attr + ["relationship"] * n_rel
    labels = [str(rng.choice(OBJECT_POOL)) for _ in range(n_obj)]
    labels += [str(rng.choice(ATTRIBUTE_POOL)) for _ in range(n_attr)]
    labels += [str(rng.choice(RELATION_POOL)) for _ in range(n_rel)]
    edges: list[tuple[int, int]] = []
    for r in range(n_obj + n_attr, n_obj + n_attr + n_rel):
        src = int(rng.integers(0, n_obj))
        dst = int(rng.integers(0, n_obj))
        if n_obj > 1:
            while dst == src:
                dst = int(rng.integers(0, n_obj))
        edges.append((src, r))
        edges.append((r, dst))
        if n_obj > 2 and rng.random() < 0.2:  # extra incoming object
            extra = int(rng.integers(0, n_obj))
            edges.append((extra, r))
    for a in range(n_obj, n_obj + n_attr):
        edges.append((int(rng.integers(0, n_obj)), a))
    n = len(kinds)
    perm = rng.permutation(n)  # provisional -> final id
    nodes = [Node(id=int(perm[i]), kind=kinds[i], label=labels[i]) for i in range(n)]
    remapped = [(int(perm[s]), int(perm[d])) for s, d in edges]
    return ensure_valid(make_scene_graph(nodes, remapped, modality=modality))


def _append_triples(graph: SceneGraph, triples: list[tuple[str, str, str]]) -> SceneGraph:
    """Append (object, relationship, object) triples as fresh nodes."""
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    next_id = len(nodes)
    for subj, rel, obj in triples:
        s, r, o = next_id, next_id + 1, next_id + 2
        nodes.append(Node(id=s, kind="object", label=subj))
        nodes.append(Node(id=r, kind="relationship", label=rel))
        nodes.append(Node(id=o, kind="object", label=obj))
        edges.append((s, r))
        edges.append((r, o))
        next_id += 3
    return ensure_valid(make_scene_graph(nodes, edges, modality=graph.modality))


def contains_triple(graph: SceneGraph, triple: tuple[str, str, str]) -> bool:
    """True when subj -rel-> obj exists through one relationship node."""
    subj, rel, obj = triple
    label = {n.id: n.label for n in graph.nodes}
    kind = {n.id: n.kind for n in graph.nodes}
    into: dict[int, set[int]] = {}
    out: dict[int, set[int]] = {}
    for s, d in graph.edges:
        out.setdefault(s, set()).add(d)
        into.setdefault(d, set()).add(s)
    for n in graph.nodes:
        if n.kind != "relationship" or n.label != rel:
            continue
        has_subj = any(kind[s] == "object" and label[s] == subj
                       for s in into.get(n.id, ()))
        has_obj = any(kind[d] == "object" and label[d] == obj
                      for d in out.get(n.id, ()))
        if has_subj and has_obj:
            return True
    return False


# ---------------------------------------------------------------------------
# per-modality generators


def _gen_text(rng: np.random.Generator, spec: SynthSpec, fake: bool) -> str:
    pool = TEXT_POOL[: spec.vocab_size]
    length = int(rng.integers(8, 15))
    words = [str(rng.choice(pool)) for _ in range(length)]
    if spec.signal in ("text", "mixed"):
        markers = FAKE_MARKERS if fake else REAL_MARKERS
        for _ in range(2):
            pos = int(rng.integers(0, len(words) + 1))
            words.insert(pos, str(rng.choice(markers)))
    return " ".join(words)


def _gen_image(rng: np.random.Generator, spec: SynthSpec, fake: bool) -> np.ndarray:
    size = spec.image_size
    base = np.array(BACKGROUND_PALETTE[int(rng.integers(0, len(BACKGROUND_PALETTE)))],
                    dtype=np.int16)
    noise = rng.integers(-8, 9, size=(size, size, 3), dtype=np.int16)
    img = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)
    if fake and spec.signal in ("image", "mixed"):
        cells = size // 16
        r = int(rng.integers(0, cells))
        c = int(rng.integers(0, cells))
        img[r * 16:(r + 1) * 16, c * 16:(c + 1) * 16] = MARKER_COLOR
    return img


def _gen_graph(rng: np.random.Generator, spec: SynthSpec, fake: bool,
               modality: str, carries_signal: bool) -> SceneGraph:
    base = random_scene_graph(rng, spec.graph_min, spec.graph_max, modality)
    if not carries_signal:
        return base
    triples = list(FAKE_TRIPLES if fake else REAL_TRIPLES)
    return _append_triples(base, triples)


# ---------------------------------------------------------------------------
# corpus generation


def gen_synth(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Write images/, graphs/, and manifest.jsonl; returns the manifest path."""
    spec.validate()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    records: list[ManifestRecord] = []
    for split, count in (("train", spec.n_train), ("test", spec.n_test)):
        n_fake = round(count * spec.class_balance)
        labels = [1] * n_fake + [0] * (count - n_fake)
        stream(spec.seed, split, "labels").shuffle(labels)
        for i in range(count):
            rng = stream(spec.seed, split, i)
            fake = labels[i] == 1
            rec_id = f"{split}{i:04d}"
            text = _gen_text(rng, spec, fake)
            image = _gen_image(rng, spec, fake)
            tsg = _gen_graph(rng, spec, fake, "text",
                             spec.signal in ("tsg", "mixed"))
            vsg = _gen_graph(rng, spec, fake, "visual",
                             spec.signal in ("vsg", "mixed"))
            (out / "images" / f"{rec_id}.ppm").write_bytes(encode_ppm(image))
            (out / "graphs" / f"{rec_id}.tsg.json").write_bytes(serialize_scene_graph(tsg))
            (out / "graphs" / f"{rec_id}.vsg.json").write_bytes(serialize_scene_graph(vsg))
            records.append(ManifestRecord(
                id=rec_id, text=text,
                image_path=f"images/{rec_id}.ppm",
                tsg_path=f"graphs/{rec_id}.tsg.json",
                vsg_path=f"graphs/{rec_id}.vsg.json",
                label=labels[i], split=split))
    manifest = out / "manifest.jsonl"
    write_manifest(records, manifest)
    return manifest


# ---------------------------------------------------------------------------
# generator self-test: is the text signal linearly separable?


def text_probe_accuracy(examples: list[Example]) -> float:
    """Held-out accuracy of a logistic bag-of-words probe (train -> test)."""
    from sklearn.linear_model import LogisticRegression

    train = [e for e in examples if e.split == "train"]
    test = [e for e in examples if e.split == "test"]
    if not train or not test:
        raise ConfigError("probe needs both train and test splits")
    vocab: dict[str, int] = {}
    for e in train:
        for tok in tokenize(e.text):
            vocab.setdefault(tok, len(vocab))

    def featurize(batch: list[Example]) -> np.ndarray:
        x = np.zeros((len(batch), len(vocab)))
        for i, e in enumerate(batch):
            for tok in tokenize(e.text):
                j = vocab.get(tok)
                if j is not None:
                    x[i, j] += 1.0
        return x

    clf = LogisticRegression(max_iter=1000, random_state=0)
    clf.fit(featurize(train), [e.label for e in train])
    predictions = clf.predict(featurize(test))
    return float(np.mean(predictions == [e.label for e in test]))

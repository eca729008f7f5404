"""Scene graphs: typed nodes, directed edges, JSON round-trip, validation.

A graph has object/attribute/relationship nodes with dense integer ids and
directed edges. For text/visual graphs only three edge patterns are legal
(object->relationship, relationship->object, object->attribute) and every
relationship node must both receive an edge from an object and emit one to
an object. Fused graphs (outputs of the cross-modal merges) relax edge
validation to "both endpoints exist".

The JSON wire format:

    {"nodes": [{"id": 0, "kind": "object", "label": "man"}, ...],
     "edges": [{"src": 0, "dst": 1}, ...]}

Serialization is canonical: two-space indent, keys in the order shown,
nodes sorted by id, edges sorted lexicographically, UTF-8 without BOM.
A "modality" key (and "dummy" for fused graphs that carry a marker node)
follows "edges"; the parser accepts files without them.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import FormatError, ValidationError

KINDS = ("object", "attribute", "relationship")
MODALITIES = ("text", "visual", "fused")


@dataclass(frozen=True, order=True)
class Node:
    id: int
    kind: str
    label: str


@dataclass(frozen=True)
class SceneGraph:
    """Immutable graph; use make_scene_graph to get canonical field order."""

    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int], ...]
    modality: str = "text"
    dummy: int | None = None

    def __len__(self) -> int:
        return len(self.nodes)


def make_scene_graph(nodes: Iterable[Node], edges: Iterable[tuple[int, int]],
                     modality: str = "text", dummy: int | None = None) -> SceneGraph:
    """Construct with nodes sorted by id and edges sorted lexicographically."""
    nodes = tuple(sorted(nodes, key=lambda n: n.id))
    edges = tuple(sorted((int(s), int(d)) for s, d in edges))
    return SceneGraph(nodes=nodes, edges=edges, modality=modality, dummy=dummy)


def empty_scene_graph(modality: str = "text") -> SceneGraph:
    return SceneGraph(nodes=(), edges=(), modality=modality)


# ---------------------------------------------------------------------------
# validation


def validate_scene_graph(g: SceneGraph) -> list[str]:
    """Return all invariant violations (empty list = valid).

    The empty graph is valid. Fused graphs skip the edge-pattern and
    relationship-degree rules.
    """
    violations: list[str] = []
    n = len(g.nodes)
    ids = [node.id for node in g.nodes]
    if sorted(ids) != list(range(n)):
        violations.append(f"node ids must be unique and dense 0..{n - 1}, got {sorted(ids)}")
        return violations  # downstream checks assume dense ids
    if g.modality not in MODALITIES:
        violations.append(f"unknown modality {g.modality!r}")
    kind_of = {}
    for node in g.nodes:
        kind_of[node.id] = node.kind
        if node.kind not in KINDS:
            violations.append(f"node {node.id}: unknown kind {node.kind!r}")
        if node.label == "":
            violations.append(f"node {node.id}: empty label")
        elif node.label != node.label.strip():
            violations.append(f"node {node.id}: label has surrounding whitespace")
        elif node.label != node.label.lower():
            violations.append(f"node {node.id}: label must be lowercase")
    for src, dst in g.edges:
        if src not in kind_of or dst not in kind_of:
            violations.append(f"edge ({src}->{dst}): endpoint does not exist")
    if g.dummy is not None and g.dummy not in kind_of:
        violations.append(f"dummy index {g.dummy} does not name a node")
    if g.modality == "fused":
        return violations
    admissible = {("object", "relationship"), ("relationship", "object"),
                  ("object", "attribute")}
    rel_in_from_obj: set[int] = set()
    rel_out_to_obj: set[int] = set()
    for src, dst in g.edges:
        if src not in kind_of or dst not in kind_of:
            continue
        pair = (kind_of[src], kind_of[dst])
        if pair not in admissible:
            violations.append(f"edge ({src}->{dst}): {pair[0]}->{pair[1]} is not admissible")
        if pair == ("object", "relationship"):
            rel_in_from_obj.add(dst)
        elif pair == ("relationship", "object"):
            rel_out_to_obj.add(src)
    for node in g.nodes:
        if node.kind != "relationship":
            continue
        if node.id not in rel_in_from_obj:
            violations.append(f"relationship node {node.id}: no incoming edge from an object")
        if node.id not in rel_out_to_obj:
            violations.append(f"relationship node {node.id}: no outgoing edge to an object")
    return violations


def ensure_valid(g: SceneGraph) -> SceneGraph:
    violations = validate_scene_graph(g)
    if violations:
        raise ValidationError(violations)
    return g


# ---------------------------------------------------------------------------
# JSON parse / serialize


def _field(obj: dict, key: str, types, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise FormatError(f"{where}: field {key!r} has wrong type {type(val).__name__}")
    return val


def parse_scene_graph(data: bytes | str, default_modality: str = "text") -> SceneGraph:
    """Parse and validate one graph. Raises FormatError (with byte offset for
    malformed JSON), or ValidationError once the structure is well-formed."""
    if isinstance(data, bytes):
        if data.startswith(b"\xef\xbb\xbf"):
            raise FormatError("scene graph: UTF-8 BOM is not allowed")
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"scene graph: invalid UTF-8 at byte {e.start}") from e
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"scene graph: malformed JSON at byte offset {e.pos}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise FormatError("scene graph: top level must be an object")
    allowed = {"nodes", "edges", "modality", "dummy"}
    extra = set(doc) - allowed
    if extra:
        raise FormatError(f"scene graph: unexpected top-level fields {sorted(extra)}")
    raw_nodes = _field(doc, "nodes", list, "scene graph")
    raw_edges = _field(doc, "edges", list, "scene graph")
    modality = doc.get("modality", default_modality)
    if not isinstance(modality, str) or modality not in MODALITIES:
        raise FormatError(f"scene graph: bad modality {modality!r}")
    dummy = doc.get("dummy")
    if dummy is not None and (isinstance(dummy, bool) or not isinstance(dummy, int)):
        raise FormatError("scene graph: field 'dummy' must be an integer")

    nodes = []
    for i, raw in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where}: must be an object")
        if set(raw) != {"id", "kind", "label"}:
            raise FormatError(f"{where}: fields must be exactly id, kind, label")
        nid = _field(raw, "id", int, where)
        kind = _field(raw, "kind", str, where)
        if kind not in KINDS:
            raise FormatError(f"{where}: unknown kind {kind!r}")
        label = _field(raw, "label", str, where)
        label = unicodedata.normalize("NFC", label).lower()
        nodes.append(Node(id=nid, kind=kind, label=label))
    edges = []
    for i, raw in enumerate(raw_edges):
        where = f"edges[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where}: must be an object")
        if set(raw) != {"src", "dst"}:
            raise FormatError(f"{where}: fields must be exactly src, dst")
        edges.append((_field(raw, "src", int, where), _field(raw, "dst", int, where)))

    return ensure_valid(make_scene_graph(nodes, edges, modality=modality, dummy=dummy))


def serialize_scene_graph(g: SceneGraph) -> bytes:
    """Canonical JSON bytes; parse(serialize(g)) == make_scene_graph(g...)."""
    doc: dict = {
        "nodes": [{"id": n.id, "kind": n.kind, "label": n.label}
                  for n in sorted(g.nodes, key=lambda n: n.id)],
        "edges": [{"src": s, "dst": d} for s, d in sorted(g.edges)],
        "modality": g.modality,
    }
    if g.dummy is not None:
        doc["dummy"] = g.dummy
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# undirected view for walks and convolution


@dataclass(frozen=True)
class PlainGraph:
    """Undirected simple view: no direction, no self-loops, no parallel edges."""

    n: int
    neighbors: tuple[tuple[int, ...], ...]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                a[i, j] = 1.0
        return a


def to_plain_graph(g: SceneGraph) -> PlainGraph:
    n = len(g.nodes)
    sets: list[set[int]] = [set() for _ in range(n)]
    for src, dst in g.edges:
        if src == dst:
            continue  # self-loops dropped; convolution adds its own
        sets[src].add(dst)
        sets[dst].add(src)
    return PlainGraph(n=n, neighbors=tuple(tuple(sorted(s)) for s in sets))

"""Cross-modal scene-graph fusion: three ways to merge a text graph with a
visual graph into one fused graph.

1. fuse_dummy_node: disjoint union plus one extra object node labeled
   "<dummy>" with an edge to every other node; the classifier later reads
   that node's convolved row.
2. fuse_exact_merge: nodes identical in (kind, label) across the two graphs
   collapse into one (within-graph duplicates stay apart).
3. fuse_similarity_merge: greedy merge of same-kind cross-graph pairs in
   descending cosine similarity of their feature vectors, at most one merge
   per node; the merged node keeps the text graph's label.

All three return graphs with modality "fused" and dense renumbered ids:
text-graph nodes keep 0..t-1, surviving visual-graph nodes follow in id
order.
"""

from __future__ import annotations

from .errors import InputError
from .scenegraph import Node, SceneGraph, make_scene_graph
from .wordvec import WordVectorTable, cosine, featurize_node

DUMMY_LABEL = "<dummy>"


def _check_inputs(tsg: SceneGraph, vsg: SceneGraph) -> None:
    if tsg.modality == "fused" or vsg.modality == "fused":
        raise InputError("fusion inputs must be unfused graphs")


def fuse_dummy_node(tsg: SceneGraph, vsg: SceneGraph) -> SceneGraph:
    """Disjoint union plus a hub node linked to every original node."""
    _check_inputs(tsg, vsg)
    t = len(tsg.nodes)
    v = len(vsg.nodes)
    nodes = list(tsg.nodes)
    nodes += [Node(id=n.id + t, kind=n.kind, label=n.label) for n in vsg.nodes]
    hub = Node(id=t + v, kind="object", label=DUMMY_LABEL)
    nodes.append(hub)
    edges = list(tsg.edges)
    edges += [(s + t, d + t) for s, d in vsg.edges]
    edges += [(hub.id, i) for i in range(t + v)]
    return make_scene_graph(nodes, edges, modality="fused", dummy=hub.id)


def _merged_graph(tsg: SceneGraph, vsg: SceneGraph,
                  pairs: list[tuple[int, int]]) -> SceneGraph:
    """Union with the given (tsg id, vsg id) node pairs unified.

    Merged nodes keep the text node's kind/label and id slot; unmerged
    visual nodes are appended in id order. Duplicate edges collapse.
    """
    t = len(tsg.nodes)
    vsg_to_new = {}
    for ti, vi in pairs:
        vsg_to_new[vi] = ti
    nodes = list(tsg.nodes)
    next_id = t
    for n in vsg.nodes:
        if n.id in vsg_to_new:
            continue
        vsg_to_new[n.id] = next_id
        nodes.append(Node(id=next_id, kind=n.kind, label=n.label))
        next_id += 1
    edges = set(tsg.edges)
    edges.update((vsg_to_new[s], vsg_to_new[d]) for s, d in vsg.edges)
    return make_scene_graph(nodes, sorted(edges), modality="fused")


def fuse_exact_merge(tsg: SceneGraph, vsg: SceneGraph) -> SceneGraph:
    """Unify cross-graph nodes with identical (kind, label).

    One merge per distinct shared pair; when a side holds duplicates the
    lowest-id node represents it.
    """
    _check_inputs(tsg, vsg)
    first_t: dict[tuple[str, str], int] = {}
    for n in tsg.nodes:
        first_t.setdefault((n.kind, n.label), n.id)
    pairs = []
    seen_v: set[tuple[str, str]] = set()
    for n in vsg.nodes:
        key = (n.kind, n.label)
        if key in first_t and key not in seen_v:
            pairs.append((first_t[key], n.id))
            seen_v.add(key)
    return _merged_graph(tsg, vsg, pairs)


def fuse_similarity_merge(tsg: SceneGraph, vsg: SceneGraph, table: WordVectorTable,
                          threshold: float, seed: int = 0
                          ) -> tuple[SceneGraph, list[str]]:
    """Greedy same-kind merging by descending feature cosine similarity.

    Candidate pairs below `threshold` are ignored; ties break by
    (text id, visual id). Nodes merge at most once. Pairs touching a
    zero-norm feature vector are skipped and reported in the returned
    warning list. A threshold above 1 therefore yields the plain disjoint
    union. The merged node keeps the text graph's label.
    """
    _check_inputs(tsg, vsg)
    if threshold <= 0.0:
        raise InputError(f"similarity threshold must be positive, got {threshold}")
    feats_t = {n.id: featurize_node(n, table, seed) for n in tsg.nodes}
    feats_v = {n.id: featurize_node(n, table, seed) for n in vsg.nodes}
    warnings: list[str] = []
    candidates: list[tuple[float, int, int]] = []
    for nt in tsg.nodes:
        for nv in vsg.nodes:
            if nt.kind != nv.kind:
                continue
            try:
                sim = cosine(feats_t[nt.id], feats_v[nv.id])
            except ZeroDivisionError:
                warnings.append(
                    f"zero-norm feature: skipped pair (text {nt.id} {nt.label!r}, "
                    f"visual {nv.id} {nv.label!r})")
                continue
            if sim >= threshold:
                candidates.append((sim, nt.id, nv.id))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_t: set[int] = set()
    used_v: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for _, ti, vi in candidates:
        if ti in used_t or vi in used_v:
            continue
        pairs.append((ti, vi))
        used_t.add(ti)
        used_v.add(vi)
    return _merged_graph(tsg, vsg, pairs), warnings


def disjoint_union(tsg: SceneGraph, vsg: SceneGraph) -> SceneGraph:
    """Fused graph with no merging at all (reference for threshold > 1)."""
    _check_inputs(tsg, vsg)
    return _merged_graph(tsg, vsg, [])

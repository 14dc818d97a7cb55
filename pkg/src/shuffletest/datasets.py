"""Edge-list ingestion and multilayer dataset preparation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import Graph


@dataclass(frozen=True)
class EdgeListDataset:
    """Named graph layers over one shared, canonically ordered vertex set."""

    layers: tuple[tuple[str, Graph], ...]
    labels: tuple[str, ...]
    provenance: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        n = len(self.labels)
        for name, g in self.layers:
            if g.n != n:
                raise ValueError(f"layer {name!r} does not match the shared vertex set")

    def layer(self, name: str) -> Graph:
        for layer_name, g in self.layers:
            if layer_name == name:
                return g
        raise KeyError(name)

    @property
    def n(self) -> int:
        return len(self.labels)


def load_edge_list(path, symmetrize: bool = True, drop_self_loops: bool = True):
    """Read a whitespace-separated edge list into a simple undirected graph.

    Each non-comment line holds two opaque string vertex ids; lines starting
    with '#' are ignored.  Duplicate edges collapse; with ``symmetrize`` the
    two orientations of a pair are the same edge, otherwise seeing both
    orientations is an error.  Self-loops are dropped (keeping the vertex)
    when requested and rejected otherwise.

    Returns ``(graph, labels)`` with ``labels`` mapping vertex id to index
    in first-appearance order.
    """
    path = Path(path)
    labels: dict[str, int] = {}
    edges: set[tuple[int, int]] = set()
    seen_directed: set[tuple[int, int]] = set()

    def index(tok: str) -> int:
        if tok not in labels:
            labels[tok] = len(labels)
        return labels[tok]

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: malformed edge line: {raw.rstrip()!r}")
            u, v = index(parts[0]), index(parts[1])
            if u == v:
                if drop_self_loops:
                    continue
                raise ValueError(f"{path}:{lineno}: self-loop on vertex {parts[0]!r}")
            if symmetrize:
                edges.add((min(u, v), max(u, v)))
            else:
                if (v, u) in seen_directed and (u, v) not in seen_directed:
                    raise ValueError(
                        f"{path}:{lineno}: edge {parts[0]!r} {parts[1]!r} also appears "
                        "reversed; pass symmetrize=True to collapse orientations"
                    )
                seen_directed.add((u, v))
                edges.add((min(u, v), max(u, v)))
    if not labels:
        raise ValueError(f"{path}: empty edge list")
    n = len(labels)
    adj = np.zeros((n, n), dtype=np.uint8)
    for u, v in edges:
        adj[u, v] = adj[v, u] = 1
    return Graph(adj), dict(labels)


def write_edge_list(graph: Graph, labels, path) -> None:
    """Write a graph as one 'u v' line per edge, in index order."""
    if isinstance(labels, dict):
        ordered = [None] * len(labels)
        for lab, idx in labels.items():
            ordered[idx] = lab
    else:
        ordered = list(labels)
    if len(ordered) != graph.n:
        raise ValueError("label count does not match graph size")
    iu = np.triu_indices(graph.n, k=1)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(*iu):
            if graph.adjacency[i, j]:
                fh.write(f"{ordered[i]} {ordered[j]}\n")


def prepare_multilayer(layers, provenance=()) -> EdgeListDataset:
    """Restrict layers to their common vertices, in one canonical order.

    ``layers`` maps layer name to ``(graph, labels)`` as returned by
    :func:`load_edge_list`; ``provenance`` optionally records
    ``(layer name, source path)`` pairs.  Vertices outside the intersection
    of the label sets are removed, vertices isolated in every layer are
    removed, and the survivors are sorted to fix one ordering shared by all
    layers.
    """
    items = list(layers.items())
    if len(items) < 2:
        raise ValueError("a multilayer dataset needs at least two layers")
    common = set.intersection(*(set(lab) for _, (_, lab) in items))
    if not common:
        raise ValueError("the layers share no vertices")
    ordered = sorted(common)
    restricted = {}
    for name, (g, lab) in items:
        idx = np.asarray([lab[v] for v in ordered], dtype=np.intp)
        restricted[name] = np.asarray(g.adjacency)[np.ix_(idx, idx)]
    degrees = sum(mat.sum(axis=1) for mat in restricted.values())
    keep = np.nonzero(degrees > 0)[0]
    if keep.size == 0:
        raise ValueError("every common vertex is isolated in all layers")
    final_labels = tuple(ordered[i] for i in keep)
    out_layers = tuple(
        (name, Graph(mat[np.ix_(keep, keep)])) for name, mat in restricted.items()
    )
    return EdgeListDataset(out_layers, final_labels,
                           tuple((str(a), str(b)) for a, b in provenance))

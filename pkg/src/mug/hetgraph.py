"""Heterogeneous graph data model, meta-path adjacency views, homophily diagnostic.

Nodes are grouped by type and addressed by (type, local index); a global
index (type offset + local) addresses every node in the whole graph, which
is the ordering the structural embedding table uses. Meta-path adjacency
views are dense boolean target x target matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class SchemaError(ValueError):
    """Graph schema inconsistency (bad meta-path, unknown type/relation)."""


@dataclass(frozen=True)
class Relation:
    name: str
    src: str
    dst: str


@dataclass(frozen=True)
class MetaPath:
    """Alternating type/relation template A1 -R1- A2 ... -Rl- A(l+1)."""

    name: str
    types: Tuple[str, ...]
    relations: Tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.relations)

    @property
    def steps(self) -> Tuple[str, ...]:
        out: List[str] = [self.types[0]]
        for rel, typ in zip(self.relations, self.types[1:]):
            out.extend([rel, typ])
        return tuple(out)

    def is_palindromic(self) -> bool:
        return self.types == self.types[::-1] and self.relations == self.relations[::-1]

    @staticmethod
    def from_steps(name: str, steps: Sequence[str]) -> "MetaPath":
        if len(steps) < 3 or len(steps) % 2 == 0:
            raise SchemaError(
                f"meta-path '{name}': steps must alternate type,rel,...,type "
                f"(odd length >= 3), got {len(steps)} entries"
            )
        return MetaPath(name, tuple(steps[0::2]), tuple(steps[1::2]))


@dataclass
class HetGraph:
    node_types: List[str]
    relations: List[Relation]
    counts: Dict[str, int]
    node_ids: Dict[str, List[str]]              # original string ids per type
    edges: Dict[str, np.ndarray]                # relation name -> (E, 2) local indices
    target_type: str
    attrs: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    labels: Optional[np.ndarray] = None         # per target node, class ids 0..C-1
    metapaths: List[MetaPath] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    # -- invariants ---------------------------------------------------------

    def validate(self) -> None:
        if self.target_type not in self.node_types:
            raise SchemaError(f"target type '{self.target_type}' not declared")
        if len(self.node_types) + len(self.relations) <= 2:
            warnings.warn(
                "graph has a single node and relation type; it is homogeneous",
                stacklevel=2,
            )
        for rel in self.relations:
            for t in (rel.src, rel.dst):
                if t not in self.node_types:
                    raise SchemaError(f"relation '{rel.name}' references unknown type '{t}'")
        for rel in self.relations:
            e = self.edges.get(rel.name)
            if e is None:
                continue
            if e.size and (
                e[:, 0].min() < 0 or e[:, 0].max() >= self.counts[rel.src]
                or e[:, 1].min() < 0 or e[:, 1].max() >= self.counts[rel.dst]
            ):
                raise SchemaError(f"relation '{rel.name}' has out-of-range endpoints")
        for t, mat in self.attrs.items():
            if mat is not None and mat.shape[0] != self.counts[t]:
                raise SchemaError(
                    f"attribute matrix for '{t}' has {mat.shape[0]} rows, "
                    f"expected {self.counts[t]}"
                )
        if self.labels is not None and len(self.labels) != self.counts[self.target_type]:
            raise SchemaError(
                f"labels cover {len(self.labels)} nodes, expected "
                f"{self.counts[self.target_type]} {self.target_type} nodes"
            )
        for mp in self.metapaths:
            self._validate_metapath(mp)

    def _validate_metapath(self, mp: MetaPath) -> None:
        if mp.types[0] != self.target_type or mp.types[-1] != self.target_type:
            raise SchemaError(
                f"meta-path '{mp.name}' must start and end at the target type "
                f"'{self.target_type}'"
            )
        rel_by_name = {r.name: r for r in self.relations}
        for i, rname in enumerate(mp.relations):
            rel = rel_by_name.get(rname)
            if rel is None:
                raise SchemaError(f"meta-path '{mp.name}' uses unknown relation '{rname}'")
            a, b = mp.types[i], mp.types[i + 1]
            if not ((rel.src, rel.dst) == (a, b) or (rel.src, rel.dst) == (b, a)):
                raise SchemaError(
                    f"meta-path '{mp.name}' step {i}: relation '{rname}' "
                    f"({rel.src}-{rel.dst}) cannot connect {a} to {b}"
                )

    # -- indexing -----------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return sum(self.counts[t] for t in self.node_types)

    def offset(self, node_type: str) -> int:
        off = 0
        for t in self.node_types:
            if t == node_type:
                return off
            off += self.counts[t]
        raise SchemaError(f"unknown node type '{node_type}'")

    def type_of_global(self, g_idx: int) -> str:
        off = 0
        for t in self.node_types:
            if g_idx < off + self.counts[t]:
                return t
            off += self.counts[t]
        raise SchemaError(f"global index {g_idx} out of range")

    def metapath(self, name: str) -> MetaPath:
        for mp in self.metapaths:
            if mp.name == name:
                return mp
        raise SchemaError(f"meta-path '{name}' not declared")

    # -- relation matrices ---------------------------------------------------

    def step_matrix(self, rel_name: str, src_type: str, dst_type: str) -> np.ndarray:
        """Boolean incidence of one meta-path step, oriented src_type -> dst_type."""
        rel = next((r for r in self.relations if r.name == rel_name), None)
        if rel is None:
            raise SchemaError(f"unknown relation '{rel_name}'")
        e = self.edges.get(rel_name, np.zeros((0, 2), dtype=np.int64))
        if (rel.src, rel.dst) == (src_type, dst_type):
            m = np.zeros((self.counts[src_type], self.counts[dst_type]), dtype=bool)
            if e.size:
                m[e[:, 0], e[:, 1]] = True
        elif (rel.src, rel.dst) == (dst_type, src_type):
            m = np.zeros((self.counts[src_type], self.counts[dst_type]), dtype=bool)
            if e.size:
                m[e[:, 1], e[:, 0]] = True
        else:
            raise SchemaError(
                f"relation '{rel_name}' ({rel.src}-{rel.dst}) cannot be oriented "
                f"{src_type} -> {dst_type}"
            )
        return m


def metapath_adjacency(g: HetGraph, mp: MetaPath) -> np.ndarray:
    """Binary target x target adjacency: (u,v)=1 iff some path instance joins them.

    Boolean product over the step matrices; path counts are discarded and the
    diagonal is cleared (self-reachability via a palindromic path is trivial).
    """
    g._validate_metapath(mp)
    acc: Optional[np.ndarray] = None
    for i, rname in enumerate(mp.relations):
        step = g.step_matrix(rname, mp.types[i], mp.types[i + 1])
        if acc is None:
            acc = step
        else:
            acc = (acc.astype(np.float64) @ step.astype(np.float64)) > 0
    assert acc is not None
    adj = acc.copy()
    np.fill_diagonal(adj, False)
    return adj


def all_views(g: HetGraph) -> Dict[str, np.ndarray]:
    return {mp.name: metapath_adjacency(g, mp) for mp in g.metapaths}


class UndefinedRatioError(ValueError):
    """Homophily ratio is undefined for an edgeless view."""


def homophily_ratio(adj: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of view edges joining same-label nodes (unordered pairs if symmetric)."""
    if labels is None:
        raise ValueError("labels required for the homophily ratio")
    symmetric = np.array_equal(adj, adj.T)
    if symmetric:
        iu, iv = np.where(np.triu(adj, k=1))
    else:
        iu, iv = np.where(adj)
    if len(iu) == 0:
        raise UndefinedRatioError("view has no edges; homophily undefined")
    same = labels[iu] == labels[iv]
    return float(same.mean())


def homophily_report(g: HetGraph) -> Tuple[Dict[str, Optional[float]], Optional[float]]:
    """Per-view ratio (None where undefined) and the average over defined views."""
    if g.labels is None:
        raise ValueError("graph has no labels")
    ratios: Dict[str, Optional[float]] = {}
    defined: List[float] = []
    for name, adj in all_views(g).items():
        try:
            r = homophily_ratio(adj, g.labels)
        except UndefinedRatioError:
            ratios[name] = None
            continue
        ratios[name] = r
        defined.append(r)
    avg = float(np.mean(defined)) if defined else None
    return ratios, avg


def class_frequency_baseline(labels: np.ndarray) -> float:
    """Expected homophily of a label-blind wiring: sum of squared class frequencies."""
    _, counts = np.unique(labels, return_counts=True)
    freq = counts / counts.sum()
    return float((freq**2).sum())

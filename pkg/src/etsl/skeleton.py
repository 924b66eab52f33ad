"""Skeleton graph for the GNN-T pathway: topology, temporal pooling, graph convolution."""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .errors import DimensionMismatch, DisconnectedGraph, InvariantViolation
from .landmarks import NUM_POINTS, REGIONS, region_of
from .preprocess import NormalizedFrame, node_features

TOPO_MAGIC = "ETSL-TOPO 1"

# MediaPipe 21-point hand skeleton, wrist = 0
HAND_EDGES: tuple[tuple[int, int], ...] = (
    (0, 1), (1, 2), (2, 3), (3, 4),
    (0, 5), (5, 6), (6, 7), (7, 8),
    (5, 9), (9, 10), (10, 11), (11, 12),
    (9, 13), (13, 14), (14, 15), (15, 16),
    (13, 17), (0, 17), (17, 18), (18, 19), (19, 20),
)


def _default_wiring() -> dict[str, list[tuple[int, int]]]:
    lh, rh = REGIONS["left_hand"].start, REGIONS["right_hand"].start
    return {
        # nose star to the four lip points, lip contour as a closed chain
        "face": [(0, 1), (0, 2), (0, 3), (0, 4), (3, 1), (1, 4), (4, 2), (2, 3)],
        # shoulder line plus two arm chains shoulder-elbow-wrist
        "body": [(5, 6), (5, 7), (7, 9), (6, 8), (8, 10)],
        "left_hand": [(lh + a, lh + b) for a, b in HAND_EDGES],
        "right_hand": [(rh + a, rh + b) for a, b in HAND_EDGES],
        # hand wrists to arm wrists, shoulders to the nose
        "links": [(9, lh), (10, rh), (5, 0), (6, 0)],
    }


DEFAULT_WIRING: Mapping[str, Sequence[tuple[int, int]]] = _default_wiring()


@dataclass(frozen=True)
class SkeletonTopology:
    node_count: int
    edges: frozenset[tuple[int, int]]
    region: Mapping[int, str] = field(default_factory=dict)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]

    def degrees(self) -> list[int]:
        return [len(n) for n in self.neighbors()]

    def components(self) -> list[set[int]]:
        adj = self.neighbors()
        seen: set[int] = set()
        comps = []
        for start in range(self.node_count):
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v in adj[u]:
                    if v not in comp:
                        comp.add(v)
                        queue.append(v)
            seen |= comp
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def aggregation_matrix(self, include_self: bool = True, dtype=torch.float64) -> torch.Tensor:
        """Row-stochastic mean-aggregation matrix.

        Row i averages over the neighbours of i (plus i itself when
        ``include_self``). A row with nothing to average stays zero.
        """
        a = torch.zeros(self.node_count, self.node_count, dtype=dtype)
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        if include_self:
            a += torch.eye(self.node_count, dtype=dtype)
        deg = a.sum(dim=1, keepdim=True)
        return torch.where(deg > 0, a / deg.clamp(min=1.0), a)

    def permuted(self, perm: Sequence[int]) -> "SkeletonTopology":
        """Relabel node ``i`` as ``perm[i]``."""
        edges = frozenset(_norm_edge(perm[i], perm[j]) for i, j in self.edges)
        region = {perm[i]: r for i, r in self.region.items()}
        return SkeletonTopology(self.node_count, edges, region)


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def make_topology(node_count: int, edges: Iterable[tuple[int, int]], region=None) -> SkeletonTopology:
    """Build a topology from raw edges without the connectivity requirement."""
    norm = set()
    for i, j in edges:
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise InvariantViolation(f"edge ({i}, {j}) outside 0..{node_count - 1}")
        if i == j:
            raise InvariantViolation(f"self-edge on node {i}")
        norm.add(_norm_edge(i, j))
    return SkeletonTopology(node_count, frozenset(norm), dict(region or {}))


def build_topology(wiring: Mapping[str, Sequence[tuple[int, int]]] | None = None) -> SkeletonTopology:
    """Combine per-region graphs into one connected 53-node skeleton.

    ``wiring`` maps any names to edge lists; all edges are pooled. The default
    wires face, body and both hands internally and links hands to body and
    body to face.
    """
    wiring = DEFAULT_WIRING if wiring is None else wiring
    edges = [e for group in wiring.values() for e in group]
    topo = make_topology(NUM_POINTS, edges, {i: region_of(i) for i in range(NUM_POINTS)})
    comps = topo.components()
    if len(comps) != 1:
        sizes = sorted((len(c) for c in comps), reverse=True)
        raise DisconnectedGraph(f"{len(comps)} components of sizes {sizes}")
    return topo


def write_topology(topo: SkeletonTopology, path: str | os.PathLike | None = None) -> str:
    text = TOPO_MAGIC + "\n" + "".join(f"{i} {j}\n" for i, j in sorted(topo.edges))
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_topology(text: str, node_count: int = NUM_POINTS) -> SkeletonTopology:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TOPO_MAGIC:
        raise InvariantViolation(f"topology file must start with {TOPO_MAGIC!r}")
    edges = []
    for line in lines[1:]:
        if line.strip():
            i, j = line.split()
            edges.append((int(i), int(j)))
    region = {i: region_of(i) for i in range(node_count)} if node_count == NUM_POINTS else {}
    return make_topology(node_count, edges, region)


def temporal_pool(frames: Sequence[np.ndarray] | np.ndarray, window: int = 3) -> np.ndarray:
    """Average consecutive windows of ``window`` time steps.

    Output length is ``ceil(T / window)``; a short final window is averaged
    over the frames it actually has.
    """
    if window < 1:
        raise ValueError("window must be positive")
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvariantViolation("cannot pool an empty sequence")
    if window == 1:
        return x.copy()
    t = x.shape[0]
    return np.stack([x[k:k + window].mean(axis=0) for k in range(0, t, window)])


def pooled_length(t: int, window: int = 3) -> int:
    return math.ceil(t / window)


@dataclass
class GraphConvWeights:
    weight: torch.Tensor  # (d_in, d_out)
    bias: torch.Tensor  # (d_out,)


def graph_convolve(
    x,
    topology: SkeletonTopology,
    w: GraphConvWeights,
    include_self: bool = True,
    activation: str = "relu",
    agg: torch.Tensor | None = None,
) -> torch.Tensor:
    """One mean-aggregation graph convolution.

    ``out[i] = act(mean(x[N(i)] (+ x[i])) @ weight + bias)``. ``x`` may carry
    leading batch/time dims: (..., nodes, d_in). Pass a precomputed ``agg``
    matrix to skip rebuilding it.
    """
    x = torch.as_tensor(x)
    weight, bias = w.weight, w.bias
    if x.shape[-2] != topology.node_count:
        raise DimensionMismatch(f"{x.shape[-2]} nodes given, topology has {topology.node_count}")
    if x.shape[-1] != weight.shape[0]:
        raise DimensionMismatch(f"feature dim {x.shape[-1]} != weight rows {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise DimensionMismatch(f"bias shape {tuple(bias.shape)} != ({weight.shape[1]},)")
    if agg is None:
        agg = topology.aggregation_matrix(include_self, dtype=x.dtype)
    h = torch.matmul(agg.to(x.dtype), x) @ weight + bias
    if activation == "relu":
        return torch.relu(h)
    if activation == "none":
        return h
    raise ValueError(f"unknown activation {activation!r}")


class GraphConv(nn.Module):
    def __init__(self, topology: SkeletonTopology, d_in: int, d_out: int,
                 include_self: bool = True, activation: str = "relu"):
        super().__init__()
        self.topology = topology
        self.include_self = include_self
        self.activation = activation
        self.weight = nn.Parameter(torch.empty(d_in, d_out))
        self.bias = nn.Parameter(torch.empty(d_out))
        bound = 1.0 / math.sqrt(d_in)
        nn.init.uniform_(self.weight, -bound, bound)
        nn.init.uniform_(self.bias, -bound, bound)
        self.register_buffer("agg", topology.aggregation_matrix(include_self), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return graph_convolve(
            x, self.topology, GraphConvWeights(self.weight, self.bias),
            self.include_self, self.activation, agg=self.agg,
        )


def assemble_gnn_sequence(
    clip_frames: Sequence[NormalizedFrame],
    topology: SkeletonTopology,
    w: GraphConvWeights,
    projection: Callable[[torch.Tensor], torch.Tensor],
    coord_count: int = 3,
    window: int = 3,
    include_self: bool = True,
    activation: str = "relu",
) -> torch.Tensor:
    """Clip frames -> encoder input of shape (ceil(T / window), d_model).

    Pool per-node coordinates over time, convolve each pooled step, flatten
    the 53 x d_out node matrix and project it.
    """
    feats = np.stack([node_features(f, coord_count) for f in clip_frames])
    pooled = torch.as_tensor(temporal_pool(feats, window), dtype=w.weight.dtype)
    h = graph_convolve(pooled, topology, w, include_self, activation)
    return projection(h.reshape(h.shape[0], -1))

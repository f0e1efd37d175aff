"""Breadth-first generation of Pachner graphs, plus their file format."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import sparse

from . import _kernels as K
from .isosig import ParseError, decode, encode, read_isosig_file
from .moves import MOVES_23, MoveKind, format_kinds, kinds_mask, parse_kinds
from .triangulation import compute_skeleton, validate

log = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 5_000_000
_CHUNK = 512


class BudgetExceeded(RuntimeError):
    """The node budget was hit.  ``graph`` holds every fully completed depth."""

    def __init__(self, graph: PachnerGraph, max_nodes: int):
        super().__init__(f"node budget {max_nodes} exceeded; completed depth {graph.depth_bound}")
        self.graph = graph
        self.completed_depth = graph.depth_bound
        self.max_nodes = max_nodes


class GraphFormatError(ValueError):
    pass


@dataclass
class PachnerGraph:
    """Nodes are canonical signatures in BFS discovery order (seed first);
    ``edges`` is a sorted (E, 2) array of index pairs with u < v."""

    nodes: list
    tet_counts: np.ndarray
    depths: np.ndarray
    edges: np.ndarray
    seed: str
    kinds: frozenset
    depth_bound: int
    vertex_counts: Optional[np.ndarray] = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._index is None:
            self._index = {s: i for i, s in enumerate(self.nodes)}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def index_of(self, sig: str) -> int:
        return self._index[sig]

    def __contains__(self, sig):
        return sig in self._index

    def adjacency(self) -> sparse.csr_matrix:
        n = self.node_count
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u), dtype=np.int64)
        a = sparse.csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))
        return a

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def truncate(self, depth: int) -> PachnerGraph:
        """The graph generate() would give with a smaller depth bound."""
        keep = int(np.searchsorted(self.depths, depth, side="right"))
        # edges out of depth-`depth` nodes only come from expanding them
        e = self.edges
        expanded = self.depths[e[:, 0]] < depth
        expanded |= self.depths[e[:, 1]] < depth
        e = e[(e[:, 1] < keep) & expanded]
        vc = None if self.vertex_counts is None else self.vertex_counts[:keep].copy()
        return PachnerGraph(self.nodes[:keep], self.tet_counts[:keep].copy(), self.depths[:keep].copy(),
                            e.copy(), self.seed, self.kinds, depth, vc)

    def __eq__(self, other):
        if not isinstance(other, PachnerGraph):
            return NotImplemented
        return (self.nodes == other.nodes and self.seed == other.seed and self.kinds == other.kinds
                and self.depth_bound == other.depth_bound
                and np.array_equal(self.tet_counts, other.tet_counts)
                and np.array_equal(self.depths, other.depths)
                and np.array_equal(self.edges, other.edges))


def _pack(sigs) -> tuple[np.ndarray, np.ndarray]:
    raw = np.frombuffer("".join(sigs).encode("ascii"), dtype=np.uint8)
    offsets = np.zeros(len(sigs) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in sigs], out=offsets[1:])
    return K.ASCII_TO_VAL[raw], offsets


def _expand(sigs, mask, max_tets):
    vals, offsets = _pack(sigs)
    return K.expand_batch(vals, offsets, mask, max_tets)


def generate(seed: str, kinds=MOVES_23, depth: int = 0, *, max_nodes: int = DEFAULT_MAX_NODES,
             max_tets: int = 0, jobs: int = 1) -> PachnerGraph:
    """Every triangulation within ``depth`` moves of ``seed``.

    Nodes at depth below the bound are expanded with every enabled move;
    edges record those expansions, so two nodes on the outermost level are
    never joined directly.  ``max_tets`` > 0 discards moves producing more
    tetrahedra than that (the graph is then the component of the capped
    state space).  Expansion of each level is split into chunks that may run
    on ``jobs`` threads; results are merged in parent order, so the output
    does not depend on ``jobs``.
    """
    if isinstance(kinds, str):
        kinds = parse_kinds(kinds)
    kinds = frozenset(kinds)
    if depth < 0:
        raise ValueError("depth must be non-negative")
    tri = decode(seed)
    report = validate(tri)
    if not report:
        raise ValueError(f"seed does not validate: {report.invariant} at {report.face}")
    root = encode(tri)
    nodes = [root]
    index = {root: 0}
    tets = [tri.tet_count]
    depths = [0]
    vdelta = {k.value: k.vertex_delta for k in MoveKind}
    verts = [compute_skeleton(tri).vertex_count]
    edge_chunks = []
    mask = kinds_mask(kinds)
    pool = ThreadPoolExecutor(jobs) if jobs > 1 else None
    try:
        lo, hi = 0, 1
        for d in range(depth):
            chunks = [nodes[i:min(i + _CHUNK, hi)] for i in range(lo, hi, _CHUNK)]
            if pool is not None:
                results = pool.map(_expand, chunks, [mask] * len(chunks), [max_tets] * len(chunks))
            else:
                results = (_expand(c, mask, max_tets) for c in chunks)
            level_u, level_v = [], []
            base = lo
            for chunk, (buf, off, par, kind, ctets) in zip(chunks, results):
                text = buf.tobytes().decode("ascii")
                offl = off.tolist()
                parl = par.tolist()
                kindl = kind.tolist()
                tetl = ctets.tolist()
                cidx = []
                for j in range(len(parl)):
                    s = text[offl[j]:offl[j + 1]]
                    c = index.get(s)
                    if c is None:
                        c = len(nodes)
                        index[s] = c
                        nodes.append(s)
                        tets.append(tetl[j])
                        depths.append(d + 1)
                        verts.append(verts[base + parl[j]] + vdelta[kindl[j]])
                    cidx.append(c)
                level_u.append(par + base)
                level_v.append(np.array(cidx, dtype=np.int64))
                base += len(chunk)
                if len(nodes) > max_nodes:
                    partial = _assemble(nodes[:hi], tets[:hi], depths[:hi], verts[:hi], edge_chunks,
                                        root, kinds, d)
                    raise BudgetExceeded(partial, max_nodes)
            if level_u:
                edge_chunks.append(_dedup_edges(np.concatenate(level_u), np.concatenate(level_v)))
            log.info("depth %d: %d nodes", d + 1, len(nodes))
            lo, hi = hi, len(nodes)
    finally:
        if pool is not None:
            pool.shutdown()
    return _assemble(nodes, tets, depths, verts, edge_chunks, root, kinds, depth, index)


def _dedup_edges(u, v) -> np.ndarray:
    """Sorted unique (min, max) pairs, self-loops dropped, packed as u << 32 | v."""
    a, b = np.minimum(u, v), np.maximum(u, v)
    key = np.unique((a << 32) | b)
    return key[(key >> 32) != (key & 0xFFFFFFFF)]


def _assemble(nodes, tets, depths, verts, edge_chunks, seed, kinds, depth, index=None) -> PachnerGraph:
    key = np.unique(np.concatenate(edge_chunks)) if edge_chunks else np.zeros(0, np.int64)
    edges = np.stack([key >> 32, key & 0xFFFFFFFF], axis=1) if len(key) else np.zeros((0, 2), np.int64)
    return PachnerGraph(list(nodes), np.array(tets, dtype=np.int64), np.array(depths, dtype=np.int64),
                        edges.astype(np.int64), seed, frozenset(kinds), depth,
                        np.array(verts, dtype=np.int64), index)


@dataclass
class GrowthProfile:
    depth: list
    new_nodes: list
    nodes: list
    edges: list
    density: list


def growth_profile(g: PachnerGraph) -> GrowthProfile:
    """Node, edge and density figures for each truncation depth 0..bound."""
    out = GrowthProfile([], [], [], [], [])
    counts = np.bincount(g.depths, minlength=g.depth_bound + 1)
    edge_depth = np.maximum(g.depths[g.edges[:, 0]], g.depths[g.edges[:, 1]]) if g.edge_count else np.zeros(0, int)
    # an edge appears once its deeper endpoint's level has been discovered
    ecount = np.bincount(edge_depth, minlength=g.depth_bound + 1)
    total_v = total_e = 0
    for d in range(g.depth_bound + 1):
        total_v += int(counts[d])
        total_e += int(ecount[d])
        out.depth.append(d)
        out.new_nodes.append(int(counts[d]))
        out.nodes.append(total_v)
        out.edges.append(total_e)
        out.density.append(0.0 if total_v < 2 else 2 * total_e / (total_v * (total_v - 1)))
    return out


@dataclass
class GraphSummary:
    seed: str
    ok: bool
    seed_tets: int = 0
    node_count: int = 0
    edge_count: int = 0
    density: float = 0.0
    avg_tets: float = 0.0
    completed_depth: int = 0
    degree_histogram: dict = field(default_factory=dict)
    error: str = ""


def summarize(g: PachnerGraph) -> GraphSummary:
    n = g.node_count
    hist = np.bincount(g.degrees()) if n else np.zeros(0, int)
    return GraphSummary(
        seed=g.seed, ok=True, seed_tets=int(g.tet_counts[0]), node_count=n, edge_count=g.edge_count,
        density=0.0 if n < 2 else 2 * g.edge_count / (n * (n - 1)),
        avg_tets=float(g.tet_counts.mean()), completed_depth=g.depth_bound,
        degree_histogram={int(k): int(c) for k, c in enumerate(hist) if c})


def batch_generate(seeds: Iterable[str], kinds=MOVES_23, depth: int = 3, *,
                   max_nodes: int = DEFAULT_MAX_NODES, max_tets: int = 0, jobs: int = 1,
                   on_graph=None) -> list[GraphSummary]:
    """Generate one graph per seed and summarise each, in input order.

    A failing seed yields a summary with ``ok`` False and the batch goes on.
    ``on_graph(i, graph)`` is called for every successful graph.
    """
    seeds = list(seeds)

    def one(i):
        s = seeds[i]
        try:
            g = generate(s, kinds, depth, max_nodes=max_nodes, max_tets=max_tets)
        except BudgetExceeded as exc:
            summary = summarize(exc.graph)
            summary.ok = False
            summary.error = str(exc)
            return summary
        except (ParseError, ValueError) as exc:
            return GraphSummary(seed=s, ok=False, error=str(exc))
        if on_graph is not None:
            on_graph(i, g)
        return summarize(g)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, range(len(seeds))))
    return [one(i) for i in range(len(seeds))]


def batch_generate_file(path, kinds=MOVES_23, depth: int = 3, **kw) -> list[GraphSummary]:
    return batch_generate(read_isosig_file(path), kinds, depth, **kw)


def export_graph(g: PachnerGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"pachner v1 {g.seed} {format_kinds(g.kinds)} {g.depth_bound}\n")
        for i, s in enumerate(g.nodes):
            fh.write(f"{i} {s} {g.tet_counts[i]} {g.depths[i]}\n")
        fh.write("edges\n")
        fh.writelines(f"{u} {v}\n" for u, v in g.edges.tolist())


def import_graph(path) -> PachnerGraph:
    with open(path, encoding="utf-8") as fh:
        lines = [(i + 1, ln.strip()) for i, ln in enumerate(fh)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphFormatError("empty graph file")
    no, head = lines[0]
    parts = head.split()
    if len(parts) != 5 or parts[:2] != ["pachner", "v1"]:
        raise GraphFormatError(f"line {no}: bad header {head!r}")
    seed = parts[2]
    try:
        kinds = parse_kinds(parts[3])
        depth = int(parts[4])
    except ValueError as exc:
        raise GraphFormatError(f"line {no}: {exc}") from None
    nodes, tets, depths, index = [], [], [], {}
    pos = 1
    while pos < len(lines) and lines[pos][1] != "edges":
        no, ln = lines[pos]
        f = ln.split()
        if len(f) != 4:
            raise GraphFormatError(f"line {no}: expected '<index> <isosig> <tets> <depth>'")
        try:
            i, t, d = int(f[0]), int(f[2]), int(f[3])
        except ValueError:
            raise GraphFormatError(f"line {no}: non-integer field") from None
        if i != len(nodes):
            raise GraphFormatError(f"line {no}: node index {i}, expected {len(nodes)}")
        if f[1] in index:
            raise GraphFormatError(f"line {no}: duplicate node {f[1]}")
        index[f[1]] = i
        nodes.append(f[1])
        tets.append(t)
        depths.append(d)
        pos += 1
    if pos == len(lines):
        raise GraphFormatError("missing 'edges' line")
    if not nodes:
        raise GraphFormatError("graph has no nodes")
    n = len(nodes)
    edges = []
    for no, ln in lines[pos + 1:]:
        f = ln.split()
        try:
            u, v = int(f[0]), int(f[1])
        except (ValueError, IndexError):
            raise GraphFormatError(f"line {no}: bad edge {ln!r}") from None
        if len(f) != 2 or not 0 <= u < v < n:
            raise GraphFormatError(f"line {no}: bad edge {ln!r}")
        edges.append((u, v))
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) and (np.diff(e[:, 0] * n + e[:, 1]) <= 0).any():
        raise GraphFormatError("edges are not sorted and unique")
    return PachnerGraph(nodes, np.array(tets, dtype=np.int64), np.array(depths, dtype=np.int64), e,
                        seed, kinds, depth, None, index)

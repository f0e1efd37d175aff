"""Network metrics for Pachner graphs and the census correlation tooling.

Functions accept either a PachnerGraph or a plain ``(n, edges)`` pair, where
``edges`` is an (E, 2) integer array of undirected pairs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Optional

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse import csgraph

from .graph import PachnerGraph


class DisconnectedGraphError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"power iteration did not converge in {iterations} steps (residual {residual:.3g})")
        self.iterations = iterations
        self.residual = residual


def _n_edges(g) -> tuple[int, np.ndarray]:
    if isinstance(g, PachnerGraph):
        return g.node_count, g.edges
    n, e = g
    e = np.asarray(e, dtype=np.int64).reshape(-1, 2)
    return int(n), e


def adjacency(g) -> sparse.csr_matrix:
    n, e = _n_edges(g)
    if isinstance(g, PachnerGraph):
        return g.adjacency()
    a = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n)).tocsr()
    a.data[:] = 1  # collapse duplicate pairs
    return a


def density(g) -> float:
    n, e = _n_edges(g)
    if n < 2:
        return 0.0
    return 2 * len(e) / (n * (n - 1))


def triangle_clustering(g) -> float:
    """Transitivity: three times the triangles over the connected triples."""
    a = adjacency(g).astype(np.float64)
    k = np.asarray(a.sum(axis=1)).ravel()
    triples = float((k * (k - 1)).sum())
    if triples == 0:
        return 0.0
    closed = float((a @ a).multiply(a).sum())  # 6 * triangles
    return closed / triples


def square_clustering_per_node(g) -> np.ndarray:
    """Per-node fraction of possible quadrilaterals through the node.

    For neighbours u, w of v, q = common neighbours of u and w other than
    v; the node's value is sum(q) over sum((k_u - m) + (k_w - m) + q) with
    m = q + 1 + [u ~ w].
    """
    a = adjacency(g)
    n = a.shape[0]
    a2 = (a @ a).tocsr()
    k = np.asarray(a.sum(axis=1)).ravel()
    out = np.zeros(n)
    indptr, indices = a.indptr, a.indices
    for v in range(n):
        nb = indices[indptr[v]:indptr[v + 1]]
        if len(nb) < 2:
            continue
        iu, iw = np.triu_indices(len(nb), 1)
        q = a2[nb][:, nb].toarray()[iu, iw] - 1
        adj_uw = a[nb][:, nb].toarray()[iu, iw]
        m = q + 1 + adj_uw
        potential = ((k[nb][iu] - m) + (k[nb][iw] - m) + q).sum()
        if potential > 0:
            out[v] = q.sum() / potential
    return out


def square_clustering(g) -> float:
    n, _ = _n_edges(g)
    if n == 0:
        return 0.0
    return float(square_clustering_per_node(g).mean())


def clustering(g) -> tuple[float, float]:
    return triangle_clustering(g), square_clustering(g)


def wiener(g, chunk: int = 512) -> tuple[int, float]:
    """Sum of shortest-path lengths over unordered pairs, and that sum over C(n, 2)."""
    a = adjacency(g)
    n = a.shape[0]
    total = 0
    for lo in range(0, n, chunk):
        d = csgraph.shortest_path(a, unweighted=True, directed=False, indices=np.arange(lo, min(n, lo + chunk)))
        if np.isinf(d).any():
            raise DisconnectedGraphError("Wiener index needs a connected graph")
        total += int(d.sum())
    total //= 2
    return total, (total / comb(n, 2) if n > 1 else 0.0)


@dataclass
class Centrality:
    scores: np.ndarray
    argmax: int
    range: float
    iterations: int


def eigenvector_centrality(g, tol: float = 1e-10, max_iter: int = 1_000_000) -> Centrality:
    """Principal eigenvector of the adjacency matrix by power iteration.

    Iterates with A + I, which has the same eigenvectors; plain A never
    settles on bipartite graphs, where -lambda_max is also an eigenvalue.
    The vector is Euclidean-normalised.  Iteration stops once the step size,
    scaled by r / (1 - r) for the observed contraction ratio r, is below
    ``tol``; that bounds the remaining distance to the limit, not only the
    last step.
    """
    a = adjacency(g).astype(np.float64)
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    if csgraph.connected_components(a, directed=False)[0] > 1:
        raise DisconnectedGraphError("eigenvector centrality needs a connected graph")
    m = (a + sparse.identity(n, format="csr")).tocsr()
    x = np.ones(n) / np.sqrt(n)
    residual = prev = np.inf
    for it in range(1, max_iter + 1):
        y = m @ x
        y /= np.linalg.norm(y)
        residual = np.linalg.norm(y - x)
        x = y
        if residual == 0.0:
            break
        r = residual / prev
        prev = residual
        if it > 1 and r < 1 and residual * r / (1 - r) < tol:
            break
    else:
        raise ConvergenceError(max_iter, residual)
    return Centrality(x, int(np.argmax(x)), float(x.max() - x.min()), it)


@njit(cache=True)
def _horton_candidates(indptr, indices, eids, n, lmin, lmax):
    """Cycles P(r,x) + xy + P(y,r) from a BFS tree at every root r, with
    lmin < length <= lmax and the two tree paths meeting only at r.

    Returns (flat edge ids, offsets).
    """
    radius = lmax // 2
    dist = np.full(n, -1, dtype=np.int64)
    pnode = np.full(n, -1, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    branch = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    flat = np.empty(1024, dtype=np.int64)
    offs = np.zeros(257, dtype=np.int64)
    nf = 0
    nc = 0
    for r in range(n):
        dist[r] = 0
        pnode[r] = -1
        pedge[r] = -1
        branch[r] = -1
        queue[0] = r
        head = 0
        tail = 1
        while head < tail:
            x = queue[head]
            head += 1
            if dist[x] >= radius:
                continue
            for j in range(indptr[x], indptr[x + 1]):
                y = indices[j]
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    pnode[y] = x
                    pedge[y] = eids[j]
                    branch[y] = y if x == r else branch[x]
                    queue[tail] = y
                    tail += 1
        for qi in range(tail):
            x = queue[qi]
            for j in range(indptr[x], indptr[x + 1]):
                y = indices[j]
                e = eids[j]
                if dist[y] < 0 or y < x or e == pedge[x] or e == pedge[y]:
                    continue
                length = dist[x] + dist[y] + 1
                if length <= lmin or length > lmax:
                    continue
                if branch[x] == branch[y] and branch[x] >= 0:
                    continue
                if nf + length > flat.shape[0]:
                    f2 = np.empty(2 * flat.shape[0] + length, dtype=np.int64)
                    f2[:nf] = flat[:nf]
                    flat = f2
                if nc + 2 > offs.shape[0]:
                    o2 = np.zeros(2 * offs.shape[0], dtype=np.int64)
                    o2[:nc + 1] = offs[:nc + 1]
                    offs = o2
                flat[nf] = e
                nf += 1
                z = x
                while pnode[z] >= 0:
                    flat[nf] = pedge[z]
                    nf += 1
                    z = pnode[z]
                z = y
                while pnode[z] >= 0:
                    flat[nf] = pedge[z]
                    nf += 1
                    z = pnode[z]
                nc += 1
                offs[nc] = nf
        for qi in range(tail):
            dist[queue[qi]] = -1
    return flat[:nf], offs[:nc + 1]


def minimum_cycle_basis(g) -> list[list[int]]:
    """Length histogram ``[[length, count], ...]`` of a minimum cycle basis.

    Candidates come from shortest-path trees (Horton's set), are taken in
    increasing length, and kept when independent over GF(2).  The length
    multiset is the same for every minimum basis.
    """
    n, e = _n_edges(g)
    if len(e) == 0:
        return []
    e = np.unique(np.sort(e, axis=1), axis=0)
    e = e[e[:, 0] != e[:, 1]]
    m = len(e)
    a = sparse.coo_matrix((np.r_[np.arange(m), np.arange(m)] + 1, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n)).tocsr()
    ncomp = csgraph.connected_components(a, directed=False)[0]
    target = m - n + ncomp
    if target == 0:
        return []
    indptr = a.indptr.astype(np.int64)
    indices = a.indices.astype(np.int64)
    eids = a.data.astype(np.int64) - 1
    pivots: dict[int, int] = {}
    hist: dict[int, int] = {}
    lo, hi = 2, 4
    while len(pivots) < target:
        if lo >= n:
            raise RuntimeError("cycle basis incomplete; graph data inconsistent")
        flat, offs = _horton_candidates(indptr, indices, eids, n, lo, hi)
        cands = {}
        for i in range(len(offs) - 1):
            c = flat[offs[i]:offs[i + 1]]
            bits = 0
            for x in c.tolist():
                bits |= 1 << x
            cands[bits] = len(c)
        for bits, length in sorted(cands.items(), key=lambda kv: kv[1]):
            c = bits
            while c:
                h = c.bit_length() - 1
                p = pivots.get(h)
                if p is None:
                    pivots[h] = c
                    hist[length] = hist.get(length, 0) + 1
                    break
                c ^= p
            if len(pivots) == target:
                break
        lo, hi = hi, hi + 2
    return [[k, hist[k]] for k in sorted(hist)]


def cyclomatic_number(g) -> int:
    n, e = _n_edges(g)
    a = adjacency((n, e))
    return len(e) - n + csgraph.connected_components(a, directed=False)[0]


def degree_histogram(g) -> dict[int, int]:
    n, e = _n_edges(g)
    deg = np.bincount(e.ravel(), minlength=n)
    h = np.bincount(deg)
    return {int(k): int(c) for k, c in enumerate(h) if c}


def mean_degree_distribution(histograms) -> dict[int, float]:
    """Per-degree mean frequency; a degree missing from a graph counts 0."""
    histograms = list(histograms)
    if not histograms:
        raise ValueError("no histograms to average")
    keys = sorted({int(k) for h in histograms for k in h})
    return {k: sum(h.get(k, h.get(str(k), 0)) for h in histograms) / len(histograms) for k in keys}


@dataclass
class TetraStats:
    min_index: int
    min_count: int
    mean: float
    per_depth: dict


def tetra_stats(g: PachnerGraph) -> TetraStats:
    t = g.tet_counts
    per_depth = {}
    for d in range(int(g.depths.max()) + 1 if len(g.depths) else 0):
        vals, counts = np.unique(t[g.depths == d], return_counts=True)
        per_depth[d] = {int(v): int(c) for v, c in zip(vals, counts)}
    i = int(np.argmin(t))
    return TetraStats(i, int(t[i]), float(t.mean()), per_depth)


def is_parity_bipartite(g: PachnerGraph) -> bool:
    """Whether colouring nodes by tetrahedron-count parity is proper."""
    if g.edge_count == 0:
        return True
    p = g.tet_counts % 2
    return bool((p[g.edges[:, 0]] != p[g.edges[:, 1]]).all())


@dataclass
class MetricsReport:
    nodeCount: int
    edgeCount: int
    density: float
    triangleClustering: float
    squareClustering: float
    wienerFull: int
    wienerNormalized: float
    centralityArgmaxIndex: int
    centralityRange: float
    cycleBasisHistogram: list
    minTetIndex: int
    minTetCount: int
    avgTetCount: float
    degreeHistogram: dict = field(default_factory=dict)
    seed: str = ""
    depth: int = 0
    moves: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        d["degreeHistogram"] = {str(k): v for k, v in d["degreeHistogram"].items()}
        return json.dumps(d, indent=2, sort_keys=True)


def compute_metrics(g: PachnerGraph) -> MetricsReport:
    from .moves import format_kinds

    tri, squ = clustering(g)
    w, wn = wiener(g)
    c = eigenvector_centrality(g)
    ts = tetra_stats(g)
    return MetricsReport(
        nodeCount=g.node_count, edgeCount=g.edge_count, density=density(g),
        triangleClustering=tri, squareClustering=squ, wienerFull=w, wienerNormalized=wn,
        centralityArgmaxIndex=c.argmax, centralityRange=c.range,
        cycleBasisHistogram=minimum_cycle_basis(g), minTetIndex=ts.min_index,
        minTetCount=ts.min_count, avgTetCount=ts.mean, degreeHistogram=degree_histogram(g),
        seed=g.seed, depth=g.depth_bound, moves=format_kinds(g.kinds))


@dataclass
class EnvelopeFit:
    slope: float
    intercept: float
    bins_used: int
    bin_points: list
    coverage: float
    bound_constant: float


def envelope_fit(x, y, bins: int = 20, c: float = 75.0) -> EnvelopeFit:
    """Least-squares slope of the log-log lower envelope of (x, y).

    x is split into ``bins`` logarithmically spaced bins; each non-empty bin
    contributes its lowest point.  ``coverage`` is the fraction of points
    with y >= c / sqrt(x).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) == 0:
        raise ValueError("no positive data to fit")
    lo, hi = x.min(), x.max()
    if lo == hi:
        raise ValueError("fewer than 3 non-empty bins")
    edges = np.logspace(np.log10(lo), np.log10(hi), bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    pts = []
    for b in range(bins):
        sel = np.flatnonzero(which == b)
        if len(sel):
            j = sel[np.argmin(y[sel])]
            pts.append((float(x[j]), float(y[j])))
    if len(pts) < 3:
        raise ValueError("fewer than 3 non-empty bins")
    px, py = np.log(np.array(pts).T)
    slope, intercept = np.polyfit(px, py, 1)
    coverage = float(np.mean(y >= c / np.sqrt(x)))
    return EnvelopeFit(float(slope), float(intercept), len(pts), pts, coverage, c)


@dataclass
class Correlation:
    rows: list  # (seed, invariant, size)
    fit: Optional[EnvelopeFit]
    missing: list


def invariant_correlation(sizes: dict, invariants: dict, bins: int = 20, c: float = 75.0) -> Correlation:
    """Join per-seed graph sizes with an invariant table and fit the envelope."""
    rows, missing = [], []
    for seed, size in sizes.items():
        if seed in invariants:
            rows.append((seed, float(invariants[seed]), size))
        else:
            missing.append(seed)
    fit = envelope_fit([r[1] for r in rows], [r[2] for r in rows], bins, c)
    return Correlation(rows, fit, missing)

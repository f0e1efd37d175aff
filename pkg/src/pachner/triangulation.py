"""Generalised triangulations stored as dense face-gluing tables."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _kernels as K
from .perm import COMP, EDGE_VERTS, INV, S4, Perm4


@dataclass(frozen=True, order=True)
class FaceRef:
    """Face ``face`` of tetrahedron ``tet``; face i is opposite vertex i."""

    tet: int
    face: int


@dataclass(frozen=True)
class Gluing:
    """Where a face goes.  ``destination`` is None for a boundary face."""

    destination: Optional[FaceRef]
    perm: Optional[Perm4] = None

    @property
    def is_boundary(self) -> bool:
        return self.destination is None


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    invariant: str = ""
    face: Optional[FaceRef] = None
    message: str = ""

    def __bool__(self):
        return self.ok


class Triangulation:
    """N tetrahedra with a 4N-slot gluing table.

    ``adj[t, f]`` is the tetrahedron glued to face f of t and ``glu[t, f]``
    the index (into ``perm.S4``) of the vertex map from t to it; both are -1
    on boundary faces.  Instances are immutable: the arrays are read-only.
    """

    __slots__ = ("adj", "glu", "_skeleton")

    def __init__(self, adj, glu):
        adj = np.array(adj, dtype=np.int64, copy=True).reshape(-1, 4)
        glu = np.array(glu, dtype=np.int64, copy=True).reshape(-1, 4)
        if adj.shape != glu.shape:
            raise ValueError("adjacency and permutation tables differ in shape")
        if adj.shape[0] == 0:
            raise ValueError("a triangulation needs at least one tetrahedron")
        adj.flags.writeable = False
        glu.flags.writeable = False
        self.adj = adj
        self.glu = glu
        self._skeleton = None

    @classmethod
    def _trusted(cls, adj, glu) -> Triangulation:
        # arrays fresh from a kernel: skip the defensive copy
        tri = cls.__new__(cls)
        adj.flags.writeable = False
        glu.flags.writeable = False
        tri.adj = adj
        tri.glu = glu
        tri._skeleton = None
        return tri

    @classmethod
    def unglued(cls, n: int = 1) -> Triangulation:
        return cls(np.full((n, 4), -1), np.full((n, 4), -1))

    @classmethod
    def from_gluings(cls, n: int, gluings: Iterable) -> Triangulation:
        """Build from ``(tet, face, dest_tet, perm)`` tuples.

        ``perm`` may be a Perm4, an index or an image tuple.  Each gluing is
        entered in both directions.
        """
        adj = np.full((n, 4), -1, dtype=np.int64)
        glu = np.full((n, 4), -1, dtype=np.int64)
        for t, f, d, p in gluings:
            if not isinstance(p, Perm4):
                p = Perm4(p) if isinstance(p, (int, np.integer)) else Perm4.from_image(p)
            g = p(f)
            for (a, b, x, q) in ((t, f, d, p.index), (d, g, t, p.inverse().index)):
                if adj[a, b] >= 0 and (adj[a, b], glu[a, b]) != (x, q):
                    raise ValueError(f"face {FaceRef(a, b)} glued twice")
                adj[a, b] = x
                glu[a, b] = q
        return cls(adj, glu)

    @property
    def tet_count(self) -> int:
        return self.adj.shape[0]

    def __len__(self):
        return self.adj.shape[0]

    def gluing(self, ref: FaceRef) -> Gluing:
        d = int(self.adj[ref.tet, ref.face])
        if d < 0:
            return Gluing(None)
        p = Perm4(int(self.glu[ref.tet, ref.face]))
        return Gluing(FaceRef(d, p(ref.face)), p)

    def is_closed(self) -> bool:
        return bool((self.adj >= 0).all())

    def __eq__(self, other):
        if not isinstance(other, Triangulation):
            return NotImplemented
        return np.array_equal(self.adj, other.adj) and np.array_equal(self.glu, other.glu)

    def __hash__(self):
        return hash((self.adj.tobytes(), self.glu.tobytes()))

    def __repr__(self):
        return f"Triangulation(tets={self.tet_count}, closed={self.is_closed()})"

    def relabel(self, tet_perm, vertex_perms) -> Triangulation:
        """Isomorphic copy: old tet t becomes ``tet_perm[t]`` and its vertex v
        becomes ``vertex_perms[t](v)`` (a Perm4 or index per tetrahedron)."""
        n = self.tet_count
        tp = [int(x) for x in tet_perm]
        if sorted(tp) != list(range(n)):
            raise ValueError("tet_perm is not a permutation of the tetrahedra")
        vp = [int(v.index if isinstance(v, Perm4) else v) for v in vertex_perms]
        adj = np.full((n, 4), -1, dtype=np.int64)
        glu = np.full((n, 4), -1, dtype=np.int64)
        for t in range(n):
            for f in range(4):
                nf = S4[vp[t], f]
                d = self.adj[t, f]
                if d < 0:
                    continue
                adj[tp[t], nf] = tp[d]
                # new map = vp[d] . old . vp[t]^-1
                glu[tp[t], nf] = COMP[COMP[vp[d], self.glu[t, f]], INV[vp[t]]]
        return Triangulation(adj, glu)


def validate(tri: Triangulation) -> ValidationReport:
    """Check the gluing table and name the first broken invariant."""
    n = tri.tet_count
    for t in range(n):
        for f in range(4):
            ref = FaceRef(t, f)
            d = int(tri.adj[t, f])
            p = int(tri.glu[t, f])
            if d < 0 or p < 0:
                if (d < 0) != (p < 0):
                    return ValidationReport(False, "boundary", ref,
                                            "boundary marker without matching permutation marker")
                continue
            if d >= n or p > 23:
                return ValidationReport(False, "range", ref, "destination or permutation out of range")
            g = int(S4[p, f])
            if d == t and g == f:
                return ValidationReport(False, "self-gluing", ref, "face glued to itself")
            if tri.adj[d, g] != t or tri.glu[d, g] != INV[p]:
                return ValidationReport(False, "involution", ref,
                                        f"partner {FaceRef(d, g)} does not glue back with the inverse map")
    return ValidationReport(True)


@dataclass(frozen=True)
class Skeleton:
    """Vertex and edge orbits.

    ``vertex_label[4*t + v]`` is the orbit id of vertex v of tet t and
    ``edge_label[6*t + e]`` that of local edge e (see ``perm.EDGE_VERTS``).
    Orbit ids follow first appearance in slot order.
    """

    vertex_label: np.ndarray
    edge_label: np.ndarray
    vertex_degree: np.ndarray
    edge_degree: np.ndarray

    @property
    def vertex_count(self) -> int:
        return len(self.vertex_degree)

    @property
    def edge_count(self) -> int:
        return len(self.edge_degree)

    def vertex_orbits(self) -> list[list[tuple[int, int]]]:
        out = [[] for _ in range(self.vertex_count)]
        for i, o in enumerate(self.vertex_label):
            out[o].append((i // 4, i % 4))
        return out

    def edge_orbits(self) -> list[list[tuple[int, int]]]:
        out = [[] for _ in range(self.edge_count)]
        for i, o in enumerate(self.edge_label):
            out[o].append((i // 6, i % 6))
        return out


def compute_skeleton(tri: Triangulation) -> Skeleton:
    if tri._skeleton is None:
        vl, nv, el, ne = K.skeleton(tri.adj, tri.glu)
        sk = Skeleton(vl, el, np.bincount(vl, minlength=nv), np.bincount(el, minlength=ne))
        for a in (sk.vertex_label, sk.edge_label, sk.vertex_degree, sk.edge_degree):
            a.flags.writeable = False
        tri._skeleton = sk
    return tri._skeleton


def vertex_count(tri: Triangulation) -> int:
    return compute_skeleton(tri).vertex_count


def edge_degree(tri: Triangulation, edge_orbit: int) -> int:
    sk = compute_skeleton(tri)
    if not 0 <= edge_orbit < sk.edge_count:
        raise IndexError(f"no edge orbit {edge_orbit} (there are {sk.edge_count})")
    return int(sk.edge_degree[edge_orbit])


def edge_vertices(e: int) -> tuple[int, int]:
    return int(EDGE_VERTS[e, 0]), int(EDGE_VERTS[e, 1])

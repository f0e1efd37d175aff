"""The four bistellar (Pachner) moves on closed or bounded triangulations.

Every move swaps one part of the boundary of a 4-simplex for the other
part.  M23 replaces two tetrahedra sharing a face by three around an edge,
M32 undoes it, M14 cones one tetrahedron from an interior point, and M41
undoes that.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from . import _kernels as K
from .triangulation import FaceRef, Triangulation, compute_skeleton


class MoveKind(enum.Enum):
    M23 = 0
    M32 = 1
    M14 = 2
    M41 = 3

    @property
    def tet_delta(self) -> int:
        return (1, -1, 3, -3)[self.value]

    @property
    def vertex_delta(self) -> int:
        return (0, 0, 1, -1)[self.value]

    @property
    def bit(self) -> int:
        return 1 << self.value

    @property
    def label(self) -> str:
        return ("2-3", "3-2", "1-4", "4-1")[self.value]


class MoveError(ValueError):
    pass


MOVES_23 = frozenset({MoveKind.M23, MoveKind.M32})
MOVES_14 = frozenset({MoveKind.M14, MoveKind.M41})
ALL_MOVES = MOVES_23 | MOVES_14


def parse_kinds(text: str) -> frozenset:
    """'23', '14', 'all', or a comma list such as '23,41'."""
    text = text.strip().lower()
    if text == "all":
        return ALL_MOVES
    if text in ("23", "2-3"):
        return MOVES_23
    if text in ("14", "1-4"):
        return MOVES_14
    names = {"23": MoveKind.M23, "32": MoveKind.M32, "14": MoveKind.M14, "41": MoveKind.M41}
    out = set()
    for part in text.split(","):
        key = part.strip().replace("-", "").lstrip("m")
        if key not in names:
            raise ValueError(f"unknown move set {text!r}")
        out.add(names[key])
    return frozenset(out)


def format_kinds(kinds: Iterable[MoveKind]) -> str:
    kinds = frozenset(kinds)
    if kinds == ALL_MOVES:
        return "all"
    if kinds == MOVES_23:
        return "23"
    if kinds == MOVES_14:
        return "14"
    return ",".join(k.name[1:] for k in sorted(kinds, key=lambda k: k.value))


def kinds_mask(kinds: Iterable[MoveKind]) -> int:
    m = 0
    for k in kinds:
        m |= k.bit
    return m


@dataclass(frozen=True)
class MoveHandle:
    """A place where a move applies.

    ``locus`` is a FaceRef for M23 (the side in the lower-numbered
    tetrahedron), an edge orbit id for M32, a tetrahedron for M14 and a
    vertex orbit id for M41.
    """

    kind: MoveKind
    locus: Union[FaceRef, int]


def enumerate_moves(tri: Triangulation, kinds=ALL_MOVES) -> list[MoveHandle]:
    rows = K.move_loci(tri.adj, tri.glu, kinds_mask(kinds))
    out = []
    for kind, locus, tet, sub in rows.tolist():
        mk = MoveKind(kind)
        out.append(MoveHandle(mk, FaceRef(tet, sub) if mk is MoveKind.M23 else locus))
    return out


def _anchor(tri: Triangulation, h: MoveHandle) -> tuple[int, int]:
    """(tetrahedron, local sub-simplex) from which the kernel grows the star."""
    n = tri.tet_count
    if h.kind is MoveKind.M23:
        ref = h.locus
        if not isinstance(ref, FaceRef) or not (0 <= ref.tet < n and 0 <= ref.face < 4):
            raise MoveError(f"{ref!r} is not a face of this triangulation")
        return ref.tet, ref.face
    if h.kind is MoveKind.M14:
        if not 0 <= h.locus < n:
            raise MoveError(f"no tetrahedron {h.locus}")
        return int(h.locus), 0
    sk = compute_skeleton(tri)
    if h.kind is MoveKind.M32:
        labels, degrees, width, need = sk.edge_label, sk.edge_degree, 6, 3
    else:
        labels, degrees, width, need = sk.vertex_label, sk.vertex_degree, 4, 4
    if not 0 <= h.locus < len(degrees):
        raise MoveError(f"no orbit {h.locus} for {h.kind.name}")
    if degrees[h.locus] != need:
        raise MoveError(f"{h.kind.name} needs degree {need}, orbit {h.locus} has {degrees[h.locus]}")
    slot = int(np.flatnonzero(labels == h.locus)[0])
    return slot // width, slot % width


def apply_move(tri: Triangulation, h: MoveHandle) -> Triangulation:
    """Perform the move and return a new triangulation.

    Surviving tetrahedra keep their order; the new ones are appended.
    """
    tet, sub = _anchor(tri, h)
    ok, adj, glu = K.apply_handle(tri.adj, tri.glu, h.kind.value, tet, sub)
    if not ok:
        raise MoveError(f"{h.kind.name} does not apply at {h.locus!r}")
    return Triangulation._trusted(adj, glu)

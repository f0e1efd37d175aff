"""Isomorphism signatures: the canonical base-64 text form of a triangulation.

A signature is the lexicographically (ASCII) smallest encoding over all
4! * N canonical labellings.  Each encoding is the tetrahedron count, the
packed face types (0 boundary, 1 new tetrahedron, 2 gluing to a known one),
then the destinations and vertex maps of the type-2 gluings.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from . import _kernels as K
from .perm import Perm4
from .triangulation import Triangulation

ALPHABET = K.ALPHABET


class ParseError(ValueError):
    """Malformed signature.  ``position`` is the offending character index."""

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}" + (f" in {text!r}" if text else ""))
        self.reason = message
        self.position = position
        self.text = text


class DisconnectedError(ValueError):
    pass


_REASONS = {
    K.ERR_TRUNCATED: "truncated signature",
    K.ERR_SIZE: "invalid tetrahedron count",
    K.ERR_ACTION: "invalid face type",
    K.ERR_DEST: "destination tetrahedron not yet allocated",
    K.ERR_PERM: "permutation index above 23",
    K.ERR_FACE: "destination face already glued",
    K.ERR_NEWTET: "more new tetrahedra than declared",
    K.ERR_UNREACHED: "tetrahedra left unreached",
    K.ERR_TRAILING: "trailing characters",
    K.ERR_PADDING: "nonzero padding in the type sequence",
}


def alphabet_encode(n: int) -> str:
    if not 0 <= n < 64:
        raise ValueError(f"{n} is outside 0..63")
    return ALPHABET[n]


def alphabet_decode(c: str) -> int:
    v = K.ASCII_TO_VAL[ord(c)] if len(c) == 1 and ord(c) < 256 else -1
    if v < 0:
        raise ValueError(f"{c!r} is not a signature character")
    return int(v)


def _to_text(vals) -> str:
    return "".join(ALPHABET[v] for v in vals)


def _to_vals(s: str) -> np.ndarray:
    try:
        raw = np.frombuffer(s.encode("ascii"), dtype=np.uint8)
    except UnicodeEncodeError:
        pos = next(i for i, c in enumerate(s) if ord(c) > 127)
        raise ParseError(f"non-alphabet character {s[pos]!r}", pos, s) from None
    vals = K.ASCII_TO_VAL[raw]
    bad = np.flatnonzero(vals < 0)
    if len(bad):
        pos = int(bad[0])
        raise ParseError(f"non-alphabet character {s[pos]!r}", pos, s)
    return vals


def encode_labelling(tri: Triangulation, start_tet: int, start_perm) -> str:
    """Encoding of the labelling that sends ``start_tet`` to 0 with its
    vertices relabelled by ``start_perm``."""
    if not isinstance(start_perm, Perm4):
        start_perm = Perm4(int(start_perm))
    n = tri.tet_count
    if not 0 <= start_tet < n:
        raise IndexError(f"no tetrahedron {start_tet}")
    L = K.signature_length(tri.adj)
    out = np.zeros(L, dtype=np.int64)
    r = K.labelling(tri.adj, tri.glu, start_tet, start_perm.index, out, out, False,
                    np.empty(n, np.int64), np.empty(n, np.int64), np.empty(n, np.int64),
                    np.empty(4 * n, np.int64), np.empty(2 * n, np.int64), np.empty(2 * n, np.int64))
    if r < 0:
        raise DisconnectedError("triangulation is disconnected")
    return _to_text(out)


def encode(tri: Triangulation) -> str:
    vals = K.encode(tri.adj, tri.glu)
    if len(vals) == 0:
        raise DisconnectedError("triangulation is disconnected")
    return _to_text(vals)


def decode(s: str) -> Triangulation:
    vals = _to_vals(s)
    status, pos, adj, glu = K.decode(vals)
    if status:
        raise ParseError(_REASONS[status], int(pos), s)
    return Triangulation._trusted(adj, glu)


def canonical(s: str) -> str:
    return encode(decode(s))


def read_isosig_file(path) -> list[str]:
    return list(iter_isosigs(Path(path).read_text(encoding="utf-8").splitlines()))


def iter_isosigs(lines) -> Iterator[str]:
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


def write_isosig_file(path, sigs, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for h in header.splitlines():
                fh.write(f"# {h}\n")
        for s in sigs:
            fh.write(s + "\n")

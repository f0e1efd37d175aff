"""Permutations of {0,1,2,3} and the lookup tables shared by the kernels.

Permutations are identified by their index into ``S4``, the lexicographic
order of image tuples.  ``S4[0]`` is the identity and ``S4[1]`` swaps 2
and 3.  Signatures store vertex maps by this index.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

_S4_IMAGES = tuple(permutations(range(4)))  # lexicographic

S4 = np.array(_S4_IMAGES, dtype=np.int64)


def _code(img) -> int:
    return img[0] * 64 + img[1] * 16 + img[2] * 4 + img[3]


CODE_TO_INDEX = np.full(256, -1, dtype=np.int64)
for _i, _img in enumerate(_S4_IMAGES):
    CODE_TO_INDEX[_code(_img)] = _i

INV = np.empty(24, dtype=np.int64)
COMP = np.empty((24, 24), dtype=np.int64)  # COMP[p, q] is p after q
for _p in range(24):
    _inv = [0] * 4
    for _x in range(4):
        _inv[_S4_IMAGES[_p][_x]] = _x
    INV[_p] = CODE_TO_INDEX[_code(_inv)]
    for _q in range(24):
        _img = [_S4_IMAGES[_p][_S4_IMAGES[_q][_x]] for _x in range(4)]
        COMP[_p, _q] = CODE_TO_INDEX[_code(_img)]

# local edge enumeration: the six vertex pairs in lexicographic order
EDGE_VERTS = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], dtype=np.int64)
EDGE_INDEX = np.full((4, 4), -1, dtype=np.int64)
for _e, (_u, _w) in enumerate(EDGE_VERTS):
    EDGE_INDEX[_u, _w] = EDGE_INDEX[_w, _u] = _e


@dataclass(frozen=True, order=True)
class Perm4:
    """A permutation of the four vertex labels of a tetrahedron."""

    index: int

    def __post_init__(self):
        if not 0 <= self.index < 24:
            raise ValueError(f"permutation index {self.index} outside 0..23")

    @classmethod
    def from_image(cls, image) -> Perm4:
        image = tuple(int(x) for x in image)
        if len(image) != 4 or sorted(image) != [0, 1, 2, 3]:
            raise ValueError(f"{image!r} is not a permutation of (0, 1, 2, 3)")
        return cls(int(CODE_TO_INDEX[_code(image)]))

    @classmethod
    def identity(cls) -> Perm4:
        return cls(0)

    @property
    def image(self) -> tuple[int, int, int, int]:
        return _S4_IMAGES[self.index]

    def __call__(self, x: int) -> int:
        return _S4_IMAGES[self.index][x]

    def __mul__(self, other: Perm4) -> Perm4:
        # (p * q)(x) == p(q(x))
        return Perm4(int(COMP[self.index, other.index]))

    def inverse(self) -> Perm4:
        return Perm4(int(INV[self.index]))

    def sign(self) -> int:
        img = self.image
        inversions = sum(img[i] > img[j] for i in range(4) for j in range(i + 1, 4))
        return -1 if inversions % 2 else 1

    def __repr__(self):
        return "Perm4(%s)" % "".join(map(str, self.image))

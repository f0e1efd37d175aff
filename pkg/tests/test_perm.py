from itertools import permutations

import pytest

from pachner.perm import COMP, EDGE_INDEX, EDGE_VERTS, INV, S4, Perm4


def test_enumeration_fixed_points():
    assert Perm4.from_image((0, 1, 2, 3)).index == 0
    assert Perm4.from_image((0, 1, 3, 2)).index == 1
    assert Perm4(7).image == (1, 0, 3, 2)


@pytest.mark.parametrize("i", range(24))
def test_index_image_roundtrip(i):
    p = Perm4(i)
    assert sorted(p.image) == [0, 1, 2, 3]
    assert Perm4.from_image(p.image) == p


def test_order_is_lexicographic():
    assert [Perm4(i).image for i in range(24)] == list(permutations(range(4)))


def test_composition_and_inverse():
    for i in range(24):
        p = Perm4(i)
        assert p * p.inverse() == Perm4.identity()
        for j in range(24):
            q = Perm4(j)
            assert all((p * q)(x) == p(q(x)) for x in range(4))
    assert all(COMP[p, INV[p]] == 0 for p in range(24))


def test_sign_matches_parity_of_transpositions():
    assert Perm4.identity().sign() == 1
    assert Perm4.from_image((0, 1, 3, 2)).sign() == -1
    assert Perm4.from_image((1, 2, 3, 0)).sign() == -1
    assert sum(Perm4(i).sign() for i in range(24)) == 0


def test_bad_inputs():
    with pytest.raises(ValueError):
        Perm4(24)
    with pytest.raises(ValueError):
        Perm4.from_image((0, 0, 1, 2))


def test_edge_tables():
    assert [tuple(e) for e in EDGE_VERTS.tolist()] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    for e, (u, w) in enumerate(EDGE_VERTS.tolist()):
        assert EDGE_INDEX[u, w] == EDGE_INDEX[w, u] == e
    assert S4.shape == (24, 4)

import random
import string
from itertools import permutations

import pytest
from hypothesis import given, settings, strategies as st

from conftest import REFERENCE_SIGS, SEEDS, random_triangulation
from pachner.isosig import (ALPHABET, DisconnectedError, ParseError, alphabet_decode, alphabet_encode,
                            decode, encode, encode_labelling, read_isosig_file)
from pachner.perm import Perm4
from pachner.triangulation import FaceRef, Triangulation, validate

ORACLE_ALPHABET = string.ascii_lowercase + string.ascii_uppercase + string.digits + "+-"
PERMS = list(permutations(range(4)))


def _inv(p):
    out = [0] * 4
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


def _comp(*ps):
    # _comp(a, b, c)(x) == a(b(c(x)))
    def f(x):
        for p in reversed(ps):
            x = p[x]
        return x
    return tuple(f(x) for x in range(4))


def _digits(x, k):
    return "".join(ORACLE_ALPHABET[(x >> (6 * i)) & 63] for i in range(k))


def oracle_labelling(tri, start, sp):
    """Relabel canonically from (start, sp), then read off the sequences."""
    n = tri.tet_count
    glue = {}
    for t in range(n):
        for f in range(4):
            g = tri.gluing(FaceRef(t, f))
            glue[t, f] = None if g.is_boundary else (g.destination.tet, g.perm.image)
    # pass 1: discovery order and vertex maps (new tets attach by the identity)
    order, newlabel, vmap = [start], {start: 0}, {start: sp}
    i = 0
    while i < len(order):
        t = order[i]
        for fimg in range(4):
            f = _inv(vmap[t])[fimg]
            if glue[t, f] is None:
                continue
            d, p = glue[t, f]
            if d not in newlabel:
                newlabel[d] = len(order)
                order.append(d)
                vmap[d] = _comp(vmap[t], _inv(p))
        i += 1
    if len(order) < n:
        return None
    table = {}
    for t in range(n):
        for f in range(4):
            target = glue[t, f]
            key = (newlabel[t], vmap[t][f])
            if target is None:
                table[key] = None
            else:
                d, p = target
                table[key] = (newlabel[d], _comp(vmap[d], p, _inv(vmap[t])))
    # pass 2: walk the relabelled faces in order
    seen, types, dests, perms, reached = set(), [], [], [], 1
    for t in range(n):
        for f in range(4):
            if (t, f) in seen:
                continue
            seen.add((t, f))
            if table[t, f] is None:
                types.append(0)
                continue
            d, p = table[t, f]
            seen.add((d, p[f]))
            if d >= reached:
                assert d == reached and p == (0, 1, 2, 3)
                reached += 1
                types.append(1)
            else:
                types.append(2)
                dests.append(d)
                perms.append(PERMS.index(p))
    k = 1
    while n >= 63 and (n >> (6 * k)) > 0:
        k += 1
    head = ORACLE_ALPHABET[n] if n < 63 else ORACLE_ALPHABET[63] + ORACLE_ALPHABET[k] + _digits(n, k)
    types += [0] * (-len(types) % 3)
    body = "".join(ORACLE_ALPHABET[types[i] + 4 * types[i + 1] + 16 * types[i + 2]]
                   for i in range(0, len(types), 3))
    return head + body + "".join(_digits(d, k) for d in dests) + "".join(ORACLE_ALPHABET[p] for p in perms)


def oracle_encode(tri):
    cands = [oracle_labelling(tri, t, p) for t in range(tri.tet_count) for p in PERMS]
    if None in cands:
        raise ValueError("disconnected")
    return min(cands)


def chain(n):
    """n tetrahedra in a row, face 3 of each glued to face 0 of the next."""
    return Triangulation.from_gluings(n, [(t, 3, t + 1, (3, 1, 2, 0)) for t in range(n - 1)])


def test_alphabet_table():
    assert alphabet_encode(0) == "a"
    assert alphabet_encode(25) == "z"
    assert alphabet_encode(26) == "A"
    assert alphabet_encode(52) == "0"
    assert alphabet_encode(62) == "+"
    assert alphabet_encode(63) == "-"
    assert all(alphabet_decode(alphabet_encode(k)) == k for k in range(64))
    assert ALPHABET == ORACLE_ALPHABET
    for bad in (-1, 64):
        with pytest.raises(ValueError):
            alphabet_encode(bad)
    with pytest.raises(ValueError):
        alphabet_decode("!")


@pytest.mark.parametrize("sig", REFERENCE_SIGS)
def test_reference_roundtrip(sig):
    tri = decode(sig)
    assert validate(tri).ok
    assert encode(tri) == sig
    assert oracle_encode(tri) == sig


def test_bipyramid():
    tri = Triangulation.from_gluings(2, [(0, 3, 1, 0)])
    assert encode(tri) == "caba"
    back = decode("caba")
    assert back.tet_count == 2
    glued = [(t, f) for t in range(2) for f in range(4) if back.adj[t, f] >= 0]
    assert len(glued) == 2
    assert all(back.glu[t, f] == 0 for t, f in glued)


def test_type_packing_character():
    # seven face slots (0,0,0 | 1,0,0 | 0) pad to three characters: 0, 1, 0
    assert "caba"[1:] == "aba"
    assert alphabet_encode(1 + 4 * 0 + 16 * 0) == "b"
    assert alphabet_encode(2 + 4 * 1 + 16 * 2) == ALPHABET[38]


def test_single_tetrahedron():
    assert encode(Triangulation.unglued(1)) == "baa"
    assert oracle_encode(Triangulation.unglued(1)) == "baa"


def test_s3_seed_decomposition():
    tri = decode("cMcabbgqs")
    assert tri.tet_count == 2 and tri.is_closed()


def test_encode_labelling_minimum_is_encode():
    tri = decode(SEEDS["L71"])
    labs = {encode_labelling(tri, t, Perm4(p)) for t in range(tri.tet_count) for p in range(24)}
    assert min(labs) == encode(tri)


def test_disconnected_is_rejected():
    with pytest.raises(DisconnectedError):
        encode(Triangulation.unglued(2))


def test_large_tetrahedron_count():
    tri = chain(70)
    s = encode(tri)
    # 70 = 6 + 1*64: two digits, least significant first
    assert s.startswith("-cgb")
    assert s == oracle_encode(tri)
    assert encode(decode(s)) == s
    assert decode(s).tet_count == 70


def test_count_prefix_matches_tet_count():
    for sig in REFERENCE_SIGS:
        assert alphabet_decode(sig[0]) == decode(sig).tet_count


@pytest.mark.parametrize("text, reason", [
    ("c", "truncated"),
    ("", "truncated"),
    ("a", "count"),
    ("bd", "type"),
    ("cMcabbgqZ", "permutation"),
    ("cabaa", "trailing"),
    ("cab!", "non-alphabet"),
    ("cabé", "non-alphabet"),
])
def test_parse_errors(text, reason):
    with pytest.raises(ParseError) as info:
        decode(text)
    assert reason in info.value.reason
    assert 0 <= info.value.position <= len(text)


def test_parse_error_positions():
    with pytest.raises(ParseError) as info:
        decode("cab!")
    assert info.value.position == 3
    with pytest.raises(ParseError) as info:
        decode("cMcabbgqZ")
    assert info.value.position == 8


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 5), st.floats(0, 1))
def test_matches_oracle_on_random_triangulations(seed, n, prob):
    tri = random_triangulation(random.Random(seed), n, prob)
    assert encode(tri) == oracle_encode(tri)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 3))
def test_relabelling_invariance_exhaustive_small(seed, n):
    r = random.Random(seed)
    tri = random_triangulation(r, n, 0.8)
    s = encode(tri)
    # every vertex relabelling of tetrahedron 0, random elsewhere and random order
    for p in range(24):
        tp = list(range(n))
        r.shuffle(tp)
        vp = [p] + [r.randrange(24) for _ in range(n - 1)]
        assert encode(tri.relabel(tp, vp)) == s


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(4, 9))
def test_relabelling_invariance_sampled(seed, n):
    r = random.Random(seed)
    tri = random_triangulation(r, n, 1.0)
    tp = list(range(n))
    r.shuffle(tp)
    other = tri.relabel(tp, [r.randrange(24) for _ in range(n)])
    assert encode(other) == encode(tri)
    assert encode(decode(encode(tri))) == encode(tri)


def _check_decode_total(text):
    try:
        tri = decode(text)
    except ParseError as exc:
        assert 0 <= exc.position <= len(text)
        return
    assert validate(tri).ok
    # whatever decodes is connected, so it has a canonical form
    encode(tri)


@settings(max_examples=400, deadline=None)
@given(st.text(alphabet=ALPHABET + "!. é", max_size=24))
def test_decoder_is_total_on_random_text(text):
    _check_decode_total(text)


@settings(max_examples=400, deadline=None)
@given(st.sampled_from(REFERENCE_SIGS), st.integers(0, 40), st.sampled_from(ALPHABET), st.integers(0, 2))
def test_decoder_is_total_on_mutated_signatures(sig, pos, ch, op):
    pos %= len(sig)
    if op == 0:
        text = sig[:pos] + ch + sig[pos + 1:]
    elif op == 1:
        text = sig[:pos] + sig[pos + 1:]
    else:
        text = sig[:pos] + ch + sig[pos:]
    _check_decode_total(text)


def test_isosig_file_reader(tmp_path):
    p = tmp_path / "sigs.txt"
    p.write_text("# header\ncMcabbgqs\n\n  cMcabbjaj  \n# tail\n", encoding="utf-8")
    assert read_isosig_file(p) == ["cMcabbgqs", "cMcabbjaj"]

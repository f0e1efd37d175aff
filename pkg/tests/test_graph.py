import numpy as np
import pytest

from conftest import SEEDS
from pachner.graph import (BudgetExceeded, GraphFormatError, batch_generate, export_graph, generate,
                           growth_profile, import_graph, summarize)
from pachner.isosig import decode, encode
from pachner.moves import ALL_MOVES, MOVES_14, MOVES_23, apply_move, enumerate_moves, parse_kinds


def bfs_oracle(seed, kinds, depth, max_tets=0):
    """Plain breadth-first search through the per-move API."""
    root = encode(decode(seed))
    dist = {root: 0}
    frontier = [root]
    edges = set()
    for d in range(depth):
        nxt = []
        for s in frontier:
            tri = decode(s)
            for h in enumerate_moves(tri, kinds):
                if max_tets and tri.tet_count + h.kind.tet_delta > max_tets:
                    continue
                c = encode(apply_move(tri, h))
                if c not in dist:
                    dist[c] = d + 1
                    nxt.append(c)
                if c != s:
                    edges.add(frozenset((s, c)))
        frontier = nxt
    return dist, edges


def as_sets(g):
    dist = {s: int(d) for s, d in zip(g.nodes, g.depths)}
    edges = {frozenset((g.nodes[u], g.nodes[v])) for u, v in g.edges.tolist()}
    return dist, edges


@pytest.mark.parametrize("name, kinds, depth", [
    ("S3", MOVES_23, 4), ("S3", ALL_MOVES, 2), ("L71", MOVES_23, 3), ("T3", MOVES_23, 2),
    ("PHS", MOVES_14, 2), ("Weeks", MOVES_23, 1), ("RP3", ALL_MOVES, 2),
])
def test_matches_bfs_oracle(name, kinds, depth):
    g = generate(SEEDS[name], kinds, depth)
    assert as_sets(g) == bfs_oracle(SEEDS[name], kinds, depth)


def test_tet_cap_matches_oracle():
    g = generate(SEEDS["S3"], MOVES_23, 5, max_tets=5)
    assert as_sets(g) == bfs_oracle(SEEDS["S3"], MOVES_23, 5, max_tets=5)
    assert g.tet_counts.max() <= 5


def test_depth_zero():
    g = generate("cMcabbgqs", MOVES_23, 0)
    assert g.nodes == ["cMcabbgqs"] and g.edge_count == 0


def test_seed_is_canonicalised_and_first():
    tri = decode(SEEDS["L71"])
    other = encode(tri.relabel([3, 1, 0, 2], [5, 0, 17, 9]))
    g = generate(other, MOVES_23, 1)
    assert g.nodes[0] == SEEDS["L71"] and g.depths[0] == 0


def test_small_growth_bounds():
    assert generate("cMcabbgqs", MOVES_23, 3).node_count <= 221
    assert generate("bkaagb", MOVES_14, 3).node_count <= 10


def test_invariants_of_output():
    g = generate(SEEDS["S3"], MOVES_23, 4)
    assert len(set(g.nodes)) == g.node_count
    u, v = g.edges[:, 0], g.edges[:, 1]
    assert np.all(u < v)
    assert len({(a, b) for a, b in g.edges.tolist()}) == g.edge_count
    # each move changes the tetrahedron count by one: the graph is bipartite by parity
    assert np.all((g.tet_counts[u] + g.tet_counts[v]) % 2 == 1)
    assert np.all(np.abs(g.depths[u] - g.depths[v]) <= 1)
    assert np.all(g.vertex_counts == 1)
    assert all(g.index_of(s) == i for i, s in enumerate(g.nodes))


def test_jobs_do_not_change_the_result():
    a = generate(SEEDS["T3"], MOVES_23, 3, jobs=1)
    b = generate(SEEDS["T3"], MOVES_23, 3, jobs=3)
    assert a == b
    assert a.nodes == b.nodes and np.array_equal(a.edges, b.edges)


def test_truncate_equals_shallower_generation():
    g = generate(SEEDS["S3"], MOVES_23, 5)
    for d in range(5):
        assert g.truncate(d) == generate(SEEDS["S3"], MOVES_23, d)


def test_budget_abort_returns_completed_levels():
    with pytest.raises(BudgetExceeded) as info:
        generate(SEEDS["S3"], MOVES_23, 6, max_nodes=300)
    partial = info.value.graph
    full = generate(SEEDS["S3"], MOVES_23, info.value.completed_depth)
    assert partial == full
    assert partial.node_count <= 300


def test_bad_seed_and_depth():
    with pytest.raises(ValueError):
        generate("cMcabbgqs", MOVES_23, -1)
    with pytest.raises(ValueError):
        generate("c!", MOVES_23, 1)


def test_export_import_roundtrip(tmp_path):
    g = generate(SEEDS["L71"], ALL_MOVES, 2)
    p = tmp_path / "g.txt"
    export_graph(g, p)
    h = import_graph(p)
    assert h == g
    assert h.kinds == ALL_MOVES and h.depth_bound == 2 and h.seed == g.seed
    assert p.read_text().splitlines()[1].split()[1] == SEEDS["L71"]


def test_import_rejects_malformed(tmp_path):
    g = generate(SEEDS["S3"], MOVES_23, 2)
    p = tmp_path / "g.txt"
    export_graph(g, p)
    lines = p.read_text().splitlines()
    cases = {
        "dup": lines[:2] + [f"1 {lines[1].split()[1]} 2 0"] + lines[2:],
        "index": [lines[0], lines[1].replace("0 ", "4 ", 1)] + lines[2:],
        "noedges": [ln for ln in lines if ln != "edges"],
        "header": ["graph v9"] + lines[1:],
    }
    for name, body in cases.items():
        q = tmp_path / f"{name}.txt"
        q.write_text("\n".join(body) + "\n")
        with pytest.raises(GraphFormatError):
            import_graph(q)


def test_growth_profile_matches_truncations():
    g = generate(SEEDS["S3"], MOVES_23, 4)
    prof = growth_profile(g)
    for d in range(5):
        t = g.truncate(d)
        assert prof.nodes[d] == t.node_count
        assert prof.edges[d] == t.edge_count
    assert sum(prof.new_nodes) == g.node_count


def test_batch_generate_over_seeds():
    got = {}
    out = batch_generate(SEEDS.values(), MOVES_23, 2, on_graph=lambda i, g: got.setdefault(i, g))
    assert len(out) == len(SEEDS) and all(s.ok for s in out)
    for i, sig in enumerate(SEEDS.values()):
        assert got[i] == generate(sig, MOVES_23, 2)
        assert out[i].node_count == got[i].node_count
        assert sum(out[i].degree_histogram.values()) == out[i].node_count
    assert batch_generate([], MOVES_23, 2) == []


def test_batch_records_failures_and_continues():
    out = batch_generate(["cMcabbgqs", "zz!", "cMcabbjaj"], MOVES_23, 2, jobs=2)
    assert [s.ok for s in out] == [True, False, True]
    assert out[1].error
    budget = batch_generate([SEEDS["S3"]], MOVES_23, 6, max_nodes=100)
    assert not budget[0].ok and budget[0].node_count <= 100


def test_summary_fields():
    g = generate(SEEDS["S3"], MOVES_23, 3)
    s = summarize(g)
    assert s.seed_tets == 2 and s.completed_depth == 3
    assert s.density == pytest.approx(2 * g.edge_count / (g.node_count * (g.node_count - 1)))


def test_kinds_accept_strings():
    assert generate(SEEDS["S3"], "23", 2) == generate(SEEDS["S3"], parse_kinds("23"), 2)

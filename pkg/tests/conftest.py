import random
from itertools import permutations

import pytest

from pachner.triangulation import Triangulation

# seed triangulations used throughout (all closed, 1-vertex)
SEEDS = {
    "S3": "cMcabbgqs",
    "S2xS1": "cMcabbjaj",
    "RP3": "cMcabbgqw",
    "L71": "eLAkbcbddhhjhk",
    "L72": "cMcabbjqw",
    "T3": "gvLQQedfedffrwawrhh",
    "PHS": "fvPQcdecedekrsnrs",
    "Weeks": "jLvAzQQcfeghighiiuquanobwwr",
}
KNOTS = ["cMcabbgds", "cPcbbbadu", "cPcbbbiht", "dLQbcccaekv", "dLQbcccdero",
         "eLPkbcddddcwjb", "fLLQcbcdeeedowxxd"]
SURGERIES = ["cMcabbjaj", "cMcabbgag", "gvLQQcdefeffnjndspx", "hLLLQkcdefgfgghsdaenjw"]
REFERENCE_SIGS = list(SEEDS.values()) + KNOTS + SURGERIES

_PERMS = list(permutations(range(4)))


def random_triangulation(rng: random.Random, n: int, glue_prob: float = 1.0) -> Triangulation:
    """A connected triangulation on n tetrahedra with random vertex maps.

    A random spanning tree of gluings keeps it connected; each remaining
    pair of free faces is then glued with probability ``glue_prob``.
    """
    free = [(t, f) for t in range(n) for f in range(4)]
    gluings = []

    def take(slot):
        free.remove(slot)
        return slot

    def glue(a, b):
        (t, f), (d, g) = a, b
        p = rng.choice([p for p in _PERMS if p[f] == g])
        gluings.append((t, f, d, p))

    for t in range(1, n):
        earlier = [s for s in free if s[0] < t]
        a = take(rng.choice(earlier))
        b = take(rng.choice([s for s in free if s[0] == t]))
        glue(a, b)
    rng.shuffle(free)
    while len(free) >= 2:
        a, b = free.pop(), free.pop()
        if rng.random() < glue_prob:
            glue(a, b)
    return Triangulation.from_gluings(n, gluings)


@pytest.fixture
def rng():
    return random.Random(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")

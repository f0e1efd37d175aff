"""Compiled inner loops: canonical encoding, decoding, skeleta and moves.

A triangulation with ``n`` tetrahedra is passed around as two ``(n, 4)``
int64 arrays: ``adj[t, f]`` is the tetrahedron glued to face ``f`` of ``t``
(-1 for boundary) and ``glu[t, f]`` the index of the vertex map (-1 for
boundary).  Signatures are int64 arrays of alphabet values (0..63).
"""
import numpy as np
from numba import njit

from .perm import COMP, EDGE_INDEX, EDGE_VERTS, INV, S4

ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+-"
VAL_TO_ASCII = np.array([ord(c) for c in ALPHABET], dtype=np.int64)
ASCII_TO_VAL = np.full(256, -1, dtype=np.int64)
for _v, _c in enumerate(ALPHABET):
    ASCII_TO_VAL[ord(_c)] = _v

# move kinds; the face dimension of each locus is 2, 1, 3, 0
KIND_DIM = np.array([2, 1, 3, 0], dtype=np.int64)

# decode error codes
ERR_TRUNCATED = 1
ERR_SIZE = 2
ERR_ACTION = 3
ERR_DEST = 4
ERR_PERM = 5
ERR_FACE = 6
ERR_NEWTET = 7
ERR_UNREACHED = 8
ERR_TRAILING = 9
ERR_PADDING = 10


@njit(cache=True)
def n_digits(n):
    k = 0
    while n > 0:
        n >>= 6
        k += 1
    return k


@njit(cache=True)
def header_length(n):
    if n < 63:
        return 1
    return 2 + n_digits(n)


@njit(cache=True)
def write_header(n, out):
    if n < 63:
        out[0] = n
        return 1
    d = n_digits(n)
    out[0] = 63
    out[1] = d
    for i in range(d):
        out[2 + i] = (n >> (6 * i)) & 63
    return 2 + d


@njit(cache=True)
def count_faces(adj):
    """(number of boundary faces, number of glued face pairs)."""
    n = adj.shape[0]
    nb = 0
    ng = 0
    for t in range(n):
        for f in range(4):
            if adj[t, f] < 0:
                nb += 1
            else:
                ng += 1
    return nb, ng // 2


@njit(cache=True)
def _cmp_char(v, best, pos, state):
    # state 0: equal so far; 1: already smaller; returns new state or -1 (worse)
    if state != 0:
        return state
    a = VAL_TO_ASCII[v]
    b = VAL_TO_ASCII[best[pos]]
    if a < b:
        return 1
    if a > b:
        return -1
    return 0


@njit(cache=True)
def labelling(adj, glu, start, sp, out, best, have_best, image, pre, vmap,
              actions, jdest, jperm):
    """Encode the canonical labelling rooted at (start, sp) into ``out``.

    ``sp`` maps the original vertex labels of ``start`` to canonical labels.
    Returns the signature length, 0 if the labelling is abandoned because it
    is already larger than ``best``, or -1 if some tetrahedron is unreachable.
    """
    n = adj.shape[0]
    for i in range(n):
        image[i] = -1
    image[start] = 0
    pre[0] = start
    vmap[start] = sp
    nxt = 1
    na = 0
    nj = 0
    hl = write_header(n, out)
    d = n_digits(n)
    pos = hl
    state = 0 if have_best else 1
    for simg in range(n):
        if simg >= nxt:
            return -1
        src = pre[simg]
        vinv = INV[vmap[src]]
        for fimg in range(4):
            fsrc = S4[vinv, fimg]
            dst = adj[src, fsrc]
            if dst < 0:
                actions[na] = 0
                na += 1
            else:
                g = glu[src, fsrc]
                dimg = image[dst]
                if dimg >= 0 and dimg < simg:
                    continue
                if dimg == simg and S4[vmap[src], S4[g, fsrc]] < fimg:
                    continue
                if dimg < 0:
                    image[dst] = nxt
                    pre[nxt] = dst
                    nxt += 1
                    vmap[dst] = COMP[vmap[src], INV[g]]
                    actions[na] = 1
                    na += 1
                else:
                    actions[na] = 2
                    na += 1
                    jdest[nj] = dimg
                    jperm[nj] = COMP[COMP[vmap[dst], g], INV[vmap[src]]]
                    nj += 1
            if na % 3 == 0:
                v = actions[na - 3] + 4 * actions[na - 2] + 16 * actions[na - 1]
                out[pos] = v
                state = _cmp_char(v, best, pos, state)
                if state < 0:
                    return 0
                pos += 1
    if nxt < n:
        return -1
    r = na % 3
    if r:
        v = actions[na - r]
        if r == 2:
            v += 4 * actions[na - 1]
        out[pos] = v
        state = _cmp_char(v, best, pos, state)
        if state < 0:
            return 0
        pos += 1
    for j in range(nj):
        x = jdest[j]
        for k in range(d):
            v = (x >> (6 * k)) & 63
            out[pos] = v
            state = _cmp_char(v, best, pos, state)
            if state < 0:
                return 0
            pos += 1
    for j in range(nj):
        v = jperm[j]
        out[pos] = v
        state = _cmp_char(v, best, pos, state)
        if state < 0:
            return 0
        pos += 1
    if state == 0:
        return 0  # identical to best
    return pos


@njit(cache=True)
def signature_length(adj):
    n = adj.shape[0]
    nb, ng = count_faces(adj)
    na = nb + ng
    nj = max(ng - (n - 1), 0)
    return header_length(n) + (na + 2) // 3 + nj * (n_digits(n) + 1)


@njit(cache=True)
def encode(adj, glu):
    """Minimal labelling over all 24n roots; empty array if disconnected."""
    n = adj.shape[0]
    L = signature_length(adj)
    best = np.zeros(L, dtype=np.int64)
    cur = np.zeros(L, dtype=np.int64)
    image = np.empty(n, dtype=np.int64)
    pre = np.empty(n, dtype=np.int64)
    vmap = np.empty(n, dtype=np.int64)
    actions = np.empty(4 * n, dtype=np.int64)
    jdest = np.empty(2 * n, dtype=np.int64)
    jperm = np.empty(2 * n, dtype=np.int64)
    have = False
    for t in range(n):
        for p in range(24):
            r = labelling(adj, glu, t, p, cur, best, have, image, pre, vmap,
                          actions, jdest, jperm)
            if r < 0:
                return np.zeros(0, dtype=np.int64)
            if r > 0:
                best[:] = cur[:]
                have = True
    return best


@njit(cache=True)
def all_labellings(adj, glu):
    """Every one of the 24n labellings, unpruned (row t*24+p)."""
    n = adj.shape[0]
    L = signature_length(adj)
    res = np.zeros((24 * n, L), dtype=np.int64)
    dummy = np.zeros(L, dtype=np.int64)
    image = np.empty(n, dtype=np.int64)
    pre = np.empty(n, dtype=np.int64)
    vmap = np.empty(n, dtype=np.int64)
    actions = np.empty(4 * n, dtype=np.int64)
    jdest = np.empty(2 * n, dtype=np.int64)
    jperm = np.empty(2 * n, dtype=np.int64)
    for t in range(n):
        for p in range(24):
            cur = res[t * 24 + p]
            labelling(adj, glu, t, p, cur, dummy, False, image, pre, vmap,
                      actions, jdest, jperm)
    return res


@njit(cache=True)
def decode(vals):
    """Rebuild a triangulation from signature values.

    Returns (status, position, adj, glu); status 0 means success, otherwise
    one of the ERR_* codes with the offending character position.
    """
    L = vals.shape[0]
    empty = np.zeros((0, 4), dtype=np.int64)
    if L == 0:
        return ERR_TRUNCATED, 0, empty, empty
    if vals[0] < 63:
        n = vals[0]
        d = 1
        pos = 1
    else:
        if L < 2:
            return ERR_TRUNCATED, L, empty, empty
        d = vals[1]
        if d == 0 or d > 5:
            return ERR_SIZE, 1, empty, empty
        if L < 2 + d:
            return ERR_TRUNCATED, L, empty, empty
        n = 0
        for i in range(d):
            n += vals[2 + i] << (6 * i)
        if n_digits(n) != d:
            return ERR_SIZE, 1, empty, empty
        pos = 2 + d
    if n == 0:
        return ERR_SIZE, 0, empty, empty
    # first pass: read actions until every face is accounted for
    actions = np.empty(4 * n, dtype=np.int64)
    apos = np.empty(4 * n, dtype=np.int64)
    na = 0
    faces_left = 4 * n
    njoins = 0
    nnew = 0
    while faces_left > 0:
        if pos >= L:
            return ERR_TRUNCATED, L, empty, empty
        v = vals[pos]
        for k in range(3):
            a = (v >> (2 * k)) & 3
            if faces_left == 0:
                if a != 0:
                    return ERR_PADDING, pos, empty, empty
                continue
            if a == 3:
                return ERR_ACTION, pos, empty, empty
            if a == 0:
                faces_left -= 1
            else:
                if faces_left < 2:
                    return ERR_ACTION, pos, empty, empty
                faces_left -= 2
                if a == 1:
                    nnew += 1
                else:
                    njoins += 1
            actions[na] = a
            apos[na] = pos
            na += 1
        pos += 1
    if nnew != n - 1:
        if nnew > n - 1:
            return ERR_NEWTET, pos - 1, empty, empty
        return ERR_UNREACHED, pos - 1, empty, empty
    dest_start = pos
    perm_start = dest_start + njoins * d
    end = perm_start + njoins
    if end > L:
        return ERR_TRUNCATED, L, empty, empty
    if end < L:
        return ERR_TRAILING, end, empty, empty
    adj = np.full((n, 4), -1, dtype=np.int64)
    glu = np.full((n, 4), -1, dtype=np.int64)
    done = np.zeros((n, 4), dtype=np.bool_)
    nxt = 1
    ai = 0
    ji = 0
    for t in range(n):
        if t >= nxt:
            return ERR_UNREACHED, dest_start - 1, empty, empty
        for f in range(4):
            if done[t, f]:
                continue
            a = actions[ai]
            here = apos[ai]
            ai += 1
            if a == 0:
                done[t, f] = True
            elif a == 1:
                if nxt >= n:
                    return ERR_NEWTET, here, empty, empty
                adj[t, f] = nxt
                glu[t, f] = 0
                adj[nxt, f] = t
                glu[nxt, f] = 0
                done[t, f] = True
                done[nxt, f] = True
                nxt += 1
            else:
                dest = 0
                dpos = dest_start + ji * d
                for k in range(d):
                    dest += vals[dpos + k] << (6 * k)
                p = vals[perm_start + ji]
                ji += 1
                if dest >= nxt:
                    return ERR_DEST, dpos, empty, empty
                if p > 23:
                    return ERR_PERM, perm_start + ji - 1, empty, empty
                g = S4[p, f]
                if done[dest, g] or (dest == t and g == f):
                    return ERR_FACE, perm_start + ji - 1, empty, empty
                adj[t, f] = dest
                glu[t, f] = p
                adj[dest, g] = t
                glu[dest, g] = INV[p]
                done[t, f] = True
                done[dest, g] = True
    return 0, 0, adj, glu


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _union(parent, i, j):
    a = _find(parent, i)
    b = _find(parent, j)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


@njit(cache=True)
def _relabel(parent, m):
    lab = np.full(m, -1, dtype=np.int64)
    ids = np.full(m, -1, dtype=np.int64)
    k = 0
    for i in range(m):
        r = _find(parent, i)
        if ids[r] < 0:
            ids[r] = k
            k += 1
        lab[i] = ids[r]
    return lab, k


@njit(cache=True)
def skeleton(adj, glu):
    """Vertex labels (n*4) and edge labels (n*6) of the orbits, plus counts."""
    n = adj.shape[0]
    vpar = np.arange(4 * n)
    epar = np.arange(6 * n)
    for t in range(n):
        for f in range(4):
            d = adj[t, f]
            if d < 0:
                continue
            p = glu[t, f]
            for v in range(4):
                if v != f:
                    _union(vpar, 4 * t + v, 4 * d + S4[p, v])
            for e in range(6):
                u = EDGE_VERTS[e, 0]
                w = EDGE_VERTS[e, 1]
                if u != f and w != f:
                    _union(epar, 6 * t + e, 6 * d + EDGE_INDEX[S4[p, u], S4[p, w]])
    vlab, nv = _relabel(vpar, 4 * n)
    elab, ne = _relabel(epar, 6 * n)
    return vlab, nv, elab, ne


@njit(cache=True)
def star(adj, glu, kind, tet, sub, T, phi):
    """Match the star of a move locus against the boundary of a 4-simplex.

    Abstract vertices 0..k span the locus (k its dimension); abstract vertex
    b > k names the old tetrahedron ``T[b]`` omitting it, with ``phi[b, x]``
    the vertex of ``T[b]`` playing abstract vertex ``x``.  ``sub`` is the
    face, local edge or vertex number inside ``tet`` (ignored for M14).
    Returns True iff the move is applicable there.
    """
    k = KIND_DIM[kind]
    for b in range(5):
        T[b] = -1
        for x in range(5):
            phi[b, x] = -1
    T[4] = tet
    if k == 2:
        j = 0
        for v in range(4):
            if v != sub:
                phi[4, j] = v
                j += 1
        phi[4, 3] = sub
    elif k == 1:
        u = EDGE_VERTS[sub, 0]
        w = EDGE_VERTS[sub, 1]
        phi[4, 0] = u
        phi[4, 1] = w
        j = 2
        for v in range(4):
            if v != u and v != w:
                phi[4, j] = v
                j += 1
    elif k == 3:
        for v in range(4):
            phi[4, v] = v
        return True
    else:
        phi[4, 0] = sub
        j = 1
        for v in range(4):
            if v != sub:
                phi[4, j] = v
                j += 1
    for b in range(k + 1, 4):
        g0 = phi[4, b]
        x = adj[tet, g0]
        if x < 0:
            return False
        p = glu[tet, g0]
        T[b] = x
        for y in range(4):
            if y != b:
                phi[b, y] = S4[p, phi[4, y]]
        phi[b, 4] = S4[p, g0]
    for b in range(k + 1, 5):
        for b2 in range(b + 1, 5):
            if T[b] == T[b2]:
                return False
    for b in range(k + 1, 4):
        for b2 in range(b + 1, 4):
            h = phi[b, b2]
            if adj[T[b], h] != T[b2]:
                return False
            p = glu[T[b], h]
            if S4[p, h] != phi[b2, b]:
                return False
            for x in range(5):
                if x != b and x != b2 and S4[p, phi[b, x]] != phi[b2, x]:
                    return False
    return True


@njit(cache=True)
def _perm_index(i0, i1, i2, i3):
    # inverse lookup without the code table: linear scan over 24 rows
    for p in range(24):
        if S4[p, 0] == i0 and S4[p, 1] == i1 and S4[p, 2] == i2 and S4[p, 3] == i3:
            return p
    return -1


@njit(cache=True)
def apply_star(adj, glu, kind, T, phi):
    """Replace the matched star by its complementary half of the 4-simplex.

    Surviving tetrahedra keep their relative order; the new ones are
    appended, one per abstract vertex of the locus.
    """
    n = adj.shape[0]
    k = KIND_DIM[kind]
    nb = 4 - k
    n2 = n - nb + k + 1
    instar = np.full(n, -1, dtype=np.int64)
    for b in range(k + 1, 5):
        instar[T[b]] = b
    newidx = np.full(n, -1, dtype=np.int64)
    j = 0
    for t in range(n):
        if instar[t] < 0:
            newidx[t] = j
            j += 1
    base = j
    adj2 = np.full((n2, 4), -1, dtype=np.int64)
    glu2 = np.full((n2, 4), -1, dtype=np.int64)
    for t in range(n):
        if instar[t] >= 0:
            continue
        for f in range(4):
            d = adj[t, f]
            if d >= 0 and instar[d] < 0:
                adj2[newidx[t], f] = newidx[d]
                glu2[newidx[t], f] = glu[t, f]
    # psi[a, x]: vertex of new tetrahedron a playing abstract vertex x
    psi = np.full((5, 5), -1, dtype=np.int64)
    for a in range(k + 1):
        for x in range(5):
            if x < a:
                psi[a, x] = x
            elif x > a:
                psi[a, x] = x - 1
    phiinv = np.full((5, 4), -1, dtype=np.int64)
    for b in range(k + 1, 5):
        for x in range(5):
            if phi[b, x] >= 0:
                phiinv[b, phi[b, x]] = x
    q = np.empty(4, dtype=np.int64)
    for a in range(k + 1):
        for a2 in range(a + 1, k + 1):
            for x in range(5):
                if x != a and x != a2:
                    q[psi[a, x]] = psi[a2, x]
            q[psi[a, a2]] = psi[a2, a]
            p = _perm_index(q[0], q[1], q[2], q[3])
            adj2[base + a, psi[a, a2]] = base + a2
            glu2[base + a, psi[a, a2]] = p
            adj2[base + a2, psi[a2, a]] = base + a
            glu2[base + a2, psi[a2, a]] = INV[p]
    for a in range(k + 1):
        for b in range(k + 1, 5):
            fnew = psi[a, b]
            h = phi[b, a]
            d = adj[T[b], h]
            if d < 0:
                continue
            p = glu[T[b], h]
            g = S4[p, h]
            b2 = instar[d]
            if b2 >= 0:
                a2 = phiinv[b2, g]
                for x in range(5):
                    if x != a and x != b:
                        q[psi[a, x]] = psi[a2, phiinv[b2, S4[p, phi[b, x]]]]
                q[fnew] = psi[a2, b2]
                adj2[base + a, fnew] = base + a2
                glu2[base + a, fnew] = _perm_index(q[0], q[1], q[2], q[3])
            else:
                for x in range(5):
                    if x != a and x != b:
                        q[psi[a, x]] = S4[p, phi[b, x]]
                q[fnew] = g
                pi = _perm_index(q[0], q[1], q[2], q[3])
                adj2[base + a, fnew] = newidx[d]
                glu2[base + a, fnew] = pi
                adj2[newidx[d], g] = base + a
                glu2[newidx[d], g] = INV[pi]
    return adj2, glu2


@njit(cache=True)
def move_loci(adj, glu, kinds_mask):
    """All applicable move handles as rows (kind, locus, tet, sub).

    ``locus`` is the public locus id: the face slot 4*t+f for M23, the edge
    orbit id for M32, the tetrahedron for M14 and the vertex orbit id for
    M41.  Rows are ordered by kind, then locus.
    """
    n = adj.shape[0]
    vlab, nv, elab, ne = skeleton(adj, glu)
    out = np.empty((4 * n + ne + n + nv, 4), dtype=np.int64)
    m = 0
    T = np.empty(5, dtype=np.int64)
    phi = np.empty((5, 5), dtype=np.int64)
    if kinds_mask & 1:
        for t in range(n):
            for f in range(4):
                d = adj[t, f]
                if d < 0 or d == t:
                    continue
                if d < t:
                    continue
                out[m, 0] = 0
                out[m, 1] = 4 * t + f
                out[m, 2] = t
                out[m, 3] = f
                m += 1
    if kinds_mask & 2:
        deg = np.zeros(ne, dtype=np.int64)
        rep = np.full(ne, -1, dtype=np.int64)
        for i in range(6 * n):
            deg[elab[i]] += 1
            if rep[elab[i]] < 0:
                rep[elab[i]] = i
        for e in range(ne):
            if deg[e] != 3:
                continue
            t = rep[e] // 6
            s = rep[e] % 6
            if star(adj, glu, 1, t, s, T, phi):
                out[m, 0] = 1
                out[m, 1] = e
                out[m, 2] = t
                out[m, 3] = s
                m += 1
    if kinds_mask & 4:
        for t in range(n):
            out[m, 0] = 2
            out[m, 1] = t
            out[m, 2] = t
            out[m, 3] = 0
            m += 1
    if kinds_mask & 8:
        deg = np.zeros(nv, dtype=np.int64)
        rep = np.full(nv, -1, dtype=np.int64)
        for i in range(4 * n):
            deg[vlab[i]] += 1
            if rep[vlab[i]] < 0:
                rep[vlab[i]] = i
        for v in range(nv):
            if deg[v] != 4:
                continue
            t = rep[v] // 4
            s = rep[v] % 4
            if star(adj, glu, 3, t, s, T, phi):
                out[m, 0] = 3
                out[m, 1] = v
                out[m, 2] = t
                out[m, 3] = s
                m += 1
    return out[:m]


@njit(cache=True)
def apply_handle(adj, glu, kind, tet, sub):
    T = np.empty(5, dtype=np.int64)
    phi = np.empty((5, 5), dtype=np.int64)
    ok = star(adj, glu, kind, tet, sub, T, phi)
    if not ok:
        return False, adj, glu
    a2, g2 = apply_star(adj, glu, kind, T, phi)
    return True, a2, g2


@njit(cache=True, nogil=True)
def expand_batch(vals, offsets, kinds_mask, max_tets):
    """Decode each signature, apply every enabled move and encode the result.

    Children with more than ``max_tets`` tetrahedra are skipped when
    ``max_tets`` is positive.  Returns concatenated child signatures (as
    ASCII codes), their offsets, the index of each child's parent within
    the batch, the move kind and the child's tetrahedron count.
    """
    nparents = offsets.shape[0] - 1
    cap = 1024
    buf = np.empty(cap * 16, dtype=np.uint8)
    coff = np.zeros(cap + 1, dtype=np.int64)
    cpar = np.empty(cap, dtype=np.int64)
    ckind = np.empty(cap, dtype=np.int64)
    ctets = np.empty(cap, dtype=np.int64)
    nc = 0
    used = 0
    for i in range(nparents):
        st, pos, adj, glu = decode(vals[offsets[i]:offsets[i + 1]])
        handles = move_loci(adj, glu, kinds_mask)
        n = adj.shape[0]
        for h in range(handles.shape[0]):
            kind = handles[h, 0]
            k = KIND_DIM[kind]
            n2 = n - (4 - k) + k + 1
            if max_tets > 0 and n2 > max_tets:
                continue
            ok, a2, g2 = apply_handle(adj, glu, kind, handles[h, 2], handles[h, 3])
            sig = encode(a2, g2)
            L = sig.shape[0]
            if nc + 1 > cap:
                cap *= 2
                coff2 = np.zeros(cap + 1, dtype=np.int64)
                coff2[:nc + 1] = coff[:nc + 1]
                coff = coff2
                t1 = np.empty(cap, dtype=np.int64)
                t1[:nc] = cpar[:nc]
                cpar = t1
                t2 = np.empty(cap, dtype=np.int64)
                t2[:nc] = ckind[:nc]
                ckind = t2
                t3 = np.empty(cap, dtype=np.int64)
                t3[:nc] = ctets[:nc]
                ctets = t3
            if used + L > buf.shape[0]:
                b2 = np.empty(max(2 * buf.shape[0], used + L), dtype=np.uint8)
                b2[:used] = buf[:used]
                buf = b2
            for j in range(L):
                buf[used + j] = VAL_TO_ASCII[sig[j]]
            used += L
            cpar[nc] = i
            ckind[nc] = kind
            ctets[nc] = n2
            nc += 1
            coff[nc] = used
    return buf[:used], coff[:nc + 1], cpar[:nc], ckind[:nc], ctets[:nc]

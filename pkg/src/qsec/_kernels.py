"""
Hot loops with a numba path and a pure-numpy path.

Set ``QSEC_NO_NUMBA=1`` (or run without numba installed) to use numpy.
Both paths return the same values; the numba path is just faster.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def use_numba():
    return HAVE_NUMBA and os.environ.get("QSEC_NO_NUMBA", "0") not in ("1", "true", "yes")


# ------------------------------------------------------- qubit basis grid


@njit(cache=True)
def _h2(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x)


@njit(cache=True)
def _grid_info_nb(probs, r00, r11, r01re, r01im, thetas, cphi, sphi):
    # I(S;E) = H(E) - sum_s p_s H(E|s) for a two-outcome measurement
    ns = probs.shape[0]
    best = -1.0
    bi = 0
    bj = 0
    for i in range(thetas.shape[0]):
        c = np.cos(0.5 * thetas[i])
        s = np.sin(0.5 * thetas[i])
        c2 = c * c
        s2 = s * s
        cs2 = 2.0 * c * s
        for j in range(cphi.shape[0]):
            pe0 = 0.0
            cond = 0.0
            for k in range(ns):
                v = c2 * r00[k] + s2 * r11[k] + cs2 * (r01re[k] * cphi[j] - r01im[k] * sphi[j])
                v = min(max(v, 0.0), 1.0)
                pe0 += probs[k] * v
                cond += probs[k] * _h2(v)
            info = _h2(pe0) - cond
            if info > best + 1e-15:
                best = info
                bi = i
                bj = j
    return best, bi, bj


def _h2_np(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x > 0) & (x < 1), h, 0.0)


def _grid_info_np(probs, r00, r11, r01re, r01im, thetas, cphi, sphi):
    best, bi, bj = -1.0, 0, 0
    ps = probs[:, None]
    for i, th in enumerate(thetas):
        c, s = np.cos(0.5 * th), np.sin(0.5 * th)
        q = (c * c * r00[:, None] + s * s * r11[:, None]
             + 2 * c * s * (r01re[:, None] * cphi[None, :] - r01im[:, None] * sphi[None, :]))
        q = np.clip(q, 0.0, 1.0)
        info = _h2_np((ps * q).sum(axis=0)) - (ps * _h2_np(q)).sum(axis=0)
        # same scan order and strict-improvement rule as the compiled loop
        j = 0
        while True:
            above = np.flatnonzero(info[j:] > best + 1e-15)
            if above.size == 0:
                break
            j += above[0]
            best, bi, bj = float(info[j]), i, j
            j += 1
    return best, bi, bj


def qubit_grid_info(probs, rhos, thetas, phis):
    """
    Best mutual information over rank-1 qubit bases on a (theta, phi) grid.

    The basis is ``{|n>, |-n>}`` with ``|n> = (cos(theta/2), e^{i phi} sin(theta/2))``.

    :return: ``(best_info, theta, phi)``.
    """
    probs = np.ascontiguousarray(probs, dtype=float)
    rhos = np.asarray(rhos, dtype=complex)
    args = (
        probs,
        np.ascontiguousarray(rhos[:, 0, 0].real),
        np.ascontiguousarray(rhos[:, 1, 1].real),
        np.ascontiguousarray(rhos[:, 0, 1].real),
        np.ascontiguousarray(rhos[:, 0, 1].imag),
        np.ascontiguousarray(thetas, dtype=float),
        np.cos(np.asarray(phis, dtype=float)),
        np.sin(np.asarray(phis, dtype=float)),
    )
    f = _grid_info_nb if use_numba() else _grid_info_np
    best, i, j = f(*args)
    return float(best), float(thetas[i]), float(phis[j])


# ------------------------------------------------------- codeword weights


_POP16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


@njit(cache=True)
def _min_weight_nb(rows, k, pop16):
    best = 1 << 62
    cw = np.uint64(0)
    mask = np.uint64(0xFFFF)
    for g in range(1, 1 << k):
        # Gray code: flip the row at the lowest set bit of g
        low = 0
        while not (g >> low) & 1:
            low += 1
        cw ^= rows[low]
        w = (pop16[cw & mask] + pop16[(cw >> np.uint64(16)) & mask]
             + pop16[(cw >> np.uint64(32)) & mask] + pop16[cw >> np.uint64(48)])
        if w < best:
            best = w
    return best


def _min_weight_np(rows, k):
    cw = np.zeros(1, dtype=np.uint64)
    for r in rows[:k]:
        cw = np.concatenate([cw, cw ^ np.uint64(r)])
    return int(np.bitwise_count(cw[1:]).min())


def min_codeword_weight(rows):
    """Minimum Hamming weight over nonzero combinations of packed rows."""
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    k = len(rows)
    if k == 0:
        raise ValueError("empty generator")
    if use_numba():
        return int(_min_weight_nb(rows, k, _POP16))
    return _min_weight_np(rows, k)


# ------------------------------------------------------- coset leaders


@njit(cache=True)
def _coset_leaders_nb(cols, n, r):
    size = 1 << r
    leader = np.full(size, -1, dtype=np.int64)
    weight = np.full(size, n + 1, dtype=np.int64)
    tie = np.zeros(size, dtype=np.bool_)
    syn = np.int64(0)
    e = np.int64(0)
    for g in range(1 << n):
        if g > 0:
            low = 0
            while not (g >> low) & 1:
                low += 1
            e ^= np.int64(1) << low
            syn ^= cols[low]
        w = 0
        x = e
        while x:
            x &= x - 1
            w += 1
        if w < weight[syn] or (w == weight[syn] and e < leader[syn]):
            if w == weight[syn]:
                tie[syn] = True
            else:
                tie[syn] = False
            weight[syn] = w
            leader[syn] = e
        elif w == weight[syn]:
            tie[syn] = True
    return leader, tie


def _coset_leaders_np(cols, n, r):
    syn = np.zeros(1, dtype=np.int64)
    for c in cols[:n]:
        syn = np.concatenate([syn, syn ^ c])
    pats = np.arange(1 << n, dtype=np.int64)
    w = np.bitwise_count(pats.astype(np.uint64)).astype(np.int64)
    order = np.lexsort((pats, w, syn))
    syn_s, w_s, pat_s = syn[order], w[order], pats[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = syn_s[1:] != syn_s[:-1]
    size = 1 << r
    leader = np.full(size, -1, dtype=np.int64)
    leader[syn_s[first]] = pat_s[first]
    tie = np.zeros(size, dtype=bool)
    idx = np.flatnonzero(first)
    nxt = idx + 1
    ok = nxt < len(order)
    same = np.zeros(len(idx), dtype=bool)
    same[ok] = (syn_s[nxt[ok]] == syn_s[idx[ok]]) & (w_s[nxt[ok]] == w_s[idx[ok]])
    tie[syn_s[idx]] = same
    return leader, tie


def coset_leaders(cols, n, r):
    """
    Minimum-weight coset leader for each of the ``2^r`` syndromes.

    :param cols: packed parity-check columns (bit ``j`` = row ``j``).
    :return: ``(leader, tie)``; leader ``-1`` marks an unreachable syndrome,
        ties are broken toward the numerically smallest pattern.
    """
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if use_numba():
        return _coset_leaders_nb(cols, n, r)
    return _coset_leaders_np(cols, n, r)

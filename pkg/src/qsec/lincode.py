"""
Binary linear codes over GF(2).

Bit strings are ``uint8`` arrays at the API boundary. Internally a length-n
word is packed into an integer with bit ``j`` holding position ``j``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from . import _kernels

MAX_EXACT_K = 24
TABLE_MAX_N = 20
SEARCH_MAX_N = 28


# ------------------------------------------------------------- GF(2) algebra


def as_bits(x, n=None):
    a = np.asarray(x, dtype=np.uint8) & 1
    if n is not None and a.shape[-1] != n:
        raise ValueError(f"expected length {n}")
    return a


def pack(bits):
    """Pack a bit vector (or rows of a matrix) into integers."""
    bits = np.asarray(bits, dtype=np.uint8)
    weights = 1 << np.arange(bits.shape[-1], dtype=np.uint64)
    return (bits.astype(np.uint64) * weights).sum(axis=-1)


def unpack(x, n):
    x = np.asarray(x, dtype=np.uint64)
    return ((x[..., None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)


def rref(m):
    """Reduced row echelon form over GF(2); returns ``(R, pivot_columns)``."""
    a = as_bits(m).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        hit = np.flatnonzero(a[:, c])
        hit = hit[hit != r]
        a[hit] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m):
    m = as_bits(m)
    if m.size == 0:
        return 0
    return len(rref(m)[1])


def nullspace(m, n=None):
    """Basis (rows) of ``{x : M x = 0}``."""
    m = as_bits(m)
    n = m.shape[1] if n is None else n
    if m.size == 0:
        return np.eye(n, dtype=np.uint8)
    r, piv = rref(m)
    free = [c for c in range(n) if c not in piv]
    out = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        out[i, f] = 1
        for row, pc in enumerate(piv):
            out[i, pc] = r[row, f]
    return out


def solve(a, b):
    """One solution ``x`` of ``A x = b`` over GF(2), or ``None``."""
    a, b = as_bits(a), as_bits(b)
    aug = np.concatenate([a, b[:, None]], axis=1)
    r, piv = rref(aug)
    if a.shape[1] in piv:
        return None
    x = np.zeros(a.shape[1], dtype=np.uint8)
    for row, pc in enumerate(piv):
        x[pc] = r[row, -1]
    return x


def span_words(rows):
    """All ``2^k`` packed combinations of packed rows (doubling)."""
    cw = np.zeros(1, dtype=np.uint64)
    for r in np.asarray(rows, dtype=np.uint64):
        cw = np.concatenate([cw, cw ^ r])
    return cw


def weight(x):
    return int(np.asarray(x, dtype=np.uint8).sum())


# ------------------------------------------------------------- codes


@dataclass(eq=False)
class BinaryLinearCode:
    generator: np.ndarray
    parity_check: np.ndarray = field(default=None)

    def __post_init__(self):
        g = as_bits(self.generator)
        if g.ndim != 2:
            raise ValueError("generator must be a matrix")
        if rank(g) != g.shape[0]:
            raise ValueError("generator rows are not independent")
        h = nullspace(g) if self.parity_check is None else as_bits(self.parity_check)
        if h.shape[1] != g.shape[1] or rank(h) != g.shape[1] - g.shape[0] or h.shape[0] != rank(h):
            raise ValueError("parity check has the wrong rank")
        if np.any((g.astype(int) @ h.T.astype(int)) % 2):
            raise ValueError("G H^T != 0")
        self.generator, self.parity_check = g, h

    @property
    def n(self):
        return self.generator.shape[1]

    @property
    def k(self):
        return self.generator.shape[0]

    @property
    def r(self):
        return self.n - self.k

    @cached_property
    def min_distance(self):
        return min_distance(self)

    def dual(self):
        return BinaryLinearCode(self.parity_check, self.generator)

    def encode(self, msg):
        return (as_bits(msg, self.k).astype(int) @ self.generator) % 2

    def syndrome(self, word):
        return ((self.parity_check.astype(int) @ as_bits(word, self.n)) % 2).astype(np.uint8)

    def contains(self, word):
        return not self.syndrome(word).any()

    @cached_property
    def _coset_table(self):
        cols = pack(self.parity_check.T).astype(np.int64)
        return _kernels.coset_leaders(cols, self.n, self.r)

    def to_json(self):
        width = (self.n + 3) // 4
        return {"n": self.n, "k": self.k,
                "generator_rows_hex": [format(int(x), f"0{width}x") for x in pack(self.generator)]}

    @classmethod
    def from_json(cls, obj):
        n = obj["n"]
        rows = np.array([int(h, 16) for h in obj["generator_rows_hex"]], dtype=np.uint64)
        code = cls(unpack(rows, n))
        if code.k != obj["k"]:
            raise ValueError("k does not match the generator")
        return code


def random_linear_code(n, k, seed):
    """Uniformly random ``[n, k]`` code (resamples until the generator has full rank)."""
    if not 0 < k < n:
        raise ValueError("need 0 < k < n")
    if n > 64:
        raise ValueError("n is limited to 64 bits")
    rng = np.random.default_rng(seed)
    while True:
        g = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
        if rank(g) == k:
            return BinaryLinearCode(g)


def hamming_code(r=3):
    n = 2 ** r - 1
    h = unpack(np.arange(1, n + 1, dtype=np.uint64), r).T
    return BinaryLinearCode(nullspace(h), h)


def repetition_code(n):
    return BinaryLinearCode(np.ones((1, n), dtype=np.uint8))


def min_distance(code):
    """Exact minimum distance by enumerating all ``2^k - 1`` nonzero codewords."""
    if code.k > MAX_EXACT_K:
        raise ValueError(f"k = {code.k} exceeds {MAX_EXACT_K}")
    return _kernels.min_codeword_weight(pack(code.generator))


def weight_enumerator(code):
    """``A[w]`` = number of codewords of weight ``w``."""
    if code.k > MAX_EXACT_K:
        raise ValueError(f"k = {code.k} exceeds {MAX_EXACT_K}")
    w = np.bitwise_count(span_words(pack(code.generator)))
    return np.bincount(w.astype(np.int64), minlength=code.n + 1)


@dataclass(frozen=True)
class DecodeResult:
    codeword: np.ndarray
    error: np.ndarray
    weight: int
    tie: bool
    within_radius: bool


def _search_leader(code, syn, max_weight):
    h = pack(code.parity_check.T)
    target = int(pack(syn))
    for w in range(max_weight + 1):
        found = []
        for pos in combinations(range(code.n), w):
            s = 0
            for p_ in pos:
                s ^= int(h[p_])
            if s == target:
                found.append(sum(1 << p_ for p_ in pos))
                if len(found) > 1:
                    break
        if found:
            return min(found), w, len(found) > 1
    return None, None, False


def syndrome_decode(word, code, max_weight=None):
    """
    Nearest-codeword decoding by coset leaders.

    Uses a full leader table for ``n <= 20`` and a bounded exhaustive search
    (up to ``max_weight``, default ``n - k``) for ``n <= 28``. Ties go to the
    numerically smallest error pattern and set ``tie``. ``within_radius``
    says the leader weight is at most ``(d - 1) // 2``.

    Returns ``None`` when the bounded search finds no leader.
    """
    word = as_bits(word, code.n)
    syn = code.syndrome(word)
    if code.n <= TABLE_MAX_N:
        leader, tie = code._coset_table
        e_int = int(leader[int(pack(syn))])
        tie_flag = bool(tie[int(pack(syn))])
    elif code.n <= SEARCH_MAX_N:
        e_int, _, tie_flag = _search_leader(code, syn, code.r if max_weight is None else max_weight)
        if e_int is None:
            return None
    else:
        raise ValueError(f"n = {code.n} exceeds {SEARCH_MAX_N}")
    e = unpack(np.uint64(e_int), code.n)
    w = weight(e)
    t = (code.min_distance - 1) // 2 if code.k <= MAX_EXACT_K else -1
    return DecodeResult(word ^ e, e, w, tie_flag, w <= t)


# ------------------------------------------------------------- nested pairs


@dataclass(eq=False)
class NestedCodePair:
    """
    ``C2 subset C1``. ``message_matrix`` has ``k1 - k2`` rows completing the
    checks of ``C1`` to checks of ``C2``; on ``C1`` its kernel is ``C2``.
    """

    c1: BinaryLinearCode
    c2: BinaryLinearCode

    def __post_init__(self):
        if self.c1.n != self.c2.n:
            raise ValueError("codes have different lengths")
        if np.any((self.c1.parity_check.astype(int) @ self.c2.generator.T.astype(int)) % 2):
            raise ValueError("C2 is not contained in C1")
        rows = list(self.c1.parity_check)
        base = rank(np.array(rows)) if rows else 0
        extra = []
        for h in self.c2.parity_check:
            trial = np.array(rows + extra + [h])
            if rank(trial) > base + len(extra):
                extra.append(h)
        self.message_matrix = np.array(extra, dtype=np.uint8).reshape(-1, self.c1.n)

    @property
    def message_bits(self):
        return self.c1.k - self.c2.k

    def message_of(self, u):
        return ((self.message_matrix.astype(int) @ as_bits(u, self.c1.n)) % 2).astype(np.uint8)


def nested_pair(n, k1, k2, seed):
    """Random pair: ``C2`` spanned by the first ``k2`` rows of a random ``[n, k1]`` generator."""
    if not 0 < k2 < k1 < n:
        raise ValueError("need 0 < k2 < k1 < n")
    c1 = random_linear_code(n, k1, seed)
    return NestedCodePair(c1, BinaryLinearCode(c1.generator[:k2]))


def coset_broadcast_encode(message, pair, rng):
    """Uniform ``u`` in ``C1`` whose message parity equals ``message``."""
    message = as_bits(message, pair.message_bits)
    g1 = pair.c1.generator
    a = (pair.message_matrix.astype(int) @ g1.T.astype(int)) % 2
    x = solve(a, message)
    if x is None:
        raise ValueError("message map is not surjective")
    u = (x.astype(int) @ g1) % 2
    coeff = rng.integers(0, 2, size=pair.c2.k)
    u = (u + coeff @ pair.c2.generator) % 2
    return u.astype(np.uint8)


@dataclass(frozen=True)
class BroadcastResult:
    message: np.ndarray
    error: np.ndarray
    decode: DecodeResult


def coset_broadcast_decode(announced, pair):
    """
    XOR all announcements, correct the accumulated error with ``C1``, and
    read off the message parity.
    """
    total = np.bitwise_xor.reduce(np.array([as_bits(a, pair.c1.n) for a in announced]), axis=0)
    dec = syndrome_decode(total, pair.c1)
    if dec is None:
        raise RuntimeError("uncorrectable accumulated error")
    return BroadcastResult(pair.message_of(dec.codeword), dec.error, dec)


# ------------------------------------------------------------- PA distances


@dataclass(frozen=True)
class PaScheme:
    ecc: np.ndarray
    pa: np.ndarray

    def __post_init__(self):
        ecc, pa = as_bits(self.ecc), as_bits(self.pa)
        ecc = ecc.reshape(-1, pa.shape[1]) if ecc.size == 0 else ecc
        if ecc.shape[1] != pa.shape[1]:
            raise ValueError("strings have different lengths")
        both = np.concatenate([ecc, pa])
        if rank(both) != len(both):
            raise ValueError("ECC and PA strings must be linearly independent")
        object.__setattr__(self, "ecc", ecc)
        object.__setattr__(self, "pa", pa)

    @property
    def n(self):
        return self.pa.shape[1]

    @property
    def r(self):
        return len(self.ecc)

    @property
    def m(self):
        return len(self.pa)


def _coset_min_weight(v, rows):
    words = span_words(pack(rows)) if len(rows) else np.zeros(1, dtype=np.uint64)
    return int(np.bitwise_count(words ^ np.uint64(pack(v))).min())


def pa_min_distance(scheme, v=None, convention="union"):
    """
    Distance of a privacy-amplification string from the span of other strings.

    ``convention="ecc"``: ``min |v ^ x|`` over ``x`` in the ECC span.
    ``convention="union"``: ``x`` ranges over the span of the ECC strings and
    every other PA string. With ``v=None`` the union distance is minimized
    over all nonzero PA combinations, which is the minimum weight of the
    augmented span outside the ECC span.
    """
    if scheme.r + scheme.m > MAX_EXACT_K:
        raise ValueError("span too large to enumerate")
    if v is None:
        if convention != "union":
            raise ValueError("v=None only defined for the union convention")
        ecc_words = span_words(pack(scheme.ecc)) if scheme.r else np.zeros(1, dtype=np.uint64)
        pa_words = span_words(pack(scheme.pa))[1:]
        best = scheme.n
        for w in pa_words:
            best = min(best, int(np.bitwise_count(ecc_words ^ w).min()))
        return best
    v = as_bits(v, scheme.n)
    if convention == "ecc":
        return _coset_min_weight(v, scheme.ecc)
    if convention != "union":
        raise ValueError(f"unknown convention {convention!r}")
    others = [row for row in scheme.pa if not np.array_equal(row, v)]
    rows = np.concatenate([scheme.ecc, np.array(others, dtype=np.uint8).reshape(-1, scheme.n)])
    return _coset_min_weight(v, rows)


# ------------------------------------------------------------- rates


def binary_entropy(x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def threshold_solve(tol=1e-8):
    """Root of ``1 - H2(2p) - H2(p)`` on ``(0, 1/4)`` by bisection."""
    lo, hi = 1e-12, 0.25
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if 1 - binary_entropy(2 * mid) - binary_entropy(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def secret_rate_limit(p_a):
    """Asymptotic ``1 - H2(2 p_a) - H2(p_a)``."""
    return 1 - binary_entropy(min(2 * p_a, 1.0)) - binary_entropy(p_a)


def rate_region_check(p_a, eps_rel, eps_sec, n, r, m):
    """
    Evaluate the two code-existence inequalities.

    Returns a dict with ``reliability`` (``H2(p_a+eps_rel+1/n) < r/n``),
    ``secrecy`` (``H2(2p_a+2eps_sec) + H2(p_a+eps_rel+1/n) < 1 - m/n``),
    their slacks, and ``pass``.
    """
    x = p_a + eps_rel + 1.0 / n
    y = 2 * p_a + 2 * eps_sec
    if x > 0.5 or y > 0.5:
        # H2 is not monotone past 1/2; the region is empty there
        return {"reliability": False, "secrecy": False, "reliability_slack": -1.0,
                "secrecy_slack": -1.0, "pass": False}
    h_rel = binary_entropy(x)
    s1 = r / n - h_rel
    s2 = 1 - m / n - binary_entropy(y) - h_rel
    return {"reliability": s1 > 0, "secrecy": s2 > 0, "reliability_slack": s1,
            "secrecy_slack": s2, "pass": s1 > 0 and s2 > 0}


def rate_region(p_a, eps_rel, eps_sec, n, steps=200):
    """Grid of admissible ``(r/n, m/n)`` pairs."""
    pts = []
    for i in range(1, steps):
        for j in range(1, steps):
            r, m = i * n / steps, j * n / steps
            if r + m < n and rate_region_check(p_a, eps_rel, eps_sec, n, r, m)["pass"]:
                pts.append((r / n, m / n))
    return pts


def gallager_constant(delta):
    return 1.0 / (1 - 2 * delta) * math.sqrt((1 - delta) / (2 * math.pi * delta))


def gallager_bound(n, r, delta):
    """``c(delta)/sqrt(n) * 2^{n (H2(delta) - r/n)}`` bounding ``P(d/n < delta)``."""
    if not 0 < delta < 0.5:
        raise ValueError("need 0 < delta < 1/2")
    return gallager_constant(delta) / math.sqrt(n) * 2 ** (n * (binary_entropy(delta) - r / n))


def h1_bound(n, delta, p_a):
    """``2 exp(-(n/4)(delta - 1/n - 2 p_a)^2)`` (conservative distance policy)."""
    return 2 * math.exp(-(n / 4) * (delta - 1 / n - 2 * p_a) ** 2)


def f1_bound(n, delta, p_a):
    """``2 exp(-(n/4)(delta - 1/n - p_a)^2)`` (random-code distance policy)."""
    return 2 * math.exp(-(n / 4) * (delta - 1 / n - p_a) ** 2)


def required_distance(p_a, eps, n, policy="conservative"):
    """Smallest admissible ECC distance under a policy."""
    if policy == "conservative":
        return math.ceil(2 * (p_a + eps) * n + 1 - 1e-12)
    if policy == "rlc":
        return math.ceil((p_a + eps) * n + 1 - 1e-12)
    raise ValueError(f"unknown policy {policy!r}")


def nested_pair_with_distance(n, k1, k2, d_min, seed=0, budget=5000):
    """Rejection-sample ``nested_pair`` until ``C1`` has distance ``>= d_min``."""
    for t in range(budget):
        pair = nested_pair(n, k1, k2, (seed, t))
        if pair.c1.min_distance >= d_min:
            return pair
    raise RuntimeError(f"no [{n},{k1}] code with distance {d_min} in {budget} draws")

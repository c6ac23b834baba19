"""
Used-bits BB84: a round simulator with pluggable attacks, the 0/1
symmetrization of an attack, Eve's purified states in the ``eta`` basis,
trace-norm bounds on her information, and sampling checks.

Conventions
-----------
* ``2n`` qubits per round. ``b[k] = 0`` is the z basis, ``1`` the x basis.
* ``s`` has exactly ``n`` zeros; zeros mark the test bits.
* An attack on ``N`` message qubits is an ``AttackUnitary`` on
  ``probe (x) message`` written in the z basis. Qubit 0 is the most
  significant bit of a message index, and information bits keep their
  order inside ``i_I``.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .infobounds import AttackUnitary, QuantumSource, accessible_info_oracle
from .lincode import (
    BinaryLinearCode,
    PaScheme,
    binary_entropy,
    nullspace,
    pa_min_distance,
    rank,
    required_distance,
    solve,
    syndrome_decode,
)
from .qlinalg import MAX_DIM, trace_norm

MAX_EXACT_QUBITS = 4
BLOCK_MAX = 20
SCHEME_BUDGET = 200
ATTACK_KINDS = ("none", "intercept_resend", "swap", "half_swap", "custom")
BASIS_POLICIES = ("random", "z", "x")

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
_XZ = np.array([[0.0, -1.0], [1.0, 0.0]])  # X @ Z


def _popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


def _sign_matrix(n):
    idx = np.arange(2 ** n)
    return (-1.0) ** (_popcount(idx[:, None] & idx[None, :]) & 1)


def _bits_to_int(bits):
    out = 0
    for x in bits:
        out = (out << 1) | int(x)
    return out


def _int_to_bits(x, n):
    return np.array([(x >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.uint8)


def _kron_all(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


# ------------------------------------------------------------- schemes


@dataclass(frozen=True, eq=False)
class BlockScheme:
    """
    ECC and PA strings as a direct sum of blocks.

    Each block is a ``PaScheme`` on its own positions, so block distances
    are exact and the whole scheme decodes block by block.
    """

    blocks: tuple
    rejections: int = 0
    rate_region_ok: bool = True

    def __post_init__(self):
        codes = []
        for blk in self.blocks:
            codes.append(BinaryLinearCode(nullspace(blk.ecc), blk.ecc) if blk.r else None)
        object.__setattr__(self, "_codes", tuple(codes))

    @classmethod
    def single(cls, scheme):
        if scheme.n > 28:
            raise ValueError("a single-block scheme must have n <= 28 to decode")
        return cls((scheme,))

    @property
    def sizes(self):
        return tuple(b.n for b in self.blocks)

    @property
    def n(self):
        return sum(self.sizes)

    @property
    def r(self):
        return sum(b.r for b in self.blocks)

    @property
    def m(self):
        return sum(b.m for b in self.blocks)

    def _split(self, x):
        out, pos = [], 0
        for size in self.sizes:
            out.append(x[pos:pos + size])
            pos += size
        return out

    def parities(self, x):
        """ECC parities ``xi`` of an information string."""
        parts = [(b.ecc.astype(int) @ p) % 2 for b, p in zip(self.blocks, self._split(x))]
        return np.concatenate(parts).astype(np.uint8) if parts else np.zeros(0, np.uint8)

    def key(self, x):
        parts = [(b.pa.astype(int) @ p) % 2 for b, p in zip(self.blocks, self._split(x))]
        return np.concatenate(parts).astype(np.uint8)

    def correct(self, y, xi):
        """
        Bob's correction: the lowest-weight ``e`` with ``ecc (y ^ e) = xi``.

        Returns ``(corrected, ok)``; ``ok`` is False if some block syndrome
        has no leader within the decoder's reach.
        """
        out, ok, pos_xi = [], True, 0
        for blk, code, part in zip(self.blocks, self._codes, self._split(y)):
            xi_b = xi[pos_xi:pos_xi + blk.r]
            pos_xi += blk.r
            if code is None:
                out.append(part)
                continue
            shift = solve(blk.ecc, xi_b)
            dec = syndrome_decode(part ^ shift, code)
            if dec is None:
                ok = False
                out.append(part)
            else:
                out.append(part ^ dec.error)
        return np.concatenate(out).astype(np.uint8), ok

    def ecc_distance(self):
        return min(code.min_distance if code is not None else 1 for code in self._codes)

    def pa_distance(self):
        return min(pa_min_distance(b) for b in self.blocks)


def _block_sizes(n, block_max):
    count = -(-n // block_max)
    base, extra = divmod(n, count)
    return [base + 1] * extra + [base] * (count - extra)


def _block_rates(size, p_a, eps_rel, eps_sec):
    x = p_a + eps_rel + 1.0 / size
    y = 2 * (p_a + eps_sec)
    h_rel = binary_entropy(min(x, 0.5))
    r = min(size - 2, math.floor(h_rel * size) + 1)
    slack = 1 - binary_entropy(min(y, 0.5)) - h_rel
    m = math.ceil(slack * size) - 1
    ok = x < 0.5 and y < 0.5 and m >= 1
    return r, max(1, min(m, size - r - 1)), ok


def _sample_block(size, p_a, eps_rel, eps_sec, policy, rng):
    r0, m, ok = _block_rates(size, p_a, eps_rel, eps_sec)
    d_req = required_distance(p_a, eps_rel, size, policy)
    v_req = math.ceil(2 * (p_a + eps_sec) * size - 1e-12)
    rejected = 0
    for r in range(r0, size - m):
        for _ in range(SCHEME_BUDGET):
            rows = rng.integers(0, 2, size=(r + m, size), dtype=np.uint8)
            if rank(rows) < r + m:
                rejected += 1
                continue
            pa = PaScheme(rows[:r], rows[r:])
            code = BinaryLinearCode(nullspace(pa.ecc), pa.ecc)
            if code.min_distance >= d_req and pa_min_distance(pa) >= v_req:
                return pa, rejected, ok and r == r0
            rejected += 1
    raise ValueError(f"no ECC/PA scheme of length {size} meets the distance constraints")


@lru_cache(maxsize=64)
def generate_scheme(n, p_allowed, eps_rel, eps_sec, policy="conservative", block_max=BLOCK_MAX, seed=0):
    """
    Seeded random scheme meeting the ECC distance and PA distance
    constraints, built as a direct sum of blocks of length ``<= block_max``.

    ``r`` and ``m`` per block come from the finite-length rate inequalities;
    ``m`` is clamped to at least 1 and ``rate_region_ok`` records whether
    the clamp was needed.
    """
    rng = np.random.default_rng(seed)
    blocks, rejected, ok = [], 0, True
    for size in _block_sizes(n, block_max):
        blk, rej, blk_ok = _sample_block(size, p_allowed, eps_rel, eps_sec, policy, rng)
        blocks.append(blk)
        rejected += rej
        ok = ok and blk_ok
    return BlockScheme(tuple(blocks), rejected, ok)


# ------------------------------------------------------------- config


@dataclass(frozen=True)
class ProtocolConfig:
    """
    Parameters of one used-bits BB84 run.

    ``scheme`` may be a ``PaScheme``, a ``BlockScheme`` or ``None`` (generate
    a seeded scheme with ``scheme_seed``). With ``check_distances`` the ECC
    and PA distances must meet the constraints of ``distance_policy``.
    """

    n: int
    p_allowed: float
    eps_rel: float = 0.005
    eps_sec: float = 0.005
    scheme: object = None
    distance_policy: str = "conservative"
    scheme_seed: int = 0
    block_max: int = BLOCK_MAX
    check_distances: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.p_allowed < 0.5:
            raise ValueError("p_allowed must lie in [0, 1/2)")
        if self.eps_rel <= 0 or self.eps_sec <= 0:
            raise ValueError("eps_rel and eps_sec must be positive")
        if self.p_allowed + self.eps_sec >= 0.5:
            raise ValueError("need p_allowed + eps_sec < 1/2")
        if self.distance_policy not in ("conservative", "rlc"):
            raise ValueError(f"unknown distance policy {self.distance_policy!r}")
        if self.scheme is not None:
            sch = self.scheme if isinstance(self.scheme, BlockScheme) else BlockScheme.single(self.scheme)
            if sch.n != self.n:
                raise ValueError("scheme length does not match n")
            object.__setattr__(self, "scheme", sch)
            if self.check_distances:
                self._check(sch)

    def _check(self, sch):
        for blk, size in zip(sch.blocks, sch.sizes):
            d_req = required_distance(self.p_allowed, self.eps_rel, size, self.distance_policy)
            v_req = math.ceil(2 * (self.p_allowed + self.eps_sec) * size - 1e-12)
            code_d = BinaryLinearCode(nullspace(blk.ecc), blk.ecc).min_distance if blk.r else 1
            if code_d < d_req:
                raise ValueError(f"ECC distance {code_d} < required {d_req}")
            if pa_min_distance(blk) < v_req:
                raise ValueError(f"PA distance below required {v_req}")

    def resolved_scheme(self):
        if self.scheme is not None:
            return self.scheme
        return generate_scheme(self.n, self.p_allowed, self.eps_rel, self.eps_sec,
                               self.distance_policy, self.block_max, self.scheme_seed)


@dataclass(frozen=True)
class Attack:
    """
    Eve's strategy. ``noise`` adds i.i.d. bit flips in Bob's basis on top of
    the attack; all such noise is counted as Eve's.
    """

    kind: str = "none"
    basis_policy: str = "random"
    unitary: AttackUnitary = None
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.basis_policy not in BASIS_POLICIES:
            raise ValueError(f"unknown basis policy {self.basis_policy!r}")
        if not 0 <= self.noise <= 0.5:
            raise ValueError("noise must lie in [0, 1/2]")
        if self.kind == "custom":
            if not isinstance(self.unitary, AttackUnitary):
                raise ValueError("custom attacks need an AttackUnitary")
            if self.unitary.n > MAX_EXACT_QUBITS:
                raise ValueError(f"custom attacks act on at most {MAX_EXACT_QUBITS} qubits")


@dataclass(frozen=True)
class RoundTranscriptBB84:
    b: np.ndarray
    i: np.ndarray
    j: np.ndarray
    s: np.ndarray
    i_T: np.ndarray
    j_T: np.ndarray
    c_T: np.ndarray
    p_test: float
    outcome: str
    info_errors: int
    xi: np.ndarray = None
    alice_key: np.ndarray = None
    bob_key: np.ndarray = None
    eve_key: np.ndarray = None
    decode_ok: bool = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("b", "i", "j", "s", "i_T", "j_T", "c_T", "xi", "alice_key", "bob_key", "eve_key"):
            val = getattr(self, name)
            if val is not None:
                val = np.array(val, dtype=np.uint8)
                val.setflags(write=False)
                object.__setattr__(self, name, val)
        if np.any(self.c_T != (self.i_T ^ self.j_T)):
            raise ValueError("c_T must equal i_T ^ j_T")

    @property
    def passed(self):
        return self.outcome == "pass"

    @property
    def keys_match(self):
        return self.passed and np.array_equal(self.alice_key, self.bob_key)

    def to_json(self):
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                out[k] = "".join(str(int(x)) for x in v)
            else:
                out[k] = v
        return out


# ------------------------------------------------------------- attacks


def basis_matrix(b):
    """``H^{b_0} (x) ... (x) H^{b_{N-1}}``."""
    return _kron_all([_H if x else np.eye(2) for x in b])


def components_in_basis(attack, b):
    """``E[i, j]`` of the attack when Alice and Bob both use bases ``b``."""
    if len(b) != attack.n:
        raise ValueError("basis string length must equal the attack width")
    E = attack.components()
    hb = basis_matrix(b)
    return np.einsum("ia,jb,abe->ije", hb, hb, E, optimize=True)


def _simulate_custom(attack, b, i, rng):
    E = components_in_basis(attack, b)
    amp = E[_bits_to_int(i)]
    probs = np.einsum("je,je->j", amp, amp.conj()).real
    j = rng.choice(len(probs), p=probs / probs.sum())
    return _int_to_bits(j, attack.n)


def _simulate_classical(attack, b, i, rng):
    N = len(b)
    if attack.kind == "none":
        return i.copy(), None, {}
    swapped = attack.kind == "swap" or (attack.kind == "half_swap" and rng.random() < 0.5)
    extras = {"swapped": bool(swapped)} if attack.kind == "half_swap" else {}
    if attack.kind in ("swap", "half_swap"):
        if not swapped:
            return i.copy(), None, extras
        # random BB84 states to Bob: his outcome is uniform in his basis;
        # Eve measures the stored qubits after the bases are announced
        return rng.integers(0, 2, N, dtype=np.uint8), i.copy(), extras
    if attack.basis_policy == "random":
        eb = rng.integers(0, 2, N, dtype=np.uint8)
    else:
        eb = np.full(N, attack.basis_policy == "x", dtype=np.uint8)
    match = eb == b
    eve = np.where(match, i, rng.integers(0, 2, N, dtype=np.uint8)).astype(np.uint8)
    j = np.where(match, eve, rng.integers(0, 2, N, dtype=np.uint8)).astype(np.uint8)
    return j, eve, extras


def run_protocol(cfg, attack, seed=None, b=None, i=None):
    """
    Simulate one round: random ``i, b, s``, the attack, Bob's measurement in
    Alice's bases, the test, ECC parities, Bob's correction and the PA.

    ``b`` and ``i`` may be supplied (e.g. from ``full_bb84_reduction``).
    Aborting is a normal outcome.
    """
    rng = np.random.default_rng(seed)
    N = 2 * cfg.n
    b = rng.integers(0, 2, N, dtype=np.uint8) if b is None else np.asarray(b, dtype=np.uint8)
    i = rng.integers(0, 2, N, dtype=np.uint8) if i is None else np.asarray(i, dtype=np.uint8)
    if b.shape != (N,) or i.shape != (N,):
        raise ValueError("b and i must have 2n bits")
    s = np.ones(N, dtype=np.uint8)
    s[rng.choice(N, cfg.n, replace=False)] = 0
    if attack.kind == "custom":
        if attack.unitary.n != N:
            raise ValueError("custom attack width must equal 2n")
        j, eve, extras = _simulate_custom(attack.unitary, b, i, rng), None, {}
    else:
        j, eve, extras = _simulate_classical(attack, b, i, rng)
    if attack.noise > 0:
        j = j ^ (rng.random(N) < attack.noise).astype(np.uint8)
    test, info = s == 0, s == 1
    i_T, j_T = i[test], j[test]
    c_T = i_T ^ j_T
    p_test = float(c_T.sum()) / cfg.n
    info_errors = int((i[info] ^ j[info]).sum())
    base = dict(b=b, i=i, j=j, s=s, i_T=i_T, j_T=j_T, c_T=c_T, p_test=p_test,
                info_errors=info_errors, extras=extras)
    if p_test > cfg.p_allowed + 1e-12:
        return RoundTranscriptBB84(outcome="abort", **base)
    scheme = cfg.resolved_scheme()
    i_I, j_I = i[info], j[info]
    xi = scheme.parities(i_I)
    corrected, ok = scheme.correct(j_I, xi)
    eve_key = scheme.key(eve[info]) if eve is not None else None
    return RoundTranscriptBB84(outcome="pass", xi=xi, alice_key=scheme.key(i_I),
                               bob_key=scheme.key(corrected), eve_key=eve_key, decode_ok=ok, **base)


def run_trials(cfg, attack, trials, seed=0):
    """Independent rounds from spawned seeds, summarized."""
    seqs = np.random.SeedSequence(seed).spawn(trials)
    rounds = [run_protocol(cfg, attack, sq) for sq in seqs]
    passed = [t for t in rounds if t.passed]
    m = cfg.resolved_scheme().m if passed else 0
    mismatch = [not t.keys_match for t in passed]
    excess = [t.passed and t.info_errors / cfg.n > cfg.p_allowed + cfg.eps_sec for t in rounds]
    return {
        "trials": trials,
        "pass_rate": len(passed) / trials,
        "key_rate": len(passed) * m / (trials * 2 * cfg.n),
        "mismatch_rate": float(np.mean(mismatch)) if passed else 0.0,
        "info_error_rate": float(np.mean([t.info_errors for t in rounds])) / cfg.n,
        "excess_error_rate": float(np.mean(excess)),
        "rounds": rounds,
    }


def sweep(cfg, attack, p_values, trials, seed=0):
    """
    Rows ``{p_allowed, pass_rate, key_rate, mismatch_rate, bound_lhs, bound_rhs}``.

    ``bound_lhs`` is the observed rate of passing rounds whose information
    bits carry more than ``(p_allowed + eps_sec) n`` errors; ``bound_rhs`` is
    the sampling bound ``exp(-n eps_sec^2 / 2)`` on that event.
    """
    rows = []
    for p in p_values:
        c = ProtocolConfig(cfg.n, float(p), cfg.eps_rel, cfg.eps_sec, None, cfg.distance_policy,
                           cfg.scheme_seed, cfg.block_max)
        res = run_trials(c, attack, trials, seed)
        rows.append({
            "p_allowed": float(p),
            "pass_rate": res["pass_rate"],
            "key_rate": res["key_rate"],
            "mismatch_rate": res["mismatch_rate"],
            "bound_lhs": res["excess_error_rate"],
            "bound_rhs": math.exp(-0.5 * cfg.n * cfg.eps_sec ** 2),
        })
    return rows


def _circuit_unitary(n_qubits, ops):
    """Product of ``ops`` (applied in order); each op maps a basis index to ``[(index, amp)]``
    or is ``("h", q)`` for a Hadamard on qubit ``q``."""
    dim = 2 ** n_qubits
    u = np.eye(dim, dtype=complex)
    for op in ops:
        if op[0] == "h":
            q = op[1]
            g = np.kron(np.kron(np.eye(2 ** q), _H), np.eye(2 ** (n_qubits - q - 1)))
        else:
            g = np.zeros((dim, dim), dtype=complex)
            for x in range(dim):
                g[op[1](x), x] = 1.0
        u = g @ u
    return u


def _bit(x, q, nq):
    return (x >> (nq - 1 - q)) & 1


def _cnot(c, t, nq):
    return ("perm", lambda x: x ^ (_bit(x, c, nq) << (nq - 1 - t)))


def _cswap(c, a, b, nq):
    def f(x):
        if not _bit(x, c, nq) or _bit(x, a, nq) == _bit(x, b, nq):
            return x
        return x ^ (1 << (nq - 1 - a)) ^ (1 << (nq - 1 - b))

    return ("perm", f)


def swap_attack_unitary(N, half=False):
    """
    Swap attack as a unitary: each message qubit is exchanged with one half
    of a Bell pair held by Eve. With ``half=True`` a control qubit in
    ``|+>`` decides coherently whether the swap happens.

    Probe qubits are ``[control, A_0..A_{N-1}, B_0..B_{N-1}]``.
    """
    if N > 2:
        raise ValueError("exact swap attacks support at most 2 message qubits")
    nq = 1 + 3 * N
    ops = [("h", 0)] if half else []
    for l in range(N):
        a, b = 1 + l, 1 + N + l
        ops += [("h", a), _cnot(a, b, nq)]
    for l in range(N):
        a, msg = 1 + l, 1 + 2 * N + l
        if half:
            ops.append(_cswap(0, a, msg, nq))
        else:
            ops.append(("perm", (lambda a_, m_: lambda x: x if _bit(x, a_, nq) == _bit(x, m_, nq)
                                 else x ^ (1 << (nq - 1 - a_)) ^ (1 << (nq - 1 - m_)))(a, msg)))
    return AttackUnitary(N, 2 ** (1 + 2 * N), _circuit_unitary(nq, ops))


# ------------------------------------------------------------- symmetrization


def symmetrize(attack):
    """
    0/1 symmetrization. Eve adds one ancilla per message qubit in ``|+>``,
    applies controlled-``XZ`` from each ancilla to its qubit, runs the
    attack, and undoes the controlled gate. The ancillas become the most
    significant part of the new probe.
    """
    N, P = attack.n, attack.probe_dim
    if N > MAX_EXACT_QUBITS:
        raise ValueError(f"symmetrize supports at most {MAX_EXACT_QUBITS} message qubits")
    M = 2 ** N
    dim = M * P * M
    if dim > MAX_DIM:
        raise ValueError(f"symmetrized attack dimension {dim} exceeds {MAX_DIM}")
    blocks = []
    for m in range(M):
        g = _kron_all([_XZ if _bit(m, q, N) else np.eye(2) for q in range(N)])
        gp = np.kron(np.eye(P), g)
        blocks.append(gp.T @ attack.U @ gp)  # g is real orthogonal
    inner = P * M
    u = np.zeros((dim, dim), dtype=complex)
    for m, blk in enumerate(blocks):
        u[m * inner:(m + 1) * inner, m * inner:(m + 1) * inner] = blk
    h_anc = np.kron(_kron_all([_H] * N), np.eye(inner))
    return AttackUnitary(N, M * P, u @ h_anc)


# ------------------------------------------------------------- contexts


def _split_components(Eb, s, i_T, j_T):
    """``E'[i_I, j_I]`` (unnormalized) for the given test data."""
    N = len(s)
    s = np.asarray(s)
    info = [q for q in range(N) if s[q] == 1]
    test = [q for q in range(N) if s[q] == 0]
    P = Eb.shape[2]
    t = Eb.reshape((2,) * N + (2,) * N + (P,))
    idx = [slice(None)] * (2 * N) + [slice(None)]
    for q, v in zip(test, i_T):
        idx[q] = int(v)
    for q, v in zip(test, j_T):
        idx[N + q] = int(v)
    sub = t[tuple(idx)]
    nI = len(info)
    return sub.reshape(2 ** nI, 2 ** nI, P)


def context_components(attack, b, s, i_T, j_T):
    """
    Normalized ``E[i_I, j_I]`` (each ``i_I`` row scaled to unit total norm)
    and ``p(j_T | i_T, i_I)`` per ``i_I``.
    """
    Eraw = _split_components(components_in_basis(attack, b), s, i_T, j_T)
    p = np.einsum("ije,ije->i", Eraw, Eraw.conj()).real
    scale = np.where(p > 0, 1 / np.sqrt(np.where(p > 0, p, 1)), 0.0)
    return Eraw * scale[:, None, None], p


def posterior_defect(attack, b, s, i_T, j_T):
    """``max_{i_I} |p(i_I | i_T, j_T, b, s) - 2^{-n}|``."""
    _, p = context_components(attack, b, s, i_T, j_T)
    if p.sum() <= 0:
        return 0.0
    return float(np.abs(p / p.sum() - 1.0 / len(p)).max())


@dataclass(frozen=True)
class EveSpectrum:
    """``d_sq[l] = <eta_l|eta_l>`` indexed by the integer form of ``l``."""

    n: int
    d_sq: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d_sq, dtype=float)
        if d.shape != (2 ** self.n,):
            raise ValueError("d_sq must have 2^n entries")
        if d.min() < -1e-9 or abs(d.sum() - 1) > 1e-9:
            raise ValueError("d_sq must be a probability distribution")
        object.__setattr__(self, "d_sq", np.clip(d, 0.0, None))

    def as_dict(self):
        return {"".join(map(str, _int_to_bits(l, self.n))): float(v) for l, v in enumerate(self.d_sq)}

    def tail(self, v_hat):
        w = _popcount(np.arange(2 ** self.n))
        return float(self.d_sq[w >= v_hat / 2].sum())


def spectrum_from_components(E):
    """``d_c^2 = 2^{-2n} sum_{l,k,j} (-1)^{c.k} <E_{l,j}|E_{l^k,j^k}>``."""
    M = E.shape[0]
    n = int(np.log2(M))
    idx = np.arange(M)
    g = np.zeros(M, dtype=complex)
    for k in range(M):
        g[k] = np.vdot(E.ravel(), E[idx ^ k][:, idx ^ k].ravel())
    d = _sign_matrix(n) @ g / M ** 2
    return d.real, float(np.abs(d.imag).max())


def _check_info_bits(s):
    if int(np.sum(np.asarray(s) == 1)) > 2:
        raise ValueError("Eve-state analysis supports at most 2 information bits")


def eve_spectrum(attack, i_T, j_T, b, s):
    """``EveSpectrum`` of an attack for one context ``(i_T, j_T, b, s)``."""
    _check_info_bits(s)
    E, p = context_components(attack, b, s, i_T, j_T)
    if np.any(p <= 0):
        raise ValueError("context has zero probability for some i_I")
    d, _ = spectrum_from_components(E)
    return EveSpectrum(E.shape[0].bit_length() - 1, d)


def purified_states(E):
    """Rows ``phi_i = sum_j E_{i,j} (x) |i ^ j>``."""
    M, _, P = E.shape
    phi = np.zeros((M, P, M), dtype=complex)
    for i in range(M):
        for j in range(M):
            phi[i, :, i ^ j] += E[i, j]
    return phi.reshape(M, P * M)


def conjugate_error_check(attack, i_T, j_T, b, s):
    """
    Compare the information-bit error distribution measured in the
    conjugate bases with ``d_c^2`` computed in bases ``b``.

    Returns ``max_defect``, both distributions, and ``marginal_defect``
    ``|P(i_T, j_T | b) - P(i_T, j_T | conj b)|``.
    """
    _check_info_bits(s)
    s = np.asarray(s)
    b = np.asarray(b, dtype=np.uint8)
    b_bar = b ^ (s == 1).astype(np.uint8)
    raw = _split_components(components_in_basis(attack, b_bar), s, i_T, j_T)
    joint = np.einsum("ije,ije->ij", raw, raw.conj()).real
    M = joint.shape[0]
    idx = np.arange(M)
    lhs = np.array([joint[idx, idx ^ c].sum() for c in range(M)])
    lhs = lhs / lhs.sum()
    rhs = eve_spectrum(attack, i_T, j_T, b, s).d_sq
    raw_b = _split_components(components_in_basis(attack, b), s, i_T, j_T)
    nt = len(i_T)
    pb = np.einsum("ije,ije->", raw_b, raw_b.conj()).real / 4 ** nt
    pbar = joint.sum() / 4 ** nt
    return {
        "max_defect": float(np.abs(lhs - rhs).max()),
        "conjugate": lhs,
        "d_sq": rhs,
        "marginal_defect": float(abs(pb - pbar)),
    }


# ------------------------------------------------------------- SD bounds


def sd_bounds(spectrum, v_hat, r, alpha="auto"):
    """
    Tight bound ``alpha + tail / alpha`` and loose bound ``2^r`` times it,
    with ``tail = sum_{|l| >= v_hat/2} d_l^2``. ``alpha="auto"`` picks
    ``sqrt(tail)``.
    """
    if v_hat < 1:
        raise ValueError("v_hat must be at least 1")
    tail = spectrum.tail(v_hat)
    if alpha == "auto":
        a = math.sqrt(tail)
        tight = 2 * a
    else:
        a = float(alpha)
        if a <= 0:
            raise ValueError("alpha must be positive")
        tight = a + tail / a
    return {"tight": tight, "loose": 2 ** r * tight, "alpha": a, "tail": tail}


def _span_reduce(states):
    """Coordinates of the rows in an orthonormal basis of their span."""
    u, sv, vh = np.linalg.svd(np.asarray(states), full_matrices=False)
    keep = sv > 1e-12 * max(sv.max(), 1.0)
    return states @ vh[keep].conj().T


def _reduce_pair(rho0, rho1):
    w, v = np.linalg.eigh(rho0 + rho1)
    q = v[:, w > 1e-12]
    return q.conj().T @ rho0 @ q, q.conj().T @ rho1 @ q


def sd_exact(rho0, rho1, oracle=True, **oracle_kw):
    """
    Half trace distance of an equiprobable pair, and the measurement-oracle
    value when the joint support has dimension at most 4.
    """
    rho0, rho1 = np.asarray(rho0, dtype=complex), np.asarray(rho1, dtype=complex)
    if rho0.shape != rho1.shape or rho0.shape[0] > 16:
        raise ValueError("states must share a dimension of at most 16")
    out = {"half_trace_norm": 0.5 * trace_norm(rho0 - rho1), "oracle_info": None}
    if oracle:
        r0, r1 = _reduce_pair(rho0, rho1)
        if r0.shape[0] <= 4:
            r0 = 0.5 * (r0 + r0.conj().T)
            r1 = 0.5 * (r1 + r1.conj().T)
            src = QuantumSource(np.array([0.5, 0.5]), np.array([r0 / np.trace(r0).real, r1 / np.trace(r1).real]))
            out["oracle_info"] = accessible_info_oracle(src, **oracle_kw)
    return out


def _scheme_rows(scheme, n_info):
    if isinstance(scheme, BlockScheme):
        if len(scheme.blocks) != 1:
            raise ValueError("context analysis needs a single-block scheme")
        scheme = scheme.blocks[0]
    if scheme.n != n_info:
        raise ValueError("scheme length must equal the number of information bits")
    return scheme


def parity_ensembles(E, scheme):
    """
    For each PA string ``t`` and each value of the other announced or
    given parities, the pair ``(rho_0, rho_1)`` of Eve's purified states
    averaged over the consistent ``i_I`` with key bit 0 and 1.

    Yields ``(t, known_value, rho0, rho1)`` in span coordinates.
    """
    M = E.shape[0]
    n = M.bit_length() - 1
    scheme = _scheme_rows(scheme, n)
    coords = _span_reduce(purified_states(E))
    words = np.array([_int_to_bits(i, n) for i in range(M)], dtype=int)
    for t in range(scheme.m):
        v = scheme.pa[t]
        others = np.concatenate([scheme.ecc, np.delete(scheme.pa, t, axis=0)]).astype(int)
        known = (words @ others.T) % 2 if len(others) else np.zeros((M, 0), dtype=int)
        keybit = (words @ v.astype(int)) % 2
        for val in sorted({tuple(k) for k in known}):
            sel = np.all(known == np.array(val, dtype=int), axis=1)
            pair = []
            for bit in (0, 1):
                rows = coords[sel & (keybit == bit)]
                pair.append(rows.T @ rows.conj() / len(rows))
            yield t, val, pair[0], pair[1]


def sd_context(E, scheme, alpha="auto", oracle=False, **oracle_kw):
    """
    Per-context chain ``oracle <= 1/2 Tr|rho0 - rho1| <= tight <= loose``
    for every PA bit, with ``v_hat`` taken against the ECC strings and the
    other PA strings.
    """
    n = E.shape[0].bit_length() - 1
    scheme = _scheme_rows(scheme, n)
    d, _ = spectrum_from_components(E)
    spec = EveSpectrum(n, d)
    r_eff = scheme.r + scheme.m - 1
    records = []
    for t, val, r0, r1 in parity_ensembles(E, scheme):
        v_hat = pa_min_distance(scheme, scheme.pa[t], "union")
        sd = sd_exact(r0, r1, oracle=oracle, **oracle_kw)
        b = sd_bounds(spec, v_hat, r_eff, alpha)
        records.append({"t": t, "known": val, "v_hat": v_hat, **sd, **b})
    return {"spectrum": spec, "records": records,
            "max_half_trace": max(r["half_trace_norm"] for r in records)}


# ------------------------------------------------------------- sampling


def hoeffding_check(n, p_a, eps, trials, seed=0, error_weight=None):
    """
    Plant an error string of weight ``round(2 n p_a)`` (or ``error_weight``)
    at random on ``2n`` positions, split into ``n`` test and ``n`` information
    positions uniformly, and count the event
    ``|c_I|/n > p_a + eps and |c_T|/n <= p_a``.

    Returns the empirical frequency ``empirical_h``, the frequency of
    ``|c_I|/n >= |c_T|/n + eps`` (``empirical_gap``), the bound
    ``exp(-n eps^2 / 2)``, ``sigma`` (binomial std at the bound) and ``passed``.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    rng = np.random.default_rng(seed)
    w = int(round(2 * n * p_a)) if error_weight is None else int(error_weight)
    if not 0 <= w <= 2 * n:
        raise ValueError("error weight out of range")
    c = np.zeros((trials, 2 * n), dtype=np.int8)
    c[:, :w] = 1
    c = rng.permuted(c, axis=1)  # random error string
    order = np.argsort(rng.random((trials, 2 * n)), axis=1)  # random split
    picked = np.take_along_axis(c, order, axis=1)
    c_T = picked[:, :n].sum(axis=1) / n
    c_I = picked[:, n:].sum(axis=1) / n
    emp_h = float(np.mean((c_I > p_a + eps + 1e-12) & (c_T <= p_a + 1e-12)))
    emp_gap = float(np.mean(c_I >= c_T + eps - 1e-12))
    bound = math.exp(-0.5 * n * eps ** 2)
    sigma = math.sqrt(bound * (1 - bound) / trials)
    return {"empirical_h": emp_h, "empirical_gap": emp_gap, "bound": bound, "sigma": sigma,
            "passed": emp_h <= bound + 3 * sigma and emp_gap <= bound + 3 * sigma}


# ------------------------------------------------------------- security


def _all_bases_and_samples(N, n):
    for bint in range(2 ** N):
        b = _int_to_bits(bint, N)
        for test in combinations(range(N), n):
            s = np.ones(N, dtype=np.uint8)
            s[list(test)] = 0
            yield b, s


def security_estimate(cfg, attack, mode="exhaustive", samples=64, seed=0, info="trace",
                      presymmetrized=False, **oracle_kw):
    """
    Average of Eve's information over passing contexts against ``2 m sqrt(h)``.

    ``lhs = sum P(pass, i_T, c_T, b, s) I(ctx)`` with ``I(ctx) = m`` times the
    largest single-bit distinguishability over PA bits and announced
    parities (half trace distance, or the oracle with ``info="oracle"``).
    ``h`` is the probability that the test passes while the information
    bits carry at least ``v_hat/2`` errors. The square-root split then gives
    ``P(pass and I >= sqrt(rhs)) <= sqrt(rhs)``.

    ``mode="sampled"`` draws ``samples`` ``(b, s)`` pairs from ``seed``
    instead of enumerating them.
    """
    if isinstance(attack, Attack):
        attack = attack.unitary
    N = 2 * cfg.n
    if attack.n != N or N > MAX_EXACT_QUBITS:
        raise ValueError(f"need a custom attack on 2n <= {MAX_EXACT_QUBITS} qubits")
    if cfg.scheme is None:
        raise ValueError("security_estimate needs an explicit scheme")
    scheme = _scheme_rows(cfg.scheme, cfg.n)
    u = attack if presymmetrized else symmetrize(attack)
    v_hat = min(pa_min_distance(scheme, row, "union") for row in scheme.pa)
    m = scheme.m
    n = cfg.n
    if mode == "exhaustive":
        ctxs = list(_all_bases_and_samples(N, n))
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        ctxs = []
        for _ in range(samples):
            s = np.ones(N, dtype=np.uint8)
            s[rng.choice(N, n, replace=False)] = 0
            ctxs.append((rng.integers(0, 2, N, dtype=np.uint8), s))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    w_ctx = 1.0 / len(ctxs)
    lhs = h = pass_prob = 0.0
    per_ctx = []
    M = 2 ** n
    idx = np.arange(M)
    for b, s in ctxs:
        Eb = components_in_basis(u, b)
        for iT in range(M):
            for jT in range(M):
                i_T, j_T = _int_to_bits(iT, n), _int_to_bits(jT, n)
                raw = _split_components(Eb, s, i_T, j_T)
                norms = np.einsum("ije,ije->ij", raw, raw.conj()).real
                p_ctx = norms.sum() / 4 ** n
                if p_ctx <= 1e-15 or (i_T ^ j_T).sum() > cfg.p_allowed * n + 1e-12:
                    continue
                weight_ctx = w_ctx * p_ctx
                pass_prob += weight_ctx
                heavy = _popcount(idx[:, None] ^ idx[None, :]) >= v_hat / 2
                h += w_ctx * norms[heavy].sum() / 4 ** n
                E, _ = context_components(u, b, s, i_T, j_T)
                res = sd_context(E, scheme, oracle=(info == "oracle"), **oracle_kw)
                if info == "oracle":
                    single = max(r["oracle_info"] for r in res["records"])
                else:
                    single = res["max_half_trace"]
                lhs += weight_ctx * m * single
                per_ctx.append((weight_ctx, m * single))
    rhs = 2 * m * math.sqrt(max(h, 0.0))
    thresh = math.sqrt(rhs)
    above = sum(w for w, val in per_ctx if val >= thresh - 1e-15) if rhs > 0 else sum(
        w for w, val in per_ctx if val > 1e-12)
    eps = v_hat / (2 * n) - cfg.p_allowed
    A = 2 * m
    beta = eps ** 2 / 4 if eps > 0 else 0.0
    return {
        "lhs": float(lhs),
        "rhs": float(rhs),
        "h": float(h),
        "v_hat": int(v_hat),
        "pass_prob": float(pass_prob),
        "holds": bool(lhs <= rhs + 1e-9),
        "criterion": {
            "threshold": thresh,
            "prob_pass_and_info_above": float(above),
            "bound": thresh,
            "holds": bool(above <= thresh + 1e-9),
        },
        "constants": {"eps": eps, "A": A, "beta": beta, "A_info": math.sqrt(A), "beta_info": beta / 2,
                      "A_luck": math.sqrt(A), "beta_luck": beta / 2,
                      "asymptotic_rhs": A * math.exp(-beta * n)},
    }


# ------------------------------------------------------------- BB84 -> used bits


@dataclass(frozen=True)
class SiftedInstance:
    aborted: bool
    n_sent: int
    n_matched: int
    match_fraction: float
    b: np.ndarray = None
    i: np.ndarray = None


def full_bb84_reduction(n, delta_num, seed=None):
    """
    Original BB84 sifting: ``n'' = ceil((4 + delta_num) n)`` qubits, random
    independent bases for Alice and Bob, keep matching positions, take the
    first ``2n``. Aborts when fewer than ``2n`` positions match.
    """
    if delta_num * math.sqrt(2 * n) < 3:
        warnings.warn("delta_num * sqrt(2n) is small; sifting may abort often", stacklevel=2)
    rng = np.random.default_rng(seed)
    total = math.ceil((4 + delta_num) * n)
    b = rng.integers(0, 2, total, dtype=np.uint8)
    b_bob = rng.integers(0, 2, total, dtype=np.uint8)
    i = rng.integers(0, 2, total, dtype=np.uint8)
    keep = np.flatnonzero(b == b_bob)
    frac = len(keep) / total
    if len(keep) < 2 * n:
        return SiftedInstance(True, total, len(keep), frac)
    sel = keep[:2 * n]
    return SiftedInstance(False, total, len(keep), frac, b[sel], i[sel])


def reduction_abort_rate(n, delta_num, trials, seed=0):
    seqs = np.random.SeedSequence(seed).spawn(trials)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = [full_bb84_reduction(n, delta_num, sq) for sq in seqs]
    return {"abort_rate": float(np.mean([r.aborted for r in res])),
            "match_fraction": float(np.mean([r.match_fraction for r in res]))}


def run_reduced(cfg, attack, seed=None, delta_num=1.0):
    """Sift with ``full_bb84_reduction`` and feed the result to ``run_protocol``."""
    seq = np.random.SeedSequence(seed)
    a, b = seq.spawn(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        inst = full_bb84_reduction(cfg.n, delta_num, a)
    if inst.aborted:
        return None
    return run_protocol(cfg, attack, b, b=inst.b, i=inst.i)

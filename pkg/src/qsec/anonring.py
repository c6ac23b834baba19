"""
Anonymous broadcast over a ring of ``N`` users sharing Bell pairs.

Bell pair ``i`` is ``(a_i, b_i)``: ``a_i`` stays with user ``i`` and
``b_i`` travels to user ``i + 1``. A non-tester Bell-measures
``(b_{i-1}, a_i)`` and gets ``(z_bit, x_bit)``: ``z_bit`` is the ``ZZ``
parity and is announced, ``x_bit`` is the ``XX`` parity and is the user's
key bit ``k'_i``. A tester measures both qubits in the x basis.

Link noise flips the travelling qubit with ``sigma_z`` (probability
``link_noise_z``) and ``sigma_x`` (probability ``link_noise_x``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .infobounds import AttackUnitary, QuantumSource, accessible_info_oracle, p_zero
from .lincode import as_bits, coset_broadcast_decode, coset_broadcast_encode, syndrome_decode
from .qlinalg import shannon_entropy

MAX_EXACT_USERS = 10
MAX_QECC_QUBITS = 12
RETRY_CAP = 1000

_I2 = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
_PHI = np.eye(2) / np.sqrt(2)  # |00> + |11>, indexed [a, b]


def _bell_rows():
    # row (x_bit, z_bit) is <(Z^x (x) X^z) Phi+|
    rows = np.zeros((4, 4))
    for xb in (0, 1):
        for zb in (0, 1):
            v = np.kron(np.linalg.matrix_power(_Z, xb), np.linalg.matrix_power(_X, zb)) @ _PHI.ravel()
            rows[2 * xb + zb] = v
    return rows


_BELL = _bell_rows()
_XX = np.kron(_H, _H)


@dataclass(frozen=True)
class RingConfig:
    N: int
    alpha: float = 1.0
    gamma: float = 1.0
    pair: object = None
    link_noise_z: float = 0.0
    link_noise_x: float = 0.0

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("the ring needs at least 3 users")
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("alpha and gamma must be positive")
        if self.alpha / self.N >= 1:
            raise ValueError("p_test = alpha / N must be below 1")
        for p in np.atleast_1d(self.link_noise_z), np.atleast_1d(self.link_noise_x):
            if np.any(p < 0) or np.any(p > 1):
                raise ValueError("link noise must be a probability")

    @property
    def p_test(self):
        return self.alpha / self.N

    @property
    def p_speak(self):
        return self.gamma / self.N

    def link_probs(self):
        z = np.broadcast_to(np.asarray(self.link_noise_z, dtype=float), (self.N,))
        x = np.broadcast_to(np.asarray(self.link_noise_x, dtype=float), (self.N,))
        return z, x


# ------------------------------------------------------------- records


class RoundRecord:
    """
    Announcement log of one ring round.

    Entries are ``(step, user, value)``. Every step-3 entry must precede
    every step-4 entry, and step 5 follows a complete step 4; ``append``
    rejects anything else. ``seal`` freezes the record.
    """

    def __init__(self, N, actions, outcomes, link_z, link_x):
        self.N = N
        self.actions = tuple(actions)
        self.outcomes = tuple(tuple(o) for o in outcomes)
        self.link_z = np.array(link_z, dtype=np.uint8)
        self.link_x = np.array(link_x, dtype=np.uint8)
        self._log = []
        self._sealed = False

    def _count(self, step):
        return sum(1 for s, _, _ in self._log if s == step)

    def append(self, step, user, value):
        if self._sealed:
            raise RuntimeError("record is sealed")
        if step == 3:
            if self._count(4) or self._count(5):
                raise ValueError("step-3 announcements must all precede step 4")
        elif step == 4:
            if self._count(3) < self.N:
                raise ValueError("step 4 before every user made a step-3 announcement")
            if self._count(5):
                raise ValueError("step 4 after step 5")
        elif step == 5:
            if self._count(4) < self.N:
                raise ValueError("step 5 before every user announced a test flag")
        else:
            raise ValueError(f"unknown step {step}")
        self._log.append((step, int(user), value))

    def seal(self):
        self._sealed = True
        return self

    @property
    def log(self):
        return tuple(self._log)

    @classmethod
    def from_log(cls, N, actions, outcomes, link_z, link_x, log):
        rec = cls(N, actions, outcomes, link_z, link_x)
        for step, user, value in log:
            rec.append(step, user, value)
        return rec.seal()

    @property
    def testers(self):
        return [u for u, a in enumerate(self.actions) if a == "test"]

    @property
    def disposition(self):
        return "test" if self.testers else "info"

    @property
    def key_bits(self):
        """``k'_i`` (the x-type Bell bit) for an information round, else ``None``."""
        if self.disposition != "info":
            return None
        return np.array([o[0] for o in self.outcomes], dtype=np.uint8)

    def to_json(self):
        return {
            "N": self.N,
            "actions": list(self.actions),
            "outcomes": [list(o) for o in self.outcomes],
            "link_z": self.link_z.tolist(),
            "link_x": self.link_x.tolist(),
            "log": [list(e) for e in self._log],
        }


def _pair_state(zf, xf):
    psi = _PHI.copy()
    if xf:
        psi = psi @ _X.T
    if zf:
        psi = psi @ _Z.T
    return psi


def _measure_two(psi, labels, q1, q2, rows, rng):
    i1, i2 = labels.index(q1), labels.index(q2)
    t = np.moveaxis(psi, (i1, i2), (0, 1)).reshape(4, -1)
    amp = rows @ t
    probs = np.einsum("ij,ij->i", amp, amp.conj()).real
    k = rng.choice(4, p=probs / probs.sum())
    rest = [lab for lab in labels if lab not in (q1, q2)]
    new = amp[k] / math.sqrt(probs[k])
    return new.reshape((2,) * len(rest)), rest, (k >> 1, k & 1)


def run_round(cfg, seed=None, testers=None, planted_z=None, planted_x=None):
    """
    Simulate one round exactly.

    Pairs are created as the ring is walked and measured qubits are
    dropped, so at most four qubits are ever live; the outcome distribution
    equals that of the full ``2N``-qubit statevector.

    ``testers`` (list of users) overrides the random test decisions;
    ``planted_z`` / ``planted_x`` (length-``N`` bit arrays) override the
    random link noise.
    """
    N = cfg.N
    if N > MAX_EXACT_USERS:
        raise ValueError(f"exact simulation supports N <= {MAX_EXACT_USERS}")
    rng = np.random.default_rng(seed)
    pz, px = cfg.link_probs()
    if testers is None:
        tests = rng.random(N) < cfg.p_test
    else:
        tests = np.zeros(N, dtype=bool)
        tests[list(testers)] = True
    zf = (rng.random(N) < pz).astype(np.uint8) if planted_z is None else as_bits(planted_z, N)
    xf = (rng.random(N) < px).astype(np.uint8) if planted_x is None else as_bits(planted_x, N)
    outcomes = [None] * N
    psi = _pair_state(zf[0], xf[0])
    labels = [("a", 0), ("b", 0)]
    order = list(range(1, N)) + [0]
    for u in order:
        if u != 0:
            psi = np.multiply.outer(psi, _pair_state(zf[u], xf[u]))
            labels = labels + [("a", u), ("b", u)]
        rows = _XX if tests[u] else _BELL
        psi, labels, out = _measure_two(psi, labels, ("b", (u - 1) % N), ("a", u), rows, rng)
        outcomes[u] = out
    actions = ["test" if t else "bell" for t in tests]
    rec = RoundRecord(N, actions, outcomes, zf, xf)
    for u in range(N):
        # testers: x outcome of the received qubit; others: the z-type Bell bit
        rec.append(3, u, int(outcomes[u][0] if tests[u] else outcomes[u][1]))
    for u in range(N):
        rec.append(4, u, bool(tests[u]))
    if tests.any():
        for u in range(N):
            # testers: x outcome of their own half; others: the x-type Bell bit
            rec.append(5, u, int(outcomes[u][1] if tests[u] else outcomes[u][0]))
    return rec.seal()


def arc_parities(record):
    """
    For a test round, the x-parity along each arc between consecutive
    testers, computed from the public log only. Zero means the arc looks
    error free. Returns ``[(start, end, parity)]``.
    """
    testers = [u for s, u, v in record.log if s == 4 and v]
    if not testers:
        return []
    step3 = {u: v for s, u, v in record.log if s == 3}
    step5 = {u: v for s, u, v in record.log if s == 5}
    N = record.N
    out = []
    for idx, t1 in enumerate(testers):
        t2 = testers[(idx + 1) % len(testers)]
        par = step5[t1]
        u = (t1 + 1) % N
        while u != t2:
            par ^= step5[u]
            u = (u + 1) % N
        par ^= step3[t2]
        out.append((t1, t2, int(par)))
    return out


def test_statistics(cfg, rounds, seed=0, max_distance=None):
    """
    Sampled test decisions against the closed forms.

    Returns ``p_use_hat``, ``p_use`` ``= (1 - alpha/N)^N``, the limit
    ``exp(-alpha)``, and per-distance frequencies ``channel_freq[l-1]`` of
    "the next tester after a user is ``l`` steps away" against
    ``(1 - alpha/N)^{l-1} alpha/N``.
    """
    if rounds < 1000:
        raise ValueError("use at least 1000 rounds")
    rng = np.random.default_rng(seed)
    N, p = cfg.N, cfg.p_test
    L = N - 1 if max_distance is None else min(max_distance, N - 1)
    tests = rng.random((rounds, N)) < p
    freq = np.zeros(L)
    pending = np.ones((rounds, N), dtype=bool)
    for l in range(1, L + 1):
        shifted = np.roll(tests, -l, axis=1)
        freq[l - 1] = (pending & shifted).mean()
        pending &= ~shifted
    ls = np.arange(1, L + 1)
    return {
        "p_use_hat": float((~tests.any(axis=1)).mean()),
        "p_use": (1 - p) ** N,
        "p_use_limit": math.exp(-cfg.alpha),
        "channel_freq": freq,
        "channel_expected": (1 - p) ** (ls - 1) * p,
    }


# ------------------------------------------------------------- broadcast


def collect_keys(cfg, length, seed=None, max_rounds=None):
    """
    Run rounds until ``length`` information bits exist; returns
    ``(keys, errors, rounds_used)`` with ``keys[i]`` the ``k'_i`` string and
    ``errors`` the accumulated z-flip parity ``e`` per information bit.
    """
    rng = np.random.default_rng(seed)
    keys, errs, used = [], [], 0
    cap = max_rounds if max_rounds is not None else 1000 * length
    while len(keys) < length:
        if used >= cap:
            raise RuntimeError("not enough information rounds")
        rec = run_round(cfg, rng)
        used += 1
        if rec.disposition == "info":
            keys.append(rec.key_bits)
            errs.append(int(np.bitwise_xor.reduce(rec.link_z)))
    return np.array(keys, dtype=np.uint8).T, np.array(errs, dtype=np.uint8), used


def synthetic_keys(N, length, rng, errors=None):
    """Uniform ``k'`` strings whose XOR is ``errors`` (zero by default)."""
    keys = rng.integers(0, 2, size=(N, length), dtype=np.uint8)
    target = np.zeros(length, dtype=np.uint8) if errors is None else as_bits(errors, length)
    keys[-1] ^= np.bitwise_xor.reduce(keys, axis=0) ^ target
    return keys


@dataclass(frozen=True)
class SessionResult:
    output: np.ndarray
    announcements: np.ndarray
    error: np.ndarray
    within_radius: bool


def broadcast_session(cfg, messages, keys, seed=None):
    """
    One use of the channel: user ``i`` announces ``k'_i ^ u_i`` with ``u_i``
    in ``C1`` carrying ``messages[i]`` (``None`` or all-zero is NULL).
    Anyone XORs the announcements, corrects with ``C1`` and reads the
    ``C2``-coset message.
    """
    pair = cfg.pair
    if pair is None:
        raise ValueError("RingConfig.pair is required for broadcasting")
    rng = np.random.default_rng(seed)
    keys = np.asarray(keys, dtype=np.uint8)
    n = pair.c1.n
    if keys.shape != (cfg.N, n):
        raise ValueError("need one n-bit key string per user")
    zero = np.zeros(pair.message_bits, dtype=np.uint8)
    ann = []
    for i in range(cfg.N):
        m = zero if messages[i] is None else as_bits(messages[i], pair.message_bits)
        ann.append(keys[i] ^ coset_broadcast_encode(m, pair, rng))
    res = coset_broadcast_decode(ann, pair)
    return SessionResult(res.message, np.array(ann), res.error, res.decode.within_radius)


def retry_session(cfg, messages, seed=None, key_source="synthetic", cap=RETRY_CAP):
    """
    Deliver every non-NULL message. All speakers try in the first slot;
    after a collision each pending speaker retries with probability
    ``gamma / N`` per slot. A speaker succeeds when the output equals its
    message.

    Returns ``slots`` used, per-user ``attempts``, ``delivered`` order and
    ``truncated`` when the cap is hit.
    """
    rng = np.random.default_rng(seed)
    pair = cfg.pair
    n = pair.c1.n
    pending = {i for i, m in enumerate(messages) if m is not None and np.any(as_bits(m))}
    attempts = np.zeros(cfg.N, dtype=int)
    delivered, slots = [], 0
    first = True
    while pending and slots < cap:
        slots += 1
        speakers = sorted(pending) if first else [i for i in sorted(pending) if rng.random() < cfg.p_speak]
        first = False
        if key_source == "ring":
            keys, errs, _ = collect_keys(cfg, n, rng)
        else:
            keys, errs = synthetic_keys(cfg.N, n, rng), None
        slot_msgs = [messages[i] if i in speakers else None for i in range(cfg.N)]
        res = broadcast_session(cfg, slot_msgs, keys, rng)
        for i in speakers:
            attempts[i] += 1
            if np.array_equal(res.output, as_bits(messages[i])):
                pending.discard(i)
                delivered.append(i)
    return {"slots": slots, "attempts": attempts, "delivered": delivered, "truncated": bool(pending)}


# ------------------------------------------------------------- QECC variant


def _apply_x(psi, q):
    return np.flip(psi, axis=q)


def _apply_z(psi, q):
    idx = [slice(None)] * psi.ndim
    idx[q] = 1
    psi = psi.copy()
    psi[tuple(idx)] *= -1
    return psi


def _measure(psi, q, basis, rng, reset_plus=False):
    if basis == "x":
        psi = np.moveaxis(np.tensordot(_H, psi, axes=([1], [q])), 0, q)
    t = np.moveaxis(psi, q, 0)
    probs = np.array([np.vdot(t[0], t[0]).real, np.vdot(t[1], t[1]).real])
    o = int(rng.choice(2, p=probs / probs.sum()))
    rest = t[o] / math.sqrt(probs[o])
    if reset_plus:
        new = np.multiply.outer(np.array([1.0, 1.0]) / math.sqrt(2), rest)
    else:
        new = np.multiply.outer(np.eye(2)[o], rest)
        if basis == "x":
            new = np.tensordot(_H, new, axes=([1], [0]))
    return np.moveaxis(new, 0, q), o


def _code_state(pair, l_z, l_x):
    n = pair.c1.n
    words = [np.zeros(n, dtype=np.uint8)]
    for g in pair.c2.generator:
        words = words + [w ^ g for w in words]
    psi = np.zeros((2,) * n)
    for w in words:
        psi[tuple(w)] = 1.0
    psi /= math.sqrt(len(words))
    for _ in range(l_z):
        psi = np.multiply.outer(psi, np.array([1.0, 0.0]))
    for _ in range(l_x):
        psi = np.multiply.outer(psi, np.array([1.0, 1.0]) / math.sqrt(2))
    return psi


def qecc_round(cfg, css, l_x, l_z, seed=None, messages=None, p_test_x=None, x_errors_allowed=0):
    """
    Statevector simulation of the code-based variant.

    User 0 prepares the CSS zero word plus ``l_z`` z-test and ``l_x``
    x-test qubits, permutes them, and every user (0 first) encrypts with
    fresh ``X^{kx} Z^{kz}``. Users ``1..N-1`` x-test each qubit with
    probability ``p_test_x`` (default ``alpha / N``), replacing it with
    ``|+>``. The round aborts if any code or z-test qubit was tested or a
    test check fails; otherwise user 0 applies the announced ``a_i``,
    measures the code qubits, corrects with ``C1`` and outputs the message.

    The simulation keeps qubits in unpermuted order; testers pick physical
    positions, which the permutation maps to logical ones.
    """
    N = cfg.N
    n = css.c1.n
    Q = n + l_z + l_x
    if Q > MAX_QECC_QUBITS:
        raise ValueError(f"qecc_round supports at most {MAX_QECC_QUBITS} qubits")
    rng = np.random.default_rng(seed)
    p_t = cfg.p_test if p_test_x is None else p_test_x
    pz, px = cfg.link_probs()
    k = css.message_bits
    msgs = [np.zeros(k, np.uint8) if (messages is None or messages[i] is None) else as_bits(messages[i], k)
            for i in range(N)]
    perm = rng.permutation(Q)  # physical position p holds logical qubit perm[p]
    psi = _code_state(css, l_z, l_x)
    kx = np.zeros((N, Q), dtype=np.uint8)
    kz = np.zeros((N, Q), dtype=np.uint8)
    tested = np.zeros((N, Q), dtype=bool)
    measured = np.full((N, Q), -1)
    link_x = np.zeros((N, Q), dtype=np.uint8)
    link_z = np.zeros((N, Q), dtype=np.uint8)

    def encrypt(psi, u):
        kx[u] = rng.integers(0, 2, Q)
        kz[u] = rng.integers(0, 2, Q)
        for q in range(Q):
            if kz[u, q]:
                psi = _apply_z(psi, q)
            if kx[u, q]:
                psi = _apply_x(psi, q)
        return psi

    def link(psi, u):
        link_x[u] = rng.random(Q) < px[u]
        link_z[u] = rng.random(Q) < pz[u]
        for q in range(Q):
            if link_z[u, q]:
                psi = _apply_z(psi, q)
            if link_x[u, q]:
                psi = _apply_x(psi, q)
        return psi

    psi = encrypt(psi, 0)
    for u in range(1, N):
        psi = link(psi, u - 1)
        for p in np.flatnonzero(rng.random(Q) < p_t):
            q = perm[p]
            tested[u, q] = True
            psi, measured[u, q] = _measure(psi, q, "x", rng, reset_plus=True)
        psi = encrypt(psi, u)
    psi = link(psi, N - 1)

    # step 6: user 0 measures the test qubits
    final_x, final_z = {}, {}
    for q in range(n + l_z, Q):
        psi, final_x[q] = _measure(psi, q, "x", rng)
    for q in range(n, n + l_z):
        psi, final_z[q] = _measure(psi, q, "z", rng)

    out = {"perm": perm, "tested": tested, "kx": kx, "kz": kz, "link_x": link_x, "link_z": link_z,
           "expected_output": np.bitwise_xor.reduce(np.array(msgs), axis=0)}
    hit = np.flatnonzero(tested.any(axis=0)[: n + l_z])
    x_err = 0
    for q in range(n + l_z, Q):
        acc = 0
        for u in range(N):
            if tested[u, q]:
                x_err += int(measured[u, q] != acc)
                acc = 0
            acc ^= int(kz[u, q])
        x_err += int(final_x[q] != acc)
    z_err = sum(int(final_z[q] != int(np.bitwise_xor.reduce(kx[:, q]))) for q in range(n, n + l_z))
    out.update(x_test_errors=x_err, z_test_errors=z_err)
    if hit.size:
        return {**out, "outcome": "abort", "abort_reason": "code or z-test qubit tested"}
    if x_err > x_errors_allowed:
        return {**out, "outcome": "abort", "abort_reason": "x-test fidelity"}
    if z_err > x_errors_allowed:
        return {**out, "outcome": "abort", "abort_reason": "z-test fidelity"}

    # step 10: a_i = k'_ix ^ u_i with u_i in C1 carrying m_i
    ann = np.array([kx[u, :n] ^ coset_broadcast_encode(msgs[u], css, rng) for u in range(N)])
    total = np.bitwise_xor.reduce(ann, axis=0)
    for q in range(n):
        if total[q]:
            psi = _apply_x(psi, q)
    word = np.zeros(n, dtype=np.uint8)
    for q in range(n):
        psi, word[q] = _measure(psi, q, "z", rng)
    dec = syndrome_decode(word, css.c1)
    output = css.message_of(dec.codeword)
    return {**out, "outcome": "pass", "abort_reason": None, "announcements": ann, "word": word,
            "output": output, "decode_weight": dec.weight}


def keyed_average(rho):
    """Average of ``X^{kx} Z^{kz} rho (.)^dag`` over all keys, qubit by qubit."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    nq = d.bit_length() - 1
    t = rho.reshape((2,) * (2 * nq))
    for q in range(nq):
        for op in (_Z, _X):
            conj = np.tensordot(op, t, axes=([1], [q]))
            conj = np.moveaxis(conj, 0, q)
            conj = np.tensordot(conj, op.conj(), axes=([nq + q], [0]))
            conj = np.moveaxis(conj, -1, nq + q)
            t = 0.5 * (t + conj)
    return t.reshape(d, d)


def in_flight_state(css, l_x, l_z, seed=None):
    """User 0's permuted, unencrypted state as a density matrix (before the key average)."""
    rng = np.random.default_rng(seed)
    psi = _code_state(css, l_z, l_x)
    perm = rng.permutation(psi.ndim)
    psi = np.transpose(psi, np.argsort(perm)).ravel()
    return np.outer(psi, psi.conj())


# ------------------------------------------------------------- two-sided attacks


@dataclass(frozen=True)
class TwoSidedAttack:
    """``U`` acts before the user's ``sigma_x^{[k]}``, ``V`` after; both on probe (x) message."""

    n: int
    probe_dim: int
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= 2:
            raise ValueError("two-sided attacks support n <= 2")
        dim = self.probe_dim * 2 ** self.n
        for name in ("U", "V"):
            a = np.asarray(getattr(self, name), dtype=complex)
            if a.shape != (dim, dim):
                raise ValueError(f"{name} has the wrong size")
            if np.abs(a @ a.conj().T - np.eye(dim)).max() > 1e-10:
                raise ValueError(f"{name} is not unitary")
            object.__setattr__(self, name, a)

    def first(self):
        return AttackUnitary(self.n, self.probe_dim, self.U)

    def combined(self):
        return AttackUnitary(self.n, self.probe_dim, self.V @ self.U)


def _two_sided_states(attack):
    M = 2 ** attack.n
    P = attack.probe_dim
    E = attack.first().components()
    idx = np.arange(M)
    psi = np.zeros((M, M, P * M), dtype=complex)
    psi_p = np.zeros_like(psi)
    for x in range(M):
        for k in range(M):
            # vector index e * M + j, matching probe (x) message
            psi[x, k] = attack.V @ E[x, idx ^ k].T.ravel()
            psi_p[x, k] = attack.V @ E[x ^ k, idx].T.ravel()
    return psi, psi_p


def two_sided_bound(attack, f, oracle=True, **oracle_kw):
    """
    Bound on ``I(F(M); E | A)`` for a two-sided attack.

    ``f_u`` is the real part of ``2^{-2n} sum_{x,a} <psi_{x,a}|psi'_{x,a}>``,
    ``f_uv`` the no-error probability of ``V U`` in the conjugate basis.
    ``decomposed = H(F(K)) (4 sqrt(1-F_UV) + 4 sqrt(2) sqrt(1-F_U))`` and
    ``bound = (4 + 4 sqrt 2) H(F(K)) sqrt(1 - F_min)``. ``oracle`` is the
    measurement-oracle value of ``I(F(M); E | A, X)`` with the message
    uniform.
    """
    n, M = attack.n, 2 ** attack.n
    f = np.asarray(f, dtype=int)
    if f.shape != (M,):
        raise ValueError("f must be defined on every n-bit string")
    values = np.unique(f)
    q = np.array([np.mean(f == v) for v in values])
    h = shannon_entropy(q)
    psi, psi_p = _two_sided_states(attack)
    f_u = float(np.einsum("xkd,xkd->", psi.conj(), psi_p).real) / M ** 2
    f_u_direct = p_zero(attack.first().components(), n)
    f_uv = p_zero(attack.combined().components(), n)
    f_u, f_uv = min(max(f_u, 0.0), 1.0), min(max(f_uv, 0.0), 1.0)
    f_min = min(f_u, f_uv)
    out = {
        "f_u": f_u,
        "f_u_direct": f_u_direct,
        "f_uv": f_uv,
        "f_min": f_min,
        "h_fk": h,
        "decomposed": h * (4 * math.sqrt(1 - f_uv) + 4 * math.sqrt(2) * math.sqrt(1 - f_u)),
        "bound": (4 + 4 * math.sqrt(2)) * h * math.sqrt(1 - f_min),
    }
    if oracle:
        P = attack.probe_dim
        if P > 4:
            raise ValueError("oracle needs probe dimension at most 4")
        t = psi.reshape(M, M, P, M)
        rho = np.einsum("xkej,xkfj->xkef", t, t.conj())
        total = 0.0
        if len(values) > 1:
            for a in range(M):
                for x in range(M):
                    sig = []
                    for v in values:
                        ks = [k for k in range(M) if f[k ^ a] == v]
                        s = sum(rho[x, k] for k in ks) / len(ks)
                        sig.append(0.5 * (s + s.conj().T))
                    total += accessible_info_oracle(QuantumSource(q, np.array(sig)), **oracle_kw) / M ** 2
        out["oracle"] = total
    return out


def random_two_sided(n, probe_dim, rng):
    from .qlinalg import random_unitary

    dim = probe_dim * 2 ** n
    return TwoSidedAttack(n, probe_dim, random_unitary(dim, rng), random_unitary(dim, rng))


def z_copy_two_sided(n=1):
    from .infobounds import z_copy_attack

    u = z_copy_attack(n)
    return TwoSidedAttack(n, u.probe_dim, u.U, np.eye(u.U.shape[0]))


# ------------------------------------------------------------- anonymity


def plugin_mi(x, y):
    """
    Plug-in mutual information (bits) of paired samples, with the
    Miller-Madow bias ``(|X|-1)(|Y|-1) / (2 T ln 2)`` subtracted in
    ``corrected``.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    _, xi = np.unique(x, return_inverse=True, axis=0)
    _, yi = np.unique(y, return_inverse=True, axis=0)
    joint = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(joint, (xi.ravel(), yi.ravel()), 1.0)
    joint /= joint.sum()
    px, py = joint.sum(1), joint.sum(0)
    nz = joint > 0
    mi = float((joint[nz] * np.log2(joint[nz] / np.outer(px, py)[nz])).sum())
    bias = (joint.shape[0] - 1) * (joint.shape[1] - 1) / (2 * len(x) * math.log(2))
    return {"plugin": mi, "bias": bias, "corrected": max(mi - bias, 0.0)}


def anonymity_metric(cfg, model="none", sessions=10000, seed=0, message=None):
    """
    Estimated ``I(speaker; Eve's observable)`` over sessions with one
    uniformly chosen speaker sending a fixed message.

    Models: ``"none"`` (Eve sees only the channel output),
    ``"announcements"`` (Eve reads every announcement; the estimate is the
    largest over single announcements), ``"insider"`` (Eve also holds user
    0's key, a corrupt-insider control outside the security model).
    Keys are uniform with XOR zero.
    """
    pair = cfg.pair
    rng = np.random.default_rng(seed)
    k = pair.message_bits
    msg = np.ones(k, dtype=np.uint8) if message is None else as_bits(message, k)
    speakers = rng.integers(0, cfg.N, sessions)
    outs, anns, insider = [], [], []
    for s in speakers:
        keys = synthetic_keys(cfg.N, pair.c1.n, rng)
        msgs = [msg if i == s else None for i in range(cfg.N)]
        res = broadcast_session(cfg, msgs, keys, rng)
        outs.append(res.output)
        anns.append(res.announcements)
        insider.append(pair.message_of(res.announcements[0] ^ keys[0]))
    outs, anns, insider = np.array(outs), np.array(anns), np.array(insider)
    if model == "none":
        est = plugin_mi(speakers, outs)
    elif model == "announcements":
        per = [plugin_mi(speakers, anns[:, i]) for i in range(cfg.N)]
        est = max(per, key=lambda r: r["corrected"])
    elif model == "insider":
        est = plugin_mi(speakers, insider)
    else:
        raise ValueError(f"unknown model {model!r}")
    return {"model": model, "sessions": sessions, "estimate": est["corrected"], **est}

"""
Classical and quantum information measures, trace-norm upper bounds on the
information a measurement can extract, and a brute-force measurement oracle
that gives matching lower bounds.

An eavesdropping attack on ``n`` qubits is a unitary on ``probe (x) message``
with the probe starting in ``|0>``. Its components are the probe vectors

    U |0>|i> = sum_j |E_{i,j}> |j>.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .qlinalg import (
    eigvalsh_clamped,
    random_unitary,
    shannon_entropy,
    trace_norm,
    validate_density,
    von_neumann_entropy,
)

GRID = (721, 1441)


# ----------------------------------------------------------- classical side


def _entropy_table(t):
    t = t[t > 0]
    return float(-(t * np.log2(t)).sum())


def _marginal(joint, keep):
    drop = tuple(ax for ax in range(joint.ndim) if ax not in keep)
    return joint.sum(axis=drop)


def _check_joint(joint):
    joint = np.asarray(joint, dtype=float)
    if np.any(joint < 0) or abs(joint.sum() - 1) > 1e-12:
        raise ValueError("joint table must be nonnegative and sum to 1")
    return joint


def entropy_of(joint, axes):
    return _entropy_table(_marginal(joint, tuple(axes)))


def mutual_information(joint, a_axes=(0,), b_axes=(1,)):
    """``I(A;B)`` in bits for groups of axes of a joint table."""
    joint = _check_joint(joint)
    a, b = tuple(a_axes), tuple(b_axes)
    return entropy_of(joint, a) + entropy_of(joint, b) - entropy_of(joint, a + b)


def conditional_mi(joint, cond=2, a_axes=(0,), b_axes=(1,)):
    """``I(A;B|C)``; ``cond`` is an axis or a tuple of axes."""
    joint = _check_joint(joint)
    c = (cond,) if np.isscalar(cond) else tuple(cond)
    a, b = tuple(a_axes), tuple(b_axes)
    return (entropy_of(joint, a + c) + entropy_of(joint, b + c)
            - entropy_of(joint, a + b + c) - entropy_of(joint, c))


# ----------------------------------------------------------- quantum sources


@dataclass(frozen=True)
class QuantumSource:
    probs: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 3 or len(states) != len(probs):
            raise ValueError("need one square state per probability")
        if abs(probs.sum() - 1) > 1e-10 or np.any(probs < 0):
            raise ValueError("source probabilities must form a distribution")
        for s in states:
            validate_density(s)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_kets(cls, probs, kets):
        kets = [np.asarray(k, dtype=complex) for k in kets]
        return cls(probs, np.array([np.outer(k, k.conj()) for k in kets]))

    @property
    def dim(self):
        return self.states.shape[1]

    def average(self):
        return np.einsum("s,sij->ij", self.probs, self.states)


def holevo_chi(src):
    """``S(sum p_s rho_s) - sum p_s S(rho_s)``."""
    return von_neumann_entropy(src.average()) - sum(
        p * von_neumann_entropy(r) for p, r in zip(src.probs, src.states) if p > 0)


def validate_povm(povm, dim, tol=1e-9):
    povm = np.asarray(povm, dtype=complex)
    if povm.ndim != 3 or povm.shape[1:] != (dim, dim):
        raise ValueError("POVM elements do not match the state dimension")
    for e in povm:
        if eigvalsh_clamped(e).min() < -tol:
            raise ValueError("POVM element is not PSD")
    if np.abs(povm.sum(axis=0) - np.eye(dim)).max() > tol:
        raise ValueError("POVM elements do not sum to identity")
    return povm


def basis_povm(u):
    """Rank-1 projectors onto the columns of a unitary."""
    u = np.asarray(u, dtype=complex)
    return np.array([np.outer(u[:, k], u[:, k].conj()) for k in range(u.shape[1])])


def measured_info(src, povm):
    """``I(S;E)`` for outcome probabilities ``p_s Tr(E_e rho_s)``."""
    povm = validate_povm(povm, src.dim)
    cond = np.einsum("eij,sji->se", povm, src.states).real
    joint = np.clip(src.probs[:, None] * cond, 0.0, None)
    return mutual_information(joint / joint.sum())


def _basis_info(src, u):
    cond = np.einsum("ik,sij,jk->sk", u.conj(), src.states, u).real
    joint = np.clip(src.probs[:, None] * cond, 0.0, None)
    pe = joint.sum(axis=0)
    return shannon_entropy(pe / pe.sum()) - sum(
        p * shannon_entropy(np.clip(row, 0, None) / max(row.sum(), 1e-300)) for p, row in zip(src.probs, cond) if p > 0)


def _qubit_basis(theta, phi):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [np.exp(1j * phi) * s, np.exp(1j * phi) * c]])


def _hermitian_unitary(x, d):
    h = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    n_off = len(iu[0])
    h[np.diag_indices(d)] = x[:d]
    h[iu] = x[d:d + n_off] + 1j * x[d + n_off:]
    h = h + np.triu(h, 1).conj().T
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def _structured_bases(src):
    # computational basis and eigenbases of the states and pairwise differences
    cands = [np.eye(src.dim, dtype=complex)]
    k = len(src.states)
    for i in range(k):
        cands.append(np.linalg.eigh(src.states[i])[1])
        for j in range(i + 1, k):
            cands.append(np.linalg.eigh(src.states[i] - src.states[j])[1])
    return cands


def accessible_info_oracle(src, grid=GRID, n_random=2000, refine=True, seed=0):
    """
    Lower bound on accessible information from projective measurements.

    Qubits: exhaustive ``(theta, phi)`` grid of bases then a Nelder-Mead
    polish. Dimensions 3 and 4: the computational basis, eigenbases of the
    states and of their pairwise differences, ``n_random`` Haar bases from a
    fixed seed, then Nelder-Mead on a Hermitian generator around the best one.

    Parameters
    ----------
    src : QuantumSource
    grid : tuple of int
        Grid size ``(n_theta, n_phi)`` over ``[0, pi] x [0, 2 pi]``.
    n_random : int
        Number of random bases for ``dim > 2``.
    refine : bool
        Run the local polish.
    seed : int
        Seed for the random bases.

    Returns
    -------
    float
        Mutual information achieved by the best basis found.
    """
    d = src.dim
    if d > 4:
        raise ValueError("oracle supports dimension at most 4")
    if d == 1:
        return 0.0
    if d == 2:
        thetas = np.linspace(0.0, np.pi, grid[0])
        phis = np.linspace(0.0, 2 * np.pi, grid[1])
        best, th, ph = _kernels.qubit_grid_info(src.probs, src.states, thetas, phis)
        if refine:
            res = minimize(lambda x: -_basis_info(src, _qubit_basis(x[0], x[1])), [th, ph],
                           method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400})
            best = max(best, -float(res.fun))
        return max(best, 0.0)
    rng = np.random.default_rng(seed)
    best, best_u = -1.0, None
    for u in _structured_bases(src) + [random_unitary(d, rng) for _ in range(n_random)]:
        val = _basis_info(src, u)
        if val > best:
            best, best_u = val, u
    if refine:
        def neg(x):
            return -_basis_info(src, best_u @ _hermitian_unitary(x, d))

        res = minimize(neg, np.zeros(d * d), method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return max(best, 0.0)


# ----------------------------------------------------------- upper bounds


def bound_one_bit(src):
    """
    Two-state bounds ``H(S) p0 Tr|rho0 - rho1|`` and ``H(S) Tr|rho0 - rho1|``.

    States are relabeled so that ``p0 >= p1``.
    """
    if len(src.probs) != 2:
        raise ValueError("bound_one_bit needs exactly two states")
    order = np.argsort(-src.probs, kind="stable")
    p = src.probs[order]
    r0, r1 = src.states[order]
    h = shannon_entropy(p)
    tn = trace_norm(r0 - r1)
    return {"lemma": h * p[0] * tn, "corollary": h * tn}


def bound_many(src):
    """
    ``sum_s p_s log(1/p_s) Tr|rho_s - rho|`` with ``rho`` the source average.

    For a uniform source ``corollary`` holds ``log n * sum (1/n) Tr|rho_s - rho|``,
    otherwise ``None``.
    """
    p = src.probs
    if np.any(p > 0.5 + 1e-12):
        raise ValueError("every probability must be at most 1/2")
    avg = src.average()
    tn = np.array([trace_norm(r - avg) for r in src.states])
    nz = p > 0
    lemma = float((p[nz] * np.log2(1 / p[nz]) * tn[nz]).sum())
    n = len(p)
    corollary = None
    if np.allclose(p, 1.0 / n, atol=1e-12):
        corollary = float(np.log2(n) * tn.mean())
    return {"lemma": lemma, "corollary": corollary}


def linear_entropy_bounds(p, pprime):
    """
    Linear lower bounds on entropy around a reference distribution.

    Scalar ``p``: binary ``H(p') - (H(p')/p')|p - p'|`` for ``p' <= 1/2``.
    Vector ``p``: ``H(p') - sum log(1/p'_i)|p_i - p'_i|`` for all ``p'_i <= 1/2``.
    """
    if np.isscalar(p):
        if not 0 < pprime <= 0.5:
            raise ValueError("need 0 < p' <= 1/2")
        h = shannon_entropy([pprime, 1 - pprime])
        return h - h / pprime * abs(p - pprime)
    p, q = np.asarray(p, dtype=float), np.asarray(pprime, dtype=float)
    if np.any(q > 0.5) or np.any(q <= 0):
        raise ValueError("need 0 < p'_i <= 1/2")
    return shannon_entropy(q) - float((np.log2(1 / q) * np.abs(p - q)).sum())


# ----------------------------------------------------------- attacks


@dataclass(frozen=True)
class AttackUnitary:
    """Unitary on ``probe (x) message`` with ``n`` message qubits."""

    n: int
    probe_dim: int
    U: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.U, dtype=complex)
        dim = self.probe_dim * 2 ** self.n
        if u.shape != (dim, dim):
            raise ValueError("attack unitary has the wrong size")
        if np.abs(u @ u.conj().T - np.eye(dim)).max() > 1e-10:
            raise ValueError("attack is not unitary")
        object.__setattr__(self, "U", u)

    def components(self):
        """``E[i, j]`` = probe vector attached to input ``i`` and output ``j``."""
        m = 2 ** self.n
        cols = self.U[:, :m]  # probe starts in |0>, so only columns 0..m-1 matter
        return np.transpose(cols.reshape(self.probe_dim, m, m), (2, 1, 0))


def identity_attack(n, probe_dim=2):
    return AttackUnitary(n, probe_dim, np.eye(probe_dim * 2 ** n))


def z_copy_attack(n):
    """CNOT from each message qubit onto its own probe qubit."""
    m = 2 ** n
    u = np.zeros((m * m, m * m))
    for e in range(m):
        for i in range(m):
            u[(e ^ i) * m + i, e * m + i] = 1.0
    return AttackUnitary(n, m, u)


def random_attack(n, probe_dim, rng):
    return AttackUnitary(n, probe_dim, random_unitary(probe_dim * 2 ** n, rng))


def _xor_sign(n):
    m = 2 ** n
    idx = np.arange(m)
    dots = np.bitwise_count((idx[:, None] & idx[None, :]).astype(np.uint64)) & 1
    return (-1.0) ** dots


def fourier_components(E, n):
    """``Ebar_{i,j} = 2^{-n} sum (-1)^{i.i' + j.j'} E_{i',j'}``."""
    s = _xor_sign(n)
    return np.einsum("ia,jb,abe->ije", s, s, E) / 2 ** n


def p_zero(E, n):
    """
    Probability of no error in the conjugate basis,
    ``2^{-2n} sum_{i',i'',k} <E_{i',i'^k} | E_{i'',i''^k}>``.
    """
    m = 2 ** n
    idx = np.arange(m)
    total = 0.0 + 0.0j
    for k in range(m):
        v = E[idx, idx ^ k].sum(axis=0)
        total += np.vdot(v, v)
    return float(total.real) / m ** 2


def p_zero_direct(attack):
    """Same probability from the attack matrix conjugated by Hadamards."""
    n = attack.n
    h1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    hn = np.ones((1, 1))
    for _ in range(n):
        hn = np.kron(hn, h1)
    full = np.kron(np.eye(attack.probe_dim), hn)
    u_x = full @ attack.U @ full
    m = 2 ** n
    ebar = AttackUnitary(n, attack.probe_dim, u_x).components()
    return float(sum(np.vdot(ebar[i, i], ebar[i, i]).real for i in range(m)) / m)


def phi_bar_norm(E, n):
    """``<phibar_0|phibar_0>`` with ``phi_i = sum_j |E_{i,j}>|i^j>``."""
    m = 2 ** n
    probe = E.shape[2]
    total = np.zeros((probe, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            total[:, i ^ j] += E[i, j]
    total /= np.sqrt(m)
    return float(np.vdot(total, total).real)


def eve_states(attack):
    """Eve's reduced states ``rho_i = sum_j |E_{i,j}><E_{i,j}|``."""
    E = attack.components()
    return np.einsum("ije,ijf->ief", E, E.conj())


def info_vs_disturbance(attack, oracle=True, **oracle_kw):
    """
    Information-vs-disturbance bound ``4 n sqrt(P_ebar)``.

    Returns
    -------
    dict
        ``bound``, ``p_zero``, ``p_error_fourier`` (``1 - P(0)``), ``states``
        (Eve's ensemble, one state per uniformly sent ``i``) and
        ``oracle_info`` when requested and the probe dimension allows it.
    """
    if attack.n > 2:
        raise ValueError("exhaustive computation supports n <= 2")
    E = attack.components()
    p0 = min(max(p_zero(E, attack.n), 0.0), 1.0)
    pe = 1.0 - p0
    out = {
        "bound": 4 * attack.n * np.sqrt(pe),
        "p_zero": p0,
        "p_error_fourier": pe,
        "states": eve_states(attack),
    }
    if oracle and attack.probe_dim <= 4:
        m = 2 ** attack.n
        src = QuantumSource(np.full(m, 1.0 / m), _hermitize(out["states"]))
        out["oracle_info"] = accessible_info_oracle(src, **oracle_kw)
    return out


def _hermitize(states):
    states = np.array(states, dtype=complex)
    states = 0.5 * (states + np.conj(np.transpose(states, (0, 2, 1))))
    tr = np.einsum("sii->s", states).real
    return states / tr[:, None, None]


def function_security_bound(attack, f, oracle=True, **oracle_kw):
    """
    Bound ``H(F(K)) 4 sqrt(P_e)`` on ``I(F(M); E | A)`` for a key used as a
    pad ``a = m ^ k``, with the message uniform.

    :param attack: ``AttackUnitary`` on the ``n`` key qubits.
    :param f: sequence of length ``2^n`` giving ``f(k)``.
    :return: dict with ``bound``, ``h_fk``, ``p_error``, and ``exact`` (the
        announcement-averaged oracle value) when requested.
    """
    n = attack.n
    m = 2 ** n
    f = np.asarray(f, dtype=int)
    if f.shape != (m,):
        raise ValueError("f must be defined on every n-bit string")
    values = np.unique(f)
    q = np.array([np.mean(f == v) for v in values])
    h_fk = shannon_entropy(q)
    E = attack.components()
    pe = 1.0 - min(max(p_zero(E, n), 0.0), 1.0)
    out = {"bound": h_fk * 4 * np.sqrt(pe), "h_fk": h_fk, "p_error": pe}
    if oracle:
        rhos = _hermitize(eve_states(attack))
        exact = 0.0
        if len(values) > 1:
            for a in range(m):
                sig = []
                for v in values:
                    ks = [k for k in range(m) if f[a ^ k] == v]
                    sig.append(sum(rhos[k] for k in ks) / len(ks))
                exact += accessible_info_oracle(QuantumSource(q, _hermitize(sig)), **oracle_kw) / m
        out["exact"] = exact
    return out


# ----------------------------------------------------------- whole-key lemmas


def whole_key_lemmas_check(joint, tol=1e-10):
    """
    Check the chain-rule lemmas for independent key bits.

    ``joint`` has axes ``(A_1, ..., A_m, E)``. Verifies
    ``I(A_i;E|A_<i) <= I(A_i;E|A_!=i)`` for each ``i`` and
    ``I(A;E) <= m max_{i, a} I(A_i;E|A_!=i = a)``.
    """
    joint = _check_joint(joint)
    m = joint.ndim - 1
    e_ax = (m,)
    pa = _marginal(joint, tuple(range(m)))
    prod = np.ones(())
    for i in range(m):
        prod = np.multiply.outer(prod, _marginal(joint, (i,)))
    if np.abs(pa - prod).max() > 1e-10:
        raise ValueError("key variables are not independent")
    chain = []
    for i in range(m):
        before = tuple(range(i))
        others = tuple(a for a in range(m) if a != i)
        lhs = conditional_mi(joint, before, (i,), e_ax) if before else mutual_information(joint, (i,), e_ax)
        rhs = conditional_mi(joint, others, (i,), e_ax) if others else mutual_information(joint, (i,), e_ax)
        chain.append({"i": i, "lhs": lhs, "rhs": rhs, "pass": lhs <= rhs + tol})
    worst = 0.0
    for i in range(m):
        others = tuple(a for a in range(m) if a != i)
        moved = np.moveaxis(joint, [*others, i, m], range(m + 1))
        flat = moved.reshape(-1, joint.shape[i], joint.shape[m])
        for block in flat:
            w = block.sum()
            if w > 0:
                worst = max(worst, mutual_information(block / w))
    total = mutual_information(joint, tuple(range(m)), e_ax)
    return {
        "chain": chain,
        "total_info": total,
        "max_single": worst,
        "whole_key_bound": m * worst,
        "pass": all(c["pass"] for c in chain) and total <= m * worst + tol,
    }

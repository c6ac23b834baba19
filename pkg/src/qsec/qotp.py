"""
Quantum one-time pad on ``n`` qubits.

An encryption set is a list of unitaries with key probabilities. It is
perfectly secure when the average of ``U rho U^dag`` is ``I / 2^n`` for every
input, which is checked here through the Pauli basis.
"""

from dataclasses import dataclass, field

import numpy as np

from .gfpauli import all_labels, pauli_matrix
from .qlinalg import shannon_entropy


@dataclass(frozen=True)
class EncryptionSet:
    n: int
    probs: np.ndarray
    unitaries: np.ndarray
    labels: tuple = field(default=None, compare=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        us = np.asarray(self.unitaries, dtype=complex)
        dim = 2 ** self.n
        if us.ndim != 3 or us.shape[1:] != (dim, dim) or len(probs) != len(us):
            raise ValueError("unitaries must have shape (M, 2^n, 2^n) matching probs")
        if abs(probs.sum() - 1) > 1e-10 or np.any(probs < 0):
            raise ValueError("key probabilities must form a distribution")
        eye = np.eye(dim)
        for u in us:
            if np.abs(u @ u.conj().T - eye).max() > 1e-10:
                raise ValueError("encryption operator is not unitary")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "unitaries", us)

    def __len__(self):
        return len(self.probs)

    def to_json(self):
        out = {"n": self.n, "probs": self.probs.tolist()}
        if self.labels is not None:
            out["labels"] = [lab.to_json() for lab in self.labels]
        else:
            out["unitaries"] = [{"re": u.real.tolist(), "im": u.imag.tolist()} for u in self.unitaries]
        return out

    @classmethod
    def from_json(cls, obj):
        from .gfpauli import PauliIndex

        n = int(obj["n"])
        if "labels" in obj:
            labels = tuple(PauliIndex.from_json(x) for x in obj["labels"])
            us = np.array([pauli_matrix(lab) for lab in labels])
            return cls(n, obj["probs"], us, labels)
        us = np.array([np.asarray(u["re"]) + 1j * np.asarray(u["im"]) for u in obj["unitaries"]])
        return cls(n, obj["probs"], us)


def _check_n(n):
    if not 1 <= n <= 4:
        raise ValueError("n must be between 1 and 4")


def pauli_pad(n):
    """Uniform distribution over the ``4^n`` operators ``X^alpha Z^beta``."""
    _check_n(n)
    labels = tuple(all_labels(2, n))
    us = np.array([pauli_matrix(lab) for lab in labels])
    return EncryptionSet(n, np.full(len(labels), 1.0 / len(labels)), us, labels)


def encrypt_average(rho, es):
    """``sum_k p_k U_k rho U_k^dag``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != es.unitaries.shape[1:]:
        raise ValueError("state dimension does not match the encryption set")
    us = es.unitaries
    return np.einsum("k,kij,jl,kml->im", es.probs, us, rho, us.conj(), optimize=True)


def _key(es, k):
    if not 0 <= k < len(es):
        raise KeyError(f"unknown key index {k}")
    return es.unitaries[k]


def encrypt_sample(rho, es, k):
    u = _key(es, k)
    return u @ rho @ u.conj().T


def decrypt(rho_c, es, k):
    u = _key(es, k)
    return u.conj().T @ rho_c @ u


def pauli_basis(n):
    return np.array([pauli_matrix(lab) for lab in all_labels(2, n)])


def is_secure(es, tol=1e-10):
    """
    Check ``sum_k p_k U_k P U_k^dag = 0`` for every non-identity Pauli ``P``
    (and ``= I`` for ``P = I``).

    Returns
    -------
    dict
        ``max_defect`` is the largest spectral-norm residual, ``passed`` is
        ``max_defect <= tol``.
    """
    dim = 2 ** es.n
    eye = np.eye(dim)
    worst = 0.0
    for idx, pm in enumerate(pauli_basis(es.n)):
        avg = encrypt_average(pm, es)
        target = eye if idx == 0 else 0.0
        worst = max(worst, float(np.linalg.norm(avg - target, 2)))
    return {"max_defect": worst, "passed": worst <= tol}


def conjugated_basis_set(w, n):
    """Uniform set ``{W X^alpha Z^beta W^dag}``."""
    _check_n(n)
    w = np.asarray(w, dtype=complex)
    us = np.array([w @ pm @ w.conj().T for pm in pauli_basis(n)])
    return EncryptionSet(n, np.full(len(us), 4.0 ** -n), us)


def gram_matrix(es):
    """Rows ``sqrt(p_k) Tr(P^dag U_k) / 2^n`` over the Pauli basis ``P``."""
    paulis = pauli_basis(es.n)
    coeff = np.einsum("aij,kij->ka", paulis.conj(), es.unitaries) / 2 ** es.n
    return np.sqrt(es.probs)[:, None] * coeff


def gram_analysis(es, tol=1e-8):
    """
    Key-size analysis of a secure set.

    Returns ``M``, ``key_entropy`` (bits), ``ctc_defect`` (max entry of
    ``C^dag C - I/4^n``) and ``satisfies_min_entropy``.
    """
    if not is_secure(es, tol)["passed"]:
        raise ValueError("gram_analysis needs a secure encryption set")
    c = gram_matrix(es)
    ctc = c.conj().T @ c
    defect = float(np.abs(ctc - np.eye(ctc.shape[0]) / 4 ** es.n).max())
    h = shannon_entropy(es.probs)
    return {
        "M": len(es),
        "key_entropy": h,
        "ctc_defect": defect,
        "satisfies_min_entropy": h >= 2 * es.n - 1e-9,
    }


# --------------------------------------------------------------- superdense

_SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


def _bell_states():
    # outcome (a, b) is (X^a Z^b (x) I) |singlet>
    out = {}
    for a in (0, 1):
        for b in (0, 1):
            op = np.linalg.matrix_power(_X, a) @ np.linalg.matrix_power(_Z, b)
            out[(a, b)] = np.kron(op, np.eye(2)) @ _SINGLET
    return out


def superdense_key_recovery(n, key, rng=None):
    """
    Recover a Pauli key from shared singlets.

    Each of ``n`` singlets has ``X^{alpha_i} Z^{beta_i}`` applied to its
    first half, then the pair is measured in the Bell basis
    ``{(X^a Z^b (x) I)|singlet>}``.

    :param n: number of qubit pairs (at most 3).
    :param key: pair ``(alpha, beta)`` of length-``n`` bit sequences.
    :param rng: optional ``numpy.random.Generator`` for sampling outcomes.
    :return: recovered ``(alpha, beta)`` as tuples.
    """
    if not 1 <= n <= 3:
        raise ValueError("n must be between 1 and 3")
    alpha, beta = (tuple(int(x) & 1 for x in v) for v in key)
    if len(alpha) != n or len(beta) != n:
        raise ValueError("key length must equal n")
    rng = np.random.default_rng() if rng is None else rng
    state = np.ones(1, dtype=complex)
    for a, b in zip(alpha, beta):
        op = np.linalg.matrix_power(_X, a) @ np.linalg.matrix_power(_Z, b)
        state = np.kron(state, np.kron(op, np.eye(2)) @ _SINGLET)
    bell = _bell_states()
    outcomes = list(bell)
    # joint Bell-basis amplitudes, pair by pair
    psi = state.reshape((4,) * n)
    basis = np.array([bell[o] for o in outcomes])
    for axis in range(n):
        psi = np.moveaxis(np.tensordot(basis.conj(), psi, axes=([1], [axis])), 0, axis)
    probs = np.abs(psi.ravel()) ** 2
    pick = rng.choice(len(probs), p=probs / probs.sum())
    digits = np.unravel_index(pick, (4,) * n)
    rec = [outcomes[i] for i in digits]
    return tuple(r[0] for r in rec), tuple(r[1] for r in rec)

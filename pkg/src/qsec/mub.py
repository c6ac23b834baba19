"""
Mutually unbiased bases for prime and prime-power dimensions.

A basis is stored as a ``d x d`` complex array whose *rows* are the basis
vectors, which is also how the plain-text dump prints them.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import gfpauli
from .gfpauli import PauliIndex, PrimePower, pauli_matrix

GAP_TOL = 1e-8
_PHASE_TOL = 1e-9


@dataclass(frozen=True)
class MubFamily:
    d: int
    bases: tuple

    def __len__(self):
        return len(self.bases)

    def to_json(self):
        return {
            "d": self.d,
            "bases": [{"re": b.real.tolist(), "im": b.imag.tolist()} for b in self.bases],
        }

    @classmethod
    def from_json(cls, obj):
        bases = tuple(np.asarray(b["re"], dtype=float) + 1j * np.asarray(b["im"], dtype=float) for b in obj["bases"])
        for b in bases:
            if b.shape != (obj["d"], obj["d"]):
                raise ValueError("basis shape does not match d")
        return cls(int(obj["d"]), bases)


def canonicalize_basis(basis):
    """Fix each row's phase (first nonzero entry real positive) and sort rows."""
    basis = np.array(basis, dtype=complex)
    for r in range(basis.shape[0]):
        row = basis[r]
        nz = np.flatnonzero(np.abs(row) > _PHASE_TOL)
        ph = row[nz[0]] / abs(row[nz[0]])
        basis[r] = row / ph
    keys = [tuple(np.round(np.column_stack([row.real, row.imag]).ravel(), 8)) for row in basis]
    order = sorted(range(len(keys)), key=lambda i: keys[i], reverse=True)
    return basis[order]


def same_basis(b1, b2, tol=1e-9):
    """True when the rows agree up to per-vector phase and ordering."""
    b1, b2 = np.asarray(b1), np.asarray(b2)
    if b1.shape != b2.shape:
        return False
    ov = np.abs(b1.conj() @ b2.T)
    return bool(np.all(np.abs(ov.max(axis=1) - 1) < tol) and np.all(np.abs(ov.max(axis=0) - 1) < tol))


def verify_mub(family, tol=1e-9):
    """
    Orthonormality and unbiasedness defects of a family.

    Returns
    -------
    dict
        ``max_orthonormality_defect``, ``max_unbiasedness_defect`` and
        ``passed`` (both defects below ``tol``).
    """
    d = family.d
    orth = 0.0
    for b in family.bases:
        orth = max(orth, float(np.abs(b.conj() @ b.T - np.eye(d)).max()))
    unb = 0.0
    for i in range(len(family.bases)):
        for j in range(i + 1, len(family.bases)):
            ov = np.abs(family.bases[i].conj() @ family.bases[j].T) ** 2
            unb = max(unb, float(np.abs(ov - 1.0 / d).max()))
    return {
        "max_orthonormality_defect": orth,
        "max_unbiasedness_defect": unb,
        "passed": orth < tol and unb < tol,
    }


def prime_eigenvector(p, k, t):
    """
    Closed-form eigenvector of ``X Z^k`` with eigenvalue ``w^t`` (odd p).

    ``psi_j = w^{t(p-j)} w^{-k s_j} / sqrt(p)`` with ``s_j = j + ... + (p-1)``.
    """
    if p == 2:
        raise ValueError("closed form needs an odd prime; XZ has eigenvalues +-i at p=2")
    j = np.arange(p)
    s = (p - 1) * p // 2 - j * (j - 1) // 2
    expo = (t * (p - j) - k * s) % p
    return np.exp(2j * np.pi * expo / p) / np.sqrt(p)


def _coefficient_sets(n):
    t = np.arange(n, dtype=float)
    yield (t + 1) / n, np.sqrt(t + 2) / n
    yield 1.0 / (t + 1.5), np.cbrt(t + 1.0) / (t + 3.0)


def simultaneous_eigenbasis(mats):
    """
    Common eigenbasis of commuting unitaries (rows are eigenvectors).

    Diagonalizes the Hermitian combination ``sum a_t (U+U^dag) + b_t i(U-U^dag)``
    and checks that its spectrum is nondegenerate.
    """
    mats = [np.asarray(u, dtype=complex) for u in mats]
    d = mats[0].shape[0]
    for a_c, b_c in _coefficient_sets(len(mats)):
        h = np.zeros((d, d), dtype=complex)
        for u, a, b in zip(mats, a_c, b_c):
            h += a * (u + u.conj().T) + 1j * b * (u - u.conj().T)
        w, v = np.linalg.eigh(h)
        if d == 1 or np.diff(w).min() > GAP_TOL:
            # commuting iff every member is diagonal in this basis
            for u in mats:
                r = v.conj().T @ u @ v
                if np.abs(r - np.diag(np.diag(r))).max() > 1e-8:
                    raise ValueError("class contains non-commuting matrices")
            return canonicalize_basis(v.T)
    raise AssertionError("joint eigenspaces stayed degenerate after two coefficient sets")


def _family(d, bases):
    return MubFamily(d, tuple(canonicalize_basis(b) for b in bases))


def mub_prime(p):
    """
    ``p + 1`` MUBs in prime dimension ``p <= 101``: the standard basis and the
    eigenbases of ``X Z^k`` for ``k = 0..p-1``.
    """
    if not gfpauli.is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p > 101:
        raise ValueError("mub_prime supports p <= 101")
    bases = [np.eye(p, dtype=complex)]
    if p == 2:
        x, z = gfpauli.build_xd(2), gfpauli.build_zd(2)
        bases += [simultaneous_eigenbasis([x]), simultaneous_eigenbasis([x @ z])]
    else:
        for k in range(p):
            bases.append(np.array([prime_eigenvector(p, k, t) for t in range(p)]))
    return _family(p, bases)


def class_labels(pp, method=None):
    """
    The ``p^m + 1`` maximal commuting classes as lists of ``d-1`` labels.

    Class 0 is ``(0 | v)``; class ``j >= 1`` is ``(v | A_{j-1} v)``.
    """
    p, m = pp.p, pp.m
    if method is None:
        method = "quadratic" if m == 2 else "general"
    mats = gfpauli.symmetric_matrix_family(pp, method)
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if gfpauli.det_mod_p(mats[i] - mats[j], p) == 0:
                raise AssertionError("symmetric family has a singular difference")
    vecs = [v for v in product(range(p), repeat=m) if any(v)]
    zero = (0,) * m
    classes = [[PauliIndex(p, zero, v) for v in vecs]]
    for a in mats:
        classes.append([PauliIndex(p, v, tuple(int(x) for x in a.dot(v) % p)) for v in vecs])
    return classes


def mub_prime_power(p, m, method=None):
    """
    ``p^m + 1`` MUBs for ``d = p^m <= 64``.

    Each class of commuting Pauli labels is simultaneously diagonalized.
    ``method`` selects ``"quadratic"`` or ``"general"`` symmetric matrices;
    the default is ``"quadratic"`` for ``m = 2``.
    """
    pp = PrimePower(p, m)
    if pp.d > 64:
        raise ValueError("mub_prime_power supports p^m <= 64")
    if m == 1 and method is None:
        return mub_prime(p)
    classes = class_labels(pp, method)
    bases = [simultaneous_eigenbasis([pauli_matrix(lab) for lab in cls]) for cls in classes]
    return _family(pp.d, bases)


def mub(d):
    """Full MUB family for any supported prime-power ``d``."""
    pp = gfpauli.factor_prime_power(d)
    return mub_prime(pp.p) if pp.m == 1 else mub_prime_power(pp.p, pp.m)


def mub_to_classes(family, tol=1e-9):
    """
    Commuting unitary classes ``U_{j,t} = sum_k e^{2 pi i t k / d} |psi_k><psi_k|``
    for ``t = 1..d-1`` (the identity ``t = 0`` is dropped).
    """
    if not verify_mub(family, tol)["passed"]:
        raise ValueError("family does not verify as MUB")
    d = family.d
    k = np.arange(d)
    out = []
    for b in family.bases:
        cls = []
        for t in range(1, d):
            ph = np.exp(2j * np.pi * t * k / d)
            cls.append((b.T * ph) @ b.conj())
        out.append(cls)
    return out


def classes_to_mub(classes):
    """Simultaneous eigenbasis of each commuting class."""
    mats = [[np.asarray(u, dtype=complex) for u in cls] for cls in classes]
    d = mats[0][0].shape[0]
    return _family(d, [simultaneous_eigenbasis(c) for c in mats])


def _fmt_complex(z):
    re, im = round(z.real, 6) + 0.0, round(z.imag, 6) + 0.0
    if im == 0:
        return f"{re:g}"
    if re == 0:
        return f"{im:g}i"
    return f"{re:g}{im:+g}i"


def format_family(family):
    """Plain-text dump, one basis per block, amplitudes scaled by sqrt(d)."""
    d = family.d
    lines = []
    for n, b in enumerate(family.bases):
        lines.append(f"B{n} = 1/sqrt({d}) *")
        for row in b * np.sqrt(d):
            lines.append("  [" + ", ".join(_fmt_complex(z) for z in row) + "]")
    return "\n".join(lines) + "\n"

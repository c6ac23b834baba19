"""
Finite fields F_{p^m} and generalized Pauli operators.

A Pauli label ``(alpha | beta)`` with ``alpha, beta`` in F_p^m stands for
``X(alpha) Z(beta) = (X^{a_1} (x) ... (x) X^{a_m}) (Z^{b_1} (x) ... (x) Z^{b_m})``,
so that ``X(alpha) Z(beta) |a> = w^{a.beta} |a + alpha>``.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .qlinalg import MAX_DIM


def is_prime(n):
    n = int(n)
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class PrimePower:
    p: int
    m: int = 1

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.p ** self.m > MAX_DIM:
            raise ValueError(f"p^m = {self.p ** self.m} exceeds cap {MAX_DIM}")

    @property
    def d(self):
        return self.p ** self.m


def factor_prime_power(d):
    """Return ``PrimePower`` with ``p**m == d`` or raise ``ValueError``."""
    d = int(d)
    for p in range(2, d + 1):
        if d % p == 0:
            m, r = 0, d
            while r % p == 0:
                r //= p
                m += 1
            if r != 1 or not is_prime(p):
                raise ValueError(f"{d} is not a prime power")
            return PrimePower(p, m)
    raise ValueError(f"{d} is not a prime power")


def build_xd(d):
    """Cyclic shift ``X|j> = |j+1 mod d>``."""
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def build_zd(d):
    """Clock matrix ``diag(w^j)`` with ``w = exp(2 pi i / d)``."""
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


@dataclass(frozen=True)
class PauliIndex:
    """Label ``w^phase X(alpha) Z(beta)`` over F_p^m."""

    p: int
    alpha: tuple
    beta: tuple
    phase: int = 0

    def __post_init__(self):
        a = tuple(int(x) % self.p for x in self.alpha)
        b = tuple(int(x) % self.p for x in self.beta)
        if len(a) != len(b):
            raise ValueError("alpha and beta must have equal length")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "phase", int(self.phase) % self.p)

    @property
    def m(self):
        return len(self.alpha)

    def is_identity(self):
        return not any(self.alpha) and not any(self.beta)

    def __mul__(self, other):
        # X(a)Z(b) X(a')Z(b') = w^{b.a'} X(a+a')Z(b+b')
        p = self.p
        ph = self.phase + other.phase + int(np.dot(self.beta, other.alpha))
        return PauliIndex(
            p,
            tuple((x + y) % p for x, y in zip(self.alpha, other.alpha)),
            tuple((x + y) % p for x, y in zip(self.beta, other.beta)),
            ph,
        )

    def to_json(self):
        return {"p": self.p, "m": self.m, "alpha": list(self.alpha), "beta": list(self.beta), "phase": self.phase}

    @classmethod
    def from_json(cls, obj):
        idx = cls(obj["p"], tuple(obj["alpha"]), tuple(obj["beta"]), obj.get("phase", 0))
        if idx.m != obj["m"]:
            raise ValueError("PauliIndex JSON m mismatch")
        return idx


def all_labels(p, m):
    """All ``p^{2m}`` phase-free labels, alpha-major in lexicographic order."""
    vecs = list(product(range(p), repeat=m))
    return [PauliIndex(p, a, b) for a in vecs for b in vecs]


def pauli_matrix(idx, pp=None):
    """Dense matrix of ``w^phase X(alpha) Z(beta)``."""
    p = idx.p
    if pp is not None and (pp.p != p or pp.m != idx.m):
        raise ValueError("label does not match the prime power")
    x, z = build_xd(p), build_zd(p)
    out = np.ones((1, 1), dtype=complex)
    for a, b in zip(idx.alpha, idx.beta):
        out = np.kron(out, np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b))
    return np.exp(2j * np.pi * idx.phase / p) * out


def commutation_phase(a, b, p=None):
    """Exponent ``e`` with ``B A = w^e A B``."""
    p = a.p if p is None else p
    if a.p != b.p or a.m != b.m:
        raise ValueError("labels live in different groups")
    return int(np.dot(a.alpha, b.beta) - np.dot(b.alpha, a.beta)) % p


def commutes(a, b, p=None):
    return commutation_phase(a, b, p) == 0


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr(A^dagger B)``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return complex(np.vdot(a, b))


# ---------------------------------------------------------------- polynomials
# Polynomials over F_p are coefficient tuples, lowest degree first.


def _poly_trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a, f, p):
    a = [x % p for x in a]
    f = _poly_trim(f)
    inv_lead = pow(f[-1], -1, p)
    while len(_poly_trim(a)) >= len(f):
        a = _poly_trim(a)
        c = a[-1] * inv_lead % p
        shift = len(a) - len(f)
        for i, fc in enumerate(f):
            a[shift + i] = (a[shift + i] - c * fc) % p
    return _poly_trim(a)


def _poly_mul(a, b, p):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = (out[i + j] + x * y) % p
    return out


def is_irreducible(f, p):
    """Trial division by every monic polynomial of degree up to deg(f)/2."""
    f = _poly_trim([c % p for c in f])
    deg = len(f) - 1
    if deg < 1:
        return False
    for k in range(1, deg // 2 + 1):
        for low in product(range(p), repeat=k):
            if not _poly_mod(f, list(low) + [1], p):
                return False
    return True


@lru_cache(maxsize=None)
def first_irreducible(p, m):
    """
    Lexicographically first monic irreducible polynomial of degree ``m``.

    Candidates are ordered by the integer ``sum c_i p^i`` of their lower
    coefficients. Returned lowest degree first, including the leading 1.
    """
    if m == 1:
        return (0, 1)
    for code in range(p ** m):
        low = [(code // p ** i) % p for i in range(m)]
        if low[0] == 0:
            continue
        f = tuple(low + [1])
        if is_irreducible(f, p):
            return f
    raise RuntimeError("no irreducible polynomial found")


def irreducible_quadratic(p):
    """
    Coefficients ``(s, t)`` such that ``g^2 - t g - s`` is irreducible over F_p.

    The polynomial is taken in the form ``x^2 + x + c`` with the smallest
    such ``c``; one always exists, and it gives ``x^2+x+1`` for p=2 and
    ``x^2+x+2`` for p=3.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    for c in range(p):
        if all((x * x + x + c) % p for x in range(p)):
            return (-c) % p, (-1) % p
    raise RuntimeError("unreachable: x^2+x+c irreducible for some c")


class GaloisField:
    """F_{p^m} with elements stored as coefficient tuples of length ``m``."""

    def __init__(self, p, m, modulus=None):
        self.pp = PrimePower(p, m)
        self.p, self.m = p, m
        self.modulus = tuple(modulus) if modulus is not None else first_irreducible(p, m)
        if len(self.modulus) != m + 1 or self.modulus[-1] % p != 1 or not is_irreducible(self.modulus, p):
            raise ValueError("modulus must be monic irreducible of degree m")

    def __eq__(self, other):
        return isinstance(other, GaloisField) and (self.p, self.m, self.modulus) == (other.p, other.m, other.modulus)

    def __hash__(self):
        return hash((self.p, self.m, self.modulus))

    def element(self, coeffs):
        c = [int(x) % self.p for x in coeffs]
        if len(c) != self.m:
            raise ValueError("wrong number of coefficients")
        return FieldElement(self, tuple(c))

    def from_int(self, code):
        return self.element([(code // self.p ** i) % self.p for i in range(self.m)])

    def elements(self):
        return [self.from_int(c) for c in range(self.p ** self.m)]

    def zero(self):
        return self.from_int(0)

    def one(self):
        return self.from_int(1)

    def _reduce(self, poly):
        r = _poly_mod(poly, self.modulus, self.p)
        return tuple(r + [0] * (self.m - len(r)))


@dataclass(frozen=True)
class FieldElement:
    field: GaloisField
    coeffs: tuple

    def _same(self, other):
        if self.field != other.field:
            raise ValueError("elements of different fields")

    def __add__(self, other):
        self._same(other)
        return FieldElement(self.field, tuple((a + b) % self.field.p for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return FieldElement(self.field, tuple((-a) % self.field.p for a in self.coeffs))

    def __mul__(self, other):
        self._same(other)
        return FieldElement(self.field, self.field._reduce(_poly_mul(list(self.coeffs), list(other.coeffs), self.field.p)))

    def __pow__(self, k):
        out = self.field.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_zero(self):
        return not any(self.coeffs)

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("zero has no inverse")
        # multiplicative group has order p^m - 1
        return self ** (self.field.p ** self.field.m - 2)

    def to_int(self):
        return sum(c * self.field.p ** i for i, c in enumerate(self.coeffs))


def wootters_fields_matrices(pp, modulus=None):
    """
    Structure-constant matrices of F_{p^m} in the monomial basis.

    ``B[l][i, j]`` is the coefficient of ``x^l`` in ``x^i x^j`` reduced modulo
    the field polynomial. Returns an int array of shape ``(m, m, m)``.
    """
    fld = GaloisField(pp.p, pp.m, modulus)
    m = pp.m
    out = np.zeros((m, m, m), dtype=np.int64)
    for i in range(m):
        for j in range(m):
            mono = [0] * (i + j) + [1]
            prod = fld._reduce(mono)
            for l in range(m):
                out[l, i, j] = prod[l]
    return out


def det_mod_p(a, p):
    """Determinant of an integer matrix over F_p by Gaussian elimination."""
    a = np.array(a, dtype=np.int64) % p
    n = a.shape[0]
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r, c]), None)
        if piv is None:
            return 0
        if piv != c:
            a[[c, piv]] = a[[piv, c]]
            det = -det
        det = det * a[c, c] % p
        inv = pow(int(a[c, c]), -1, p)
        for r in range(c + 1, n):
            if a[r, c]:
                a[r] = (a[r] - a[r, c] * inv * a[c]) % p
    return det % p


def symmetric_matrix_family(pp, method="general"):
    """
    The ``p^m`` symmetric matrices ``A_a = sum_l a_l B_l`` indexed by
    ``a`` in F_p^m (``a_0`` least significant).

    ``method="quadratic"`` (m == 2 only) uses ``[[a, b], [b, s a + t b]]``
    with ``(s, t)`` from :func:`irreducible_quadratic`.
    """
    p, m = pp.p, pp.m
    if method == "quadratic":
        if m != 2:
            raise ValueError("quadratic method needs m == 2")
        s, t = irreducible_quadratic(p)
        return [np.array([[a, b], [b, (s * a + t * b) % p]], dtype=np.int64)
                for b in range(p) for a in range(p)]
    if method != "general":
        raise ValueError(f"unknown method {method!r}")
    B = wootters_fields_matrices(pp)
    mats = []
    for code in range(p ** m):
        coeffs = [(code // p ** i) % p for i in range(m)]
        mats.append(np.tensordot(coeffs, B, axes=1) % p)
    return mats

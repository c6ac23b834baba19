from itertools import permutations

import numpy as np
import pytest

from qsec.gfpauli import PrimePower, build_xd, build_zd, commutes, hs_inner, pauli_matrix
from qsec.mub import (
    MubFamily,
    canonicalize_basis,
    class_labels,
    classes_to_mub,
    format_family,
    mub,
    mub_prime,
    mub_prime_power,
    mub_to_classes,
    prime_eigenvector,
    same_basis,
    simultaneous_eigenbasis,
    verify_mub,
)

S2 = 1 / np.sqrt(2)
PAPER_D2 = [
    [[1, 0], [0, 1]],
    [[S2, S2], [S2, -S2]],
    [[S2, 1j * S2], [S2, -1j * S2]],
]
I_ = 1j
PAPER_D4 = [np.eye(4)] + [np.array(b) / 2 for b in [
    [[1, 1, 1, 1], [1, -1, -1, 1], [1, 1, -1, -1], [1, -1, 1, -1]],
    [[1, I_, I_, -1], [1, -I_, -I_, -1], [1, I_, -I_, 1], [1, -I_, I_, 1]],
    [[1, 1, -I_, I_], [1, -1, I_, I_], [1, 1, I_, -I_], [1, -1, -I_, -I_]],
    [[1, -I_, 1, I_], [1, I_, -1, I_], [1, I_, 1, -I_], [1, -I_, -1, -I_]],
]]


def family_matches(fam, listed):
    # equal up to per-vector phase, vector order and basis order
    used = set()
    for b in listed:
        hit = [i for i, f in enumerate(fam.bases) if i not in used and same_basis(b, f)]
        if not hit:
            return False
        used.add(hit[0])
    return len(used) == len(fam.bases)


def inner_product_defect(bases, d):
    worst = 0.0
    for i, a in enumerate(bases):
        for j, b in enumerate(bases):
            for u in a:
                for v in b:
                    target = (1.0 if np.allclose(u, v) else 0.0) if i == j else 1.0 / d
                    worst = max(worst, abs(abs(np.vdot(u, v)) ** 2 - target))
    return worst


class TestPrime:
    def test_d2_matches_listed(self):
        fam = mub_prime(2)
        assert len(fam) == 3
        assert family_matches(fam, PAPER_D2)
        assert verify_mub(MubFamily(2, tuple(np.array(b, dtype=complex) for b in PAPER_D2)), 1e-12)["passed"]

    def test_d3_matches_listed_operators(self):
        w = np.exp(2j * np.pi / 3)
        ops = [
            np.diag([1, w, w * w]),
            np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]),
            np.array([[0, 0, w * w], [1, 0, 0], [0, w, 0]]),
            np.array([[0, 0, w], [1, 0, 0], [0, w * w, 0]]),
        ]
        listed = [np.linalg.eig(u)[1].T for u in ops]
        assert family_matches(mub_prime(3), listed)

    @pytest.mark.parametrize("p", [5, 7, 11])
    def test_direct_inner_products(self, p):
        fam = mub_prime(p)
        assert len(fam) == p + 1
        assert inner_product_defect(fam.bases, p) < 1e-10

    def test_non_prime(self):
        with pytest.raises(ValueError):
            mub_prime(9)
        with pytest.raises(ValueError):
            mub_prime(103)

    @pytest.mark.parametrize("p", [3, 5, 7])
    def test_eigen_relation(self, p):
        w = np.exp(2j * np.pi / p)
        x, z = build_xd(p), build_zd(p)
        for k in range(p):
            op = x @ np.linalg.matrix_power(z, k)
            for t in range(p):
                v = prime_eigenvector(p, k, t)
                np.testing.assert_allclose(op @ v, w ** t * v, atol=1e-10)

    def test_d2_xz_eigenvalues(self):
        xz = build_xd(2) @ build_zd(2)
        basis = mub_prime(2).bases[2]
        for v in basis:
            lam = np.vdot(v, xz @ v)
            assert abs(abs(lam.imag) - 1) < 1e-12
            np.testing.assert_allclose(xz @ v, lam * v, atol=1e-12)

    @pytest.mark.parametrize("p", [3, 5])
    def test_cyclic_shift(self, p):
        x, z = build_xd(p), build_zd(p)
        for k in range(p):
            for ell in range(p):
                op = x @ np.linalg.matrix_power(z, ell)
                for t in range(p):
                    img = op @ prime_eigenvector(p, k, t)
                    tgt = prime_eigenvector(p, k, (t + k - ell) % p)
                    assert abs(abs(np.vdot(tgt, img)) - 1) < 1e-10

    def test_two_basis_generic(self):
        # eigenbasis of V paired with the standard basis that V shifts cyclically
        p = 5
        v = build_xd(p)
        b1 = simultaneous_eigenbasis([v])
        assert verify_mub(MubFamily(p, (np.eye(p, dtype=complex), b1)))["passed"]


class TestPrimePower:
    def test_d4_listed_bases(self):
        fam = mub_prime_power(2, 2)
        assert len(fam) == 5
        assert family_matches(fam, PAPER_D4)

    def test_d4_classes(self):
        # (alpha, beta) of X^alpha Z^beta; Y = XZ
        listed = [
            {((0, 0), (1, 0)), ((0, 0), (0, 1)), ((0, 0), (1, 1))},
            {((1, 0), (0, 0)), ((0, 1), (0, 0)), ((1, 1), (0, 0))},
            {((1, 0), (1, 0)), ((0, 1), (0, 1)), ((1, 1), (1, 1))},
            {((1, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 1), (1, 0))},
            {((1, 0), (1, 1)), ((0, 1), (1, 0)), ((1, 1), (0, 1))},
        ]
        got = [{(l.alpha, l.beta) for l in cls} for cls in class_labels(PrimePower(2, 2))]
        assert sorted(map(sorted, got)) == sorted(map(sorted, listed))

    def test_d9_quadratic_matrices(self):
        cls = class_labels(PrimePower(3, 2), "quadratic")
        assert len(cls) == 10
        # class of (1|A): label with alpha = e1 has beta = first column of A
        mats = set()
        for c in cls[1:]:
            col0 = next(l.beta for l in c if l.alpha == (1, 0))
            col1 = next(l.beta for l in c if l.alpha == (0, 1))
            mats.add((col0, col1))
        for (a, b), (b2, c) in mats:
            assert b == b2 and c == (a + 2 * b) % 3

    @pytest.mark.parametrize("p,m", [(2, 2), (2, 3), (3, 2), (2, 4)])
    def test_verifies(self, p, m):
        fam = mub_prime_power(p, m)
        assert len(fam) == p ** m + 1
        assert verify_mub(fam, 1e-9)["passed"]

    def test_d8_direct(self):
        fam = mub_prime_power(2, 3)
        assert inner_product_defect(fam.bases, 8) < 1e-9

    @pytest.mark.parametrize("p,m", [(2, 2), (3, 2)])
    def test_quadratic_agrees_with_general(self, p, m):
        a = mub_prime_power(p, m, "quadratic")
        b = mub_prime_power(p, m, "general")
        assert verify_mub(a)["passed"] and verify_mub(b)["passed"]
        assert len(a) == len(b) and same_basis(a.bases[0], b.bases[0])

    def test_classes_commute_and_orthogonal(self):
        for cls in class_labels(PrimePower(2, 3)):
            for x in cls:
                for y in cls:
                    assert commutes(x, y)
                    if x != y:
                        assert abs(hs_inner(pauli_matrix(x), pauli_matrix(y))) < 1e-10

    def test_too_large(self):
        with pytest.raises(ValueError):
            mub_prime_power(3, 4)

    def test_mub_dispatch(self):
        assert len(mub(7)) == 8 and len(mub(16)) == 17
        with pytest.raises(ValueError):
            mub(6)


class TestVerify:
    def test_single_basis(self):
        r = verify_mub(MubFamily(3, (np.eye(3, dtype=complex),)))
        assert r["max_unbiasedness_defect"] == 0 and r["passed"]

    def test_perturbed(self):
        fam = mub_prime(3)
        b = fam.bases[1].copy()
        b[0] = b[0] + 1e-3
        r = verify_mub(MubFamily(3, (fam.bases[0], b) + fam.bases[2:]), 1e-6)
        assert not r["passed"]
        assert r["max_orthonormality_defect"] > 1e-6

    def test_canonical_phase(self):
        b = canonicalize_basis(np.exp(1j * 0.7) * mub_prime(5).bases[2])
        for row in b:
            first = row[np.flatnonzero(np.abs(row) > 1e-9)[0]]
            assert abs(first.imag) < 1e-12 and first.real > 0

    def test_canonical_order_invariant(self):
        b = mub_prime(3).bases[2]
        for perm in permutations(range(3)):
            np.testing.assert_allclose(canonicalize_basis(b[list(perm)]), canonicalize_basis(b), atol=1e-12)


class TestClasses:
    def test_z_basis(self):
        fam = MubFamily(3, (np.eye(3, dtype=complex),))
        cls = mub_to_classes(fam)[0]
        z = build_zd(3)
        for t, u in enumerate(cls, start=1):
            np.testing.assert_allclose(u, np.linalg.matrix_power(z, t), atol=1e-12)

    def test_d2_recovers_paulis(self):
        cls = mub_to_classes(mub_prime(2))
        found = [c[0] for c in cls]
        x, z = build_xd(2), build_zd(2)
        for target in (z, x, x @ z):
            assert any(abs(abs(hs_inner(target, u)) - 2) < 1e-9 for u in found)

    def test_d3_count_and_orthogonality(self):
        cls = mub_to_classes(mub_prime(3))
        mats = [np.eye(3)] + [u for c in cls for u in c]
        assert len(cls) == 4 and len(mats) == 9
        for i in range(9):
            for j in range(i + 1, 9):
                assert abs(hs_inner(mats[i], mats[j])) < 1e-9

    def test_unverified_rejected(self):
        with pytest.raises(ValueError):
            mub_to_classes(MubFamily(2, (np.eye(2, dtype=complex), np.eye(2, dtype=complex))))

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_round_trip(self, d):
        fam = mub(d)
        back = classes_to_mub(mub_to_classes(fam))
        assert family_matches(back, fam.bases)

    def test_d4_classes_to_mub(self):
        cls = [[pauli_matrix(l) for l in c] for c in class_labels(PrimePower(2, 2))]
        fam = classes_to_mub(cls)
        assert len(fam) == 5 and verify_mub(fam)["passed"]

    def test_single_z_class(self):
        z = build_zd(4)
        fam = classes_to_mub([[np.linalg.matrix_power(z, t) for t in range(1, 4)]])
        assert same_basis(fam.bases[0], np.eye(4))

    def test_non_commuting(self):
        with pytest.raises(ValueError):
            classes_to_mub([[build_xd(2), build_zd(2)]])


class TestSerialization:
    def test_json_round_trip(self):
        fam = mub(4)
        back = MubFamily.from_json(fam.to_json())
        for a, b in zip(fam.bases, back.bases):
            np.testing.assert_array_equal(a, b)

    def test_json_shape_check(self):
        obj = mub(2).to_json()
        obj["d"] = 3
        with pytest.raises(ValueError):
            MubFamily.from_json(obj)

    def test_text_dump(self):
        txt = format_family(mub(4))
        assert txt.count("B") == 5
        assert "[1, 1, 1, 1]" in txt

from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsec.gfpauli import hs_inner
from qsec.qlinalg import random_density, random_unitary
from qsec.qotp import (
    EncryptionSet,
    conjugated_basis_set,
    decrypt,
    encrypt_average,
    encrypt_sample,
    gram_analysis,
    is_secure,
    pauli_pad,
    superdense_key_recovery,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def loop_average(rho, es):
    out = np.zeros_like(rho, dtype=complex)
    for p, u in zip(es.probs, es.unitaries):
        out += p * u @ rho @ u.conj().T
    return out


def pauli_set(probs):
    return EncryptionSet(1, probs, np.array([np.eye(2), X, Z, X @ Z]))


@pytest.fixture
def rng():
    return np.random.default_rng(77)


class TestPauliPad:
    def test_n1_members(self):
        es = pauli_pad(1)
        assert len(es) == 4
        np.testing.assert_allclose(es.probs, 0.25)
        for want in (np.eye(2), X, Z, X @ Z):
            assert any(np.allclose(u, want) for u in es.unitaries)

    def test_ket0(self):
        np.testing.assert_allclose(encrypt_average(np.diag([1.0, 0.0]), pauli_pad(1)), np.eye(2) / 2, atol=1e-12)

    def test_random_two_qubit(self, rng):
        rho = random_density(4, rng)
        es = pauli_pad(2)
        np.testing.assert_allclose(encrypt_average(rho, es), np.eye(4) / 4, atol=1e-10)
        np.testing.assert_allclose(encrypt_average(rho, es), loop_average(rho, es), atol=1e-12)

    def test_n_range(self):
        with pytest.raises(ValueError):
            pauli_pad(5)


class TestEncrypt:
    def test_round_trip(self, rng):
        es = pauli_pad(2)
        rho = random_density(4, rng)
        for k in range(len(es)):
            np.testing.assert_allclose(decrypt(encrypt_sample(rho, es, k), es, k), rho, atol=1e-12)

    def test_mixed_fixed(self, rng):
        u = random_unitary(4, rng)
        es = EncryptionSet(2, [0.5, 0.5], np.array([u, u.conj().T]))
        np.testing.assert_allclose(encrypt_average(np.eye(4) / 4, es), np.eye(4) / 4, atol=1e-12)

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            encrypt_sample(np.eye(2) / 2, pauli_pad(1), 4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            encrypt_average(np.eye(4) / 4, pauli_pad(1))

    def test_validation(self):
        with pytest.raises(ValueError):
            EncryptionSet(1, [0.5, 0.6], np.array([np.eye(2), X]))
        with pytest.raises(ValueError):
            EncryptionSet(1, [1.0], np.array([[[1, 1], [0, 1]]]))


class TestIsSecure:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_pauli_pad(self, n):
        assert is_secure(pauli_pad(n), 1e-10)["passed"]

    def test_identity_only(self):
        r = is_secure(EncryptionSet(1, [1.0], np.array([np.eye(2)])))
        assert not r["passed"] and r["max_defect"] > 0.5

    def test_skewed_paulis(self):
        r = is_secure(pauli_set([0.3, 0.3, 0.2, 0.2]))
        assert not r["passed"]
        assert r["max_defect"] > 0.1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.booleans())
    def test_equivalence(self, seed, secure):
        # average maps random states to I/2 exactly when the discrete check passes
        rng = np.random.default_rng(seed)
        if secure:
            es = conjugated_basis_set(random_unitary(2, rng), 1)
        else:
            es = pauli_set(rng.dirichlet(np.ones(4)))
        maps_to_mixed = all(
            np.abs(encrypt_average(random_density(2, rng), es) - np.eye(2) / 2).max() < 1e-8 for _ in range(50)
        )
        assert maps_to_mixed == is_secure(es, 1e-8)["passed"]


class TestConjugated:
    def test_identity(self):
        a, b = conjugated_basis_set(np.eye(4), 2), pauli_pad(2)
        np.testing.assert_allclose(a.unitaries, b.unitaries, atol=1e-12)

    def test_hadamard(self):
        w = np.kron(H, H)
        es = conjugated_basis_set(w, 2)
        assert is_secure(es, 1e-10)["passed"]
        assert not np.allclose(es.unitaries, pauli_pad(2).unitaries)

    def test_random(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 3))
            assert is_secure(conjugated_basis_set(random_unitary(2 ** n, rng), n), 1e-9)["passed"]


class TestGram:
    def test_pauli_pad(self):
        r = gram_analysis(pauli_pad(1))
        assert r["M"] == 4 and abs(r["key_entropy"] - 2) < 1e-12
        assert r["ctc_defect"] < 1e-12 and r["satisfies_min_entropy"]

    def test_conjugated(self, rng):
        r = gram_analysis(conjugated_basis_set(random_unitary(2, rng), 1))
        assert abs(r["key_entropy"] - 2) < 1e-12 and r["ctc_defect"] < 1e-10

    def test_redundant(self):
        base = pauli_pad(1)
        us = np.concatenate([base.unitaries, base.unitaries[:1]])
        probs = [0.125, 0.25, 0.25, 0.25, 0.125]
        r = gram_analysis(EncryptionSet(1, probs, us))
        assert r["M"] == 5
        assert abs(r["key_entropy"] - (-sum(p * np.log2(p) for p in probs))) < 1e-12
        assert r["key_entropy"] > 2

    def test_insecure(self):
        with pytest.raises(ValueError):
            gram_analysis(pauli_set([0.4, 0.2, 0.2, 0.2]))

    def test_minimal_sets_orthonormal(self, rng):
        for _ in range(5):
            es = conjugated_basis_set(random_unitary(4, rng), 2)
            r = gram_analysis(es)
            assert r["ctc_defect"] < 1e-8 and r["key_entropy"] >= 4 - 1e-9
            np.testing.assert_allclose(es.probs, 1 / 16, atol=1e-9)
            for i in range(16):
                for j in range(i + 1, 16):
                    assert abs(hs_inner(es.unitaries[i], es.unitaries[j])) < 1e-9


class TestClassicalPad:
    def test_diagonal_z_only(self, rng):
        # Z^beta alone hides diagonal states but not coherences
        n = 2
        zs = [np.kron(np.linalg.matrix_power(Z, a), np.linalg.matrix_power(Z, b)) for a, b in product(range(2), repeat=2)]
        es = EncryptionSet(n, np.full(4, 0.25), np.array(zs))
        diag = np.diag(rng.dirichlet(np.ones(4)))
        avg = encrypt_average(diag, es)
        np.testing.assert_allclose(avg, diag, atol=1e-12)
        # the pad acts on the classical basis label, so use X^alpha for diagonal states
        xs = [np.kron(np.linalg.matrix_power(X, a), np.linalg.matrix_power(X, b)) for a, b in product(range(2), repeat=2)]
        es_x = EncryptionSet(n, np.full(4, 0.25), np.array(xs))
        np.testing.assert_allclose(encrypt_average(diag, es_x), np.eye(4) / 4, atol=1e-12)
        assert not is_secure(es_x)["passed"]


class TestSuperdense:
    def test_zero_key(self, rng):
        assert superdense_key_recovery(2, ((0, 0), (0, 0)), rng) == ((0, 0), (0, 0))

    def test_n1_distinct(self, rng):
        got = {superdense_key_recovery(1, ((a,), (b,)), rng) for a in (0, 1) for b in (0, 1)}
        assert got == {((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))}

    def test_n2_random(self, rng):
        for _ in range(100):
            key = tuple(tuple(int(x) for x in rng.integers(0, 2, 2)) for _ in range(2))
            assert superdense_key_recovery(2, key, rng) == key

    def test_n3(self, rng):
        key = ((1, 0, 1), (0, 1, 1))
        assert superdense_key_recovery(3, key, rng) == key

    def test_bad_length(self):
        with pytest.raises(ValueError):
            superdense_key_recovery(2, ((1,), (0,)))

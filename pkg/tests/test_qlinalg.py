import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import logm

from qsec.qlinalg import (
    basis_ket,
    ket,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    projector,
    purify,
    random_density,
    random_ket,
    random_unitary,
    relative_entropy,
    shannon_entropy,
    tensor,
    trace_norm,
    validate_density,
    von_neumann_entropy,
)


def loop_partial_trace(rho, d1, d2, keep):
    # element-index summation, no reshapes
    if keep == 0:
        out = np.zeros((d1, d1), dtype=complex)
        for i in range(d1):
            for k in range(d1):
                for j in range(d2):
                    out[i, k] += rho[i * d2 + j, k * d2 + j]
    else:
        out = np.zeros((d2, d2), dtype=complex)
        for j in range(d2):
            for l in range(d2):
                for i in range(d1):
                    out[j, l] += rho[i * d2 + j, i * d2 + l]
    return out


def logm_entropy(rho):
    w = np.linalg.eigvalsh(rho)
    if w.min() < 1e-10:
        rho = rho + 1e-14 * np.eye(len(rho))
    return float(-np.trace(rho @ logm(rho)).real / np.log(2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestKets:
    def test_normalized_ket_accepted(self):
        v = ket([1, 1j], normalize=True)
        assert abs(np.linalg.norm(v) - 1) < 1e-12

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            ket([1, 1])

    def test_zero_vector_cannot_normalize(self):
        with pytest.raises(ValueError):
            ket([0, 0], normalize=True)

    def test_validate_density_rejects(self):
        with pytest.raises(ValueError):
            validate_density(np.diag([1.0, 1.0]))
        with pytest.raises(ValueError):
            validate_density(np.diag([1.5, -0.5]))
        with pytest.raises(ValueError):
            validate_density(np.array([[0.5, 0.1], [0.3, 0.5]]))

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            tensor(np.eye(2 ** 7), np.eye(2 ** 6))


class TestTensor:
    def test_identity(self):
        np.testing.assert_allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_projector_with_mixed(self):
        out = tensor(projector(basis_ket(0, 2)), np.eye(2) / 2)
        np.testing.assert_allclose(out, np.diag([0.5, 0.5, 0, 0]))

    def test_trace_multiplies(self, rng):
        for _ in range(20):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            assert abs(np.trace(tensor(a, b)) - np.trace(a) * np.trace(b)) < 1e-12

    def test_index_convention(self):
        # i = i1 * d2 + i2
        v = tensor(basis_ket(1, 2), basis_ket(2, 3))
        assert np.flatnonzero(v).tolist() == [1 * 3 + 2]


class TestPartialTrace:
    def test_product_state(self, rng):
        rho, sigma = random_density(2, rng), random_density(3, rng)
        np.testing.assert_allclose(partial_trace(tensor(rho, sigma), (2, 3), 0), rho, atol=1e-12)
        np.testing.assert_allclose(partial_trace(tensor(rho, sigma), (2, 3), 1), sigma, atol=1e-12)

    def test_bell_state(self):
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(partial_trace(projector(phi), (2, 2), 0), np.eye(2) / 2)

    @pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2), (4, 2)])
    def test_against_loop_oracle(self, rng, dims):
        rho = random_density(dims[0] * dims[1], rng)
        for keep in (0, 1):
            out = partial_trace(rho, dims, keep)
            np.testing.assert_allclose(out, loop_partial_trace(rho, *dims, keep), atol=1e-12)
            assert abs(np.trace(out) - 1) < 1e-10
            np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            partial_trace(np.eye(4) / 4, (2, 3), 0)
        with pytest.raises(ValueError):
            partial_trace(np.eye(4) / 4, (2, 2), 2)


class TestTraceNorm:
    def test_zero(self, rng):
        rho = random_density(3, rng)
        assert trace_norm(rho - rho) < 1e-12

    def test_orthogonal(self):
        assert abs(trace_norm(np.diag([1.0, -1.0])) - 2) < 1e-12

    def test_pure_pair_overlap(self, rng):
        for _ in range(50):
            a, b = random_ket(3, rng), random_ket(3, rng)
            ov = abs(np.vdot(a, b))
            assert abs(trace_norm(projector(a) - projector(b)) - 2 * np.sqrt(1 - ov ** 2)) < 1e-9

    def test_matches_singular_values(self, rng):
        for _ in range(20):
            h = random_density(4, rng) - random_density(4, rng)
            assert abs(trace_norm(h) - np.linalg.svd(h, compute_uv=False).sum()) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            trace_norm(np.array([[0, 1], [0, 0]]))

    def test_monotone_under_partial_trace(self, rng):
        for _ in range(100):
            r, s = random_density(6, rng), random_density(6, rng)
            for keep in (0, 1):
                lhs = trace_norm(partial_trace(r, (2, 3), keep) - partial_trace(s, (2, 3), keep))
                assert lhs <= trace_norm(r - s) + 1e-9

    def test_pure_vs_mixed_bound(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 5))
            rho, psi = random_density(d, rng, rank=int(rng.integers(1, d + 1))), random_ket(d, rng)
            fid = np.vdot(psi, rho @ psi).real
            assert trace_norm(rho - projector(psi)) <= 2 * np.sqrt(max(1 - fid, 0)) + 1e-9


class TestShannon:
    def test_normalization(self):
        assert shannon_entropy([0.5, 0.5]) == 1.0

    def test_deterministic(self):
        assert shannon_entropy([1.0, 0.0]) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            shannon_entropy([1.2, -0.2])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    def test_grouping(self, w):
        p = np.array(w) / sum(w)
        s = p[0] + p[1]
        rhs = shannon_entropy([s, p[2]]) + s * shannon_entropy([p[0] / s, p[1] / s])
        assert abs(shannon_entropy(p) - rhs) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
           st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4), st.floats(0.0, 1.0))
    def test_concavity(self, a, b, t):
        if sum(a) < 1e-3 or sum(b) < 1e-3:
            return
        p, q = np.array(a) / sum(a), np.array(b) / sum(b)
        mix = t * p + (1 - t) * q
        mix /= mix.sum()
        assert shannon_entropy(mix) >= t * shannon_entropy(p) + (1 - t) * shannon_entropy(q) - 1e-12


class TestVonNeumann:
    def test_pure(self, rng):
        assert abs(von_neumann_entropy(projector(random_ket(4, rng)))) < 1e-10

    @pytest.mark.parametrize("d", [2, 3, 8])
    def test_maximally_mixed(self, d):
        assert abs(von_neumann_entropy(np.eye(d) / d) - np.log2(d)) < 1e-12

    def test_unitary_invariance(self, rng):
        for _ in range(20):
            rho, u = random_density(4, rng), random_unitary(4, rng)
            assert abs(von_neumann_entropy(u @ rho @ u.conj().T) - von_neumann_entropy(rho)) < 1e-10

    def test_against_logm(self, rng):
        for _ in range(10):
            rho = random_density(3, rng)
            assert abs(von_neumann_entropy(rho) - logm_entropy(rho)) < 1e-9

    @pytest.mark.parametrize("dims", [(2, 2), (2, 3)])
    def test_subadditivity(self, rng, dims):
        for _ in range(100):
            rho = random_density(dims[0] * dims[1], rng, rank=int(rng.integers(1, 5)))
            sa = von_neumann_entropy(partial_trace(rho, dims, 0))
            sb = von_neumann_entropy(partial_trace(rho, dims, 1))
            assert sa + sb >= von_neumann_entropy(rho) - 1e-9


class TestRelativeEntropy:
    def test_self(self, rng):
        rho = random_density(3, rng)
        assert abs(relative_entropy(rho, rho)) < 1e-10

    def test_orthogonal_support(self):
        assert relative_entropy(np.diag([1.0, 0]), np.diag([0, 1.0])) == float("inf")

    def test_positive(self, rng):
        for _ in range(100):
            r, s = random_density(3, rng, rank=int(rng.integers(1, 4))), random_density(3, rng)
            assert relative_entropy(r, s) >= -1e-9

    def test_mutual_information_identity(self, rng):
        for _ in range(30):
            rho = random_density(4, rng)
            ra, rb = partial_trace(rho, (2, 2), 0), partial_trace(rho, (2, 2), 1)
            lhs = relative_entropy(rho, tensor(ra, rb))
            rhs = von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(rho)
            assert abs(lhs - rhs) < 1e-9

    def test_against_logm(self, rng):
        r, s = random_density(3, rng), random_density(3, rng)
        direct = np.trace(r @ (logm(r) - logm(s))).real / np.log(2)
        assert abs(relative_entropy(r, s) - direct) < 1e-8


class TestPurify:
    def test_maximally_mixed(self):
        psi = purify(np.eye(2) / 2)
        np.testing.assert_allclose(partial_trace(projector(psi), (2, 2), 0), np.eye(2) / 2, atol=1e-12)

    def test_pure_input_is_product(self, rng):
        v = random_ket(3, rng)
        psi = purify(projector(v)).reshape(3, 3)
        assert np.linalg.matrix_rank(psi, tol=1e-9) == 1

    def test_random(self, rng):
        for d in (2, 3, 4):
            rho = random_density(d, rng)
            psi = purify(rho)
            np.testing.assert_allclose(loop_partial_trace(projector(psi), d, d, 0), rho, atol=1e-9)


class TestJson:
    def test_round_trip(self, rng):
        a = random_density(3, rng)
        np.testing.assert_array_equal(matrix_from_json(matrix_to_json(a)), a)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            matrix_from_json({"dim": 3, "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]})

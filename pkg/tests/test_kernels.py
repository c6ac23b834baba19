from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsec import _kernels as K
from qsec.infobounds import QuantumSource, accessible_info_oracle
from qsec.lincode import hamming_code, pack, random_linear_code
from qsec.qlinalg import random_density

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def numpy_only(monkeypatch):
    monkeypatch.setenv("QSEC_NO_NUMBA", "1")


def both(monkeypatch, fn):
    monkeypatch.setenv("QSEC_NO_NUMBA", "1")
    a = fn()
    monkeypatch.setenv("QSEC_NO_NUMBA", "0")
    b = fn()
    return a, b


def brute_min_weight(rows, n):
    best = n + 1
    for coeffs in product((0, 1), repeat=len(rows)):
        if any(coeffs):
            cw = 0
            for c, r in zip(coeffs, rows):
                if c:
                    cw ^= int(r)
            best = min(best, bin(cw).count("1"))
    return best


class TestSwitch:
    def test_env(self, monkeypatch):
        monkeypatch.setenv("QSEC_NO_NUMBA", "1")
        assert not K.use_numba()
        monkeypatch.setenv("QSEC_NO_NUMBA", "0")
        assert K.use_numba() == K.HAVE_NUMBA


class TestGridInfo:
    def test_known_value(self, numpy_only):
        # {|0>, |+>}: best projective measurement at theta = pi/4
        rhos = np.array([[[1, 0], [0, 0]], [[0.5, 0.5], [0.5, 0.5]]], dtype=complex)
        th, ph = np.linspace(0, np.pi, 181), np.linspace(0, 2 * np.pi, 361)
        best, t, p = K.qubit_grid_info([0.5, 0.5], rhos, th, ph)
        assert abs(best - 0.399124) < 1e-5
        assert abs(t - np.pi / 4) < 1e-9 or abs(t - 3 * np.pi / 4) < 1e-9

    @needs_numba
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5))
    def test_paths_agree(self, seed, k):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(k))
        rhos = np.array([random_density(2, rng) for _ in range(k)])
        th, ph = np.linspace(0, np.pi, 31), np.linspace(0, 2 * np.pi, 61)
        with pytest.MonkeyPatch.context() as mp:
            a, b = both(mp, lambda: K.qubit_grid_info(probs, rhos, th, ph))
        assert abs(a[0] - b[0]) < 1e-12
        assert a[1:] == b[1:]

    @needs_numba
    def test_oracle_agrees(self, monkeypatch, rng=np.random.default_rng(3)):
        src = QuantumSource([0.3, 0.7], [random_density(2, rng) for _ in range(2)])
        a, b = both(monkeypatch, lambda: accessible_info_oracle(src, grid=(91, 181)))
        assert abs(a - b) < 1e-12


class TestMinWeight:
    def test_hamming(self, numpy_only):
        assert K.min_codeword_weight(pack(hamming_code().generator)) == 3

    def test_empty(self):
        with pytest.raises(ValueError):
            K.min_codeword_weight(np.zeros(0, dtype=np.uint64))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8), st.integers(8, 20))
    def test_brute_force(self, seed, k, n):
        rng = np.random.default_rng(seed)
        G = rng.integers(0, 2, (k, n), dtype=np.uint8)
        G[0, 0] = 1
        rows = pack(G)
        want = brute_min_weight(rows, n)
        with pytest.MonkeyPatch.context() as mp:
            a, b = both(mp, lambda: K.min_codeword_weight(rows))
        assert a == b
        # dependent rows give the zero codeword, which both paths report as weight 0
        assert a == want or (a == 0 and np.linalg.matrix_rank(G) < k)


class TestCosetLeaders:
    def _cols(self, H):
        return pack(H.T).astype(np.int64)

    def test_hamming(self, numpy_only):
        H = hamming_code().parity_check
        leader, tie = K.coset_leaders(self._cols(H), 7, 3)
        assert leader[0] == 0
        weights = sorted(bin(int(x)).count("1") for x in leader[1:])
        assert weights == [1] * 7 and not tie.any()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(6, 12))
    def test_paths_agree_and_minimal(self, seed, r, n):
        rng = np.random.default_rng(seed)
        H = rng.integers(0, 2, (r, n), dtype=np.uint8)
        cols = self._cols(H)
        with pytest.MonkeyPatch.context() as mp:
            (la, ta), (lb, tb) = both(mp, lambda: K.coset_leaders(cols, n, r))
        np.testing.assert_array_equal(la, lb)
        np.testing.assert_array_equal(ta, tb)
        # brute force: smallest weight then smallest pattern per syndrome
        best = {}
        for e in range(1 << n):
            s = 0
            for j in range(n):
                if e >> j & 1:
                    s ^= int(cols[j])
            key = (bin(e).count("1"), e)
            best.setdefault(s, []).append(key)
        for s in range(1 << r):
            if s not in best:
                assert la[s] == -1
                continue
            keys = sorted(best[s])
            assert la[s] == keys[0][1]
            assert ta[s] == (len(keys) > 1 and keys[1][0] == keys[0][0])


class TestEndToEnd:
    def test_random_code_distance(self, monkeypatch):
        # min_distance is cached per instance, so build fresh codes on each path
        a, b = both(monkeypatch, lambda: [random_linear_code(16, 8, s).min_distance for s in range(20)])
        assert a == b

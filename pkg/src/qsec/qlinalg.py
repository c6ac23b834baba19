"""
Dense quantum-state primitives.

Everything here works on plain ``numpy`` complex arrays. Composite indices
follow ``i = i1 * d2 + i2`` (first factor most significant), which is what
``np.kron`` produces, so every other module in the package can rely on it.
"""

import numpy as np

MAX_DIM = 2 ** 12
ZERO_EIG = 1e-12
HERMITIAN_TOL = 1e-8


def _check_dim(d):
    if d > MAX_DIM:
        raise ValueError(f"dimension {d} exceeds cap {MAX_DIM}")


def ket(amplitudes, normalize=False):
    """Return amplitudes as a complex column-free 1-D array.

    :param amplitudes: sequence of complex numbers.
    :param normalize: rescale to unit norm instead of checking it.
    :return: 1-D complex array of unit norm.
    """
    v = np.asarray(amplitudes, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if normalize:
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return v / nrm
    if abs(nrm - 1) > 1e-10:
        raise ValueError(f"ket norm {nrm} differs from 1")
    return v


def basis_ket(i, d):
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def projector(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def is_hermitian(a, tol=HERMITIAN_TOL):
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, atol=tol, rtol=0)


def validate_density(rho, tol=1e-10):
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit trace and PSD."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    _check_dim(rho.shape[0])
    if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def tensor(*ops):
    """Kronecker product of any number of matrices or kets."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    if out.ndim == 2:
        _check_dim(out.shape[0])
    return out


def partial_trace(rho, dims, keep):
    """
    Trace out one factor of a bipartite operator.

    Parameters
    ----------
    rho : ndarray
        Operator on C^{d1} (x) C^{d2}.
    dims : tuple of int
        ``(d1, d2)``.
    keep : int
        0 keeps the first factor, 1 keeps the second.

    Returns
    -------
    ndarray
        The reduced operator.
    """
    d1, d2 = dims
    rho = np.asarray(rho, dtype=complex)
    if d1 < 1 or d2 < 1 or rho.shape != (d1 * d2, d1 * d2):
        raise ValueError(f"shape {rho.shape} does not match dims {dims}")
    r = rho.reshape(d1, d2, d1, d2)
    if keep == 0:
        return np.einsum("ijkj->ik", r)
    if keep == 1:
        return np.einsum("ijil->jl", r)
    raise ValueError("keep must be 0 or 1")


def eigvalsh_clamped(a):
    """Hermitian eigenvalues with ``|lambda| < 1e-12`` set to exactly zero."""
    w = np.linalg.eigvalsh(a)
    w[np.abs(w) < ZERO_EIG] = 0.0
    return w


def trace_norm(a):
    """Sum of absolute eigenvalues of a Hermitian matrix.

    Raises
    ------
    ValueError
        If ``a`` is not Hermitian within 1e-8.
    """
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise ValueError("trace_norm needs a Hermitian matrix")
    return float(np.abs(eigvalsh_clamped(a)).sum())


def shannon_entropy(p):
    """Base-2 Shannon entropy with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0):
        raise ValueError("negative probability")
    if abs(p.sum() - 1) > 1e-10:
        raise ValueError("probabilities do not sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _entropy_of_spectrum(w):
    w = w[w > 0]
    return float(-(w * np.log2(w)).sum())


def von_neumann_entropy(rho):
    """S(rho) in bits, computed from the clamped spectrum."""
    return _entropy_of_spectrum(eigvalsh_clamped(np.asarray(rho, dtype=complex)))


def relative_entropy(rho, sigma):
    """
    Quantum relative entropy ``Tr rho log rho - Tr rho log sigma`` in bits.

    Returns ``inf`` when the support of ``rho`` is not contained in that of
    ``sigma``.
    """
    wr, vr = np.linalg.eigh(np.asarray(rho, dtype=complex))
    ws, vs = np.linalg.eigh(np.asarray(sigma, dtype=complex))
    wr[np.abs(wr) < ZERO_EIG] = 0.0
    ws[np.abs(ws) < ZERO_EIG] = 0.0
    # overlap[i, j] = |<r_i|s_j>|^2
    overlap = np.abs(vr.conj().T @ vs) ** 2
    pos_r = wr > 0
    zero_s = ws <= 0
    if np.any(wr[pos_r, None] * overlap[np.ix_(pos_r, zero_s)] > 1e-10):
        return float("inf")
    term1 = float((wr[pos_r] * np.log2(wr[pos_r])).sum())
    log_s = np.where(zero_s, 0.0, np.log2(np.where(zero_s, 1.0, ws)))
    term2 = float((wr[pos_r, None] * overlap[pos_r] * log_s[None, :]).sum())
    return term1 - term2


def purify(rho):
    """Canonical purification sum_i sqrt(lambda_i) |e_i>|i> on C^d (x) C^d."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    _check_dim(d * d)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    w[w < ZERO_EIG] = 0.0
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        if w[i] > 0:
            psi += np.sqrt(w[i]) * np.kron(v[:, i], basis_ket(i, d))
    return psi / np.linalg.norm(psi)


def random_unitary(d, rng):
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_ket(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d, rng, rank=None):
    """Random density matrix from a Ginibre ensemble of the given rank."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return {"dim": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj):
    a = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    if a.shape != (obj["dim"], obj["dim"]):
        raise ValueError("matrix JSON dim mismatch")
    return a

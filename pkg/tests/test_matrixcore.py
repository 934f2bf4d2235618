import numpy as np
import pytest

from diqc import matrixcore
from diqc.matrixcore import block_fidelity, hermitian_eig, kron, psd_sqrt, uhlmann_fidelity
from diqc.quantum import RegisterState, partial_trace

I2 = np.eye(2)
I4 = np.eye(4)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return g + g.conj().T


# ---- kron ----


def test_kron_identity():
    assert np.allclose(kron(I2, I2), I4)


def test_kron_sigma_z_pair():
    assert np.allclose(kron(SZ, SZ), np.diag([1, -1, -1, 1]))


def test_kron_double_bit_flip():
    ket00 = np.array([1, 0, 0, 0], dtype=complex)
    ket11 = np.array([0, 0, 0, 1], dtype=complex)
    assert np.allclose(kron(SX, SX) @ ket00, ket11)


def test_kron_dimension_overflow():
    with pytest.raises(ValueError, match="exceeds"):
        kron(I4, I4)


def test_kron_associativity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
        left = kron(kron(a, b), c)
        right = kron(a, kron(b, c))
        assert np.max(np.abs(left - right)) < 1e-12


# ---- hermitian_eig ----


def test_eig_identity():
    vals, _ = hermitian_eig(I4)
    assert np.allclose(vals, 1.0)


def test_eig_sigma_z():
    vals, _ = hermitian_eig(SZ)
    assert np.allclose(vals, [-1.0, 1.0])


def test_eig_ideal_bell_operator_top_eigenvalue():
    from diqc.bell import new_bell_operator
    from diqc.quantum import ideal_settings

    a, b = ideal_settings(np.pi / 4)
    vals, _ = hermitian_eig(new_bell_operator(np.pi / 4, a, b))
    assert abs(vals[-1] - 1.0) < 1e-10


def test_eig_rejects_non_hermitian():
    m = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ValueError, match="Hermitian"):
        hermitian_eig(m)


def test_eig_trace_sum_and_reconstruction():
    rng = np.random.default_rng(5)
    for dim in (2, 4, 8):
        for _ in range(10):
            m = random_hermitian(rng, dim)
            vals, vecs = hermitian_eig(m)
            assert abs(vals.sum() - np.trace(m).real) < 1e-10 * max(1, abs(np.trace(m)))
            recon = (vecs * vals) @ vecs.conj().T
            assert np.max(np.abs(m - recon)) < 1e-10 * max(1.0, np.max(np.abs(m)))
            gram = vecs.conj().T @ vecs
            assert np.max(np.abs(gram - np.eye(dim))) < 1e-10


def test_eig_deterministic():
    rng = np.random.default_rng(17)
    m = random_hermitian(rng, 4)
    first = hermitian_eig(m)
    second = hermitian_eig(m.copy())
    assert np.array_equal(first.eigenvalues, second.eigenvalues)
    assert np.array_equal(first.eigenvectors, second.eigenvectors)


# ---- psd_sqrt ----


def test_psd_sqrt_identity():
    assert np.allclose(psd_sqrt(I4), I4)


def test_psd_sqrt_diagonal():
    assert np.allclose(psd_sqrt(np.diag([4.0, 1.0, 0.0, 0.0])), np.diag([2.0, 1.0, 0.0, 0.0]))


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(23)
    for _ in range(20):
        rho = random_density(rng, 4)
        s = psd_sqrt(rho)
        assert np.max(np.abs(s @ s - rho)) < 1e-9


def test_psd_sqrt_rejects_negative():
    with pytest.raises(ValueError, match="not PSD"):
        psd_sqrt(np.diag([1.0, -0.01]))


def test_psd_sqrt_clamps_roundoff():
    s = psd_sqrt(np.diag([1.0, -1e-11]))
    assert np.allclose(s, np.diag([1.0, 0.0]))


# ---- uhlmann_fidelity ----


def test_fidelity_self():
    rng = np.random.default_rng(3)
    rho = random_density(rng, 4)
    assert abs(uhlmann_fidelity(rho, rho) - 1.0) < 1e-9


def test_fidelity_orthogonal_pure():
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    assert uhlmann_fidelity(p0, p1) < 1e-9


def test_fidelity_mixed_versus_pure():
    p0 = np.diag([1.0, 0.0]).astype(complex)
    assert abs(uhlmann_fidelity(I2 / 2, p0) - 1 / np.sqrt(2)) < 1e-9


def test_fidelity_symmetric():
    rng = np.random.default_rng(31)
    for _ in range(10):
        rho, sigma = random_density(rng, 4), random_density(rng, 4)
        assert abs(uhlmann_fidelity(rho, sigma) - uhlmann_fidelity(sigma, rho)) < 1e-8


def test_fidelity_rejects_unnormalized():
    with pytest.raises(ValueError, match="not normalized"):
        uhlmann_fidelity(2 * I2, I2 / 2)


def test_fidelity_monotone_under_discarding():
    rng = np.random.default_rng(41)
    for _ in range(20):
        rho, sigma = random_density(rng, 4), random_density(rng, 4)
        full = uhlmann_fidelity(rho, sigma)
        reduced = uhlmann_fidelity(partial_trace(rho, "alice"), partial_trace(sigma, "alice"))
        assert reduced >= full - 1e-8


# ---- block_fidelity ----


def _register(rng, probs):
    blocks = tuple((label, p, random_density(rng, 4)) for label, p in enumerate(probs))
    return RegisterState(blocks)


def test_block_fidelity_identical():
    rng = np.random.default_rng(7)
    reg = _register(rng, [0.3, 0.7])
    assert abs(block_fidelity(reg, reg) - 1.0) < 1e-9


def test_block_fidelity_disjoint_support():
    rng = np.random.default_rng(9)
    a = RegisterState(((0, 1.0, random_density(rng, 4)), (1, 0.0, I4 / 4)))
    b = RegisterState(((0, 0.0, I4 / 4), (1, 1.0, random_density(rng, 4))))
    assert block_fidelity(a, b) == 0.0


def test_block_fidelity_mismatched_labels():
    rng = np.random.default_rng(13)
    a = RegisterState(((0, 1.0, random_density(rng, 4)),))
    b = RegisterState(((1, 1.0, random_density(rng, 4)),))
    with pytest.raises(ValueError, match="mismatched"):
        block_fidelity(a, b)


def test_block_fidelity_matches_dense_embedding():
    # oracle: embed the register as an 8x8 block-diagonal state
    rng = np.random.default_rng(19)
    for _ in range(10):
        w = rng.uniform(0.2, 0.8)
        p = _register(rng, [w, 1 - w])
        v = rng.uniform(0.2, 0.8)
        q = _register(rng, [v, 1 - v])
        direct = block_fidelity(p, q)
        dense = uhlmann_fidelity(p.dense_embedding(), q.dense_embedding())
        assert abs(direct - dense) < 1e-8


def test_as_matrix_rejects_nonsquare():
    with pytest.raises(ValueError, match="square"):
        matrixcore.as_matrix(np.zeros((2, 3)))

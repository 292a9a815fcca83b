import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinbridge import linalg
from spinbridge.errors import ConvergenceError, SizingError, ValidationError
from spinbridge.hilbert import SIGMA_X, SIGMA_Z

from conftest import random_density, random_hermitian, random_state


def test_kron_identities_and_definition(rng):
    assert np.array_equal(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(linalg.kron(SIGMA_Z, np.eye(2)), np.diag([1, 1, -1, -1]))
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(4, 5))
    k = linalg.kron(a, b)
    assert k.shape == (8, 15)
    assert k[1 * 4 + 3, 2 * 5 + 1] == pytest.approx(a[1, 2] * b[3, 1])


def test_kron_associative(rng):
    a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    left = linalg.kron(linalg.kron(a, b), c)
    right = linalg.kron(a, linalg.kron(b, c))
    assert np.max(np.abs(left - right)) < 1e-14


def test_kron_size_guard_and_finiteness():
    with pytest.raises(SizingError):
        linalg.kron(np.eye(200), np.eye(200), max_dim=1000)
    with pytest.raises(ValidationError):
        linalg.kron(np.array([[np.nan]]), np.eye(2))


def test_herm_eig_pauli_spectra():
    d = linalg.herm_eig(SIGMA_Z)
    assert np.allclose(d.eigenvalues, [-1, 1])
    d = linalg.herm_eig(SIGMA_X)
    assert np.allclose(d.eigenvalues, [-1, 1])
    minus = np.array([1, -1]) / np.sqrt(2)
    assert abs(abs(np.vdot(d.eigenvectors[:, 0], minus)) - 1) < 1e-12


def test_herm_eig_reconstruction(rng):
    h = random_hermitian(rng, 16)
    d = linalg.herm_eig(h)
    assert np.all(np.diff(d.eigenvalues) >= 0)
    assert np.linalg.norm(d.reconstruct() - h) / np.linalg.norm(h) < 1e-10
    v = d.eigenvectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(16))) < 1e-10


def test_herm_eig_rejects_non_hermitian_naming_norm():
    with pytest.raises(ValidationError, match="max\\|A - A\\^H\\|"):
        linalg.herm_eig(np.array([[0, 1.0], [0, 0]]))


def test_expm_unitary_basics(rng):
    h = random_hermitian(rng, 6)
    assert np.array_equal(linalg.expm_unitary(h, 0.0), np.eye(6))
    assert np.allclose(linalg.expm_unitary(SIGMA_Z, np.pi), -np.eye(2), atol=1e-14)
    u = linalg.expm_unitary(h, 1.7)
    assert np.max(np.abs(u.conj().T @ u - np.eye(6))) < 1e-10
    psi = random_state(rng, 6)
    assert abs(np.linalg.norm(u @ psi) - 1) < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_expm_group_property(s, t):
    rng = np.random.default_rng(7)
    h = random_hermitian(rng, 5)
    lhs = linalg.expm_unitary(h, s) @ linalg.expm_unitary(h, t)
    assert np.max(np.abs(lhs - linalg.expm_unitary(h, s + t))) < 1e-10


def test_krylov_matches_dense(rng):
    h = random_hermitian(rng, 64)
    psi = random_state(rng, 64)
    assert np.array_equal(linalg.krylov_apply(h, psi, 0.0), psi)
    for t in (0.3, 5.0, -2.0):
        ref = linalg.expm_unitary(h, t) @ psi
        out = linalg.krylov_apply(h, psi, t, tol=1e-10, max_krylov_dim=20)
        assert np.linalg.norm(out - ref) < 1e-9
        assert abs(np.linalg.norm(out) - 1) < 1e-10


def test_krylov_reports_non_convergence(rng):
    h = random_hermitian(rng, 64, scale=100.0)
    psi = random_state(rng, 64)
    with pytest.raises(ConvergenceError) as info:
        linalg.krylov_apply(h, psi, 50.0, tol=1e-12, max_krylov_dim=4, max_substeps=10)
    assert info.value.residual > 0


def test_partial_trace_product_and_bell(rng):
    ra, rb = random_density(rng, 3), random_density(rng, 4)
    rho = np.kron(ra, rb)
    assert np.allclose(linalg.partial_trace(rho, (3, 4), [0]), ra)
    assert np.allclose(linalg.partial_trace(rho, (3, 4), [1]), rb)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    red = linalg.partial_trace(np.outer(bell, bell), (2, 2), [0])
    assert np.allclose(red, np.eye(2) / 2)


def test_partial_trace_keeps_trace_and_order(rng):
    rho = random_density(rng, 24)
    red = linalg.partial_trace(rho, (2, 3, 4), [0, 2])
    assert red.shape == (8, 8)
    assert abs(np.trace(red) - 1) < 1e-12
    with pytest.raises(ValidationError):
        linalg.partial_trace(rho, (2, 3, 5), [0])
    with pytest.raises(ValidationError):
        linalg.partial_trace(rho, (2, 3, 4), [])


def test_partial_transpose_properties(rng):
    rho = random_density(rng, 12)
    pt = linalg.partial_transpose(rho, (3, 4), [0])
    assert np.max(np.abs(linalg.partial_transpose(pt, (3, 4), [0]) - rho)) < 1e-14
    assert linalg.hermiticity_defect(pt) < 1e-14
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    w = np.linalg.eigvalsh(linalg.partial_transpose(np.outer(bell, bell), (2, 2), [0]))
    assert w[0] == pytest.approx(-0.5)
    prod = np.kron(random_density(rng, 3), random_density(rng, 4))
    assert np.linalg.eigvalsh(linalg.partial_transpose(prod, (3, 4), [1]))[0] > -1e-12


def test_transpose_under_trace(rng):
    for dims in [(2, 3), (2, 2, 4), (4, 4, 4)]:
        n = int(np.prod(dims))
        rho = random_density(rng, n)
        for traced in range(len(dims)):
            keep = [i for i in range(len(dims)) if i != traced]
            a = linalg.partial_trace(linalg.partial_transpose(rho, dims, [traced]), dims, keep)
            b = linalg.partial_trace(rho, dims, keep)
            assert np.max(np.abs(a - b)) < 1e-12


def test_trace_norm_values(rng):
    assert linalg.trace_norm(random_density(rng, 5)) == pytest.approx(1.0, abs=1e-12)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert linalg.trace_norm(linalg.partial_transpose(np.outer(bell, bell), (2, 2), [1])) == pytest.approx(2.0)
    assert linalg.trace_norm(np.zeros((3, 3))) == 0.0
    m = rng.normal(size=(4, 3))
    assert linalg.trace_norm(m) == pytest.approx(np.linalg.svd(m, compute_uv=False).sum())


def test_trace_norm_of_partial_transpose_at_least_one(rng):
    for _ in range(20):
        rho = random_density(rng, 9, rank=int(rng.integers(1, 9)))
        assert linalg.trace_norm(linalg.partial_transpose(rho, (3, 3), [0])) >= 1 - 1e-12


def test_check_hermitian_symmetrizes():
    h = np.array([[1.0, 2.0 + 1e-16], [2.0, 3.0]])
    out = linalg.check_hermitian(h)
    assert np.array_equal(out, out.T)

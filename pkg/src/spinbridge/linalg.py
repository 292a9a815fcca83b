"""Dense complex linear-algebra kernels.

Every other module works on plain ``numpy`` arrays through these helpers.
Operators are square 2-D arrays, states are 1-D arrays; the typed wrappers
in :mod:`spinbridge.hilbert` add the tensor-factor bookkeeping on top.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import ConvergenceError, SizingError, ValidationError

#: Largest total dimension any Kronecker product may produce.
MAX_TOTAL_DIM = 32768
#: Relative tolerance for the Hermiticity check.
HERMITIAN_RTOL = 1e-12


def _as_matrix(m, name="matrix") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return m


def kron(a, b, max_dim: int | None = None) -> np.ndarray:
    """Kronecker product ``a ⊗ b`` with a guard on the resulting size."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    limit = MAX_TOTAL_DIM if max_dim is None else max_dim
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > limit:
        raise SizingError(f"kron result {rows}x{cols} exceeds maximum dimension {limit}")
    return np.kron(a, b)


def hermiticity_defect(h: np.ndarray) -> float:
    """Return ``max|h - h†|``."""
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def check_hermitian(h, name="h", rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Validate Hermiticity and return the symmetrized matrix ``(h + h†)/2``.

    Real input stays real so that LAPACK can use the cheaper symmetric path.
    """
    h = _as_matrix(h, name)
    if h.shape[0] != h.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {h.shape}")
    scale = float(np.max(np.abs(h))) if h.size else 0.0
    defect = hermiticity_defect(h)
    if defect > rtol * max(scale, 1e-300):
        raise ValidationError(
            f"{name} is not Hermitian: max|A - A^H| = {defect:.3e} exceeds "
            f"{rtol:g} * max|A| = {rtol * scale:.3e}"
        )
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition ``h = V diag(e) V†`` with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def propagator(self, t: float) -> np.ndarray:
        """Dense ``exp(-i h t)``."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        """``exp(-i h t) psi`` without forming the propagator."""
        v = self.eigenvectors
        coeffs = v.conj().T @ psi
        return v @ (np.exp(-1j * self.eigenvalues * t) * coeffs)


def herm_eig(h) -> SpectralDecomposition:
    """Diagonalize a Hermitian matrix.

    Raises
    ------
    ValidationError
        If ``h`` is not Hermitian to :data:`HERMITIAN_RTOL` relative precision.
    """
    h = check_hermitian(h)
    if np.iscomplexobj(h) and not np.any(h.imag):
        h = h.real  # real symmetric solver: a quarter of the work
    evals, evecs = sla.eigh(h, check_finite=False, driver="evd")
    return SpectralDecomposition(evals, evecs)


def expm_unitary(h, t: float) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h``."""
    if t == 0:
        h = check_hermitian(h)
        return np.eye(h.shape[0], dtype=complex)
    return herm_eig(h).propagator(t)


def _lanczos(matvec, v0: np.ndarray, m_max: int):
    """Lanczos tridiagonalization with full reorthogonalization.

    Returns the basis (columns), diagonal, off-diagonal and the residual
    coupling ``beta_m`` to the next (unbuilt) vector.
    """
    n = v0.shape[0]
    m_max = min(m_max, n)
    basis = np.zeros((n, m_max), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    basis[:, 0] = v0
    for j in range(m_max):
        w = matvec(basis[:, j])
        alpha[j] = np.vdot(basis[:, j], w).real
        w = w - alpha[j] * basis[:, j]
        if j > 0:
            w = w - beta[j - 1] * basis[:, j - 1]
        # full reorthogonalization, twice is enough
        for _ in range(2):
            w = w - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
        b = float(np.linalg.norm(w))
        beta[j] = b
        if j + 1 == m_max:
            break
        if b < 1e-13:
            return basis[:, : j + 1], alpha[: j + 1], beta[:j], 0.0
        basis[:, j + 1] = w / b
    m = basis.shape[1]
    return basis, alpha[:m], beta[: m - 1], float(beta[m - 1])


def krylov_apply(
    h,
    psi,
    t: float,
    tol: float = 1e-10,
    max_krylov_dim: int = 60,
    max_substeps: int = 100000,
) -> np.ndarray:
    """Approximate ``exp(-i h t) psi`` by time-stepped Lanczos projection.

    Each substep uses a Krylov space of dimension at most ``max_krylov_dim`` and
    the largest step whose a-posteriori error estimate stays within its share
    of ``tol``.

    Raises
    ------
    ConvergenceError
        When more than ``max_substeps`` substeps would be needed.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    h = check_hermitian(h)
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (h.shape[0],):
        raise ValidationError(f"state of shape {psi.shape} does not match operator {h.shape}")
    if t == 0:
        return psi.copy()
    norm0 = float(np.linalg.norm(psi))
    if norm0 == 0:
        return psi.copy()

    def matvec(x):
        return h @ x

    remaining = abs(t)
    sign = 1.0 if t > 0 else -1.0
    v = psi / norm0
    steps = 0
    worst = 0.0
    while remaining > 0:
        basis, a, b, beta_m = _lanczos(matvec, v, max_krylov_dim)
        m = a.shape[0]
        theta, q = sla.eigh_tridiagonal(a, b) if m > 1 else (a.copy(), np.ones((1, 1)))
        e1 = q[0, :].conj()

        def small(tau):
            return q @ (np.exp(-1j * sign * theta * tau) * e1)

        def estimate(tau):
            if beta_m == 0.0:
                return 0.0
            return beta_m * abs(small(tau)[-1]) * norm0

        budget = tol * 0.5
        tau = remaining
        err = estimate(tau)
        # budget is shared in proportion to the step length
        while err > budget * tau / abs(t):
            tau *= 0.5
            if tau < abs(t) / max_substeps:
                raise ConvergenceError(
                    f"Krylov step collapsed below t/{max_substeps} with residual {err:.3e}",
                    residual=err,
                )
            err = estimate(tau)
        worst += err
        v = basis @ small(tau)
        remaining = remaining - tau
        if remaining < abs(t) * 1e-15:
            remaining = 0.0
        steps += 1
        if steps > max_substeps:
            raise ConvergenceError(
                f"Krylov propagation needed more than {max_substeps} substeps",
                residual=worst,
            )
    return v * norm0


def _check_layout(rho: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValidationError(f"dimensions must be positive, got {dims}")
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValidationError(f"matrix of shape {rho.shape} does not match layout {dims}")
    return dims


def _factor_set(indices, n: int) -> list[int]:
    idx = sorted({int(i) for i in indices})
    if any(i < 0 or i >= n for i in idx):
        raise ValidationError(f"factor indices {idx} out of range for {n} factors")
    return idx


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    ``dims`` gives the factor dimensions in tensor order; ``keep`` is a set of
    factor indices. The kept factors retain their relative order.
    """
    rho = _as_matrix(rho, "rho")
    dims = _check_layout(rho, dims)
    n = len(dims)
    keep = _factor_set(keep, n)
    if not keep:
        raise ValidationError("keep must name at least one factor")
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    spec = "".join(rows) + "".join(cols) + "->" + out
    reduced = np.einsum(spec, rho.reshape(dims + dims))
    d = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(d, d)


def partial_transpose(rho, dims: Sequence[int], part) -> np.ndarray:
    """Transpose the row/column indices of the factors in ``part`` only."""
    rho = _as_matrix(rho, "rho")
    dims = _check_layout(rho, dims)
    n = len(dims)
    part = _factor_set(part, n)
    perm = list(range(2 * n))
    for i in part:
        perm[i], perm[n + i] = n + i, i
    total = rho.shape[0]
    return rho.reshape(dims + dims).transpose(perm).reshape(total, total)


def trace_norm(m) -> float:
    """Sum of singular values.

    Hermitian input (the only case arising for partial transposes) goes
    through ``eigvalsh``, whose moduli are the singular values to full
    precision; other input falls back to an SVD.
    """
    m = _as_matrix(m, "m")
    if m.size == 0:
        return 0.0
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return 0.0
    if m.shape[0] == m.shape[1] and hermiticity_defect(m) <= HERMITIAN_RTOL * scale:
        h = 0.5 * (m + m.conj().T)
        return float(np.sum(np.abs(np.linalg.eigvalsh(h))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))

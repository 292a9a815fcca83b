"""Truncated bosonic modes, spins, composite layouts and canonical states.

Spin basis convention: index 0 is the excited state ``|e>`` and index 1 the
ground state ``|g>``, so ``sigma_z = diag(1, -1)`` and ``sigma_+ = |e><g|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.special import gammaln
from scipy.stats import poisson

from . import linalg
from .errors import RangeError, SizingError, TruncationError, ValidationError

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SPIN_E = np.array([1.0, 0.0])
SPIN_G = np.array([0.0, 1.0])

#: Default discarded-weight tolerance for coherent states.
TAIL_TOL = 1e-8

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS, SPIN_E, SPIN_G):
    _m.setflags(write=False)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor-factor layout, e.g. ``(spin1, mode1, spin2, mode2)``."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        if not factors:
            raise ValidationError("a space needs at least one factor")
        labels = [f[0] for f in factors]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"factor labels must be unique, got {labels}")
        for label, dim in factors:
            if dim < 1:
                raise SizingError(f"factor {label!r} has dimension {dim} < 1")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def canonical(cls, cutoff1: int, cutoff2: int) -> CompositeSpace:
        """The two-subsystem layout ``spin1 ⊗ mode1 ⊗ spin2 ⊗ mode2``."""
        return cls((("spin1", 2), ("mode1", cutoff1), ("spin2", 2), ("mode2", cutoff2)))

    @classmethod
    def two_mode(cls, cutoff1: int, cutoff2: int) -> CompositeSpace:
        return cls((("mode1", cutoff1), ("mode2", cutoff2)))

    @classmethod
    def spin_mode(cls, cutoff: int) -> CompositeSpace:
        return cls((("spin", 2), ("mode", cutoff)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f[0] for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f[1] for f in self.factors)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def dim_of(self, label: str) -> int:
        return self.dims[self.index_of(label)]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"space has no factor {label!r}; factors are {self.labels}") from None

    def resolve(self, sites: Iterable[int | str] | int | str) -> list[int]:
        """Turn labels and/or indices into a sorted list of factor indices."""
        if isinstance(sites, (int, str, np.integer)):
            sites = [sites]
        out = set()
        for s in sites:
            if isinstance(s, str):
                out.add(self.index_of(s))
            else:
                i = int(s)
                if not 0 <= i < len(self.factors):
                    raise ValidationError(f"factor index {i} out of range")
                out.add(i)
        return sorted(out)

    def subspace(self, indices: Sequence[int]) -> CompositeSpace:
        return CompositeSpace(tuple(self.factors[i] for i in sorted(indices)))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state on a :class:`CompositeSpace`."""

    space: CompositeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape[0] != self.space.total_dim:
            raise ValidationError(
                f"{amps.shape[0]} amplitudes do not fit space of dimension {self.space.total_dim}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValidationError("state amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        n = self.norm()
        if n == 0:
            raise ValidationError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def inner(self, other: StateVector) -> complex:
        """``<self|other>``."""
        _same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def tensor(self, other: StateVector) -> StateVector:
        space = CompositeSpace(self.space.factors + other.space.factors)
        return StateVector(space, np.kron(self.amplitudes, other.amplitudes))

    def evolved(self, amplitudes: np.ndarray) -> StateVector:
        """Same space, new amplitudes."""
        return StateVector(self.space, amplitudes)

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor."""
        return self.amplitudes.reshape(self.space.dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state on a :class:`CompositeSpace`."""

    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValidationError(f"matrix of shape {m.shape} does not fit space of dimension {d}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_state(cls, psi: StateVector) -> DensityMatrix:
        return psi.density()

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.vdot(m.conj().T, m)))

    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def validate(self, tol: float = 1e-10) -> DensityMatrix:
        """Check Hermiticity, unit trace and positivity; return ``self``."""
        m = self.matrix
        defect = linalg.hermiticity_defect(m)
        if defect > tol:
            raise ValidationError(f"density matrix not Hermitian: max|rho - rho^H| = {defect:.3e}")
        tr = self.trace()
        if abs(tr - 1) > tol:
            raise ValidationError(f"density matrix trace {tr:.12g} differs from 1")
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lo < -tol:
            raise ValidationError(f"density matrix has eigenvalue {lo:.3e} < -{tol:g}")
        return self

    def ptrace(self, keep) -> DensityMatrix:
        """Reduced state on the factors in ``keep`` (labels or indices)."""
        idx = self.space.resolve(keep)
        red = linalg.partial_trace(self.matrix, self.space.dims, idx)
        return DensityMatrix(self.space.subspace(idx), red)

    def partial_transpose(self, part) -> np.ndarray:
        return linalg.partial_transpose(self.matrix, self.space.dims, self.space.resolve(part))


def _same_space(a: CompositeSpace, b: CompositeSpace):
    if a != b:
        raise ValidationError(f"spaces differ: {a.factors} vs {b.factors}")


def annihilation(cutoff: int) -> np.ndarray:
    """Truncated ladder operator with ``a|n> = sqrt(n)|n-1>``."""
    if cutoff < 2:
        raise SizingError(f"cutoff must be at least 2, got {cutoff}")
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1)


def number(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff, dtype=float))


def fock(cutoff: int, n: int, label: str = "mode") -> StateVector:
    if not 0 <= n < cutoff:
        raise RangeError(f"occupation {n} outside truncated ladder [0, {cutoff})")
    v = np.zeros(cutoff, dtype=complex)
    v[n] = 1.0
    return StateVector(CompositeSpace(((label, cutoff),)), v)


def poisson_tail(alpha: complex, cutoff: int) -> float:
    """Weight of a coherent state on Fock levels ``n >= cutoff``."""
    return float(poisson.sf(cutoff - 1, abs(alpha) ** 2))


def cutoff_for_amplitude(alpha: complex) -> int:
    """Default cutoff ``ceil(|a|^2 + 7|a| + 10)`` for coherent-state runs."""
    r = abs(alpha)
    return int(math.ceil(r * r + 7 * r + 10))


def coherent(cutoff: int, alpha: complex, tail_tol: float = TAIL_TOL, label: str = "mode") -> StateVector:
    """Truncated, renormalized coherent state ``|alpha>``.

    Raises
    ------
    TruncationError
        If the discarded Poisson tail exceeds ``tail_tol``.
    """
    if cutoff < 1:
        raise SizingError("cutoff must be positive")
    tail = poisson_tail(alpha, cutoff)
    if tail > tail_tol:
        raise TruncationError(
            f"coherent state alpha={alpha} loses weight {tail:.3e} > {tail_tol:g} "
            f"at cutoff {cutoff}; use a cutoff of at least {cutoff_for_amplitude(alpha)}"
        )
    n = np.arange(cutoff)
    amps = np.zeros(cutoff, dtype=complex)
    if alpha == 0:
        amps[0] = 1.0
    else:
        r, phase = abs(alpha), np.angle(alpha)
        amps = np.exp(n * math.log(r) - 0.5 * gammaln(n + 1) - 0.5 * r * r + 1j * phase * n)
    return StateVector(CompositeSpace(((label, cutoff),)), amps).normalized()


def displacement(cutoff: int, alpha: complex) -> np.ndarray:
    """``D(alpha) = exp(alpha a† - alpha* a)`` exponentiated in the truncated space."""
    a = annihilation(cutoff)
    gen = alpha * a.T - np.conj(alpha) * a
    if np.isrealobj(gen) or not np.any(np.imag(gen)):
        return sla.expm(np.real(gen))
    return sla.expm(gen)


def spin_dep_displacement(cutoff: int, alpha: complex) -> np.ndarray:
    """Spin-dependent displacement on ``spin ⊗ mode``.

    Block form ``(1/sqrt 2) [[D†, D], [-D†, D]]`` with the first block row and
    column acting on ``|e>``.
    """
    d = displacement(cutoff, alpha)
    dh = d.conj().T
    return np.block([[dh, d], [-dh, d]]) / math.sqrt(2.0)


def embed(op: np.ndarray, space: CompositeSpace, site: str | int) -> np.ndarray:
    """Lift a single-factor operator to ``space`` (identities elsewhere)."""
    idx = space.resolve(site)[0] if isinstance(site, (str, int)) else int(site)
    dims = space.dims
    op = np.asarray(op)
    if op.shape != (dims[idx], dims[idx]):
        raise ValidationError(
            f"operator of shape {op.shape} does not match factor "
            f"{space.labels[idx]!r} of dimension {dims[idx]}"
        )
    left = math.prod(dims[:idx])
    right = math.prod(dims[idx + 1 :])
    out = op
    if left > 1:
        out = linalg.kron(np.eye(left), out)
    if right > 1:
        out = linalg.kron(out, np.eye(right))
    return out


def embed_many(ops: dict[str, np.ndarray], space: CompositeSpace) -> np.ndarray:
    """Tensor product of several single-factor operators, identities elsewhere."""
    mats = []
    for label, dim in space.factors:
        mats.append(np.asarray(ops[label]) if label in ops else np.eye(dim))
    unknown = set(ops) - set(space.labels)
    if unknown:
        raise KeyError(f"space has no factor(s) {sorted(unknown)}")
    out = mats[0]
    for m in mats[1:]:
        out = linalg.kron(out, m)
    return out


def product_state(space: CompositeSpace, parts: dict[str, np.ndarray]) -> StateVector:
    """Product state with one vector per factor label."""
    vec = np.ones(1, dtype=complex)
    for label, dim in space.factors:
        v = np.asarray(parts[label], dtype=complex).reshape(-1)
        if v.shape[0] != dim:
            raise ValidationError(f"vector for {label!r} has length {v.shape[0]}, expected {dim}")
        vec = np.kron(vec, v)
    return StateVector(space, vec)

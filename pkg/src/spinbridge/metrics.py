"""Entanglement and distinguishability measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import SamplingError, ValidationError
from .hilbert import DensityMatrix, StateVector

#: Project-wide logarithm base for the log-negativity (natural log).
DEFAULT_LOG_BASE = "e"
EIG_CLAMP = 1e-10
NOISE_FLOOR = 64 * np.finfo(float).eps


def _log(x: float, base) -> float:
    if base in ("e", math.e):
        return math.log(x)
    b = float(base)
    if not b > 1:
        raise ValidationError(f"log base must exceed 1, got {base!r}")
    return math.log(x) / math.log(b)


def normalize_base(base) -> str:
    """Canonical text form (``"2"`` or ``"e"``) used in result records."""
    if base in ("e", math.e):
        return "e"
    if float(base) == 2.0:
        return "2"
    return repr(float(base))


@dataclass(frozen=True)
class MetricSeries:
    grid: np.ndarray
    values: np.ndarray
    name: str
    log_base: str | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise ValidationError(f"grid {g.shape} and values {v.shape} must be equal-length 1-D arrays")
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"series {self.name!r} contains non-finite values")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.grid.shape[0]


def _bipartite_matrix(psi: StateVector, part) -> np.ndarray:
    space = psi.space
    a = space.resolve(part) if part is not None else [0]
    b = [i for i in range(len(space.dims)) if i not in a]
    if not b:
        raise ValidationError("bipartition leaves the complement empty")
    t = psi.tensor_view().transpose(a + b)
    da = math.prod(space.dims[i] for i in a)
    return t.reshape(da, -1)


def log_negativity(rho, part=None, base=DEFAULT_LOG_BASE) -> float:
    """``log ||rho^{T_A}||_1`` with ``A`` the factors in ``part`` (default: first).

    A :class:`StateVector` is handled through its Schmidt coefficients,
    ``||rho^{T_A}|| = (sum_k s_k)^2``.
    """
    if isinstance(rho, StateVector):
        s = np.linalg.svd(_bipartite_matrix(rho, part), compute_uv=False)
        norm = float(np.sum(s)) ** 2 / max(float(np.sum(s * s)), 1e-300)
    elif isinstance(rho, DensityMatrix):
        part = [0] if part is None else part
        idx = rho.space.resolve(part)
        if len(idx) == len(rho.space.dims):
            raise ValidationError("partition must leave a non-empty complement")
        norm = linalg.trace_norm(rho.partial_transpose(idx)) / abs(rho.trace())
    else:
        raise ValidationError("log_negativity expects a StateVector or DensityMatrix")
    value = _log(norm, base)
    return 0.0 if -EIG_CLAMP < value < 0 else value


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    # roundoff-level eigenvalues would otherwise enter as sqrt(eps)
    noise = NOISE_FLOOR * max(float(w[-1]), 0.0)
    w = np.where(w < noise, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def _check_pair(a, b):
    if a.space != b.space:
        raise ValidationError(f"states live on different spaces: {a.space.dims} vs {b.space.dims}")


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2``.

    Evaluated as the squared nuclear norm of ``sqrt(a) sqrt(b)``. Pure
    arguments (:class:`StateVector`) use the rank-one reductions.
    """
    _check_pair(a, b)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return abs(a.inner(b)) ** 2
    if isinstance(a, StateVector):
        a, b = b, a
    if isinstance(b, StateVector):
        v = np.asarray(b.amplitudes)
        return float(np.vdot(v, a.matrix @ v).real)
    prod = _psd_sqrt(np.asarray(a.matrix)) @ _psd_sqrt(np.asarray(b.matrix))
    return float(np.sum(np.linalg.svd(prod, compute_uv=False)) ** 2)


def _diag(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return np.abs(np.asarray(x.amplitudes)) ** 2
    return np.clip(np.asarray(x.matrix).diagonal().real, 0.0, None)


def population_fidelity(a, b) -> float:
    """Classical fidelity ``(sum_i sqrt(a_ii b_ii))^2`` of the diagonals."""
    _check_pair(a, b)
    return float(np.sum(np.sqrt(_diag(a) * _diag(b))) ** 2)


def window_average(series: MetricSeries, lo: float, hi: float, min_points: int = 2) -> float:
    """Trapezoidal mean over the grid samples lying in ``[lo, hi]``."""
    if not lo < hi:
        raise SamplingError(f"empty window [{lo}, {hi}]")
    g = series.grid
    slack = 1e-9 * max(1.0, abs(hi - lo))
    mask = (g >= lo - slack) & (g <= hi + slack)
    npts = int(mask.sum())
    if npts < max(2, min_points):
        raise SamplingError(f"window [{lo}, {hi}] holds {npts} grid points, need {max(2, min_points)}")
    x, y = g[mask], series.values[mask]
    return float(np.trapezoid(y, x) / (x[-1] - x[0]))

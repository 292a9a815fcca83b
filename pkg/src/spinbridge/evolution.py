"""State propagation: static, time-stepped and stroboscopic (Floquet).

Propagators never renormalize; norm drift is reported through
:class:`StepInfo` so callers can attach it to run metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import linalg
from .errors import ConvergenceError, ModelError, ValidationError
from .hamiltonians import ModelParams
from .hilbert import SIGMA_X, SIGMA_Z, CompositeSpace, StateVector

SCHEMES = ("midpoint", "cf4")
SCHEME_ORDER = {"midpoint": 2, "cf4": 4}

_SQ3 = math.sqrt(3.0)
_CF4_C = (0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6)
_CF4_A = ((3 - 2 * _SQ3) / 12, (3 + 2 * _SQ3) / 12)


@dataclass(frozen=True)
class PropagationConfig:
    """Integrator settings.

    ``substeps_per_period`` sets the step for periodic generators; aperiodic
    ones use ``t_final / substeps_per_period``. ``max_dense_dim`` is the
    dimension above which static propagation switches to Krylov.
    """

    substeps_per_period: int = 128
    scheme: str = "midpoint"
    tol: float = 1e-8
    max_dense_dim: int = 2000
    max_refinements: int = 6

    def __post_init__(self):
        if self.substeps_per_period < 16:
            raise ValidationError("substeps_per_period must be at least 16")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass
class StepInfo:
    steps: int = 0
    residual: float = 0.0
    norm_drift: float = 0.0
    method: str = ""
    extra: dict = field(default_factory=dict)


def _amps(psi) -> np.ndarray:
    if isinstance(psi, StateVector):
        return np.asarray(psi.amplitudes)
    return np.asarray(psi, dtype=complex)


def _rewrap(template, amps: np.ndarray):
    if isinstance(template, StateVector):
        return StateVector(template.space, amps)
    return amps


def _check_dims(h: np.ndarray, psi: np.ndarray):
    if h.shape != (psi.shape[0], psi.shape[0]):
        raise ValidationError(f"operator {h.shape} does not act on a state of length {psi.shape[0]}")


# -- static -------------------------------------------------------------------


def propagate_static(h, psi0, t: float, cfg: PropagationConfig | None = None):
    """``exp(-i h t) psi0``; Krylov above ``cfg.max_dense_dim``."""
    cfg = cfg or PropagationConfig()
    h = np.asarray(h)
    v = _amps(psi0)
    _check_dims(h, v)
    if t == 0:
        return _rewrap(psi0, v.copy())
    if h.shape[0] > cfg.max_dense_dim:
        out = linalg.krylov_apply(h, v, t, tol=cfg.tol)
    else:
        out = linalg.herm_eig(h).apply(v, t)
    return _rewrap(psi0, out)


class StaticPropagator:
    """Spectral propagator reused across many times for one static ``h``."""

    def __init__(self, h):
        self.decomposition = linalg.herm_eig(h)

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    def apply(self, psi, t: float):
        v = _amps(psi)
        if v.shape[0] != self.dim:
            raise ValidationError(f"state of length {v.shape[0]} does not match propagator of dim {self.dim}")
        return _rewrap(psi, self.decomposition.apply(v, t))


class SectorPropagator:
    """Spectral propagator for a Hamiltonian split by :func:`~spinbridge.hamiltonians.parity_reduction`."""

    def __init__(self, reduction):
        self.reduction = reduction
        self.sectors = (linalg.herm_eig(reduction.even), linalg.herm_eig(reduction.odd))

    @property
    def dim(self) -> int:
        return sum(d.dim for d in self.sectors)

    def apply(self, psi, t: float):
        v = _amps(psi)
        if v.shape[0] != self.dim:
            raise ValidationError(f"state of length {v.shape[0]} does not match propagator of dim {self.dim}")
        even, odd = self.reduction.split(v)
        out = self.reduction.merge(self.sectors[0].apply(even, t), self.sectors[1].apply(odd, t))
        return _rewrap(psi, out)


# -- time stepping --------------------------------------------------------------


def _h_at(h_of_t, t: float) -> np.ndarray:
    return np.asarray(h_of_t(t))


def step_unitary(h_of_t, t: float, dt: float, scheme: str) -> np.ndarray:
    """One-step propagator from ``t`` to ``t + dt``."""
    if scheme == "midpoint":
        return linalg.expm_unitary(_h_at(h_of_t, t + 0.5 * dt), dt)
    if scheme == "cf4":
        h1 = _h_at(h_of_t, t + _CF4_C[0] * dt)
        h2 = _h_at(h_of_t, t + _CF4_C[1] * dt)
        first = linalg.expm_unitary(_CF4_A[1] * h1 + _CF4_A[0] * h2, dt)
        second = linalg.expm_unitary(_CF4_A[0] * h1 + _CF4_A[1] * h2, dt)
        return second @ first
    raise ValidationError(f"unknown scheme {scheme!r}")


def _period_of(h_of_t) -> float | None:
    return getattr(h_of_t, "period", None)


def _n_steps(h_of_t, t_final: float, cfg: PropagationConfig) -> int:
    period = _period_of(h_of_t)
    if period:
        return max(1, math.ceil(abs(t_final) / period * cfg.substeps_per_period - 1e-9))
    return cfg.substeps_per_period


def _march(h_of_t, v: np.ndarray, t0: float, t_final: float, n: int, scheme: str) -> np.ndarray:
    dt = (t_final - t0) / n
    for k in range(n):
        v = step_unitary(h_of_t, t0 + k * dt, dt, scheme) @ v
    return v


def propagate_td(
    h_of_t,
    psi0,
    t_final: float,
    cfg: PropagationConfig | None = None,
    t0: float = 0.0,
    info: StepInfo | None = None,
):
    """Time-ordered propagation from ``t0`` to ``t_final``.

    The step count is doubled until two successive results agree to
    ``cfg.tol`` (after the Richardson factor of the scheme's order); the finer
    result is returned.

    Raises
    ------
    ConvergenceError
        If ``cfg.max_refinements`` doublings do not reach ``cfg.tol``.
    """
    cfg = cfg or PropagationConfig()
    v0 = _amps(psi0)
    if getattr(h_of_t, "static", False):
        h_of_t = _frozen(h_of_t)
    if t_final == t0:
        return _rewrap(psi0, v0.copy())
    _check_dims(_h_at(h_of_t, t0), v0)
    order = SCHEME_ORDER[cfg.scheme]
    n = _n_steps(h_of_t, t_final - t0, cfg)
    coarse = _march(h_of_t, v0, t0, t_final, n, cfg.scheme)
    residual = math.inf
    for _ in range(cfg.max_refinements):
        n *= 2
        fine = _march(h_of_t, v0, t0, t_final, n, cfg.scheme)
        residual = float(np.linalg.norm(fine - coarse)) / (2**order - 1)
        if residual <= cfg.tol:
            if info is not None:
                info.steps, info.residual, info.method = n, residual, cfg.scheme
                info.norm_drift = abs(float(np.linalg.norm(fine)) - float(np.linalg.norm(v0)))
            return _rewrap(psi0, fine)
        coarse = fine
    raise ConvergenceError(
        f"{cfg.scheme} stepping did not reach tol={cfg.tol:g} after {cfg.max_refinements} refinements; "
        f"residual {residual:.3e}",
        residual=residual,
    )


def _frozen(builder):
    h = builder(0.0)
    return lambda t: h


def step_propagator(h_of_t, t0: float, t1: float, n_steps: int, scheme: str = "midpoint") -> np.ndarray:
    """Dense propagator over ``[t0, t1]`` from ``n_steps`` fixed steps."""
    if n_steps < 1:
        raise ValidationError("n_steps must be positive")
    dt = (t1 - t0) / n_steps
    u = None
    for k in range(n_steps):
        s = step_unitary(h_of_t, t0 + k * dt, dt, scheme)
        u = s if u is None else s @ u
    return u


# -- Floquet ------------------------------------------------------------------


def check_periodic(h_of_t, period: float, samples: Iterable[float] | None = None, rtol: float = 1e-10):
    """Raise :class:`ModelError` unless ``h(t + period) == h(t)`` at sampled times."""
    if not period > 0:
        raise ModelError("period must be positive")
    if samples is None:
        samples = period * np.array([0.0, 0.137, 0.5, 0.861])
    for t in samples:
        a, b = _h_at(h_of_t, t), _h_at(h_of_t, t + period)
        scale = max(float(np.max(np.abs(a))), 1e-300)
        gap = float(np.max(np.abs(a - b)))
        if gap > rtol * scale:
            raise ModelError(f"generator is not periodic with period {period:g}: mismatch {gap:.3e} at t={t:g}")


def period_propagator(h_of_t, period: float, cfg: PropagationConfig | None = None) -> np.ndarray:
    """One-period propagator ``U_P`` with ``cfg.substeps_per_period`` steps."""
    cfg = cfg or PropagationConfig()
    check_periodic(h_of_t, period)
    u = step_propagator(h_of_t, 0.0, period, cfg.substeps_per_period, cfg.scheme)
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if defect > 1e-8:
        raise ConvergenceError(f"period propagator not unitary: defect {defect:.3e}", residual=defect)
    return u


def propagate_floquet(u_p: np.ndarray, psi0, n_periods: int, remainder: np.ndarray | None = None):
    """``remainder @ U_P^n @ psi0`` by binary powering."""
    if n_periods < 0:
        raise ValidationError("n_periods must be non-negative")
    v = _amps(psi0)
    _check_dims(u_p, v)
    power = u_p
    k = int(n_periods)
    while k:
        if k & 1:
            v = power @ v
        k >>= 1
        if k:
            power = power @ power
    if remainder is not None:
        v = remainder @ v
    return _rewrap(psi0, v)


class FloquetPropagator:
    """Stroboscopic propagator for a periodic generator.

    A time ``t = n P + r`` is reached by applying ``U_P^n`` through cached
    binary powers, then the first ``floor(r / dt)`` cached step unitaries of
    the period and one partial step for what is left.
    """

    def __init__(self, h_of_t, period: float, cfg: PropagationConfig | None = None):
        self.cfg = cfg or PropagationConfig()
        self.h_of_t = h_of_t
        self.period = float(period)
        check_periodic(h_of_t, self.period)
        n = self.cfg.substeps_per_period
        self.dt = self.period / n
        self.steps = [step_unitary(h_of_t, k * self.dt, self.dt, self.cfg.scheme) for k in range(n)]
        u = self.steps[0]
        for s in self.steps[1:]:
            u = s @ u
        defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if defect > 1e-8:
            raise ConvergenceError(f"period propagator not unitary: defect {defect:.3e}", residual=defect)
        self.u_period = u
        self._powers = [u]

    def _power(self, j: int) -> np.ndarray:
        while len(self._powers) <= j:
            last = self._powers[-1]
            self._powers.append(last @ last)
        return self._powers[j]

    def split(self, t: float) -> tuple[int, float]:
        if t < 0:
            raise ValidationError("Floquet propagation runs forward in time only")
        n = int(t // self.period)
        r = t - n * self.period
        if r >= self.period * (1 - 1e-13):
            n, r = n + 1, 0.0
        return n, r

    def apply_remainder(self, v: np.ndarray, r: float) -> np.ndarray:
        """Propagate ``v`` from time 0 to ``r < period``."""
        k = min(int(r // self.dt), len(self.steps))
        for s in self.steps[:k]:
            v = s @ v
        left = r - k * self.dt
        if left > self.dt * 1e-12:
            v = step_unitary(self.h_of_t, k * self.dt, left, self.cfg.scheme) @ v
        return v

    def apply(self, psi, t: float):
        n, r = self.split(t)
        v = _amps(psi)
        j = 0
        while n:
            if n & 1:
                v = self._power(j) @ v
            n >>= 1
            j += 1
        return _rewrap(psi, self.apply_remainder(v, r))


# -- frames and pulses --------------------------------------------------------


def _canonical_dims(space: CompositeSpace) -> tuple[int, int]:
    if space.labels != ("spin1", "mode1", "spin2", "mode2") or space.dims[0] != 2 or space.dims[2] != 2:
        raise ValidationError(f"expected the canonical spin1/mode1/spin2/mode2 layout, got {space.labels}")
    return space.dims[1], space.dims[3]


def boson_phase_diagonal(space: CompositeSpace, t: float, omega: float = 1.0) -> np.ndarray:
    n1, n2 = _canonical_dims(space)
    p = np.exp(1j * omega * t * np.arange(n1))
    q = np.exp(1j * omega * t * np.arange(n2))
    return np.einsum("a,p,b,q->apbq", np.ones(2), p, np.ones(2), q).reshape(-1)


def spin_phase_diagonal(space: CompositeSpace, t: float, lam: float) -> np.ndarray:
    n1, n2 = _canonical_dims(space)
    zz = np.outer([1.0, -1.0], [1.0, -1.0])
    ph = np.exp(1j * lam * t * zz)
    return np.einsum("ab,p,q->apbq", ph, np.ones(n1), np.ones(n2)).reshape(-1)


def to_interaction_frame(psi: StateVector, t: float, params: ModelParams, frames=("boson", "spin")) -> StateVector:
    """Multiply by ``e^{+i omega t (n1 + n2)}`` and/or ``e^{+i lam t sz1 sz2}``."""
    frames = set(frames)
    unknown = frames - {"boson", "spin"}
    if unknown:
        raise ValidationError(f"unknown frames {sorted(unknown)}")
    v = np.asarray(psi.amplitudes)
    if "boson" in frames:
        omegas = {s.omega for s in params.subsystems}
        if len(omegas) != 1:
            raise ModelError("boson frame needs a common omega")
        v = v * boson_phase_diagonal(psi.space, t, omegas.pop())
    if "spin" in frames:
        v = v * spin_phase_diagonal(psi.space, t, params.lam)
    return StateVector(psi.space, v)


def apply_pulse(psi: StateVector, pulse: str, angle: float = 0.0) -> StateVector:
    """Instantaneous ``sigma1x_sigma2z``, ``r1(angle)`` or ``r2(angle)``.

    ``r1(theta)`` multiplies Fock level ``p`` of mode 1 by ``e^{i theta p}``.
    """
    n1, n2 = _canonical_dims(psi.space)
    t = np.asarray(psi.amplitudes).reshape(2, n1, 2, n2)
    if pulse == "sigma1x_sigma2z":
        t = np.einsum("ac,bd,cpdq->apbq", SIGMA_X, SIGMA_Z, t)
    elif pulse == "r1":
        t = t * np.exp(1j * angle * np.arange(n1))[None, :, None, None]
    elif pulse == "r2":
        t = t * np.exp(1j * angle * np.arange(n2))[None, None, None, :]
    else:
        raise ValidationError(f"unknown pulse {pulse!r}")
    return StateVector(psi.space, t.reshape(-1))

"""Model parameters and Hamiltonian builders.

All rates are in units of the bosonic frequency; ``omega`` defaults to 1.
Single-subsystem builders act on ``spin ⊗ mode``; two-subsystem builders act
on the canonical ``spin1 ⊗ mode1 ⊗ spin2 ⊗ mode2`` layout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import linalg as sla

from . import linalg
from .errors import ModelError, RangeError, SizingError, ValidationError
from .hilbert import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    CompositeSpace,
    annihilation,
    number,
)

#: Largest |Delta|/omega handled by the f(Delta) expansion.
MAX_DRIVE_ORDER = 4
#: Quadrature nodes for the one-period average of the displacement series.
AVERAGE_NODES = 512
SUPPORTED_TAYLOR_ORDERS = (2, 4, 6)


class RWAWarning(UserWarning):
    """A drive violates |Delta| >> |epsilon|."""


@dataclass(frozen=True)
class DriveSpec:
    """Monochromatic spin drive of strength ``epsilon``, frequency ``delta``, phase ``phi``."""

    epsilon: float
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "delta", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"drive {name} must be finite")


@dataclass(frozen=True)
class SubsystemParams:
    """One driven spin-boson pair."""

    eta: float
    drives: tuple[DriveSpec, ...]
    cutoff: int | None = None
    omega: float = 1.0

    def __post_init__(self):
        drives = tuple(self.drives)
        object.__setattr__(self, "drives", drives)
        if not self.eta > 0:
            raise ValidationError(f"eta must be positive, got {self.eta}")
        if not self.omega > 0:
            raise ValidationError(f"omega must be positive, got {self.omega}")
        if self.cutoff is not None and self.cutoff < 2:
            raise SizingError(f"cutoff must be at least 2, got {self.cutoff}")
        for d in drives:
            ratio = d.delta / self.omega
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValidationError(
                    f"drive frequency delta={d.delta} is not an integer multiple of omega={self.omega}"
                )
            if d.delta != 0 and abs(d.epsilon) >= abs(d.delta):
                warnings.warn(
                    f"drive epsilon={d.epsilon} is not small against delta={d.delta}",
                    RWAWarning,
                    stacklevel=3,
                )

    @property
    def g(self) -> float:
        """Linear spin-boson coupling ``eta * omega / 2``."""
        return self.eta * self.omega / 2

    @property
    def orders(self) -> tuple[int, ...]:
        """Drive frequencies as signed multiples of omega."""
        return tuple(int(round(d.delta / self.omega)) for d in self.drives)

    def single_drive(self) -> DriveSpec:
        if len(self.drives) != 1:
            raise ModelError(f"expected exactly one drive, found {len(self.drives)}")
        return self.drives[0]

    def with_cutoff(self, cutoff: int) -> SubsystemParams:
        return replace(self, cutoff=cutoff)

    def require_cutoff(self) -> int:
        if self.cutoff is None:
            raise SizingError("subsystem cutoff has not been set")
        return self.cutoff


@dataclass(frozen=True)
class ModelParams:
    """Two subsystems coupled through ``lam * sz1 sz2``."""

    sub1: SubsystemParams
    sub2: SubsystemParams
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be finite and non-negative, got {self.lam}")

    @property
    def subsystems(self) -> tuple[SubsystemParams, SubsystemParams]:
        return (self.sub1, self.sub2)

    def space(self) -> CompositeSpace:
        return CompositeSpace.canonical(self.sub1.require_cutoff(), self.sub2.require_cutoff())

    def with_cutoffs(self, c1: int, c2: int) -> ModelParams:
        return replace(self, sub1=self.sub1.with_cutoff(c1), sub2=self.sub2.with_cutoff(c2))


@dataclass(frozen=True)
class CrossKerrCoefficients:
    theta_p: float
    theta_q: float
    varphi_p: float
    varphi_q: float
    xi_pq: float
    Theta_p: float
    Theta_q: float


@dataclass(frozen=True)
class HamiltonianBuilder:
    """A (possibly time-dependent) Hamiltonian on a fixed space.

    Calling the builder with a time returns the dense matrix at that time.
    """

    space: CompositeSpace
    func: Callable[[float], np.ndarray] = field(repr=False)
    static: bool
    period: float | None = None

    def __call__(self, t: float = 0.0) -> np.ndarray:
        return self.func(t)


# -- single-subsystem pieces -------------------------------------------------


def displacement_exponential(cutoff: int, eta: float) -> np.ndarray:
    """``exp(eta (a - a†))``, real orthogonal in the truncated space."""
    a = annihilation(cutoff)
    return sla.expm(eta * (a - a.T))


def _spin_mode(spin_op, mode_op) -> np.ndarray:
    return np.kron(spin_op, mode_op)


def _drive_phase(d: DriveSpec, t: float) -> complex:
    return np.exp(-1j * (d.delta * t + d.phi))


def _sub_generic(sub: SubsystemParams, t: float) -> np.ndarray:
    n_c = sub.require_cutoff()
    a = annihilation(n_c)
    eye = np.eye(n_c)
    h = sub.omega * _spin_mode(np.eye(2), number(n_c)) + sub.g * _spin_mode(SIGMA_X, a + a.T)
    h = h.astype(complex)
    for d in sub.drives:
        arg = d.delta * t + d.phi
        h += 0.5 * d.epsilon * (
            math.cos(arg) * _spin_mode(SIGMA_Z, eye) + math.sin(arg) * _spin_mode(SIGMA_Y, eye)
        )
    return h


def _dressed_drive(sub: SubsystemParams, big_e: np.ndarray, t: float) -> np.ndarray:
    """``sum_j (eps_j/2) {sigma+ E e^{-i(Delta_j t + phi_j)} + h.c.}``."""
    up = np.zeros((2 * big_e.shape[0],) * 2, dtype=complex)
    spe = _spin_mode(SIGMA_PLUS, big_e)
    for d in sub.drives:
        up += 0.5 * d.epsilon * _drive_phase(d, t) * spe
    return up + up.conj().T


def _sub_displaced(sub: SubsystemParams, t: float, big_e: np.ndarray | None = None) -> np.ndarray:
    n_c = sub.require_cutoff()
    if big_e is None:
        big_e = displacement_exponential(n_c, sub.eta)
    return sub.omega * _spin_mode(np.eye(2), number(n_c)) + _dressed_drive(sub, big_e, t)


def _rotated(big_e: np.ndarray, omega: float, t: float) -> np.ndarray:
    """``e^{i w t n} E e^{-i w t n}``."""
    k = np.arange(big_e.shape[0])
    return big_e * np.exp(1j * omega * t * (k[:, None] - k[None, :]))


def _sub_interaction(sub: SubsystemParams, t: float, big_e: np.ndarray | None = None) -> np.ndarray:
    n_c = sub.require_cutoff()
    if big_e is None:
        big_e = displacement_exponential(n_c, sub.eta)
    return _dressed_drive(sub, _rotated(big_e, sub.omega, t), t)


def f_operator(sub: SubsystemParams, order: int) -> np.ndarray:
    """Mode operator surviving the RWA for a drive at ``order * omega``."""
    n_c = sub.require_cutoff()
    if abs(order) > MAX_DRIVE_ORDER:
        raise RangeError(f"|Delta|/omega = {abs(order)} exceeds supported maximum {MAX_DRIVE_ORDER}")
    eta = sub.eta
    a = annihilation(n_c)
    if order == 0:
        return np.eye(n_c) - 0.5 * eta**2 * np.eye(n_c) - eta**2 * number(n_c)
    k = abs(order)
    coeff = eta**k / math.factorial(k)
    if order < 0:
        return coeff * np.linalg.matrix_power(a, k)
    return coeff * np.linalg.matrix_power(-a.T, k)


def _sub_effective(sub: SubsystemParams) -> np.ndarray:
    n_c = sub.require_cutoff()
    up = np.zeros((2 * n_c, 2 * n_c), dtype=complex)
    for d, order in zip(sub.drives, sub.orders):
        up += 0.5 * d.epsilon * np.exp(-1j * d.phi) * _spin_mode(SIGMA_PLUS, f_operator(sub, order))
    return up + up.conj().T


def spin_coupling(params: ModelParams) -> np.ndarray:
    """``lam * sz1 sz2`` on the canonical space."""
    n1, n2 = params.sub1.require_cutoff(), params.sub2.require_cutoff()
    z1 = np.kron(SIGMA_Z, np.eye(n1))
    z2 = np.kron(SIGMA_Z, np.eye(n2))
    return params.lam * np.kron(z1, z2)


def _combine(params: ModelParams, h1: np.ndarray, h2: np.ndarray, zz: np.ndarray | None = None) -> np.ndarray:
    d1, d2 = h1.shape[0], h2.shape[0]
    out = linalg.kron(h1, np.eye(d2)) + linalg.kron(np.eye(d1), h2)
    return out + (spin_coupling(params) if zz is None else zz)


def _dispatch(params, single, t):
    if isinstance(params, SubsystemParams):
        return single(params, t)
    return _combine(params, single(params.sub1, t), single(params.sub2, t))


# -- public builders ---------------------------------------------------------


def h_generic(params: ModelParams | SubsystemParams, t: float = 0.0) -> np.ndarray:
    """Linear spin-boson model with spin drives, ``H_0 + sum_j drive_j(t)``."""
    return _dispatch(params, _sub_generic, t)


def h_displaced(params: ModelParams | SubsystemParams, t: float = 0.0) -> np.ndarray:
    """Hamiltonian conjugated by the spin-dependent displacement ``T(-g/omega)``.

    The conjugation also produces the constant ``-g^2/omega``, which is
    dropped here.
    """
    return _dispatch(params, _sub_displaced, t)


def h_interaction_s(params: ModelParams | SubsystemParams, t: float) -> np.ndarray:
    """Displaced model in the interaction picture of ``omega a† a``."""
    return _dispatch(params, _sub_interaction, t)


def h_effective_sb(params: ModelParams | SubsystemParams) -> np.ndarray:
    """Nonlinear spin-boson model left after RWA and Lamb-Dicke truncation.

    For :class:`ModelParams` the spin coupling ``lam sz1 sz2`` is included.
    """
    if isinstance(params, SubsystemParams):
        return _sub_effective(params)
    return _combine(params, _sub_effective(params.sub1), _sub_effective(params.sub2))


def h_rotating_frame(params: ModelParams | SubsystemParams) -> np.ndarray:
    """Exact displaced model in a frame co-rotating with each spin drive.

    Needs one drive per subsystem. Then ``omega n - (Delta/2) sz + (eps/2)(sigma+ E e^{-i phi} + h.c.)``
    is time independent, and a state in this frame maps back to the displaced
    frame through ``exp(-i Delta t sz / 2)`` on each spin (see
    :func:`rotating_frame_phases`).
    """

    def single(sub: SubsystemParams, _t):
        d = sub.single_drive()
        n_c = sub.require_cutoff()
        still = replace(sub, drives=(DriveSpec(d.epsilon, 0.0, d.phi),))
        return _sub_displaced(still, 0.0) - 0.5 * d.delta * _spin_mode(SIGMA_Z, np.eye(n_c))

    return _dispatch(params, single, 0.0)


def rotating_frame_phases(params: ModelParams, t: float) -> np.ndarray:
    """Diagonal of the map from the co-rotating frame back to the displaced frame."""
    diags = []
    for sub in params.subsystems:
        delta = sub.single_drive().delta
        spin = np.exp(-0.5j * delta * t * np.array([1.0, -1.0]))
        diags.append(np.kron(spin, np.ones(sub.require_cutoff())))
    return np.kron(diags[0], diags[1])


def h_two_subsystems(params: ModelParams, variant: str) -> HamiltonianBuilder:
    """Two-subsystem Hamiltonian in one of three forms.

    ``exact-displaced``
        Displaced model on both pairs plus the spin coupling. Static when every
        drive has ``Delta = 0``.
    ``exact-interaction``
        Same model in the interaction picture of the free bosons; periodic with
        period ``2 pi / omega``.
    ``effective``
        The nonlinear spin-boson model, always static.
    """
    space = params.space()
    zz = spin_coupling(params)
    subs = params.subsystems
    if variant == "effective":
        h = _combine(params, _sub_effective(subs[0]), _sub_effective(subs[1]), zz)
        return HamiltonianBuilder(space, lambda t, h=h: h, static=True)

    big_es = [displacement_exponential(s.require_cutoff(), s.eta) for s in subs]
    if variant == "exact-displaced":
        static = all(o == 0 for s in subs for o in s.orders)

        def func(t):
            return _combine(
                params,
                _sub_displaced(subs[0], t, big_es[0]),
                _sub_displaced(subs[1], t, big_es[1]),
                zz,
            )

        if static:
            h0 = func(0.0)
            return HamiltonianBuilder(space, lambda t, h=h0: h, static=True)
        return HamiltonianBuilder(space, func, static=False, period=_common_period(params))

    if variant == "exact-interaction":

        def func(t):
            return _combine(
                params,
                _sub_interaction(subs[0], t, big_es[0]),
                _sub_interaction(subs[1], t, big_es[1]),
                zz,
            )

        return HamiltonianBuilder(space, func, static=False, period=_common_period(params))
    raise ValueError(f"unknown variant {variant!r}")


def local_parity_basis(cutoff: int) -> np.ndarray:
    """Orthogonal eigenbasis of ``sigma_x (-1)^n`` on ``spin ⊗ mode``.

    Column ``n`` (``n < cutoff``) is ``(|e,n> + (-1)^n |g,n>)/sqrt2`` with
    parity +1; column ``cutoff + n`` has the opposite sign and parity -1.
    """
    sign = (-1.0) ** np.arange(cutoff)
    eye = np.eye(cutoff)
    top = np.hstack([eye, eye])
    bottom = np.hstack([np.diag(sign), -np.diag(sign)])
    return np.vstack([top, bottom]) / math.sqrt(2.0)


@dataclass(frozen=True)
class ParityReduction:
    """Static two-subsystem Hamiltonian split by the joint parity ``Pi_1 Pi_2``.

    A canonical-layout state, viewed as a ``(2 N1, 2 N2)`` matrix ``V``, maps to
    ``W = U1^T V U2``. The even sector holds ``W[++]`` then ``W[--]``, the odd one
    ``W[+-]`` then ``W[-+]``, each flattened row-major.
    """

    u1: np.ndarray
    u2: np.ndarray
    even: np.ndarray
    odd: np.ndarray

    @property
    def cutoffs(self) -> tuple[int, int]:
        return self.u1.shape[0] // 2, self.u2.shape[0] // 2

    def split(self, amplitudes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.cutoffs
        w = self.u1.T @ np.asarray(amplitudes).reshape(2 * n1, 2 * n2) @ self.u2
        even = np.concatenate([w[:n1, :n2].reshape(-1), w[n1:, n2:].reshape(-1)])
        odd = np.concatenate([w[:n1, n2:].reshape(-1), w[n1:, :n2].reshape(-1)])
        return even, odd

    def merge(self, even: np.ndarray, odd: np.ndarray) -> np.ndarray:
        n1, n2 = self.cutoffs
        k = n1 * n2
        w = np.empty((2 * n1, 2 * n2), dtype=np.result_type(even, odd, complex))
        w[:n1, :n2] = even[:k].reshape(n1, n2)
        w[n1:, n2:] = even[k:].reshape(n1, n2)
        w[:n1, n2:] = odd[:k].reshape(n1, n2)
        w[n1:, :n2] = odd[k:].reshape(n1, n2)
        return (self.u1 @ w @ self.u2.T).reshape(-1)


def parity_reduction(params: ModelParams, tol: float = 1e-12) -> ParityReduction:
    """Block the exact displaced model along the joint spin-boson parity.

    Needs static, real drives (``Delta = 0`` and ``phi`` in ``{0, pi}``), for
    which each displaced subsystem commutes with ``sigma_x (-1)^n``.

    Raises
    ------
    ModelError
        If a subsystem Hamiltonian breaks its local parity.
    """
    locals_, zs, us = [], [], []
    for sub in params.subsystems:
        if any(o != 0 for o in sub.orders):
            raise ModelError("parity reduction needs Delta = 0 drives")
        n_c = sub.require_cutoff()
        h = _sub_displaced(sub, 0.0)
        if np.max(np.abs(h.imag)) > tol:
            raise ModelError("parity reduction needs real drive phases")
        u = local_parity_basis(n_c)
        hp = u.T @ h.real @ u
        zp = u.T @ _spin_mode(SIGMA_Z, np.eye(n_c)) @ u
        if np.max(np.abs(hp[:n_c, n_c:])) > tol * max(1.0, np.max(np.abs(hp))):
            raise ModelError("subsystem Hamiltonian breaks the local parity")
        locals_.append((hp[:n_c, :n_c], hp[n_c:, n_c:]))
        zs.append(zp[:n_c, n_c:])
        us.append(u)
    (h1p, h1m), (h2p, h2m) = locals_
    n1, n2 = h1p.shape[0], h2p.shape[0]
    e1, e2 = np.eye(n1), np.eye(n2)

    def diag(a, b):
        return np.kron(a, e2) + np.kron(e1, b)

    lam = params.lam
    cross_even = lam * np.kron(zs[0], zs[1])
    cross_odd = lam * np.kron(zs[0], zs[1].T)
    even = np.block([[diag(h1p, h2p), cross_even], [cross_even.T, diag(h1m, h2m)]])
    odd = np.block([[diag(h1p, h2m), cross_odd], [cross_odd.T, diag(h1m, h2p)]])
    return ParityReduction(us[0], us[1], even, odd)


def _common_period(params: ModelParams) -> float:
    omegas = {s.omega for s in params.subsystems}
    if len(omegas) != 1:
        raise ModelError("subsystems with different omega have no common period")
    return 2 * math.pi / omegas.pop()


# -- closed forms ---------------------------------------------------------------


def _ck_inputs(params: ModelParams):
    d1, d2 = params.sub1.single_drive(), params.sub2.single_drive()
    if params.sub1.orders[0] != 0 or params.sub2.orders[0] != 0:
        raise ModelError("cross-Kerr coefficients need a Delta = 0 drive on each subsystem")
    if params.lam == 0:
        raise ZeroDivisionError("cross-Kerr coefficients diverge at lambda = 0")
    return d1.epsilon, d2.epsilon, params.sub1.eta, params.sub2.eta, params.lam


def ck_coefficients(params: ModelParams) -> CrossKerrCoefficients:
    """Linear, self-Kerr and cross-Kerr rates of the engineered two-mode model."""
    e1, e2, h1, h2, lam = _ck_inputs(params)
    common = e1 * (h1**2 - 2) + e2 * (h2**2 - 2)
    return CrossKerrCoefficients(
        theta_p=e1 * h1**2 * common / (8 * lam),
        theta_q=e2 * h2**2 * common / (8 * lam),
        varphi_p=e1**2 * h1**4 / (8 * lam),
        varphi_q=e2**2 * h2**4 / (8 * lam),
        xi_pq=e1 * e2 * h1**2 * h2**2 / (4 * lam),
        Theta_p=e1 * e2 * h1**2 * (h2**2 - 2) / (8 * lam),
        Theta_q=e1 * e2 * h2**2 * (h1**2 - 2) / (8 * lam),
    )


def h_ideal_ck(
    coeffs: CrossKerrCoefficients,
    cutoffs: tuple[int, int],
    include_self_kerr: bool = False,
    include_linear: bool = True,
) -> np.ndarray:
    """Diagonal two-mode target Hamiltonian.

    With ``include_self_kerr`` the unpulsed model
    ``theta_p n1 + theta_q n2 + varphi_p n1^2 + varphi_q n2^2 + xi n1 n2``;
    otherwise the pulsed one ``Theta_p n1 + Theta_q n2 + xi n1 n2``.
    """
    p = np.arange(cutoffs[0], dtype=float)[:, None]
    q = np.arange(cutoffs[1], dtype=float)[None, :]
    diag = coeffs.xi_pq * p * q
    if include_self_kerr:
        diag = diag + coeffs.varphi_p * p**2 + coeffs.varphi_q * q**2
        if include_linear:
            diag = diag + coeffs.theta_p * p + coeffs.theta_q * q
    elif include_linear:
        diag = diag + coeffs.Theta_p * p + coeffs.Theta_q * q
    return np.diag(diag.reshape(-1))


def averaged_displacement_diagonal(eta: float, cutoff: int, order: int, nodes: int = AVERAGE_NODES) -> np.ndarray:
    """Diagonal of the one-period average of ``sum_{k<=order} eta^k (a(t) - a†(t))^k / k!``.

    The series is built in a padded space so the top Fock levels of the
    returned block carry no truncation artifacts.
    """
    big = cutoff + order + 1
    a = annihilation(big)
    gen = a - a.T
    series = np.zeros((big, big))
    term = np.eye(big)
    for k in range(order + 1):
        if k:
            term = term @ gen * (eta / k)
        series = series + term
    times = 2 * math.pi * np.arange(nodes) / nodes
    acc = np.zeros(big, dtype=complex)
    for t in times:
        acc += np.diagonal(_rotated(series, 1.0, t))
    return (acc / nodes).real[:cutoff]


def h_ideal_ck_higher_order(
    params: ModelParams,
    taylor_order: int,
    include_self_kerr: bool = False,
    cutoffs: tuple[int, int] | None = None,
) -> np.ndarray:
    """Phase Hamiltonian from the 4-level reduction with a longer displacement series.

    Each mode's drive operator becomes the diagonal, RWA-surviving part of
    the displacement exponential kept to ``eta**taylor_order``. For every Fock
    pair ``(p, q)`` the 4-level effective matrix is rebuilt and its phase rate
    read off: the average of the two Bell-branch eigenvalues for the pulsed
    sequence, the ``(phi1 + phi4)`` eigenvalue otherwise. The ``(0, 0)`` rate is
    subtracted, so order 2 reproduces :func:`h_ideal_ck` exactly.
    """
    if taylor_order not in SUPPORTED_TAYLOR_ORDERS:
        raise RangeError(f"taylor_order must be one of {SUPPORTED_TAYLOR_ORDERS}, got {taylor_order}")
    e1, e2, h1, h2, lam = _ck_inputs(params)
    if cutoffs is None:
        cutoffs = (params.sub1.require_cutoff(), params.sub2.require_cutoff())
    f1 = averaged_displacement_diagonal(h1, cutoffs[0], taylor_order)
    f2 = averaged_displacement_diagonal(h2, cutoffs[1], taylor_order)
    bell_plus = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2)
    bell_minus = np.array([0.0, -1.0, 1.0, 0.0]) / math.sqrt(2)
    rates = np.empty(cutoffs)
    for p, fp in enumerate(f1):
        for q, fq in enumerate(f2):
            h4 = h_eff_4level(0.5 * e1 * fp, 0.5 * e2 * fq, lam)
            r_plus = bell_plus @ h4 @ bell_plus
            if include_self_kerr:
                rates[p, q] = r_plus
            else:
                rates[p, q] = 0.5 * (r_plus + bell_minus @ h4 @ bell_minus)
    return np.diag((rates - rates[0, 0]).reshape(-1))


def h_eff_4level(gt1: float, gt2: float, lam: float) -> np.ndarray:
    """Second-order Magnus Hamiltonian on ``{phi1, phi2, phi3, phi4}``."""
    if lam == 0:
        raise ZeroDivisionError("the 4-level effective Hamiltonian diverges at lambda = 0")
    al = (gt1**2 + gt2**2) / (2 * lam)
    be = gt1 * gt2 / lam
    return np.array(
        [
            [al, 0.0, 0.0, be],
            [0.0, -al, -be, 0.0],
            [0.0, -be, -al, 0.0],
            [be, 0.0, 0.0, al],
        ]
    )


def jc_coupling(sub: SubsystemParams, p: int) -> float:
    """``k = eps eta^p / (2 p!)``."""
    return sub.single_drive().epsilon * sub.eta**p / (2 * math.factorial(p))


def jc_nonlinear(sub: SubsystemParams, p: int) -> np.ndarray:
    """``k [sigma+ a^p e^{-i phi} + h.c.]`` on ``spin ⊗ mode``."""
    if p < 1:
        raise RangeError(f"nonlinear order must be at least 1, got {p}")
    n_c = sub.require_cutoff()
    if n_c <= p:
        raise SizingError(f"cutoff {n_c} must exceed the nonlinear order {p}")
    k = jc_coupling(sub, p)
    phi = sub.single_drive().phi
    ap = np.linalg.matrix_power(annihilation(n_c), p)
    up = k * np.exp(-1j * phi) * _spin_mode(SIGMA_PLUS, ap)
    return up + up.conj().T


def n00m_time(params: ModelParams, n: int, m: int) -> float:
    """Evolution time ``pi / (4 beta)`` giving equal branch weights."""
    e1 = params.sub1.single_drive().epsilon
    e2 = params.sub2.single_drive().epsilon
    denom = e1 * e2 * params.sub1.eta**n * params.sub2.eta**m
    if denom == 0 or params.lam == 0:
        raise ZeroDivisionError("N00M time needs non-zero drive, coupling and lambda")
    return math.pi * params.lam * math.sqrt(math.factorial(n) * math.factorial(m)) / denom


def tilde_couplings(
    params: ModelParams,
    context: str,
    p: int = 0,
    q: int = 0,
    n: int | None = None,
    m: int | None = None,
) -> tuple[float, float]:
    """Effective couplings entering the 4-level reduction.

    ``context="cross-kerr"`` gives ``eps_j (1 - eta_j^2/2 - eta_j^2 n_j) / 2`` at
    occupations ``(p, q)``; ``context="nlbs"`` gives ``k_j sqrt((p+n)!/p!)`` and
    ``k_j sqrt((q+m)!/q!)``.
    """
    if p < 0 or q < 0:
        raise RangeError("occupations must be non-negative")
    s1, s2 = params.sub1, params.sub2
    if context == "cross-kerr":
        e1, e2 = s1.single_drive().epsilon, s2.single_drive().epsilon
        return (
            e1 * (1 - s1.eta**2 / 2 - s1.eta**2 * p) / 2,
            e2 * (1 - s2.eta**2 / 2 - s2.eta**2 * q) / 2,
        )
    if context == "nlbs":
        if n is None or m is None:
            raise ValueError("nlbs couplings need the orders n and m")
        k1, k2 = jc_coupling(s1, n), jc_coupling(s2, m)
        return (
            k1 * math.sqrt(math.factorial(p + n) / math.factorial(p)),
            k2 * math.sqrt(math.factorial(q + m) / math.factorial(q)),
        )
    raise ValueError(f"unknown context {context!r}")


def four_level_basis(space: CompositeSpace, p: int, q: int, shift1: int = 0, shift2: int = 0) -> np.ndarray:
    """Columns ``phi1..phi4`` embedded in the canonical space.

    ``shift1``/``shift2`` are the boson numbers carried by the ground-state
    branches (0 for cross-Kerr, ``n``/``m`` for the beam-splitter case).
    """
    n1, n2 = space.dim_of("mode1"), space.dim_of("mode2")
    if p + shift1 >= n1 or q + shift2 >= n2:
        raise SizingError("4-level subspace exceeds the truncated ladder")

    def idx(s1, k1, s2, k2):
        return ((s1 * n1 + k1) * 2 + s2) * n2 + k2

    e, g = 0, 1
    cols = [
        idx(e, p, e, q),
        idx(e, p, g, q + shift2),
        idx(g, p + shift1, e, q),
        idx(g, p + shift1, g, q + shift2),
    ]
    basis = np.zeros((space.total_dim, 4))
    basis[cols, range(4)] = 1.0
    return basis


def diagnostics(params: ModelParams, context: str = "cross-kerr", **occupations) -> dict[str, float]:
    """Approximation-validity figures attached to run metadata."""
    out: dict[str, float] = {}
    rwa = [abs(d.epsilon / d.delta) for s in params.subsystems for d in s.drives if d.delta != 0]
    out["rwa_ratio"] = max(rwa) if rwa else 0.0
    if params.lam > 0:
        gt = tilde_couplings(params, context, **occupations)
        out["coupling_ratio"] = max(abs(g) for g in gt) / params.lam
    else:
        out["coupling_ratio"] = math.inf
    return out


def lamb_dicke(eta: float, mode_state: np.ndarray) -> float:
    """``|eta| sqrt(<(a + a†)^2>)`` for a single-mode density matrix or ket."""
    mode_state = np.asarray(mode_state)
    n_c = mode_state.shape[0]
    x = annihilation(n_c)
    x = x + x.T
    x2 = x @ x
    if mode_state.ndim == 1:
        val = np.vdot(mode_state, x2 @ mode_state).real
    else:
        val = np.trace(x2 @ mode_state).real
    return abs(eta) * math.sqrt(max(val, 0.0))

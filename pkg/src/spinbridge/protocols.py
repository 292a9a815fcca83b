"""Cross-Kerr (entangled coherent state) and N00M protocols.

Cross-Kerr times are dimensionless, ``tau = xi_pq t / (2 pi)``, so ``tau = 1``
is one cross-Kerr period. N00M times are fractions of ``t = pi / (4 beta)``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import hamiltonians as hm
from .errors import MeasurementError, ModelError, SamplingError, ValidationError
from .evolution import (
    FloquetPropagator,
    PropagationConfig,
    SectorPropagator,
    StaticPropagator,
    apply_pulse,
    to_interaction_frame,
)
from .hilbert import (
    TAIL_TOL,
    CompositeSpace,
    DensityMatrix,
    StateVector,
    coherent,
    cutoff_for_amplitude,
)
from .metrics import (
    DEFAULT_LOG_BASE,
    MetricSeries,
    fidelity,
    log_negativity,
    normalize_base,
    population_fidelity,
    window_average,
)

CK_MODELS = ("exact", "ideal", "ideal-higher-order")
N00M_MODELS = ("exact", "effective-4level")
N00M_METHODS = ("floquet", "rotating")
DEFAULT_GRID_POINTS = 201
#: Reduced states are kept for every grid point only below this many bytes.
KEEP_STATES_BUDGET = 256 * 2**20

_SQ2 = 1 / math.sqrt(2)
MEASUREMENTS = {
    "plus_x": np.array([_SQ2, _SQ2]),
    "minus_x": np.array([_SQ2, -_SQ2]),
    "plus_y": np.array([_SQ2, 1j * _SQ2]),
    "minus_y": np.array([_SQ2, -1j * _SQ2]),
}


@dataclass
class ProtocolResult:
    """Per-grid-point outcome of a protocol run.

    ``reduced_states`` holds one two-mode :class:`DensityMatrix` per grid
    point, or ``None`` entries when they were not kept; ``final_state`` is
    always present.
    """

    grid: np.ndarray
    times: np.ndarray
    metrics: dict[str, MetricSeries]
    reduced_states: list[DensityMatrix | None]
    final_state: DensityMatrix
    diagnostics: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        return self.metrics[name].values


def _grid(values, name="time grid") -> np.ndarray:
    g = np.asarray(values, dtype=float).reshape(-1)
    if g.size == 0:
        raise ValidationError(f"{name} is empty")
    if np.any(g < 0) or np.any(np.diff(g) < 0):
        raise ValidationError(f"{name} must be non-negative and ascending")
    return g


def _keep(flag, n_points: int, dim: int) -> bool:
    if flag is not None:
        return bool(flag)
    return n_points * dim * dim * 16 <= KEEP_STATES_BUDGET


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _two_mode_density(tensor: np.ndarray) -> np.ndarray:
    """Trace the spins out of a ``(2, N1, 2, N2)`` amplitude tensor."""
    n1, n2 = tensor.shape[1], tensor.shape[3]
    rho = np.einsum("apbq,arbs->pqrs", tensor, tensor.conj())
    return rho.reshape(n1 * n2, n1 * n2)


# -- cross-Kerr -----------------------------------------------------------------


@dataclass(frozen=True)
class CkRunSpec:
    """Cross-Kerr run.

    ``model`` selects the evolution; ``target_order`` the Taylor order of the
    ideal reference the metrics compare against. ``pulse`` switches the
    self-Kerr-cancelling mid-sequence pulse; without it the reference keeps the
    self-Kerr terms.
    """

    params: hm.ModelParams
    alpha1: complex
    alpha2: complex
    time_grid: tuple[float, ...] = tuple(np.linspace(0.0, 1.0, DEFAULT_GRID_POINTS))
    model: str = "exact"
    order: int = 2
    target_order: int = 2
    pulse: bool = True
    rotate: bool = True
    log_base: str = DEFAULT_LOG_BASE
    tail_tol: float = TAIL_TOL
    keep_states: bool | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "time_grid", tuple(_grid(self.time_grid)))
        if self.model not in CK_MODELS:
            raise ValidationError(f"model must be one of {CK_MODELS}, got {self.model!r}")
        for name in ("order", "target_order"):
            if getattr(self, name) not in hm.SUPPORTED_TAYLOR_ORDERS:
                raise ValidationError(f"{name} must be one of {hm.SUPPORTED_TAYLOR_ORDERS}")

    def resolved_params(self) -> hm.ModelParams:
        """Params with cutoffs filled from the coherent amplitudes where unset."""
        s1, s2 = self.params.sub1, self.params.sub2
        c1 = s1.cutoff if s1.cutoff is not None else cutoff_for_amplitude(self.alpha1)
        c2 = s2.cutoff if s2.cutoff is not None else cutoff_for_amplitude(self.alpha2)
        return self.params.with_cutoffs(c1, c2)


def _phase_diagonal(spec: CkRunSpec, params: hm.ModelParams, order: int) -> np.ndarray:
    cut = (params.sub1.cutoff, params.sub2.cutoff)
    if order == 2:
        h = hm.h_ideal_ck(hm.ck_coefficients(params), cut, include_self_kerr=not spec.pulse)
    else:
        h = hm.h_ideal_ck_higher_order(params, order, include_self_kerr=not spec.pulse, cutoffs=cut)
    return np.diagonal(h).real.reshape(cut)


def _rotation_rates(spec: CkRunSpec, coeffs: hm.CrossKerrCoefficients) -> tuple[float, float]:
    if not spec.rotate:
        return 0.0, 0.0
    if spec.pulse:
        return coeffs.Theta_p, coeffs.Theta_q
    return coeffs.theta_p, coeffs.theta_q


def run_ck_ideal_state(
    alpha1: complex,
    alpha2: complex,
    coeffs: hm.CrossKerrCoefficients,
    t: float,
    cutoffs: tuple[int, int] | None = None,
    include_self_kerr: bool = False,
    phases: np.ndarray | None = None,
    rotation: tuple[float, float] = (0.0, 0.0),
    tail_tol: float = TAIL_TOL,
) -> StateVector:
    """Two-mode coherent product after ``exp(-i t H_ideal)``.

    ``phases`` (a ``(N1, N2)`` diagonal) overrides the closed-form Hamiltonian;
    ``rotation`` gives the rates of the trailing ``R1``/``R2`` rotations.
    """
    if cutoffs is None:
        cutoffs = (cutoff_for_amplitude(alpha1), cutoff_for_amplitude(alpha2))
    c1 = np.asarray(coherent(cutoffs[0], alpha1, tail_tol).amplitudes)
    c2 = np.asarray(coherent(cutoffs[1], alpha2, tail_tol).amplitudes)
    if phases is None:
        phases = np.diagonal(hm.h_ideal_ck(coeffs, cutoffs, include_self_kerr)).real.reshape(cutoffs)
    p = np.arange(cutoffs[0])[:, None]
    q = np.arange(cutoffs[1])[None, :]
    amp = np.outer(c1, c2) * np.exp(-1j * t * phases + 1j * t * (rotation[0] * p + rotation[1] * q))
    return StateVector(CompositeSpace.two_mode(*cutoffs), amp.reshape(-1))


def _bell_coherent(space: CompositeSpace, alpha1, alpha2, tail_tol) -> StateVector:
    n1, n2 = space.dims[1], space.dims[3]
    c1 = np.asarray(coherent(n1, alpha1, tail_tol).amplitudes)
    c2 = np.asarray(coherent(n2, alpha2, tail_tol).amplitudes)
    bell = np.array([[1.0, 0.0], [0.0, 1.0]]) * _SQ2  # (|ee> + |gg>)/sqrt 2
    t = np.einsum("ab,p,q->apbq", bell, c1, c2)
    return StateVector(space, t.reshape(-1))


def _ck_propagator(params: hm.ModelParams):
    """Parity-blocked spectral propagator when the drives allow it, full otherwise."""
    try:
        return SectorPropagator(hm.parity_reduction(params)), "spectral-parity"
    except ModelError:
        pass
    builder = hm.h_two_subsystems(params, "exact-displaced")
    if not builder.static:
        raise ModelError("the exact cross-Kerr run needs Delta = 0 drives on both subsystems")
    return StaticPropagator(builder(0.0)), "spectral"


def run_ck(spec: CkRunSpec) -> ProtocolResult:
    """Run the cross-Kerr sequence on every grid time.

    Exact model: prepare ``(|ee> + |gg>)/sqrt2 ⊗ |a1>|a2>``, evolve ``t/2`` with
    the displaced Hamiltonian, apply ``sigma1x sigma2z``, evolve ``t/2``, move to
    the joint boson and spin interaction frame, rotate with ``R1``/``R2`` and
    trace out the spins. Ideal models apply the diagonal phase Hamiltonian to
    the coherent product directly.
    """
    started = time.perf_counter()
    params = spec.resolved_params()
    coeffs = hm.ck_coefficients(params)
    if coeffs.xi_pq == 0:
        raise ModelError("cross-Kerr rate vanishes; the tau grid is undefined")
    cut = (params.sub1.cutoff, params.sub2.cutoff)
    grid = np.asarray(spec.time_grid)
    times = 2 * math.pi * grid / coeffs.xi_pq
    rot = _rotation_rates(spec, coeffs)
    target_phases = _phase_diagonal(spec, params, spec.target_order)
    two_mode = CompositeSpace.two_mode(*cut)

    def target(t):
        return run_ck_ideal_state(
            spec.alpha1, spec.alpha2, coeffs, t, cut, phases=target_phases, rotation=rot, tail_tol=spec.tail_tol
        )

    propagator = None
    model_phases = None
    if spec.model == "exact":
        propagator, propagation = _ck_propagator(params)
        psi0 = _bell_coherent(params.space(), spec.alpha1, spec.alpha2, spec.tail_tol)
    else:
        order = spec.order if spec.model == "ideal-higher-order" else 2
        model_phases = target_phases if order == spec.target_order else _phase_diagonal(spec, params, order)

    keep = _keep(spec.keep_states, len(times), two_mode.total_dim)
    last = times[-1]

    def evaluate(t):
        ref = target(t)
        retain = keep or t == last
        if propagator is None:
            state = run_ck_ideal_state(
                spec.alpha1, spec.alpha2, coeffs, t, cut, phases=model_phases, rotation=rot, tail_tol=spec.tail_tol
            )
            rho = state.density() if retain else None
            return rho, log_negativity(state, base=spec.log_base), fidelity(ref, state), population_fidelity(ref, state)
        psi = propagator.apply(psi0, t / 2)
        if spec.pulse:
            psi = apply_pulse(psi, "sigma1x_sigma2z")
        psi = propagator.apply(psi, t - t / 2)
        psi = to_interaction_frame(psi, t, params, ("boson", "spin"))
        psi = apply_pulse(apply_pulse(psi, "r1", rot[0] * t), "r2", rot[1] * t)
        rho = DensityMatrix(two_mode, _two_mode_density(psi.tensor_view()))
        row = log_negativity(rho, base=spec.log_base), fidelity(rho, ref), population_fidelity(rho, ref)
        return (rho if retain else None, *row)

    rows = _map(evaluate, list(times), spec.workers)
    base = normalize_base(spec.log_base)
    metrics = {
        "logneg": MetricSeries(grid, [r[1] for r in rows], "logneg", base),
        "fidelity": MetricSeries(grid, [r[2] for r in rows], "fidelity"),
        "pop_fidelity": MetricSeries(grid, [r[3] for r in rows], "pop_fidelity"),
    }
    final = rows[-1][0]
    diagnostics = hm.diagnostics(params, "cross-kerr")
    diagnostics["lamb_dicke_1"] = hm.lamb_dicke(params.sub1.eta, coherent(cut[0], spec.alpha1, spec.tail_tol).amplitudes)
    diagnostics["lamb_dicke_2"] = hm.lamb_dicke(params.sub2.eta, coherent(cut[1], spec.alpha2, spec.tail_tol).amplitudes)
    return ProtocolResult(
        grid=grid,
        times=times,
        metrics=metrics,
        reduced_states=[r[0] for r in rows] if keep else [None] * len(rows),
        final_state=final,
        diagnostics=diagnostics,
        meta={
            "protocol": "cross-kerr",
            "model": spec.model,
            "order": spec.order,
            "target_order": spec.target_order,
            "pulse": spec.pulse,
            "cutoffs": list(cut),
            "log_base": base,
            "propagation": propagation if propagator is not None else "diagonal",
            "wall_time": time.perf_counter() - started,
        },
    )


def avg_entanglement(result: ProtocolResult, window: tuple[float, float] = (0.1, 0.9)) -> float:
    """Trapezoidal mean log-negativity over ``window`` (needs 20+ samples)."""
    return window_average(result.metrics["logneg"], window[0], window[1], min_points=20)


# -- N00M ---------------------------------------------------------------------


@dataclass(frozen=True)
class N00mRunSpec:
    """N00M run on both subsystems driven at ``Delta_1 = -n omega``, ``Delta_2 = -m omega``.

    ``method`` picks the exact propagator: ``floquet`` steps the interaction
    picture Hamiltonian over one period and powers it; ``rotating`` uses the
    static Hamiltonian of the frame co-rotating with the drives.
    """

    params: hm.ModelParams
    n: int
    m: int
    measurement: str = "plus_x"
    model: str = "exact"
    time_grid: tuple[float, ...] = tuple(np.linspace(0.0, 1.0, DEFAULT_GRID_POINTS))
    method: str = "floquet"
    propagation: PropagationConfig = PropagationConfig(scheme="cf4")
    log_base: str = DEFAULT_LOG_BASE
    keep_states: bool | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValidationError("n and m must be at least 1")
        if self.measurement not in MEASUREMENTS:
            raise ValidationError(f"measurement must be one of {sorted(MEASUREMENTS)}")
        if self.model not in N00M_MODELS:
            raise ValidationError(f"model must be one of {N00M_MODELS}")
        if self.method not in N00M_METHODS:
            raise ValidationError(f"method must be one of {N00M_METHODS}")
        object.__setattr__(self, "time_grid", tuple(_grid(self.time_grid)))
        p = self.resolved_params()
        if min(p.sub1.cutoff, p.sub2.cutoff) <= max(self.n, self.m):
            raise ValidationError("cutoffs must exceed max(n, m)")
        if p.sub1.orders != (-self.n,) or p.sub2.orders != (-self.m,):
            raise ModelError("N00M drives must sit at Delta_1 = -n omega and Delta_2 = -m omega")

    def resolved_params(self) -> hm.ModelParams:
        default = max(self.n, self.m) + 6
        s1, s2 = self.params.sub1, self.params.sub2
        return self.params.with_cutoffs(s1.cutoff or default, s2.cutoff or default)


def ideal_n00m(n: int, m: int, theta: float, cutoffs: tuple[int, int]) -> StateVector:
    """``(|n,0> + e^{i theta}|0,m>)/sqrt 2``."""
    if cutoffs[0] <= n or cutoffs[1] <= m:
        raise ValidationError("cutoffs must exceed the target occupations")
    amp = np.zeros(cutoffs, dtype=complex)
    amp[n, 0] = _SQ2
    amp[0, m] += np.exp(1j * theta) * _SQ2
    return StateVector(CompositeSpace.two_mode(*cutoffs), amp.reshape(-1))


def n00m_initial_state(space: CompositeSpace, n: int) -> StateVector:
    """``|g,n>_1 ⊗ |e,0>_2``."""
    n1, n2 = space.dims[1], space.dims[3]
    t = np.zeros((2, n1, 2, n2), dtype=complex)
    t[1, n, 0, 0] = 1.0
    return StateVector(space, t.reshape(-1))


def measure_spins(psi: StateVector, measurement: str) -> tuple[StateVector, float]:
    """Project both spins on the same readout state; return modes and probability."""
    v = MEASUREMENTS[measurement]
    n1, n2 = psi.space.dims[1], psi.space.dims[3]
    t = psi.tensor_view()
    modes = np.einsum("a,b,apbq->pq", v.conj(), v.conj(), t).reshape(-1)
    prob = float(np.vdot(modes, modes).real)
    if prob < 1e-12:
        raise MeasurementError(f"readout {measurement} has probability {prob:.3e}")
    return StateVector(CompositeSpace.two_mode(n1, n2), modes / math.sqrt(prob)), prob


def _effective_evolver(params: hm.ModelParams, n: int, m: int, space: CompositeSpace):
    k1, k2 = hm.tilde_couplings(params, "nlbs", 0, 0, n, m)
    h4 = hm.h_eff_4level(k1, k2, params.lam)
    basis = hm.four_level_basis(space, 0, 0, n, m)
    w, v = np.linalg.eigh(h4)

    def evolve(psi: StateVector, t: float) -> StateVector:
        c = basis.T @ np.asarray(psi.amplitudes)
        c = v @ (np.exp(-1j * w * t) * (v.T @ c))
        return StateVector(space, basis @ c)

    return evolve


def _rotating_evolver(params: hm.ModelParams, space: CompositeSpace):
    prop = StaticPropagator(hm.h_rotating_frame(params))

    def evolve(psi: StateVector, t: float) -> StateVector:
        v = np.asarray(prop.apply(psi, t).amplitudes) * hm.rotating_frame_phases(params, t)
        return to_interaction_frame(StateVector(space, v), t, params, ("boson",))

    return evolve


def _floquet_evolver(params: hm.ModelParams, cfg: PropagationConfig):
    builder = hm.h_two_subsystems(params, "exact-interaction")
    prop = FloquetPropagator(builder, builder.period, cfg)
    return prop.apply, prop


def run_n00m(spec: N00mRunSpec) -> ProtocolResult:
    """Evolve ``|g,n>|e,0>`` to each grid fraction of ``pi/(4 beta)``, read out both spins, trace them out.

    The exact model works in the interaction picture of the free bosons
    with the spins in the lab frame, the frame in which the readout acts.
    """
    started = time.perf_counter()
    params = spec.resolved_params()
    space = params.space()
    t_total = hm.n00m_time(params, spec.n, spec.m)
    grid = np.asarray(spec.time_grid)
    times = grid * t_total
    cut = (params.sub1.cutoff, params.sub2.cutoff)
    target = ideal_n00m(spec.n, spec.m, math.pi / 2, cut)
    psi0 = n00m_initial_state(space, spec.n)
    meta = {
        "protocol": "n00m",
        "model": spec.model,
        "n": spec.n,
        "m": spec.m,
        "measurement": spec.measurement,
        "cutoffs": list(cut),
        "t_final": t_total,
        "log_base": normalize_base(spec.log_base),
    }
    if spec.model == "effective-4level":
        evolve = _effective_evolver(params, spec.n, spec.m, space)
        meta["propagation"] = "spectral-4level"
    elif spec.method == "rotating":
        evolve = _rotating_evolver(params, space)
        meta["propagation"] = "spectral-rotating"
    else:
        evolve, prop = _floquet_evolver(params, spec.propagation)
        meta.update(
            propagation="floquet",
            scheme=spec.propagation.scheme,
            substeps_per_period=spec.propagation.substeps_per_period,
            unitarity_defect=float(np.max(np.abs(prop.u_period.conj().T @ prop.u_period - np.eye(space.total_dim)))),
        )

    def evaluate(t):
        psi = evolve(psi0, t)
        norm = psi.norm()
        modes, prob = measure_spins(psi, spec.measurement)
        return modes, prob, norm

    rows = _map(evaluate, list(times), spec.workers)
    ln_ideal = log_negativity(target, base=spec.log_base)
    logneg = [log_negativity(r[0], base=spec.log_base) for r in rows]
    keep = _keep(spec.keep_states, len(rows), target.space.total_dim)
    final_modes = rows[-1][0]
    amps = np.asarray(final_modes.amplitudes).reshape(cut)
    diagnostics = hm.diagnostics(params, "nlbs", n=spec.n, m=spec.m)
    diagnostics["norm_drift"] = float(max(abs(r[2] - 1.0) for r in rows))
    modes_n = np.zeros(cut[0])
    modes_n[spec.n] = 1.0
    diagnostics["lamb_dicke_1"] = hm.lamb_dicke(params.sub1.eta, modes_n)
    diagnostics["lamb_dicke_2"] = hm.lamb_dicke(params.sub2.eta, np.eye(cut[1])[0])
    meta.update(
        probability=rows[-1][1],
        population_n0=float(abs(amps[spec.n, 0]) ** 2),
        population_0m=float(abs(amps[0, spec.m]) ** 2),
        logneg_ideal=ln_ideal,
        delta_logneg=abs(logneg[-1] - ln_ideal),
        wall_time=time.perf_counter() - started,
    )
    base = normalize_base(spec.log_base)
    return ProtocolResult(
        grid=grid,
        times=times,
        metrics={
            "logneg": MetricSeries(grid, logneg, "logneg", base),
            "fidelity": MetricSeries(grid, [fidelity(target, r[0]) for r in rows], "fidelity"),
            "pop_fidelity": MetricSeries(grid, [population_fidelity(target, r[0]) for r in rows], "pop_fidelity"),
            "probability": MetricSeries(grid, [r[1] for r in rows], "probability"),
        },
        reduced_states=[r[0].density() if keep else None for r in rows],
        final_state=final_modes.density(),
        diagnostics=diagnostics,
        meta=meta,
    )


def theta_sweep(result: ProtocolResult, thetas) -> MetricSeries:
    """Fidelity of the final measured state against ``ideal_n00m(n, m, theta)``."""
    if result.meta.get("protocol") != "n00m":
        raise ValidationError("theta_sweep needs an N00M result")
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise SamplingError("theta grid is empty")
    n, m = result.meta["n"], result.meta["m"]
    cut = tuple(result.meta["cutoffs"])
    rho = result.final_state
    vals = [fidelity(rho, ideal_n00m(n, m, th, cut)) for th in thetas]
    return MetricSeries(thetas, vals, "fidelity")


# -- effective vs exact on the 4-level subspace ---------------------------------


def four_level_agreement(
    params: hm.ModelParams,
    context: str,
    times,
    p: int = 0,
    q: int = 0,
    n: int = 1,
    m: int = 1,
    initial="phi3",
) -> np.ndarray:
    """Fidelity between ``exp(-i t H_eff)`` and the exact linear-drive model.

    For ``cross-kerr`` the exact model is the Delta = 0 effective spin-boson
    Hamiltonian with the spin coupling; for ``nlbs`` it is the nonlinear
    Jaynes-Cummings pair plus ``lam sz1 sz2``. The exact state is moved to the
    spin interaction frame before comparison. ``initial`` names a basis
    state (``phi1`` .. ``phi4``, ``bell14``) or gives four coefficients.
    """
    space = params.space()
    if context == "cross-kerr":
        h = hm.h_effective_sb(params)
        g1, g2 = hm.tilde_couplings(params, "cross-kerr", p, q)
        basis = hm.four_level_basis(space, p, q)
    elif context == "nlbs":
        h1 = hm.jc_nonlinear(params.sub1, n)
        h2 = hm.jc_nonlinear(params.sub2, m)
        d1, d2 = h1.shape[0], h2.shape[0]
        h = np.kron(h1, np.eye(d2)) + np.kron(np.eye(d1), h2) + hm.spin_coupling(params)
        g1, g2 = hm.tilde_couplings(params, "nlbs", p, q, n, m)
        basis = hm.four_level_basis(space, p, q, n, m)
    else:
        raise ValidationError(f"unknown context {context!r}")
    h4 = hm.h_eff_4level(g1, g2, params.lam)
    if isinstance(initial, str):
        starts = {f"phi{k + 1}": np.eye(4)[k] for k in range(4)}
        starts["bell14"] = np.array([1.0, 0.0, 0.0, 1.0]) * _SQ2
        if initial not in starts:
            raise ValidationError(f"unknown initial state {initial!r}")
        c0 = starts[initial].astype(complex)
    else:
        c0 = np.asarray(initial, dtype=complex).reshape(4)
        c0 = c0 / np.linalg.norm(c0)
    psi0 = StateVector(space, basis @ c0)
    exact = StaticPropagator(h)
    w, v = np.linalg.eigh(h4)
    out = []
    for t in np.asarray(times, dtype=float):
        ex = to_interaction_frame(exact.apply(psi0, t), t, params, ("spin",))
        eff = basis @ (v @ (np.exp(-1j * w * t) * (v.T @ c0)))
        out.append(abs(np.vdot(eff, np.asarray(ex.amplitudes))) ** 2)
    return np.array(out)

import math

import numpy as np
import pytest
from scipy.linalg import sqrtm

from spinbridge import hamiltonians as hm
from spinbridge import metrics as mt
from spinbridge.errors import SamplingError, ValidationError
from spinbridge.hilbert import CompositeSpace, DensityMatrix, StateVector
from spinbridge.protocols import run_ck_ideal_state

from conftest import random_density, random_state

QQ = CompositeSpace((("a", 2), ("b", 2)))
BELL = StateVector(QQ, np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_log_negativity_examples(rng):
    prod = StateVector(QQ, np.kron(random_state(rng, 2), random_state(rng, 2)))
    assert mt.log_negativity(prod) == 0
    assert mt.log_negativity(prod.density()) == 0
    assert mt.log_negativity(BELL, base=2) == pytest.approx(1)
    assert mt.log_negativity(BELL.density(), base=2) == pytest.approx(1)
    assert mt.log_negativity(BELL) == pytest.approx(math.log(2))
    with pytest.raises(ValidationError):
        mt.log_negativity(BELL.density(), part=["a", "b"])
    with pytest.raises(ValidationError):
        mt.log_negativity(np.eye(4))
    with pytest.raises(ValidationError):
        mt.log_negativity(BELL, base=1)


def ecs_gram_oracle(alpha):
    """Log-negativity (base 2) of the pi cross-Kerr state of |a>|a>.

    The state is ``(|a>(|a>+|-a>) + |-a>(|a>-|-a>)) / 2``; orthonormalizing
    the 2x2 span per mode gives the Schmidt coefficients.
    """
    s = math.exp(-2 * abs(alpha) ** 2)
    gram = np.array([[1.0, s], [s, 1.0]])
    half = sqrtm(gram).real
    coeff = 0.5 * np.array([[1.0, 1.0], [1.0, -1.0]])
    m = half @ coeff @ half.T
    sv = np.linalg.svd(m, compute_uv=False)
    return math.log2(sv.sum() ** 2 / (sv**2).sum())


def test_ideal_ecs_log_negativity_matches_gram_oracle():
    alpha = 2.0
    coeffs = hm.CrossKerrCoefficients(0, 0, 0, 0, 1.0, 0, 0)
    psi = run_ck_ideal_state(alpha, alpha, coeffs, math.pi, cutoffs=(40, 40))
    value = mt.log_negativity(psi, base=2)
    oracle = ecs_gram_oracle(alpha)
    assert abs(value - oracle) < 1e-6
    assert 0 < 1 - value < 1e-3


def test_log_negativity_is_local_unitary_invariant(rng):
    space = CompositeSpace.two_mode(3, 4)
    rho = DensityMatrix(space, random_density(rng, 12, rank=2))
    base = mt.log_negativity(rho)
    ph = np.kron(np.exp(0.4j * np.arange(3)), np.exp(-1.1j * np.arange(4)))
    rotated = DensityMatrix(space, (ph[:, None] * rho.matrix) * ph.conj()[None, :])
    assert abs(mt.log_negativity(rotated) - base) < 1e-10


def test_fidelity_examples(rng):
    rho = DensityMatrix(QQ, random_density(rng, 4))
    assert mt.fidelity(rho, rho) == pytest.approx(1, abs=1e-10)
    a, b = StateVector(QQ, random_state(rng, 4)), StateVector(QQ, random_state(rng, 4))
    assert mt.fidelity(a, b) == pytest.approx(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    assert mt.fidelity(a.density(), b.density()) == pytest.approx(mt.fidelity(a, b), abs=1e-10)
    assert mt.fidelity(a, b.density()) == pytest.approx(mt.fidelity(a, b), abs=1e-12)
    one = CompositeSpace((("q", 2),))
    assert mt.fidelity(DensityMatrix(one, np.diag([1, 0])), DensityMatrix(one, np.diag([0, 1]))) == 0
    with pytest.raises(ValidationError):
        mt.fidelity(rho, DensityMatrix(one, np.eye(2) / 2))


def test_fidelity_symmetry_range_and_monotonicity(rng):
    space = CompositeSpace.two_mode(2, 3)
    for _ in range(10):
        a = DensityMatrix(space, random_density(rng, 6, rank=int(rng.integers(1, 7))))
        b = DensityMatrix(space, random_density(rng, 6, rank=int(rng.integers(1, 7))))
        fab = mt.fidelity(a, b)
        assert abs(fab - mt.fidelity(b, a)) < 1e-10
        assert -1e-12 <= fab <= 1 + 1e-10
        fred = mt.fidelity(a.ptrace(["mode1"]), b.ptrace(["mode1"]))
        assert fred >= fab - 1e-8
        assert mt.population_fidelity(a, b) >= fab - 1e-10


def test_population_fidelity_examples(rng):
    one = CompositeSpace((("q", 3),))
    a = DensityMatrix(one, np.diag([0.2, 0.3, 0.5]))
    coh = np.diag([0.2, 0.3, 0.5]).astype(complex)
    coh[0, 1] = coh[1, 0] = 0.1
    assert mt.population_fidelity(a, DensityMatrix(one, coh)) == pytest.approx(1)
    assert mt.population_fidelity(DensityMatrix(one, np.diag([1, 0, 0])), DensityMatrix(one, np.diag([0, 0.5, 0.5]))) == 0


def test_window_average_examples():
    g = np.linspace(0, 1, 201)
    assert mt.window_average(mt.MetricSeries(g, np.full_like(g, 1.7), "c"), 0.1, 0.9) == pytest.approx(1.7)
    assert mt.window_average(mt.MetricSeries(g, g, "ramp"), 0.1, 0.9) == pytest.approx(0.5)
    with pytest.raises(SamplingError):
        mt.window_average(mt.MetricSeries(g, g, "ramp"), 0.5, 0.5)
    coarse = np.array([0.0, 0.5, 1.0])
    with pytest.raises(SamplingError):
        mt.window_average(mt.MetricSeries(coarse, coarse, "x"), 0.1, 0.9)


def test_metric_series_validation():
    with pytest.raises(ValidationError):
        mt.MetricSeries(np.arange(3), np.arange(4), "x")
    with pytest.raises(ValidationError):
        mt.MetricSeries(np.arange(2), np.array([0.0, np.nan]), "x")
    assert len(mt.MetricSeries(np.arange(3), np.arange(3), "x")) == 3
    assert mt.normalize_base(2) == "2" and mt.normalize_base("e") == "e"

import math

import numpy as np
import pytest
from scipy import signal

from modbo.benchmarks import (
    CORRUPTED_EXTREMA,
    LARGE_CORRUPTION,
    SMALL_CORRUPTION,
    ZERO_CORRUPTION,
    RESULT_BENCHMARKS,
    Benchmark,
    benchmark_names,
    corrupt,
    corruption,
    estimate_extrema,
    eval_benchmark,
    get_benchmark,
    sawtooth,
    square_wave,
)
from modbo.errors import DomainError, ParameterError

PI = math.pi


class TestWaves:
    def test_square(self):
        assert square_wave(0.0) == 1.0
        assert square_wave(PI) == -1.0
        assert square_wave(2 * PI) == 1.0

    def test_sawtooth(self):
        assert sawtooth(0.0) == -1.0
        assert sawtooth(PI) == pytest.approx(0.0, abs=1e-15)
        assert sawtooth(3 * PI) == pytest.approx(0.0, abs=1e-15)

    def test_match_scipy_signal(self):
        t = np.random.default_rng(0).uniform(-50, 50, 10_000)
        np.testing.assert_allclose(square_wave(t), signal.square(t), atol=0)
        np.testing.assert_allclose(sawtooth(t), signal.sawtooth(t), atol=1e-12)


class TestCorruption:
    def test_gate_closed_gives_zero(self):
        x = np.linspace(0, 1, 100_001)
        closed = square_wave(8 * PI * x) == -1
        assert np.all(corruption(x[closed], SMALL_CORRUPTION) == 0.0)

    def test_amplitude_bound(self):
        x = np.linspace(0, 1, 1_000_001)
        c = corruption(x, SMALL_CORRUPTION)
        assert SMALL_CORRUPTION.amplitude_bound == pytest.approx(0.19)
        assert np.max(np.abs(c)) <= 0.19

    def test_grid_maximum(self):
        # the scan maximum; see the ledger for why this is not 0.18
        c = corruption(np.linspace(0, 1, 1_000_001), SMALL_CORRUPTION)
        assert c.max() == pytest.approx(0.1243, abs=5e-4)

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            corruption(1.01, SMALL_CORRUPTION)

    def test_zero_params_identity(self):
        base = get_benchmark("Branin01")
        wrapped = corrupt(base, params=ZERO_CORRUPTION)
        X = base.lower + (base.upper - base.lower) * np.random.default_rng(1).uniform(size=(1000, 2))
        np.testing.assert_allclose(wrapped.evaluate_batch(X), base.evaluate_batch(X), atol=1e-15)

    def test_zero_base_gives_corruption(self):
        zero = Benchmark("Zero", 1, [(0.0, 1.0)], lambda X: np.zeros(len(X)), 0.0, 1.0)
        wrapped = corrupt(zero, params=SMALL_CORRUPTION)
        x = np.linspace(0, 1, 501)[:, None]
        np.testing.assert_allclose(wrapped.evaluate_batch(x), corruption(x[:, 0], SMALL_CORRUPTION), atol=1e-15)

    def test_agrees_with_base_where_gate_closed_1d(self):
        base = Benchmark("Ramp", 1, [(-2.0, 3.0)], lambda X: X[:, 0] ** 2, 0.0, 9.0)
        wrapped = corrupt(base, params=LARGE_CORRUPTION)
        u = np.linspace(0, 1, 20_001)
        x = (-2.0 + 5.0 * u)[:, None]
        closed = square_wave(8 * PI * u) == -1
        np.testing.assert_array_equal(wrapped.evaluate_batch(x)[closed], base.evaluate_batch(x)[closed])


KNOWN_POINTS = [
    ("Branin01", [PI, 2.275], 0.397887),
    ("Branin02", [-3.2, 12.53], 5.559037),
    ("Beale", [3.0, 0.5], 0.0),
    ("Hartmann6", [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573], -3.32237),
    ("Griewank", [0.0, 0.0], 0.0),
    ("Levy13", [1.0, 1.0], 0.0),
    ("Ackley", [0.0, 0.0], 0.0),
    ("CrossInTray", [1.349406685353340, 1.349406608602084], -2.062612),
    ("HolderTable", [8.05502, 9.66459], -19.2085),
    ("Exponential", [0.0] * 8, -1.0),
    ("DropWave", [0.0] * 10, -1.0),
    ("DeflectedCorrugatedSpring", [5.0] * 10, -1.0),
]


@pytest.mark.parametrize("name,x,value", KNOWN_POINTS)
def test_closed_forms_at_known_minimizers(name, x, value):
    assert eval_benchmark(name, x) == pytest.approx(value, abs=1e-4)


def test_shubert_minimum_value():
    b = get_benchmark("Shubert01")
    assert b.known_min == pytest.approx(-186.7309, abs=1e-4)
    assert b.known_max == pytest.approx(210.45, abs=5e-3)
    assert eval_benchmark("Shubert01", [-7.0835, 4.8580]) == pytest.approx(-186.7309, abs=1e-3)


def test_table_metadata():
    assert get_benchmark("Hartmann6").known_min == pytest.approx(-3.32, abs=5e-3)
    h = get_benchmark("HolderTable")
    assert h.known_min == pytest.approx(-19.21, abs=5e-3) and h.known_max == 0.0
    a = get_benchmark("Ackley")
    assert a.domain == ((-10.0, 30.0), (-10.0, 30.0))
    assert a.known_max == pytest.approx(22.27, abs=5e-3) and a.known_min == 0.0
    assert get_benchmark("Branin01").domain == ((-5.0, 10.0), (0.0, 15.0))


def test_catalog_is_complete_and_stable():
    names = benchmark_names()
    for n in ["Branin01", "Branin02", "Beale", "Hartmann6", "Griewank", "Shubert01", "Levy13", "Ackley",
              "CrossInTray", "HolderTable", "Exponential", "Weierstrass", "DeflectedCorrugatedSpring",
              "CosineMixture", "DropWave", "CorruptedHolderTable", "CorruptedExponential"]:
        assert n in names
    assert names == benchmark_names()
    for n in RESULT_BENCHMARKS:
        get_benchmark(n)


def test_scalable_dimension_syntax():
    b = get_benchmark("Ackley:6")
    assert b.dim == 6 and b.name == "Ackley:6"
    assert get_benchmark("Ackley:1").dim == 1
    with pytest.raises(ParameterError):
        get_benchmark("Branin01:3")
    with pytest.raises(KeyError):
        get_benchmark("Nope")


def test_domain_checks():
    b = get_benchmark("Branin01")
    with pytest.raises(DomainError):
        b([-6.0, 0.0])
    with pytest.raises(DomainError):
        b([0.0])
    b([-5.0 - 1e-12, 15.0 + 1e-12])


def test_evaluators_are_pure():
    rng = np.random.default_rng(2)
    for n in benchmark_names():
        b = get_benchmark(n)
        X = b.lower + (b.upper - b.lower) * rng.uniform(size=(50, b.dim))
        assert b.evaluate_batch(X).tobytes() == b.evaluate_batch(X).tobytes()
        assert b(X[0]) == b.evaluate_batch(X[:1])[0]


def test_estimate_extrema_constant():
    b = Benchmark("Const", 3, [(0, 1)] * 3, lambda X: np.full(len(X), 2.5), 2.5, 2.5)
    assert estimate_extrema(b, 1000, 0) == (2.5, 2.5)


def test_estimates_stay_inside_known_range():
    for n in benchmark_names():
        b = get_benchmark(n)
        lo, hi = estimate_extrema(b, 100_000, seed=1)
        slack = 0.02 * (b.known_max - b.known_min)
        assert lo >= b.known_min - slack, n
        assert hi <= b.known_max + slack, n


def test_branin_estimate():
    lo, _ = estimate_extrema(get_benchmark("Branin01"), 1_000_000, seed=0)
    assert abs(lo - 0.40) < 0.05


def test_corrupted_extrema_reproduce():
    for name, (lo, hi) in CORRUPTED_EXTREMA.items():
        b = get_benchmark(name)
        assert (b.known_min, b.known_max) == (lo, hi)
        assert estimate_extrema(b, 1_000_000, seed=0) == (lo, hi)

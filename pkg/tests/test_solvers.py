import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qubo_unwrap.errors import InvalidArgumentError, ProblemTooLargeError
from qubo_unwrap.phase import WeightPolicy, build_problem, energy_l2
from qubo_unwrap.qubo import QuboProblem, build_qubo, decode_bits, qubo_energies, qubo_energy
from qubo_unwrap.solvers import (
    SOLVERS,
    SolverConfig,
    coupling_scale,
    default_ladder,
    derive_seed,
    get_solver,
    icm_move,
    icm_temperatures,
    register_solver,
    solve_exhaustive,
    solve_pt,
    solve_pticm,
    solve_sa,
    swap_probability,
)

from conftest import random_wrapped

# four-cycle with ferromagnetic-looking penalties and one diagonal reward
FRUSTRATED4 = QuboProblem.from_terms(
    4, {0: -1, 1: -1, 2: -1, 3: -1}, {(0, 1): 2, (1, 2): 2, (2, 3): 2, (0, 3): 2, (0, 2): -0.5}
)


def brute_force_min(q):
    xs = np.array(list(itertools.product([0, 1], repeat=q.num_vars)))
    return float(qubo_energies(q, xs).min())


def random_qubo(rng, n, lo=-2.0, hi=2.0):
    lin = {i: rng.uniform(lo, hi) for i in range(n)}
    quad = {(i, j): rng.uniform(lo, hi) for i in range(n) for j in range(i + 1, n)}
    return QuboProblem.from_terms(n, lin, quad)


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            SolverConfig(num_sweeps=0)
        with pytest.raises(InvalidArgumentError):
            SolverConfig(temperature_ladder=(1.0, 1.0))
        with pytest.raises(InvalidArgumentError):
            SolverConfig(temperature_ladder=(0.0, 1.0))
        with pytest.raises(InvalidArgumentError):
            SolverConfig(temperature_ladder=())
        assert SolverConfig(temperature_ladder=[1, 2]).temperature_ladder == (1.0, 2.0)

    def test_with_seed(self):
        c = SolverConfig(seed=1, num_sweeps=7)
        assert c.with_seed(9) == SolverConfig(seed=9, num_sweeps=7)


def test_derive_seed_frozen():
    # PCG64 / SeedSequence are stable across numpy releases; these pin the streams
    assert derive_seed(0, 0, 0) == 15793235383387715774
    assert derive_seed(7, 1, 0) == 6635463128224577688
    assert derive_seed(0, 0, 1) == 8649202198168436674


def test_default_ladder_scales_with_coefficients():
    q1 = FRUSTRATED4
    q2 = QuboProblem.from_terms(4, {i: 10 * v for i, v in q1.linear.items()},
                                {k: 10 * v for k, v in q1.quadratic.items()})
    assert coupling_scale(q2) == pytest.approx(10 * coupling_scale(q1))
    assert np.allclose(default_ladder(q1), 10 * default_ladder(q2))
    lad = default_ladder(q1)
    assert lad.size == 16 and np.all(np.diff(lad) > 0)


class TestExhaustive:
    def test_single_variable(self):
        r = solve_exhaustive(QuboProblem.from_terms(1, {0: -1.0}, offset=0.5))
        assert r.best_bits.tolist() == [1]
        assert r.best_energy == -0.5

    def test_all_zero_tie_break(self):
        r = solve_exhaustive(QuboProblem.from_terms(5, offset=2.0))
        assert r.best_bits.tolist() == [0] * 5
        assert r.best_energy == 2.0

    def test_tie_break_lowest_integer(self):
        # x0 and x1 both optimal alone; the lower integer value (x0 -> 1) wins
        q = QuboProblem.from_terms(2, {0: -1.0, 1: -1.0}, {(0, 1): 1.0})
        assert solve_exhaustive(q).best_bits.tolist() == [1, 0]

    def test_cap(self):
        with pytest.raises(ProblemTooLargeError):
            solve_exhaustive(QuboProblem.from_terms(25))

    def test_matches_label_brute_force(self, rng):
        p = build_problem(random_wrapped(rng, 2, 2), WeightPolicy(1.0, 0.25), domain_size=4)
        q, lay = build_qubo(p)
        best = min(
            energy_l2(p, np.array(ks).reshape(2, 2)).total
            for ks in itertools.product(range(4), repeat=4)
        )
        r = solve_exhaustive(q)
        assert r.best_energy == best
        assert energy_l2(p, decode_bits(r.best_bits, lay).reshape(2, 2)).total == best

    @given(st.integers(0, 2**32 - 1), st.integers(1, 10))
    def test_random_against_brute_force(self, seed, n):
        q = random_qubo(np.random.default_rng(seed), n)
        assert solve_exhaustive(q).best_energy == pytest.approx(brute_force_min(q), abs=1e-12)


class TestSA:
    def test_two_variable_example(self):
        q = QuboProblem.from_terms(2, {0: -1.0, 1: -1.0}, {(0, 1): 0.5})
        r = solve_sa(q, SolverConfig(seed=1, num_sweeps=50))
        assert r.best_energy == -1.5
        assert r.best_bits.tolist() == [1, 1]

    def test_zero_qubo(self):
        r = solve_sa(QuboProblem.from_terms(3, offset=1.25), SolverConfig(num_sweeps=1))
        assert r.best_energy == 1.25

    def test_frozen_run(self):
        r = solve_sa(FRUSTRATED4, SolverConfig(seed=3, num_sweeps=50))
        assert r.best_bits.tolist() == [1, 0, 1, 0]
        assert r.best_energy == -2.5
        assert r.energy_trace[:5].tolist() == [0.0, 0.0, 0.0, 0.0, -2.5]

    def test_restarts_extend_trace(self):
        r = solve_sa(FRUSTRATED4, SolverConfig(num_sweeps=10, num_restarts=3))
        assert r.energy_trace.size == 30


@pytest.mark.parametrize("solver", [solve_sa, solve_pt, solve_pticm])
class TestContract:
    def test_deterministic(self, solver, rng):
        q = random_qubo(rng, 12)
        cfg = SolverConfig(seed=42, num_sweeps=30, replicas_per_temperature=2,
                           icm_enabled=solver is solve_pticm)
        a, b = solver(q, cfg), solver(q, cfg)
        assert np.array_equal(a.best_bits, b.best_bits)
        assert np.array_equal(a.energy_trace, b.energy_trace)
        assert a.seed_used == 42

    def test_trace_monotone_and_consistent(self, solver, rng):
        q = random_qubo(rng, 15)
        r = solver(q, SolverConfig(seed=5, num_sweeps=40, replicas_per_temperature=2,
                                   icm_enabled=solver is solve_pticm))
        assert np.all(np.diff(r.energy_trace) <= 0)
        assert r.best_energy == qubo_energy(q, r.best_bits)
        assert r.energy_trace[-1] == pytest.approx(r.best_energy, abs=1e-9)

    def test_empty_problem(self, solver):
        r = solver(QuboProblem.from_terms(0, offset=3.0), SolverConfig(replicas_per_temperature=2))
        assert r.best_energy == 3.0
        assert r.best_bits.size == 0


class TestPT:
    def test_two_temperatures_frustrated(self):
        r = solve_pt(FRUSTRATED4, SolverConfig(seed=0, num_sweeps=50, temperature_ladder=(0.5, 5.0)))
        assert r.best_energy == solve_exhaustive(FRUSTRATED4).best_energy

    def test_ladder_too_short(self):
        with pytest.raises(InvalidArgumentError):
            solve_pt(FRUSTRATED4, SolverConfig(temperature_ladder=(1.0,)))

    def test_swap_probability(self):
        assert swap_probability(0.5, 1.0, 3.0, 3.0) == 1.0
        # colder chain holding the higher energy always swaps down
        assert swap_probability(1.0, 0.5, 3.0, 1.0) == 1.0
        assert swap_probability(0.5, 1.0, 3.0, 1.0) == pytest.approx(np.exp(-1.0))

    def test_frozen_run(self):
        r = solve_pt(FRUSTRATED4, SolverConfig(seed=3, num_sweeps=50))
        assert r.best_bits.tolist() == [1, 0, 1, 0]
        assert r.energy_trace[:3].tolist() == [-2.5, -2.5, -2.5]


class TestPTICM:
    def test_needs_two_replicas(self):
        with pytest.raises(InvalidArgumentError):
            solve_pticm(FRUSTRATED4, SolverConfig(icm_enabled=True, replicas_per_temperature=1))

    def test_disabled_equals_pt(self, rng):
        q = random_qubo(rng, 10)
        for reps in (1, 2):
            cfg = SolverConfig(seed=11, num_sweeps=25, replicas_per_temperature=reps)
            a, b = solve_pt(q, cfg), solve_pticm(q, cfg)
            assert np.array_equal(a.best_bits, b.best_bits)
            assert np.array_equal(a.energy_trace, b.energy_trace)

    def test_frustrated_six(self):
        q = random_qubo(np.random.default_rng(2024), 6)
        r = solve_pticm(q)
        assert r.best_energy == pytest.approx(solve_exhaustive(q).best_energy, abs=1e-12)

    def test_cluster_temperatures(self):
        assert icm_temperatures(4).tolist() == [False, False, True, True]
        assert icm_temperatures(5).tolist() == [False, False, True, True, True]

    @given(st.integers(0, 2**32 - 1))
    def test_icm_conserves_pair_energy(self, seed):
        rng = np.random.default_rng(seed)
        q = random_qubo(rng, 8)
        xa, xb = rng.integers(0, 2, 8), rng.integers(0, 2, 8)
        start = int(rng.integers(0, 8))
        ya, yb = icm_move(q, xa, xb, start)
        before = qubo_energy(q, xa) + qubo_energy(q, xb)
        after = qubo_energy(q, ya) + qubo_energy(q, yb)
        assert after == pytest.approx(before, abs=1e-9)
        # bits where the replicas agreed are untouched; the pair is only permuted
        assert np.array_equal(np.sort(np.stack([ya, yb]), 0), np.sort(np.stack([xa, xb]), 0))

    def test_icm_moves_a_connected_cluster(self):
        # chain 0-1-2-3; replicas disagree on 0, 1 and 3; start at 0 takes {0, 1} only
        q = QuboProblem.from_terms(4, {}, {(0, 1): 1.0, (1, 2): 1.0, (2, 3): 1.0})
        ya, yb = icm_move(q, [1, 1, 0, 1], [0, 0, 0, 0], 0)
        assert ya.tolist() == [0, 0, 0, 1]
        assert yb.tolist() == [1, 1, 0, 0]

    def test_icm_no_op_on_agreeing_start(self):
        q = QuboProblem.from_terms(2, {}, {(0, 1): 1.0})
        ya, yb = icm_move(q, [1, 0], [1, 1], 0)
        assert ya.tolist() == [1, 0] and yb.tolist() == [1, 1]


def test_registry():
    assert get_solver("pt") is solve_pt
    with pytest.raises(InvalidArgumentError):
        get_solver("nope")
    register_solver("oracle", lambda q, c: solve_exhaustive(q, c))
    try:
        assert get_solver("oracle")(FRUSTRATED4, SolverConfig()).best_energy == -2.5
    finally:
        SOLVERS.pop("oracle")


def test_calibration_small_random(rng):
    """Recovery rate on a quick sample; the full 100-instance count lives in the acceptance suite."""
    hits = 0
    for _ in range(20):
        q = random_qubo(rng, 6)
        hits += solve_pt(q, SolverConfig(seed=int(rng.integers(1 << 31)), num_sweeps=200)).best_energy \
            <= solve_exhaustive(q).best_energy + 1e-9
    assert hits >= 19

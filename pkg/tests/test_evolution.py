#!/usr/bin/env python3
"""
Tests for the time evolution and the Cauchy problem, against closed forms and
against direct integration.
"""

import math
import numpy
import pytest


# A fast soliton near k = 5 moving left and a slow one near k = -5 moving
# right; they meet around t = 5
_PAIR = [(2.0, 3072.0), (-1.6, 0.0142)]


def _circle_data(count=32):
    from todaist          import build_grid
    from todaist.spectral import ReducedSpectralData

    grid = build_grid(count)
    data = ReducedSpectralData(circle_angles  = grid.circle_nodes,
                               circle_density = 0.05 * numpy.cos(grid.circle_nodes))
    return (data, grid)


def test_evolve_data():
    from todaist.evolution import evolve_data
    from todaist.spectral  import reflectionless_data

    data = reflectionless_data([(2.0, 1.0), (0.5 + 0.1, 2.0)])
    assert evolve_data(data, 0.0).data is data

    evolved = evolve_data(data, 1.0)
    assert evolved.data.masses[0].weight == pytest.approx(math.exp(1.5))
    assert evolved.data.masses[1].weight == pytest.approx(2.0 * math.exp(0.6 - 1 / 0.6))
    assert list(evolved.mass_multipliers) == pytest.approx([math.exp(1.5), math.exp(0.6 - 1 / 0.6)])

    # The normaliser stays with the base data
    assert evolved.data.khat == data.khat

    (circle, _) = _circle_data()
    moved = evolve_data(circle, 0.7).data
    assert numpy.allclose(numpy.abs(moved.circle_density), numpy.abs(circle.circle_density))
    assert not numpy.allclose(moved.circle_density, circle.circle_density)


def test_evolve_line_coupling():
    from todaist.evolution import evolve_data
    from todaist.spectral  import ReducedSpectralData

    data = ReducedSpectralData(line_nodes    = [0.5, 2.0],
                               line_weights  = [0.1, 0.2],
                               line_coupling = [0.05, 0.05])
    evolved = evolve_data(data, 1.0).data
    assert list(evolved.line_weights)  == pytest.approx([0.1 * math.exp(-1.5), 0.2 * math.exp(1.5)])
    assert list(evolved.line_coupling) == pytest.approx([0.05 * math.exp(1.5), 0.05 * math.exp(-1.5)])


def test_free_solution():
    from todaist           import build_grid
    from todaist.evolution import x_solution
    from todaist.spectral  import ReducedSpectralData, free_data

    for (k, t) in ((0, 0.0), (-3, 1.5), (7, 4.0)):
        assert x_solution(free_data(), None, k, t) == 0.0

    # Still zero with a circle channel which carries nothing
    grid = build_grid(16)
    zero = ReducedSpectralData(circle_angles=grid.circle_nodes, circle_density=numpy.zeros(16))
    assert abs(x_solution(zero, grid, 2, 0.5)) < 1e-14


def test_one_soliton_closed_form(one_soliton):
    from todaist.evolution import GammaPath, x_solution
    from todaist.spectral  import reflectionless_data

    (masses, x, xdot) = one_soliton
    data = reflectionless_data(masses)
    path = GammaPath(data)
    for k in range(-6, 7):
        for t in (0.0, 0.5, 2.0):
            assert x_solution(data, None, k, t) == pytest.approx(x(k, t), abs=1e-12)
            assert path.velocity(k, t)          == pytest.approx(xdot(k, t), abs=1e-10)


def test_gamma_observables(one_soliton):
    from todaist.evolution import GammaPath
    from todaist.spectral  import reflectionless_data

    (masses, x, xdot) = one_soliton
    (xs, a, b2) = GammaPath(reflectionless_data(masses)).observables(-3, 3, 0.8)
    assert list(xs) == pytest.approx([x(k, 0.8)    for k in range(-3, 4)], abs=1e-12)
    assert list(a)  == pytest.approx([xdot(k, 0.8) for k in range(-3, 4)], abs=1e-10)
    assert list(b2) == pytest.approx([math.exp(x(k, 0.8) - x(k - 1, 0.8))
                                      for k in range(-3, 4)], rel=1e-12)


def test_b2_matches_positions(one_soliton):
    """
    At t = 0 the moment reconstruction of ``b^2`` agrees with the position
    differences.
    """
    from todaist.evolution import EvolvedPath
    from todaist.spectral  import reflectionless_data

    (masses, x, _) = one_soliton
    (a, b2) = EvolvedPath(reflectionless_data(masses)).observables(-4, 4, 0.0)
    for (i, k) in enumerate(range(-4, 5)):
        assert b2[i] == pytest.approx(math.exp(x(k, 0.0) - x(k - 1, 0.0)), rel=1e-12)


@pytest.mark.parametrize('t', [0.0, 0.5, 2.0])
def test_path_equivalence(t):
    """
    The ``Gamma^`` route and the evolved-data route give the same lattice.
    """
    from todaist.evolution import EvolvedPath, GammaPath
    from todaist.spectral  import reflectionless_data

    for (data, grid) in ((reflectionless_data(_PAIR), None),
                         (reflectionless_data([(-2.5, 0.3), (0.6, 0.2), (3.0, 1.0)]), None),
                         _circle_data()):
        (_, a_g, b2_g) = GammaPath(data, grid).observables(-4, 4, t)
        (a_e, b2_e)    = EvolvedPath(data, grid).observables(-4, 4, t)
        assert numpy.max(numpy.abs(a_g - a_e)) < 1e-8
        assert numpy.max(numpy.abs(b2_g - b2_e) / b2_e) < 1e-8


def test_calibration():
    from todaist.evolution import CauchyProblem, calibrate_c1
    from todaist.spectral  import FreeSource, free_data, reflectionless_data

    problem = CauchyProblem(FreeSource(), [0.0], -2, 2, anchor=5.0)
    assert calibrate_c1(problem, free_data(), None) == -5.0

    data    = reflectionless_data([(2.0, 1.0)])
    problem = CauchyProblem(FreeSource(), [0.0], -2, 2, anchor=1.25)
    c1      = calibrate_c1(problem, data, None)
    assert c1 == pytest.approx(math.log(13.0 / 16.0) - 1.25)
    assert calibrate_c1(problem, data, None) == c1


def test_anchor_value():
    from todaist           import ValidationError
    from todaist.evolution import CauchyProblem
    from todaist.lattice   import LatticeState
    from todaist.spectral  import FreeSource

    state = LatticeState(-2, 2, [0.0, 0.1, 0.2, 0.3, 0.4], numpy.zeros(5))
    assert CauchyProblem(FreeSource(), [0.0], -2, 2).anchor_value == 0.0
    assert CauchyProblem(FreeSource(), [0.0], -2, 2, initial=state).anchor_value == 0.2
    assert CauchyProblem(FreeSource(), [0.0], -2, 2, anchor=3.0, initial=state).anchor_value == 3.0

    elsewhere = LatticeState(1, 3, numpy.zeros(3), numpy.zeros(3))
    with pytest.raises(ValidationError):
        CauchyProblem(FreeSource(), [0.0], -2, 2, initial=elsewhere).anchor_value

    for (times, k_min, k_max, tolerance) in (([0.0, 0.0], -2, 2, 1e-8),
                                             ([],         -2, 2, 1e-8),
                                             ([0.0],       2, -2, 1e-8),
                                             ([0.0],      -2, 2, 0.0)):
        with pytest.raises(ValidationError):
            CauchyProblem(FreeSource(), times, k_min, k_max, tolerance=tolerance)


def test_thread_count(monkeypatch):
    from todaist           import ValidationError
    from todaist.evolution import thread_count

    monkeypatch.setenv('TODA_THREADS', '3')
    assert thread_count() == 3
    assert thread_count(2) == 2

    monkeypatch.setenv('TODA_THREADS', 'many')
    with pytest.raises(ValidationError):
        thread_count()

    monkeypatch.delenv('TODA_THREADS')
    assert thread_count() >= 1
    with pytest.raises(ValidationError):
        thread_count(0)


def test_solve_free(single_thread):
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import Provenance
    from todaist.spectral  import FreeSource

    trajectory = solve_cauchy(CauchyProblem(FreeSource(), [0.0, 1.0, 2.0], -3, 3, anchor=0.75))
    assert trajectory.provenance is Provenance.INVERSE_SPECTRAL
    assert numpy.all(trajectory.x == 0.75)
    assert numpy.all(trajectory.xdot == 0.0)


def test_solve_one_soliton(one_soliton):
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.spectral  import ReflectionlessSource

    (masses, x, xdot) = one_soliton
    anchor  = 1.25
    times   = [0.0, 0.5, 1.0]
    problem = CauchyProblem(ReflectionlessSource(masses), times, 2, 6, anchor=anchor, threads=2)
    trajectory = solve_cauchy(problem)

    # The window does not have to include the anchor site
    assert (trajectory.k_min, trajectory.k_max) == (2, 6)
    c1 = x(0, 0.0) - anchor
    for (i, t) in enumerate(times):
        for k in range(2, 7):
            assert trajectory.x[i, k - 2]    == pytest.approx(x(k, t) - c1, abs=1e-10)
            assert trajectory.xdot[i, k - 2] == pytest.approx(xdot(k, t),   abs=1e-10)


def test_solve_checks_initial(single_thread):
    from todaist           import ValidationError
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import LatticeState
    from todaist.spectral  import FreeSource

    flat = LatticeState(-3, 3, numpy.full(7, 0.5), numpy.zeros(7))
    solve_cauchy(CauchyProblem(FreeSource(), [0.0, 1.0], -3, 3, initial=flat))

    kicked = LatticeState(-3, 3, numpy.full(7, 0.5), [0, 0, 0, 0.1, 0, 0, 0])
    with pytest.raises(ValidationError):
        solve_cauchy(CauchyProblem(FreeSource(), [0.0, 1.0], -3, 3, initial=kicked))


def test_inconsistent_paths(monkeypatch, single_thread):
    from todaist           import InconsistentPathsError
    from todaist.evolution import CauchyProblem, EvolvedPath, solve_cauchy
    from todaist.spectral  import ReflectionlessSource

    original = EvolvedPath.observables
    def skewed(self, k_min, k_max, t):
        (a, b2) = original(self, k_min, k_max, t)
        return (a + 1e-3, b2)
    monkeypatch.setattr(EvolvedPath, 'observables', skewed)

    with pytest.raises(InconsistentPathsError):
        solve_cauchy(CauchyProblem(ReflectionlessSource([(2.0, 1.0)]), [0.0], -2, 2))


def test_overflow(single_thread):
    from todaist           import OverflowGuardError
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.spectral  import ReflectionlessSource

    with pytest.raises(OverflowGuardError):
        solve_cauchy(CauchyProblem(ReflectionlessSource([(1e6, 1.0)]), [0.0, 0.1], -2, 2))


def test_two_solitons_against_integration():
    """
    A two-soliton collision, solved spectrally and integrated directly from
    the same initial data.
    """
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import Boundary, integrate, sample_times
    from todaist.spectral  import ReflectionlessSource

    (k_min, k_max, t_end, dt) = (-20, 20, 8.0, 5e-4)
    margin = 26
    times  = sample_times(t_end, dt, 2000)
    source = ReflectionlessSource(_PAIR)

    start  = solve_cauchy(CauchyProblem(source, [0.0], k_min - margin, k_max + margin))
    direct = integrate(start.state(0, Boundary.frozen(0.0)), t_end, dt, 2000)
    direct = direct.restrict(k_min, k_max)
    ist    = solve_cauchy(CauchyProblem(source, times, k_min, k_max))

    assert numpy.array_equal(direct.times, ist.times)
    assert numpy.max(numpy.abs(direct.x - ist.x)) < 1e-5

    # The solitons really do pass through each other
    peak = lambda row: int(numpy.argmax(numpy.abs(row)))
    assert peak(ist.xdot[0]) != peak(ist.xdot[-1])


@pytest.mark.parametrize('masses', [[(2.0, 1.0)], _PAIR])
def test_oracle_acceptance(masses):
    """
    Verlet at dt = 1e-3 on [-60, 60], launched from the spectral t = 0 slice,
    stays within 1e-5 of the spectral solution on [-20, 20] up to t = 5.
    """
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import Boundary, integrate, sample_times
    from todaist.spectral  import ReflectionlessSource

    (t_end, dt, stride) = (5.0, 1e-3, 1000)
    source = ReflectionlessSource(masses)

    start  = solve_cauchy(CauchyProblem(source, [0.0], -60, 60))
    direct = integrate(start.state(0, Boundary.frozen(0.0)), t_end, dt, stride)
    direct = direct.restrict(-20, 20)
    ist    = solve_cauchy(CauchyProblem(source, sample_times(t_end, dt, stride), -20, 20))

    assert numpy.array_equal(direct.times, ist.times)
    assert numpy.max(numpy.abs(direct.x - ist.x)) <= 1e-5


def _centre(trajectory, sign):
    """
    The centre of the part of ``xdot`` with the given sign, per sample time.
    """
    weights = numpy.maximum(sign * trajectory.xdot, 0.0)
    return (weights @ trajectory.sites) / numpy.sum(weights, axis=1)


def test_soliton_speeds_survive_collision():
    """
    Each soliton of the pair moves at the same speed long before and long
    after they collide, measured on the directly integrated lattice.

    The fast soliton carries positive velocities and the slow one negative,
    so each is tracked by the centre of its own sign.
    """
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import Boundary, integrate
    from todaist.spectral  import ReflectionlessSource

    # Start well before the collision at t = 5 and run well past it
    start  = solve_cauchy(CauchyProblem(ReflectionlessSource(_PAIR), [-12.0], -45, 45))
    direct = integrate(start.state(0, Boundary.frozen(0.0)), 36.0, 1e-3, 100)
    early  = direct.times <= 4.0
    late   = direct.times >= 32.0

    for (sign, alpha) in ((1.0, 2.0), (-1.0, -1.6)):
        centre = _centre(direct, sign)
        before = numpy.polyfit(direct.times[early], centre[early], 1)[0]
        after  = numpy.polyfit(direct.times[late],  centre[late],  1)[0]
        assert abs(after - before) <= 1e-4

        # Solitons travel at -(alpha - 1/alpha) / (2 ln|alpha|) sites per unit time
        speed = -(alpha - 1.0 / alpha) / (2.0 * math.log(abs(alpha)))
        assert before == pytest.approx(speed, abs=1e-3)


def test_isospectral():
    """
    The eigenvalues of the bound states do not move.
    """
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.lattice   import Boundary, flaschka, jacobi_eigenvalues
    from todaist.spectral  import ReflectionlessSource

    trajectory = solve_cauchy(CauchyProblem(ReflectionlessSource(_PAIR), [0.0, 10.0], -40, 40))
    for i in range(2):
        eigenvalues = jacobi_eigenvalues(flaschka(trajectory.state(i, Boundary.free_ends())))
        assert eigenvalues[-1] == pytest.approx(2.0 + 0.5, abs=1e-6)
        assert eigenvalues[0]  == pytest.approx(-1.6 - 1 / 1.6, abs=1e-6)


if __name__ == "__main__":
    test_one_soliton_closed_form()
    test_two_solitons_against_integration()

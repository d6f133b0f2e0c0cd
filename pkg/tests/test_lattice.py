#!/usr/bin/env python3
"""
Tests for the lattice: integration, the Flaschka map, rescaling and the
trajectory files.
"""

import math
import numpy
import pytest


def _bump(k_min, k_max, slope=0.0, drift=0.0, height=0.3, kick=0.2):
    from todaist.lattice import Boundary, LatticeState

    sites = numpy.arange(k_min, k_max + 1)
    shape = numpy.exp(-sites ** 2 / 4.0)
    return LatticeState(k_min,
                        k_max,
                        slope * sites + height * shape,
                        drift + kick * shape,
                        Boundary.frozen(slope))


def test_rhs():
    from todaist         import ValidationError
    from todaist.lattice import Boundary, LatticeState, toda_rhs

    flat = LatticeState(-3, 3, numpy.full(7, 1.5), numpy.zeros(7))
    assert numpy.all(toda_rhs(flat) == 0.0)

    # A linear profile on its own background is at rest as well
    sloped = LatticeState(-3, 3, 0.4 * numpy.arange(-3, 4), numpy.zeros(7),
                          Boundary.frozen(0.4))
    assert numpy.max(numpy.abs(toda_rhs(sloped))) < 1e-14

    # Free ends pull the ends inwards
    loose = LatticeState(-1, 1, numpy.zeros(3), numpy.zeros(3), Boundary.free_ends())
    assert list(toda_rhs(loose)) == [1.0, 0.0, -1.0]

    with pytest.raises(ValidationError):
        toda_rhs(LatticeState(0, 1, numpy.zeros(2), numpy.zeros(2)))
    with pytest.raises(ValidationError):
        LatticeState(0, 0, [0.0], [0.0])
    with pytest.raises(ValidationError):
        LatticeState(0, 3, numpy.zeros(4), numpy.zeros(3))


def test_one_soliton(one_soliton):
    """
    Direct integration against the closed form of a single soliton.
    """
    from todaist.lattice import Boundary, LatticeState, integrate

    (masses, x, xdot) = one_soliton
    (alpha, _) = masses[0]
    sites = range(-40, 41)
    state = LatticeState(-40, 40,
                         [x(k, 0.0)    for k in sites],
                         [xdot(k, 0.0) for k in sites],
                         Boundary.frozen(0.0))
    trajectory = integrate(state, 2.0, 5e-4, stride=1000)
    assert list(trajectory.times) == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])

    for (i, t) in enumerate(trajectory.times):
        for k in range(-10, 11):
            assert abs(trajectory.x[i, k + 40] - x(k, t)) < 1e-5, (t, k)
            assert abs(trajectory.xdot[i, k + 40] - xdot(k, t)) < 1e-5, (t, k)


def test_energy():
    from todaist.lattice import Boundary, LatticeState, energy, integrate

    for state in (_bump(-30, 30),
                  _bump(-30, 30, slope=0.5),
                  LatticeState(-5, 5, numpy.linspace(0, 1, 11), numpy.zeros(11),
                               Boundary.free_ends())):
        trajectory = integrate(state, 3.0, 1e-3, stride=500)
        final = trajectory.state(-1, state.boundary)
        assert abs(energy(final) - energy(state)) < 1e-5


def test_free_stays_put():
    from todaist.lattice import LatticeState, integrate

    state = LatticeState(-5, 5, numpy.full(11, 0.5), numpy.zeros(11))
    trajectory = integrate(state, 1.0, 1e-2, stride=10)
    assert numpy.all(trajectory.x == 0.5)
    assert numpy.all(trajectory.xdot == 0.0)


def test_sample_times():
    from todaist         import ValidationError
    from todaist.lattice import integrate, sample_times

    state = _bump(-5, 5)
    for (t_end, dt, stride) in ((1.0, 1e-2, 10), (1.0, 0.3, 1), (0.95, 0.1, 4), (0.0, 0.1, 1)):
        times = sample_times(t_end, dt, stride)
        assert list(integrate(state, t_end, dt, stride).times) == list(times)
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(t_end)

    # The step shrinks so that a whole number of them lands on the end
    assert list(sample_times(1.0, 0.3, 1)) == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])

    for (t_end, dt, stride) in ((1.0, 0.0, 1), (-1.0, 0.1, 1), (1.0, 0.1, 0), (1.0, 0.1, 1.5)):
        with pytest.raises(ValidationError):
            sample_times(t_end, dt, stride)


def test_flaschka():
    from todaist         import ValidationError
    from todaist.lattice import (Background, Boundary, LatticeState,
                                 flaschka, inverse_flaschka)

    state = _bump(-6, 6, slope=0.5)
    J = flaschka(state)
    assert J.a_at(0) == state.velocities[6]
    assert J.b_at(-6) == pytest.approx(math.exp((state.positions[1] - state.positions[0]) / 2))
    assert J.background == Background(0.0, math.exp(0.25))
    assert J.b_at(100) == pytest.approx(math.exp(0.25))

    back = inverse_flaschka(J, anchor=state.positions[0])
    assert numpy.allclose(back.positions,  state.positions, atol=1e-13)
    assert numpy.allclose(back.velocities, state.velocities)
    assert back.boundary.left_slope == pytest.approx(0.5)

    loose = LatticeState(-2, 2, numpy.zeros(5), numpy.zeros(5), Boundary.free_ends())
    assert flaschka(loose).background.is_free

    skew = LatticeState(-2, 2, numpy.zeros(5), numpy.zeros(5), Boundary.frozen(0.1, 0.2))
    with pytest.raises(ValidationError):
        flaschka(skew)
    assert flaschka(skew, Background(0.0, 1.0)).background.is_free


def test_jacobi_window():
    from todaist         import ValidationError
    from todaist.lattice import JacobiWindow, jacobi_eigenvalues

    J = JacobiWindow.free(-1, 1)
    assert jacobi_eigenvalues(J) == pytest.approx([-math.sqrt(2), 0.0, math.sqrt(2)])

    with pytest.raises(ValidationError):
        JacobiWindow(0, 1, [0.0, 0.0], [-1.0])
    with pytest.raises(ValidationError):
        JacobiWindow(0, 1, [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        JacobiWindow(0, 1, [0.0, math.inf], [1.0])


def test_rescale_to_standard():
    from todaist         import ValidationError
    from todaist.lattice import flaschka, rescale_state, rescale_to_standard

    state = _bump(-6, 6, slope=2 * math.log(2))
    J     = rescale_to_standard(flaschka(state), -4.0, 4.0)
    K     = flaschka(rescale_state(state, -4.0, 4.0))
    assert numpy.allclose(J.a, K.a)
    assert numpy.allclose(J.b, K.b)
    assert J.background.b == pytest.approx(1.0)
    assert K.background.b == pytest.approx(1.0)

    for (a, b) in ((1.0, 1.0), (2.0, -2.0), (0.0, math.inf)):
        with pytest.raises(ValidationError):
            rescale_to_standard(flaschka(state), a, b)


@pytest.mark.parametrize('interval', [(-4.0, 4.0), (-1.0, 3.0)])
def test_rescale_round_trip(interval):
    """
    Solving the rescaled problem and mapping it back matches integrating the
    original one directly.
    """
    from todaist.lattice import integrate, rescale_state, unrescale_solution

    (a, b)  = interval
    stretch = (b - a) / 4.0
    centre  = (a + b) / 2.0
    state   = _bump(-20, 20, slope=2 * math.log(stretch), drift=centre)

    direct   = integrate(state, 1.0, 1e-3, stride=100)
    rescaled = integrate(rescale_state(state, a, b), stretch * 1.0, stretch * 1e-3, stride=100)
    back     = unrescale_solution(rescaled, a, b)

    assert numpy.allclose(back.times, direct.times, rtol=0, atol=1e-12)
    assert numpy.allclose(back.x,     direct.x,     rtol=0, atol=1e-9)
    assert numpy.allclose(back.xdot,  direct.xdot,  rtol=0, atol=1e-9)

    # Resampled at chosen original times too
    picked = unrescale_solution(rescaled, a, b, times=direct.times[::2])
    assert numpy.allclose(picked.x, direct.x[::2], rtol=0, atol=1e-9)


def test_unrescale_coverage():
    from todaist         import ValidationError
    from todaist.lattice import integrate, unrescale_solution

    rescaled = integrate(_bump(-5, 5), 1.0, 1e-2, stride=10)
    with pytest.raises(ValidationError):
        # Stretch 2 needs rescaled times up to 2
        unrescale_solution(rescaled, -4.0, 4.0, times=[0.0, 1.0])


def test_trajectory():
    from todaist         import ValidationError
    from todaist.lattice import Provenance, Trajectory

    x = numpy.arange(12.0).reshape(3, 4)
    trajectory = Trajectory(-1, 2, [0.0, 0.5, 1.0], x, None, Provenance.DIRECT_ODE)
    assert list(trajectory.column(0)) == [1.0, 5.0, 9.0]
    assert list(trajectory.sites) == [-1, 0, 1, 2]

    part = trajectory.restrict(0, 1)
    assert part.x.shape == (3, 2)
    assert list(part.column(1)) == [2.0, 6.0, 10.0]
    assert part.xdot is None

    with pytest.raises(ValidationError):
        trajectory.column(3)
    with pytest.raises(ValidationError):
        trajectory.restrict(-2, 1)
    with pytest.raises(ValidationError):
        Trajectory(-1, 2, [0.0, 0.0, 1.0], x, None, Provenance.DIRECT_ODE)
    with pytest.raises(ValidationError):
        Trajectory(-1, 1, [0.0, 0.5, 1.0], x, None, Provenance.DIRECT_ODE)


def test_trajectory_file(tmp_path):
    from todaist         import ValidationError
    from todaist.lattice import (Provenance, integrate, read_trajectory,
                                 write_trajectory)

    trajectory = integrate(_bump(-4, 4), 0.5, 1e-2, stride=10)
    path = str(tmp_path / 'direct.csv')
    write_trajectory(trajectory, path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == 't,k,x,xdot'
    assert len(lines) == 1 + len(trajectory.times) * 9

    back = read_trajectory(path)
    assert (back.k_min, back.k_max) == (-4, 4)
    assert numpy.array_equal(back.x,    trajectory.x)
    assert numpy.array_equal(back.xdot, trajectory.xdot)
    assert back.provenance is Provenance.DIRECT_ODE

    # Spectral trajectories say where they came from
    spectral = _relabel(trajectory, Provenance.INVERSE_SPECTRAL)
    write_trajectory(spectral, path)
    with open(path) as fh:
        assert fh.readline().strip() == 't,k,x,xdot,provenance'
    assert read_trajectory(path).provenance is Provenance.INVERSE_SPECTRAL

    with open(path, 'w') as fh:
        fh.write('t,k,x,xdot\n')
    with pytest.raises(ValidationError):
        read_trajectory(path)

    with open(path, 'w') as fh:
        fh.write('a,b,c\n1,2,3\n')
    with pytest.raises(ValidationError):
        read_trajectory(path)


def _relabel(trajectory, provenance):
    from dataclasses import replace

    return replace(trajectory, provenance=provenance)


if __name__ == "__main__":
    test_rhs()
    test_energy()
    test_flaschka()

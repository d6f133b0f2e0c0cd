"""
Time evolution and the Cauchy problem.

The positions follow from

    x[k](t) = ln P N^-1 Gamma^(k, t)^-1 N^-1 Gamma^(k+1, t) (1) - c1

where ``c1`` pins ``x[0](0)`` to the initial data. That route is wrapped up in
`GammaPath`. Independently, `EvolvedPath` evolves the spectral data and
reconstructs ``a`` and ``b^2`` from ``u``-solves, and `solve_cauchy` insists
that the two agree.

Sign conventions: the data multipliers ``exp((node - 1/node) tau)`` run
opposite to lattice time, so the lattice at time ``t`` is rebuilt from data
evolved to ``tau = -t``, solved against ``-1`` with the base ``khat``.
"""

# ======================================================================

from   concurrent.futures import ThreadPoolExecutor
from   dataclasses        import dataclass
from   typing             import List, Optional, Tuple
from   .                  import (EXP_GUARD, Grid, InconsistentPathsError,
                                  NumericalError, OverflowGuardError,
                                  ValidationError, build_grid)
from   .inverse           import (C2Operator, assemble_c2, assemble_gamma,
                                  factorize_gamma, gamma_matrix, reconstruct_a,
                                  reconstruct_b2, solve_u)
from   .lattice           import LatticeState, Provenance, Trajectory
from   .spectral          import (Mass, ReducedSpectralData, SpectralSource)

import logging
import math
import numpy
import os

# ======================================================================

DEFAULT_CIRCLE_COUNT = 128

# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvolvedData:
    """
    Spectral data carried to time ``t`` by ``exp((node - 1/node) t)``.
    """
    base : ReducedSpectralData
    t    : float
    data : ReducedSpectralData

    @property
    def mass_multipliers(self) -> numpy.ndarray:
        alphas = numpy.array([m.alpha for m in self.base.masses])
        return numpy.exp((alphas - 1.0 / alphas) * self.t) if len(alphas) else alphas


def _multiplier(nodes : numpy.ndarray, t : float) -> numpy.ndarray:
    exponent = (nodes - 1.0 / nodes) * t
    if len(exponent) and numpy.max(numpy.abs(exponent.real)) > EXP_GUARD:
        raise OverflowGuardError("Data multipliers overflow at t = %g" % t)
    return numpy.exp(exponent)


def evolve_data(data : ReducedSpectralData, t : float) -> EvolvedData:
    """
    Multiply the measure and the circle density by ``exp((node - 1/node) t)``
    at their own nodes, and ``1/rho`` likewise (so ``rho`` is divided). The
    normaliser ``khat`` is kept from the base data.

    :param data: The data at time zero.
    :param t:    The time to evolve to.
    """
    if t == 0.0:
        return EvolvedData(data, 0.0, data)

    density = None
    if data.circle_density is not None:
        density = data.circle_density * _multiplier(
            numpy.exp(1j * data.circle_angles), t
        )
    line = _multiplier(data.line_nodes.astype(numpy.complex128), t)
    alphas = numpy.array([m.alpha for m in data.masses], dtype=numpy.complex128)
    masses = _multiplier(alphas, t).real
    evolved = ReducedSpectralData(
        circle_angles  = data.circle_angles,
        circle_density = density,
        line_nodes     = data.line_nodes,
        line_weights   = data.line_weights * line.real,
        line_coupling  = data.line_coupling / line.real if len(line) else data.line_coupling,
        masses         = tuple(Mass(m.alpha, m.weight * f)
                               for (m, f) in zip(data.masses, masses)),
        normalizer     = data.khat,
    )
    return EvolvedData(data, t, evolved)

# ----------------------------------------------------------------------

def _log_real(z : complex, k : int, t : float) -> float:
    if abs(z.imag) > 1e-9 * abs(z) or not z.real > 0.0:
        raise NumericalError(
            "Logarithm of a non-positive argument %s at k=%d t=%g" % (z, k, t)
        )
    return math.log(z.real)


class GammaPath():
    """
    Observables along the ``Gamma^(k, t)`` route. One instance is built per
    data set and may be shared between threads.
    """
    def __init__(self,
                 data : ReducedSpectralData,
                 grid : Optional[Grid] = None):
        """
        :param data: The reduced spectral data.
        :param grid: The grid, if the data have circle or line channels.
        """
        self._c2 = assemble_c2(data, grid)


    @property
    def c2(self) -> C2Operator:
        return self._c2


    def projected(self,
                  k          : int,
                  t          : float,
                  derivative : bool = False) -> Tuple[complex, complex]:
        """
        The argument ``z = P N^-1 Gamma^(k)^-1 N^-1 Gamma^(k+1) (1)`` of the
        logarithm and, if asked for, its analytic time derivative

            P N^-1 Gamma^(k)^-1 [N^-2 Gamma^(k+2) - N^-1 Gamma^(k+1) w] (1)

        with ``w = Gamma^(k)^-1 N^-1 Gamma^(k+1) (1)``.
        """
        c2 = self._c2
        if c2.size == 0:
            return (1.0 + 0j, 0j)

        # Every product below is taken with the rows scaled alike
        beta   = c2.nodes
        ones   = numpy.ones(c2.size)
        system = assemble_gamma(c2, k, t)
        factor = factorize_gamma(system)
        upper  = gamma_matrix(c2, k + 1, t, system.shift)
        inner  = factor.solve((upper @ ones) / beta)
        z      = c2.points.project(inner / beta)
        if not derivative:
            return (z, 0j)

        upper2 = gamma_matrix(c2, k + 2, t, system.shift)
        rate   = factor.solve((upper2 @ ones) / beta ** 2 - (upper @ inner) / beta)
        return (z, c2.points.project(rate / beta))


    def x(self, k : int, t : float) -> float:
        """
        The uncalibrated position ``ln P N^-1 Gamma^(k)^-1 N^-1 Gamma^(k+1) (1)``.
        """
        (z, _) = self.projected(k, t)
        return _log_real(z, k, t)


    def velocity(self, k : int, t : float) -> float:
        """
        ``d/dt x[k](t)``, analytically.
        """
        (z, rate) = self.projected(k, t, derivative=True)
        _log_real(z, k, t)
        return (rate / z).real


    def observables(self,
                    k_min : int,
                    k_max : int,
                    t     : float) -> Tuple[numpy.ndarray, numpy.ndarray, numpy.ndarray]:
        """
        :return: ``x[k]`` and ``a[k]`` on ``k_min..k_max``, and ``b[k-1]^2 =
                 exp(x[k] - x[k-1])`` for the same ``k``.
        """
        values = [self.projected(k, t, derivative=True)
                  for k in range(k_min - 1, k_max + 1)]
        logs   = numpy.array([_log_real(z, k, t)
                              for ((z, _), k) in zip(values, range(k_min - 1, k_max + 1))])
        rates  = numpy.array([(r / z).real for (z, r) in values[1:]])
        return (logs[1:], rates, numpy.exp(numpy.diff(logs)))


class EvolvedPath():
    """
    Observables from evolved spectral data, through ``u``-solves and the
    moment reconstruction.
    """
    def __init__(self,
                 data : ReducedSpectralData,
                 grid : Optional[Grid] = None):
        self._data = data
        self._grid = grid


    def solutions(self, k_min : int, k_max : int, t : float) -> List:
        """
        :return: The ``u``-solves for sites ``k_min..k_max`` at lattice time
                 ``t``.
        """
        evolved = evolve_data(self._data, -t).data
        c2      = assemble_c2(evolved, self._grid)
        return [solve_u(assemble_gamma(c2, k, 0.0)) for k in range(k_min, k_max + 1)]


    def observables(self,
                    k_min : int,
                    k_max : int,
                    t     : float) -> Tuple[numpy.ndarray, numpy.ndarray]:
        """
        :return: ``a[k]`` and ``b[k-1]^2`` for ``k`` in ``k_min..k_max``.
        """
        solutions = self.solutions(k_min - 1, k_max + 1, t)
        a  = numpy.array([reconstruct_a(solutions[i], solutions[i + 1])
                          for i in range(1, len(solutions) - 1)])
        b2 = numpy.array([reconstruct_b2(solutions[i], solutions[i - 1])
                          for i in range(1, len(solutions) - 1)])
        return (a, b2)

# ----------------------------------------------------------------------

def x_solution(data : ReducedSpectralData,
               grid : Optional[Grid],
               k    : int,
               t    : float) -> float:
    """
    The uncalibrated position of site ``k`` at time ``t``.
    """
    return GammaPath(data, grid).x(k, t)


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    """
    A Cauchy problem for the lattice, with the spectral data to solve it by.

    :ivar source:    Where the reduced spectral data come from.
    :ivar times:     The sample times.
    :ivar k_min:     The first site to report.
    :ivar k_max:     The last site to report.
    :ivar anchor:    ``x[0](0)``; taken from ``initial`` when that is given.
    :ivar initial:   The initial data, checked against the solution at
                     ``t = 0`` when given.
    :ivar grid:      The collocation grid.
    :ivar tolerance: How closely the two solution paths, and the initial
                     data, must agree.
    :ivar threads:   The number of worker threads; ``TODA_THREADS`` or the
                     CPU count by default.
    """
    source    : SpectralSource
    times     : numpy.ndarray
    k_min     : int
    k_max     : int
    anchor    : Optional[float]        = None
    initial   : Optional[LatticeState] = None
    grid      : Optional[Grid]         = None
    tolerance : float                  = 1e-8
    threads   : Optional[int]          = None

    def __post_init__(self):
        times = numpy.array(self.times, dtype=numpy.float64)
        if times.ndim != 1 or len(times) == 0 or numpy.any(numpy.diff(times) <= 0.0):
            raise ValidationError("Sample times must be strictly increasing")
        if self.k_min > self.k_max:
            raise ValidationError("Empty k range: [%d, %d]" % (self.k_min, self.k_max))
        if not self.tolerance > 0.0:
            raise ValidationError("Bad tolerance: %s" % (self.tolerance,))
        object.__setattr__(self, 'times', times)


    @property
    def anchor_value(self) -> float:
        """
        The position of site 0 at time 0.
        """
        if self.anchor is not None:
            return float(self.anchor)
        if self.initial is not None:
            if not self.initial.k_min <= 0 <= self.initial.k_max:
                raise ValidationError("Initial data do not include site 0")
            return float(self.initial.positions[-self.initial.k_min])
        return 0.0


def calibrate_c1(problem : CauchyProblem,
                 data    : ReducedSpectralData,
                 grid    : Optional[Grid]) -> float:
    """
    The offset ``c1`` with ``x[0](0) - c1`` equal to the anchor.
    """
    return x_solution(data, grid, 0, 0.0) - problem.anchor_value


def thread_count(requested : Optional[int] = None) -> int:
    """
    The number of worker threads: as requested, else ``TODA_THREADS``, else
    the CPU count.
    """
    if requested is None:
        value = os.environ.get('TODA_THREADS')
        if value is None:
            return os.cpu_count() or 1
        try:
            requested = int(value)
        except ValueError:
            raise ValidationError("Bad TODA_THREADS: %s" % value)
    if requested < 1:
        raise ValidationError("Bad thread count: %s" % requested)
    return requested


def _telescope(anchor : float, b2 : numpy.ndarray, lo : int, hi : int) -> numpy.ndarray:
    """
    Positions on ``lo..hi`` from ``x[0]`` and ``b[k-1]^2`` for ``k`` in
    ``lo..hi``, where ``lo <= 0 <= hi``.
    """
    logs = numpy.log(b2)
    x    = numpy.empty(hi - lo + 1)
    zero = -lo
    x[zero]       = anchor
    x[zero + 1:]  = anchor + numpy.cumsum(logs[zero + 1:])
    if zero:
        x[:zero]  = anchor - numpy.cumsum(logs[zero:0:-1])[::-1]
    return x


def solve_cauchy(problem : CauchyProblem) -> Trajectory:
    """
    Solve a Cauchy problem by the inverse spectral transform.

    For every sample time the observables are computed along both paths and
    cross-checked; positions come from ``x[0](t)`` on the ``Gamma^`` path
    extended by ``x[k] = x[k-1] + ln b[k-1]^2``, and velocities are ``a[k]``.
    """
    grid = problem.grid or build_grid(DEFAULT_CIRCLE_COUNT)
    data = problem.source.spectral_data(grid)
    gamma   = GammaPath(data, grid)
    evolved = EvolvedPath(data, grid)
    c1      = gamma.x(0, 0.0) - problem.anchor_value
    lo      = min(problem.k_min, 0)
    hi      = max(problem.k_max, 0)
    logging.info(
        f'Solving on [{problem.k_min}, {problem.k_max}] at {len(problem.times)} '
        f'times from {problem.source.name}, c1={c1:.17g}'
    )

    def sample(t):
        (x_g, a_g, b2_g) = gamma.observables(lo, hi, t)
        (a_e, b2_e)      = evolved.observables(lo, hi, t)
        mismatch = max(numpy.max(numpy.abs(a_g - a_e)),
                       numpy.max(numpy.abs(b2_g - b2_e) / b2_e))
        if mismatch > problem.tolerance:
            raise InconsistentPathsError(
                "The two solution paths differ by %g at t=%g" % (mismatch, t)
            )
        logging.debug(f't={t:g}: paths agree to {mismatch:.3g}')
        positions = _telescope(x_g[-lo] - c1, b2_e, lo, hi)
        return (positions, a_e)

    with ThreadPoolExecutor(max_workers=thread_count(problem.threads)) as pool:
        results = list(pool.map(sample, problem.times))

    first = problem.k_min - lo
    last  = problem.k_max - lo + 1
    trajectory = Trajectory(problem.k_min,
                            problem.k_max,
                            problem.times,
                            numpy.array([p[first:last] for (p, _) in results]),
                            numpy.array([a[first:last] for (_, a) in results]),
                            Provenance.INVERSE_SPECTRAL)

    if problem.initial is not None and problem.times[0] == 0.0:
        _check_initial(problem, trajectory)
    return trajectory


def _check_initial(problem : CauchyProblem, trajectory : Trajectory) -> None:
    initial = problem.initial
    lo = max(initial.k_min, trajectory.k_min)
    hi = min(initial.k_max, trajectory.k_max)
    if lo > hi:
        return
    mine   = trajectory.restrict(lo, hi)
    theirs = initial.positions [lo - initial.k_min:hi - initial.k_min + 1]
    speeds = initial.velocities[lo - initial.k_min:hi - initial.k_min + 1]
    worst  = max(numpy.max(numpy.abs(mine.x[0]    - theirs)),
                 numpy.max(numpy.abs(mine.xdot[0] - speeds)))
    if worst > problem.tolerance:
        raise ValidationError(
            "The spectral data do not reproduce the initial data (off by %g)" % worst
        )

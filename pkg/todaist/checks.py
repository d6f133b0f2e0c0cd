"""
Invariant checks on solutions built by the inverse spectral transform.

These are shared between the test suite and the ``verify`` mode of the
command line. Each check gives back a `CheckResult`, so callers decide what
a breach means.
"""

# ======================================================================

from   dataclasses import dataclass
from   typing      import Iterable, List, Sequence, Tuple
from   .           import build_grid, pv_cauchy_weights
from   .evolution  import EvolvedPath, GammaPath, x_solution
from   .lattice    import JacobiWindow
from   .operators  import operator_suite, random_masses
from   .spectral   import (ReducedSpectralData, free_data, n_function,
                           reflectionless_data)

import cmath
import logging
import math
import numpy

# ======================================================================

# The step of the 5-point finite-difference stencils
FD_STEP = 5e-3

# Sample times and sites of the invariant sweeps
SWEEP_TIMES = (0.0, 0.5, 1.0, 2.0)
SWEEP_SITES = (-10, 10)

# Conserved quantities are summed over this many sites either side of zero
CONSERVED_HALF_WIDTH = 40

# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    """
    The worst value a check saw, against its tolerance.
    """
    name      : str
    value     : float
    tolerance : float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


    @property
    def status(self) -> str:
        return 'pass' if self.passed else 'fail'

# ----------------------------------------------------------------------

def second_difference(f, t : float, h : float = FD_STEP) -> float:
    """
    The 5-point, fourth-order estimate of ``f''(t)``.
    """
    return (-f(t + 2*h) + 16*f(t + h) - 30*f(t) + 16*f(t - h) - f(t - 2*h)) / (12*h*h)


def first_difference(f, t : float, h : float = FD_STEP) -> float:
    """
    The 5-point, fourth-order estimate of ``f'(t)``.
    """
    return (f(t - 2*h) - 8*f(t - h) + 8*f(t + h) - f(t + 2*h)) / (12*h)


def toda_residual(path : GammaPath, k : int, t : float) -> float:
    """
    How far ``x[k]`` is from satisfying the lattice equation at ``t``, with
    the acceleration taken by finite differences.
    """
    accel = second_difference(lambda s: path.x(k, s), t)
    (left, here, right) = (path.x(k + d, t) for d in (-1, 0, 1))
    return abs(accel - (math.exp(right - here) - math.exp(here - left)))


def velocity_residual(path    : GammaPath,
                      evolved : EvolvedPath,
                      k       : int,
                      t       : float) -> float:
    """
    The gap between the finite-difference velocity of ``x[k]`` and ``a[k]``
    rebuilt from the evolved data.
    """
    speed = first_difference(lambda s: path.x(k, s), t)
    (a, _) = evolved.observables(k, k, t)
    return abs(speed - a[0])


def initial_matching(path    : GammaPath,
                     evolved : EvolvedPath,
                     k_min   : int,
                     k_max   : int) -> Tuple[float, float]:
    """
    At ``t = 0``, the worst relative gap between ``exp(x[k] - x[k-1])`` and
    the reconstructed ``b[k-1]^2``, and the worst gap between the analytic
    ``xdot[k]`` and the reconstructed ``a[k]``.
    """
    (_, rates, b2) = path.observables(k_min, k_max, 0.0)
    (a, b2_e)      = evolved.observables(k_min, k_max, 0.0)
    return (float(numpy.max(numpy.abs(b2 - b2_e) / b2_e)),
            float(numpy.max(numpy.abs(rates - a))))


def path_mismatch(path    : GammaPath,
                  evolved : EvolvedPath,
                  k_min   : int,
                  k_max   : int,
                  t       : float) -> float:
    """
    The worst gap in ``a`` and relative gap in ``b^2`` between the two
    solution paths.
    """
    (_, a_g, b2_g) = path.observables(k_min, k_max, t)
    (a_e, b2_e)    = evolved.observables(k_min, k_max, t)
    return float(max(numpy.max(numpy.abs(a_g - a_e)),
                     numpy.max(numpy.abs(b2_g - b2_e) / b2_e)))


def conserved_quantities(path       : GammaPath,
                         t          : float,
                         half_width : int = CONSERVED_HALF_WIDTH) -> Tuple[float, float]:
    """
    ``sum(a)`` and ``sum(a^2 + 2 (b^2 - 1))`` over the sites within
    ``half_width`` of zero.
    """
    (_, a, b2) = path.observables(-half_width, half_width, t)
    return (float(numpy.sum(a)),
            float(numpy.sum(a * a + 2.0 * (b2 - 1.0))))


def conserved_drift(path       : GammaPath,
                    times      : Iterable[float],
                    half_width : int = CONSERVED_HALF_WIDTH) -> float:
    """
    The largest change of either conserved quantity from its value at the
    first time.
    """
    values = numpy.array([conserved_quantities(path, t, half_width) for t in times])
    return float(numpy.max(numpy.abs(values - values[0])))


def free_degeneracy(times : Sequence[float] = SWEEP_TIMES) -> float:
    """
    The worst departure of the free solution from ``x = 0`` and of the free
    ``n(z)`` from ``z``.
    """
    data  = free_data()
    worst = max(abs(x_solution(data, None, k, t))
                for k in range(SWEEP_SITES[0], SWEEP_SITES[1] + 1)
                for t in times)
    J = JacobiWindow.free()
    for z in (0.5, 2.0, 0.3 + 0.4j, -1.5 + 0.5j):
        worst = max(worst, abs(n_function(J, z) - z))
    return float(worst)

# ----------------------------------------------------------------------

def pv_errors(counts : Sequence[int] = (32, 64, 128, 256),
              rho    : float         = 0.5) -> List[Tuple[int, float]]:
    """
    The error of the principal-value quadrature against its closed form for
    the smooth density ``1 / (1 - rho exp(i theta))``, whose principal
    value is ``pi / (1 - rho / beta)``.

    The singular point is put on a node of the coarsest grid, so it is a
    node there and a midpoint on every finer one.
    """
    coarse = build_grid(counts[0])
    beta   = cmath.exp(-1j * coarse.circle_nodes[0])
    exact  = math.pi / (1.0 - rho / beta)
    result = []
    for count in counts:
        grid    = build_grid(count)
        density = 1.0 / (1.0 - rho * grid.circle_points)
        value   = numpy.sum(pv_cauchy_weights(grid, beta) * density)
        result.append((count, float(abs(value - exact))))
    return result


def pv_order(errors : Sequence[Tuple[int, float]], floor : float = 1e-13) -> float:
    """
    The smallest observed convergence order over the doublings whose errors
    are still above round-off.
    """
    orders = [math.log2(e0 / e1)
              for ((_, e0), (_, e1)) in zip(errors, errors[1:])
              if e0 > floor and e1 > 0.0]
    return min(orders) if orders else math.inf

# ----------------------------------------------------------------------

def random_reflectionless(seed       : int,
                          count      : int  = 20,
                          max_masses : int  = 4,
                          far        : bool = False) -> List[ReducedSpectralData]:
    """
    Seeded reflectionless data sets with between one and ``max_masses``
    masses.

    :param seed:       The seed.
    :param count:      How many data sets.
    :param max_masses: The most masses in one set.
    :param far:        Keep every ``|alpha|`` at least 1.5 away from the unit
                       circle, in the multiplicative sense, so that the
                       solitons are narrow.
    """
    rng   = numpy.random.default_rng(seed)
    bands = dict(inside=(1.0 / 3.0, 1.0 / 1.5), outside=(1.5, 3.0)) if far else {}
    return [reflectionless_data(random_masses(rng, int(rng.integers(1, max_masses + 1)), **bands))
            for _ in range(count)]


def _worst(name : str, values : Iterable[float], tolerance : float) -> CheckResult:
    return CheckResult(name, float(max(values, default=0.0)), tolerance)


def invariant_suite(seed      : int,
                    count     : int   = 20,
                    tolerance : float = 1e-7) -> List[CheckResult]:
    """
    The solution invariants over seeded reflectionless data.

    :param seed:      The seed of the data sets.
    :param count:     How many data sets.
    :param tolerance: The tolerance of the finite-difference checks.
    """
    (lo, hi) = SWEEP_SITES
    sets     = random_reflectionless(seed, count)
    paths    = [(GammaPath(data), EvolvedPath(data)) for data in sets]

    residual = []
    velocity = []
    matching = []
    agree    = []
    for (path, evolved) in paths:
        residual.extend(toda_residual(path, k, t)
                        for k in range(lo, hi + 1) for t in SWEEP_TIMES)
        velocity.extend(velocity_residual(path, evolved, k, t)
                        for k in (lo, 0, hi) for t in SWEEP_TIMES)
        matching.append(initial_matching(path, evolved, lo, hi))
        agree.extend(path_mismatch(path, evolved, lo, hi, t) for t in SWEEP_TIMES)

    drift = [conserved_drift(GammaPath(data), numpy.linspace(0.0, 5.0, 6))
             for data in random_reflectionless(seed, max(1, count // 4), far=True)]

    results = [
        _worst('exact_solution',    residual,                tolerance),
        _worst('velocity_identity', velocity,                tolerance),
        _worst('initial_b2',        (m[0] for m in matching), 1e-10),
        _worst('initial_a',         (m[1] for m in matching), 1e-8),
        _worst('path_equivalence',  agree,                   1e-8),
        _worst('conserved_drift',   drift,                   tolerance),
        CheckResult('free_degeneracy', free_degeneracy(),    1e-10),
        CheckResult('pv_quadrature',   pv_errors()[-1][1],   1e-12),
    ]
    for result in results:
        logging.info(f'{result.name}: {result.value:.3g} against {result.tolerance:g}')
    return results


def operator_checks(seed : int, count : int = 100) -> List[CheckResult]:
    """
    The operator identities over a seeded sweep, as check results.
    """
    suite = operator_suite(seed, count)
    limits = dict(scalar_toda=1e-9)
    return [CheckResult(name, value, limits.get(name, 1e-10))
            for (name, value) in suite.as_dict().items()]

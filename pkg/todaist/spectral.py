"""
The direct spectral problem: orthogonal polynomials of a Jacobi matrix, its
Weyl functions and ``n(z)``, and the reduced spectral data which the inverse
problem starts from.

Extracting reduced data from an arbitrary Jacobi matrix is not done here. The
data come from a `SpectralSource`: the free lattice, the reflectionless
(multi-soliton) family or a data file.
"""

# ======================================================================

from   abc         import ABC, abstractmethod
from   dataclasses import dataclass, field
from   typing      import Optional, Sequence, Tuple
from   .           import (Branch, ConvergenceError, Grid, UNIT_TOL,
                           ValidationError, WindowExhaustedError,
                           inverse_joukowski)
from   .lattice    import JacobiWindow

import logging
import math
import numpy

# ======================================================================

# Successive Weyl approximations closer than this are taken as converged
WEYL_TOL = 1e-12

# ----------------------------------------------------------------------

def orthopoly(J   : JacobiWindow,
              lam : complex,
              k   : int) -> Tuple[complex, complex]:
    """
    The two solutions ``P`` and ``Q`` of ``b[k-1] w[k-1] + (a[k] - lam) w[k] +
    b[k] w[k+1] = 0`` with ``P[0] = 1, P[-1] = 0, Q[0] = 0, Q[-1] = 1``.

    Sites up to one beyond each end of the window can be reached; past that
    the recurrence would need coefficients the window does not have.

    :param J:   The Jacobi matrix.
    :param lam: The spectral parameter.
    :param k:   The site to evaluate at.
    """
    lo = min(J.k_min, -1) - 1
    hi = max(J.k_max,  0) + 1
    if not lo <= k <= hi:
        raise WindowExhaustedError(
            "Site %d is beyond the reach [%d, %d] of the window" % (k, lo, hi)
        )
    lam = complex(lam)

    # (value at j-1, value at j) for both solutions, starting at j = 0
    (p_prev, p) = (0j, 1 + 0j)
    (q_prev, q) = (1 + 0j, 0j)
    if k >= 0:
        for j in range(0, k):
            p_next = ((lam - J.a_at(j)) * p - J.b_at(j - 1) * p_prev) / J.b_at(j)
            q_next = ((lam - J.a_at(j)) * q - J.b_at(j - 1) * q_prev) / J.b_at(j)
            (p_prev, p) = (p, p_next)
            (q_prev, q) = (q, q_next)
        return (p, q)

    # Backwards; here (p, q) hold the values at j and (p_prev, q_prev) at j-1
    (p_hi, p_lo) = (p, p_prev)
    (q_hi, q_lo) = (q, q_prev)
    for j in range(-1, k, -1):
        p_new = ((lam - J.a_at(j)) * p_lo - J.b_at(j) * p_hi) / J.b_at(j - 1)
        q_new = ((lam - J.a_at(j)) * q_lo - J.b_at(j) * q_hi) / J.b_at(j - 1)
        (p_hi, p_lo) = (p_lo, p_new)
        (q_hi, q_lo) = (q_lo, q_new)
    return (p_lo, q_lo)


def _check_resolvent(J : JacobiWindow, lam : complex) -> complex:
    lam = complex(lam)
    bg  = J.background
    if lam.imag == 0.0 and abs(lam.real - bg.a) <= 2.0 * bg.b:
        raise ValidationError(
            "%s lies on the continuous spectrum [%g, %g]" %
            (lam.real, bg.a - 2.0 * bg.b, bg.a + 2.0 * bg.b)
        )
    return lam


def _converge(approximate, depth : int, max_depth : int, name : str) -> complex:
    if int(depth) != depth or depth < 1:
        raise ValidationError("Bad depth: %s" % (depth,))
    previous = approximate(depth)
    while depth < max_depth:
        depth  *= 2
        current = approximate(depth)
        if abs(current - previous) < WEYL_TOL:
            return current
        previous = current
    raise ConvergenceError("%s did not converge by depth %d" % (name, max_depth))


def weyl_m_right(J         : JacobiWindow,
                 lam       : complex,
                 depth     : int = 8,
                 max_depth : int = 1 << 16) -> complex:
    """
    The right Weyl function ``m^R(lam) = -phi[0] / (b[-1] phi[-1])`` of the
    solution ``phi`` which is square-summable to the right.

    The ratio ``phi[k+1] / phi[k]`` is run backwards from ``depth`` sites
    past the window, where the background's inside-disk Joukowski root gives
    it in closed form. The depth is doubled until the results settle.

    :param J:         The Jacobi matrix.
    :param lam:       The spectral parameter, off the continuous spectrum.
    :param depth:     The starting depth.
    :param max_depth: The depth at which to give up.
    """
    lam  = _check_resolvent(J, lam)
    bg   = J.background
    tail = inverse_joukowski((lam - bg.a) / bg.b, Branch.INSIDE_DISK)

    def approximate(d):
        ratio = tail
        for k in range(max(J.k_max, 0) + d, -1, -1):
            ratio = -J.b_at(k - 1) / ((J.a_at(k) - lam) + J.b_at(k) * ratio)
        return -ratio / J.b_at(-1)

    return _converge(approximate, depth, max_depth, "m^R(%s)" % lam)


def weyl_m_left(J         : JacobiWindow,
                lam       : complex,
                depth     : int = 8,
                max_depth : int = 1 << 16) -> complex:
    """
    The left Weyl function ``m^L(lam) = -phi[-1] / (b[-1] phi[0])`` of the
    solution which is square-summable to the left. The mirror image of
    `weyl_m_right`, using the outside-disk root.
    """
    lam  = _check_resolvent(J, lam)
    bg   = J.background
    tail = 1.0 / inverse_joukowski((lam - bg.a) / bg.b, Branch.OUTSIDE_DISK)

    def approximate(d):
        # ratio holds phi[k-1] / phi[k]
        ratio = tail
        for k in range(min(J.k_min, -1) - d, 0):
            ratio = -J.b_at(k) / (J.b_at(k - 1) * ratio + (J.a_at(k) - lam))
        return -ratio / J.b_at(-1)

    return _converge(approximate, depth, max_depth, "m^L(%s)" % lam)


@dataclass(frozen=True)
class WeylPair:
    mR       : complex
    mL       : complex
    b_minus1 : float


def weyl_pair(J : JacobiWindow, lam : complex) -> WeylPair:
    return WeylPair(weyl_m_right(J, lam), weyl_m_left(J, lam), J.b_at(-1))


def n_function(J : JacobiWindow, z : complex) -> complex:
    """
    ``-b[-1] m^R(z + 1/z)`` inside the unit disk and ``-1 / (b[-1] m^L(z +
    1/z))`` outside it.
    """
    z = complex(z)
    if z == 0 or abs(abs(z) - 1.0) <= UNIT_TOL:
        raise ValidationError("n(z) is not defined at z = %s" % (z,))
    lam = z + 1.0 / z
    if abs(z) < 1.0:
        return -J.b_at(-1) * weyl_m_right(J, lam)
    return -1.0 / (J.b_at(-1) * weyl_m_left(J, lam))

# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Mass:
    """
    A point mass ``weight`` of the measure at the real node ``alpha``.
    """
    alpha  : float
    weight : float

    @property
    def sign(self) -> int:
        return 1 if abs(self.alpha) > 1.0 else -1


def _empty(dtype) -> numpy.ndarray:
    return numpy.zeros(0, dtype=dtype)


@dataclass(frozen=True, eq=False)
class ReducedSpectralData:
    """
    The reduced spectral data of a Jacobi matrix.

    The circle channel is the density ``r^`` sampled at ``circle_angles``, or
    absent altogether. The line channel carries, at real nodes, the weights
    of the measure and the coupling ``rho = m / (2 q)`` between a node and its
    inverse. The point masses are the rest of the measure.

    ``khat`` normalises the projector so that it maps the constant 1 to 1; it
    is None when the normalising moment vanishes, as for free data. An
    explicit ``normalizer`` overrides it.
    """
    circle_angles  : Optional[numpy.ndarray] = None
    circle_density : Optional[numpy.ndarray] = None
    line_nodes     : numpy.ndarray           = field(default_factory=lambda: _empty(float))
    line_weights   : numpy.ndarray           = field(default_factory=lambda: _empty(float))
    line_coupling  : numpy.ndarray           = field(default_factory=lambda: _empty(complex))
    masses         : Tuple[Mass, ...]        = ()
    normalizer     : Optional[complex]       = None
    khat           : Optional[complex]       = field(init=False, default=None)

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)

        # Circle channel
        if (self.circle_angles is None) != (self.circle_density is None):
            raise ValidationError("Circle angles and density come together")
        if self.circle_density is not None:
            angles  = numpy.array(self.circle_angles,  dtype=numpy.float64)
            density = numpy.array(self.circle_density, dtype=numpy.complex128)
            if angles.shape != density.shape or angles.ndim != 1 or len(angles) == 0:
                raise ValidationError("Circle angles and density differ in shape")
            if not numpy.all(numpy.isfinite(density)):
                raise ValidationError("Circle density must be finite")
            set_('circle_angles',  angles)
            set_('circle_density', density)

        # Line channel
        nodes    = numpy.array(self.line_nodes,    dtype=numpy.float64)
        weights  = numpy.array(self.line_weights,  dtype=numpy.float64)
        coupling = numpy.array(self.line_coupling, dtype=numpy.complex128)
        if not (nodes.shape == weights.shape == coupling.shape) or nodes.ndim != 1:
            raise ValidationError("Line nodes, weights and coupling differ in shape")
        for x in nodes:
            if x == 0.0 or abs(abs(x) - 1.0) <= UNIT_TOL:
                raise ValidationError("Line node at 0 or on the unit circle: %s" % x)
        if numpy.any(weights < 0.0) or not numpy.all(numpy.isfinite(weights)):
            raise ValidationError("Line weights must be finite and non-negative")
        for (x, rho) in zip(nodes, coupling):
            if rho != 0 and not numpy.any(numpy.abs(nodes * x - 1.0) <= 1e-12):
                raise ValidationError("Coupling at %s without its inverse node" % x)
        set_('line_nodes',    nodes)
        set_('line_weights',  weights)
        set_('line_coupling', coupling)

        # Point masses
        masses = tuple(m if isinstance(m, Mass) else Mass(*m) for m in self.masses)
        for m in masses:
            if not (math.isfinite(m.alpha) and math.isfinite(m.weight)):
                raise ValidationError("Mass must be finite: %s" % (m,))
            if m.alpha == 0.0:
                raise ValidationError("Mass at the origin")
            if abs(abs(m.alpha) - 1.0) <= UNIT_TOL:
                raise ValidationError("mass on unit circle: %s" % m.alpha)
            if m.weight <= 0.0:
                raise ValidationError("Mass weight must be positive: %s" % m.weight)
        alphas = [m.alpha for m in masses]
        for (i, a) in enumerate(alphas):
            for b in alphas[i + 1:]:
                if a == b:
                    raise ValidationError("Duplicate mass at %s" % a)
                if abs(a * b - 1.0) <= 1e-12:
                    raise ValidationError("inverse-pair collision: %s and %s" % (a, b))
            for x in nodes:
                if abs(x - a) <= 1e-12 * abs(a) or abs(x * a - 1.0) <= 1e-12:
                    raise ValidationError("Mass at %s collides with line node %s" % (a, x))
        set_('masses', masses)

        if self.normalizer is not None:
            set_('khat', complex(self.normalizer))
        else:
            moment = self.first_moment()
            set_('khat', None if abs(moment) <= 1e-300 else 1.0 / moment)


    def first_moment(self) -> complex:
        """
        The integral of ``beta s dsigma`` plus ``1/pi`` times that of ``exp(i
        theta) r^``, the reciprocal of the normaliser.
        """
        total = sum(m.alpha * m.sign * m.weight for m in self.masses)
        signs = numpy.where(numpy.abs(self.line_nodes) > 1.0, 1.0, -1.0)
        total += numpy.sum(self.line_nodes * signs * self.line_weights)
        if self.circle_density is not None:
            step   = 2.0 * math.pi / len(self.circle_angles)
            total += (step / math.pi) * numpy.sum(
                numpy.exp(1j * self.circle_angles) * self.circle_density
            )
        return complex(total)


    @property
    def has_circle(self) -> bool:
        return self.circle_density is not None


    @property
    def is_reflectionless(self) -> bool:
        """
        True when only point masses carry any weight.
        """
        return ((self.circle_density is None or not numpy.any(self.circle_density))
                and not numpy.any(self.line_weights)
                and not numpy.any(self.line_coupling))


    @property
    def is_free(self) -> bool:
        return self.is_reflectionless and not self.masses


def free_data() -> ReducedSpectralData:
    """
    The reduced data of the free matrix.
    """
    return ReducedSpectralData()


def reflectionless_data(masses : Sequence[Tuple[float, float]]) -> ReducedSpectralData:
    """
    Reflectionless data with the given ``(alpha, weight)`` point masses and
    nothing else. These give the multi-soliton solutions.
    """
    data = ReducedSpectralData(masses=tuple(Mass(float(a), float(w)) for (a, w) in masses))
    logging.debug(f'Reflectionless data with {len(data.masses)} masses, khat={data.khat}')
    return data

# ----------------------------------------------------------------------

class SpectralSource(ABC):
    """
    Where the reduced spectral data of a run come from.
    """
    @property
    def name(self) -> str:
        return type(self).__name__


    @property
    def interval(self) -> Tuple[float, float]:
        """
        The continuous spectrum the data describe, before rescaling.
        """
        return (-2.0, 2.0)


    @abstractmethod
    def spectral_data(self, grid : Optional[Grid]) -> ReducedSpectralData:
        """
        :param grid: The grid to realise any circle and line channels on.
        """
        pass


class FreeSource(SpectralSource):
    """
    The free lattice.
    """
    def spectral_data(self, grid : Optional[Grid]) -> ReducedSpectralData:
        return free_data()


class ReflectionlessSource(SpectralSource):
    """
    Point masses only.
    """
    def __init__(self, masses : Sequence[Tuple[float, float]]):
        """
        :param masses: The ``(alpha, weight)`` pairs.
        """
        self._masses = tuple((float(a), float(w)) for (a, w) in masses)


    @property
    def masses(self) -> Tuple[Tuple[float, float], ...]:
        return self._masses


    def spectral_data(self, grid : Optional[Grid]) -> ReducedSpectralData:
        return reflectionless_data(self._masses)


class FileSource(SpectralSource):
    """
    Data read from a spectral data file.
    """
    def __init__(self, path : str):
        """
        :param path: The file to read.
        """
        # Only needed for this source
        from .datafile import read_spectral_file

        self._path = path
        self._file = read_spectral_file(path)


    @property
    def path(self) -> str:
        return self._path


    @property
    def interval(self) -> Tuple[float, float]:
        return self._file.interval


    def spectral_data(self, grid : Optional[Grid]) -> ReducedSpectralData:
        from .datafile import load_spectral_data

        if grid is None:
            raise ValidationError("Loading %s needs a grid" % (self._path,))
        return load_spectral_data(self._file, grid)

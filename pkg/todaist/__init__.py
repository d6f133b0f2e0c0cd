"""
Classes and functions for solving the doubly-infinite Toda lattice by its
inverse spectral transform.

This module holds the shared numeric substrate: the error hierarchy, points of
the spectral plane, the inversion-closed collocation grids, principal-value
quadrature weights on the unit circle and dense linear solving. Everything
else builds on top of these.
"""

# ======================================================================

from   dataclasses import dataclass
from   enum        import Enum
from   typing      import Optional, Sequence, Union

import cmath
import logging
import math
import numpy
import scipy.linalg
import warnings

# ======================================================================

# How close to the unit circle counts as "on" it
UNIT_TOL = 1e-14

# Relative pivot size below which a matrix is treated as singular
SINGULAR_PIVOT = 1e-14

# Sentinel in an inversion map for a node whose inverse is not on the grid
NO_INVERSE = -1

# Exponents beyond this are refused rather than allowed to overflow
EXP_GUARD = 700.0

# ----------------------------------------------------------------------

class TodaError(Exception):
    """
    The base class for everything which this package raises on purpose.
    """
    pass


class ValidationError(TodaError, ValueError):
    """
    Inputs which break a documented precondition or invariant.
    """
    pass


class ParseError(ValidationError):
    """
    A malformed text document. Carries the offending line number, when known.
    """
    def __init__(self, message : str, line : Optional[int] = None):
        self.line = line
        if line is not None:
            message = "Line %d: %s" % (line, message)
        super().__init__(message)


class WindowExhaustedError(ValidationError):
    """
    A recurrence which wanted coefficients from beyond the window's reach.
    """
    pass


class NumericalError(TodaError, ArithmeticError):
    """
    A computation which could not be completed numerically.
    """
    pass


class SingularSystemError(NumericalError):
    pass


class OverflowGuardError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class InconsistentPathsError(NumericalError):
    """
    The two independent routes to the same observables disagree.
    """
    pass


class ToleranceError(TodaError):
    """
    A completed computation whose result breached an acceptance tolerance.
    """
    pass

# ----------------------------------------------------------------------

class Location(Enum):
    """
    Where in the spectral plane a point lives.
    """
    REAL_LINE   = 'line'
    UNIT_CIRCLE = 'circle'


class Branch(Enum):
    """
    Which root of ``z + 1/z = lambda`` to take.
    """
    INSIDE_DISK  = 'inside'
    OUTSIDE_DISK = 'outside'


@dataclass(frozen=True)
class SpectralPoint:
    """
    A point ``beta`` of the spectral plane. Either real with ``|beta|`` not in
    ``{0, 1}`` or unimodular.
    """
    value    : complex
    location : Location

    def __post_init__(self):
        value = complex(self.value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise ValidationError("Bad spectral point: %s" % (self.value,))
        if self.location is Location.REAL_LINE:
            if value.imag != 0.0:
                raise ValidationError(
                    "Real line point with an imaginary part: %s" % (value,)
                )
            if value == 0.0 or abs(abs(value) - 1.0) <= UNIT_TOL:
                raise ValidationError(
                    "Real line point at 0 or on the unit circle: %s" % (value,)
                )
        elif self.location is Location.UNIT_CIRCLE:
            if abs(abs(value) - 1.0) > UNIT_TOL:
                raise ValidationError(
                    "Unit circle point off the circle: %s" % (value,)
                )
        else:
            raise ValidationError("Bad location: %s" % (self.location,))
        object.__setattr__(self, 'value', value)


    @classmethod
    def on_circle(cls, theta : float) -> 'SpectralPoint':
        """
        :param theta: The angle of the point.
        """
        return cls(cmath.exp(1j * theta), Location.UNIT_CIRCLE)


    @classmethod
    def on_line(cls, x : float) -> 'SpectralPoint':
        """
        :param x: The real value of the point.
        """
        return cls(complex(x), Location.REAL_LINE)


    @property
    def inverse(self) -> 'SpectralPoint':
        """
        The point ``1/beta``, which lives in the same place.
        """
        return SpectralPoint(1.0 / self.value, self.location)


    @property
    def sign(self) -> int:
        """
        The sign ``s(beta)``: ``+1`` outside the unit disk and ``-1`` inside.
        Circle points get ``+1``.
        """
        return -1 if abs(self.value) < 1.0 else 1


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Collocation and quadrature nodes: a symmetric midpoint grid on the unit
    circle and an optional set of real nodes.

    Node indices run over the circle nodes first and then the line nodes. The
    `inversion_map` pairs every index with the index of its inverse node, or
    `NO_INVERSE`.
    """
    circle_nodes  : numpy.ndarray
    circle_weight : float
    line_nodes    : numpy.ndarray
    inversion_map : numpy.ndarray

    @property
    def circle_count(self) -> int:
        return len(self.circle_nodes)


    @property
    def circle_points(self) -> numpy.ndarray:
        """
        The circle nodes as unimodular complex numbers.
        """
        return numpy.exp(1j * self.circle_nodes)


    @property
    def size(self) -> int:
        return len(self.circle_nodes) + len(self.line_nodes)


    def inverse_of(self, index : int) -> int:
        """
        :param index: A node index.
        :return: The index of the inverse node, or `NO_INVERSE`.
        """
        return int(self.inversion_map[index])


def build_grid(circle_count : int,
               line_points  : Sequence[float] = ()) -> Grid:
    """
    Build the grid used for collocation and quadrature.

    :param circle_count: The number of circle nodes, even and at least 4.
    :param line_points:  The real nodes, if any.
    """
    if int(circle_count) != circle_count or circle_count < 4 or circle_count % 2:
        raise ValidationError("Bad circle count: %s" % (circle_count,))
    count = int(circle_count)
    step  = 2.0 * math.pi / count

    # The midpoint grid; it avoids 0 and pi and is symmetric under negation
    angles = -math.pi + (numpy.arange(count) + 0.5) * step

    line = numpy.array([float(x) for x in line_points], dtype=numpy.float64)
    for x in line:
        if not math.isfinite(x) or x == 0.0 or abs(abs(x) - 1.0) <= UNIT_TOL:
            raise ValidationError("Bad line node: %s" % (x,))
    if len(numpy.unique(line)) != len(line):
        raise ValidationError("Duplicate line nodes: %s" % (list(line),))

    # Circle node j is the conjugate of node count-1-j, and real nodes pair up
    # only when both halves were supplied
    inversion = numpy.full(count + len(line), NO_INVERSE, dtype=int)
    inversion[:count] = numpy.arange(count)[::-1]
    for (i, x) in enumerate(line):
        matches = numpy.nonzero(numpy.abs(line * x - 1.0) <= 1e-12)[0]
        if len(matches):
            inversion[count + i] = count + int(matches[0])

    logging.debug(f'Built a grid with {count} circle and {len(line)} line nodes')
    return Grid(circle_nodes  = angles,
                circle_weight = step,
                line_nodes    = line,
                inversion_map = inversion)

# ----------------------------------------------------------------------

def joukowski(z : complex) -> complex:
    """
    :return: ``z + 1/z``.
    """
    z = complex(z)
    if z == 0:
        raise ValidationError("The Joukowski map is undefined at z = 0")
    return z + 1.0 / z


def inverse_joukowski(lam    : complex,
                      branch : Branch) -> complex:
    """
    Solve ``z + 1/z = lam`` for ``z``.

    On the cut ``(-2, 2)`` both roots are unimodular; there the inside branch
    gives the one with positive imaginary part and the outside branch its
    conjugate.

    :param lam:    The spectral parameter.
    :param branch: Which root to return.
    """
    lam = complex(lam)
    if lam.imag == 0.0 and abs(lam.real) <= 2.0:
        x = lam.real / 2.0
        y = math.sqrt(max(0.0, 1.0 - x * x))
        return complex(x, y) if branch is Branch.INSIDE_DISK else complex(x, -y)

    # Take the big root directly and the small one as its reciprocal, which
    # keeps the small one accurate
    root  = cmath.sqrt(lam * lam - 4.0)
    big   = (lam + root) / 2.0
    other = (lam - root) / 2.0
    if abs(other) > abs(big):
        big = other
    return 1.0 / big if branch is Branch.INSIDE_DISK else big

# ----------------------------------------------------------------------

def pv_cauchy_weights(grid : Grid,
                      beta : Union[SpectralPoint, complex]) -> numpy.ndarray:
    """
    Quadrature weights ``w_j`` so that ``sum_j w_j f(exp(i theta_j))`` gives
    the principal value of the integral of ``f(exp(i theta)) / (1 - exp(-i
    theta) / beta)`` over the circle.

    For a point on the circle whose singular angle ``-arg(beta)`` is a node,
    the nodes at even offsets from it are dropped (they cancel in symmetric
    pairs) and the odd ones get twice the trapezoid weight. When the singular
    angle falls midway between two nodes the plain trapezoid rule applies.

    :param grid: The grid whose circle nodes are used.
    :param beta: The collocation point.
    """
    if isinstance(beta, SpectralPoint):
        value    = beta.value
        on_line  = beta.location is Location.REAL_LINE
    else:
        value    = complex(beta)
        on_line  = abs(abs(value) - 1.0) > UNIT_TOL
    if value == 0:
        raise ValidationError("Bad collocation point: %s" % (value,))

    step  = grid.circle_weight
    count = grid.circle_count
    denom = 1.0 - numpy.exp(-1j * grid.circle_nodes) / value
    if on_line:
        return step / denom

    # Where the singular angle sits, in units of the node spacing
    singular = -cmath.phase(value)
    offset   = ((singular - grid.circle_nodes[0]) / step) % count
    nearest  = round(offset)
    if abs(offset - nearest) <= 1e-9:
        centre  = int(nearest) % count
        odd     = ((numpy.arange(count) - centre) % 2) == 1
        weights = numpy.zeros(count, dtype=numpy.complex128)
        weights[odd] = 2.0 * step / denom[odd]
        return weights
    elif abs(offset - math.floor(offset) - 0.5) <= 1e-9:
        return step / denom
    else:
        raise ValidationError(
            "Singular angle of %s is neither a node nor a midpoint" % (value,)
        )

# ----------------------------------------------------------------------

def trig_interpolate(angles  : Sequence[float],
                     values  : Sequence[complex],
                     targets : Sequence[float]) -> numpy.ndarray:
    """
    Trigonometric interpolation of equispaced periodic samples.

    :param angles:  The sample angles, equispaced over one period.
    :param values:  The samples.
    :param targets: The angles to evaluate at.
    """
    angles  = numpy.asarray(angles,  dtype=numpy.float64)
    values  = numpy.asarray(values,  dtype=numpy.complex128)
    targets = numpy.asarray(targets, dtype=numpy.float64)
    count   = len(angles)
    if count == 0 or len(values) != count:
        raise ValidationError(
            "Bad samples: %d angles and %d values" % (count, len(values))
        )
    step = 2.0 * math.pi / count
    gaps = numpy.diff(angles)
    if count > 1 and numpy.max(numpy.abs(gaps - step)) > 1e-9:
        raise ValidationError("Circle samples are not equispaced")

    coeffs = numpy.fft.fft(values) / count
    freqs  = numpy.fft.fftfreq(count, 1.0 / count)
    phase  = targets[:, None] - angles[0]
    if count % 2 == 0:
        # Split the Nyquist term evenly between +count/2 and -count/2
        nyquist = count // 2
        regular = numpy.abs(freqs) != nyquist
        result  = numpy.exp(1j * phase * freqs[None, regular]) @ coeffs[regular]
        result += coeffs[nyquist] * numpy.cos(nyquist * phase[:, 0])
        return result
    return numpy.exp(1j * phase * freqs[None, :]) @ coeffs

# ----------------------------------------------------------------------

@dataclass(eq=False)
class DenseSystem:
    """
    A square linear system ``matrix @ x = rhs``. The condition estimate is
    filled in when the system is solved.
    """
    matrix             : numpy.ndarray
    rhs                : numpy.ndarray
    condition_estimate : Optional[float] = None

    def __post_init__(self):
        self.matrix = numpy.asarray(self.matrix, dtype=numpy.complex128)
        self.rhs    = numpy.asarray(self.rhs,    dtype=numpy.complex128)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValidationError("Matrix is not square: %s" % (self.matrix.shape,))
        if self.rhs.shape != (self.matrix.shape[0],):
            raise ValidationError(
                "Bad right-hand side shape: %s" % (self.rhs.shape,)
            )
        if not numpy.all(numpy.isfinite(self.matrix)):
            raise ValidationError("Matrix has non-finite entries")


class Factorization():
    """
    An LU factorisation with partial pivoting, plus a 1-norm condition
    estimate. Refuses matrices with a pivot below `SINGULAR_PIVOT` times the
    matrix norm.
    """
    def __init__(self, matrix : numpy.ndarray):
        """
        :param matrix: The square matrix to factorise.
        """
        matrix = numpy.asarray(matrix, dtype=numpy.complex128)
        self._size = matrix.shape[0]
        self._norm = float(numpy.linalg.norm(matrix, 1)) if self._size else 0.0
        if self._size == 0:
            self._lu        = None
            self._condition = 1.0
            return

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
            (lu, piv) = scipy.linalg.lu_factor(matrix, check_finite=True)
        smallest = float(numpy.min(numpy.abs(numpy.diag(lu))))
        if self._norm == 0.0 or smallest < SINGULAR_PIVOT * self._norm:
            raise SingularSystemError(
                "Singular matrix: pivot %g against norm %g" % (smallest, self._norm)
            )
        self._lu = (lu, piv)

        (gecon,) = scipy.linalg.get_lapack_funcs(('gecon',), (lu,))
        (rcond, info) = gecon(lu, self._norm, norm='1')
        self._condition = math.inf if rcond == 0.0 else 1.0 / rcond


    @property
    def condition(self) -> float:
        """
        The estimated 1-norm condition number.
        """
        return self._condition


    @property
    def norm(self) -> float:
        return self._norm


    def solve(self, rhs : numpy.ndarray) -> numpy.ndarray:
        """
        :param rhs: A right-hand side vector, or a matrix of them.
        """
        rhs = numpy.asarray(rhs, dtype=numpy.complex128)
        if self._lu is None:
            return rhs.copy()
        return scipy.linalg.lu_solve(self._lu, rhs)


def solve_dense(system : DenseSystem) -> numpy.ndarray:
    """
    Solve the system, populating its condition estimate.

    :param system: The system to solve.
    """
    factor = Factorization(system.matrix)
    system.condition_estimate = factor.condition
    solution = factor.solve(system.rhs)

    if len(solution):
        residual = numpy.linalg.norm(system.matrix @ solution - system.rhs)
        bound    = 1e-10 * numpy.linalg.norm(system.rhs) * factor.condition
        if residual > bound:
            logging.warning(
                f'Solve residual {residual:g} exceeds {bound:g} '
                f'(condition {factor.condition:g})'
            )
    return solution

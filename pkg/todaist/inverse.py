"""
The inverse problem engine.

Everything here works on collocation nodes ``beta``. They are the circle grid
nodes (when the data have a circle channel), the grid's line nodes (when the
data have a line channel) and the point masses. Each node carries a moment
weight ``mu``: ``s w`` for masses and line nodes, and ``(2/M) r^`` for circle
nodes. With these weights

- ``P^ u = sum(beta mu u)`` is the unnormalised projector moment,
- ``g(k, z) = 1 + sum(mu u / (1 - z / beta))``,
- ``khat = 1 / sum(beta mu)``,

and the Cauchy part of ``C2`` has entries ``mu_j / (1 - 1/(beta_i beta_j))``,
with principal-value weights on the circle.
"""

# ======================================================================

from   dataclasses import dataclass
from   typing      import Optional, Union
from   .           import (EXP_GUARD, Factorization, Grid, Location,
                           NO_INVERSE, NumericalError, OverflowGuardError,
                           SingularSystemError, SpectralPoint, ValidationError,
                           pv_cauchy_weights)
from   .spectral   import ReducedSpectralData

import logging
import math
import numpy

# ======================================================================

# Kinds of collocation node
CIRCLE = 0
LINE   = 1
MASS   = 2

# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Collocation:
    """
    The collocation nodes of some data on some grid, with their moment
    weights and inverse-node indices.
    """
    nodes   : numpy.ndarray
    moments : numpy.ndarray
    kinds   : numpy.ndarray
    inverse : numpy.ndarray
    khat    : Optional[complex]

    @property
    def size(self) -> int:
        return len(self.nodes)


    def project(self, w : Union[complex, numpy.ndarray]) -> complex:
        """
        The projector ``P w = khat P^ w``. Without a normaliser only constant
        functions can be projected, to themselves.

        :param w: Values at the nodes, or a constant.
        """
        w = numpy.asarray(w, dtype=numpy.complex128)
        if self.khat is None and w.ndim == 0:
            return complex(w)
        w = numpy.broadcast_to(w, (self.size,))
        if self.khat is None:
            if self.size == 0:
                raise ValidationError("Projector of free data needs a constant")
            if numpy.max(numpy.abs(w - w[0])) > 1e-12 * max(1.0, abs(w[0])):
                raise ValidationError("Projector is undefined for these data")
            return complex(w[0])
        return complex(self.khat * numpy.sum(self.nodes * self.moments * w))


def collocation(data : ReducedSpectralData,
                grid : Optional[Grid]) -> Collocation:
    """
    :param data: The reduced spectral data.
    :param grid: The grid; may be None for data with only point masses.
    """
    nodes   = []
    moments = []
    kinds   = []
    inverse = []

    if data.has_circle or len(data.line_nodes):
        if grid is None:
            raise ValidationError("Data with circle or line channels need a grid")

    if data.has_circle:
        count = grid.circle_count
        if (len(data.circle_angles) != count or
            numpy.max(numpy.abs(data.circle_angles - grid.circle_nodes)) > 1e-12):
            raise ValidationError("Circle density is not sampled on the grid")
        nodes  .extend(grid.circle_points)
        moments.extend((2.0 / count) * data.circle_density)
        kinds  .extend([CIRCLE] * count)
        inverse.extend(grid.inversion_map[:count])

    if len(data.line_nodes):
        if (len(data.line_nodes) != len(grid.line_nodes) or
            numpy.any(data.line_nodes != grid.line_nodes)):
            raise ValidationError("Line channel is not on the grid's line nodes")
        start  = len(nodes)
        offset = start - grid.circle_count
        signs  = numpy.where(numpy.abs(data.line_nodes) > 1.0, 1.0, -1.0)
        nodes  .extend(data.line_nodes.astype(numpy.complex128))
        moments.extend(signs * data.line_weights)
        kinds  .extend([LINE] * len(data.line_nodes))
        for i in range(len(data.line_nodes)):
            partner = grid.inverse_of(grid.circle_count + i)
            inverse.append(NO_INVERSE if partner == NO_INVERSE else partner + offset)

    for m in data.masses:
        nodes  .append(complex(m.alpha))
        moments.append(m.sign * m.weight)
        kinds  .append(MASS)
        inverse.append(NO_INVERSE)

    return Collocation(nodes   = numpy.array(nodes,   dtype=numpy.complex128),
                       moments = numpy.array(moments, dtype=numpy.complex128),
                       kinds   = numpy.array(kinds,   dtype=int),
                       inverse = numpy.array(inverse, dtype=int),
                       khat    = data.khat)

# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class C2Operator:
    """
    The dense matrix of ``C2`` on the collocation nodes.
    """
    points : Collocation
    matrix : numpy.ndarray

    @property
    def nodes(self) -> numpy.ndarray:
        return self.points.nodes


    @property
    def moments(self) -> numpy.ndarray:
        return self.points.moments


    @property
    def khat(self) -> Optional[complex]:
        return self.points.khat


    @property
    def size(self) -> int:
        return self.points.size


def assemble_c2(data : ReducedSpectralData,
                grid : Optional[Grid] = None) -> C2Operator:
    """
    Assemble ``C2`` on the collocation nodes. Row ``i`` holds

    - the swap term ``sign(beta) rho(beta)`` in the column of ``1/beta``,
    - the Cauchy kernel against every mass and line node, less the singular
      one at ``1/beta``,
    - the circle kernel ``r^ / pi`` with principal-value weights.

    :param data: The reduced spectral data.
    :param grid: The grid; may be None for data with only point masses.
    """
    points = collocation(data, grid)
    size   = points.size
    matrix = numpy.zeros((size, size), dtype=numpy.complex128)
    if size == 0:
        return C2Operator(points, matrix)

    beta     = points.nodes
    circular = points.kinds == CIRCLE
    discrete = ~circular

    # Masses and line nodes, as exact discrete terms
    if numpy.any(discrete):
        alpha    = beta[discrete]
        product  = beta[:, None] * alpha[None, :]
        singular = numpy.abs(product - 1.0) <= 1e-12
        with numpy.errstate(divide='ignore', invalid='ignore'):
            block = points.moments[discrete][None, :] / (1.0 - 1.0 / product)
        block[singular] = 0.0
        matrix[:, discrete] = block

    # The circle, by principal-value quadrature
    if numpy.any(circular):
        density = data.circle_density
        for i in range(size):
            location = (Location.UNIT_CIRCLE if points.kinds[i] == CIRCLE
                        else Location.REAL_LINE)
            weights = pv_cauchy_weights(grid, SpectralPoint(beta[i], location))
            matrix[i, circular] = weights * density / math.pi

    # The coupling between a line node and its inverse
    if len(data.line_nodes):
        lines = numpy.nonzero(points.kinds == LINE)[0]
        for (i, rho) in zip(lines, data.line_coupling):
            if rho == 0:
                continue
            partner = points.inverse[i]
            if partner == NO_INVERSE:
                raise ValidationError(
                    "Coupling at %s but its inverse is not on the grid" % beta[i].real
                )
            matrix[i, partner] += numpy.sign(beta[i].real) * rho

    logging.debug(f'Assembled C2 on {size} nodes')
    return C2Operator(points, matrix)


def projection_defect(c2 : C2Operator) -> numpy.ndarray:
    """
    The matrix ``N^-1 C2 - C2 N + P / khat``, which vanishes where the
    discrete projection identity is exact.
    """
    beta = c2.nodes
    return (c2.matrix / beta[:, None]
            - c2.matrix * beta[None, :]
            + numpy.outer(numpy.ones(c2.size), beta * c2.moments))

# ----------------------------------------------------------------------

def row_shift(c2 : C2Operator, t : float) -> numpy.ndarray:
    """
    The logarithms of the row scalings which keep ``Gamma^(k, t)`` in range:
    row ``beta`` is divided by the larger of ``|exp(beta t)|`` and
    ``|exp(t / beta)|``.
    """
    beta = c2.nodes
    forward  = (beta * t).real
    backward = (t / beta).real if len(beta) else forward
    for exponent in (forward, backward):
        if len(exponent) and numpy.max(numpy.abs(exponent)) > EXP_GUARD:
            raise OverflowGuardError(
                "t = %g puts exponents beyond %g; rescale the run" % (t, EXP_GUARD)
            )
    return numpy.maximum(forward, backward)


def gamma_matrix(c2    : C2Operator,
                 k     : int,
                 t     : float,
                 shift : numpy.ndarray = None) -> numpy.ndarray:
    """
    ``Gamma^(k, t) = diag(beta^(2(k+1)) exp(beta t)) + diag(exp(t / beta)) C2``
    with row ``i`` divided by ``exp(shift[i])``.

    :param c2:    The assembled operator.
    :param k:     The lattice site.
    :param t:     The time.
    :param shift: The row scalings; `row_shift` by default.
    """
    beta = c2.nodes
    if shift is None:
        shift = row_shift(c2, t)
    if len(beta):
        power = 2.0 * (k + 1) * numpy.log(numpy.abs(beta))
        if numpy.max(numpy.abs(power)) > EXP_GUARD:
            raise OverflowGuardError(
                "beta^(2(k+1)) overflows at k = %d; rescale the run" % k
            )
    diagonal = (beta * beta) ** (k + 1) * numpy.exp(beta * t - shift)
    coupling = numpy.exp(t / beta - shift) if len(beta) else diagonal
    return numpy.diag(diagonal) + coupling[:, None] * c2.matrix


@dataclass(frozen=True, eq=False)
class GammaSystem:
    """
    ``Gamma^(k, t) u = -1`` on the collocation nodes, in row-scaled form:
    row ``i`` of both sides is divided by ``exp(shift[i])``. At ``t = 0`` no
    scaling happens.
    """
    c2     : C2Operator
    k      : int
    t      : float
    matrix : numpy.ndarray
    rhs    : numpy.ndarray
    shift  : numpy.ndarray


def assemble_gamma(c2 : C2Operator, k : int, t : float) -> GammaSystem:
    """
    :param c2: The assembled operator.
    :param k:  The lattice site.
    :param t:  The time.
    """
    shift = row_shift(c2, t)
    return GammaSystem(c2     = c2,
                       k      = k,
                       t      = t,
                       matrix = gamma_matrix(c2, k, t, shift),
                       rhs    = -numpy.exp(-shift),
                       shift  = shift)


@dataclass(frozen=True, eq=False)
class USolution:
    """
    The solution ``u(k, beta)`` at the collocation nodes, with the moments
    the reconstruction needs: ``P^ u`` and ``P^ N^-1 u``.
    """
    k                  : int
    t                  : float
    values             : numpy.ndarray
    first_moment       : complex
    zeroth_moment      : complex
    condition_estimate : float


def factorize_gamma(system : GammaSystem) -> Factorization:
    try:
        return Factorization(system.matrix)
    except SingularSystemError as e:
        raise SingularSystemError(
            "Gamma^ not invertible for these data (k=%d, t=%g): %s" %
            (system.k, system.t, e)
        )


def solve_u(system : GammaSystem) -> USolution:
    """
    Solve ``Gamma^(k, t) u + 1 = 0``.
    """
    factor = factorize_gamma(system)
    values = factor.solve(system.rhs)
    if len(values):
        residual = numpy.linalg.norm(system.matrix @ values - system.rhs)
        bound    = 1e-10 * factor.condition * numpy.linalg.norm(system.rhs)
        if residual > bound:
            logging.warning(f'Residual {residual:g} at k={system.k} t={system.t:g}')

    points = system.c2.points
    return USolution(k                  = system.k,
                     t                  = system.t,
                     values             = values,
                     first_moment       = complex(numpy.sum(points.nodes * points.moments * values)),
                     zeroth_moment      = complex(numpy.sum(points.moments * values)),
                     condition_estimate = factor.condition)

# ----------------------------------------------------------------------

def projector_apply(data : ReducedSpectralData,
                    grid : Optional[Grid],
                    w    : Union[complex, numpy.ndarray]) -> complex:
    """
    ``P w``, with ``w`` given at the collocation nodes of the data.
    """
    return collocation(data, grid).project(w)


def g_function(u    : USolution,
               data : ReducedSpectralData,
               grid : Optional[Grid],
               z    : complex) -> complex:
    """
    ``g(k, z) = 1 + sum(mu u / (1 - z / beta))``.
    """
    points = collocation(data, grid)
    if len(u.values) != points.size:
        raise ValidationError(
            "Solution has %d values for %d nodes" % (len(u.values), points.size)
        )
    if points.size == 0:
        return 1.0 + 0j
    kernel = 1.0 - complex(z) / points.nodes
    if numpy.min(numpy.abs(kernel)) < 1e-8:
        logging.warning(f'g({u.k}, {z}) is evaluated next to a kernel pole')
    return complex(1.0 + numpy.sum(points.moments * u.values / kernel))


def reconstruct_b2(u_k : USolution, u_km1 : USolution) -> float:
    """
    ``b[k-1]^2 = g(k, 0) / g(k-1, 0)``, from the moments.
    """
    if u_k.k != u_km1.k + 1 or u_k.t != u_km1.t:
        raise ValidationError(
            "Need solutions at sites k and k-1 at one time, not %d@%g and %d@%g" %
            (u_k.k, u_k.t, u_km1.k, u_km1.t)
        )
    ratio = (1.0 + u_k.zeroth_moment) / (1.0 + u_km1.zeroth_moment)
    if abs(ratio.imag) > 1e-10 * abs(ratio) or ratio.real <= 0.0:
        raise NumericalError(
            "Non-positive b^2 = %s at k=%d; invalid or ill-conditioned data" %
            (ratio, u_km1.k)
        )
    return ratio.real


def reconstruct_a(u_k : USolution, u_kp1 : USolution) -> float:
    """
    ``a[k] = P^ u[k+1] - P^ u[k]``, the limit of ``z (g(k, z) - g(k+1, z))``
    for large ``z``.
    """
    if u_kp1.k != u_k.k + 1 or u_k.t != u_kp1.t:
        raise ValidationError(
            "Need solutions at sites k and k+1 at one time, not %d@%g and %d@%g" %
            (u_k.k, u_k.t, u_kp1.k, u_kp1.t)
        )
    a = u_kp1.first_moment - u_k.first_moment
    if abs(a.imag) > 1e-8:
        raise NumericalError("a[%d] = %s is not real; inconsistent data" % (u_k.k, a))
    return a.real

"""
A finite-dimensional bench for the operator identities behind the solution
formula.

Families ``x(k, t)`` of square matrices stand in for elements of the operator
ring. The shift ``alpha`` moves ``k`` on by one, and ``d`` is the time
derivative. Every derivative here is taken analytically from the closed form
of the Gamma family, never by finite differences, so a residual measures
algebra and round-off only.
"""

# ======================================================================

from   dataclasses import dataclass
from   typing      import Callable, Sequence, Tuple
from   .           import (ConvergenceError, SingularSystemError,
                           ValidationError)
from   .inverse    import assemble_c2
from   .spectral   import reflectionless_data

import logging
import numpy

# ======================================================================

# Instances whose Gamma is worse conditioned than this are redrawn
CONDITION_LIMIT = 1e3

# The largest condition number a check will accept at all
CONDITION_CEILING = 1e12

# ----------------------------------------------------------------------

class RingFamily():
    """
    A square matrix depending on ``(k, t)``.
    """
    def __init__(self,
                 func : Callable[[int, float], numpy.ndarray],
                 dim  : int):
        """
        :param func: Gives the matrix at ``(k, t)``.
        :param dim:  The matrix dimension.
        """
        if dim < 1:
            raise ValidationError("Bad dimension: %s" % (dim,))
        self._func = func
        self._dim  = int(dim)


    @classmethod
    def constant(cls, matrix : numpy.ndarray) -> 'RingFamily':
        matrix = numpy.array(matrix, dtype=numpy.complex128)
        return cls(lambda k, t: matrix, matrix.shape[0])


    @property
    def dim(self) -> int:
        return self._dim


    def __call__(self, k : int, t : float) -> numpy.ndarray:
        value = numpy.asarray(self._func(k, t), dtype=numpy.complex128)
        if value.shape != (self._dim, self._dim):
            raise ValidationError("Family gave a %s matrix" % (value.shape,))
        return value


    def _check(self, other : 'RingFamily') -> None:
        if other.dim != self._dim:
            raise ValidationError("Dimensions %d and %d differ" % (self._dim, other.dim))


    def __mul__(self, other : 'RingFamily') -> 'RingFamily':
        self._check(other)
        return RingFamily(lambda k, t: self(k, t) @ other(k, t), self._dim)


    def __add__(self, other : 'RingFamily') -> 'RingFamily':
        self._check(other)
        return RingFamily(lambda k, t: self(k, t) + other(k, t), self._dim)


    def __sub__(self, other : 'RingFamily') -> 'RingFamily':
        self._check(other)
        return RingFamily(lambda k, t: self(k, t) - other(k, t), self._dim)


def shift_alpha(x : RingFamily, steps : int = 1) -> RingFamily:
    """
    ``alpha(x)(k, t) = x(k+1, t)``, or the given number of shifts.
    """
    return RingFamily(lambda k, t: x(k + steps, t), x.dim)


def partial_alpha(x : RingFamily) -> RingFamily:
    """
    ``alpha - I``.
    """
    return shift_alpha(x) - x

# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiniteGammaFamily:
    """
    ``Gamma(k, t) = N^(k+2) exp(N t) + N^-k exp(t / N) C`` with ``N`` the
    diagonal matrix of ``betas``.
    """
    betas    : numpy.ndarray
    coupling : numpy.ndarray

    def __post_init__(self):
        betas    = numpy.array(self.betas,    dtype=numpy.complex128)
        coupling = numpy.array(self.coupling, dtype=numpy.complex128)
        if betas.ndim != 1 or coupling.shape != (len(betas), len(betas)):
            raise ValidationError("Bad family shapes: %s and %s" % (betas.shape, coupling.shape))
        if len(betas) == 0 or numpy.any(betas == 0):
            raise ValidationError("N must be invertible")
        if len(numpy.unique(betas)) != len(betas):
            raise ValidationError("The entries of N must be distinct")
        object.__setattr__(self, 'betas',    betas)
        object.__setattr__(self, 'coupling', coupling)


    @property
    def dim(self) -> int:
        return len(self.betas)


    def gamma(self, k : int, t : float, order : int = 0) -> numpy.ndarray:
        """
        The ``order``-th time derivative of ``Gamma(k, t)``, in closed form:
        ``N^(k+2+order) exp(N t) + N^-(k+order) exp(t / N) C``.
        """
        beta = self.betas
        return (numpy.diag(beta ** (k + 2 + order) * numpy.exp(beta * t))
                + (beta ** (-k - order) * numpy.exp(t / beta))[:, None] * self.coupling)


    @property
    def family(self) -> RingFamily:
        return RingFamily(self.gamma, self.dim)


    @property
    def spectral_multiplier(self) -> numpy.ndarray:
        """
        ``A = diag(beta + 1/beta)``.
        """
        return numpy.diag(self.betas + 1.0 / self.betas)


    def condition(self, k : int, t : float) -> float:
        """
        The 1-norm condition number of ``Gamma(k, t)``.
        """
        return float(numpy.linalg.cond(self.gamma(k, t), 1))


    def require_invertible(self, ks : Sequence[int], t : float) -> None:
        for k in ks:
            cond = self.condition(k, t)
            if not cond < CONDITION_CEILING:
                raise SingularSystemError(
                    "Gamma(%d, %g) has condition %g" % (k, t, cond)
                )

# ----------------------------------------------------------------------

def _relative(defect : numpy.ndarray, *terms : numpy.ndarray) -> float:
    scale = max(numpy.linalg.norm(term) for term in terms)
    return float(numpy.linalg.norm(defect) / max(scale, 1e-300))


def check_gamma_odes(fam : FiniteGammaFamily,
                     k   : int,
                     t   : float) -> Tuple[float, float]:
    """
    The relative residuals of ``d Gamma = alpha(Gamma)`` and ``d^2 Gamma +
    Gamma = A alpha(Gamma)``.
    """
    gamma   = fam.gamma(k, t)
    shifted = shift_alpha(fam.family)(k, t)
    d1      = fam.gamma(k, t, 1)
    d2      = fam.gamma(k, t, 2)
    rhs     = fam.spectral_multiplier @ shifted
    return (_relative(d1 - shifted, d1, shifted),
            _relative(d2 + gamma - rhs, d2, gamma, rhs))


class _Gammas():
    """
    ``gamma = Gamma^-1 d Gamma`` and its first two time derivatives at one
    ``(k, t)``:

        d gamma   = G2 - gamma^2
        d^2 gamma = G3 - gamma G2 - d gamma gamma - gamma d gamma

    with ``Gn = Gamma^-1 d^n Gamma``.
    """
    def __init__(self, fam : FiniteGammaFamily, k : int, t : float):
        gamma = fam.gamma(k, t)
        (g1, g2, g3) = (numpy.linalg.solve(gamma, fam.gamma(k, t, n)) for n in (1, 2, 3))
        self.value  = g1
        self.d1     = g2 - g1 @ g1
        self.d2     = g3 - g1 @ g2 - self.d1 @ g1 - g1 @ self.d1


def _gammas(fam : FiniteGammaFamily, k : int, t : float) -> _Gammas:
    fam.require_invertible((k, k + 1), t)
    return _Gammas(fam, k, t)


def check_ring_toda(fam : FiniteGammaFamily, k : int, t : float) -> float:
    """
    The relative residual of ``d(gamma^-1 d gamma) = gamma^-1 alpha(gamma) -
    alpha^-1(gamma^-1) gamma``.
    """
    (here, up, down) = (_gammas(fam, k + s, t) for s in (0, 1, -1))
    inv  = numpy.linalg.inv(here.value)
    lhs  = inv @ here.d2 - inv @ here.d1 @ inv @ here.d1
    ahead  = inv @ up.value
    behind = numpy.linalg.solve(down.value, here.value)
    return _relative(lhs - (ahead - behind), lhs, ahead, behind)


def check_first_relation(fam : FiniteGammaFamily, k : int, t : float) -> float:
    """
    The relative residual of ``d gamma = gamma d_alpha(gamma)``.
    """
    (here, up) = (_gammas(fam, k + s, t) for s in (0, 1))
    rhs = here.value @ (up.value - here.value)
    return _relative(here.d1 - rhs, here.d1, rhs)


def check_group_invariance(fam : FiniteGammaFamily, k : int, t : float) -> float:
    """
    How much the defect of `check_ring_toda` changes when ``gamma`` is replaced
    by ``N^-1 gamma``, relative to the size of its terms.
    """
    n_inv = numpy.diag(1.0 / fam.betas)

    def defect(transform):
        (here, up, down) = (_gammas(fam, k + s, t) for s in (0, 1, -1))
        (g, d1, d2) = (transform @ here.value, transform @ here.d1, transform @ here.d2)
        inv    = numpy.linalg.inv(g)
        lhs    = inv @ d2 - inv @ d1 @ inv @ d1
        ahead  = inv @ (transform @ up.value)
        behind = numpy.linalg.solve(transform @ down.value, g)
        return (lhs - (ahead - behind), max(numpy.linalg.norm(m) for m in (lhs, ahead, behind)))

    (plain, scale)  = defect(numpy.eye(fam.dim))
    (scaled, _)     = defect(n_inv)
    return float(numpy.linalg.norm(plain - scaled) / max(scale, 1e-300))


def check_projection(fam       : FiniteGammaFamily,
                     projector : numpy.ndarray,
                     k         : int,
                     t         : float) -> Tuple[float, float]:
    """
    For a rank-one projector ``P = 1 p^T``, the relative residuals of

    - the projection condition ``P N^-1 gamma = P N^-1 gamma P``, and
    - the scalar Toda relation ``(z^-1 z')' = z(k)^-1 z(k+1) - z(k-1)^-1 z(k)``
      for ``z(k, t) = p^T N^-1 gamma(k, t) 1``.

    :param fam:       The family.
    :param projector: The row ``p``, with ``p^T 1 = 1``.
    :param k:         The site.
    :param t:         The time.
    """
    p = numpy.asarray(projector, dtype=numpy.complex128)
    if p.shape != (fam.dim,) or abs(numpy.sum(p) - 1.0) > 1e-12:
        raise ValidationError("The projector row must sum to one")
    P     = numpy.outer(numpy.ones(fam.dim), p)
    n_inv = 1.0 / fam.betas

    here  = _gammas(fam, k, t)
    left  = P @ (n_inv[:, None] * here.value)
    first = _relative(left - left @ P, left)

    def z(m, order=0):
        g = _gammas(fam, m, t)
        value = (g.value, g.d1, g.d2)[order]
        return p @ (n_inv[:, None] * value) @ numpy.ones(fam.dim)

    (z0, z1, z2) = (z(k), z(k, 1), z(k, 2))
    lhs    = z2 / z0 - (z1 / z0) ** 2
    ahead  = z(k + 1) / z0
    behind = z0 / z(k - 1)
    second = abs(lhs - (ahead - behind)) / max(abs(lhs), abs(ahead), abs(behind), 1e-300)
    return (first, float(second))

# ----------------------------------------------------------------------

def cauchy_family(masses : Sequence[Tuple[float, float]]) -> Tuple[FiniteGammaFamily, numpy.ndarray]:
    """
    The family which the inverse problem builds for reflectionless data,
    together with its projector row ``khat beta mu``.

    :param masses: The ``(alpha, weight)`` point masses.
    """
    data = reflectionless_data(masses)
    if not data.masses:
        raise ValidationError("A Cauchy family needs at least one mass")
    c2 = assemble_c2(data)
    return (FiniteGammaFamily(c2.nodes, c2.matrix),
            c2.khat * c2.nodes * c2.moments)


Band = Tuple[float, float]

INSIDE_BAND  = (0.3, 0.9)
OUTSIDE_BAND = (1.1, 3.0)


def _magnitudes(rng     : numpy.random.Generator,
                count   : int,
                inside  : Band = INSIDE_BAND,
                outside : Band = OUTSIDE_BAND) -> numpy.ndarray:
    return numpy.where(rng.random(count) < 0.5,
                       rng.uniform(*inside,  count),
                       rng.uniform(*outside, count))


def random_masses(rng      : numpy.random.Generator,
                  count    : int,
                  inside   : Band = INSIDE_BAND,
                  outside  : Band = OUTSIDE_BAND,
                  attempts : int  = 1000) -> Sequence[Tuple[float, float]]:
    """
    Admissible point masses: distinct, well apart, and free of near-inverse
    pairs.

    :param rng:      The random source.
    :param count:    How many masses.
    :param inside:   The band of ``|alpha|`` inside the unit disk.
    :param outside:  The band of ``|alpha|`` outside it.
    :param attempts: How many draws to make before giving up.
    """
    for _ in range(attempts):
        alphas = _magnitudes(rng, count, inside, outside) * rng.choice((-1.0, 1.0), count)
        if all(abs(a - b) > 0.2 and abs(a * b - 1.0) > 0.2
               for (i, a) in enumerate(alphas) for b in alphas[i + 1:]):
            weights = rng.uniform(0.5, 2.0, count)
            return [(float(a), float(w)) for (a, w) in zip(alphas, weights)]
    raise ConvergenceError("Could not draw %d admissible masses" % count)


def random_family(rng      : numpy.random.Generator,
                  dim      : int,
                  k        : int   = 0,
                  t        : float = 0.0,
                  attempts : int   = 1000) -> FiniteGammaFamily:
    """
    A random family with ``|beta|`` in ``[0.3, 0.9]`` or ``[1.1, 3]`` and
    ``||C|| <= 1``, redrawn until ``Gamma`` is well conditioned at every shift
    the checks touch around ``(k, t)``.
    """
    for _ in range(attempts):
        betas = _magnitudes(rng, dim) * rng.choice((-1.0, 1.0), dim)
        raw   = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        norm  = numpy.linalg.norm(raw, 2)
        fam   = FiniteGammaFamily(betas, raw * rng.uniform(0.1, 1.0) / norm)
        if len(numpy.unique(betas)) == dim and all(
            fam.condition(k + s, t) < CONDITION_LIMIT for s in range(-1, 4)
        ):
            return fam
    raise ConvergenceError("Could not draw a well-conditioned family")


@dataclass(frozen=True)
class SuiteResult:
    gamma_odes     : float
    first_relation : float
    ring_toda      : float
    group          : float
    projection     : float
    scalar_toda    : float
    identity       : float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def operator_suite(seed      : int,
                   count     : int = 100,
                   max_dim   : int = 8) -> SuiteResult:
    """
    The largest residuals over a seeded sweep of random instances.

    :param seed:    The sweep's seed.
    :param count:   The number of instances.
    :param max_dim: The largest matrix dimension.
    """
    rng   = numpy.random.default_rng(seed)
    worst = dict.fromkeys(SuiteResult.__dataclass_fields__, 0.0)
    for i in range(count):
        dim = int(rng.integers(1, max_dim + 1))
        t   = float(rng.uniform(0.0, 0.5))
        fam = random_family(rng, dim, 0, t)
        worst['gamma_odes']     = max(worst['gamma_odes'], *check_gamma_odes(fam, 0, t))
        worst['first_relation'] = max(worst['first_relation'], check_first_relation(fam, 0, t))
        worst['ring_toda']      = max(worst['ring_toda'], check_ring_toda(fam, 0, t))
        worst['group']          = max(worst['group'], check_group_invariance(fam, 0, t))

        masses = random_masses(rng, int(rng.integers(1, min(max_dim, 5) + 1)))
        (cauchy, p) = cauchy_family(masses)
        (projection, scalar) = check_projection(cauchy, p, 0, t)
        worst['projection']  = max(worst['projection'], projection)
        worst['scalar_toda'] = max(worst['scalar_toda'], scalar)

        c2 = assemble_c2(reflectionless_data(masses))
        defect = numpy.max(numpy.abs(
            c2.matrix / c2.nodes[:, None] - c2.matrix * c2.nodes[None, :]
            + numpy.outer(numpy.ones(c2.size), p / c2.khat)
        ))
        scale = numpy.max(numpy.abs(c2.matrix)) * numpy.max(numpy.abs(c2.nodes))
        worst['identity'] = max(worst['identity'], float(defect / scale))
    logging.info(f'Operator suite over {count} instances: {worst}')
    return SuiteResult(**worst)

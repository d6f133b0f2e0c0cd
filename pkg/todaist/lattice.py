"""
The Toda lattice itself: states on a finite window, direct integration of the
equations of motion, the Flaschka map onto Jacobi coefficients and the affine
rescaling of the spectrum onto ``[-2, 2]``.

The integrator is the ground truth which the inverse spectral machinery is
checked against.
"""

# ======================================================================

from   dataclasses import dataclass, field, replace
from   enum        import Enum
from   typing      import Optional, Sequence, Tuple
from   .           import EXP_GUARD, OverflowGuardError, ValidationError

import csv
import logging
import math
import numpy
import scipy.linalg

# ======================================================================

class BoundaryKind(Enum):
    FREE_ENDS         = 'free'
    FROZEN_BACKGROUND = 'frozen'


@dataclass(frozen=True)
class Boundary:
    """
    How the window is extended past its end sites.

    ``FREE_ENDS`` means nothing pulls on the end sites from outside. A
    ``FROZEN_BACKGROUND`` holds a ghost site beyond each end on the declared
    asymptotic linear profile, so the end bonds see ``exp(slope)``.
    """
    kind        : BoundaryKind = BoundaryKind.FROZEN_BACKGROUND
    left_slope  : float        = 0.0
    right_slope : float        = 0.0

    @classmethod
    def free_ends(cls) -> 'Boundary':
        return cls(BoundaryKind.FREE_ENDS)


    @classmethod
    def frozen(cls, left : float = 0.0, right : float = None) -> 'Boundary':
        """
        :param left:  The slope of the profile left of the window.
        :param right: The slope right of it; the same as ``left`` if not given.
        """
        return cls(BoundaryKind.FROZEN_BACKGROUND,
                   float(left),
                   float(left if right is None else right))


    def end_forces(self) -> Tuple[float, float]:
        """
        :return: The bond forces which the outside exerts on the two ends.
        """
        if self.kind is BoundaryKind.FREE_ENDS:
            return (0.0, 0.0)
        for slope in (self.left_slope, self.right_slope):
            if slope > EXP_GUARD:
                raise OverflowGuardError("Background slope too steep: %g" % slope)
        return (math.exp(self.left_slope), math.exp(self.right_slope))


@dataclass(frozen=True, eq=False)
class LatticeState:
    """
    Positions and velocities on the sites ``k_min..k_max``.
    """
    k_min      : int
    k_max      : int
    positions  : numpy.ndarray
    velocities : numpy.ndarray
    boundary   : Boundary = field(default_factory=Boundary)

    def __post_init__(self):
        if int(self.k_min) != self.k_min or int(self.k_max) != self.k_max:
            raise ValidationError("Bad window: [%s, %s]" % (self.k_min, self.k_max))
        if self.k_min >= self.k_max:
            raise ValidationError("Empty window: [%d, %d]" % (self.k_min, self.k_max))
        size = self.k_max - self.k_min + 1
        positions  = numpy.array(self.positions,  dtype=numpy.float64)
        velocities = numpy.array(self.velocities, dtype=numpy.float64)
        if positions.shape != (size,) or velocities.shape != (size,):
            raise ValidationError(
                "Window of %d sites with %d positions and %d velocities" %
                (size, len(positions), len(velocities))
            )
        object.__setattr__(self, 'positions',  positions)
        object.__setattr__(self, 'velocities', velocities)


    @property
    def sites(self) -> numpy.ndarray:
        return numpy.arange(self.k_min, self.k_max + 1)


    @property
    def size(self) -> int:
        return self.k_max - self.k_min + 1


@dataclass(frozen=True)
class Background:
    """
    The constant Jacobi coefficients assumed outside a window.
    """
    a : float = 0.0
    b : float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.b <= 0:
            raise ValidationError("Bad background: a=%s b=%s" % (self.a, self.b))


    @property
    def is_free(self) -> bool:
        return self.a == 0.0 and self.b == 1.0


FREE_BACKGROUND = Background()


@dataclass(frozen=True, eq=False)
class JacobiWindow:
    """
    The diagonal ``a_k`` on sites ``k_min..k_max`` and the off-diagonal
    ``b_k``, coupling sites ``k`` and ``k+1``, on the bonds ``k_min..k_max-1``.
    Coefficients outside those ranges are the background.
    """
    k_min      : int
    k_max      : int
    a          : numpy.ndarray
    b          : numpy.ndarray
    background : Background = FREE_BACKGROUND

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ValidationError("Empty window: [%d, %d]" % (self.k_min, self.k_max))
        size = self.k_max - self.k_min + 1
        a = numpy.array(self.a, dtype=numpy.float64)
        b = numpy.array(self.b, dtype=numpy.float64)
        if a.shape != (size,) or b.shape != (size - 1,):
            raise ValidationError(
                "Window of %d sites with %d diagonal and %d off-diagonal entries" %
                (size, len(a), len(b))
            )
        if not (numpy.all(numpy.isfinite(a)) and numpy.all(numpy.isfinite(b))):
            raise ValidationError("Jacobi coefficients must be finite")
        if numpy.any(b <= 0.0):
            raise ValidationError("Off-diagonal entries must be positive")
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)


    @classmethod
    def free(cls, k_min : int = -1, k_max : int = 0) -> 'JacobiWindow':
        """
        The free matrix, ``a = 0`` and ``b = 1``, on the given window.
        """
        size = k_max - k_min + 1
        return cls(k_min, k_max, numpy.zeros(size), numpy.ones(size - 1))


    def a_at(self, k : int) -> float:
        if self.k_min <= k <= self.k_max:
            return float(self.a[k - self.k_min])
        return self.background.a


    def b_at(self, k : int) -> float:
        """
        :param k: The bond between sites ``k`` and ``k+1``.
        """
        if self.k_min <= k < self.k_max:
            return float(self.b[k - self.k_min])
        return self.background.b


class Provenance(Enum):
    DIRECT_ODE       = 'direct'
    INVERSE_SPECTRAL = 'ist'


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Positions, and velocities, on the product of a site window and a strictly
    increasing list of sample times. Arrays are indexed ``[time, site]``.
    """
    k_min      : int
    k_max      : int
    times      : numpy.ndarray
    x          : numpy.ndarray
    xdot       : Optional[numpy.ndarray]
    provenance : Provenance

    def __post_init__(self):
        times = numpy.array(self.times, dtype=numpy.float64)
        x     = numpy.array(self.x,     dtype=numpy.float64)
        shape = (len(times), self.k_max - self.k_min + 1)
        if times.ndim != 1 or len(times) == 0:
            raise ValidationError("A trajectory needs at least one sample time")
        if numpy.any(numpy.diff(times) <= 0.0):
            raise ValidationError("Sample times must be strictly increasing")
        if shape[1] <= 0 or x.shape != shape:
            raise ValidationError("Bad trajectory shape: %s" % (x.shape,))
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'x',     x)
        if self.xdot is not None:
            xdot = numpy.array(self.xdot, dtype=numpy.float64)
            if xdot.shape != shape:
                raise ValidationError("Bad velocity shape: %s" % (xdot.shape,))
            object.__setattr__(self, 'xdot', xdot)


    @property
    def sites(self) -> numpy.ndarray:
        return numpy.arange(self.k_min, self.k_max + 1)


    def column(self, k : int) -> numpy.ndarray:
        """
        :return: The positions of site ``k`` over time.
        """
        if not self.k_min <= k <= self.k_max:
            raise ValidationError("Site %d is outside [%d, %d]" % (k, self.k_min, self.k_max))
        return self.x[:, k - self.k_min]


    def restrict(self, k_min : int, k_max : int) -> 'Trajectory':
        """
        The same trajectory on a sub-window.
        """
        if not self.k_min <= k_min <= k_max <= self.k_max:
            raise ValidationError(
                "Window [%d, %d] is not inside [%d, %d]" %
                (k_min, k_max, self.k_min, self.k_max)
            )
        lo = k_min - self.k_min
        hi = k_max - self.k_min + 1
        return replace(self,
                       k_min = k_min,
                       k_max = k_max,
                       x     = self.x[:, lo:hi],
                       xdot  = None if self.xdot is None else self.xdot[:, lo:hi])


    def state(self, index : int, boundary : Boundary = None) -> LatticeState:
        """
        :param index:    Which sample time.
        :param boundary: The boundary to attach; frozen and flat by default.
        """
        velocities = (numpy.zeros(self.x.shape[1]) if self.xdot is None
                      else self.xdot[index])
        return LatticeState(self.k_min,
                            self.k_max,
                            self.x[index],
                            velocities,
                            Boundary() if boundary is None else boundary)

# ----------------------------------------------------------------------

def _bond_exponentials(positions : numpy.ndarray) -> numpy.ndarray:
    diffs = numpy.diff(positions)
    if len(diffs) and numpy.max(diffs) > EXP_GUARD:
        raise OverflowGuardError(
            "Bond exponent %g exceeds %g" % (numpy.max(diffs), EXP_GUARD)
        )
    return numpy.exp(diffs)


def _accelerations(positions : numpy.ndarray,
                   forces    : Tuple[float, float]) -> numpy.ndarray:
    bonds = _bond_exponentials(positions)
    acc   = numpy.empty_like(positions)
    acc[1:-1] = bonds[1:] - bonds[:-1]
    acc[0]    = bonds[0]  - forces[0]
    acc[-1]   = forces[1] - bonds[-1]
    return acc


def toda_rhs(state : LatticeState) -> numpy.ndarray:
    """
    The accelerations ``exp(x[k+1] - x[k]) - exp(x[k] - x[k-1])`` at every
    site, the end sites taking their outer term from the boundary.

    :param state: The lattice state.
    """
    if state.size < 3:
        raise ValidationError("Window needs at least 3 sites, not %d" % state.size)
    return _accelerations(state.positions, state.boundary.end_forces())


def energy(state : LatticeState) -> float:
    """
    The regularised Hamiltonian. The bond part vanishes on the free
    background; the end terms account for the work of the boundary forces.
    """
    diffs  = numpy.diff(state.positions)
    bonds  = _bond_exponentials(state.positions)
    (f_left, f_right) = state.boundary.end_forces()
    return float(0.5 * numpy.sum(state.velocities ** 2)
                 + numpy.sum(bonds - 1.0 - diffs)
                 + (f_left  - 1.0) * state.positions[0]
                 - (f_right - 1.0) * state.positions[-1])


def _schedule(t_end : float, dt : float, stride : int) -> Tuple[int, float]:
    if not dt > 0.0:
        raise ValidationError("Bad time step: %s" % (dt,))
    if not t_end >= 0.0:
        raise ValidationError("Bad end time: %s" % (t_end,))
    if int(stride) != stride or stride < 1:
        raise ValidationError("Bad sample stride: %s" % (stride,))
    steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    return (steps, t_end / steps if steps else dt)


def sample_times(t_end  : float,
                 dt     : float,
                 stride : int = 1) -> numpy.ndarray:
    """
    The times at which `integrate` samples its trajectory.
    """
    (steps, step) = _schedule(t_end, dt, stride)
    return numpy.array([0.0] + [n * step for n in range(1, steps + 1)
                                if n % stride == 0 or n == steps])


def integrate(state  : LatticeState,
              t_end  : float,
              dt     : float,
              stride : int = 1) -> Trajectory:
    """
    Integrate the equations of motion with velocity Verlet.

    The step is shrunk slightly, if needed, so that a whole number of steps
    lands on ``t_end``. The state is sampled every ``stride`` steps, and at
    ``t_end`` itself.

    :param state:  The initial state.
    :param t_end:  How long to integrate for.
    :param dt:     The time step.
    :param stride: The number of steps between samples.
    """
    if state.size < 3:
        raise ValidationError("Window needs at least 3 sites, not %d" % state.size)

    (steps, step) = _schedule(t_end, dt, stride)
    forces = state.boundary.end_forces()
    logging.debug(
        f'Integrating {state.size} sites for {steps} steps of {step:g}'
    )

    x   = state.positions.copy()
    v   = state.velocities.copy()
    acc = _accelerations(x, forces)
    times      = [0.0]
    positions  = [x.copy()]
    velocities = [v.copy()]
    half = 0.5 * step
    for n in range(1, steps + 1):
        v   += half * acc
        x   += step * v
        acc  = _accelerations(x, forces)
        v   += half * acc
        if n % stride == 0 or n == steps:
            times     .append(n * step)
            positions .append(x.copy())
            velocities.append(v.copy())

    final = LatticeState(state.k_min, state.k_max, x, v, state.boundary)
    drift = abs(energy(final) - energy(state))
    logging.info(f'Integrated to t={t_end:g}, energy drift {drift:.3g}')
    return Trajectory(state.k_min,
                      state.k_max,
                      numpy.array(times),
                      numpy.array(positions),
                      numpy.array(velocities),
                      Provenance.DIRECT_ODE)

# ----------------------------------------------------------------------

def flaschka(state      : LatticeState,
             background : Background = None) -> JacobiWindow:
    """
    The Flaschka map: ``a[k] = xdot[k]`` and ``b[k-1] = exp((x[k] - x[k-1])/2)``.

    Without an explicit background one is derived from the boundary: free
    ends give the free background and a frozen one with equal slopes ``s``
    gives ``b = exp(s/2)`` with ``a = 0``.

    :param state:      The lattice state.
    :param background: The background to declare, if not the derived one.
    """
    if background is None:
        boundary = state.boundary
        if boundary.kind is BoundaryKind.FREE_ENDS:
            background = FREE_BACKGROUND
        elif boundary.left_slope == boundary.right_slope:
            background = Background(0.0, math.exp(boundary.left_slope / 2.0))
        else:
            raise ValidationError(
                "Unequal background slopes %g and %g need an explicit background" %
                (boundary.left_slope, boundary.right_slope)
            )
    return JacobiWindow(state.k_min,
                        state.k_max,
                        state.velocities.copy(),
                        numpy.exp(numpy.diff(state.positions) / 2.0),
                        background)


def inverse_flaschka(J        : JacobiWindow,
                     anchor   : float    = 0.0,
                     boundary : Boundary = None) -> LatticeState:
    """
    A lattice state with the given Jacobi coefficients. The map loses the
    overall offset of the positions, which ``anchor`` fixes at ``k_min``.

    :param J:        The Jacobi window.
    :param anchor:   The position of site ``k_min``.
    :param boundary: The boundary; frozen on the background by default.
    """
    positions = anchor + numpy.concatenate(([0.0], numpy.cumsum(2.0 * numpy.log(J.b))))
    if boundary is None:
        boundary = Boundary.frozen(2.0 * math.log(J.background.b))
    return LatticeState(J.k_min, J.k_max, positions, J.a.copy(), boundary)


def jacobi_eigenvalues(J : JacobiWindow) -> numpy.ndarray:
    """
    The eigenvalues of the finite tridiagonal matrix on the window, in
    ascending order.
    """
    return scipy.linalg.eigh_tridiagonal(J.a, J.b, eigvals_only=True)

# ----------------------------------------------------------------------

def _affine(a : float, b : float) -> Tuple[float, float]:
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise ValidationError("Degenerate interval: [%s, %s]" % (a, b))
    return (4.0 / (b - a), (a + b) / 2.0)


def rescale_to_standard(J : JacobiWindow,
                        a : float,
                        b : float) -> JacobiWindow:
    """
    Map a Jacobi matrix whose continuous spectrum is ``[a, b]`` onto one whose
    continuous spectrum is ``[-2, 2]``.
    """
    (scale, centre) = _affine(a, b)
    background = Background(scale * (J.background.a - centre),
                            scale * J.background.b)
    return JacobiWindow(J.k_min,
                        J.k_max,
                        scale * (J.a - centre),
                        scale * J.b,
                        background)


def rescale_state(state : LatticeState,
                  a     : float,
                  b     : float) -> LatticeState:
    """
    The initial data of the rescaled problem, whose Flaschka image is
    `rescale_to_standard` of the original one.
    """
    (scale, centre) = _affine(a, b)
    shift     = 2.0 * math.log(scale)
    positions = state.positions + shift * state.sites
    boundary  = state.boundary
    if boundary.kind is BoundaryKind.FROZEN_BACKGROUND:
        boundary = Boundary.frozen(boundary.left_slope  + shift,
                                   boundary.right_slope + shift)
    return LatticeState(state.k_min,
                        state.k_max,
                        positions,
                        scale * (state.velocities - centre),
                        boundary)


def unrescale_solution(trajectory : Trajectory,
                       a          : float,
                       b          : float,
                       times      : Sequence[float] = None) -> Trajectory:
    """
    Turn a solution of the rescaled problem back into one of the original
    problem: ``x[n](t) = x~[n](s t) + 2 n ln(s) + c t`` where ``s = (b-a)/4``
    and ``c = (a+b)/2``.

    :param trajectory: The rescaled solution, sampled in rescaled time.
    :param a:          The bottom of the original continuous spectrum.
    :param b:          The top of it.
    :param times:      Original times to sample at, by linear interpolation.
                       By default the rescaled sample times are mapped back.
    """
    (scale, centre) = _affine(a, b)
    stretch = 1.0 / scale
    sites   = trajectory.sites

    if times is None:
        times = trajectory.times / stretch
        x     = trajectory.x
        xdot  = trajectory.xdot
    else:
        times = numpy.asarray(times, dtype=numpy.float64)
        tau   = stretch * times
        slack = 1e-12 * max(1.0, abs(trajectory.times[-1]))
        if (tau.min() < trajectory.times[0]  - slack or
            tau.max() > trajectory.times[-1] + slack):
            raise ValidationError(
                "Rescaled times [%g, %g] are not covered by [%g, %g]" %
                (tau.min(), tau.max(), trajectory.times[0], trajectory.times[-1])
            )
        x = numpy.column_stack([numpy.interp(tau, trajectory.times, column)
                                for column in trajectory.x.T])
        xdot = None if trajectory.xdot is None else numpy.column_stack(
            [numpy.interp(tau, trajectory.times, column)
             for column in trajectory.xdot.T]
        )

    positions = (x + 2.0 * math.log(stretch) * sites[None, :]
                   + centre * times[:, None])
    velocities = None if xdot is None else stretch * xdot + centre
    return Trajectory(trajectory.k_min,
                      trajectory.k_max,
                      times,
                      positions,
                      velocities,
                      trajectory.provenance)

# ----------------------------------------------------------------------

_HEADER = ('t', 'k', 'x', 'xdot')


def _number(value : float) -> str:
    return '%.17g' % value


def write_trajectory(trajectory : Trajectory,
                     path       : str,
                     provenance : bool = None) -> None:
    """
    Write a trajectory as comma-separated values, one row per ``(t, k)``
    sample ordered by time and then site.

    :param trajectory: The trajectory to write.
    :param path:       Where to write it.
    :param provenance: Whether to add the provenance column; by default only
                       inverse spectral trajectories get one.
    """
    if provenance is None:
        provenance = trajectory.provenance is Provenance.INVERSE_SPECTRAL
    header = _HEADER + (('provenance',) if provenance else ())
    xdot   = (numpy.full(trajectory.x.shape, math.nan)
              if trajectory.xdot is None else trajectory.xdot)
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for (i, t) in enumerate(trajectory.times):
            for (j, k) in enumerate(trajectory.sites):
                row = [_number(t), str(k), _number(trajectory.x[i, j]), _number(xdot[i, j])]
                if provenance:
                    row.append(trajectory.provenance.value)
                writer.writerow(row)


def read_trajectory(path : str) -> Trajectory:
    """
    Read back a file written by `write_trajectory`.
    """
    with open(path, newline='') as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0][:4]) != _HEADER:
        raise ValidationError("%s is not a trajectory file" % (path,))
    body = rows[1:]
    if not body:
        raise ValidationError("%s has an empty k range" % (path,))

    times = sorted({float(row[0]) for row in body})
    sites = sorted({int(row[1])   for row in body})
    index = {t: i for (i, t) in enumerate(times)}
    x     = numpy.full((len(times), len(sites)), math.nan)
    xdot  = numpy.full((len(times), len(sites)), math.nan)
    kind  = Provenance.DIRECT_ODE
    for row in body:
        (i, j) = (index[float(row[0])], int(row[1]) - sites[0])
        x[i, j]    = float(row[2])
        xdot[i, j] = float(row[3])
        if len(row) > 4:
            kind = Provenance(row[4])
    if len(sites) != sites[-1] - sites[0] + 1 or numpy.any(numpy.isnan(x)):
        raise ValidationError("%s does not cover a full (t, k) grid" % (path,))
    return Trajectory(sites[0],
                      sites[-1],
                      numpy.array(times),
                      x,
                      None if numpy.all(numpy.isnan(xdot)) else xdot,
                      kind)

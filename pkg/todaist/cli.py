"""
The ``toda`` command: run configurations, and the runs themselves.

A run configuration is a sectioned text document read by the same reader as
spectral data files::

    [run]
    mode = compare
    [initial]
    source = masses
    masses = 2.0:3072, -1.6:0.0142
    [lattice]
    k_min = -20
    k_max = 20
    [time]
    t_end = 5
    dt = 5e-4

The modes are ``direct`` (integrate the equations of motion), ``ist`` (solve
by the inverse spectral transform), ``compare`` (both, plus a deviation
report) and ``verify`` (the operator and invariant suites).
"""

# ======================================================================

from   dataclasses import dataclass, replace
from   enum        import Enum
from   typing      import List, Optional, Tuple
from   .           import (NumericalError, ParseError, ToleranceError,
                           ValidationError, build_grid)
from   .datafile   import Entry, format_number, read_float, read_keys, read_sections
from   .evolution  import CauchyProblem, solve_cauchy
from   .lattice    import (Boundary, LatticeState, Trajectory, integrate,
                           sample_times, unrescale_solution, write_trajectory)
from   .spectral   import (FileSource, FreeSource, ReflectionlessSource,
                           SpectralSource)

import click
import csv
import logging
import math
import numpy
import os

# ======================================================================

# Exit codes
EXIT_OK         = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL  = 3
EXIT_TOLERANCE  = 4

# The standard continuous spectrum
STANDARD_INTERVAL = (-2.0, 2.0)


class Mode(Enum):
    DIRECT  = 'direct'
    IST     = 'ist'
    COMPARE = 'compare'
    VERIFY  = 'verify'


class Source(Enum):
    INLINE = 'inline'
    FILE   = 'file'
    MASSES = 'masses'

# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """
    A validated run configuration. Field names follow the document's
    ``section.key`` paths.
    """
    mode                : Mode
    seed                : int                              = 0
    instances           : int                              = 100
    source              : Optional[Source]                 = None
    positions           : Tuple[float, ...]                = ()
    velocities          : Tuple[float, ...]                = ()
    start               : Optional[int]                    = None
    anchor              : float                            = 0.0
    masses              : Tuple[Tuple[float, float], ...]  = ()
    file                : Optional[str]                    = None
    k_min               : int                              = -20
    k_max               : int                              = 20
    t_end               : float                            = 5.0
    dt                  : float                            = 1e-3
    stride              : int                              = 100
    circle_count        : int                              = 128
    line_nodes          : Tuple[float, ...]                = ()
    paths_tolerance     : float                            = 1e-8
    deviation_tolerance : float                            = 1e-5
    invariant_tolerance : float                            = 1e-7
    directory           : Optional[str]                    = None

    @property
    def inline_start(self) -> int:
        """
        The site of the first inline value.
        """
        return self.k_min if self.start is None else self.start

# ----------------------------------------------------------------------

_KEYS = {
    'run'       : ('mode', 'seed', 'instances'),
    'initial'   : ('source', 'positions', 'velocities', 'start', 'anchor', 'masses', 'file'),
    'lattice'   : ('k_min', 'k_max'),
    'time'      : ('t_end', 'dt', 'stride'),
    'grid'      : ('circle_count', 'line_nodes'),
    'tolerance' : ('paths', 'deviation', 'invariants'),
    'output'    : ('directory',),
}


def _int(entry : Entry, path : str) -> int:
    (number, value) = entry
    try:
        return int(value)
    except ValueError:
        raise ParseError("%s: not an integer: %s" % (path, value), number)


def _floats(entry : Entry, path : str) -> Tuple[float, ...]:
    (number, value) = entry
    return tuple(read_float((number, v.strip()), path)
                 for v in value.split(',') if v.strip())


def _masses(entry : Entry, path : str) -> Tuple[Tuple[float, float], ...]:
    (number, value) = entry
    result = []
    for item in (v.strip() for v in value.split(',')):
        if not item:
            continue
        (alpha, sep, weight) = item.partition(':')
        if not sep:
            raise ParseError("%s: expected alpha:weight, got %s" % (path, item), number)
        result.append((read_float((number, alpha.strip()),  path),
                       read_float((number, weight.strip()), path)))
    return tuple(result)


def _enum(kind, entry : Entry, path : str):
    (number, value) = entry
    try:
        return kind(value.lower())
    except ValueError:
        choices = ', '.join(m.value for m in kind)
        raise ParseError("%s: expected one of %s, got %s" % (path, choices, value), number)


def parse_config(text : str, mode : Optional[str] = None) -> RunConfig:
    """
    Parse and validate a run configuration, applying the defaults.

    :param text: The document.
    :param mode: The run mode, overriding ``run.mode`` when given.
    :return: The configuration.
    """
    sections = read_sections(text)
    keys     = {}
    for (name, entries) in sections.items():
        if name not in _KEYS:
            raise ParseError("Unknown section [%s]" % name, entries[0][0] if entries else None)
        found = read_keys(entries, name)
        for (key, (number, _)) in found.items():
            if key not in _KEYS[name]:
                raise ParseError("Unknown key %s.%s" % (name, key), number)
        keys.update({'%s.%s' % (name, k): v for (k, v) in found.items()})

    values = {}
    if mode is not None:
        values['mode'] = _enum(Mode, (None, mode), 'run.mode')
    elif 'run.mode' in keys:
        values['mode'] = _enum(Mode, keys['run.mode'], 'run.mode')
    else:
        raise ValidationError("run.mode: missing")

    readers = {
        'run.seed'             : ('seed',                _int),
        'run.instances'        : ('instances',           _int),
        'initial.source'       : ('source',              lambda e, p: _enum(Source, e, p)),
        'initial.positions'    : ('positions',           _floats),
        'initial.velocities'   : ('velocities',          _floats),
        'initial.start'        : ('start',               _int),
        'initial.anchor'       : ('anchor',              read_float),
        'initial.masses'       : ('masses',              _masses),
        'initial.file'         : ('file',                lambda e, p: e[1]),
        'lattice.k_min'        : ('k_min',               _int),
        'lattice.k_max'        : ('k_max',               _int),
        'time.t_end'           : ('t_end',               read_float),
        'time.dt'              : ('dt',                  read_float),
        'time.stride'          : ('stride',              _int),
        'grid.circle_count'    : ('circle_count',        _int),
        'grid.line_nodes'      : ('line_nodes',          _floats),
        'tolerance.paths'      : ('paths_tolerance',     read_float),
        'tolerance.deviation'  : ('deviation_tolerance', read_float),
        'tolerance.invariants' : ('invariant_tolerance', read_float),
        'output.directory'     : ('directory',           lambda e, p: e[1]),
    }
    for (path, (name, reader)) in readers.items():
        if path in keys:
            values[name] = reader(keys[path], path)

    config = RunConfig(**values)
    validate_config(config)
    return config


def validate_config(config : RunConfig) -> None:
    """
    Check the mode-specific requirements of a configuration.

    :raises ValidationError: Naming the offending field.
    """
    def require(condition, path, message):
        if not condition:
            raise ValidationError("%s: %s" % (path, message))

    for (path, value) in (('tolerance.paths',      config.paths_tolerance),
                          ('tolerance.deviation',  config.deviation_tolerance),
                          ('tolerance.invariants', config.invariant_tolerance)):
        require(value > 0.0, path, "must be positive")
    require(0 <= config.seed < 2 ** 64, 'run.seed',      "must be in [0, 2^64)")
    require(config.instances >= 1,      'run.instances', "must be positive")
    require(config.k_min < config.k_max, 'lattice.k_max', "must exceed lattice.k_min")
    require(config.t_end >= 0.0,        'time.t_end',    "must not be negative")
    require(config.dt > 0.0,            'time.dt',       "must be positive")
    require(config.stride >= 1,         'time.stride',   "must be positive")
    require(config.circle_count >= 4 and config.circle_count % 2 == 0,
            'grid.circle_count', "must be even and at least 4")

    if config.mode is Mode.VERIFY:
        return
    require(config.source is not None, 'initial.source',
            "required in %s mode" % config.mode.value)

    if config.source is Source.INLINE:
        count = len(config.positions)
        require(count > 0, 'initial.positions', "required for inline data")
        require(len(config.velocities) == count, 'initial.velocities',
                "need one per position")
        first = config.inline_start
        require(config.k_min <= first and first + count - 1 <= config.k_max,
                'initial.start', "inline data must lie in [lattice.k_min, lattice.k_max]")
        if config.mode is not Mode.DIRECT:
            require(len(set(config.positions)) == 1 and not any(config.velocities),
                    'initial.positions',
                    "inline data can only be solved spectrally for the free lattice")
    elif config.source is Source.MASSES:
        require(len(config.masses) > 0, 'initial.masses', "required for masses")
    elif config.source is Source.FILE:
        require(bool(config.file), 'initial.file', "required for file data")


def config_text(config : RunConfig) -> str:
    """
    The normalised document of a configuration; `parse_config` gives back an
    equal configuration.
    """
    numbers = lambda values: ', '.join(format_number(v) for v in values)
    entries = {
        'run'       : [('mode',      config.mode.value),
                       ('seed',      str(config.seed)),
                       ('instances', str(config.instances))],
        'initial'   : [('source',     None if config.source is None else config.source.value),
                       ('positions',  numbers(config.positions)  or None),
                       ('velocities', numbers(config.velocities) or None),
                       ('start',      None if config.start is None else str(config.start)),
                       ('anchor',     format_number(config.anchor)),
                       ('masses',     ', '.join('%s:%s' % (format_number(a), format_number(w))
                                                for (a, w) in config.masses) or None),
                       ('file',       config.file)],
        'lattice'   : [('k_min', str(config.k_min)),
                       ('k_max', str(config.k_max))],
        'time'      : [('t_end',  format_number(config.t_end)),
                       ('dt',     format_number(config.dt)),
                       ('stride', str(config.stride))],
        'grid'      : [('circle_count', str(config.circle_count)),
                       ('line_nodes',   numbers(config.line_nodes) or None)],
        'tolerance' : [('paths',      format_number(config.paths_tolerance)),
                       ('deviation',  format_number(config.deviation_tolerance)),
                       ('invariants', format_number(config.invariant_tolerance))],
        'output'    : [('directory', config.directory)],
    }
    lines = []
    for (section, pairs) in entries.items():
        pairs = [(k, v) for (k, v) in pairs if v is not None]
        if pairs:
            lines.append('[%s]' % section)
            lines.extend('%s = %s' % pair for pair in pairs)
    return '\n'.join(lines) + '\n'

# ----------------------------------------------------------------------

def oracle_margin(t_end : float) -> int:
    """
    How many sites to add either side of the reported window when
    integrating directly, so that the ends cannot be felt inside it.
    """
    return int(math.ceil(2.0 * t_end + 10.0))


def spectral_source(config : RunConfig) -> SpectralSource:
    if config.source is Source.MASSES:
        return ReflectionlessSource(config.masses)
    if config.source is Source.FILE:
        return FileSource(config.file)
    return FreeSource()


def _anchor(config : RunConfig) -> float:
    if config.source is Source.INLINE:
        return config.positions[0]
    return config.anchor


def solve_spectrally(config : RunConfig,
                     times  : numpy.ndarray,
                     k_min  : int,
                     k_max  : int) -> Trajectory:
    """
    The inverse spectral solution on a window at the given times. Data for a
    spectrum other than ``[-2, 2]`` are solved in rescaled time and mapped
    back.
    """
    source = spectral_source(config)
    grid   = build_grid(config.circle_count, config.line_nodes)
    (a, b) = source.interval
    stretch = 1.0 if (a, b) == STANDARD_INTERVAL else (b - a) / 4.0
    problem = CauchyProblem(source    = source,
                            times     = stretch * numpy.asarray(times),
                            k_min     = k_min,
                            k_max     = k_max,
                            anchor    = _anchor(config),
                            grid      = grid,
                            tolerance = config.paths_tolerance)
    trajectory = solve_cauchy(problem)
    if (a, b) != STANDARD_INTERVAL:
        logging.info(f'Mapping the solution back onto the spectrum [{a:g}, {b:g}]')
        trajectory = unrescale_solution(trajectory, a, b, times)
    return trajectory


def initial_state(config : RunConfig) -> LatticeState:
    """
    The initial data of the direct integration, on the reported window
    widened by the `oracle_margin`.

    Inline data are padded out flat. Spectral data give their own ``t = 0``
    slice.
    """
    margin = oracle_margin(config.t_end)
    k_min  = config.k_min - margin
    k_max  = config.k_max + margin
    if config.source is Source.INLINE:
        size = k_max - k_min + 1
        lead = config.inline_start - k_min
        positions  = numpy.full(size, config.positions[0])
        positions[lead + len(config.positions):] = config.positions[-1]
        positions[lead:lead + len(config.positions)] = config.positions
        velocities = numpy.zeros(size)
        velocities[lead:lead + len(config.velocities)] = config.velocities
        return LatticeState(k_min, k_max, positions, velocities, Boundary.frozen(0.0))

    slice_ = solve_spectrally(config, numpy.array([0.0]), k_min, k_max)
    (a, b) = spectral_source(config).interval
    slope  = 2.0 * math.log((b - a) / 4.0)
    return slice_.state(0, Boundary.frozen(slope))


def deviation(first : Trajectory, second : Trajectory) -> numpy.ndarray:
    """
    Rows of ``(t, sup |dx|, l2 |dx|)`` between two trajectories on the same
    window and times.
    """
    if (first.k_min, first.k_max) != (second.k_min, second.k_max):
        raise ValidationError("Trajectories cover different windows")
    if first.times.shape != second.times.shape or numpy.any(first.times != second.times):
        raise ValidationError("Trajectories are sampled at different times")
    dx = numpy.abs(first.x - second.x)
    return numpy.column_stack((first.times,
                               numpy.max(dx, axis=1),
                               numpy.sqrt(numpy.sum(dx * dx, axis=1))))


def write_rows(path : str, header : Tuple[str, ...], rows) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])

# ----------------------------------------------------------------------

def _trajectory_outputs(out_dir  : str,
                        primary  : Trajectory,
                        names    : List[str],
                        report   : Optional[str] = None) -> None:
    # Only needed for these modes
    from .plot import emit_plot_script, render_preview

    paths = [os.path.join(out_dir, name) for name in names]
    emit_plot_script(paths, os.path.join(out_dir, 'plot.py'),
                     None if report is None else os.path.join(out_dir, report))
    render_preview(primary, os.path.join(out_dir, 'preview.png'))


def _execute(config : RunConfig, out_dir : str) -> int:
    with open(os.path.join(out_dir, 'config.txt'), 'w') as fh:
        fh.write(config_text(config))

    if config.mode is Mode.VERIFY:
        from .checks import invariant_suite, operator_checks

        results = (operator_checks(config.seed, config.instances) +
                   invariant_suite(config.seed, tolerance=config.invariant_tolerance))
        write_rows(os.path.join(out_dir, 'verify.csv'),
                   ('check', 'value', 'tolerance', 'status'),
                   ((r.name, r.value, r.tolerance, r.status) for r in results))
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise ToleranceError("Checks failed: %s" % ', '.join(failed))
        return EXIT_OK

    times = sample_times(config.t_end, config.dt, config.stride)
    if config.mode in (Mode.DIRECT, Mode.COMPARE):
        direct = integrate(initial_state(config), config.t_end, config.dt, config.stride)
        direct = direct.restrict(config.k_min, config.k_max)
        write_trajectory(direct, os.path.join(out_dir, 'direct.csv'))
        if config.mode is Mode.DIRECT:
            _trajectory_outputs(out_dir, direct, ['direct.csv'])
            return EXIT_OK

    ist = solve_spectrally(config, times, config.k_min, config.k_max)
    write_trajectory(ist, os.path.join(out_dir, 'ist.csv'))
    if config.mode is Mode.IST:
        _trajectory_outputs(out_dir, ist, ['ist.csv'])
        return EXIT_OK

    rows = deviation(direct, ist)
    write_rows(os.path.join(out_dir, 'deviation.csv'), ('t', 'sup_dx', 'l2_dx'), rows)
    _trajectory_outputs(out_dir, ist, ['direct.csv', 'ist.csv'], 'deviation.csv')
    worst = float(numpy.max(rows[:, 1]))
    logging.info(f'Largest deviation {worst:.3g}')
    if worst > config.deviation_tolerance:
        raise ToleranceError(
            "Deviation %g exceeds the tolerance %g" % (worst, config.deviation_tolerance)
        )
    return EXIT_OK


def run(config  : RunConfig,
        out_dir : Optional[str] = None,
        seed    : Optional[int] = None) -> int:
    """
    Run a configuration, writing its outputs.

    :param config:  The configuration.
    :param out_dir: The output directory; ``output.directory``, or the
                    current directory, by default.
    :param seed:    Overrides ``run.seed``.
    :return: The exit code.
    """
    try:
        if seed is not None:
            config = replace(config, seed=int(seed))
            validate_config(config)
        out_dir = out_dir or config.directory or '.'
        os.makedirs(out_dir, exist_ok=True)
        logging.info(f'Running {config.mode.value} into {out_dir}')
        return _execute(config, out_dir)
    except ValidationError as e:
        logging.error(f'Invalid input: {e}')
        return EXIT_VALIDATION
    except NumericalError as e:
        logging.error(f'Numerical failure: {e}')
        return EXIT_NUMERICAL
    except ToleranceError as e:
        logging.error(f'Tolerance breached: {e}')
        return EXIT_TOLERANCE
    except OSError as e:
        logging.error(f'Cannot use {e.filename or out_dir}: {e.strerror or e}')
        return EXIT_VALIDATION

# ----------------------------------------------------------------------

@click.command()
@click.argument('mode', type=click.Choice([m.value for m in Mode]))
@click.option('--config', 'config_path', required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='The run configuration.')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
              help='Where to write the outputs.')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None,
              help='Overrides the seed of the configuration.')
@click.option('-v', '--verbose', count=True,
              help='More logging; give it twice for debug output.')
@click.pass_context
def main(ctx, mode, config_path, out_dir, seed, verbose):
    """
    Solve the Toda lattice directly, by its inverse spectral transform, or
    both; or verify the machinery.
    """
    logging.basicConfig(
        format='[%(asctime)s %(threadName)s %(filename)s:%(lineno)d %(levelname)s] %(message)s',
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    )
    try:
        with open(config_path) as fh:
            config = parse_config(fh.read(), mode)
    except ValidationError as e:
        click.echo("%s: %s" % (config_path, e), err=True)
        ctx.exit(EXIT_VALIDATION)

    # Data files are found relative to the configuration
    if config.file and not os.path.isabs(config.file):
        config = replace(config, file=os.path.join(os.path.dirname(config_path), config.file))

    code = run(config, out_dir, seed)
    if code != EXIT_OK:
        click.echo("toda %s failed with exit code %d" % (mode, code), err=True)
    ctx.exit(code)

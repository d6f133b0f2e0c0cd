"""
The spectral data file: a sectioned text format carrying reduced spectral
data. The sectioned-text reader here is shared with the run configuration.

A file looks like::

    # Comments start with a hash
    [meta]
    a = -2
    b = 2
    comment = two solitons
    [circle]
    # angle  real  imag
    -2.748893571891069 0.01 0
    [line]
    # node  weight  rho-real  rho-imag
    0.5 0 0.1 0
    2 0 0.1 0
    [masses]
    # alpha  weight
    -3 0.5
"""

# ======================================================================

from   dataclasses import dataclass
from   typing      import Dict, List, Sequence, Tuple
from   .           import (Grid, ParseError, ValidationError, trig_interpolate)
from   .spectral   import Mass, ReducedSpectralData

import logging
import math
import numpy

# ======================================================================

Entry = Tuple[int, str]

_SECTIONS = ('meta', 'circle', 'line', 'masses')
_WIDTHS   = {'circle': 3, 'line': 4, 'masses': 2}

# ----------------------------------------------------------------------

def read_sections(text : str) -> Dict[str, List[Entry]]:
    """
    Split a sectioned document into its sections.

    :param text: The document.
    :return: Each section name mapped to its ``(line number, content)``
             entries, with blank and comment lines dropped.
    """
    sections = {}
    current  = None
    for (number, raw) in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if line.startswith('['):
            if not line.endswith(']') or not line[1:-1].strip():
                raise ParseError("Bad section header: %s" % line, number)
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ParseError("Repeated section [%s]" % current, number)
            sections[current] = []
            continue
        if current is None:
            raise ParseError("Content before the first section", number)
        sections[current].append((number, line))
    return sections


def read_keys(entries : Sequence[Entry], section : str) -> Dict[str, Entry]:
    """
    Read ``key = value`` entries.

    :param entries: The section's entries.
    :param section: The section name, for messages.
    :return: Each key mapped to its ``(line number, value)``.
    """
    result = {}
    for (number, line) in entries:
        (key, sep, value) = line.partition('=')
        key = key.strip().lower()
        if not sep or not key:
            raise ParseError("Expected key = value in [%s]: %s" % (section, line), number)
        if key in result:
            raise ParseError("Repeated key %s.%s" % (section, key), number)
        result[key] = (number, value.strip())
    return result


def read_float(entry : Entry, path : str) -> float:
    (number, value) = entry
    try:
        result = float(value)
    except ValueError:
        raise ParseError("%s: not a number: %s" % (path, value), number)
    if not math.isfinite(result):
        raise ParseError("%s: not finite: %s" % (path, value), number)
    return result


def format_number(value : float) -> str:
    """
    Numbers are always written with 17 significant digits.
    """
    return '%.17g' % value

# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDataFile:
    """
    The content of a spectral data file, as numbers.

    :ivar interval: The continuous spectrum ``(a, b)`` the data describe.
    :ivar comment:  Free text.
    :ivar circle:   ``(angle, re, im)`` rows of the circle density.
    :ivar line:     ``(node, weight, rho_re, rho_im)`` rows.
    :ivar masses:   ``(alpha, weight)`` rows.
    """
    interval : Tuple[float, float]                     = (-2.0, 2.0)
    comment  : str                                     = ''
    circle   : Tuple[Tuple[float, float, float], ...]  = ()
    line     : Tuple[Tuple[float, float, float, float], ...] = ()
    masses   : Tuple[Tuple[float, float], ...]         = ()

    @classmethod
    def parse(cls, text : str) -> 'SpectralDataFile':
        """
        :param text: The file content.
        """
        sections = read_sections(text)
        for name in sections:
            if name not in _SECTIONS:
                raise ParseError("Unknown section [%s]" % name)

        meta     = read_keys(sections.get('meta', ()), 'meta')
        unknown  = set(meta) - {'a', 'b', 'comment'}
        if unknown:
            key = sorted(unknown)[0]
            raise ParseError("Unknown key meta.%s" % key, meta[key][0])
        a = read_float(meta['a'], 'meta.a') if 'a' in meta else -2.0
        b = read_float(meta['b'], 'meta.b') if 'b' in meta else  2.0
        if b <= a:
            raise ValidationError("Degenerate interval: [%s, %s]" % (a, b))

        rows = {}
        for (name, width) in _WIDTHS.items():
            rows[name] = []
            for (number, line) in sections.get(name, ()):
                fields = line.split()
                if len(fields) != width:
                    raise ParseError(
                        "Expected %d numbers in [%s], got %d" % (width, name, len(fields)),
                        number
                    )
                rows[name].append(tuple(read_float((number, f), name) for f in fields))

        return cls(interval = (a, b),
                   comment  = meta['comment'][1] if 'comment' in meta else '',
                   circle   = tuple(rows['circle']),
                   line     = tuple(rows['line']),
                   masses   = tuple(rows['masses']))


    def dumps(self) -> str:
        """
        The normalised text of the file.
        """
        lines = ['[meta]',
                 'a = %s' % format_number(self.interval[0]),
                 'b = %s' % format_number(self.interval[1])]
        if self.comment:
            lines.append('comment = %s' % self.comment)
        for name in ('circle', 'line', 'masses'):
            lines.append('[%s]' % name)
            for row in getattr(self, name):
                lines.append(' '.join(format_number(v) for v in row))
        return '\n'.join(lines) + '\n'


def read_spectral_file(path : str) -> SpectralDataFile:
    with open(path) as fh:
        return SpectralDataFile.parse(fh.read())

# ----------------------------------------------------------------------

def load_spectral_data(datafile : SpectralDataFile,
                       grid     : Grid) -> ReducedSpectralData:
    """
    Realise a file's data on a grid. Circle samples are resampled onto the
    grid angles by trigonometric interpolation when they are not already on
    them; line rows must sit on grid line nodes.

    An empty ``[circle]`` section means no circle channel.

    :param datafile: The parsed file.
    :param grid:     The grid.
    """
    angles  = None
    density = None
    if datafile.circle:
        rows    = sorted(datafile.circle)
        samples = numpy.array([r[0] for r in rows])
        values  = numpy.array([complex(r[1], r[2]) for r in rows])
        angles  = grid.circle_nodes
        if (len(samples) == grid.circle_count and
            numpy.max(numpy.abs(samples - angles)) <= 1e-12):
            density = values
        else:
            logging.info(
                f'Resampling {len(samples)} circle samples onto {grid.circle_count} nodes'
            )
            density = trig_interpolate(samples, values, angles)

    nodes    = grid.line_nodes
    weights  = numpy.zeros(len(nodes))
    coupling = numpy.zeros(len(nodes), dtype=numpy.complex128)
    seen     = set()
    for (node, weight, rho_re, rho_im) in datafile.line:
        matches = numpy.nonzero(numpy.abs(nodes - node) <= 1e-12 * abs(node))[0]
        if not len(matches):
            raise ValidationError("Line node %s is not a grid node" % (node,))
        index = int(matches[0])
        if index in seen:
            raise ValidationError("Line node %s given twice" % (node,))
        seen.add(index)
        weights [index] = weight
        coupling[index] = complex(rho_re, rho_im)

    data = ReducedSpectralData(
        circle_angles  = angles,
        circle_density = density,
        line_nodes     = nodes,
        line_weights   = weights,
        line_coupling  = coupling,
        masses         = tuple(Mass(a, w) for (a, w) in datafile.masses),
    )
    logging.debug(f'Loaded spectral data, khat={data.khat}')
    return data


def save_spectral_data(data     : ReducedSpectralData,
                       interval : Tuple[float, float] = (-2.0, 2.0),
                       comment  : str                 = '') -> SpectralDataFile:
    """
    The file which `load_spectral_data` turns back into these data.
    """
    circle = ()
    if data.circle_density is not None:
        circle = tuple((float(t), float(v.real), float(v.imag))
                       for (t, v) in zip(data.circle_angles, data.circle_density))
    line = tuple((float(x), float(w), float(r.real), float(r.imag))
                 for (x, w, r) in zip(data.line_nodes, data.line_weights, data.line_coupling)
                 if w != 0.0 or r != 0)
    return SpectralDataFile(interval = tuple(float(v) for v in interval),
                            comment  = comment,
                            circle   = circle,
                            line     = line,
                            masses   = tuple((m.alpha, m.weight) for m in data.masses))

"""
Pictures of trajectories.

Two kinds are made. `emit_plot_script` writes a standalone matplotlib script
which draws waterfall curves of ``x[k](t)`` and, when there is one, the
deviation report. `Preview` renders a raster of the particle tracks with PIL
so that a run leaves something to look at even where matplotlib is missing.
"""

# ======================================================================

from   PIL       import Image
from   typing    import Optional, Sequence, Tuple
from   .         import ValidationError
from   .lattice  import Trajectory, read_trajectory

import logging
import math
import numpy
import os

# ======================================================================

_SCRIPT_HEADER = '''\
#!/usr/bin/env python3
"""
Waterfall plots of Toda lattice trajectories.

Written by todaist; needs matplotlib. Run it from anywhere, the data files
are found next to it.
"""

import csv
import os
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

TRAJECTORIES = {trajectories!r}
DEVIATION    = {deviation!r}

# How far apart successive time slices are drawn
OFFSET = {offset!r}


def read(name):
    with open(os.path.join(HERE, name), newline='') as fh:
        return list(csv.DictReader(fh))
'''

_SCRIPT_BODY = '''

def waterfall(ax, name):
    by_time = {}
    for row in read(name):
        by_time.setdefault(float(row['t']), []).append((int(row['k']), float(row['x'])))
    for (i, t) in enumerate(sorted(by_time)):
        sites = sorted(by_time[t])
        ax.plot([k for (k, _) in sites],
                [x + i * OFFSET for (_, x) in sites],
                color='k', linewidth=0.5)
    ax.set_title(name)
    ax.set_xlabel('k')
    ax.set_ylabel('x_k(t), offset by t')


def deviation(ax, name):
    rows = read(name)
    t = [float(row['t']) for row in rows]
    ax.semilogy(t, [max(float(row['sup_dx']), 1e-300) for row in rows], label='sup')
    ax.semilogy(t, [max(float(row['l2_dx']),  1e-300) for row in rows], label='l2')
    ax.set_title(name)
    ax.set_xlabel('t')
    ax.legend()


panels = len(TRAJECTORIES) + (1 if DEVIATION else 0)
(fig, axes) = plt.subplots(1, panels, figsize=(6 * panels, 6), squeeze=False)
for (ax, name) in zip(axes[0], TRAJECTORIES):
    waterfall(ax, name)
if DEVIATION:
    deviation(axes[0][-1], DEVIATION)
fig.tight_layout()
fig.savefig(os.path.join(HERE, 'plot.png'))
plt.show()
'''

# ----------------------------------------------------------------------

def _require(path : str) -> None:
    if not os.path.isfile(path):
        raise ValidationError("No such file: %s" % (path,))


def emit_plot_script(trajectories : Sequence[str],
                     out_path     : str,
                     deviation    : Optional[str] = None) -> str:
    """
    Write a self-contained plot script for some trajectory files.

    One panel is drawn per trajectory, plus a deviation panel when a
    deviation report is given. The script refers to the files by name
    relative to its own directory, where they are expected to live.

    :param trajectories: The trajectory files.
    :param out_path:     Where to write the script.
    :param deviation:    The deviation report, if any.
    :return: The script path.
    """
    if not trajectories:
        raise ValidationError("Nothing to plot")
    spread = 0.0
    for path in trajectories:
        _require(path)
        trajectory = read_trajectory(path)
        spread = max(spread, float(numpy.ptp(trajectory.x)))
    if deviation is not None:
        _require(deviation)

    text = (_SCRIPT_HEADER.format(
                trajectories = [os.path.basename(p) for p in trajectories],
                deviation    = None if deviation is None else os.path.basename(deviation),
                offset       = round(max(spread, 1.0) / 20.0, 6))
            + _SCRIPT_BODY)
    with open(out_path, 'w') as fh:
        fh.write(text)
    logging.info(f'Wrote plot script {out_path} for {len(trajectories)} trajectories')
    return out_path

# ----------------------------------------------------------------------

class Preview():
    """
    A raster of the particle tracks of one trajectory: time runs down the
    image, position runs across it and each site gets its own hue.
    """
    def __init__(self,
                 width  : int = 640,
                 height : int = 480):
        """
        :param width:  The image width.
        :param height: The image height.
        """
        if width <= 0:
            raise ValueError("Bad width: %s" % width)
        if height <= 0:
            raise ValueError("Bad height: %s" % height)

        # The RGB value of each pixel and what fraction of it has been painted
        self._canvas = numpy.zeros((int(height), int(width), 4), dtype=numpy.float64)


    @property
    def width(self) -> int:
        return self._canvas.shape[1]


    @property
    def height(self) -> int:
        return self._canvas.shape[0]


    def clear(self) -> None:
        self._canvas[:, :, :] = 0.0


    def set(self,
            x : float,
            y : float,
            r : float,
            g : float,
            b : float) -> None:
        """
        Paint a one-pixel square centred at ``(x, y)``, blending it into the
        pixels it overlaps by area.

        :param x: The x coordinate.
        :param y: The y coordinate.
        :param r: The red value, ``[0,1]``.
        :param g: The green value, ``[0,1]``.
        :param b: The blue value, ``[0,1]``.
        """
        colour = numpy.clip((r, g, b), 0.0, 1.0)
        (left, top) = (x - 0.5, y - 0.5)
        for px in range(int(math.floor(left)), int(math.floor(left)) + 2):
            for py in range(int(math.floor(top)), int(math.floor(top)) + 2):
                if not (0 <= px < self.width and 0 <= py < self.height):
                    continue
                area = ((min(left + 1, px + 1) - max(left, px)) *
                        (min(top  + 1, py + 1) - max(top,  py)))
                if area <= 0.0:
                    continue
                pixel  = self._canvas[py, px]
                filled = pixel[3]
                if filled + area <= 1.0:
                    pixel[:3] += area * colour
                    pixel[3]   = filled + area
                else:
                    # Scale what was there into the space which is left
                    pixel[:3]  = (1.0 - area) / filled * pixel[:3] + area * colour
                    pixel[3]   = 1.0
                numpy.minimum(pixel, 1.0, out=pixel)


    def image(self) -> Image.Image:
        """
        The canvas as a PIL image.
        """
        data = (255 * self._canvas[:, :, :3]).astype(numpy.uint8)
        return Image.fromarray(data, 'RGB')


    def draw(self, trajectory : Trajectory) -> None:
        """
        Paint the tracks of every site of a trajectory.
        """
        # Each site keeps to its own column, displaced by at most 0.4 of a
        # column either way
        x      = trajectory.x - trajectory.x[0]
        reach  = float(numpy.max(numpy.abs(x)))
        reach  = reach if reach > 0.0 else 1.0
        times  = trajectory.times
        tspan  = times[-1] - times[0] if len(times) > 1 else 1.0
        sites  = x.shape[1]
        column = self.width / sites
        for j in range(sites):
            (r, g, b) = _hue(j / sites)
            for (i, t) in enumerate(times):
                self.set((j + 0.5 + 0.4 * x[i, j] / reach) * column,
                         (t - times[0]) / tspan * (self.height - 1),
                         r, g, b)


    def save(self, path : str) -> None:
        self.image().save(path, 'PNG')


def _hue(h : float) -> Tuple[float, float, float]:
    """
    A fully saturated colour on the hue wheel.
    """
    h = (h % 1.0) * 6.0
    f = h - int(h)
    return ((1.0, f, 0.0), (1.0 - f, 1.0, 0.0), (0.0, 1.0, f),
            (0.0, 1.0 - f, 1.0), (f, 0.0, 1.0), (1.0, 0.0, 1.0 - f))[int(h) % 6]


def render_preview(trajectory : Trajectory,
                   path       : str,
                   width      : int = 640,
                   height     : int = 480) -> str:
    """
    Render the particle tracks of a trajectory to a PNG file.

    :param trajectory: The trajectory.
    :param path:       Where to write the image.
    :param width:      The image width.
    :param height:     The image height.
    :return: The image path.
    """
    preview = Preview(width, height)
    preview.draw(trajectory)
    preview.save(path)
    logging.debug(f'Rendered a {width}x{height} preview to {path}')
    return path

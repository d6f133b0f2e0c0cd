#!/usr/bin/env python3
"""
Tests for the run configuration and the ``toda`` command.
"""

import csv
import math
import os
import pytest


_FREE = """\
[run]
mode = compare
[initial]
source = inline
positions = 0, 0, 0
velocities = 0, 0, 0
start = -1
[lattice]
k_min = -5
k_max = 5
[time]
t_end = 1
dt = 1e-3
stride = 100
"""

_SOLITON = """\
[initial]
source = masses
masses = 2.0:1.0
[lattice]
k_min = -10
k_max = 10
[time]
t_end = 2
dt = 5e-4
stride = 500
"""


def _write(directory, name, text):
    path = os.path.join(str(directory), name)
    with open(path, 'w') as fh:
        fh.write(text)
    return path


def _rows(path):
    with open(path, newline='') as fh:
        return list(csv.DictReader(fh))


def _invoke(runner, mode, config, out, *extra):
    from todaist.cli import main

    return runner.invoke(main, [mode, '--config', config, '--out', str(out)] + list(extra))

# ----------------------------------------------------------------------

def test_parse_defaults():
    from todaist.cli import Mode, RunConfig, Source, parse_config

    config = parse_config("[run]\nmode = ist\n[initial]\nsource = masses\nmasses = 2:1, -1.5:0.5\n")
    assert config.mode   is Mode.IST
    assert config.source is Source.MASSES
    assert config.masses == ((2.0, 1.0), (-1.5, 0.5))
    assert (config.k_min, config.k_max) == (-20, 20)
    assert config.t_end        == 5.0
    assert config.circle_count == 128
    assert config.seed         == 0

    inline = parse_config(_FREE)
    assert inline.inline_start == -1
    assert RunConfig(Mode.DIRECT).inline_start == -20

    # The mode argument wins over the document
    assert parse_config(_FREE, 'direct').mode is Mode.DIRECT


def test_parse_errors():
    from todaist     import ParseError, ValidationError
    from todaist.cli import parse_config

    with pytest.raises(ValidationError, match="initial.source"):
        parse_config("[run]\nmode = ist\n")
    with pytest.raises(ValidationError, match="run.mode"):
        parse_config("[lattice]\nk_min = 0\n")

    with pytest.raises(ParseError) as info:
        parse_config("[run]\nmode = ist\nbogus = 1\n")
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        parse_config("[run]\nmode = sideways\n")
    assert info.value.line == 2
    with pytest.raises(ParseError):
        parse_config("[elsewhere]\nx = 1\n")
    with pytest.raises(ParseError):
        parse_config(_SOLITON.replace("2.0:1.0", "2.0"), 'ist')
    with pytest.raises(ParseError):
        parse_config(_SOLITON.replace("k_min = -10", "k_min = -10.5"), 'ist')

    for (old, new) in (("k_max = 10",  "k_max = -20"),
                       ("dt = 5e-4",   "dt = 0"),
                       ("stride = 500", "stride = 0"),
                       ("t_end = 2",   "t_end = -1")):
        with pytest.raises(ValidationError):
            parse_config(_SOLITON.replace(old, new), 'ist')


def test_inline_validation():
    from todaist     import ValidationError
    from todaist.cli import parse_config

    with pytest.raises(ValidationError, match="initial.velocities"):
        parse_config(_FREE.replace("velocities = 0, 0, 0", "velocities = 0, 0"))
    with pytest.raises(ValidationError, match="initial.start"):
        parse_config(_FREE.replace("start = -1", "start = 4"))

    # Only flat, still inline data can be solved spectrally
    bumped = _FREE.replace("positions = 0, 0, 0", "positions = 0, 0.1, 0")
    with pytest.raises(ValidationError, match="initial.positions"):
        parse_config(bumped)
    assert parse_config(bumped, 'direct').positions == (0.0, 0.1, 0.0)


def test_config_text():
    from todaist.cli import config_text, parse_config

    for text in (_FREE, "[run]\nmode = ist\n" + _SOLITON, "[run]\nmode = verify\nseed = 9\n"):
        config = parse_config(text)
        again  = parse_config(config_text(config))
        assert again == config
        assert config_text(again) == config_text(config)


def test_oracle_margin():
    from todaist.cli import oracle_margin

    assert oracle_margin(0.0) == 10
    assert oracle_margin(2.0) == 14
    assert oracle_margin(2.2) == 15


def test_deviation():
    import numpy

    from todaist         import ValidationError
    from todaist.cli     import deviation
    from todaist.lattice import Provenance, Trajectory

    times = numpy.array([0.0, 1.0])
    first = Trajectory(0, 2, times, numpy.zeros((2, 3)), None, Provenance.DIRECT_ODE)
    moved = Trajectory(0, 2, times, numpy.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]),
                       None, Provenance.INVERSE_SPECTRAL)
    rows = deviation(first, moved)
    assert rows.tolist() == [[0.0, 0.0, 0.0], [1.0, 4.0, 5.0]]

    with pytest.raises(ValidationError):
        deviation(first, Trajectory(1, 3, times, numpy.zeros((2, 3)), None, Provenance.DIRECT_ODE))

# ----------------------------------------------------------------------

def test_free_compare(runner, tmp_path):
    config = _write(tmp_path, 'free.txt', _FREE)
    out    = tmp_path / 'out'
    result = _invoke(runner, 'compare', config, out)
    assert result.exit_code == 0, result.output

    for name in ('config.txt', 'direct.csv', 'ist.csv', 'deviation.csv', 'plot.py', 'preview.png'):
        assert (out / name).is_file(), name

    rows = _rows(str(out / 'deviation.csv'))
    assert len(rows) == 11
    assert all(float(row['sup_dx']) == 0.0 for row in rows)

    ist = _rows(str(out / 'ist.csv'))
    assert len(ist) == 11 * 11
    assert {row['provenance'] for row in ist} == {'ist'}
    assert 'provenance' not in _rows(str(out / 'direct.csv'))[0]


def test_direct_only(runner, tmp_path):
    config = _write(tmp_path, 'bump.txt',
                    _FREE.replace("positions = 0, 0, 0", "positions = 0, 0.1, 0"))
    out    = tmp_path / 'out'
    result = _invoke(runner, 'direct', config, out)
    assert result.exit_code == 0, result.output
    assert (out / 'direct.csv').is_file()
    assert not (out / 'ist.csv').exists()
    assert (out / 'preview.png').is_file()


def test_one_soliton_compare(runner, tmp_path):
    config = _write(tmp_path, 'soliton.txt', _SOLITON)
    out    = tmp_path / 'out'
    result = _invoke(runner, 'compare', config, out)
    assert result.exit_code == 0, result.output

    worst = max(float(row['sup_dx']) for row in _rows(str(out / 'deviation.csv')))
    assert worst < 1e-5

    # Too tight a tolerance is a tolerance failure, with the outputs still written
    tight  = _write(tmp_path, 'tight.txt', _SOLITON + "[tolerance]\ndeviation = 1e-30\n")
    result = _invoke(runner, 'compare', tight, tmp_path / 'tight')
    assert result.exit_code == 4
    assert (tmp_path / 'tight' / 'deviation.csv').is_file()


def test_file_source(runner, tmp_path):
    """
    A data file on the spectrum [-4, 4], found next to the configuration.
    """
    _write(tmp_path, 'soliton.dat', "[meta]\na = -4\nb = 4\n[masses]\n2 1\n")
    config = _write(tmp_path, 'run.txt',
                    "[initial]\nsource = file\nfile = soliton.dat\n"
                    "[lattice]\nk_min = -8\nk_max = 8\n"
                    "[time]\nt_end = 1\ndt = 5e-4\nstride = 500\n"
                    "[tolerance]\ndeviation = 1e-4\n")
    out    = tmp_path / 'out'
    result = _invoke(runner, 'compare', config, out)
    assert result.exit_code == 0, result.output

    # The background has b^2 = 4
    ist   = _rows(str(out / 'ist.csv'))
    first = {int(row['k']): float(row['x']) for row in ist if float(row['t']) == 0.0}
    assert first[8] - first[7] == pytest.approx(2.0 * math.log(2.0), abs=1e-3)


def test_verify(runner, tmp_path):
    config = _write(tmp_path, 'verify.txt', "[run]\nmode = verify\ninstances = 5\n")
    out    = tmp_path / 'out'
    result = _invoke(runner, 'verify', config, out, '--seed', '7')
    assert result.exit_code == 0, result.output

    rows = _rows(str(out / 'verify.csv'))
    assert {row['status'] for row in rows} == {'pass'}
    assert 'pv_quadrature' in [row['check'] for row in rows]
    with open(str(out / 'config.txt')) as fh:
        assert 'seed = 7' in fh.read()


def test_failures(runner, tmp_path):
    bad    = _write(tmp_path, 'bad.txt', "[run]\nmode = ist\nbogus = 1\n")
    result = _invoke(runner, 'ist', bad, tmp_path / 'bad')
    assert result.exit_code == 2
    assert 'Line 3' in result.output

    result = _invoke(runner, 'ist', _write(tmp_path, 'empty.txt', "[run]\n"), tmp_path / 'empty')
    assert result.exit_code == 2

    heavy  = _write(tmp_path, 'heavy.txt',
                    "[initial]\nsource = masses\nmasses = 1e6:1\n"
                    "[lattice]\nk_min = -2\nk_max = 2\n"
                    "[time]\nt_end = 1\ndt = 0.1\nstride = 1\n")
    result = _invoke(runner, 'ist', heavy, tmp_path / 'heavy')
    assert result.exit_code == 3


def test_unwritable_output(tmp_path, caplog):
    from todaist.cli import EXIT_VALIDATION, parse_config, run

    blocker = _write(tmp_path, 'blocker', "not a directory\n")
    out     = os.path.join(blocker, 'out')
    config  = parse_config(_FREE)
    assert run(config, out) == EXIT_VALIDATION
    assert blocker in caplog.text


def test_repeatable_outputs(runner, tmp_path):
    """
    The same configuration gives the same bytes whatever the thread count, and
    the deviation report can be rebuilt from the two trajectory files.
    """
    import numpy

    from todaist.cli     import main
    from todaist.lattice import read_trajectory

    config = _write(tmp_path, 'soliton.txt', _SOLITON)
    outs   = []
    for threads in ('1', '4', '4'):
        out    = tmp_path / ('out%d' % len(outs))
        result = runner.invoke(main, ['compare', '--config', config, '--out', str(out)],
                               env={'TODA_THREADS': threads})
        assert result.exit_code == 0, result.output
        outs.append(out)

    for name in ('config.txt', 'direct.csv', 'ist.csv', 'deviation.csv', 'plot.py', 'preview.png'):
        first = (outs[0] / name).read_bytes()
        for out in outs[1:]:
            assert (out / name).read_bytes() == first, name

    direct = read_trajectory(str(outs[0] / 'direct.csv'))
    ist    = read_trajectory(str(outs[0] / 'ist.csv'))
    rows   = _rows(str(outs[0] / 'deviation.csv'))
    assert [float(row['t']) for row in rows] == list(direct.times)
    for (i, row) in enumerate(rows):
        dx = numpy.abs(direct.x[i] - ist.x[i])
        assert float(row['sup_dx']) == numpy.max(dx)
        assert float(row['l2_dx'])  == pytest.approx(math.sqrt(numpy.sum(dx * dx)), rel=1e-14)


if __name__ == "__main__":
    test_parse_defaults()
    test_config_text()

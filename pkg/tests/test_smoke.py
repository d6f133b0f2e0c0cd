#!/usr/bin/env python3
"""
Simple smoketests for the TodaIST code.
"""

import os

def test_soliton_preview(tmp_path):
    from PIL               import Image
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.plot      import render_preview
    from todaist.spectral  import ReflectionlessSource

    # Solve a small soliton problem and draw it, end to end
    trajectory = solve_cauchy(CauchyProblem(ReflectionlessSource([(2.0, 1.0)]),
                                            [0.0, 0.5, 1.0], -4, 4))
    path = render_preview(trajectory, str(tmp_path / 'preview.png'), 48, 32)
    assert os.path.getsize(path) > 0
    with Image.open(path) as image:
        assert image.size == (48, 32)


def test_free_lattice():
    from todaist.evolution import CauchyProblem, solve_cauchy
    from todaist.spectral  import FreeSource

    trajectory = solve_cauchy(CauchyProblem(FreeSource(), [0.0, 1.0], -3, 3))
    assert not trajectory.x.any()


if __name__ == "__main__":
    test_free_lattice()

#!/usr/bin/env python3
"""
Shared fixtures for the TodaIST tests.
"""

import pytest


@pytest.fixture()
def runner():
    from click.testing import CliRunner

    return CliRunner()


@pytest.fixture()
def one_soliton():
    """
    The masses of a single soliton, with its closed form.
    """
    import math

    alpha  = 2.0
    weight = 1.0
    c      = weight / (1.0 - alpha ** -2)
    speed  = alpha - 1.0 / alpha

    def x(k, t):
        e = alpha ** (2 * k + 2) * math.exp(speed * t)
        return math.log((e + c / alpha ** 2) / (e + c))

    def xdot(k, t):
        e = alpha ** (2 * k + 2) * math.exp(speed * t)
        return e * speed / (e + c / alpha ** 2) - e * speed / (e + c)

    return ([(alpha, weight)], x, xdot)


@pytest.fixture()
def single_thread(monkeypatch):
    monkeypatch.setenv('TODA_THREADS', '1')

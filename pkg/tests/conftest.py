"""
Shared fixtures for the Pseudospherical Lab tests
"""

import math

import numpy as np
import pytest

from pss_lab.models.fields import Grid1D, ImmersionParams, JetFields


def constant_jets(value: float, xs: np.ndarray, t: float = 0.0) -> JetFields:
    """Jets of the stationary solution u = value"""
    zeros = np.zeros_like(xs)
    return JetFields(xs, t, np.full_like(xs, value), zeros, zeros, zeros, zeros, zeros, zeros)


def exponential_jets(c: float, rate: float, xs: np.ndarray, t: float = 0.0) -> JetFields:
    """Jets of u = f(t) e^x with f(t) = c e^(rate t)"""
    u = c * math.exp(rate * t) * np.exp(xs)
    u_t = rate * u
    return JetFields(xs, t, u, u, u, u, u_t, u_t, u_t)


@pytest.fixture
def grid():
    return Grid1D(2 * math.pi, 64)


@pytest.fixture
def xs():
    return np.linspace(0.0, 1.0, 11)


@pytest.fixture
def strip_params():
    return ImmersionParams(mu=0.0, beta=1.0, C_strip=5.0, a_sign=1)


@pytest.fixture
def ode_params():
    return ImmersionParams(mu=1.0, beta=1.0, a_sign=1)


@pytest.fixture
def write_config(tmp_path):
    """Write a TOML run configuration and return its path"""

    def write(text: str, name: str = "run.toml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write

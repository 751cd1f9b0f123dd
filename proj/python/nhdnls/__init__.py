"""Python bindings for the nhdnls library."""

import json

import numpy as np

from ._nhdnls import (
    ConfigError,
    Field,
    InvalidInput,
    NumericalBlowup,
    cumint,
    deriv,
    hasimoto_forward,
    hasimoto_inverse,
    magnon_frequency,
    rhs_inhomogeneous,
    rhs_standard,
    run_cli,
    version,
)
from ._nhdnls import continuum_scan_json as _continuum_scan_json

__version__ = version()


def sample(f, n, length):
    """Field from a vectorized function of x, evaluated on n nodes plus the seam at x = length."""
    x = np.arange(n + 1) * (length / n)
    v = np.asarray(f(x), dtype=complex)
    return Field(v[:-1], length / n, seam=v[-1])


def continuum_scan(n=64, length=6.283185307179586, seed=1, lo=-3, hi=3):
    """Per-order deformation scan on a random smooth sample, as a dict."""
    return json.loads(_continuum_scan_json(n, length, seed, lo, hi))


__all__ = [
    "ConfigError",
    "Field",
    "InvalidInput",
    "NumericalBlowup",
    "continuum_scan",
    "cumint",
    "deriv",
    "hasimoto_forward",
    "hasimoto_inverse",
    "magnon_frequency",
    "rhs_inhomogeneous",
    "rhs_standard",
    "run_cli",
    "sample",
    "version",
]

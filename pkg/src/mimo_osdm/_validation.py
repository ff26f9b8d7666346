"""Input validation helpers shared by the functional and estimator APIs."""

import numbers

import numpy as np

from .exceptions import ConfigurationError, DimensionError


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_sigma2(sigma2, strict=False):
    sigma2 = float(sigma2)
    if not np.isfinite(sigma2) or sigma2 < 0 or (strict and sigma2 == 0):
        bound = "> 0" if strict else ">= 0"
        raise ConfigurationError(f"sigma2 must be finite and {bound}, got {sigma2}")
    return sigma2


def as_complex_array(x, name="x", ndim=None, length=None, allow_nd=False):
    """Convert to a finite complex128 array, optionally checking rank and last-axis length."""
    arr = np.asarray(x, dtype=np.complex128)
    if ndim is not None and arr.ndim != ndim and not (allow_nd and arr.ndim >= ndim):
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if length is not None and (arr.ndim == 0 or arr.shape[-1] != length):
        raise DimensionError(
            f"{name} must have length {length} along its last axis, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_streams(x, count, length, name="x"):
    """Validate a (count, length) per-stream array, or a batch (..., count, length)."""
    arr = as_complex_array(x, name, ndim=2, allow_nd=True)
    if arr.shape[-2:] != (count, length):
        raise DimensionError(
            f"{name} must have trailing shape ({count}, {length}), got {arr.shape}"
        )
    return arr

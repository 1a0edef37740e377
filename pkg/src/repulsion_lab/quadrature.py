"""Quadrature and regression helpers shared by all modules.

Adaptive Gauss-Kronrod integration is delegated to QUADPACK via
``scipy.integrate.quad``; the wrappers here add complex integrands, the
log-radial substitution used for integrands spanning several decades, and
semi-infinite power-law tails.  The fitting helpers implement the two
empirical certificates the lab relies on: log-log slope fits (growth /
decay orders) and window-increment convergence classification for tail
norms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "complex_quad",
    "log_quad",
    "tail_quad",
    "PowerFit",
    "loglog_fit",
    "window_increment_fit",
    "logarithmic_fit",
]

_QUAD_OPTS = dict(limit=200)


def complex_quad(f, a, b, tol: float = 1e-12, **kw):
    """Adaptive GK quadrature of a complex-valued integrand on [a, b]."""
    opts = dict(_QUAD_OPTS)
    opts.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        re, _ = quad(lambda s: np.real(f(s)), a, b, epsabs=tol, epsrel=tol, **opts)
        im, _ = quad(lambda s: np.imag(f(s)), a, b, epsabs=tol, epsrel=tol, **opts)
    return re + 1j * im


def log_quad(f, a, b, tol: float = 1e-12):
    """integral of f over [a, b] (0 < a < b) in the variable log s.

    Suited to smooth power-law integrands over several decades.
    """
    if not 0.0 < a <= b:
        raise ValueError("log_quad needs 0 < a <= b")
    if a == b:
        return 0.0 + 0.0j
    g = lambda t: f(np.exp(t)) * np.exp(t)
    return complex_quad(g, np.log(a), np.log(b), tol=tol)


def tail_quad(f, a, tol: float = 1e-11):
    """integral of f over [a, infinity) for power-decaying f."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        re, _ = quad(lambda s: np.real(f(s)), a, np.inf, epsabs=tol, epsrel=tol, limit=400)
        im, _ = quad(lambda s: np.imag(f(s)), a, np.inf, epsabs=tol, epsrel=tol, limit=400)
    return re + 1j * im


@dataclass(frozen=True)
class PowerFit:
    """Least-squares slope of log|y| against log x."""

    slope: float
    intercept: float
    residual_rms: float
    exact_zero: bool = False

    @property
    def sentinel(self) -> str | None:
        return "exact" if self.exact_zero else None


def loglog_fit(x, y, floor: float = 1e-13) -> PowerFit:
    """Fit |y| ~ C x^slope; returns the 'exact' sentinel below the floor."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y))
    if np.all(y <= floor):
        return PowerFit(slope=0.0, intercept=-np.inf, residual_rms=0.0, exact_zero=True)
    keep = y > floor
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 3:
        raise ValueError("too few points above the floor for a slope fit")
    slope, intercept = np.polyfit(lx, ly, 1)
    rms = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return PowerFit(slope=float(slope), intercept=float(intercept), residual_rms=rms)


@dataclass(frozen=True)
class TailTrend:
    """Convergence classification of a tail from geometric window sums."""

    exponent: float
    convergent: bool
    increments: tuple[float, ...]
    windows: tuple[float, ...]


def window_increment_fit(x_edges, increments, zero_floor: float = 1e-300) -> TailTrend:
    """Classify sum-of-|u|^2 tail behaviour from window increments.

    ``increments[k]`` is the integral over [x_edges[k], x_edges[k+1]] with
    geometrically spaced edges.  A fitted increment slope s corresponds to
    a tail integrand envelope x^(s-1); the tail converges iff s < 0.
    """
    inc = np.asarray(increments, dtype=float)
    edges = np.asarray(x_edges, dtype=float)
    if np.all(inc <= zero_floor):
        return TailTrend(exponent=-np.inf, convergent=True,
                         increments=tuple(inc), windows=tuple(edges))
    fit = loglog_fit(edges[:-1], np.maximum(inc, zero_floor))
    return TailTrend(
        exponent=fit.slope,
        convergent=fit.slope < 0.0,
        increments=tuple(inc),
        windows=tuple(edges),
    )


@dataclass(frozen=True)
class LogFit:
    """Fit of I(X) = c0 + c1 log X with relative misfit on the window."""

    c0: float
    c1: float
    rel_error: float


def logarithmic_fit(X, I) -> LogFit:
    X = np.asarray(X, dtype=float)
    I = np.asarray(I, dtype=float)
    A = np.vstack([np.ones_like(X), np.log(X)]).T
    (c0, c1), *_ = np.linalg.lstsq(A, I, rcond=None)
    pred = A @ np.array([c0, c1])
    spread = np.max(I) - np.min(I)
    rel = float(np.max(np.abs(I - pred)) / spread) if spread > 0 else np.inf
    return LogFit(c0=float(c0), c1=float(c1), rel_error=rel)

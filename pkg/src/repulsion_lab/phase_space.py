"""Phase-space symbols, cutoffs, escape weight and sampled inequalities.

All evaluators accept batches: ``x`` and ``xi`` are arrays of shape (N, n).
Scalar convenience wrappers taking a single :class:`PhasePoint` are provided
for the point-wise API.

The three sampled certificates are

* ``check_escape``       -- positivity of the escape-derivative ratio on the
  characteristic shell (existence of an escape function at radius R),
* ``check_smoothing``    -- positivity of the commutant symbol driving the
  weighted graph-norm bound,
* ``validate_model``     -- decay-rule check of the symbol families plus a
  sampled ellipticity infimum  |p| / <xi>^2  on bounded-x regions.

Sampling uses scrambled Sobol sequences in log-radial shell coordinates;
every report records the seed.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .model import ModelSpec

__all__ = [
    "PhasePoint",
    "base_symbol",
    "full_symbol",
    "direction_cosine",
    "shell_cutoff",
    "box_cutoff",
    "direction_weight",
    "weight_exponent",
    "log_weight_order",
    "hamilton_derivative",
    "ShellSampleSpec",
    "sample_shell",
    "check_escape",
    "escape_sweep",
    "check_smoothing",
    "validate_model",
    "EscapeReport",
    "SmoothingReport",
    "ValidationReport",
]


@dataclass(frozen=True)
class PhasePoint:
    """A single point (x, xi) of the phase space R^n x R^n."""

    x: tuple
    xi: tuple

    def arrays(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        return x, xi


def _as_batch(x, xi):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if x.shape != xi.shape:
        raise ValueError("x and xi must have matching shapes")
    return x, xi


def _r2(v):
    return np.sum(v * v, axis=-1)


def _bracket2(x):
    return 1.0 + _r2(x)


def _prof(terms, r2, order=0):
    """Isotropic profile sum c*<x>^p and the scalar factors of its
    gradient (order 1: coefficient of the vector x)."""
    out = np.zeros_like(r2)
    w2 = 1.0 + r2
    for t in terms:
        if order == 0:
            out = out + t.coef * w2 ** (0.5 * t.power)
        else:
            out = out + t.coef * t.power * w2 ** (0.5 * t.power - 1.0)
    return out


# ----------------------------------------------------------------------
# symbols
# ----------------------------------------------------------------------

def base_symbol(x, xi, model: ModelSpec):
    """|xi|^2 - <x>^(2 alpha)."""
    x, xi = _as_batch(x, xi)
    val = _r2(xi) - _bracket2(x) ** model.alpha
    return val if val.ndim else float(val)


def full_symbol(x, xi, model: ModelSpec):
    """base symbol plus V(x, xi) = a|xi|^2 + b * sum(xi) + c."""
    x, xi = _as_batch(x, xi)
    r2x = _r2(x)
    val = (
        _r2(xi)
        - (1.0 + r2x) ** model.alpha
        + _prof(model.a_terms, r2x) * _r2(xi)
        + _prof(model.b_terms, r2x) * np.sum(xi, axis=-1)
        + _prof(model.c_terms, r2x)
    )
    return val if val.ndim else float(val)


def symbol_gradients(x, xi, model: ModelSpec):
    """(d_x p, d_xi p) of the full symbol, shape (N, n) each."""
    x, xi = _as_batch(x, xi)
    r2x = _r2(x)[..., None]
    alpha = model.alpha
    sxi = np.sum(xi, axis=-1)[..., None]
    r2xi = _r2(xi)[..., None]
    a0 = _prof(model.a_terms, r2x[..., 0])[..., None]
    # isotropic b contributes b(x) to every xi_j derivative
    dp_xi = 2.0 * (1.0 + a0) * xi + _prof(model.b_terms, r2x[..., 0])[..., None] * np.ones_like(xi)
    dp_x = (
        -2.0 * alpha * (1.0 + r2x) ** (alpha - 1.0) * x
        + _prof(model.a_terms, r2x[..., 0], 1)[..., None] * x * r2xi
        + _prof(model.b_terms, r2x[..., 0], 1)[..., None] * x * sxi
        + _prof(model.c_terms, r2x[..., 0], 1)[..., None] * x
    )
    return dp_x, dp_xi


def direction_cosine(x, xi):
    """eta = x.xi / (|x| |xi|); requires nonzero x and xi."""
    x, xi = _as_batch(x, xi)
    nx = np.sqrt(_r2(x))
    nxi = np.sqrt(_r2(xi))
    if np.any(nx == 0.0) or np.any(nxi == 0.0):
        raise ValueError("direction cosine undefined on zero vectors")
    val = np.sum(x * xi, axis=-1) / (nx * nxi)
    val = np.clip(val, -1.0, 1.0)
    return val if val.ndim else float(val)


def _eta_gradients(x, xi):
    nx = np.sqrt(_r2(x))[..., None]
    nxi = np.sqrt(_r2(xi))[..., None]
    eta = (np.sum(x * xi, axis=-1) / (nx[..., 0] * nxi[..., 0]))[..., None]
    gx = xi / (nx * nxi) - eta * x / nx**2
    gxi = x / (nx * nxi) - eta * xi / nxi**2
    return gx, gxi


def shell_cutoff(x, xi, model: ModelSpec, r: float | None = None, R: float | None = None):
    """Cutoff supported on the characteristic shell |xi|^2 ~ |x|^(2 alpha),
    |x|, |xi| >= R; equals 1 on the inner plateau."""
    cut = model.cutoff
    R = cut.R if R is None else R
    r = (1.0 / R) if r is None else r
    x, xi = _as_batch(x, xi)
    chi = cut.chi
    nx = np.sqrt(_r2(x))
    nxi = np.sqrt(_r2(xi))
    u = _r2(xi)
    w = nx ** (2.0 * model.alpha)
    tau = (u - w) / (u + w)
    val = chi.bar_value(nx / R) * chi.bar_value(nxi / R) * chi.value(tau / r)
    return val if val.ndim else float(val)


def _shell_cutoff_gradients(x, xi, model, r, R):
    chi = model.cutoff.chi
    nx = np.sqrt(_r2(x))[..., None]
    nxi = np.sqrt(_r2(xi))[..., None]
    u = _r2(xi)[..., None]
    w = nx ** (2.0 * model.alpha)
    tau = (u - w) / (u + w)
    A = chi.bar_value(nx / R)
    B = chi.bar_value(nxi / R)
    C = chi.value(tau / r)
    dA = chi.bar_d1(nx / R) / R * (x / nx)
    dB = chi.bar_d1(nxi / R) / R * (xi / nxi)
    dC_dtau = chi.d1(tau / r) / r
    dtau_dx = (-2.0 * u / (u + w) ** 2) * (2.0 * model.alpha * nx ** (2.0 * model.alpha - 2.0)) * x
    dtau_dxi = (2.0 * w / (u + w) ** 2) * 2.0 * xi
    val = (A * B * C)[..., 0]
    gx = dA * (B * C) + (A * B * dC_dtau) * dtau_dx
    gxi = dB * (A * C) + (A * B * dC_dtau) * dtau_dxi
    return val, gx, gxi


def box_cutoff(x, xi, model: ModelSpec, L: float | None = None):
    cut = model.cutoff
    L = cut.L if L is None else L
    x, xi = _as_batch(x, xi)
    val = cut.chi.value(np.sqrt(_r2(x)) / L) * cut.chi.value(np.sqrt(_r2(xi)) / L)
    return val if val.ndim else float(val)


def direction_weight(x, xi, model: ModelSpec, R: float | None = None):
    """m = -rho(eta) * a_R^2: -1 on the outgoing core, +1 incoming, 0 off
    the shell."""
    x, xi = _as_batch(x, xi)
    a = shell_cutoff(x, xi, model, R=R)
    supp = np.asarray(a) > 0.0
    out = np.zeros(np.shape(a) if np.ndim(a) else (1,))
    if np.any(supp):
        xs = x[supp] if x.ndim == 2 else x
        xis = xi[supp] if xi.ndim == 2 else xi
        eta = direction_cosine(xs, xis)
        out[supp] = -model.cutoff.rho.value(eta) * np.asarray(a)[supp] ** 2
    return out if np.ndim(a) else float(out[0])


def weight_exponent(k: float, t: float, x, xi, model: ModelSpec, R: float | None = None):
    """Variable weight order k + t*m(x, xi); requires |t| < 1/2."""
    if not abs(t) < 0.5:
        raise ValueError("|t| must be below 1/2")
    return k + t * direction_weight(x, xi, model, R=R)


def log_weight_order(x):
    """Diagnostic weight <log <x>>."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    val = np.sqrt(1.0 + np.log(np.sqrt(_bracket2(x))) ** 2)
    return val if val.ndim else float(val)


# ----------------------------------------------------------------------
# Hamiltonian derivative
# ----------------------------------------------------------------------

def hamilton_derivative(f, x, xi, model: ModelSpec, step_scale: float = 1e-5):
    """H_p f = d_xi p . d_x f - d_x p . d_xi f at (x, xi).

    ``f`` may expose analytic partials via ``f.gradients(x, xi)`` returning
    (grad_x, grad_xi); otherwise central differences with a per-coordinate
    step ``step_scale * (1 + |coord|)`` are used.
    """
    x, xi = _as_batch(x, xi)
    dp_x, dp_xi = symbol_gradients(x, xi, model)
    if hasattr(f, "gradients"):
        gx, gxi = f.gradients(x, xi)
    else:
        gx = np.zeros_like(x)
        gxi = np.zeros_like(xi)
        for j in range(x.shape[-1]):
            hx = step_scale * (1.0 + np.abs(x[..., j]))
            xp = x.copy(); xm = x.copy()
            xp[..., j] += hx; xm[..., j] -= hx
            gx[..., j] = (f(xp, xi) - f(xm, xi)) / (2.0 * hx)
            hxi = step_scale * (1.0 + np.abs(xi[..., j]))
            xip = xi.copy(); xim = xi.copy()
            xip[..., j] += hxi; xim[..., j] -= hxi
            gxi[..., j] = (f(x, xip) - f(x, xim)) / (2.0 * hxi)
    val = np.sum(dp_xi * gx, axis=-1) - np.sum(dp_x * gxi, axis=-1)
    if not np.all(np.isfinite(val)):
        raise FloatingPointError("non-finite Hamiltonian derivative")
    return val if val.ndim else float(val)


class SymbolFunction:
    """Wraps value/grad callables into the analytic-partials protocol."""

    def __init__(self, value, grad_x, grad_xi):
        self._value = value
        self._gx = grad_x
        self._gxi = grad_xi

    def __call__(self, x, xi):
        return self._value(x, xi)

    def gradients(self, x, xi):
        return self._gx(x, xi), self._gxi(x, xi)


def escape_numerator(x, xi, model: ModelSpec, R: float):
    """Pieces of -H_p(m log<x>) - e at (x, xi), together with a_R.

    The cutoff defect e = rho(eta) H_p(a_R^2) log<x> collects every term of
    the product rule that carries a derivative of the shell cutoff; what is
    left is  a_R^2 * [rho'(eta) (H_p eta) L + rho(eta) H_p(log<x>)].  The
    bracket (the ratio against <x>^(alpha-1) a_R^2 after cancelling a_R^2)
    is returned first so callers can form the margin without under-flowing
    a^4-sized products near the support edge.
    """
    x, xi = _as_batch(x, xi)
    a, agx, agxi = _shell_cutoff_gradients(x, xi, model, 1.0 / R, R)
    rho = model.cutoff.rho
    eta = direction_cosine(x, xi)
    egx, egxi = _eta_gradients(x, xi)
    dp_x, dp_xi = symbol_gradients(x, xi, model)
    Hp_eta = np.sum(dp_xi * egx, axis=-1) - np.sum(dp_x * egxi, axis=-1)
    Hp_a = np.sum(dp_xi * agx, axis=-1) - np.sum(dp_x * agxi, axis=-1)
    L = np.log(np.sqrt(_bracket2(x)))
    HpL = np.sum(dp_xi * x, axis=-1) / _bracket2(x)
    reduced = rho.d1(eta) * Hp_eta * L + rho.value(eta) * HpL
    with np.errstate(under="ignore"):
        defect = 2.0 * rho.value(eta) * a * Hp_a * L
    return reduced, defect, a


# ----------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ShellSampleSpec:
    """Low-discrepancy sample plan for the characteristic shell."""

    n_samples: int = 100_000
    radius_cap: float = 1.0e3
    seed: int = 7


def _directions(u, n, rng):
    """Unit vectors from uniform variates u in [0,1)^k (k = n-1)."""
    m = u.shape[0]
    if n == 1:
        return np.where(u[:, 0] < 0.5, -1.0, 1.0)[:, None]
    if n == 2:
        th = 2.0 * np.pi * u[:, 0]
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        th = 2.0 * np.pi * u[:, 0]
        cz = 2.0 * u[:, 1] - 1.0
        sz = np.sqrt(np.maximum(0.0, 1.0 - cz * cz))
        return np.stack([sz * np.cos(th), sz * np.sin(th), cz], axis=1)
    g = rng.standard_normal((m, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_shell(model: ModelSpec, R: float, spec: ShellSampleSpec):
    """Sobol samples covering supp a_R: log|x| uniform over [R, cap],
    shell parameter tau uniform over the cutoff support, directions
    uniform on the sphere.  The sample count is rounded up to a power of
    two to keep the Sobol balance properties."""
    n = model.n
    dim = 2 + 2 * max(1, n - 1)
    sob = qmc.Sobol(d=dim, scramble=True, seed=spec.seed)
    u = sob.random_base2(int(np.ceil(np.log2(max(2, spec.n_samples)))))
    rng = np.random.default_rng(spec.seed)
    r_shell = 1.0 / R
    logx = np.log(R) + u[:, 0] * (np.log(spec.radius_cap) - np.log(R))
    nx = np.exp(logx)
    tau = (2.0 * u[:, 1] - 1.0) * 2.0 * r_shell
    nxi = np.sqrt((1.0 + tau) / (1.0 - tau)) * nx**model.alpha
    k = max(1, n - 1)
    dx = _directions(u[:, 2 : 2 + k], n, rng)
    dxi = _directions(u[:, 2 + k : 2 + 2 * k], n, rng)
    return nx[:, None] * dx, nxi[:, None] * dxi


@dataclass(frozen=True)
class EscapeReport:
    check: str
    R: float
    margin: float
    passed: bool
    samples: int
    support_samples: int
    seed: int


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("REPULSION_LAB_THREADS", "1")))
    except ValueError:
        return 1


def check_escape(model: ModelSpec, R: float, spec: ShellSampleSpec) -> EscapeReport:
    """Empirical escape margin: infimum of the normalized derivative of the
    escape weight over the sampled shell; passes iff positive."""
    x, xi = sample_shell(model, R, spec)
    nthreads = _threads()
    chunks = np.array_split(np.arange(x.shape[0]), max(1, min(nthreads * 4, 64)))

    def run(idx):
        reduced, _, a = escape_numerator(x[idx], xi[idx], model, R)
        supp = a > 0.0
        if not np.any(supp):
            return np.inf, 0
        wx = x[idx][supp]
        denom = _bracket2(wx) ** ((model.alpha - 1.0) / 2.0)
        return float(np.min(reduced[supp] / denom)), int(np.sum(supp))

    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(run, chunks))
    else:
        results = [run(idx) for idx in chunks]
    margin = min(r[0] for r in results)
    n_supp = sum(r[1] for r in results)
    if n_supp == 0:
        raise ValueError("no samples landed in the cutoff support")
    return EscapeReport(
        check="escape",
        R=float(R),
        margin=float(margin),
        passed=bool(margin > 0.0),
        samples=spec.n_samples,
        support_samples=n_supp,
        seed=spec.seed,
    )


def escape_sweep(model: ModelSpec, R_list, spec: ShellSampleSpec,
                 target: float = 0.0) -> EscapeReport:
    """First R in R_list whose escape margin exceeds ``target``; if none
    does, the report with the best margin is returned (not passed)."""
    best = None
    for R in R_list:
        rep = check_escape(model, R, spec)
        if rep.margin > target:
            return rep
        if best is None or rep.margin > best.margin:
            best = rep
    return best


@dataclass(frozen=True)
class SmoothingReport:
    check: str
    R: float
    delta: float
    margin: float
    passed: bool
    samples: int
    support_samples: int
    seed: int


def check_smoothing(model: ModelSpec, R: float, delta: float,
                    spec: ShellSampleSpec) -> SmoothingReport:
    """Positivity of H_{p0}(eta * int_1^{|x|/R} s^(-1-delta) ds) against
    <x>^(alpha-1-delta) on the support of the wide-shell symbol."""
    if not 0.0 < delta < model.mu:
        raise ValueError("delta must lie in (0, mu)")
    x, xi = sample_shell(model, 2.0 * R, spec)
    a2R = shell_cutoff(x, xi, model, r=1.0 / (2.0 * R), R=2.0 * R)
    nx = np.sqrt(_r2(x))
    supp = (np.asarray(a2R) > 0.0) & (nx > R)
    if not np.any(supp):
        raise ValueError("no samples landed in the smoothing-symbol support")
    xs, xis = x[supp], xi[supp]
    nx = nx[supp]
    nxi = np.sqrt(_r2(xis))
    dot = np.sum(xs * xis, axis=-1)
    J = (1.0 - (nx / R) ** (-delta)) / delta
    cross = nx**2 * nxi**2 - dot**2
    first = (
        2.0 * cross / (nx * nxi)
        * (1.0 / nx**2 + model.alpha * _bracket2(xs) ** (model.alpha - 1.0) / nxi**2)
        * J
    )
    second = 2.0 * R**delta * dot**2 / (nx ** (3.0 + delta) * nxi)
    ratio = (first + second) / _bracket2(xs) ** ((model.alpha - 1.0 - delta) / 2.0)
    margin = float(np.min(ratio))
    return SmoothingReport(
        check="smoothing",
        R=float(R),
        delta=float(delta),
        margin=margin,
        passed=bool(margin > 0.0),
        samples=spec.n_samples,
        support_samples=int(np.sum(supp)),
        seed=spec.seed,
    )


@dataclass(frozen=True)
class ValidationReport:
    check: str
    passed: bool
    term_violations: tuple[str, ...]
    ellipticity_margin: float
    ellipticity_threshold: float
    M: float
    R0: float
    xi_max: float
    samples: int
    seed: int


def validate_model(model: ModelSpec, M: float = 1.0, R0: float | None = None,
                   xi_max: float | None = None, n_samples: int = 40_000,
                   seed: int = 7, threshold: float = 1e-2) -> ValidationReport:
    """Rule-check the term powers and sample the ellipticity infimum
    inf |p| / <xi>^2 over {|x| <= M, R0 <= |xi| <= xi_max}."""
    violations = tuple(model.term_violations())
    if R0 is None:
        R0 = 2.0 * (1.0 + M * M) ** (model.alpha / 2.0)
    if xi_max is None:
        xi_max = max(100.0, 4.0 * R0)
    n = model.n
    dim = 2 + 2 * max(1, n - 1)
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sob.random(n_samples)
    rng = np.random.default_rng(seed)
    k = max(1, n - 1)
    nx = M * u[:, 0] ** (1.0 / n)
    nxi = np.exp(np.log(R0) + u[:, 1] * (np.log(xi_max) - np.log(R0)))
    x = nx[:, None] * _directions(u[:, 2 : 2 + k], n, rng)
    xi = nxi[:, None] * _directions(u[:, 2 + k : 2 + 2 * k], n, rng)
    p = np.abs(full_symbol(x, xi, model)) / (1.0 + _r2(xi))
    margin = float(np.min(p))
    passed = (not violations) and margin >= threshold
    return ValidationReport(
        check="validate",
        passed=bool(passed),
        term_violations=violations,
        ellipticity_margin=margin,
        ellipticity_threshold=threshold,
        M=float(M),
        R0=float(R0),
        xi_max=float(xi_max),
        samples=n_samples,
        seed=seed,
    )

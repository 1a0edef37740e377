"""Self-adjoint extensions: boundary forms, spectra, von Neumann data.

Both endpoints are in the limit-circle regime, so extensions are fixed by
boundary conditions at infinity written through Wronskian brackets with
reference solutions (anchors) at a fixed energy.  Truncating those
brackets at a finite radius drifts like (lambda - lambda0) X^(1-alpha),
far too slowly for stable spectra, so the scan machinery evaluates the
bracket *limits* instead:

* every solution is decomposed at the launch radius X in the frame of the
  two wave solutions u_{+-} = e^{+- i phi} |x|^(-alpha/2) (built with the
  defect-scheme phases and integrated inward),
* cross-energy bracket limits reduce to the phase transports
  Delta_inf(z1, z2) = lim (phi^{z1} - phi^{z2}), computed by tail
  quadrature of the phase-slope difference,
* the boundary-condition solution at energy lambda is then reconstructed
  in closed form, and eigenvalues are bisected on a real matching
  determinant at the origin.

The module is restricted to multiplication perturbations (a = b = 0), for
which the coefficients are even and the left endpoint is handled by the
mirror map x -> -x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .model import ModelSpec, RadialCoefficients, tilde_shift
from .ode_lab import OdeRealization, PathSolution, realize_1d

__all__ = [
    "BoundaryAnchor",
    "ExtensionSpec",
    "FrameWorkspace",
    "boundary_form",
    "matching_determinant",
    "scan_spectrum",
    "SpectrumReport",
    "fd_matrix_oracle",
    "deficiency_frame_basis",
    "unitary_from_angles",
    "von_neumann_condition",
    "compactness_probe",
]


def _require_multiplication(model: ModelSpec):
    if not model.is_multiplication:
        raise ValueError(
            "extension machinery supports multiplication perturbations only"
        )


# ----------------------------------------------------------------------
# batched wave frames (multiplication V, even coefficients)
# ----------------------------------------------------------------------

class FrameWorkspace:
    """Wave-frame calculus at launch radius X, vectorized over energies.

    All data refer to the positive ray; the even coefficients make the
    left end the mirror image.  Phases are anchored to zero at the launch
    radius, so only phase differences ever enter.
    """

    def __init__(self, model: ModelSpec, X: float = 8.0, R: float = 2.0,
                 N: int = 8, rtol: float = 1e-11, atol: float = 1e-12):
        _require_multiplication(model)
        if X < 2.0 * R:
            raise ValueError("launch radius must satisfy X >= 2R")
        self.model = model
        self.alpha = model.alpha
        self.X = float(X)
        self.R = float(R)
        self.N = int(N)
        self.rtol = float(rtol)
        self.atol = float(atol)
        self._co = RadialCoefficients(model)
        self._gl = np.polynomial.legendre.leggauss(48)

    # -- effective multiplication symbol  ctilde = c - (<x>^2a - |x|^2a)
    def _ct(self, s, order: int = 0):
        return self._co.c(s, order) - tilde_shift(s, self.alpha, order)

    def stack(self, s, lam):
        """(phi', phi'', residual) of the defect-scheme phase at radial s.

        Broadcasts s against the energy vector lam; phases use the '+'
        signature.  Valid for s >= 2R (outside every cutoff).
        """
        s = np.asarray(s, dtype=float)
        lam = np.asarray(lam, dtype=complex)
        if s.ndim and lam.ndim:
            s = s[:, None]
        a = self.alpha
        pw = s**a
        ct = self._ct(s)
        ctp = self._ct(s, 1)
        S = np.zeros(np.broadcast_shapes(np.shape(s), np.shape(lam)), dtype=complex)
        Sp = np.zeros_like(S)
        half = 0.5 * lam / pw
        halfp = -0.5 * a * lam / (pw * s)
        for _ in range(self.N):
            D = half + S
            Dp = halfp + Sp
            E = 2.0 * pw * S + D * D + ct
            Ep = 2.0 * (a * pw / s * S + pw * Sp) + 2.0 * D * Dp + ctp
            ep = -E / (2.0 * pw)
            epp = -(Ep / (2.0 * pw) - a * E / (2.0 * pw * s))
            S = S + ep
            Sp = Sp + epp
        dphi = pw + half + S
        d2phi = a * pw / s + halfp + Sp
        D = half + S
        res = 2.0 * pw * S + D * D + ct
        return dphi, d2phi, res

    def slope_diff(self, s, lam, lam0):
        """phi'(s; lam) - phi'(s; lam0) by a difference-mode recursion.

        The base recursion at lam0 runs alongside a recursion for the
        increments, so no s^(2 alpha)-sized terms are ever subtracted; the
        result stays accurate far into the tail where the raw difference
        of slopes would drown in rounding.
        """
        s = np.asarray(s, dtype=float)
        lam = np.asarray(lam, dtype=complex)
        lam0 = complex(lam0)
        if s.ndim and lam.ndim:
            s = s[:, None]
        a = self.alpha
        pw = s**a
        ct = self._ct(s)
        ctp = self._ct(s, 1)
        shape0 = np.shape(pw) if np.ndim(pw) else (1,)
        S0 = np.zeros(shape0, dtype=complex)
        Sp0 = np.zeros(shape0, dtype=complex)
        half0 = 0.5 * lam0 / pw
        half0p = -0.5 * a * lam0 / (pw * s)
        shape = np.broadcast_shapes(np.shape(s), np.shape(lam))
        dS = np.zeros(shape, dtype=complex)
        dSp = np.zeros(shape, dtype=complex)
        dhalf = 0.5 * (lam - lam0) / pw
        dhalfp = -0.5 * a * (lam - lam0) / (pw * s)
        for _ in range(self.N):
            D0 = half0 + S0
            D0p = half0p + Sp0
            dD = dhalf + dS
            dDp = dhalfp + dSp
            E0 = 2.0 * pw * S0 + D0 * D0 + ct
            E0p = 2.0 * (a * pw / s * S0 + pw * Sp0) + 2.0 * D0 * D0p + ctp
            dE = 2.0 * pw * dS + (2.0 * D0 + dD) * dD
            dEp = 2.0 * (a * pw / s * dS + pw * dSp) + 2.0 * (
                D0 * dDp + dD * D0p + dD * dDp
            )
            S0 = S0 - E0 / (2.0 * pw)
            Sp0 = Sp0 - (E0p / (2.0 * pw) - a * E0 / (2.0 * pw * s))
            dS = dS - dE / (2.0 * pw)
            dSp = dSp - (dEp / (2.0 * pw) - a * dE / (2.0 * pw * s))
        return dhalf + dS

    # -- phase transport --------------------------------------------------
    def delta_inf(self, lam, lam0):
        """lim_{s->inf} (phi^lam - phi^lam0), both anchored at X.

        Tail quadrature in the variable t = s^(1-alpha) (finite interval,
        smooth integrand decaying like the slope difference)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        a = self.alpha
        t_hi = self.X ** (1.0 - a)
        gx, gw = self._gl
        t = 0.5 * t_hi * (gx + 1.0)
        w = 0.5 * t_hi * gw
        s = t ** (1.0 / (1.0 - a))
        diff = self.slope_diff(s, lam, lam0)
        jac = s**a / (a - 1.0)
        out = np.sum(diff * (w * jac)[:, None], axis=0)
        return out if out.size > 1 else complex(out[0])

    # -- launch data and inward integration -------------------------------
    def wave_launch(self, lam):
        """(u, u') of the '+' frame wave at x = X, phase anchored to 0.

        The amplitude is the transport-exact (phi')^(-1/2); with it the
        launched solution tracks the asymptotic wave including the
        energy-dependent amplitude factor, and the frame Wronskian is
        exactly -2i."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        dphi, d2phi, _ = self.stack(np.asarray(self.X), lam)
        A = dphi ** (-0.5)
        u = A.astype(complex)
        up = (1j * dphi - 0.5 * d2phi / dphi) * A
        return u, up

    def integrate_frames(self, lam):
        """Frame wave values (u, u') at the origin, batched over energies.

        Stripped w-variables on [2R, X] with coefficients splined once per
        batch (cubic over a geometric grid), raw variables on [0, 2R]."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        K = lam.size
        u, up = self.wave_launch(lam)
        # stripped segment X -> 2R
        dphiX, _, _ = self.stack(np.asarray(self.X), lam)
        wp = up - 1j * dphiX * u
        nodes = np.geomspace(2.0 * self.R, self.X, 96)
        dphi_n, d2phi_n, res_n = self.stack(nodes, lam)
        from scipy.interpolate import CubicSpline

        spl_dphi = CubicSpline(nodes, dphi_n, axis=0)
        spl_cB = CubicSpline(nodes, -res_n + 1j * d2phi_n, axis=0)

        def rhs_stripped(x, y):
            wv = y[:K] + 1j * y[K : 2 * K]
            wq = y[2 * K : 3 * K] + 1j * y[3 * K :]
            wpp = -(2j * spl_dphi(x) * wq + spl_cB(x) * wv)
            return np.concatenate([wq.real, wq.imag, wpp.real, wpp.imag])

        y0 = np.concatenate([u.real, u.imag, wp.real, wp.imag])
        sol = solve_ivp(rhs_stripped, (self.X, 2.0 * self.R), y0,
                        method="DOP853", rtol=self.rtol, atol=self.atol)
        if not sol.success:
            raise RuntimeError(f"frame stripping failed: {sol.message}")
        y = sol.y[:, -1]
        wv = y[:K] + 1j * y[K : 2 * K]
        wq = y[2 * K : 3 * K] + 1j * y[3 * K :]
        # relative phase across the stripped segment
        gx, gw = self._gl
        mid = 0.5 * (self.X + 2.0 * self.R)
        haf = 0.5 * (self.X - 2.0 * self.R)
        snod = mid + haf * gx
        dphi_g, _, _ = self.stack(snod, lam)
        dph = -np.sum(dphi_g * (haf * gw)[:, None], axis=0)  # from X down to 2R
        fac = np.exp(1j * dph)
        uv = fac * wv
        uq = fac * (wq + 1j * dphi_n[0] * wv)

        def rhs_raw(x, y):
            u_ = y[:K] + 1j * y[K : 2 * K]
            q_ = y[2 * K : 3 * K] + 1j * y[3 * K :]
            well = (1.0 + x * x) ** self.alpha - self._co.c(x)
            upp = -(well + lam) * u_
            return np.concatenate([q_.real, q_.imag, upp.real, upp.imag])

        y0 = np.concatenate([uv.real, uv.imag, uq.real, uq.imag])
        sol = solve_ivp(rhs_raw, (2.0 * self.R, 0.0), y0, method="DOP853",
                        rtol=self.rtol, atol=self.atol)
        if not sol.success:
            raise RuntimeError(f"frame raw segment failed: {sol.message}")
        y = sol.y[:, -1]
        return y[:K] + 1j * y[K : 2 * K], y[2 * K : 3 * K] + 1j * y[3 * K :]


# ----------------------------------------------------------------------
# anchors
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryAnchor:
    """Real reference solutions at the anchor energy, data (1,0) and (0,1)
    at the origin, normalized modified Wronskian [w1, w2] = 1."""

    model: ModelSpec
    lam0: float
    X: float
    values_X: tuple          # (w1, w1', w2, w2') at x = +X
    frame_plus: tuple        # (a1+, a2+): '+'-wave coefficients at X

    @property
    def wronskian(self) -> float:
        w1, w1p, w2, w2p = self.values_X
        return float(w1 * w2p - w1p * w2)


def build_anchor(ws: FrameWorkspace, lam0: float = 0.0,
                 rtol: float = 1e-12, atol: float = 1e-13) -> BoundaryAnchor:
    model = ws.model
    co = RadialCoefficients(model)

    def rhs(x, y):
        well = (1.0 + x * x) ** model.alpha - co.c(x)
        return [y[1], -(well + lam0) * y[0], y[3], -(well + lam0) * y[2]]

    sol = solve_ivp(rhs, (0.0, ws.X), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError("anchor integration failed")
    w1, w1p, w2, w2p = sol.y[:, -1]
    u, up = ws.wave_launch(np.asarray([lam0]))
    u, up = u[0], up[0]
    um, ump = np.conj(u), np.conj(up)
    W = u * ump - up * um
    a1p = (w1 * ump - w1p * um) / W
    a2p = (w2 * ump - w2p * um) / W
    return BoundaryAnchor(
        model=model,
        lam0=float(lam0),
        X=ws.X,
        values_X=(float(w1), float(w1p), float(w2), float(w2p)),
        frame_plus=(complex(a1p), complex(a2p)),
    )


# ----------------------------------------------------------------------
# extension parametrization
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionSpec:
    """Separated angles (theta_minus, theta_plus) or a 2x2 unitary between
    the deficiency spaces (von Neumann datum)."""

    theta_minus: float | None = None
    theta_plus: float | None = None
    unitary: np.ndarray | None = None

    def __post_init__(self):
        if self.unitary is not None:
            U = np.asarray(self.unitary, dtype=complex)
            if U.shape != (2, 2):
                raise ValueError("unitary datum must be 2x2")
            defect = np.max(np.abs(U.conj().T @ U - np.eye(2)))
            if defect > 1e-12:
                raise ValueError(f"datum is not unitary (defect {defect:.2e})")
            object.__setattr__(self, "unitary", U)
        elif self.theta_minus is None or self.theta_plus is None:
            raise ValueError("provide separated angles or a unitary datum")

    @property
    def separated(self) -> bool:
        return self.unitary is None

    @property
    def symmetric(self) -> bool:
        return self.separated and np.isclose(
            self.theta_minus % np.pi, self.theta_plus % np.pi
        )


# ----------------------------------------------------------------------
# literal boundary form (finite-X sequence with extrapolated limit)
# ----------------------------------------------------------------------

class BoundaryFormError(RuntimeError):
    pass


def boundary_form(real: OdeRealization, u_path: PathSolution,
                  w_path: PathSolution, X_list, lam_u, lam_w,
                  cauchy_tol: float = 1e-4):
    """Bracket sequence p2 (u w' - u' w)(X_k) and its extrapolated limit.

    The drift of the finite-X bracket is the smooth tail
    (lam_u - lam_w) * C * X^(1-alpha) (plus its square); the returned limit
    fits and removes those two powers.  Raises when the Cauchy differences
    of the fitted limit fail to settle below ``cauchy_tol``.
    """
    X = np.sort(np.asarray(X_list, dtype=float))
    if X.size < 4:
        raise ValueError("need at least four radii for the extrapolation")
    u, up = u_path(X)
    w, wp = w_path(X)
    seq = real.p2(X) * (u * wp - up * w)
    if abs(complex(lam_u) - complex(lam_w)) < 1e-14:
        limit = seq[-1]
        cert = np.abs(np.diff(seq))
        if np.any(cert > cauchy_tol * (1.0 + np.abs(limit))):
            raise BoundaryFormError("same-energy bracket failed constancy")
        return complex(limit), seq, cert
    a = real.alpha
    basis = np.vstack([
        np.ones_like(X),
        X ** (1.0 - a),
        X ** (2.0 * (1.0 - a)),
    ]).T
    limits = []
    for k in range(3, X.size):
        coef, *_ = np.linalg.lstsq(basis[: k + 1], seq[: k + 1], rcond=None)
        limits.append(coef[0])
    cert = np.abs(np.diff(np.asarray(limits)))
    limit = limits[-1]
    if cert.size and cert[-1] > cauchy_tol * (1.0 + abs(limit)):
        raise BoundaryFormError(
            f"bracket extrapolation not Cauchy (last diff {cert[-1]:.2e})"
        )
    return complex(limit), seq, cert


# ----------------------------------------------------------------------
# matching determinant via frames
# ----------------------------------------------------------------------

class SpectralSolver:
    """Shared state for spectrum scans at one launch radius."""

    def __init__(self, model: ModelSpec, ext: ExtensionSpec, X: float = 8.0,
                 R: float = 2.0, lam0: float = 0.0, N: int = 8):
        _require_multiplication(model)
        if not ext.separated:
            raise ValueError("scanning needs the separated parametrization")
        self.model = model
        self.ext = ext
        self.ws = FrameWorkspace(model, X=X, R=R, N=N)
        self.anchor = build_anchor(self.ws, lam0)
        self._cache: dict = {}

    def _bc_solutions(self, lams):
        """Boundary-condition solutions at the origin for a batch of
        energies: returns (u_r, u_r', u_l, u_l') rows.

        u_r = 2 Re(gamma u_+^lam) with gamma = e^{-i Dinf} kappa(theta+);
        the left solution is the mirror of the theta-tilde right solution,
        (cos, sin)(theta-tilde) ~ (-cos theta-, sin theta-).
        """
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        a1p, a2p = self.anchor.frame_plus
        U0, U0p = self.ws.integrate_frames(lams)
        D = self.ws.delta_inf(lams, self.anchor.lam0)
        D = np.atleast_1d(D)
        th_p = self.ext.theta_plus
        kap_r = np.cos(th_p) * a1p + np.sin(th_p) * a2p
        gam_r = np.exp(-1j * D) * kap_r
        ur = 2.0 * np.real(gam_r * U0)
        urp = 2.0 * np.real(gam_r * U0p)
        th_m = self.ext.theta_minus
        kap_l = -np.cos(th_m) * a1p + np.sin(th_m) * a2p
        gam_l = np.exp(-1j * D) * kap_l
        ul = 2.0 * np.real(gam_l * U0)
        ulp = -2.0 * np.real(gam_l * U0p)
        return ur, urp, ul, ulp

    def determinant_batch(self, lams):
        ur, urp, ul, ulp = self._bc_solutions(lams)
        det = ul * urp - ulp * ur
        scale = np.hypot(ul, ulp) * np.hypot(ur, urp)
        return det / scale

    def parity_factors(self, lams):
        """Normalized (even, odd) eigencondition factors for the symmetric
        case theta- = theta+: u_r'(0) and u_r(0)."""
        ur, urp, _, _ = self._bc_solutions(lams)
        scale = np.hypot(ur, urp)
        return urp / scale, ur / scale


def matching_determinant(model: ModelSpec, ext: ExtensionSpec, lam,
                         X: float = 8.0, R: float = 2.0,
                         lam0: float = 0.0) -> float:
    """Normalized matching determinant at the origin; zero iff lam is an
    eigenvalue of the separated extension."""
    solver = SpectralSolver(model, ext, X=X, R=R, lam0=lam0)
    return float(solver.determinant_batch(np.asarray([lam]))[0])


# ----------------------------------------------------------------------
# spectrum scan
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumReport:
    window: tuple
    eigenvalues: tuple
    parities: tuple
    min_gap: float
    X: float
    refine_tol: float
    x_stability: tuple = ()
    oracle_deltas: tuple = ()
    passed: bool = True


def _bisect_roots_multi(fmulti, n_factors, window, step, tol):
    """Sign-change bisection over several eigencondition factors at once.

    ``fmulti(grid)`` returns a list of factor-value arrays; brackets from
    all factors are pooled and refined together, one batched evaluation
    per bisection step.  Returns (roots, factor_index) lists.
    """
    lo, hi = window
    grid = np.arange(lo, hi + 0.5 * step, step)
    vals = fmulti(grid)
    roots, tags = [], []
    a_lo, a_hi, f_lo, which = [], [], [], []
    for k in range(n_factors):
        v = vals[k]
        for i in range(grid.size - 1):
            a, b = v[i], v[i + 1]
            if np.isnan(a) or np.isnan(b):
                continue
            if a == 0.0:
                roots.append(float(grid[i]))
                tags.append(k)
            elif np.sign(a) * np.sign(b) < 0:
                a_lo.append(grid[i])
                a_hi.append(grid[i + 1])
                f_lo.append(a)
                which.append(k)
    a_lo = np.asarray(a_lo)
    a_hi = np.asarray(a_hi)
    f_lo = np.asarray(f_lo)
    which = np.asarray(which, dtype=int)
    while a_lo.size and np.max(a_hi - a_lo) > tol:
        mid = 0.5 * (a_lo + a_hi)
        vals = fmulti(mid)
        fmid = np.asarray([vals[k][i] for i, k in enumerate(which)])
        left = np.sign(f_lo) * np.sign(fmid) < 0
        a_hi = np.where(left, mid, a_hi)
        a_lo = np.where(left, a_lo, mid)
        f_lo = np.where(left, f_lo, fmid)
    roots.extend(float(r) for r in 0.5 * (a_lo + a_hi))
    tags.extend(int(k) for k in which)
    return roots, tags


def scan_spectrum(model: ModelSpec, ext: ExtensionSpec, window=(-20.0, 20.0),
                  refine_tol: float = 1e-8, X: float = 8.0, R: float = 2.0,
                  lam0: float = 0.0, step: float = 0.5,
                  check_stability: bool = True,
                  oracle_count: int = 0) -> SpectrumReport:
    """Grid scan plus bisection of the matching determinant.

    For the symmetric case the even/odd factors are scanned separately
    (near-degenerate tunnelling pairs stay resolvable); X-stability
    recomputes every root at launch radius X + 2.
    """
    solver = SpectralSolver(model, ext, X=X, R=R, lam0=lam0)
    roots, parities = _scan_with(solver, window, step, refine_tol)
    x_stab = ()
    if check_stability:
        solver2 = SpectralSolver(model, ext, X=X + 2.0, R=R, lam0=lam0)
        roots2, _ = _scan_with(solver2, window, step, refine_tol)
        shifts = []
        for r in roots:
            if roots2:
                r2 = roots2[int(np.argmin(np.abs(np.asarray(roots2) - r)))]
                shifts.append(abs(r2 - r) / max(1.0, abs(r)))
            else:
                shifts.append(np.inf)
        x_stab = tuple(shifts)
    oracle = ()
    if oracle_count:
        deltas = []
        order = np.argsort(roots)
        for idx in order[:oracle_count]:
            r = roots[idx]
            par = parities[idx] if parities[idx] in ("even", "odd") else None
            lam_fd = fd_matrix_oracle(model, ext, r, X=X, R=R, lam0=lam0,
                                      parity=par)
            deltas.append(abs(lam_fd - r) / max(1.0, abs(r)))
        oracle = tuple(deltas)
    roots_sorted = np.asarray(sorted(roots))
    pars = tuple(p for _, p in sorted(zip(roots, parities)))
    gaps = np.diff(roots_sorted)
    min_gap = float(np.min(gaps)) if gaps.size else np.inf
    passed = bool(min_gap > 0.0 and all(np.isfinite(roots_sorted)))
    return SpectrumReport(
        window=tuple(window),
        eigenvalues=tuple(float(r) for r in roots_sorted),
        parities=pars,
        min_gap=min_gap,
        X=float(X),
        refine_tol=float(refine_tol),
        x_stability=x_stab,
        oracle_deltas=oracle,
        passed=passed,
    )


def _scan_with(solver: SpectralSolver, window, step, tol):
    if solver.ext.symmetric:
        fmulti = lambda g: list(solver.parity_factors(g))
        roots, tags = _bisect_roots_multi(fmulti, 2, window, step, tol)
        names = ("even", "odd")
        return roots, [names[k] for k in tags]
    fmulti = lambda g: [solver.determinant_batch(g)]
    roots, _ = _bisect_roots_multi(fmulti, 1, window, step, tol)
    return roots, ["mixed"] * len(roots)


# ----------------------------------------------------------------------
# finite-difference matrix oracle
# ----------------------------------------------------------------------

def fd_matrix_oracle(model: ModelSpec, ext: ExtensionSpec, lam_ref: float,
                     X: float = 8.0, R: float = 2.0, lam0: float = 0.0,
                     n_base: int = 6000, parity: str | None = None) -> float:
    """Richardson-extrapolated symmetric finite-difference eigenvalue.

    The boundary condition of the extension is realized at +-X through the
    Robin data of the frame-reconstructed boundary solution at lam_ref
    (the finite-X realization of the same separated condition); interior
    discretization and eigenvalue extraction are independent of the
    shooting machinery.  For symmetric extensions a parity tag restricts
    the matrix to the half line, which keeps near-degenerate tunnelling
    pairs from confusing the eigenvalue selection.
    """
    _require_multiplication(model)
    solver = SpectralSolver(model, ext, X=X, R=R, lam0=lam0)
    # Robin data at +-X from the frame boundary solutions: value/derivative
    lam_arr = np.asarray([lam_ref])
    a1p, a2p = solver.anchor.frame_plus
    D = np.atleast_1d(solver.ws.delta_inf(lam_arr, lam0))
    u, up = solver.ws.wave_launch(lam_arr)
    th_p, th_m = ext.theta_plus, ext.theta_minus
    kap_r = np.cos(th_p) * a1p + np.sin(th_p) * a2p
    gam_r = np.exp(-1j * D[0]) * kap_r
    uR = 2.0 * np.real(gam_r * u[0])
    uRp = 2.0 * np.real(gam_r * up[0])
    kap_l = -np.cos(th_m) * a1p + np.sin(th_m) * a2p
    gam_l = np.exp(-1j * D[0]) * kap_l
    uL = 2.0 * np.real(gam_l * u[0])          # value at -X equals mirror value
    uLp = -2.0 * np.real(gam_l * up[0])       # derivative flips sign

    co = RadialCoefficients(model)
    if parity is not None and not ext.symmetric:
        raise ValueError("parity restriction needs a symmetric extension")

    def eig_at(n, guess):
        if parity is None:
            x = np.linspace(-X, X, n + 1)
        else:
            x = np.linspace(0.0, X, n + 1)
        h = x[1] - x[0]
        q = -((1.0 + x * x) ** model.alpha) + co.c(x)
        diag = 2.0 / h**2 + q
        off = np.full(x.size - 1, -1.0 / h**2)
        mass = np.full(x.size, 1.0)
        scale_r = np.hypot(uR, uRp)
        dirichlet_r = abs(uR) < 1e-9 * scale_r
        i1 = x.size - 2 if dirichlet_r else x.size - 1
        if parity is None:
            dirichlet_l = abs(uL) < 1e-9 * np.hypot(uL, uLp)
            i0 = 1 if dirichlet_l else 0
        else:
            dirichlet_l = parity == "odd"
            i0 = 1 if dirichlet_l else 0
        d = diag[i0 : i1 + 1].copy()
        e = off[i0:i1].copy()
        m = mass[i0 : i1 + 1].copy()
        if not dirichlet_l:
            if parity is None:
                d[0] = 1.0 / h**2 + 0.5 * q[0] + (uLp / uL) / h
                m[0] = 0.5
            else:
                # even parity: natural (Neumann) fold at the origin
                d[0] = 1.0 / h**2 + 0.5 * q[0]
                m[0] = 0.5
        if not dirichlet_r:
            d[-1] = 1.0 / h**2 + 0.5 * q[-1 if i1 == x.size - 1 else i1] - (uRp / uR) / h
            m[-1] = 0.5
        scale = 1.0 / np.sqrt(m)
        d = d * scale**2
        e = e * scale[:-1] * scale[1:]
        vals = eigh_tridiagonal(d, e, select="v",
                                select_range=(guess - 3.0, guess + 3.0),
                                eigvals_only=True)
        if vals.size == 0:
            raise RuntimeError("oracle found no eigenvalue near the target")
        return float(vals[np.argmin(np.abs(vals - guess))])

    lam_h = eig_at(n_base, lam_ref)
    lam_h2 = eig_at(2 * n_base, lam_h)
    return (4.0 * lam_h2 - lam_h) / 3.0


# ----------------------------------------------------------------------
# von Neumann parametrization
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FrameBasis:
    """Global solutions of (P - z)u = 0 with wave-frame coefficients.

    Member 0 is launched as the pure '+' wave at +X, member 1 at -X; the
    rows of ``right``/``left`` hold their (c+, c-) coefficients in the
    right/left end frames."""

    z: complex
    right: np.ndarray
    left: np.ndarray


def _rel_phase(ws: FrameWorkspace, lam):
    """int_2R^X phi'(s) ds for one energy (Gauss-Legendre)."""
    gx, gw = ws._gl
    mid = 0.5 * (ws.X + 2.0 * ws.R)
    haf = 0.5 * (ws.X - 2.0 * ws.R)
    d, _, _ = ws.stack(mid + haf * gx, np.asarray([lam], dtype=complex))
    return complex(np.sum(d[:, 0] * haf * gw))


def _cross_integrate(ws: FrameWorkspace, z, launch_side: int):
    """Pure '+'-wave launched at launch_side*X and integrated across to the
    opposite end; returns its (u, u') there (x-derivatives, signed x)."""
    lam = np.asarray([z], dtype=complex)
    side = launch_side
    u0, up0 = ws.wave_launch(lam)
    dphiX, _, _ = ws.stack(np.asarray(ws.X), lam)
    dphi2R, _, _ = ws.stack(np.asarray(2.0 * ws.R), lam)
    dphiX, dphi2R = complex(dphiX[0]), complex(dphi2R[0])
    co = ws._co
    alpha = ws.alpha
    relph = _rel_phase(ws, z)

    def rhs_raw(x, y):
        uv = y[0] + 1j * y[1]
        uq = y[2] + 1j * y[3]
        upp = -((1.0 + x * x) ** alpha - co.c(x) + z) * uv
        return [uq.real, uq.imag, upp.real, upp.imag]

    def rhs_str(ray):
        def rhs(x, y):
            wv = y[0] + 1j * y[1]
            wq = y[2] + 1j * y[3]
            dphi, d2phi, res = ws.stack(np.asarray(abs(x)), lam)
            wpp = -(2j * ray * dphi[0] * wq + (-res[0] + 1j * d2phi[0]) * wv)
            return [wq.real, wq.imag, wpp.real, wpp.imag]

        return rhs

    def run(rhs, span, y0):
        sol = solve_ivp(rhs, span, y0, method="DOP853", rtol=ws.rtol,
                        atol=ws.atol)
        if not sol.success:
            raise RuntimeError(f"cross integration failed: {sol.message}")
        y = sol.y[:, -1]
        return y[0] + 1j * y[1], y[2] + 1j * y[3]

    X, R2 = ws.X, 2.0 * ws.R
    # launch-side stripped segment: w = u at the anchor point side*X
    ux = complex(u0[0])
    uxp = side * complex(up0[0])
    w = ux
    wp = uxp - 1j * (side * dphiX) * ux
    w, wp = run(rhs_str(side), (side * X, side * R2),
                [w.real, w.imag, wp.real, wp.imag])
    fac = np.exp(-1j * relph)
    u = fac * w
    up = fac * (wp + 1j * (side * dphi2R) * w)
    # raw middle
    u, up = run(rhs_raw, (side * R2, -side * R2),
                [u.real, u.imag, up.real, up.imag])
    # far-side stripped segment (ray = -side)
    w = u
    wp = up - 1j * (-side * dphi2R) * u
    w, wp = run(rhs_str(-side), (-side * R2, -side * X),
                [w.real, w.imag, wp.real, wp.imag])
    fac = np.exp(1j * relph)
    u_far = fac * w
    up_far = fac * (wp + 1j * (-side * dphiX) * w)
    return u_far, up_far


def _wave_data(ws: FrameWorkspace, z, side: int):
    """Signed-x data of the frame waves (u+, u-) at x = side*X."""
    b, bp = ws.wave_launch(np.asarray([z], dtype=complex))
    b, bp = complex(b[0]), complex(bp[0])
    wpls = (b, side * bp)
    bm, bmp = ws.wave_launch(np.asarray([np.conj(z)], dtype=complex))
    wmin = (np.conj(complex(bm[0])), side * np.conj(complex(bmp[0])))
    return wpls, wmin


def _frame_coeffs_at(ws: FrameWorkspace, z, side: int, u, up):
    """Frame coefficients (c+, c-) of a solution from data at x = side*X."""
    wpls, wmin = _wave_data(ws, z, side)
    W = wpls[0] * wmin[1] - wpls[1] * wmin[0]
    cp = (u * wmin[1] - up * wmin[0]) / W
    cm = -(u * wpls[1] - up * wpls[0]) / W
    return complex(cp), complex(cm)


def deficiency_frame_basis(ws: FrameWorkspace, z) -> FrameBasis:
    uR, upR = _cross_integrate(ws, z, +1)     # right launch, data at -X
    lR = _frame_coeffs_at(ws, z, -1, uR, upR)
    uL, upL = _cross_integrate(ws, z, -1)     # left launch, data at +X
    rL = _frame_coeffs_at(ws, z, +1, uL, upL)
    right = np.asarray([[1.0, 0.0], [rL[0], rL[1]]], dtype=complex)
    left = np.asarray([[lR[0], lR[1]], [1.0, 0.0]], dtype=complex)
    return FrameBasis(z=complex(z), right=right, left=left)


def _transport_map(ws: FrameWorkspace, zs):
    """Phase transports D(z1, z2) for ordered pairs from zs and their
    conjugates, anchored at the shared launch radius."""
    pool = []
    for z in zs:
        pool.extend([complex(z), complex(np.conj(z))])
    pool = sorted(set(pool), key=lambda t: (t.real, t.imag))
    gx, gw = ws._gl
    a = ws.alpha
    t_hi = ws.X ** (1.0 - a)
    t = 0.5 * t_hi * (gx + 1.0)
    w = 0.5 * t_hi * gw
    s = t ** (1.0 / (1.0 - a))
    jac = s**a / (a - 1.0)
    Dmap = {}
    for z1 in pool:
        for z2 in pool:
            if z1 == z2:
                Dmap[(z1, z2)] = 0.0 + 0.0j
            else:
                diff = ws.slope_diff(s, np.asarray([z1], dtype=complex), z2)
                Dmap[(z1, z2)] = complex(np.sum(diff[:, 0] * w * jac))
    return Dmap


def _wave_bracket(sigma: int, end: int, D):
    """Limit of the bilinear bracket [u_sigma^{z1}, u_{-sigma}^{z2}] at
    end*infinity, D = Delta_inf(z1, z2); same-sign pairings vanish."""
    val = -2j * sigma * np.exp(1j * sigma * D)
    return val if end > 0 else -val


def _bilinear_limit(zf, zw, f_coeffs, w_coeffs, end, Dmap):
    """[f, w]_{end*inf} for frame-decomposed f (at zf) and w (at zw)."""
    fp, fm = f_coeffs
    wp_, wm_ = w_coeffs
    D = Dmap[(complex(zf), complex(zw))]
    return (
        fp * wm_ * _wave_bracket(+1, end, D)
        + fm * wp_ * _wave_bracket(-1, end, D)
    )


def _sesquilinear_limit(zf, zg, f_coeffs, g_coeffs, end, Dmap):
    """[f, conj(g)']-form limit: conj maps g's waves to opposite waves at
    conj(zg), so this is the bilinear limit against (conj g-, conj g+)."""
    gp, gm = g_coeffs
    return _bilinear_limit(zf, np.conj(zg), f_coeffs,
                           (np.conj(gm), np.conj(gp)), end, Dmap)


def unitary_from_angles(ws: FrameWorkspace, basis_p: FrameBasis,
                        basis_m: FrameBasis, anchor: BoundaryAnchor,
                        theta_minus: float, theta_plus: float) -> np.ndarray:
    """Deficiency map of the separated extension in the given bases.

    For each basis member w of Ker(P - i) the pair (gamma_1, gamma_2) with
    w + gamma.g satisfying both separated conditions is solved for; U is
    the matrix of those columns."""
    Dmap = _transport_map(ws, [basis_p.z, basis_m.z, anchor.lam0])
    a1p, a2p = anchor.frame_plus
    anc_r = {1: (a1p, np.conj(a1p)), 2: (a2p, np.conj(a2p))}
    # mirror parity: w1 even, w2 odd
    anc_l = {1: (a1p, np.conj(a1p)), 2: (-a2p, -np.conj(a2p))}

    def sep_forms(z, cr, cl):
        out = []
        for th, end, anc, coeffs in (
            (theta_plus, +1, anc_r, cr),
            (theta_minus, -1, anc_l, cl),
        ):
            val = 0.0 + 0.0j
            for j, wgt in ((1, np.cos(th)), (2, np.sin(th))):
                if wgt != 0.0:
                    val += wgt * _bilinear_limit(z, anchor.lam0, coeffs,
                                                 anc[j], end, Dmap)
            out.append(val)
        return np.asarray(out)

    B_p = [sep_forms(basis_p.z, basis_p.right[i], basis_p.left[i])
           for i in range(2)]
    B_m = [sep_forms(basis_m.z, basis_m.right[i], basis_m.left[i])
           for i in range(2)]
    M = np.column_stack(B_m)
    U = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        U[:, i] = np.linalg.solve(M, -B_p[i])
    return U


def von_neumann_condition(model: ModelSpec, U, lam: float,
                          ws: FrameWorkspace | None = None,
                          bases=None) -> float:
    """|det| of the 4x4 linear system expressing that some maximal-domain
    eigenfunction at lam lies in D_U = D_min + {w + U w | w in Ker(P-i)};
    zero iff lam belongs to the spectrum of the extension P_U.

    Membership in the minimal domain is tested against the two-sided Green
    forms with the deficiency bases of both signs (four functionals that
    span the dual of D_max / D_min); all forms are bracket limits.
    """
    _require_multiplication(model)
    if ws is None:
        ws = FrameWorkspace(model)
    if bases is None:
        bases = (deficiency_frame_basis(ws, 1j),
                 deficiency_frame_basis(ws, -1j))
    basis_p, basis_m = bases
    U = np.asarray(U, dtype=complex)
    lamc = complex(lam)
    v = deficiency_frame_basis(ws, lamc)
    Dmap = _transport_map(ws, [lamc, 1j, -1j])
    psis = [
        (basis_p.z, basis_p.right[0], basis_p.left[0]),
        (basis_p.z, basis_p.right[1], basis_p.left[1]),
        (basis_m.z, basis_m.right[0], basis_m.left[0]),
        (basis_m.z, basis_m.right[1], basis_m.left[1]),
    ]

    def gform(zf, fr, fl, psi):
        zg, gr, gl = psi
        return _sesquilinear_limit(zf, zg, fr, gr, +1, Dmap) -             _sesquilinear_limit(zf, zg, fl, gl, -1, Dmap)

    cols = []
    for i in range(2):
        cols.append([gform(v.z, v.right[i], v.left[i], p) for p in psis])
    for k in range(2):
        wr, wl = basis_p.right[k], basis_p.left[k]
        Uwr = U[0, k] * basis_m.right[0] + U[1, k] * basis_m.right[1]
        Uwl = U[0, k] * basis_m.left[0] + U[1, k] * basis_m.left[1]
        col = []
        for p in psis:
            val = gform(basis_p.z, wr, wl, p) + gform(basis_m.z, Uwr, Uwl, p)
            col.append(-val)
        cols.append(col)
    M = np.asarray(cols, dtype=complex).T
    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0] = 1.0
    return float(abs(np.linalg.det(M / norms)))


# ----------------------------------------------------------------------
# compactness probe
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RatioReport:
    centers: tuple
    ratios: tuple
    weight_exponent: float
    monotone_decreasing: bool
    passed: bool


def compactness_probe(model: ModelSpec, centers=(0.0, 10.0, 100.0, 1000.0),
                      width: float = 1.0, delta: float = 0.2) -> RatioReport:
    """Weighted-to-graph-norm ratios of translated bumps.

    ratio(x0) = ||<x>^((alpha-1-delta)/2) u|| / (||P u|| + ||u||) for a
    smooth bump at x0; the graph norm grows like <x0>^(2 alpha) so the
    ratio must decay along translations to large |x0|.
    """
    if not 0.0 < delta < model.mu:
        raise ValueError("delta must lie in (0, mu)")
    real = realize_1d(model)
    t = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, 4001)

    bump = np.exp(-1.0 / (1.0 - t * t))
    db = bump * (-2.0 * t / (1.0 - t * t) ** 2)
    d2b = bump * ((-2.0 + 6.0 * t**2 - 4.0 * t**4 + 4.0 * t**2) / (1.0 - t * t) ** 4)
    # second derivative recomputed exactly below to avoid algebra slips
    g = -2.0 * t / (1.0 - t * t) ** 2
    gp = (-2.0 * (1.0 - t * t) ** 2 + 2.0 * t * 2.0 * (1.0 - t * t) * (-2.0 * t)) / (
        1.0 - t * t
    ) ** 4
    d2b = bump * (g * g + gp)
    ratios = []
    w = (model.alpha - 1.0 - delta) / 2.0
    for x0 in centers:
        x = x0 + width * t
        u = bump
        u1 = db / width
        u2 = d2b / width**2
        Pu = real.apply(x, u, u1, u2)
        nP = np.sqrt(np.trapezoid(np.abs(Pu) ** 2, x))
        nu = np.sqrt(np.trapezoid(np.abs(u) ** 2, x))
        nw = np.sqrt(np.trapezoid((1.0 + x * x) ** w * np.abs(u) ** 2, x))
        ratios.append(float(nw / (nP + nu)))
    mono = all(ratios[i + 1] < ratios[i] for i in range(len(ratios) - 1)
               if abs(centers[i + 1]) > abs(centers[i]))
    passed = bool(np.isfinite(ratios).all() and ratios[-1] < ratios[0])
    return RatioReport(
        centers=tuple(float(c) for c in centers),
        ratios=tuple(ratios),
        weight_exponent=float(w),
        monotone_decreasing=bool(mono),
        passed=passed,
    )

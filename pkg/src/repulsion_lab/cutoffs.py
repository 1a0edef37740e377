"""Smooth cutoff and switch profiles used throughout the lab.

Everything here is built from one C-infinity smoothstep

    S(v) = sigma(k * (1/(1-v) - 1/v)),   v in (0, 1),

where sigma is the logistic function and k > 0 a sharpness parameter.
S is monotone, S(0+) = 0, S(1-) = 1, and all derivatives vanish at both
endpoints, so the plateau/support requirements below hold exactly:

* ``chi(t)``    : 1 for |t| <= 1, 0 for |t| >= 2, monotone in |t|.
* ``rho(t)``    : odd switch, -1 for t <= -1/2, +1 for t >= 1/2, rho' >= 0.

First and second derivatives are available in closed form; they are needed
by the phase recursion, the parametrix assembly and the ODE coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = ["SmoothStep", "BumpCutoff", "RhoProfile", "CutoffSpec"]


class SmoothStep:
    """Monotone C-infinity step from 0 (at v<=0) to 1 (at v>=1)."""

    def __init__(self, sharpness: float = 1.0):
        if sharpness <= 0:
            raise ValueError("sharpness must be positive")
        self.sharpness = float(sharpness)

    def _g(self, v):
        return self.sharpness * (1.0 / (1.0 - v) - 1.0 / v)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        lo = v <= 0.0
        hi = v >= 1.0
        mid = ~(lo | hi)
        out[lo] = 0.0
        out[hi] = 1.0
        vm = v[mid]
        out[mid] = expit(self._g(vm))
        return out if out.ndim else float(out)

    def d1(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        mid = (v > 0.0) & (v < 1.0)
        vm = v[mid]
        s = expit(self._g(vm))
        gp = self.sharpness * (1.0 / (1.0 - vm) ** 2 + 1.0 / vm**2)
        with np.errstate(under="ignore"):
            out[mid] = s * (1.0 - s) * gp
        return out if out.ndim else float(out)

    def d2(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        mid = (v > 0.0) & (v < 1.0)
        vm = v[mid]
        s = expit(self._g(vm))
        gp = self.sharpness * (1.0 / (1.0 - vm) ** 2 + 1.0 / vm**2)
        gpp = self.sharpness * (2.0 / (1.0 - vm) ** 3 - 2.0 / vm**3)
        with np.errstate(under="ignore"):
            sp = s * (1.0 - s)
            out[mid] = sp * (1.0 - 2.0 * s) * gp**2 + sp * gpp
        return out if out.ndim else float(out)


class BumpCutoff:
    """The plateau cutoff chi: 1 on [-1,1], 0 outside (-2,2), smooth between.

    ``bar_*`` methods give chibar = 1 - chi.  Derivatives are with respect
    to the raw argument t (caller handles any |x|/R rescaling).
    """

    def __init__(self, sharpness: float = 1.0):
        self.step = SmoothStep(sharpness)
        self.sharpness = self.step.sharpness

    def value(self, t):
        return 1.0 - self.step.value(np.abs(t) - 1.0)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return -self.step.d1(np.abs(t) - 1.0) * np.sign(t)

    def d2(self, t):
        return -self.step.d2(np.abs(np.asarray(t, dtype=float)) - 1.0)

    def bar_value(self, t):
        return self.step.value(np.abs(t) - 1.0)

    def bar_d1(self, t):
        t = np.asarray(t, dtype=float)
        return self.step.d1(np.abs(t) - 1.0) * np.sign(t)

    def bar_d2(self, t):
        return self.step.d2(np.abs(np.asarray(t, dtype=float)) - 1.0)


class RhoProfile:
    """Odd monotone switch used by the escape weight.

    rho(t) = -1 for t <= -1/2, +1 for t >= 1/2, strictly increasing in
    between, t*rho(t) >= 0.  The comparison constants

        rho'(t) >= C1 >= C2 |rho(t)|   for |t| <= 1/4,
        rho'(t) <= C3 <= C4 |rho(t)|   for |t| >= 1/4,

    are computed from the realization on a fine grid and stored.
    """

    def __init__(self, sharpness: float = 1.0):
        self.step = SmoothStep(sharpness)
        grid_in = np.linspace(-0.25, 0.25, 4001)
        grid_out = np.linspace(0.25, 0.5, 4001)
        self.C1 = float(np.min(self.d1(grid_in)))
        rho_quarter = float(self.value(0.25))
        self.C2 = self.C1 / rho_quarter
        self.C3 = float(np.max(self.d1(grid_out)))
        self.C4 = self.C3 / rho_quarter
        if not (self.C1 > 0 and self.C3 > 0):
            raise ValueError("degenerate rho realization")

    def value(self, t):
        return 2.0 * self.step.value(np.asarray(t, dtype=float) + 0.5) - 1.0

    def d1(self, t):
        return 2.0 * self.step.d1(np.asarray(t, dtype=float) + 0.5)

    def d2(self, t):
        return 2.0 * self.step.d2(np.asarray(t, dtype=float) + 0.5)


@dataclass(frozen=True)
class CutoffSpec:
    """Radii and sharpness for the shell/box cutoffs.

    R >= 1 is the shell radius, r in (0,1] the relative shell width
    (the standard shell uses r = 1/R), L >= 1 the box radius.
    """

    R: float = 8.0
    r: float = 0.125
    L: float = 8.0
    sharpness: float = 1.0
    chi: BumpCutoff = field(init=False, repr=False, compare=False)
    rho: RhoProfile = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.R < 1.0:
            raise ValueError("cutoff radius R must be >= 1")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("shell width r must lie in (0, 1]")
        if self.L < 1.0:
            raise ValueError("box radius L must be >= 1")
        object.__setattr__(self, "chi", BumpCutoff(self.sharpness))
        object.__setattr__(self, "rho", RhoProfile(self.sharpness))

    def with_R(self, R: float) -> "CutoffSpec":
        return CutoffSpec(R=R, r=1.0 / R, L=self.L, sharpness=self.sharpness)

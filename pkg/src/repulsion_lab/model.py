"""Model definition: the repulsive operator -Delta - <x>^(2a) + Op(V).

The perturbation symbol is

    V(x, xi) = a(x) |xi|^2 + b(x) (xi_1 + ... + xi_n) + c(x),

with isotropic radial profiles given as sums of powers  coef * <x>^power.
Admissible decay (checked by ``validate_model`` in :mod:`phase_space`):
c-powers <= 2*alpha - mu, b-powers <= alpha - mu, a-powers <= -mu.

This module also provides the 1D scalar views used by the phase recursion
and the ODE realization: coefficient profiles with two derivatives, the
symbol and its xi/x partials, and the smooth bridge between the <x>^(2a)
well and the homogeneous |x|^(2a) well (``tilde_shift``), evaluated in a
cancellation-free form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cutoffs import CutoffSpec

__all__ = ["PowerTerm", "ModelSpec", "RadialCoefficients", "tilde_shift"]


@dataclass(frozen=True)
class PowerTerm:
    """One radial profile term  coef * <x>^power."""

    coef: float
    power: float


def _terms(seq) -> tuple[PowerTerm, ...]:
    out = []
    for item in seq or ():
        if isinstance(item, PowerTerm):
            out.append(item)
        else:
            coef, power = item
            out.append(PowerTerm(float(coef), float(power)))
    return tuple(out)


@dataclass(frozen=True)
class ModelSpec:
    """Operator data: exponents alpha > 1, 0 < mu < 1/2, dimension n,
    and the three radial term families of the symbol V."""

    alpha: float
    mu: float = 0.4
    n: int = 1
    c_terms: tuple[PowerTerm, ...] = ()
    b_terms: tuple[PowerTerm, ...] = ()
    a_terms: tuple[PowerTerm, ...] = ()
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        if not 0.0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if int(self.n) < 1:
            raise ValueError("dimension n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "c_terms", _terms(self.c_terms))
        object.__setattr__(self, "b_terms", _terms(self.b_terms))
        object.__setattr__(self, "a_terms", _terms(self.a_terms))

    # -- power-bound rule check (decay admissibility at derivative order 0)
    def term_violations(self) -> list[str]:
        bad = []
        for name, terms, bound in (
            ("c", self.c_terms, 2.0 * self.alpha - self.mu),
            ("b", self.b_terms, self.alpha - self.mu),
            ("a", self.a_terms, -self.mu),
        ):
            for t in terms:
                if t.power > bound + 1e-12:
                    bad.append(
                        f"{name}-term power {t.power} exceeds bound {bound}"
                    )
        return bad

    @property
    def is_multiplication(self) -> bool:
        return not self.a_terms and not self.b_terms

    @property
    def has_potential(self) -> bool:
        return bool(self.a_terms or self.b_terms or self.c_terms)

    # -- JSON config ---------------------------------------------------
    @classmethod
    def from_dict(cls, cfg: dict) -> "ModelSpec":
        cut = cfg.get("cutoff", {})
        cutoff = CutoffSpec(
            R=float(cut.get("R", 8.0)),
            r=float(cut.get("r", 1.0 / float(cut.get("R", 8.0)))),
            L=float(cut.get("L", 8.0)),
            sharpness=float(cut.get("sharpness", 1.0)),
        )
        return cls(
            alpha=float(cfg["alpha"]),
            mu=float(cfg.get("mu", 0.4)),
            n=int(cfg.get("n", 1)),
            c_terms=cfg.get("c_terms", ()),
            b_terms=cfg.get("b_terms", ()),
            a_terms=cfg.get("a_terms", ()),
            cutoff=cutoff,
        )

    @classmethod
    def from_json(cls, path) -> "ModelSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mu": self.mu,
            "n": self.n,
            "c_terms": [[t.coef, t.power] for t in self.c_terms],
            "b_terms": [[t.coef, t.power] for t in self.b_terms],
            "a_terms": [[t.coef, t.power] for t in self.a_terms],
            "cutoff": {
                "R": self.cutoff.R,
                "r": self.cutoff.r,
                "L": self.cutoff.L,
                "sharpness": self.cutoff.sharpness,
            },
        }


def _profile(terms: Sequence[PowerTerm], x, order: int):
    """d^order/dx^order of sum coef*<x>^power, for signed scalar/array x."""
    x = np.asarray(x, dtype=float)
    w2 = 1.0 + x * x
    out = np.zeros_like(x)
    for t in terms:
        p = t.power
        if order == 0:
            out = out + t.coef * w2 ** (0.5 * p)
        elif order == 1:
            out = out + t.coef * p * x * w2 ** (0.5 * p - 1.0)
        elif order == 2:
            out = out + t.coef * p * (
                w2 ** (0.5 * p - 1.0)
                + (p - 2.0) * x * x * w2 ** (0.5 * p - 2.0)
            )
        else:
            raise ValueError("profile derivatives available up to order 2")
    return out if out.ndim else float(out)


class RadialCoefficients:
    """1D coefficient callbacks a, b, c with two derivatives each."""

    def __init__(self, model: ModelSpec):
        self.model = model

    def a(self, x, order: int = 0):
        return _profile(self.model.a_terms, x, order)

    def b(self, x, order: int = 0):
        return _profile(self.model.b_terms, x, order)

    def c(self, x, order: int = 0):
        return _profile(self.model.c_terms, x, order)

    # -- symbol views (1D) --------------------------------------------
    def V(self, x, xi):
        return self.a(x) * xi * xi + self.b(x) * xi + self.c(x)

    def V_xi(self, x, xi):
        return 2.0 * self.a(x) * xi + self.b(x)

    def V_xixi(self, x):
        return 2.0 * self.a(x)

    def V_x(self, x, xi):
        return self.a(x, 1) * xi * xi + self.b(x, 1) * xi + self.c(x, 1)

    def V_xx(self, x, xi):
        return self.a(x, 2) * xi * xi + self.b(x, 2) * xi + self.c(x, 2)


def tilde_shift(x, alpha: float, order: int = 0):
    """<x>^(2a) - |x|^(2a) and its first two derivatives, for x > 0.

    Evaluated as x^(2a) * expm1(k * log1p(x^-2)) to avoid the catastrophic
    cancellation of the direct difference at large x.
    """
    x = np.asarray(x, dtype=float)
    L = np.log1p(1.0 / (x * x))
    if order == 0:
        return x ** (2.0 * alpha) * np.expm1(alpha * L)
    if order == 1:
        return 2.0 * alpha * x ** (2.0 * alpha - 1.0) * np.expm1((alpha - 1.0) * L)
    if order == 2:
        return (
            2.0
            * alpha
            * x ** (2.0 * alpha - 2.0)
            * (
                np.expm1((alpha - 1.0) * L)
                + (2.0 * alpha - 2.0) * np.expm1((alpha - 2.0) * L)
            )
        )
    raise ValueError("tilde_shift derivatives available up to order 2")

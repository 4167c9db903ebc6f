"""Harmonic polynomial probe functions and their derivatives.

Probes are complex polynomials built from (x+iz)^n/n!, (y+iz)^n/n!, and
(x+iy)^n/n!, harmonic by construction. They are represented as lists of
monomials (px, py, pz, coeff) in box-centered coordinates, so every
derivative, seam jump, and surface restriction stays exact integer-power
arithmetic that downstream quadrature can consume term by term.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

FAMILIES = ("x", "y", "xy", "x_plus_y")
PARTS = ("real", "imaginary")

# monomial: coeff * xc**px * yc**py * z**pz
Monomial = tuple[int, int, int, complex]


@dataclass(frozen=True)
class TestFunctionSpec:
    """One probe: family, polynomial degree, and which part is audited."""

    __test__ = False  # not a pytest class despite the name

    family: str
    n: int
    part: str = "real"

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("degree must be >= 1")
        if self.part not in PARTS:
            raise ValueError(f"part must be one of {PARTS}")
        if self.family == "x_plus_y" and self.n != 3:
            raise ValueError("the combined family is defined for n = 3 only")

    def label(self) -> str:
        base = {"x": "psi^x", "y": "psi^y", "xy": "psi^xy",
                "x_plus_y": "psi^x+psi^y"}[self.family]
        return f"{base}_{self.n}"


def _single_family_terms(family: str, n: int) -> list[Monomial]:
    out: list[Monomial] = []
    for j in range(n + 1):
        c = (1j) ** j / (factorial(n - j) * factorial(j))
        if family == "x":
            out.append((n - j, 0, j, c))
        elif family == "y":
            out.append((0, n - j, j, c))
        else:  # xy
            out.append((n - j, j, 0, c))
    return out


def psi_terms(spec: TestFunctionSpec) -> list[Monomial]:
    """Monomial expansion of the probe itself."""
    if spec.family == "x_plus_y":
        return (_single_family_terms("x", spec.n)
                + _single_family_terms("y", spec.n))
    return _single_family_terms(spec.family, spec.n)


_VAR_INDEX = {"x": 0, "y": 1, "z": 2}


def _diff(terms: list[Monomial], var: str) -> list[Monomial]:
    i = _VAR_INDEX[var]
    out = []
    for t in terms:
        p = t[i]
        if p == 0:
            continue
        new = list(t[:3])
        new[i] = p - 1
        out.append((new[0], new[1], new[2], t[3] * p))
    return out


def derivative_terms(spec: TestFunctionSpec, which: str) -> list[Monomial]:
    """Monomials of a repeated partial derivative, e.g. "zx" or "zz"."""
    terms = psi_terms(spec)
    for var in which:
        terms = _diff(terms, var)
    return terms


def eval_terms(terms: list[Monomial], x, y, z) -> np.ndarray:
    """Evaluate a monomial list at (broadcastable) coordinate arrays."""
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                  np.asarray(z, float))
    out = np.zeros(x.shape, dtype=complex)
    for a, b, c, co in terms:
        out += co * x**a * y**b * z**c
    return out


def jump_terms(terms: list[Monomial], axis: int, L: float) -> list[Monomial]:
    """Seam jump f(+L/2) - f(-L/2) applied to the axis coordinate.

    Even powers cancel; odd powers leave 2 (L/2)^p. The returned monomials
    no longer depend on the jumped coordinate.
    """
    out = []
    for a, b, c, co in terms:
        p = a if axis == 0 else b
        if p % 2 == 0:
            continue
        co2 = co * 2.0 * (L / 2.0) ** p
        out.append((0, b, c, co2) if axis == 0 else (a, 0, c, co2))
    return out


DEFAULT_PROBES = (
    TestFunctionSpec("x", 1),
    TestFunctionSpec("x", 2),
    TestFunctionSpec("y", 2),
    TestFunctionSpec("xy", 2),
    TestFunctionSpec("x", 3),
    TestFunctionSpec("x_plus_y", 3),
)

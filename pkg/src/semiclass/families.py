"""Built-in symbols, cutoffs and operator families used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quantize import OperatorMatrix, PhaseSpaceGrid, quantize_schrodinger, weyl_quantize
from .symbols import CallableSymbol, PolySymbol

__all__ = [
    "bump",
    "smooth_step",
    "radial_cutoff",
    "standard_cutoff",
    "localizing_cutoff",
    "Family",
    "oscillator_family",
    "complex_perturbed_family",
    "polynomial_family",
    "garding_test_symbol",
    "FAMILIES",
    "family_by_id",
]


def bump(t):
    """C^infty bump on (-1, 1) with bump(0) = 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def _psi(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C^infty function equal to 1 for t <= 0 and 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a, b = _psi(1.0 - t), _psi(t)
    return a / (a + b)


def radial_cutoff(dim: int, inner: float, outer: float, name: str | None = None) -> CallableSymbol:
    """Radial cutoff on R^{2n}: 1 on |X| <= inner, supported in |X| <= outer."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")

    def f(X):
        r = np.sqrt(np.sum(np.asarray(X, dtype=float) ** 2, axis=0))
        return smooth_step((r - inner) / (outer - inner))

    return CallableSymbol(dim, f, name or f"cutoff[{inner:g},{outer:g}]", support_radius=outer)


def standard_cutoff(dim: int) -> CallableSymbol:
    """chi: 1 on |X| <= 1, supported in |X| <= 2."""
    return radial_cutoff(dim, 1.0, 2.0, "chi")


def localizing_cutoff(dim: int, inner: float = 2.2) -> CallableSymbol:
    """psi: 1 near |X| <= 2 (here on |X| <= ``inner``), supported in |X| <= 3."""
    if not 2.0 < inner < 3.0:
        raise ValueError("psi must equal 1 on a neighbourhood of |X| <= 2 and vanish for |X| >= 3")
    return radial_cutoff(dim, inner, 3.0, "psi")


@dataclass
class Family:
    """An h-family of operators P = Op_h^w(p) with its symbol and metadata.

    ``potential`` / ``absorption`` are set for Schrodinger-type symbols
    |xi|^2 + V + iW, which quantize through the spectral fast path.
    """

    id: str
    dim: int
    symbol: object
    potential: Callable | None = None
    absorption: Callable | None = None
    exact_oscillator: bool = False
    description: str = ""

    def operator(self, grid: PhaseSpaceGrid, matrix_free: bool | None = None) -> OperatorMatrix:
        if grid.n != self.dim:
            raise ValueError(f"family {self.id} has n={self.dim}, grid has n={grid.n}")
        if self.potential is not None:
            return quantize_schrodinger(self.potential, self.absorption, grid,
                                        matrix_free=matrix_free, desc=self.description or self.id)
        return weyl_quantize(self.symbol, grid)

    def __call__(self, grid: PhaseSpaceGrid) -> OperatorMatrix:
        return self.operator(grid)


def oscillator_family(dim: int) -> Family:
    def V(*x):
        return sum(xi * xi for xi in x)

    return Family("oscillator", dim, PolySymbol.oscillator(dim), V, None, True, f"|xi|^2 + |x|^2 (n={dim})")


def _perturbed_V(*x):
    x1 = x[0]
    return sum(xi * xi for xi in x) + 0.3 * x1**3 * bump(x1)


def _perturbed_W(*x):
    x1 = x[0]
    return 0.2 * x1 * x1 * np.tanh(x1)


def complex_perturbed_family(dim: int) -> Family:
    """|xi|^2 + |x|^2 + 0.3 x1^3 bump(x1) + 0.2 i x1^2 tanh(x1)."""

    def p(X):
        X = np.asarray(X, dtype=float)
        x, xi = X[:dim], X[dim:]
        return np.sum(xi**2, axis=0) + _perturbed_V(*x) + 1j * _perturbed_W(*x)

    sym = CallableSymbol(dim, p, "|xi|^2 + |x|^2 + 0.3 x1^3 bump(x1) + 0.2i x1^2 tanh(x1)")
    return Family("complex_perturbed", dim, sym, _perturbed_V, _perturbed_W, False, sym.description)


def polynomial_family(p: PolySymbol, family_id: str = "polynomial") -> Family:
    V = p.schrodinger_split()
    if V is None:
        return Family(family_id, p.dim, p, description=p.to_string())

    def pot(*x):
        X = np.stack(list(np.broadcast_arrays(*x)) + [np.zeros_like(np.asarray(x[0], dtype=float))] * p.dim)
        return V(X)

    return Family(family_id, p.dim, p, pot, None, p == PolySymbol.oscillator(p.dim), p.to_string())


def garding_test_symbol() -> CallableSymbol:
    """a(x, xi) = x^2 + xi^2 + 0.5 sin(x) sin(xi) (n = 1).

    a >= 0 with a(0) = 0, since x^2 + xi^2 >= 2|x xi| >= 2|sin x sin xi|.
    """

    def a(X):
        x, xi = np.asarray(X, dtype=float)
        return x * x + xi * xi + 0.5 * np.sin(x) * np.sin(xi)

    return CallableSymbol(1, a, "x^2 + xi^2 + 0.5 sin(x) sin(xi)")


FAMILIES: dict[str, Callable[[int], Family]] = {
    "oscillator": oscillator_family,
    "complex_perturbed": complex_perturbed_family,
}


def family_by_id(name: str, dim: int) -> Family:
    try:
        return FAMILIES[name](dim)
    except KeyError:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}") from None

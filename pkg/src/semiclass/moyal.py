"""Weyl composition of polynomial symbols.

For polynomial symbols the Moyal expansion terminates, so ``a # b`` is an
exact finite sum.  The semiclassical parameter is kept formal: an
:class:`HSeries` is a polynomial in ``h`` whose coefficients are
:class:`~semiclass.symbols.PolySymbol` objects.

Sign conventions.  ``sigma_power_term(a, b, k)`` is the symbol obtained by
applying ``sigma(D)^k``, ``sigma = D_xi.D_y - D_x.D_eta``, to ``a(x,xi)b(y,eta)``
and restricting to the diagonal.  The Poisson bracket is
``{a,b} = sum_j d_xi_j a d_x_j b - d_x_j a d_xi_j b`` (so ``{xi, x} = 1``), and
the first-order term is ``sigma_power_term(a, b, 1) = -{a, b}``.  Hence::

    a # b = ab + (h/2i){a,b} + O(h^2),     a # b - b # a = -i h {a,b} + O(h^3).
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterator, Mapping

from .symbols import GaussRat, PolySymbol

__all__ = [
    "HSeries",
    "sigma_power_term",
    "star_terms",
    "star_product",
    "star_commutator",
    "poisson_bracket",
    "truncated_star_product",
]


class HSeries:
    """Polynomial in a formal parameter ``h`` with PolySymbol coefficients."""

    __slots__ = ("dim", "_coeffs")

    def __init__(self, dim: int, coeffs: Mapping[int, PolySymbol] | None = None):
        self.dim = dim
        acc: dict[int, PolySymbol] = {}
        for k, c in (coeffs or {}).items():
            if c.dim != dim:
                raise ValueError("dimension mismatch")
            acc[k] = acc[k] + c if k in acc else c
        self._coeffs = {k: acc[k] for k in sorted(acc) if not acc[k].is_zero()}

    @classmethod
    def lift(cls, a) -> "HSeries":
        if isinstance(a, HSeries):
            return a
        return cls(a.dim, {0: a})

    @property
    def coeffs(self) -> dict[int, PolySymbol]:
        return dict(self._coeffs)

    def coeff(self, k: int) -> PolySymbol:
        return self._coeffs.get(k, PolySymbol(self.dim))

    def is_zero(self) -> bool:
        return not self._coeffs

    def __add__(self, other):
        o = HSeries.lift(other)
        out = dict(self._coeffs)
        for k, c in o._coeffs.items():
            out[k] = out[k] + c if k in out else c
        return HSeries(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return HSeries(self.dim, {k: -c for k, c in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-HSeries.lift(other))

    def __rsub__(self, other):
        return HSeries.lift(other) - self

    def scale(self, c) -> "HSeries":
        return HSeries(self.dim, {k: v * c for k, v in self._coeffs.items()})

    def __eq__(self, other):
        if isinstance(other, (HSeries, PolySymbol)):
            o = HSeries.lift(other)
            return self.dim == o.dim and self._coeffs == o._coeffs
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, tuple(self._coeffs.items())))

    def conj(self) -> "HSeries":
        """Complex conjugation with h treated as real."""
        return HSeries(self.dim, {k: c.conj() for k, c in self._coeffs.items()})

    def at(self, h) -> PolySymbol:
        """Substitute a numerical (or exact rational) value for h."""
        out = PolySymbol(self.dim)
        hh = GaussRat.coerce(h)
        for k, c in self._coeffs.items():
            out = out + c * hh**k
        return out

    def to_string(self) -> str:
        if not self._coeffs:
            return "0"
        parts = []
        for k, c in self._coeffs.items():
            if k == 0:
                parts.append(c.to_string())
                continue
            hk = "h" if k == 1 else f"h^{k}"
            body = c.to_string()
            parts.append(f"({body}){hk}" if body != "1" else hk)
        return " + ".join(parts)

    __str__ = to_string

    def __repr__(self):
        return f"HSeries(dim={self.dim}, '{self.to_string()}')"

    def to_json(self) -> dict:
        return {"dim": self.dim, "orders": {str(k): c.to_json() for k, c in self._coeffs.items()}}

    @classmethod
    def from_json(cls, obj) -> "HSeries":
        return cls(obj["dim"], {int(k): PolySymbol.from_json(v) for k, v in obj["orders"].items()})


def _multi_indices(n: int, total: int) -> Iterator[tuple[int, ...]]:
    for combo in itertools.product(range(total + 1), repeat=n):
        if sum(combo) == total:
            yield combo


def _prod_factorial(idx) -> int:
    out = 1
    for i in idx:
        out *= math.factorial(i)
    return out


def sigma_power_term(a: PolySymbol, b: PolySymbol, k: int) -> PolySymbol:
    """Sum over |alpha|+|beta| = k of
    (-1)^|alpha| k!/(alpha! beta!) (d_xi^alpha d_x^beta a)(d_x^alpha d_xi^beta b)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    n = a.dim
    out = PolySymbol(n)
    for la in range(k + 1):
        for alpha in _multi_indices(n, la):
            for beta in _multi_indices(n, k - la):
                da = a.partial(beta, alpha)
                if da.is_zero():
                    continue
                db = b.partial(alpha, beta)
                if db.is_zero():
                    continue
                weight = Fraction((-1) ** la * math.factorial(k), _prod_factorial(alpha) * _prod_factorial(beta))
                out = out + (da * db) * weight
    return out


_IH_OVER_2 = GaussRat(0, Fraction(1, 2))


def star_terms(a: PolySymbol, b: PolySymbol, max_order: int | None = None) -> list[tuple[int, PolySymbol]]:
    """Non-zero expansion terms ``(k, (1/k!)(i/2)^k sigma^k(a,b))``; the
    h-power of term k is h^k.  Terminates at k = min(deg a, deg b)."""
    top = min(a.degree, b.degree)
    if max_order is not None:
        top = min(top, max_order)
    terms = []
    if top >= 0:
        terms.append((0, a * b))
    for k in range(1, top + 1):
        t = sigma_power_term(a, b, k) * (_IH_OVER_2**k / math.factorial(k))
        if not t.is_zero():
            terms.append((k, t))
    return terms


def _star_poly(a: PolySymbol, b: PolySymbol) -> HSeries:
    return HSeries(a.dim, dict(star_terms(a, b)))


def star_product(a, b, h=None):
    """Exact ``a # b``.

    With ``h=None`` the result is an :class:`HSeries` in formal h; otherwise
    h is substituted and a PolySymbol is returned.  HSeries inputs are
    handled bilinearly, so (a # b) # c can be formed in formal h.
    """
    A, B = HSeries.lift(a), HSeries.lift(b)
    out = HSeries(A.dim)
    for i, ai in A.coeffs.items():
        for j, bj in B.coeffs.items():
            part = _star_poly(ai, bj)
            out = out + HSeries(A.dim, {k + i + j: c for k, c in part.coeffs.items()})
    return out if h is None else out.at(h)


def star_commutator(a, b, h=None):
    """a # b - b # a."""
    out = star_product(a, b) - star_product(b, a)
    return out if h is None else out.at(h)


def poisson_bracket(a: PolySymbol, b: PolySymbol) -> PolySymbol:
    """{a, b} = sum_j (d_xi_j a)(d_x_j b) - (d_x_j a)(d_xi_j b)."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    out = PolySymbol(a.dim)
    for j in range(a.dim):
        out = out + a.dxi(j) * b.dx(j) - a.dx(j) * b.dxi(j)
    return out


def truncated_star_product(a: PolySymbol, b: PolySymbol, order: int) -> tuple[HSeries, list[int]]:
    """Expansion up to h^order; also returns the orders that were dropped."""
    full = star_terms(a, b)
    kept = {k: t for k, t in full if k <= order}
    dropped = [k for k, _ in full if k > order]
    return HSeries(a.dim, kept), dropped

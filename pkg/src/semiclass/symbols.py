"""Phase-space symbols.

Two representations live here:

* :class:`PolySymbol` -- an exact polynomial in ``(x_1..x_n, xi_1..xi_n)``
  with Gaussian-rational coefficients.  Arithmetic and differentiation are
  exact, which is what the Moyal calculus and the golden tests rely on.
* :class:`CallableSymbol` -- any vectorised function of a phase-space point,
  used for cutoffs and non-polynomial potentials.

Both evaluate on arrays ``X`` of shape ``(2n, ...)`` (positions first).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.stats import qmc

__all__ = [
    "GaussRat",
    "PolySymbol",
    "CallableSymbol",
    "AssumptionReport",
    "NotDoublyCharacteristicError",
    "SymbolParseError",
    "parse_symbol",
    "quadratic_part",
    "remainder_part",
    "fd_hessian",
    "check_assumptions",
    "rescaled",
    "evaluate",
]

ZERO_TOL = 1e-8
FD_STEP = 1e-4
SAMPLING_SEED = 20240917


class NotDoublyCharacteristicError(ValueError):
    """Raised when p(0) or grad p(0) is not (numerically) zero."""


class SymbolParseError(ValueError):
    pass


class GaussRat:
    """Exact complex rational ``re + i*im``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, value) -> "GaussRat":
        if isinstance(value, GaussRat):
            return value
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        if isinstance(value, (int, Fraction)):
            return cls(value, 0)
        if isinstance(value, float):
            if not math.isfinite(value):
                raise ValueError("non-finite coefficient")
            return cls(Fraction(value), 0)
        if isinstance(value, np.generic):
            return cls.coerce(value.item())
        if isinstance(value, Number):
            return cls.coerce(complex(value))
        raise TypeError(f"cannot use {type(value).__name__} as a coefficient")

    def __add__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussRat.coerce(other) - self

    def __mul__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussRat.coerce(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("GaussRat division by zero")
        return self * GaussRat(o.re / d, -o.im / d)

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __pow__(self, k: int):
        out = GaussRat(1)
        for _ in range(k):
            out = out * self
        return out

    def conjugate(self):
        return GaussRat(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        return f"GaussRat({self.re}, {self.im})"

    def __str__(self):
        return _format_coeff(self)


def _format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _format_imag(q: Fraction) -> str:
    num, den = q.numerator, q.denominator
    head = {1: "i", -1: "-i"}.get(num, f"{num}i")
    return head if den == 1 else f"{head}/{den}"


def _format_coeff(c: GaussRat) -> str:
    if c.im == 0:
        return _format_rational(c.re)
    if c.re == 0:
        return _format_imag(c.im)
    imag = _format_imag(abs(c.im))
    sign = "+" if c.im > 0 else "-"
    return f"{_format_rational(c.re)}{sign}{imag}"


def _var_names(dim: int) -> list[str]:
    return [f"x{j + 1}" for j in range(dim)] + [f"xi{j + 1}" for j in range(dim)]


class PolySymbol:
    """Exact polynomial symbol on R^{2n}.

    ``terms`` maps exponent tuples of length ``2n`` (x-exponents first, then
    xi-exponents) to coefficients.  Zero coefficients are dropped and terms
    are kept in canonical order, so equal polynomials compare and hash equal.
    """

    __slots__ = ("dim", "_terms", "_complex_cache")

    def __init__(self, dim: int, terms: Mapping[tuple[int, ...], object] | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        acc: dict[tuple[int, ...], GaussRat] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != 2 * dim or min(exps, default=0) < 0:
                raise ValueError(f"bad multi-index {exps} for dim={dim}")
            c = GaussRat.coerce(c)
            acc[exps] = acc.get(exps, GaussRat()) + c
        self._terms = {k: acc[k] for k in sorted(acc) if acc[k]}
        self._complex_cache = None

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, dim: int, c) -> "PolySymbol":
        return cls(dim, {(0,) * (2 * dim): c})

    @classmethod
    def var(cls, dim: int, index: int) -> "PolySymbol":
        """Coordinate function X_index (0-based over the 2n variables)."""
        exps = [0] * (2 * dim)
        exps[index] = 1
        return cls(dim, {tuple(exps): 1})

    @classmethod
    def x(cls, dim: int, j: int) -> "PolySymbol":
        return cls.var(dim, j)

    @classmethod
    def xi(cls, dim: int, j: int) -> "PolySymbol":
        return cls.var(dim, dim + j)

    @classmethod
    def oscillator(cls, dim: int) -> "PolySymbol":
        """|xi|^2 + |x|^2."""
        return cls(dim, {tuple(2 if i == k else 0 for i in range(2 * dim)): 1 for k in range(2 * dim)})

    # basic protocol -----------------------------------------------------
    @property
    def terms(self) -> dict[tuple[int, ...], GaussRat]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def homogeneous_part(self, d: int) -> "PolySymbol":
        return PolySymbol(self.dim, {e: c for e, c in self._terms.items() if sum(e) == d})

    def coeff(self, exps: tuple[int, ...]) -> GaussRat:
        return self._terms.get(tuple(exps), GaussRat())

    def _check(self, other: "PolySymbol"):
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def _lift(self, other) -> "PolySymbol":
        if isinstance(other, PolySymbol):
            self._check(other)
            return other
        return PolySymbol.constant(self.dim, other)

    def __add__(self, other):
        if isinstance(other, CallableSymbol):
            return NotImplemented
        o = self._lift(other)
        terms = dict(self._terms)
        for e, c in o._terms.items():
            terms[e] = terms.get(e, GaussRat()) + c
        return PolySymbol(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolySymbol(self.dim, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, CallableSymbol):
            return NotImplemented
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if isinstance(other, CallableSymbol):
            return NotImplemented
        o = self._lift(other)
        terms: dict[tuple[int, ...], GaussRat] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in o._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, GaussRat()) + c1 * c2
        return PolySymbol(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomial")
        out = PolySymbol.constant(self.dim, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PolySymbol):
            return self.dim == other.dim and self._terms == other._terms
        if isinstance(other, Number):
            return self == PolySymbol.constant(self.dim, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, tuple(self._terms.items())))

    def conj(self) -> "PolySymbol":
        return PolySymbol(self.dim, {e: c.conjugate() for e, c in self._terms.items()})

    def real_part(self) -> "PolySymbol":
        return PolySymbol(self.dim, {e: GaussRat(c.re) for e, c in self._terms.items()})

    def imag_part(self) -> "PolySymbol":
        return PolySymbol(self.dim, {e: GaussRat(c.im) for e, c in self._terms.items()})

    def diff(self, index: int, order: int = 1) -> "PolySymbol":
        """Exact partial derivative in variable ``index`` (0-based over 2n)."""
        terms = {}
        for e, c in self._terms.items():
            if e[index] < order:
                continue
            factor = math.perm(e[index], order)
            new = list(e)
            new[index] -= order
            terms[tuple(new)] = c * factor
        return PolySymbol(self.dim, terms)

    def dx(self, j: int, order: int = 1) -> "PolySymbol":
        return self.diff(j, order)

    def dxi(self, j: int, order: int = 1) -> "PolySymbol":
        return self.diff(self.dim + j, order)

    def partial(self, alpha_x: Iterable[int], beta_xi: Iterable[int]) -> "PolySymbol":
        out = self
        for j, a in enumerate(alpha_x):
            if a:
                out = out.dx(j, a)
        for j, b in enumerate(beta_xi):
            if b:
                out = out.dxi(j, b)
        return out

    def scaled(self, c) -> "PolySymbol":
        """The symbol X -> a(c X), computed exactly."""
        c = GaussRat.coerce(c)
        return PolySymbol(self.dim, {e: coef * c ** sum(e) for e, coef in self._terms.items()})

    def hessian(self) -> np.ndarray:
        """Exact Hessian at X = 0 as a complex (2n, 2n) array."""
        m = 2 * self.dim
        H = np.zeros((m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                e = [0] * m
                e[i] += 1
                e[j] += 1
                c = complex(self.coeff(tuple(e)))
                H[i, j] = 2 * c if i == j else c
        return H

    def gradient_at_zero(self) -> np.ndarray:
        m = 2 * self.dim
        return np.array([complex(self.coeff(tuple(int(k == i) for k in range(m)))) for i in range(m)])

    # evaluation ---------------------------------------------------------
    def _complex_terms(self):
        if self._complex_cache is None:
            self._complex_cache = [(e, complex(c)) for e, c in self._terms.items()]
        return self._complex_cache

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.shape[0] != 2 * self.dim:
            raise ValueError(f"expected leading axis {2 * self.dim}, got {X.shape[0]}")
        out = np.zeros(np.broadcast_shapes(*(np.shape(X[i]) for i in range(2 * self.dim))), dtype=complex)
        powers: dict[tuple[int, int], np.ndarray] = {}
        for e, c in self._complex_terms():
            term = c
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in powers:
                        powers[key] = X[i] ** k
                    term = term * powers[key]
            out = out + term
        return out

    def depends_on_xi(self) -> bool:
        return any(any(e[self.dim:]) for e in self._terms)

    def schrodinger_split(self):
        """Return the x-only potential if the symbol is |xi|^2 + V(x), else None."""
        kinetic = {tuple(2 if i == self.dim + j else 0 for i in range(2 * self.dim)) for j in range(self.dim)}
        rest = {}
        for e, c in self._terms.items():
            if e in kinetic:
                if c != 1:
                    return None
                continue
            if any(e[self.dim:]):
                return None
            rest[e] = c
        if not all(e in self._terms for e in kinetic):
            return None
        return PolySymbol(self.dim, rest)

    # text -----------------------------------------------------------------
    def to_string(self) -> str:
        if not self._terms:
            return "0"
        names = _var_names(self.dim)
        ordered = sorted(self._terms.items(), key=lambda t: (-sum(t[0]), tuple(-k for k in t[0])))
        parts = []
        for e, c in ordered:
            mono = "*".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
            negative = c.im == 0 and c.re < 0
            mag = -c if negative else c
            if not mono:
                text = _format_coeff(mag)
            elif mag == 1:
                text = mono
            else:
                cs = _format_coeff(mag)
                if mag.re != 0 and mag.im != 0 or "/" in cs:
                    cs = f"({cs})"
                text = f"{cs}*{mono}"
            parts.append(("-" if negative else "+", text))
        sign0, first = parts[0]
        out = ("-" if sign0 == "-" else "") + first
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"PolySymbol(dim={self.dim}, '{self.to_string()}')"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "terms": [
                [list(e), [str(c.re), str(c.im)]] for e, c in self._terms.items()
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "PolySymbol":
        return cls(
            obj["dim"],
            {tuple(e): GaussRat(Fraction(re), Fraction(im)) for e, (re, im) in obj["terms"]},
        )


@dataclass(frozen=True)
class CallableSymbol:
    """A symbol given by a vectorised evaluator ``X -> a(X)``.

    ``support_radius`` is set for compactly supported cutoffs (in the
    unscaled variable) and is used to detect unresolvable microlocal scales.
    """

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    support_radius: float | None = None
    x_only: bool = False

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.asarray(self.evaluator(X), dtype=complex)

    @classmethod
    def from_poly(cls, p: PolySymbol) -> "CallableSymbol":
        return cls(p.dim, p, p.to_string(), x_only=not p.depends_on_xi())

    def real_part(self) -> "CallableSymbol":
        f = self.evaluator
        return CallableSymbol(self.dim, lambda X: np.real(f(X)), f"Re({self.description})",
                              self.support_radius, self.x_only)

    def __add__(self, other):
        a, b = self, as_callable(other, self.dim)
        return CallableSymbol(self.dim, lambda X: a(X) + b(X), f"({a.description}) + ({b.description})",
                              x_only=a.x_only and b.x_only)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, as_callable(other, self.dim)
        return CallableSymbol(self.dim, lambda X: a(X) - b(X), f"({a.description}) - ({b.description})",
                              x_only=a.x_only and b.x_only)

    def __rsub__(self, other):
        return as_callable(other, self.dim) - self

    def __mul__(self, other):
        a, b = self, as_callable(other, self.dim)
        return CallableSymbol(self.dim, lambda X: a(X) * b(X), f"({a.description}) * ({b.description})",
                              x_only=a.x_only and b.x_only)

    __rmul__ = __mul__


def as_callable(a, dim: int | None = None) -> CallableSymbol:
    if isinstance(a, CallableSymbol):
        return a
    if isinstance(a, PolySymbol):
        return CallableSymbol.from_poly(a)
    if isinstance(a, Number):
        if dim is None:
            raise ValueError("dimension needed to lift a constant")
        c = complex(a)
        return CallableSymbol(dim, lambda X: np.full(np.shape(X)[1:], c), repr(a), x_only=True)
    raise TypeError(f"not a symbol: {type(a).__name__}")


def evaluate(a, X) -> np.ndarray:
    return np.asarray(a(X), dtype=complex)


def rescaled(a, s: float):
    """The symbol X -> a(X / s)."""
    if isinstance(a, PolySymbol):
        return a.scaled(Fraction(1) / Fraction(s))
    f = a.evaluator
    radius = None if a.support_radius is None else a.support_radius * s
    return CallableSymbol(a.dim, lambda X: f(np.asarray(X) / s), f"{a.description} at scale {s:g}",
                          radius, a.x_only)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9]))?"
    r"|(?P<var>xi\d*|x\d*)|(?P<unit>i(?![A-Za-z0-9]))|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SymbolParseError(f"unexpected input at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("num") is not None:
            val = Fraction(m.group("num"))
            yield ("num", GaussRat(0, val) if m.group("imag") else GaussRat(val))
        elif m.group("var") is not None:
            yield ("var", m.group("var"))
        elif m.group("unit") is not None:
            yield ("num", GaussRat(0, 1))
        else:
            yield ("op", m.group("op"))
        while pos < len(text) and text[pos].isspace():
            pos += 1


def _var_index(name: str, dim: int) -> int:
    is_xi = name.startswith("xi")
    digits = name[2:] if is_xi else name[1:]
    j = int(digits) if digits else 1
    if not 1 <= j <= dim:
        raise SymbolParseError(f"variable {name} out of range for n={dim}")
    return (dim if is_xi else 0) + j - 1


def infer_dim(text: str) -> int:
    idx = [int(m.group(2) or 1) for m in re.finditer(r"(xi|x)(\d*)", text)]
    return max(idx, default=1)


def parse_symbol(text: str, dim: int | None = None) -> PolySymbol:
    """Parse a polynomial symbol.

    Grammar: sums/differences of products of factors; factors are numbers,
    imaginary literals (``2i``, ``0.5i``, ``i``), variables ``x1..xn`` and
    ``xi1..xin`` (``x``/``xi`` alias the first axis), parentheses, and
    non-negative integer powers with ``^``.
    """
    if dim is None:
        dim = infer_dim(text)
    tokens = list(_tokenize(text))
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def expr():
        val = term()
        while peek() in (("op", "+"), ("op", "-")):
            _, op = take()
            rhs = term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def term():
        val = unary()
        while True:
            kind, v = peek()
            if (kind, v) == ("op", "*"):
                take()
                val = val * unary()
            elif kind in ("num", "var") or (kind, v) == ("op", "("):
                val = val * unary()  # implicit product, e.g. "2x1" or "3i(x1)"
            else:
                return val

    def unary():
        if peek() == ("op", "-"):
            take()
            return -unary()
        if peek() == ("op", "+"):
            take()
            return unary()
        return power()

    def power():
        base = atom()
        if peek() == ("op", "^"):
            take()
            kind, v = take()
            if kind != "num" or v.im != 0 or v.re.denominator != 1 or v.re < 0:
                raise SymbolParseError("exponent must be a non-negative integer")
            base = base ** int(v.re)
        return base

    def atom():
        kind, v = take()
        if kind == "num":
            return PolySymbol.constant(dim, v)
        if kind == "var":
            return PolySymbol.var(dim, _var_index(v, dim))
        if (kind, v) == ("op", "("):
            val = expr()
            if take() != ("op", ")"):
                raise SymbolParseError("missing ')'")
            return val
        raise SymbolParseError(f"unexpected token {v!r}")

    if not tokens:
        raise SymbolParseError("empty expression")
    result = expr()
    if pos != len(tokens):
        raise SymbolParseError(f"trailing input near token {tokens[pos][1]!r}")
    return result


# ---------------------------------------------------------------------------
# quadratic approximation


def _unit(m: int, i: int, s: float) -> np.ndarray:
    v = np.zeros(m)
    v[i] = s
    return v


def _eval_point(p, X: np.ndarray) -> complex:
    return complex(np.asarray(p(X.reshape(-1, 1)))[0])


def fd_gradient(p, step: float = FD_STEP) -> np.ndarray:
    """Fourth-order central-difference gradient at 0."""
    m = 2 * p.dim
    g = np.zeros(m, dtype=complex)
    for i in range(m):
        f = lambda s: _eval_point(p, _unit(m, i, s))  # noqa: E731
        g[i] = (8 * (f(step) - f(-step)) - (f(2 * step) - f(-2 * step))) / (12 * step)
    return g


def fd_hessian(p, step: float = FD_STEP) -> np.ndarray:
    """Second-order central-difference Hessian at 0 (error O(step^2))."""
    m = 2 * p.dim
    H = np.zeros((m, m), dtype=complex)
    f0 = _eval_point(p, np.zeros(m))
    for i in range(m):
        ei = _unit(m, i, step)
        H[i, i] = (_eval_point(p, ei) - 2 * f0 + _eval_point(p, -ei)) / step**2
        for j in range(i + 1, m):
            ej = _unit(m, j, step)
            H[i, j] = H[j, i] = (
                _eval_point(p, ei + ej) - _eval_point(p, ei - ej)
                - _eval_point(p, ej - ei) + _eval_point(p, -ei - ej)
            ) / (4 * step**2)
    return H


def _quadratic_from_hessian(dim: int, H: np.ndarray) -> PolySymbol:
    m = 2 * dim
    terms = {}
    for i in range(m):
        for j in range(i, m):
            e = [0] * m
            e[i] += 1
            e[j] += 1
            c = complex(H[i, j]) if i != j else complex(H[i, i]) / 2
            terms[tuple(e)] = c
    return PolySymbol(dim, terms)


def quadratic_part(p, tol: float = ZERO_TOL, step: float = FD_STEP) -> PolySymbol:
    """q(X) = p''(0)X.X / 2 for a symbol doubly characteristic at 0."""
    if isinstance(p, PolySymbol):
        value = abs(complex(p.coeff((0,) * (2 * p.dim))))
        grad = np.abs(p.gradient_at_zero())
        if value > tol or grad.max(initial=0.0) > tol:
            raise NotDoublyCharacteristicError(
                f"not doubly characteristic at 0: |p(0)|={value:.3g}, |grad p(0)|={grad.max():.3g}"
            )
        return p.homogeneous_part(2)
    value = abs(_eval_point(p, np.zeros(2 * p.dim)))
    grad = np.abs(fd_gradient(p, step))
    if value > tol or grad.max() > tol:
        raise NotDoublyCharacteristicError(
            f"not doubly characteristic at 0: |p(0)|={value:.3g}, |grad p(0)|={grad.max():.3g}"
        )
    return _quadratic_from_hessian(p.dim, fd_hessian(p, step))


def remainder_part(p, q: PolySymbol):
    """r = p - q."""
    if isinstance(p, PolySymbol):
        return p - q
    return as_callable(p) - CallableSymbol.from_poly(q)


# ---------------------------------------------------------------------------
# standing assumptions


@dataclass
class AssumptionReport:
    nonneg_real_part: bool
    nonneg_violation: float
    nonneg_witness: list[float] | None
    ellipticity_constant: float
    ellipticity_ok: bool
    zero_set_ok: bool
    doubly_characteristic: bool
    hessian: np.ndarray | None
    re_q_min_eig: float
    lower_bound_C: float
    sample_radius: float
    n_samples: int
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.nonneg_real_part and self.ellipticity_ok and self.zero_set_ok
                and self.doubly_characteristic and self.re_q_min_eig > 0)

    def to_dict(self) -> dict:
        H = None if self.hessian is None else [
            [[float(z.real), float(z.imag)] for z in row] for row in self.hessian
        ]
        return {
            "passed": self.passed,
            "nonneg_real_part": self.nonneg_real_part,
            "nonneg_violation": self.nonneg_violation,
            "nonneg_witness": self.nonneg_witness,
            "ellipticity_constant": self.ellipticity_constant,
            "ellipticity_ok": self.ellipticity_ok,
            "zero_set_ok": self.zero_set_ok,
            "doubly_characteristic": self.doubly_characteristic,
            "hessian": H,
            "re_q_min_eig": self.re_q_min_eig,
            "lower_bound_C": self.lower_bound_C,
            "sample_radius": self.sample_radius,
            "n_samples": self.n_samples,
            "messages": list(self.messages),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: Mapping) -> "AssumptionReport":
        H = d["hessian"]
        return cls(
            nonneg_real_part=d["nonneg_real_part"],
            nonneg_violation=d["nonneg_violation"],
            nonneg_witness=d["nonneg_witness"],
            ellipticity_constant=d["ellipticity_constant"],
            ellipticity_ok=d["ellipticity_ok"],
            zero_set_ok=d["zero_set_ok"],
            doubly_characteristic=d["doubly_characteristic"],
            hessian=None if H is None else np.array([[complex(a, b) for a, b in row] for row in H]),
            re_q_min_eig=d["re_q_min_eig"],
            lower_bound_C=d["lower_bound_C"],
            sample_radius=d["sample_radius"],
            n_samples=d["n_samples"],
            messages=list(d.get("messages", [])),
        )


def sample_points(dim: int, radius: float, n_samples: int, seed: int = SAMPLING_SEED) -> np.ndarray:
    """Deterministic scrambled-Sobol points, shape (2n, n_samples).

    Half the budget covers [-R, R]^{2n}, half the unit box, so both the
    behaviour at infinity and near the characteristic point are probed.
    """
    sampler = qmc.Sobol(d=2 * dim, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(n_samples, 2))))
    u = sampler.random_base2(m)[:n_samples]
    u = 2.0 * u - 1.0
    half = n_samples // 2
    pts = np.concatenate([radius * u[:half], u[half:]], axis=0)
    return pts.T


def check_assumptions(
    p,
    sample_radius: float = 20.0,
    n_samples: int = 4096,
    *,
    ellipticity_radius: float | None = None,
    zero_tol: float = 1e-3,
    seed: int = SAMPLING_SEED,
) -> AssumptionReport:
    """Sample the standing assumptions on ``p``; never raises on failure."""
    messages = []
    X = sample_points(p.dim, sample_radius, n_samples, seed)
    re_p = np.real(p(X))
    r2 = np.sum(X**2, axis=0)

    worst = int(np.argmin(re_p))
    nonneg = bool(re_p[worst] >= -1e-12)
    violation = 0.0 if nonneg else float(re_p[worst])
    witness = None if nonneg else [float(v) for v in X[:, worst]]
    if not nonneg:
        messages.append(f"Re p < 0 at sampled point {witness} (value {violation:.4g})")

    if ellipticity_radius is None:
        ellipticity_radius = sample_radius / 4
    far = np.sqrt(r2) >= ellipticity_radius
    ell = float(np.min(re_p[far] / (1.0 + r2[far]))) if far.any() else float("nan")
    ell_ok = bool(far.any() and ell > 0)
    if not ell_ok:
        messages.append(f"ellipticity at infinity fails: min Re p/<X>^2 = {ell:.4g}")

    away = np.sqrt(r2) > zero_tol
    zero_ok = bool(np.all(re_p[away] > 0))
    if not zero_ok:
        messages.append("Re p vanishes (or is negative) away from X = 0")

    hessian = None
    re_min = float("nan")
    doubly = True
    try:
        q = quadratic_part(p)
        hessian = q.hessian()
        A = 0.5 * np.real(hessian)
        re_min = float(np.linalg.eigvalsh(A)[0])
        if not re_min > 0:
            messages.append(f"Re q is not positive definite (min eigenvalue {re_min:.4g})")
    except NotDoublyCharacteristicError as exc:
        doubly = False
        messages.append(str(exc))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((r2 > 0) & (re_p > 0), r2 / re_p, np.inf)
    ratio = np.where(r2 > 0, ratio, 0.0)
    lower_C = float(np.max(ratio))

    return AssumptionReport(
        nonneg_real_part=nonneg,
        nonneg_violation=violation,
        nonneg_witness=witness,
        ellipticity_constant=ell,
        ellipticity_ok=ell_ok,
        zero_set_ok=zero_ok,
        doubly_characteristic=doubly,
        hessian=hessian,
        re_q_min_eig=re_min,
        lower_bound_C=lower_C,
        sample_radius=float(sample_radius),
        n_samples=int(n_samples),
        messages=messages,
    )

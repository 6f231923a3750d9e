"""Harmonic-oscillator oracle.

For ``P = -h^2 Lap + |x|^2`` on R^n the eigenvalues are ``(2|alpha| + n) h``
and the L^2-normalised eigenfunctions are products of scaled Hermite
functions.  Their L^p norms scale exactly like ``h^(n/(2p) - n/4)``; the
constant in front is computed once by quadrature and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "OscillatorState",
    "hermite_functions",
    "oscillator_eigenvalue",
    "eval_state",
    "lp_constant",
    "lp_norm_exact",
    "norm_exponent",
]

QUAD_RADIUS = 12.0
EXP_CUTOFF = 1400.0


def _as_alpha(alpha, n: int | None = None) -> tuple[int, ...]:
    if isinstance(alpha, (int, np.integer)):
        alpha = (int(alpha),)
    alpha = tuple(int(a) for a in alpha)
    if n is not None and len(alpha) != n:
        raise ValueError(f"multi-index {alpha} does not match n={n}")
    if any(a < 0 for a in alpha):
        raise ValueError("multi-index entries must be non-negative")
    return alpha


def hermite_functions(kmax: int, y) -> np.ndarray:
    """Normalised Hermite functions psi_0..psi_kmax at y, shape (kmax+1, *y.shape).

    Uses the three-term recurrence on the normalised functions, so no
    factorials appear and |alpha| ~ 20 is harmless.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros((kmax + 1,) + y.shape)
    with np.errstate(under="ignore"):
        out[0] = math.pi ** -0.25 * np.exp(-0.5 * y * y)
    out[0] = np.where(y * y > EXP_CUTOFF, 0.0, out[0])
    if kmax >= 1:
        out[1] = math.sqrt(2.0) * y * out[0]
    for k in range(1, kmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * y * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def oscillator_eigenvalue(alpha, h: float, n: int | None = None) -> float:
    alpha = _as_alpha(alpha, n)
    n = len(alpha)
    return (2 * sum(alpha) + n) * h


@dataclass(frozen=True)
class OscillatorState:
    alpha: tuple[int, ...]
    h: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_alpha(self.alpha))

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def eigenvalue(self) -> float:
        return oscillator_eigenvalue(self.alpha, self.h)

    def __call__(self, *x):
        return eval_state(self, *x)


def eval_state(state: OscillatorState, *x) -> np.ndarray:
    """u_alpha(h)(x) = h^(-n/4) prod_j psi_{alpha_j}(x_j / sqrt(h)).

    ``x`` is one (broadcastable) array per axis.  Points with
    |x|^2/h > 1400 evaluate to 0.
    """
    if len(x) != state.n:
        raise ValueError(f"expected {state.n} coordinate arrays")
    h = state.h
    sq = math.sqrt(h)
    val = h ** (-state.n / 4)
    r2 = 0.0
    for a, xi in zip(state.alpha, x):
        xi = np.asarray(xi, dtype=float)
        val = val * hermite_functions(a, xi / sq)[a]
        r2 = r2 + xi * xi / h
    return np.where(r2 > EXP_CUTOFF, 0.0, val)


def norm_exponent(p: float, n: int) -> float:
    """Exponent e in ||u_alpha(h)||_p = C_alpha h^e."""
    if p < 2:
        raise ValueError("p must be >= 2")
    return n / (2 * p) - n / 4 if math.isfinite(p) else -n / 4


@lru_cache(maxsize=None)
def _lp_constant_1d(k: int, p: float) -> float:
    if math.isinf(p):
        ys = np.arange(-QUAD_RADIUS, QUAD_RADIUS + 5e-4, 1e-3)
        vals = np.abs(hermite_functions(k, ys)[k])
        i = int(np.argmax(vals))
        lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, len(ys) - 1)]
        res = optimize.minimize_scalar(
            lambda y: -abs(hermite_functions(k, np.array(y))[k]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        return float(max(vals[i], -res.fun))
    f = lambda y: abs(float(hermite_functions(k, np.array(y))[k])) ** p  # noqa: E731
    # split at the Hermite zeros region so quad sees smooth pieces
    breaks = np.linspace(-QUAD_RADIUS, QUAD_RADIUS, 25)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total ** (1.0 / p)


def lp_constant(alpha, p: float) -> float:
    """C_alpha = ||u_alpha(1)||_p, using the product structure across axes."""
    if p < 2:
        raise ValueError("p must be >= 2")
    alpha = _as_alpha(alpha)
    p = float(p)
    out = 1.0
    for a in alpha:
        out *= _lp_constant_1d(a, p)
    return out


def lp_norm_exact(alpha, h: float, p: float, n: int | None = None) -> float:
    """||u_alpha(h)||_{L^p} = C_alpha h^(n/(2p) - n/4)."""
    alpha = _as_alpha(alpha, n)
    return lp_constant(alpha, p) * h ** norm_exponent(float(p), len(alpha))

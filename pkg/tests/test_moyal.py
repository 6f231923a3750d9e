import json
import random

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from semiclass.moyal import (
    HSeries,
    poisson_bracket,
    sigma_power_term,
    star_commutator,
    star_product,
    star_terms,
    truncated_star_product,
)
from semiclass.symbols import GaussRat, PolySymbol, parse_symbol

X1, X2, XI1, XI2, Y1, Y2, ETA1, ETA2, H = sp.symbols("x1 x2 xi1 xi2 y1 y2 eta1 eta2 h")
XS, XIS, YS, ETAS = (X1, X2), (XI1, XI2), (Y1, Y2), (ETA1, ETA2)


def to_sympy(p: PolySymbol, xs=XS, xis=XIS):
    n = p.dim
    expr = 0
    for exps, c in p.items():
        mono = sp.Rational(c.re.numerator, c.re.denominator) + sp.I * sp.Rational(c.im.numerator, c.im.denominator)
        for v, e in zip(list(xs[:n]) + list(xis[:n]), exps):
            mono *= v**e
        expr += mono
    return sp.expand(expr)


def hseries_to_sympy(s: HSeries):
    return sp.expand(sum(to_sympy(t) * H**k for k, t in s.coeffs.items()))


def sigma_oracle(a: PolySymbol, b: PolySymbol, k: int):
    """sigma(D)^k (a(x,xi) b(y,eta)) at y=x, eta=xi, with D = -i d."""
    n = a.dim
    f = to_sympy(a) * to_sympy(b, YS, ETAS)
    for _ in range(k):
        f = sum(
            (-sp.I) ** 2 * (sp.diff(f, XIS[j], YS[j]) - sp.diff(f, XS[j], ETAS[j])) for j in range(n)
        )
    subs = {YS[j]: XS[j] for j in range(n)} | {ETAS[j]: XIS[j] for j in range(n)}
    return sp.expand(f.subs(subs))


def star_oracle(a, b):
    top = min(a.degree, b.degree)
    return sp.expand(sum(
        (sp.I * H / 2) ** k / sp.factorial(k) * sigma_oracle(a, b, k) for k in range(top + 1)
    ))


def random_poly(rng, dim, max_deg=3, n_terms=4):
    terms = {}
    for _ in range(n_terms):
        while True:
            e = tuple(rng.randint(0, max_deg) for _ in range(2 * dim))
            if sum(e) <= max_deg:
                break
        terms[e] = GaussRat(rng.randint(-3, 3), rng.randint(-3, 3))
    return PolySymbol(dim, terms)


def poly_strategy(dim=1, max_deg=3):
    exps = st.tuples(*[st.integers(0, max_deg)] * (2 * dim)).filter(lambda e: sum(e) <= max_deg)
    coeff = st.builds(GaussRat, st.integers(-3, 3), st.integers(-3, 3))
    return st.dictionaries(exps, coeff, max_size=4).map(lambda t: PolySymbol(dim, t))


def test_x_star_xi():
    x, xi = parse_symbol("x1"), parse_symbol("xi1")
    assert star_product(x, xi).to_string() == "x1*xi1 + (i/2)h"
    assert star_product(xi, x).to_string() == "x1*xi1 + (-i/2)h"


def test_sigma_examples():
    x, xi = parse_symbol("x1"), parse_symbol("xi1")
    assert sigma_power_term(x, xi, 1) == PolySymbol.constant(1, 1)
    assert sigma_power_term(PolySymbol.constant(1, 5), parse_symbol("x1^2*xi1"), 1).is_zero()
    assert sigma_power_term(parse_symbol("x1^2"), parse_symbol("xi1^2"), 2) == PolySymbol.constant(1, 4)
    with pytest.raises(ValueError):
        sigma_power_term(x, xi, 0)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("dim", [1, 2])
def test_sigma_matches_symbolic_oracle(seed, dim):
    rng = random.Random(100 * dim + seed)
    a, b = random_poly(rng, dim), random_poly(rng, dim)
    for k in range(1, 4):
        assert sp.expand(to_sympy(sigma_power_term(a, b, k)) - sigma_oracle(a, b, k)) == 0


@pytest.mark.parametrize("seed", range(6))
def test_star_product_matches_symbolic_oracle(seed):
    rng = random.Random(seed)
    a, b = random_poly(rng, 2), random_poly(rng, 2)
    assert sp.expand(hseries_to_sympy(star_product(a, b)) - star_oracle(a, b)) == 0


def test_identity_element():
    b = parse_symbol("x1^2*xi1 + 3i*xi1 + 2", 1)
    one = PolySymbol.constant(1, 1)
    assert star_product(one, b) == HSeries.lift(b)
    assert star_product(b, one) == HSeries.lift(b)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_quadratic_commutes_with_its_powers(N):
    q = parse_symbol("xi^2 + x^2")
    assert star_commutator(q, q**N).is_zero()
    qc = parse_symbol("xi1^2 + 2*xi2^2 + x1^2 + x2^2 + 0.5*x1*x2 + 0.3i*x1*xi2 + 0.2i*x2^2")
    assert star_commutator(qc, qc**N).is_zero()


def test_poisson_bracket_convention():
    assert poisson_bracket(parse_symbol("xi"), parse_symbol("x")) == PolySymbol.constant(1, 1)
    # the first-order expansion term is minus the bracket
    a, b = parse_symbol("x^2*xi + xi^3"), parse_symbol("x*xi^2 + x^3")
    assert sigma_power_term(a, b, 1) == -poisson_bracket(a, b)


@given(poly_strategy(), st.integers(1, 3))
def test_bracket_with_own_power_vanishes(q, N):
    assert poisson_bracket(q, q).is_zero()
    assert poisson_bracket(q, q**N).is_zero()


@given(poly_strategy(max_deg=2), poly_strategy(max_deg=2))
def test_commutator_is_bracket_for_quadratics(a, b):
    comm = star_commutator(a, b)
    expected = HSeries(1, {1: poisson_bracket(a, b) * GaussRat(0, -1)})
    assert comm == expected


@given(poly_strategy(dim=1, max_deg=4), poly_strategy(dim=1, max_deg=4))
def test_commutator_has_odd_orders_only(a, b):
    comm = star_commutator(a, b)
    assert all(k % 2 == 1 for k in comm.coeffs)
    if not comm.is_zero() and 1 in comm.coeffs:
        assert comm.coeff(1) == poisson_bracket(a, b) * GaussRat(0, -1)


@given(poly_strategy(), poly_strategy(), poly_strategy())
def test_associativity(a, b, c):
    assert star_product(star_product(a, b), c) == star_product(a, star_product(b, c))


@given(poly_strategy(dim=2, max_deg=3), poly_strategy(dim=2, max_deg=3))
def test_conjugation(a, b):
    assert star_product(a.conj(), b.conj()) == star_product(b, a).conj()


@given(poly_strategy(max_deg=3), poly_strategy(max_deg=3))
def test_expansion_terminates(a, b):
    top = min(a.degree, b.degree)
    assert all(k <= top for k, _ in star_terms(a, b))


def test_truncated_reports_dropped_orders():
    a, b = parse_symbol("x^2"), parse_symbol("xi^2")
    res, dropped = truncated_star_product(a, b, 1)
    assert dropped == [2]
    assert res.to_string() == "x1^2*xi1^2 + (2i*x1*xi1)h"


def test_numeric_h_and_json():
    a, b = parse_symbol("x1^2"), parse_symbol("xi1^2")
    s = star_product(a, b)
    assert star_product(a, b, h=0.5) == s.at(0.5)
    assert s.at(0.5).coeff((0, 0)) == GaussRat(-1, 0) / 8
    assert HSeries.from_json(json.loads(json.dumps(s.to_json()))) == s

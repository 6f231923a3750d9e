import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semiclass.analysis import (
    ScalingReport,
    apriori_check,
    derivative_bounds_check,
    fit_exponent,
    garding_constants,
    garding_min_eig,
    gradient_bound_check,
    ktz_exponent,
    lp_norm_grid,
    microlocal_mass,
    qn_boundedness_check,
    scaling_sweep,
    spread_ratio,
    theoretical_exponent,
)
from semiclass.eigensolve import eigs_near
from semiclass.families import (
    garding_test_symbol,
    localizing_cutoff,
    oscillator_family,
    radial_cutoff,
    standard_cutoff,
)
from semiclass.hermite import OscillatorState, lp_norm_exact
from semiclass.plotting import gnuplot_script, scaling_svg
from semiclass.quantize import PhaseSpaceGrid, ScalingParams
from semiclass.symbols import CallableSymbol, PolySymbol

SWEEP = [0.5 * 2.0**-k for k in range(1, 7)]


def sweep_grid(h, n=2):
    return PhaseSpaceGrid(n, 8 * math.sqrt(h), 32, h)


@pytest.fixture(scope="module")
def oscillator_report():
    fam = oscillator_family(2)
    return scaling_sweep(lambda h: fam.operator(sweep_grid(h)), SWEEP, [2, 4, math.inf], 3.0,
                         oracle=lambda h, p: lp_norm_exact((0, 0), h, p), operator_desc="oscillator")


def test_constant_vector_norm():
    g = PhaseSpaceGrid(2, 1.5, 16, 0.1)
    u = np.full(g.size, 0.7)
    V = (2 * g.L) ** 2
    for p in (2, 3, 7.5):
        assert lp_norm_grid(u, g, p) == pytest.approx(0.7 * V ** (1 / p), rel=1e-12)
    assert lp_norm_grid(u, g, math.inf) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        lp_norm_grid(u, g, 1.0)


def test_gaussian_norms():
    h = 0.04
    g = PhaseSpaceGrid(1, 8 * math.sqrt(h), 64, h)
    u = g.sample(OscillatorState((0,), h))
    assert lp_norm_grid(u, g, 2) == pytest.approx(1.0, abs=1e-8)
    assert lp_norm_grid(u, g, math.inf) == pytest.approx((math.pi * h) ** -0.25, rel=1e-12)


def test_sup_refinement_between_nodes():
    h = 0.04
    g = PhaseSpaceGrid(1, 8 * math.sqrt(h), 64, h)
    s = OscillatorState((0,), h)
    u = g.sample(lambda x: s(x - 0.37 * g.dx))
    exact = (math.pi * h) ** -0.25
    assert lp_norm_grid(u, g, math.inf) < exact * (1 - 1e-3)
    assert lp_norm_grid(u, g, math.inf, refine=True) == pytest.approx(exact, rel=1e-9)


def test_theoretical_and_comparison_exponents():
    assert theoretical_exponent(2, math.inf) == 0.5
    assert theoretical_exponent(3, math.inf) == 0.75
    for n in (1, 2, 5):
        assert theoretical_exponent(n, 2) == 0
    assert ktz_exponent(2, 4) == pytest.approx(0.25)
    assert ktz_exponent(3, math.inf) == pytest.approx(1.0)
    assert ktz_exponent(3, 6) == pytest.approx(0.5)
    assert ktz_exponent(3, 4) == pytest.approx(theoretical_exponent(3, 4))
    assert ktz_exponent(1, 4) is None


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_fit_recovers_synthetic_exponent(s, A):
    hs = [0.5 * 2.0**-k for k in range(6)]
    d, err = fit_exponent(hs, [A * h**-s for h in hs])
    assert d == pytest.approx(s, abs=1e-10)
    assert err <= 1e-10


def test_oscillator_sweep(oscillator_report):
    rep = oscillator_report
    assert rep.passed
    assert abs(rep.fitted["inf"][0] - 0.5) <= 0.01
    assert abs(rep.fitted["2"][0]) <= 0.01
    assert rep.excluded_h == [0.25]
    fitted = [rep.fitted[k][0] for k in ("2", "4", "inf")]
    errs = [rep.fitted[k][1] for k in ("2", "4", "inf")]
    assert all(b + eb >= a - ea for a, b, ea, eb in zip(fitted, fitted[1:], errs, errs[1:]))


def test_oscillator_sweep_matches_oracle(oscillator_report):
    for r in oscillator_report.rows:
        assert r["norm"] == pytest.approx(r["oracle_norm"], rel=1e-6)


def test_report_round_trip_and_outputs(oscillator_report):
    rep = oscillator_report
    back = ScalingReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()
    lines = rep.to_csv().splitlines()
    assert lines[0] == "h,p,norm,oracle_norm,lambda_re,lambda_im,residual"
    assert len(lines) == 1 + len(SWEEP) * 3
    svg = scaling_svg(rep)
    assert svg.startswith("<svg") and svg.count("<circle") >= 18 and "stroke-dasharray" in svg
    assert "scaling.csv" in gnuplot_script(rep)


def test_sweep_requires_coverage():
    fam = oscillator_family(1)
    with pytest.raises(ValueError, match="h sweep"):
        scaling_sweep(lambda h: fam.operator(sweep_grid(h, 1)), [0.2, 0.1, 0.05], [2], 3.0)


def test_one_dimensional_sweep_is_diagnostic():
    fam = oscillator_family(1)
    rep = scaling_sweep(lambda h: fam.operator(PhaseSpaceGrid(1, 8 * math.sqrt(h), 64, h)),
                        SWEEP, [math.inf], 3.0)
    assert rep.diagnostic
    assert rep.fitted["inf"][0] == pytest.approx(0.25, abs=0.01)


def test_parallel_sweep_identical(oscillator_report):
    fam = oscillator_family(2)
    rep = scaling_sweep(lambda h: fam.operator(sweep_grid(h)), SWEEP, [2, 4, math.inf], 3.0,
                        oracle=lambda h, p: lp_norm_exact((0, 0), h, p), operator_desc="oscillator", jobs=2)
    assert rep.to_json() == oscillator_report.to_json()


def test_garding_examples():
    g = PhaseSpaceGrid(1, 10.0, 256, 0.1)
    zero = CallableSymbol(1, lambda X: np.zeros(X.shape[1:]))
    assert garding_min_eig(zero, g) == pytest.approx(0.0, abs=1e-14)
    assert garding_min_eig(PolySymbol.oscillator(1), g) == pytest.approx(0.1, rel=1e-8)


def test_garding_constant_stable():
    grids = [PhaseSpaceGrid(1, 10.0, 512, h) for h in (0.2, 0.1, 0.05)]
    rows = garding_constants(garding_test_symbol(), grids)
    assert all(r["min_eig"] >= -r["C"] * r["h"] - 1e-12 for r in rows)
    assert spread_ratio([r["C"] for r in rows]) <= 0.2


def test_shifted_garding_symbol_has_stable_constant():
    # |X|^2 + 0.5 sin x sin xi + 0.5 has infimum 0.5 on the box
    base = garding_test_symbol()
    a = CallableSymbol(1, lambda X: base(X) + 0.5)
    rows = garding_constants(a, [PhaseSpaceGrid(1, 10.0, 512, h) for h in (0.2, 0.1, 0.05, 0.025)])
    assert rows[0]["inf_a"] == pytest.approx(0.5, abs=1e-12)
    assert spread_ratio([r["C"] for r in rows]) <= 0.2


def test_apriori_oscillator():
    fam = oscillator_family(2)
    chi = standard_cutoff(2)
    for h in (0.25, 0.125, 0.0625):
        res = apriori_check(fam.operator(sweep_grid(h)), 2 * h, chi, ScalingParams(h, 0.5))
        assert res.min_eig > 0 and res.C_tilde <= 10 and res.witness is None


def test_apriori_degenerate_eps_and_violation():
    fam = oscillator_family(1)
    g = PhaseSpaceGrid(1, 4.0, 64, 0.5)
    res = apriori_check(fam.operator(g), 0.0, standard_cutoff(1), ScalingParams(0.5, 0.5))
    assert res.min_eig > 0
    bad = apriori_check(fam.operator(g), 3.0, standard_cutoff(1), ScalingParams(0.5, 0.5))
    assert bad.min_eig <= 0 and math.isinf(bad.C_tilde) and bad.witness is not None


def test_microlocal_mass_oscillator():
    h = 0.05
    g = sweep_grid(h)
    u = g.sample(OscillatorState((0, 0), h))
    psi = localizing_cutoff(2)
    assert microlocal_mass(u, psi, 0.4, h, g) <= h**2
    assert microlocal_mass(u, radial_cutoff(2, 200.0, 300.0), 0.4, h, g) <= 1e-10


def test_microlocal_mass_decreases_with_delta():
    h = 0.05
    g = PhaseSpaceGrid(1, 8 * math.sqrt(h), 64, h)
    u = g.sample(OscillatorState((0,), h))
    psi = localizing_cutoff(1)
    masses = [microlocal_mass(u, psi, d, h, g) for d in (0.45, 0.4, 0.3)]
    assert masses[0] > masses[1] > masses[2]
    with pytest.raises(ValueError):
        microlocal_mass(u, psi, 0.5, h, g)


def test_gradient_bound_examples():
    xs = np.linspace(-2, 2, 401)[None, :]
    assert gradient_bound_check(lambda x: x[0] ** 2, xs) == pytest.approx(1.0, rel=1e-6)
    assert gradient_bound_check(lambda x: x[0] ** 4, xs) <= 1.0
    assert gradient_bound_check(lambda x: 1 + np.cos(x[0]), np.linspace(-6, 6, 601)[None, :]) <= 1.0 + 1e-6


@given(st.floats(0.1, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_gradient_bound_holds_for_smooth_nonnegative(a, b, c):
    f = lambda x: a * x[0] ** 2 + (b * x[1] + c) ** 2 + np.sin(x[0]) ** 2  # noqa: E731
    X = np.random.default_rng(1).uniform(-3, 3, size=(2, 500))
    assert gradient_bound_check(f, X) <= 1.0 + 1e-5


def test_qn_boundedness_oscillator():
    fam = oscillator_family(2)
    q = PolySymbol.oscillator(2)
    vals = []
    for h in (0.25, 0.125, 0.0625):
        A = fam.operator(sweep_grid(h))
        u = eigs_near(A, 0, 1)[0].vec
        p = ScalingParams(h, 0.5)
        assert qn_boundedness_check(A, q, 0, p, u=u) == pytest.approx(1.0, abs=1e-12)
        vals.append(qn_boundedness_check(A, q, 1, p, u=u))
    # Op_h(q(X/sqrt eps)) u0 = (2 h / eps) u0 = 2 h~ u0
    assert np.allclose(vals, 2 * 0.5, rtol=1e-8)


def test_derivative_bounds_oracles():
    h = 0.05
    g = PhaseSpaceGrid(1, 8 * math.sqrt(h), 256, h)
    u = g.sample(OscillatorState((0,), h))
    tab = derivative_bounds_check(u, g, h, 2)
    ref = h**-0.25 * math.pi**-0.25 * math.exp(-0.5)
    assert tab[((0,), (0,))] == pytest.approx((math.pi * h) ** -0.25, rel=1e-12)
    assert tab[((1,), (0,))] == pytest.approx(ref, rel=1e-3)
    assert tab[((0,), (1,))] == pytest.approx(ref, rel=1e-3)
    with pytest.raises(ValueError):
        derivative_bounds_check(u, g, h, 4)

"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a one-line verdict; the lines are printed in the terminal
summary (and immediately when run with ``-s``).
"""

import itertools
import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from semiclass import analysis, cli, eigensolve, hermite, moyal
from semiclass.families import garding_test_symbol, localizing_cutoff, oscillator_family, standard_cutoff
from semiclass.quantize import PhaseSpaceGrid, ScalingParams
from semiclass.symbols import GaussRat, PolySymbol

pytestmark = pytest.mark.slow

RESULTS: dict[int, tuple[bool, str]] = {}
GOLDEN = Path(__file__).parent / "golden"
SWEEP = [0.5 * 2.0**-k for k in range(1, 7)]


def record(num: int, passed: bool, detail: str):
    RESULTS[num] = (passed, detail)
    print(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def summary_lines():
    return [f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {d}" for k, (ok, d) in sorted(RESULTS.items())]


# ---------------------------------------------------------------------------
# shared runs of the shipped configs


def execute(config_name: str):
    _, text = cli._resolve_config_path(config_name)
    cfg = cli.validate_config(json.loads(text))
    runner = cli.Runner(cfg)
    results = [getattr(runner, f"stage_{s}")() for s in cli.STAGE_ORDER if s in cfg["checks"]]
    return cfg, runner, results


@pytest.fixture(scope="module", autouse=True)
def _no_cache(monkeypatch_module):
    monkeypatch_module.delenv(cli.CACHE_ENV, raising=False)


@pytest.fixture(scope="module")
def monkeypatch_module():
    mp = pytest.MonkeyPatch()
    yield mp
    mp.undo()


@pytest.fixture(scope="module")
def oscillator_run():
    return execute("oscillator_n2.json")


@pytest.fixture(scope="module")
def perturbed_run():
    return execute("complex_perturbed_n2.json")


def stage(run, name):
    return next(r for r in run[2] if r.name == name)


# ---------------------------------------------------------------------------


def test_criterion_01_oracle_norms():
    t0 = time.perf_counter()
    hs = [1.0, 0.3, 0.1, 0.03]
    ps = [2.0, 4.0, 6.0, math.inf]
    worst_rel, worst_ratio = 0.0, 0.0
    for n, N in ((1, 128), (2, 64)):
        alphas = [a for a in itertools.product(range(4), repeat=n) if sum(a) <= 3]
        for alpha in alphas:
            raw = {}
            for h in hs:
                grid = PhaseSpaceGrid(n, 8 * math.sqrt(h), N, h)
                u = grid.sample(hermite.OscillatorState(alpha, h))
                for p in ps:
                    exact = hermite.lp_constant(alpha, p) * h ** (n / (2 * p) - n / 4)
                    got = analysis.lp_norm_grid(u, grid, p, refine=math.isinf(p))
                    worst_rel = max(worst_rel, abs(got - exact) / exact)
                    raw[h, p] = analysis.lp_norm_grid(u, grid, p)
            # self-similar grids: the sampled arrays differ only by h^(-n/4),
            # so C_alpha cancels in the ratio up to rounding
            for p in ps:
                for h1, h2 in itertools.combinations(hs, 2):
                    ratio = raw[h1, p] / raw[h2, p]
                    expect = (h1 / h2) ** (n / (2 * p) - n / 4)
                    worst_ratio = max(worst_ratio, abs(ratio / expect - 1))
    elapsed = time.perf_counter() - t0
    record(1, worst_rel <= 1e-6 and worst_ratio <= 1e-12 and elapsed < 10,
           f"oracle L^p norms: max rel err {worst_rel:.2e} (<= 1e-6), ratio identity {worst_ratio:.2e} "
           f"(<= 1e-12), {elapsed:.1f}s (< 10s)")


def test_criterion_02_oscillator_spectrum():
    t0 = time.perf_counter()
    h = 0.05
    A1 = oscillator_family(1).operator(PhaseSpaceGrid(1, 10.0, 512, h))
    lam1 = sorted(p.lam.real for p in eigensolve.eigs_near(A1, 0.0, 6))
    err1 = max(abs(l - (2 * k + 1) * h) / ((2 * k + 1) * h) for k, l in enumerate(lam1))
    A2 = oscillator_family(2).operator(PhaseSpaceGrid(2, 5.0, 96, h))
    pairs2 = eigensolve.eigs_near(A2, 0.0, 6)
    lam2 = sorted(p.lam.real for p in pairs2)
    exact2 = [2 * h, 4 * h, 4 * h, 6 * h, 6 * h, 6 * h]
    err2 = max(abs(l - e) / e for l, e in zip(lam2, exact2))
    elapsed = time.perf_counter() - t0
    record(2, err1 <= 1e-6 and err2 <= 1e-3 and elapsed < 60,
           f"oscillator spectrum: n=1 rel err {err1:.2e} (<= 1e-6), n=2 ({A2.kind}) rel err {err2:.2e} "
           f"(<= 1e-3), {elapsed:.1f}s (< 60s)")


def test_criterion_03_scaling_exponents(perturbed_run):
    t0 = time.perf_counter()
    runner = perturbed_run[1]
    rep = analysis.scaling_sweep(runner.sweep_operator, SWEEP, [4.0, math.inf], 3.0,
                                 operator_desc=runner.family.description)
    d4, dinf = rep.fitted["4"][0], rep.fitted["inf"][0]
    elapsed = time.perf_counter() - t0
    record(3, abs(dinf - 0.5) <= 0.05 and abs(d4 - 0.25) <= 0.05 and elapsed < 600,
           f"complex-perturbed n=2: delta(inf) = {dinf:.5f}, delta(4) = {d4:.5f} (each within 0.05 of "
           f"0.5, 0.25), {elapsed:.1f}s after setup (< 10 min)")


def test_scaling_matches_golden(perturbed_run):
    gold = json.loads((GOLDEN / "complex_perturbed_n2_scaling.json").read_text())
    rep = json.loads(stage(perturbed_run, "scaling").files["scaling.json"])
    for k, v in gold["fitted"].items():
        assert rep["fitted"][k]["delta"] == pytest.approx(v["delta"], abs=1e-6)


def _generic_quadratic(rng: random.Random, n: int) -> PolySymbol:
    d = 2 * n
    M = [[rng.randint(-2, 2) for _ in range(d)] for _ in range(d)]
    re = [[sum(M[k][i] * M[k][j] for k in range(d)) + (i == j) for j in range(d)] for i in range(d)]
    im = [[0] * d for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            im[i][j] = im[j][i] = rng.randint(-3, 3)
    terms = {}
    for i in range(d):
        for j in range(i, d):
            e = [0] * d
            e[i] += 1
            e[j] += 1
            f = Fraction(1, 2) if i == j else Fraction(1)
            terms[tuple(e)] = GaussRat(f * re[i][j], f * im[i][j])
    return PolySymbol(n, terms)


def _random_poly(rng, dim, max_deg=3, n_terms=4):
    terms = {}
    for _ in range(n_terms):
        while True:
            e = tuple(rng.randint(0, max_deg) for _ in range(2 * dim))
            if sum(e) <= max_deg:
                break
        terms[e] = GaussRat(Fraction(rng.randint(-6, 6), rng.randint(1, 3)), rng.randint(-3, 3))
    return PolySymbol(dim, terms)


def test_criterion_04_moyal_identities(perturbed_run):
    rng = random.Random(20240917)
    qs = [_generic_quadratic(rng, n) for n in (1, 2, 2, 3)] + [perturbed_run[1].quadratic()]
    for q in qs:
        assert np.linalg.eigvalsh(q.hessian().real).min() > 0
    comm_ok = all(moyal.star_commutator(q, q**N).is_zero() for q in qs for N in range(1, 5))
    assoc_ok = 0
    for i in range(100):
        dim = 1 + i % 2
        a, b, c = (_random_poly(rng, dim) for _ in range(3))
        assoc_ok += moyal.star_product(moyal.star_product(a, b), c) == moyal.star_product(a, moyal.star_product(b, c))
    record(4, comm_ok and assoc_ok == 100,
           f"Moyal: [q, q^N] = 0 exactly for N = 1..4 on {len(qs)} elliptic quadratics: {comm_ok}; "
           f"associativity {assoc_ok}/100 exact")


def test_criterion_05_sharp_garding():
    grids = [PhaseSpaceGrid(1, 10.0, 512, h) for h in (0.2, 0.1, 0.05, 0.025)]
    rows = analysis.garding_constants(garding_test_symbol(), grids)
    Cs = [r["C"] for r in rows]
    C_fit = max(Cs)
    bound_ok = all(r["min_eig"] >= -C_fit * r["h"] for r in rows)
    spread = analysis.spread_ratio(Cs)
    record(5, bound_ok and spread <= 0.2,
           f"sharp Garding: min eig >= -C h with C(h) = {', '.join(f'{c:.4f}' for c in Cs)}; "
           f"spread {spread:.4f} (<= 0.2)")


def test_criterion_06_apriori(perturbed_run):
    runner = perturbed_run[1]
    chi = standard_cutoff(2)
    rows = []
    for h in SWEEP[:5]:
        res = analysis.apriori_check(runner.sweep_operator(h), runner.ground(h).lam, chi, ScalingParams(h, 0.5))
        rows.append(res)
    C = max(r.C_tilde for r in rows)
    record(6, all(r.min_eig > 0 for r in rows) and C <= 10,
           f"a priori estimate: single C~ = {C:.4f} (<= 10) over h = 0.5*2^-k, k = 1..5")


@pytest.mark.parametrize("which", ["oscillator", "perturbed"])
def test_criterion_07_microlocalization(which, oscillator_run, perturbed_run):
    run = oscillator_run if which == "oscillator" else perturbed_run
    cfg, runner = run[0], run[1]
    psi = localizing_cutoff(2)
    masses = {}
    for h in (0.05, 0.025):
        masses[h] = analysis.microlocal_mass(runner.ground(h).vec, psi, 0.4, h, cli.sweep_grid(cfg, h))
    ok = all(m <= h**2 for h, m in masses.items())
    _combine(7, which, ok, "microlocal mass " + ", ".join(f"{m:.2e} (h={h}, h^2={h*h:.2e})" for h, m in masses.items()))


def _combine(num, which, ok, detail, parts={}):
    parts.setdefault(num, {})[which] = (ok, detail)
    if len(parts[num]) == 2:
        record(num, all(v[0] for v in parts[num].values()),
               "; ".join(f"{k}: {v[1]}" for k, v in sorted(parts[num].items())))
    else:
        assert ok, detail


@pytest.mark.parametrize("which", ["oscillator", "perturbed"])
def test_criterion_08_qn_boundedness(which, oscillator_run, perturbed_run):
    runner = (oscillator_run if which == "oscillator" else perturbed_run)[1]
    q = runner.quadratic()
    ratios = []
    for N in (1, 2):
        vals = [analysis.qn_boundedness_check(runner.sweep_operator(h), q, N, ScalingParams(h, 0.5),
                                              u=runner.ground(h).vec) for h in SWEEP]
        ratios.append(max(vals) / min(vals))
    _combine(8, which, all(r <= 2 for r in ratios),
             "max/min of ||Op(q^N(X/sqrt eps))u|| over the sweep: "
             + ", ".join(f"N={N}: {r:.3f}" for N, r in zip((1, 2), ratios)) + " (<= 2)")


@pytest.mark.parametrize("which", ["oscillator", "perturbed"])
def test_criterion_09_derivative_bounds(which, oscillator_run, perturbed_run):
    cfg, runner = (oscillator_run if which == "oscillator" else perturbed_run)[:2]
    tables = {h: analysis.derivative_bounds_check(runner.ground(h).vec, cli.sweep_grid(cfg, h), h, 2)
              for h in SWEEP}
    verdict = analysis.derivative_bounds_verdict(tables, 2, 2.0)
    worst = max(verdict["worst_ratio"].values())
    _combine(9, which, verdict["passed"], f"worst weighted sup-norm ratio {worst:.3f} (<= 2)")


@pytest.mark.parametrize("which", ["oscillator_n2.json", "complex_perturbed_n2.json"])
def test_criterion_10_determinism(which, oscillator_run, perturbed_run, tmp_path):
    cfg, _, results = oscillator_run if which.startswith("oscillator") else perturbed_run
    status = cli.run(which, output_dir=str(tmp_path), echo=lambda s: None)
    (out,) = list(tmp_path.iterdir())
    first = {"config.json": cli.json_text(cfg)}
    for r in results:
        first.update(r.files)
    first["summary.json"] = cli.json_text(cli.run_summary(cfg, results, status))
    compared = [n for n in sorted(first) if n.endswith((".csv", ".json"))]
    same = [n for n in compared if (out / n).read_bytes() == first[n].encode()]
    _combine(10, which.split("_n2")[0], status == 0 and same == compared,
             f"{len(same)}/{len(compared)} CSV/JSON files byte-identical on rerun")

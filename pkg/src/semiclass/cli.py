"""Command-line front end and config-driven experiment runner.

``semiclass run CONFIG`` executes the checks listed in a JSON config in
dependency order (assumptions, quantize, eigensolve, analysis) and writes
CSV/JSON/SVG artifacts to ``<output_dir>/<name>-<config hash>/``.  The exit
status is 0 iff every verdict passes.  The other subcommands expose single
stages with flags that mirror the config fields.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, eigensolve, hermite, moyal
from .families import (
    FAMILIES,
    Family,
    family_by_id,
    garding_test_symbol,
    localizing_cutoff,
    polynomial_family,
    standard_cutoff,
)
from .plotting import gnuplot_script, scaling_svg
from .quantize import (
    DENSE_2D_MAX_N,
    OperatorMatrix,
    PhaseSpaceGrid,
    ScalingParams,
    load_operator,
    save_operator,
)
from .symbols import (
    GaussRat,
    PolySymbol,
    SymbolParseError,
    as_callable,
    check_assumptions,
    infer_dim,
    parse_symbol,
    quadratic_part,
)

log = logging.getLogger("semiclass")

SCHEMA_VERSION = 1
CACHE_ENV = "SEMICLASS_CACHE_DIR"

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_ASSUMPTIONS = 2
EXIT_CONFIG = 3
EXIT_RESOURCE = 4

DEFAULTS = {
    "p_list": [2, 4, "inf"],
    "cluster_C": 3.0,
    "tolerances": {
        "fit_tol": 0.05,
        "spectrum_rel": 1e-3,
        "garding_spread": 0.2,
        "apriori_C_max": 10.0,
        "qn_factor": 2.0,
        "derivative_slack": 2.0,
        "microlocal_M": 2.0,
    },
    "assumptions": {"sample_radius": 20.0, "n_samples": 4096},
    "spectrum": {"k": 6},
    "garding": {"symbol": "builtin", "h_list": [0.2, 0.1, 0.05, 0.025], "L": 10.0, "N": 512},
    "apriori": {},
    "microlocal": {"delta": 0.4, "h_list": [0.05, 0.025], "inner": 2.2},
    "qn_bound": {"N_list": [1, 2]},
    "derivative_bounds": {"K": 2},
    "output_dir": "results",
    "seed": 20240917,
}

STAGE_ORDER = ["assumptions", "spectrum", "scaling", "garding", "apriori", "microlocal",
               "moyal", "qn_bound", "derivative_bounds"]


class ConfigError(ValueError):
    pass


class ResourceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_schema() -> dict:
    return json.loads(resources.files("semiclass.configs").joinpath("config.schema.json").read_text())


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("semiclass.configs").iterdir()
                  if p.name.endswith(".json") and p.name != "config.schema.json")


def _resolve_config_path(ref: str) -> tuple[str, str]:
    path = Path(ref)
    if path.exists():
        return str(path), path.read_text()
    res = resources.files("semiclass.configs").joinpath(ref)
    if res.is_file():
        return f"<shipped>/{ref}", res.read_text()
    raise ConfigError(f"config {ref!r} not found (shipped: {', '.join(shipped_configs())})")


def _merge(defaults: dict, cfg: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in cfg.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(cfg: dict) -> dict:
    """Validate against the schema and fill defaults; raises ConfigError."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("config does not match the schema:\n  " + "\n  ".join(lines))
    full = _merge(DEFAULTS, cfg)
    sw = full["sweep"]
    sw.setdefault("k_min", 0)
    if sw["k_min"] > sw["k_max"]:
        raise ConfigError("sweep/k_min: must not exceed k_max")
    if "symbol" in full["operator"]:
        try:
            parse_symbol(full["operator"]["symbol"], full["n"])
        except SymbolParseError as exc:
            raise ConfigError(f"operator/symbol: {exc}") from None
    return full


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def build_family(cfg: dict) -> Family:
    op = cfg["operator"]
    if "family" in op:
        return family_by_id(op["family"], cfg["n"])
    return polynomial_family(parse_symbol(op["symbol"], cfg["n"]), "symbol")


def check_resources(fam: Family, n: int, N: int, what: str):
    if fam.potential is None and n >= 2 and N > DENSE_2D_MAX_N:
        raise ResourceError(
            f"{what}: dense 2D quantization of a general symbol needs N <= {DENSE_2D_MAX_N} per axis (got {N})"
        )


def sweep_hs(cfg: dict) -> list[float]:
    sw = cfg["sweep"]
    return [sw["h_tilde"] * 2.0 ** (-k) for k in range(sw["k_min"], sw["k_max"] + 1)]


def sweep_grid(cfg: dict, h: float) -> PhaseSpaceGrid:
    g = cfg["grid"]
    L = g["L"] if "L" in g else g["L_scale"] * math.sqrt(h)
    return PhaseSpaceGrid(cfg["n"], L, g["N"], h)


# ---------------------------------------------------------------------------
# output helpers


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


@dataclass
class StageResult:
    name: str
    passed: bool
    summary: dict
    files: dict[str, str]


# ---------------------------------------------------------------------------
# pipeline


class Runner:
    """Executes the stages of one validated config, sharing ground states."""

    def __init__(self, cfg: dict, cache_dir: Path | None = None):
        self.cfg = cfg
        self.family = build_family(cfg)
        self.n = cfg["n"]
        self.tol = cfg["tolerances"]
        self.cache_dir = cache_dir
        self._ground: dict[float, eigensolve.EigenPair] = {}
        self._ops: dict[float, OperatorMatrix] = {}

    # operators and ground states are shared between stages
    def operator(self, grid: PhaseSpaceGrid) -> OperatorMatrix:
        check_resources(self.family, grid.n, grid.N, "operator")
        if self.cache_dir is None:
            return self.family.operator(grid)
        key = json.dumps({"op": self.cfg["operator"], "grid": grid.to_dict()}, sort_keys=True)
        path = self.cache_dir / f"op-{hashlib.sha256(key.encode()).hexdigest()[:16]}.bin"
        if path.exists():
            log.info("reusing cached operator %s", path.name)
            return load_operator(path)
        op = self.family.operator(grid)
        if op.kind != "matrix-free":
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            save_operator(op, path)
        return op

    def sweep_operator(self, h: float) -> OperatorMatrix:
        if h not in self._ops:
            self._ops[h] = self.operator(sweep_grid(self.cfg, h))
        return self._ops[h]

    def ground(self, h: float) -> eigensolve.EigenPair:
        if h not in self._ground:
            A = self.sweep_operator(h)
            cluster = eigensolve.ground_cluster(A, self.cfg["cluster_C"], h)
            if not cluster:
                raise RuntimeError(f"empty ground cluster at h={h:g}")
            self._ground[h] = min(cluster, key=lambda e: (abs(e.lam), e.lam.imag, e.lam.real))
        return self._ground[h]

    def quadratic(self) -> PolySymbol:
        q = quadratic_part(self.family.symbol)
        if isinstance(self.family.symbol, PolySymbol):
            return q
        # finite-difference Hessian entries snapped to nearby rationals
        return PolySymbol(q.dim, {
            e: GaussRat(c.re.limit_denominator(10**4), c.im.limit_denominator(10**4)) for e, c in q.items()
        })

    # -- stages ------------------------------------------------------------

    def stage_assumptions(self) -> StageResult:
        a = self.cfg["assumptions"]
        rep = check_assumptions(self.family.symbol, a["sample_radius"], a["n_samples"], seed=self.cfg["seed"])
        return StageResult("assumptions", rep.passed, {"passed": rep.passed, "messages": rep.messages},
                           {"assumptions.json": json_text(_jsonable(rep.to_dict()))})

    def stage_spectrum(self) -> StageResult:
        s = self.cfg["spectrum"]
        h = s.get("h", self.cfg["sweep"]["h_tilde"] / 10)
        N = s.get("N", self.cfg["grid"]["N"])
        L = s.get("L", 8 * math.sqrt(h))
        grid = PhaseSpaceGrid(self.n, L, N, h)
        A = self.operator(grid)
        pairs = self._cached_pairs(A, s["k"])
        clusters = cluster_table(pairs)
        rows = []
        passed = all(p.residual <= eigensolve.RESIDUAL_TOL["sparse"] for p in pairs)
        exact = oscillator_levels(self.n, h, len(pairs)) if self.family.exact_oscillator else None
        for i, p in enumerate(pairs):
            ref = exact[i] if exact else None
            rel = abs(p.lam - ref) / ref if ref else None
            if rel is not None:
                passed &= rel <= self.tol["spectrum_rel"]
            rows.append([i, p.lam.real, p.lam.imag, p.residual, p.multiplicity_hint, ref, rel])
        summary = {
            "h": h, "grid": grid.to_dict(), "passed": passed,
            "clusters": [{"lambda_re": c[0].real, "lambda_im": c[0].imag, "residual": c[1], "N_k": c[2]}
                         for c in clusters],
        }
        return StageResult("spectrum", passed, summary, {
            "spectrum.csv": csv_text(
                ["index", "lambda_re", "lambda_im", "residual", "multiplicity", "exact", "rel_error"], rows),
            "spectrum.json": json_text(_jsonable(summary)),
        })

    def _cached_pairs(self, A: OperatorMatrix, k: int):
        if self.cache_dir is None:
            return eigensolve.eigs_near(A, 0.0, k)
        key = json.dumps({"op": self.cfg["operator"], "grid": A.grid.to_dict(), "k": k}, sort_keys=True)
        path = self.cache_dir / f"eig-{hashlib.sha256(key.encode()).hexdigest()[:16]}.bin"
        if path.exists():
            return eigensolve.load_eigenpairs(path)[0]
        pairs = eigensolve.eigs_near(A, 0.0, k)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        eigensolve.save_eigenpairs(pairs, A.grid, path)
        return pairs

    def stage_scaling(self, jobs: int = 1) -> StageResult:
        p_list = [analysis.p_from_key(p) for p in self.cfg["p_list"]]
        oracle = None
        if self.family.exact_oscillator:
            zero = (0,) * self.n
            oracle = lambda h, p: hermite.lp_norm_exact(zero, h, p)  # noqa: E731
        rep = analysis.scaling_sweep(
            self.sweep_operator, sweep_hs(self.cfg), p_list, self.cfg["cluster_C"],
            oracle=oracle, fit_tol=self.tol["fit_tol"], operator_desc=self.family.description, jobs=jobs,
        )
        passed = rep.passed or rep.diagnostic
        summary = {k: {"fitted": rep.fitted[k][0], "stderr": rep.fitted[k][1],
                       "theoretical": rep.theoretical[k], "pass": rep.verdicts[k]} for k in rep.fitted}
        if rep.diagnostic:
            summary["note"] = "n = 1: diagnostic only"
        return StageResult("scaling", passed, summary, {
            "scaling.csv": rep.to_csv(),
            "scaling.json": rep.to_json() + "\n",
            "scaling.svg": scaling_svg(rep),
            "scaling.gp": gnuplot_script(rep, "scaling.csv"),
        })

    def stage_garding(self) -> StageResult:
        g = self.cfg["garding"]
        sym = garding_test_symbol() if g["symbol"] == "builtin" else parse_symbol(g["symbol"])
        if sym.dim != 1:
            check_resources(Family("garding", sym.dim, sym), sym.dim, g["N"], "garding")
        grids = [PhaseSpaceGrid(sym.dim, g["L"], g["N"], h) for h in g["h_list"]]
        rows = analysis.garding_constants(as_callable(sym), grids)
        spread = analysis.spread_ratio([r["C"] for r in rows])
        passed = spread <= self.tol["garding_spread"]
        summary = {"symbol": getattr(sym, "description", None) or sym.to_string(),
                   "spread": spread, "passed": passed}
        return StageResult("garding", passed, summary, {
            "garding.csv": csv_text(["h", "min_eig", "inf_a", "C"],
                                    [[r["h"], r["min_eig"], r["inf_a"], r["C"]] for r in rows]),
        })

    def stage_apriori(self) -> StageResult:
        h_t = self.cfg["sweep"]["h_tilde"]
        hs = self.cfg["apriori"].get("h_list") or [h for h in sweep_hs(self.cfg) if h < h_t]
        chi = standard_cutoff(self.n)
        rows = []
        for h in hs:
            A = self.sweep_operator(h)
            lam = self.ground(h).lam
            res = analysis.apriori_check(A, lam, chi, ScalingParams(h, h_t))
            rows.append([h, res.min_eig, res.C_tilde])
        worst = max(r[2] for r in rows)
        passed = all(r[1] > 0 for r in rows) and worst <= self.tol["apriori_C_max"]
        return StageResult("apriori", passed, {"C_tilde_max": _jsonable(worst), "passed": passed}, {
            "apriori.csv": csv_text(["h", "min_eig", "C_tilde"], rows),
        })

    def stage_microlocal(self) -> StageResult:
        m = self.cfg["microlocal"]
        psi = localizing_cutoff(self.n, m["inner"])
        M = self.tol["microlocal_M"]
        rows = []
        for h in m["h_list"]:
            mass = analysis.microlocal_mass(self.ground(h).vec, psi, m["delta"], h, sweep_grid(self.cfg, h))
            rows.append([h, mass, h**M, mass <= h**M])
        passed = all(r[3] for r in rows)
        return StageResult("microlocal", passed, {"passed": passed, "M": M}, {
            "microlocal.csv": csv_text(["h", "mass", "bound", "pass"], rows),
        })

    def stage_moyal(self) -> StageResult:
        q = self.quadratic()
        rows = []
        for N in range(1, 5):
            comm = moyal.star_commutator(q, q**N)
            rows.append([N, comm.is_zero()])
        passed = all(r[1] for r in rows)
        return StageResult("moyal", passed, {"q": q.to_string(), "passed": passed}, {
            "moyal.csv": csv_text(["N", "commutator_zero"], rows),
        })

    def stage_qn_bound(self) -> StageResult:
        q = self.quadratic()
        h_t = self.cfg["sweep"]["h_tilde"]
        hs = sweep_hs(self.cfg)
        rows = []
        passed = True
        for N in self.cfg["qn_bound"]["N_list"]:
            vals = []
            for h in hs:
                v = analysis.qn_boundedness_check(self.sweep_operator(h), q, N, ScalingParams(h, h_t),
                                                  u=self.ground(h).vec)
                vals.append(v)
                rows.append([N, h, v])
            ratio = max(vals) / min(vals)
            passed &= ratio <= self.tol["qn_factor"]
        return StageResult("qn_bound", passed, {"passed": passed,
                                                "rule": "max/min over the sweep <= qn_factor"}, {
            "qn_bound.csv": csv_text(["N", "h", "norm"], rows),
        })

    def stage_derivative_bounds(self) -> StageResult:
        K = self.cfg["derivative_bounds"]["K"]
        tables = {}
        for h in sweep_hs(self.cfg):
            tables[h] = analysis.derivative_bounds_check(self.ground(h).vec, sweep_grid(self.cfg, h), h, K)
        verdict = analysis.derivative_bounds_verdict(tables, self.n, self.tol["derivative_slack"])
        rows = []
        for h, tab in tables.items():
            for (alpha, beta), v in tab.items():
                rows.append([h, " ".join(map(str, alpha)), " ".join(map(str, beta)), v])
        return StageResult("derivative_bounds", verdict["passed"],
                           {"passed": verdict["passed"],
                            "worst_ratio": max(verdict["worst_ratio"].values())}, {
            "derivative_bounds.csv": csv_text(["h", "alpha", "beta", "sup_norm"], rows),
        })


def oscillator_levels(n: int, h: float, k: int) -> list[float]:
    levels = sorted(hermite.oscillator_eigenvalue(a, h) for a in _multi_indices(n, k))
    return levels[:k]


def _multi_indices(n: int, k: int):
    return [a for a in itertools.product(range(k + 1), repeat=n) if sum(a) <= k]


def cluster_table(pairs, tol: float = 1e-6):
    """Group eigenpairs whose eigenvalues agree to relative ``tol``: (lambda, max residual, N_k)."""
    groups: list[list] = []
    for p in pairs:
        for g in groups:
            if abs(p.lam - g[0].lam) <= tol * max(abs(g[0].lam), 1e-300):
                g.append(p)
                break
        else:
            groups.append([p])
    return [(complex(np.mean([p.lam for p in g])), max(p.residual for p in g), len(g)) for g in groups]


def run_summary(cfg: dict, results: list[StageResult], status: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": cfg["name"],
        "config_hash": config_hash(cfg),
        "stages": {r.name: _jsonable(r.summary) for r in results},
        "verdicts": {r.name: r.passed for r in results},
        "exit_status": status,
    }


def run(config_ref: str, *, output_dir: str | None = None, jobs: int = 1, echo=print) -> int:
    """Run a config file (or shipped config name) and return the exit status."""
    try:
        where, text = _resolve_config_path(config_ref)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{where}: invalid JSON: {exc}") from None
        cfg = validate_config(raw)
    except ConfigError as exc:
        echo(f"error: {exc}")
        return EXIT_CONFIG
    digest = config_hash(cfg)
    out = Path(output_dir or cfg["output_dir"]) / f"{cfg['name']}-{digest}"
    out.mkdir(parents=True, exist_ok=True)
    cache = os.environ.get(CACHE_ENV)
    runner = Runner(cfg, Path(cache) if cache else None)
    (out / "config.json").write_text(json_text(cfg))

    results: list[StageResult] = []
    status = EXIT_OK
    checks = [s for s in STAGE_ORDER if s in cfg["checks"]]
    for name in checks:
        try:
            res = runner.stage_scaling(jobs) if name == "scaling" else getattr(runner, f"stage_{name}")()
        except ResourceError as exc:
            echo(f"error: resource ceiling in stage {name}: {exc}")
            status = EXIT_RESOURCE
            break
        except Exception as exc:  # propagate with context
            raise RuntimeError(f"stage {name} failed: {exc}") from exc
        results.append(res)
        for fname, content in res.files.items():
            (out / fname).write_text(content)
        echo(f"[{'pass' if res.passed else 'FAIL'}] {name}")
        if name == "assumptions" and not res.passed:
            for msg in res.summary["messages"]:
                echo(f"  {msg}")
            echo("assumptions failed; downstream stages skipped")
            status = EXIT_ASSUMPTIONS
            break
    if status == EXIT_OK and not all(r.passed for r in results):
        status = EXIT_VERDICT
    (out / "summary.json").write_text(json_text(run_summary(cfg, results, status)))
    echo(f"artifacts in {out}")
    return status


# ---------------------------------------------------------------------------
# argument parsing


def _parse_alpha(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad multi-index {text!r}; use e.g. 0,1") from None


def _parse_p(text: str) -> float:
    p = analysis.p_from_key(text)
    if p < 2:
        raise argparse.ArgumentTypeError("p must be >= 2")
    return p


def _operator_args(ap: argparse.ArgumentParser):
    grp = ap.add_mutually_exclusive_group()
    grp.add_argument("--family", choices=sorted(FAMILIES), default="oscillator",
                     help="built-in operator family (default: oscillator)")
    grp.add_argument("--symbol", help="polynomial symbol expression, e.g. 'xi1^2 + x1^2'")
    ap.add_argument("--n", type=int, default=2, help="space dimension (default: 2)")


def _family_from_args(args) -> Family:
    if args.symbol:
        return polynomial_family(parse_symbol(args.symbol, args.n), "symbol")
    return family_by_id(args.family, args.n)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiclass", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON experiment config")
    p.add_argument("config", help=f"config path or shipped name ({', '.join(shipped_configs())})")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells (default: 1)")

    p = sub.add_parser("quantize", help="assemble an operator matrix and save it")
    _operator_args(p)
    p.add_argument("--L", type=float, required=True, help="box half-width")
    p.add_argument("--N", type=int, required=True, help="points per axis")
    p.add_argument("--h", type=float, required=True, help="semiclassical parameter")
    p.add_argument("--out", help="write the operator to this binary file")

    p = sub.add_parser("spectrum", help="eigenvalues nearest 0 as a cluster table")
    p.add_argument("--config", help="take operator and spectrum settings from this config")
    _operator_args(p)
    p.add_argument("--h", type=float, help="semiclassical parameter (default 0.05)")
    p.add_argument("--L", type=float, help="box half-width (default 8 sqrt(h))")
    p.add_argument("--N", type=int, help="points per axis (default 32)")
    p.add_argument("--k", type=int, help="number of eigenpairs (default 3)")

    p = sub.add_parser("scaling", help="h-sweep of ground-state L^p norms with fitted exponents")
    p.add_argument("--config", help="take settings from this config")
    _operator_args(p)
    p.add_argument("--h-tilde", type=float, default=0.5, help="largest sweep h (default 0.5)")
    p.add_argument("--k-min", type=int, default=1, help="first halving index (default 1)")
    p.add_argument("--k-max", type=int, default=6, help="last halving index (default 6)")
    p.add_argument("--N", type=int, default=32, help="points per axis (default 32)")
    p.add_argument("--L-scale", type=float, default=8.0, help="box half-width over sqrt(h) (default 8)")
    p.add_argument("--p", type=_parse_p, nargs="+", default=[2.0, 4.0, math.inf], help="exponents p")
    p.add_argument("--cluster-C", type=float, default=3.0, help="ground cluster radius in units of h")
    p.add_argument("--fit-tol", type=float, default=0.05, help="verdict tolerance on the exponent")
    p.add_argument("--out", help="directory for CSV/JSON/SVG output")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")

    p = sub.add_parser("garding", help="lowest eigenvalue of Re Op(a) across h")
    p.add_argument("--symbol", default="builtin",
                   help="polynomial expression, or 'builtin' for x^2 + xi^2 + 0.5 sin x sin xi")
    p.add_argument("--h", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025], help="h values")
    p.add_argument("--L", type=float, default=10.0, help="box half-width")
    p.add_argument("--N", type=int, default=512, help="points per axis")

    p = sub.add_parser("moyal", help="exact star products of polynomial symbols")
    p.add_argument("--a", required=True, help="left symbol")
    p.add_argument("--b", required=True, help="right symbol")
    p.add_argument("--n", type=int, help="dimension (default: inferred from the variables)")
    p.add_argument("--commutator", action="store_true", help="print a#b - b#a instead")
    p.add_argument("--order", type=int, help="truncate the expansion at h^order")
    p.add_argument("--json", action="store_true", help="print JSON as well")

    p = sub.add_parser("oracle", help="harmonic-oscillator eigenvalue and L^p norms (CSV)")
    p.add_argument("--alpha", type=_parse_alpha, required=True, help="multi-index, e.g. 0,0")
    p.add_argument("--h", type=float, nargs="+", required=True, help="h values")
    p.add_argument("--p", type=_parse_p, nargs="+", default=[2.0, 4.0, math.inf], help="exponents p")
    p.add_argument("--digits", type=int, default=6, help="significant digits (default 6)")
    return ap


# ---------------------------------------------------------------------------
# subcommands


def cmd_quantize(args) -> int:
    fam = _family_from_args(args)
    check_resources(fam, args.n, args.N, "quantize")
    grid = PhaseSpaceGrid(args.n, args.L, args.N, args.h)
    op = fam.operator(grid, matrix_free=False)
    print(f"operator: {op.symbol_desc}")
    print(f"method: {op.method}  storage: {op.kind}  shape: {op.shape[0]}x{op.shape[1]}")
    if args.out:
        save_operator(op, args.out)
        print(f"written to {args.out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.config:
        _, text = _resolve_config_path(args.config)
        cfg = validate_config(json.loads(text))
        fam = build_family(cfg)
        s = cfg["spectrum"]
        n = cfg["n"]
        h = args.h or s.get("h", 0.05)
        N = args.N or s.get("N", cfg["grid"]["N"])
        L = args.L or s.get("L", 8 * math.sqrt(h))
        k = args.k or s["k"]
    else:
        fam = _family_from_args(args)
        n = args.n
        h = args.h or 0.05
        N = args.N or 32
        L = args.L or 8 * math.sqrt(h)
        k = args.k or 3
    check_resources(fam, n, N, "spectrum")
    A = fam.operator(PhaseSpaceGrid(n, L, N, h))
    pairs = eigensolve.eigs_near(A, 0.0, k)
    print(f"{'lambda':>28}  {'lambda/h':>22}  {'residual':>9}  N_k")
    for lam, res, mult in cluster_table(pairs):
        print(f"{_cfmt(lam, 10):>28}  {_cfmt(lam / h, 8):>22}  {res:9.2e}  {mult}")
    return EXIT_OK


def _cfmt(z: complex, digits: int) -> str:
    if abs(z.imag) <= 1e-12 * max(abs(z), 1e-300):
        return f"{z.real:.{digits}g}"
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real:.{digits}g}{sign}{abs(z.imag):.{digits}g}i"


def cmd_scaling(args) -> int:
    if args.config:
        _, text = _resolve_config_path(args.config)
        cfg = validate_config(json.loads(text))
    else:
        cfg = validate_config({
            "schema_version": 1, "name": "scaling", "n": args.n,
            "operator": {"symbol": args.symbol} if args.symbol else {"family": args.family},
            "grid": {"N": args.N, "L_scale": args.L_scale},
            "sweep": {"h_tilde": args.h_tilde, "k_min": args.k_min, "k_max": args.k_max},
            "p_list": [analysis.p_key(p) if math.isinf(p) else p for p in args.p],
            "checks": ["scaling"], "cluster_C": args.cluster_C,
            "tolerances": {"fit_tol": args.fit_tol},
        })
    runner = Runner(cfg)
    check_resources(runner.family, cfg["n"], cfg["grid"]["N"], "scaling")
    res = runner.stage_scaling(args.jobs)
    report = analysis.ScalingReport.from_dict(json.loads(res.files["scaling.json"]))
    print(report.table())
    for note in report.notes:
        print(f"note: {note}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for fname, content in res.files.items():
            (out / fname).write_text(content)
        print(f"artifacts in {out}")
    return EXIT_OK if res.passed else EXIT_VERDICT


def cmd_garding(args) -> int:
    sym = garding_test_symbol() if args.symbol == "builtin" else parse_symbol(args.symbol)
    if sym.dim >= 2 and args.N > DENSE_2D_MAX_N:
        raise ResourceError(f"dense 2D quantization needs N <= {DENSE_2D_MAX_N}")
    grids = [PhaseSpaceGrid(sym.dim, args.L, args.N, h) for h in args.h]
    rows = analysis.garding_constants(as_callable(sym), grids)
    print("h,min_eig,inf_a,C")
    for r in rows:
        print(f"{r['h']!r},{r['min_eig']:.10g},{r['inf_a']:.6g},{r['C']:.8g}")
    print(f"relative spread of C: {analysis.spread_ratio([r['C'] for r in rows]):.4g}")
    return EXIT_OK


def cmd_moyal(args) -> int:
    n = args.n or max(infer_dim(args.a), infer_dim(args.b))
    a = parse_symbol(args.a, n)
    b = parse_symbol(args.b, n)
    dropped = []
    if args.commutator:
        res = moyal.star_commutator(a, b)
    elif args.order is not None:
        res, dropped = moyal.truncated_star_product(a, b, args.order)
    else:
        res = moyal.star_product(a, b)
    print(res.to_string())
    if dropped:
        print(f"dropped orders: {', '.join(f'h^{k}' for k in dropped)}")
    if args.json:
        print(json.dumps(res.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_oracle(args) -> int:
    alpha = args.alpha
    d = args.digits
    print("alpha,h,lambda,p,C_alpha,norm")
    for h in args.h:
        lam = hermite.oscillator_eigenvalue(alpha, h)
        for p in args.p:
            C = hermite.lp_constant(alpha, p)
            norm = hermite.lp_norm_exact(alpha, h, p)
            print(f"\"{','.join(map(str, alpha))}\",{h:.{d}g},{lam:.{d}g},{analysis.p_key(p)},{C:.{d}g},{norm:.{d}g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return run(args.config, output_dir=args.output_dir, jobs=args.jobs)
        handler = {
            "quantize": cmd_quantize,
            "spectrum": cmd_spectrum,
            "scaling": cmd_scaling,
            "garding": cmd_garding,
            "moyal": cmd_moyal,
            "oracle": cmd_oracle,
        }[args.command]
        return handler(args)
    except (ConfigError, SymbolParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())

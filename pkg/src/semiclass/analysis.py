"""Verification harness: L^p norms, exponent fits and positivity checks."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .eigensolve import eigs_near, ground_cluster
from .quantize import (
    OperatorMatrix,
    PhaseSpaceGrid,
    ScalingParams,
    cutoff_quantize,
    trig_eval,
    weyl_quantize,
)
from .symbols import PolySymbol, sample_points

__all__ = [
    "SCHEMA_VERSION",
    "p_key",
    "p_from_key",
    "lp_norm_grid",
    "theoretical_exponent",
    "ktz_exponent",
    "fit_exponent",
    "ScalingReport",
    "scaling_sweep",
    "garding_min_eig",
    "symbol_infimum",
    "garding_constants",
    "AprioriResult",
    "apriori_check",
    "pad_state",
    "microlocal_mass",
    "gradient_bound_check",
    "qn_boundedness_check",
    "derivative_bounds_check",
    "derivative_bounds_verdict",
    "spread_ratio",
]

SCHEMA_VERSION = 1
CSV_COLUMNS = ["h", "p", "norm", "oracle_norm", "lambda_re", "lambda_im", "residual"]


def p_key(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def p_from_key(key) -> float:
    if isinstance(key, (int, float)):
        return float(key)
    return math.inf if str(key) in ("inf", "infinity", "Infinity") else float(key)


# ---------------------------------------------------------------------------
# norms and exponents


def _refine_sup(u: np.ndarray, grid: PhaseSpaceGrid) -> float:
    """Maximise |band-limited interpolant| starting from the grid maximum."""
    U = np.abs(u).reshape(grid.shape)
    start = np.unravel_index(int(np.argmax(U)), grid.shape)
    x0 = np.array([grid.x_nodes[i] for i in start])
    f = lambda x: -abs(trig_eval(u, grid, x))  # noqa: E731
    if grid.n == 1:
        res = optimize.minimize_scalar(
            lambda t: f([t]), bounds=(x0[0] - grid.dx, x0[0] + grid.dx), method="bounded",
            options={"xatol": 1e-10 * grid.dx},
        )
        best = -res.fun
    else:
        simplex = np.array([x0, x0 + [0.5 * grid.dx, 0.0], x0 + [0.0, 0.5 * grid.dx]])
        res = optimize.minimize(f, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "xatol": 1e-9 * grid.dx,
                                         "fatol": 1e-15, "maxiter": 2000})
        best = -res.fun
    return float(max(best, U.max()))


def lp_norm_grid(u, grid: PhaseSpaceGrid, p: float, refine: bool = False) -> float:
    """(sum |u_j|^p dx^n)^(1/p); for p = inf the largest |u_j|.

    With ``refine=True`` the sup norm is taken of the band-limited
    interpolant of the samples, which removes the O(dx^2) bias of the raw
    grid maximum.
    """
    p = float(p)
    if p < 2:
        raise ValueError("p must be >= 2")
    u = np.asarray(u).reshape(-1)
    if math.isinf(p):
        return _refine_sup(u, grid) if refine else float(np.abs(u).max())
    return float((np.sum(np.abs(u) ** p) * grid.weight) ** (1.0 / p))


def theoretical_exponent(n: int, p: float) -> float:
    """delta(p) = n/4 - n/(2p), the decay rate in ||u||_p <= O(1) h^(-delta)."""
    p = float(p)
    if p < 2:
        raise ValueError("p must be >= 2")
    return n / 4 - (0.0 if math.isinf(p) else n / (2 * p))


def ktz_exponent(n: int, p: float) -> float | None:
    """Exponent of the general-eigenfunction bounds drawn dashed for comparison."""
    p = float(p)
    if n < 2:
        return None
    inv = 0.0 if math.isinf(p) else 1.0 / p
    if n == 2:
        return 0.5 - inv
    if inv <= (n - 2) / (2 * n):
        return (n - 1) / 2 - n * inv
    return n / 4 - n * inv / 2


def fit_exponent(hs: Sequence[float], norms: Sequence[float]) -> tuple[float, float]:
    """Least squares for log norm = c - delta log h; returns (delta, stderr)."""
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.asarray(norms, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points")
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = coef[1]
    dof = x.size - 2
    if dof > 0:
        resid = y - A @ coef
        s2 = float(resid @ resid) / dof
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(s2 / sxx)
    else:
        stderr = 0.0
    return float(-slope), float(stderr)


@dataclass
class ScalingReport:
    operator_desc: str
    n: int
    rows: list[dict]
    fitted: dict[str, tuple[float, float]]
    theoretical: dict[str, float]
    ktz_reference: dict[str, float | None]
    verdicts: dict[str, bool]
    fit_tol: float
    fit_h: list[float]
    excluded_h: list[float]
    diagnostic: bool = False
    notes: list[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "operator_desc": self.operator_desc,
            "n": self.n,
            "rows": self.rows,
            "fitted": {k: {"delta": d, "stderr": s} for k, (d, s) in self.fitted.items()},
            "theoretical": self.theoretical,
            "ktz_reference": self.ktz_reference,
            "verdicts": self.verdicts,
            "fit_tol": self.fit_tol,
            "fit_h": self.fit_h,
            "excluded_h": self.excluded_h,
            "diagnostic": self.diagnostic,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingReport":
        return cls(
            operator_desc=d["operator_desc"],
            n=d["n"],
            rows=[dict(r) for r in d["rows"]],
            fitted={k: (v["delta"], v["stderr"]) for k, v in d["fitted"].items()},
            theoretical=dict(d["theoretical"]),
            ktz_reference=dict(d["ktz_reference"]),
            verdicts=dict(d["verdicts"]),
            fit_tol=d["fit_tol"],
            fit_h=list(d["fit_h"]),
            excluded_h=list(d["excluded_h"]),
            diagnostic=d.get("diagnostic", False),
            notes=list(d.get("notes", [])),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'p':>5} {'fitted':>10} {'stderr':>9} {'theory':>8} {'ktz':>8}  verdict"]
        for k in self.fitted:
            d, s = self.fitted[k]
            ktz = self.ktz_reference.get(k)
            verdict = "diagnostic" if self.diagnostic else ("pass" if self.verdicts[k] else "FAIL")
            lines.append(f"{k:>5} {d:10.5f} {s:9.2e} {self.theoretical[k]:8.4f} "
                         f"{'-' if ktz is None else f'{ktz:8.4f}':>8}  {verdict}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def scaling_sweep(
    op_family: Callable[[float], OperatorMatrix],
    h_list: Sequence[float],
    p_list: Sequence[float],
    C: float,
    *,
    oracle: Callable[[float, float], float] | None = None,
    fit_tol: float = 0.05,
    refine_inf: bool = True,
    operator_desc: str = "",
    jobs: int = 1,
) -> ScalingReport:
    """Ground-state L^p norms over an h sweep with fitted decay exponents.

    For each h the eigenpair of smallest |lam| in the ground cluster
    |lam| < C h is used.  The largest h is left out of the fit when five or
    more usable points exist, as are h below the grid's resolvable floor.
    Cells are independent; ``jobs > 1`` evaluates them on a thread pool and
    the result does not depend on ``jobs``.
    """
    h_list = sorted((float(h) for h in h_list), reverse=True)
    if len(h_list) < 5 or h_list[0] / h_list[-1] < 16 - 1e-9:
        raise ValueError("an h sweep needs >= 5 values spanning a factor >= 16")
    def cell(h):
        A = op_family(h)
        cluster = ground_cluster(A, C, h)
        if not cluster:
            raise ValueError(f"empty ground cluster at h={h:g} (C={C:g})")
        ground = min(cluster, key=lambda e: (abs(e.lam), e.lam.imag, e.lam.real))
        cell_rows = [{
            "h": h,
            "p": p_key(p),
            "norm": lp_norm_grid(ground.vec, A.grid, p, refine=refine_inf and math.isinf(p)),
            "oracle_norm": None if oracle is None else float(oracle(h, p)),
            "lambda_re": float(ground.lam.real),
            "lambda_im": float(ground.lam.imag),
            "residual": float(ground.residual),
        } for p in p_list]
        return A.grid.n, h >= A.grid.h_min, cell_rows

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(cell, h_list))
    else:
        cells = [cell(h) for h in h_list]
    rows, usable, excluded = [], [], []
    n = cells[0][0]
    for h, (_, ok, cell_rows) in zip(h_list, cells):
        rows.extend(cell_rows)
        (usable if ok else excluded).append(h)
    notes = []
    if len(usable) >= 5:
        excluded.append(usable.pop(0))
        notes.append(f"largest h={excluded[-1]:g} left out of the fit as pre-asymptotic")
    if len(usable) < 4:
        raise ValueError(f"only {len(usable)} usable h values for the fit")
    fitted, theo, ktz, verdicts = {}, {}, {}, {}
    for p in p_list:
        k = p_key(p)
        pts = [(r["h"], r["norm"]) for r in rows if r["p"] == k and r["h"] in usable]
        fitted[k] = fit_exponent(*zip(*pts))
        theo[k] = theoretical_exponent(n, p)
        ktz[k] = ktz_exponent(n, p)
        verdicts[k] = abs(fitted[k][0] - theo[k]) <= fit_tol
    diagnostic = n < 2
    if diagnostic:
        notes.append("n = 1: diagnostic only, outside the theorem's range n >= 2")
    return ScalingReport(operator_desc, n, rows, fitted, theo, ktz, verdicts, fit_tol,
                         sorted(usable), sorted(excluded), diagnostic, notes)


# ---------------------------------------------------------------------------
# positivity


def garding_min_eig(a, grid: PhaseSpaceGrid) -> float:
    """Smallest eigenvalue of the Hermitian part of Op_h^w(a)."""
    H = weyl_quantize(a, grid).hermitian_part().storage
    return float(sla.eigvalsh(H, subset_by_index=[0, 0])[0])


def symbol_infimum(a, radius: float, n_samples: int = 1 << 14) -> float:
    """Sampled infimum of Re a over [-radius, radius]^{2n} (origin included)."""
    X = sample_points(a.dim, radius, n_samples)
    X = np.concatenate([np.zeros((2 * a.dim, 1)), X], axis=1)
    return float(np.min(np.real(a(X))))


def garding_constants(a, grids: Iterable[PhaseSpaceGrid], inf_a: float | None = None) -> list[dict]:
    """C(h) = (inf a - m(h)) / h, the sharpest constant in m(h) >= inf a - C h."""
    grids = list(grids)
    if inf_a is None:
        inf_a = symbol_infimum(a, max(g.L for g in grids))
    out = []
    for g in grids:
        m = garding_min_eig(a, g)
        out.append({"h": g.h, "min_eig": m, "inf_a": inf_a, "C": (inf_a - m) / g.h})
    return out


def spread_ratio(values: Sequence[float]) -> float:
    """(max - min) / max |value|: relative variation of a fitted constant."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / np.abs(v).max())


class AprioriResult(NamedTuple):
    min_eig: float
    C_tilde: float
    witness: np.ndarray | None


def apriori_check(P: OperatorMatrix, lam: complex, chi, params: ScalingParams) -> AprioriResult:
    """Smallest eigenvalue m of Re[(P - lam) + eps Op(chi(X/sqrt(eps)))].

    Returns m, C~ = eps/m (inf when m <= 0) and, on violation, the
    eigenvector of m as a witness.
    """
    grid = P.grid
    eps = params.eps
    cut = cutoff_quantize(chi, math.sqrt(eps), grid)
    A = P.toarray() - lam * np.eye(grid.size) + eps * cut.storage
    H = 0.5 * (A + A.conj().T)
    w, V = sla.eigh(H, subset_by_index=[0, 0])
    m = float(w[0])
    if m > 0:
        return AprioriResult(m, eps / m, None)
    return AprioriResult(m, math.inf, V[:, 0])


# ---------------------------------------------------------------------------
# microlocalization, commutator bound, derivative bounds


def pad_state(u, grid: PhaseSpaceGrid, factor: int = 2) -> tuple[np.ndarray, PhaseSpaceGrid]:
    """Embed u in a box ``factor`` times larger with the same spacing."""
    if factor == 1:
        return np.asarray(u).reshape(-1), grid
    big = PhaseSpaceGrid(grid.n, grid.L * factor, grid.N * factor, grid.h)
    off = (big.N - grid.N) // 2
    out = np.zeros(big.shape, dtype=complex)
    out[tuple(slice(off, off + grid.N) for _ in range(grid.n))] = np.asarray(u).reshape(grid.shape)
    return out.reshape(-1), big


def microlocal_mass(u, psi, delta: float, h: float, grid: PhaseSpaceGrid, *, pad: int = 2) -> float:
    """||u - Op_h^w(psi(X / h^delta)) u||_2.

    The state is zero-padded into a larger periodic box first; a compactly
    supported cutoff has a slowly decaying Weyl kernel and would otherwise
    wrap around the box.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if abs(grid.h - h) > 1e-12 * h:
        raise ValueError("grid.h must equal h")
    v, big = pad_state(u, grid, pad)
    Op = cutoff_quantize(psi, h**delta, big)
    return big.norm(v - Op.apply(v))


def gradient_bound_check(f: Callable[[np.ndarray], np.ndarray], samples, step: float = 1e-4) -> float:
    """max over samples of |grad f|^2 / (2 ||f''||_inf f).

    ``samples`` has shape (d, P).  ||f''||_inf is the largest spectral norm
    of the finite-difference Hessian over the samples; points where
    f < 1e-14 are skipped.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    d, P = X.shape
    fx = np.real(np.asarray(f(X), dtype=complex))
    grad = np.zeros((d, P))
    H = np.zeros((P, d, d))
    E = np.eye(d) * step
    for i in range(d):
        ei = E[:, i:i + 1]
        fp, fm = np.real(f(X + ei)), np.real(f(X - ei))
        grad[i] = (fp - fm) / (2 * step)
        H[:, i, i] = (fp - 2 * fx + fm) / step**2
        for j in range(i + 1, d):
            ej = E[:, j:j + 1]
            H[:, i, j] = H[:, j, i] = (
                np.real(f(X + ei + ej)) - np.real(f(X + ei - ej))
                - np.real(f(X - ei + ej)) + np.real(f(X - ei - ej))
            ) / (4 * step**2)
    f2 = float(np.max(np.abs(np.linalg.eigvalsh(H)))) if d > 1 else float(np.max(np.abs(H[:, 0, 0])))
    keep = fx >= 1e-14
    if not keep.any() or f2 == 0:
        return 0.0
    ratio = np.sum(grad[:, keep] ** 2, axis=0) / (2 * f2 * fx[keep])
    return float(ratio.max())


def qn_boundedness_check(
    P: OperatorMatrix,
    q: PolySymbol,
    N: int,
    params: ScalingParams,
    *,
    u: np.ndarray | None = None,
) -> float:
    """||Op_h^w(q^N(X / sqrt(eps))) u||_2 for the ground state u of P."""
    grid = P.grid
    if u is None:
        u = eigs_near(P, 0.0, 1)[0].vec
    if N == 0:
        return grid.norm(u)
    sym = (q**N).scaled(1.0 / math.sqrt(params.eps))
    return grid.norm(weyl_quantize(sym, grid).apply(u))


def _multi_indices(n: int, max_total: int):
    for idx in itertools.product(range(max_total + 1), repeat=n):
        if sum(idx) <= max_total:
            yield idx


def _spectral_derivative(u: np.ndarray, grid: PhaseSpaceGrid, beta: tuple[int, ...]) -> np.ndarray:
    U = np.asarray(u, dtype=complex).reshape(grid.shape)
    if not any(beta):
        return U
    k = math.pi * grid.m_fft / grid.L
    Uh = np.fft.fftn(U)
    for ax, b in enumerate(beta):
        if b == 0:
            continue
        mult = (1j * k) ** b
        if b % 2 == 1:
            mult[grid.N // 2] = 0.0
        shape = [1] * grid.n
        shape[ax] = grid.N
        Uh = Uh * mult.reshape(shape)
    return np.fft.ifftn(Uh)


def derivative_bounds_check(u, grid: PhaseSpaceGrid, h: float, K: int = 2) -> dict[tuple, float]:
    """||(x/sqrt h)^alpha (sqrt h d_x)^beta u||_inf for |alpha + beta| <= K."""
    if K > 3:
        raise ValueError("K <= 3")
    n = grid.n
    sq = math.sqrt(h)
    mesh = grid.mesh()
    out = {}
    for total in range(K + 1):
        for ab in _multi_indices(2 * n, total):
            if sum(ab) != total:
                continue
            alpha, beta = ab[:n], ab[n:]
            D = _spectral_derivative(u, grid, beta) * sq ** sum(beta)
            for ax, a in enumerate(alpha):
                if a:
                    D = D * (mesh[ax] / sq) ** a
            out[(alpha, beta)] = float(np.abs(D).max())
    return out


def derivative_bounds_verdict(tables: Mapping[float, Mapping[tuple, float]], n: int, slack: float = 2.0) -> dict:
    """Check each entry against slack * value(h_max) * (h / h_max)^(-n/4)."""
    hs = sorted(tables, reverse=True)
    hmax = hs[0]
    worst = {}
    ok = True
    for key, ref in tables[hmax].items():
        ratios = []
        for h in hs:
            bound = ref * (h / hmax) ** (-n / 4)
            ratios.append(tables[h][key] / bound if bound > 0 else 0.0)
        worst[key] = max(ratios)
        ok &= worst[key] <= slack
    return {"passed": bool(ok), "worst_ratio": worst, "slack": slack}

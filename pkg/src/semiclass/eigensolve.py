"""Eigenvalues near a target for (generally non-normal) grid operators."""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quantize import OperatorMatrix, PhaseSpaceGrid, weyl_quantize
from .symbols import PolySymbol

__all__ = [
    "EigenPair",
    "ConvergenceError",
    "ClusterOverflowError",
    "eigs_near",
    "ground_cluster",
    "quadratic_model_spectrum",
    "leading_order_check",
    "save_eigenpairs",
    "load_eigenpairs",
    "DENSE_MAX",
    "K_CAP",
]

log = logging.getLogger(__name__)

DENSE_MAX = 2048
K_CAP = 40
RESIDUAL_TOL = {"dense": 1e-8, "sparse": 1e-6}


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class ClusterOverflowError(RuntimeError):
    pass


@dataclass
class EigenPair:
    lam: complex
    vec: np.ndarray
    residual: float
    multiplicity_hint: int = 1

    def to_dict(self) -> dict:
        return {
            "lambda_re": float(self.lam.real),
            "lambda_im": float(self.lam.imag),
            "residual": float(self.residual),
            "multiplicity_hint": int(self.multiplicity_hint),
        }


def _normalize(v: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    v = v / grid.norm(v)
    i = int(np.argmax(np.abs(v)))
    v = v * (abs(v[i]) / v[i])
    v[i] = abs(v[i])
    return v


def _order_key(lam: complex, target: complex):
    return (round(abs(lam - target), 10), round(lam.imag, 10), lam.real)


def _is_hermitian(A: np.ndarray) -> bool:
    scale = np.abs(A).max(initial=0.0)
    return bool(np.abs(A - A.conj().T).max(initial=0.0) <= 1e-12 * max(scale, 1e-300))


def _dense_eigs(A: np.ndarray):
    if _is_hermitian(A):
        w, V = sla.eigh(0.5 * (A + A.conj().T))
        return w.astype(complex), V.astype(complex)
    return sla.eig(A)


def _shift_invert_operator(op: OperatorMatrix, sigma: complex, rtol: float):
    n = op.grid.size
    if op.kind == "dense":
        lu = sla.lu_factor(op.storage - sigma * np.eye(n))
        solve = lambda b: sla.lu_solve(lu, b)  # noqa: E731
    elif op.kind == "sparse":
        lu = spla.splu((op.storage - sigma * sp.identity(n)).tocsc())
        solve = lu.solve
    else:
        if op.approx is None:
            raise TypeError("matrix-free operator without a preconditioning surrogate")
        lu = spla.splu((op.approx - sigma * sp.identity(n)).tocsc())
        M = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
        A = spla.LinearOperator((n, n), matvec=lambda v: op.storage @ v - sigma * v, dtype=complex)

        def solve(b):
            x, info = spla.gmres(A, b, M=M, x0=lu.solve(b), rtol=rtol, atol=0.0, restart=60, maxiter=50)
            if info != 0:
                raise ConvergenceError(f"inner GMRES did not converge (info={info})")
            return x

    return spla.LinearOperator((n, n), matvec=lambda b: solve(np.asarray(b, dtype=complex)), dtype=complex)


def _arnoldi(op: OperatorMatrix, target: complex, k: int, tries: int = 2):
    n = op.grid.size
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    sigma = complex(target)
    last = None
    for attempt in range(tries):
        try:
            OPinv = _shift_invert_operator(op, sigma, rtol=1e-13)
            ncv = min(n - 1, max(3 * k + 10, 20))
            A = op.storage if op.kind != "matrix-free" else op.storage
            w, V = spla.eigs(A, k=k, sigma=sigma, OPinv=OPinv, v0=v0, ncv=ncv, maxiter=n * 10, tol=1e-14)
            return w, V
        except (RuntimeError, sla.LinAlgError) as exc:
            # exact hit on an eigenvalue makes the shifted matrix singular
            last = exc
            log.warning("shift-invert at %s failed (%s); perturbing the shift", sigma, exc)
            sigma = sigma + 1e-12 * max(1.0, abs(sigma))
    raise ConvergenceError(f"Arnoldi failed after {tries} attempts: {last}")


def eigs_near(
    A: OperatorMatrix,
    target: complex = 0.0,
    k: int = 6,
    *,
    method: str = "auto",
    residual_tol: float | None = None,
    cluster_tol: float = 1e-6,
) -> list[EigenPair]:
    """The k eigenpairs of ``A`` nearest ``target``.

    Ordering is ascending |lam - target|, ties broken by Im lam then Re lam.
    Vectors are L^2-normalised with grid weights and phase-fixed so their
    largest component is real positive.  ``method`` is ``dense`` (full
    Hessenberg-QR), ``arnoldi`` (shift-invert) or ``auto``.
    """
    if k < 1 or k > K_CAP:
        raise ValueError(f"k must be in 1..{K_CAP}")
    grid = A.grid
    n = grid.size
    if method == "auto":
        method = "dense" if (A.kind == "dense" and n <= DENSE_MAX) else "arnoldi"
    if method == "dense":
        w, V = _dense_eigs(A.toarray())
        idx = sorted(range(len(w)), key=lambda i: _order_key(complex(w[i]), target))[:k]
        w, V = w[idx], V[:, idx]
        tol = RESIDUAL_TOL["dense"] if residual_tol is None else residual_tol
    elif method == "arnoldi":
        if k >= n - 1:
            raise ValueError("k too large for Arnoldi on this grid")
        w, V = _arnoldi(A, target, k)
        tol = RESIDUAL_TOL["sparse"] if residual_tol is None else residual_tol
    else:
        raise ValueError(f"unknown method {method!r}")

    pairs = []
    for lam, v in zip(w, V.T):
        lam = complex(lam)
        v = _normalize(np.asarray(v, dtype=complex), grid)
        res = grid.norm(A.apply(v) - lam * v)
        pairs.append(EigenPair(lam, v, res))
    bad = [p.residual for p in pairs if not p.residual <= tol]
    if bad:
        raise ConvergenceError(f"residuals above {tol:g}: {bad}", [p.residual for p in pairs])
    pairs.sort(key=lambda p: _order_key(p.lam, target))
    for p in pairs:
        ref = max(abs(p.lam), 1.0) * cluster_tol
        p.multiplicity_hint = sum(abs(q.lam - p.lam) <= ref for q in pairs)
    return pairs


def ground_cluster(A: OperatorMatrix, C: float, h: float, *, k0: int = 4, method: str = "auto") -> list[EigenPair]:
    """All eigenpairs with |lam| < C h, growing k until an eigenvalue with
    |lam| >= 1.05 C h shows the cluster is exhausted."""
    radius = C * h
    k = k0
    n = A.grid.size
    while True:
        k_eff = min(k, K_CAP, n - 2)
        pairs = eigs_near(A, 0.0, k_eff, method=method)
        if any(abs(p.lam) >= 1.05 * radius for p in pairs) or k_eff >= n - 2:
            return [p for p in pairs if abs(p.lam) < radius]
        if k_eff >= K_CAP:
            raise ClusterOverflowError(f"more than {K_CAP} eigenvalues within |lam| < {radius:g}")
        k *= 2


def _quadratic_grid(q: PolySymbol, C: float) -> PhaseSpaceGrid:
    # states with |mu| < C reach |X| ~ sqrt(C); keep 8 widths of room
    ext = math.sqrt(max(C, 1.0))
    if q.dim == 1:
        L, N = 4.0 * ext + 8.0, 256
    else:
        L, N = 2.5 * ext + 4.0, 32
    return PhaseSpaceGrid(q.dim, L, N, 1.0)


def quadratic_model_spectrum(
    q: PolySymbol,
    C: float,
    *,
    grid: PhaseSpaceGrid | None = None,
    cluster_tol: float = 1e-6,
) -> list[tuple[complex, int]]:
    """Eigenvalues of Op_1^w(q) in the disc |mu| < C, clustered with
    multiplicities (clusters are within cluster_tol * C of each other)."""
    if q.degree != 2 or not q.homogeneous_part(2) == q:
        raise ValueError("q must be a homogeneous quadratic form")
    if np.linalg.eigvalsh(0.5 * np.real(q.hessian()))[0] <= 0:
        raise ValueError("Re q must be positive definite")
    grid = grid or _quadratic_grid(q, C)
    A = weyl_quantize(q, grid)
    w = sla.eigvals(A.storage)
    # eigenvalues within cluster_tol of the circle |mu| = C count as outside
    inside = sorted((complex(z) for z in w if abs(z) < C * (1 - cluster_tol)), key=lambda z: (abs(z), z.imag, z.real))
    clusters: list[list[complex]] = []
    for z in inside:
        for c in clusters:
            if abs(z - c[0]) <= cluster_tol * C:
                c.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(c)), len(c)) for c in clusters]


def leading_order_check(P_family, q: PolySymbol, h_list, C: float) -> list[dict]:
    """Compare ground-cluster eigenvalues lam(h)/h with the model spectrum mu.

    ``P_family`` maps h to an OperatorMatrix.  Each eigenvalue is paired with
    its nearest mu; rows flag pairings where two eigenvalues pick the same
    mu beyond its multiplicity.
    """
    mus = quadratic_model_spectrum(q, C)
    rows = []
    for h in h_list:
        A = P_family(h)
        cluster = ground_cluster(A, C, h)
        used: dict[int, int] = {}
        for idx, pair in enumerate(cluster):
            scaled = pair.lam / h
            j = min(range(len(mus)), key=lambda i: abs(scaled - mus[i][0]))
            used[j] = used.get(j, 0) + 1
            rows.append({
                "h": h,
                "index": idx,
                "lambda": pair.lam,
                "mu": mus[j][0],
                "deviation": abs(scaled - mus[j][0]),
                "ambiguous": used[j] > mus[j][1],
            })
    return rows


EIGEN_MAGIC = b"SCLEIG01"


def save_eigenpairs(pairs: list[EigenPair], grid: PhaseSpaceGrid, path) -> Path:
    """Write eigenpairs as magic + u64 header length + JSON header + complex128 vectors."""
    header = {
        "schema_version": 1,
        "grid": grid.to_dict(),
        "pairs": [p.to_dict() for p in pairs],
        "size": grid.size,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(EIGEN_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for p in pairs:
            fh.write(np.asarray(p.vec, dtype="<c16").tobytes())
    return path


def load_eigenpairs(path) -> tuple[list[EigenPair], PhaseSpaceGrid]:
    with open(path, "rb") as fh:
        if fh.read(len(EIGEN_MAGIC)) != EIGEN_MAGIC:
            raise ValueError(f"{path} is not an eigenpair cache file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        grid = PhaseSpaceGrid.from_dict(header["grid"])
        pairs = []
        for d in header["pairs"]:
            vec = np.frombuffer(fh.read(16 * header["size"]), dtype="<c16").astype(complex)
            pairs.append(EigenPair(complex(d["lambda_re"], d["lambda_im"]), vec,
                                   d["residual"], d["multiplicity_hint"]))
    return pairs, grid

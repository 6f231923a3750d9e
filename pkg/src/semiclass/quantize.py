"""Discrete Weyl quantization on periodic phase-space grids (n = 1, 2).

The position box is ``[-L, L)^n`` with ``N`` points per axis; the dual
frequencies are ``xi_m = h * pi * m / L`` for ``m`` in the symmetric
Nyquist range.  With this pairing the midpoint rule for the Weyl integral
collapses to

    A[j, k] = (1/N^n) sum_m exp(2 pi i (j - k).m / N) a((x_j + x_k)/2, xi_m),

which is assembled with one inverse FFT per midpoint index.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .symbols import CallableSymbol, PolySymbol, as_callable, rescaled

__all__ = [
    "PhaseSpaceGrid",
    "OperatorMatrix",
    "ScalingParams",
    "NyquistError",
    "UnresolvableScaleError",
    "weyl_quantize",
    "quantize_schrodinger",
    "cutoff_quantize",
    "rescale_state",
    "rescaled_grid",
    "conjugation_check",
    "trig_interpolate",
    "trig_eval",
    "save_operator",
    "load_operator",
    "DENSE_2D_MAX_N",
]

DENSE_2D_MAX_N = 64
DENSE_ASSEMBLY_MAX = 4096
OPERATOR_MAGIC = b"SCLOP001"


class NyquistError(ValueError):
    pass


class UnresolvableScaleError(ValueError):
    pass


def _fft_friendly(N: int) -> bool:
    for p in (2, 3, 5):
        while N % p == 0:
            N //= p
    return N == 1


@dataclass(frozen=True)
class PhaseSpaceGrid:
    n: int
    L: float
    N: int
    h: float
    momentum_bound: float | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 and n = 2 grids are supported")
        if self.N < 2 or self.N % 2 or not _fft_friendly(self.N):
            raise ValueError(f"N must be even with prime factors 2, 3, 5 only, got {self.N}")
        if not (self.L > 0 and self.h > 0):
            raise ValueError("L and h must be positive")
        if self.momentum_bound is not None and self.xi_max < self.momentum_bound:
            raise NyquistError(
                f"xi_max = {self.xi_max:.4g} does not cover the requested momentum scale "
                f"{self.momentum_bound:.4g}; increase N or decrease L"
            )

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N

    @property
    def dxi(self) -> float:
        return self.h * math.pi / self.L

    @property
    def weight(self) -> float:
        return self.dx**self.n

    @property
    def xi_max(self) -> float:
        return self.h * math.pi * self.N / (2 * self.L)

    @property
    def h_min(self) -> float:
        """Smallest h whose ground states (width ~ sqrt(h) in x and xi) are
        resolved with 6 standard deviations inside the Nyquist band."""
        return (12 * self.L / (math.pi * self.N)) ** 2

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def m_fft(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, 1.0 / self.N)

    @property
    def xi_nodes(self) -> np.ndarray:
        """Frequencies in FFT order."""
        return self.dxi * self.m_fft

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.x_nodes] * self.n), indexing="ij")

    def sample(self, f: Callable[..., np.ndarray]) -> np.ndarray:
        """Sample f(x_1, ..., x_n) on the grid, flattened."""
        return np.asarray(f(*self.mesh()), dtype=complex).reshape(-1)

    def norm(self, u) -> float:
        return float(np.sqrt(np.sum(np.abs(u) ** 2) * self.weight))

    def inner(self, u, v) -> complex:
        return complex(np.vdot(u, v) * self.weight)

    def with_h(self, h: float) -> "PhaseSpaceGrid":
        return PhaseSpaceGrid(self.n, self.L, self.N, h)

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N, "h": self.h}

    @classmethod
    def from_dict(cls, d) -> "PhaseSpaceGrid":
        return cls(int(d["n"]), float(d["L"]), int(d["N"]), float(d["h"]))


@dataclass(frozen=True)
class ScalingParams:
    """Second semiclassical parameter h_tilde and the ratio eps = h / h_tilde."""

    h: float
    h_tilde: float
    delta: float = 0.4

    def __post_init__(self):
        if not 0 < self.h <= self.h_tilde <= 1:
            raise ValueError("need 0 < h <= h_tilde <= 1")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")

    @property
    def eps(self) -> float:
        return self.h / self.h_tilde


@dataclass
class OperatorMatrix:
    """A discretised operator together with its provenance.

    ``storage`` is a dense ndarray, a scipy sparse matrix, or (for large
    spectral Schrodinger operators) a matrix-free ``LinearOperator``; in the
    last case ``approx`` carries a sparse finite-difference surrogate used to
    precondition shift-invert solves.
    """

    storage: object
    grid: PhaseSpaceGrid
    method: str
    symbol_desc: str = ""
    approx: object = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.storage.shape

    @property
    def kind(self) -> str:
        if isinstance(self.storage, np.ndarray):
            return "dense"
        if sp.issparse(self.storage):
            return "sparse"
        return "matrix-free"

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        flat = u.reshape(-1)
        out = self.storage @ flat
        return np.asarray(out).reshape(u.shape)

    __matmul__ = apply

    def toarray(self) -> np.ndarray:
        if self.kind == "dense":
            return self.storage
        if self.kind == "sparse":
            return self.storage.toarray()
        if self.grid.size > DENSE_ASSEMBLY_MAX:
            raise MemoryError("refusing to densify a large matrix-free operator")
        return self.storage @ np.eye(self.grid.size, dtype=complex)

    def adjoint(self) -> "OperatorMatrix":
        if self.kind == "matrix-free":
            return OperatorMatrix(self.storage.H, self.grid, self.method, f"adjoint({self.symbol_desc})",
                                  None if self.approx is None else self.approx.conj().T)
        return OperatorMatrix(self.storage.conj().T, self.grid, self.method, f"adjoint({self.symbol_desc})")

    def hermitian_part(self) -> "OperatorMatrix":
        A = self.toarray() if self.kind != "sparse" else self.storage
        H = 0.5 * (A + A.conj().T)
        return OperatorMatrix(H, self.grid, self.method, f"Re({self.symbol_desc})")

    def shifted(self, c: complex) -> "OperatorMatrix":
        """A + c I."""
        n = self.grid.size
        if self.kind == "dense":
            return OperatorMatrix(self.storage + c * np.eye(n), self.grid, self.method,
                                  f"{self.symbol_desc} + {c}")
        if self.kind == "sparse":
            return OperatorMatrix((self.storage + c * sp.identity(n, format="csr")).tocsr(), self.grid,
                                  self.method, f"{self.symbol_desc} + {c}")
        base = self.storage
        op = spla.LinearOperator(base.shape, matvec=lambda v: base @ v + c * v, dtype=complex)
        approx = None if self.approx is None else (self.approx + c * sp.identity(n, format="csr")).tocsc()
        return OperatorMatrix(op, self.grid, self.method, f"{self.symbol_desc} + {c}", approx)

    def combine(self, other: "OperatorMatrix", coef: complex = 1.0) -> "OperatorMatrix":
        """self + coef * other (dense or sparse storage only)."""
        if other.grid != self.grid:
            raise ValueError("operators live on different grids")
        if "matrix-free" in (self.kind, other.kind):
            raise TypeError("combine() needs assembled operators")
        if self.kind == "sparse" and other.kind == "sparse":
            S = (self.storage + coef * other.storage).tocsr()
        else:
            S = self.toarray() + coef * other.toarray()
        return OperatorMatrix(S, self.grid, self.method if self.method == other.method else "mixed",
                              f"{self.symbol_desc} + ({coef})*({other.symbol_desc})")


# ---------------------------------------------------------------------------
# assembly


def _check_values(vals: np.ndarray):
    if not np.all(np.isfinite(vals)):
        raise ValueError("symbol takes non-finite values on the grid")


def _weyl_1d(a, grid: PhaseSpaceGrid) -> np.ndarray:
    N = grid.N
    mid = -grid.L + 0.5 * grid.dx * np.arange(2 * N - 1)
    X = np.stack(np.broadcast_arrays(mid[:, None], grid.xi_nodes[None, :]))
    vals = np.asarray(a(X), dtype=complex)
    _check_values(vals)
    F = np.fft.ifft(vals, axis=1)
    j = np.arange(N)
    J, K = np.meshgrid(j, j, indexing="ij")
    return F[J + K, (J - K) % N]


def _weyl_2d(a, grid: PhaseSpaceGrid) -> np.ndarray:
    N = grid.N
    if N > DENSE_2D_MAX_N:
        raise MemoryError(f"dense 2D Weyl quantization is limited to N <= {DENSE_2D_MAX_N} per axis")
    mid = -grid.L + 0.5 * grid.dx * np.arange(2 * N - 1)
    xi = grid.xi_nodes
    A = np.zeros((N, N, N, N), dtype=complex)
    j = np.arange(N)
    J2, K2 = np.meshgrid(j, j, indexing="ij")
    S2, D2 = J2 + K2, (J2 - K2) % N
    shape = (2 * N - 1, N, N)
    for s1 in range(2 * N - 1):
        X = np.stack(np.broadcast_arrays(
            np.full(shape, mid[s1]),
            mid[:, None, None],
            xi[None, :, None],
            xi[None, None, :],
        ))
        vals = np.asarray(a(X), dtype=complex)
        _check_values(vals)
        F = np.fft.ifft2(vals, axes=(1, 2))
        for j1 in range(max(0, s1 - N + 1), min(N - 1, s1) + 1):
            k1 = s1 - j1
            A[j1, :, k1, :] = F[S2, (j1 - k1) % N, D2]
    return A.reshape(N * N, N * N)


def weyl_quantize(a, grid: PhaseSpaceGrid) -> OperatorMatrix:
    """Midpoint-rule Weyl quantization of a symbol on ``grid`` (dense)."""
    sym = a if isinstance(a, PolySymbol) else as_callable(a, grid.n)
    if sym.dim != grid.n:
        raise ValueError(f"symbol dimension {sym.dim} does not match grid n={grid.n}")
    A = _weyl_1d(sym, grid) if grid.n == 1 else _weyl_2d(sym, grid)
    desc = sym.to_string() if isinstance(sym, PolySymbol) else sym.description
    return OperatorMatrix(A, grid, "midpoint-fft", desc)


def _kinetic_1d(grid: PhaseSpaceGrid) -> np.ndarray:
    """Dense circulant matrix of Op(xi^2) = -h^2 d^2/dx^2 (spectral)."""
    col = np.fft.ifft(grid.xi_nodes**2)
    j = np.arange(grid.N)
    return col[(j[:, None] - j[None, :]) % grid.N]


def _fd_laplacian_1d(grid: PhaseSpaceGrid, order: int = 2) -> sp.csr_matrix:
    """Periodic finite-difference -h^2 d^2/dx^2."""
    N, dx, h = grid.N, grid.dx, grid.h
    if order == 2:
        stencil = {0: -2.0, 1: 1.0, -1: 1.0}
    elif order == 4:
        stencil = {0: -5 / 2, 1: 4 / 3, -1: 4 / 3, 2: -1 / 12, -2: -1 / 12}
    else:
        raise ValueError("order must be 2 or 4")
    rows, cols, vals = [], [], []
    for off, w in stencil.items():
        j = np.arange(N)
        rows.append(j)
        cols.append((j + off) % N)
        vals.append(np.full(N, -(h**2) * w / dx**2))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))


def _kron_sum(K, n: int):
    if n == 1:
        return K
    I = sp.identity(K.shape[0], format="csr") if sp.issparse(K) else np.eye(K.shape[0])
    kron = sp.kron if sp.issparse(K) else np.kron
    return kron(K, I) + kron(I, K)


def _potential_values(f, grid: PhaseSpaceGrid) -> np.ndarray:
    if f is None:
        return np.zeros(grid.size)
    mesh = grid.mesh()
    if isinstance(f, (PolySymbol, CallableSymbol)):
        X = np.stack(mesh + [np.zeros_like(mesh[0])] * grid.n)
        vals = np.asarray(f(X), dtype=complex)
    else:
        vals = np.asarray(f(*mesh), dtype=complex)
    vals = np.broadcast_to(vals, grid.shape).reshape(-1)
    _check_values(vals)
    return vals


def quantize_schrodinger(
    V,
    W=None,
    grid: PhaseSpaceGrid | None = None,
    method: str = "schrodinger-spectral",
    matrix_free: bool | None = None,
    desc: str | None = None,
) -> OperatorMatrix:
    """-h^2 Lap + V + iW.

    ``V`` and ``W`` are x-only symbols (evaluated with xi = 0) or plain
    functions of the coordinate arrays.  W contributes ``i*W`` as is, so a
    real W gives a complex-symmetric operator.  The spectral method equals
    ``weyl_quantize(|xi|^2 + V + iW)`` up to rounding; large spectral grids are
    applied matrix-free through FFTs.
    """
    if grid is None:
        raise ValueError("grid is required")
    v = _potential_values(V, grid) + 1j * _potential_values(W, grid)
    desc = desc or f"|xi|^2 + V + iW (n={grid.n})"
    size = grid.size

    if method == "schrodinger-fd2":
        K = _kron_sum(_fd_laplacian_1d(grid, 2), grid.n)
        return OperatorMatrix((K + sp.diags(v)).tocsr(), grid, method, desc)
    if method != "schrodinger-spectral":
        raise ValueError(f"unknown method {method!r}")

    if matrix_free is None:
        matrix_free = size > DENSE_ASSEMBLY_MAX
    if not matrix_free:
        K = _kron_sum(_kinetic_1d(grid), grid.n)
        return OperatorMatrix(K + np.diag(v), grid, method, desc)

    shape = grid.shape
    k2 = sum(np.meshgrid(*([grid.xi_nodes**2] * grid.n), indexing="ij"))
    axes = tuple(range(grid.n))

    def matvec(u):
        U = np.asarray(u, dtype=complex).reshape(shape)
        out = np.fft.ifftn(k2 * np.fft.fftn(U, axes=axes), axes=axes)
        return (out + v.reshape(shape) * U).reshape(-1)

    def rmatvec(u):
        U = np.asarray(u, dtype=complex).reshape(shape)
        out = np.fft.ifftn(k2 * np.fft.fftn(U, axes=axes), axes=axes)
        return (out + np.conj(v).reshape(shape) * U).reshape(-1)

    op = spla.LinearOperator((size, size), matvec=matvec, rmatvec=rmatvec, dtype=complex)
    approx = (_kron_sum(_fd_laplacian_1d(grid, 4), grid.n) + sp.diags(v)).tocsc()
    return OperatorMatrix(op, grid, method, desc, approx=approx, meta={"potential": v})


def _resolution(grid: PhaseSpaceGrid) -> float:
    return 2 * max(grid.dx, grid.dxi)


def cutoff_quantize(chi, scale: float, grid: PhaseSpaceGrid) -> OperatorMatrix:
    """Op_h^w(chi(X / scale))."""
    chi = as_callable(chi, grid.n)
    if chi.support_radius is not None and chi.support_radius * scale < _resolution(grid):
        raise UnresolvableScaleError(
            f"support radius {chi.support_radius * scale:.3g} of the rescaled cutoff is below the "
            f"grid resolution {_resolution(grid):.3g}"
        )
    op = weyl_quantize(rescaled(chi, scale), grid)
    op.symbol_desc = f"{chi.description}(X/{scale:.6g})"
    return op


# ---------------------------------------------------------------------------
# band-limited interpolation and the rescaling unitary


def _axis_basis(grid: PhaseSpaceGrid, pts: np.ndarray) -> np.ndarray:
    """Matrix E[p, m] with sum_m E[p, m] c_m the trigonometric interpolant
    at pts[p], c = fft(u) / N (FFT order, Nyquist mode split as a cosine)."""
    m = grid.m_fft
    k = math.pi * m / grid.L
    t = np.asarray(pts, dtype=float)[:, None] - (-grid.L)
    E = np.exp(1j * k[None, :] * t)
    if grid.N % 2 == 0:
        nyq = grid.N // 2
        E[:, nyq] = np.cos(math.pi * nyq / grid.L * t[:, 0])
    return E


def trig_interpolate(u, grid: PhaseSpaceGrid, axes_points: list[np.ndarray]) -> np.ndarray:
    """Band-limited interpolant of grid data on a tensor product of points."""
    U = np.asarray(u, dtype=complex).reshape(grid.shape)
    C = np.fft.fftn(U) / grid.size
    out = C
    for ax, pts in enumerate(axes_points):
        E = _axis_basis(grid, pts)
        out = np.moveaxis(np.tensordot(E, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def trig_eval(u, grid: PhaseSpaceGrid, point) -> complex:
    """Band-limited interpolant at one point (length-n sequence)."""
    vals = trig_interpolate(u, grid, [np.array([c]) for c in point])
    return complex(vals.reshape(-1)[0])


def rescaled_grid(grid: PhaseSpaceGrid, params: ScalingParams, direction: str = "forward") -> PhaseSpaceGrid:
    """Grid whose nodes are the images of ``grid``'s nodes under x -> x/sqrt(eps)."""
    r = math.sqrt(params.eps)
    if direction == "forward":
        return PhaseSpaceGrid(grid.n, grid.L / r, grid.N, params.h_tilde)
    return PhaseSpaceGrid(grid.n, grid.L * r, grid.N, params.h)


def rescale_state(
    u,
    params: ScalingParams,
    grid: PhaseSpaceGrid,
    direction: str = "forward",
    target: PhaseSpaceGrid | None = None,
) -> tuple[np.ndarray, PhaseSpaceGrid]:
    """Apply U u(x~) = eps^(n/4) u(sqrt(eps) x~) (or its inverse).

    Without ``target`` the natural rescaled grid is used and the map is a
    pure rescaling of samples.  Otherwise the band-limited interpolant of
    ``u`` is evaluated at the preimages of the target nodes.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    r = math.sqrt(params.eps)
    n = grid.n
    factor = params.eps ** (n / 4) if direction == "forward" else params.eps ** (-n / 4)
    stretch = r if direction == "forward" else 1.0 / r
    u = np.asarray(u, dtype=complex).reshape(-1)
    natural = rescaled_grid(grid, params, direction)
    if target is None or target == natural:
        return factor * u, natural
    if target.n != n:
        raise ValueError("dimension mismatch")
    pts = stretch * target.x_nodes
    if pts.min() < -grid.L - 1e-12 or pts.max() > grid.L + 1e-12:
        raise ValueError("interpolation out of range: target grid reaches outside the source box")
    vals = trig_interpolate(u, grid, [pts] * n)
    return factor * vals.reshape(-1), target


def _default_test_vectors(grid: PhaseSpaceGrid) -> list[np.ndarray]:
    h = grid.h
    w = math.sqrt(h)
    vecs = []
    for shift, k0 in [(0.0, 0.0), (0.5 * w, 0.0), (-0.3 * w, 0.7 * w), (0.0, -w)]:
        def f(*x, shift=shift, k0=k0):
            r2 = sum((xi - shift) ** 2 for xi in x)
            return np.exp(-r2 / (2 * h)) * np.exp(1j * k0 * x[0] / h)
        u = grid.sample(f)
        vecs.append(u / grid.norm(u))
    return vecs


def conjugation_check(
    a,
    params: ScalingParams,
    grid_h: PhaseSpaceGrid,
    grid_htilde: PhaseSpaceGrid | None = None,
    test_vectors: list[np.ndarray] | None = None,
) -> float:
    """max_u ||Op_h(a)u - U^{-1} Op_htilde(a~) U u|| / ||u||, a~(X) = a(sqrt(eps) X)."""
    if abs(grid_h.h - params.h) > 1e-15 * params.h:
        raise ValueError("grid_h.h must equal params.h")
    natural = rescaled_grid(grid_h, params)
    grid_t = grid_htilde or natural
    r = math.sqrt(params.eps)
    a_tilde = rescaled(a, 1.0 / r) if not isinstance(a, PolySymbol) else a.scaled(r)
    A = weyl_quantize(a, grid_h)
    At = weyl_quantize(a_tilde, grid_t)
    vecs = test_vectors if test_vectors is not None else _default_test_vectors(grid_h)
    worst = 0.0
    for u in vecs:
        lhs = A.apply(u)
        Uu, _ = rescale_state(u, params, grid_h, "forward", grid_t)
        back, _ = rescale_state(At.apply(Uu), params, grid_t, "inverse", grid_h)
        worst = max(worst, grid_h.norm(lhs - back) / grid_h.norm(u))
    return worst


# ---------------------------------------------------------------------------
# binary cache format: magic, u64 header length, JSON header, rows, cols, values


def save_operator(op: OperatorMatrix, path) -> Path:
    if op.kind == "matrix-free":
        raise TypeError("matrix-free operators cannot be serialised")
    coo = sp.coo_matrix(op.storage)
    rows = coo.row.astype("<i8")
    cols = coo.col.astype("<i8")
    vals = coo.data.astype("<c16")
    header = {
        "schema_version": 1,
        "grid": op.grid.to_dict(),
        "method": op.method,
        "symbol_desc": op.symbol_desc,
        "shape": list(op.shape),
        "nnz": int(vals.size),
        "storage": op.kind,
        "dtype": "complex128",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(OPERATOR_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(rows.tobytes())
        fh.write(cols.tobytes())
        fh.write(vals.tobytes())
    return path


def load_operator(path) -> OperatorMatrix:
    data = Path(path).read_bytes()
    if data[:8] != OPERATOR_MAGIC:
        raise ValueError(f"{path} is not an operator cache file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    off = 16 + hlen
    nnz = header["nnz"]
    buf = io.BytesIO(data[off:])
    rows = np.frombuffer(buf.read(8 * nnz), dtype="<i8")
    cols = np.frombuffer(buf.read(8 * nnz), dtype="<i8")
    vals = np.frombuffer(buf.read(16 * nnz), dtype="<c16")
    M = sp.coo_matrix((vals, (rows, cols)), shape=tuple(header["shape"]))
    storage = M.toarray() if header["storage"] == "dense" else M.tocsr()
    return OperatorMatrix(storage, PhaseSpaceGrid.from_dict(header["grid"]), header["method"],
                          header["symbol_desc"])

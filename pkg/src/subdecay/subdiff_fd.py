"""L1 finite-difference solver for weakly coupled subdiffusion systems on an
interval, with semi-implicit and fully implicit time stepping.

The K-component system on (0, L) with homogeneous Dirichlet walls is

    d^{a_k}(u_k - u_k(0)) - d_k u_k'' + sum_l c_kl(x,t) u_l = F_k(x,t),

with Caputo orders 1 >= a_1 >= ... >= a_K > 0.  Time discretization is the
classical L1 rule with weights b^j = (j+1)^{1-a} - j^{1-a} (backward Euler
falls out at a = 1); space is the second-order central difference.

The semi-implicit scheme lags the coupling and source one level, so each
component solves its own constant tridiagonal system.  The fully implicit
scheme keeps the couplings at the new level and solves one banded system in
node-interleaved ordering (bandwidth K each side); Gershgorin disks of that
matrix drive the stability check c_kk >= sum_{l != k} |c_kl|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, SolverError


# ---------------------------------------------------------------------------
# grids, weights, system description


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid: I cells on (0, L), N steps to horizon T."""

    L: float
    I: int
    T: float
    N: int

    def __post_init__(self):
        if not (self.L > 0.0 and self.T > 0.0):
            raise DomainError("L and T must be positive")
        if self.I < 2 or self.N < 2:
            raise DomainError("need I >= 2 space cells and N >= 2 time steps")

    @property
    def dx(self) -> float:
        return self.L / self.I

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.I + 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


def l1_weights(gamma: float, n: int) -> np.ndarray:
    """L1 weights b^j = (j+1)^{1-gamma} - j^{1-gamma} for j = 0..n.

    b^0 = 1, the sequence is positive and strictly decreasing, and it
    telescopes: sum_{j<=n} b^j = (n+1)^{1-gamma}.  gamma = 1 degenerates to
    (1, 0, 0, ...), i.e. backward Euler.
    """
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"order must lie in (0, 1], got {gamma}")
    j = np.arange(n + 1, dtype=float)
    b = (j + 1.0) ** (1.0 - gamma) - j ** (1.0 - gamma)
    b[0] = 1.0  # j=0 term is 1 for every order; numpy's 0**0 would break gamma=1
    return b


CouplingEntry = float | Callable[[np.ndarray, float], np.ndarray]
SourceEntry = Callable[[np.ndarray, float], np.ndarray] | None
InitialEntry = Callable[[np.ndarray], np.ndarray] | np.ndarray


@dataclass(frozen=True)
class SystemSpec:
    """Coefficients of the coupled system: orders, diffusivities, the coupling
    matrix c[k][l] (constants or callables of (x, t)), per-component sources
    (None means zero) and initial profiles (callables of x or sampled arrays).
    K = 2 and 3 are the validated component counts; K = 1 is the degenerate
    single-equation case used by convergence studies."""

    orders: tuple
    diffusivities: tuple
    couplings: Sequence[Sequence[CouplingEntry]]
    initials: Sequence[InitialEntry]
    sources: Sequence[SourceEntry] | None = None

    def __post_init__(self):
        K = len(self.orders)
        object.__setattr__(self, "orders", tuple(float(a) for a in self.orders))
        object.__setattr__(self, "diffusivities",
                           tuple(float(d) for d in self.diffusivities))
        problems = []
        if K < 1:
            problems.append("need at least one component")
        if len(self.diffusivities) != K or len(self.couplings) != K \
                or len(self.initials) != K:
            problems.append("orders/diffusivities/couplings/initials lengths disagree")
        for a in self.orders:
            if not 0.0 < a <= 1.0:
                problems.append(f"order {a} outside (0, 1]")
        if any(x > y + 1e-15 for x, y in zip(self.orders[1:], self.orders[:-1])):
            problems.append("orders must be non-increasing")
        for d in self.diffusivities:
            if not d > 0.0:
                problems.append(f"diffusivity {d} must be positive")
        if not problems:
            for k in range(K):
                if len(self.couplings[k]) != K:
                    problems.append(f"coupling row {k} has wrong length")
                    continue
                ckk = self.couplings[k][k]
                if not callable(ckk) and float(ckk) < 0.0:
                    problems.append(f"diagonal coupling c[{k}][{k}] = {ckk} < 0")
        if self.sources is not None and len(self.sources) != K:
            problems.append("sources length disagrees with component count")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def K(self) -> int:
        return len(self.orders)

    def coupling_at(self, k: int, l: int, x: np.ndarray, t: float) -> np.ndarray:
        c = self.couplings[k][l]
        if callable(c):
            return np.asarray(c(x, t), dtype=float) * np.ones_like(x)
        return np.full_like(x, float(c))

    def source_at(self, k: int, x: np.ndarray, t: float) -> np.ndarray:
        if self.sources is None or self.sources[k] is None:
            return np.zeros_like(x)
        return np.asarray(self.sources[k](x, t), dtype=float) * np.ones_like(x)

    def initial_profile(self, k: int, x: np.ndarray) -> np.ndarray:
        u0 = self.initials[k]
        if callable(u0):
            vals = np.asarray(u0(x), dtype=float)
        else:
            vals = np.asarray(u0, dtype=float)
            if vals.shape != x.shape:
                raise DomainError(
                    f"initial profile {k} has {vals.shape}, grid has {x.shape}")
        return vals

    def couplings_constant(self) -> bool:
        return all(not callable(c) for row in self.couplings for c in row)


@dataclass
class History:
    """Full space-time solution: values[n, k, i] at time level n, component k,
    node i.  Level 0 is the sampled initial data; boundary nodes are 0."""

    grid: Grid
    values: np.ndarray
    scheme: str

    def component(self, k: int) -> np.ndarray:
        return self.values[:, k, :]


# ---------------------------------------------------------------------------
# banded matrices


@dataclass
class BandedMatrix:
    """Band storage in LAPACK layout: ab[u + i - j, j] = A[i, j]."""

    lower: int
    upper: int
    ab: np.ndarray

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    def to_dense(self) -> np.ndarray:
        n = self.n
        dense = np.zeros((n, n))
        for i in range(n):
            for j in range(max(0, i - self.lower), min(n, i + self.upper + 1)):
                dense[i, j] = self.ab[self.upper + i - j, j]
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        y = np.zeros(n)
        for d in range(-self.lower, self.upper + 1):
            # diagonal d holds A[i, i+d] = ab[upper-d, i+d]
            i0 = max(0, -d)
            i1 = n - max(0, d)
            if i1 > i0:
                y[i0:i1] += self.ab[self.upper - d, i0 + d:i1 + d] * x[i0 + d:i1 + d]
        return y


def banded_from_dense(dense: np.ndarray) -> BandedMatrix:
    dense = np.asarray(dense, dtype=float)
    n = dense.shape[0]
    if dense.shape != (n, n):
        raise DomainError("matrix must be square")
    nz = np.nonzero(dense)
    lower = int(np.max(nz[0] - nz[1], initial=0))
    upper = int(np.max(nz[1] - nz[0], initial=0))
    ab = np.zeros((lower + upper + 1, n))
    for i, j in zip(*nz):
        ab[upper + i - j, j] = dense[i, j]
    return BandedMatrix(lower=lower, upper=upper, ab=ab)


def _thomas(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal elimination without pivoting (diagonally dominant use)."""
    n = rhs.size
    c = ab[0, 1:].copy()      # superdiagonal c[j] = A[j, j+1]
    d = ab[1, :].copy()       # diagonal
    a = ab[2, :-1].copy()     # subdiagonal a[j] = A[j+1, j]
    x = rhs.astype(float).copy()
    for i in range(1, n):
        if d[i - 1] == 0.0:
            raise SolverError("zero pivot in tridiagonal elimination")
        w = a[i - 1] / d[i - 1]
        d[i] -= w * c[i - 1]
        x[i] -= w * x[i - 1]
    if d[-1] == 0.0:
        raise SolverError("zero pivot in tridiagonal elimination")
    x[-1] /= d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (x[i] - c[i] * x[i + 1]) / d[i]
    return x


def banded_solve(matrix: BandedMatrix | np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a banded system: Thomas elimination for bandwidth 3, LAPACK
    banded LU (partial pivoting) otherwise.  The relative residual is checked
    against 1e-12; a singular or unusable system raises SolverError."""
    if isinstance(matrix, np.ndarray):
        matrix = banded_from_dense(matrix)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (matrix.n,):
        raise DomainError(f"rhs shape {rhs.shape} does not match n={matrix.n}")
    try:
        if matrix.lower == 1 and matrix.upper == 1:
            x = _thomas(matrix.ab, rhs)
        else:
            x = scipy.linalg.solve_banded((matrix.lower, matrix.upper),
                                          matrix.ab, rhs)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"banded solve failed: {exc}") from exc
    scale = np.abs(matrix.ab).max() * max(np.abs(x).max(), 1.0) + np.abs(rhs).max()
    resid = np.abs(matrix.matvec(x) - rhs).max()
    if not resid <= 1e-12 * max(scale, 1.0):
        raise SolverError(f"banded solve residual {resid:.2e} exceeds tolerance")
    return x


def gershgorin_disks(matrix: BandedMatrix | np.ndarray):
    """One (center, radius) pair per row: center the diagonal entry, radius
    the absolute off-diagonal row sum."""
    dense = matrix.to_dense() if isinstance(matrix, BandedMatrix) else np.asarray(matrix, float)
    n = dense.shape[0]
    if dense.shape != (n, n):
        raise DomainError("matrix must be square")
    centers = np.diag(dense)
    radii = np.sum(np.abs(dense), axis=1) - np.abs(centers)
    return [(float(c), float(r)) for c, r in zip(centers, radii)]


# ---------------------------------------------------------------------------
# scheme ingredients


def _r_coeffs(spec: SystemSpec, grid: Grid) -> np.ndarray:
    """r_k = d_k Gamma(2-a_k) dt^{a_k} / dx^2."""
    return np.array([
        d * math.gamma(2.0 - a) * grid.dt ** a / grid.dx ** 2
        for a, d in zip(spec.orders, spec.diffusivities)])


def stability_condition(spec: SystemSpec, grid: Grid | None = None,
                        time_levels: Sequence[float] | None = None) -> bool:
    """Row-dominance of the couplings: c_kk >= sum_{l != k} |c_kl| pointwise.

    Constant couplings are checked directly; coefficient functions need a
    grid (and optionally explicit time levels) to sample.
    """
    return stability_margin(spec, grid, time_levels) >= 0.0


def stability_margin(spec: SystemSpec, grid: Grid | None = None,
                     time_levels: Sequence[float] | None = None) -> float:
    """min over rows/space/time of c_kk - sum_{l != k} |c_kl|; zero margin
    means the Gershgorin disks touch the unit circle (still stable)."""
    K = spec.K
    if spec.couplings_constant():
        margins = []
        for k in range(K):
            row = [float(spec.couplings[k][l]) for l in range(K)]
            margins.append(row[k] - sum(abs(row[l]) for l in range(K) if l != k))
        return float(min(margins))
    if grid is None:
        raise DomainError("time/space-dependent couplings need a grid to sample")
    x = grid.x[1:-1]
    ts = grid.times if time_levels is None else np.asarray(time_levels, float)
    worst = math.inf
    for t in ts:
        for k in range(K):
            diag = spec.coupling_at(k, k, x, float(t))
            off = np.zeros_like(x)
            for l in range(K):
                if l != k:
                    off += np.abs(spec.coupling_at(k, l, x, float(t)))
            worst = min(worst, float(np.min(diag - off)))
    return worst


def assemble_block_matrix(spec: SystemSpec, grid: Grid, time_index: int) -> BandedMatrix:
    """Fully implicit system matrix at the given time level, in
    node-interleaved ordering (unknown (i, k) at row i*K + k), bandwidth K.

    Diagonal: 1 + 2 r_k + (dx^2 r_k / d_k) c_kk; spatial neighbours: -r_k;
    cross-component couplings at the same node: (dx^2 r_k / d_k) c_kl.
    """
    K = spec.K
    m = grid.I - 1
    x = grid.x[1:-1]
    t = grid.times[time_index]
    r = _r_coeffs(spec, grid)
    fac = grid.dx ** 2 * r / np.asarray(spec.diffusivities)
    n = m * K
    ab = np.zeros((2 * K + 1, n))
    upper = K
    for k in range(K):
        rows = np.arange(m) * K + k
        for l in range(K):
            c = spec.coupling_at(k, l, x, float(t))
            if l == k:
                ab[upper, rows] = 1.0 + 2.0 * r[k] + fac[k] * c
            else:
                cols = rows + (l - k)
                ab[upper + (k - l), cols] = fac[k] * c
        # spatial neighbours: columns shifted by +-K
        ab[0, rows[1:]] = -r[k]          # A[i, i+K] stored at ab[u - K, j]
        ab[2 * K, rows[:-1]] = -r[k]     # A[i, i-K]
    return BandedMatrix(lower=K, upper=K, ab=ab)


def _history_sum(weights_diff: list[np.ndarray], values: np.ndarray, n: int) -> np.ndarray:
    """sum_{j=1}^{n} (b^{n-j} - b^{n-j+1}) u^j per component, over interior nodes."""
    K = values.shape[1]
    out = np.zeros((K, values.shape[2]))
    if n == 0:
        return out
    for k in range(K):
        w = weights_diff[k][n - 1::-1][:n]
        out[k] = w @ values[1:n + 1, k, :]
    return out


@dataclass
class _StepContext:
    """Precomputed per-run data shared by every step."""

    spec: SystemSpec
    grid: Grid
    weights: list = field(default_factory=list)        # b_k^j, j = 0..N
    weights_diff: list = field(default_factory=list)   # b_k^j - b_k^{j+1}
    r: np.ndarray = None
    fac: np.ndarray = None
    tri_ab: list = field(default_factory=list)
    implicit_matrix: BandedMatrix | None = None

    def __post_init__(self):
        spec, grid = self.spec, self.grid
        for a in spec.orders:
            b = l1_weights(a, grid.N)
            self.weights.append(b)
            self.weights_diff.append(b[:-1] - b[1:])
        self.r = _r_coeffs(spec, grid)
        self.fac = grid.dx ** 2 * self.r / np.asarray(spec.diffusivities)
        m = grid.I - 1
        for k in range(spec.K):
            ab = np.zeros((3, m))
            ab[0, 1:] = -self.r[k]
            ab[1, :] = 1.0 + 2.0 * self.r[k]
            ab[2, :-1] = -self.r[k]
            self.tri_ab.append(ab)
        if spec.couplings_constant():
            self.implicit_matrix = assemble_block_matrix(spec, grid, 0)

    def implicit_at(self, time_index: int) -> BandedMatrix:
        if self.implicit_matrix is not None:
            return self.implicit_matrix
        return assemble_block_matrix(self.spec, self.grid, time_index)


def _interior_rhs_common(ctx: _StepContext, values: np.ndarray, n: int) -> np.ndarray:
    """b^n u^0 + history sum, per component on interior nodes."""
    spec = ctx.spec
    interior = values[..., 1:-1]
    hist = _history_sum(ctx.weights_diff, interior, n)
    out = np.empty_like(hist)
    for k in range(spec.K):
        out[k] = ctx.weights[k][n] * interior[0, k, :] + hist[k]
    return out


def step_semi_implicit(spec: SystemSpec, grid: Grid, history: History | np.ndarray,
                       n: int, _ctx: _StepContext | None = None) -> np.ndarray:
    """Advance to level n+1 with couplings and sources lagged at level n.

    Returns the new level as a (K, I+1) array with zero boundary values;
    each component solves its own tridiagonal system.
    """
    values = history.values if isinstance(history, History) else history
    ctx = _ctx if _ctx is not None else _StepContext(spec, grid)
    x = grid.x[1:-1]
    t_n = grid.times[n]
    rhs = _interior_rhs_common(ctx, values, n)
    cur = values[n, :, 1:-1]
    K = spec.K
    new_level = np.zeros((K, grid.I + 1))
    for k in range(K):
        coup = np.zeros_like(x)
        for l in range(K):
            coup += spec.coupling_at(k, l, x, float(t_n)) * cur[l]
        load = rhs[k] + ctx.fac[k] * (-coup + spec.source_at(k, x, float(t_n)))
        new_level[k, 1:-1] = banded_solve(
            BandedMatrix(lower=1, upper=1, ab=ctx.tri_ab[k]), load)
    return new_level


def step_fully_implicit(spec: SystemSpec, grid: Grid, history: History | np.ndarray,
                        n: int, _ctx: _StepContext | None = None) -> np.ndarray:
    """Advance to level n+1 with couplings and sources taken at level n+1,
    solving the node-interleaved banded block system."""
    values = history.values if isinstance(history, History) else history
    ctx = _ctx if _ctx is not None else _StepContext(spec, grid)
    x = grid.x[1:-1]
    t_next = grid.times[n + 1]
    rhs = _interior_rhs_common(ctx, values, n)
    K = spec.K
    for k in range(K):
        rhs[k] += ctx.fac[k] * spec.source_at(k, x, float(t_next))
    stacked = rhs.T.reshape(-1)   # node-interleaved: (i, k) -> i*K + k
    matrix = ctx.implicit_at(n + 1)
    sol = banded_solve(matrix, stacked)
    new_level = np.zeros((K, grid.I + 1))
    new_level[:, 1:-1] = sol.reshape(grid.I - 1, K).T
    return new_level


def simulate(spec: SystemSpec, grid: Grid, scheme: str = "semi-implicit",
             check_diagonal: bool = True) -> History:
    """Run the chosen scheme over the whole grid and return the History.

    Initial profiles are sampled at the nodes with boundary values forced to
    zero (homogeneous Dirichlet).  For coefficient functions, the diagonal
    couplings are checked for nonnegativity as they are sampled.
    """
    if scheme not in ("semi-implicit", "fully-implicit"):
        raise DomainError(f"unknown scheme {scheme!r}")
    K = spec.K
    values = np.zeros((grid.N + 1, K, grid.I + 1))
    x = grid.x
    for k in range(K):
        prof = spec.initial_profile(k, x)
        values[0, k, :] = prof
    values[0, :, 0] = 0.0
    values[0, :, -1] = 0.0
    ctx = _StepContext(spec, grid)
    stepper = step_semi_implicit if scheme == "semi-implicit" else step_fully_implicit
    if check_diagonal and not spec.couplings_constant():
        xs = x[1:-1]
        for k in range(K):
            if np.any(spec.coupling_at(k, k, xs, 0.0) < 0.0):
                raise DomainError(f"diagonal coupling c[{k}][{k}] negative at t=0")
    for n in range(grid.N):
        values[n + 1] = stepper(spec, grid, values, n, _ctx=ctx)
    return History(grid=grid, values=values, scheme=scheme)


def norm_history(history: History, stride: int = 1):
    """Times and discrete L2 norms (trapezoid) of every component, strided."""
    grid = history.grid
    dx = grid.dx
    sel = np.arange(0, grid.N + 1, stride)
    vals = history.values[sel]
    sq = vals ** 2
    integral = dx * (np.sum(sq[..., 1:-1], axis=-1)
                     + 0.5 * sq[..., 0] + 0.5 * sq[..., -1])
    return grid.times[sel], np.sqrt(integral)

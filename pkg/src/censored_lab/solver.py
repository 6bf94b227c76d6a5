"""Collocation discretisation of the Dirichlet problem L u = f in Omega, u = g outside the free nodes.

Two assemblies are provided.

1D (Interval, or the half-line strip used for half-space profiles): u is
replaced by its piecewise-linear interpolant and the kernel |y|^{-1-2s} is
integrated against it cell by cell with closed-form moments.  Inside the
self-cell |y| < rho = min(h_left, h_right) the three-point quadratic is used,
whose contribution is -kappa rho^{2-2s} / (2-2s).

2D (Ball): tensor polar grid, bilinear interpolation in (r, theta); the ball
|y| < rho around a node uses the five-point polar Laplacian, the annulus
rho < |y| < d uses Gauss panels in r times a uniform angular rule.  Rows of a
ring are rotations of each other, so one row per ring is assembled.

In both cases every row samples u only on the closed ball B_{d(x_i)}(x_i),
rows annihilate constants and off-diagonal entries are <= 0.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .domain import Ball, Domain, HalfLineSection, Interval
from .fields import ScalarField
from .quadrature import DEFAULT_QUAD, QuadratureSpec, gauss_legendre, graded_edges
from .special_fn import KernelParams, normalization_constant

DIRECT_LIMIT = 10_000
DEFAULT_GRADING = 0.85


class SolverError(ArithmeticError):
    """Linear solve failed (singular matrix or stalled iteration)."""

    def __init__(self, message, condition_estimate=np.inf):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


# -- grids --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Collocation points of a domain.

    ``points`` holds every node (free nodes and data nodes); ``free`` marks the
    unknowns.  1D grids are sorted by coordinate.  Polar grids store the centre
    first and then ring after ring, each ring counter-clockwise from theta = 0.
    """

    domain: Domain
    points: np.ndarray
    free: np.ndarray
    h: float
    kind: str = "line"
    radii: Optional[np.ndarray] = None
    n_theta: int = 0
    level: int = 0

    def __post_init__(self):
        if self.points.shape[0] != self.free.size:
            raise ValueError("free mask does not match the node count")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if not np.any(self.free):
            raise ValueError("grid has no free nodes")

    @property
    def nodes(self) -> np.ndarray:
        return self.points[self.free]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.points[~self.free]

    @property
    def size(self) -> int:
        return int(self.free.size)

    @property
    def distance(self) -> np.ndarray:
        """Distance to the boundary of every free node."""
        return np.asarray(self.domain.distance(self.nodes), dtype=float)

    def coords(self) -> np.ndarray:
        """Points as an (N, dim) array."""
        return self.points if self.points.ndim == 2 else self.points[:, None]


def _graded_spacing(length: float, cells: int, ratio: float) -> np.ndarray:
    """Cell widths shrinking geometrically (by ``ratio`` per cell) and summing to ``length``."""
    w = ratio ** np.arange(cells)
    return length * w / w.sum()


def _level_ratio(grading: float, level: int) -> float:
    # refining splits every cell in two, so the per-cell ratio is square-rooted
    if not 0.0 < grading <= 1.0:
        raise ValueError("grading factor must lie in (0, 1]")
    return grading ** (0.5**level)


def interval_grid(domain: Interval, level: int, base_cells: int = 8, grading: float = DEFAULT_GRADING) -> Grid:
    """Symmetric grid on [a, b], graded toward both ends; endpoints are data nodes."""
    cells = base_cells * 2**level
    half = 0.5 * (domain.b - domain.a)
    w = _graded_spacing(half, cells, _level_ratio(grading, level))
    right = 0.5 * (domain.a + domain.b) + np.concatenate([[0.0], np.cumsum(w)])
    right[-1] = domain.b
    left = (domain.a + domain.b) - right[:0:-1]
    left[0] = domain.a
    x = np.concatenate([left, right])
    free = np.ones(x.size, dtype=bool)
    free[[0, -1]] = False
    return Grid(domain, x, free, float(np.max(np.diff(x))), "line", level=level)


def halfline_strip_grid(level: int, base_cells: int = 16, grading: float = DEFAULT_GRADING,
                        domain: Optional[HalfLineSection] = None) -> Grid:
    """Grid on [0, 2] for profiles on the half line.

    Nodes in (0, 1) are free; 0 and the interaction zone [1, 2] carry data.
    Cells shrink toward 0 and are uniform on [1, 2].
    """
    domain = domain or HalfLineSection(1)
    cells = base_cells * 2**level
    w = _graded_spacing(1.0, cells, _level_ratio(grading, level))[::-1]
    x = np.concatenate([[0.0], np.cumsum(w)])
    x[-1] = 1.0
    tail = np.linspace(1.0, 2.0, int(np.ceil(1.0 / w[-1])) + 1)[1:]
    x = np.concatenate([x, tail])
    free = (x > 0.0) & (x < 1.0)
    return Grid(domain, x, free, float(np.max(np.diff(x))), "line", level=level)


def polar_grid(domain: Ball, level: int, base_rings: int = 8, base_angles: int = 16,
               grading: float = DEFAULT_GRADING) -> Grid:
    """Centre node plus rings graded toward r = R; the outer ring is data."""
    if domain.dim != 2:
        raise ValueError("polar grids are two-dimensional")
    rings = base_rings * 2**level
    n_theta = base_angles * 2 ** (level // 2)
    w = _graded_spacing(domain.radius, rings, _level_ratio(grading, level))
    radii = np.concatenate([[0.0], np.cumsum(w)])
    radii[-1] = domain.radius
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    pts = [np.zeros((1, 2))] + [r * ring for r in radii[1:]]
    pts = np.vstack(pts) + domain.c
    free = np.ones(pts.shape[0], dtype=bool)
    free[-n_theta:] = False
    h = float(max(np.max(w), domain.radius * 2.0 * np.pi / n_theta))
    return Grid(domain, pts, free, h, "polar", radii, n_theta, level)


def make_grid(domain: Domain, level: int, grading: float = DEFAULT_GRADING, **kw) -> Grid:
    if isinstance(domain, Interval):
        return interval_grid(domain, level, grading=grading, **kw)
    if isinstance(domain, HalfLineSection):
        return halfline_strip_grid(level, grading=grading, domain=domain, **kw)
    if isinstance(domain, Ball) and domain.dim == 2:
        return polar_grid(domain, level, grading=grading, **kw)
    if isinstance(domain, Ball) and domain.dim == 1:
        c, R = domain.center[0], domain.radius
        g = interval_grid(Interval(c - R, c + R), level, grading=grading, **kw)
        return Grid(domain, g.points, g.free, g.h, "line", level=level)
    raise ValueError(f"no grid generator for {domain!r}")


# -- interpolation --------------------------------------------------------------


def _polar_stencil(grid: Grid, pts: np.ndarray):
    """Bilinear (r, theta) interpolation: node indices and weights, 4 per point.

    Weights are nonnegative.  Fields depending on r only are interpolated with
    the 1D piecewise-linear error; affine fields pick up an O(r dtheta^2)
    angular error.
    """
    R = grid.radii
    nt = grid.n_theta
    v = pts - np.asarray(grid.domain.center)
    r = np.minimum(np.hypot(v[:, 0], v[:, 1]), R[-1])
    th = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2.0 * np.pi) * nt / (2.0 * np.pi)
    k0 = np.floor(th).astype(int) % nt
    k1 = (k0 + 1) % nt
    ft = th - np.floor(th)
    j = np.clip(np.searchsorted(R, r, side="right") - 1, 0, R.size - 2)
    fr = (r - R[j]) / (R[j + 1] - R[j])

    def node(jj, kk):
        return np.where(jj == 0, 0, 1 + (jj - 1) * nt + kk)

    idx = np.stack([node(j, k0), node(j, k1), node(j + 1, k0), node(j + 1, k1)], axis=1)
    w = np.stack([(1 - fr) * (1 - ft), (1 - fr) * ft, fr * (1 - ft), fr * ft], axis=1)
    return idx, w


@dataclass(eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {self.values.shape}")

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.free]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[~self.grid.free]

    def __call__(self, x):
        """Interpolate (piecewise linear in 1D, bilinear in (r, theta) in 2D)."""
        g = self.grid
        if g.kind == "line":
            x = np.asarray(x, dtype=float)
            xs = x[..., 0] if (x.ndim >= 1 and x.shape[-1] == 1 and x.ndim > 1) else x
            return np.interp(xs, g.points, self.values)
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        idx, w = _polar_stencil(g, pts)
        out = np.sum(w * self.values[idx], axis=1)
        return out if np.ndim(x) > 1 else out[0]

    def as_field(self, name: str = "grid function") -> ScalarField:
        dim = self.grid.coords().shape[1]
        return ScalarField(lambda x: self(x), dim, support_note="piecewise linear", name=name)


def sample(grid: Grid, u) -> np.ndarray:
    """Values of a field (ScalarField, callable or constant) at all grid points."""
    if np.isscalar(u):
        return np.full(grid.size, float(u))
    if isinstance(u, ScalarField):
        return np.asarray(u.eval(grid.coords()), dtype=float)
    return np.asarray(u(grid.points), dtype=float)


# -- assembly -----------------------------------------------------------------


@dataclass(eq=False)
class DiscreteOperator:
    """Rows of the discrete L at the free nodes, columns over all nodes.

    ``A_ff`` couples free nodes, ``A_fb`` carries the data nodes (the boundary
    coupling block), so L u(x_i) ~ (A_ff u_free + A_fb u_data)_i.

    Polar operators are block circulant in theta and are stored as one
    template row per ring (``ring_rows``, the row at theta = 0); the dense
    matrix is built only on request.
    """

    grid: Grid
    params: KernelParams
    quad: QuadratureSpec = DEFAULT_QUAD
    interpolation: str = "piecewise linear"
    row_scale: np.ndarray = field(default=None, repr=False)
    dense: Optional[np.ndarray] = field(default=None, repr=False)
    ring_rows: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        if self.dense is None:
            self.dense = _expand_rings(self.grid, self.ring_rows)
        return self.dense

    @property
    def A_ff(self) -> np.ndarray:
        return self.matrix[:, self.grid.free]

    @property
    def A_fb(self) -> np.ndarray:
        return self.matrix[:, ~self.grid.free]

    @property
    def structured(self) -> bool:
        return self.ring_rows is not None

    def apply(self, u) -> np.ndarray:
        """Discrete L applied to grid values (or a field sampled on the grid)."""
        if isinstance(u, GridFunction):
            vals = u.values
        elif isinstance(u, np.ndarray):
            vals = np.asarray(u, dtype=float)
        else:
            vals = sample(self.grid, u)
        if self.structured and self.dense is None:
            return _apply_rings(self.grid, self.ring_rows, vals)
        return self.matrix @ vals

    def coo_lines(self, tol: float = 0.0):
        """Nonzero entries as 'row,col,value' strings (free-row index, global node column)."""
        M = self.matrix
        rows, cols = np.nonzero(np.abs(M) > tol)
        for i, j in zip(rows, cols):
            yield f"{i},{j},{M[i, j]:.17g}"


def _moments(a, b, s):
    """int_a^b r^{-1-2s} dr and int_a^b r^{-2s} dr for 0 < a <= b."""
    m0 = (a ** (-2.0 * s) - b ** (-2.0 * s)) / (2.0 * s)
    if abs(s - 0.5) < 1e-14:
        m1 = np.log(b / a)
    else:
        m1 = (b ** (1.0 - 2.0 * s) - a ** (1.0 - 2.0 * s)) / (1.0 - 2.0 * s)
    return m0, m1


def _row_1d(x: np.ndarray, i: int, d: float, s: float) -> np.ndarray:
    """Coefficients of int_{-d}^{d} (u_i - Iu(x_i + y)) |y|^{-1-2s} dy over all nodes."""
    row = np.zeros(x.size)
    xi = x[i]
    hl, hr = xi - x[i - 1], x[i + 1] - xi
    rho = min(hl, hr, d)
    # self cell: the three-point quadratic, linear part cancels
    c = 2.0 * rho ** (2.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (hl + hr))
    row[i - 1] -= c / hl
    row[i + 1] -= c / hr
    row[i] += c / hl + c / hr
    lo, hi = max(xi - d, x[0]), min(xi + d, x[-1])
    j0 = max(np.searchsorted(x, lo, side="right") - 1, 0)
    j1 = min(np.searchsorted(x, hi, side="left"), x.size - 1)
    j = np.arange(j0, j1)
    a = np.maximum(x[j], lo) - xi
    b = np.minimum(x[j + 1], hi) - xi
    h = x[j + 1] - x[j]
    for ya, yb, sign in ((np.maximum(a, rho), b, 1.0), (a, np.minimum(b, -rho), -1.0)):
        keep = yb > ya
        if not np.any(keep):
            continue
        jj, ya, yb, hh = j[keep], ya[keep], yb[keep], h[keep]
        # moments in |y|; on the left piece |y| runs from -yb to -ya and y = -|y|
        lo_r, hi_r = (ya, yb) if sign > 0 else (-yb, -ya)
        m0, m1 = _moments(lo_r, hi_r, s)
        m1 = sign * m1
        # Iu(xi + y) = u_j (x_{j+1} - xi - y)/h + u_{j+1} (xi + y - x_j)/h
        np.add.at(row, jj, -((x[jj + 1] - xi) * m0 - m1) / hh)
        np.add.at(row, jj + 1, -((xi - x[jj]) * m0 + m1) / hh)
        row[i] += m0.sum()
    return row


def _rows(build: Callable[[int], np.ndarray], count: int, workers: int) -> np.ndarray:
    if workers <= 1:
        return np.array([build(k) for k in range(count)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(build, range(count))))


def _assemble_1d(grid: Grid, params: KernelParams, workers: int) -> np.ndarray:
    if params.n != 1:
        raise ValueError("the one-dimensional assembly uses the n = 1 kernel; got n = %d" % params.n)
    x = grid.points
    if np.any(np.diff(x) <= 0):
        raise ValueError("degenerate grid: nodes must be strictly increasing")
    s = params.s
    C = normalization_constant(params)
    free_idx = np.flatnonzero(grid.free)
    d = grid.distance

    def build(k):
        return C * d[k] ** (2.0 * s - 2.0) * _row_1d(x, free_idx[k], d[k], s)

    return _rows(build, free_idx.size, workers)


def _polar_laplacian(grid: Grid, j: int):
    """Five-point polar Laplacian at ring j, theta = 0: (indices, weights)."""
    R, nt = grid.radii, grid.n_theta
    if j == 0:
        h = R[1]
        return np.arange(0, nt + 1), np.concatenate([[-4.0 / h**2], np.full(nt, 4.0 / (nt * h * h))])
    r, hm, hp = R[j], R[j] - R[j - 1], R[j + 1] - R[j]
    dth = 2.0 * np.pi / nt
    up = 2.0 / (hp * (hp + hm)) + 1.0 / (r * (hp + hm))
    dn = 2.0 / (hm * (hp + hm)) - 1.0 / (r * (hp + hm))
    ang = 1.0 / (r * dth) ** 2

    def at(jj, kk):
        return 0 if jj == 0 else 1 + (jj - 1) * nt + kk % nt

    idx = [at(j, 0), at(j + 1, 0), at(j - 1, 0), at(j, 1), at(j, -1)]
    w = [-(up + dn + 2.0 * ang), up, dn, ang, ang]
    return np.array(idx), np.array(w)


SELF_BALL_FACTOR = 1.0


def _row_polar(grid: Grid, j: int, params: KernelParams, quad_level: int) -> np.ndarray:
    """Row of the discrete operator at the ring-j node with theta = 0."""
    s = params.s
    C = normalization_constant(params)
    R = grid.radii
    nt = grid.n_theta
    node = 0 if j == 0 else 1 + (j - 1) * nt
    x = grid.points[node]
    d = float(R[-1] - R[j])
    row = np.zeros(grid.size)
    # the self ball must cover the interpolant's kinks at the node, whose
    # reach is the largest local spacing (the arc spacing near the rim)
    if j == 0:
        rho = R[1]
    else:
        rho = max(R[j] - R[j - 1], R[j + 1] - R[j], R[j] * 2.0 * np.pi / nt)
    rho = min(SELF_BALL_FACTOR * rho, d)
    # self ball: -(rho/d)^{2-2s} * Laplacian
    li, lw = _polar_laplacian(grid, j)
    np.add.at(row, li, -(rho / d) ** (2.0 - 2.0 * s) * lw)
    if rho < d:
        # the interpolant has kinks along every ring and ray, so the annulus
        # rule uses short panels (about a quarter of the local spacing)
        spacing = min(np.min(np.diff(R)[max(j - 1, 0):]), 2.0 * np.pi * R[1] / nt) if j == 0 else \
            min(np.min(np.diff(R)[j - 1:]), R[j] * 2.0 * np.pi / nt)
        spacing = max(spacing, (d - rho) / 4096)
        edges = np.unique(np.concatenate([
            graded_edges(rho, d, 4 * quad_level, "both"),
            np.linspace(rho, d, 2 + int(np.ceil(quad_level * (d - rho) / spacing))),
        ]))
        xg, wg = gauss_legendre(order_for(quad_level))
        a, b = edges[:-1, None], edges[1:, None]
        r = ((a + b) / 2 + (b - a) / 2 * xg).ravel()
        wr = ((b - a) / 2 * wg).ravel() * r ** (-1.0 - 2.0 * s)
        # a multiple of nt keeps the centre row invariant under the grid rotations
        nphi = 4 * nt * quad_level
        phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
        pref = C * d ** (2.0 * s - 2.0)
        dirs = np.stack([np.cos(phi), np.sin(phi)], -1)
        for chunk in np.array_split(np.arange(r.size), max(1, r.size * nphi // 400_000)):
            y = (r[chunk, None, None] * dirs[None]).reshape(-1, 2)
            wq = np.repeat(wr[chunk] * (2.0 * np.pi / nphi), nphi)
            idx, w = _polar_stencil(grid, x + y)
            np.add.at(row, idx.ravel(), -pref * (w * wq[:, None]).ravel())
            row[node] += pref * wq.sum()
    return row


def order_for(level: int) -> int:
    return 2 + 2 * level


def _ring_view(grid: Grid, vals: np.ndarray):
    return vals[0], vals[1:].reshape(-1, grid.n_theta)


def _expand_rings(grid: Grid, ring_rows: np.ndarray) -> np.ndarray:
    """Dense matrix of a polar operator: the ring-j row at theta_k is the template rolled by k."""
    nt = grid.n_theta
    rows = [ring_rows[0]]
    for j in range(1, ring_rows.shape[0]):
        c0, rings = _ring_view(grid, ring_rows[j])
        for k in range(nt):
            out = np.empty(grid.size)
            out[0] = c0
            out[1:] = np.roll(rings, k, axis=1).ravel()
            rows.append(out)
    return np.array(rows)


def _apply_rings(grid: Grid, ring_rows: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Block-circulant product by FFT in theta."""
    nt = grid.n_theta
    u0, U = _ring_view(grid, vals)
    Uh = np.fft.fft(U, axis=1)
    out = [float(ring_rows[0] @ vals)]
    for j in range(1, ring_rows.shape[0]):
        c0, B = _ring_view(grid, ring_rows[j])
        # row k: sum_{j',k'} B[j', k'-k] U[j', k']  (a cross-correlation)
        corr = np.fft.ifft(np.sum(np.conj(np.fft.fft(B, axis=1)) * Uh, axis=0)).real
        out.append(c0 * u0 + corr)
    return np.concatenate([[out[0]], np.concatenate(out[1:])]) if len(out) > 1 else np.array(out)


def _assemble_polar(grid: Grid, params: KernelParams, workers: int, quad_level: int) -> np.ndarray:
    if params.n != 2:
        raise ValueError("polar assembly needs n = 2")
    n_free_rings = grid.radii.size - 1  # rings 0 .. Nr-1 (ring 0 is the centre)
    return _rows(lambda j: _row_polar(grid, j, params, quad_level), n_free_rings, workers)


def assemble(domain: Domain, grid: Grid, params: KernelParams, quad: QuadratureSpec = DEFAULT_QUAD,
             workers: int = 1, quad_level: int = 2) -> DiscreteOperator:
    """Discrete L on ``grid``; ``quad_level`` sets the annulus rule of the polar assembly."""
    if grid.domain != domain:
        raise ValueError("grid was built for a different domain")
    scale = grid.distance ** (2.0 - 2.0 * params.s)
    if grid.kind == "line":
        matrix = _assemble_1d(grid, params, workers)
        op = DiscreteOperator(grid, params, quad, "piecewise linear", scale, dense=matrix)
    elif grid.kind == "polar":
        rows = _assemble_polar(grid, params, workers, quad_level)
        op = DiscreteOperator(grid, params, quad, "bilinear in (r, theta)", scale, ring_rows=rows)
    else:
        raise ValueError(f"unknown grid kind {grid.kind!r}")
    check = op.dense if op.dense is not None else op.ring_rows
    if not np.all(np.isfinite(check)):
        raise ValueError("assembly produced non-finite entries (degenerate grid?)")
    return op


# -- solving ------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    diagonal_positive: bool
    positive_offdiagonal: int
    max_positive_offdiagonal: float
    min_dominance_margin: float
    min_solution: float

    @property
    def passed(self) -> bool:
        return self.diagonal_positive and self.positive_offdiagonal == 0 and self.min_solution >= -1e-8


@dataclass
class SolveReport:
    residual_max: float
    method: str
    condition_estimate: float
    iterations: int = 0
    wall_time: float = 0.0


def _data(grid: Grid, values, mask) -> np.ndarray:
    if isinstance(values, GridFunction):
        return values.values[mask]
    if isinstance(values, np.ndarray) and values.shape == (int(mask.sum()),):
        return values.astype(float)
    return sample(grid, values)[mask]


def _jacobi(A, b, tol, max_iter, omega=0.8):
    D = np.diag(A).copy()
    x = np.zeros_like(b)
    scale = max(1.0, float(np.max(np.abs(b))))
    for it in range(1, max_iter + 1):
        r = b - A @ x
        if np.max(np.abs(r)) <= tol * scale:
            return x, it
        x = x + omega * r / D
    raise SolverError(f"damped Jacobi stalled after {max_iter} iterations", np.inf)


def _lu(M: np.ndarray):
    """LU factors plus the reciprocal 1-norm condition estimate (LAPACK getrf/gecon)."""
    getrf, gecon = sla.lapack.get_lapack_funcs(("getrf", "gecon"), (M,))
    lu, piv, info = getrf(M)
    rcond, _ = gecon(lu, np.linalg.norm(M, 1), norm="1")
    cond = np.inf if (info > 0 or rcond == 0) else 1.0 / rcond
    if cond * np.finfo(float).eps > 1.0:
        raise SolverError("discrete operator is singular to working precision", cond)
    return (lu, piv), cond


def _solve_rings(A: DiscreteOperator, fv: np.ndarray, gv: np.ndarray):
    """Block-circulant solve: one small system per Fourier mode in theta."""
    grid = A.grid
    nt = grid.n_theta
    rows = A.ring_rows
    nf = rows.shape[0] - 1  # free rings besides the centre
    c0 = np.array([_ring_view(grid, rows[j])[0] for j in range(1, nf + 1)])
    Bh = np.stack([np.conj(np.fft.fft(_ring_view(grid, rows[j])[1], axis=1)) for j in range(1, nf + 1)])
    # Bh[j, j', m]: mode-m coupling of ring j+1 to ring j'+1 (the last j' is the data ring)
    centre0, centre_rings = _ring_view(grid, rows[0])
    if not np.allclose(centre_rings, centre_rings[:, :1], rtol=1e-12, atol=1e-14 * np.max(np.abs(centre_rings))):
        raise ValueError("centre row is not rotation invariant; use the dense solve")
    scale = A.row_scale
    F = fv[1:].reshape(nf, nt)
    Fh = np.fft.fft(F, axis=1) - Bh[:, -1, :] * np.fft.fft(gv)[None, :]
    Uh = np.empty((nf, nt), dtype=complex)
    conds = []
    D = scale[1:].reshape(nf, nt)[:, 0]
    for m in range(nt):
        M = Bh[:, :nf, m] * D[:, None]
        if m == 0:
            # couple the centre: unknowns (u0, U_hat_j(0)); U_hat(0) = nt * mean
            top = np.concatenate([[centre0], centre_rings[:nf, 0]]) * scale[0]
            M0 = np.zeros((nf + 1, nf + 1))
            M0[0] = top
            M0[1:, 0] = c0 * nt * D
            M0[1:, 1:] = M.real
            rhs0 = np.concatenate([[(fv[0] - centre_rings[nf, 0] * gv.sum()) * scale[0]], (Fh[:, 0] * D).real])
            fac, cond = _lu(M0)
            sol = sla.lu_solve(fac, rhs0)
            u0 = sol[0]
            Uh[:, 0] = sol[1:]
        else:
            fac, cond = _lu(M)
            Uh[:, m] = sla.lu_solve(fac, Fh[:, m] * D)
        conds.append(cond)
    U = np.fft.ifft(Uh, axis=1).real
    u = np.concatenate([[u0], U.ravel(), gv])
    return u, float(max(conds))


def solve_dirichlet(A: DiscreteOperator, f, g=0.0, tol: float = 1e-10, direct_limit: int = DIRECT_LIMIT,
                    max_iter: int = 200_000):
    """Solve L u = f at the free nodes with u = g at the data nodes.

    Rows are scaled by d^{2-2s} before the solve (this removes the variable
    prefactor); residuals are reported for the unscaled system.  Polar
    operators are solved mode by mode in theta; the condition estimate is the
    worst one over the modes.
    """
    t0 = time.perf_counter()
    grid = A.grid
    fv = _data(grid, f, grid.free)
    gv = _data(grid, g, ~grid.free)
    its = 0
    if A.structured and A.dense is None:
        u, cond = _solve_rings(A, fv, gv)
        method = "FFT in theta + LU per mode"
    else:
        D = A.row_scale
        Aff = A.A_ff * D[:, None]
        rhs = D * (fv - A.A_fb @ gv)
        if rhs.size <= direct_limit:
            fac, cond = _lu(Aff)
            uf = sla.lu_solve(fac, rhs)
            method = "LU"
        else:
            uf, its = _jacobi(Aff, rhs, tol, max_iter)
            method, cond = "damped Jacobi", float("nan")
        u = np.empty(grid.size)
        u[grid.free] = uf
        u[~grid.free] = gv
    res = float(np.max(np.abs(A.apply(u) - fv)))
    return GridFunction(grid, u), SolveReport(res, method, float(cond), its, time.perf_counter() - t0)


def _template_rows(A: DiscreteOperator):
    """(rows, diagonal positions) covering every distinct row of the operator."""
    if A.structured and A.dense is None:
        nt = A.grid.n_theta
        diag = np.array([0] + [1 + (j - 1) * nt for j in range(1, A.ring_rows.shape[0])])
        return A.ring_rows, diag
    return A.matrix, np.flatnonzero(A.grid.free)


def monotonicity_diagnostics(A: DiscreteOperator, f=1.0) -> MonotonicityReport:
    """Sign pattern, row dominance and the discrete maximum principle (solve with f >= 0, g = 0)."""
    rows, diag_pos = _template_rows(A)
    free = A.grid.free
    diag = rows[np.arange(rows.shape[0]), diag_pos]
    off = rows[:, free].copy()
    free_pos = np.cumsum(free) - 1
    off[np.arange(rows.shape[0]), free_pos[diag_pos]] = 0.0
    pos = off > 1e-12 * np.max(np.abs(diag))
    margin = diag - np.sum(np.abs(off), axis=1)
    u, _ = solve_dirichlet(A, f, 0.0)
    return MonotonicityReport(
        bool(np.all(diag > 0)),
        int(pos.sum()),
        float(np.max(off[pos], initial=0.0)),
        float(np.min(margin / diag)),
        float(np.min(u.interior)),
    )


@dataclass
class ConvergenceRow:
    level: int
    h: float
    unknowns: int
    max_error: float
    order: float


def convergence_study(domain: Domain, f, g, params: KernelParams, levels: Sequence[int],
                      exact: Optional[ScalarField] = None, grading: float = DEFAULT_GRADING,
                      workers: int = 1, **grid_kw):
    """Max nodal error per level and empirical order log(e_{k-1}/e_k) / log(h_{k-1}/h_k).

    Without ``exact`` the finest solution serves as reference (interpolated to
    the coarser grids), so the last level has no error entry.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 grid levels")
    sols = []
    for lv in levels:
        grid = make_grid(domain, lv, grading, **grid_kw)
        A = assemble(domain, grid, params, workers=workers)
        u, _ = solve_dirichlet(A, f, g)
        sols.append(u)
    table = []
    ref = sols[-1]
    for k, u in enumerate(sols):
        pts = u.grid.coords()[u.grid.free]
        if exact is not None:
            err = float(np.max(np.abs(u.interior - exact.eval(pts))))
        elif k < len(sols) - 1:
            err = float(np.max(np.abs(u.interior - ref(pts if pts.shape[1] > 1 else pts[:, 0]))))
        else:
            err = float("nan")
        table.append(ConvergenceRow(levels[k], u.grid.h, int(u.grid.free.sum()), err, float("nan")))
    for k in range(1, len(table)):
        a, b = table[k - 1], table[k]
        if a.max_error > 0 and b.max_error > 0 and a.h != b.h:  # polar levels may refine angles only
            b.order = float(np.log(a.max_error / b.max_error) / np.log(a.h / b.h))
    return table

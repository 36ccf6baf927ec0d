"""Graphs, Dirichlet/Neumann solves and discrete heat kernels.

Two graph families are supported: the level-m Sierpinski gasket graph and
lattice discretizations of planar or 1-D Euclidean domains.  A graph's
generator acts on functions as

    (L f)(x) = laplacian_scale * sum_{y ~ x} w_xy (f(x) - f(y)),

so mean exit times solve L E = 1 and the semigroup is exp(-t L).  For grids
laplacian_scale = generator_scale / (2 h**2), which makes L the standard
finite-difference approximation of (generator_scale / 2) * Laplacian.
"""

from __future__ import annotations

import functools
import io
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as sla

from .core import ContractError, DomainSpec

MAX_GASKET_LEVEL = 12
DENSE_LIMIT = 5000
CG_RTOL = 1e-12
EIG_TOL = 1e-10
EIG_MAXITER = 10_000
MIN_INTERIOR = 3


class SingularSystemError(RuntimeError):
    """Linear system has no unique solution (e.g. an interior component with no boundary)."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(eq=False)
class Graph:
    """Weighted undirected graph with vertex masses and a boundary flag.

    ``bc`` is "dirichlet" (solves are restricted to non-boundary vertices) or
    "neumann" (the full generator, constants in its kernel).
    """

    coords: np.ndarray
    adjacency: sp.csr_matrix
    boundary_mask: np.ndarray
    laplacian_scale: float
    mass: np.ndarray
    bc: str = "dirichlet"
    kind: str = "grid"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def laplacian(self) -> sp.csr_matrix:
        """Full generator matrix laplacian_scale * (D - W)."""
        A = self.adjacency
        return (self.laplacian_scale * (sp.diags(self.degree) - A)).tocsr()

    def operator(self) -> sp.csr_matrix:
        """The matrix whose spectrum is the problem's spectrum.

        Dirichlet: the generator restricted to interior vertices (boundary
        values clamped to zero).  Neumann: the full generator.
        """
        L = self.laplacian()
        if self.bc == "neumann":
            return L
        idx = self.interior
        return L[idx][:, idx].tocsr()

    def nearest_vertex(self, point) -> int:
        d = np.sum((self.coords - np.asarray(point, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d))

    @functools.cached_property
    def _csr_arrays(self):
        A = self.adjacency
        return A.indptr.astype(np.int64), A.indices.astype(np.int64)


# --------------------------------------------------------------------------
# gasket
# --------------------------------------------------------------------------


def _gasket_cells(m: int) -> np.ndarray:
    """Lower-left corners (a, b) of the 3**m level-m cells, in lattice units."""
    origins = np.zeros((1, 2), dtype=np.int64)
    for k in range(m):
        size = 2 ** (m - k - 1)
        origins = np.concatenate([origins, origins + (size, 0), origins + (0, size)])
    return origins


def build_gasket_graph(m: int, boundary: str | np.ndarray = "corners",
                       generator_scale: float = 1.0) -> Graph:
    """Level-m Sierpinski gasket graph on the unit triangle.

    Vertices are stored in the triangular lattice (a, b) -> ((a + b/2), b*sqrt(3)/2) / 2**m.
    ``boundary`` is "corners" (default), "bottom" (the edge y = 0), "none"
    or an explicit boolean mask.
    """
    if int(m) != m or not 0 <= m <= MAX_GASKET_LEVEL:
        raise ValueError(f"gasket level must be an integer in [0, {MAX_GASKET_LEVEL}], got {m!r}")
    m = int(m)
    side = 2 ** m
    cells = _gasket_cells(m)
    tri = np.stack([cells, cells + (1, 0), cells + (0, 1)], axis=1)  # (3^m, 3, 2)
    keys = tri[..., 0] * (side + 1) + tri[..., 1]
    uniq, inv = np.unique(keys.ravel(), return_inverse=True)
    inv = inv.reshape(-1, 3)
    a, b = np.divmod(uniq, side + 1)
    coords = np.column_stack([(a + 0.5 * b) / side, b * (math.sqrt(3.0) / 2.0) / side])
    n = len(uniq)
    u = np.concatenate([inv[:, 0], inv[:, 1], inv[:, 2]])
    v = np.concatenate([inv[:, 1], inv[:, 2], inv[:, 0]])
    W = sp.coo_matrix((np.ones(2 * len(u)), (np.r_[u, v], np.r_[v, u])), shape=(n, n)).tocsr()

    if isinstance(boundary, str):
        if boundary == "corners":
            bmask = ((a == 0) & (b == 0)) | ((a == side) & (b == 0)) | ((a == 0) & (b == side))
        elif boundary == "bottom":
            bmask = b == 0
        elif boundary == "none":
            bmask = np.zeros(n, dtype=bool)
        else:
            raise ValueError(f"unknown gasket boundary {boundary!r}")
    else:
        bmask = np.asarray(boundary, dtype=bool)
        if bmask.shape != (n,):
            raise ValueError("boundary mask has wrong length")
    return Graph(coords=coords, adjacency=W, boundary_mask=bmask,
                 laplacian_scale=float(5 ** m) * generator_scale, mass=np.ones(n),
                 bc="neumann" if not bmask.any() else "dirichlet", kind="gasket",
                 meta={"level": m, "lattice": np.column_stack([a, b]),
                       "generator_scale": generator_scale})


@functools.lru_cache(maxsize=16)
def cached_gasket_graph(m: int, generator_scale: float = 1.0) -> Graph:
    return build_gasket_graph(m, generator_scale=generator_scale)


def gasket_domain_mask(g: Graph, domain: DomainSpec) -> np.ndarray:
    """Vertices of a gasket graph that belong to ``domain`` (a gasket_subset)."""
    if domain.variant != "gasket_subset":
        raise ValueError("expected a gasket_subset domain")
    sel = domain.params.get("selector", {"type": "whole"})
    kind = sel.get("type", "whole")
    if kind == "whole":
        mask = np.ones(g.n, dtype=bool)
    elif kind == "ball":
        c = np.asarray(sel["center"], dtype=float)
        mask = np.sum((g.coords - c) ** 2, axis=1) < float(sel["radius"]) ** 2
    elif kind == "cell":
        # address digits 0,1,2 pick the bottom-left, bottom-right, top sub-triangle
        m = g.meta["level"]
        lat = g.meta["lattice"]
        a0 = b0 = 0
        addr = list(sel["address"])
        if len(addr) > m:
            raise ValueError("cell address deeper than the graph level")
        for k, digit in enumerate(addr):
            size = 2 ** (m - k - 1)
            if digit == 1:
                a0 += size
            elif digit == 2:
                b0 += size
            elif digit != 0:
                raise ValueError("cell address digits must be 0, 1 or 2")
        size = 2 ** (m - len(addr))
        da, db = lat[:, 0] - a0, lat[:, 1] - b0
        mask = (da >= 0) & (db >= 0) & (da + db <= size)
    elif kind == "vertices":
        mask = np.zeros(g.n, dtype=bool)
        mask[np.asarray(sel["ids"], dtype=np.int64)] = True
    else:
        raise ValueError(f"unknown gasket selector {kind!r}")
    if domain.predicate is not None:
        mask &= np.asarray([bool(domain.predicate(p)) for p in g.coords])
    return mask


def gasket_interior_mask(g: Graph, domain: DomainSpec) -> np.ndarray:
    """Vertices a walk may occupy without having exited ``domain``.

    Graph boundary vertices never count as inside.  For a cell selector the
    cell's three corner vertices, the only ones joined to the rest of the
    gasket, are its boundary.
    """
    sel = gasket_domain_mask(g, domain)
    inner = sel & ~g.boundary_mask
    if domain.params.get("selector", {}).get("type") == "cell":
        outside = (~sel).astype(float)
        inner &= ~((g.adjacency @ outside) > 0)
    return inner


def restrict_gasket(g: Graph, domain: DomainSpec) -> Graph:
    """Dirichlet graph for a gasket subdomain: outside vertices become boundary."""
    inner = gasket_interior_mask(g, domain)
    return Graph(coords=g.coords, adjacency=g.adjacency, boundary_mask=~inner,
                 laplacian_scale=g.laplacian_scale, mass=g.mass, bc="dirichlet",
                 kind="gasket", meta=dict(g.meta))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------


def build_grid_graph(domain: DomainSpec, h: float, bc: str = "dirichlet",
                     generator_scale: float = 1.0) -> Graph:
    """Lattice discretization of an interval, box, polygon or disk.

    Dirichlet: nodes lo + i*h; nodes strictly inside the domain are interior and
    their out-of-domain lattice neighbors are boundary vertices.
    Neumann: cell-centered nodes lo + (i + 1/2)*h inside the domain; links leaving
    the domain are dropped, which is the mirror (ghost-node) closure.
    """
    if domain.variant not in ("interval", "box", "euclidean_ball", "polygon2d"):
        raise ValueError(f"grid graphs are not available for {domain.variant}")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    if not h > 0:
        raise ValueError("mesh width must be positive")
    lo, hi = domain.bounding_box()
    d = len(lo)
    if d > 2:
        raise ValueError("grid graphs support dimension 1 and 2 only")
    offset = 0.5 if bc == "neumann" else 0.0
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    axes = [lo[k] + (np.arange(-1, counts[k] + 1) + offset) * h for k in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = mesh.shape[:-1]
    inside = domain.contains(mesh)
    if inside.sum() < MIN_INTERIOR:
        raise ValueError(f"degenerate mesh: only {int(inside.sum())} interior nodes at h={h}")

    if bc == "dirichlet":
        neighbor_out = np.zeros(shape, dtype=bool)
        for k in range(d):
            for s in (1, -1):
                neighbor_out |= np.roll(inside, s, axis=k)
        keep = inside | (neighbor_out & ~inside)
    else:
        keep = inside
    idx = -np.ones(shape, dtype=np.int64)
    idx[keep] = np.arange(int(keep.sum()))
    rows, cols = [], []
    for k in range(d):
        # pairs (p, p + e_k) with at least one interior endpoint, both kept
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[k] = slice(0, -1)
        b[k] = slice(1, None)
        ia, ib = idx[tuple(a)], idx[tuple(b)]
        ina, inb = inside[tuple(a)], inside[tuple(b)]
        link = (ia >= 0) & (ib >= 0) & (ina | inb)
        rows.append(ia[link])
        cols.append(ib[link])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    n = int(keep.sum())
    W = sp.coo_matrix((np.ones(2 * len(r)), (np.r_[r, c], np.r_[c, r])), shape=(n, n)).tocsr()
    coords = mesh[keep]
    bmask = ~inside[keep]
    return Graph(coords=coords, adjacency=W, boundary_mask=bmask,
                 laplacian_scale=generator_scale / (2.0 * h * h),
                 mass=np.full(n, h ** d), bc=bc, kind="grid",
                 meta={"h": h, "domain": domain.to_dict(), "generator_scale": generator_scale,
                       "dim": d})


# --------------------------------------------------------------------------
# solves
# --------------------------------------------------------------------------


def _amg_cg(A: sp.csr_matrix, b: np.ndarray, rtol: float, ml=None, x0=None):
    if ml is None:
        ml = pyamg.smoothed_aggregation_solver(A)
    M = ml.aspreconditioner()
    x, info = sla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, M=M, maxiter=2000)
    if info != 0:
        raise ConvergenceError(f"CG did not reach rtol={rtol} (info={info})")
    return x


def _check_dirichlet(g: Graph):
    if g.bc != "dirichlet" or not g.boundary_mask.any():
        raise ContractError("Dirichlet problem needs a nonempty boundary")
    if g.boundary_mask.all():
        raise ContractError("Dirichlet problem has no interior vertices")
    # every interior component must touch the boundary
    A = g.adjacency
    ncomp, labels = csgraph.connected_components(A, directed=False)
    touched = np.zeros(ncomp, dtype=bool)
    touched[labels[g.boundary_mask]] = True
    if not touched[labels[~g.boundary_mask]].all():
        raise SingularSystemError("an interior component has no boundary vertex")


def mean_exit_solve(g: Graph, rtol: float = CG_RTOL) -> np.ndarray:
    """Expected exit time E on every vertex: L E = 1 inside, E = 0 on the boundary."""
    _check_dirichlet(g)
    L = g.operator()
    E = np.zeros(g.n)
    Ei = _amg_cg(L, np.ones(L.shape[0]), rtol)
    E[g.interior] = Ei
    return E


def expected_steps(g: Graph, rtol: float = CG_RTOL) -> np.ndarray:
    """Mean number of simple-random-walk steps to reach the boundary."""
    _check_dirichlet(g)
    idx = g.interior
    A = g.adjacency
    Lu = (sp.diags(g.degree) - A).tocsr()[idx][:, idx].tocsr()
    T = np.zeros(g.n)
    T[idx] = _amg_cg(Lu, g.degree[idx], rtol)
    return T


@dataclass
class EigenResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    graph: Graph | None = field(default=None, repr=False)

    def full_vector(self) -> np.ndarray:
        """Eigenvector on all graph vertices (zero on Dirichlet boundary)."""
        g = self.graph
        if g is None or g.bc == "neumann" or len(self.eigenvector) == g.n:
            return self.eigenvector
        out = np.zeros(g.n)
        out[g.interior] = self.eigenvector
        return out


def _inverse_iteration(L: sp.csr_matrix, solve, v0: np.ndarray, project=None,
                       tol: float = EIG_TOL, maxiter: int = EIG_MAXITER):
    """Inverse power iteration; ``solve(b, rtol)`` applies the inverse.

    The residual reported is the backward error ||L v - lam v|| / (||L||_1 ||v||);
    normalizing by the operator norm keeps the tolerance attainable in double
    precision on fine grids, where ||L|| grows like h**-2.
    """
    norm_L = float(abs(L).sum(axis=1).max())
    v = v0 / np.linalg.norm(v0)
    rel = 1.0
    lam = np.nan
    for it in range(1, maxiter + 1):
        w = solve(v, max(CG_RTOL * 0.1, 1e-2 * rel * norm_L / abs(lam) if it > 1 else 1e-2))
        if project is not None:
            w = project(w)
        v = w / np.linalg.norm(w)
        Lv = L @ v
        lam = float(v @ Lv)
        rel = float(np.linalg.norm(Lv - lam * v) / norm_L)
        if rel <= tol:
            return lam, v, rel, it
    raise ConvergenceError(f"inverse iteration stalled at residual {rel:.3e} after {maxiter} steps")


def _normalize_max(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v / v[k]


def dirichlet_lambda(g: Graph, tol: float = EIG_TOL, maxiter: int = EIG_MAXITER) -> EigenResult:
    """Bottom of the Dirichlet spectrum of ``g`` with its positive eigenvector."""
    _check_dirichlet(g)
    L = g.operator()
    ml = pyamg.smoothed_aggregation_solver(L)

    def solve(b, rtol):
        return _amg_cg(L, b, rtol, ml=ml)

    lam, v, res, it = _inverse_iteration(L, solve, np.ones(L.shape[0]), tol=tol, maxiter=maxiter)
    return EigenResult(lam, _normalize_max(v), res, it, g)


def neumann_eigenpair(g: Graph, tol: float = EIG_TOL, maxiter: int = EIG_MAXITER,
                      seed: int = 0) -> EigenResult:
    """First nontrivial Neumann eigenpair, by inverse iteration orthogonal to constants."""
    if g.bc != "neumann":
        raise ContractError("neumann_eigenpair needs a graph built with bc='neumann'")
    L = g.laplacian()
    n = L.shape[0]
    # a small shift keeps CG on a definite operator; eigenvectors are unchanged
    eps = 1e-6 * float(L.diagonal().mean())
    Ls = (L + eps * sp.identity(n)).tocsr()
    ml = pyamg.smoothed_aggregation_solver(Ls)
    w8 = g.mass / g.mass.sum()

    def project(v):
        return v - np.dot(w8, v)

    def solve(b, rtol):
        return _amg_cg(Ls, project(b), rtol, ml=ml)

    rng = np.random.default_rng(seed)
    v0 = project(g.coords[:, 0] + 1e-3 * rng.standard_normal(n))
    lam, v, res, it = _inverse_iteration(L, solve, v0, project=project, tol=tol, maxiter=maxiter)
    v = project(v)
    # largest |value| positive
    return EigenResult(lam, _normalize_max(v), res, it, g)


# --------------------------------------------------------------------------
# heat kernel
# --------------------------------------------------------------------------


class HeatKernel:
    """Dense spectral representation of exp(-tL) for a small graph.

    p(x, y, t) = sum_k exp(-lam_k t) phi_k(x) phi_k(y) / sqrt(m(x) m(y)), the
    transition density with respect to the vertex masses.
    """

    def __init__(self, g: Graph):
        if g.n > DENSE_LIMIT:
            raise ValueError(f"graph has {g.n} vertices; dense heat kernel is limited to {DENSE_LIMIT}")
        self.graph = g
        if g.bc == "dirichlet" and g.boundary_mask.any():
            self.vertices = g.interior
        else:
            self.vertices = np.arange(g.n)
        L = g.operator().toarray()
        # symmetrize in L2(m); masses are uniform for the built-in graphs
        sm = np.sqrt(g.mass[self.vertices])
        S = L * sm[:, None] / sm[None, :]
        S = 0.5 * (S + S.T)
        lam, phi = np.linalg.eigh(S)
        self.eigenvalues = np.maximum(lam, 0.0) if g.bc == "neumann" else lam
        self.eigenvectors = phi / sm[:, None]
        self._pos = -np.ones(g.n, dtype=np.int64)
        self._pos[self.vertices] = np.arange(len(self.vertices))

    def _local(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        pos = self._pos[x]
        if np.any(pos < 0):
            raise ValueError("heat kernel evaluated at a boundary vertex")
        return pos

    def __call__(self, x, y, t):
        """p(x, y, t) for vertex ids x, y (scalars) and scalar or array t."""
        i = self._local(x)[0]
        j = self._local(y)[0]
        t = np.asarray(t, dtype=float)
        w = self.eigenvectors[i] * self.eigenvectors[j]
        out = np.exp(-np.multiply.outer(t, self.eigenvalues)) @ w
        return float(out) if out.ndim == 0 else out

    def diagonal(self, x, t):
        return self(x, x, t)

    def row(self, x, t: float) -> np.ndarray:
        """y -> p(x, y, t) over the kernel's vertex set."""
        i = self._local(x)[0]
        return self.eigenvectors @ (np.exp(-self.eigenvalues * t) * self.eigenvectors[i])

    def survival(self, x, t):
        """P_x(no boundary hit by time t) = sum_y p(x, y, t) m(y)."""
        i = self._local(x)[0]
        w = self.eigenvectors[i] * (self.eigenvectors.T @ self.graph.mass[self.vertices])
        t = np.asarray(t, dtype=float)
        out = np.exp(-np.multiply.outer(t, self.eigenvalues)) @ w
        return float(out) if out.ndim == 0 else out

    @property
    def lambda1(self) -> float:
        if self.graph.bc == "neumann":
            return float(self.eigenvalues[1])
        return float(self.eigenvalues[0])


_hk_cache: dict = {}
_hk_lock = threading.Lock()


def heat_kernel(g: Graph) -> HeatKernel:
    """Cached HeatKernel for ``g`` (graphs are compared by identity)."""
    key = id(g)
    with _hk_lock:
        hk = _hk_cache.get(key)
        if hk is not None and hk.graph is g:
            return hk
    hk = HeatKernel(g)
    with _hk_lock:
        _hk_cache[key] = hk
        while len(_hk_cache) > 4:
            _hk_cache.pop(next(iter(_hk_cache)))
    return hk


def heat_kernel_discrete(g: Graph, x: int, y: int, t):
    return heat_kernel(g)(x, y, t)


def ondiag_decay_fit(levels, t_window=(None, None), x0=(0.5, 0.0), n_times: int = 40,
                     generator_scale: float = 1.0) -> dict:
    """Slope of log p(x0, x0, t) against log t on whole-gasket Neumann graphs.

    Returns {"exponent": mean of -slope, "per_level": {m: -slope}}.  The default
    window is [5**(2-m), 5**-2] for the smallest level m, which keeps the fit
    clear of the lattice scale and of the equilibrium plateau.
    """
    levels = sorted(int(m) for m in levels)
    m_min = levels[0]
    lo, hi = t_window
    lo = 5.0 ** (2 - m_min) if lo is None else lo
    hi = 5.0 ** -2 if hi is None else hi
    for m in levels:
        if not (lo >= 5.0 ** (1 - m) / generator_scale and hi <= 0.2 / generator_scale and lo < hi):
            raise ValueError(
                f"window [{lo:.3g}, {hi:.3g}] leaves the scaling regime "
                f"[{5.0 ** (1 - m):.3g}, 0.2] for level {m}")
    ts = np.geomspace(lo, hi, n_times)
    per = {}
    for m in levels:
        g = build_gasket_graph(m, boundary="none", generator_scale=generator_scale)
        hk = heat_kernel(g)
        x = g.nearest_vertex(x0)
        p = hk.diagonal(x, ts)
        slope = np.polyfit(np.log(ts), np.log(p), 1)[0]
        per[m] = -float(slope)
    return {"exponent": float(np.mean(list(per.values()))), "per_level": per,
            "window": (lo, hi)}


def ondiag_exponent(g: Graph, x: int, ts) -> float:
    """-d log p(x, x, t) / d log t by least squares over the times ``ts``."""
    ts = np.asarray(ts, dtype=float)
    p = heat_kernel(g).diagonal(x, ts)
    return -float(np.polyfit(np.log(ts), np.log(p), 1)[0])


def interval_decay_fit(h: float = 1e-2, t_window=(1e-3, 2e-2), x: float = 0.0) -> float:
    """Same fit on the interval (-1, 1) Dirichlet grid; the Gaussian regime gives 1/2."""
    g = build_grid_graph(DomainSpec.interval(-1, 1), h)
    return ondiag_exponent(g, g.nearest_vertex([x]), np.geomspace(*t_window, 30))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def write_edge_list(g: Graph, fh) -> None:
    """Text format: "n m scale", then "u v w" per edge, then "boundary k ids..."."""
    A = sp.triu(g.adjacency, k=1).tocoo()
    fh.write(f"{g.n} {A.nnz} {float(g.laplacian_scale)!r}\n")
    for u, v, w in zip(A.row, A.col, A.data):
        fh.write(f"{u} {v} {float(w)!r}\n")
    b = np.flatnonzero(g.boundary_mask)
    fh.write("boundary " + " ".join([str(len(b))] + [str(i) for i in b]) + "\n")


def read_edge_list(fh, coords=None, bc: str = "dirichlet") -> Graph:
    header = fh.readline().split()
    n, m, scale = int(header[0]), int(header[1]), float(header[2])
    data = np.loadtxt(io.StringIO("".join(fh.readline() for _ in range(m))), ndmin=2)
    btoks = fh.readline().split()
    if not btoks or btoks[0] != "boundary":
        raise ValueError("edge list is missing its boundary line")
    bidx = np.array([int(t) for t in btoks[2:]], dtype=np.int64)
    if len(bidx) != int(btoks[1]):
        raise ValueError("boundary count does not match")
    u = data[:, 0].astype(np.int64) if m else np.zeros(0, np.int64)
    v = data[:, 1].astype(np.int64) if m else np.zeros(0, np.int64)
    w = data[:, 2] if m else np.zeros(0)
    W = sp.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])), shape=(n, n)).tocsr()
    bmask = np.zeros(n, dtype=bool)
    bmask[bidx] = True
    return Graph(coords=np.zeros((n, 0)) if coords is None else coords, adjacency=W,
                 boundary_mask=bmask, laplacian_scale=scale, mass=np.ones(n),
                 bc=bc if bmask.any() else "neumann")


def write_eigen_csv(res: EigenResult, fh) -> None:
    """Header comment with eigenvalue/residual/iterations, then vertex,x...,value rows."""
    g = res.graph
    vec = res.full_vector()
    fh.write(f"# eigenvalue={res.eigenvalue!r} residual={res.residual!r} "
             f"iterations={res.iterations}\n")
    if g is not None:
        dim = g.coords.shape[1]
        fh.write(",".join(["vertex"] + [f"x{k}" for k in range(dim)] + ["value"]) + "\n")
        for i in range(g.n):
            fh.write(",".join([str(i)] + [repr(float(c)) for c in g.coords[i]]
                              + [repr(float(vec[i]))]) + "\n")
    else:
        fh.write("vertex,value\n")
        for i, val in enumerate(vec):
            fh.write(f"{i},{float(val)!r}\n")

"""Parameter functions, spaces, domains and heat-kernel envelope arithmetic.

Everything here is a pure function of its inputs.  The only cached state is
the Korányi unit-ball volume, which is computed once per dimension.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

LOG2 = math.log(2.0)
GASKET_ALPHA = math.log(3.0) / math.log(2.0)
GASKET_BETA = math.log(5.0) / math.log(2.0)

PHI_BRACKET = (1e-9, 1e9)
PHI_RTOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain of a scalar function."""


class ContractError(ValueError):
    """Caller violated a documented precondition."""


# --------------------------------------------------------------------------
# parameter function F
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterFunction:
    """Space-time scaling function F with its regularity exponents.

    ``kind="power"`` is F(r) = r**beta.  ``kind="piecewise_power"`` is
    r**exponent_below for r < breakpoint and continues continuously as
    breakpoint**exponent_below * (r/breakpoint)**exponent_above above it.
    For the piecewise kind beta/beta_prime are the min/max branch exponents.
    """

    kind: str = "power"
    beta: float = 2.0
    beta_prime: float | None = None
    C_F: float = 1.0
    breakpoint: float | None = None
    exponent_below: float | None = None
    exponent_above: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.beta_prime is None:
                object.__setattr__(self, "beta_prime", float(self.beta))
        elif self.kind == "piecewise_power":
            if None in (self.breakpoint, self.exponent_below, self.exponent_above):
                raise ValueError("piecewise_power needs breakpoint and both exponents")
            if self.breakpoint <= 0:
                raise ValueError("breakpoint must be positive")
            lo, hi = sorted((self.exponent_below, self.exponent_above))
            object.__setattr__(self, "beta", float(lo))
            object.__setattr__(self, "beta_prime", float(hi))
        else:
            raise ValueError(f"unknown parameter-function kind {self.kind!r}")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if self.beta_prime < self.beta:
            raise ValueError("beta_prime must be >= beta")
        if self.C_F < 1.0:
            raise ValueError("C_F must be >= 1")

    @classmethod
    def power(cls, beta: float) -> "ParameterFunction":
        return cls(kind="power", beta=float(beta), beta_prime=float(beta))

    @classmethod
    def piecewise(cls, below: float, above: float, breakpoint: float = 1.0) -> "ParameterFunction":
        return cls(kind="piecewise_power", breakpoint=float(breakpoint),
                   exponent_below=float(below), exponent_above=float(above))

    # F, its inverse and the Legendre-type transform Phi

    def __call__(self, r):
        return eval_F(self, r)

    def inverse(self, t):
        return eval_Rinv(self, t)

    def phi(self, s):
        return eval_Phi(self, s)

    def certify(self, n_pairs: int = 1000, decades: float = 6.0, seed: int = 0) -> float:
        """Smallest C_F making the two-sided regularity bound hold on random pairs."""
        rng = np.random.default_rng(seed)
        lo = -decades / 2
        a = 10.0 ** rng.uniform(lo, lo + decades, n_pairs)
        b = 10.0 ** rng.uniform(lo, lo + decades, n_pairs)
        r, R = np.minimum(a, b), np.maximum(a, b)
        ratio = eval_F(self, R) / eval_F(self, r)
        q = R / r
        need_lo = q ** self.beta / ratio
        need_hi = ratio / q ** self.beta_prime
        return float(max(1.0, need_lo.max(), need_hi.max()))

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "beta": self.beta, "C_F": self.C_F}
        return {"kind": "piecewise_power", "breakpoint": self.breakpoint,
                "exponent_below": self.exponent_below,
                "exponent_above": self.exponent_above, "C_F": self.C_F}

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterFunction":
        if d.get("kind", "power") == "power":
            return cls(kind="power", beta=float(d["beta"]), C_F=float(d.get("C_F", 1.0)))
        return cls(kind="piecewise_power", breakpoint=float(d["breakpoint"]),
                   exponent_below=float(d["exponent_below"]),
                   exponent_above=float(d["exponent_above"]),
                   C_F=float(d.get("C_F", 1.0)))


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def eval_F(pf: ParameterFunction, r):
    """F(r); vectorised over ``r``."""
    r = _positive(r, "r")
    if pf.kind == "power":
        return _out(r ** pf.beta)
    b, lo, hi = pf.breakpoint, pf.exponent_below, pf.exponent_above
    val = np.where(r < b, r ** lo, b ** lo * (r / b) ** hi)
    return _out(val)


def eval_Rinv(pf: ParameterFunction, t):
    """R(t) = F^{-1}(t)."""
    t = _positive(t, "t")
    if pf.kind == "power":
        return _out(t ** (1.0 / pf.beta))
    b, lo, hi = pf.breakpoint, pf.exponent_below, pf.exponent_above
    tb = b ** lo
    val = np.where(t < tb, t ** (1.0 / lo), b * (t / tb) ** (1.0 / hi))
    return _out(val)


def _golden_max(f, a, b, rtol):
    # golden-section search for a maximum of a unimodal f on [a, b]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rtol * max(1.0, abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _phi_scalar(pf: ParameterFunction, s: float) -> float:
    if s < 0:
        raise DomainError(f"s must be non-negative, got {s!r}")
    if s == 0:
        return 0.0
    if pf.kind == "power":
        beta = pf.beta
        if beta == 1.0:
            return 0.0 if s <= 1.0 else math.inf
        # maximiser r* = (beta/s)^(1/(beta-1))
        return (beta - 1.0) * (s / beta) ** (beta / (beta - 1.0))

    lo_u, hi_u = math.log(PHI_BRACKET[0]), math.log(PHI_BRACKET[1])

    def g(u):
        r = math.exp(u)
        return s / r - 1.0 / float(eval_F(pf, r))

    # coarse scan picks the bracket around the global maximum, golden section refines
    grid = np.linspace(lo_u, hi_u, 200)
    vals = np.array([g(u) for u in grid])
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    _, best = _golden_max(g, a, b, PHI_RTOL)
    return max(best, 0.0)


def eval_Phi(pf: ParameterFunction, s):
    """Phi(s) = sup_{r>0} (s/r - 1/F(r))."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError(f"s must be non-negative, got {s!r}")
    if s_arr.ndim == 0:
        return _phi_scalar(pf, float(s_arr))
    return np.vectorize(lambda v: _phi_scalar(pf, float(v)), otypes=[float])(s_arr)


@dataclass(frozen=True)
class EnvelopeParams:
    C_UE: float = 1.0
    c_UE: float = 1.0
    alpha: float = 1.0
    C_alpha: float = 1.0

    def __post_init__(self):
        for name in ("C_UE", "c_UE", "alpha", "C_alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def ue_envelope(pf: ParameterFunction, env: EnvelopeParams, vol, dist, t):
    """Sub-Gaussian upper envelope C_UE/vol * exp(-t/2 * Phi(c_UE*dist/t))."""
    vol = _positive(vol, "vol")
    t = _positive(t, "t")
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise DomainError("dist must be non-negative")
    expo = -0.5 * t * eval_Phi(pf, env.c_UE * dist / t)
    return _out(env.C_UE / vol * np.exp(expo))


def exponent_dprime(alpha: float, beta: float, beta_prime: float) -> float:
    """Polynomial exponent of the survival envelope."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not (1.0 <= beta <= beta_prime):
        raise DomainError("need 1 <= beta <= beta_prime")
    return max(alpha * (beta_prime - 1.0) / beta, alpha / beta)


# --------------------------------------------------------------------------
# spaces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceSpec:
    """Ambient space: ``euclidean`` (dim d), ``heisenberg`` (n, topological
    dim 2n+1) or ``gasket`` (pre-fractal level m).

    The diffusion generator is (generator_scale/2) times the (sub-)Laplacian.
    """

    variant: str
    dim: int = 1
    generator_scale: float = 1.0

    def __post_init__(self):
        if self.variant not in ("euclidean", "heisenberg", "gasket"):
            raise ValueError(f"unknown space variant {self.variant!r}")
        lo = 0 if self.variant == "gasket" else 1
        if int(self.dim) != self.dim or self.dim < lo:
            raise ValueError(f"invalid dimension parameter {self.dim!r} for {self.variant}")
        if not self.generator_scale > 0:
            raise ValueError("generator_scale must be positive")

    @classmethod
    def euclidean(cls, d: int, generator_scale: float = 1.0):
        return cls("euclidean", d, generator_scale)

    @classmethod
    def heisenberg(cls, n: int = 1, generator_scale: float = 1.0):
        return cls("heisenberg", n, generator_scale)

    @classmethod
    def gasket(cls, m: int, generator_scale: float = 1.0):
        return cls("gasket", m, generator_scale)

    @property
    def alpha(self) -> float:
        """Volume-growth (homogeneous/Hausdorff) dimension."""
        if self.variant == "euclidean":
            return float(self.dim)
        if self.variant == "heisenberg":
            return 2.0 * self.dim + 2.0
        return GASKET_ALPHA

    @property
    def walk_dimension(self) -> float:
        return GASKET_BETA if self.variant == "gasket" else 2.0

    @property
    def coord_dim(self) -> int:
        """Number of coordinates of a point."""
        if self.variant == "euclidean":
            return self.dim
        if self.variant == "heisenberg":
            return 2 * self.dim + 1
        return 2

    @property
    def sigma(self) -> float:
        return math.sqrt(self.generator_scale)

    def with_scale(self, generator_scale: float) -> "SpaceSpec":
        return SpaceSpec(self.variant, self.dim, generator_scale)

    def to_dict(self) -> dict:
        key = {"euclidean": "d", "heisenberg": "n", "gasket": "m"}[self.variant]
        return {"variant": self.variant, key: self.dim,
                "generator_scale": self.generator_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceSpec":
        variant = d["variant"]
        key = {"euclidean": "d", "heisenberg": "n", "gasket": "m"}.get(variant)
        if key is None:
            raise ValueError(f"unknown space variant {variant!r}")
        return cls(variant, int(d[key]), float(d.get("generator_scale", 1.0)))


def heisenberg_mult(p, q, n: int):
    """Group law (x, z)*(x', z') = (x + x', z + z' + sum_i x_i y'_i - x'_i y_i)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x, y, z = p[..., :n], p[..., n:2 * n], p[..., 2 * n]
    xq, yq, zq = q[..., :n], q[..., n:2 * n], q[..., 2 * n]
    zz = z + zq + np.sum(x * yq - xq * y, axis=-1)
    return np.concatenate([x + xq, y + yq, zz[..., None]], axis=-1)


def heisenberg_inverse(p):
    return -np.asarray(p, dtype=float)


def koranyi_gauge(p, n: int):
    """N(x, y, z) = ((|x|^2 + |y|^2)^2 + 16 z^2)^(1/4)."""
    p = np.asarray(p, dtype=float)
    w2 = np.sum(p[..., :2 * n] ** 2, axis=-1)
    return (w2 ** 2 + 16.0 * p[..., 2 * n] ** 2) ** 0.25


def koranyi_distance(p, q, n: int):
    return koranyi_gauge(heisenberg_mult(heisenberg_inverse(p), q, n), n)


_koranyi_lock = threading.Lock()
_koranyi_cache: dict[int, tuple[float, float]] = {}


def koranyi_unit_volume(n: int, samples: int = 4_000_000, seed: int = 20240611):
    """Haar volume of the unit Korányi ball in H^{2n+1} and its MC standard error.

    Hit-or-miss quadrature over the box [-1,1]^{2n} x [-1/4, 1/4]; the
    result is cached per n.
    """
    with _koranyi_lock:
        if n in _koranyi_cache:
            return _koranyi_cache[n]
        rng = np.random.default_rng([seed, n])
        box = 2.0 ** (2 * n) * 0.5
        hits = 0
        chunk = 500_000
        done = 0
        while done < samples:
            k = min(chunk, samples - done)
            w = rng.uniform(-1.0, 1.0, size=(k, 2 * n))
            z = rng.uniform(-0.25, 0.25, size=k)
            w2 = np.sum(w * w, axis=1)
            hits += int(np.count_nonzero(w2 * w2 + 16.0 * z * z < 1.0))
            done += k
        frac = hits / samples
        val = (box * frac, box * math.sqrt(frac * (1 - frac) / samples))
        _koranyi_cache[n] = val
        return val


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def volume(space: SpaceSpec, r):
    """mu(B(x, r)); independent of the centre for all built-in spaces."""
    r = _positive(r, "r")
    if space.variant == "euclidean":
        return _out(unit_ball_volume(space.dim) * r ** space.dim)
    if space.variant == "heisenberg":
        kappa, _ = koranyi_unit_volume(space.dim)
        return _out(kappa * r ** (2 * space.dim + 2))
    # self-similar measure, cells of side 2^-k have mass 3^-k
    k = np.ceil(-np.log2(r))
    return _out(3.0 ** (-k))


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

DOMAIN_VARIANTS = ("interval", "box", "euclidean_ball", "slab", "polygon2d",
                   "koranyi_ball", "gasket_subset")


@dataclass(frozen=True)
class DomainSpec:
    """Open set D in a space's native coordinates.

    ``params`` depends on ``variant``:

    interval        a, b
    box             lo (list), hi (list)
    euclidean_ball  center (list), radius
    slab            half_width, free_dims      D = (-w, w) x R^free_dims
    polygon2d       vertices (list of [x, y])
    koranyi_ball    center (list of 2n+1), radius
    gasket_subset   selector: {"type": "whole"} | {"type": "ball", "center", "radius"}
                    | {"type": "cell", "address": [..]} | {"type": "vertices", "ids": [..]}
    """

    variant: str
    params: dict = field(default_factory=dict)
    predicate: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in DOMAIN_VARIANTS:
            raise ValueError(f"unknown domain variant {self.variant!r}")
        p = self.params
        if self.variant == "interval" and not p["a"] < p["b"]:
            raise ValueError("interval needs a < b")
        if self.variant in ("euclidean_ball", "koranyi_ball") and not p["radius"] > 0:
            raise ValueError("radius must be positive")
        if self.variant == "box" and not np.all(np.asarray(p["lo"]) < np.asarray(p["hi"])):
            raise ValueError("box needs lo < hi componentwise")
        if self.variant == "slab" and not p["half_width"] > 0:
            raise ValueError("half_width must be positive")
        if self.variant == "polygon2d" and len(p["vertices"]) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    # constructors

    @classmethod
    def interval(cls, a: float, b: float):
        return cls("interval", {"a": float(a), "b": float(b)})

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]):
        return cls("box", {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]})

    @classmethod
    def ball(cls, center: Sequence[float], radius: float):
        return cls("euclidean_ball", {"center": [float(v) for v in center],
                                      "radius": float(radius)})

    @classmethod
    def slab(cls, half_width: float, free_dims: int):
        return cls("slab", {"half_width": float(half_width), "free_dims": int(free_dims)})

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon2d", {"vertices": [[float(x), float(y)] for x, y in vertices]})

    @classmethod
    def koranyi_ball(cls, center: Sequence[float], radius: float):
        return cls("koranyi_ball", {"center": [float(v) for v in center],
                                    "radius": float(radius)})

    @classmethod
    def gasket_subset(cls, selector: dict | None = None, predicate=None):
        return cls("gasket_subset", {"selector": selector or {"type": "whole"}}, predicate)

    # geometry

    @property
    def dim(self) -> int | None:
        p = self.params
        if self.variant == "interval":
            return 1
        if self.variant == "box":
            return len(p["lo"])
        if self.variant == "euclidean_ball":
            return len(p["center"])
        if self.variant == "slab":
            return 1 + p["free_dims"]
        if self.variant == "polygon2d" or self.variant == "gasket_subset":
            return 2
        return len(p["center"])

    def bounding_box(self):
        p = self.params
        if self.variant == "interval":
            return np.array([p["a"]]), np.array([p["b"]])
        if self.variant == "box":
            return np.asarray(p["lo"]), np.asarray(p["hi"])
        if self.variant == "euclidean_ball":
            c = np.asarray(p["center"])
            return c - p["radius"], c + p["radius"]
        if self.variant == "polygon2d":
            v = np.asarray(p["vertices"])
            return v.min(axis=0), v.max(axis=0)
        raise ValueError(f"{self.variant} has no finite bounding box")

    def contains(self, x) -> np.ndarray:
        """Membership for points of shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        v = self.variant
        if v == "interval":
            x1 = x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x
            return (x1 > p["a"]) & (x1 < p["b"])
        if v == "box":
            return np.all((x > np.asarray(p["lo"])) & (x < np.asarray(p["hi"])), axis=-1)
        if v == "euclidean_ball":
            return np.sum((x - np.asarray(p["center"])) ** 2, axis=-1) < p["radius"] ** 2
        if v == "slab":
            return np.abs(x[..., 0]) < p["half_width"]
        if v == "polygon2d":
            verts = np.asarray(p["vertices"])
            # the even-odd rule keeps parts of the edges; D is open, so drop them
            scale = float(np.abs(verts).max()) or 1.0
            on_edge = polygon_edge_distance(x, verts) <= 1e-12 * scale
            return points_in_polygon(x, verts) & ~on_edge
        if v == "koranyi_ball":
            c = np.asarray(p["center"])
            n = (len(c) - 1) // 2
            return koranyi_distance(c, x, n) < p["radius"]
        raise ValueError("gasket domains are vertex sets; use discrete.gasket_domain_mask")

    def boundary_distance(self, x) -> np.ndarray:
        """Lower bound on the Euclidean distance to the boundary (0 outside)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        v = self.variant
        if v == "interval":
            x1 = x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x
            d = np.minimum(x1 - p["a"], p["b"] - x1)
        elif v == "box":
            d = np.min(np.minimum(x - np.asarray(p["lo"]), np.asarray(p["hi"]) - x), axis=-1)
        elif v == "euclidean_ball":
            d = p["radius"] - np.sqrt(np.sum((x - np.asarray(p["center"])) ** 2, axis=-1))
        elif v == "slab":
            d = p["half_width"] - np.abs(x[..., 0])
        elif v == "polygon2d":
            d = polygon_edge_distance(x, np.asarray(p["vertices"]))
            d = np.where(self.contains(x), d, 0.0)
        else:
            raise ValueError(f"no Euclidean boundary distance for {v}")
        return np.maximum(d, 0.0)

    def measure(self) -> float:
        """Lebesgue/Haar measure of D where it is finite and closed-form."""
        p = self.params
        v = self.variant
        if v == "interval":
            return p["b"] - p["a"]
        if v == "box":
            return float(np.prod(np.asarray(p["hi"]) - np.asarray(p["lo"])))
        if v == "euclidean_ball":
            return unit_ball_volume(len(p["center"])) * p["radius"] ** len(p["center"])
        if v == "polygon2d":
            xy = np.asarray(p["vertices"])
            x, y = xy[:, 0], xy[:, 1]
            return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        if v == "koranyi_ball":
            n = (len(p["center"]) - 1) // 2
            return koranyi_unit_volume(n)[0] * p["radius"] ** (2 * n + 2)
        if v == "slab":
            return math.inf
        raise ValueError("gasket subset measure depends on the level; see discrete")

    def to_dict(self) -> dict:
        return {"variant": self.variant, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        d = dict(d)
        variant = d.pop("variant")
        if variant == "gasket_subset":
            return cls.gasket_subset(d.get("selector"))
        return cls(variant, d)


def points_in_polygon(x, vertices) -> np.ndarray:
    """Even-odd rule membership for points of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]
    inside = np.zeros(px.shape, dtype=bool)
    vx, vy = vertices[:, 0], vertices[:, 1]
    n = len(vertices)
    for i in range(n):
        x1, y1 = vx[i], vy[i]
        x2, y2 = vx[(i + 1) % n], vy[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def polygon_edge_distance(x, vertices) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    best = np.full(x.shape[:-1], np.inf)
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        ab = b - a
        t = np.clip(np.sum((x - a) * ab, axis=-1) / np.dot(ab, ab), 0.0, 1.0)
        proj = a + t[..., None] * ab
        best = np.minimum(best, np.sqrt(np.sum((x - proj) ** 2, axis=-1)))
    return best


# --------------------------------------------------------------------------
# layer-cake identity
# --------------------------------------------------------------------------


def _check_decreasing(phi, R, truncation):
    rs = np.linspace(R, truncation, 257)
    vals = np.array([phi(r) for r in rs])
    if np.any(np.diff(vals) > 1e-14 * max(1.0, abs(vals[0]))):
        raise ContractError("phi must be non-increasing")
    if abs(vals[-1]) > 1e-8 * max(abs(vals[0]), 1e-300) or vals[0] == vals[-1]:
        raise ContractError("phi must vanish at infinity (phi(truncation) is not ~0)")


def check_layercake(space: SpaceSpec, center, R: float, phi, dphi=None,
                    truncation: float | None = None, epsabs: float = 1e-13,
                    epsrel: float = 1e-11) -> float:
    """Relative residual between the two sides of the layer-cake formula

        int_{B(x,R)^c} phi(d(x,y)) dmu(y)
            = -phi(R) mu(B(x,R)) - int_R^inf mu(B(x,r)) phi'(r) dr

    The left side is integrated in Cartesian coordinates (nested adaptive
    quadrature over R^d minus the ball), the right side as a 1-D radial
    integral against the closed-form volume.  Euclidean d <= 3 only.
    """
    if space.variant != "euclidean" or space.dim > 3:
        raise ValueError("layer-cake check supports euclidean d <= 3")
    d = space.dim
    if truncation is None:
        truncation = R + 40.0
    _check_decreasing(phi, R, truncation)
    if dphi is None:
        def dphi(r, _h=1e-5):
            return (-phi(r + 2 * _h) + 8 * phi(r + _h) - 8 * phi(r - _h) + phi(r - 2 * _h)) / (12 * _h)

    L = truncation
    opts = {"epsabs": epsabs, "epsrel": epsrel, "limit": 200}

    def phi_xyz(*y):
        return phi(math.sqrt(sum(v * v for v in y)))

    # Cartesian quadrature over the complement of the ball, centred coordinates.
    if d == 1:
        lhs = integrate.quad(phi, R, L, **opts)[0] + integrate.quad(lambda y: phi(-y), -L, -R, **opts)[0]
    elif d == 2:
        def inner(x):
            if abs(x) >= R:
                return integrate.quad(lambda y: phi_xyz(x, y), -L, L, **opts)[0]
            c = math.sqrt(R * R - x * x)
            return (integrate.quad(lambda y: phi_xyz(x, y), c, L, **opts)[0]
                    + integrate.quad(lambda y: phi_xyz(x, y), -L, -c, **opts)[0])
        pts = [-R, R] if R > 0 else [0.0]
        lhs = integrate.quad(inner, -L, L, points=pts, **opts)[0]
    else:
        def inner2(x, y):
            rho2 = x * x + y * y
            if rho2 >= R * R:
                return integrate.quad(lambda z: phi_xyz(x, y, z), -L, L, **opts)[0]
            c = math.sqrt(R * R - rho2)
            return (integrate.quad(lambda z: phi_xyz(x, y, z), c, L, **opts)[0]
                    + integrate.quad(lambda z: phi_xyz(x, y, z), -L, -c, **opts)[0])

        def inner1(x):
            if abs(x) >= R:
                return integrate.quad(lambda y: inner2(x, y), -L, L, **opts)[0]
            c = math.sqrt(R * R - x * x)
            return integrate.quad(lambda y: inner2(x, y), -L, L, points=[-c, c], **opts)[0]
        pts = [-R, R] if R > 0 else [0.0]
        lhs = integrate.quad(inner1, -L, L, points=pts, **opts)[0]

    omega = unit_ball_volume(d)
    ball_R = omega * R ** d if R > 0 else 0.0
    tail = integrate.quad(lambda r: omega * r ** d * dphi(r), R, L, **opts)[0]
    rhs = -phi(R) * ball_R - tail
    return abs(lhs - rhs) / abs(rhs)


__all__ = [
    "ContractError", "DomainError", "DomainSpec", "EnvelopeParams",
    "GASKET_ALPHA", "GASKET_BETA", "ParameterFunction", "SpaceSpec",
    "check_layercake", "eval_F", "eval_Phi", "eval_Rinv", "exponent_dprime",
    "heisenberg_mult", "koranyi_distance", "koranyi_gauge", "koranyi_unit_volume",
    "points_in_polygon", "ue_envelope", "unit_ball_volume", "volume",
]

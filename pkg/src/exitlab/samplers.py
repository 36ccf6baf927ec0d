"""Monte Carlo exit times for Brownian motion, Heisenberg horizontal Brownian
motion and the gasket random walk.

Single steps (``step_*``) take a numpy Generator and are vectorized over a
leading batch axis.  Whole paths run in compiled loops where path ``i`` of a
batch draws from its own stream keyed by (seed, i); see ``_rng``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .core import ContractError, DomainSpec, SpaceSpec
from .discrete import cached_gasket_graph, gasket_interior_mask

FORMAT_VERSION = 1
_BIN_MAGIC = b"EXITBATCH"
_CSV_TAG = "# exitbatch-csv"


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-4
    t_max: float = 10.0
    n_paths: int = 1000
    seed: int = 0
    bridge_correction: bool = True
    substeps: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size h must be positive")
        if not self.t_max > self.h:
            raise ValueError("t_max must exceed h")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.t_max / self.h - 1e-9))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(h=float(d["h"]), t_max=float(d["t_max"]), n_paths=int(d["n_paths"]),
                   seed=int(d.get("seed", 0)),
                   bridge_correction=bool(d.get("bridge_correction", True)),
                   substeps=int(d.get("substeps", 1)))


@dataclass(frozen=True)
class ExitRecord:
    tau: float
    exited: bool
    exit_point: tuple
    path_index: int


@dataclass(eq=False)
class ExitBatch:
    """Exit records stored column-wise."""

    tau: np.ndarray
    exited: np.ndarray
    exit_points: np.ndarray
    path_index: np.ndarray
    config: SimConfig
    space: SpaceSpec
    domain: DomainSpec
    start: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def records(self) -> list[ExitRecord]:
        return [ExitRecord(float(t), bool(e), tuple(map(float, p)), int(i))
                for t, e, p, i in zip(self.tau, self.exited, self.exit_points, self.path_index)]

    @property
    def censored_fraction(self) -> float:
        return float(1.0 - self.exited.mean())

    def meta(self) -> dict:
        return {"version": FORMAT_VERSION, "config": self.config.to_dict(),
                "space": self.space.to_dict(), "domain": self.domain.to_dict(),
                "start": list(map(float, self.start)), "n": len(self),
                "dim": int(self.exit_points.shape[1])}

    def same_data(self, other: "ExitBatch") -> bool:
        return (np.array_equal(self.tau, other.tau) and np.array_equal(self.exited, other.exited)
                and np.array_equal(self.exit_points, other.exit_points)
                and np.array_equal(self.path_index, other.path_index))


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------


def step_euclidean(state, h: float, rng: np.random.Generator, sigma: float = 1.0) -> np.ndarray:
    """One Euler step of sigma * B: exact Gaussian increment N(0, sigma**2 h) per coordinate."""
    if not h > 0:
        raise ValueError("h must be positive")
    state = np.asarray(state, dtype=float)
    return state + sigma * math.sqrt(h) * rng.standard_normal(state.shape)


def step_heisenberg(state, h: float, rng: np.random.Generator, substeps: int = 1,
                    sigma: float = 1.0) -> np.ndarray:
    """Advance (U, V, A) by time h.

    ``state`` has last axis 2n+1 laid out as (U_1..U_n, V_1..V_n, A).  Each of the
    ``substeps`` sub-intervals adds exact Gaussian increments to U and V and the
    left-point sum U dV - V dU to A.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.array(state, dtype=float)
    n = (x.shape[-1] - 1) // 2
    sd = sigma * math.sqrt(h / substeps)
    for _ in range(int(substeps)):
        dU = sd * rng.standard_normal(x.shape[:-1] + (n,))
        dV = sd * rng.standard_normal(x.shape[:-1] + (n,))
        U = x[..., :n]
        V = x[..., n:2 * n]
        x[..., 2 * n] += np.sum(U * dV - V * dU, axis=-1)
        x[..., :n] = U + dU
        x[..., n:2 * n] = V + dV
    return x


def step_gasket(vertex, m: int, rng: np.random.Generator, graph=None):
    """Move to a uniformly chosen neighbor on the level-m gasket graph.

    One step is one unit 5**-m of the level-m clock.
    """
    g = cached_gasket_graph(int(m)) if graph is None else graph
    v = np.asarray(vertex, dtype=np.int64)
    if np.any(g.boundary_mask[v]):
        raise ContractError("walk is on a boundary vertex; the exit should already have fired")
    indptr, indices = g._csr_arrays
    lo = indptr[v]
    deg = indptr[v + 1] - lo
    pick = (rng.random(v.shape) * deg).astype(np.int64)
    out = indices[lo + pick]
    return int(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# batches
# --------------------------------------------------------------------------


def _encode_domain(space: SpaceSpec, domain: DomainSpec):
    p = domain.params
    v = domain.variant
    d = space.coord_dim
    if domain.dim is not None and v != "gasket_subset" and domain.dim != d:
        raise ContractError(f"domain dimension {domain.dim} does not match space ({d})")
    if v == "interval":
        return K.INTERVAL, np.array([p["a"], p["b"]], dtype=float)
    if v == "box":
        return K.BOX, np.array(list(p["lo"]) + list(p["hi"]), dtype=float)
    if v == "euclidean_ball":
        return K.BALL, np.array(list(p["center"]) + [p["radius"]], dtype=float)
    if v == "slab":
        return K.SLAB, np.array([p["half_width"]], dtype=float)
    if v == "polygon2d":
        return K.POLYGON, np.asarray(p["vertices"], dtype=float).ravel()
    if v == "koranyi_ball":
        n = (len(p["center"]) - 1) // 2
        return K.KORANYI, np.array([n] + list(p["center"]) + [p["radius"]], dtype=float)
    raise ContractError(f"domain {v} is not usable in {space.variant} space")


def _gasket_start(g, start) -> int:
    if np.ndim(start) == 0:
        return int(start)
    return g.nearest_vertex(start)


def run_batch(space: SpaceSpec, domain: DomainSpec, start, config: SimConfig,
              first_index: int = 0) -> ExitBatch:
    """Simulate ``config.n_paths`` exits with path indices first_index, first_index+1, ...

    Censored paths (still inside at t_max) get tau = t_max and exited = False.
    """
    n = int(config.n_paths)
    idx0 = int(first_index)
    taus = np.empty(n)
    exited = np.empty(n, dtype=np.bool_)
    seed = np.uint64(int(config.seed))

    if space.variant == "gasket":
        g = cached_gasket_graph(space.dim, space.generator_scale)
        inner = gasket_interior_mask(g, domain)
        v0 = _gasket_start(g, start)
        if not inner[v0]:
            raise ContractError(f"start vertex {v0} is not inside the domain")
        dt = 5.0 ** (-space.dim) / space.generator_scale
        nmax = int(math.ceil(config.t_max / dt - 1e-9))
        last = np.empty(n, dtype=np.int64)
        indptr, indices = g._csr_arrays
        K.graph_paths(indptr, indices, inner, v0, dt, nmax, float(config.t_max), seed,
                      idx0, taus, exited, last)
        points = g.coords[last]
        start_t = tuple(map(float, g.coords[v0]))
    else:
        x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
        if x0.shape != (space.coord_dim,):
            raise ContractError(f"start must have {space.coord_dim} coordinates")
        code, p = _encode_domain(space, domain)
        if not K.inside(code, p, x0):
            raise ContractError("start point is not inside the domain")
        points = np.empty((n, len(x0)))
        if space.variant == "euclidean":
            K.euclidean_paths(code, p, x0, space.sigma, float(config.h), config.max_steps,
                              float(config.t_max), bool(config.bridge_correction), seed, idx0,
                              taus, exited, points)
        else:
            K.heisenberg_paths(code, p, x0, space.dim, space.sigma, float(config.h),
                               int(config.substeps), config.max_steps, float(config.t_max),
                               seed, idx0, taus, exited, points)
        start_t = tuple(map(float, x0))
    return ExitBatch(taus, exited, points, np.arange(idx0, idx0 + n, dtype=np.int64),
                     config, space, domain, start_t)


def run_exit(space: SpaceSpec, domain: DomainSpec, start, config: SimConfig,
             path_index: int = 0) -> ExitRecord:
    """A single path, using the stream of path ``path_index`` of a batch with config.seed."""
    cfg = SimConfig(config.h, config.t_max, 1, config.seed, config.bridge_correction,
                    config.substeps)
    return run_batch(space, domain, start, cfg, first_index=path_index).records[0]


def sample_endpoints(space: SpaceSpec, start, t: float, n_paths: int, seed: int = 0,
                     steps: int = 100, substeps: int = 1) -> np.ndarray:
    """Positions at fixed time t of free (domain-less) paths, shape (n_paths, coord_dim)."""
    if space.variant == "gasket":
        raise ValueError("use run_batch for the gasket walk")
    x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    h = t / steps
    taus = np.empty(n_paths)
    exited = np.empty(n_paths, dtype=np.bool_)
    points = np.empty((n_paths, len(x0)))
    none = np.zeros(0)
    if space.variant == "euclidean":
        K.euclidean_paths(K.WHOLE, none, x0, space.sigma, h, steps, t, False,
                          np.uint64(seed), 0, taus, exited, points)
    else:
        K.heisenberg_paths(K.WHOLE, none, x0, space.dim, space.sigma, h, substeps, steps, t,
                           np.uint64(seed), 0, taus, exited, points)
    return points


def merge_batches(batches) -> ExitBatch:
    """Concatenate batches of one experiment, ordered by path index."""
    batches = list(batches)
    if not batches:
        raise ValueError("nothing to merge")
    b0 = batches[0]
    for b in batches[1:]:
        if (b.space, b.domain, b.start) != (b0.space, b0.domain, b0.start):
            raise ValueError("batches come from different experiments")
    idx = np.concatenate([b.path_index for b in batches])
    order = np.argsort(idx, kind="stable")
    if len(np.unique(idx)) != len(idx):
        raise ValueError("batches overlap in path indices")
    cfg = b0.config
    cfg = SimConfig(cfg.h, cfg.t_max, len(idx), cfg.seed, cfg.bridge_correction, cfg.substeps)
    return ExitBatch(np.concatenate([b.tau for b in batches])[order],
                     np.concatenate([b.exited for b in batches])[order],
                     np.concatenate([b.exit_points for b in batches])[order],
                     idx[order], cfg, b0.space, b0.domain, b0.start)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _from_meta(meta: dict):
    if meta.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported exit batch version {meta.get('version')!r}")
    return (SimConfig.from_dict(meta["config"]), SpaceSpec.from_dict(meta["space"]),
            DomainSpec.from_dict(meta["domain"]), tuple(meta["start"]))


def write_binary(batch: ExitBatch, fh) -> None:
    """Header line ``EXITBATCH <json>`` then little-endian columns:
    int64 path_index, float64 tau, uint8 exited, float64 points (row-major)."""
    fh.write(_BIN_MAGIC + b" " + json.dumps(batch.meta()).encode() + b"\n")
    fh.write(batch.path_index.astype("<i8").tobytes())
    fh.write(batch.tau.astype("<f8").tobytes())
    fh.write(batch.exited.astype("u1").tobytes())
    fh.write(np.ascontiguousarray(batch.exit_points, dtype="<f8").tobytes())


def read_binary(fh) -> ExitBatch:
    line = fh.readline()
    if not line.startswith(_BIN_MAGIC + b" "):
        raise ValueError("not an exit batch file")
    meta = json.loads(line[len(_BIN_MAGIC) + 1:])
    config, space, domain, start = _from_meta(meta)
    n, dim = meta["n"], meta["dim"]
    buf = fh.read()
    need = n * (8 + 8 + 1 + 8 * dim)
    if len(buf) != need:
        raise ValueError(f"truncated exit batch: {len(buf)} bytes, expected {need}")
    o = 0
    idx = np.frombuffer(buf, "<i8", n, o).astype(np.int64)
    o += 8 * n
    tau = np.frombuffer(buf, "<f8", n, o).astype(float)
    o += 8 * n
    ex = np.frombuffer(buf, "u1", n, o).astype(bool)
    o += n
    pts = np.frombuffer(buf, "<f8", n * dim, o).astype(float).reshape(n, dim)
    return ExitBatch(tau, ex, pts, idx, config, space, domain, start)


def write_csv(batch: ExitBatch, fh) -> None:
    fh.write(f"{_CSV_TAG} {json.dumps(batch.meta())}\n")
    w = csv.writer(fh, lineterminator="\n")
    dim = batch.exit_points.shape[1]
    w.writerow(["path_index", "tau", "exited"] + [f"x{k}" for k in range(dim)])
    for i, t, e, p in zip(batch.path_index, batch.tau, batch.exited, batch.exit_points):
        w.writerow([int(i), repr(float(t)), int(e)] + [repr(float(c)) for c in p])


def read_csv(fh) -> ExitBatch:
    first = fh.readline()
    if not first.startswith(_CSV_TAG + " "):
        raise ValueError("missing exit batch CSV header")
    meta = json.loads(first[len(_CSV_TAG) + 1:])
    config, space, domain, start = _from_meta(meta)
    rows = list(csv.reader(fh))[1:]
    if len(rows) != meta["n"]:
        raise ValueError("row count does not match header")
    arr = np.array([[float(c) for c in r] for r in rows]).reshape(len(rows), -1)
    return ExitBatch(arr[:, 1].copy(), arr[:, 2].astype(bool), arr[:, 3:].copy(),
                     arr[:, 0].astype(np.int64), config, space, domain, start)


def save_batch(batch: ExitBatch, path: str) -> None:
    if str(path).endswith(".csv"):
        with open(path, "w", newline="") as fh:
            write_csv(batch, fh)
    else:
        with open(path, "wb") as fh:
            write_binary(batch, fh)


def load_batch(path: str) -> ExitBatch:
    if str(path).endswith(".csv"):
        with open(path, newline="") as fh:
            return read_csv(fh)
    with open(path, "rb") as fh:
        return read_binary(fh)


def batch_from_bytes(data: bytes) -> ExitBatch:
    return read_binary(io.BytesIO(data))

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exitlab.core import ContractError, DomainSpec, SpaceSpec
from exitlab.discrete import build_gasket_graph, expected_steps, mean_exit_solve
from exitlab.samplers import (
    SimConfig,
    batch_from_bytes,
    load_batch,
    merge_batches,
    read_csv,
    run_batch,
    run_exit,
    sample_endpoints,
    save_batch,
    step_euclidean,
    step_gasket,
    step_heisenberg,
    write_binary,
    write_csv,
)

E1 = SpaceSpec.euclidean(1)
IV = DomainSpec.interval(-1.0, 1.0)


def _mean_ci(batch):
    return batch.tau.mean(), 3.0 * batch.tau.std() / math.sqrt(len(batch))


@pytest.mark.parametrize("x0,scale", [(0.0, 1.0), (0.5, 1.0), (0.5, 2.0), (-0.3, 4.0)])
def test_interval_mean_exit(x0, scale):
    # E_x tau = (1 - x^2) / sigma^2 for (sigma^2/2) d^2/dx^2 on (-1, 1)
    cfg = SimConfig(h=1e-4 / scale, t_max=12.0 / scale, n_paths=6000, seed=11)
    b = run_batch(SpaceSpec.euclidean(1, scale), IV, [x0], cfg)
    m, ci = _mean_ci(b)
    assert b.censored_fraction == 0.0
    assert abs(m - (1 - x0 ** 2) / scale) < ci + 0.01 / scale


def test_disk_mean_exit_off_center():
    # E_x tau = (1 - |x|^2) / 2 in the unit disk
    cfg = SimConfig(h=1e-4, t_max=6.0, n_paths=4000, seed=2)
    b = run_batch(SpaceSpec.euclidean(2), DomainSpec.ball([0, 0], 1), [0.3, -0.4], cfg)
    m, ci = _mean_ci(b)
    assert abs(m - 0.375) < ci + 0.005


def test_bridge_correction_removes_discretization_bias():
    coarse = dict(h=4e-3, t_max=12.0, n_paths=8000, seed=3)
    with_b = run_batch(E1, IV, [0.0], SimConfig(**coarse)).tau.mean()
    without = run_batch(E1, IV, [0.0], SimConfig(**coarse, bridge_correction=False)).tau.mean()
    # discrete monitoring misses crossings, so the uncorrected walk lives too long
    assert without > 1.04
    assert abs(with_b - 1.0) < 0.03
    assert abs(with_b - 1.0) < abs(without - 1.0)


def test_slab_matches_interval():
    # the free coordinate of the slab does not affect the exit time
    cfg = SimConfig(h=1e-4, t_max=12.0, n_paths=3000, seed=9)
    b = run_batch(SpaceSpec.euclidean(3), DomainSpec.slab(1.0, 2), [0.0, 5.0, -2.0], cfg)
    m, ci = _mean_ci(b)
    assert abs(m - 1.0) < ci + 0.01


def test_exit_points_outside_without_bridge():
    cfg = SimConfig(h=1e-3, t_max=10.0, n_paths=500, seed=1, bridge_correction=False)
    b = run_batch(SpaceSpec.euclidean(2), DomainSpec.ball([0, 0], 1), [0, 0], cfg)
    assert np.all(np.hypot(*b.exit_points.T) >= 1.0)


def test_censoring_keeps_records():
    cfg = SimConfig(h=1e-3, t_max=0.05, n_paths=200, seed=4)
    b = run_batch(E1, IV, [0.0], cfg)
    assert len(b) == 200
    assert b.censored_fraction > 0.9
    assert np.all(b.tau[~b.exited] == 0.05)


def test_determinism_and_prefix():
    cfg = SimConfig(h=1e-3, t_max=10.0, n_paths=300, seed=77)
    a = run_batch(E1, IV, [0.1], cfg)
    b = run_batch(E1, IV, [0.1], cfg)
    assert a.same_data(b)
    tail = run_batch(E1, IV, [0.1], SimConfig(1e-3, 10.0, 100, 77), first_index=200)
    np.testing.assert_array_equal(tail.tau, a.tau[200:])
    head = run_batch(E1, IV, [0.1], SimConfig(1e-3, 10.0, 200, 77))
    assert merge_batches([tail, head]).same_data(a)
    rec = run_exit(E1, IV, [0.1], cfg, path_index=123)
    assert rec.tau == a.tau[123] and rec.path_index == 123
    other = run_batch(E1, IV, [0.1], SimConfig(1e-3, 10.0, 300, 78))
    assert not np.array_equal(other.tau, a.tau)


def test_merge_rejects_overlap():
    cfg = SimConfig(h=1e-3, t_max=5.0, n_paths=10, seed=1)
    a = run_batch(E1, IV, [0.0], cfg)
    with pytest.raises(ValueError):
        merge_batches([a, a])


def test_start_outside_is_rejected():
    cfg = SimConfig(h=1e-3, t_max=1.0, n_paths=10)
    with pytest.raises(ContractError):
        run_batch(E1, IV, [1.5], cfg)
    with pytest.raises(ContractError):
        run_batch(SpaceSpec.euclidean(2), IV, [0.0, 0.0], cfg)


@pytest.mark.parametrize("bad", [dict(h=0.0), dict(n_paths=0), dict(t_max=1e-5), dict(substeps=0)])
def test_simconfig_validation(bad):
    kw = dict(h=1e-3, t_max=1.0, n_paths=10, seed=0, **{})
    kw.update(bad)
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_step_euclidean_variance():
    rng = np.random.default_rng(0)
    x = step_euclidean(np.zeros((200_000, 2)), 0.01, rng, sigma=2.0)
    np.testing.assert_allclose(x.var(axis=0), 0.04, rtol=0.02)


def test_step_heisenberg_area_variance():
    # left-point sums of U dV - V dU over N steps give Var(A_1) = 1 - 1/N
    rng = np.random.default_rng(1)
    x = np.zeros((100_000, 3))
    for _ in range(10):
        x = step_heisenberg(x, 0.1, rng, substeps=5)
    assert x[:, 2].var() == pytest.approx(1 - 1 / 50, rel=0.02)
    assert x[:, 0].var() == pytest.approx(1.0, rel=0.02)


def test_heisenberg_endpoints_area_variance():
    pts = sample_endpoints(SpaceSpec.heisenberg(1), [0, 0, 0], 1.0, 200_000, seed=5, steps=200)
    assert pts[:, 2].mean() == pytest.approx(0.0, abs=0.01)
    assert pts[:, 2].var() == pytest.approx(1 - 1 / 200, rel=0.02)
    # the area scales like t (variance like t^2) under dilation
    p4 = sample_endpoints(SpaceSpec.heisenberg(1), [0, 0, 0], 4.0, 200_000, seed=6, steps=200)
    assert p4[:, 2].var() / pts[:, 2].var() == pytest.approx(16.0, rel=0.04)


def test_gasket_walk_matches_exact_solves():
    m = 3
    g = build_gasket_graph(m)
    x0 = g.nearest_vertex([0.5, 0.0])
    cfg = SimConfig(h=1.0, t_max=50.0, n_paths=20_000, seed=8)
    b = run_batch(SpaceSpec.gasket(m), DomainSpec.gasket_subset(), [0.5, 0.0], cfg)
    m_tau, ci = _mean_ci(b)
    steps = expected_steps(g)[x0]
    assert abs(m_tau / 5.0 ** -m - steps) < ci / 5.0 ** -m
    # the walk clock runs 4x slower than the scaled graph Laplacian
    assert abs(m_tau - 4 * mean_exit_solve(g)[x0]) < ci
    # walks exit at the corners
    corners = g.coords[g.boundary_mask]
    d = np.min(np.linalg.norm(b.exit_points[:, None, :] - corners[None], axis=-1), axis=1)
    assert np.all(d < 1e-12)


def test_step_gasket():
    g = build_gasket_graph(2)
    rng = np.random.default_rng(0)
    v = g.nearest_vertex([0.5, 0.0])
    nxt = step_gasket(np.full(4000, v), 2, rng, g)
    nbrs = set(g.adjacency[v].indices)
    assert set(np.unique(nxt)) == nbrs
    with pytest.raises(ContractError):
        step_gasket(int(np.flatnonzero(g.boundary_mask)[0]), 2, rng, g)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.integers(1, 40))
def test_binary_and_csv_roundtrip(seed, n):
    cfg = SimConfig(h=1e-2, t_max=3.0, n_paths=n, seed=seed)
    b = run_batch(SpaceSpec.euclidean(2), DomainSpec.ball([0, 0], 1), [0.1, 0.1], cfg)
    buf = io.BytesIO()
    write_binary(b, buf)
    back = batch_from_bytes(buf.getvalue())
    assert back.same_data(b) and back.config == cfg and back.domain == b.domain
    s = io.StringIO()
    write_csv(b, s)
    s.seek(0)
    assert read_csv(s).same_data(b)


def test_files_identical_on_rerun(tmp_path):
    cfg = SimConfig(h=1e-3, t_max=5.0, n_paths=50, seed=3)
    for name in ("a.bin", "b.bin", "a.csv", "b.csv"):
        save_batch(run_batch(E1, IV, [0.0], cfg), str(tmp_path / name))
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert load_batch(str(tmp_path / "a.csv")).same_data(load_batch(str(tmp_path / "a.bin")))


def test_truncated_binary_is_rejected():
    cfg = SimConfig(h=1e-2, t_max=3.0, n_paths=5)
    buf = io.BytesIO()
    write_binary(run_batch(E1, IV, [0.0], cfg), buf)
    with pytest.raises(ValueError):
        batch_from_bytes(buf.getvalue()[:-3])

"""Axial grid and weighted 1D resolvent kernel tests."""

import numpy as np
import pytest

from threshres.axial import (
    AxialGrid,
    build_kernels,
    remainder_kernel_matrix,
    resolvent_kernel,
)
from threshres.errors import OutsideContinuationStrip, ThresholdSingularity


@pytest.fixture(scope="module")
def grid():
    return AxialGrid.build(delta=1.0, size=160)


def test_grid_invariants(grid):
    assert np.all(grid.weights > 0)
    assert np.all(np.diff(grid.nodes) > 0)
    assert grid.extent >= 10.0
    # quadrature sanity: integrates a gaussian to high accuracy
    val = np.sum(grid.weights * np.exp(-grid.nodes**2))
    assert val == pytest.approx(np.sqrt(np.pi), rel=1e-9)


def test_grid_rejects_small_extent():
    with pytest.raises(ValueError):
        AxialGrid.build(delta=1.0, extent=5.0)


def test_breakpoints_become_panel_edges():
    g = AxialGrid.build(delta=1.0, size=160, breakpoints=(1.0,))
    # indicator of [-1, 1] integrates exactly when 1.0 is a panel edge
    val = np.sum(g.weights * (np.abs(g.nodes) <= 1.0))
    assert val == pytest.approx(2.0, rel=1e-14)


def test_resolvent_kernel_values():
    assert resolvent_kernel(1j, 0.0, 0.0) == pytest.approx(0.5)
    assert resolvent_kernel(1.0, np.pi, 0.0) == pytest.approx(-0.5j)
    with pytest.raises(ThresholdSingularity):
        resolvent_kernel(0.0, 1.0, 0.0)
    # Im k > 0 implies decay in |x - x'|
    k = 0.3 + 0.2j
    v1 = abs(resolvent_kernel(k, 0.0, 1.0))
    v2 = abs(resolvent_kernel(k, 0.0, 5.0))
    assert v2 < v1


def test_splitting_identity(grid):
    ks = build_kernels(grid, 0.1 + 0.05j)
    assert ks.splitting_residual() < 1e-14


def test_rank_one_part(grid):
    ks = build_kernels(grid, 0.2j)
    assert np.linalg.matrix_rank(ks.t1_matrix, tol=1e-12) == 1


def test_remainder_analytic_at_zero(grid):
    r1 = remainder_kernel_matrix(grid, 0.0)
    assert np.all(np.isfinite(r1))
    # diagonal limit is 0 (at x = x'), off-diagonal -(d/2) weighted
    assert np.max(np.abs(np.diag(r1))) < 1e-14
    a = grid.weight_vector()
    d = grid.distance_matrix()
    assert np.allclose(r1, -0.5 * a[:, None] * d * a[None, :], atol=1e-14)


def test_remainder_series_matches_direct(grid):
    # series branch engages below |k| * diam < 1e-4; compare across the seam
    dmax = 2.0 * grid.extent
    k_lo = 0.9e-4 / dmax
    k_hi = 1.1e-4 / dmax
    r_lo = remainder_kernel_matrix(grid, k_lo)
    r_hi = remainder_kernel_matrix(grid, k_hi)
    # both must be close to the k -> 0 limit plus the linear term
    r0 = remainder_kernel_matrix(grid, 0.0)
    for k, r in ((k_lo, r_lo), (k_hi, r_hi)):
        scale = np.max(np.abs(r0))
        assert np.max(np.abs(r - r0)) < 2e-4 * scale


def test_outside_strip_raises(grid):
    with pytest.raises(OutsideContinuationStrip):
        build_kernels(grid, 0.5 - 1.5j)
    with pytest.raises(ThresholdSingularity):
        build_kernels(grid, 0.0)


def test_custom_weight_profile(grid):
    prof = lambda x: np.exp(-np.abs(x))
    ks = build_kernels(grid, 0.1j, weight_profile=prof, decay_rate=1.0)
    a = np.sqrt(grid.weights) * prof(grid.nodes)
    assert np.allclose(ks.t1, a)


def test_symmetry_not_hermitian(grid):
    ks = build_kernels(grid, 0.08 + 0.03j)
    assert np.max(np.abs(ks.N - ks.N.T)) < 1e-15
    assert np.max(np.abs(ks.N - ks.N.conj().T)) > 1e-6


def test_holomorphy_cauchy_riemann(grid):
    # finite-difference CR residual of N(k) inside the strip
    k0 = 0.05 - 0.3j  # Im k > -delta
    h = 1e-5
    dx = (build_kernels(grid, k0 + h).N - build_kernels(grid, k0 - h).N) / (2 * h)
    dy = (build_kernels(grid, k0 + 1j * h).N - build_kernels(grid, k0 - 1j * h).N) / (
        2j * h
    )
    scale = np.max(np.abs(dx))
    assert np.max(np.abs(dx - dy)) < 1e-6 * scale


def test_grid_convergence_of_weighted_moments():
    # doubling the node count leaves weighted moments stable at 1e-10
    g1 = AxialGrid.build(delta=1.0, size=96)
    g2 = AxialGrid.build(delta=1.0, size=192)
    m1 = np.sum(g1.weights * np.exp(-2.0 * np.abs(g1.nodes)))
    m2 = np.sum(g2.weights * np.exp(-2.0 * np.abs(g2.nodes)))
    assert m1 == pytest.approx(m2, abs=1e-10)
    k = 0.1 + 0.02j
    v1 = build_kernels(g1, k).t1
    v2 = build_kernels(g2, k).t1
    assert np.sum(v1 * v1) == pytest.approx(np.sum(v2 * v2), abs=1e-10)

"""Discretization of the 1D free resolvent along the field direction.

The weighted kernel  e^{-d<x>} * i e^{ik|x-x'|}/(2k) * e^{-d<x'>}  is
holomorphic in the strip Im k > -delta and splits at the threshold into a
rank-one 1/k part plus an analytic remainder whose kernel is the finite
difference quotient i (e^{ik|x-x'|} - 1) / (2k).

Quadrature is composite Gauss-Legendre on [-X, X] with panels clustered
geometrically toward the origin, where the axial profiles are largest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_legendre

from .errors import OutsideContinuationStrip, ThresholdSingularity

__all__ = [
    "AxialGrid",
    "AxialKernelSet",
    "resolvent_kernel",
    "build_kernels",
    "remainder_kernel_matrix",
]

# switch to the Taylor branch of (e^{ikd}-1)/(2k) below this |k|*diam
SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class AxialGrid:
    """Composite Gauss-Legendre nodes/weights on [-extent, extent]."""

    nodes: np.ndarray
    weights: np.ndarray
    delta: float
    extent: float

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.extent < 10.0 / self.delta:
            raise ValueError("extent must be at least 10/delta")

    @classmethod
    def build(cls, delta, size=192, extent=None, breakpoints=(), panel_order=8):
        """Grid with ~``size`` nodes; ``breakpoints`` force panel edges
        (e.g. at the support edge of a compactly supported profile)."""
        if extent is None:
            # e^{-2 delta X} < 1e-12
            extent = 14.0 / delta
        n_panels = max(4, size // (2 * panel_order))
        edges = extent / 2.0 ** np.arange(n_panels - 1, -1, -1)
        edges = np.concatenate([[0.0], edges])
        pos_break = sorted(b for b in breakpoints if 0.0 < b < extent)
        edges = np.unique(np.concatenate([edges, pos_break]))
        xg, wg = roots_legendre(panel_order)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        pos_nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        pos_weights = (half[:, None] * wg[None, :]).ravel()
        order = np.argsort(pos_nodes)
        pos_nodes, pos_weights = pos_nodes[order], pos_weights[order]
        nodes = np.concatenate([-pos_nodes[::-1], pos_nodes])
        weights = np.concatenate([pos_weights[::-1], pos_weights])
        return cls(nodes=nodes, weights=weights, delta=delta, extent=extent)

    @property
    def size(self):
        return self.nodes.size

    def weight_vector(self, profile: Optional[Callable] = None):
        """sqrt(w_i) * weight(x_i); default weight is e^{-delta <x>}."""
        if profile is None:
            w = np.exp(-self.delta * np.sqrt(1.0 + self.nodes**2))
        else:
            w = np.asarray(profile(self.nodes), dtype=float)
        return np.sqrt(self.weights) * w

    def distance_matrix(self):
        return np.abs(self.nodes[:, None] - self.nodes[None, :])

    def sign_matrix(self):
        return np.sign(self.nodes[:, None] - self.nodes[None, :])


def resolvent_kernel(k, x, xp):
    """Free 1D resolvent kernel i e^{ik|x - x'|} / (2k)."""
    if k == 0:
        raise ThresholdSingularity("resolvent kernel is singular at k = 0")
    d = np.abs(np.asarray(x) - np.asarray(xp))
    return 1j * np.exp(1j * k * d) / (2.0 * k)


def _remainder_core(k, d):
    """i (e^{ikd} - 1) / (2k), analytic across k = 0.

    For |k| * max(d) below SERIES_THRESHOLD the Taylor form
    -(d/2) * sum (ikd)^n / (n+1)!  avoids cancellation.
    """
    d = np.asarray(d, dtype=float)
    dmax = float(np.max(d)) if d.size else 0.0
    if abs(k) * dmax < SERIES_THRESHOLD:
        ikd = 1j * k * d
        acc = np.ones_like(ikd)
        term = np.ones_like(ikd)
        for n in range(1, 6):
            term = term * ikd
            acc = acc + term / math.factorial(n + 1)
        return -(d / 2.0) * acc
    return 1j * (np.exp(1j * k * d) - 1.0) / (2.0 * k)


def remainder_kernel_matrix(grid, k, weight_profile=None):
    """Weighted remainder matrix r1(k); finite at k = 0 with limit -d/2."""
    a = grid.weight_vector(weight_profile)
    d = grid.distance_matrix()
    return a[:, None] * _remainder_core(k, d) * a[None, :]


@dataclass(frozen=True)
class AxialKernelSet:
    """Weighted resolvent matrix with its exact threshold splitting.

    N(k) = (1/k) * (i/2) t1 t1^T + r1(k) holds entrywise; ``t1`` is the
    weighted rank-one vector (the i/2 factor is kept explicit in
    ``t1_matrix`` so the stored vector is real for real weights).
    """

    k: complex
    N: np.ndarray
    t1: np.ndarray
    r1: np.ndarray

    @property
    def t1_matrix(self):
        return 0.5j * np.outer(self.t1, self.t1)

    def splitting_residual(self):
        return float(
            np.max(np.abs(self.N - self.t1_matrix / self.k - self.r1))
        )


def build_kernels(grid, k, weight_profile=None, decay_rate=None):
    """Assemble N(k), t1, r1(k) on the grid.

    ``weight_profile`` overrides the default e^{-delta <x>} weight (the
    production assemblies pass |v|^{1/2} here); ``decay_rate`` is the
    weight's exponential rate used for the continuation-strip check and
    defaults to the grid's delta.
    """
    k = complex(k)
    rate = grid.delta if decay_rate is None else decay_rate
    if k.imag <= -rate:
        raise OutsideContinuationStrip(
            f"Im k = {k.imag} outside the strip Im k > {-rate}"
        )
    if k == 0:
        raise ThresholdSingularity("N(k) requires k != 0; r1 alone is analytic at 0")
    a = grid.weight_vector(weight_profile)
    d = grid.distance_matrix()
    N = a[:, None] * (1j * np.exp(1j * k * d) / (2.0 * k)) * a[None, :]
    r1 = a[:, None] * _remainder_core(k, d) * a[None, :]
    return AxialKernelSet(k=k, N=N, t1=a, r1=r1)

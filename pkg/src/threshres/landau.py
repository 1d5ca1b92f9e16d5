"""Lowest-Landau-band basis and projection kernel for a constant field.

The transverse operators factor through creation/annihilation operators
whose normalized eigenfunctions, in the symmetric gauge, are associated
Laguerre functions.  Levels are indexed by q >= 0 with transverse energy
2*b0*q and angular momentum m = l - q, where l is the angular index of
the level-0 seed the q-fold raising ladder was applied to.  Radial parts
here use a real phase convention; ladder phases (-i)^q drop out of every
inner product and eigenvalue this package computes.

All radial formulas work in the scaled variable t = b0 r^2 / 2.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln, roots_laguerre

from .errors import UnsupportedField

__all__ = [
    "LandauBasis",
    "ProjectionKernel",
    "build_basis",
    "projection_kernel",
    "projection_kernel_exact",
    "landau_dei",
    "laguerre_values",
]


def laguerre_values(q, alpha, t):
    """Generalized Laguerre polynomial L_q^(alpha)(t) by upward recurrence.

    Stable for the small level counts used here (q <= ~30).
    """
    t = np.asarray(t, dtype=float)
    if q == 0:
        return np.ones_like(t)
    prev = np.ones_like(t)
    cur = 1.0 + alpha - t
    for j in range(1, q):
        prev, cur = cur, ((2 * j + 1 + alpha - t) * cur - (j + alpha) * prev) / (j + 1)
    return cur


def _radial_weightless(q, m, t, b0):
    """Radial part with the e^{-t/2} factor removed (for Laguerre quadrature).

    Returns rho_{q,m}(r) * e^{t/2}; normalized so that the true radial
    function has unit L^2(r dr) norm.  For m < 0 the reflection
    L_q^{(-j)}(t) = (-t)^j (q-j)!/q! L_{q-j}^{(j)}(t) is applied, which
    requires q + m >= 0.
    """
    t = np.asarray(t, dtype=float)
    if m < 0:
        j = -m
        if q - j < 0:
            raise ValueError(f"level q={q} carries no angular momentum m={m}")
        return (-1.0) ** j * _radial_weightless(q - j, j, t, b0)
    logpref = 0.5 * (math.log(b0) + gammaln(q + 1) - gammaln(q + m + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.where(t > 0, np.log(np.maximum(t, 1e-300)), 0.0)
        amp = np.exp(logpref + 0.5 * m * logt)
    if m > 0:
        amp = np.where(t > 0, amp, 0.0)
    return amp * laguerre_values(q, m, t)


@dataclass(frozen=True)
class LandauBasis:
    """Orthonormal Landau functions e_{q,l} with a shared radial quadrature.

    ``t_nodes``/``t_weights`` form a Gauss-Laguerre rule in t = b0 r^2/2,
    so for radial integrands one has
    int f(r) r dr = (1/b0) * sum_i w_i * [f e^{t}] (t_i).
    """

    b0: float
    Q_max: int
    L_max: int
    t_nodes: np.ndarray
    t_weights: np.ndarray

    @property
    def r_nodes(self):
        return np.sqrt(2.0 * self.t_nodes / self.b0)

    def radial_weightless(self, q, m, t=None):
        if t is None:
            t = self.t_nodes
        return _radial_weightless(q, m, t, self.b0)

    def radial(self, q, m, r):
        """Radial part rho_{q,m}(r), unit norm in L^2(r dr)."""
        t = 0.5 * self.b0 * np.asarray(r, dtype=float) ** 2
        return _radial_weightless(q, m, t, self.b0) * np.exp(-0.5 * t)

    def evaluate(self, q, l, z):
        """e_{q,l} at complex points z = x1 + i x2 (angular momentum l - q)."""
        z = np.asarray(z, dtype=complex)
        m = l - q
        r = np.abs(z)
        theta = np.angle(z)
        return (
            self.radial(q, m, r)
            * np.exp(1j * m * theta)
            / math.sqrt(2.0 * math.pi)
        )

    def radial_overlap(self, U, levels, m):
        """Matrix <rho_{q,m}, U rho_{q',m}> over the given levels (radial U).

        Uses the basis quadrature; exact for polynomial-in-t integrands up
        to the rule's degree.
        """
        t = self.t_nodes
        r = self.r_nodes
        vals = np.array([self.radial_weightless(q, m, t) for q in levels])
        u = np.asarray(U(r), dtype=float)
        return (vals * (self.t_weights * u)) @ vals.T / self.b0

    def angular_momenta(self):
        """Conserved angular momenta m = l - q present in the truncation."""
        return range(-(self.Q_max - 1), self.L_max)

    def cache_payload(self):
        return {
            "b0": self.b0,
            "Q_max": self.Q_max,
            "L_max": self.L_max,
            "t_nodes": self.t_nodes,
            "t_weights": self.t_weights,
        }


def build_basis(model, Q_max=6, L_max=64, n_radial=None, cache_dir=None):
    """Construct the Landau basis for a constant-field model.

    Raises :class:`UnsupportedField` when the model carries a field
    perturbation; the numeric pipeline is validated for phi_tilde = 0 only.
    ``n_radial`` defaults to a rule exact for the largest products the
    truncation can produce.
    """
    if not model.is_constant:
        raise UnsupportedField(
            "basis construction requires a constant field (phi_tilde = 0)"
        )
    if Q_max < 1 or L_max < 1:
        raise ValueError("Q_max and L_max must be at least 1")
    if n_radial is None:
        n_radial = max(160, L_max + 4 * Q_max + 32)

    if cache_dir is not None:
        cached = _load_cached(model.b0, Q_max, L_max, n_radial, cache_dir)
        if cached is not None:
            return cached

    nodes, weights = roots_laguerre(n_radial)
    basis = LandauBasis(
        b0=model.b0,
        Q_max=Q_max,
        L_max=L_max,
        t_nodes=nodes,
        t_weights=weights,
    )
    if cache_dir is not None:
        _store_cached(basis, n_radial, cache_dir)
    return basis


def _cache_path(b0, Q_max, L_max, n_radial, cache_dir):
    root = Path(cache_dir or os.environ.get("THRESHRES_CACHE", ""))
    key = f"basis_b{b0:.12g}_Q{Q_max}_L{L_max}_N{n_radial}.npz"
    return root / key


def _load_cached(b0, Q_max, L_max, n_radial, cache_dir):
    path = _cache_path(b0, Q_max, L_max, n_radial, cache_dir)
    if not path.is_file():
        return None
    data = np.load(path)
    return LandauBasis(
        b0=float(data["b0"]),
        Q_max=int(data["Q_max"]),
        L_max=int(data["L_max"]),
        t_nodes=data["t_nodes"],
        t_weights=data["t_weights"],
    )


def _store_cached(basis, n_radial, cache_dir):
    path = _cache_path(basis.b0, basis.Q_max, basis.L_max, n_radial, cache_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, **basis.cache_payload())
    os.replace(tmp, path)


@dataclass(frozen=True)
class ProjectionKernel:
    """Integral kernel of the lowest-band projection, truncated at L_max."""

    b0: float
    L_max: int

    def __call__(self, z, w):
        """Kernel P(z, w) at complex transverse points, truncated sum over l."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        arg = 0.5 * self.b0 * z * np.conj(w)
        # partial sum of exp(arg) up to l = L_max - 1, by term recursion
        term = np.ones_like(arg)
        total = np.ones_like(arg)
        for l in range(1, self.L_max):
            term = term * arg / l
            total = total + term
        gauss = np.exp(-0.25 * self.b0 * (np.abs(z) ** 2 + np.abs(w) ** 2))
        return (self.b0 / (2.0 * math.pi)) * gauss * total

    def diagonal(self, z):
        return np.real(self(z, z))


def projection_kernel(basis):
    """Level-0 projection kernel P(x,y) = sum_l e_{0,l}(x) conj(e_{0,l}(y))."""
    return ProjectionKernel(b0=basis.b0, L_max=basis.L_max)


def projection_kernel_exact(b0, z, w):
    """Closed-form constant-field projection kernel (L_max -> infinity)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    expo = 0.5 * b0 * z * np.conj(w) - 0.25 * b0 * (
        np.abs(z) ** 2 + np.abs(w) ** 2
    )
    return (b0 / (2.0 * math.pi)) * np.exp(expo)


def landau_dei(model, t):
    """Integrated density of states of the transverse operator at energy t.

    Constant field: (b0/2pi) * #levels strictly below t.
    """
    if not model.is_constant:
        raise UnsupportedField("the explicit DEI formula requires a constant field")
    if t <= 0:
        return 0.0
    count = math.ceil(t / (2.0 * model.b0))
    return model.b0 / (2.0 * math.pi) * count

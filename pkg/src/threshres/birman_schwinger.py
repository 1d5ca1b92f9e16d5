"""Finite-dimensional Birman-Schwinger families near the spectral thresholds.

For separable radial potentials the sandwiched resolvent commutes with
rotations, so everything decomposes over the conserved transverse angular
momentum m.  Within a sector the determinant of I + T(k) is evaluated on
the reduced space (transverse bands) x (axial nodes), obtained from the
cyclic identity det(I + AB) = det(I + BA); there the potential enters as
the band-coupling matrix M x <rho_q, U rho_q'> and the free resolvent as
explicit 1D kernels per band.  Constant field makes the two spin channels
share radial functions: the spin-up transverse operator is the spin-down
one shifted by 2*b0.

Each sector family carries the exact threshold splitting

    T(k) = (i/k) * Bsing + A(k),

where Bsing is the rank-one 1/k coefficient (its trace is sign * beta_m,
beta_m the sector eigenvalue of B) and A(k) is analytic across k = 0,
assembled from difference-quotient remainder kernels.

The Hermitian matrix ``B`` of an assembly is stored on the contracted
lowest-band side, where the identity K K* = (selector) p W p makes its
nonzero spectrum exactly half the spectrum of the p W p Galerkin matrix
computed by :mod:`threshres.toeplitz` with the same quadrature.

Dirac assemblies support matrix profiles coupling the spin components
(1,3) only; those are the components entering the threshold theory, the
remaining ones touch the analytic background alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import toeplitz
from .axial import AxialGrid, _remainder_core
from .errors import (
    FlavorError,
    MapPole,
    OutsideDisk,
    SingularAtNode,
    ThresholdSingularity,
    TruncationError,
)
from .model import axial_abs_integral, matrix_abs

__all__ = [
    "sqrt_upper",
    "SpectralMap",
    "spectral_map",
    "Band",
    "SectorAssembly",
    "BSAssembly",
    "build_assembly",
    "sandwich_operator",
    "assemble_B",
    "assemble_A",
    "assemble_T",
    "qpart_tail_estimate",
    "bs_identity_residual",
]

FLAVORS = ("pauli", "dirac_plus", "dirac_minus")

def sqrt_upper(zeta):
    """Square root mapping C \\ [0, inf) into the closed upper half-plane."""
    s = complex(np.sqrt(complex(zeta)))
    if s.imag < 0 or (s.imag == 0 and s.real < 0):
        s = -s
    return s


@dataclass(frozen=True)
class SpectralMap:
    """Change of variables between the wavenumber k and the energy z."""

    flavor: str
    m: float = 0.0
    radius: float = math.inf

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise FlavorError(f"unknown flavor {self.flavor!r}")
        if self.flavor != "pauli" and self.m <= 0:
            raise ValueError("Dirac maps require a positive mass")

    def z(self, k):
        k = complex(k)
        if self.flavor == "pauli":
            return k * k
        if abs(1.0 - k * k) == 0.0:
            raise MapPole("Dirac map evaluated at k^2 = 1")
        val = self.m * (1.0 + k * k) / (1.0 - k * k)
        return val if self.flavor == "dirac_plus" else -val

    def k(self, z):
        """Inverse map, branch with k in the closed upper half-plane."""
        z = complex(z)
        if self.flavor == "pauli":
            return sqrt_upper(z)
        if self.flavor == "dirac_plus":
            if z == -self.m:
                raise MapPole("inverse Dirac map has a pole at z = -m")
            ratio = (z - self.m) / (z + self.m)
        else:
            if z == self.m:
                raise MapPole("inverse Dirac map (-m) has a pole at z = +m")
            ratio = (z + self.m) / (z - self.m)
        return sqrt_upper(ratio)

    def dz_dk(self, k):
        k = complex(k)
        if self.flavor == "pauli":
            return 2.0 * k
        val = 4.0 * self.m * k / (1.0 - k * k) ** 2
        return val if self.flavor == "dirac_plus" else -val

    def w(self, k):
        """Effective axial wavenumber: k for Pauli, 2mk/(1-k^2) for Dirac."""
        k = complex(k)
        if self.flavor == "pauli":
            return k
        return 2.0 * self.m * k / (1.0 - k * k)


def spectral_map(flavor, m=0.0, radius=math.inf):
    """Factory for :class:`SpectralMap` (flavor in pauli/dirac_plus/dirac_minus)."""
    return SpectralMap(flavor=flavor, m=m, radius=radius)


@dataclass(frozen=True)
class Band:
    """One reduced transverse channel: level q, block component c, axial shift."""

    q: int
    comp: int
    shift: float


def _dirac_block(M):
    """2x2 restriction of a 4x4 profile to spin components (1,3) (0-based 0,2)."""
    M = np.asarray(M, dtype=complex)
    drop = [1, 3]
    if np.max(np.abs(M[drop, :])) > 0 or np.max(np.abs(M[:, drop])) > 0:
        raise FlavorError(
            "Dirac assembly supports matrix profiles on spin components (1,3) only"
        )
    return M[np.ix_([0, 2], [0, 2])]


def _singular_component(flavor):
    """Block component whose level-0 kernel carries the 1/k singularity."""
    return 1 if flavor == "dirac_minus" else 0


class SectorAssembly:
    """Reduced Birman-Schwinger family at fixed angular momentum.

    Matrices live on (bands) x (axial nodes); all builders return the
    coupling-free family, i.e. T for V itself -- multiply by e to get the
    family of H0 + eV.  Band components are block labels: Pauli spin
    (0 = down, 1 = up), Dirac (0, 1) = paper spin components (1, 3).
    """

    def __init__(self, flavor, m, levels, comps, M_block, U_overlap, grid,
                 v_profile, b0, mass, radius):
        self.flavor = flavor
        self.m = m
        self.levels = list(levels)
        self.comps = list(comps)
        self.M = np.asarray(M_block, dtype=complex)
        self.U = np.asarray(U_overlap, dtype=float)
        self.grid = grid
        self.b0 = b0
        self.mass = mass
        self.radius = radius
        self.map = SpectralMap(flavor=flavor, m=mass if flavor != "pauli" else 0.0)

        x = grid.nodes
        v = np.asarray(v_profile(x), dtype=float)
        self.a = np.sqrt(np.abs(v) * grid.weights)
        self.sigma = np.sign(v)
        self.D = grid.distance_matrix()
        self.SGN = grid.sign_matrix()
        self.n_ax = x.size

        self.bands = [
            Band(q=q, comp=c, shift=self._band_shift(q, c))
            for c in self.comps
            for q in self.levels
        ]
        self.n_b = len(self.bands)
        self._level_pos = {q: i for i, q in enumerate(self.levels)}
        self.singular_col = self._find_singular_col()

    # -- band bookkeeping -------------------------------------------------

    def _band_shift(self, q, c):
        if self.flavor == "pauli":
            return 2.0 * self.b0 * (q + (1 if c == 1 else 0))
        return 2.0 * self.b0 * q

    def _find_singular_col(self):
        want = _singular_component(self.flavor)
        for j, band in enumerate(self.bands):
            if band.q == 0 and band.comp == want:
                return j
        return None

    def row_weights(self, j, cpp):
        """Row-band weights of a column-j kernel piece mixing block component cpp."""
        qj = self._level_pos[self.bands[j].q]
        return np.array(
            [
                self.M[band.comp, cpp] * self.U[self._level_pos[band.q], qj]
                for band in self.bands
            ],
            dtype=complex,
        )

    # -- kernels ----------------------------------------------------------

    def _ctx(self, k):
        k = complex(k)
        return k, self.map.z(k), self.map.w(k)

    def _column_pieces(self, j, k, remainder=False):
        """Kernel pieces of column block j at wavenumber k.

        Returns a list of (cpp, matrix) with cpp the block component the
        rows mix against; with ``remainder=True`` the singular column's
        1/k part is replaced by its analytic difference quotient.
        """
        band = self.bands[j]
        k, z, w = self._ctx(k)
        D = self.D
        if self.flavor == "pauli":
            if j == self.singular_col:
                if remainder:
                    mat = _remainder_core(k, D)
                else:
                    if k == 0:
                        raise ThresholdSingularity("T(k) undefined at k = 0")
                    mat = 1j * np.exp(1j * k * D) / (2.0 * k)
                return [(band.comp, mat)]
            kappa = sqrt_upper(k * k - band.shift)
            return [(band.comp, 1j * np.exp(1j * kappa * D) / (2.0 * kappa))]

        # Dirac flavors: columns carry a 2-component kernel pair
        if band.q == 0:
            phase = np.exp(1j * w * D)
            cross = 0.5j * self.SGN * phase
            if self.flavor == "dirac_plus":
                if band.comp == 0:
                    if remainder:
                        diag0 = (z + self.mass) * _remainder_core(w, D)
                    else:
                        if k == 0:
                            raise ThresholdSingularity("T(k) undefined at k = 0")
                        diag0 = 1j * phase / (2.0 * k)
                    return [(0, diag0), (1, cross)]
                return [(0, cross), (1, 0.5j * k * phase)]
            if band.comp == 0:
                return [(0, -0.5j * k * phase), (1, cross)]
            if remainder:
                diag1 = (z - self.mass) * _remainder_core(w, D)
            else:
                if k == 0:
                    raise ThresholdSingularity("T(k) undefined at k = 0")
                diag1 = -1j * phase / (2.0 * k)
            return [(0, cross), (1, diag1)]

        kappa = sqrt_upper(w * w - 2.0 * self.b0 * band.q)
        phase = np.exp(1j * kappa * D)
        res = 1j * phase / (2.0 * kappa)
        cross = 0.5j * self.SGN * phase
        if band.comp == 0:
            return [(0, (z + self.mass) * res), (1, cross)]
        return [(0, cross), (1, (z - self.mass) * res)]

    # -- dense builders ---------------------------------------------------

    def _assemble(self, k, remainder):
        n = self.n_b * self.n_ax
        out = np.zeros((n, n), dtype=complex)
        row = self.sigma * self.a
        col = self.a
        for j in range(self.n_b):
            sl_j = slice(j * self.n_ax, (j + 1) * self.n_ax)
            for cpp, mat in self._column_pieces(j, k, remainder=remainder):
                weights = self.row_weights(j, cpp)
                if not np.any(weights):
                    continue
                weighted = row[:, None] * mat * col[None, :]
                for i in range(self.n_b):
                    if weights[i] == 0:
                        continue
                    sl_i = slice(i * self.n_ax, (i + 1) * self.n_ax)
                    out[sl_i, sl_j] += weights[i] * weighted
        return out

    def T_dense(self, k):
        """Reduced T(k) for unit coupling (dense)."""
        return self._assemble(k, remainder=False)

    def A_dense(self, k):
        """Analytic part A(k) = T(k) - (i/k) Bsing (dense; defined at k = 0)."""
        return self._assemble(k, remainder=True)

    def B_singular(self):
        """Matrix Bsing with T(k) = (i/k) Bsing + A(k) (rank <= 1)."""
        n = self.n_b * self.n_ax
        out = np.zeros((n, n), dtype=complex)
        j = self.singular_col
        if j is None:
            return out
        cpp = _singular_component(self.flavor)
        sign = -1.0 if self.flavor == "dirac_minus" else 1.0
        weights = self.row_weights(j, cpp)
        block = 0.5 * sign * np.outer(self.sigma * self.a, self.a)
        sl_j = slice(j * self.n_ax, (j + 1) * self.n_ax)
        for i in range(self.n_b):
            if weights[i] == 0:
                continue
            sl_i = slice(i * self.n_ax, (i + 1) * self.n_ax)
            out[sl_i, sl_j] = weights[i] * block
        return out

    def singular_trace(self):
        """Trace of Bsing; equals (sign of the selected V entry) * beta_m."""
        j = self.singular_col
        if j is None:
            return 0.0 + 0.0j
        cpp = _singular_component(self.flavor)
        sign = -1.0 if self.flavor == "dirac_minus" else 1.0
        w = self.row_weights(j, cpp)[j]
        return complex(0.5 * sign * w * np.sum(self.sigma * self.a * self.a))

    def logdet_dense(self, k, coupling):
        mat = np.eye(self.n_b * self.n_ax, dtype=complex) + coupling * self.T_dense(k)
        sign, logabs = np.linalg.slogdet(mat)
        if sign == 0:
            raise SingularAtNode(f"determinant vanished exactly at k={k}")
        return complex(logabs, np.angle(sign))

    def logdet(self, k, coupling):
        """log det(I + coupling * T(k)) with principal imaginary part."""
        return self.logdet_dense(k, coupling)


@dataclass
class BSAssembly:
    """Assembled Birman-Schwinger data for one flavor and potential."""

    flavor: str
    coupling: float
    J: float
    b0: float
    mass: float
    radius: float
    B: np.ndarray
    beta: np.ndarray
    pwp: np.ndarray
    sectors: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def sector_labels(self):
        return sorted(self.sectors.keys())

    def sector(self, m):
        return self.sectors[m]

    def sector_logdet(self, m, coupling=None):
        """Callable k -> log det(I + e T_m(k))."""
        sec = self.sectors[m]
        e = self.coupling if coupling is None else coupling
        return lambda k: sec.logdet(k, e)

    def logdet_total(self, k, coupling=None):
        e = self.coupling if coupling is None else coupling
        return sum(sec.logdet(k, e) for sec in self.sectors.values())


def _selector_index(flavor):
    return {"pauli": 0, "dirac_plus": 0, "dirac_minus": 2}[flavor]


def assemble_B(model, spec, basis, flavor="pauli"):
    """Hermitian PSD matrix B on the contracted lowest-band side.

    Returns (B, pwp_matrix); the nonzero spectrum of B is exactly half the
    spectrum of the pWp Galerkin matrix, both built with the same
    quadrature (the counting identity n_+(s, B) = n_+(2s, pWp)).
    """
    lam = toeplitz.radial_eigenvalues(spec.transverse, model.b0, basis.L_max)
    vint = axial_abs_integral(spec.axial)
    sel = _selector_index(flavor)
    mabs = float(np.real(matrix_abs(spec.matrix_profile)[sel, sel]))
    pwp = mabs * vint * lam
    return np.diag(0.5 * pwp), np.diag(pwp)


def build_assembly(model, spec, basis, grid=None, flavor=None, radii=None,
                   Q_bs=3, m_min=None, grid_size=192):
    """Build the per-sector reduced families plus the contracted B matrix.

    ``Q_bs`` is the number of transverse levels kept per spin component in
    the analytic background; the spectral counting data (B, pWp) are exact
    at any Q_bs.  Sectors run over angular momenta m in [m_min, L_max).
    """
    if flavor is None:
        flavor = "pauli" if spec.n == 2 else "dirac_plus"
    if flavor not in FLAVORS:
        raise FlavorError(f"unknown flavor {flavor!r}")
    if (flavor == "pauli") != (spec.n == 2):
        raise FlavorError(
            f"flavor {flavor} requires n = {2 if flavor == 'pauli' else 4}"
        )

    if grid is None:
        hint = spec.axial.support_hint
        grid = AxialGrid.build(
            spec.delta, size=grid_size, breakpoints=(hint,) if hint else ()
        )

    mass = 0.0
    radius = math.inf
    if flavor != "pauli":
        mass = radii.m if radii is not None else 1.0
    if radii is not None:
        radius = radii.epsilon if flavor == "pauli" else radii.eta

    if flavor == "pauli":
        M_block = np.asarray(spec.matrix_profile, dtype=complex)
    else:
        M_block = _dirac_block(spec.matrix_profile)
    comps = [
        c
        for c in range(M_block.shape[0])
        if np.max(np.abs(M_block[c, :])) > 0 or np.max(np.abs(M_block[:, c])) > 0
    ] or [0]

    B, pwp_mat = assemble_B(model, spec, basis, flavor=flavor)
    beta = np.real(np.diag(B)).copy()
    pwp = np.real(np.diag(pwp_mat)).copy()

    sel = _selector_index(flavor)
    Msel = float(np.real(spec.matrix_profile[sel, sel]))
    J = float(np.sign(spec.coupling * Msel)) if Msel != 0 else 0.0

    if m_min is None:
        m_min = max(-2, -(Q_bs - 1))
    sectors = {}
    for m in range(m_min, basis.L_max):
        levels = list(range(max(0, -m), max(0, -m) + Q_bs))
        sectors[m] = SectorAssembly(
            flavor=flavor,
            m=m,
            levels=levels,
            comps=comps,
            M_block=M_block,
            U_overlap=basis.radial_overlap(spec.transverse, levels, m),
            grid=grid,
            v_profile=spec.axial,
            b0=model.b0,
            mass=mass,
            radius=radius,
        )

    return BSAssembly(
        flavor=flavor,
        coupling=spec.coupling,
        J=J,
        b0=model.b0,
        mass=mass,
        radius=radius,
        B=B,
        beta=beta,
        pwp=pwp,
        sectors=sectors,
        meta={
            "L_max": basis.L_max,
            "Q_bs": Q_bs,
            "axial_nodes": grid.size,
            "axial_integral": axial_abs_integral(spec.axial),
            "selector_weight": float(
                np.real(matrix_abs(spec.matrix_profile)[sel, sel])
            ),
        },
    )


# -- spec-level operation wrappers ----------------------------------------


def _hermitian_sqrt(M):
    w, V = np.linalg.eigh(M)
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.conj().T


def sandwich_operator(spec, basis, grid, component="plus", L_rows=None,
                      n_theta=48):
    """Materialized sandwich K on an explicit (2D grid x axial x spin) domain.

    Rows are lowest-band angular indices l < L_rows; columns run over the
    tensor grid (radial node, angle node, axial node, spin).  Used for
    structural checks (angular block-diagonality, selector annihilation);
    the production assemblies keep K factored.
    """
    if component in ("plus", "pauli", "dirac_plus"):
        sel = 0
        if component == "dirac_plus" and spec.n != 4:
            raise FlavorError("dirac_plus sandwich requires n = 4")
    elif component == "dirac_minus":
        sel = 2
        if spec.n != 4:
            raise FlavorError("dirac_minus sandwich requires n = 4")
    else:
        raise FlavorError(f"unknown component {component!r}")

    if L_rows is None:
        L_rows = min(basis.L_max, 8)
    Mh = _hermitian_sqrt(matrix_abs(spec.matrix_profile))

    # 2D quadrature in (t, theta); the Laguerre weight e^{-t} of the rule
    # cancels against the e^{-t/2} factors of the two basis evaluations,
    # so weightless radial values enter with plain sqrt(w/b0) factors.
    r = basis.r_nodes
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    wtheta = 2.0 * math.pi / n_theta
    sq_rad = np.sqrt(basis.t_weights / basis.b0)
    Uhalf = np.sqrt(np.abs(spec.transverse(r)))

    vhalf_sqw = np.sqrt(np.abs(spec.axial(grid.nodes)) * grid.weights)

    rows = []
    for l in range(L_rows):
        rho = basis.radial_weightless(0, l, basis.t_nodes)
        radial_part = rho * sq_rad * Uhalf
        angular_part = np.exp(-1j * l * theta) * math.sqrt(
            wtheta / (2.0 * math.pi)
        )
        row2d = np.outer(radial_part, angular_part).ravel()
        rows.append(
            np.einsum("g,x,s->gxs", row2d, vhalf_sqw, Mh[sel, :]).ravel()
        )
    return np.array(rows)


def assemble_A(assembly, m, k, enforce_disk=True, tail_tolerance=None):
    """Analytic part A(k) of the sector-m family (dense matrix)."""
    sec = assembly.sector(m)
    if enforce_disk and abs(k) >= assembly.radius:
        raise OutsideDisk(f"|k| = {abs(k)} outside the disk radius {assembly.radius}")
    if tail_tolerance is not None:
        est = qpart_tail_estimate(assembly, m)
        if est > tail_tolerance:
            raise TruncationError(
                f"Q-part tail estimate {est:.2e} exceeds {tail_tolerance:.1e}; "
                "raise Q_bs"
            )
    return sec.A_dense(k)


def assemble_T(assembly, m, k, coupling=None, enforce_disk=True):
    """Reduced T(k) of sector m scaled by the coupling; exact splitting.

    T_e(k) = e * ((i/k) Bsing + A(k)); raises at k = 0.
    """
    if k == 0:
        raise ThresholdSingularity("T(k) undefined at the threshold k = 0")
    sec = assembly.sector(m)
    if enforce_disk and abs(k) >= assembly.radius:
        raise OutsideDisk(f"|k| = {abs(k)} outside the disk radius {assembly.radius}")
    e = assembly.coupling if coupling is None else coupling
    return e * ((1j / k) * sec.B_singular() + sec.A_dense(k))


def qpart_tail_estimate(assembly, m):
    """Crude size estimate of the first omitted transverse level's kernel."""
    sec = assembly.sector(m)
    q_next = max(sec.levels) + 1
    U = np.abs(sec.U)
    decay = U[0, -1] / max(U[0, 0], 1e-300) if U.shape[0] >= 2 else 1.0
    lam_next = 2.0 * sec.b0 * q_next
    return float(np.max(U) * decay / (2.0 * math.sqrt(lam_next)))


# -- validation representation (direct discretization) ---------------------


def _blockdiag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    at = 0
    for b in blocks:
        s = b.shape[0]
        out[at : at + s, at : at + s] = b
        at += s
    return out


def _hermite_phi(points, n_modes):
    """Weightless Hermite functions phi_n = psi_n e^{x^2/2} at given points."""
    points = np.asarray(points, dtype=float)
    out = np.empty((points.size, n_modes))
    out[:, 0] = math.pi ** (-0.25)
    if n_modes > 1:
        out[:, 1] = math.sqrt(2.0) * points * out[:, 0]
    for n in range(1, n_modes - 1):
        out[:, n + 1] = (
            points * math.sqrt(2.0 / (n + 1)) * out[:, n]
            - math.sqrt(n / (n + 1.0)) * out[:, n - 1]
        )
    return out


def _kinetic_hermite(n_modes, scale):
    """Exact matrix of -d^2/dx^2 in the scaled Hermite-function basis."""
    n = np.arange(n_modes)
    P2 = np.diag(n + 0.5).astype(float)
    for j in range(n_modes - 2):
        val = -0.5 * math.sqrt((j + 1.0) * (j + 2.0))
        P2[j, j + 2] = P2[j + 2, j] = val
    return P2 / (scale * scale)


def _resolvent_hermite(kappa, n_modes, scale, phi_gh, gh_w, sigma, t_nodes, t_weights):
    """Matrix elements <psi_i, R psi_j> of the analytic 1D resolvent.

    In sum/difference coordinates the kernel separates from the Hermite
    cross-correlation F_ij(t), which Gauss-Hermite integrates exactly;
    the remaining 1D t-integral has its kink at t = 0 on a panel edge.
    """
    kern = 1j * np.exp(1j * kappa * scale * math.sqrt(2.0) * t_nodes) / (2.0 * kappa)
    out = np.zeros((n_modes, n_modes), dtype=complex)
    for t, wt, kv in zip(t_nodes, t_weights, kern):
        tau = t / math.sqrt(2.0)
        Phi_p = _hermite_phi(sigma + tau, n_modes)
        Phi_m = _hermite_phi(sigma - tau, n_modes)
        F = math.sqrt(2.0) * math.exp(-0.5 * t * t) * (
            Phi_p.T @ (gh_w[:, None] * Phi_m)
        )
        out += wt * kv * (F + F.T)
    return scale * out


def bs_identity_residual(model, spec, basis, z=0.25 + 1.0j, m_sector=0,
                         Q_bs=3, n_modes=144, basis_scale=2.5, coupling=None,
                         n_t_panels=28, t_extent=9.0, window=60):
    """Residual of (I + T0)(I - Tfull) = I against a direct discretization.

    Both operators live on the same spectral tensor grid (transverse
    bands) x (scaled Hermite modes along the field).  T0 is built from the
    production analytic resolvent kernels; Tfull uses the resolvent of the
    directly discretized perturbed operator, whose axial kinetic part is
    the exact matrix of -d^2/dx^2 in the same basis.  Pauli flavor; the
    axial profile must be nonnegative (catalog profiles are).

    The top modes of any finite basis are discretization boundary, where
    two discretizations differ by construction (the kinetic matrix couples
    the last modes to truncated ones), so the operator norm of the
    residual is evaluated on the resolved window of ``window`` modes per
    band; the remaining modes act as padding.
    """
    if spec.n != 2:
        raise FlavorError("identity residual implemented for the Pauli flavor")
    e = spec.coupling if coupling is None else coupling

    m = m_sector
    levels = list(range(max(0, -m), max(0, -m) + Q_bs))
    comps = [0, 1]
    M = np.asarray(spec.matrix_profile, dtype=complex)
    U_overlap = basis.radial_overlap(spec.transverse, levels, m)

    nb = len(comps) * len(levels)
    C = np.zeros((nb, nb), dtype=complex)
    shifts = np.zeros(nb)
    for ic, c in enumerate(comps):
        for iq, q in enumerate(levels):
            b = ic * len(levels) + iq
            shifts[b] = 2.0 * model.b0 * (q + (1 if c == 1 else 0))
            for jc, cp in enumerate(comps):
                for jq in range(len(levels)):
                    C[b, jc * len(levels) + jq] = M[c, cp] * U_overlap[iq, jq]

    from scipy.special import roots_hermite, roots_legendre

    n_gh = n_modes + 48
    sigma, gh_w = roots_hermite(n_gh)
    phi_gh = _hermite_phi(sigma, n_modes)

    # axial |v|^{1/2} matrix in the scaled basis; V-matrix := (Vh)^2 so the
    # square-root relation the identity needs holds exactly in truncation
    vvals = np.asarray(spec.axial(basis_scale * sigma), dtype=float)
    if np.any(vvals < 0):
        raise ValueError("identity validator requires a nonnegative axial profile")
    Vh_ax = phi_gh.T @ (gh_w[:, None] * np.sqrt(vvals)[:, None] * phi_gh)

    wc, Vc = np.linalg.eigh(C)
    abs_half_C = (Vc * np.sqrt(np.abs(wc))) @ Vc.conj().T
    sign_C = (Vc * np.sign(wc)) @ Vc.conj().T
    Vhalf = np.kron(abs_half_C, Vh_ax)
    Jmat = np.kron(sign_C, np.eye(n_modes))
    Vfull = np.kron(C, Vh_ax @ Vh_ax)

    # t-quadrature for the kernel integrals; the kink sits on the t = 0
    # edge, and uniform panels resolve the O(1/sqrt(n)) oscillation of the
    # high-order Hermite correlations
    edges = np.linspace(0.0, t_extent, n_t_panels + 1)
    xg, wg = roots_legendre(16)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t_nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    t_weights = (half[:, None] * wg[None, :]).ravel()

    R0 = _blockdiag([
        _resolvent_hermite(sqrt_upper(z - shifts[b]), n_modes, basis_scale,
                           phi_gh, gh_w, sigma, t_nodes, t_weights)
        for b in range(nb)
    ])
    T0 = e * (Jmat @ Vhalf @ R0 @ Vhalf)

    P2 = _kinetic_hermite(n_modes, basis_scale)
    H = _blockdiag([P2 + shifts[b] * np.eye(n_modes) for b in range(nb)])
    H = H + e * Vfull
    R = np.linalg.inv(H - z * np.eye(nb * n_modes))
    Tfull = e * (Jmat @ Vhalf @ R @ Vhalf)

    n = nb * n_modes
    lhs = (np.eye(n) + T0) @ (np.eye(n) - Tfull) - np.eye(n)
    if window is None or window >= n_modes:
        return float(np.linalg.norm(lhs, ord=2))
    keep = np.concatenate(
        [b * n_modes + np.arange(window) for b in range(nb)]
    )
    return float(np.linalg.norm(lhs[np.ix_(keep, keep)], ord=2))

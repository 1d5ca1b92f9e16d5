"""Toeplitz compressions pUp, their counting functions and comparator laws.

For a radial symbol the lowest-band compression is diagonal in the
angular index with eigenvalues

    lambda_l = (1/l!) * int_0^inf t^l e^{-t} U(sqrt(2t/b0)) dt,

which every routine here ultimately evaluates.  Three comparator laws
(power, quasi-exponential, compact support) describe the small-eigenvalue
asymptotics and are fitted against sampled counting functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaln, roots_genlaguerre, roots_legendre

from .errors import (
    FitRangeError,
    IntegrationFailure,
    OutOfAsymptoticRange,
    TruncationError,
)
from .model import TransversePotential

__all__ = [
    "ToeplitzMatrix",
    "CountingCurve",
    "assemble",
    "radial_eigenvalues",
    "counting",
    "comparator_power",
    "comparator_quasi_exponential",
    "comparator_compact",
    "schatten_check",
    "fit_counting_law",
    "FitReport",
    "SchattenReport",
]


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Galerkin matrix of pUp on the level-0 angular basis."""

    matrix: np.ndarray
    radial: bool
    b0: float
    sup_u: float = math.inf

    @cached_property
    def eigenvalues(self):
        """Eigenvalues sorted descending (real; the matrix is Hermitian)."""
        if self.radial:
            vals = np.real(np.diag(self.matrix)).copy()
        else:
            vals = np.linalg.eigvalsh(self.matrix)
        return np.sort(vals)[::-1]

    @property
    def size(self):
        return self.matrix.shape[0]


def _eigenvalue_logspace(log_u_of_t, l, n_probe=4000):
    """lambda_l by stable quadrature of exp(l ln t - t + ln U) / Gamma(l+1).

    Locates the peak of the log-integrand on a probe grid, then applies
    composite Gauss-Legendre panels clustered at the origin and around
    the peak.  All sums run in shifted log space.
    """
    t_hi = 3.0 * l + 200.0

    def g(t):
        with np.errstate(divide="ignore"):
            lt = np.where(t > 0, np.log(np.maximum(t, 1e-300)), -np.inf)
        return l * lt - t + log_u_of_t(t)

    probe = np.geomspace(t_hi * 1e-9, t_hi, n_probe)
    gp = g(probe)
    i_star = int(np.nanargmax(gp))
    t_star = probe[i_star]

    h = max(1e-4 * t_star, 1e-8)
    g0, gm, gpl = g(np.array([t_star])), g(np.array([t_star - h])), g(
        np.array([t_star + h])
    )
    curv = (gm[0] + gpl[0] - 2.0 * g0[0]) / (h * h)
    if curv < 0 and np.isfinite(curv):
        sigma = 1.0 / math.sqrt(-curv)
    else:
        sigma = math.sqrt(l + 1.0)
    sigma = min(max(sigma, 1e-3), t_hi)

    lo = max(t_star - 18.0 * sigma, 0.0)
    hi = min(t_star + 18.0 * sigma, t_hi)
    edges = [np.linspace(lo, hi, 25)]
    if lo > 1e-12:
        edges.insert(0, np.geomspace(min(lo, t_hi) * 1e-6, lo, 13))
    if hi < t_hi:
        edges.append(np.geomspace(hi, t_hi, 9))
    edges = np.unique(np.concatenate(edges))

    xg, wg = roots_legendre(16)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()

    gv = g(nodes)
    gmax = np.max(gv)
    if not np.isfinite(gmax):
        return 0.0
    total = np.sum(weights * np.exp(gv - gmax))
    return float(math.exp(gmax - gammaln(l + 1)) * max(total, 0.0))


def radial_eigenvalues(U, b0, L_max):
    """Eigenvalues lambda_l, l < L_max, of pUp for a radial symbol U(r).

    Catalog bumps use the exact incomplete-gamma form; other symbols use
    stable quadrature (generalized Gauss-Laguerre for moderate l, shifted
    log-space panels beyond the factorial-overflow range).
    """
    if isinstance(U, TransversePotential) and U.kind == "bump":
        T = 0.5 * b0 * U.radius**2
        ls = np.arange(L_max)
        return U.height * gammainc(ls + 1.0, T)

    def u_of_t(t):
        return np.asarray(U(np.sqrt(2.0 * np.asarray(t) / b0)), dtype=float)

    def log_u(t):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(u_of_t(t), 1e-300))

    out = np.empty(L_max)
    for l in range(L_max):
        if l <= 120:
            nodes, weights = roots_genlaguerre(96, l)
            scaled = weights / math.gamma(l + 1)
            out[l] = float(np.dot(scaled, u_of_t(nodes)))
        else:
            out[l] = _eigenvalue_logspace(log_u, l)
    return out


def assemble(U, basis, radial=None, n_theta=None):
    """Galerkin matrix <e_{0,l}, U e_{0,l'}> on the lowest band.

    ``U`` may be a catalog :class:`TransversePotential` (radial) or any
    callable of (x1, x2); pass ``radial=True`` for a radial callable of r.
    """
    if radial is None:
        radial = isinstance(U, TransversePotential)
    if radial:
        lam = radial_eigenvalues(U, basis.b0, basis.L_max)
        if np.any(lam < -1e-12):
            raise IntegrationFailure("negative eigenvalue from quadrature of U >= 0")
        sup_u = U.sup if isinstance(U, TransversePotential) else math.inf
        return ToeplitzMatrix(
            matrix=np.diag(lam), radial=True, b0=basis.b0, sup_u=sup_u
        )

    L = basis.L_max
    if n_theta is None:
        n_theta = max(4 * L, 64)
    t = basis.t_nodes
    r = basis.r_nodes
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    x = r[:, None] * np.cos(theta)[None, :]
    y = r[:, None] * np.sin(theta)[None, :]
    Uv = np.asarray(U(x, y), dtype=complex)
    # angular Fourier coefficients of U on each radial node
    Uhat = np.fft.fft(Uv, axis=1) / n_theta
    rho = np.array([basis.radial_weightless(0, l, t) for l in range(L)])
    w = basis.t_weights / basis.b0
    mat = np.empty((L, L), dtype=complex)
    for l in range(L):
        for lp in range(L):
            coeff = Uhat[:, (lp - l) % n_theta]
            mat[l, lp] = np.sum(w * rho[l] * rho[lp] * coeff)
    mat = 0.5 * (mat + mat.conj().T)
    return ToeplitzMatrix(matrix=mat, radial=False, b0=basis.b0)


def counting(spectrum, s):
    """Number of eigenvalues strictly above s (the function n_+)."""
    if s <= 0:
        raise ValueError("counting threshold s must be positive")
    if isinstance(spectrum, ToeplitzMatrix):
        spectrum = spectrum.eigenvalues
    arr = np.asarray(spectrum, dtype=float)
    return int(np.sum(arr > s))


@dataclass
class CountingCurve:
    """Sampled counting function with optional comparator values."""

    s: np.ndarray
    n_plus: np.ndarray
    comparator: Optional[np.ndarray] = None
    law: str = ""
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_eigenvalues(cls, eigenvalues, s_values, comparator=None, law="", meta=None):
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        s_values = np.asarray(sorted(s_values, reverse=True), dtype=float)
        n = np.array([counting(eigenvalues, s) for s in s_values], dtype=int)
        max_n = int(n.max()) if n.size else 0
        if 2 * max_n > eigenvalues.size:
            raise TruncationError(
                f"basis holds {eigenvalues.size} modes but n_+ reaches {max_n}; "
                "L_max must exceed the probed count by a factor >= 2"
            )
        comp = None
        if comparator is not None:
            comp = np.array([comparator(s) for s in s_values], dtype=float)
        return cls(s=s_values, n_plus=n, comparator=comp, law=law, meta=meta or {})

    @property
    def ratio(self):
        if self.comparator is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.comparator > 0, self.n_plus / self.comparator, np.nan)

    def rows(self):
        comp = self.comparator
        rat = self.ratio
        for i in range(self.s.size):
            yield (
                float(self.s[i]),
                int(self.n_plus[i]),
                float(comp[i]) if comp is not None else math.nan,
                float(rat[i]) if rat is not None else math.nan,
            )


def comparator_power(s, alpha, u0_integral, b0):
    """Power-law comparator C_alpha * s^(-2/alpha).

    ``u0_integral`` is the angular integral of u0^(2/alpha) over the unit
    circle (2*pi for u0 == 1); C_alpha = (b0/4pi) * u0_integral.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    c_alpha = b0 / (4.0 * math.pi) * u0_integral
    return c_alpha * float(s) ** (-2.0 / alpha)


def _check_asymptotic_s(s):
    if not 0.0 < s < math.exp(-1.0):
        raise OutOfAsymptoticRange(f"s={s} outside (0, 1/e)")


def comparator_quasi_exponential(s, beta, mu, b0):
    """Quasi-exponential comparator phi_beta(s) for ln U ~ -mu |x|^(2 beta)."""
    _check_asymptotic_s(s)
    L = abs(math.log(s))
    if beta < 1.0:
        return 0.5 * b0 * mu ** (-1.0 / beta) * L ** (1.0 / beta)
    if beta == 1.0:
        return L / math.log1p(2.0 * mu / b0)
    return beta / (beta - 1.0) * L / math.log(L)


def comparator_compact(s):
    """Compact-support comparator phi_inf(s) = |ln s| / ln|ln s|."""
    _check_asymptotic_s(s)
    L = abs(math.log(s))
    return L / math.log(L)


@dataclass
class SchattenReport:
    q: int
    lhs: float
    rhs: float
    holds: bool
    slack: float

    def to_dict(self):
        return {
            "q": self.q,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "slack": self.slack,
        }


def _norm_lq_q(U, q):
    """||U||_{L^q}^q over the plane for a radial symbol."""
    if isinstance(U, TransversePotential) and U.kind == "bump":
        return math.pi * U.height**q * U.radius**2

    def f(r):
        return float(U(r)) ** q * r

    val, err = integrate.quad(f, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
    if err > max(1e-9, 1e-6 * abs(val)):
        raise IntegrationFailure("norm quadrature did not converge")
    return 2.0 * math.pi * val


def schatten_check(matrix, U, q, model):
    """Check sum lambda^q <= (b0/2pi) e^{2 osc} ||U||_q^q and report the slack."""
    if q % 2 != 0 or q < 2:
        raise ValueError("Schatten exponent q must be a positive even integer")
    eigs = matrix.eigenvalues if isinstance(matrix, ToeplitzMatrix) else np.asarray(matrix)
    lhs = float(np.sum(np.maximum(eigs, 0.0) ** q))
    rhs = (
        model.b0
        / (2.0 * math.pi)
        * math.exp(2.0 * model.osc_phi_tilde)
        * _norm_lq_q(U, q)
    )
    return SchattenReport(q=q, lhs=lhs, rhs=rhs, holds=lhs <= rhs, slack=rhs - lhs)


@dataclass
class FitReport:
    law: str
    slope: float
    intercept: float
    exponent: float
    prefactor: float
    rel_deviation: float
    deep_slope: float
    n_samples: int
    s_range: tuple

    def to_dict(self):
        d = {
            "law": self.law,
            "slope": self.slope,
            "intercept": self.intercept,
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "rel_deviation": self.rel_deviation,
            "deep_slope": self.deep_slope,
            "n_samples": self.n_samples,
            "s_range": list(self.s_range),
        }
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _lsq_line(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    denom = max(np.max(np.abs(y)), 1e-300)
    return coef[0], coef[1], float(np.max(np.abs(resid)) / denom)


def fit_counting_law(curve, law, beta=1.0):
    """Least-squares fit of a counting curve in law-appropriate coordinates.

    power:      log n vs log s  -> exponent (slope) and prefactor exp(intercept)
    quasi_exp:  n vs |ln s|^(1/beta) -> slope
    compact:    n vs |ln s|/ln|ln s| -> slope (ratio to phi_inf)

    The report also carries ``deep_slope``, the same fit restricted to the
    deepest decade of s, since the laws are s -> 0 statements.
    """
    mask = curve.n_plus > 0
    s = curve.s[mask]
    n = curve.n_plus[mask].astype(float)
    if s.size < 8:
        raise FitRangeError("need at least 8 samples with n_+ > 0")
    span = math.log10(s.max() / s.min())
    if span < 2.0:
        raise FitRangeError(f"s range spans {span:.2f} decades; need >= 2")
    if np.ptp(n) == 0:
        raise FitRangeError("counting curve is constant over the window")

    if law == "power":
        x, y = np.log(s), np.log(n)
    elif law == "quasi_exp":
        x, y = np.abs(np.log(s)) ** (1.0 / beta), n
    elif law == "compact":
        L = np.abs(np.log(s))
        x, y = L / np.log(L), n
    else:
        raise ValueError(f"unknown law {law!r}")

    slope, intercept, dev = _lsq_line(x, y)

    deep = s <= s.min() * 10.0
    if np.sum(deep) >= 3 and np.ptp(n[deep]) > 0:
        deep_slope, _, _ = _lsq_line(x[deep], y[deep])
    else:
        deep_slope = math.nan

    return FitReport(
        law=law,
        slope=float(slope),
        intercept=float(intercept),
        exponent=float(slope) if law == "power" else math.nan,
        prefactor=float(math.exp(intercept)) if law == "power" else math.nan,
        rel_deviation=dev,
        deep_slope=float(deep_slope),
        n_samples=int(s.size),
        s_range=(float(s.min()), float(s.max())),
    )

"""Magnetic-field and perturbation data model.

Defines the constant-field magnetic model, separable matrix potentials
V(x) = U(x12) * v(x3) * M drawn from a small named catalog, hypothesis
validation on sample grids, and the effective 2D weights obtained by
integrating |V| along the field direction.

Conventions
-----------
``<x>`` denotes (1 + |x|^2)^(1/2).  The weight functions use the entries
of the matrix absolute value |M| = (M*M)^(1/2), not the absolute values
of the entries of M; the two coincide for diagonal profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import FlavorError, IntegrationFailure

__all__ = [
    "MagneticModel",
    "TransversePotential",
    "AxialProfile",
    "PerturbationSpec",
    "DomainRadii",
    "ValidationReport",
    "validate_hypothesis",
    "effective_weight",
    "default_axial_grid",
    "default_transverse_grid",
    "matrix_abs",
]

AXIAL_QUAD_TOL = 1e-10  # W feeds eigenvalue comparisons at ~1e-8


def matrix_abs(M):
    """Matrix absolute value |M| = (M*M)^(1/2) of a Hermitian matrix."""
    M = np.asarray(M, dtype=complex)
    w, V = np.linalg.eigh(M)
    return (V * np.abs(w)) @ V.conj().T


def matrix_sign(M):
    """Matrix sign of a Hermitian matrix (0 on the kernel)."""
    M = np.asarray(M, dtype=complex)
    w, V = np.linalg.eigh(M)
    return (V * np.sign(w)) @ V.conj().T


@dataclass(frozen=True)
class MagneticModel:
    """Unidirectional magnetic field b = b0 + perturbation.

    Only the constant-field case (``phi_tilde is None``) is supported by
    the numeric pipeline; the perturbed case is carried as data so the
    spectral-gap parameter ``zeta`` stays meaningful.
    """

    b0: float
    phi_tilde: Optional[Callable[[np.ndarray], np.ndarray]] = None
    osc_phi_tilde: float = 0.0

    def __post_init__(self):
        if self.b0 <= 0:
            raise ValueError("field strength b0 must be positive")
        if self.phi_tilde is None and self.osc_phi_tilde != 0.0:
            raise ValueError("osc_phi_tilde must vanish for a constant field")
        if self.osc_phi_tilde < 0:
            raise ValueError("osc_phi_tilde must be nonnegative")

    @property
    def zeta(self):
        """Spectral-gap parameter 2*b0*exp(-2*osc phi_tilde)."""
        return 2.0 * self.b0 * math.exp(-2.0 * self.osc_phi_tilde)

    @property
    def is_constant(self):
        return self.phi_tilde is None


@dataclass(frozen=True)
class TransversePotential:
    """Radial transverse factor U(x12) >= 0 from the named catalog.

    kinds:
      ``power``     U(r) = <r>^(-alpha)                (params: alpha)
      ``gaussian``  U(r) = exp(-mu r^(2 beta))         (params: mu, beta)
      ``bump``      U(r) = height on r <= radius else 0 (params: radius, height)
    """

    kind: str
    alpha: float = 2.0
    mu: float = 0.5
    beta: float = 1.0
    radius: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "gaussian", "bump"):
            raise ValueError(f"unknown transverse potential kind {self.kind!r}")
        if self.kind == "power" and self.alpha <= 0:
            raise ValueError("power decay exponent alpha must be positive")
        if self.kind == "gaussian" and (self.mu <= 0 or self.beta <= 0):
            raise ValueError("gaussian parameters mu, beta must be positive")
        if self.kind == "bump" and (self.radius <= 0 or self.height <= 0):
            raise ValueError("bump radius and height must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return (1.0 + r * r) ** (-self.alpha / 2.0)
        if self.kind == "gaussian":
            return np.exp(-self.mu * r ** (2.0 * self.beta))
        return np.where(r <= self.radius, self.height, 0.0)

    @property
    def decay_exponent(self):
        """Largest m12 with U(r) = O(<r>^-m12); inf for faster-than-power decay."""
        if self.kind == "power":
            return self.alpha
        return math.inf

    @property
    def sup(self):
        return self.height if self.kind == "bump" else 1.0

    def params(self):
        if self.kind == "power":
            return {"alpha": self.alpha}
        if self.kind == "gaussian":
            return {"mu": self.mu, "beta": self.beta}
        return {"radius": self.radius, "height": self.height}


@dataclass(frozen=True)
class AxialProfile:
    """Axial factor v(x3) from the named catalog.

    kinds:
      ``exponential``  v(x) = exp(-2 gamma |x|)        (params: gamma)
      ``gaussian``     v(x) = exp(-a x^2)              (params: a)
      ``bump``         v(x) = 1 on |x| <= half_width   (params: half_width)
      ``power``        v(x) = (1 + x^2)^(-p)           (params: p) -- fails (2.1)
    """

    kind: str
    gamma: float = 1.0
    a: float = 1.0
    half_width: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "gaussian", "bump", "power"):
            raise ValueError(f"unknown axial profile kind {self.kind!r}")
        for name in ("gamma", "a", "half_width", "p"):
            if getattr(self, name) <= 0:
                raise ValueError(f"axial parameter {name} must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            return np.exp(-2.0 * self.gamma * np.abs(x))
        if self.kind == "gaussian":
            return np.exp(-self.a * x * x)
        if self.kind == "bump":
            return np.where(np.abs(x) <= self.half_width, 1.0, 0.0)
        return (1.0 + x * x) ** (-self.p)

    @property
    def support_hint(self):
        """Finite support half-width, or None."""
        return self.half_width if self.kind == "bump" else None

    @property
    def superexponential(self):
        return self.kind != "power"

    def admissible_delta(self):
        """Supremum of rates delta with |v| <= C exp(-2 delta <x>), or 0."""
        if self.kind == "exponential":
            return self.gamma
        if self.kind in ("gaussian", "bump"):
            return math.inf
        return 0.0

    def params(self):
        return {
            "exponential": {"gamma": self.gamma},
            "gaussian": {"a": self.a},
            "bump": {"half_width": self.half_width},
            "power": {"p": self.p},
        }[self.kind]


@dataclass(frozen=True)
class PerturbationSpec:
    """Separable matrix potential V(x) = U(x12) * v(x3) * M with claimed decay rates.

    ``n`` is 2 (Pauli) or 4 (Dirac).  ``delta`` and ``m12`` are the rates
    claimed in the decay hypothesis; they are checked against the actual
    catalog functions by :func:`validate_hypothesis`.
    """

    n: int
    transverse: TransversePotential
    axial: AxialProfile
    matrix_profile: np.ndarray
    coupling: float = 1.0
    delta: float = 1.0
    m12: float = 2.0

    def __post_init__(self):
        if self.n not in (2, 4):
            raise ValueError("n must be 2 (Pauli) or 4 (Dirac)")
        if self.delta <= 0:
            raise ValueError("axial decay rate delta must be positive")
        if self.m12 <= 0:
            raise ValueError("transverse decay exponent m12 must be positive")
        M = np.asarray(self.matrix_profile, dtype=complex)
        if M.shape != (self.n, self.n):
            raise FlavorError(
                f"matrix profile shape {M.shape} inconsistent with n={self.n}"
            )
        object.__setattr__(self, "matrix_profile", M)

    @property
    def matrix_is_hermitian(self):
        M = self.matrix_profile
        return bool(np.allclose(M, M.conj().T, atol=1e-13))

    def abs_profile_entry(self, i, j=None):
        """Entry of |M| (matrix absolute value), 0-indexed."""
        if j is None:
            j = i
        return float(np.real(matrix_abs(self.matrix_profile)[i, j]))

    def potential(self, x12_radius, x3):
        """V evaluated at radius |x12| and height x3 (matrix-valued)."""
        return (
            self.transverse(x12_radius)
            * self.axial(x3)
            * self.matrix_profile
        )


@dataclass(frozen=True)
class DomainRadii:
    """Admissible punctured-disk radii for the two spectral maps.

    Pauli requires epsilon < min(delta, sqrt(zeta)); Dirac requires
    eta < min(delta/(4m), sqrt(1 - 2m/mu)) for an auxiliary mu in
    (2m, sqrt(m^2 + zeta) + m).
    """

    epsilon: float
    eta: float = 0.0
    m: float = 1.0
    mu: float = 0.0

    @staticmethod
    def for_pauli(delta, zeta, margin=0.9):
        return DomainRadii(epsilon=margin * min(delta, math.sqrt(zeta)))

    @staticmethod
    def for_dirac(delta, zeta, m, mu=None, margin=0.9):
        upper = math.sqrt(m * m + zeta) + m
        if mu is None:
            mu = 0.5 * (2.0 * m + upper)
        radii = DomainRadii(
            epsilon=margin * min(delta, math.sqrt(zeta)),
            eta=margin * min(delta / (4.0 * m), math.sqrt(1.0 - 2.0 * m / mu)),
            m=m,
            mu=mu,
        )
        radii.check(delta, zeta)
        return radii

    def check(self, delta, zeta):
        if self.epsilon <= 0 or self.epsilon >= min(delta, math.sqrt(zeta)):
            raise ValueError("epsilon violates epsilon < min(delta, sqrt(zeta))")
        if self.eta:
            if not (2.0 * self.m < self.mu < math.sqrt(self.m**2 + zeta) + self.m):
                raise ValueError("auxiliary mu outside (2m, sqrt(m^2+zeta)+m)")
            bound = min(delta / (4.0 * self.m), math.sqrt(1.0 - 2.0 * self.m / self.mu))
            if self.eta >= bound:
                raise ValueError("eta violates the Dirac disk condition")


def default_axial_grid(delta, points=400):
    """Geometric sample grid on [-20/delta, 20/delta] for decay checks."""
    span = 20.0 / delta
    pos = np.geomspace(span * 1e-4, span, points // 2)
    return np.concatenate([-pos[::-1], [0.0], pos])


def default_transverse_grid(points=240, span=50.0):
    """Geometric radial sample grid on (0, span]."""
    return np.concatenate([[0.0], np.geomspace(span * 1e-4, span, points)])


@dataclass
class ValidationReport:
    """Outcome of the decay-hypothesis check on a sample grid."""

    accepted: bool
    reasons: list = field(default_factory=list)
    axial_constant: float = math.nan
    transverse_constant: float = math.nan
    combined_constant: float = math.nan
    delta: float = math.nan
    m12: float = math.nan
    n: int = 0

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "reasons": list(self.reasons),
            "axial_constant": self.axial_constant,
            "transverse_constant": self.transverse_constant,
            "combined_constant": self.combined_constant,
            "delta": self.delta,
            "m12": self.m12,
            "n": self.n,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), indent=2, **kwargs)


def _empirical_constant(values, bounds):
    """Smallest C with values <= C * bounds on the grid, ignoring zero bounds."""
    mask = bounds > 0
    if not np.any(mask):
        return 0.0
    ratios = values[mask] / bounds[mask]
    return float(np.max(ratios))


def validate_hypothesis(spec, sample_grid=None, transverse_grid=None):
    """Check the super-exponential decay hypothesis on sample grids.

    Returns a :class:`ValidationReport` carrying the smallest admissible
    constants found empirically.  The check is sampled, not proved: a
    profile is refuted when its ratio to the claimed bound keeps growing
    toward the edge of the grid (by more than 10% over the outer decade)
    or exceeds the inner maximum by a large factor.
    """
    if sample_grid is None:
        sample_grid = default_axial_grid(spec.delta)
    if transverse_grid is None:
        transverse_grid = default_transverse_grid()
    sample_grid = np.asarray(sample_grid, dtype=float)
    if sample_grid.size == 0:
        raise ValueError("sample_grid must be nonempty")

    report = ValidationReport(
        accepted=True, delta=spec.delta, m12=spec.m12, n=spec.n
    )

    if not spec.matrix_is_hermitian:
        report.accepted = False
        report.reasons.append("matrix profile is not Hermitian")

    # axial bound |v(x)| <= C exp(-2 delta <x>)
    x = sample_grid
    v = np.abs(spec.axial(x))
    bracket = np.exp(-2.0 * spec.delta * np.sqrt(1.0 + x * x))
    ratios = np.where(bracket > 0, v / np.maximum(bracket, 1e-300), 0.0)
    report.axial_constant = float(np.max(ratios))
    if _ratio_diverges(np.abs(x), ratios):
        report.accepted = False
        report.reasons.append(
            "axial profile violates exp(-2 delta <x3>) decay on the grid"
        )

    # transverse bound U(r) <= C <r>^(-m12)
    r = np.asarray(transverse_grid, dtype=float)
    u = np.abs(spec.transverse(r))
    tbound = (1.0 + r * r) ** (-spec.m12 / 2.0)
    tratios = u / tbound
    report.transverse_constant = _empirical_constant(u, tbound)
    if _ratio_diverges(r, tratios):
        report.accepted = False
        report.reasons.append(
            "transverse profile violates <x12>^(-m12) decay on the grid"
        )

    report.combined_constant = report.axial_constant * report.transverse_constant
    return report


def _ratio_diverges(abscissa, ratios):
    """Heuristic growth detector: ratio keeps climbing in the outer decade."""
    order = np.argsort(abscissa)
    a, q = abscissa[order], ratios[order]
    amax = a[-1]
    if amax <= 0:
        return False
    outer = a >= amax / 10.0
    inner = ~outer
    if not np.any(inner) or not np.any(outer):
        return False
    inner_max = np.max(q[inner])
    outer_max = np.max(q[outer])
    if outer_max > 1.1 * max(inner_max, 1e-300):
        # climbing at the edge: check it is genuine growth, not noise
        tail = q[outer]
        return bool(tail[-1] >= 0.99 * np.max(tail))
    return False


def effective_weight(spec, component="plus", quad_tol=AXIAL_QUAD_TOL):
    """Effective 2D weight W+/- (x12) = integral of |V|_{11 or 33} along x3.

    For separable specs this is U(x12) * |M|_{11} * int|v| (plus) or
    U * |M|_{33} * int|v| (minus), with the axial integral computed by
    adaptive quadrature.  Returns ``(W, info)`` where W is a callable of
    the transverse radius and ``info`` records the axial integral and
    matrix weight.  The entry is taken from the matrix absolute value.
    """
    if component not in ("plus", "minus"):
        raise ValueError("component must be 'plus' or 'minus'")
    if component == "minus" and spec.n != 4:
        raise FlavorError("component 'minus' requires a Dirac (n=4) spec")
    idx = 0 if component == "plus" else 2
    mweight = spec.abs_profile_entry(idx)

    axial_integral = axial_abs_integral(spec.axial, quad_tol)
    scale = mweight * axial_integral

    def W(r):
        return scale * np.abs(spec.transverse(np.asarray(r, dtype=float)))

    info = {
        "axial_integral": axial_integral,
        "matrix_weight": mweight,
        "component": component,
    }
    return W, info


def axial_abs_integral(axial, quad_tol=AXIAL_QUAD_TOL):
    """Adaptive quadrature of int |v(x3)| dx3 over the line."""
    hint = getattr(axial, "support_hint", None)
    points = None
    if hint is not None:
        points = [-hint, hint]

    def f(x):
        return float(np.abs(axial(x)))

    if points is not None:
        val, err = integrate.quad(
            f, -2.0 * points[1], 2.0 * points[1], points=points,
            epsabs=quad_tol, limit=200,
        )
    else:
        val, err = integrate.quad(f, -np.inf, np.inf, epsabs=quad_tol, limit=200)
    if not math.isfinite(val) or err > max(quad_tol * 10.0, abs(val) * 1e-6):
        raise IntegrationFailure(
            f"axial quadrature error {err:.2e} exceeds tolerance for target {val:.3e}"
        )
    return val

"""Zeros of k -> det(I + T(k)): location, multiplicity, and counting checks.

Zero search follows the argument principle: annuli are cut into polar
boxes, boxes with vanishing contour index are pruned, and Newton
iteration only polishes zeros that a winding number has already isolated.
Phase tracking along contours inserts nodes until no step jumps by more
than pi/2, so the winding is unambiguous; contours passing too close to a
zero are rejected and the enclosing box is re-split at a shifted
fraction.

All determinant values are handled in log form (log|det| + i arg).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContourTooClose, SingularAtNode, SubdivisionBudget

__all__ = [
    "ContourSpec",
    "CirclePath",
    "PolarBoxPath",
    "log_det",
    "winding_number",
    "contour_index",
    "Resonance",
    "ResonanceSet",
    "find_resonances",
    "multiplicity",
    "annulus_count_check",
    "accumulation_check",
    "sector_check",
    "resonances_to_csv_rows",
]

TWO_PI = 2.0 * math.pi
MAX_PHASE_STEP = 0.5 * math.pi
INDEX_INT_TOL = 1e-6
SPLIT_FRACTIONS = (0.5, 0.469, 0.531, 0.413, 0.587, 0.379, 0.621, 0.347)


@dataclass(frozen=True)
class ContourSpec:
    """Declarative contour: circle, annulus boundary, or polar box."""

    kind: str  # "circle" | "annulus" | "polar_box"
    center: complex = 0.0
    radius: float = 0.0
    r_in: float = 0.0
    r_out: float = 0.0
    theta_min: float = -math.pi
    theta_max: float = math.pi
    nodes: int = 64

    def __post_init__(self):
        if self.kind not in ("circle", "annulus", "polar_box"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.kind == "circle" and self.radius <= 0:
            raise ValueError("circle radius must be positive")
        if self.kind in ("annulus", "polar_box") and not 0 < self.r_in < self.r_out:
            raise ValueError("need 0 < r_in < r_out")


class CirclePath:
    """Positively oriented circle, parametrized over [0, 1)."""

    def __init__(self, center, radius):
        self.center = complex(center)
        self.radius = float(radius)

    def point(self, t):
        return self.center + self.radius * cmath.exp(2j * math.pi * t)

    def derivative(self, t):
        return 2j * math.pi * self.radius * cmath.exp(2j * math.pi * t)


class PolarBoxPath:
    """Boundary of {r0 <= |k| <= r1, t0 <= arg k <= t1}, positively oriented."""

    def __init__(self, r0, r1, t0, t1):
        if not 0 < r0 < r1:
            raise ValueError("need 0 < r0 < r1")
        if not t0 < t1 <= t0 + TWO_PI:
            raise ValueError("need t0 < t1 <= t0 + 2 pi")
        self.r0, self.r1, self.t0, self.t1 = r0, r1, t0, t1
        arc = 0.5 * (r0 + r1) * (t1 - t0)
        rad = r1 - r0
        total = 2 * arc + 2 * rad
        self._cuts = np.cumsum([arc, rad, arc, rad]) / total

    def point(self, t):
        c = self._cuts
        r0, r1, t0, t1 = self.r0, self.r1, self.t0, self.t1
        if t < c[0]:  # outer arc, t0 -> t1
            ang = t0 + (t / c[0]) * (t1 - t0)
            return r1 * cmath.exp(1j * ang)
        if t < c[1]:  # radial in at t1
            s = (t - c[0]) / (c[1] - c[0])
            return (r1 + s * (r0 - r1)) * cmath.exp(1j * t1)
        if t < c[2]:  # inner arc, t1 -> t0
            s = (t - c[1]) / (c[2] - c[1])
            ang = t1 + s * (t0 - t1)
            return r0 * cmath.exp(1j * ang)
        s = (t - c[2]) / (1.0 - c[2])  # radial out at t0
        return (r0 + s * (r1 - r0)) * cmath.exp(1j * self.t0)


def path_from_spec(spec):
    if spec.kind == "circle":
        return CirclePath(spec.center, spec.radius)
    if spec.kind == "polar_box":
        return PolarBoxPath(spec.r_in, spec.r_out, spec.theta_min, spec.theta_max)
    raise ValueError("annulus contours are handled as two circles")


def log_det(matrix):
    """Complex log det of a finite matrix via pivoted factorization."""
    sign, logabs = np.linalg.slogdet(np.asarray(matrix))
    if sign == 0:
        raise SingularAtNode("matrix is exactly singular")
    return complex(logabs, np.angle(sign))


def _wrap_phase(x):
    return (x + math.pi) % TWO_PI - math.pi


class _EvalCounter:
    __slots__ = ("count", "budget")

    def __init__(self, budget):
        self.count = 0
        self.budget = budget

    def tick(self, n=1):
        self.count += n
        if self.count > self.budget:
            raise SubdivisionBudget(
                f"determinant evaluation budget {self.budget} exhausted"
            )


@dataclass
class WindingResult:
    index: int
    max_log: float
    min_log: float
    evaluations: int


def winding_number(logf, path, init_nodes=24, max_nodes=6144,
                   rel_floor=1e-11, counter=None):
    """Integer winding of f along the closed path, by adaptive phase tracking.

    Nodes are inserted wherever the wrapped phase step exceeds pi/2.
    Raises :class:`ContourTooClose` when |f| dips below ``rel_floor``
    times its maximum on the contour or the node budget cannot resolve
    the phase.
    """
    ts = list(np.linspace(0.0, 1.0, init_nodes, endpoint=False))
    vals = {}

    def ev(t):
        if t not in vals:
            if counter is not None:
                counter.tick()
            try:
                vals[t] = logf(path.point(t))
            except (SingularAtNode, ValueError, ZeroDivisionError, OverflowError) as err:
                raise ContourTooClose(
                    f"determinant singular at contour node {path.point(t)}"
                ) from err
        return vals[t]

    for t in ts:
        ev(t)

    while True:
        ts.sort()
        refine = []
        for i, t in enumerate(ts):
            t_next = ts[(i + 1) % len(ts)]
            d = _wrap_phase(ev(t_next).imag - ev(t).imag)
            if abs(d) > MAX_PHASE_STEP:
                refine.append(0.5 * (t + (t_next if t_next > t else t_next + 1.0)) % 1.0)
        if not refine:
            break
        if len(ts) + len(refine) > max_nodes:
            raise ContourTooClose(
                "phase not resolvable along contour (zero on or near the path?)"
            )
        ts = sorted(set(ts) | set(refine))

    logs = [ev(t) for t in sorted(ts)]
    re = [v.real for v in logs]
    max_log, min_log = max(re), min(re)
    if min_log < max_log + math.log(rel_floor):
        raise ContourTooClose(
            f"|det| dips to {math.exp(min_log - max_log):.2e} of its contour maximum"
        )
    total = 0.0
    n = len(logs)
    for i in range(n):
        total += _wrap_phase(logs[(i + 1) % n].imag - logs[i].imag)
    idx = total / TWO_PI
    nearest = round(idx)
    if abs(idx - nearest) > INDEX_INT_TOL:
        raise ContourTooClose(
            f"winding {idx} not within {INDEX_INT_TOL} of an integer"
        )
    return WindingResult(
        index=int(nearest), max_log=max_log, min_log=min_log, evaluations=len(logs)
    )


def _is_matrix_family(target, probe):
    out = target(probe)
    return np.ndim(out) == 2, out


def contour_index(target, contour, deriv=None, probe=None, tol=1e-8,
                  max_doublings=12):
    """Index of a scalar or matrix family along a contour.

    Scalar f (or matrix family without derivative): winding number of f
    (resp. det) along the contour.  With ``deriv`` given for a matrix
    family, evaluates (1/2 pi i) * integral of tr(A' A^{-1}) by doubling
    trapezoid/Gauss quadrature and checks integrality to 1e-6.
    """
    path = path_from_spec(contour) if isinstance(contour, ContourSpec) else contour
    if deriv is None:
        if probe is None:
            probe = path.point(0.12)
        is_mat, _ = _is_matrix_family(target, probe)
        if is_mat:
            logf = lambda k: log_det(target(k))
        else:
            logf = lambda k: cmath.log(target(k))
        return winding_number(logf, path).index

    if not isinstance(path, CirclePath):
        raise ValueError("trace-form index implemented for circle contours")

    prev = None
    n = 32
    for _ in range(max_doublings):
        ts = np.arange(n) / n
        total = 0.0 + 0.0j
        for t in ts:
            z = path.point(t)
            A = np.asarray(target(z))
            Ap = np.asarray(deriv(z))
            total += np.trace(np.linalg.solve(A, Ap)) * path.derivative(t)
        val = total / n / (2j * math.pi)
        if prev is not None and abs(val - prev) < tol:
            break
        prev = val
        n *= 2
    nearest = round(val.real)
    if abs(val - nearest) > INDEX_INT_TOL:
        raise ContourTooClose(
            f"trace-form index {val} not within {INDEX_INT_TOL} of an integer"
        )
    return int(nearest)


@dataclass
class Resonance:
    k: complex
    multiplicity: int
    residual: float
    converged: bool
    sector: Optional[int] = None
    clustered: bool = False

    def to_dict(self):
        return {
            "re_k": self.k.real,
            "im_k": self.k.imag,
            "multiplicity": self.multiplicity,
            "residual": self.residual,
            "converged": self.converged,
            "sector": self.sector,
            "clustered": self.clustered,
        }


@dataclass
class ResonanceSet:
    resonances: list
    flavor: str = ""
    coupling: float = 0.0
    region: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.resonances)

    def __len__(self):
        return len(self.resonances)

    def in_annulus(self, r_in, r_out, closed_outer=True):
        out = []
        for res in self.resonances:
            r = abs(res.k)
            if r > r_in and (r <= r_out if closed_outer else r < r_out):
                out.append(res)
        return out

    def total_multiplicity(self):
        return sum(r.multiplicity for r in self.resonances)

    def to_json(self):
        return json.dumps(
            {
                "flavor": self.flavor,
                "coupling": self.coupling,
                "region": self.region,
                "diagnostics": self.diagnostics,
                "resonances": [r.to_dict() for r in self.resonances],
            },
            indent=2,
        )


def resonances_to_csv_rows(rset):
    """Rows (re_k, im_k, mult, residual), deterministically ordered."""
    for res in rset.resonances:
        yield (res.k.real, res.k.imag, res.multiplicity, res.residual)


def _newton_polish(logf, k0, scale, max_steps=40):
    """Newton on det via k <- k - 1/(log det)'; returns (k, log-residual, ok).

    Near a simple zero the finite-difference derivative of log det caps
    the attainable accuracy at the stencil size, so the stencil shrinks
    once the step is stencil-sized (two-phase refinement).
    """
    k = complex(k0)
    ok = False
    h_rel = 1e-6
    for _ in range(max_steps):
        h = h_rel * max(abs(k), 1e-6 * scale)
        try:
            dplus = logf(k + h)
            dminus = logf(k - h)
        except (SingularAtNode, ZeroDivisionError):
            break
        d = (dplus.real - dminus.real) / (2 * h) + 1j * _wrap_phase(
            dplus.imag - dminus.imag
        ) / (2 * h)
        if d == 0:
            break
        step = -1.0 / d
        k = k + step
        if abs(step) < 4.0 * h:
            if h_rel > 2e-10:
                h_rel = 1e-10
            else:
                ok = True
                break
    try:
        resid_log = logf(k).real
    except SingularAtNode:
        resid_log = -math.inf
    return k, resid_log, ok


def _box_diameter(box):
    r0, r1, t0, t1 = box
    return max(r1 - r0, 0.5 * (r0 + r1) * (t1 - t0))


def _split_box(box, frac):
    r0, r1, t0, t1 = box
    if (r1 - r0) / (0.5 * (r0 + r1)) > (t1 - t0):
        rm = math.exp(math.log(r0) + frac * (math.log(r1) - math.log(r0)))
        return (r0, rm, t0, t1), (rm, r1, t0, t1)
    tm = t0 + frac * (t1 - t0)
    return (r0, r1, t0, tm), (r0, r1, tm, t1)


def _scan_box(logf, box, counter, scale_log, opts, depth=0):
    """Recursive argument-principle subdivision inside one polar box."""
    r0, r1, t0, t1 = box
    res = winding_number(
        logf, PolarBoxPath(r0, r1, t0, t1),
        init_nodes=opts["box_nodes"], counter=counter,
        rel_floor=opts["rel_floor"],
    )
    idx = res.index
    if idx == 0:
        return []
    if idx < 0:
        raise ContourTooClose("negative box index: pole inside scan region?")

    center = math.sqrt(r0 * r1) * cmath.exp(0.5j * (t0 + t1))
    if idx == 1:
        k, resid_log, ok = _newton_polish(logf, center, scale=r1)
        if ok and _in_box(k, box):
            return [Resonance(
                k=k,
                multiplicity=1,
                residual=math.exp(resid_log - scale_log),
                converged=True,
            )]

    if _box_diameter(box) < opts["cluster_tol"] * r1 or depth >= opts["max_depth"]:
        k, resid_log, ok = _newton_polish(logf, center, scale=r1)
        if not (ok and _in_box(k, box)):
            k, resid_log, ok = center, math.nan, False
        return [Resonance(
            k=k,
            multiplicity=idx,
            residual=math.exp(resid_log - scale_log) if ok else math.nan,
            converged=ok,
            clustered=idx > 1,
        )]

    last_err = None
    for frac in SPLIT_FRACTIONS:
        b1, b2 = _split_box(box, frac)
        try:
            found = _scan_box(logf, b1, counter, scale_log, opts, depth + 1)
            found += _scan_box(logf, b2, counter, scale_log, opts, depth + 1)
        except ContourTooClose as err:
            last_err = err
            continue
        if sum(f.multiplicity for f in found) != idx:
            last_err = ContourTooClose("child indices inconsistent with parent")
            continue
        return found
    raise last_err if last_err is not None else ContourTooClose("unresolvable box")


def _in_box(k, box, margin=1e-9):
    r0, r1, t0, t1 = box
    r = abs(k)
    if not (r0 * (1 - margin) <= r <= r1 * (1 + margin)):
        return False
    ang = cmath.phase(k)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        if t0 - margin <= ang + shift <= t1 + margin:
            return True
    return False


DEFAULT_SCAN_OPTS = {
    "box_nodes": 12,
    "rel_floor": 1e-12,
    "cluster_tol": 1e-9,
    "max_depth": 60,
    "budget": 250_000,
}


def _scan_sector(assembly, m, e, r_in, r_out, opts):
    logf = assembly.sector_logdet(m, coupling=e)
    counter = _EvalCounter(opts["budget"])
    outer = winding_number(
        logf, CirclePath(0.0, r_out), init_nodes=2 * opts["box_nodes"],
        counter=counter, rel_floor=opts["rel_floor"],
    )
    inner = winding_number(
        logf, CirclePath(0.0, r_in), init_nodes=2 * opts["box_nodes"],
        counter=counter, rel_floor=opts["rel_floor"],
    )
    total = outer.index - inner.index
    if total == 0:
        return [], total, counter.count
    found = []
    quadrants = [
        (-0.75 * math.pi, -0.25 * math.pi),
        (-0.25 * math.pi, 0.25 * math.pi),
        (0.25 * math.pi, 0.75 * math.pi),
        (0.75 * math.pi, 1.25 * math.pi),
    ]
    for t0, t1 in quadrants:
        found += _scan_box(logf, (r_in, r_out, t0, t1), counter, outer.max_log, opts)
    if sum(f.multiplicity for f in found) != total:
        raise SubdivisionBudget(
            f"sector {m}: located multiplicity "
            f"{sum(f.multiplicity for f in found)} != annulus index {total}"
        )
    found = _merge_clusters(found, opts["cluster_tol"] * r_out)
    for f in found:
        f.sector = m
    return found, total, counter.count


def _merge_clusters(found, tol):
    """Merge zeros within the refinement tolerance into flagged clusters."""
    merged = []
    for res in sorted(found, key=lambda r: (r.k.real, r.k.imag)):
        for other in merged:
            if abs(res.k - other.k) < tol:
                w = other.multiplicity + res.multiplicity
                other.k = (other.k * other.multiplicity + res.k * res.multiplicity) / w
                other.multiplicity = w
                other.clustered = True
                other.residual = max(other.residual, res.residual)
                other.converged = other.converged and res.converged
                break
        else:
            merged.append(res)
    return merged


def find_resonances(assembly, r_in, r_out, coupling=None, sectors=None,
                    threads=1, **options):
    """Locate determinant zeros in r_in < |k| < r_out across sectors.

    ``assembly`` provides ``sector_labels()`` and
    ``sector_logdet(m, coupling, r_fit)``; each sector is scanned by
    argument-principle subdivision (quadrant polar boxes, offset so the
    imaginary axis is interior) with Newton refinement only after a box
    index has isolated a zero.  Results are merged sorted by (|k|, arg k),
    independent of scheduling.
    """
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    opts = dict(DEFAULT_SCAN_OPTS)
    opts.update(options)
    e = coupling if coupling is not None else getattr(assembly, "coupling", 1.0)
    labels = list(sectors if sectors is not None else assembly.sector_labels())

    diagnostics = {"evaluations": 0, "sector_indices": {}}
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda m: _scan_sector(assembly, m, e, r_in, r_out, opts),
                    labels,
                )
            )
    else:
        results = [_scan_sector(assembly, m, e, r_in, r_out, opts) for m in labels]

    all_res = []
    for m, (found, total, evals) in zip(labels, results):
        diagnostics["sector_indices"][m] = total
        diagnostics["evaluations"] += evals
        all_res.extend(found)

    all_res.sort(key=lambda r: (abs(r.k), cmath.phase(r.k)))
    return ResonanceSet(
        resonances=all_res,
        flavor=getattr(assembly, "flavor", ""),
        coupling=e,
        region={"r_in": r_in, "r_out": r_out},
        diagnostics=diagnostics,
    )


def multiplicity(logf_or_assembly, k0, radius=None, sector=None, coupling=None):
    """Contour-index multiplicity of an isolated zero at k0."""
    if callable(logf_or_assembly):
        logf = logf_or_assembly
    else:
        logf = logf_or_assembly.sector_logdet(sector, coupling=coupling)
    if radius is None:
        radius = abs(k0) / 3.0
    return winding_number(logf, CirclePath(k0, radius)).index


# -- theorem-level reports --------------------------------------------------


def annulus_count_check(rset, r, pwp_eigenvalues, constant=5.0):
    """Count in r < |k| < 2r against n_+(r, pWp) |ln r| + constant."""
    observed = sum(res.multiplicity for res in rset.in_annulus(r, 2 * r, closed_outer=False))
    npl = int(np.sum(np.asarray(pwp_eigenvalues) > r))
    bound = npl * abs(math.log(r)) + constant
    return {
        "r": r,
        "observed": observed,
        "n_plus": npl,
        "bound": bound,
        "holds": observed <= bound,
    }


def accumulation_check(rset, r, r0, coupling, b_eigenvalues):
    """Count in r < |k| <= r0 against the scaled half-weight counting function.

    ``b_eigenvalues`` are the eigenvalues of B (= half the pWp spectrum).
    Both readings n_+(r, |e| B) and n_+(r/|e|, B) are reported; they agree
    as integers.
    """
    e = abs(coupling)
    beta = np.asarray(b_eigenvalues, dtype=float)
    observed = sum(res.multiplicity for res in rset.in_annulus(r, r0))
    scaled = int(np.sum(e * beta > r))
    rescaled = int(np.sum(beta > r / e))
    window = int(np.sum((e * beta > r) & (e * beta <= r0)))
    return {
        "r": r,
        "r0": r0,
        "coupling": coupling,
        "observed": observed,
        "n_plus_scaled": scaled,
        "n_plus_rescaled": rescaled,
        "n_plus_window": window,
        "ratio": observed / scaled if scaled else math.nan,
        "ratio_window": observed / window if window else math.nan,
    }


def sector_check(rset, sign, theta, tol=1e-10):
    """Sector localization: sign * Im k <= tol and |Re k| <= tan(theta)|Im k| + tol.

    ``sign`` is the sign of e V (positive: resonances below the real axis).
    Returns the report with the worst offenders.
    """
    worst_half = -math.inf
    worst_ratio = -math.inf
    worst_k = None
    tan_t = math.tan(theta)
    for res in rset:
        half = sign * res.k.imag
        ratio = abs(res.k.real) - tan_t * abs(res.k.imag)
        if half > worst_half:
            worst_half = half
            worst_k = res.k
        worst_ratio = max(worst_ratio, ratio)
    ok = (worst_half <= tol) and (worst_ratio <= tol)
    return {
        "sign": sign,
        "theta": theta,
        "count": len(rset),
        "worst_half_plane": worst_half,
        "worst_sector_excess": worst_ratio,
        "worst_k": [worst_k.real, worst_k.imag] if worst_k is not None else None,
        "holds": bool(ok) if len(rset) else True,
    }

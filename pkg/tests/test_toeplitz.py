"""Toeplitz compression tests: oracle eigenvalues, counting, comparators, fits."""

import math

import numpy as np
import pytest
from scipy import integrate

from threshres.errors import FitRangeError, OutOfAsymptoticRange, TruncationError
from threshres.landau import build_basis
from threshres.model import MagneticModel, TransversePotential
from threshres.toeplitz import (
    CountingCurve,
    assemble,
    comparator_compact,
    comparator_power,
    comparator_quasi_exponential,
    counting,
    fit_counting_law,
    radial_eigenvalues,
    schatten_check,
)


@pytest.fixture(scope="module")
def basis():
    return build_basis(MagneticModel(b0=1.0), Q_max=1, L_max=32)


def gaussian_eigenvalue_oracle(mu, b0, l):
    """Independent oracle: (1/l!) int e^{-2 mu t / b0} t^l e^{-t} dt by quadrature."""
    val, _ = integrate.quad(
        lambda t: math.exp(-2.0 * mu * t / b0 + l * math.log(t) - t
                           - math.lgamma(l + 1)),
        0.0, 60.0 + 5.0 * l,
    )
    return val


def test_gaussian_closed_form_against_oracle():
    # lambda_l = (1 + 2 mu / b0)^-(l+1); oracle integral confirms it
    for l in (0, 3, 7):
        oracle = gaussian_eigenvalue_oracle(0.5, 1.0, l)
        assert oracle == pytest.approx(2.0 ** -(l + 1), rel=1e-10)


def test_assemble_gaussian_matches_oracle(basis):
    U = TransversePotential(kind="gaussian", mu=0.5, beta=1.0)
    mat = assemble(U, basis)
    assert mat.radial
    lam = np.diag(mat.matrix).real
    assert lam[0] == pytest.approx(0.5, rel=1e-10)
    assert lam[3] == pytest.approx(0.0625, rel=1e-10)
    for l in (0, 5, 11):
        assert lam[l] == pytest.approx(gaussian_eigenvalue_oracle(0.5, 1.0, l),
                                       rel=1e-9)


def test_constant_symbol_gives_identity(basis):
    mat = assemble(lambda r: np.ones_like(r), basis, radial=True)
    assert np.allclose(np.diag(mat.matrix), 1.0, atol=1e-10)
    small = build_basis(MagneticModel(b0=1.0), Q_max=1, L_max=6)
    gen = assemble(lambda x, y: np.ones_like(x), small, radial=False)
    assert np.allclose(gen.matrix, np.eye(6), atol=1e-9)


def test_zero_symbol_gives_zero(basis):
    mat = assemble(lambda r: np.zeros_like(r), basis, radial=True)
    assert np.all(np.abs(mat.matrix) < 1e-15)


def test_bump_uses_incomplete_gamma():
    from scipy.special import gammainc

    U = TransversePotential(kind="bump", radius=math.sqrt(2.0), height=1.0)
    lam = radial_eigenvalues(U, 1.0, 8)
    assert np.allclose(lam, gammainc(np.arange(8) + 1.0, 1.0))


def test_power_law_tail():
    # U = <x>^-2: lambda_l ~ 1/(2l) for large l (radial closed-form oracle)
    U = TransversePotential(kind="power", alpha=2.0)
    lam = radial_eigenvalues(U, 1.0, 200)
    for l in (60, 120, 180):
        assert lam[l] * 2 * l == pytest.approx(1.0, rel=0.02)


def test_logspace_path_consistent_with_genlaguerre():
    # l = 120 uses the Gauss-Laguerre branch, l = 121 the log-space one;
    # compare both against the closed form at the seam
    U = TransversePotential(kind="gaussian", mu=0.5, beta=1.0)
    lam = radial_eigenvalues(U, 1.0, 124)
    exact = 2.0 ** -(np.arange(124) + 1.0)
    assert np.max(np.abs(lam[118:] / exact[118:] - 1.0)) < 1e-8


def test_counting_examples():
    assert counting([3.0, 1.0, 0.5], 0.7) == 2
    assert counting([3.0, 1.0, 0.5], 5.0) == 0
    lam = 2.0 ** -(np.arange(30) + 1.0)
    assert counting(lam, 0.1) == 3  # l = 0, 1, 2
    with pytest.raises(ValueError):
        counting(lam, 0.0)


def test_counting_monotone():
    lam = 2.0 ** -(np.arange(40) + 1.0)
    s = np.geomspace(1e-9, 0.9, 25)
    n = [counting(lam, x) for x in s]
    assert all(a >= b for a, b in zip(n, n[1:]))


def test_eigenvalue_domination(basis):
    for U in (TransversePotential(kind="gaussian", mu=0.5),
              TransversePotential(kind="power", alpha=3.0),
              TransversePotential(kind="bump", radius=1.0, height=0.7)):
        mat = assemble(U, basis)
        assert np.all(mat.eigenvalues >= -1e-12)
        assert np.all(mat.eigenvalues <= U.sup + 1e-12)


def test_general_assembly_hermitian_and_radial_diagonal():
    small = build_basis(MagneticModel(b0=1.0), Q_max=1, L_max=8)

    def anisotropic(x, y):
        return np.exp(-(x * x + 2.0 * y * y) / 2.0)

    mat = assemble(anisotropic, small, radial=False)
    assert np.max(np.abs(mat.matrix - mat.matrix.conj().T)) < 1e-12

    def radial_sym(x, y):
        return np.exp(-(x * x + y * y) / 2.0)

    rad = assemble(radial_sym, small, radial=False)
    off = rad.matrix - np.diag(np.diag(rad.matrix))
    assert np.max(np.abs(off)) < 1e-10
    lam = radial_eigenvalues(
        TransversePotential(kind="gaussian", mu=0.5, beta=1.0), 1.0, 8
    )
    assert np.allclose(np.diag(rad.matrix).real, lam, atol=1e-9)


def test_truncation_stability_radial():
    U = TransversePotential(kind="gaussian", mu=0.5, beta=1.0)
    lam64 = radial_eigenvalues(U, 1.0, 64)
    lam96 = radial_eigenvalues(U, 1.0, 96)
    mask = lam96[:64] > 1e-9
    assert np.max(np.abs(lam64[mask] - lam96[:64][mask])) < 1e-9


def test_comparator_power_examples():
    assert comparator_power(1.0, 2.0, 2.0 * math.pi, 1.0) == pytest.approx(0.5)
    assert comparator_power(0.01, 2.0, 2.0 * math.pi, 1.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        comparator_power(0.1, -1.0, 1.0, 1.0)


def test_comparator_quasi_exponential_examples():
    val = comparator_quasi_exponential(math.exp(-10.0), 1.0, 0.5, 1.0)
    assert val == pytest.approx(10.0 / math.log(2.0), rel=1e-12)
    val = comparator_quasi_exponential(math.exp(-4.0), 0.5, 1.0, 1.0)
    assert val == pytest.approx(8.0, rel=1e-12)
    # beta > 1 branch
    val = comparator_quasi_exponential(math.exp(-9.0), 2.0, 1.0, 1.0)
    assert val == pytest.approx(2.0 * 9.0 / math.log(9.0), rel=1e-12)
    with pytest.raises(OutOfAsymptoticRange):
        comparator_quasi_exponential(0.5, 1.0, 0.5, 1.0)


def test_comparator_compact_examples():
    assert comparator_compact(math.exp(-math.exp(2.0))) == pytest.approx(
        math.exp(2.0) / 2.0, rel=1e-12
    )
    assert comparator_compact(math.exp(-math.e)) == pytest.approx(math.e, rel=1e-12)
    with pytest.raises(OutOfAsymptoticRange):
        comparator_compact(0.9)


def test_schatten_gaussian_case(basis):
    # sum 4^-(l+1) = 1/3 against (1/2pi) ||U||_2^2 = 1/2
    U = TransversePotential(kind="gaussian", mu=0.5, beta=1.0)
    mat = assemble(U, basis)
    rep = schatten_check(mat, U, 2, MagneticModel(b0=1.0))
    assert rep.holds
    assert rep.lhs == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert rep.rhs == pytest.approx(0.5, rel=1e-9)


def test_schatten_zero_and_random_catalog(basis):
    rep = schatten_check(np.zeros(5), TransversePotential(kind="bump"),
                         2, MagneticModel(b0=1.0))
    assert rep.holds and rep.lhs == 0.0
    rng = np.random.default_rng(5)
    for _ in range(4):
        kind = rng.choice(["gaussian", "power", "bump"])
        if kind == "gaussian":
            U = TransversePotential(kind=kind, mu=rng.uniform(0.2, 2.0),
                                    beta=rng.uniform(0.6, 1.4))
        elif kind == "power":
            U = TransversePotential(kind=kind, alpha=rng.uniform(1.5, 4.0))
        else:
            U = TransversePotential(kind=kind, radius=rng.uniform(0.5, 2.0),
                                    height=rng.uniform(0.3, 1.5))
        mat = assemble(U, basis)
        rep = schatten_check(mat, U, 2, MagneticModel(b0=1.0))
        assert rep.holds and rep.slack > 0.0


def test_schatten_requires_even_q(basis):
    U = TransversePotential(kind="gaussian")
    with pytest.raises(ValueError):
        schatten_check(assemble(U, basis), U, 3, MagneticModel(b0=1.0))


def test_fit_synthetic_power_law():
    s = np.geomspace(1e-4, 1e-1, 20)
    n = np.ceil(0.5 / s).astype(int)
    curve = CountingCurve(s=s, n_plus=n)
    fit = fit_counting_law(curve, "power")
    assert abs(fit.exponent + 1.0) < 0.05
    assert fit.prefactor == pytest.approx(0.5, rel=0.15)


def test_fit_gaussian_slope():
    lam = 2.0 ** -(np.arange(64) + 1.0)
    s = np.geomspace(1e-8, 1e-3, 24)
    curve = CountingCurve.from_eigenvalues(lam, s)
    fit = fit_counting_law(curve, "quasi_exp", beta=1.0)
    assert abs(fit.slope * math.log(2.0) - 1.0) < 0.05


def test_fit_rejects_degenerate_curves():
    s = np.geomspace(1e-4, 1e-2, 12)
    with pytest.raises(FitRangeError):
        fit_counting_law(CountingCurve(s=s, n_plus=np.full(12, 5)), "power")
    with pytest.raises(FitRangeError):
        fit_counting_law(
            CountingCurve(s=np.geomspace(1e-3, 5e-3, 12),
                          n_plus=np.arange(12) + 1), "power"
        )
    with pytest.raises(FitRangeError):
        fit_counting_law(CountingCurve(s=s[:5], n_plus=np.arange(5) + 1), "power")


def test_counting_curve_truncation_guard():
    lam = 2.0 ** -(np.arange(10) + 1.0)
    with pytest.raises(TruncationError):
        CountingCurve.from_eigenvalues(lam, np.geomspace(1e-4, 1e-1, 8))


def test_counting_curve_rows_and_ratio():
    lam = 2.0 ** -(np.arange(40) + 1.0)
    s = np.geomspace(1e-4, 1e-1, 10)
    curve = CountingCurve.from_eigenvalues(
        lam, s, comparator=lambda x: abs(math.log(x)) / math.log(2.0),
        law="quasi_exp",
    )
    rows = list(curve.rows())
    assert len(rows) == 10
    ratios = [r[3] for r in rows]
    assert all(0.5 < r < 1.5 for r in ratios)

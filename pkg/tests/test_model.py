"""Data-model validation and effective-weight tests."""

import math

import numpy as np
import pytest
from scipy import integrate

from threshres.errors import FlavorError
from threshres.model import (
    AxialProfile,
    DomainRadii,
    MagneticModel,
    PerturbationSpec,
    TransversePotential,
    effective_weight,
    validate_hypothesis,
)


def make_spec(n=2, transverse=None, axial=None, matrix=None, **kw):
    transverse = transverse or TransversePotential(kind="gaussian", mu=0.5, beta=1.0)
    axial = axial or AxialProfile(kind="exponential", gamma=1.0)
    if matrix is None:
        matrix = np.zeros((n, n))
        matrix[0, 0] = 1.0
    return PerturbationSpec(
        n=n, transverse=transverse, axial=axial, matrix_profile=matrix, **kw
    )


def test_zeta_invariant():
    model = MagneticModel(b0=1.7)
    assert model.zeta == pytest.approx(2.0 * 1.7)
    pert = MagneticModel(b0=1.0, phi_tilde=lambda x: 0.1 * np.ones_like(x),
                         osc_phi_tilde=0.25)
    assert pert.zeta == pytest.approx(2.0 * math.exp(-0.5))


def test_constant_field_requires_zero_osc():
    with pytest.raises(ValueError):
        MagneticModel(b0=1.0, osc_phi_tilde=0.3)
    with pytest.raises(ValueError):
        MagneticModel(b0=-1.0)


def test_validate_accepts_exponential_axial():
    # v = exp(-2|x|) with delta = 1: |v| e^{2<x>} <= e^2 since <x> <= |x| + 1
    spec = make_spec(axial=AxialProfile(kind="exponential", gamma=1.0), delta=1.0)
    report = validate_hypothesis(spec)
    assert report.accepted
    assert report.axial_constant <= math.exp(2.0) + 1e-9
    assert report.axial_constant > 1.0


def test_validate_rejects_polynomial_axial():
    spec = make_spec(axial=AxialProfile(kind="power", p=1.0), delta=0.5)
    report = validate_hypothesis(spec)
    assert not report.accepted
    assert any("axial" in r for r in report.reasons)


def test_validate_rejects_non_hermitian_matrix():
    spec = make_spec(matrix=np.array([[0.0, 1.0], [-1.0, 0.0]]))
    report = validate_hypothesis(spec)
    assert not report.accepted
    assert any("Hermitian" in r for r in report.reasons)


def test_constructor_rejects_bad_rates():
    with pytest.raises(ValueError):
        make_spec(delta=0.0)
    with pytest.raises(ValueError):
        make_spec(m12=-1.0)
    with pytest.raises(FlavorError):
        make_spec(n=4, matrix=np.eye(2))


def test_validate_rejects_undershooting_transverse_decay():
    # claims m12 = 3 but the potential only decays like <r>^-2
    spec = make_spec(transverse=TransversePotential(kind="power", alpha=2.0),
                     m12=3.0)
    report = validate_hypothesis(spec)
    assert not report.accepted


def test_effective_weight_exponential_axial():
    # int exp(-2|x|) dx = 1, so W+ = U
    spec = make_spec()
    W, info = effective_weight(spec, "plus")
    assert info["axial_integral"] == pytest.approx(1.0, abs=1e-9)
    r = np.array([0.0, 1.0, 2.5])
    assert W(r) == pytest.approx(spec.transverse(r), rel=1e-9)


def test_effective_weight_zero_profile():
    spec = make_spec(matrix=np.array([[0.0, 0.0], [0.0, 1.0]]))
    W, info = effective_weight(spec, "plus")
    assert info["matrix_weight"] == 0.0
    assert np.all(W(np.linspace(0, 3, 7)) == 0.0)


def test_effective_weight_indicator_axial():
    spec = make_spec(axial=AxialProfile(kind="bump", half_width=1.0))
    W, info = effective_weight(spec, "plus")
    assert info["axial_integral"] == pytest.approx(2.0, abs=1e-8)
    assert W(np.array([0.0]))[0] == pytest.approx(2.0, rel=1e-8)


def test_effective_weight_minus_requires_dirac():
    spec = make_spec(n=2)
    with pytest.raises(FlavorError):
        effective_weight(spec, "minus")
    M = np.zeros((4, 4))
    M[2, 2] = 0.7
    spec4 = make_spec(n=4, matrix=M)
    W, info = effective_weight(spec4, "minus")
    assert info["matrix_weight"] == pytest.approx(0.7)


def test_effective_weight_uses_matrix_absolute_value():
    # V11 = 0 but |V|_11 = 1 for the off-diagonal profile
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = make_spec(matrix=M)
    _, info = effective_weight(spec, "plus")
    assert info["matrix_weight"] == pytest.approx(1.0)


def test_effective_weight_homogeneous_in_axial_scale():
    # scaling v by c > 0 scales W by c, to 1e-12 relative
    spec = make_spec()
    base, _ = effective_weight(spec, "plus")

    class Scaled(AxialProfile):
        pass

    scaled_axial = AxialProfile(kind="exponential", gamma=1.0)
    c = 3.7

    class _Axial:
        support_hint = None

        def __call__(self, x):
            return c * scaled_axial(x)

    spec_scaled = PerturbationSpec(
        n=2, transverse=spec.transverse, axial=_Axial(),
        matrix_profile=spec.matrix_profile, delta=1.0, m12=2.0,
    )
    W, _ = effective_weight(spec_scaled, "plus")
    r = np.geomspace(0.1, 10.0, 9)
    assert W(r) == pytest.approx(c * base(r), rel=1e-12)


def test_weight_inherits_transverse_decay():
    # W(r) <= C <r>^-m12 with the validation constant times the axial integral
    spec = make_spec(transverse=TransversePotential(kind="power", alpha=2.0),
                     m12=2.0)
    report = validate_hypothesis(spec)
    W, info = effective_weight(spec, "plus")
    r = np.geomspace(0.01, 50.0, 50)
    bound = report.transverse_constant * info["axial_integral"] * (
        1.0 + r * r
    ) ** (-spec.m12 / 2.0)
    assert np.all(W(r) <= bound * (1.0 + 1e-12))


def test_axial_integral_against_quad_oracle():
    axial = AxialProfile(kind="gaussian", a=2.0)
    spec = make_spec(axial=axial)
    _, info = effective_weight(spec, "plus")
    oracle, _ = integrate.quad(lambda x: math.exp(-2.0 * x * x), -np.inf, np.inf)
    assert info["axial_integral"] == pytest.approx(oracle, rel=1e-10)


def test_domain_radii_pauli():
    radii = DomainRadii.for_pauli(delta=1.0, zeta=2.0)
    assert 0 < radii.epsilon < 1.0
    with pytest.raises(ValueError):
        DomainRadii(epsilon=1.5).check(delta=1.0, zeta=2.0)


def test_domain_radii_dirac():
    radii = DomainRadii.for_dirac(delta=1.0, zeta=2.0, m=1.0)
    assert 0 < radii.eta < 0.25  # delta/(4m) = 0.25
    assert 2.0 < radii.mu < math.sqrt(3.0) + 1.0
    with pytest.raises(ValueError):
        DomainRadii(epsilon=0.5, eta=0.3, m=1.0, mu=2.5).check(delta=1.0, zeta=2.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fock_coefficients, fock_moments, psi_coherent, psi_oddcat
from tomoflow.fields import (
    ReconstructionConfig,
    TomographyParams,
    uniform_grid,
)
from tomoflow.states import (
    EXCITED_FIRST,
    GROUND,
    StateKind,
    StateSpec,
    marginal_eval,
    marginal_evaluator,
    sample_wigner_field,
    wigner_evaluator,
)
from tomoflow.tomography import (
    RadonMarginalEvaluator,
    characteristic_from_marginal,
    density_matrix_from_marginal,
    marginal_field_from_wigner,
    quadrature_moments,
    radon_marginal,
    uncertainty_product,
    wigner_from_characteristic,
)

COHERENT_A = StateSpec(StateKind.COHERENT, q0=1.2, p0=-0.7)
CAT_AXIS = StateSpec(StateKind.ODD_CAT, q0=math.sqrt(2.0), p0=0.0)
CAT_TILTED = StateSpec(StateKind.ODD_CAT, q0=1.1, p0=0.9)

PARAM_SET = [
    TomographyParams(1.0, 0.0),
    TomographyParams(0.0, -1.0),
    TomographyParams(0.6, 0.8, 1.1),
    TomographyParams(-1.5, 2.0, -0.4),
    TomographyParams(0.3, 0.1),
]

finite = dict(allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# forward projection


@pytest.mark.parametrize("state", [GROUND, EXCITED_FIRST, COHERENT_A, CAT_AXIS])
@pytest.mark.parametrize("params", PARAM_SET)
def test_radon_projection_matches_closed_form(state, params):
    x = uniform_grid(-8.0, 8.0, 201)
    got = radon_marginal(wigner_evaluator(state), params, x)
    want = marginal_eval(state, params, x)
    assert np.max(np.abs(got.values - want)) < 1e-8


@pytest.mark.parametrize("state", [GROUND, CAT_AXIS])
def test_radon_projection_from_sampled_field(state):
    field = sample_wigner_field(state)
    params = TomographyParams(0.6, 0.8)
    x = uniform_grid(-6.0, 6.0, 121)
    got = radon_marginal(field, params, x)
    want = marginal_eval(state, params, x)
    assert np.max(np.abs(got.values - want)) < 2e-3


def test_radon_projection_field_error_shrinks_with_grid():
    params = TomographyParams(0.8, -0.6, 0.3)
    x = uniform_grid(-6.0, 6.0, 121)
    want = marginal_eval(EXCITED_FIRST, params, x)
    errs = []
    for n in (121, 481):
        g = uniform_grid(-6.0, 6.0, n)
        field = sample_wigner_field(EXCITED_FIRST, g, g)
        got = radon_marginal(field, params, x)
        errs.append(np.max(np.abs(got.values - want)))
    assert errs[1] < errs[0] / 8.0


def test_radon_rejects_degenerate_direction():
    with pytest.raises(ValueError):
        radon_marginal(wigner_evaluator(GROUND), TomographyParams(0.0, 0.0))


def test_marginal_field_from_wigner_small_box():
    mu = uniform_grid(-1.0, 1.0, 5)
    nu = uniform_grid(-1.0, 1.0, 5)
    x = uniform_grid(-6.0, 6.0, 81)
    field = marginal_field_from_wigner(wigner_evaluator(GROUND), mu, nu, x)
    assert np.all(field.values[2, 2] == 0.0)
    want = marginal_eval(GROUND, TomographyParams(1.0, 0.5), x)
    got = field.values[4, 3]
    assert np.max(np.abs(got - want)) < 1e-8


# ---------------------------------------------------------------------------
# interpolating marginal source


@pytest.fixture(scope="module")
def cat_radon_source():
    return RadonMarginalEvaluator(wigner_evaluator(CAT_AXIS))


def test_radon_evaluator_matches_closed_form(cat_radon_source):
    x = uniform_grid(-7.0, 7.0, 301)
    for params in PARAM_SET:
        got = cat_radon_source(x, params.mu, params.nu, params.delta)
        want = marginal_eval(CAT_AXIS, params, x)
        assert np.max(np.abs(got - want)) < 1e-4


def test_radon_evaluator_zero_outside_table(cat_radon_source):
    out = cat_radon_source(np.array([-25.0, 25.0]), 1.0, 0.0)
    assert np.all(out == 0.0)


def test_radon_evaluator_rejects_vector_direction(cat_radon_source):
    with pytest.raises(ValueError):
        cat_radon_source(np.zeros(3), np.array([1.0, 2.0]), 0.0)


# ---------------------------------------------------------------------------
# characteristic function and Wigner inversion


def chi_ground(a, b):
    return np.exp(-(a * a + b * b) / 4.0)


def chi_excited1(a, b):
    rho2 = a * a + b * b
    return (1.0 - rho2 / 2.0) * np.exp(-rho2 / 4.0)


def chi_coherent(a, b, q0, p0):
    return np.exp(-(a * a + b * b) / 4.0) * np.exp(1j * (a * q0 + b * p0))


@pytest.mark.parametrize("state,chi_exact", [
    (GROUND, chi_ground),
    (EXCITED_FIRST, chi_excited1),
    (COHERENT_A, lambda a, b: chi_coherent(a, b, 1.2, -0.7)),
])
def test_characteristic_matches_analytic(state, chi_exact):
    chi = characteristic_from_marginal(marginal_evaluator(state))
    aa, bb = np.meshgrid(chi.a_grid, chi.b_grid, indexing="ij")
    assert np.max(np.abs(chi.values - chi_exact(aa, bb))) < 1e-8
    mid = (chi.a_grid.size // 2, chi.b_grid.size // 2)
    assert chi.values[mid] == pytest.approx(1.0, abs=1e-10)
    assert chi.hermitian_defect() < 1e-12


def test_characteristic_from_radon_table(cat_radon_source):
    chi = characteristic_from_marginal(cat_radon_source)
    direct = characteristic_from_marginal(marginal_evaluator(CAT_AXIS))
    assert np.max(np.abs(chi.values - direct.values)) < 2e-4


@pytest.mark.parametrize("state", [GROUND, EXCITED_FIRST, CAT_AXIS])
def test_wigner_inversion_roundtrip_closed_form(state):
    chi = characteristic_from_marginal(marginal_evaluator(state))
    grid = uniform_grid(-4.0, 4.0, 81)
    rebuilt = wigner_from_characteristic(chi, grid, grid)
    want = wigner_evaluator(state)(grid[:, None], grid[None, :])
    assert np.max(np.abs(rebuilt.values - want)) < 1e-6
    assert rebuilt.meta["max_imag"] < 1e-9


def test_wigner_inversion_normalization():
    chi = characteristic_from_marginal(marginal_evaluator(EXCITED_FIRST))
    grid = uniform_grid(-6.0, 6.0, 161)
    rebuilt = wigner_from_characteristic(chi, grid, grid)
    assert rebuilt.normalization() == pytest.approx(1.0, abs=1e-5)


# ---------------------------------------------------------------------------
# density matrix


def small_config(**kw):
    kw.setdefault("mu_samples", 401)
    return ReconstructionConfig(**kw)


def test_density_matrix_ground():
    q = uniform_grid(-4.0, 4.0, 41)
    rho = density_matrix_from_marginal(marginal_evaluator(GROUND), q,
                                       small_config())
    want = np.exp(-0.5 * (q[:, None] ** 2 + q[None, :] ** 2)) / math.sqrt(math.pi)
    assert np.max(np.abs(rho.values - want)) < 1e-6
    center = q.size // 2
    assert rho.values[center, center].real == pytest.approx(
        1.0 / math.sqrt(math.pi), abs=1e-8)
    assert rho.trace() == pytest.approx(1.0, abs=1e-6)
    assert rho.hermiticity_defect() < 1e-12
    assert rho.purity() == pytest.approx(1.0, abs=1e-4)


def test_density_matrix_excited_state():
    q = uniform_grid(-4.5, 4.5, 41)
    rho = density_matrix_from_marginal(marginal_evaluator(EXCITED_FIRST), q,
                                       small_config())
    want = (2.0 / math.sqrt(math.pi)) * np.outer(q, q) * np.exp(
        -0.5 * (q[:, None] ** 2 + q[None, :] ** 2))
    assert np.max(np.abs(rho.values - want)) < 1e-6


def test_density_matrix_coherent_carries_phase():
    q = uniform_grid(-4.0, 4.0, 41)
    psi = psi_coherent(1.2, -0.7)(q)
    want = np.outer(psi, np.conj(psi))
    rho = density_matrix_from_marginal(marginal_evaluator(COHERENT_A), q,
                                       small_config())
    assert np.max(np.abs(rho.values - want)) < 1e-6
    assert np.max(np.abs(rho.values.imag)) > 0.05  # genuinely complex


def test_density_matrix_cat():
    q = uniform_grid(-5.0, 5.0, 51)
    psi = psi_oddcat(1.1, 0.9)(q)
    want = np.outer(psi, np.conj(psi))
    # interference lobes sit near |a| ~ 2.2, so the direction scan needs
    # more headroom than the Gaussian default before its tail truncates
    rho = density_matrix_from_marginal(marginal_evaluator(CAT_TILTED), q,
                                       small_config(mu_range=(-10.0, 10.0),
                                                    mu_samples=501))
    assert np.max(np.abs(rho.values - want)) < 1e-6
    eigs = rho.eigenvalues()
    assert eigs[-1] == pytest.approx(1.0, abs=1e-3)
    assert np.all(eigs[:-1] < 1e-3)


def test_density_matrix_scale_invariance():
    q = uniform_grid(-4.0, 4.0, 33)
    base = density_matrix_from_marginal(marginal_evaluator(CAT_AXIS), q,
                                        small_config())
    for s in (0.8, 1.6):
        other = density_matrix_from_marginal(marginal_evaluator(CAT_AXIS), q,
                                             small_config(s=s))
        assert np.max(np.abs(other.values - base.values)) < 1e-4


def test_density_matrix_from_radon_table(cat_radon_source):
    q = uniform_grid(-4.0, 4.0, 33)
    psi = psi_oddcat(math.sqrt(2.0), 0.0)(q)
    want = np.outer(psi, np.conj(psi))
    rho = density_matrix_from_marginal(cat_radon_source, q, small_config())
    assert np.max(np.abs(rho.values - want)) < 1e-3
    assert rho.hermiticity_defect() < 1e-6


# ---------------------------------------------------------------------------
# moments


def test_moments_match_fock_oracle():
    x = uniform_grid(-18.0, 18.0, 2401)
    for state, kind in [(COHERENT_A, "coherent"), (CAT_TILTED, "oddcat")]:
        m = fock_moments(fock_coefficients(kind, state.q0, state.p0))
        cov = m["qp"] - m["q"] * m["p"]
        for params in PARAM_SET:
            mean, var = quadrature_moments(marginal_evaluator(state), params, x)
            want_mean = params.mu * m["q"] + params.nu * m["p"] + params.delta
            want_var = (params.mu ** 2 * (m["q2"] - m["q"] ** 2)
                        + params.nu ** 2 * (m["p2"] - m["p"] ** 2)
                        + 2.0 * params.mu * params.nu * cov)
            assert mean == pytest.approx(want_mean, abs=1e-8)
            assert var == pytest.approx(want_var, abs=1e-8)


def test_uncertainty_products():
    x = uniform_grid(-12.0, 12.0, 1501)
    assert uncertainty_product(marginal_evaluator(GROUND), x) == pytest.approx(
        0.25, abs=1e-9)
    assert uncertainty_product(marginal_evaluator(EXCITED_FIRST), x) == pytest.approx(
        2.25, abs=1e-8)
    assert uncertainty_product(marginal_evaluator(COHERENT_A), x) == pytest.approx(
        0.25, abs=1e-9)
    for state in (CAT_AXIS, CAT_TILTED):
        assert uncertainty_product(marginal_evaluator(state), x) > 0.25


@settings(max_examples=10, deadline=None)
@given(delta=st.floats(-2, 2, **finite))
def test_radon_slice_obeys_shift_identity(delta):
    x = uniform_grid(-6.0, 6.0, 61)
    w = wigner_evaluator(EXCITED_FIRST)
    shifted = radon_marginal(w, TomographyParams(0.8, 0.6, delta), x)
    base = radon_marginal(w, TomographyParams(0.8, 0.6), x - delta)
    assert np.max(np.abs(shifted.values - base.values)) < 1e-12

import math

import numpy as np
import pytest

from dagster_fracmonge.extension import (
    DifferenceQuotient,
    ExtrapolationError,
    change_variables,
    closed_form_example,
    default_y_grid,
    dirichlet_laplacian_closed_form,
    energy_identity_check,
    finite_energy_check,
    graded_grid,
    neumann_trace,
    pde_residual,
    pde_residual_convergence,
    richardson_trace,
    solve_extension_div,
    y_to_z,
    z_to_y,
)
from dagster_fracmonge.fractional import frac_apply_spectral
from dagster_fracmonge.special_fn import frac_params
from dagster_fracmonge.suites import truncate_basis
from dagster_fracmonge.testing import FracMongeTestContext


def low_modes(basis) -> np.ndarray:
    return basis.vectors[:, 0] + 0.5 * basis.vectors[:, 2] - 0.25 * basis.vectors[:, 4]


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_change_of_variable_maps_are_inverse(s: float):
    y = np.array([0.0, 1e-6, 0.3, 2.0, 17.0])
    np.testing.assert_allclose(z_to_y(y_to_z(y, s), s), y, rtol=1e-12, atol=1e-300)
    assert float(y_to_z(2.0 * s, s)) == pytest.approx(1.0)


def test_graded_grid():
    grid = graded_grid(1e-3, 2.0, 1.5)
    assert grid[0] == 1e-3 and grid[-1] == 2.0
    assert np.all(np.diff(grid) > 0.0)
    np.testing.assert_allclose(grid[1:-1] / grid[:-2], 1.5, rtol=1e-12)
    assert default_y_grid(4.0)[-1] == pytest.approx(20.0)
    with pytest.raises(ValueError):
        graded_grid(0.0, 1.0)


def test_extension_has_the_right_trace_and_decays(fracmonge_test_context: FracMongeTestContext):
    problem = fracmonge_test_context.interval()
    u = low_modes(problem.basis)
    ext = solve_extension_div(problem.basis, 0.4, u, section=problem.section)
    assert ext.form == "y"
    np.testing.assert_allclose(ext.trace(), u, atol=1e-12)
    np.testing.assert_allclose(ext.at(0.0), u, atol=1e-12)
    far = ext.evaluate(np.array([50.0]))
    assert np.max(np.abs(far)) <= 1e-6 * np.max(np.abs(u))
    # even reflection
    np.testing.assert_allclose(ext.at(-0.7), ext.at(0.7), atol=0.0)
    with pytest.raises(ValueError):
        solve_extension_div(problem.basis, 0.4, u, y_grid=np.array([-1.0, 1.0]))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_divergence_and_nondivergence_forms_agree(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    u = problem.section.height - problem.section.delta_from(problem.section.center)
    ext = solve_extension_div(problem.basis, s, u)
    y = np.linspace(0.0, 4.0 / math.sqrt(problem.basis.lambda_1), 50)
    U = ext.evaluate(y)
    z_form = change_variables(ext)
    assert z_form.form == "z"
    V = z_form.evaluate(y_to_z(y, s))
    assert np.max(np.abs(U - V)) <= 1e-12 * np.max(np.abs(U))
    back = change_variables(z_form)
    np.testing.assert_allclose(back.grid, ext.grid, rtol=1e-12)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_analytic_neumann_traces(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    u = low_modes(problem.basis)
    power = frac_apply_spectral(problem.basis, s, u).values
    params = frac_params(s)
    ext = solve_extension_div(problem.basis, s, u)
    np.testing.assert_allclose(neumann_trace(ext), params.c_s * power, atol=1e-10)
    np.testing.assert_allclose(neumann_trace(change_variables(ext)), params.d_s * power, atol=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_difference_quotient_trace(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    u = low_modes(problem.basis)
    reference = frac_params(s).d_s * frac_apply_spectral(problem.basis, s, u).values
    field_z = change_variables(solve_extension_div(problem.basis, s, u))
    quotient = neumann_trace(field_z, DifferenceQuotient())
    assert np.max(np.abs(quotient - reference)) <= 1e-2 * np.max(np.abs(reference))

    trace = richardson_trace(field_z, DifferenceQuotient())
    assert trace.spread <= 1e-4
    assert trace.estimates.shape[1] == problem.operators.n


def test_difference_quotient_needs_four_levels(fracmonge_test_context: FracMongeTestContext):
    problem = fracmonge_test_context.interval()
    ext = solve_extension_div(problem.basis, 0.5, low_modes(problem.basis))
    with pytest.raises(ExtrapolationError):
        richardson_trace(ext, DifferenceQuotient(levels=(10, 11, 12)))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_energy_identities(fracmonge_test_context: FracMongeTestContext, s: float):
    basis = truncate_basis(fracmonge_test_context.interval().basis, 20)
    rng = np.random.default_rng(4)
    u = basis.synthesize(rng.normal(size=basis.m) / (1.0 + np.arange(basis.m)) ** 3)

    identity = energy_identity_check(basis, s, u)
    assert identity.per_mode_gap <= 1e-4
    assert identity.gap <= 1e-4

    finite = finite_energy_check(basis, s, u)
    assert finite.gap <= 1e-4
    assert finite.ratio == pytest.approx(frac_params(s).energy_ratio, rel=1e-6)


@pytest.mark.parametrize("s", [0.3, 0.6])
def test_pde_residual_converges_at_second_order(fracmonge_test_context: FracMongeTestContext, s: float):
    basis = truncate_basis(fracmonge_test_context.interval().basis, 20)
    decay = 1.0 / (1.0 + np.arange(basis.m)) ** 3
    ext = change_variables(solve_extension_div(basis, s, basis.synthesize(decay)))
    z_scale = float(y_to_z(1.0 / math.sqrt(basis.lambda_1), s))
    levels = z_scale * np.array([0.25, 0.5, 0.75, 1.0])
    study = pde_residual_convergence(ext, levels, z_scale * np.array([0.08, 0.04, 0.02, 0.01]))
    assert np.all(np.diff(study.residuals) < 0.0)
    assert study.slope > 1.5
    with pytest.raises(ValueError):
        pde_residual(ext, levels, z_scale)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_closed_form_example(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    example = closed_form_example(problem.section, s)
    x = problem.x[[50, 100, 150]]
    np.testing.assert_allclose(example.V(x, 0.0), example.v_phi(x), rtol=1e-12)
    np.testing.assert_allclose(example.trace_exact(x), frac_params(s).d_s * example.power_exact(x), rtol=1e-12)

    z, h = 0.3, 1e-6
    fd = (example.g(x, z + h) - example.g(x, z - h)) / (2.0 * h)
    np.testing.assert_allclose(example.g_derivative(x, z), fd, rtol=1e-6)
    with pytest.raises(ValueError):
        example.alpha(np.array([[2.0]]))


def test_dirichlet_laplacian_closed_form():
    values = dirichlet_laplacian_closed_form(np.array([[0.0, 0.0], [0.6, 0.0]]), 0.5, 2)
    assert values[0] == pytest.approx(2.0)
    assert values[1] == pytest.approx(2.0 * 0.8)

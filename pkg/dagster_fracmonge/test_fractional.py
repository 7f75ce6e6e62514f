import math

import numpy as np
import pytest
import scipy.integrate as si
import scipy.special as sc

from dagster_fracmonge.discrete_ops import CrankNicolson, EigenExp
from dagster_fracmonge.extension import closed_form_example, compare_closed_form
from dagster_fracmonge.fractional import (
    FracField,
    QuadratureError,
    QuadSpec,
    frac_apply_semigroup,
    frac_apply_spectral,
    frac_solve_semigroup,
    frac_solve_spectral,
    interpolation_check,
    max_principle_check,
    scalar_inverse_power_quadrature,
    scalar_power_quadrature,
)
from dagster_fracmonge.testing import FracMongeTestContext

CATALAN = 0.915965594177219015


def smooth_field(x: np.ndarray) -> np.ndarray:
    return (1.0 - x**2) * (1.0 + 0.3 * np.sin(2.0 * x + 0.4))


def random_smooth_fields(x: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """(1 - x^2)(1 + sum_j a_j sin(b_j x + c_j)), one field per column"""
    columns = []
    for _ in range(count):
        a = 0.3 * rng.normal(size=3)
        b = rng.normal(size=3)
        c = rng.uniform(0.0, 2.0 * math.pi, size=3)
        columns.append((1.0 - x**2) * (1.0 + np.sin(np.outer(x, b) + c) @ a))
    return np.column_stack(columns)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_spectral_apply_and_solve_are_inverse(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    v = smooth_field(problem.x[:, 0])
    applied = frac_apply_spectral(problem.basis, s, v, section=problem.section)
    assert applied.provenance == "spectral"
    assert applied.coefficients is not None
    restored = frac_solve_spectral(problem.basis, s, applied.values)
    np.testing.assert_allclose(restored.values, v, atol=1e-10)
    full = applied.full()
    assert full.shape == (problem.operators.n + 2,)
    assert full[0] == 0.0 and full[-1] == 0.0


def test_spectral_power_of_an_eigenvector(fracmonge_test_context: FracMongeTestContext):
    basis = fracmonge_test_context.interval().basis
    e2 = basis.vectors[:, 1]
    field = frac_apply_spectral(basis, 0.3, e2)
    np.testing.assert_allclose(field.values, basis.eigenvalues[1] ** 0.3 * e2, atol=1e-10)
    np.testing.assert_allclose(field.to_coefficients(basis), field.coefficients, atol=1e-10)


def test_field_without_section_has_no_full_values():
    field = FracField(s=0.5, values=np.ones(3), provenance="closed_form")
    with pytest.raises(ValueError):
        field.full()


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_exact_semigroup_matches_spectral(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    v = smooth_field(problem.x[:, 0])
    spec = QuadSpec(scheme=EigenExp(basis=problem.basis))

    applied = frac_apply_semigroup(problem.operators, s, v, spec)
    expected = frac_apply_spectral(problem.basis, s, v).values
    assert applied.provenance == "semigroup"
    assert applied.error_estimate is not None and applied.error_estimate <= 1e-10
    assert np.max(np.abs(applied.values - expected)) <= 1e-7 * np.max(np.abs(expected))

    solved = frac_solve_semigroup(problem.operators, s, v, spec)
    expected = frac_solve_spectral(problem.basis, s, v).values
    assert np.max(np.abs(solved.values - expected)) <= 1e-7 * np.max(np.abs(expected))


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_crank_nicolson_semigroup_matches_spectral_in_the_m_norm(
    fracmonge_test_context: FracMongeTestContext, s: float
):
    problem = fracmonge_test_context.interval(resolution=2000)
    ops, basis = problem.operators, problem.basis
    samples = random_smooth_fields(problem.x[:, 0], fracmonge_test_context.rng(), 5)
    spec = QuadSpec(scheme=CrankNicolson(), lambda_1=basis.lambda_1, lambda_max=basis.lambda_max)
    marched = frac_apply_semigroup(ops, s, samples, spec)
    exact = frac_apply_spectral(basis, s, samples).values
    assert marched.values.shape == samples.shape
    assert marched.error_estimate is not None and marched.error_estimate <= 1e-4
    for k in range(samples.shape[1]):
        gap = ops.m_norm(marched.values[:, k] - exact[:, k])
        assert gap <= 1e-3 * ops.m_norm(exact[:, k])


def test_routes_act_on_each_column(fracmonge_test_context: FracMongeTestContext):
    problem = fracmonge_test_context.interval()
    samples = random_smooth_fields(problem.x[:, 0], fracmonge_test_context.rng(), 3)
    spec = QuadSpec(scheme=EigenExp(basis=problem.basis))
    applied = frac_apply_spectral(problem.basis, 0.4, samples)
    solved = frac_solve_spectral(problem.basis, 0.4, samples)
    marched = frac_apply_semigroup(problem.operators, 0.4, samples, spec)
    assert applied.values.shape == solved.values.shape == marched.values.shape == samples.shape
    for k in range(samples.shape[1]):
        column = samples[:, k]
        single = frac_apply_spectral(problem.basis, 0.4, column).values
        np.testing.assert_allclose(applied.values[:, k], single, atol=1e-12)
        solved_single = frac_solve_spectral(problem.basis, 0.4, column).values
        np.testing.assert_allclose(solved.values[:, k], solved_single, atol=1e-12)
        scale = np.max(np.abs(single))
        assert np.max(np.abs(marched.values[:, k] - single)) <= 1e-7 * scale


@pytest.mark.parametrize("lam", [0.5, 3.0, 1.0e3])
@pytest.mark.parametrize("s", [0.2, 0.5, 0.9])
def test_scalar_quadratures_reproduce_powers(lam: float, s: float):
    assert scalar_power_quadrature(lam, s) == pytest.approx(lam**s, rel=1e-8)
    assert scalar_inverse_power_quadrature(lam, s) == pytest.approx(lam ** (-s), rel=1e-8)


def test_scalar_quadrature_matches_adaptive_integration():
    lam, s = 7.0, 0.35

    def integrand(tt: float) -> float:
        return -math.expm1(-lam * tt) * tt ** (-1.0 - s)

    head, _ = si.quad(integrand, 0.0, 1.0, limit=200)
    tail, _ = si.quad(integrand, 1.0, math.inf, limit=200)
    expected = s / sc.gamma(1.0 - s) * (head + tail)
    assert scalar_power_quadrature(lam, s) == pytest.approx(expected, rel=1e-7)


def test_semigroup_quadrature_reports_non_convergence(fracmonge_test_context: FracMongeTestContext):
    problem = fracmonge_test_context.interval()
    spec = QuadSpec(scheme=EigenExp(basis=problem.basis), max_nodes=8)
    with pytest.raises(QuadratureError) as excinfo:
        frac_apply_semigroup(problem.operators, 0.5, smooth_field(problem.x[:, 0]), spec)
    assert excinfo.value.tolerance == 1e-10


@pytest.mark.parametrize("s", [0.0, 1.0, 1.2])
def test_semigroup_routes_reject_orders_outside_unit_interval(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    with pytest.raises(ValueError, match=r"\(0,1\)"):
        frac_apply_semigroup(problem.operators, s, np.ones(problem.operators.n))


def test_quad_spec_defaults():
    assert QuadSpec().resolved_tolerance == 1e-10
    assert QuadSpec(scheme=CrankNicolson()).resolved_tolerance == 1e-4
    assert QuadSpec(tolerance=1e-6).resolved_tolerance == 1e-6
    assert QuadSpec(min_nodes=16, max_nodes=64).node_schedule() == [16, 32, 64]


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_interpolation_inequality(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    v = smooth_field(problem.x[:, 0])
    report = interpolation_check(problem.operators, problem.basis, s, v)
    assert report.lhs > 0.0
    assert report.passed


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_fractional_power_is_nonpositive_at_an_interior_minimum(fracmonge_test_context: FracMongeTestContext, s: float):
    problem = fracmonge_test_context.interval()
    x = problem.x[:, 0]
    node = 60
    v = (x - x[node]) ** 2
    v[node] = 0.0
    report = max_principle_check(problem.basis, s, v, node, monotone=problem.operators.is_monotone)
    assert report.asserted
    assert report.value < 0.0
    assert report.passed


def test_max_principle_check_rejects_bad_inputs(fracmonge_test_context: FracMongeTestContext):
    basis = fracmonge_test_context.interval().basis
    v = np.ones(basis.m)
    with pytest.raises(ValueError):
        max_principle_check(basis, 0.5, v, 3)
    v[3] = 0.0
    v[5] = -1.0
    with pytest.raises(ValueError):
        max_principle_check(basis, 0.5, v, 3)


def test_closed_form_is_off_at_the_center_of_the_interval(fracmonge_test_context: FracMongeTestContext):
    # v = 1 - x^2 on (-1, 1) with L = -(1/2) d^2/dx^2. The cosine series gives
    # L^(1/2) v(0) = 16 G / (sqrt(2) pi^2), not the value 1 = n^s v(0)^(1-s).
    problem = fracmonge_test_context.interval(resolution=201)
    center = int(np.argmin(np.abs(problem.x[:, 0])))
    assert problem.x[center, 0] == pytest.approx(0.0, abs=1e-12)

    example = closed_form_example(problem.section, 0.5)
    comparison = compare_closed_form(example, problem.basis)
    assert comparison.stated[center] == pytest.approx(1.0)
    assert comparison.computed[center] == pytest.approx(16.0 * CATALAN / (math.sqrt(2.0) * math.pi**2), abs=1e-2)
    assert comparison.sup_relative_error > 1e-2

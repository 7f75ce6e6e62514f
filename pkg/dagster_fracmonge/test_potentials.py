import numpy as np
import pytest

from dagster_fracmonge.potentials import (
    AnisoPotential,
    HsPotential,
    NotPositiveDefiniteError,
    PerturbedQuadPotential,
    Power1dPotential,
    QuadPotential,
    as_points,
    delta,
    derivative_check,
    mu_density,
    potential_from_preset,
)
from dagster_fracmonge.utils import format_value, loglog_slope, parallel_map, relative_gap

PRESETS = [
    QuadPotential(dim=1, c=1.0),
    QuadPotential(dim=2, c=0.5),
    AnisoPotential(a11=2.0, a12=0.5, a22=1.0),
    Power1dPotential(p=4.0),
    PerturbedQuadPotential(dim=2, eps=0.1),
]


@pytest.mark.parametrize("phi", PRESETS, ids=lambda phi: f"{phi.label}-{phi.dim}d")
def test_derivatives_match_finite_differences(phi):
    rng = np.random.default_rng(3)
    points = rng.uniform(0.2, 1.5, size=(20, phi.dim))
    assert derivative_check(phi, points).passed(1e-6)


@pytest.mark.parametrize("phi", PRESETS, ids=lambda phi: f"{phi.label}-{phi.dim}d")
def test_delta_is_nonnegative_and_vanishes_on_the_diagonal(phi):
    rng = np.random.default_rng(5)
    x0 = rng.uniform(0.2, 1.0, size=(50, phi.dim))
    x = rng.uniform(-1.0, 1.0, size=(50, phi.dim))
    assert np.all(delta(phi, x0, x) >= -1e-12)
    assert np.all(np.abs(delta(phi, x0, x0)) <= 1e-12)


def test_quad_delta_is_scaled_distance():
    phi = QuadPotential(dim=2, c=3.0)
    assert delta(phi, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(6.0)


def test_mu_density_of_presets():
    assert mu_density(QuadPotential(dim=2, c=1.0), [0.3, 0.4]) == pytest.approx(4.0)
    assert mu_density(AnisoPotential(a11=2.0, a12=0.5, a22=1.0), [0.0, 0.0]) == pytest.approx(1.75)
    assert mu_density(Power1dPotential(p=4.0), [2.0]) == pytest.approx(12.0)


def test_mu_density_rejects_degenerate_points():
    with pytest.raises(NotPositiveDefiniteError) as excinfo:
        mu_density(Power1dPotential(p=4.0), np.array([[1.0], [0.0]]))
    assert excinfo.value.point.tolist() == [0.0]


def test_hs_potential_slice_radius():
    h = HsPotential(s=0.5)
    radius = h.slice_radius(2.0)
    assert h.value([radius]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        HsPotential(s=1.0)


def test_as_points_normalizes_scalars_and_flat_input():
    assert as_points(0.5, 1).shape == (1, 1)
    assert as_points([0.1, 0.2, 0.3], 1).shape == (3, 1)
    assert as_points([0.1, 0.2], 2).shape == (2,)
    with pytest.raises(ValueError):
        as_points([0.1, 0.2, 0.3], 2)


def test_potential_from_preset():
    assert isinstance(potential_from_preset("quad", dim=2, c=2.0), QuadPotential)
    assert isinstance(potential_from_preset("power1d", p=3.0), Power1dPotential)
    with pytest.raises(ValueError):
        potential_from_preset("power1d", dim=2)
    with pytest.raises(ValueError):
        potential_from_preset("quad", c=-1.0)
    with pytest.raises(NotPositiveDefiniteError):
        potential_from_preset("aniso", dim=2, a11=1.0, a12=2.0, a22=1.0)


def test_utils():
    assert parallel_map(lambda x: x * x, range(5)) == [0, 1, 4, 9, 16]
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.bool_(True)) == "true"
    assert format_value(None) == ""
    assert format_value(np.int64(3)) == "3"
    assert loglog_slope([1.0, 2.0, 4.0], [1.0, 4.0, 16.0]) == pytest.approx(2.0)
    assert relative_gap(0.0, 0.0) == 0.0
    assert relative_gap(1.0, 2.0) == pytest.approx(0.5)

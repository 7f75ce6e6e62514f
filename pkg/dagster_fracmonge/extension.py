"""Mode-sum solutions of the extension problems.

With u = sum_k u_k e_k, the divergence-form extension is
U(x, y) = sum_k psi_s(sqrt(lambda_k) y) u_k e_k(x) and the nondivergence
form is V(x, z) = U(x, 2s z^(1/(2s))). Traces, energies and PDE residuals are
evaluated mode by mode.
"""

import logging
import math
import typing as t
from dataclasses import dataclass, field, replace

import numpy as np

from dagster_fracmonge.discrete_ops import SpectralBasis
from dagster_fracmonge.fractional import QuadratureError, frac_apply_spectral
from dagster_fracmonge.potentials import as_points
from dagster_fracmonge.quadrature import composite
from dagster_fracmonge.sections import Section
from dagster_fracmonge.special_fn import bessel_k, frac_params, gamma, profile, profile_derivative
from dagster_fracmonge.types import FloatArray, FracMongeError
from dagster_fracmonge.utils import loglog_slope, parallel_map

logger = logging.getLogger(__name__)

Form = t.Literal["y", "z"]

GRID_RATIO = 1.15
GRID_START = 1.0e-10


class ExtrapolationError(FracMongeError):
    def __init__(self, message: str, estimates: FloatArray) -> None:
        super().__init__(message)
        self.estimates = estimates


def graded_grid(lo: float, hi: float, ratio: float = GRID_RATIO) -> FloatArray:
    """Geometric grid lo, lo*ratio, ..., ending exactly at hi."""
    if not 0.0 < lo < hi:
        raise ValueError(f"graded grid needs 0 < lo < hi, got ({lo}, {hi})")
    count = int(math.ceil(math.log(hi / lo) / math.log(ratio)))
    grid = lo * ratio ** np.arange(count + 1, dtype=float)
    grid[-1] = hi
    return grid


def default_y_grid(lambda_1: float) -> FloatArray:
    return graded_grid(GRID_START, 40.0 / math.sqrt(lambda_1))


def y_to_z(y: FloatArray | float, s: float) -> FloatArray:
    """z = (y / 2s)^(2s)"""
    return (np.asarray(y, dtype=float) / (2.0 * s)) ** (2.0 * s)


def z_to_y(z: FloatArray | float, s: float) -> FloatArray:
    """y = 2s z^(1/(2s))"""
    return 2.0 * s * np.asarray(z, dtype=float) ** (1.0 / (2.0 * s))


@dataclass(kw_only=True)
class ExtensionField:
    """A mode-sum extension of the interior nodal field sum_k u_k e_k.

    `form` tells which variable `grid` and the evaluators use: "y" for the
    divergence form, "z" for the nondivergence form. Negative arguments
    evaluate the even reflection.
    """

    basis: SpectralBasis
    s: float
    coefficients: FloatArray
    form: Form
    grid: FloatArray
    section: Section | None = None

    @property
    def roots(self) -> FloatArray:
        return np.sqrt(self.basis.eigenvalues)

    def to_y(self, w: FloatArray | float) -> FloatArray:
        w = np.abs(np.asarray(w, dtype=float))
        return w if self.form == "y" else z_to_y(w, self.s)

    def profiles(self, w: FloatArray | float) -> FloatArray:
        """Mode profiles with shape (len(w), m)."""
        y = np.atleast_1d(self.to_y(w))
        return profile(self.s, np.outer(y, self.roots))

    def evaluate(self, w: FloatArray | float) -> FloatArray:
        """Interior nodal values with shape (len(w), n)."""
        return (self.profiles(w) * self.coefficients) @ self.basis.vectors.T

    def at(self, w: float) -> FloatArray:
        return self.evaluate(np.array([w]))[0]

    def trace(self) -> FloatArray:
        """The boundary datum u = U(., 0)."""
        return self.basis.synthesize(self.coefficients)


def solve_extension_div(
    basis: SpectralBasis,
    s: float,
    u: FloatArray,
    y_grid: FloatArray | None = None,
    section: Section | None = None,
) -> ExtensionField:
    """The divergence-form extension U(x, y) = sum_k c_k(y) u_k e_k(x), with
    c_k(y) = psi_s(sqrt(lambda_k) y). Evaluation is lazy."""
    frac_params(s)
    grid = default_y_grid(basis.lambda_1) if y_grid is None else np.asarray(y_grid, dtype=float)
    if np.any(grid <= 0.0):
        raise ValueError("the y grid must be positive")
    return ExtensionField(
        basis=basis, s=s, coefficients=basis.coefficients(u), form="y", grid=grid, section=section
    )


def change_variables(ext: ExtensionField) -> ExtensionField:
    """Switches between the y-form and the z-form, V(x, z) = U(x, 2s z^(1/(2s)))."""
    if ext.form == "y":
        return replace(ext, form="z", grid=y_to_z(ext.grid, ext.s))
    return replace(ext, form="y", grid=z_to_y(ext.grid, ext.s))


@dataclass(frozen=True, kw_only=True)
class AnalyticTrace:
    pass


@dataclass(frozen=True, kw_only=True)
class DifferenceQuotient:
    """(V(x,0) - V(x,z_j)) / z_j at z_j = 2^-j, Richardson-extrapolated with
    exponents 1/s - 1 and then 1/s."""

    levels: tuple[int, ...] = tuple(range(10, 21))
    cauchy_tolerance: float = 1.0e-4


TraceMethod = AnalyticTrace | DifferenceQuotient


@dataclass(kw_only=True)
class ExtrapolatedTrace:
    values: FloatArray
    estimates: FloatArray
    empirical_exponent: float
    spread: float


def richardson_trace(ext: ExtensionField, method: DifferenceQuotient) -> ExtrapolatedTrace:
    """Difference-quotient estimate of -V_z(x, 0) = d_s L^s v.

    Raises:
        ExtrapolationError: fewer than four levels, or the twice
            extrapolated sequence is not Cauchy to `cauchy_tolerance`
    """
    if len(method.levels) < 4:
        raise ExtrapolationError("richardson extrapolation needs at least four levels", np.zeros(0))
    z_form = ext if ext.form == "z" else change_variables(ext)
    s = z_form.s
    levels = np.asarray(sorted(method.levels), dtype=float)
    z = 2.0**-levels
    base = z_form.trace()
    quotients = (base - z_form.evaluate(z)) / z[:, np.newaxis]

    estimates = quotients
    for p in (1.0 / s - 1.0, 1.0 / s):
        factor = 2.0**p
        estimates = (factor * estimates[1:] - estimates[:-1]) / (factor - 1.0)

    scale = max(float(np.max(np.abs(estimates[-1]))), np.finfo(float).tiny)
    spread = float(np.max(np.abs(estimates[-1] - estimates[-2]))) / scale
    diffs = quotients[:-1] - quotients[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.abs(diffs[-3]) / np.abs(diffs[-2])
    usable = np.isfinite(ratios) & (ratios > 0.0)
    exponent = float(np.median(np.log2(ratios[usable]))) if np.any(usable) else math.nan
    logger.debug("trace extrapolation", extra=dict(spread=spread, exponent=exponent))
    if not spread <= method.cauchy_tolerance:
        raise ExtrapolationError(
            f"extrapolated traces are not Cauchy: last relative change {spread:.3e}", estimates
        )
    return ExtrapolatedTrace(values=estimates[-1], estimates=estimates, empirical_exponent=exponent, spread=spread)


def neumann_trace(ext: ExtensionField, method: TraceMethod | None = None) -> FloatArray:
    """The Neumann trace of the field in its own form.

    For the z-form this is -lim V_z = d_s L^s v, for the y-form
    -lim y^a U_y = c_s L^s u. The analytic method sums the mode limits, the
    difference quotient extrapolates the z-form and rescales by c_s / d_s
    when the field is in the y-form.
    """
    params = frac_params(ext.s)
    constant = params.d_s if ext.form == "z" else params.c_s
    match method or AnalyticTrace():
        case AnalyticTrace():
            return constant * ext.basis.synthesize(ext.basis.eigenvalues**ext.s * ext.coefficients)
        case DifferenceQuotient() as dq:
            values = richardson_trace(ext, dq).values
            return values if ext.form == "z" else values * params.c_s / params.d_s
        case _:
            raise TypeError(f"unknown trace method {method!r}")


@dataclass(kw_only=True)
class ClosedFormExample:
    """v_phi(x) = R - delta_phi(x0, x) with its separable extension
    V(x, z) = v_phi(x) g(x, z), where g(x, .) is the profile for
    alpha = n / v_phi(x)."""

    section: Section
    s: float

    @property
    def n(self) -> int:
        return self.section.dim

    def v_phi(self, x: FloatArray) -> FloatArray:
        return self.section.height - np.asarray(self.section.potential.bregman(self.section.center, x))

    def alpha(self, x: FloatArray) -> FloatArray:
        v = self.v_phi(x)
        if np.any(v <= 0.0):
            raise ValueError("the closed form example is only defined inside the section")
        return self.n / v

    def _argument(self, x: FloatArray, z: FloatArray | float) -> FloatArray:
        z = np.asarray(z, dtype=float)
        return 2.0 * self.s * np.sqrt(self.alpha(x)) * z ** (1.0 / (2.0 * self.s))

    def g(self, x: FloatArray, z: FloatArray | float) -> FloatArray:
        return profile(self.s, self._argument(x, z))

    def g_derivative(self, x: FloatArray, z: FloatArray | float) -> FloatArray:
        """dg/dz = -(2 s^s / Gamma(s)) alpha^((s+1)/2) z^(1/(2s) - 1/2) K_{1-s}(2s sqrt(alpha) z^(1/(2s)))"""
        s = self.s
        z = np.asarray(z, dtype=float)
        beta = self._argument(x, z)
        scale = 2.0 * s**s / gamma(s)
        return -scale * self.alpha(x) ** ((s + 1.0) / 2.0) * z ** (1.0 / (2.0 * s) - 0.5) * bessel_k(1.0 - s, beta)

    def V(self, x: FloatArray, z: FloatArray | float) -> FloatArray:
        return self.v_phi(x) * self.g(x, z)

    def trace_exact(self, x: FloatArray) -> FloatArray:
        """d_s n^s v_phi(x)^(1-s)"""
        return frac_params(self.s).d_s * self.n**self.s * self.v_phi(x) ** (1.0 - self.s)

    def power_exact(self, x: FloatArray) -> FloatArray:
        """n^s v_phi(x)^(1-s), the stated value of L^s v_phi."""
        return self.n**self.s * self.v_phi(x) ** (1.0 - self.s)


def closed_form_example(sec: Section, s: float) -> ClosedFormExample:
    frac_params(s)
    return ClosedFormExample(section=sec, s=s)


def dirichlet_laplacian_closed_form(x: FloatArray, s: float, n: int) -> FloatArray:
    """(2n)^s (1 - |x|^2)^(1-s)"""
    points = as_points(x, n)
    r2 = np.sum(points * points, axis=-1)
    return (2.0 * n) ** s * (1.0 - r2) ** (1.0 - s)


@dataclass(kw_only=True)
class ClosedFormComparison:
    s: float
    computed: FloatArray
    stated: FloatArray
    mask: FloatArray

    @property
    def sup_relative_error(self) -> float:
        gap = np.abs(self.computed - self.stated)[self.mask.astype(bool)]
        scale = np.abs(self.stated)[self.mask.astype(bool)]
        return float(np.max(gap / scale)) if gap.size else 0.0


def compare_closed_form(
    example: ClosedFormExample, basis: SpectralBasis, radius: float = 0.95
) -> ClosedFormComparison:
    """Spectral L^s v_phi against n^s v_phi^(1-s) on interior nodes whose
    normalized quasi-distance sqrt(delta / R) is at most `radius`."""
    sec = example.section
    x = sec.interior_nodes
    computed = frac_apply_spectral(basis, example.s, example.v_phi(x)).values
    stated = example.power_exact(x)
    reach = np.sqrt(np.maximum(1.0 - example.v_phi(x) / sec.height, 0.0))
    return ClosedFormComparison(s=example.s, computed=computed, stated=stated, mask=reach <= radius + 1.0e-12)


@dataclass(frozen=True, kw_only=True)
class EnergyReport:
    lhs: float
    rhs: float
    per_mode_gap: float = 0.0

    @property
    def gap(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def _small_t_energy(s: float, eps: FloatArray) -> FloatArray:
    """int_0^eps t^a (psi^2 + psi'^2) dt from the two leading terms of psi."""
    params = frac_params(s)
    a = params.a
    c = params.c_s
    return (
        eps ** (1.0 + a) / (1.0 + a)
        - (c / s) * eps ** (1.0 + a + 2.0 * s) / (1.0 + a + 2.0 * s)
        + c * c * eps ** (2.0 * s) / (2.0 * s)
    )


def _mode_energies(s: float, eigenvalues: FloatArray, y_edges: FloatArray, n: int) -> FloatArray:
    """int_0^inf y^a (lambda c^2 + c'^2) dy for every mode, on y panels."""
    a = 1.0 - 2.0 * s
    rule = composite(y_edges, n)
    roots = np.sqrt(eigenvalues)

    def one(root: float) -> float:
        tt = root * rule.nodes
        density = rule.nodes**a * root * root * (profile(s, tt) ** 2 + profile_derivative(s, tt) ** 2)
        head = root ** (-(1.0 + a)) * root * root * _small_t_energy(s, root * y_edges[0])
        return float(np.sum(rule.weights * density) + head)

    return np.asarray(parallel_map(one, list(roots)))


def _checked_mode_energies(s: float, eigenvalues: FloatArray, y_edges: FloatArray, tolerance: float) -> FloatArray:
    coarse = _mode_energies(s, eigenvalues, y_edges, 8)
    fine = _mode_energies(s, eigenvalues, y_edges, 16)
    gap = float(np.max(np.abs(fine - coarse) / np.abs(fine)))
    if gap > tolerance:
        raise QuadratureError(gap, tolerance)
    return fine


def energy_identity_check(
    basis: SpectralBasis,
    s: float,
    u: FloatArray,
    y_grid: FloatArray | None = None,
    tolerance: float = 1.0e-8,
) -> EnergyReport:
    """Both sides of int int y^a (|grad^phi U|^2 + U_y^2) dmu dy = c_s sum lambda_k^s u_k^2.

    M-orthonormality and K e_k = lambda_k M e_k reduce the left side to
    sum_k u_k^2 int y^a (lambda_k c_k^2 + c_k'^2) dy.

    Raises:
        QuadratureError: the y quadrature changes by more than `tolerance`
            between 8 and 16 nodes per panel
    """
    params = frac_params(s)
    grid = default_y_grid(basis.lambda_1) if y_grid is None else np.asarray(y_grid, dtype=float)
    coefficients = basis.coefficients(u)
    weights = coefficients**2
    energies = _checked_mode_energies(s, basis.eigenvalues, grid, tolerance)
    exact = params.c_s * basis.eigenvalues**s
    lhs = float(np.sum(weights * energies))
    rhs = float(np.sum(weights * exact))
    per_mode = float(np.max(np.abs(energies - exact) / exact))
    return EnergyReport(lhs=lhs, rhs=rhs, per_mode_gap=per_mode)


def _mode_energies_z(s: float, eigenvalues: FloatArray, z_edges: FloatArray, n: int) -> FloatArray:
    """int_0^inf (lambda V^2 z^(1/s-2) + V_z^2) dz for every mode, on z panels."""
    rule = composite(z_edges, n)
    z = rule.nodes
    ratio = (2.0 * s) ** (2.0 * s - 1.0)
    roots = np.sqrt(eigenvalues)
    a = 1.0 - 2.0 * s

    def one(root: float) -> float:
        tt = root * z_to_y(z, s)
        dt_dz = root * z ** (1.0 / (2.0 * s) - 1.0)
        value = profile(s, tt)
        slope = profile_derivative(s, tt) * dt_dz
        density = root * root * value**2 * z ** (1.0 / s - 2.0) + slope**2
        y0 = float(z_to_y(z_edges[0], s))
        head = ratio * root ** (-(1.0 + a)) * root * root * _small_t_energy(s, root * y0)
        return float(np.sum(rule.weights * density) + head)

    return np.asarray(parallel_map(one, list(roots)))


@dataclass(frozen=True, kw_only=True)
class FiniteEnergyReport:
    z_energy: float
    y_energy: float
    rhs: float

    @property
    def gap(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.z_energy == 0.0 else math.inf
        return abs(self.z_energy - self.rhs) / abs(self.rhs)

    @property
    def ratio(self) -> float:
        return self.z_energy / self.y_energy if self.y_energy else math.nan


def finite_energy_check(
    basis: SpectralBasis,
    s: float,
    u: FloatArray,
    z_grid: FloatArray | None = None,
    tolerance: float = 1.0e-8,
) -> FiniteEnergyReport:
    """The z-form energy int int (|grad^phi V|^2 z^(1/s-2) + V_z^2) dz dmu
    against (2s)^(2s-1) c_s sum lambda_k^s u_k^2, with the y-form energy
    from an independent quadrature for the ratio."""
    params = frac_params(s)
    y_edges = default_y_grid(basis.lambda_1)
    z_edges = y_to_z(y_edges, s) if z_grid is None else np.asarray(z_grid, dtype=float)
    weights = basis.coefficients(u) ** 2
    coarse = _mode_energies_z(s, basis.eigenvalues, z_edges, 8)
    fine = _mode_energies_z(s, basis.eigenvalues, z_edges, 16)
    gap = float(np.max(np.abs(fine - coarse) / np.abs(fine)))
    if gap > tolerance:
        raise QuadratureError(gap, tolerance)
    y_energies = _checked_mode_energies(s, basis.eigenvalues, y_edges, tolerance)
    rhs = params.energy_ratio * params.c_s * float(np.sum(weights * basis.eigenvalues**s))
    return FiniteEnergyReport(
        z_energy=float(np.sum(weights * fine)), y_energy=float(np.sum(weights * y_energies)), rhs=rhs
    )


def pde_residual(ext: ExtensionField, z: FloatArray, h: float) -> FloatArray:
    """-L V + |z|^(2-1/s) V_zz at interior nodes, with L = M^-1 K applied
    exactly per mode and V_zz by a centered second difference of step h.

    Returns an array of shape (len(z), n). Levels must satisfy |z| > h.
    """
    z_form = ext if ext.form == "z" else change_variables(ext)
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) <= h):
        raise ValueError("residual levels must stay farther than h from z = 0")
    centre = z_form.profiles(z)
    plus = z_form.profiles(np.abs(z) + h)
    minus = z_form.profiles(np.abs(z) - h)
    second = (plus - 2.0 * centre + minus) / (h * h)
    weight = np.abs(z)[:, np.newaxis] ** (2.0 - 1.0 / z_form.s)
    per_mode = -z_form.basis.eigenvalues * centre + weight * second
    return (per_mode * z_form.coefficients) @ z_form.basis.vectors.T


@dataclass(kw_only=True)
class ResidualStudy:
    steps: FloatArray
    residuals: FloatArray
    slope: float = field(default=math.nan)


def pde_residual_convergence(ext: ExtensionField, z: FloatArray, steps: t.Sequence[float]) -> ResidualStudy:
    """Sup-norm PDE residual for each step with the log-log slope against h."""
    hs = np.asarray(steps, dtype=float)
    residuals = np.array([float(np.max(np.abs(pde_residual(ext, z, h)))) for h in hs])
    slope = loglog_slope(hs, residuals) if np.all(residuals > 0.0) else math.inf
    return ResidualStudy(steps=hs, residuals=residuals, slope=slope)

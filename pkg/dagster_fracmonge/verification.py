"""Empirical harness for the Harnack, Holder, Poincare, Fabes and
log-energy inequalities.

The inequalities carry existential constants, so every check here reports
instance values (the smallest constant that makes the inequality hold for
the sampled data) and leaves stability judgements to the caller.
"""

import logging
import math
import typing as t
from dataclasses import dataclass

import matplotlib.tri as mtri
import numpy as np
from scipy.interpolate import CubicSpline

from dagster_fracmonge.discrete_ops import SpectralBasis
from dagster_fracmonge.extension import ExtensionField, change_variables, z_to_y
from dagster_fracmonge.fractional import QuadratureError, frac_solve_spectral
from dagster_fracmonge.sections import (
    Section,
    TensorPotential,
    TensorRule,
    TensorSection,
    build_section,
    build_tensor_section,
)
from dagster_fracmonge.special_fn import profile, profile_derivative
from dagster_fracmonge.types import FloatArray, FracMongeError, SampleFunction, TensorFunction
from dagster_fracmonge.utils import parallel_map

logger = logging.getLogger(__name__)

MIN_INNER_NODES = 50
MIN_HOLDER_PAIRS = 30
FABES_SAFETY = 1.1


class ResolutionError(FracMongeError):
    def __init__(self, nodes: int, required: int, what: str = "inner section") -> None:
        super().__init__(f"{what} resolved by {nodes} nodes, at least {required} required")
        self.nodes = nodes
        self.required = required


class NonPositiveFieldError(FracMongeError):
    pass


@dataclass(frozen=True, kw_only=True)
class HarnackRow:
    kappa: float
    outer_ratio: float
    nodes: int
    sup: float
    inf: float
    quotient: float
    f_norm: float
    constant: float
    weak_mean: float
    weak_constant: float


@dataclass(kw_only=True)
class HarnackReport:
    center: FloatArray
    R: float
    s: float
    resolution: int
    rows: list[HarnackRow]

    def constants(self) -> list[float]:
        return [row.constant for row in self.rows]


def _check_contained(sec0: Section, x0: FloatArray, height: float) -> None:
    outer = build_section(sec0.potential, x0, height, 32)
    points = outer.boundary if sec0.dim == 2 else outer.boundary[:, np.newaxis]
    if not np.all(sec0.region.contains(points)):
        raise ValueError(f"S({x0.tolist()}, {height}) is not inside the computational section")


def harnack_quotient(
    sec0: Section,
    basis: SpectralBasis,
    s: float,
    f: FloatArray,
    inner: tuple[t.Any, float],
    ratios: tuple[float | t.Sequence[float], float],
    v: FloatArray | None = None,
    sigma: float = 0.5,
) -> HarnackReport:
    """Instance constants of sup v <= C (inf v + R^s ||f||) over S(x0, kappa R).

    Args:
        sec0: The computational section
        basis: Spectral basis on `sec0`
        s: Fractional order
        f: Nonnegative interior datum; v = L^-s f unless `v` is given
        inner: (x0, R)
        ratios: (kappa or a sequence of kappas, K9). S(x0, K9 R) must lie
            inside sec0.
        v: Precomputed solution
        sigma: Exponent of the weak-Harnack mean over S(x0, K9 R)

    Raises:
        ResolutionError: an inner section holds fewer than 50 interior nodes
    """
    x0 = np.asarray(inner[0], dtype=float).reshape(sec0.dim)
    R = float(inner[1])
    kappas, k9 = ratios
    kappa_list = [float(kappas)] if isinstance(kappas, (int, float)) else [float(k) for k in kappas]
    _check_contained(sec0, x0, k9 * R)
    if np.min(f, initial=0.0) < 0.0:
        raise ValueError("harnack_quotient requires f >= 0")
    sol = frac_solve_spectral(basis, s, f).values if v is None else v

    outer_mask = sec0.interior_within(x0, k9 * R)
    f_norm = float(np.max(np.abs(f[outer_mask]), initial=0.0))
    positive = np.maximum(sol[outer_mask], 0.0)
    weights = basis.mass[outer_mask]
    weak_mean = float((np.sum(weights * positive**sigma) / np.sum(weights)) ** (1.0 / sigma))

    def row(kappa: float) -> HarnackRow:
        mask = sec0.interior_within(x0, kappa * R)
        count = int(np.count_nonzero(mask))
        if count < MIN_INNER_NODES:
            raise ResolutionError(count, MIN_INNER_NODES)
        values = sol[mask]
        sup = float(np.max(values))
        inf = float(np.min(values))
        if sup == 0.0 and inf == 0.0:
            quotient = 1.0
        else:
            quotient = sup / inf if inf > 0.0 else math.inf
        base = inf + R**s * f_norm
        constant = 0.0 if sup == 0.0 else (sup / base if base > 0.0 else math.inf)
        weak_constant = 0.0 if weak_mean == 0.0 else (weak_mean / base if base > 0.0 else math.inf)
        return HarnackRow(
            kappa=kappa, outer_ratio=k9, nodes=count, sup=sup, inf=inf, quotient=quotient,
            f_norm=f_norm, constant=constant, weak_mean=weak_mean, weak_constant=weak_constant,
        )

    rows = parallel_map(row, kappa_list)
    return HarnackReport(center=x0, R=R, s=s, resolution=sec0.n_interior, rows=rows)


@dataclass(frozen=True, kw_only=True)
class HolderFit:
    exponent: float
    coefficient: float
    r_squared: float
    pairs: int


def holder_seminorm(v: FloatArray, sec0: Section, s: float, x0: t.Any, R: float) -> HolderFit:
    """Fits |v(x0) - v(x)| <= C delta(x0, x)^rho over interior nodes of S(x0, R).

    x0 is moved to the nearest interior node. The exponent comes from a
    log-log least squares fit; the coefficient is the smallest C for which
    the bound holds at every pair with that exponent.

    Raises:
        ResolutionError: fewer than 30 usable pairs
    """
    nodes = sec0.interior_nodes
    target = np.asarray(x0, dtype=float).reshape(sec0.dim)
    anchor = int(np.argmin(np.sum((nodes - target) ** 2, axis=-1)))
    d = np.asarray(sec0.potential.bregman(nodes[anchor], nodes))
    mask = (d < R) & (np.arange(nodes.shape[0]) != anchor)
    diff = np.abs(v[anchor] - v[mask])
    d = d[mask]
    if np.all(diff == 0.0):
        return HolderFit(exponent=math.nan, coefficient=0.0, r_squared=1.0, pairs=int(diff.size))
    usable = (diff > 0.0) & (d > 0.0)
    count = int(np.count_nonzero(usable))
    if count < MIN_HOLDER_PAIRS:
        raise ResolutionError(count, MIN_HOLDER_PAIRS, what="holder fit")
    lx = np.log(d[usable])
    ly = np.log(diff[usable])
    exponent, intercept = np.polyfit(lx, ly, 1)
    fitted = intercept + exponent * lx
    total = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((ly - fitted) ** 2)) / total if total > 0.0 else 1.0
    coefficient = float(np.max(diff[usable] / d[usable] ** exponent))
    return HolderFit(exponent=float(exponent), coefficient=coefficient, r_squared=r_squared, pairs=count)


def _phi_gradient_sq(T: TensorPotential, points: FloatArray, grad: FloatArray) -> FloatArray:
    """|grad^Phi G|^2 = <D^2 phi^-1 grad_x G, grad_x G> + |z|^(2-1/s) G_z^2"""
    gx = grad[:, :-1]
    hess = T.base.hessian(points[:, :-1])
    qx = np.sum(gx * np.linalg.solve(hess, gx[..., np.newaxis])[..., 0], axis=-1)
    qz = np.abs(points[:, -1]) ** (2.0 - 1.0 / T.s) * grad[:, -1] ** 2
    return qx + qz


@dataclass(frozen=True, kw_only=True)
class PoincareReport:
    lhs: float
    kernel: float
    mean: float

    @property
    def ratio(self) -> float:
        if self.lhs == 0.0:
            return 0.0
        return self.lhs / self.kernel if self.kernel > 0.0 else math.inf


def _poincare_parts(
    G: TensorFunction, inner: TensorRule, outer: TensorRule, T: TensorPotential, R: float
) -> PoincareReport:
    values = G(inner.points)
    mean = inner.average(values)
    lhs = inner.average(np.abs(values - mean))
    energy = outer.average(_phi_gradient_sq(T, outer.points, G.gradient(outer.points)))
    return PoincareReport(lhs=lhs, kernel=math.sqrt(R) * math.sqrt(energy), mean=mean)


def poincare_check(
    T: TensorPotential,
    tsec: TensorSection,
    G: TensorFunction,
    K2: float,
    tolerance: float = 1.0e-3,
    **rule_options: int,
) -> PoincareReport:
    """avg |G - G_S| dmu_Phi over S against R^(1/2) (avg |grad^Phi G|^2 over S(X0, K2 R))^(1/2).

    Raises:
        QuadratureError: refining the z rule changes the ratio by more than
            `tolerance`
    """
    outer_sec = build_tensor_section(T, tsec.center, K2 * tsec.height)
    report = _poincare_parts(G, tsec.rule(**rule_options), outer_sec.rule(**rule_options), T, tsec.height)
    refined_options = dict(rule_options)
    refined_options["n_z"] = 2 * rule_options.get("n_z", 8)
    refined = _poincare_parts(G, tsec.rule(**refined_options), outer_sec.rule(**refined_options), T, tsec.height)
    scale = max(abs(refined.lhs), abs(refined.kernel), np.finfo(float).tiny)
    change = max(abs(refined.lhs - report.lhs), abs(refined.kernel - report.kernel)) / scale
    if change > tolerance:
        raise QuadratureError(change, tolerance)
    return refined


@dataclass(frozen=True, kw_only=True)
class FabesReport:
    lhs: float
    bound: float
    zero_fraction: float
    eps: float

    @property
    def margin(self) -> float:
        return self.bound - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound


def fabes_check(
    T: TensorPotential,
    tsec: TensorSection,
    G: TensorFunction,
    eps: float,
    poincare_ratio: float,
    K2: float,
    **rule_options: int,
) -> FabesReport:
    """avg |G| <= (1 + 1/eps) K_P R^(1/2) (avg |grad^Phi G|^2)^(1/2) with
    K_P = 1.1 times the empirical Poincare ratio.

    Raises:
        ValueError: the measured zero set of G is a smaller mu_Phi fraction
            than eps
    """
    inner = tsec.rule(**rule_options)
    values = G(inner.points)
    zero_fraction = float(np.sum(inner.mu_weights * (np.abs(values) <= 1.0e-14)) / inner.mu_volume)
    if zero_fraction < eps:
        raise ValueError(f"zero set fraction {zero_fraction:.3f} is below eps={eps}")
    lhs = inner.average(np.abs(values))
    outer = build_tensor_section(T, tsec.center, K2 * tsec.height).rule(**rule_options)
    energy = outer.average(_phi_gradient_sq(T, outer.points, G.gradient(outer.points)))
    kernel = math.sqrt(tsec.height) * math.sqrt(energy)
    bound = (1.0 + 1.0 / eps) * FABES_SAFETY * poincare_ratio * kernel
    return FabesReport(lhs=lhs, bound=bound, zero_fraction=zero_fraction, eps=eps)


@dataclass(frozen=True, kw_only=True)
class LogEnergyReport:
    lhs: float
    bound: float
    R: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound


def log_energy_check(
    T: TensorPotential,
    tsec: TensorSection,
    H: TensorFunction,
    doubling_constant: float,
    **rule_options: int,
) -> LogEnergyReport:
    """avg |grad^Phi log H|^2 dmu_Phi over S_Phi(X0, R) against 32 (n+2) K_d^2 / R.

    Raises:
        NonPositiveFieldError: H <= 0 at a quadrature point
    """
    rule = tsec.rule(**rule_options)
    values = H(rule.points)
    if np.any(~(values > 0.0)):
        raise NonPositiveFieldError(f"H is not positive at {int(np.sum(~(values > 0.0)))} quadrature points")
    density = _phi_gradient_sq(T, rule.points, H.gradient(rule.points)) / values**2
    lhs = rule.average(density)
    bound = 32.0 * (T.base.dim + 2) * doubling_constant**2 / tsec.height
    return LogEnergyReport(lhs=lhs, bound=bound, R=tsec.height)


def extension_sample(ext: ExtensionField, tau: float = 0.0, modes: int | None = None) -> SampleFunction:
    """Ṽ(x, z) + tau as a function of arbitrary (x, z) points, with Ṽ the
    even reflection of the z-form field.

    Eigenvectors are interpolated in x: a cubic spline in one dimension, a
    cubic triangle interpolator in two. Only the first `modes` modes are
    kept.
    """
    z_form = ext if ext.form == "z" else change_variables(ext)
    sec = z_form.section
    if sec is None:
        raise ValueError("extension_sample needs a field with a section attached")
    m = z_form.basis.m if modes is None else min(modes, z_form.basis.m)
    coefficients = z_form.coefficients[:m]
    roots = z_form.roots[:m]
    s = z_form.s
    full = sec.extend(z_form.basis.vectors[:, :m])

    if sec.dim == 1:
        spline = CubicSpline(sec.nodes[:, 0], full, axis=0)
        derivative = spline.derivative()

        def modes_at(x: FloatArray) -> tuple[FloatArray, FloatArray]:
            return spline(x[:, 0]), derivative(x[:, 0])[:, np.newaxis, :]
    else:
        assert sec.elements is not None
        triangulation = mtri.Triangulation(sec.nodes[:, 0], sec.nodes[:, 1], sec.elements)
        interpolators = [mtri.CubicTriInterpolator(triangulation, full[:, k], kind="geom") for k in range(m)]

        def modes_at(x: FloatArray) -> tuple[FloatArray, FloatArray]:
            vals = np.column_stack([np.ma.filled(ip(x[:, 0], x[:, 1]), np.nan) for ip in interpolators])
            grads = np.empty((x.shape[0], 2, m))
            for k, ip in enumerate(interpolators):
                gx, gy = ip.gradient(x[:, 0], x[:, 1])
                grads[:, 0, k] = np.ma.filled(gx, np.nan)
                grads[:, 1, k] = np.ma.filled(gy, np.nan)
            return vals, grads

    def profiles(z: FloatArray) -> tuple[FloatArray, FloatArray]:
        az = np.abs(z)
        t_values = np.outer(z_to_y(az, s), roots)
        value = profile(s, t_values)
        dy_dz = np.where(az > 0.0, az ** (1.0 / (2.0 * s) - 1.0), 0.0)
        slope = profile_derivative(s, t_values) * roots * (np.sign(z) * dy_dz)[:, np.newaxis]
        return value, slope

    def value(points: FloatArray) -> FloatArray:
        ex, _ = modes_at(points[:, :-1])
        prof, _ = profiles(points[:, -1])
        return np.sum(ex * prof * coefficients, axis=1) + tau

    def grad(points: FloatArray) -> FloatArray:
        ex, gx = modes_at(points[:, :-1])
        prof, slope = profiles(points[:, -1])
        out = np.empty(points.shape)
        out[:, :-1] = np.sum(gx * (prof * coefficients)[:, np.newaxis, :], axis=2)
        out[:, -1] = np.sum(ex * slope * coefficients, axis=1)
        return out

    return SampleFunction(value=value, grad=grad, label=f"extension+{tau}")


def z_coordinate() -> SampleFunction:
    """G(x, z) = z"""

    def grad(points: FloatArray) -> FloatArray:
        out = np.zeros(points.shape)
        out[:, -1] = 1.0
        return out

    return SampleFunction(value=lambda p: p[:, -1].copy(), grad=grad, label="z")


def trig_sample(rng: np.random.Generator, dim: int, terms: int = 3) -> SampleFunction:
    """A random smooth G = sum_j a_j sin(<b_j, X> + c_j) on R^dim."""
    a = rng.normal(size=terms)
    b = rng.normal(size=(terms, dim))
    c = rng.uniform(0.0, 2.0 * math.pi, size=terms)

    def value(points: FloatArray) -> FloatArray:
        return np.sin(points @ b.T + c) @ a

    def grad(points: FloatArray) -> FloatArray:
        return (np.cos(points @ b.T + c) * a) @ b

    return SampleFunction(value=value, grad=grad, label="trig")


def ramp_sample(direction: FloatArray, offset: float) -> SampleFunction:
    """G(X) = max(<direction, X> - offset, 0), zero on a half space."""
    direction = np.asarray(direction, dtype=float)

    def value(points: FloatArray) -> FloatArray:
        return np.maximum(points @ direction - offset, 0.0)

    def grad(points: FloatArray) -> FloatArray:
        active = (points @ direction - offset) > 0.0
        return active[:, np.newaxis] * direction

    return SampleFunction(value=value, grad=grad, label="ramp")

"""Monge-Ampere sections S_phi(x0, R) = {x : delta_phi(x0, x) < R}, the
tensor potential Phi(x, z) = phi(x) + h_s(z) with its sections, and the
empirical estimators for the geometric constants attached to them.

Constant estimators return maxima over finite samples, which are lower
bounds for the true (existential) constants.
"""

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

from dagster_fracmonge.potentials import (
    HsPotential,
    Potential,
    as_points,
    mu_density,
)
from dagster_fracmonge.quadrature import (
    Rule,
    composite,
    fan_rule,
    graded_interval,
    weighted_interval,
)
from dagster_fracmonge.types import FloatArray, FracMongeError, IntArray
from dagster_fracmonge.utils import parallel_map

logger = logging.getLogger(__name__)

_MAX_DOUBLINGS = 200


class RootBracketError(FracMongeError):
    def __init__(self, direction: FloatArray, bracket: tuple[float, float]) -> None:
        super().__init__(
            f"no exterior point found along direction {np.asarray(direction).tolist()} "
            f"within ray parameter bracket {bracket}"
        )
        self.direction = direction
        self.bracket = bracket


class DegenerateMeshError(FracMongeError):
    pass


def ray_root(phi: Potential, x0: FloatArray, direction: FloatArray, level: float, t_max: float | None = None) -> float:
    """Finds t > 0 with delta_phi(x0, x0 + t d) = level.

    delta is convex along the ray and vanishes at t = 0, so once an exterior
    point is found (by doubling the ray parameter) the root is bracketed and
    unique.
    """
    x0 = np.asarray(x0, dtype=float)
    direction = np.asarray(direction, dtype=float)

    def f(tt: float) -> float:
        return float(phi.bregman(x0, x0 + tt * direction)) - level

    if t_max is None:
        hi = max(math.sqrt(level), 1.0e-3)
        for _ in range(_MAX_DOUBLINGS):
            if f(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise RootBracketError(direction, (0.0, hi))
    else:
        hi = t_max
    return float(brentq(f, 0.0, hi, xtol=1.0e-15, rtol=4.0 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True, kw_only=True)
class Region:
    """A convex region given by its boundary: [lo, hi] when dim == 1, a
    counter-clockwise polygon with shape (M, 2) when dim == 2. `anchor` is a
    point the region is star-shaped about."""

    dim: int
    boundary: FloatArray
    anchor: FloatArray

    def centroid(self) -> FloatArray:
        if self.dim == 1:
            return np.array([0.5 * (self.boundary[0] + self.boundary[1])])
        x = self.boundary[:, 0]
        y = self.boundary[:, 1]
        xn = np.roll(x, -1)
        yn = np.roll(y, -1)
        cross = x * yn - xn * y
        area = 0.5 * np.sum(cross)
        cx = np.sum((x + xn) * cross) / (6.0 * area)
        cy = np.sum((y + yn) * cross) / (6.0 * area)
        return np.array([cx, cy])

    def dilate(self, factor: float, about: FloatArray | None = None) -> "Region":
        c = self.centroid() if about is None else np.asarray(about, dtype=float)
        if self.dim == 1:
            boundary = c[0] + factor * (self.boundary - c[0])
        else:
            boundary = c + factor * (self.boundary - c)
        return Region(dim=self.dim, boundary=boundary, anchor=c + factor * (self.anchor - c))

    def contains(self, points: t.Any) -> npt.NDArray[np.bool_]:
        pts = as_points(points, self.dim)
        if self.dim == 1:
            return (pts[..., 0] > self.boundary[0]) & (pts[..., 0] < self.boundary[1])
        b0 = self.boundary
        edge = np.roll(b0, -1, axis=0) - b0
        rel = pts[..., np.newaxis, :] - b0
        cross = edge[:, 0] * rel[..., 1] - edge[:, 1] * rel[..., 0]
        return np.all(cross > 0.0, axis=-1)

    def rule(self, n: int = 20, panels: int = 8) -> Rule:
        """Quadrature rule over the region. Nodes have shape (N, dim)."""
        if self.dim == 1:
            edges = np.linspace(self.boundary[0], self.boundary[1], panels + 1)
            base = composite(edges, n)
            return Rule(nodes=base.nodes[:, np.newaxis], weights=base.weights)
        return fan_rule(self.anchor, self.boundary, n_radial=n, n_angular=n, radial_panels=1)

    def lebesgue_measure(self) -> float:
        if self.dim == 1:
            return float(self.boundary[1] - self.boundary[0])
        x = self.boundary[:, 0]
        y = self.boundary[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def mu_measure(self, phi: Potential, n: int = 20, panels: int = 8) -> float:
        rule = self.rule(n=n, panels=panels)
        return float(np.sum(rule.weights * mu_density(phi, rule.nodes)))


@dataclass(kw_only=True)
class Section:
    """A section with its boundary representation and computational mesh.

    For dim == 1 the mesh is a uniform grid including both endpoints. For
    dim == 2 it is a polar triangulation: a center node, `rings` rings of
    `rays` nodes placed on the delta level sets R (i/rings)^2, the last ring
    being the boundary.
    """

    potential: Potential
    center: FloatArray
    height: float
    boundary: FloatArray
    nodes: FloatArray
    is_boundary: npt.NDArray[np.bool_]
    elements: IntArray | None = None
    spacing: float | None = None
    rays: int | None = None
    rings: int | None = None

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def interior_index(self) -> IntArray:
        return np.flatnonzero(~self.is_boundary)

    @property
    def interior_nodes(self) -> FloatArray:
        return self.nodes[self.interior_index]

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(~self.is_boundary))

    @property
    def region(self) -> Region:
        return Region(dim=self.dim, boundary=self.boundary, anchor=self.center)

    def delta_from(self, x0: t.Any, points: FloatArray | None = None) -> FloatArray:
        pts = self.interior_nodes if points is None else points
        return np.asarray(self.potential.bregman(np.asarray(x0, dtype=float), pts))

    def interior_within(self, x0: t.Any, level: float) -> npt.NDArray[np.bool_]:
        """Mask over interior nodes of those inside S_phi(x0, level)."""
        return self.delta_from(x0) < level

    def extend(self, interior_values: FloatArray) -> FloatArray:
        """Embeds interior nodal values into a full nodal vector with zero
        Dirichlet data."""
        full = np.zeros(self.nodes.shape[:1] + interior_values.shape[1:])
        full[self.interior_index] = interior_values
        return full


def build_section(phi: Potential, x0: t.Any, R: float, resolution: int, rings: int | None = None) -> Section:
    """Builds S_phi(x0, R) and its mesh.

    Args:
        phi: The potential
        x0: Center
        R: Height, > 0
        resolution: Interior grid nodes when dim == 1, number of rays when
            dim == 2. At least 8.
        rings: Number of level-set rings for dim == 2. Defaults to
            resolution // 2.

    Raises:
        RootBracketError: a ray never leaves the section
        DegenerateMeshError: a triangle collapsed
    """
    if R <= 0.0:
        raise ValueError(f"section height must be positive, got {R}")
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8, got {resolution}")
    center = as_points(x0, phi.dim).reshape(phi.dim)

    if phi.dim == 1:
        xl = center[0] - ray_root(phi, center, np.array([-1.0]), R)
        xr = center[0] + ray_root(phi, center, np.array([1.0]), R)
        grid = np.linspace(xl, xr, resolution + 2)
        is_boundary = np.zeros(resolution + 2, dtype=bool)
        is_boundary[[0, -1]] = True
        return Section(
            potential=phi,
            center=center,
            height=R,
            boundary=np.array([xl, xr]),
            nodes=grid[:, np.newaxis],
            is_boundary=is_boundary,
            spacing=float(grid[1] - grid[0]),
        )

    n_rings = rings if rings is not None else max(resolution // 2, 2)
    angles = 2.0 * math.pi * np.arange(resolution) / resolution
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    levels = R * (np.arange(1, n_rings + 1) / n_rings) ** 2

    def ray_nodes(direction: FloatArray) -> FloatArray:
        t_boundary = ray_root(phi, center, direction, R)
        params = [ray_root(phi, center, direction, level, t_max=t_boundary) for level in levels[:-1]]
        params.append(t_boundary)
        return np.asarray(params)

    params = np.array(parallel_map(ray_nodes, list(directions)))  # (rays, rings)
    ring_points = center + params.T[:, :, np.newaxis] * directions[np.newaxis, :, :]
    nodes = np.vstack([center[np.newaxis, :], ring_points.reshape(-1, 2)])
    is_boundary = np.zeros(nodes.shape[0], dtype=bool)
    is_boundary[1 + (n_rings - 1) * resolution :] = True

    def idx(ring: int, ray: int) -> int:
        return 1 + (ring - 1) * resolution + (ray % resolution)

    triangles: list[tuple[int, int, int]] = []
    for j in range(resolution):
        triangles.append((0, idx(1, j), idx(1, j + 1)))
    for i in range(1, n_rings):
        for j in range(resolution):
            a, b = idx(i, j), idx(i, j + 1)
            c, d = idx(i + 1, j + 1), idx(i + 1, j)
            triangles.append((a, b, c))
            triangles.append((a, c, d))
    elements = np.asarray(triangles, dtype=np.int64)
    p = nodes[elements]
    areas = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    if np.any(areas <= 1.0e-14 * R):
        raise DegenerateMeshError(f"{int(np.sum(areas <= 1.0e-14 * R))} degenerate triangles")

    logger.debug(
        "built section", extra=dict(rays=resolution, rings=n_rings, interior=int(np.sum(~is_boundary)))
    )
    return Section(
        potential=phi,
        center=center,
        height=R,
        boundary=ring_points[-1],
        nodes=nodes,
        is_boundary=is_boundary,
        elements=elements,
        rays=resolution,
        rings=n_rings,
    )


def half_contraction(sec: Section | Region) -> Region:
    """The 1/2-dilation of the section about its Lebesgue center of mass
    (the polygon centroid for dim == 2)."""
    region = sec.region if isinstance(sec, Section) else sec
    centroid = region.centroid()
    return region.dilate(0.5, about=centroid)


def doubling_ratios(
    phi: Potential, samples: t.Sequence[tuple[t.Any, float]], resolution: int = 64
) -> list[float]:
    def ratio(sample: tuple[t.Any, float]) -> float:
        x0, R = sample
        sec = build_section(phi, x0, R, resolution)
        full = sec.region.mu_measure(phi)
        half = half_contraction(sec).mu_measure(phi)
        if half <= 0.0:
            raise DegenerateMeshError(f"half contraction of S({x0}, {R}) has zero measure")
        return full / half

    return parallel_map(ratio, list(samples))


def doubling_estimate(phi: Potential, samples: t.Sequence[tuple[t.Any, float]], resolution: int = 64) -> float:
    """Empirical doubling constant max mu(S) / mu(S/2) over the samples."""
    if not samples:
        raise ValueError("doubling_estimate needs at least one sample")
    return max(doubling_ratios(phi, samples, resolution))


def quasi_triangle_estimate(phi: Potential, triples: FloatArray) -> float:
    """Empirical lower bound for the quasi-triangle constant K.

    Args:
        phi: Any potential (including h_s)
        triples: Array of shape (N, 3, dim) (or (N, 3) when dim == 1)
            holding (X, Y, Z) per row

    Returns:
        max delta(X,Y) / (min{delta(Z,X), delta(X,Z)} + min{delta(Z,Y), delta(Y,Z)})
        over rows with a nonzero numerator and denominator
    """
    arr = np.asarray(triples, dtype=float)
    if arr.ndim == 2:
        arr = arr[..., np.newaxis]
    if arr.shape[0] == 0:
        raise ValueError("quasi_triangle_estimate needs at least one triple")
    X, Y, Z = arr[:, 0], arr[:, 1], arr[:, 2]
    num = phi.bregman(X, Y)
    den = np.minimum(phi.bregman(Z, X), phi.bregman(X, Z)) + np.minimum(
        phi.bregman(Z, Y), phi.bregman(Y, Z)
    )
    usable = (den > 0.0) & (num > 0.0)
    if not np.any(usable):
        return 0.0
    return float(np.max(num[usable] / den[usable]))


@dataclass(frozen=True, kw_only=True)
class TensorPotential(Potential):
    """Phi(x, z) = phi(x) + h_s(z) on R^(n+1), with density
    mu_Phi(x, z) = mu_phi(x) |z|^(1/s - 2)."""

    base: Potential
    s: float
    dim: int = 0
    label: str = "tensor"
    h: HsPotential = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dim", self.base.dim + 1)
        object.__setattr__(self, "h", HsPotential(s=self.s))

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def weight_exponent(self) -> float:
        return 1.0 / self.s - 2.0

    def _value(self, x: FloatArray) -> FloatArray:
        return self.base._value(x[..., :-1]) + self.h._value(x[..., -1:])

    def _gradient(self, x: FloatArray) -> FloatArray:
        return np.concatenate([self.base._gradient(x[..., :-1]), self.h._gradient(x[..., -1:])], axis=-1)

    def _hessian(self, x: FloatArray) -> FloatArray:
        n = self.base.dim
        out = np.zeros(x.shape[:-1] + (n + 1, n + 1))
        out[..., :n, :n] = self.base._hessian(x[..., :-1])
        out[..., n, n] = self.h._hessian(x[..., -1:])[..., 0, 0]
        return out

    def bregman(self, x0: t.Any, x: t.Any) -> FloatArray:
        x0p = as_points(x0, self.dim)
        xp = as_points(x, self.dim)
        return self.base.bregman(x0p[..., :-1], xp[..., :-1]) + self.h.bregman(x0p[..., -1:], xp[..., -1:])

    def mu(self, x: t.Any) -> FloatArray:
        xp = as_points(x, self.dim)
        return mu_density(self.base, xp[..., :-1]) * np.abs(xp[..., -1]) ** self.weight_exponent


@dataclass(frozen=True, kw_only=True)
class TensorRule:
    points: FloatArray
    mu_weights: FloatArray
    lebesgue_volume: float

    @property
    def mu_volume(self) -> float:
        return float(np.sum(self.mu_weights))

    def average(self, values: FloatArray) -> float:
        return float(np.sum(self.mu_weights * values) / self.mu_volume)


@dataclass(kw_only=True)
class TensorSection:
    """S_Phi((x0, z0), R). Its x-shadow is S_phi(x0, R); above each x the
    z-slice is S_h(z0, R - delta_phi(x0, x))."""

    tensor: TensorPotential
    center: FloatArray
    height: float
    x_section: Section

    @property
    def x0(self) -> FloatArray:
        return self.center[:-1]

    @property
    def z0(self) -> float:
        return float(self.center[-1])

    def z_slice(self, r: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Bounds of {z : delta_h(z0, z) < r}, elementwise in r."""
        rr = np.maximum(np.asarray(r, dtype=float), 0.0)
        h = self.tensor.h
        if self.z0 == 0.0:
            half = h.slice_radius(rr)
            return -half, half
        lo = np.full_like(rr, self.z0)
        hi = np.full_like(rr, self.z0)
        z0 = np.array([self.z0])
        for i, level in enumerate(rr.ravel()):
            if level <= 0.0:
                continue
            lo.flat[i] = self.z0 - ray_root(h, z0, np.array([-1.0]), float(level))
            hi.flat[i] = self.z0 + ray_root(h, z0, np.array([1.0]), float(level))
        return lo, hi

    def contains(self, points: t.Any) -> npt.NDArray[np.bool_]:
        return np.asarray(self.tensor.bregman(self.center, points)) < self.height

    def rule(self, n_x: int = 12, x_panels: int = 8, n_z: int = 8, z_panels: int = 12) -> TensorRule:
        """Tensor quadrature over the section for integrals against mu_Phi."""
        sec = self.x_section
        if self.tensor.base.dim == 1:
            xl, xr = sec.boundary
            base = graded_interval(float(xl), float(xr), 2 * x_panels, n_x)
            x_rule = Rule(nodes=base.nodes[:, np.newaxis], weights=base.weights)
        else:
            x_rule = fan_rule(
                self.x0, sec.boundary, n_radial=n_x, n_angular=max(n_x // 2, 2),
                radial_panels=x_panels, grade_outward=True,
            )
        r = self.height - np.asarray(self.tensor.base.bregman(self.x0, x_rule.nodes))
        keep = r > 0.0
        x_nodes = x_rule.nodes[keep]
        x_weights = x_rule.weights[keep] * mu_density(self.tensor.base, x_nodes)
        lo, hi = self.z_slice(r[keep])
        lebesgue = float(np.sum(x_rule.weights[keep] * (hi - lo)))
        exponent = self.tensor.weight_exponent

        if self.z0 == 0.0:
            ref = weighted_interval(-1.0, 1.0, exponent, z_panels, n_z)
            zs = hi[:, np.newaxis] * ref.nodes[np.newaxis, :]
            wz = (hi[:, np.newaxis] ** (exponent + 1.0)) * ref.weights[np.newaxis, :]
            counts = np.full(x_nodes.shape[0], ref.nodes.size)
            z_all = zs.ravel()
            w_all = (x_weights[:, np.newaxis] * wz).ravel()
        else:
            z_parts: list[FloatArray] = []
            w_parts: list[FloatArray] = []
            counts = np.zeros(x_nodes.shape[0], dtype=np.int64)
            for i in range(x_nodes.shape[0]):
                zr = weighted_interval(float(lo[i]), float(hi[i]), exponent, z_panels, n_z)
                z_parts.append(zr.nodes)
                w_parts.append(x_weights[i] * zr.weights)
                counts[i] = zr.nodes.size
            z_all = np.concatenate(z_parts)
            w_all = np.concatenate(w_parts)
        x_rep = np.repeat(x_nodes, counts, axis=0)
        points = np.column_stack([x_rep, z_all])
        return TensorRule(points=points, mu_weights=w_all, lebesgue_volume=lebesgue)

    def mu_measure(self, **rule_options: int) -> float:
        return self.rule(**rule_options).mu_volume


def build_tensor_section(T: TensorPotential, X0: t.Any, R: float, resolution: int = 32) -> TensorSection:
    center = as_points(X0, T.dim).reshape(T.dim)
    x_section = build_section(T.base, center[:-1], R, max(resolution, 8))
    return TensorSection(tensor=T, center=center, height=R, x_section=x_section)


@dataclass(kw_only=True)
class InclusionReport:
    trials: int
    inner_hits: int
    product_hits: int
    violations: list[FloatArray] = field(default_factory=lambda: [])

    @property
    def passed(self) -> bool:
        return not self.violations


def tensor_section_inclusions(
    T: TensorPotential, X0: t.Any, R: float, trials: int, rng: np.random.Generator
) -> InclusionReport:
    """Randomized check of S_Phi(X0,R) in S_phi(x0,R) x S_h(z0,R) in S_Phi(X0,2R).

    Points are drawn uniformly from a box enclosing S_phi(x0,2R) x S_h(z0,2R).
    """
    if R <= 0.0:
        raise ValueError(f"section height must be positive, got {R}")
    center = as_points(X0, T.dim).reshape(T.dim)
    outer = build_tensor_section(T, center, 2.0 * R, resolution=32)
    if T.base.dim == 1:
        x_lo = np.array([outer.x_section.boundary[0]])
        x_hi = np.array([outer.x_section.boundary[1]])
    else:
        x_lo = outer.x_section.boundary.min(axis=0)
        x_hi = outer.x_section.boundary.max(axis=0)
    pad = 0.05 * (x_hi - x_lo)
    x_lo, x_hi = x_lo - pad, x_hi + pad
    z_lo, z_hi = outer.z_slice(np.array([2.0 * R]))
    z_pad = 0.05 * (z_hi[0] - z_lo[0])
    lo = np.concatenate([x_lo, [z_lo[0] - z_pad]])
    hi = np.concatenate([x_hi, [z_hi[0] + z_pad]])
    points = lo + (hi - lo) * rng.random((trials, T.dim))

    d_tensor = np.asarray(T.bregman(center, points))
    d_phi = np.asarray(T.base.bregman(center[:-1], points[:, :-1]))
    d_h = np.asarray(T.h.bregman(center[-1:], points[:, -1:]))
    in_inner = d_tensor < R
    in_product = (d_phi < R) & (d_h < R)
    bad = (in_inner & ~in_product) | (in_product & ~(d_tensor < 2.0 * R))
    report = InclusionReport(
        trials=trials,
        inner_hits=int(np.sum(in_inner)),
        product_hits=int(np.sum(in_product)),
        violations=[points[i] for i in np.flatnonzero(bad)],
    )
    if not report.passed:
        logger.warning(f"{len(report.violations)} inclusion violations for tensor sections at {center.tolist()}")
    return report


@dataclass(frozen=True, kw_only=True)
class EnergyBound:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0.0 else math.inf

    def holds(self, slack: float = 0.02) -> bool:
        return self.lhs <= (1.0 + slack) * self.rhs


def delta_energy(sec: Section, n: int = 24) -> EnergyBound:
    """Both sides of
    int_S <D^2phi^-1 (grad phi(x) - grad phi(x0)), same> dmu_phi <= n R mu_phi(S)."""
    phi = sec.potential
    rule = sec.region.rule(n=n)
    g = phi.gradient(rule.nodes) - phi.gradient(sec.center)
    hess = phi.hessian(rule.nodes)
    q = np.sum(g * np.linalg.solve(hess, g[..., np.newaxis])[..., 0], axis=-1)
    mu = mu_density(phi, rule.nodes)
    lhs = float(np.sum(rule.weights * q * mu))
    rhs = phi.dim * sec.height * float(np.sum(rule.weights * mu))
    return EnergyBound(lhs=lhs, rhs=rhs)


def tensor_delta_energy(tsec: TensorSection, doubling_constant: float, **rule_options: int) -> EnergyBound:
    """Both sides of the tensor counterpart with right hand side
    (n + 2) K_d R mu_Phi(S_Phi(X0, R))."""
    T = tsec.tensor
    rule = tsec.rule(**rule_options)
    x = rule.points[:, :-1]
    z = rule.points[:, -1]
    gx = T.base.gradient(x) - T.base.gradient(tsec.x0)
    hess = T.base.hessian(x)
    qx = np.sum(gx * np.linalg.solve(hess, gx[..., np.newaxis])[..., 0], axis=-1)
    gz = T.h.gradient(z)[:, 0] - float(T.h.gradient(np.array([tsec.z0]))[0])
    qz = gz * gz / np.abs(z) ** T.weight_exponent
    lhs = float(np.sum(rule.mu_weights * (qx + qz)))
    rhs = (T.base.dim + 2) * doubling_constant * tsec.height * rule.mu_volume
    return EnergyBound(lhs=lhs, rhs=rhs)


def tensor_doubling_estimate(
    T: TensorPotential, samples: t.Sequence[tuple[t.Any, float]], resolution: int = 32
) -> float:
    """max mu_Phi(S_Phi(X, 2R)) / mu_Phi(S_Phi(X, R)) over the samples."""
    if not samples:
        raise ValueError("tensor_doubling_estimate needs at least one sample")

    def ratio(sample: tuple[t.Any, float]) -> float:
        X0, R = sample
        small = build_tensor_section(T, X0, R, resolution).mu_measure()
        large = build_tensor_section(T, X0, 2.0 * R, resolution).mu_measure()
        return large / small

    return max(parallel_map(ratio, list(samples)))


@dataclass(frozen=True, kw_only=True)
class GrowthRow:
    r: float
    R: float
    small: float
    large: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.large <= self.bound


def doubling_growth_check(
    T: TensorPotential,
    X0: t.Any,
    pairs: t.Sequence[tuple[float, float]],
    doubling_constant: float,
    resolution: int = 32,
) -> list[GrowthRow]:
    """Checks mu(S(X,R)) <= K_d (R/r)^nu mu(S(X,r)) with nu = log2 K_d."""
    nu = math.log2(doubling_constant)
    rows: list[GrowthRow] = []
    for r, R in pairs:
        small = build_tensor_section(T, X0, r, resolution).mu_measure()
        large = build_tensor_section(T, X0, R, resolution).mu_measure()
        rows.append(
            GrowthRow(r=r, R=R, small=small, large=large, bound=doubling_constant * (R / r) ** nu * small)
        )
    return rows


def volume_measure_product(tsec: TensorSection, **rule_options: int) -> float:
    """mu_Phi(S) |S| / R^(n+1) for one tensor section."""
    rule = tsec.rule(**rule_options)
    return rule.mu_volume * rule.lebesgue_volume / tsec.height ** (tsec.tensor.base.dim + 1)

import typing as t
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from dagster_fracmonge.types import FloatArray


@dataclass(frozen=True, kw_only=True)
class Rule:
    """A quadrature rule: sum(weights * f(nodes)) approximates an integral."""

    nodes: FloatArray
    weights: FloatArray

    def integrate(self, values: FloatArray) -> t.Any:
        return np.tensordot(self.weights, values, axes=(0, 0))

    @classmethod
    def concat(cls, rules: t.Sequence["Rule"]) -> "Rule":
        return cls(
            nodes=np.concatenate([r.nodes for r in rules]),
            weights=np.concatenate([r.weights for r in rules]),
        )


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[FloatArray, FloatArray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=64)
def _jacobi(n: int, alpha: float, beta: float) -> tuple[FloatArray, FloatArray]:
    x, w = roots_jacobi(n, alpha, beta)
    return np.asarray(x), np.asarray(w)


def gauss_legendre(a: float, b: float, n: int) -> Rule:
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return Rule(nodes=a + half * (x + 1.0), weights=half * w)


def composite(edges: t.Sequence[float] | FloatArray, n: int) -> Rule:
    """Gauss-Legendre with `n` nodes on every panel between consecutive edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(n)
    left = edges[:-1, np.newaxis]
    half = 0.5 * np.diff(edges)[:, np.newaxis]
    nodes = left + half * (x + 1.0)
    weights = half * w
    return Rule(nodes=nodes.ravel(), weights=weights.ravel())


def geometric_edges(length: float, panels: int, ratio: float = 2.0) -> FloatArray:
    """Edges 0 < length*ratio^-(panels-1) < ... < length, graded toward 0.

    The returned array starts with 0 so the innermost panel touches the
    origin.
    """
    inner = length * ratio ** -np.arange(panels - 1, -1, -1, dtype=float)
    return np.concatenate([[0.0], inner])


def graded_interval(a: float, b: float, panels: int, n: int, ratio: float = 2.0) -> Rule:
    """Composite rule on [a, b] with panels shrinking geometrically toward
    both endpoints."""
    half_panels = max(panels // 2, 1)
    mid = 0.5 * (a + b)
    left = a + geometric_edges(mid - a, half_panels, ratio)
    right = b - geometric_edges(b - mid, half_panels, ratio)[::-1]
    edges = np.concatenate([left, right[1:]])
    return composite(edges, n)


def power_weight_rule(length: float, exponent: float, panels: int, n: int) -> Rule:
    """Rule for integral_0^length f(u) u^exponent du with exponent > -1.

    Panels are graded geometrically toward u = 0. The innermost panel uses
    Gauss-Jacobi nodes for the weight u^exponent, the others use
    Gauss-Legendre with the weight folded into the weights.
    """
    if exponent <= -1.0:
        raise ValueError(f"weight exponent must exceed -1, got {exponent}")
    if length <= 0.0:
        return Rule(nodes=np.zeros(0), weights=np.zeros(0))
    edges = geometric_edges(length, panels)
    h = edges[1]
    xj, wj = _jacobi(n, 0.0, exponent)
    inner = Rule(
        nodes=0.5 * h * (xj + 1.0),
        weights=wj * (0.5 * h) ** (exponent + 1.0),
    )
    outer = composite(edges[1:], n)
    outer = Rule(nodes=outer.nodes, weights=outer.weights * outer.nodes**exponent)
    return Rule.concat([inner, outer])


def weighted_interval(lo: float, hi: float, exponent: float, panels: int, n: int) -> Rule:
    """Rule for integral_lo^hi f(z) |z|^exponent dz, split at z = 0."""
    rules: list[Rule] = []
    if lo < 0.0 < hi:
        pos = power_weight_rule(hi, exponent, panels, n)
        neg = power_weight_rule(-lo, exponent, panels, n)
        rules = [Rule(nodes=-neg.nodes[::-1], weights=neg.weights[::-1]), pos]
    elif lo >= 0.0:
        if lo == 0.0:
            rules = [power_weight_rule(hi, exponent, panels, n)]
        else:
            base = composite(lo + geometric_edges(hi - lo, panels), n)
            rules = [Rule(nodes=base.nodes, weights=base.weights * np.abs(base.nodes) ** exponent)]
    else:
        mirrored = weighted_interval(-hi, -lo, exponent, panels, n)
        rules = [Rule(nodes=-mirrored.nodes[::-1], weights=mirrored.weights[::-1])]
    return Rule.concat(rules)


def fan_rule(
    center: FloatArray,
    polygon: FloatArray,
    n_radial: int,
    n_angular: int,
    radial_panels: int = 1,
    grade_outward: bool = False,
) -> Rule:
    """Rule over a polygon that is star-shaped with respect to `center`.

    Each boundary edge spans a triangle with the center. A point is
    center + r ((1-w) b_i + w b_{i+1} - center) for r, w in [0, 1], whose
    Jacobian is r times twice the triangle area. Nodes are returned with
    shape (N, 2).
    """
    center = np.asarray(center, dtype=float)
    b0 = polygon - center
    b1 = np.roll(polygon, -1, axis=0) - center
    twice_area = np.abs(b0[:, 0] * b1[:, 1] - b0[:, 1] * b1[:, 0])
    if grade_outward and radial_panels > 1:
        radial_edges = 1.0 - geometric_edges(1.0, radial_panels)[::-1]
    else:
        radial_edges = np.linspace(0.0, 1.0, radial_panels + 1)
    radial = composite(radial_edges, n_radial)
    angular = gauss_legendre(0.0, 1.0, n_angular)
    r = radial.nodes[:, np.newaxis]
    w = angular.nodes[np.newaxis, :]
    weight_rw = (radial.weights * radial.nodes)[:, np.newaxis] * angular.weights[np.newaxis, :]
    directions = (1.0 - w)[..., np.newaxis] * b0[:, np.newaxis, np.newaxis, :] + w[
        ..., np.newaxis
    ] * b1[:, np.newaxis, np.newaxis, :]
    points = center + r[np.newaxis, :, :, np.newaxis] * directions
    weights = twice_area[:, np.newaxis, np.newaxis] * weight_rw[np.newaxis, :, :]
    return Rule(nodes=points.reshape(-1, 2), weights=weights.ravel())

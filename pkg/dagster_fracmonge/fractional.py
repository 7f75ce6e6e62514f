"""Fractional powers L^s and L^-s of the discrete operator M^-1 K.

Two independent routes are provided. The spectral route scales eigen
coefficients by lambda_k^(+-s). The semigroup route integrates the heat
semigroup against t^(-1-s) (apply) or t^(s-1) (solve) with graded Gauss
panels, split at A = 1/lambda_1.
"""

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np

from dagster_fracmonge.discrete_ops import (
    CrankNicolson,
    DiscreteOperators,
    EigenExp,
    HeatScheme,
    SpectralBasis,
    eig,
    heat_trajectory,
)
from dagster_fracmonge.quadrature import Rule, composite
from dagster_fracmonge.sections import Section
from dagster_fracmonge.special_fn import gamma
from dagster_fracmonge.types import FloatArray, FracMongeError

logger = logging.getLogger(__name__)

Provenance = t.Literal["spectral", "semigroup", "extension_trace", "closed_form"]

_NODE_SCHEDULE = (8, 16, 32, 64, 128)


class QuadratureError(FracMongeError):
    def __init__(self, estimate: float, tolerance: float) -> None:
        super().__init__(
            f"semigroup quadrature did not converge: estimated error {estimate:.3e} "
            f"above tolerance {tolerance:.3e}"
        )
        self.estimate = estimate
        self.tolerance = tolerance


@dataclass(kw_only=True)
class FracField:
    """An interior nodal field produced by one of the fractional routes.

    Coefficients in the M-orthonormal basis are attached when the field was
    produced spectrally; `to_coefficients` recovers them otherwise.
    """

    s: float
    values: FloatArray
    provenance: Provenance
    section: Section | None = None
    coefficients: FloatArray | None = None
    error_estimate: float | None = None

    def to_coefficients(self, basis: SpectralBasis) -> FloatArray:
        return basis.coefficients(self.values)

    @classmethod
    def from_coefficients(
        cls,
        basis: SpectralBasis,
        coefficients: FloatArray,
        *,
        s: float,
        provenance: Provenance,
        section: Section | None = None,
    ) -> "FracField":
        return cls(
            s=s,
            values=basis.synthesize(coefficients),
            provenance=provenance,
            section=section,
            coefficients=coefficients,
        )

    def full(self) -> FloatArray:
        """Nodal values including the zero boundary data."""
        if self.section is None:
            raise ValueError("field has no section attached")
        return self.section.extend(self.values)


def _scaled(scale: FloatArray, c: FloatArray) -> FloatArray:
    return scale * c if c.ndim == 1 else scale[:, np.newaxis] * c


def frac_apply_spectral(
    basis: SpectralBasis, s: float, v: FloatArray, section: Section | None = None
) -> FracField:
    """sum_k lambda_k^s v_k e_k"""
    coefficients = _scaled(basis.eigenvalues**s, basis.coefficients(v))
    return FracField.from_coefficients(basis, coefficients, s=s, provenance="spectral", section=section)


def frac_solve_spectral(
    basis: SpectralBasis, s: float, f: FloatArray, section: Section | None = None
) -> FracField:
    """sum_k lambda_k^-s f_k e_k"""
    coefficients = _scaled(basis.eigenvalues ** (-s), basis.coefficients(f))
    return FracField.from_coefficients(basis, coefficients, s=s, provenance="spectral", section=section)


@dataclass(frozen=True, kw_only=True)
class QuadSpec:
    """Parameters of the semigroup quadrature.

    Attributes:
        scheme: Heat evaluation, exact per mode or Crank-Nicolson marching
        split: The split point A. Defaults to 1/lambda_1.
        tolerance: Convergence tolerance for the node doubling. Defaults to
            1e-10 for the exact scheme and 1e-4 for Crank-Nicolson.
        min_nodes: Gauss nodes per panel at the first level
        max_nodes: Gauss nodes per panel at the last level
        tail_cutoff: The tail is truncated at T with exp(-lambda_1 T) ||v|| below this
        stiff_fraction: Panels are graded down to t = stiff_fraction / lambda_max
    """

    scheme: HeatScheme = field(default_factory=EigenExp)
    split: float | None = None
    tolerance: float | None = None
    min_nodes: int = 8
    max_nodes: int = 128
    tail_cutoff: float = 1.0e-14
    stiff_fraction: float = 1.0e-3
    lambda_1: float | None = None
    lambda_max: float | None = None

    @property
    def resolved_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return 1.0e-4 if isinstance(self.scheme, CrankNicolson) else 1.0e-10

    def node_schedule(self) -> list[int]:
        return [n for n in _NODE_SCHEDULE if self.min_nodes <= n <= self.max_nodes]


class _Evolution(t.Protocol):
    def values(self, times: FloatArray) -> FloatArray: ...

    def increments(self, times: FloatArray) -> FloatArray: ...


@dataclass(kw_only=True)
class _ExactEvolution:
    basis: SpectralBasis
    coefficients: FloatArray
    residual: FloatArray

    def values(self, times: FloatArray) -> FloatArray:
        return self._synthesize(np.exp(-np.outer(times, self.basis.eigenvalues)))

    def increments(self, times: FloatArray) -> FloatArray:
        return self._synthesize(np.expm1(-np.outer(times, self.basis.eigenvalues))) - self.residual

    def _synthesize(self, decay: FloatArray) -> FloatArray:
        if self.coefficients.ndim == 1:
            return (decay * self.coefficients) @ self.basis.vectors.T
        return np.einsum("tm,mk,nm->tnk", decay, self.coefficients, self.basis.vectors, optimize=True)


@dataclass(kw_only=True)
class _MarchedEvolution:
    ops: DiscreteOperators
    v: FloatArray
    scheme: CrankNicolson
    lambda_max: float

    def values(self, times: FloatArray) -> FloatArray:
        return heat_trajectory(self.ops, self.v, times, self.scheme, lambda_max=self.lambda_max)

    def increments(self, times: FloatArray) -> FloatArray:
        return heat_trajectory(
            self.ops, self.v, times, self.scheme, lambda_max=self.lambda_max, increments=True
        )


@dataclass(kw_only=True)
class _ScalarEvolution:
    lam: float

    def values(self, times: FloatArray) -> FloatArray:
        return np.exp(-self.lam * times)[:, np.newaxis]

    def increments(self, times: FloatArray) -> FloatArray:
        return np.expm1(-self.lam * times)[:, np.newaxis]


def _head_edges(split: float, t_min: float, exponent: float) -> FloatArray:
    """Panel edges in tau = t^exponent covering (0, split], graded by halving
    t down to t_min."""
    levels = max(int(math.ceil(math.log2(split / t_min))), 1)
    t_edges = split * 2.0 ** -np.arange(levels, -1, -1, dtype=float)
    return np.concatenate([[0.0], t_edges**exponent])


def _tail_edges(split: float, end: float) -> FloatArray:
    edges = [split]
    while edges[-1] * 2.0 < end:
        edges.append(edges[-1] * 2.0)
    edges.append(end)
    return np.asarray(edges)


def _quadrature_sum(rule: Rule, samples: FloatArray) -> FloatArray:
    return np.tensordot(rule.weights, samples, axes=(0, 0))


def _power_integral(
    evolution: _Evolution,
    s: float,
    *,
    inverse: bool,
    size: float,
    lambda_1: float,
    lambda_max: float,
    spec: QuadSpec,
) -> tuple[FloatArray, float]:
    """Evaluates the Bochner integral with node doubling.

    Returns the estimate (without the 1/Gamma prefactor) and the last
    successive difference relative to its sup norm.
    """
    split = spec.split if spec.split is not None else 1.0 / lambda_1
    t_min = min(spec.stiff_fraction / lambda_max, 0.5 * split)
    end = split + max(math.log(max(size, 1.0e-300) / spec.tail_cutoff), 1.0) / lambda_1
    head_exponent = s if inverse else 1.0 - s
    head_edges = _head_edges(split, t_min, head_exponent)
    tail_edges = _tail_edges(split, end)
    tolerance = spec.resolved_tolerance

    previous: FloatArray | None = None
    change = math.inf
    for n in spec.node_schedule():
        head = composite(head_edges, n)
        tail = composite(tail_edges, n)
        t_head = head.nodes ** (1.0 / head_exponent)
        times = np.concatenate([t_head, tail.nodes])
        if inverse:
            evaluated = evolution.values(times)
            head_part = _quadrature_sum(head, evaluated[: t_head.size]) / s
            tail_weights = tail.weights * tail.nodes ** (s - 1.0)
            tail_part = np.tensordot(tail_weights, evaluated[t_head.size :], axes=(0, 0))
            estimate = head_part + tail_part
        else:
            increments = evolution.increments(t_head)
            q = 1.0 / (1.0 - s)
            head_weights = head.weights * q * head.nodes ** (-q)
            head_part = np.tensordot(head_weights, increments, axes=(0, 0))
            tail_weights = tail.weights * tail.nodes ** (-1.0 - s)
            tail_part = np.tensordot(tail_weights, evolution.values(tail.nodes), axes=(0, 0))
            estimate = head_part + tail_part
        if previous is not None:
            scale = max(float(np.max(np.abs(estimate))), np.finfo(float).tiny)
            change = float(np.max(np.abs(estimate - previous))) / scale
            logger.debug("semigroup quadrature level", extra=dict(nodes=n, change=change))
            if change <= tolerance:
                return estimate, change
        previous = estimate
    raise QuadratureError(change, tolerance)


def _prepare(
    ops: DiscreteOperators, v: FloatArray, spec: QuadSpec
) -> tuple[_Evolution, float, float]:
    match spec.scheme:
        case EigenExp(basis=basis):
            b = basis if basis is not None else ops.full_basis()
            coefficients = b.coefficients(v)
            residual = v - b.synthesize(coefficients)
            evolution: _Evolution = _ExactEvolution(basis=b, coefficients=coefficients, residual=residual)
            lambda_1 = spec.lambda_1 or b.lambda_1
            lambda_max = spec.lambda_max or b.lambda_max
        case CrankNicolson() as scheme:
            lambda_1 = spec.lambda_1 or eig(ops, 1).lambda_1
            lambda_max = spec.lambda_max or ops.lambda_max_bound()
            evolution = _MarchedEvolution(ops=ops, v=v, scheme=scheme, lambda_max=lambda_max)
        case _:
            raise TypeError(f"unknown heat scheme {spec.scheme!r}")
    return evolution, lambda_1, lambda_max


def _check_order(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")


def frac_apply_semigroup(ops: DiscreteOperators, s: float, v: FloatArray, spec: QuadSpec | None = None) -> FracField:
    """(1/Gamma(-s)) int_0^inf (e^{-tL} v - v) t^{-1-s} dt with L = M^-1 K.

    On (0, A] the substitution tau = t^(1-s) leaves a bounded integrand. On
    [A, T] geometric panels integrate e^{-tL} v t^{-1-s}; the -v part of the
    tail is integrated exactly, giving -v A^-s / s.

    Raises:
        QuadratureError: successive node doublings never agree to tolerance
    """
    _check_order(s)
    spec = spec or QuadSpec()
    evolution, lambda_1, lambda_max = _prepare(ops, v, spec)
    integral, change = _power_integral(
        evolution, s, inverse=False, size=float(np.max(np.abs(v), initial=0.0)),
        lambda_1=lambda_1, lambda_max=lambda_max, spec=spec,
    )
    split = spec.split if spec.split is not None else 1.0 / lambda_1
    values = (integral - v * split ** (-s) / s) / gamma(-s)
    return FracField(s=s, values=values, provenance="semigroup", section=ops.section, error_estimate=change)


def frac_solve_semigroup(ops: DiscreteOperators, s: float, f: FloatArray, spec: QuadSpec | None = None) -> FracField:
    """(1/Gamma(s)) int_0^inf e^{-tL} f t^{s-1} dt, with tau = t^s on (0, A].

    Raises:
        QuadratureError: successive node doublings never agree to tolerance
    """
    _check_order(s)
    spec = spec or QuadSpec()
    evolution, lambda_1, lambda_max = _prepare(ops, f, spec)
    integral, change = _power_integral(
        evolution, s, inverse=True, size=float(np.max(np.abs(f), initial=0.0)),
        lambda_1=lambda_1, lambda_max=lambda_max, spec=spec,
    )
    return FracField(
        s=s, values=integral / gamma(s), provenance="semigroup", section=ops.section, error_estimate=change
    )


def scalar_power_quadrature(lam: float, s: float, spec: QuadSpec | None = None) -> float:
    """(1/Gamma(-s)) int_0^inf (e^{-lam t} - 1) t^{-1-s} dt, which equals lam^s."""
    _check_order(s)
    spec = spec or QuadSpec()
    integral, _ = _power_integral(
        _ScalarEvolution(lam=lam), s, inverse=False, size=1.0, lambda_1=lam, lambda_max=lam, spec=spec
    )
    split = spec.split if spec.split is not None else 1.0 / lam
    return float((integral[0] - split ** (-s) / s) / gamma(-s))


def scalar_inverse_power_quadrature(lam: float, s: float, spec: QuadSpec | None = None) -> float:
    """(1/Gamma(s)) int_0^inf e^{-lam t} t^{s-1} dt, which equals lam^-s."""
    _check_order(s)
    spec = spec or QuadSpec()
    integral, _ = _power_integral(
        _ScalarEvolution(lam=lam), s, inverse=True, size=1.0, lambda_1=lam, lambda_max=lam, spec=spec
    )
    return float(integral[0] / gamma(s))


@dataclass(frozen=True, kw_only=True)
class InterpolationReport:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return self.ratio <= 1.0 + 1.0e-12


def interpolation_check(ops: DiscreteOperators, basis: SpectralBasis, s: float, v: FloatArray) -> InterpolationReport:
    """Checks ||L^s v||_inf <= (2^(1-s)/Gamma(2-s)) ||L v||_inf^s ||v||_inf^(1-s)."""
    _check_order(s)
    frac = frac_apply_spectral(basis, s, v).values
    full = frac_apply_spectral(basis, 1.0, v).values
    constant = 2.0 ** (1.0 - s) / gamma(2.0 - s)
    lhs = float(np.max(np.abs(frac), initial=0.0))
    rhs = constant * float(np.max(np.abs(full), initial=0.0)) ** s * float(np.max(np.abs(v), initial=0.0)) ** (1.0 - s)
    return InterpolationReport(lhs=lhs, rhs=rhs)


@dataclass(frozen=True, kw_only=True)
class MaxPrincipleReport:
    node: int
    value: float
    asserted: bool
    tolerance: float = 1.0e-10

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance


def max_principle_check(
    basis: SpectralBasis, s: float, v: FloatArray, node: int, monotone: bool = True
) -> MaxPrincipleReport:
    """Evaluates (L^s v)(x0) at an interior zero x0 of v >= 0.

    Args:
        basis: Spectral basis, complete for an exact evaluation
        s: Fractional order
        v: Nonnegative interior nodal vector
        node: Interior index of x0 with v[node] == 0
        monotone: Whether the stencil satisfies the discrete maximum
            principle; the result is only asserted when it does

    Raises:
        ValueError: v has negative entries or does not vanish at `node`
    """
    _check_order(s)
    if np.min(v, initial=0.0) < 0.0:
        raise ValueError("max_principle_check requires v >= 0")
    if v[node] != 0.0:
        raise ValueError(f"v does not vanish at node {node}")
    value = float(frac_apply_spectral(basis, s, v).values[node])
    return MaxPrincipleReport(node=node, value=value, asserted=monotone)

"""Convex potentials, their Monge-Ampere densities and the quasi-distance
delta_phi(x0, x) = phi(x) - phi(x0) - <grad phi(x0), x - x0>.

Points are arrays whose last axis has length `dim`; every evaluator
broadcasts over the leading axes so a whole mesh can be evaluated at once.
"""

import logging
import typing as t
from dataclasses import dataclass

import numpy as np

from dagster_fracmonge.types import FloatArray, FracMongeError

logger = logging.getLogger(__name__)

PresetName = t.Literal["quad", "aniso", "power1d", "perturbed_quad"]


class NotPositiveDefiniteError(FracMongeError):
    def __init__(self, point: FloatArray, eigenvalues: FloatArray) -> None:
        super().__init__(
            f"hessian is not positive definite at {np.asarray(point).tolist()} "
            f"(eigenvalues {np.asarray(eigenvalues).tolist()})"
        )
        self.point = point
        self.eigenvalues = eigenvalues


def as_points(x: t.Any, dim: int) -> FloatArray:
    """Coerces scalars and flat sequences to arrays with a trailing axis of
    length `dim`."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != dim:
        if dim == 1:
            arr = arr[..., np.newaxis]
        else:
            raise ValueError(f"expected points with trailing dimension {dim}, got {arr.shape}")
    return arr


@dataclass(frozen=True, kw_only=True)
class Potential:
    """Base class for a C^2 strictly convex potential.

    Subclasses implement `_value`, `_gradient` and `_hessian` on arrays of
    shape (..., dim). The public methods normalize inputs.
    """

    dim: int
    label: str

    def value(self, x: t.Any) -> FloatArray:
        return self._value(as_points(x, self.dim))

    def gradient(self, x: t.Any) -> FloatArray:
        return self._gradient(as_points(x, self.dim))

    def hessian(self, x: t.Any) -> FloatArray:
        return self._hessian(as_points(x, self.dim))

    def bregman(self, x0: t.Any, x: t.Any) -> FloatArray:
        x0p = as_points(x0, self.dim)
        xp = as_points(x, self.dim)
        return (
            self._value(xp)
            - self._value(x0p)
            - np.sum(self._gradient(x0p) * (xp - x0p), axis=-1)
        )

    def _value(self, x: FloatArray) -> FloatArray:
        raise NotImplementedError()

    def _gradient(self, x: FloatArray) -> FloatArray:
        raise NotImplementedError()

    def _hessian(self, x: FloatArray) -> FloatArray:
        raise NotImplementedError()


@dataclass(frozen=True, kw_only=True)
class QuadPotential(Potential):
    """phi(x) = c |x|^2"""

    c: float
    label: str = "quad"

    def _value(self, x: FloatArray) -> FloatArray:
        return self.c * np.sum(x * x, axis=-1)

    def _gradient(self, x: FloatArray) -> FloatArray:
        return 2.0 * self.c * x

    def _hessian(self, x: FloatArray) -> FloatArray:
        eye = np.eye(self.dim)
        return np.broadcast_to(2.0 * self.c * eye, x.shape[:-1] + eye.shape).copy()

    def bregman(self, x0: t.Any, x: t.Any) -> FloatArray:
        diff = as_points(x, self.dim) - as_points(x0, self.dim)
        return self.c * np.sum(diff * diff, axis=-1)


@dataclass(frozen=True, kw_only=True)
class AnisoPotential(Potential):
    """phi(x) = 1/2 <A x, x> with A = [[a11, a12], [a12, a22]] SPD"""

    a11: float
    a12: float
    a22: float
    dim: int = 2
    label: str = "aniso"

    @property
    def matrix(self) -> FloatArray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def _value(self, x: FloatArray) -> FloatArray:
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.matrix, x)

    def _gradient(self, x: FloatArray) -> FloatArray:
        return x @ self.matrix.T

    def _hessian(self, x: FloatArray) -> FloatArray:
        return np.broadcast_to(self.matrix, x.shape[:-1] + (2, 2)).copy()

    def bregman(self, x0: t.Any, x: t.Any) -> FloatArray:
        diff = as_points(x, self.dim) - as_points(x0, self.dim)
        return 0.5 * np.einsum("...i,ij,...j->...", diff, self.matrix, diff)


@dataclass(frozen=True, kw_only=True)
class Power1dPotential(Potential):
    """phi(x) = |x|^p / p in one dimension. The hessian vanishes at 0, so
    the origin is outside the admissible domain."""

    p: float
    dim: int = 1
    label: str = "power1d"

    def _value(self, x: FloatArray) -> FloatArray:
        return np.abs(x[..., 0]) ** self.p / self.p

    def _gradient(self, x: FloatArray) -> FloatArray:
        return np.abs(x) ** (self.p - 1.0) * np.sign(x)

    def _hessian(self, x: FloatArray) -> FloatArray:
        return ((self.p - 1.0) * np.abs(x) ** (self.p - 2.0))[..., np.newaxis]


@dataclass(frozen=True, kw_only=True)
class PerturbedQuadPotential(Potential):
    """phi(x) = |x|^2/2 + eps |x|^4"""

    eps: float
    label: str = "perturbed_quad"

    def _value(self, x: FloatArray) -> FloatArray:
        r2 = np.sum(x * x, axis=-1)
        return 0.5 * r2 + self.eps * r2 * r2

    def _gradient(self, x: FloatArray) -> FloatArray:
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return x + 4.0 * self.eps * r2 * x

    def _hessian(self, x: FloatArray) -> FloatArray:
        r2 = np.sum(x * x, axis=-1)[..., np.newaxis, np.newaxis]
        eye = np.eye(self.dim)
        outer = x[..., :, np.newaxis] * x[..., np.newaxis, :]
        return eye + 4.0 * self.eps * (r2 * eye + 2.0 * outer)


@dataclass(frozen=True, kw_only=True)
class HsPotential(Potential):
    """h_s(z) = s^2/(1-s) |z|^(1/s), the one dimensional companion of the
    extension variable. h_s'' = |z|^(1/s - 2)."""

    s: float
    dim: int = 1
    label: str = "h_s"

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0,1), got {self.s}")

    def _value(self, x: FloatArray) -> FloatArray:
        s = self.s
        return s * s / (1.0 - s) * np.abs(x[..., 0]) ** (1.0 / s)

    def _gradient(self, x: FloatArray) -> FloatArray:
        s = self.s
        return s / (1.0 - s) * np.abs(x) ** (1.0 / s - 1.0) * np.sign(x)

    def _hessian(self, x: FloatArray) -> FloatArray:
        return (np.abs(x) ** (1.0 / self.s - 2.0))[..., np.newaxis]

    def slice_radius(self, r: FloatArray | float) -> FloatArray:
        """Half width of S_h(0, r) = {|z| < (r (1-s)/s^2)^s}."""
        s = self.s
        rr = np.maximum(np.asarray(r, dtype=float), 0.0)
        return (rr * (1.0 - s) / (s * s)) ** s


def delta(phi: Potential, x0: t.Any, x: t.Any) -> FloatArray:
    """delta_phi(x0, x), elementwise over broadcast point arrays."""
    return phi.bregman(x0, x)


def mu_density(phi: Potential, x: t.Any) -> FloatArray:
    """mu_phi(x) = det D^2 phi(x).

    Raises:
        NotPositiveDefiniteError: the hessian has a nonpositive eigenvalue
            at one of the queried points
    """
    hess = phi.hessian(x)
    eigenvalues = np.linalg.eigvalsh(hess)
    bad = eigenvalues[..., 0] <= 0.0
    if np.any(bad):
        index = np.argwhere(bad)[0]
        point = as_points(x, phi.dim)[tuple(index)]
        raise NotPositiveDefiniteError(point, eigenvalues[tuple(index)])
    return np.prod(eigenvalues, axis=-1) if phi.dim > 1 else hess[..., 0, 0]


@dataclass(frozen=True, kw_only=True)
class DerivativeCheck:
    gradient_error: float
    hessian_error: float

    def passed(self, tolerance: float = 1.0e-6) -> bool:
        return self.gradient_error <= tolerance and self.hessian_error <= tolerance


def derivative_check(phi: Potential, points: FloatArray, h: float = 1.0e-5) -> DerivativeCheck:
    """Compares gradient against central differences of value and hessian
    against central differences of gradient.

    Errors are measured as max |fd - exact| / max(|exact|, 1) over all points
    and components.
    """
    points = as_points(points, phi.dim)
    grad = phi.gradient(points)
    hess = phi.hessian(points)
    fd_grad = np.empty_like(grad)
    fd_hess = np.empty_like(hess)
    for i in range(phi.dim):
        step = np.zeros(phi.dim)
        step[i] = h
        fd_grad[..., i] = (phi.value(points + step) - phi.value(points - step)) / (2.0 * h)
        fd_hess[..., :, i] = (phi.gradient(points + step) - phi.gradient(points - step)) / (2.0 * h)
    grad_scale = np.maximum(np.max(np.abs(grad), axis=-1), 1.0)
    hess_scale = np.maximum(np.max(np.abs(hess), axis=(-2, -1)), 1.0)
    grad_err = np.max(np.max(np.abs(fd_grad - grad), axis=-1) / grad_scale)
    hess_err = np.max(np.max(np.abs(fd_hess - hess), axis=(-2, -1)) / hess_scale)
    return DerivativeCheck(gradient_error=float(grad_err), hessian_error=float(hess_err))


def potential_from_preset(
    preset: PresetName,
    *,
    dim: int = 1,
    c: float = 1.0,
    a11: float = 1.0,
    a12: float = 0.0,
    a22: float = 1.0,
    p: float = 4.0,
    eps: float = 0.0,
) -> Potential:
    """Builds a preset potential from its identifier and parameters."""
    match preset:
        case "quad":
            if c <= 0.0:
                raise ValueError(f"quad requires c > 0, got {c}")
            return QuadPotential(dim=dim, c=c)
        case "aniso":
            potential = AnisoPotential(a11=a11, a12=a12, a22=a22)
            eigenvalues = np.linalg.eigvalsh(potential.matrix)
            if eigenvalues[0] <= 0.0:
                raise NotPositiveDefiniteError(np.zeros(2), eigenvalues)
            return potential
        case "power1d":
            if dim != 1 or p <= 2.0:
                raise ValueError("power1d requires dim=1 and p>2")
            return Power1dPotential(p=p)
        case "perturbed_quad":
            if eps < 0.0:
                raise ValueError(f"perturbed_quad requires eps >= 0, got {eps}")
            return PerturbedQuadPotential(dim=dim, eps=eps)
        case _:
            raise ValueError(f"unknown potential preset {preset!r}")

"""Discrete nondivergence and divergence operators on a section, their
generalized eigenbasis and heat semigroup time stepping.

All matrices act on interior nodal vectors. Boundary nodes carry homogeneous
Dirichlet data and are eliminated.
"""

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from dagster_fracmonge.potentials import NotPositiveDefiniteError, mu_density
from dagster_fracmonge.quadrature import gauss_legendre
from dagster_fracmonge.sections import Section
from dagster_fracmonge.types import FloatArray, FracMongeError, IntArray

logger = logging.getLogger(__name__)

OperatorRoute = t.Literal["divergence", "nondivergence"]

_SYMMETRY_TOLERANCE = 1.0e-12
_EIGEN_RESIDUAL_TOLERANCE = 1.0e-8


class AssemblyError(FracMongeError):
    pass


class EigenSolveError(FracMongeError):
    def __init__(self, message: str, residuals: FloatArray | None = None) -> None:
        super().__init__(message)
        self.residuals = residuals


class TimeStepError(FracMongeError, ValueError):
    pass


@dataclass(kw_only=True)
class DiscreteOperators:
    """K (stiffness for -div(A_phi grad v)), the lumped mu_phi-weighted mass
    diagonal and the nondivergence matrix L, restricted to interior nodes."""

    section: Section
    K: sp.csr_matrix
    mass: FloatArray
    L: sp.csr_matrix
    _basis: "SpectralBasis | None" = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.mass.size)

    @property
    def dim(self) -> int:
        return self.section.dim

    @property
    def M(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    @property
    def interior_index(self) -> IntArray:
        return self.section.interior_index

    @property
    def boundary_index(self) -> IntArray:
        return np.flatnonzero(self.section.is_boundary)

    @property
    def is_monotone(self) -> bool:
        """True when K is a Z-matrix (no positive off-diagonal entries), the
        condition for the discrete maximum principle."""
        off = self.K - sp.diags(self.K.diagonal())
        scale = float(abs(self.K).max())
        return bool(off.max() <= 1.0e-12 * scale) if off.nnz else True

    def divergence_apply(self, v: FloatArray) -> FloatArray:
        """M^-1 K v"""
        return (self.K @ v) / (self.mass if v.ndim == 1 else self.mass[:, np.newaxis])

    def m_inner(self, u: FloatArray, v: FloatArray) -> float:
        return float(np.sum(self.mass * u * v))

    def m_norm(self, v: FloatArray) -> float:
        return math.sqrt(self.m_inner(v, v))

    def lambda_max_bound(self) -> float:
        """Gershgorin bound for the largest eigenvalue of M^-1 K."""
        row_abs = np.asarray(abs(self.K).sum(axis=1)).ravel()
        return float(np.max(row_abs / self.mass))

    def full_basis(self) -> "SpectralBasis":
        if self._basis is None or self._basis.m < self.n:
            self._basis = eig(self, self.n)
        return self._basis


def _assemble_1d(sec: Section) -> DiscreteOperators:
    phi = sec.potential
    x = sec.nodes[:, 0]
    h = float(sec.spacing or (x[1] - x[0]))
    n = sec.n_interior

    # lumped mass: integral of phi'' times the hat function, 4 Gauss points per element
    rule = gauss_legendre(0.0, 1.0, 4)
    local = x[:-1, np.newaxis] + h * rule.nodes[np.newaxis, :]
    try:
        weight = mu_density(phi, local)
    except NotPositiveDefiniteError as err:
        raise AssemblyError(f"singular hessian at quadrature point {err.point.tolist()}") from err
    left = h * np.sum(weight * (1.0 - rule.nodes) * rule.weights, axis=1)
    right = h * np.sum(weight * rule.nodes * rule.weights, axis=1)
    full_mass = np.zeros(x.size)
    full_mass[:-1] += left
    full_mass[1:] += right
    mass = full_mass[1:-1]

    main = np.full(n, 2.0 / h)
    off = np.full(n - 1, -1.0 / h)
    K = sp.diags([off, main, off], [-1, 0, 1], format="csr")

    try:
        second = mu_density(phi, sec.interior_nodes)
    except NotPositiveDefiniteError as err:
        raise AssemblyError(f"singular hessian at node {err.point.tolist()}") from err
    L = sp.diags(1.0 / (h * second)) @ K
    return DiscreteOperators(section=sec, K=K, mass=mass, L=sp.csr_matrix(L))


def _cofactor(hess: FloatArray) -> FloatArray:
    out = np.empty_like(hess)
    out[..., 0, 0] = hess[..., 1, 1]
    out[..., 1, 1] = hess[..., 0, 0]
    out[..., 0, 1] = -hess[..., 0, 1]
    out[..., 1, 0] = -hess[..., 1, 0]
    return out


def _assemble_2d(sec: Section) -> DiscreteOperators:
    phi = sec.potential
    if sec.elements is None:
        raise AssemblyError("two dimensional assembly needs a triangulated section")
    tris = sec.elements
    p = sec.nodes[tris]  # (T, 3, 2)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)

    # gradients of the barycentric coordinates
    grads = np.empty((tris.shape[0], 3, 2))
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]

    # edge midpoints; midpoint k is opposite vertex k
    mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])
    try:
        coefficient = _cofactor(phi.hessian(mids)).mean(axis=1)
        mu_mid = mu_density(phi, mids)
    except NotPositiveDefiniteError as err:
        raise AssemblyError(f"singular hessian at quadrature point {err.point.tolist()}") from err

    local_k = area[:, np.newaxis, np.newaxis] * np.einsum("tia,tab,tjb->tij", grads, coefficient, grads)
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n_nodes = sec.nodes.shape[0]
    K_full = sp.coo_matrix((local_k.ravel(), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()

    # vertex i touches the two midpoints not opposite to it, each with hat value 1/2
    local_m = (area / 6.0)[:, np.newaxis] * (mu_mid.sum(axis=1, keepdims=True) - mu_mid)
    full_mass = np.bincount(tris.ravel(), weights=local_m.ravel(), minlength=n_nodes)

    interior = sec.interior_index
    K = sp.csr_matrix(K_full[interior][:, interior])
    mass = full_mass[interior]
    L = sp.csr_matrix(sp.diags(1.0 / mass) @ K)
    return DiscreteOperators(section=sec, K=K, mass=mass, L=L)


def assemble(sec: Section) -> DiscreteOperators:
    """Assembles K, M and L on the interior nodes of `sec`.

    In one dimension L is the second difference scaled by 1/phi'' and K, M
    are P1 elements with A_phi = 1 and mass weight phi''. In two dimensions K
    uses P1 elements with the cofactor matrix of D^2 phi as coefficient, M is
    lumped with weight mu_phi and L defaults to M^-1 K; the direct finite
    difference operator is available from `nondivergence_fd_matrix`.

    Raises:
        AssemblyError: singular hessian at a quadrature point, or an
            assembled K that is not symmetric
    """
    ops = _assemble_1d(sec) if sec.dim == 1 else _assemble_2d(sec)
    asym = float(abs(ops.K - ops.K.T).max()) if ops.K.nnz else 0.0
    scale = float(abs(ops.K).max())
    if asym > _SYMMETRY_TOLERANCE * scale:
        raise AssemblyError(f"stiffness matrix is not symmetric: {asym:.3e} against {scale:.3e}")
    if np.any(ops.mass <= 0.0):
        raise AssemblyError("lumped mass has nonpositive entries")
    logger.debug("assembled operators", extra=dict(dim=sec.dim, interior=ops.n, nnz=ops.K.nnz))
    return ops


def _neighbors(sec: Section) -> list[set[int]]:
    assert sec.elements is not None
    out: list[set[int]] = [set() for _ in range(sec.nodes.shape[0])]
    for tri in sec.elements:
        for a in tri:
            out[int(a)].update(int(b) for b in tri if b != a)
    return out


def nondivergence_fd_matrix(sec: Section) -> sp.csr_matrix:
    """Direct discretization of -trace(D^2 phi^-1 D^2 v).

    In one dimension this is the scaled second difference. In two
    dimensions the hessian of v at each interior node is recovered by a
    least squares quadratic fit over its one-ring (two-ring when the one-ring
    has fewer than eight points).
    """
    if sec.dim == 1:
        return assemble(sec).L
    phi = sec.potential
    neighbors = _neighbors(sec)
    interior = sec.interior_index
    position = np.full(sec.nodes.shape[0], -1)
    position[interior] = np.arange(interior.size)
    inv_hess = np.linalg.inv(phi.hessian(sec.nodes[interior]))

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for row, node in enumerate(interior):
        stencil = set(neighbors[node])
        if len(stencil) < 7:
            for other in list(stencil):
                stencil.update(neighbors[other])
        stencil.discard(int(node))
        stencil_nodes = np.array([int(node), *sorted(stencil)])
        d = sec.nodes[stencil_nodes] - sec.nodes[node]
        design = np.column_stack(
            [np.ones(d.shape[0]), d[:, 0], d[:, 1], 0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1], 0.5 * d[:, 1] ** 2]
        )
        hess_rows = np.linalg.pinv(design)[3:]
        a = inv_hess[row]
        weights = -(a[0, 0] * hess_rows[0] + 2.0 * a[0, 1] * hess_rows[1] + a[1, 1] * hess_rows[2])
        for target, w in zip(stencil_nodes, weights):
            col = position[target]
            if col >= 0:
                rows.append(row)
                cols.append(int(col))
                vals.append(float(w))
    n = interior.size
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def consistency_residual(ops: DiscreteOperators, v: FloatArray, L: sp.spmatrix | None = None) -> float:
    """Relative discrete L2 residual ||K v - M (L v)|| / ||K v||.

    `L` defaults to the operators' own nondivergence matrix in one dimension
    and to the finite difference cross-check in two.
    """
    if L is None:
        L = ops.L if ops.dim == 1 else nondivergence_fd_matrix(ops.section)
    kv = ops.K @ v
    r = kv - ops.mass * (L @ v)
    denom = float(np.linalg.norm(kv))
    if denom == 0.0:
        raise ValueError("test vector lies in the kernel of K")
    return float(np.linalg.norm(r)) / denom


@dataclass(kw_only=True)
class SpectralBasis:
    """The m smallest generalized eigenpairs K e = lambda M e with
    M-orthonormal columns."""

    eigenvalues: FloatArray
    vectors: FloatArray
    mass: FloatArray

    @property
    def m(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def lambda_1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def coefficients(self, v: FloatArray) -> FloatArray:
        weighted = self.mass * v if v.ndim == 1 else self.mass[:, np.newaxis] * v
        return self.vectors.T @ weighted

    def synthesize(self, coefficients: FloatArray) -> FloatArray:
        return self.vectors @ coefficients

    def apply_function(self, v: FloatArray, fn: t.Callable[[FloatArray], FloatArray]) -> FloatArray:
        c = self.coefficients(v)
        scale = fn(self.eigenvalues)
        return self.synthesize(scale * c if c.ndim == 1 else scale[:, np.newaxis] * c)

    def orthonormality_residual(self) -> float:
        gram = self.vectors.T @ (self.mass[:, np.newaxis] * self.vectors)
        return float(np.max(np.abs(gram - np.eye(self.m))))

    def rayleigh_quotient(self, ops: DiscreteOperators, k: int = 0) -> float:
        e = self.vectors[:, k]
        return float(e @ (ops.K @ e)) / ops.m_inner(e, e)


def eig(ops: DiscreteOperators, m: int) -> SpectralBasis:
    """Solves K e = lambda M e for the m smallest pairs.

    The lumped M is diagonal, so the problem reduces to the symmetric matrix
    M^-1/2 K M^-1/2. It is tridiagonal in one dimension and handled by
    `eigh_tridiagonal`; in two dimensions a dense `eigh` is used.

    Raises:
        ValueError: m outside [1, n_interior]
        EigenSolveError: the solver failed or a residual exceeds tolerance
    """
    if not 1 <= m <= ops.n:
        raise ValueError(f"requested {m} eigenpairs from {ops.n} interior nodes")
    scale = 1.0 / np.sqrt(ops.mass)
    reduced = sp.diags(scale) @ ops.K @ sp.diags(scale)
    try:
        if ops.dim == 1:
            diagonal = reduced.diagonal()
            offdiagonal = reduced.diagonal(1)
            values, vectors = sla.eigh_tridiagonal(
                diagonal, offdiagonal, select="i", select_range=(0, m - 1)
            )
        else:
            values, vectors = sla.eigh(reduced.toarray(), subset_by_index=[0, m - 1])
    except (np.linalg.LinAlgError, ValueError) as err:
        raise EigenSolveError(f"symmetric eigensolver failed: {err}") from err

    vectors = scale[:, np.newaxis] * vectors
    # fix signs so the largest entry of each eigenvector is positive
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(m)])
    vectors = vectors * np.where(signs == 0.0, 1.0, signs)

    residual = ops.K @ vectors - ops.mass[:, np.newaxis] * vectors * values
    norms = np.linalg.norm(residual, axis=0) / np.maximum(
        np.abs(values) * np.linalg.norm(ops.mass[:, np.newaxis] * vectors, axis=0), np.finfo(float).tiny
    )
    if np.any(norms > _EIGEN_RESIDUAL_TOLERANCE):
        raise EigenSolveError(f"eigenpair residual {float(np.max(norms)):.3e} above tolerance", norms)
    if values[0] <= 0.0:
        raise EigenSolveError(f"smallest eigenvalue {values[0]:.3e} is not positive", norms)
    logger.debug(
        "eigenpairs computed", extra=dict(m=m, lambda_1=float(values[0]), max_residual=float(np.max(norms)))
    )
    return SpectralBasis(eigenvalues=np.asarray(values), vectors=vectors, mass=ops.mass.copy())


@dataclass(frozen=True, kw_only=True)
class EigenExp:
    """Exact per-mode semigroup. Without an explicit basis the full basis of
    the operators is used."""

    basis: SpectralBasis | None = None


@dataclass(frozen=True, kw_only=True)
class CrankNicolson:
    """Crank-Nicolson time stepping.

    Attributes:
        dt: Fixed step for `heat_step`. Defaults to t / 10^4.
        growth: Step growth ratio used by `heat_trajectory`, where each step
            is at most (growth - 1) times the current time.
        startup_steps: Leading steps of `heat_trajectory` taken as two
            backward Euler half steps, which damp stiff modes of rough data.
    """

    dt: float | None = None
    growth: float = 1.01
    startup_steps: int = 2


HeatScheme = EigenExp | CrankNicolson


class _Stepper:
    """Solves (P + c Q) x = (P - c Q) u for changing c, with P = M and Q = K
    for the divergence route or P = I and Q = L for the nondivergence one."""

    def __init__(self, ops: DiscreteOperators, route: OperatorRoute) -> None:
        self.ops = ops
        if route == "divergence":
            self.P = ops.mass
            self.Q = ops.K
        else:
            self.P = np.ones(ops.n)
            self.Q = ops.L
        self.banded = ops.dim == 1
        if self.banded:
            self.q_main = self.Q.diagonal()
            self.q_upper = self.Q.diagonal(1)
            self.q_lower = self.Q.diagonal(-1)

    def step(self, u: FloatArray, c: float, source: FloatArray | None = None) -> FloatArray:
        p = self.P if u.ndim == 1 else self.P[:, np.newaxis]
        rhs = p * u - c * (self.Q @ u)
        if source is not None:
            rhs = rhs + c * source
        return self._solve(rhs, c)

    def backward_step(self, u: FloatArray, h: float, source: FloatArray | None = None) -> FloatArray:
        """Solves (P + h Q) x = P u + h source / 2."""
        rhs = (self.P if u.ndim == 1 else self.P[:, np.newaxis]) * u
        if source is not None:
            rhs = rhs + 0.5 * h * source
        return self._solve(rhs, h)

    def _solve(self, rhs: FloatArray, c: float) -> FloatArray:
        if self.banded:
            ab = np.zeros((3, self.ops.n))
            ab[0, 1:] = c * self.q_upper
            ab[1] = self.P + c * self.q_main
            ab[2, :-1] = c * self.q_lower
            return sla.solve_banded((1, 1), ab, rhs)
        system = (sp.diags(self.P) + c * self.Q).tocsc()
        return splu(system).solve(rhs)


def heat_step(
    ops: DiscreteOperators,
    v: FloatArray,
    t: float,
    scheme: HeatScheme,
    route: OperatorRoute = "divergence",
) -> FloatArray:
    """Approximates e^{-t L_h} v with L_h = M^-1 K or the nondivergence L.

    Raises:
        TimeStepError: t < 0, a nonpositive dt, or an exact scheme asked for
            the nondivergence route
    """
    if t < 0.0:
        raise TimeStepError(f"heat_step requires t >= 0, got {t}")
    if isinstance(scheme, CrankNicolson) and scheme.dt is not None and scheme.dt <= 0.0:
        raise TimeStepError(f"time step must be positive, got {scheme.dt}")
    if t == 0.0:
        return np.array(v, dtype=float, copy=True)
    match scheme:
        case EigenExp(basis=basis):
            if route != "divergence":
                raise TimeStepError("the exact scheme is only available for the divergence route")
            b = basis if basis is not None else ops.full_basis()
            return b.apply_function(v, lambda lam: np.exp(-t * lam))
        case CrankNicolson(dt=dt):
            step = dt if dt is not None else t / 10_000.0
            count = max(int(math.ceil(t / step - 1.0e-9)), 1)
            c = 0.5 * t / count
            stepper = _Stepper(ops, route)
            u = np.array(v, dtype=float, copy=True)
            for _ in range(count):
                u = stepper.step(u, c)
            return u
        case _:
            raise TypeError(f"unknown heat scheme {scheme!r}")


def marching_grid(times: FloatArray, growth: float, t_start: float) -> FloatArray:
    """Merges `times` with a geometric grid so consecutive points satisfy
    t_{k+1} - t_k <= (growth - 1) t_k beyond `t_start`."""
    targets = np.unique(np.asarray(times, dtype=float))
    if targets.size == 0:
        return targets
    end = float(targets[-1])
    start = min(t_start, float(targets[0]))
    steps = int(math.ceil(math.log(end / start) / math.log(growth))) if end > start else 0
    geometric = start * growth ** np.arange(steps + 1)
    return np.unique(np.concatenate([targets, geometric[geometric < end]]))


def heat_trajectory(
    ops: DiscreteOperators,
    v: FloatArray,
    times: FloatArray,
    scheme: CrankNicolson,
    route: OperatorRoute = "divergence",
    lambda_max: float | None = None,
    increments: bool = False,
) -> FloatArray:
    """Crank-Nicolson values of e^{-t L_h} v at every requested time, from
    one sweep over a geometric grid.

    The first step ends below 10^-3 / lambda_max so stiff modes are resolved
    while they carry weight. `v` may hold several right hand sides as
    columns. With `increments` the sweep marches w = e^{-t L_h} v - v,
    which solves w' = -L_h w - L_h v with w(0) = 0, so small increments keep
    their relative precision instead of cancelling against v.

    Returns:
        Array of shape (len(times),) + v.shape, in the order of `times`
    """
    if scheme.growth <= 1.0:
        raise TimeStepError(f"growth ratio must exceed 1, got {scheme.growth}")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0):
        raise TimeStepError("heat_trajectory requires nonnegative times")
    lam = lambda_max if lambda_max is not None else ops.lambda_max_bound()
    grid = marching_grid(times[times > 0.0], scheme.growth, 1.0e-3 / lam)
    stepper = _Stepper(ops, route)
    out = np.empty((times.size,) + v.shape)
    out[times == 0.0] = 0.0 if increments else v
    targets: dict[float, list[int]] = {}
    for i, tt in enumerate(times):
        if tt > 0.0:
            targets.setdefault(float(tt), []).append(i)
    source = -2.0 * (stepper.Q @ v) if increments else None
    u = np.zeros_like(v, dtype=float) if increments else np.array(v, dtype=float, copy=True)
    previous = 0.0
    for k, tt in enumerate(grid):
        half = 0.5 * (tt - previous)
        if k < scheme.startup_steps:
            u = stepper.backward_step(stepper.backward_step(u, half, source), half, source)
        else:
            u = stepper.step(u, half, source)
        previous = float(tt)
        for i in targets.get(previous, ()):
            out[i] = u
    logger.debug("heat trajectory marched", extra=dict(steps=int(grid.size), targets=int(times.size)))
    return out

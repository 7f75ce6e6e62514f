"""Gamma, modified Bessel functions of the second kind and the trace
constants of the fractional extension problem.

The Bessel kernel K_nu is evaluated in-tree for real order 0 <= nu < 2 and
positive real argument. Below x = 2 the Temme series is used, above it
Steed's continued fraction. Both produce the pair (K_mu, K_mu+1) for
|mu| <= 1/2, which is then carried to the requested order by the upward
recurrence K_{mu+1} = 2 mu / x K_mu + K_{mu-1}. Temme's form stays regular as
mu approaches zero so no separate integer-order branch is needed.
"""

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np

from dagster_fracmonge.types import FloatArray, FracMongeError

logger = logging.getLogger(__name__)

_EPS = 1.0e-16
_MAXIT = 10_000
_SWITCH = 2.0

_LANCZOS_G = 7.0
_LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Taylor coefficients of 1/Gamma(z) = sum_k c_k z^k, k >= 1
_RECIPROCAL_GAMMA_SERIES = np.array(
    [
        1.0000000000000000,
        0.5772156649015329,
        -0.6558780715202538,
        -0.0420026350340952,
        0.1665386113822915,
        -0.0421977345555443,
        -0.0096219715278770,
        0.0072189432466630,
        -0.0011651675918591,
        -0.0002152416741149,
        0.0001280502823882,
        -0.0000201348547807,
        -0.0000012504934821,
        0.0000011330272320,
        -0.0000002056338417,
        0.0000000061160950,
        0.0000000050020075,
        -0.0000000011812746,
        0.0000000001043427,
        0.0000000000077823,
        -0.0000000000036968,
        0.0000000000005100,
        -0.0000000000000206,
        -0.0000000000000054,
        0.0000000000000014,
        0.0000000000000001,
    ]
)


class PoleError(FracMongeError, ValueError):
    def __init__(self, x: float) -> None:
        super().__init__(f"gamma has a pole at x={x}")
        self.x = x


class DomainError(FracMongeError, ValueError):
    pass


def _lanczos_gamma(x: float) -> float:
    x -= 1.0
    acc = _LANCZOS_COEFFICIENTS[0]
    for i in range(1, len(_LANCZOS_COEFFICIENTS)):
        acc += _LANCZOS_COEFFICIENTS[i] / (x + i)
    tt = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * math.exp((x + 0.5) * math.log(tt) - tt) * acc


def gamma(x: float) -> float:
    """Gamma function by the Lanczos approximation (g=7, 9 terms), with
    the reflection formula for x < 1/2.

    Raises:
        PoleError: x is a nonpositive integer
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(x)
    if x < 0.5:
        # sin(pi x) with exact argument reduction to keep accuracy near poles
        nearest = round(x)
        sign = -1.0 if nearest % 2 else 1.0
        sin_pi_x = sign * math.sin(math.pi * (x - nearest))
        return math.pi / (sin_pi_x * _lanczos_gamma(1.0 - x))
    return _lanczos_gamma(x)


def _temme_coefficients(xmu: float) -> tuple[float, float, float, float]:
    """Returns (gam1, gam2, 1/Gamma(1+xmu), 1/Gamma(1-xmu)) for |xmu| <= 1/2."""
    series = _RECIPROCAL_GAMMA_SERIES
    poly = np.polynomial.polynomial.polyval
    gampl = float(poly(xmu, series))
    gammi = float(poly(-xmu, series))
    gam1 = -float(poly(xmu * xmu, series[1::2]))
    gam2 = float(poly(xmu * xmu, series[0::2]))
    return gam1, gam2, gampl, gammi


def _temme(xmu: float, x: FloatArray) -> tuple[FloatArray, FloatArray]:
    xmu2 = xmu * xmu
    x2 = 0.5 * x
    pimu = math.pi * xmu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = xmu * d
    small_e = np.abs(e) < _EPS
    safe_e = np.where(small_e, 1.0, e)
    fact2 = np.where(small_e, 1.0, np.sinh(safe_e) / safe_e)
    gam1, gam2, gampl, gammi = _temme_coefficients(xmu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    sum1 = p.copy()
    for i in range(1, _MAXIT + 1):
        ff = (i * ff + p + q) / (i * i - xmu2)
        c = c * dd / i
        p = p / (i - xmu)
        q = q / (i + xmu)
        term = c * ff
        total = total + term
        sum1 = sum1 + c * (p - i * ff)
        if np.all(np.abs(term) < np.abs(total) * _EPS):
            break
    else:
        raise FracMongeError("Temme series for K_nu failed to converge")
    return total, sum1 * 2.0 / x


def _steed(xmu: float, x: FloatArray) -> tuple[FloatArray, FloatArray]:
    xmu2 = xmu * xmu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - xmu2
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT + 1):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < _EPS):
            break
    else:
        raise FracMongeError("continued fraction for K_nu failed to converge")
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = kmu * (xmu + x + 0.5 - h) / x
    return kmu, k1


@t.overload
def bessel_k(nu: float, r: float) -> float: ...
@t.overload
def bessel_k(nu: float, r: FloatArray) -> FloatArray: ...
def bessel_k(nu: float, r: float | FloatArray) -> float | FloatArray:
    """Modified Bessel function of the second kind K_nu(r).

    Args:
        nu: Order, |nu| < 2. Negative orders use K_{-nu} = K_nu.
        r: Argument(s), strictly positive

    Returns:
        K_nu(r) with the shape of `r`

    Raises:
        DomainError: r <= 0 or |nu| >= 2
    """
    nu = abs(float(nu))
    if nu >= 2.0:
        raise DomainError(f"bessel_k order must satisfy |nu| < 2, got {nu}")
    x = np.atleast_1d(np.asarray(r, dtype=float))
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise DomainError("bessel_k requires finite r > 0")

    nl = int(nu + 0.5)
    xmu = nu - nl
    kmu = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x < _SWITCH
    if np.any(small):
        kmu[small], k1[small] = _temme(xmu, x[small])
    if np.any(~small):
        kmu[~small], k1[~small] = _steed(xmu, x[~small])
    for i in range(1, nl + 1):
        ktemp = (xmu + i) * (2.0 / x) * k1 + kmu
        kmu = k1
        k1 = ktemp

    if np.ndim(r) == 0:
        return float(kmu[0])
    return kmu.reshape(np.shape(r))


@dataclass(frozen=True, kw_only=True)
class FracParams:
    s: float
    a: float
    d_s: float
    c_s: float

    @property
    def identity_residual(self) -> float:
        """Relative residual of c_s = d_s / (2s)^(2s-1)."""
        other = self.d_s / (2.0 * self.s) ** (2.0 * self.s - 1.0)
        return abs(self.c_s - other) / abs(self.c_s)

    @property
    def energy_ratio(self) -> float:
        """(2s)^(2s-1), the ratio between z-form and y-form energies."""
        return (2.0 * self.s) ** (2.0 * self.s - 1.0)

    @property
    def profile_scale(self) -> float:
        return 2.0 ** (1.0 - self.s) / gamma(self.s)


def frac_params(s: float) -> FracParams:
    """Computes a = 1-2s, d_s = s^(2s) Gamma(1-s)/Gamma(1+s) and
    c_s = Gamma(1-s)/(4^(s-1/2) Gamma(s)).

    Raises:
        DomainError: s outside (0,1)
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0,1), got {s}")
    g_one_minus = gamma(1.0 - s)
    d_s = s ** (2.0 * s) * g_one_minus / gamma(1.0 + s)
    c_s = g_one_minus / (4.0 ** (s - 0.5) * gamma(s))
    params = FracParams(s=s, a=1.0 - 2.0 * s, d_s=d_s, c_s=c_s)
    if params.identity_residual > 1.0e-12:
        raise FracMongeError(
            f"trace constants inconsistent at s={s}: residual {params.identity_residual:.3e}"
        )
    return params


def profile(s: float, t_values: FloatArray | float) -> FloatArray:
    """psi_s(t) = (2^(1-s)/Gamma(s)) t^s K_s(t), continued by psi_s(0) = 1.

    psi_s is the bounded, decaying solution of the extension ODE in the
    scaled variable and every extension mode is a dilation of it.
    """
    params = frac_params(s)
    tv = np.asarray(t_values, dtype=float)
    out = np.ones_like(tv)
    positive = tv > 0.0
    if np.any(positive):
        tp = tv[positive]
        out[positive] = params.profile_scale * tp**s * bessel_k(s, tp)
    return out


def profile_derivative(s: float, t_values: FloatArray | float) -> FloatArray:
    """psi_s'(t) = -(2^(1-s)/Gamma(s)) t^s K_{1-s}(t).

    At t = 0 the limit -c_s t^(2s-1) is returned: 0 for s > 1/2, -1 for
    s = 1/2 and -inf for s < 1/2.
    """
    params = frac_params(s)
    tv = np.asarray(t_values, dtype=float)
    out = np.empty_like(tv)
    positive = tv > 0.0
    if np.any(positive):
        tp = tv[positive]
        out[positive] = -params.profile_scale * tp**s * bessel_k(1.0 - s, tp)
    if np.any(~positive):
        if s > 0.5:
            limit = 0.0
        elif s == 0.5:
            limit = -params.c_s
        else:
            limit = -math.inf
        out[~positive] = limit
    return out

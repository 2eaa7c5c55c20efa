"""Closed-form reference solutions and the special functions behind them.

These are the oracles for the verification cases: the travelling planar
front, the similarity melting layer, self-similar disk growth in an
undercooled melt (via the exponential integral E1), and the shrinking
circle under curvature flow. erf is implemented locally so golden values
never depend on the environment's libm.
"""

import math

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoRoot

EULER_GAMMA = 0.57721566490153286060651209008240243

_SQRT_PI = math.sqrt(math.pi)


def erf(x):
    """Error function, |error| <= 1e-12, vectorised."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    for k, v in enumerate(x.ravel()):
        out.ravel()[k] = _erf_scalar(float(v))
    out = out.reshape(x.shape)
    return float(out[0]) if scalar else out


def _erf_scalar(x):
    if x < 0.0:
        return -_erf_scalar(-x)
    if x == 0.0:
        return 0.0
    if x > 5.9:
        # erfc(5.9) ~ 7e-17, below double resolution of 1 - erfc
        return 1.0
    # non-alternating confluent series: erf(x) = 2x e^{-x^2}/sqrt(pi)
    #                                           * sum (2x^2)^k / (2k+1)!!
    t = 2.0 * x * x
    term = 1.0
    s = 1.0
    k = 0
    while True:
        k += 1
        term *= t / (2.0 * k + 1.0)
        s += term
        if term < 1e-17 * s or k > 400:
            break
    return 2.0 * x * math.exp(-x * x) / _SQRT_PI * s


def exp_integral_e1(x):
    """E1(x) = integral_x^inf e^-t / t dt for x > 0, rel. error <= 1e-10."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr <= 0.0):
        raise DomainError("exp_integral_e1 requires x > 0")
    out = np.array([_e1_scalar(float(v)) for v in arr.ravel()])
    out = out.reshape(arr.shape)
    return float(out[0]) if scalar else out


def _e1_scalar(x):
    if x <= 1.0:
        # power series around 0
        s = -EULER_GAMMA - math.log(x)
        term = 1.0
        for k in range(1, 60):
            term *= -x / k
            add = -term / k
            s += add
            if abs(add) < 1e-18 * max(abs(s), 1e-30):
                break
        return s
    # modified Lentz on E1(x) = e^-x / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, 400):
        a = -k * k
        b += 2.0
        d = b + a * d
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x) * h


def similarity_f2(s):
    """Similarity profile F2(s) = E1(s^2 / 4) for disk growth."""
    return exp_integral_e1(np.asarray(s, dtype=np.float64) ** 2 / 4.0)


def similarity_f2_prime(s):
    """dF2/ds = -(2/s) e^{-s^2/4}, by the chain rule on the defining integral."""
    s = np.asarray(s, dtype=np.float64)
    return -2.0 / s * np.exp(-(s * s) / 4.0)


def frank_far_temperature(s_growth):
    """Far-field undercooling consistent with growth coefficient S:
    T_inf = S F2(S) / (2 F2'(S)) = -(S^2/4) E1(S^2/4) e^{S^2/4}."""
    s_growth = np.asarray(s_growth, dtype=np.float64)
    q = s_growth * s_growth / 4.0
    return -q * exp_integral_e1(q) * np.exp(q)


def frank_parameters(t_inf):
    """Growth coefficient S for far-field temperature t_inf in (-1, 0)."""
    if not (-1.0 < t_inf < 0.0):
        raise NoRoot(f"far-field temperature {t_inf} outside (-1, 0)")
    f = lambda s: frank_far_temperature(s) - t_inf
    lo, hi = 1e-4, 40.0
    if f(lo) * f(hi) > 0:
        raise NoRoot("no sign change in the growth-coefficient bracket")
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16)


class PlanarStefan:
    """Planar front at x0 + V t; liquid (x beyond the front) at
    -1 + exp(-V (x - x0 - V t)), solid at 0."""

    def __init__(self, velocity=1.0, x0=0.0):
        self.velocity = velocity
        self.x0 = x0

    def interface_position(self, t):
        return self.x0 + self.velocity * t

    def temperature(self, x, y, t):
        x = np.asarray(x, dtype=np.float64)
        xf = self.interface_position(t)
        liquid = -1.0 + np.exp(-self.velocity * (x - xf))
        return np.where(x > xf, liquid, 0.0)

    def liquid_temperature(self, x, y, t):
        x = np.asarray(x, dtype=np.float64)
        return -1.0 + np.exp(-self.velocity * (x - self.interface_position(t)))

    def solid_temperature(self, x, y, t):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


class CrankLayer:
    """Melting layer: interface at y(t) = 1 - 2 lam sqrt(t), warm liquid above."""

    def __init__(self, lam=0.9):
        self.lam = lam
        self._erf_lam = erf(lam)

    def interface_position(self, t):
        return 1.0 - 2.0 * self.lam * math.sqrt(t)

    def temperature(self, x, y, t):
        y = np.asarray(y, dtype=np.float64)
        yf = self.interface_position(t)
        return np.where(y > yf, self.liquid_temperature(x, y, t), 0.0)

    def liquid_temperature(self, x, y, t):
        y = np.asarray(y, dtype=np.float64)
        return 1.0 - erf((1.0 - y) / (2.0 * math.sqrt(t))) / self._erf_lam

    def solid_temperature(self, x, y, t):
        return np.zeros_like(np.asarray(y, dtype=np.float64))


class FrankSphere:
    """Self-similar disk R(t) = S sqrt(t) growing into undercooled melt."""

    def __init__(self, t_inf=-0.5, center=(0.0, 0.0), s_growth=None):
        self.t_inf = t_inf
        self.center = center
        self.s_growth = frank_parameters(t_inf) if s_growth is None else s_growth
        self._f2_s = float(similarity_f2(self.s_growth))

    def interface_position(self, t):
        return self.s_growth * math.sqrt(t)

    def _radius(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return np.hypot(x - self.center[0], y - self.center[1])

    def temperature(self, x, y, t):
        r = self._radius(x, y)
        s = r / math.sqrt(t)
        out = np.zeros_like(s)
        mask = s > self.s_growth
        if np.any(mask):
            out[mask] = self.t_inf * (1.0 - similarity_f2(s[mask]) / self._f2_s)
        return out

    def liquid_temperature(self, x, y, t):
        r = self._radius(x, y)
        s = np.maximum(r / math.sqrt(t), 1e-12)
        return self.t_inf * (1.0 - similarity_f2(s) / self._f2_s)

    def solid_temperature(self, x, y, t):
        return np.zeros_like(self._radius(x, y))


class CurvatureFlowCircle:
    """Circle shrinking under v = -kappa: R(t) = sqrt(R0^2 - 2 t)."""

    def __init__(self, r0, center=(0.0, 0.0)):
        self.r0 = r0
        self.center = center

    def interface_position(self, t):
        val = self.r0 * self.r0 - 2.0 * t
        if val <= 0.0:
            raise DomainError("circle has collapsed before this time")
        return math.sqrt(val)

    def temperature(self, x, y, t):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


def reference_temperature(solution, x, y, t):
    """Exact field value of a reference solution at (x, y, t)."""
    return solution.temperature(x, y, t)

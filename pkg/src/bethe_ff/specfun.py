"""Scalar special functions and closed-form Fermi-weight integrals.

log-Gamma is evaluated with the Stirling series after an upward shift of the
argument; log-Barnes-G uses an integral representation on the unit strip plus
the recurrence G(1+z) = Gamma(z) G(z).  The closed-form integrals are exact
oracles for the quadrature code elsewhere in the package.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import (
    ArgumentOnRealAxis,
    ContourHitsPole,
    PoleAtNonPositiveInteger,
    PoleCrossing,
)

LN_2PI = math.log(2.0 * math.pi)
TWO_I_PI = 2j * math.pi

# B_{2k} / (2k (2k-1)) for k = 1..12
_STIRLING = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
    77683.0 / 5796.0,
    -236364091.0 / 1506960.0,
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _check_nonpositive_integer(z: complex) -> None:
    if abs(z.imag) < 1e-14 and z.real <= 0.5 and abs(z.real - round(z.real)) < 1e-14:
        raise PoleAtNonPositiveInteger(f"argument {z} is a non-positive integer")


def log_gamma(z: complex) -> complex:
    """ln Gamma(z) on the branch continuous off the negative real axis.

    Matches the convention of ``scipy.special.loggamma``.
    """
    z = complex(z)
    _check_nonpositive_integer(z)
    shift = 0
    acc = 0j
    w = z
    while w.real < 15.0:
        acc += cmath.log(w)
        w += 1.0
        shift += 1
    inv = 1.0 / w
    inv2 = inv * inv
    series = 0j
    power = inv
    for c in _STIRLING:
        series += c * power
        power *= inv2
    return (w - 0.5) * cmath.log(w) - w + 0.5 * LN_2PI + series - acc


def _log_g_one_plus(w: complex) -> complex:
    """ln G(1+w) for Re w in (-1/2, 1/2], by a straight-segment quadrature."""
    if w == 0:
        return 0j
    x = 0.5 * w * (_GL_NODES + 1.0)
    integral = 0.5 * w * sum(wt * log_gamma(1.0 + xi) for xi, wt in zip(x, _GL_WEIGHTS))
    return 0.5 * w * (1.0 - w) + 0.5 * w * LN_2PI + w * log_gamma(1.0 + w) - w - integral


def log_barnes_g(z: complex) -> complex:
    """ln G(z), with G(1) = G(2) = 1 and G(1+z) = Gamma(z) G(z)."""
    z = complex(z)
    _check_nonpositive_integer(z)
    n = math.floor(z.real - 0.5)  # z - n has real part in [0.5, 1.5)
    w = z - n
    val = _log_g_one_plus(w - 1.0)
    if n > 0:
        for k in range(n):
            val += log_gamma(w + k)
    else:
        for k in range(-n):
            val -= log_gamma(w - 1.0 - k)
    return val


def barnes_g(z: complex) -> complex:
    return cmath.exp(log_barnes_g(z))


def barnes_ratio(z: complex) -> complex:
    """(2 pi)^z G(1-z) / G(1+z) = exp of the integral of pi x cot(pi x) over [0, z]."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    if abs(z.real) >= 1.0:
        if abs(z.imag) < 1e-14:
            raise ContourHitsPole(f"segment [0, {z}] meets a nonzero integer")
        raise ContourHitsPole(f"|Re z| >= 1 for z = {z}")
    if abs(z) < 1e-6:
        # pi x cot(pi x) = 1 - pi^2 x^2 / 3 + O(x^4)
        return cmath.exp(z - math.pi**2 * z**3 / 9.0)
    # poles at +-1 are subtracted and integrated in closed form
    x = 0.5 * z * (_GL_NODES + 1.0)
    pix = np.pi * x
    smooth = pix * np.cos(pix) / np.sin(pix) - 1.0 / (x - 1.0) + 1.0 / (x + 1.0)
    integral = 0.5 * z * np.dot(_GL_WEIGHTS, smooth)
    integral += cmath.log(1.0 - z) - cmath.log(1.0 + z)
    return cmath.exp(integral)


def integral_pole_to_gamma(a: complex, alpha: complex, half_plane: int) -> complex:
    """Closed form of int_R ln(1 + e^{-|t| + alpha sgn t}) / (t - a) dt / (2 i pi).

    ``half_plane`` is +1 for Im a > 0 and -1 for Im a < 0.
    """
    a = complex(a)
    alpha = complex(alpha)
    if a.imag == 0:
        raise ArgumentOnRealAxis("a must lie off the real axis")
    s = 1 if half_plane > 0 else -1
    if s * a.imag < 0:
        raise ArgumentOnRealAxis(f"a = {a} is not in the half-plane {half_plane:+d}")
    u = (a - alpha) / TWO_I_PI
    return (
        -s * log_gamma(0.5 + s * u)
        + s * 0.5 * LN_2PI
        + u * cmath.log(a / (s * TWO_I_PI))
        - a / TWO_I_PI
    )


def fermi_pair_weight(t, a: complex, b: complex):
    """1/(1+e^{t-a}) - 1/(1+e^{t-a-b}), written to avoid overflow."""
    t = np.asarray(t, dtype=complex)

    def fermi(x):
        out = np.empty_like(x)
        pos = x.real > 0
        ex = np.exp(-x[pos])
        out[pos] = ex / (1.0 + ex)
        out[~pos] = 1.0 / (1.0 + np.exp(x[~pos]))
        return out

    return fermi(t - a) - fermi(t - a - b)


def integral_gamma_pair(a: complex, b: complex, kind: str) -> complex:
    """Closed forms of the Fermi-difference integrals against dt/(2 i pi).

    kind = "gamma": weight times ln[Gamma(1/2+(t-a)/2i pi)/Gamma(1/2+(t-a-b)/2i pi)]
    kind = "linear": weight alone
    kind = "log": weight times ln[-i(t + i0)]
    """
    a = complex(a)
    b = complex(b)
    if abs(a.imag) >= math.pi or abs((a + b).imag) >= math.pi:
        raise PoleCrossing("a Fermi-weight pole crosses the real axis")
    if kind == "linear":
        return -b / TWO_I_PI
    if kind == "gamma":
        u = b / TWO_I_PI
        return -log_barnes_g(1.0 - u) - log_barnes_g(1.0 + u)
    if kind == "log":
        return (
            log_gamma(0.5 + a / TWO_I_PI)
            - log_gamma(0.5 + (a + b) / TWO_I_PI)
            - b / TWO_I_PI * LN_2PI
        )
    raise ValueError(f"unknown kind {kind!r}")

"""Bare kernels, string products, bare phases and the lattice integers m_r.

The bare phase is the antiderivative of 2 pi K(.|eta) along the path
0 -> i Im(lam) -> lam, with poles on the imaginary axis passed on their left.
Writing the integrand as a combination of coth(mu - i b) terms, each term
integrates to a continuous log sinh along the path.  Its imaginary part is
tracked exactly: on the vertical leg sinh(it - ib) = i sin(t - b) only jumps
by -pi (upward) or +pi (downward) at a passed zero, and on the horizontal leg
Im sinh(s + i phi) has the fixed sign of sin(phi), so the principal Arg is
continuous there.  A point exactly on a pole level is read as lam + i0.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContourThroughPole, FloorBoundary, PoleHit

POLE_TOL = 1e-10
_LEVEL_TOL = 1e-10


# ---------------------------------------------------------------- kernels

def _guard(den, what: str) -> None:
    if np.any(np.abs(den) < POLE_TOL):
        raise PoleHit(f"{what}: evaluation within {POLE_TOL} of a pole")


def _far_tail(lam: np.ndarray):
    """Mask of |Re lam| > 300, where the kernels are below e^-600; those entries are computed at 0 and zeroed."""
    far = np.abs(lam.real) > 300.0
    return far, np.where(far, 0.0, lam)


def _zero_far(out, far):
    out = np.where(far, 0.0, out)
    return out if out.ndim else complex(out)


def kernel_k(lam, eta: float):
    """sin(2 eta) / (2 pi sinh(lam + i eta) sinh(lam - i eta))."""
    far, lam = _far_tail(np.asarray(lam, dtype=complex))
    a = np.sinh(lam + 1j * eta)
    b = np.sinh(lam - 1j * eta)
    _guard(a, "kernel_k")
    _guard(b, "kernel_k")
    out = math.sin(2.0 * eta) / (2.0 * math.pi * a * b)
    return _zero_far(out, far)


def kernel_k_coth(lam, eta: float):
    """Same kernel from the coth difference; used as an independent arrangement."""
    far, lam = _far_tail(np.asarray(lam, dtype=complex))
    a = np.sinh(lam - 1j * eta)
    b = np.sinh(lam + 1j * eta)
    _guard(a, "kernel_k")
    _guard(b, "kernel_k")
    out = (np.cosh(lam - 1j * eta) / a - np.cosh(lam + 1j * eta) / b) / (2j * math.pi)
    return _zero_far(out, far)


def kernel_k_prime(lam, eta: float):
    """d/dlam K(lam|eta) = (1/2 i pi) [-csch^2(lam - i eta) + csch^2(lam + i eta)]."""
    far, lam = _far_tail(np.asarray(lam, dtype=complex))
    a = np.sinh(lam - 1j * eta)
    b = np.sinh(lam + 1j * eta)
    _guard(a, "kernel_k_prime")
    _guard(b, "kernel_k_prime")
    out = (-1.0 / a**2 + 1.0 / b**2) / (2j * math.pi)
    return _zero_far(out, far)


def _multiplicity(r: int, s: int, j: int) -> int:
    """Number of pairs (l, k) in [1..r]x[1..s] with l - k = j."""
    return max(0, min(r, s + j) - max(0, j))


def krs_shifts(r: int, s: int):
    """Pairs (multiplicity, imaginary shift) with K_{r,s}(w) = sum m K(w + i shift)."""
    out = []
    for j in range(-(s - 1), r):
        m = _multiplicity(r, s, j)
        if m:
            out.append((m, 0.5 * (r - s - 2 * j)))
    return out


def krs_reduced_terms(r: int, s: int):
    """Pairs (coefficient c, eta / zeta) with K_{r,s}(w) = sum c K(w | eta).

    Obtained by telescoping the coth form of the shifted sum; c_k is
    w_{k-1} - w_{k+1} with w the clipped multiplicity above.
    """
    terms = []
    for k in range(-s, r + 1):
        if 2 * k <= r - s:
            continue
        c = _multiplicity(r, s, k - 1) - _multiplicity(r, s, k + 1)
        if c:
            terms.append((c, 0.5 * (2 * k - r + s)))
    return terms


def kernel_krs(omega, r: int, s: int, zeta: float, method: str = "reduced"):
    """K_{r,s}(omega), either as the shifted double sum or the reduced form."""
    omega = np.asarray(omega, dtype=complex)
    total = np.zeros_like(omega)
    if method == "sum":
        for m, a in krs_shifts(r, s):
            total = total + m * kernel_k(omega + 1j * zeta * a, zeta)
    elif method == "reduced":
        for c, e in krs_reduced_terms(r, s):
            total = total + c * kernel_k(omega, zeta * e)
    else:
        raise ValueError(method)
    return total if total.ndim else complex(total)


def phi_rp(lam, r: int, p: int, zeta: float, method: str = "reduced"):
    """Double product Phi_{r,p}(lam) over string roots."""
    lam = np.asarray(lam, dtype=complex)
    if method == "product":
        num = np.ones_like(lam)
        den = np.ones_like(lam)
        for k in range(1, p + 1):
            for s in range(1, r + 1):
                num = num * np.sinh(lam + 0.5j * zeta * (p - r - 2 * (k - s)))
                den = den * np.sinh(lam + 0.5j * zeta * (p - r - 2 * (k - s + 1)))
        _guard(den, "phi_rp")
        out = num / den
    elif method == "reduced":
        out = np.ones_like(lam)
        start = math.floor((r - p + 1) / 2)
        for ell in range(start, r):
            e = _multiplicity(r, p, ell) - _multiplicity(r, p, ell + 1)
            if e == 0:
                continue
            a = np.sinh(lam + 1j * zeta * (0.5 * (p - r) + ell))
            b = np.sinh(lam - 1j * zeta * (0.5 * (p - r) + ell + 1))
            if e > 0:
                _guard(b, "phi_rp")
            else:
                _guard(a, "phi_rp")
            out = out * (a / b) ** e
    else:
        raise ValueError(method)
    return out if out.ndim else complex(out)


# ------------------------------------------------------------- bare phases

def _dlog_sinh_path(b, lam):
    """Continuous change of log sinh(mu - i b) along 0 -> i Im lam -> lam.

    Zeros on the imaginary axis are passed on the left; on a zero level the
    endpoint is read as lam + i0.
    """
    b = np.asarray(b, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    b, lam = np.broadcast_arrays(b, lam)
    x = lam.real
    y = lam.imag
    pi = math.pi

    s0 = np.sin(-b)
    if np.any(np.abs(s0) < _LEVEL_TOL):
        raise ContourThroughPole("path starts on a pole")
    arg0 = 0.5 * pi * np.sign(s0)

    phi = y - b
    v = phi / pi
    vr = np.round(v)
    on_level = np.abs(np.sin(phi)) < _LEVEL_TOL
    v = np.where(on_level, vr, v)
    start = -b / pi
    up = np.where(y > 0, np.floor(v) - np.floor(start), 0.0)
    down = np.where(y < 0, np.ceil(start) - np.floor(v) - 1.0, 0.0)
    arg_v = arg0 - pi * up + pi * down

    sgn_corner = np.where(on_level, np.sign(np.cos(phi)), np.sign(np.sin(phi)))
    offset = arg_v - 0.5 * pi * sgn_corner

    if np.any(on_level & (x == 0.0)):
        raise ContourThroughPole("endpoint is a pole")
    end = np.sinh(x + 1j * phi)
    sx = np.sinh(x)
    end_level_re = sx * np.cos(np.where(on_level, vr * pi, 0.0))
    end_level_im = np.copysign(0.0, sgn_corner)
    arg_end = np.where(
        on_level,
        np.arctan2(end_level_im, end_level_re),
        np.angle(end),
    )
    with np.errstate(divide="ignore"):
        mod_end = np.where(on_level, np.log(np.abs(sx)), np.log(np.abs(end)))
    return (mod_end - np.log(np.abs(s0))) + 1j * (arg_end + offset - arg0)


def _phase_from_shift(lam, shift: float, eta: float):
    """2 pi * integral over the path of K(mu + i shift | eta)."""
    # 2 pi K(mu + i a|eta) = -i coth(mu - i(eta - a)) + i coth(mu + i(eta + a))
    return -1j * _dlog_sinh_path(eta - shift, lam) + 1j * _dlog_sinh_path(-eta - shift, lam)


def bare_phase(lam, eta: float):
    """theta(lam|eta): antiderivative of 2 pi K(.|eta) along the left-avoiding path."""
    lam = np.asarray(lam, dtype=complex)
    if math.sin(eta) == 0.0:
        out = np.zeros_like(lam)
    else:
        out = _phase_from_shift(lam, 0.0, eta)
    return out if out.ndim else complex(out)


def bare_phase_real(lam, eta: float):
    """theta on the real line: 2 arctan(cot(eta) tanh(lam)), for 0 < eta < pi."""
    return 2.0 * np.arctan(np.tanh(np.asarray(lam, dtype=float)) / math.tan(eta))


def bare_phase_rp(lam, r: int, p: int, zeta: float):
    """theta_{r,p}(lam) = 2 pi * integral of K_{r,p} along the same path.

    Uses the reduced eta-sum: the shifted terms carry poles at the origin
    that cancel pairwise and would otherwise sit on the path start.
    """
    lam = np.asarray(lam, dtype=complex)
    out = np.zeros_like(lam)
    for c, e in krs_reduced_terms(r, p):
        if abs(math.sin(zeta * e)) > 1e-14:
            out = out + c * _phase_from_shift(lam, 0.0, zeta * e)
    return out if out.ndim else complex(out)


# --------------------------------------------------------------- integers

def _floor_checked(v: float) -> int:
    if abs(v - round(v)) < 1e-9 and abs(v) > 1e-300:
        raise FloorBoundary(f"value {v} sits at a floor discontinuity")
    return math.floor(v)


def m_r(zeta: float, r: int) -> int:
    """m_r(zeta) = 2 - r - delta_{r1} + 2 floor(zeta(r-1)/2pi) + 2 floor(zeta(r+1)/2pi)."""
    a = 0 if r == 1 else _floor_checked(zeta * (r - 1) / (2 * math.pi))
    b = _floor_checked(zeta * (r + 1) / (2 * math.pi))
    return 2 - r - (1 if r == 1 else 0) + 2 * a + 2 * b


def m_tilde(zeta: float, r: int, on_shifted_line: bool) -> int:
    """m_r corrected by the sign sum when omega lies on R + i pi/2."""
    base = m_r(zeta, r)
    if not on_shifted_line:
        return base
    tot = 0
    for eps in (1, -1):
        k = r + eps
        v = 1 + 2 * math.floor(k * zeta / (2 * math.pi)) - k * zeta / math.pi
        if k == 0:
            v = 1.0
        tot += int(np.sign(v))
    return base - 2 * (tot - (1 if r == 1 else 0))


def string_offsets(r: int) -> np.ndarray:
    """Imaginary offsets (r + 1 - 2k)/2, k = 1..r, in units of zeta."""
    return 0.5 * (r + 1 - 2 * np.arange(1, r + 1))

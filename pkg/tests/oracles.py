"""Independent reference implementations used only by the tests.

Everything here is written from the defining formulas with plain numpy/scipy,
sharing no code with the package.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize


def lieb_kernel(x, eta):
    x = np.asarray(x, dtype=complex)
    return math.sin(2 * eta) / (2 * math.pi * np.sinh(x + 1j * eta) * np.sinh(x - 1j * eta))


def bare_p_prime(x, zeta):
    return 2 * math.pi * lieb_kernel(x, zeta / 2)


def bare_e(x, zeta, J, h):
    return h - 4 * math.pi * J * math.sin(zeta) * lieb_kernel(x, zeta / 2)


class Nystrom:
    """(id + K) f = f0 on [-q, q] with Gauss-Legendre nodes."""

    def __init__(self, zeta, q, n=200):
        t, w = np.polynomial.legendre.leggauss(n)
        self.x = q * t
        self.w = q * w
        self.zeta = zeta
        self.q = q
        self.A = np.eye(n) + (lieb_kernel(self.x[:, None] - self.x[None, :], zeta) * self.w[None, :]).real

    def solve(self, f0):
        vals = np.linalg.solve(self.A, np.real(f0(self.x)))
        return vals

    def extend(self, f0, vals, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        k = lieb_kernel(lam[:, None] - self.x[None, :], self.zeta).real
        return np.real(f0(lam)) - k @ (self.w * vals)

    def det(self):
        return float(np.linalg.det(self.A))


def dressed_energy_at(zeta, J, h, Q, lam, n=200):
    ny = Nystrom(zeta, Q, n)
    f0 = lambda x: bare_e(x, zeta, J, h)
    return ny.extend(f0, ny.solve(f0), lam)


def fermi_boundary(zeta, J, h, n=200):
    return optimize.brentq(lambda Q: dressed_energy_at(zeta, J, h, Q, [Q], n)[0], 1e-3, 50, xtol=1e-14)


def reference_quantities(zeta, J, h, n=200):
    """q, Z(q), p(q), v_F, det[id + K] from scratch."""
    q = fermi_boundary(zeta, J, h, n)
    ny = Nystrom(zeta, q, n)
    one = lambda x: np.ones_like(x, dtype=float)
    Z = ny.extend(one, ny.solve(one), [q])[0]
    pp0 = lambda x: bare_p_prime(x, zeta).real
    pp = ny.solve(pp0)
    # p(q) = int_0^q p'(l) dl by quadrature of the extended dressed p'
    pq = integrate.quad(lambda l: ny.extend(pp0, pp, [l])[0], 0, q, epsabs=1e-14, epsrel=1e-13)[0]
    ep0 = lambda x: bare_e(x, zeta, J, h).real
    ev = ny.solve(ep0)
    d = 1e-5
    eprime = (ny.extend(ep0, ev, [q + d])[0] - ny.extend(ep0, ev, [q - d])[0]) / (2 * d)
    vF = eprime / ny.extend(pp0, pp, [q])[0]
    return {"q": q, "Z_q": Z, "p_q": pq, "v_F": vF, "det": ny.det()}

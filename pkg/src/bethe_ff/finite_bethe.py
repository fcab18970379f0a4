"""Finite-volume Bethe states, norm matrices and determinant form factors.

Only real-root states are constructed.  Roots solve the (twisted)
logarithmic Bethe equations xi(mu_a) = l_a / L by damped Newton iteration.
The form factors follow the finite determinant representation, with the
Fredholm determinant replaced by a |Lambda| x |Lambda| matrix and, when the
two root sets meet, an average over the deformation parameter b.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels as kn
from . import lieb
from .errors import CoincidentRootSingularity, NewtonDiverged, RootsCollided, SingularXi

log = logging.getLogger(__name__)

TWO_I_PI = 2j * math.pi
NEWTON_TOL = 1e-13


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class BetheState:
    L: int
    N: int
    quantum_numbers: tuple
    roots: np.ndarray
    twist: float
    residual: float
    zeta: float

    def counting(self, omega):
        return counting_function(self, omega)

    def counting_prime(self, omega):
        return counting_prime(self, omega)

    @property
    def momentum(self) -> float:
        return float(np.sum(kn.bare_phase_real(self.roots, 0.5 * self.zeta)))

    def energy(self, J: float, h: float) -> float:
        e = lieb.bare_energy(self.roots.astype(complex), self.zeta, J, h).real
        return (J * math.cos(self.zeta) - 0.5 * h) * self.L + float(np.sum(e))


def _phase(x, eta):
    x = np.asarray(x)
    if np.isrealobj(x):
        return kn.bare_phase_real(x, eta)
    return kn.bare_phase(x.astype(complex), eta)


def _counting_raw(roots, L, N, twist, zeta, omega):
    omega = np.asarray(omega)
    th = _phase(omega[..., None] - roots, zeta)
    return (_phase(omega, 0.5 * zeta) / (2 * math.pi) - th.sum(axis=-1) / (2 * math.pi * L)
            + (N + 1 - 2 * twist) / (2.0 * L))


def _counting_prime_raw(roots, L, zeta, omega):
    omega = np.asarray(omega, dtype=complex)
    k = kn.kernel_k(omega[..., None] - roots, zeta)
    out = kn.kernel_k(omega, 0.5 * zeta) - np.sum(k, axis=-1) / L
    return out


def counting_function(state: BetheState, omega):
    """xi(omega) = vartheta(omega|zeta/2)/2pi - sum theta(omega - mu|zeta)/(2 pi L) + (N+1-2 alpha)/2L."""
    out = _counting_raw(state.roots, state.L, state.N, state.twist, state.zeta, omega)
    return out if np.ndim(out) else out.item()


def counting_prime(state: BetheState, omega):
    out = _counting_prime_raw(state.roots, state.L, state.zeta, omega)
    if np.isrealobj(np.asarray(omega)):
        out = out.real
    return out if np.ndim(out) else out.item()


@lru_cache(maxsize=32)
def _momentum_inverse_data(zeta: float, density: float):
    """Dressed momentum for the Fermi zone carrying the given density."""
    J = 1.0
    h_dummy = 0.5 * lieb.critical_field(zeta, J)

    def p_of(q):
        params = lieb.ModelParams(zeta, J, h_dummy, q, n_quad=64)
        p, _ = lieb.dressed_momentum(params)
        return p

    def gap(q):
        return p_of(q)(q) / math.pi - density

    hi = 1.0
    while gap(hi) < 0 and hi < 40:
        hi *= 2
    q = brentq(gap, 1e-6, hi, xtol=1e-10) if gap(hi) > 0 else hi
    return p_of(q)


def _initial_guess(L: int, N: int, qn: Sequence[int], twist: float, zeta: float) -> np.ndarray:
    p = _momentum_inverse_data(round(zeta, 14), min(N / L, 0.499))
    lo, hi = -40.0, 40.0
    plo, phi = p(lo), p(hi)
    out = []
    for ell in qn:
        target = 2 * math.pi * (ell - 0.5 * (N + 1) + twist) / L
        target = min(max(target, plo + 1e-9), phi - 1e-9)
        out.append(brentq(lambda x: p(x) - target, lo, hi, xtol=1e-13))
    return np.array(out)


def _bethe_residual(roots, L, N, qn, twist, zeta):
    return _counting_raw(roots, L, N, twist, zeta, roots) - np.asarray(qn) / L


def _bethe_jacobian(roots, L, zeta):
    xp = _counting_prime_raw(roots, L, zeta, roots).real
    k = kn.kernel_k(roots[:, None] - roots[None, :], zeta).real
    return np.diag(xp) + k / L


def solve_state(L: int, N: int, quantum_numbers: Optional[Sequence[int]] = None, twist: float = 0.0,
                zeta: float = math.pi / 3, max_iter: int = 30, initial: Optional[np.ndarray] = None) -> BetheState:
    """Real solution of the logarithmic Bethe equations; ground state by default."""
    qn = tuple(range(1, N + 1)) if quantum_numbers is None else tuple(int(x) for x in quantum_numbers)
    if len(qn) != N or any(b <= a for a, b in zip(qn, qn[1:])):
        raise ValueError("quantum numbers must be N strictly increasing integers")
    if N / L > 0.5:
        raise ValueError("N / L must not exceed 1/2")
    roots = _initial_guess(L, N, qn, twist, zeta) if initial is None else np.array(initial, dtype=float)
    res = _bethe_residual(roots, L, N, qn, twist, zeta)
    norm = float(np.max(np.abs(res)))
    for it in range(max_iter + 20):
        if norm <= NEWTON_TOL:
            break
        jac = _bethe_jacobian(roots, L, zeta)
        step = np.linalg.solve(jac, res)
        t = 1.0
        while True:
            trial = np.sort(roots - t * step)
            r2 = _bethe_residual(trial, L, N, qn, twist, zeta)
            n2 = float(np.max(np.abs(r2)))
            if n2 < norm or t < 1e-6:
                break
            t *= 0.5
        if not np.isfinite(n2) or (n2 >= norm and norm > 1e-11):
            raise NewtonDiverged(f"line search stalled at residual {norm:.3e}")
        roots, res, norm = trial, r2, n2
    if not np.isfinite(norm) or norm > 1e-12:
        raise NewtonDiverged(f"residual {norm:.3e} after {max_iter} iterations")
    if N > 1 and np.min(np.diff(roots)) < 1e-12:
        raise RootsCollided("two roots coincide")
    return BetheState(L=L, N=N, quantum_numbers=qn, roots=roots, twist=float(twist), residual=norm, zeta=zeta)


def particle_hole_numbers(N: int, holes: Sequence[int], particles: Sequence[int]) -> tuple:
    """Ground-state integers 1..N with ``holes`` removed and ``particles`` added."""
    s = set(range(1, N + 1)) - set(holes)
    s |= set(particles)
    if len(s) != N:
        raise ValueError("particle and hole counts differ or overlap")
    return tuple(sorted(s))


# ------------------------------------------------------------ norm matrix

def norm_matrix(state: BetheState) -> np.ndarray:
    """Xi_ab = delta_ab + K(nu_a - nu_b) / (L xi'(nu_b))."""
    r = state.roots
    xp = counting_prime(state, r)
    k = kn.kernel_k(r[:, None] - r[None, :], state.zeta).real
    return np.eye(state.N) + k / (state.L * xp[None, :])


def norm_matrix_det(state: BetheState) -> float:
    sign, logdet = np.linalg.slogdet(norm_matrix(state))
    if sign == 0:
        raise SingularXi("norm matrix is singular")
    return float(sign * math.exp(logdet))


# ------------------------------------------------- Delta(P; X) identities

def delta_direct(P, X) -> complex:
    """det[delta_ab (P_a - sum_k X_ak) + X_ab]."""
    P = np.asarray(P, dtype=complex)
    X = np.asarray(X, dtype=complex)
    return complex(np.linalg.det(np.diag(P - X.sum(axis=1)) + X))


def delta_rewrite_matrix(P, X) -> np.ndarray:
    """Entries sum_{a >= max(k,l)} P_a - sum_{s < min(k,l)} sum_{t >= max(k,l)} X_st (0-based)."""
    P = np.asarray(P, dtype=complex)
    X = np.asarray(X, dtype=complex)
    n = P.size
    tailP = np.cumsum(P[::-1])[::-1]
    # S[m, M] = sum_{s < m} sum_{t >= M} X[s, t]
    colsum = np.cumsum(X[:, ::-1], axis=1)[:, ::-1]  # colsum[s, M] = sum_{t >= M} X[s, t]
    S = np.vstack([np.zeros(n, dtype=complex), np.cumsum(colsum, axis=0)])
    out = np.empty((n, n), dtype=complex)
    for k in range(n):
        for l in range(n):
            lo, hi = min(k, l), max(k, l)
            out[k, l] = tailP[hi] - S[lo, hi]
    return out


def delta_rewrite(P, X) -> complex:
    return complex(np.linalg.det(delta_rewrite_matrix(P, X)))


def delta_block_matrices(P, X, blocks: Sequence[int]):
    """Blocks A, B, C, D after summing lines and columns inside each string block.

    ``blocks`` lists the block lengths in index order.  Within a block the
    lines are replaced by tail sums, so the intra-block part takes the
    rewritten form and the inter-block entries become tail double sums.
    """
    P = np.asarray(P, dtype=complex)
    X = np.asarray(X, dtype=complex)
    n = P.size
    if sum(blocks) != n:
        raise ValueError("block lengths must add up to N")
    starts = np.concatenate([[0], np.cumsum(blocks)[:-1]]).astype(int)
    idx = [np.arange(s, s + b) for s, b in zip(starts, blocks)]
    # P reduced by the couplings leaving the block
    frakP = []
    for bi, ii in enumerate(idx):
        outside = np.setdiff1d(np.arange(n), ii)
        frakP.append(P[ii] - X[np.ix_(outside, ii)].sum(axis=0))
    full = np.empty((n, n), dtype=complex)
    for bi, ii in enumerate(idx):
        for bj, jj in enumerate(idx):
            if bi == bj:
                full[np.ix_(ii, ii)] = delta_rewrite_matrix(frakP[bi], X[np.ix_(ii, ii)])
            else:
                sub = X[np.ix_(ii, jj)]
                tail = np.cumsum(np.cumsum(sub[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]
                full[np.ix_(ii, jj)] = tail
    first = starts
    rest = np.array([i for ii in idx for i in ii[1:]], dtype=int)
    A = full[np.ix_(first, first)]
    B = full[np.ix_(first, rest)]
    C = full[np.ix_(rest, first)]
    D = full[np.ix_(rest, rest)]
    return A, B, C, D


def delta_block(P, X, blocks: Sequence[int]) -> complex:
    A, B, C, D = delta_block_matrices(P, X, blocks)
    top = np.hstack([A, B])
    bottom = np.hstack([C, D])
    return complex(np.linalg.det(np.vstack([top, bottom])))


def delta_block_leading(P, X, blocks: Sequence[int]) -> complex:
    """det A times the product of -X_{k,k+1} along each block."""
    A, _, _, _ = delta_block_matrices(P, X, blocks)
    X = np.asarray(X, dtype=complex)
    val = complex(np.linalg.det(A))
    s = 0
    for b in blocks:
        for k in range(b - 1):
            val *= -X[s + k, s + k + 1]
        s += b
    return val


def delta_det_identity(P, X, blocks: Optional[Sequence[int]] = None):
    """(direct, rewritten, block) evaluations of Delta(P; X)."""
    X = np.asarray(X)
    if not np.allclose(X, X.T, rtol=0, atol=0) or np.any(np.diag(X) != 0):
        raise ValueError("X must be symmetric with zero diagonal")
    n = len(P)
    blocks = [n] if blocks is None else list(blocks)
    return delta_direct(P, X), delta_rewrite(P, X), delta_block(P, X, blocks)


# ----------------------------------------------------------- form factors

def _logsum_sinh(z) -> complex:
    return complex(np.sum(np.log(np.sinh(np.asarray(z, dtype=complex)))))


class FormFactorEvaluator:
    """Finite determinant representation for one pair (ground Lambda, excited Upsilon)."""

    def __init__(self, ground: BetheState, excited: BetheState):
        if ground.L != excited.L or ground.zeta != excited.zeta:
            raise ValueError("states must share L and zeta")
        self.gs = ground
        self.ex = excited
        self.L = ground.L
        self.zeta = ground.zeta
        self.alpha = excited.twist - ground.twist

    # deformed ground-state roots lambda_k(b) = xi_Lambda^{-1}((k - b)/L)
    def deformed_roots(self, b: complex) -> np.ndarray:
        gs = self.gs
        lam = gs.roots.astype(complex)
        if b == 0:
            return lam
        target = (np.asarray(gs.quantum_numbers, dtype=float) - b) / self.L
        for _ in range(60):
            f = np.asarray(counting_function(gs, lam)) - target
            df = np.asarray(counting_prime(gs, lam))
            step = f / df
            lam = lam - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return lam

    def log_S(self, b: complex, gamma: str, theta: complex = 0.0, reduced: bool = False) -> complex:
        """log of S(Lambda_b; Upsilon); ``reduced`` drops sin^2(pi alpha) for gamma = z."""
        z = self.zeta
        L = self.L
        lam = self.deformed_roots(b)
        mu = self.ex.roots.astype(complex)
        nl, nm = lam.size, mu.size
        xi_u = np.asarray(_counting_raw(self.ex.roots, L, self.ex.N, self.ex.twist, z, lam))
        e_f = np.exp(-TWO_I_PI * L * xi_u)  # = exp(2 i pi F(lambda))
        xp_l = np.asarray(_counting_prime_raw(self.gs.roots, L, z, lam))
        xp_u = np.asarray(_counting_prime_raw(self.ex.roots, L, z, mu))
        logv = np.sum(np.log((e_f - 1) * (1 / e_f - 1)) - np.log(TWO_I_PI * L * xp_l))
        dl = lam[:, None] - lam[None, :]
        dm = mu[:, None] - mu[None, :]
        dlm = lam[:, None] - mu[None, :]
        off_l = ~np.eye(nl, dtype=bool)
        off_m = ~np.eye(nm, dtype=bool)
        # D and W products
        logv += _logsum_sinh(dl[off_l]) + _logsum_sinh(dm[off_m]) - _logsum_sinh(dlm) - _logsum_sinh(-dlm)
        logv += _logsum_sinh(dlm - 1j * z) + _logsum_sinh(-dlm - 1j * z)
        logv -= _logsum_sinh(dl - 1j * z) + _logsum_sinh(dm - 1j * z)
        logv -= np.sum(np.log(TWO_I_PI * L * xp_u))
        # norm matrices
        xi_ups = np.eye(nm) + kn.kernel_k(dm, z) / (L * xp_u[None, :])
        xi_lam = np.eye(nl) + kn.kernel_k(dl, z) / (L * xp_l[None, :])
        logv -= np.linalg.slogdet(xi_ups)[1] + cmath.log(np.linalg.slogdet(xi_ups)[0])
        s_l, ld_l = np.linalg.slogdet(xi_lam)
        logv -= ld_l + cmath.log(s_l)
        logv += self._log_C(lam, mu, e_f, gamma, theta, b, reduced)
        return complex(logv)

    def _log_V(self, w, lam, mu) -> complex:
        return _logsum_sinh(w - mu) - _logsum_sinh(w - lam)

    def _log_C(self, lam, mu, e_f, gamma, theta, b, reduced) -> complex:
        z = self.zeta
        a = self.alpha
        # column factor V^{-1}(lambda_l + i zeta) / (V^{-1})'(lambda_l) / (1 - e^{2 i pi F})
        nl = lam.size
        d = lam[:, None] - lam[None, :]
        logcol = np.empty(nl, dtype=complex)
        for l in range(nl):
            lv_inv = -self._log_V(lam[l] + 1j * z, lam, mu)
            others = np.delete(lam, l)
            ldv = _logsum_sinh(lam[l] - others) - _logsum_sinh(lam[l] - mu)
            logcol[l] = lv_inv - ldv
        # residues of the loop kernel taken against d tau, hence the 2 i pi
        col = TWO_I_PI * np.exp(logcol) / (1 - e_f)
        e = cmath.exp(TWO_I_PI * a)
        if gamma == "+":
            tau = lam[None, :]
            om = lam[:, None]
            kern = (np.sinh(tau + 1.5j * z) / (np.sinh(tau - 0.5j * z) * np.sinh(om - tau - 1j * z))
                    - e * np.sinh(tau - 1.5j * z) / (np.sinh(tau + 0.5j * z) * np.sinh(om - tau + 1j * z))) / TWO_I_PI
            s, ld = np.linalg.slogdet(np.eye(nl) + kern * col[None, :])
            out = 2 * math.log(math.sin(z)) + 2 * (ld + cmath.log(s))
            for eps in (1, -1):
                out -= self._log_V(0.5j * eps * z, lam, mu)
            return out
        if gamma != "z":
            raise ValueError("gamma must be 'z' or '+'")

        def k_alpha(x):
            return (e / np.tanh(x - 1j * z) - 1 / np.tanh(x + 1j * z)) / TWO_I_PI

        kern = k_alpha(d) - k_alpha(theta - lam)[None, :]
        s, ld = np.linalg.slogdet(np.eye(nl) + kern * col[None, :])
        f_theta = self.L * (complex(counting_function(self.gs, np.array([complex(theta)]))[0]) + b / self.L
                            - complex(counting_function(self.ex, np.array([complex(theta)]))[0]))
        P = self.ex.momentum - float(np.sum(kn.bare_phase_real(self.gs.roots, 0.5 * z)))
        sp = cmath.sin(0.5 * (P - math.pi * a))
        if sp == 0:
            return complex(-math.inf)
        out = math.log(2 / math.pi**2) + 2 * cmath.log(sp)
        out -= 2 * cmath.log(cmath.sin(math.pi * f_theta))
        if not reduced:
            sa = math.sin(math.pi * a)
            if sa == 0.0:
                return complex(-math.inf)
            out += 2 * cmath.log(complex(sa))
        out += 2 * (ld + cmath.log(s))
        for eps in (1, -1):
            out -= self._log_V(theta + 1j * eps * z, lam, mu)
        return out

    def coincident(self) -> bool:
        d = np.abs(self.gs.roots[:, None] - self.ex.roots[None, :])
        return bool(d.size and d.min() < 1e-9)

    def S(self, gamma: str, theta: complex = 0.0, b_radius: Optional[float] = None, b_nodes: int = 16,
          reduced: bool = False) -> complex:
        """S at b = 0, by the b-circle mean when the root sets meet or a radius is given."""
        if b_radius is None and not self.coincident():
            return cmath.exp(self.log_S(0.0, gamma, theta, reduced))
        r = 0.25 if b_radius is None else b_radius
        vals = []
        for j in range(b_nodes):
            b = r * cmath.exp(1j * (2 * math.pi * (j + 0.5) / b_nodes))
            vals.append(cmath.exp(self.log_S(b, gamma, theta, reduced)))
        return complex(np.mean(vals))


def finite_form_factor(ground: BetheState, excited: BetheState, gamma: str, m: int = 0,
                       theta: float = 0.0, b_radius: Optional[float] = None, b_nodes: int = 16,
                       method: str = "exact", alpha_step: float = 1e-4, validate: bool = False) -> complex:
    """Normalized product of matrix elements <L|O_1|U><U|O_{m+1}^dag|L> / norms.

    gamma = '+': ``ground`` carries N roots, ``excited`` N + 1.
    gamma = 'z': both carry N roots; the second alpha-derivative at alpha = 0 is
    taken either exactly (``method='exact'``, 2 pi^2 times the reduced value) or
    by central differences over twisted ground states (``method='fd'``).
    """
    P = excited.momentum - ground.momentum
    phase = cmath.exp(1j * m * P)
    if gamma == "+":
        if excited.N != ground.N + 1:
            raise ValueError("gamma='+' needs |Upsilon| = |Lambda| + 1")
        ev = FormFactorEvaluator(ground, excited)
        val = ev.S("+", b_radius=b_radius, b_nodes=b_nodes)
        if validate:
            val2 = ev.S("+", b_radius=b_radius or 0.25, b_nodes=2 * b_nodes)
            if abs(val2 - val) > 1e-8 * abs(val):
                raise CoincidentRootSingularity("b-circle averages disagree across node counts")
        return (-1) ** m * phase * val
    if gamma != "z":
        raise ValueError("gamma must be 'z' or '+'")
    if excited.N != ground.N:
        raise ValueError("gamma='z' needs |Upsilon| = |Lambda|")
    if method == "exact":
        ev = FormFactorEvaluator(ground, excited)
        if ev.coincident():
            method = "fd"
        else:
            return phase * 2 * math.pi**2 * ev.S("z", theta, b_radius, b_nodes, reduced=True)

    def s_at(a):
        gs = solve_state(ground.L, ground.N, ground.quantum_numbers, twist=ground.twist - a, zeta=ground.zeta,
                         initial=ground.roots)
        ev = FormFactorEvaluator(gs, excited)
        return ev.S("z", theta, b_radius if b_radius is not None else (0.25 if ev.coincident() else None), b_nodes)

    h = alpha_step
    d2 = (s_at(h) - 2 * s_at(0.0) + s_at(-h)) / h**2
    return phase * d2


# ------------------------------------------------------------ scaling

def loglog_slope(xs, ys):
    """Least-squares slope of log|y| against log x and its standard error."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.abs(np.asarray(ys, dtype=float)))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    if n > 2:
        sigma2 = float(np.sum((A @ coef - y) ** 2)) / (n - 2)
        cov = sigma2 * np.linalg.inv(A.T @ A)
        err = math.sqrt(cov[0, 0])
    else:
        err = float("nan")
    return float(coef[0]), err


@dataclass
class ScalingRow:
    L: int
    value_finite: float
    value_asymptotic: float

    @property
    def ratio(self) -> float:
        return self.value_finite / self.value_asymptotic if self.value_asymptotic else float("nan")


def scaling_report(family, L_list: Sequence[int], gamma: str):
    """Rows (L, finite, asymptotic, ratio) plus log-log slopes.

    ``family(L)`` must return (ground, excited, asymptotic_value).
    """
    rows = []
    for L in L_list:
        gs, ex, asym = family(L)
        fin = finite_form_factor(gs, ex, gamma)
        rows.append(ScalingRow(L, abs(fin), asym))
    slope_f, err_f = loglog_slope([r.L for r in rows], [r.value_finite for r in rows])
    slope_a, err_a = loglog_slope([r.L for r in rows], [r.value_asymptotic for r in rows])
    return {"rows": rows, "slope_finite": (slope_f, err_f), "slope_asymptotic": (slope_a, err_a)}

"""Nystrom solver for (id + K) on [-q, q] and the dressed quantities built on it.

Every dressed function is stored as its values on a Gauss-Legendre grid and
evaluated elsewhere (including complex points in the analyticity strip) by the
Nystrom extension f(lam) = g(lam) - sum_j w_j K(lam - x_j) f_j.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from . import kernels as kn
from .errors import ConditionSetViolated, EdgeSystemSingular, NoBracket, SingularSystem, UmklappMismatch

Driving = Callable[[np.ndarray], np.ndarray]

CAUCHY_RADIUS = 0.05
CAUCHY_NODES = 24


def cauchy_derivative(func: Driving, lam, radius: float = CAUCHY_RADIUS, nodes: int = CAUCHY_NODES):
    """f'(lam) from the trapezoidal Cauchy integral on a small circle."""
    lam = np.asarray(lam, dtype=complex)
    t = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    pts = lam[..., None] + radius * t
    vals = np.asarray(func(pts.reshape(-1)), dtype=complex).reshape(pts.shape)
    return (vals * np.conj(t)).mean(axis=-1) / radius


# ------------------------------------------------------------------ params

def critical_field(zeta: float, J: float) -> float:
    return 8.0 * J * math.cos(0.5 * zeta) ** 2


@dataclass(frozen=True)
class ModelParams:
    zeta: float
    J: float
    h: float
    q: float
    n_quad: int = 128

    def __post_init__(self):
        if not 0.0 < self.zeta < math.pi:
            raise ValueError("zeta must lie in (0, pi)")
        if self.n_quad < 32:
            raise ValueError("n_quad must be at least 32")

    @property
    def h_c(self) -> float:
        return critical_field(self.zeta, self.J)

    @property
    def delta(self) -> float:
        return math.cos(self.zeta)

    @classmethod
    def from_field(cls, zeta: float, J: float, h: float, n_quad: int = 128) -> "ModelParams":
        q = fermi_boundary(zeta, J, h, n_quad=n_quad)
        return cls(zeta=zeta, J=J, h=h, q=q, n_quad=n_quad)


def bare_energy(lam, zeta: float, J: float, h: float):
    """e(lam) = h - 2 J sin(zeta) * 2 pi K(lam | zeta/2)."""
    return h - 2.0 * J * math.sin(zeta) * 2.0 * math.pi * kn.kernel_k(lam, 0.5 * zeta)


def bare_energy_prime(lam, zeta: float, J: float):
    return -2.0 * J * math.sin(zeta) * 2.0 * math.pi * kn.kernel_k_prime(lam, 0.5 * zeta)


def bare_momentum(lam, zeta: float):
    """vartheta(lam | zeta/2)."""
    lam = np.asarray(lam)
    if np.isrealobj(lam):
        return kn.bare_phase_real(lam, 0.5 * zeta)
    return kn.bare_phase(lam, 0.5 * zeta)


# -------------------------------------------------------------------- grid

@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    q: float


def build_grid(q: float, n: int) -> Grid:
    x, w = np.polynomial.legendre.leggauss(n)
    return Grid(nodes=q * x, weights=q * w, q=q)


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class DressedTable:
    """Solution of (id + K) f = g on the grid, with an off-grid evaluator."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    driving: Driving
    zeta: float
    label: str = "custom"
    driving_prime: Optional[Driving] = None
    residual: float = 0.0

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        flat = lam.reshape(-1)
        g = np.asarray(self.driving(flat), dtype=complex)
        kmat = kn.kernel_k(flat[:, None] - self.nodes[None, :], self.zeta)
        out = g - kmat @ (self.weights * self.values)
        return out.reshape(lam.shape) if lam.ndim else complex(out[0])

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=complex)
        flat = lam.reshape(-1)
        if self.driving_prime is not None:
            gp = np.asarray(self.driving_prime(flat), dtype=complex)
        else:
            gp = cauchy_derivative(self.driving, flat)
        kmat = kn.kernel_k_prime(flat[:, None] - self.nodes[None, :], self.zeta)
        out = gp - kmat @ (self.weights * self.values)
        return out.reshape(lam.shape) if lam.ndim else complex(out[0])

    def integral(self, weight=None) -> complex:
        """int_{-q}^{q} f(s) w(s) ds on the grid."""
        w = 1.0 if weight is None else np.asarray(weight(self.nodes))
        return complex(np.sum(self.weights * self.values * w))


class LiebSolver:
    """Factorized Nystrom matrix delta_ij + w_j K(x_i - x_j) for fixed (zeta, q, n)."""

    def __init__(self, zeta: float, q: float, n: int = 128):
        self.zeta = zeta
        self.q = q
        self.n = n
        self.grid = build_grid(q, n)
        x, w = self.grid.nodes, self.grid.weights
        kmat = kn.kernel_k((x[:, None] - x[None, :]).astype(complex), zeta).real
        self.kmat = kmat
        self.matrix = np.eye(n) + kmat * w[None, :]
        try:
            self.lu = sla.lu_factor(self.matrix, check_finite=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(self.lu[0])) or np.min(np.abs(np.diag(self.lu[0]))) < 1e-14:
            raise SingularSystem("Nystrom matrix is numerically singular")

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def solve_values(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return sla.lu_solve(self.lu, rhs.real) + 1j * sla.lu_solve(self.lu, rhs.imag)
        return sla.lu_solve(self.lu, rhs)

    def solve(self, driving: Driving, label: str = "custom", driving_prime: Optional[Driving] = None) -> DressedTable:
        g = np.asarray(driving(self.nodes.astype(complex)), dtype=complex)
        if np.allclose(g.imag, 0.0, atol=0.0):
            g = g.real
        vals = self.solve_values(g)
        res = float(np.max(np.abs(self.matrix @ vals - g))) if vals.size else 0.0
        return DressedTable(
            nodes=self.nodes,
            weights=self.weights,
            values=np.asarray(vals, dtype=complex),
            driving=driving,
            zeta=self.zeta,
            label=label,
            driving_prime=driving_prime,
            residual=res,
        )

    def log_det(self) -> float:
        """ln det[id + K] from the symmetrized matrix (real and positive)."""
        sw = np.sqrt(self.weights)
        sym = np.eye(self.n) + sw[:, None] * self.kmat * sw[None, :]
        sign, logdet = np.linalg.slogdet(sym)
        if sign <= 0:
            raise SingularSystem("det[id+K] is not positive")
        return float(logdet)

    def det(self) -> float:
        return math.exp(self.log_det())


@lru_cache(maxsize=64)
def lieb_solver(zeta: float, q: float, n: int = 128) -> LiebSolver:
    return LiebSolver(zeta, q, n)


def solver_for(params: ModelParams) -> LiebSolver:
    return lieb_solver(params.zeta, params.q, params.n_quad)


def solve_lieb(driving: Driving, params: ModelParams, label: str = "custom", driving_prime=None) -> DressedTable:
    return solver_for(params).solve(driving, label=label, driving_prime=driving_prime)


def fredholm_det_k(params: ModelParams) -> float:
    return solver_for(params).det()


# -------------------------------------------------------- dressed quantities

def _momentum_driving(zeta: float) -> Driving:
    return lambda lam: 2.0 * np.pi * kn.kernel_k(lam, 0.5 * zeta)


def _momentum_driving_prime(zeta: float) -> Driving:
    return lambda lam: 2.0 * np.pi * kn.kernel_k_prime(lam, 0.5 * zeta)


@dataclass(frozen=True)
class DressedMomentum:
    """p(lam) = vartheta(lam|zeta/2) - (1/2pi) sum_j w_j theta(lam - x_j) p'_j."""

    prime: DressedTable

    @property
    def zeta(self) -> float:
        return self.prime.zeta

    def __call__(self, lam):
        lam = np.asarray(lam)
        wv = self.prime.weights * self.prime.values
        if np.isrealobj(lam):
            th = kn.bare_phase_real(lam[..., None] - self.prime.nodes, self.zeta)
            out = bare_momentum(lam, self.zeta) - (th @ wv).real / (2.0 * np.pi)
            return out if np.ndim(out) else float(out)
        lam = lam.astype(complex)
        th = kn.bare_phase(lam[..., None] - self.prime.nodes, self.zeta)
        out = bare_momentum(lam, self.zeta) - th @ wv / (2.0 * np.pi)
        return out if np.ndim(out) else complex(out)


def dressed_momentum(params: ModelParams):
    """Returns (p, p') where p is callable and p' a DressedTable."""
    z = params.zeta
    table = solve_lieb(_momentum_driving(z), params, label="p'", driving_prime=_momentum_driving_prime(z))
    return DressedMomentum(table), table


def dressed_energy(params: ModelParams) -> DressedTable:
    z, J, h = params.zeta, params.J, params.h
    return solve_lieb(
        lambda lam: bare_energy(lam, z, J, h),
        params,
        label="epsilon",
        driving_prime=lambda lam: bare_energy_prime(lam, z, J),
    )


def dressed_charge(params: ModelParams) -> DressedTable:
    return solve_lieb(
        lambda lam: np.ones(np.shape(lam), dtype=complex),
        params,
        label="Z",
        driving_prime=lambda lam: np.zeros(np.shape(lam), dtype=complex),
    )


def _phase_driving(mu: complex, r: int, zeta: float) -> Driving:
    if r == 1:
        return lambda lam: kn.bare_phase(np.asarray(lam, dtype=complex) - mu, zeta) / (2.0 * np.pi)
    return lambda lam: kn.bare_phase_rp(np.asarray(lam, dtype=complex) - mu, r, 1, zeta) / (2.0 * np.pi)


def _phase_driving_prime(mu: complex, r: int, zeta: float) -> Driving:
    return lambda lam: kn.kernel_krs(np.asarray(lam, dtype=complex) - mu, r, 1, zeta)


def dressed_phase_table(mu: complex, params: ModelParams, r: int = 1) -> DressedTable:
    """phi_{r,1}(., mu) as a table in its first argument."""
    z = params.zeta
    return solve_lieb(_phase_driving(mu, r, z), params, label=f"phi_{r}", driving_prime=_phase_driving_prime(mu, r, z))


def dressed_phase(lam, mu, params: ModelParams, r: int = 1):
    return dressed_phase_table(complex(mu), params, r)(lam)


def resolvent(lam, mu, params: ModelParams):
    """R(lam, mu) solving R + K R = K(. - mu)."""
    z = params.zeta
    table = solve_lieb(lambda x: kn.kernel_k(np.asarray(x, dtype=complex) - mu, z), params, label="R")
    return table(lam)


# --------------------------------------------------------- Fermi boundary

def _energy_at_edge(Q: float, zeta: float, J: float, h: float, n: int) -> float:
    solver = LiebSolver(zeta, Q, n)
    tab = solver.solve(lambda lam: bare_energy(lam, zeta, J, h))
    return float(np.real(tab(Q)))


def fermi_boundary(zeta: float, J: float, h: float, n_quad: int = 128, method: str = "brentq",
                   bracket=(1e-3, 50.0), xtol: float = 1e-13) -> float:
    """Unique q > 0 with epsilon(q|q) = 0."""
    hc = critical_field(zeta, J)
    if not 0.0 < h < hc:
        raise NoBracket(f"h = {h} outside (0, h_c = {hc})")
    f = lambda Q: _energy_at_edge(Q, zeta, J, h, n_quad)
    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NoBracket(f"no sign change of epsilon(Q|Q) on [{lo}, {hi}]")
    if method == "brentq":
        return brentq(f, lo, hi, xtol=xtol, rtol=1e-15, maxiter=100)
    if method == "bisect":
        from scipy.optimize import bisect

        return bisect(f, lo, hi, xtol=xtol, rtol=1e-15, maxiter=200)
    raise ValueError(method)


def field_for_boundary(zeta: float, J: float, q: float, n_quad: int = 128) -> float:
    """The h with epsilon(q|q) = 0; epsilon is affine in h with slope Z."""
    solver = LiebSolver(zeta, q, n_quad)
    e0 = solver.solve(lambda lam: bare_energy(lam, zeta, J, 0.0))
    Z = solver.solve(lambda lam: np.ones(np.shape(lam), dtype=complex))
    return float(np.real(-e0(q) / Z(q)))


def boundary_for_filling(zeta: float, density: float, n_quad: int = 128, xtol: float = 1e-15) -> float:
    """The q with p(q)/pi = density, i.e. N/L of the thermodynamic sea."""
    if not 0.0 < density < 0.5:
        raise NoBracket(f"density {density} outside (0, 1/2)")

    def f(Q):
        solver = LiebSolver(zeta, Q, n_quad)
        tab = solver.solve(_momentum_driving(zeta))
        return float(np.real(DressedMomentum(tab)(Q))) / math.pi - density

    return brentq(f, 1e-4, 50.0, xtol=xtol, rtol=1e-15, maxiter=200)


def params_for_filling(zeta: float, J: float, density: float, n_quad: int = 128) -> ModelParams:
    """Parameters whose Fermi sea holds ``density`` roots per site."""
    q = boundary_for_filling(zeta, density, n_quad)
    return ModelParams(zeta=zeta, J=J, h=field_for_boundary(zeta, J, q, n_quad), q=q, n_quad=n_quad)


# ------------------------------------------------------- string quantities

def condition_set_holds(zeta: float, r: int, shifted_line: bool) -> bool:
    """Sufficient conditions for non-vanishing p_r' and positive eps_r."""
    if zeta < 0.5 * math.pi:
        return True
    a, b = 0.5 * (r - 1) * zeta, 0.5 * (r + 1) * zeta
    if shifted_line:
        return math.cos(a) * math.cos(b) < 0 and (r == 1 or math.sin(r * zeta) > 0)
    return math.sin(a) * math.sin(b) < 0 and (r == 1 or math.sin(r * zeta) < 0)


def _on_shifted_line(omega: complex) -> bool:
    return abs(complex(omega).imag - 0.5 * math.pi) < 1e-12


def _warn_conditions(zeta: float, r: int, omega) -> None:
    if r >= 2:
        shifted = _on_shifted_line(complex(np.ravel(np.asarray(omega))[0]))
        if not condition_set_holds(zeta, r, shifted):
            warnings.warn(
                f"positivity conditions fail for r={r}, zeta={zeta}", ConditionSetViolated, stacklevel=3
            )


def string_momentum_density(omega, r: int, params: ModelParams, pprime: Optional[DressedTable] = None):
    """p_r'(omega) = 2 pi K(omega | r zeta/2) - int K_{r,1}(omega - s) p'(s) ds."""
    if pprime is None:
        pprime = dressed_momentum(params)[1]
    _warn_conditions(params.zeta, r, omega)
    omega = np.asarray(omega, dtype=complex)
    flat = omega.reshape(-1)
    kr = kn.kernel_krs(flat[:, None] - pprime.nodes[None, :], r, 1, params.zeta)
    out = 2.0 * np.pi * kn.kernel_k(flat, 0.5 * r * params.zeta) - kr @ (pprime.weights * pprime.values)
    return out.reshape(omega.shape) if omega.ndim else complex(out[0])


def shifted_sum(func, omega, r: int, zeta: float):
    """sum_k func(omega + i zeta (r+1-2k)/2); pole levels are read as +i0 by the phase code."""
    omega = np.asarray(omega, dtype=complex)
    return sum(func(omega + 1j * zeta * o) for o in kn.string_offsets(r))


def string_momentum(omega, r: int, params: ModelParams, p: Optional[DressedMomentum] = None):
    """p_r(omega) by direct shifted summation of p."""
    if p is None:
        p = dressed_momentum(params)[0]
    _warn_conditions(params.zeta, r, omega)
    return shifted_sum(p, omega, r, params.zeta)


def string_momentum_resummed(omega, r: int, params: ModelParams, p: Optional[DressedMomentum] = None):
    """Same quantity through theta_{r,1} + pi m_r; differs from the direct sum only by branch integers."""
    if p is None:
        p = dressed_momentum(params)[0]
    z = params.zeta
    omega = np.asarray(omega, dtype=complex)
    drive = shifted_sum(lambda x: kn.bare_phase(x, 0.5 * z), omega, r, z)
    tab = p.prime
    th = kn.bare_phase_rp(omega[..., None] - tab.nodes, r, 1, z)
    wv = tab.weights * tab.values
    return drive - (th @ wv) / (2.0 * np.pi) - 0.5 * kn.m_r(z, r) * np.sum(wv)


def string_energy(omega, r: int, params: ModelParams, eps: Optional[DressedTable] = None):
    """eps_r(omega) = sum_k e(omega + shifts) - int K_{r,1}(omega - s) eps(s) ds.

    The bare sum telescopes to r h - 2 J sin(zeta) 2 pi K(omega | r zeta/2).
    """
    if eps is None:
        eps = dressed_energy(params)
    z, J, h = params.zeta, params.J, params.h
    _warn_conditions(z, r, omega)
    omega = np.asarray(omega, dtype=complex)
    flat = omega.reshape(-1)
    bare = r * h - 2.0 * J * math.sin(z) * 2.0 * math.pi * kn.kernel_k(flat, 0.5 * r * z)
    kr = kn.kernel_krs(flat[:, None] - eps.nodes[None, :], r, 1, z)
    out = bare - kr @ (eps.weights * eps.values)
    return out.reshape(omega.shape) if omega.ndim else complex(out[0])


# ---------------------------------------------------------------- t-operator

@dataclass(frozen=True)
class TOperatorResult:
    table: DressedTable
    edges: tuple  # (t(-q), t(+q))
    params: ModelParams
    f: Driving
    phi_left: DressedTable
    phi_right: DressedTable

    def __call__(self, lam):
        return self.table(lam)

    def edge_sum(self) -> complex:
        tl, tr = self.edges
        return tr - tl

    def shifted(self, omega, r: int, f_r: Callable):
        """t_r(omega) = f_r - int K_{r,1} t - sum sigma t(sigma q){theta_{r,1}(omega - sigma q)/2pi + m_r/2}."""
        z = self.params.zeta
        q = self.params.q
        omega = np.asarray(omega, dtype=complex)
        flat = omega.reshape(-1)
        tab = self.table
        kr = kn.kernel_krs(flat[:, None] - tab.nodes[None, :], r, 1, z)
        out = np.asarray(f_r(flat), dtype=complex) - kr @ (tab.weights * tab.values)
        mr = kn.m_r(z, r)
        for sigma, tv in ((-1.0, self.edges[0]), (1.0, self.edges[1])):
            out = out - sigma * tv * (kn.bare_phase_rp(flat - sigma * q, r, 1, z) / (2 * np.pi) + 0.5 * mr)
        return out.reshape(omega.shape) if omega.ndim else complex(out[0])


def t_operator(f: Driving, params: ModelParams, f_prime: Optional[Driving] = None) -> TOperatorResult:
    """Solve (id+K) t = f - (1/2pi) sum_v sigma_v t(sigma_v q) theta(. - sigma_v q)."""
    q = params.q
    solver = solver_for(params)
    f0 = solver.solve(f, driving_prime=f_prime)
    phiL = dressed_phase_table(-q, params)
    phiR = dressed_phase_table(q, params)
    edge_pts = np.array([-q, q], dtype=complex)
    F0 = f0(edge_pts)
    PL = phiL(edge_pts)
    PR = phiR(edge_pts)
    # t_i = F0_i + t_L phiL_i - t_R phiR_i  (sigma_L = -1, sigma_R = +1)
    A = np.array([[1.0 - PL[0], PR[0]], [-PL[1], 1.0 + PR[1]]], dtype=complex)
    if abs(np.linalg.det(A)) < 1e-12:
        raise EdgeSystemSingular("edge system for the t-operator is singular")
    tL, tR = np.linalg.solve(A, F0)
    vals = f0.values + tL * phiL.values - tR * phiR.values

    def driving(lam, f=f, tL=tL, tR=tR):
        lam = np.asarray(lam, dtype=complex)
        th = lambda x: kn.bare_phase(x, params.zeta)
        return np.asarray(f(lam), dtype=complex) - (-tL * th(lam + q) + tR * th(lam - q)) / (2 * np.pi)

    def driving_prime(lam, tL=tL, tR=tR):
        lam = np.asarray(lam, dtype=complex)
        base = f_prime(lam) if f_prime is not None else cauchy_derivative(f, lam)
        kk = lambda x: kn.kernel_k(x, params.zeta)
        return base - (-tL * kk(lam + q) + tR * kk(lam - q))

    table = DressedTable(
        nodes=solver.nodes,
        weights=solver.weights,
        values=vals,
        driving=driving,
        zeta=params.zeta,
        label="t",
        driving_prime=driving_prime,
        residual=f0.residual,
    )
    return TOperatorResult(table=table, edges=(complex(tL), complex(tR)), params=params, f=f,
                           phi_left=phiL, phi_right=phiR)


def v_operator(f: Driving, f_r: Callable, omega: complex, r: int, params: ModelParams) -> complex:
    """v_r[f](omega) = f_r - int f(s) d_s phi_{r,1}(s, omega) ds + sum sigma f(sigma q) phi_{r,1}(sigma q, omega)."""
    q = params.q
    tab = dressed_phase_table(complex(omega), params, r)
    x, w = tab.nodes, tab.weights
    dphi = tab.derivative(x.astype(complex))
    fx = np.asarray(f(x.astype(complex)), dtype=complex)
    edges = np.array([-q, q], dtype=complex)
    fe = np.asarray(f(edges), dtype=complex)
    pe = tab(edges)
    return complex(np.asarray(f_r(np.array([omega])))[0] - np.sum(w * fx * dphi) - fe[0] * pe[0] + fe[1] * pe[1])


# ------------------------------------------------------------- excitations

@dataclass(frozen=True)
class ExcitationSpec:
    """Thermodynamic data of an excited state relative to the ground state."""

    string_centers: tuple = ()  # (r, c); r = 1 entries are off-zone particles
    holes_off: tuple = ()
    umklapp: tuple = (0, 0)  # (l_L, l_R)
    varkappa: Optional[tuple] = (0, 0)  # (kappa_L, kappa_R); None selects automatic rounding
    massless: dict = field(default_factory=lambda: {"p_L": (), "h_L": (), "p_R": (), "h_R": ()})
    twist_alpha: float = 0.0
    spin_deficit: int = 0  # |Lambda| - |Upsilon|
    parity: int = 0

    def __post_init__(self):
        # l_v counts edge particles minus edge holes on side v
        for k, side in enumerate(("L", "R")):
            ps, hs = self.massless_lists(side)
            if int(self.umklapp[k]) != len(ps) - len(hs):
                raise UmklappMismatch(
                    f"umklapp l_{side}={self.umklapp[k]} but {len(ps)} edge particles and {len(hs)} edge holes"
                )

    @property
    def strings(self):
        return tuple((int(r), complex(c)) for r, c in self.string_centers if int(r) >= 2)

    @property
    def particles_off(self):
        return tuple(complex(c) for r, c in self.string_centers if int(r) == 1)

    def massless_lists(self, side: str):
        return tuple(self.massless.get(f"p_{side}", ())), tuple(self.massless.get(f"h_{side}", ()))

    def with_varkappa(self, kappa) -> "ExcitationSpec":
        return ExcitationSpec(
            string_centers=self.string_centers,
            holes_off=self.holes_off,
            umklapp=self.umklapp,
            varkappa=tuple(kappa),
            massless=self.massless,
            twist_alpha=self.twist_alpha,
            spin_deficit=self.spin_deficit,
            parity=self.parity,
        )

    def ell_kappa(self, kappa: Optional[Sequence[int]] = None):
        """(l_L^kappa, l_R^kappa) = l_v - sigma_v kappa_v."""
        k = self.varkappa if kappa is None else kappa
        if k is None:
            raise ValueError("varkappa must be resolved first")
        return (self.umklapp[0] + k[0], self.umklapp[1] - k[1])


@dataclass
class Thermo:
    """Bundle of dressed tables for one parameter set."""

    params: ModelParams
    p: DressedMomentum
    pprime: DressedTable
    eps: DressedTable
    Z: DressedTable

    @classmethod
    def build(cls, params: ModelParams) -> "Thermo":
        p, pp = dressed_momentum(params)
        return cls(params=params, p=p, pprime=pp, eps=dressed_energy(params), Z=dressed_charge(params))

    @property
    def fermi_velocity(self) -> float:
        q = self.params.q
        return float((self.eps.derivative(q) / self.pprime(q)).real)


def excitation_observables(spec: ExcitationSpec, params: ModelParams, rho: complex = 0.0,
                           L: Optional[int] = None, thermo: Optional[Thermo] = None):
    """Excitation energy and momentum; finite L adds the 1/L edge terms."""
    th = thermo or Thermo.build(params)
    z, q = params.zeta, params.q
    E = 0j
    P = 0j
    mt_sum = 0
    for r, c in spec.strings:
        E += string_energy(c, r, params, th.eps)
        P += string_momentum(c, r, params, th.p)
        mt_sum += kn.m_tilde(z, r, _on_shifted_line(c))
    for mu in spec.particles_off:
        E += th.eps(mu)
        P += th.p(np.array([mu]))[0] if np.iscomplexobj(np.array([mu])) and complex(mu).imag else th.p(complex(mu).real)
        mt_sum += kn.m_tilde(z, 1, _on_shifted_line(mu))
    for mu in spec.holes_off:
        E -= th.eps(mu)
        P -= th.p(float(np.real(mu)))
    ellk = spec.ell_kappa() if spec.varkappa is not None else (spec.umklapp[0], spec.umklapp[1])
    P += 2.0 * rho * kn.bare_phase_real(q, 0.5 * z)
    P += (mt_sum + spec.spin_deficit + 2.0 * spec.twist_alpha + ellk[1] - ellk[0]) * th.p(q)
    if L is not None:
        s = 0.0
        e = 0.0
        for side, sigma in (("L", -1.0), ("R", 1.0)):
            ps, hs = spec.massless_lists(side)
            tot = sum(ps) + sum(h + 1 for h in hs)
            s += sigma * tot
            e += tot
        P += 2.0 * math.pi / L * s
        E += 2.0 * math.pi * th.fermi_velocity / L * e
    return complex(E), complex(P)

"""Large-volume form-factor asymptotics assembled from thermodynamic data.

The central object is :class:`AsymptoticModel`, which caches the dressed
tables for one parameter set and one excitation and exposes the shift
function, the Cauchy and aleph transforms, the Fredholm determinants on a loop
around the Fermi zone and the final rho-circle average.  Module-level
functions with the same names are thin wrappers.
"""

from __future__ import annotations

import cmath
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels as kn
from . import lieb
from . import specfun as sf
from .errors import (
    ContourInvalid,
    KappaFixedPointDiverged,
    MuAtEdge,
    OmegaOnContour,
    PoleHit,
    RadiusSensitivity,
    RepeatedInteger,
    ShiftExponentialNearOne,
    StepInconsistency,
    ThetaAtZeroOfSine,
)
from .lieb import ExcitationSpec, ModelParams

log = logging.getLogger(__name__)

TWO_I_PI = 2j * math.pi
SIGMA = {"L": -1, "R": 1}

# Measure of the loop operators: plain dtau.  Calibrated by the theta
# independence of C^(z), which holds exactly with this choice and fails at
# the percent level for dtau / (2 i pi).
LOOP_MEASURE = 1.0

# Distance below which Cauchy-type integrals switch to pole subtraction.
_SUBTRACT_DIST = 0.3


# ------------------------------------------------------------ coth integrals

def _nearest_image(w: np.ndarray) -> np.ndarray:
    """w - i pi k with the imaginary part folded into (-pi/2, pi/2]."""
    k = np.round(w.imag / math.pi)
    return w - 1j * math.pi * k


def _segment_distance(w: np.ndarray, q: float) -> np.ndarray:
    x = np.clip(w.real, -q, q)
    return np.abs(w - x)


def _log_coth_antiderivative(w: np.ndarray, q: float, below: np.ndarray) -> np.ndarray:
    """int_{-q}^{q} coth(s - w) ds, with w on the segment read as w - i0 where ``below``."""
    num = np.sinh(q - w)
    den = np.sinh(-q - w)
    out = np.log(num / den)
    on = below & (np.abs(w.imag) < 1e-14) & (np.abs(w.real) < q)
    if np.any(on):
        out = np.where(on, np.log(np.abs(num / den)) - 1j * math.pi, out)
    return out


class CauchyGrid:
    """int_{-q}^{q} coth(s - w) f(s) ds / (2 i pi) for a fixed f on a GL grid.

    Near the segment (or one of its i pi images) the pole is subtracted,
    ``f(w)`` times the closed-form log is added back.
    """

    def __init__(self, f: Callable, q: float, n: int = 128, fprime: Optional[Callable] = None):
        x, w = np.polynomial.legendre.leggauss(n)
        self.q = q
        self.nodes = q * x
        self.weights = q * w
        self.f = f
        self.fprime = fprime
        self.fvals = np.asarray(f(self.nodes.astype(complex)), dtype=complex)

    def integral(self, omega, avoid: str = "none", scaled: bool = True):
        """C[f](omega); ``avoid='above'`` deforms the segment above omega."""
        omega = np.asarray(omega, dtype=complex)
        flat = omega.reshape(-1)
        img = _nearest_image(flat)
        on_seg = (np.abs(img.imag) < 1e-14) & (np.abs(img.real) <= self.q)
        if np.any(on_seg) and avoid != "above":
            raise OmegaOnContour("omega lies on [-q, q]; pass avoid='above'")
        near = _segment_distance(img, self.q) < _SUBTRACT_DIST
        out = np.empty(flat.shape, dtype=complex)
        far = ~near
        if np.any(far):
            ct = 1.0 / np.tanh(self.nodes[None, :] - flat[far][:, None])
            out[far] = ct @ (self.weights * self.fvals)
        if np.any(near):
            wn = img[near]
            fw = np.asarray(self.f(wn), dtype=complex)
            diff = self.nodes[None, :] - wn[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                integrand = (self.fvals[None, :] - fw[:, None]) / np.tanh(diff)
            hit = np.abs(diff) < 1e-12
            if np.any(hit):
                fp = self.fprime if self.fprime is not None else (lambda z: lieb.cauchy_derivative(self.f, z))
                rows, cols = np.nonzero(hit)
                integrand[rows, cols] = np.asarray(fp(wn[rows]), dtype=complex)
            below = np.full(wn.shape, avoid == "above")
            out[near] = integrand @ self.weights + fw * _log_coth_antiderivative(wn, self.q, below)
        if scaled:
            out = out / TWO_I_PI
        out = out.reshape(omega.shape)
        return out if omega.ndim else complex(out)

    def tanh_subtracted(self, mu: float):
        """int (f(s) - f(mu)) / tanh(s - mu) ds for real mu (nodes never equal mu)."""
        fm = complex(np.asarray(self.f(np.array([mu], dtype=complex)))[0])
        d = self.nodes - mu
        if np.min(np.abs(d)) < 1e-12:
            raise MuAtEdge("a quadrature node coincides with mu")
        return complex(np.sum(self.weights * (self.fvals - fm) / np.tanh(d)))


def cauchy_transform(f: Callable, omega, q: float, avoid: str = "none", n: int = 128):
    """C_{I_q}[f](omega) = int_{-q}^{q} coth(s - omega) f(s) ds / (2 i pi)."""
    return CauchyGrid(f, q, n).integral(omega, avoid=avoid)


# ----------------------------------------------------------- shift function

class ShiftFunction:
    """F^(rho) as a finite combination of dressed tables plus rho."""

    def __init__(self, terms, rho: complex, spec: ExcitationSpec, kappa, ell_kappa, q: float, alpha: float):
        self.terms = list(terms)
        self.rho = complex(rho)
        self.spec = spec
        self.kappa = tuple(kappa)
        self.ell_kappa = tuple(ell_kappa)
        self.q = q
        self.alpha = alpha

    def base(self, omega):
        omega = np.asarray(omega, dtype=complex)
        out = np.zeros(omega.shape, dtype=complex)
        for c, tab in self.terms:
            out = out + c * np.asarray(tab(omega))
        return out

    def __call__(self, omega):
        out = self.base(omega) + self.rho
        return out if np.ndim(out) else complex(out)

    def derivative(self, omega):
        omega = np.asarray(omega, dtype=complex)
        out = np.zeros(omega.shape, dtype=complex)
        for c, tab in self.terms:
            out = out + c * np.asarray(tab.derivative(omega))
        return out if out.ndim else complex(out)

    def second_derivative(self, omega, radius: float = 0.05):
        return lieb.cauchy_derivative(self.derivative, omega, radius=radius)

    def edge(self, side: str) -> complex:
        return complex(self(np.array([SIGMA[side] * self.q], dtype=complex))[0])

    def with_rho(self, rho: complex) -> "ShiftFunction":
        return ShiftFunction(self.terms, rho, self.spec, self.kappa, self.ell_kappa, self.q, self.alpha)


@dataclass(frozen=True)
class EdgeExponents:
    f_L: complex
    f_R: complex
    kappa: tuple


# ----------------------------------------------------------------- the loop

@dataclass(frozen=True)
class FermiLoop:
    """Counter-clockwise stadium around [-q, q] discretized by GL panels."""

    nodes: np.ndarray
    weights: np.ndarray  # d tau
    half_height: float
    q: float
    min_modulus: float = float("nan")

    def refined(self) -> "FermiLoop":
        return build_loop(self.q, self.half_height, nodes_per_panel=2 * self._npp)

    @property
    def _npp(self) -> int:
        return getattr(self, "_nodes_per_panel", 16)


def _gl_segment(a: complex, b: complex, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _gl_arc(center: complex, radius: float, t0: float, t1: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x
    z = center + radius * np.exp(1j * t)
    dz = 1j * radius * np.exp(1j * t) * 0.5 * (t1 - t0) * w
    return z, dz


def build_loop(q: float, half_height: float, nodes_per_panel: int = 16, panel_scale: float = 1.5) -> FermiLoop:
    """Stadium: segments at +-i b joined by half circles of radius b centred at +-q."""
    b = half_height
    if not 0.0 < b:
        raise ContourInvalid("loop half-height must be positive")
    n_seg = max(2, int(math.ceil(2.0 * q / (panel_scale * b))))
    zs, ws = [], []
    edges = np.linspace(-q, q, n_seg + 1)
    for a0, a1 in zip(edges[:-1], edges[1:]):  # bottom, left to right
        z, w = _gl_segment(a0 - 1j * b, a1 - 1j * b, nodes_per_panel)
        zs.append(z)
        ws.append(w)
    for t0, t1 in ((-0.5 * math.pi, 0.0), (0.0, 0.5 * math.pi)):  # right cap
        z, w = _gl_arc(q, b, t0, t1, nodes_per_panel)
        zs.append(z)
        ws.append(w)
    for a0, a1 in zip(edges[::-1][:-1], edges[::-1][1:]):  # top, right to left
        z, w = _gl_segment(a0 + 1j * b, a1 + 1j * b, nodes_per_panel)
        zs.append(z)
        ws.append(w)
    for t0, t1 in ((0.5 * math.pi, math.pi), (math.pi, 1.5 * math.pi)):  # left cap
        z, w = _gl_arc(-q, b, t0, t1, nodes_per_panel)
        zs.append(z)
        ws.append(w)
    loop = FermiLoop(nodes=np.concatenate(zs), weights=np.concatenate(ws), half_height=b, q=q)
    object.__setattr__(loop, "_nodes_per_panel", nodes_per_panel)
    return loop


# -------------------------------------------------------- massless density

def massless_density(p_list: Sequence[int], h_list: Sequence[int], nu) -> complex:
    """R_{n_p, n_h}({p}; {h} | nu), assembled in log space."""
    p = [int(x) for x in p_list]
    h = [int(x) for x in h_list]
    for lst in (p, h):
        if len(set(lst)) != len(lst):
            raise RepeatedInteger("particle or hole integers repeat")
        if any(x < 0 for x in lst):
            raise ValueError("particle/hole integers must be non-negative")
    nu = complex(nu)
    s = cmath.sin(math.pi * nu) / math.pi
    if h and abs(s) == 0.0:
        return 0j
    logv = 0j
    if h:
        logv += 2 * len(h) * cmath.log(s)
    for i in range(len(h)):
        for j in range(i + 1, len(h)):
            logv += 2 * math.log(abs(h[i] - h[j]))
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            logv += 2 * math.log(abs(p[i] - p[j]))
    for a in h:
        for b in p:
            logv -= 2 * math.log(a + b + 1)
    for a in p:
        logv += 2 * (sf.log_gamma(1 + a + nu) - sf.log_gamma(1 + a))
    for a in h:
        logv += 2 * (sf.log_gamma(1 + a - nu) - sf.log_gamma(1 + a))
    return cmath.exp(logv)


# --------------------------------------------------------------- the model

def _on_shifted_line(c: complex) -> bool:
    return abs(complex(c).imag - 0.5 * math.pi) < 1e-12


class AsymptoticModel:
    """Thermodynamic data for one (params, excitation) pair."""

    def __init__(self, params: ModelParams, spec: ExcitationSpec, n_cauchy: Optional[int] = None):
        self.params = params
        self.spec = spec
        self.th = lieb.Thermo.build(params)
        self.q = params.q
        self.zeta = params.zeta
        self.n_cauchy = n_cauchy or params.n_quad
        self._phase_cache: dict = {}
        self.kappa = self._resolve_kappa()
        self.ell_kappa = spec.ell_kappa(self.kappa)

    # -- tables
    def phase_table(self, mu: complex, r: int = 1) -> lieb.DressedTable:
        key = (complex(mu), int(r))
        if key not in self._phase_cache:
            self._phase_cache[key] = lieb.dressed_phase_table(complex(mu), self.params, r)
        return self._phase_cache[key]

    def _terms(self, ell_kappa, alpha: float):
        spec = self.spec
        terms = []
        zc = alpha + 0.5 * spec.spin_deficit
        if zc != 0:
            terms.append((zc, self.th.Z))
        for r, c in spec.strings:
            terms.append((1.0, self.phase_table(c, r)))
        for mu in spec.particles_off:
            terms.append((1.0, self.phase_table(mu, 1)))
        for mu in spec.holes_off:
            terms.append((-1.0, self.phase_table(complex(mu), 1)))
        for side, lk in zip(("L", "R"), ell_kappa):
            if lk:
                terms.append((float(lk), self.phase_table(SIGMA[side] * self.q, 1)))
        return terms

    def _resolve_kappa(self):
        if self.spec.varkappa is not None:
            return tuple(int(k) for k in self.spec.varkappa)
        kappa = (0, 0)
        for _ in range(10):
            ellk = self.spec.ell_kappa(kappa)
            F = ShiftFunction(self._terms(ellk, self.spec.twist_alpha), 0.0, self.spec, kappa, ellk, self.q,
                              self.spec.twist_alpha)
            new = tuple(int(math.floor(F.edge(side).real + 0.5)) for side in ("L", "R"))
            if new == kappa:
                return kappa
            kappa = new
        raise KappaFixedPointDiverged("varkappa rounding did not stabilize in 10 rounds")

    def shift_function(self, rho: complex = 0.0, alpha: Optional[float] = None) -> ShiftFunction:
        a = self.spec.twist_alpha if alpha is None else alpha
        return ShiftFunction(self._terms(self.ell_kappa, a), rho, self.spec, self.kappa, self.ell_kappa, self.q, a)

    def edge_exponents(self, rho: complex = 0.0, alpha: Optional[float] = None) -> EdgeExponents:
        F = self.shift_function(rho, alpha)
        return EdgeExponents(f_L=self.kappa[0] - F.edge("L"), f_R=self.kappa[1] - F.edge("R"), kappa=self.kappa)

    # -- Cauchy and aleph transforms
    def cauchy(self, F: ShiftFunction) -> CauchyGrid:
        return CauchyGrid(F, self.q, self.n_cauchy, fprime=F.derivative)

    def aleph_r(self, F: ShiftFunction, mu: complex, r: int, cg: Optional[CauchyGrid] = None) -> complex:
        """aleph^(r)[F](mu); for r = 1 and mu on the zone, the minus boundary value."""
        cg = cg or self.cauchy(F)
        z = self.zeta
        mu = complex(mu)
        out = 0j
        for eps in (1, -1):
            out += cg.integral(mu + 1j * eps * 0.5 * z * (r + 1))
            w = mu + 1j * eps * 0.5 * z * (r - 1)
            img = _nearest_image(np.array([w]))[0]
            on = abs(img.imag) < 1e-14 and abs(img.real) <= self.q
            out -= cg.integral(w, avoid="above" if on else "none")
        return -TWO_I_PI * out

    def aleph_bd(self, F: ShiftFunction, side: str, cg: Optional[CauchyGrid] = None) -> complex:
        cg = cg or self.cauchy(F)
        mu = SIGMA[side] * self.q
        first = 2.0 * cg.tanh_subtracted(mu)
        second = 0j
        for eps in (1, -1):
            # int f(s) coth(s - mu + i eps zeta) ds = 2 i pi C(mu - i eps zeta)
            second += TWO_I_PI * cg.integral(mu - 1j * eps * self.zeta)
        return first - second

    # -- functionals
    def functionals_H(self, F: ShiftFunction, n: Optional[int] = None):
        n = n or self.n_cauchy
        x, w = np.polynomial.legendre.leggauss(n)
        s = self.q * x
        wt = self.q * w
        sc = s.astype(complex)
        f = np.asarray(F(sc))
        fp = np.asarray(F.derivative(sc))
        diff = s[:, None] - s[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            m = (fp[:, None] * f[None, :] - f[:, None] * fp[None, :]) / (2.0 * np.tanh(diff))
        fpp = np.asarray(F.second_derivative(sc))
        # t -> s limit of the antisymmetric ratio
        np.fill_diagonal(m, -0.5 * (fp**2 - f * fpp))
        h0 = wt @ m @ wt
        for side in ("L", "R"):
            mu = SIGMA[side] * self.q
            fm = F.edge(side)
            h0 += SIGMA[side] * fm * np.sum(wt * (f - fm) / np.tanh(s - mu))
        h1 = -(wt * f) @ (1.0 / np.sinh(s[None, :] - s[:, None] - 1j * self.zeta) ** 2) @ (wt * f)
        return complex(h0), complex(h1)

    # -- G factor and kernels
    def big_G(self, tau):
        tau = np.asarray(tau, dtype=complex)
        z = self.zeta
        out = np.ones(tau.shape, dtype=complex)
        for r, c in self.spec.strings:
            out = out * kn.phi_rp(c - tau, 1, r, z, method="product")
        for mu in self.spec.particles_off:
            out = out * kn.phi_rp(mu - tau, 1, 1, z, method="product")
        for mu in self.spec.holes_off:
            out = out / kn.phi_rp(complex(mu) - tau, 1, 1, z, method="product")
        for side, lk in zip(("L", "R"), self.ell_kappa):
            if lk:
                sq = SIGMA[side] * self.q
                den = np.sinh(sq - tau - 1j * z)
                num = np.sinh(sq - tau)
                if np.any(np.abs(den) < kn.POLE_TOL) or (lk < 0 and np.any(np.abs(num) < kn.POLE_TOL)):
                    raise PoleHit("big_G: tau on an edge pole")
                out = out * (num / den) ** lk
        return out if out.ndim else complex(out)

    def kernel_K(self, omega, tau, alpha: float, theta: complex, gamma: str):
        z = self.zeta
        omega = np.asarray(omega, dtype=complex)
        tau = np.asarray(tau, dtype=complex)
        e = cmath.exp(TWO_I_PI * alpha)
        if gamma == "z":
            def k_alpha(x):
                return (e / np.tanh(x - 1j * z) - 1.0 / np.tanh(x + 1j * z)) / TWO_I_PI
            return k_alpha(omega - tau) - k_alpha(theta - tau)
        if gamma == "+":
            a = np.sinh(tau + 1.5j * z) / (np.sinh(tau - 0.5j * z) * np.sinh(omega - tau - 1j * z))
            b = e * np.sinh(tau - 1.5j * z) / (np.sinh(tau + 0.5j * z) * np.sinh(omega - tau + 1j * z))
            return (a - b) / TWO_I_PI
        raise ValueError(f"gamma must be 'z' or '+', got {gamma!r}")

    # -- loop construction
    def _singular_levels(self) -> float:
        """Half-width of the strip in which F and the kernels are analytic."""
        z = self.zeta
        levels = [z, math.pi - z, 0.5 * z]

        def fold(y):
            y = (y + 0.5 * math.pi) % math.pi - 0.5 * math.pi
            return abs(y)

        for r, c in self.spec.strings:
            for _, e in kn.krs_reduced_terms(r, 1):
                for sgn in (1, -1):
                    levels.append(fold(c.imag + sgn * z * e))
        for mu in self.spec.particles_off:
            for sgn in (1, -1):
                levels.append(fold(complex(mu).imag + sgn * z))
        levels = [v for v in levels if v > 1e-9]
        return min(levels)

    def _kernel_poles(self):
        """Poles of G off the real segment."""
        z = self.zeta
        pts = []
        for r, c in list(self.spec.strings) + [(1, complex(m)) for m in self.spec.particles_off]:
            for k in range(1, r + 1):
                pts.append(c + 0.5j * z * (r - 1 - 2 * k))
        for side, lk in zip(("L", "R"), self.ell_kappa):
            if lk > 0:
                pts.append(SIGMA[side] * self.q - 1j * z)
        return np.array(pts, dtype=complex)

    def _zeros_near_zone(self, F: ShiftFunction, strip: float):
        """Zeros of 1 - exp(2 i pi F) in the strip, by Newton from a real seed grid."""
        q = self.q
        x = np.linspace(-q - strip, q + strip, 121)
        vals = np.asarray(F(x.astype(complex)))
        zeros = []
        for n in range(int(math.floor(vals.real.min())) - 1, int(math.ceil(vals.real.max())) + 2):
            j = int(np.argmin(np.abs(vals.real - n)))
            tau = complex(x[j])
            for _ in range(40):
                g = complex(F(np.array([tau]))[0]) - n
                dg = complex(F.derivative(np.array([tau]))[0])
                if dg == 0:
                    break
                step = g / dg
                if abs(step) > strip:
                    step *= strip / abs(step)
                tau -= step
                if abs(step) < 1e-13:
                    break
            if abs(complex(F(np.array([tau]))[0]) - n) < 1e-9 and abs(tau.imag) < strip:
                zeros.append(tau)
        return np.array(zeros, dtype=complex)

    def fermi_loop(self, F: ShiftFunction, nodes_per_panel: int = 16, half_height: Optional[float] = None) -> FermiLoop:
        strip = self._singular_levels()
        if half_height is None:
            b = 0.5 * strip
            cand = []
            poles = self._kernel_poles()
            if poles.size:
                d = _segment_distance(_nearest_image(poles), self.q)
                cand.extend(d[d > 1e-9].tolist())
            zs = self._zeros_near_zone(F, strip)
            if zs.size:
                cand.extend(_segment_distance(zs, self.q).tolist())
            if cand:
                b = min(b, 0.5 * min(cand))
            b = min(b, 0.25)
        else:
            b = half_height
        if b < 1e-2:
            raise ContourInvalid(f"loop half-height {b:.3g} too small")
        loop = build_loop(self.q, b, nodes_per_panel)
        mod = np.abs(1.0 - np.exp(TWO_I_PI * np.asarray(F(loop.nodes))))
        mm = float(mod.min())
        if mm < 1e-3:
            raise ShiftExponentialNearOne(f"min |1 - exp(2 i pi F)| = {mm:.2e} on the loop")
        # winding of 1 - exp(2 i pi F) must vanish: no zeros inside
        ph = np.unwrap(np.angle(1.0 - np.exp(TWO_I_PI * np.asarray(F(loop.nodes)))))
        wind = (ph[-1] - ph[0] + np.angle((1 - np.exp(TWO_I_PI * F(loop.nodes[:1])))[0]
                                          / (1 - np.exp(TWO_I_PI * F(loop.nodes[-1:])))[0])) / (2 * math.pi)
        if abs(wind) > 0.5:
            raise ContourInvalid("the loop encloses zeros of 1 - exp(2 i pi F)")
        log.debug("Fermi loop: b=%.4g nodes=%d min|1-e^{2i pi F}|=%.3g", b, loop.nodes.size, mm)
        object.__setattr__(loop, "min_modulus", mm)
        return loop

    # -- Fredholm determinant
    def fredholm_det_U(self, rho: complex, alpha: float, theta: complex, gamma: str,
                       loop: Optional[FermiLoop] = None, nodes_per_panel: int = 16) -> complex:
        F = self.shift_function(rho, alpha)
        if loop is None:
            loop = self.fermi_loop(F, nodes_per_panel)
        cg = self.cauchy(F)
        tau = loop.nodes
        expo = np.exp(TWO_I_PI * (cg.integral(tau) - cg.integral(tau + 1j * self.zeta)))
        ftau = np.asarray(F(tau))
        col = expo * self.big_G(tau) / (1.0 - np.exp(TWO_I_PI * ftau))
        kmat = self.kernel_K(tau[:, None], tau[None, :], alpha, theta, gamma)
        m = np.eye(tau.size) + LOOP_MEASURE * kmat * (col * loop.weights)[None, :]
        sign, logdet = np.linalg.slogdet(m)
        return complex(sign * np.exp(logdet))

    # -- excitation momentum with rho and alpha
    def momentum(self, rho: complex, alpha: float) -> complex:
        spec = dataclasses.replace(self.spec, twist_alpha=alpha, varkappa=self.kappa)
        _, P = lieb.excitation_observables(spec, self.params, rho=rho, thermo=self.th)
        return P

    def _eps_products(self, F, cg, points, gamma: str) -> complex:
        """The epsilon = +- product of exponential-Cauchy and sinh factors."""
        z = self.zeta
        total = 1.0 + 0j
        for eps, w in zip((1, -1), points):
            val = cmath.exp(-TWO_I_PI * cg.integral(w))
            for mu in self.spec.holes_off:
                val *= cmath.sinh(w - mu)
            den = 1.0 + 0j
            for r, c in list(self.spec.strings) + [(1, complex(m)) for m in self.spec.particles_off]:
                for k in range(1, r + 1):
                    if gamma == "z":
                        den *= cmath.sinh(w - c - 0.5j * z * (r + 1 - 2 * k))
                    else:
                        den *= cmath.sinh(0.5j * z * (2 * k + eps - 1 - r) - c)
            val /= den
            for side, lk in zip(("L", "R"), self.ell_kappa):
                if lk:
                    val *= cmath.sinh(w - SIGMA[side] * self.q) ** (-lk)
            total *= val
        return total

    def coeff_C(self, rho: complex, alpha: float, theta: complex, gamma: str,
                nodes_per_panel: int = 16, reduced: bool = False) -> complex:
        """C^(gamma); with ``reduced`` the explicit sin^2(pi alpha) of C^(z) is dropped."""
        F = self.shift_function(rho, alpha)
        cg = self.cauchy(F)
        det = self.fredholm_det_U(rho, alpha, theta, gamma, nodes_per_panel=nodes_per_panel)
        z = self.zeta
        if gamma == "+":
            pts = (0.5j * z, -0.5j * z)
            return math.sin(z) ** 2 * det**2 * self._eps_products(F, cg, pts, "+")
        theta = complex(theta)
        sF = cmath.sin(math.pi * complex(F(np.array([theta]))[0]))
        if abs(sF) < 1e-10:
            raise ThetaAtZeroOfSine("sin(pi F(theta)) vanishes")
        P = self.momentum(rho, alpha)
        pref = 2.0 / math.pi**2 * cmath.sin(0.5 * (P - math.pi * alpha)) ** 2 / sF**2
        if not reduced:
            pref *= math.sin(alpha * math.pi) ** 2
        pts = (theta + 1j * z, theta - 1j * z)
        return pref * det**2 * self._eps_products(F, cg, pts, "z")

    def d2alpha_Cz(self, rho: complex, theta: complex, steps=(1e-3, 5e-4, 2.5e-4), rel_tol: float = 1e-5,
                   nodes_per_panel: int = 16) -> complex:
        """Second alpha-derivative of C^(z) at alpha = 0 by central differences and Richardson.

        Two Richardson estimates from consecutive step pairs must agree to ``rel_tol``.
        """
        a0 = self.spec.twist_alpha

        def c(a):
            return self.coeff_C(rho, a0 + a, theta, "z", nodes_per_panel=nodes_per_panel)

        c0 = c(0.0)
        ests = [(c(h) - 2 * c0 + c(-h)) / h**2 for h in steps]
        rich = []
        for (h1, d1), (h2, d2) in zip(zip(steps, ests), zip(steps[1:], ests[1:])):
            ratio = (h1 / h2) ** 2
            rich.append((ratio * d2 - d1) / (ratio - 1.0))
        best = rich[-1]
        if len(rich) > 1:
            spread = abs(rich[-1] - rich[-2]) / max(abs(best), 1e-300)
            if spread > rel_tol:
                raise StepInconsistency(f"Richardson estimates disagree by {spread:.2e}")
        return complex(best)

    def d2alpha_Cz_exact(self, rho: complex, theta: complex, nodes_per_panel: int = 16) -> complex:
        """2 pi^2 times C^(z) with the explicit sin^2(pi alpha) removed, at alpha = 0."""
        return 2.0 * math.pi**2 * self.coeff_C(rho, self.spec.twist_alpha, theta, "z",
                                                nodes_per_panel=nodes_per_panel, reduced=True)

    # -- X_tot
    def x_total(self, rho: complex, alpha: Optional[float] = None) -> complex:
        F = self.shift_function(rho, alpha)
        cg = self.cauchy(F)
        z, q = self.zeta, self.q
        lL, lR = self.ell_kappa
        logv = 0j
        if lL and lR:
            logv += 2 * lL * lR * math.log(abs(math.sinh(2 * q) / cmath.sinh(2 * q + 1j * z)))
        logv += cmath.log(self.x_factor())
        n_off = len(self.spec.particles_off) + len(self.spec.holes_off)
        logv -= n_off * math.log(math.sin(z)) if n_off else 0.0
        for r, c in self.spec.strings:
            logv += self.aleph_r(F, c, r, cg)
        for mu in self.spec.particles_off:
            logv += self.aleph_r(F, mu, 1, cg)
        for mu in self.spec.holes_off:
            logv -= self.aleph_r(F, complex(mu), 1, cg)
        for side, lk in zip(("L", "R"), self.ell_kappa):
            if lk:
                logv += lk * self.aleph_bd(F, side, cg) - lk * math.log(2 * math.pi)
                logv += lk**2 * math.log(math.sinh(2 * q) / math.sin(z))
        return cmath.exp(logv)

    def x_factor(self) -> complex:
        """The product of Phi factors and 1/sin(r zeta) entering X_tot."""
        z, q = self.zeta, self.q
        cs = list(self.spec.strings) + [(1, complex(m)) for m in self.spec.particles_off]
        holes = [complex(m) for m in self.spec.holes_off]

        def phi(lam, r, p):
            return complex(kn.phi_rp(lam, r, p, z, method="product"))

        val = 1.0 + 0j
        for r, _ in self.spec.strings:
            val /= math.sin(r * z)
        for side, lk in zip(("L", "R"), self.ell_kappa):
            if not lk:
                continue
            sq = SIGMA[side] * q
            num = 1.0 + 0j
            for r, c in cs:
                num *= phi(sq - c, 1, r) * phi(c - sq, 1, r)
            den = 1.0 + 0j
            for lam in holes:
                den *= phi(sq - lam, 1, 1) * phi(lam - sq, 1, 1)
            val *= (num / den) ** lk
        for i, (p, ca) in enumerate(cs):
            for j, (r, cb) in enumerate(cs):
                if i != j:
                    val *= phi(ca - cb, r, p)
        for i, a in enumerate(holes):
            for j, b in enumerate(holes):
                if i != j:
                    val *= phi(a - b, 1, 1)
        for lam in holes:
            for p, c in cs:
                val /= phi(lam - c, 1, p) * phi(c - lam, 1, p)
        return val

    # -- assembled densities
    def massive_density(self, rho: complex, gamma: str, theta: complex = 0.0,
                        nodes_per_panel: int = 16) -> complex:
        F = self.shift_function(rho)
        q = self.q
        h0, h1 = self.functionals_H(F)
        if gamma == "+":
            ctil = self.coeff_C(rho, self.spec.twist_alpha, theta, "+", nodes_per_panel=nodes_per_panel)
        else:
            ctil = self.d2alpha_Cz_exact(rho, theta, nodes_per_panel=nodes_per_panel)
        logv = h0 + h1 + cmath.log(self.x_total(rho)) + cmath.log(ctil)
        logv -= 2 * lieb.solver_for(self.params).log_det()
        for mu in self.spec.holes_off:
            logv += 2 * cmath.log(1 - cmath.exp(-TWO_I_PI * complex(F(np.array([complex(mu)]))[0])))
        ex = self.edge_exponents(rho)
        pq = float(np.real(self.th.pprime(q)))
        for side, fv in (("L", ex.f_L), ("R", ex.f_R)):
            sg = SIGMA[side]
            ell = self.spec.umklapp[0 if side == "L" else 1]
            g = fv - sg * ell
            logv += 2 * sf.log_barnes_g(1 - sg * g)
            logv -= g**2 * math.log(math.sinh(2 * q) * pq)
            logv -= sg * F.edge(side) * math.log(2 * math.pi)
        sign = -1.0 if (self.spec.parity + len(self.spec.holes_off)) % 2 else 1.0
        return sign * cmath.exp(logv)

    def integrand(self, rho: complex, L: float, gamma: str, theta: complex = 0.0,
                  nodes_per_panel: int = 16) -> complex:
        """Asymptotic integrand at rho (without the d rho / 2 i pi rho measure)."""
        ex = self.edge_exponents(rho)
        logv = 0j
        for side, fv in (("L", ex.f_L), ("R", ex.f_R)):
            sg = SIGMA[side]
            ell = self.spec.umklapp[0 if side == "L" else 1]
            g = fv - sg * ell
            logv += 2 * sf.log_barnes_g(1 - sg * fv) - 2 * sf.log_barnes_g(1 - sg * g)
            ps, hs = self.spec.massless_lists(side)
            rv = massless_density(ps, hs, -sg * fv)
            if rv == 0:
                return 0j
            logv += cmath.log(rv)
            logv -= g**2 * math.log(L / (2 * math.pi))
        for mu in self.spec.holes_off:
            logv -= cmath.log(L * complex(self.th.pprime(float(np.real(mu)))))
        for mu in self.spec.particles_off:
            logv -= cmath.log(L * complex(self.th.pprime(complex(mu))))
        for r, c in self.spec.strings:
            logv -= cmath.log(L * lieb.string_momentum_density(c, r, self.params, self.th.pprime))
        dens = self.massive_density(rho, gamma, theta, nodes_per_panel)
        return cmath.exp(logv) * dens

    def admissible_radius(self, cap: float = 0.12, n_grid: int = 401) -> float:
        """Half the distance from rho = 0 to the nearest rho with F + rho integer on the zone.

        Inside that disc the integrand is analytic except possibly at rho = 0,
        so the circle average is radius independent.
        """
        lam = np.linspace(-self.q, self.q, n_grid).astype(complex)
        f = np.real(self.shift_function(0.0)(lam))
        d = float(np.min(np.abs(f - np.round(f))))
        if d == 0.0:
            return cap
        if d < 2e-3:
            raise ContourInvalid(f"shift function within {d:.1e} of an integer on the zone")
        return min(cap, 0.5 * d)

    def ff_asymptotics(self, L: float, gamma: str, radius: Optional[float] = None, n_nodes: int = 16,
                       theta: complex = 0.0, nodes_per_panel: int = 16) -> float:
        """Trapezoidal average of the integrand over rho = r e^{i phi}, nodes off the real axis.

        ``radius=None`` picks :meth:`admissible_radius`.
        """
        if L < 2:
            raise ValueError("L must be at least 2")
        if radius is None:
            radius = self.admissible_radius()
        if not 0.0 < radius < 0.25:
            raise ContourInvalid("rho-circle radius must lie in (0, 1/4)")
        phis = 2 * math.pi * (np.arange(n_nodes) + 0.5) / n_nodes
        vals = [self.integrand(radius * cmath.exp(1j * ph), L, gamma, theta, nodes_per_panel) for ph in phis]
        val = complex(np.mean(vals))
        if abs(val.imag) > 1e-6 * max(abs(val.real), 1e-300):
            log.warning("ff_asymptotics: imaginary residue %.3g relative", abs(val.imag) / abs(val.real))
        return val.real

    def ff_radius_check(self, L: float, gamma: str, radii: Optional[Sequence[float]] = None,
                        n_nodes: int = 16, rel_tol: float = 1e-3, theta: complex = 0.0):
        """Evaluate at several radii; default radii are 1/2, 3/4 and 1 of the admissible one."""
        if radii is None:
            r0 = self.admissible_radius()
            radii = (0.5 * r0, 0.75 * r0, r0)
        vals = [self.ff_asymptotics(L, gamma, r, n_nodes, theta) for r in radii]
        ref = max(abs(v) for v in vals)
        spread = (max(vals) - min(vals)) / ref if ref else 0.0
        if spread > rel_tol:
            raise RadiusSensitivity(f"rho-circle results spread {spread:.2e}")
        return vals, spread


def _as_model(params: ModelParams, spec: ExcitationSpec) -> AsymptoticModel:
    return AsymptoticModel(params, spec)


# --------------------------------------------------------- module wrappers

def shift_function(spec: ExcitationSpec, params: ModelParams, rho: complex = 0.0, omega=None):
    F = _as_model(params, spec).shift_function(rho)
    return F if omega is None else F(omega)


def functionals_H(F: ShiftFunction, params: ModelParams, spec: Optional[ExcitationSpec] = None):
    model = _as_model(params, spec or F.spec)
    return model.functionals_H(F)


def aleph_transforms(model: AsymptoticModel, F: ShiftFunction, mu: complex, r: int):
    """(aleph^(r)[F](mu), aleph^(bd)[F](mu)) with mu = +-q for the boundary transform."""
    a_r = model.aleph_r(F, mu, r)
    side = "R" if complex(mu).real > 0 else "L"
    if abs(complex(mu) - SIGMA[side] * model.q) > 1e-12:
        raise MuAtEdge("aleph^(bd) is evaluated at the Fermi edges only")
    return a_r, model.aleph_bd(F, side)


def big_G_factor(spec: ExcitationSpec, params: ModelParams, tau):
    return _as_model(params, spec).big_G(tau)


def fredholm_det_U(spec, params, rho, alpha, theta, gamma):
    return _as_model(params, spec).fredholm_det_U(rho, alpha, theta, gamma)


def coeff_C(spec, params, rho, alpha, theta, gamma):
    return _as_model(params, spec).coeff_C(rho, alpha, theta, gamma)


def d2alpha_Cz(spec, params, rho, theta):
    return _as_model(params, spec).d2alpha_Cz(rho, theta)


def x_total(spec, params, rho):
    return _as_model(params, spec).x_total(rho)


def massive_density(spec, params, rho, gamma, theta=0.0):
    return _as_model(params, spec).massive_density(rho, gamma, theta)


def ff_asymptotics(spec, params, L, gamma, radius=None, n_nodes=16):
    return _as_model(params, spec).ff_asymptotics(L, gamma, radius, n_nodes)

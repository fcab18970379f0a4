"""The twelve acceptance checks, shared by ``bethe-ff selftest`` and the test suite.

Every check returns a :class:`CheckResult`; thresholds live in
:data:`DEFAULT_TOLERANCES` and can be overridden per run.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np
from scipy import integrate, special

from . import experiments as xp
from . import finite_bethe as fb
from . import kernels as kn
from . import lieb
from . import specfun as sf
from . import thermo_ff as tf
from .lieb import ExcitationSpec, ModelParams

DEFAULT_TOLERANCES: Dict[str, float] = {
    "c1_rel": 1e-8,
    "c1_seconds": 30.0,
    "c2_abs": 1e-12,
    "c3_abs": 1e-10,
    "c4_abs": 1e-8,
    "c5_reflection": 1e-10,
    "c5_gamma_C": 5.0,
    "c6_rel": 1e-10,
    "c6_leading_rel": 1e-4,
    "c7_slope": -2.0,
    "c7_width": 0.3,
    "c8_slope": -1.0,
    "c8_width": 0.4,
    "c9_slope": -1.0,
    "c9_width": 0.3,
    "c10_rel": 1e-3,
    "c11_rel": 1e-6,
    "c12_ratio_drift": 0.25,
    "c12_exponent_rel": 0.10,
}


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    summary: str
    metrics: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s)"


def _reference_params() -> ModelParams:
    z = math.pi / 3
    return ModelParams.from_field(z, 1.0, 0.5 * lieb.critical_field(z, 1.0))


# ---------------------------------------------------------------- 1

def _quad_complex(f: Callable[[float], complex], a: float, b: float, points=None) -> complex:
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    if points is not None:
        opts["points"] = points
    re = integrate.quad(lambda t: f(t).real, a, b, **opts)[0]
    im = integrate.quad(lambda t: f(t).imag, a, b, **opts)[0]
    return complex(re, im)


def pole_integral_quadrature(a: complex, alpha: complex) -> complex:
    """Adaptive quadrature of int ln(1 + e^{-|t| + alpha sgn t}) / (t - a) dt / (2 i pi)."""

    def f(t):
        s = 1.0 if t > 0 else -1.0
        return np.log1p(np.exp(-abs(t) + alpha * s)) / (t - a)

    tot = _quad_complex(f, -np.inf, 0.0) + _quad_complex(f, 0.0, np.inf)
    return tot / (2j * math.pi)


def gamma_pair_quadrature(a: complex, b: complex, kind: str) -> complex:
    """Adaptive quadrature of the Fermi-difference integrals, kinds as in specfun."""
    def w(t):
        return complex(sf.fermi_pair_weight(np.array([t]), a, b)[0])

    if kind == "linear":
        g = lambda t: w(t)
    elif kind == "gamma":
        g = lambda t: w(t) * (
            special.loggamma(0.5 + (t - a) / (2j * math.pi)) - special.loggamma(0.5 + (t - a - b) / (2j * math.pi))
        )
    elif kind == "log":
        # ln[-i(t + i0)] = ln|t| - i pi/2 sgn t
        g = lambda t: w(t) * (math.log(abs(t)) - 0.5j * math.pi * math.copysign(1.0, t)) if t != 0 else 0j
    else:
        raise ValueError(kind)
    tot = _quad_complex(g, -np.inf, 0.0) + _quad_complex(g, 0.0, np.inf)
    return tot / (2j * math.pi)


def check_appendix_integrals(tol: Mapping[str, float], seed: int = 11, n: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = {}
    t0 = time.perf_counter()
    errs = []
    for _ in range(n):
        s = 1 if rng.random() < 0.5 else -1
        a = complex(rng.uniform(-3, 3), s * rng.uniform(0.3, 4.0))
        alpha = complex(rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5))
        exact = sf.integral_pole_to_gamma(a, alpha, s)
        num = pole_integral_quadrature(a, alpha)
        errs.append(abs(num - exact) / abs(exact))
    worst["pole_to_gamma"] = max(errs)
    for kind in ("gamma", "linear", "log"):
        errs = []
        for _ in range(n):
            a = complex(rng.uniform(-2, 2), rng.uniform(-1.2, 1.2))
            b = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.2, 1.2))
            exact = sf.integral_gamma_pair(a, b, kind)
            num = gamma_pair_quadrature(a, b, kind)
            errs.append(abs(num - exact) / max(abs(exact), 1e-300))
        worst[kind] = max(errs)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= tol["c1_rel"] and dt <= tol["c1_seconds"]
    summ = "max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    return CheckResult(1, "closed-form integrals vs adaptive quadrature", ok, summ, worst, dt)


# ---------------------------------------------------------------- 2

def check_kernel_resummation(tol: Mapping[str, float], seed: int = 12, n: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    zeta = 0.9
    w = rng.uniform(-2, 2, n) + 1j * rng.uniform(-0.3, 0.3, n)
    worst_k = worst_phi = worst_arr = 0.0
    for r in range(1, 6):
        for s in range(1, 6):
            a = np.asarray(kn.kernel_krs(w, r, s, zeta, method="sum"))
            b = np.asarray(kn.kernel_krs(w, r, s, zeta, method="reduced"))
            worst_k = max(worst_k, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
            c = np.asarray(kn.phi_rp(w, r, s, zeta, method="product"))
            d = np.asarray(kn.phi_rp(w, r, s, zeta, method="reduced"))
            worst_phi = max(worst_phi, float(np.max(np.abs(c - d) / np.maximum(1.0, np.abs(c)))))
    # two independent arrangements of the basic kernel; catches a sign flip in either
    for eta in (0.3, zeta, 2.1):
        a = np.asarray(kn.kernel_k(w, eta))
        b = np.asarray(kn.kernel_k_coth(w, eta))
        worst_arr = max(worst_arr, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    ok = max(worst_k, worst_phi, worst_arr) <= tol["c2_abs"]
    m = {"K_rs": worst_k, "Phi_rp": worst_phi, "K_arrangements": worst_arr}
    return CheckResult(2, "kernel and product resummation", ok,
                       f"K_rs {worst_k:.1e}, Phi_rp {worst_phi:.1e}, K forms {worst_arr:.1e}", m)


# ---------------------------------------------------------------- 3

def check_free_fermion(tol: Mapping[str, float]) -> CheckResult:
    z = math.pi / 2
    P = ModelParams.from_field(z, 1.0, 0.4 * lieb.critical_field(z, 1.0))
    lam = np.linspace(-1.5, 1.5, 31)
    Z = lieb.dressed_charge(P)
    eps = lieb.dressed_energy(P)
    p, _ = lieb.dressed_momentum(P)
    errs = {
        "Z": float(np.max(np.abs(Z(lam) - 1.0))),
        "phi": float(np.max(np.abs(lieb.dressed_phase(lam, 0.37, P) - kn.bare_phase_real(lam - 0.37, z) / (2 * math.pi)))),
        "epsilon": float(np.max(np.abs(eps(lam) - lieb.bare_energy(lam.astype(complex), z, P.J, P.h)))),
        "p": float(np.max(np.abs(p(lam) - kn.bare_phase_real(lam, z / 2)))),
        "det": abs(lieb.fredholm_det_k(P) - 1.0),
    }
    ok = max(errs.values()) <= tol["c3_abs"]
    return CheckResult(3, "free-fermion point", ok, "max dev " + f"{max(errs.values()):.1e}", errs)


# ---------------------------------------------------------------- 4

def phase_charge_residuals(P: ModelParams, lam) -> tuple:
    """Residuals of phi(l,q) - phi(l,-q) + 1 = Z(l) and 1 + phi(q,q) - phi(-q,q) = 1/Z(q)."""
    q = P.q
    Z = lieb.dressed_charge(P)
    lam = np.asarray(lam, dtype=float)
    r1 = lieb.dressed_phase(lam, q, P) - lieb.dressed_phase(lam, -q, P) + 1 - Z(lam)
    r2 = 1 + lieb.dressed_phase(q, q, P) - lieb.dressed_phase(-q, q, P) - 1 / Z(q)
    return float(np.max(np.abs(r1))), float(abs(r2))


def check_phase_charge(tol: Mapping[str, float]) -> CheckResult:
    worst = 0.0
    lam = np.array([-1.3, -0.4, 0.0, 0.25, 0.9, 2.2])
    for z in np.linspace(0.45, 2.55, 5):
        for frac in np.linspace(0.15, 0.85, 5):
            P = ModelParams.from_field(float(z), 1.0, float(frac) * lieb.critical_field(float(z), 1.0))
            worst = max(worst, *phase_charge_residuals(P, lam))
    ok = worst <= tol["c4_abs"]
    return CheckResult(4, "phase-charge identities on a 5x5 grid", ok, f"max residual {worst:.1e}", {"max": worst})


# ---------------------------------------------------------------- 5

def reflection_residual(z: float, ell: int) -> float:
    lhs = (-1) ** (ell * (ell + 1) // 2) * cmath.exp(
        sf.log_barnes_g(1 - z - ell) + sf.log_barnes_g(1 + z) - sf.log_barnes_g(1 + z + ell) - sf.log_barnes_g(1 - z)
    )
    return abs(lhs - (math.sin(math.pi * z) / math.pi) ** ell)


def gamma_ratio_constant() -> float:
    """Fitted C in |Gamma(z+d)/(Gamma(z) z^d) - 1| <= C d / z over z in [2, 100], d in (0, 2]."""
    zs = np.geomspace(2.0, 100.0, 60)
    ds = np.linspace(0.05, 2.0, 40)
    Z, Dl = np.meshgrid(zs, ds)
    val = np.abs(np.expm1(special.gammaln(Z + Dl) - special.gammaln(Z) - Dl * np.log(Z)))
    return float(np.max(val * Z / Dl))


def check_barnes(tol: Mapping[str, float]) -> CheckResult:
    worst = max(reflection_residual(z, ell) for z in np.linspace(0.03, 0.47, 23) for ell in (0, 1, 2))
    C = gamma_ratio_constant()
    ok = worst <= tol["c5_reflection"] and C <= tol["c5_gamma_C"]
    return CheckResult(5, "Barnes reflection and Gamma-ratio bound", ok,
                       f"reflection {worst:.1e}, fitted C {C:.3f}", {"reflection": worst, "C": C})


# ---------------------------------------------------------------- 6

def _random_partition(rng, n: int, max_block: int = 4) -> List[int]:
    out = []
    while n > 0:
        b = int(rng.integers(1, min(n, max_block) + 1))
        out.append(b)
        n -= b
    return out


def check_delta_identities(tol: Mapping[str, float], seed: int = 16, n: int = 500) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        N = int(rng.integers(1, 13))
        P = rng.normal(size=N) + 1j * rng.normal(size=N)
        X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        X = X + X.T
        np.fill_diagonal(X, 0)
        d, rw, bl = fb.delta_det_identity(P, X, _random_partition(rng, N))
        worst = max(worst, abs(rw - d) / abs(d), abs(bl - d) / abs(d))
    lead = 0.0
    for _ in range(20):
        blocks = [2, 3]
        P = rng.normal(size=5) + 1j * rng.normal(size=5)
        X = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        X = X + X.T
        np.fill_diagonal(X, 0)
        s = 0
        for b in blocks:
            for k in range(b - 1):
                X[s + k, s + k + 1] = X[s + k + 1, s + k] = 1e6 * (1 + rng.random())
            s += b
        lead = max(lead, abs(fb.delta_block_leading(P, X, blocks) / fb.delta_direct(P, X) - 1))
    ok = worst <= tol["c6_rel"] and lead <= tol["c6_leading_rel"]
    return CheckResult(6, "Delta(P;X) determinant identities", ok,
                       f"three-way {worst:.1e}, leading factorisation {lead:.1e}", {"three_way": worst, "leading": lead})


# ---------------------------------------------------------------- 7-9

_SWEEP_CACHE: Dict[tuple, list] = {}


def _finite_size_rows(L_list=(64, 128, 256, 512)):
    key = tuple(L_list)
    if key not in _SWEEP_CACHE:
        _SWEEP_CACHE[key] = xp.finite_size_sweep(_reference_params(), L_list)
    return _SWEEP_CACHE[key]


def _slope_check(number: int, name: str, column: str, tol: Mapping[str, float], prefix: str) -> CheckResult:
    t0 = time.perf_counter()
    rows = _finite_size_rows()
    Ls = [r["L"] for r in rows]
    ys = [r[column] for r in rows]
    slope, err = fb.loglog_slope(Ls, ys)
    target, width = tol[f"{prefix}_slope"], tol[f"{prefix}_width"]
    ok = abs(slope - target) <= width
    m = {"L": Ls, column: ys, "slope": slope, "stderr": err}
    return CheckResult(number, name, ok, f"slope {slope:.3f} +- {err:.3f} (target {target} +- {width})",
                       m, time.perf_counter() - t0)


def check_counting_function(tol):
    return _slope_check(7, "counting-function residual decay", "counting_residual", tol, "c7")


def check_excitation_energy(tol):
    return _slope_check(8, "edge-pair excitation energy 1/L law", "energy_defect", tol, "c8")


def check_norm_determinant(tol):
    return _slope_check(9, "norm determinant limit", "norm_det_defect", tol, "c9")


# ---------------------------------------------------------------- 10-12

def criterion10_spec() -> ExcitationSpec:
    return ExcitationSpec(string_centers=((2, 0.7),), holes_off=(0.1,), umklapp=(0, 1), varkappa=(0, 0),
                          massless={"p_R": (0,)})


def check_rho_radius(tol: Mapping[str, float]) -> CheckResult:
    model = tf.AsymptoticModel(_reference_params(), criterion10_spec())
    m: Dict[str, object] = {"admissible_radius": model.admissible_radius()}
    worst = 0.0
    for gamma in ("+", "z"):
        vals, spread = model.ff_radius_check(100, gamma, rel_tol=math.inf)
        m[f"values_{gamma}"] = vals
        m[f"spread_{gamma}"] = spread
        worst = max(worst, spread)
    ok = worst <= tol["c10_rel"]
    return CheckResult(10, "rho-circle radius independence", ok, f"max spread {worst:.1e}", m)


def criterion11_spec() -> ExcitationSpec:
    return ExcitationSpec(holes_off=(0.3,), umklapp=(0, 1), varkappa=(0, 0), massless={"p_R": (0,)},
                          twist_alpha=0.1)


def check_theta_independence(tol: Mapping[str, float]) -> CheckResult:
    spec = criterion11_spec()
    model = tf.AsymptoticModel(_reference_params(), spec)
    thetas = (-0.35, -0.1, 0.15, 0.4, 0.1 + 0.25j)
    vals = [model.coeff_C(0.0, spec.twist_alpha, th, "z") for th in thetas]
    spread = max(abs(v / vals[0] - 1) for v in vals)
    ok = spread <= tol["c11_rel"]
    return CheckResult(11, "theta independence of C^(z)", ok, f"relative variation {spread:.1e}",
                       {"values": [complex(v) for v in vals], "spread": spread})


def headline_rows(L_list=(32, 64, 128, 256), gamma: str = "+"):
    params = _reference_params()
    report = fb.scaling_report(xp.family_callback("edge_particle", params, gamma), L_list, gamma)
    return params, report


def check_headline(tol: Mapping[str, float]) -> CheckResult:
    params, report = headline_rows()
    rows = report["rows"]
    ratios = [r.ratio for r in rows]
    drift = abs(ratios[-1] / ratios[-2] - 1)
    spec = xp.edge_particle(params, 8).spec
    predicted = xp.predicted_exponent(params, spec)
    slope = report["slope_finite"][0]
    rel = abs(slope - predicted) / abs(predicted)
    ok = drift <= tol["c12_ratio_drift"] and rel <= tol["c12_exponent_rel"]
    m = {"L": [r.L for r in rows], "finite": [r.value_finite for r in rows],
         "asymptotic": [r.value_asymptotic for r in rows], "ratio": ratios,
         "slope_finite": slope, "predicted_exponent": predicted}
    return CheckResult(12, "finite vs asymptotic form factor (gamma=+)", ok,
                       f"ratios {', '.join(f'{x:.4f}' for x in ratios)}; slope {slope:.4f} vs {predicted:.4f}", m)


CHECKS: Dict[int, Callable[[Mapping[str, float]], CheckResult]] = {
    1: check_appendix_integrals,
    2: check_kernel_resummation,
    3: check_free_fermion,
    4: check_phase_charge,
    5: check_barnes,
    6: check_delta_identities,
    7: check_counting_function,
    8: check_excitation_energy,
    9: check_norm_determinant,
    10: check_rho_radius,
    11: check_theta_independence,
    12: check_headline,
}


def run_check(number: int, overrides: Optional[Mapping[str, float]] = None) -> CheckResult:
    tol = dict(DEFAULT_TOLERANCES)
    if overrides:
        unknown = set(overrides) - set(tol)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        tol.update(overrides)
    t0 = time.perf_counter()
    try:
        res = CHECKS[number](tol)
    except Exception as exc:  # a crash is a failed check, reported with its cause
        res = CheckResult(number, f"check {number}", False, f"{type(exc).__name__}: {exc}")
    if not res.seconds:
        res.seconds = time.perf_counter() - t0
    return res


def run_all(overrides: Optional[Mapping[str, float]] = None, only=None) -> List[CheckResult]:
    numbers = sorted(CHECKS) if only is None else list(only)
    return [run_check(k, overrides) for k in numbers]

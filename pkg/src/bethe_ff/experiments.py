"""Finite-volume state families paired with their thermodynamic description.

Each family maps a chain length L to a ground state, an excited state and the
matching :class:`~bethe_ff.lieb.ExcitationSpec`.  They feed the scaling
report, the acceptance suite and the ``scaling`` command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from . import finite_bethe as fb
from . import lieb
from . import thermo_ff as tf
from .lieb import ExcitationSpec, ModelParams


def ground_density(params: ModelParams) -> float:
    """Roots per site of the thermodynamic ground state, p(q)/pi."""
    p, _ = lieb.dressed_momentum(params)
    return float(p(params.q)) / math.pi


def ground_count(params: ModelParams, L: int) -> int:
    return int(round(L * ground_density(params)))


def _hole_rapidity(state: fb.BetheState, target: float, q: float) -> float:
    """Root of xi_state(mu) = target on [-q, q] by a dense scan plus linear interpolation."""
    xs = np.linspace(-q, q, 20001)
    cf = np.real(np.asarray(fb.counting_function(state, xs)))
    return float(np.interp(target, cf, xs))


@dataclass
class FamilyMember:
    L: int
    ground: fb.BetheState
    excited: fb.BetheState
    spec: ExcitationSpec


def edge_particle(params: ModelParams, L: int) -> FamilyMember:
    """Upsilon is the N + 1 root ground state: one extra particle at the right edge."""
    N = ground_count(params, L)
    gs = fb.solve_state(L, N, zeta=params.zeta)
    ex = fb.solve_state(L, N + 1, zeta=params.zeta)
    spec = ExcitationSpec(varkappa=(0, 0), spin_deficit=-1, umklapp=(0, 1), massless={"p_R": (0,)})
    return FamilyMember(L, gs, ex, spec)


def edge_pair(params: ModelParams, L: int) -> FamilyMember:
    """Right-edge particle-hole pair, last quantum number raised by one (p = h = 0)."""
    N = ground_count(params, L)
    gs = fb.solve_state(L, N, zeta=params.zeta)
    qn = list(gs.quantum_numbers)
    qn[-1] += 1
    ex = fb.solve_state(L, N, quantum_numbers=tuple(qn), zeta=params.zeta)
    spec = ExcitationSpec(varkappa=(0, 0), massless={"p_R": (0,), "h_R": (0,)})
    return FamilyMember(L, gs, ex, spec)


def offzone_hole(params: ModelParams, L: int, mu0: float = 0.3, gamma: str = "z") -> FamilyMember:
    """A hole near ``mu0`` inside the zone; the removed root reappears at the right edge.

    For gamma = '+' the excited state carries one extra root, placed at the
    left edge so both edges hold one particle.
    """
    N = ground_count(params, L)
    gs = fb.solve_state(L, N, zeta=params.zeta)
    extra = 1 if gamma == "+" else 0
    base = gs if extra == 0 else fb.solve_state(L, N + 1, zeta=params.zeta)
    k = int(np.argmin(np.abs(base.roots - mu0)))
    qn = list(base.quantum_numbers)
    hole_qn = qn.pop(k)
    if gamma == "+":
        qn = [qn[0] - 1] + qn
        massless = {"p_L": (0,), "p_R": (0,)}
        umklapp = (1, 1)
    else:
        qn.append(qn[-1] + 1)
        massless = {"p_R": (0,)}
        umklapp = (0, 1)
    ex = fb.solve_state(L, N + extra, quantum_numbers=tuple(qn), zeta=params.zeta)
    mu = _hole_rapidity(ex, hole_qn / L, params.q)
    spec = ExcitationSpec(
        varkappa=(0, 0), spin_deficit=-extra, holes_off=(mu,), umklapp=umklapp, massless=massless
    )
    return FamilyMember(L, gs, ex, spec)


FAMILIES: Dict[str, Callable[..., FamilyMember]] = {
    "edge_particle": edge_particle,
    "edge_pair": edge_pair,
    "offzone_hole": offzone_hole,
}


def family_callback(name: str, params: ModelParams, gamma: str, n_cauchy: Optional[int] = None):
    """Adapter for :func:`finite_bethe.scaling_report`: L -> (ground, excited, asymptotic value)."""
    if name not in FAMILIES:
        raise KeyError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")

    def build(L: int):
        member = FAMILIES[name](params, L, gamma=gamma) if name == "offzone_hole" else FAMILIES[name](params, L)
        model = tf.AsymptoticModel(params, member.spec, n_cauchy=n_cauchy)
        return member.ground, member.excited, model.ff_asymptotics(L, gamma)

    return build


def predicted_exponent(params: ModelParams, spec: ExcitationSpec) -> float:
    """-(f_R - l_R)^2 - (f_L + l_L)^2 minus one power per off-zone root or string."""
    model = tf.AsymptoticModel(params, spec)
    ex = model.edge_exponents(0.0)
    lL, lR = spec.umklapp
    total = (ex.f_R.real - lR) ** 2 + (ex.f_L.real + lL) ** 2
    total += len(spec.holes_off) + len(spec.particles_off) + len(spec.strings)
    return -total


def matched_params(zeta: float, J: float, N: int, L: int, n_quad: int = 128) -> ModelParams:
    """Thermodynamic parameters whose sea holds exactly N/L roots per site."""
    return lieb.params_for_filling(zeta, J, N / L, n_quad=n_quad)


def finite_size_sweep(params: ModelParams, L_list: Sequence[int]):
    """Rows of finite-size residuals against filling-matched thermodynamic data.

    Each row holds the counting-function residual sup norm, the edge-pair
    energy defect L*dE - 2 pi v_F, and det Xi - det[id + K].
    """
    D = ground_density(params)
    rows = []
    for L in L_list:
        N = int(round(L * D))
        ref = matched_params(params.zeta, params.J, N, L, params.n_quad)
        th = lieb.Thermo.build(ref)
        gs = fb.solve_state(L, N, zeta=params.zeta)
        qn = list(gs.quantum_numbers)
        qn[-1] += 1
        ex = fb.solve_state(L, N, quantum_numbers=tuple(qn), zeta=params.zeta)
        x = np.linspace(-ref.q, ref.q, 401)
        resid = np.real(np.asarray(fb.counting_function(gs, x))) - th.p(x) / (2 * math.pi) - (N + 1) / (2 * L)
        dE = ex.energy(ref.J, ref.h) - gs.energy(ref.J, ref.h)
        rows.append(
            {
                "L": L,
                "N": N,
                "counting_residual": float(np.max(np.abs(resid))),
                "energy_defect": float(abs(L * dE - 2 * math.pi * th.fermi_velocity)),
                "norm_det_defect": float(abs(fb.norm_matrix_det(gs) - lieb.fredholm_det_k(ref))),
            }
        )
    return rows

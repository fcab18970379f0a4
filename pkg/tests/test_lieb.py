import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bethe_ff import kernels as kn
from bethe_ff import lieb
from bethe_ff.acceptance import phase_charge_residuals
from bethe_ff.errors import ConditionSetViolated, NoBracket, UmklappMismatch
from bethe_ff.lieb import ExcitationSpec, ModelParams
import oracles

# Independent Nystrom oracle (tests/oracles.py, n = 200) at zeta = pi/3, J = 1, h = h_c/2.
FROZEN = {
    "q": 0.45147272974249647,
    "Z_q": 0.8906090651471434,
    "p_q": 1.1050812687763907,
    "v_F": 4.44827890508515,
    "det": 1.1692230304012092,
}


def test_grid_rules():
    g = lieb.build_grid(1.0, 2)
    assert np.allclose(np.sort(g.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert np.allclose(g.weights, 1.0)
    g = lieb.build_grid(0.7, 9)
    assert g.weights.sum() == pytest.approx(1.4, abs=1e-14)
    assert np.sum(g.weights * g.nodes**2) == pytest.approx(2 * 0.7**3 / 3, abs=1e-14)


def test_frozen_reference_values(ref_params, ref_thermo):
    q = ref_params.q
    assert q == pytest.approx(FROZEN["q"], abs=1e-12)
    assert ref_thermo.Z(q).real == pytest.approx(FROZEN["Z_q"], abs=1e-12)
    assert ref_thermo.p(q) == pytest.approx(FROZEN["p_q"], abs=1e-12)
    assert ref_thermo.fermi_velocity == pytest.approx(FROZEN["v_F"], rel=1e-8)
    assert lieb.fredholm_det_k(ref_params) == pytest.approx(FROZEN["det"], abs=1e-12)


@pytest.mark.parametrize("zeta,frac", [(0.7, 0.3), (2.2, 0.6)])
def test_against_independent_nystrom(zeta, frac):
    h = frac * lieb.critical_field(zeta, 1.0)
    ref = oracles.reference_quantities(zeta, 1.0, h, n=160)
    P = ModelParams.from_field(zeta, 1.0, h)
    th = lieb.Thermo.build(P)
    assert P.q == pytest.approx(ref["q"], abs=1e-10)
    assert th.Z(P.q).real == pytest.approx(ref["Z_q"], abs=1e-10)
    assert th.p(P.q) == pytest.approx(ref["p_q"], abs=1e-10)
    assert lieb.fredholm_det_k(P) == pytest.approx(ref["det"], abs=1e-10)


def test_charge_stable_under_refinement(ref_params):
    fine = ModelParams(ref_params.zeta, ref_params.J, ref_params.h, ref_params.q, n_quad=256)
    lam = np.linspace(-1, 1, 7)
    assert np.allclose(lieb.dressed_charge(ref_params)(lam), lieb.dressed_charge(fine)(lam), atol=1e-10)
    z = lieb.dressed_charge(ref_params)(lam).real
    assert np.all((z > 0.5) & (z <= 1.0 + 1e-12))


def test_momentum_properties(ref_params, ref_thermo):
    lam = np.linspace(-4, 4, 81)
    assert np.all(ref_thermo.pprime(lam).real > 0)
    assert ref_thermo.p(0.0) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(ref_thermo.p(lam), -ref_thermo.p(-lam), atol=1e-13)
    D = ref_thermo.p(ref_params.q) / math.pi
    assert 0 < D < 0.5


def test_energy_sign_pattern(ref_params, ref_thermo):
    q = ref_params.q
    assert abs(ref_thermo.eps(q)) < 1e-10
    inside = np.linspace(-q, q, 100)[1:-1]
    outside = np.concatenate([np.linspace(-6, -q, 50)[:-1], np.linspace(q, 6, 50)[1:]])
    assert np.all(ref_thermo.eps(inside).real < 0)
    assert np.all(ref_thermo.eps(outside).real > 0)


def test_boundary_monotone_in_field():
    z = 1.1
    hc = lieb.critical_field(z, 1.0)
    qs = [lieb.fermi_boundary(z, 1.0, f * hc) for f in (0.05, 0.3, 0.6, 0.9, 0.99)]
    assert all(a > b for a, b in zip(qs, qs[1:]))
    assert qs[-1] < 0.2


def test_boundary_outer_solvers_agree():
    a = lieb.fermi_boundary(math.pi / 3, 1.0, 1.0, method="brentq")
    b = lieb.fermi_boundary(math.pi / 3, 1.0, 1.0, method="bisect")
    assert a == pytest.approx(b, abs=1e-9)


def test_boundary_outside_range():
    with pytest.raises(NoBracket):
        lieb.fermi_boundary(1.0, 1.0, 1.01 * lieb.critical_field(1.0, 1.0))


def test_filling_round_trip(ref_params, ref_thermo):
    D = ref_thermo.p(ref_params.q) / math.pi
    P = lieb.params_for_filling(ref_params.zeta, 1.0, D)
    assert P.q == pytest.approx(ref_params.q, abs=1e-10)
    assert P.h == pytest.approx(ref_params.h, abs=1e-8)


@given(st.floats(0.45, 2.55), st.floats(0.15, 0.85))
def test_phase_charge_identities(zeta, frac):
    P = ModelParams.from_field(zeta, 1.0, frac * lieb.critical_field(zeta, 1.0), n_quad=96)
    assert max(phase_charge_residuals(P, [-1.1, 0.0, 0.6])) < 1e-8


def test_free_fermion_point():
    z = math.pi / 2
    P = ModelParams.from_field(z, 1.0, 1.3)
    lam = np.linspace(-2, 2, 11)
    assert np.allclose(lieb.dressed_charge(P)(lam), 1.0, atol=1e-14)
    assert np.allclose(lieb.resolvent(lam, 0.3, P), 0.0, atol=1e-14)
    assert lieb.fredholm_det_k(P) == pytest.approx(1.0, abs=1e-14)


def test_resolvent_symmetric_and_inverse(ref_params):
    lam, mu = 0.17, -0.32
    assert lieb.resolvent(lam, mu, ref_params) == pytest.approx(lieb.resolvent(mu, lam, ref_params), abs=1e-11)
    # (id - R)(id + K) f = f at one point for f = tanh
    g = lieb.build_grid(ref_params.q, 200)
    f = np.tanh
    Kf = lambda x: np.sum(g.weights * kn.kernel_k(x - g.nodes, ref_params.zeta).real * f(g.nodes))
    gvals = np.array([f(x) + Kf(x) for x in g.nodes])
    x0 = 0.2
    # R(x0, s) = R(s, x0) by the symmetry checked above
    r_row = np.real(lieb.resolvent(g.nodes, x0, ref_params))
    back = f(x0) + Kf(x0) - np.sum(g.weights * r_row * gvals)
    assert back == pytest.approx(f(x0), abs=1e-9)


def test_string_density_r1_is_pprime(ref_params, ref_thermo):
    w = np.array([0.3, 1.5 + 0.2j])
    assert np.allclose(lieb.string_momentum_density(w, 1, ref_params, ref_thermo.pprime), ref_thermo.pprime(w),
                       atol=1e-12)


def test_string_momentum_two_routes(ref_params, ref_thermo):
    """Direct shifted sum and theta_{r,1} resummation differ by a constant multiple of p(q)."""
    w = np.array([0.7, 1.3, 2.0])
    a = lieb.string_momentum(w, 2, ref_params, ref_thermo.p)
    b = lieb.string_momentum_resummed(w, 2, ref_params, ref_thermo.p)
    d = a - b
    assert np.allclose(d, d[0], atol=1e-10)
    assert abs(d[0].imag) < 1e-10
    ratio = d[0].real / ref_thermo.p(ref_params.q)
    assert abs(ratio - round(ratio)) < 1e-8


def test_string_energy_signs(ref_params, ref_thermo):
    q = ref_params.q
    inside = np.linspace(-0.9 * q, 0.9 * q, 7)
    assert np.allclose(lieb.string_energy(inside, 1, ref_params, ref_thermo.eps), ref_thermo.eps(inside), atol=1e-12)
    assert np.all(ref_thermo.eps(inside).real < 0)
    c = np.linspace(-3, 3, 25)
    assert np.all(lieb.string_energy(c, 2, ref_params, ref_thermo.eps).real > 0)


def test_condition_warning():
    assert lieb.condition_set_holds(1.0, 3, False)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        z = 2.0
        P = ModelParams.from_field(z, 1.0, 0.5 * lieb.critical_field(z, 1.0))
        for r in range(2, 6):
            if not lieb.condition_set_holds(z, r, False):
                lieb.string_energy(0.3, r, P)
                break
        else:
            pytest.skip("all string lengths satisfy the conditions at this zeta")
    assert any(issubclass(w.category, ConditionSetViolated) for w in rec)


def test_t_operator_reproduces_energy_and_momentum(ref_params, ref_thermo):
    z, J, h = ref_params.zeta, ref_params.J, ref_params.h
    lam = np.linspace(-1.2, 1.2, 9)
    te = lieb.t_operator(lambda x: lieb.bare_energy(x, z, J, h), ref_params)
    assert np.allclose(te(lam), ref_thermo.eps(lam), atol=1e-10)
    tp = lieb.t_operator(lambda x: kn.bare_phase(np.asarray(x, dtype=complex), z / 2), ref_params)
    assert np.allclose(tp(lam), ref_thermo.p(lam), atol=1e-10)


def test_excitation_observables(ref_params, ref_thermo):
    E, P = lieb.excitation_observables(ExcitationSpec(), ref_params, thermo=ref_thermo)
    assert E == 0 and P == 0
    mu = 0.2
    E, _ = lieb.excitation_observables(ExcitationSpec(holes_off=(mu,)), ref_params, thermo=ref_thermo)
    assert E.real == pytest.approx(-ref_thermo.eps(mu).real, abs=1e-12) and E.real > 0
    E, _ = lieb.excitation_observables(ExcitationSpec(string_centers=((2, 0.4),)), ref_params, thermo=ref_thermo)
    assert E.real == pytest.approx(lieb.string_energy(0.4, 2, ref_params).real, abs=1e-12) and E.real > 0


def test_edge_excitation_energy_law(ref_params, ref_thermo):
    spec = ExcitationSpec(massless={"p_R": (2,), "h_R": (1,)})
    E, P = lieb.excitation_observables(spec, ref_params, L=100, thermo=ref_thermo)
    assert E.real == pytest.approx(2 * math.pi * ref_thermo.fermi_velocity / 100 * (2 + 1 + 1), rel=1e-12)
    assert P.real == pytest.approx(2 * math.pi / 100 * 4, rel=1e-12)


def test_umklapp_must_match_edge_counts():
    with pytest.raises(UmklappMismatch):
        ExcitationSpec(umklapp=(0, 1))
    ExcitationSpec(umklapp=(-1, 1), massless={"h_L": (0,), "p_R": (0,)})

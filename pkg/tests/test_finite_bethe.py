import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bethe_ff import finite_bethe as fb
from bethe_ff import lieb
import ed_oracle as ed

Z3 = math.pi / 3


# ---------------------------------------------------------------- solver

def test_symmetric_ground_state():
    st_ = fb.solve_state(8, 2, zeta=Z3)
    assert st_.roots[0] == pytest.approx(-st_.roots[1], abs=1e-13)


def test_residual_and_counting_at_roots():
    st_ = fb.solve_state(64, 16, zeta=Z3)
    assert st_.residual <= 1e-12
    xi = np.real(fb.counting_function(st_, st_.roots))
    assert np.allclose(xi, np.arange(1, 17) / 64, atol=1e-12)
    grid = np.linspace(-4, 4, 400)
    assert np.min(np.real(fb.counting_prime(st_, grid))) > 0


def test_particle_hole_crosses_fermi_sea():
    gs = fb.solve_state(40, 10, zeta=Z3)
    qn = list(gs.quantum_numbers)
    qn[-1] += 1
    ex = fb.solve_state(40, 10, quantum_numbers=qn, zeta=Z3)
    outside = ex.roots > gs.roots[-1]
    assert outside.sum() == 1 and outside[-1]


@pytest.mark.parametrize("zeta,N", [(Z3, 3), (1.2, 4), (2.0, 3)])
def test_energies_match_exact_diagonalization(zeta, N):
    L, J, h = 10, 1.0, 0.4
    H, _, _ = ed.hamiltonian(L, N, zeta, J, h)
    w = np.linalg.eigvalsh(H)
    gs = fb.solve_state(L, N, zeta=zeta)
    assert gs.energy(J, h) == pytest.approx(w.min(), abs=1e-10)
    ex = fb.solve_state(L, N, quantum_numbers=fb.particle_hole_numbers(N, [N], [N + 1]), zeta=zeta)
    assert np.min(np.abs(w - ex.energy(J, h))) < 1e-10


def test_particle_hole_numbers():
    assert fb.particle_hole_numbers(4, [4], [6]) == (1, 2, 3, 6)
    with pytest.raises(ValueError):
        fb.particle_hole_numbers(4, [4], [2])


# ---------------------------------------------------------------- norm matrix

def test_norm_det_free_fermion_is_one():
    st_ = fb.solve_state(30, 9, zeta=math.pi / 2)
    assert fb.norm_matrix_det(st_) == pytest.approx(1.0, abs=1e-13)


def test_norm_det_relabel_invariant():
    st_ = fb.solve_state(24, 7, zeta=Z3)
    M = fb.norm_matrix(st_)
    perm = np.random.default_rng(0).permutation(7)
    assert np.linalg.det(M[np.ix_(perm, perm)]) == pytest.approx(np.linalg.det(M), rel=1e-12)
    assert fb.norm_matrix_det(st_) > 0


def test_norm_det_approaches_fredholm(ref_params):
    D = lieb.Thermo.build(ref_params).p(ref_params.q) / math.pi
    L = 256
    N = round(L * D)
    ref = lieb.params_for_filling(ref_params.zeta, 1.0, N / L)
    diff = abs(fb.norm_matrix_det(fb.solve_state(L, N, zeta=ref_params.zeta)) - lieb.fredholm_det_k(ref))
    assert diff < 1e-4


# ---------------------------------------------------------------- Delta identities

def _instance(rng, N):
    P = rng.normal(size=N) + 1j * rng.normal(size=N)
    X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    X = X + X.T
    np.fill_diagonal(X, 0)
    return P, X


def test_delta_single():
    P = np.array([2.5 - 1j])
    X = np.zeros((1, 1))
    assert all(v == pytest.approx(P[0]) for v in fb.delta_det_identity(P, X, [1]))


@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.data())
def test_delta_three_way(N, seed, data):
    rng = np.random.default_rng(seed)
    P, X = _instance(rng, N)
    blocks, left = [], N
    while left:
        b = data.draw(st.integers(1, min(4, left)))
        blocks.append(b)
        left -= b
    d, rw, bl = fb.delta_det_identity(P, X, blocks)
    assert abs(rw - d) <= 1e-10 * abs(d)
    assert abs(bl - d) <= 1e-10 * abs(d)


def test_delta_leading_factorization():
    rng = np.random.default_rng(1)
    P, X = _instance(rng, 5)
    for a, b in ((0, 1), (2, 3), (3, 4)):
        X[a, b] = X[b, a] = 1e6 * (1 + rng.random())
    rel = abs(fb.delta_block_leading(P, X, [2, 3]) / fb.delta_direct(P, X) - 1)
    assert rel < 1e-4


def test_delta_rejects_bad_X():
    P = np.ones(3)
    X = np.ones((3, 3))
    with pytest.raises(ValueError):
        fb.delta_det_identity(P, X)


# ---------------------------------------------------------------- form factors vs ED

@pytest.mark.parametrize("qn", [(1, 2, 3, 4), (0, 1, 2, 3), (1, 2, 3, 5), (0, 2, 3, 4)])
def test_plus_form_factor_matches_ed(qn):
    L, N, J, h = 10, 3, 1.0, 0.7
    gs = fb.solve_state(L, N, zeta=Z3)
    ex = fb.solve_state(L, N + 1, qn, zeta=Z3)
    vl, stl, il = ed.eigenstate(L, N, Z3, J, h, gs.energy(J, h), gs.momentum)
    vu, stu, _ = ed.eigenstate(L, N + 1, Z3, J, h, ex.energy(J, h), ex.momentum)
    amp = np.vdot(vl, ed.sigma_plus_site0(vu, stu, il, len(stl)))
    ff = fb.finite_form_factor(gs, ex, "+")
    assert ff.real == pytest.approx(abs(amp) ** 2, rel=1e-10)
    assert abs(ff.imag) < 1e-12


@pytest.mark.parametrize("zeta", [1.2, 2.0])
@pytest.mark.parametrize("qn", [(1, 2, 4), (0, 2, 3), (0, 1, 2)])
def test_z_form_factor_matches_ed(zeta, qn):
    L, N, J, h = 10, 3, 1.0, 0.3
    gs = fb.solve_state(L, N, zeta=zeta)
    ex = fb.solve_state(L, N, qn, zeta=zeta)
    vl, stl, _ = ed.eigenstate(L, N, zeta, J, h, gs.energy(J, h), gs.momentum)
    vu, _, _ = ed.eigenstate(L, N, zeta, J, h, ex.energy(J, h), ex.momentum)
    amp = np.vdot(vu, ed.sigma_z_site0(vl, stl))
    exact = fb.finite_form_factor(gs, ex, "z", method="exact")
    fd = fb.finite_form_factor(gs, ex, "z", method="fd")
    assert exact.real == pytest.approx(abs(amp) ** 2, rel=1e-9)
    assert fd.real == pytest.approx(abs(amp) ** 2, rel=1e-5)


def test_z_diagonal_is_magnetization_squared():
    L, N = 12, 4
    gs = fb.solve_state(L, N, zeta=Z3)
    val = fb.finite_form_factor(gs, gs, "z")
    assert val.real == pytest.approx((1 - 2 * N / L) ** 2, rel=1e-6)


def test_b_circle_node_counts_agree():
    gs = fb.solve_state(12, 4, zeta=Z3)
    ex = fb.solve_state(12, 5, (1, 2, 3, 4, 6), zeta=Z3)
    assert fb.finite_form_factor(gs, ex, "+", validate=True) == pytest.approx(
        fb.finite_form_factor(gs, ex, "+", b_nodes=8), rel=1e-8)


def test_phase_period():
    gs = fb.solve_state(12, 4, zeta=Z3)
    ex = fb.solve_state(12, 5, (0, 1, 2, 4, 5), zeta=Z3)
    a = fb.finite_form_factor(gs, ex, "+", m=1)
    b = fb.finite_form_factor(gs, ex, "+", m=1 + 12)
    assert abs(a) == pytest.approx(abs(b), rel=1e-12)


def test_gamma_cardinality_checks():
    gs = fb.solve_state(12, 4, zeta=Z3)
    with pytest.raises(ValueError):
        fb.finite_form_factor(gs, gs, "+")
    with pytest.raises(ValueError):
        fb.finite_form_factor(gs, fb.solve_state(12, 5, zeta=Z3), "z")


# ---------------------------------------------------------------- scaling helpers

@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_loglog_slope_exact_power(a, c):
    xs = [16, 32, 64, 128]
    slope, err = fb.loglog_slope(xs, [c * x**a for x in xs])
    assert slope == pytest.approx(a, abs=1e-10)
    assert err < 1e-8


def test_scaling_report_structure():
    def family(L):
        gs = fb.solve_state(L, L // 4, zeta=Z3)
        ex = fb.solve_state(L, L // 4 + 1, zeta=Z3)
        return gs, ex, 1.0
    rep = fb.scaling_report(family, [8, 16], "+")
    assert [r.L for r in rep["rows"]] == [8, 16]
    assert rep["rows"][0].ratio == rep["rows"][0].value_finite
    assert rep["slope_asymptotic"][0] == pytest.approx(0.0, abs=1e-14)

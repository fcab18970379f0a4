import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate

from bethe_ff import kernels as kn
from bethe_ff.errors import PoleHit
from oracles import lieb_kernel

zetas = st.floats(0.15, math.pi - 0.15)
points = st.tuples(st.floats(-3, 3), st.floats(-0.1, 0.1)).map(lambda t: complex(*t))


def _evaluate(f, *args, **kw):
    """Reject draws that land on a pole."""
    try:
        return f(*args, **kw)
    except PoleHit:
        assume(False)


@given(points, zetas)
def test_kernel_matches_definition(w, eta):
    a = complex(kn.kernel_k(w, eta))
    b = complex(lieb_kernel(w, eta))
    assert abs(a - b) <= 1e-12 * max(1, abs(b))


@given(points, zetas)
def test_kernel_even_and_coth_form(w, eta):
    k = complex(kn.kernel_k(w, eta))
    assert abs(k - complex(kn.kernel_k(-w, eta))) <= 1e-12 * max(1, abs(k))
    assert abs(k - complex(kn.kernel_k_coth(w, eta))) <= 1e-12 * max(1, abs(k))


@pytest.mark.parametrize("eta", [0.3, 1.0, math.pi / 2, 2.4])
def test_kernel_total_weight(eta):
    # int_R K(l|eta) dl = 1 - 2 eta / pi
    val = integrate.quad(lambda x: kn.kernel_k(x, eta).real, -np.inf, np.inf, epsabs=1e-13)[0]
    assert val == pytest.approx(1 - 2 * eta / math.pi, abs=1e-10)


@given(st.floats(-2.5, 2.5), zetas)
def test_phase_derivative_is_2pi_kernel(x, eta):
    h = 1e-5
    d = (kn.bare_phase_real(x + h, eta) - kn.bare_phase_real(x - h, eta)) / (2 * h)
    assert d == pytest.approx(2 * math.pi * kn.kernel_k(x, eta).real, rel=1e-6, abs=1e-8)


@given(st.floats(-3, 3), zetas)
def test_phase_real_odd_and_complex_agrees(x, eta):
    assert kn.bare_phase_real(x, eta) == pytest.approx(-kn.bare_phase_real(-x, eta), abs=1e-13)
    assert complex(kn.bare_phase(x, eta)).real == pytest.approx(kn.bare_phase_real(x, eta), abs=1e-11)


@given(st.integers(1, 5), st.integers(1, 5), zetas, st.lists(points, min_size=3, max_size=3))
def test_krs_sum_equals_reduced(r, s, zeta, ws):
    w = np.array(ws)
    a = _evaluate(kn.kernel_krs, w, r, s, zeta, method="sum")
    b = _evaluate(kn.kernel_krs, w, r, s, zeta, method="reduced")
    assert np.all(np.abs(a - b) <= 1e-10 * np.maximum(1, np.abs(a)))


@given(st.integers(1, 5), st.integers(1, 5), zetas, st.lists(points, min_size=3, max_size=3))
def test_phi_product_equals_reduced(r, p, zeta, ws):
    w = np.array(ws)
    a = _evaluate(kn.phi_rp, w, r, p, zeta, method="product")
    b = _evaluate(kn.phi_rp, w, r, p, zeta, method="reduced")
    assert np.all(np.abs(a - b) <= 1e-10 * np.maximum(1, np.abs(a)))


def test_k11_is_plain_kernel():
    w = np.linspace(-2, 2, 9) + 0.1j
    assert np.allclose(kn.kernel_krs(w, 1, 1, 0.7), kn.kernel_k(w, 0.7), atol=1e-14)


def test_string_offsets():
    assert np.allclose(kn.string_offsets(3), [1, 0, -1])
    assert np.allclose(kn.string_offsets(2), [0.5, -0.5])


@pytest.mark.parametrize("zeta,r,expected", [(1.0, 1, 0), (1.0, 2, 0), (1.0, 3, -1), (2.5, 2, 2)])
def test_m_r_values(zeta, r, expected):
    # 2 - r - delta_r1 + 2 floor(zeta (r-1) / 2pi) + 2 floor(zeta (r+1) / 2pi), evaluated by hand
    assert kn.m_r(zeta, r) == expected


def test_sign_flip_is_detected():
    """The two arrangements disagree once one of them is corrupted."""
    w = np.linspace(-1, 1, 7) + 0.05j
    flipped = -kn.kernel_k_coth(w, 0.8)
    assert np.max(np.abs(kn.kernel_k(w, 0.8) - flipped)) > 1e-3

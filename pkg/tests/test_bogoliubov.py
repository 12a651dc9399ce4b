import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import solve_continuous_lyapunov

from kerrcavity import bogoliubov as bg
from kerrcavity import errors
from kerrcavity import meanfield as mf
from kerrcavity.model import FrameSpec, SystemParams

ANHARMONIC = SystemParams.three_mode(0.0, 1.0, 2.0, delta_d=5.0, spacing=7.5)


@pytest.fixture(scope="module")
def lc():
    return mf.census(ANHARMONIC, n_seeds=12, rng_seed=2).stable_limit_cycles[0]


@pytest.fixture(scope="module")
def lc_bm(lc):
    return bg.build_m(lc, ANHARMONIC, FrameSpec("local_oscillator", lc.omega_lc))


@pytest.fixture(scope="module")
def stable_fp():
    p = SystemParams.three_mode(-3.0, 1.0, 1.0)
    fps = [f for f in mf.find_fixed_points(p, n_seeds=8, rng_seed=0) if f.stable]
    return p, fps[0]


def _swap(n):
    z, e = np.zeros((n, n)), np.eye(n)
    return np.block([[z, e], [e, z]])


def test_conjugation_symmetry_and_kernel(lc_bm):
    s = _swap(3)
    assert np.allclose(s @ lc_bm.M.conj() @ s, lc_bm.M, atol=1e-12)
    ev, kernel = bg.excitation_spectrum(lc_bm)
    assert kernel and np.sum(np.abs(ev) < 1e-8) == 1
    assert np.all(ev[np.abs(ev) > 1e-8].real < 0)
    v = bg.goldstone_vector(lc_bm.alpha)
    assert np.linalg.norm(lc_bm.M @ v) < 1e-9 * np.linalg.norm(v)


def test_limit_cycle_requires_local_oscillator_frame(lc):
    with pytest.raises(errors.FrameMismatch):
        bg.build_m(lc, ANHARMONIC, FrameSpec("laser"))


def test_rotating_orbit_is_not_a_laser_frame_fixed_point(lc):
    with pytest.raises(errors.FrameMismatch):
        bg.build_m(lc.alpha, ANHARMONIC, FrameSpec("laser"))
    bm = bg.build_m(lc.alpha, ANHARMONIC, FrameSpec("local_oscillator", lc.omega_lc))
    assert bg.excitation_spectrum(bm)[1]


def test_singular_at_zero_frequency(lc_bm):
    with pytest.raises(errors.SingularAtOmega):
        bg.covariance_in(lc_bm, ANHARMONIC, [0.0, 1.0])


def test_covariance_integral_solves_lyapunov(stable_fp):
    p, fp = stable_fp
    bm = bg.build_m(fp, p)
    W = 4000.0
    w = np.linspace(-W, W, 400001)
    C = bg.covariance_in(bm, p, w).C
    d = np.sqrt(2 * np.concatenate([p.gamma, p.gamma]))
    Q = np.diag(d * np.concatenate([np.ones(3), np.zeros(3)]) * d)
    # tail beyond |w| > W: integral of Q / w^2 over both sides, divided by 2 pi
    integral = np.trapezoid(C, w, axis=0) / (2 * np.pi) + Q / (np.pi * W)
    sigma = solve_continuous_lyapunov(bm.M, -Q)
    assert np.allclose(integral, sigma, atol=2e-5)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(0.3, 3.0), min_size=3, max_size=3),
       st.floats(0.0, 2.0))
def test_vacuum_output_quadratures_are_half(delta, gamma, v0):
    p = SystemParams(delta=tuple(delta), gamma=tuple(gamma), v0=v0, omega0=0.0)
    bm = bg.build_m(np.zeros(3, complex), p)
    w = np.linspace(-20, 20, 41)
    S = bg.quadrature_spectra(bg.covariance_out(bm, p, w), bg.quadrature_basis(np.zeros(3), combine=False))
    for v in S.values():
        assert np.allclose(v, 0.5, atol=1e-12)


def test_thermal_output_matches_occupation():
    p = SystemParams.single_mode(-2.0, 0.0, 0.0, n_th=0.7)
    bm = bg.build_m(np.zeros(1, complex), p)
    S = bg.quadrature_spectra(bg.covariance_out(bm, p, [0.0, 3.0]), bg.quadrature_basis(np.zeros(1)))
    assert np.allclose(S["X1"], 0.5 + 0.7, atol=1e-12)


def test_closed_form_matches_numerics(lc, lc_bm):
    w = np.linspace(-100, 100, 500)
    Cout = bg.covariance_out(lc_bm, ANHARMONIC, w)
    S = bg.quadrature_spectra(Cout, bg.quadrature_basis(lc_bm.alpha))
    sx, sp, rep = bg.goldstone_closed_form(lc_bm, ANHARMONIC, w)
    assert rep.valid
    assert rep.off_block_norm < 1e-9 and rep.kernel_column_norm < 1e-9
    assert np.allclose(S["X-"], sx, rtol=1e-8)
    assert np.allclose(S["P-"], sp, rtol=1e-8)
    rows = bg.output_quadrature_spectra(lc_bm, ANHARMONIC, w, bg.quadrature_basis(lc_bm.alpha))
    for k in S:
        assert np.allclose(rows[k], S[k], rtol=1e-9)
    small = bg.output_quadrature_spectra(lc_bm, ANHARMONIC, [1e-4, 1e-6], bg.quadrature_basis(lc_bm.alpha))
    sx0, _, _ = bg.goldstone_closed_form(lc_bm, ANHARMONIC, np.array([1e-4, 1e-6]))
    assert np.allclose(small["X-"], sx0, rtol=1e-4, atol=1e-16)
    w0 = np.logspace(-5, -3, 8)
    S0 = bg.quadrature_spectra(bg.covariance_out(lc_bm, ANHARMONIC, w0), bg.quadrature_basis(lc_bm.alpha))
    assert bg.pole_order(w0, S0["P-"]) == pytest.approx(2.0, abs=1e-3)


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=3),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.booleans())
def test_quadrature_basis_is_unitary(alpha, theta, combine):
    b = bg.quadrature_basis(np.array(alpha), theta, combine=combine)
    assert b.check() < 1e-10


def test_nonunitary_basis_rejected():
    b = bg.quadrature_basis(np.ones(3))
    b.U = 2 * b.U
    with pytest.raises(errors.NonUnitaryBasis):
        b.check()

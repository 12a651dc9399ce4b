import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from kerrcavity import errors
from kerrcavity import meanfield as mf
from kerrcavity.model import SystemParams, co_rotating

ANHARMONIC = SystemParams.three_mode(0.0, 1.0, 2.0, delta_d=5.0, spacing=7.5)
HARMONIC = SystemParams.three_mode(-3.0, 1.0, 1.85)


def _symbolic_drift(params):
    """d alpha/dt = -i dH/d alpha^* - gamma alpha from the classical energy,
    with alpha and alpha^* treated as independent symbols."""
    n = params.n_modes
    a = sp.symbols(f"a0:{n}")
    b = sp.symbols(f"b0:{n}")
    V, X, E, Om = params.v0, params.xpm, params.exch, params.omega0
    H = sum(params.delta[m] * a[m] * b[m] + sp.Rational(1, 2) * V * a[m] ** 2 * b[m] ** 2 for m in range(n))
    H += sum(X * V * a[m] * b[m] * a[k] * b[k] for m in range(n) for k in range(m + 1, n))
    if n == 3:
        H += E * V * (b[1] ** 2 * a[0] * a[2] + a[1] ** 2 * b[0] * b[2])
    p = params.p
    H += Om * (a[p] + b[p])
    f = [-sp.I * sp.diff(H, b[m]) - params.gamma[m] * a[m] for m in range(n)]
    return sp.lambdify((a, b), f, "numpy")


@pytest.mark.parametrize("params", [
    ANHARMONIC, HARMONIC, SystemParams.single_mode(-3.0, 1.0, 2.2),
    SystemParams(delta=(-1.0, 0.5, 2.0), gamma=(0.7, 1.3, 0.9), v0=0.4, omega0=1.1, xpm=1.0, exch=0.6),
])
def test_drift_matches_symbolic_oracle(params):
    f = _symbolic_drift(params)
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.normal(size=params.n_modes) + 1j * rng.normal(size=params.n_modes)
        ref = np.array(f(tuple(a), tuple(np.conj(a))), complex)
        assert np.allclose(mf.gpe_drift(a, params), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("params", [ANHARMONIC, HARMONIC, SystemParams.single_mode(-3.0, 1.0, 2.2)])
def test_jacobian_matches_finite_differences(params):
    rng = np.random.default_rng(5)
    a = rng.normal(size=params.n_modes) + 1j * rng.normal(size=params.n_modes)
    J, _ = mf.jacobian(a, params)
    n = params.n_modes
    x = np.concatenate([a.real, a.imag])
    h = 1e-6
    Jfd = np.empty_like(J)
    for k in range(2 * n):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fp = mf.gpe_drift(xp[:n] + 1j * xp[n:], params)
        fm = mf.gpe_drift(xm[:n] + 1j * xm[n:], params)
        Jfd[:, k] = np.concatenate([(fp - fm).real, (fp - fm).imag]) / (2 * h)
    assert np.allclose(J, Jfd, atol=1e-7)


@given(st.floats(0.05, 3.0), st.floats(-6.0, 2.0), st.floats(0.0, 6.0), st.floats(0.2, 3.0))
def test_cubic_roots_match_numpy(v0, d0, om, g):
    sol = mf.single_mode_cubic(v0, d0, om, g)
    ref = np.roots([v0 ** 2, 2 * d0 * v0, d0 ** 2 + g ** 2, -om ** 2])
    ref = np.sort(ref[np.abs(ref.imag) < 1e-7 * max(1.0, np.abs(ref).max())].real)
    ref = ref[ref >= -1e-12]
    if len(ref) != len(sol.roots):
        # near-degenerate pair: both solvers sit at a double root
        assert abs(sol.discriminant) < 1e-6 * max(1.0, om ** 4 * v0 ** 2)
        return
    assert np.allclose(sol.roots, ref, rtol=1e-7, atol=1e-10)


@given(st.floats(0.1, 2.0), st.floats(-6.0, -0.5), st.floats(0.1, 5.0))
def test_discriminant_sign_counts_real_roots(v0, d0, om):
    disc = mf.cubic_discriminant(v0, d0, om, 1.0)
    r = np.roots([v0 ** 2, 2 * d0 * v0, d0 ** 2 + 1.0, -om ** 2])
    n_real = int(np.sum(np.abs(r.imag) < 1e-9))
    scale = v0 ** 2 * (27 * v0 ** 2 * om ** 4 + 4)
    if abs(disc) > 1e-6 * scale:
        assert (n_real == 3) == (disc > 0)


@given(st.floats(0.1, 2.0), st.floats(-5.0, 0.0), st.floats(0.1, 4.0))
def test_cubic_stability_matches_jacobian(v0, d0, om):
    p = SystemParams.single_mode(d0, v0, om)
    sol = mf.single_mode_cubic(v0, d0, om)
    for n, stable in zip(sol.roots, sol.stable):
        a = np.array([-om / ((d0 + v0 * n) - 1j)])
        assert np.linalg.norm(mf.gpe_drift(a, p)) < 1e-8 * max(1.0, om)
        lead = mf.jacobian(a, p)[1][0].real
        if abs(lead) > 1e-7:
            assert stable == (lead < 0)


def test_stable_branches_found_by_census():
    p = SystemParams.single_mode(-3.0, 1.0, 2.2)
    fps = mf.find_fixed_points(p, n_seeds=24, rng_seed=1)
    stable = sorted(float(fp.n[0]) for fp in fps if fp.stable)
    assert stable == pytest.approx([0.8828099522501289, 3.5900574797629243], rel=1e-8)
    assert any(not fp.stable for fp in fps)


@pytest.fixture(scope="module")
def lc_anharmonic():
    c = mf.census(ANHARMONIC, n_seeds=12, rng_seed=2)
    return c.stable_limit_cycles[0]


@pytest.fixture(scope="module")
def lc_harmonic():
    c = mf.census(HARMONIC, n_seeds=16, rng_seed=2)
    return c.stable_limit_cycles[0]


def test_limit_cycle_orbits(lc_anharmonic, lc_harmonic):
    assert lc_anharmonic.period == pytest.approx(2 * math.pi / 7.5, rel=1e-8)
    assert lc_harmonic.period == pytest.approx(2 * math.pi, rel=1e-8)
    assert np.abs(lc_anharmonic.alpha) == pytest.approx([0.35965, 1.00257, 0.35965], abs=2e-5)
    assert np.abs(lc_harmonic.alpha) == pytest.approx([0.6115, 1.0050, 0.6115], abs=2e-4)


def test_polar_relations_at_limit_cycle(lc_anharmonic):
    r = mf.polar_relations_residual(lc_anharmonic.alpha, ANHARMONIC, lc_anharmonic.omega_lc)
    assert abs(r.amplitude_ratio) < 1e-8
    assert abs(r.sin_phi0) < 1e-8
    assert abs(r.drive_balance) < 1e-8
    assert abs(r.omega_lc_mismatch) < 1e-8


@given(st.floats(-math.pi, math.pi))
def test_gauge_orbit_of_limit_cycle(lc_anharmonic, theta):
    """alpha_1 e^{i theta}, alpha_3 e^{-i theta} is again a co-rotating fixed point."""
    a = lc_anharmonic.alpha * np.array([np.exp(1j * theta), 1.0, np.exp(-1j * theta)])
    q = co_rotating(ANHARMONIC, lc_anharmonic.nu)
    assert np.linalg.norm(mf.gpe_drift(a, q)) < 1e-9
    eig = mf.jacobian(a, q)[1]
    assert np.min(np.abs(eig)) < 1e-8


@given(st.floats(-math.pi, math.pi), st.integers(0, 2 ** 31))
def test_drift_is_gauge_equivariant(theta, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    U = np.array([np.exp(1j * theta), 1.0, np.exp(-1j * theta)])
    assert np.allclose(mf.gpe_drift(U * a, ANHARMONIC), U * mf.gpe_drift(a, ANHARMONIC), atol=1e-11)


def test_detect_limit_cycle_on_integrated_orbit(lc_anharmonic):
    tr = mf.integrate(lc_anharmonic.alpha, ANHARMONIC, 20.0, dt_out=0.005)
    det = mf.detect_limit_cycle(tr)
    assert det.period == pytest.approx(2 * math.pi / 7.5, rel=1e-4)
    assert 0 in det.oscillating_modes and 2 in det.oscillating_modes
    assert mf.rotation_rate(tr, 0) == pytest.approx(lc_anharmonic.nu, rel=1e-6)


def test_detect_limit_cycle_errors_and_stationary():
    t = np.linspace(0, 1, 10)
    with pytest.raises(errors.TrajectoryTooShort):
        mf.detect_limit_cycle(mf.Trajectory(t=t, alpha=np.exp(-1j * t)[:, None]))
    t = np.linspace(0, 10, 1000)
    assert mf.detect_limit_cycle(mf.Trajectory(t=t, alpha=np.ones((1000, 1), complex))) is None


def test_phase_labels():
    assert mf.phase_label(1, False) == "A"
    assert mf.phase_label(2, False) == "B"
    assert mf.phase_label(3, False) == "C"
    assert mf.phase_label(1, True) == "C"
    cell = mf.classify(SystemParams.single_mode(-3.0, 1.0, 2.2), n_seeds=16, rng_seed=0)
    assert cell.phase == "B" and cell.n_stable_fp == 2


def test_census_is_deterministic():
    a = mf.census(HARMONIC, n_seeds=6, rng_seed=9)
    b = mf.census(HARMONIC, n_seeds=6, rng_seed=9)
    assert [fp.n.tolist() for fp in a.fixed_points] == [fp.n.tolist() for fp in b.fixed_points]
    assert len(a.limit_cycles) == len(b.limit_cycles)


def test_phase_diagram_grid_shape():
    axes, grid = mf.phase_diagram(HARMONIC, {"omega0": [1.0, 1.85]}, n_seeds=6)
    assert axes == ["omega0"] and grid.shape == (2,)
    assert grid[0].phase == "A" and grid[1].lc_present


def test_parametric_threshold_location():
    th = mf.parametric_threshold(ANHARMONIC, 0.5, 4.0)
    assert 1.4 < th < 1.6
    n2 = abs(mf.pumped_only_state(ANHARMONIC.replace(omega0=th))[1]) ** 2
    assert ANHARMONIC.v0 * n2 == pytest.approx(1.0, abs=0.1)


def test_integrate_rejects_bad_time():
    with pytest.raises(ValueError):
        mf.integrate(np.zeros(1, complex), SystemParams.single_mode(-1.0), 0.0)

"""Mean-field (driven-dissipative Gross-Pitaevskii) dynamics.

Drift, with w_m the complex frequency of mode m::

    i dalpha_m/dt = (Delta_m - i gamma_m) alpha_m
                    + spm |alpha_m|^2 alpha_m + xpm sum_{n!=m} |alpha_n|^2 alpha_m
                    + exchange_m + Omega0 delta_{mp}

The same compiled kernel serves the truncated-Wigner drift through the
occupation shifts (s_spm, s_xpm): |alpha_m|^2 -> |alpha_m|^2 - s.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import optimize

from .errors import (NoConvergence, NonFiniteState, NotInLCPhase, StepSizeUnderflow,
                     TrajectoryTooShort)
from .model import SystemParams, co_rotating, validate
from .parallel import map_units, unit_rng

CLUSTER_RADIUS = 1e-4
STABILITY_TOL = 1e-9
NEWTON_TOL = 1e-10
LC_AMPLITUDE_FLOOR = 1e-6


@dataclass
class MeanFieldState:
    alpha: np.ndarray
    t: float = 0.0


@dataclass
class Trajectory:
    t: np.ndarray
    alpha: np.ndarray  # shape (n_t, n_modes)

    @property
    def n(self):
        return np.abs(self.alpha) ** 2


@dataclass
class FixedPoint:
    alpha: np.ndarray
    jacobian_eigs: np.ndarray
    stable: bool
    basin_weight: float = 0.0
    residual: float = 0.0

    @property
    def n(self):
        return np.abs(self.alpha) ** 2


@dataclass
class LimitCycle:
    """Periodic orbit; ``alpha`` is the orbit point in the co-rotating frame
    with arg(alpha_1) = 0 and ``nu`` the rotation rate of mode 1
    (alpha_1 ~ e^{-i nu t}, alpha_3 ~ e^{+i nu t})."""

    period: float
    omega_lc: float
    oscillating_modes: tuple
    mean_amplitudes: np.ndarray
    period_err: float = 0.0
    alpha: np.ndarray = None
    nu: float = None
    stable: bool = True
    basin_weight: float = 0.0
    eigs: np.ndarray = None
    polished: bool = False


@dataclass
class PhaseCell:
    coords: tuple
    n_stable_fp: int
    phase: str
    lc_present: bool
    n_attractors: int = 0
    fixed_points: list = field(default_factory=list)
    limit_cycles: list = field(default_factory=list)
    n_failed: int = 0


# ---------------------------------------------------------------------------
# compiled kernels

def pack(params, s_spm=0.0, s_xpm=0.0):
    """Flatten params into the arrays the compiled kernels expect."""
    c = params.coefficients()
    drive = np.zeros(params.n_modes, dtype=np.complex128)
    drive[params.p] = params.omega0
    return (params.delta_arr, params.gamma_arr, float(c.spm), float(c.xpm),
            np.array(c.exch, dtype=np.float64), drive, float(s_spm), float(s_xpm))


@njit(cache=True)
def drift_kernel(a, delta, gamma, spm, xpm, exch, drive, s_spm, s_xpm, out):
    n = a.shape[0]
    tot = 0.0
    for m in range(n):
        tot += a[m].real * a[m].real + a[m].imag * a[m].imag - s_xpm
    for m in range(n):
        ar = a[m].real
        ai = a[m].imag
        occ = ar * ar + ai * ai
        w = delta[m] + spm * (occ - s_spm) + xpm * (tot - (occ - s_xpm))
        g = gamma[m]
        # -i [(w - i g) a + drive]
        re = w * ar + g * ai + drive[m].real
        im = w * ai - g * ar + drive[m].imag
        out[m] = complex(im, -re)
    if n == 3:
        a1r, a1i = a[0].real, a[0].imag
        a2r, a2i = a[1].real, a[1].imag
        a3r, a3i = a[2].real, a[2].imag
        sqr = a2r * a2r - a2i * a2i
        sqi = 2.0 * a2r * a2i
        # e1 conj(a3) a2^2
        r1 = a3r * sqr + a3i * sqi
        i1 = a3r * sqi - a3i * sqr
        # e2 conj(a2) a1 a3
        pr = a1r * a3r - a1i * a3i
        pi_ = a1r * a3i + a1i * a3r
        r2 = a2r * pr + a2i * pi_
        i2 = a2r * pi_ - a2i * pr
        # e3 conj(a1) a2^2
        r3 = a1r * sqr + a1i * sqi
        i3 = a1r * sqi - a1i * sqr
        out[0] += complex(exch[0] * i1, -exch[0] * r1)
        out[1] += complex(exch[1] * i2, -exch[1] * r2)
        out[2] += complex(exch[2] * i3, -exch[2] * r3)


@njit(cache=True)
def _err_norm(y, ynew, err, rtol, atol):
    acc = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (err[i].real / sc) ** 2 + (err[i].imag / sc) ** 2
    return math.sqrt(acc / (2 * n))


@njit(cache=True)
def dopri5_kernel(y0, t_out, delta, gamma, spm, xpm, exch, drive, rtol, atol,
                  h_init, h_min, max_steps):
    """Adaptive Dormand-Prince 5(4); steps are clamped onto the output grid.

    Returns (samples, status, t_stop, n_steps); status 0 ok, 1 step-size
    underflow, 2 non-finite state, 3 step budget exhausted.
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    out = np.zeros((n_out, n), dtype=np.complex128)
    y = y0.copy()
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    k5 = np.empty(n, np.complex128)
    k6 = np.empty(n, np.complex128)
    k7 = np.empty(n, np.complex128)
    yt = np.empty(n, np.complex128)
    ynew = np.empty(n, np.complex128)
    err = np.empty(n, np.complex128)
    t = t_out[0]
    out[0] = y
    h = h_init
    drift_kernel(y, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k1)
    steps = 0
    for j in range(1, n_out):
        target = t_out[j]
        while t < target:
            if steps >= max_steps:
                return out, 3, t, steps
            last = False
            if t + h >= target:
                hh = target - t
                last = True
            else:
                hh = h
            for i in range(n):
                yt[i] = y[i] + hh * (0.2 * k1[i])
            drift_kernel(yt, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k2)
            for i in range(n):
                yt[i] = y[i] + hh * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
            drift_kernel(yt, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k3)
            for i in range(n):
                yt[i] = y[i] + hh * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i] + 32.0 / 9.0 * k3[i])
            drift_kernel(yt, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k4)
            for i in range(n):
                yt[i] = y[i] + hh * (19372.0 / 6561.0 * k1[i] - 25360.0 / 2187.0 * k2[i]
                                     + 64448.0 / 6561.0 * k3[i] - 212.0 / 729.0 * k4[i])
            drift_kernel(yt, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k5)
            for i in range(n):
                yt[i] = y[i] + hh * (9017.0 / 3168.0 * k1[i] - 355.0 / 33.0 * k2[i]
                                     + 46732.0 / 5247.0 * k3[i] + 49.0 / 176.0 * k4[i]
                                     - 5103.0 / 18656.0 * k5[i])
            drift_kernel(yt, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k6)
            for i in range(n):
                ynew[i] = y[i] + hh * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i]
                                       + 125.0 / 192.0 * k4[i] - 2187.0 / 6784.0 * k5[i]
                                       + 11.0 / 84.0 * k6[i])
            drift_kernel(ynew, delta, gamma, spm, xpm, exch, drive, 0.0, 0.0, k7)
            for i in range(n):
                err[i] = hh * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i]
                               + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                               + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
            steps += 1
            en = _err_norm(y, ynew, err, rtol, atol)
            if not math.isfinite(en):
                ok_state = True
                for i in range(n):
                    if not (math.isfinite(ynew[i].real) and math.isfinite(ynew[i].imag)):
                        ok_state = False
                if not ok_state and hh <= h_min:
                    return out, 2, t, steps
                h = 0.2 * hh
                if h < h_min:
                    return out, 2, t, steps
                continue
            if en <= 1.0:
                if last:
                    t = target
                else:
                    t = t + hh
                for i in range(n):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                if not last:
                    h = hh * fac
                else:
                    h = max(h, hh * fac) if fac >= 1.0 else h
            else:
                h = hh * max(0.2, 0.9 * en ** -0.2)
                if h < h_min:
                    return out, 1, t, steps
        out[j] = y
    return out, 0, t, steps


# ---------------------------------------------------------------------------
# drift, derivatives, integration

def _alpha(state):
    a = state.alpha if isinstance(state, MeanFieldState) else state
    return np.asarray(a, dtype=np.complex128)


def gpe_drift(state, params):
    """Mean-field drift d(alpha)/dt."""
    a = _alpha(state)
    out = np.empty_like(a)
    drift_kernel(a, *pack(params), out)
    return out


def drift_derivatives(alpha, params, s_spm=0.0, s_xpm=0.0):
    """Complex derivatives (A, B) = (df/dalpha, df/dalpha*) of the drift."""
    a = np.asarray(alpha, dtype=np.complex128)
    n = a.shape[0]
    c = params.coefficients()
    occ = np.abs(a) ** 2
    g_a = np.zeros((n, n), dtype=np.complex128)   # d g_m / d alpha_k
    g_c = np.zeros((n, n), dtype=np.complex128)   # d g_m / d alpha_k^*
    tot = np.sum(occ - s_xpm)
    for m in range(n):
        cross = tot - (occ[m] - s_xpm)
        w = params.delta[m] - 1j * params.gamma[m] + c.spm * (occ[m] - s_spm) + c.xpm * cross
        g_a[m, m] = w + c.spm * occ[m]
        g_c[m, m] = c.spm * a[m] ** 2
        for k in range(n):
            if k != m:
                g_a[m, k] += c.xpm * np.conj(a[k]) * a[m]
                g_c[m, k] += c.xpm * a[k] * a[m]
    if n == 3:
        e1, e2, e3 = c.exch
        g_a[0, 1] += 2 * e1 * np.conj(a[2]) * a[1]
        g_c[0, 2] += e1 * a[1] ** 2
        g_a[1, 0] += e2 * np.conj(a[1]) * a[2]
        g_a[1, 2] += e2 * np.conj(a[1]) * a[0]
        g_c[1, 1] += e2 * a[0] * a[2]
        g_a[2, 1] += 2 * e3 * np.conj(a[0]) * a[1]
        g_c[2, 0] += e3 * a[1] ** 2
    return -1j * g_a, -1j * g_c


def jacobian(alpha, params):
    """Real Jacobian in (Re alpha, Im alpha) coordinates and its eigenvalues
    sorted by decreasing real part."""
    A, B = drift_derivatives(alpha, params)
    P, Q = A + B, 1j * (A - B)
    J = np.block([[P.real, Q.real], [P.imag, Q.imag]])
    eigs = np.linalg.eigvals(J)
    return J, eigs[np.argsort(-eigs.real, kind="stable")]


def integrate(state0, params, t_final, rtol=1e-9, atol=1e-11, dt_out=None, n_out=None,
              max_steps=50_000_000):
    """Adaptive integration sampled on a uniform grid [t0, t0 + t_final]."""
    validate(params)
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    a0 = _alpha(state0)
    t0 = state0.t if isinstance(state0, MeanFieldState) else 0.0
    if n_out is None:
        n_out = 2 if dt_out is None else max(2, int(round(t_final / dt_out)) + 1)
    t_grid = t0 + np.linspace(0.0, t_final, n_out)
    scale = max(1.0, float(np.max(np.abs(params.delta_arr))), abs(params.omega0))
    h_init = min(1e-2, 0.1 / scale)
    out, status, t_stop, _ = dopri5_kernel(a0, t_grid, *pack(params)[:6], rtol, atol,
                                           h_init, 1e-14 * max(1.0, t_final), max_steps)
    if status == 1:
        raise StepSizeUnderflow(f"step size underflow at t={t_stop:.6g}", t=t_stop)
    if status == 2:
        raise NonFiniteState(f"state became non-finite near t={t_stop:.6g}", t=t_stop)
    if status == 3:
        raise StepSizeUnderflow(f"step budget exhausted at t={t_stop:.6g}", t=t_stop)
    return Trajectory(t=t_grid, alpha=out)


# ---------------------------------------------------------------------------
# fixed points

def _to_real(a):
    return np.concatenate([a.real, a.imag])


def _to_complex(x):
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def newton_polish(alpha, params, tol=NEWTON_TOL):
    """Newton/hybrid root solve of the drift; returns alpha or None."""
    def fun(x):
        return _to_real(gpe_drift(_to_complex(x), params))

    def jac(x):
        return jacobian(_to_complex(x), params)[0]

    sol = optimize.root(fun, _to_real(np.asarray(alpha, complex)), jac=jac, method="hybr",
                        options={"xtol": 1e-13})
    a = _to_complex(sol.x)
    if not np.all(np.isfinite(a)):
        return None
    if np.linalg.norm(gpe_drift(a, params)) > tol:
        return None
    return a


def make_fixed_point(alpha, params, basin_weight=0.0):
    _, eigs = jacobian(alpha, params)
    return FixedPoint(alpha=np.asarray(alpha, complex), jacobian_eigs=eigs,
                      stable=bool(eigs[0].real < -STABILITY_TOL), basin_weight=basin_weight,
                      residual=float(np.linalg.norm(gpe_drift(alpha, params))))


def seed_scale(params):
    """Three times the linear-cavity amplitude estimate."""
    g = params.gamma[params.p]
    lin = abs(params.omega0) / math.hypot(params.delta0, g)
    return 3.0 * max(lin, 0.1)


def _cluster(items, key, radius):
    groups = []
    for it in items:
        k = key(it)
        for g in groups:
            if np.linalg.norm(k - g[0]) < radius:
                g[1].append(it)
                break
        else:
            groups.append((k, [it]))
    return groups


# ---------------------------------------------------------------------------
# limit cycles

def _lc_residual(x, params):
    n = params.n_modes
    a = x[:n] + 1j * x[n:2 * n]
    nu = x[2 * n]
    f = gpe_drift(a, co_rotating(params, nu))
    return np.concatenate([f.real, f.imag, [a[0].imag]])


def _lc_jac(x, params):
    n = params.n_modes
    a = x[:n] + 1j * x[n:2 * n]
    nu = x[2 * n]
    J = np.zeros((2 * n + 1, 2 * n + 1))
    J[:2 * n, :2 * n] = jacobian(a, co_rotating(params, nu))[0]
    dnu = np.zeros(n, complex)
    dnu[0] = 1j * a[0]
    dnu[2] = -1j * a[2]
    J[:n, 2 * n] = dnu.real
    J[n:2 * n, 2 * n] = dnu.imag
    J[2 * n, n] = 1.0
    return J


def polish_limit_cycle(alpha, nu, params, tol=NEWTON_TOL):
    """Solve for a co-rotating orbit; returns (alpha, nu) with arg alpha_1 = 0, or None."""
    if params.n_modes != 3:
        return None
    a = np.asarray(alpha, complex).copy()
    th = np.angle(a[0])
    a[0] *= np.exp(-1j * th)
    a[2] *= np.exp(1j * th)
    x0 = np.concatenate([a.real, a.imag, [nu]])
    sol = optimize.root(_lc_residual, x0, args=(params,), jac=_lc_jac, method="hybr",
                        options={"xtol": 1e-13})
    if not np.all(np.isfinite(sol.x)):
        return None
    if np.linalg.norm(_lc_residual(sol.x, params)) > tol:
        return None
    a = sol.x[:3] + 1j * sol.x[3:6]
    if min(abs(a[0]), abs(a[2])) < 1e-6:
        return None
    return a, float(sol.x[6])


def lc_eigs(alpha, nu, params):
    """Co-rotating-frame Jacobian eigenvalues, decreasing real part."""
    return jacobian(alpha, co_rotating(params, nu))[1]


def _lc_stable(eigs):
    # one eigenvalue is the neutral gauge direction
    idx = np.argmin(np.abs(eigs))
    rest = np.delete(eigs, idx)
    return bool(rest.real.max() < -STABILITY_TOL) if rest.size else True


def _autocorr_peaks(x, dt):
    """Positions of successive autocorrelation maxima of a complex signal."""
    x = x - x.mean()
    n = x.shape[0]
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.fft(x, nfft)
    ac = np.fft.ifft(f * np.conj(f))[:n].real
    ac /= ac[0]
    ac /= (n - np.arange(n)) / n  # unbiased
    lim = n // 2
    ac = ac[:lim]
    neg = np.nonzero(ac < 0.0)[0]
    if neg.size == 0:
        return np.array([])
    peaks = []
    i = neg[0]
    while i < lim - 1:
        # next local maximum above zero
        while i < lim - 1 and not (ac[i] > 0 and ac[i] >= ac[i - 1] and ac[i] >= ac[i + 1]):
            i += 1
        if i >= lim - 1:
            break
        y0, y1, y2 = ac[i - 1], ac[i], ac[i + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        peaks.append((i + off) * dt)
        # skip to next negative lobe
        nxt = neg[neg > i]
        if nxt.size == 0:
            break
        i = nxt[0]
    return np.array(peaks)


def detect_limit_cycle(trajectory, transient_cut=0.0, min_periods=3, amplitude_floor=LC_AMPLITUDE_FLOOR):
    """Period of a sustained oscillation from the autocorrelation of alpha(t).

    The mode with the largest fluctuation is used (mode 1 in the limit-cycle
    phase). Returns None for a stationary record.
    """
    t = np.asarray(trajectory.t)
    a = np.asarray(trajectory.alpha)
    keep = t >= t[0] + transient_cut
    t, a = t[keep], a[keep]
    if t.shape[0] < 16:
        raise TrajectoryTooShort("too few samples after transient", n=int(t.shape[0]))
    dt = t[1] - t[0]
    spread = a.std(axis=0)
    scale = max(float(np.sqrt(np.mean(np.abs(a) ** 2))), 1e-300)
    m = int(np.argmax(spread))
    if spread[m] / scale < amplitude_floor:
        return None
    peaks = _autocorr_peaks(a[:, m], dt)
    if peaks.size < 1:
        raise TrajectoryTooShort("no full period within the record", duration=float(t[-1] - t[0]))
    k = np.arange(1, peaks.size + 1)
    if peaks.size >= 2:
        T, c0 = np.polyfit(k, peaks, 1)
        resid = peaks - (T * k + c0)
        dof = max(peaks.size - 2, 1)
        T_err = math.sqrt(np.sum(resid ** 2) / dof / np.sum((k - k.mean()) ** 2))
        T_err = max(T_err, dt ** 2 / T)
    else:
        T = peaks[0]
        T_err = dt
    if (t[-1] - t[0]) < min_periods * T:
        raise TrajectoryTooShort("record shorter than the requested number of periods",
                                 period=float(T))
    osc = tuple(int(i) for i in np.nonzero(spread / scale >= amplitude_floor)[0])
    return LimitCycle(period=float(T), omega_lc=2 * math.pi / T, oscillating_modes=osc,
                      mean_amplitudes=np.abs(a).mean(axis=0), period_err=float(T_err))


def rotation_rate(trajectory, mode=0):
    """-d arg(alpha_mode)/dt from a linear fit; nu in alpha ~ e^{-i nu t}."""
    ph = np.unwrap(np.angle(trajectory.alpha[:, mode]))
    slope = np.polyfit(trajectory.t - trajectory.t[0], ph, 1)[0]
    return -float(slope)


# ---------------------------------------------------------------------------
# census

@dataclass
class Census:
    fixed_points: list
    limit_cycles: list
    n_failed: int
    n_seeds: int

    @property
    def stable_fixed_points(self):
        return [fp for fp in self.fixed_points if fp.stable]

    @property
    def stable_limit_cycles(self):
        return [lc for lc in self.limit_cycles if lc.stable]

    @property
    def n_attractors(self):
        return len(self.stable_fixed_points) + len(self.stable_limit_cycles)


def _settle(a, params, t_settle, t_probe, dt_probe):
    tr = integrate(a, params, t_settle)
    a1 = tr.alpha[-1]
    probe = integrate(a1, params, t_probe, dt_out=dt_probe)
    return probe


def census(params, n_seeds=24, rng_seed=0, unit=0, t_settle=300.0, t_probe=40.0,
           dt_probe=None, seed_scale_factor=None, newton_seeds=True):
    """Attractor census from random initial conditions.

    Each seed is integrated for t_settle; the following probe window decides
    between a fixed point (Newton-polished) and a limit cycle (polished as a
    co-rotating orbit when possible). Additional Newton solves started from
    the raw seeds pick up unstable fixed points.
    """
    validate(params)
    rng = unit_rng(rng_seed, unit)
    n = params.n_modes
    scale = seed_scale(params) if seed_scale_factor is None else seed_scale_factor
    seeds = (rng.standard_normal((n_seeds, n)) + 1j * rng.standard_normal((n_seeds, n))) * scale / math.sqrt(2)
    if dt_probe is None:
        fmax = max(1.0, float(np.max(np.abs(params.delta_arr))) + abs(params.omega0))
        dt_probe = min(0.02, 0.2 / fmax)
    fps, lcs, raw_fps = [], [], []
    failed = 0
    for s in seeds:
        try:
            probe = _settle(s, params, t_settle, t_probe, dt_probe)
        except (StepSizeUnderflow, NonFiniteState):
            failed += 1
            continue
        a_end = probe.alpha[-1]
        spread = probe.alpha.std(axis=0)
        scale_a = max(float(np.sqrt(np.mean(np.abs(probe.alpha) ** 2))), 1e-12)
        if np.all(spread / scale_a < 1e-5):
            a = newton_polish(a_end, params)
            if a is None:
                failed += 1
            else:
                fps.append(a)
            continue
        lc = _classify_orbit(probe, params)
        if lc is None:
            failed += 1
        else:
            lcs.append(lc)
    if newton_seeds:
        for s in seeds:
            a = newton_polish(s, params)
            if a is not None:
                raw_fps.append(a)
    # cluster fixed points
    groups = _cluster([(a, 1) for a in fps] + [(a, 0) for a in raw_fps],
                      key=lambda it: it[0], radius=CLUSTER_RADIUS)
    fixed = []
    for k, members in groups:
        hits = sum(w for _, w in members)
        fixed.append(make_fixed_point(members[0][0], params, basin_weight=hits / n_seeds))
    fixed.sort(key=lambda fp: float(np.sum(fp.n)))
    # cluster limit cycles by gauge-invariant amplitudes
    lgroups = _cluster(lcs, key=lambda lc: np.append(lc.mean_amplitudes, lc.omega_lc),
                       radius=max(CLUSTER_RADIUS, 1e-3))
    cycles = []
    for k, members in lgroups:
        lc = members[0]
        lc.basin_weight = len(members) / n_seeds
        cycles.append(lc)
    return Census(fixed_points=fixed, limit_cycles=cycles, n_failed=failed, n_seeds=n_seeds)


def _classify_orbit(probe, params):
    """Limit cycle from a non-stationary probe window (None if undetectable)."""
    if params.n_modes == 3:
        nu0 = rotation_rate(probe, 0)
        res = polish_limit_cycle(probe.alpha[-1], nu0, params)
        if res is not None:
            a, nu = res
            eigs = lc_eigs(a, nu, params)
            T = 2 * math.pi / abs(nu) if nu != 0 else math.inf
            return LimitCycle(period=T, omega_lc=abs(nu), oscillating_modes=(0, 2),
                              mean_amplitudes=np.abs(a), alpha=a, nu=nu,
                              stable=_lc_stable(eigs), eigs=eigs, polished=True)
    try:
        lc = detect_limit_cycle(probe, 0.0, min_periods=2)
    except TrajectoryTooShort:
        return None
    return lc


def phase_label(n_attractors, lc_present):
    if lc_present or n_attractors >= 3:
        return "C"
    if n_attractors == 2:
        return "B"
    return "A"


def classify(params, coords=(), **kw):
    c = census(params, **kw)
    lc_present = len(c.stable_limit_cycles) > 0
    n_att = c.n_attractors
    return PhaseCell(coords=tuple(coords), n_stable_fp=len(c.stable_fixed_points),
                     phase=phase_label(n_att, lc_present), lc_present=lc_present,
                     n_attractors=n_att, fixed_points=c.fixed_points,
                     limit_cycles=c.limit_cycles, n_failed=c.n_failed)


def find_fixed_points(params, n_seeds=24, rng_seed=0, **kw):
    """Fixed points (stable and unstable) found from random seeds."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    return census(params, n_seeds=n_seeds, rng_seed=rng_seed, **kw).fixed_points


def _cell_job(params, axes, values, unit, n_seeds, rng_seed, kw):
    p = params
    for name, v in zip(axes, values):
        p = p.with_axis(name, v)
    return classify(p, coords=tuple(values), n_seeds=n_seeds, rng_seed=rng_seed, unit=unit, **kw)


def phase_diagram(params_template, sweep, n_seeds=16, rng_seed=0, workers=None, **kw):
    """Census over a 2D grid. ``sweep`` maps two axis names to value lists.

    Returns (axes, grid) where grid[i][j] is the PhaseCell at
    (values0[i], values1[j]).
    """
    axes = list(sweep.keys())
    if len(axes) not in (1, 2):
        raise ValueError("sweep needs one or two axes")
    for a in axes:
        if a not in ("v0", "delta0", "omega0", "delta_d"):
            raise ValueError(f"unsupported axis {a}")
    vals = [np.asarray(sweep[a], dtype=float) for a in axes]
    if len(axes) == 1:
        combos = [(v,) for v in vals[0]]
        shape = (len(vals[0]),)
    else:
        combos = [(u, v) for u in vals[0] for v in vals[1]]
        shape = (len(vals[0]), len(vals[1]))
    jobs = [(params_template, axes, c, i, n_seeds, rng_seed, kw) for i, c in enumerate(combos)]
    cells = map_units(_cell_job, jobs, workers)
    grid = np.empty(shape, dtype=object)
    for i, cell in enumerate(cells):
        grid[np.unravel_index(i, shape)] = cell
    return axes, grid


# ---------------------------------------------------------------------------
# single mode analytics and polar relations

def cubic_discriminant(v0, delta0, omega0, gamma=1.0):
    """Discriminant of V0^2 n^3 + 2 Delta0 V0 n^2 + (Delta0^2 + gamma^2) n - Omega0^2."""
    return -v0 ** 2 * (27 * v0 ** 2 * omega0 ** 4
                       + 4 * v0 * delta0 * omega0 ** 2 * (9 * gamma ** 2 + delta0 ** 2)
                       + 4 * gamma ** 2 * (gamma ** 2 + delta0 ** 2) ** 2)


def _real_cubic_roots(a, b, c, d):
    """Real roots of a x^3 + b x^2 + c x + d (a != 0), trigonometric/Cardano form."""
    b, c, d = b / a, c / a, d / a
    p = c - b * b / 3.0
    q = 2 * b ** 3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0:
        s = math.sqrt(disc)
        u = math.copysign(abs(-q / 2 + s) ** (1 / 3), -q / 2 + s)
        v = math.copysign(abs(-q / 2 - s) ** (1 / 3), -q / 2 - s)
        roots = [u + v + shift]
    elif p == 0.0:
        roots = [shift]
    else:
        r = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * r)))
        phi = math.acos(arg) / 3
        roots = [r * math.cos(phi - 2 * math.pi * k / 3) + shift for k in range(3)]
    # one Newton step each for accuracy
    out = []
    for x in roots:
        for _ in range(2):
            f = ((x + b) * x + c) * x + d
            df = (3 * x + 2 * b) * x + c
            if df != 0:
                x -= f / df
        out.append(x)
    return sorted(out)


@dataclass
class CubicSolution:
    roots: list
    discriminant: float
    stable: list


def single_mode_cubic(v0, delta0, omega0, gamma=1.0):
    """Mean photon numbers of the single driven Kerr mode.

    Roots are stable when (Delta0 + V0 n)(Delta0 + 3 V0 n) + gamma^2 > 0,
    i.e. when the Jacobian eigenvalues -gamma +- sqrt(-(Delta0+V0 n)(Delta0+3V0 n))
    have negative real part.
    """
    if v0 < 0:
        raise ValueError("V0 must be >= 0")
    disc = cubic_discriminant(v0, delta0, omega0, gamma)
    if v0 == 0:
        roots = [omega0 ** 2 / (delta0 ** 2 + gamma ** 2)]
    else:
        roots = _real_cubic_roots(v0 ** 2, 2 * delta0 * v0, delta0 ** 2 + gamma ** 2, -omega0 ** 2)
        roots = [r for r in roots if r >= -1e-12]
        roots = [max(r, 0.0) for r in roots]
    stable = [bool((delta0 + v0 * n) * (delta0 + 3 * v0 * n) + gamma ** 2 > 0) for n in roots]
    return CubicSolution(roots=roots, discriminant=disc, stable=stable)


@dataclass
class PolarResidual:
    amplitude_ratio: float
    sin_phi0: float
    phi0: float
    drive_balance: float
    omega_lc_mismatch: float = None


def polar_relations_residual(fp, params, omega_lc=None):
    """Residuals of the polar relations of a three-mode LC-phase solution.

    amplitude_ratio: |a1|^2/|a3|^2 - gamma3/gamma1
    sin_phi0:        sin(2 phi2 - phi1 - phi3) - sqrt(gamma1 gamma3)/(exch V0 |a2|^2)
    drive_balance:   imaginary part of the pumped-mode equation after
                     projection on alpha_2
    omega_lc_mismatch: detected omega_lc - (omega3 - omega1)/2 (if given)
    """
    a = fp.alpha if hasattr(fp, "alpha") else np.asarray(fp)
    a = np.asarray(a, complex)
    if params.n_modes != 3:
        raise NotInLCPhase("polar relations need three modes")
    if min(abs(a[0]), abs(a[2])) < 1e-8 or abs(a[1]) < 1e-12:
        raise NotInLCPhase("outer or pumped mode is empty")
    g1, g2, g3 = params.gamma
    phi = np.angle(a)
    phi0 = 2 * phi[1] - phi[0] - phi[2]
    r = abs(a[0]) ** 2 / abs(a[2]) ** 2 - g3 / g1
    e = params.coefficients().exch[0]
    s = math.sin(phi0) - math.sqrt(g1 * g3) / (e * abs(a[1]) ** 2)
    # pumped-mode balance: Omega0 sin(phi2) = -gamma2 |a2| - 2 e |a1||a3||a2| sin(phi0)
    # (imaginary part of the stationary mode-2 equation multiplied by e^{-i phi2})
    bal = (params.omega0 * math.sin(phi[1]) + g2 * abs(a[1])
           + 2 * e * abs(a[0]) * abs(a[2]) * abs(a[1]) * math.sin(phi0))
    mism = None
    if omega_lc is not None:
        mism = float(omega_lc - abs(params.spacing))
    return PolarResidual(amplitude_ratio=float(r), sin_phi0=float(s), phi0=float(phi0),
                         drive_balance=float(bal), omega_lc_mismatch=mism)


# ---------------------------------------------------------------------------
# parametric threshold of the three-mode system

def pumped_only_state(params, branch="low"):
    """Fixed point with the outer modes empty; the pumped mode solves the
    single-mode cubic with its own detuning and decay."""
    p = params.p
    d, g = params.delta[p], params.gamma[p]
    sol = single_mode_cubic(params.v0, d, params.omega0, g)
    roots = [n for n, s in zip(sol.roots, sol.stable) if s] or sol.roots
    n = roots[0] if branch == "low" else roots[-1]
    a = np.zeros(params.n_modes, complex)
    a[p] = -params.omega0 / ((d + params.v0 * n) - 1j * g)
    return a


def parametric_threshold(params, lo, hi, axis="omega0", tol=1e-6, n_scan=200):
    """First drive in [lo, hi] at which the pumped-only state loses stability:
    a scan for the first sign change of the leading Jacobian eigenvalue,
    refined by bisection."""

    def growth(x):
        q = params.with_axis(axis, x)
        _, eigs = jacobian(pumped_only_state(q), q)
        return float(eigs[0].real)

    xs = np.linspace(lo, hi, n_scan)
    if growth(xs[0]) > 0:
        raise NoConvergence("pumped-only state already unstable at the lower end", lo=float(lo))
    up = next((k for k, x in enumerate(xs) if growth(x) > 0), None)
    if up is None:
        raise NoConvergence("no instability inside the interval", lo=float(lo), hi=float(hi))
    lo, hi = xs[up - 1], xs[up]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if growth(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)

"""Truncated-Wigner stochastic simulation.

One complex field per mode. Ito SDE with additive noise::

    d alpha_m = A_m dt + sqrt(gamma_m (1 + 2 n_th) / 2) (dW_x + i dW_y)

where A_m is the mean-field drift with symmetric-ordering shifts
|alpha_m|^2 -> |alpha_m|^2 - 1 (self phase) and |alpha_n|^2 -> |alpha_n|^2 - 1/2
(cross phase). Samples estimate symmetric-ordered moments, so
<n> = <|alpha|^2> - 1/2.

Every trajectory owns an RNG stream keyed by (master_seed, trajectory_index).
Trajectories are grouped into fixed chunks whose partial sums are reduced in
chunk order, so results do not depend on the number of workers.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import special, stats

from .errors import (EmptyGrid, EscapeRateExceeded, InsufficientSamples, NonFiniteState,
                     NotStationary)
from .meanfield import Trajectory, drift_kernel, pack
from .model import validate
from .parallel import map_units, unit_rng

S_SPM = 1.0
S_XPM = 0.5
CHUNK = 32
BLOCK = 2048
ESCAPE_BOUND = 1e6
ESCAPE_LIMIT = 1e-3


def tw_drift(state, params):
    a = np.asarray(state.alpha if hasattr(state, "alpha") else state, dtype=np.complex128)
    out = np.empty_like(a)
    drift_kernel(a, *pack(params, S_SPM, S_XPM), out)
    return out


def noise_amplitude(params):
    """Per-mode amplitude multiplying (dW_x + i dW_y)."""
    return np.sqrt(params.gamma_arr * (1.0 + 2.0 * params.n_th) / 2.0)


def sample_initial(kind, n_modes, rng, alpha0=None, size=None):
    """Wigner samples of vacuum or a coherent state (vacuum width <|alpha|^2> = 1/2)."""
    shape = (n_modes,) if size is None else (int(size), n_modes)
    a = 0.5 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if kind == "coherent":
        a = a + np.asarray(alpha0, dtype=complex)
    elif kind != "vacuum":
        raise ValueError(f"unknown initial state {kind!r}")
    return a


# ---------------------------------------------------------------------------
# compiled stepping kernel

@njit(cache=True)
def _drift_vec(xr, xi, delta, gamma, spm, xpm, exch, dr, di, s_spm, s_xpm, fr, fi, tot):
    """Drift for many trajectories; arrays are (mode, trajectory)."""
    n, ntr = xr.shape
    for i in range(ntr):
        tot[i] = 0.0
    for m in range(n):
        for i in range(ntr):
            tot[i] += xr[m, i] * xr[m, i] + xi[m, i] * xi[m, i] - s_xpm
    for m in range(n):
        d = delta[m]
        g = gamma[m]
        for i in range(ntr):
            ar = xr[m, i]
            ai = xi[m, i]
            occ = ar * ar + ai * ai
            w = d + spm * (occ - s_spm) + xpm * (tot[i] - (occ - s_xpm))
            fr[m, i] = w * ai - g * ar + di[m]
            fi[m, i] = -(w * ar + g * ai + dr[m])
    if n == 3:
        e1, e2, e3 = exch[0], exch[1], exch[2]
        for i in range(ntr):
            a1r, a1i = xr[0, i], xi[0, i]
            a2r, a2i = xr[1, i], xi[1, i]
            a3r, a3i = xr[2, i], xi[2, i]
            sqr = a2r * a2r - a2i * a2i
            sqi = 2.0 * a2r * a2i
            r1 = a3r * sqr + a3i * sqi
            i1 = a3r * sqi - a3i * sqr
            pr = a1r * a3r - a1i * a3i
            pim = a1r * a3i + a1i * a3r
            r2 = a2r * pr + a2i * pim
            i2 = a2r * pim - a2i * pr
            r3 = a1r * sqr + a1i * sqi
            i3 = a1r * sqi - a1i * sqr
            fr[0, i] += e1 * i1
            fi[0, i] -= e1 * r1
            fr[1, i] += e2 * i2
            fi[1, i] -= e2 * r2
            fr[2, i] += e3 * i3
            fi[2, i] -= e3 * r3


@njit(cache=True)
def tw_block(alpha, noise, step0, dt, sigma, delta, gamma, spm, xpm, exch, drive, scheme,
             stride, s1, s2, s3, s4, cnt, obs_coef, obs_start, obs_stride, obs_rec,
             tavg_start, tavg, tavg_cnt, alive, escape_step, bound):
    """Advance every trajectory of a chunk by noise.shape[1] steps.

    Moments are accumulated at global steps s (after the step) with
    s % stride == 0; the observable Re(sum c_m alpha_m) is recorded every
    obs_stride steps from obs_start on. Trajectories leaving the bound are
    flagged and excluded from all later accumulation.
    """
    ntr, nst, n = noise.shape[0], noise.shape[1], alpha.shape[1]
    sq = math.sqrt(dt)
    xr = np.empty((n, ntr))
    xi = np.empty((n, ntr))
    yr = np.empty((n, ntr))
    yi = np.empty((n, ntr))
    fr = np.empty((n, ntr))
    fi = np.empty((n, ntr))
    tot = np.empty(ntr)
    dr = np.empty(n)
    di = np.empty(n)
    for m in range(n):
        dr[m] = drive[m].real
        di[m] = drive[m].imag
        for i in range(ntr):
            xr[m, i] = alpha[i, m].real
            xi[m, i] = alpha[i, m].imag
    n_rec = s1.shape[0]
    n_obs = obs_rec.shape[1]
    for k in range(nst):
        s = step0 + k + 1
        if scheme == 0:
            _drift_vec(xr, xi, delta, gamma, spm, xpm, exch, dr, di, 1.0, 0.5, fr, fi, tot)
            for m in range(n):
                sg = sigma[m] * sq
                for i in range(ntr):
                    xr[m, i] += fr[m, i] * dt + sg * noise[i, k, m, 0]
                    xi[m, i] += fi[m, i] * dt + sg * noise[i, k, m, 1]
        else:
            # semi-implicit midpoint, three fixed-point iterations
            for m in range(n):
                for i in range(ntr):
                    yr[m, i] = xr[m, i]
                    yi[m, i] = xi[m, i]
            for _ in range(3):
                _drift_vec(yr, yi, delta, gamma, spm, xpm, exch, dr, di, 1.0, 0.5, fr, fi, tot)
                for m in range(n):
                    sg = sigma[m] * sq
                    for i in range(ntr):
                        yr[m, i] = xr[m, i] + 0.5 * (fr[m, i] * dt + sg * noise[i, k, m, 0])
                        yi[m, i] = xi[m, i] + 0.5 * (fi[m, i] * dt + sg * noise[i, k, m, 1])
            for m in range(n):
                for i in range(ntr):
                    xr[m, i] = 2.0 * yr[m, i] - xr[m, i]
                    xi[m, i] = 2.0 * yi[m, i] - xi[m, i]
        rec = s % stride == 0 and s // stride < n_rec
        r = s // stride
        do_tavg = s >= tavg_start and s % stride == 0
        j = -1
        if n_obs > 0 and s >= obs_start and (s - obs_start) % obs_stride == 0:
            j = (s - obs_start) // obs_stride
            if j >= n_obs:
                j = -1
        for i in range(ntr):
            if not alive[i]:
                continue
            bad = False
            for m in range(n):
                v = xr[m, i] * xr[m, i] + xi[m, i] * xi[m, i]
                if not v <= bound * bound:
                    bad = True
            if bad:
                alive[i] = False
                escape_step[i] = s
                for m in range(n):
                    xr[m, i] = 0.0
                    xi[m, i] = 0.0
                continue
            if rec:
                cnt[r] += 1
                for m in range(n):
                    ab = xr[m, i] * xr[m, i] + xi[m, i] * xi[m, i]
                    s1[r, m] += complex(xr[m, i], xi[m, i])
                    s2[r, m] += ab
                    s3[r, m] += complex(xr[m, i] * xr[m, i] - xi[m, i] * xi[m, i],
                                        2.0 * xr[m, i] * xi[m, i])
                    s4[r, m] += ab * ab
            if do_tavg:
                tavg_cnt[i] += 1
                for m in range(n):
                    tavg[i, m] += xr[m, i] * xr[m, i] + xi[m, i] * xi[m, i]
            if j >= 0:
                v = 0.0
                for m in range(n):
                    v += obs_coef[m].real * xr[m, i] - obs_coef[m].imag * xi[m, i]
                obs_rec[i, j] = v
    for m in range(n):
        for i in range(ntr):
            alpha[i, m] = complex(xr[m, i], xi[m, i])


# ---------------------------------------------------------------------------
# ensemble engine

@dataclass
class _Plan:
    n_steps: int
    dt: float
    stride: int
    scheme: int
    obs_coef: np.ndarray
    obs_start: int
    obs_stride: int
    n_obs: int
    tavg_start: int
    init: str
    alpha0: np.ndarray
    keep_endpoints: bool


def _run_chunk(params, traj_ids, master_seed, plan):
    n = params.n_modes
    ntr = len(traj_ids)
    rngs = [unit_rng(master_seed, int(i)) for i in traj_ids]
    alpha = np.empty((ntr, n), np.complex128)
    for k, r in enumerate(rngs):
        alpha[k] = sample_initial(plan.init, n, r, plan.alpha0)
    n_rec = plan.n_steps // plan.stride + 1
    s1 = np.zeros((n_rec, n), np.complex128)
    s2 = np.zeros((n_rec, n))
    s3 = np.zeros((n_rec, n), np.complex128)
    s4 = np.zeros((n_rec, n))
    cnt = np.zeros(n_rec, np.int64)
    # record t = 0
    cnt[0] = ntr
    ab = np.abs(alpha) ** 2
    s1[0] = alpha.sum(0)
    s2[0] = ab.sum(0)
    s3[0] = (alpha ** 2).sum(0)
    s4[0] = (ab ** 2).sum(0)
    obs_rec = np.zeros((ntr, plan.n_obs))
    tavg = np.zeros((ntr, n))
    tavg_cnt = np.zeros(ntr, np.int64)
    alive = np.ones(ntr, np.bool_)
    escape_step = np.full(ntr, -1, np.int64)
    delta, gamma, spm, xpm, exch, drive, _, _ = pack(params, S_SPM, S_XPM)
    sigma = noise_amplitude(params)
    coef = plan.obs_coef if plan.obs_coef is not None else np.zeros(n, np.complex128)
    if plan.n_obs > 0 and plan.obs_start == 0:
        obs_rec[:, 0] = (coef[None, :] * alpha).real.sum(1)
    step0 = 0
    while step0 < plan.n_steps:
        nb = min(BLOCK, plan.n_steps - step0)
        noise = np.empty((ntr, nb, n, 2))
        for k, r in enumerate(rngs):
            noise[k] = r.standard_normal((nb, n, 2))
        tw_block(alpha, noise, step0, plan.dt, sigma, delta, gamma, spm, xpm, exch, drive,
                 plan.scheme, plan.stride, s1, s2, s3, s4, cnt, coef, plan.obs_start,
                 plan.obs_stride, obs_rec, plan.tavg_start, tavg, tavg_cnt, alive,
                 escape_step, ESCAPE_BOUND)
        step0 += nb
    return dict(s1=s1, s2=s2, s3=s3, s4=s4, cnt=cnt, obs=obs_rec, tavg=tavg,
                tavg_cnt=tavg_cnt, alive=alive, escape_step=escape_step,
                end=alpha if plan.keep_endpoints else None)


@dataclass
class TWEnsemble:
    params: object
    n_traj: int
    seed: int
    t: np.ndarray
    mean_alpha: np.ndarray
    mean_abs2: np.ndarray
    mean_alpha2: np.ndarray
    err_abs2: np.ndarray
    count: np.ndarray
    endpoints: np.ndarray = None
    time_avg_abs2: np.ndarray = None     # per-trajectory time averages (n_traj, N)
    n_escaped: int = 0
    escape_times: list = field(default_factory=list)
    obs: np.ndarray = None

    @property
    def n(self):
        """Photon numbers <|alpha|^2> - 1/2 per output time."""
        return self.mean_abs2 - 0.5

    @property
    def n_err(self):
        return self.err_abs2

    def stationary_n(self):
        """Steady-state photon numbers from per-trajectory time averages."""
        if self.time_avg_abs2 is None:
            raise ValueError("ensemble was run without time averaging")
        x = self.time_avg_abs2
        return x.mean(0) - 0.5, x.std(0, ddof=1) / math.sqrt(x.shape[0])

    def third_order_ratio(self):
        """Dropped SPM third-order coefficient relative to the SPM drift, per mode."""
        a = self.endpoints
        num = np.mean(0.25 * np.abs(a), axis=0)
        den = np.mean(np.abs((np.abs(a) ** 2 - 1.0) * a), axis=0)
        return num / np.maximum(den, 1e-300)


SCHEMES = {"euler": 0, "midpoint": 1}


def _simulate(params, n_traj, t_final, dt, master_seed, record_dt=None, init="vacuum",
              alpha0=None, scheme="euler", obs_coef=None, obs_start_time=0.0, obs_dt=None,
              n_obs=0, tavg_from=None, keep_endpoints=True, workers=None):
    validate(params)
    if n_traj < 2:
        raise ValueError("n_traj must be >= 2")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_final / dt))
    record_dt = t_final if record_dt is None else record_dt
    stride = max(1, int(round(record_dt / dt)))
    obs_stride = max(1, int(round((obs_dt or dt) / dt)))
    tavg_start = n_steps + 1 if tavg_from is None else int(round(tavg_from / dt))
    plan = _Plan(n_steps=n_steps, dt=float(dt), stride=stride, scheme=SCHEMES[scheme],
                 obs_coef=None if obs_coef is None else np.asarray(obs_coef, np.complex128),
                 obs_start=int(round(obs_start_time / dt)), obs_stride=obs_stride,
                 n_obs=int(n_obs), tavg_start=tavg_start, init=init,
                 alpha0=None if alpha0 is None else np.asarray(alpha0, complex),
                 keep_endpoints=keep_endpoints)
    ids = np.arange(n_traj)
    chunks = [ids[i:i + CHUNK] for i in range(0, n_traj, CHUNK)]
    parts = map_units(_run_chunk, [(params, c, master_seed, plan) for c in chunks], workers)
    return plan, parts


def _reduce(params, n_traj, master_seed, plan, parts):
    s1 = sum(p["s1"] for p in parts)
    s2 = sum(p["s2"] for p in parts)
    s3 = sum(p["s3"] for p in parts)
    s4 = sum(p["s4"] for p in parts)
    cnt = sum(p["cnt"] for p in parts)
    c = np.maximum(cnt, 1)[:, None]
    m2 = s2 / c
    var = np.maximum(s4 / c - m2 ** 2, 0.0)
    err = np.sqrt(var / np.maximum(c - 1, 1))
    alive = np.concatenate([p["alive"] for p in parts])
    esc = np.concatenate([p["escape_step"] for p in parts])
    n_esc = int((~alive).sum())
    tavg = np.concatenate([p["tavg"] for p in parts])
    tcnt = np.concatenate([p["tavg_cnt"] for p in parts])
    time_avg = None
    if np.any(tcnt > 0):
        ok = alive & (tcnt > 0)
        time_avg = tavg[ok] / tcnt[ok, None]
    ends = None
    if plan.keep_endpoints:
        ends = np.concatenate([p["end"] for p in parts])[alive]
    obs = None
    if plan.n_obs > 0:
        obs = np.concatenate([p["obs"] for p in parts])[alive]
    t = np.arange(s1.shape[0]) * plan.stride * plan.dt
    return TWEnsemble(params=params, n_traj=n_traj, seed=master_seed, t=t, mean_alpha=s1 / c,
                      mean_abs2=m2, mean_alpha2=s3 / c, err_abs2=err, count=cnt,
                      endpoints=ends, time_avg_abs2=time_avg, n_escaped=n_esc,
                      escape_times=[float(s * plan.dt) for s in esc[~alive]], obs=obs)


def ensemble_run(params, n_traj=2000, t_final=50.0, dt=1e-3, master_seed=0, record_dt=None,
                 init="vacuum", alpha0=None, scheme="euler", tavg_from=None,
                 keep_endpoints=True, workers=None, escape_limit=ESCAPE_LIMIT):
    """Ensemble of trajectories with moments on a uniform output grid."""
    plan, parts = _simulate(params, n_traj, t_final, dt, master_seed, record_dt=record_dt,
                            init=init, alpha0=alpha0, scheme=scheme, tavg_from=tavg_from,
                            keep_endpoints=keep_endpoints, workers=workers)
    ens = _reduce(params, n_traj, master_seed, plan, parts)
    if ens.n_escaped > escape_limit * n_traj:
        raise EscapeRateExceeded(f"{ens.n_escaped} of {n_traj} trajectories escaped",
                                 n_escaped=ens.n_escaped, first_time=min(ens.escape_times))
    return ens


def integrate_sde(state0, params, t_final, dt, rng, scheme="euler", record_dt=None):
    """Single trajectory from a given initial field; returns a Trajectory."""
    validate(params)
    a = np.array(state0.alpha if hasattr(state0, "alpha") else state0, dtype=np.complex128)
    n = a.shape[0]
    n_steps = int(round(t_final / dt))
    stride = max(1, int(round((record_dt or dt) / dt)))
    delta, gamma, spm, xpm, exch, drive, _, _ = pack(params, S_SPM, S_XPM)
    sigma = noise_amplitude(params)
    coef = np.zeros(n, np.complex128)
    out = [a.copy()]
    alpha = a[None, :].copy()
    alive = np.ones(1, np.bool_)
    esc = np.full(1, -1, np.int64)
    step0 = 0
    dummy_c = np.zeros((1, n), np.complex128)
    dummy_r = np.zeros((1, n))
    cnt = np.zeros(1, np.int64)
    while step0 < n_steps:
        nb = min(stride * max(1, BLOCK // stride), n_steps - step0)
        noise = rng.standard_normal((1, nb, n, 2))
        # record by advancing in stride-sized pieces
        for k0 in range(0, nb, stride):
            kk = min(stride, nb - k0)
            tw_block(alpha, noise[:, k0:k0 + kk], step0 + k0, dt, sigma, delta, gamma, spm,
                     xpm, exch, drive, SCHEMES[scheme], n_steps + 10, dummy_c, dummy_r,
                     dummy_c, dummy_r, cnt, coef, 0, 1, np.zeros((1, 0)), n_steps + 10,
                     np.zeros((1, n)), np.zeros(1, np.int64), alive, esc, ESCAPE_BOUND)
            if not alive[0]:
                raise NonFiniteState("trajectory escaped", t=float(esc[0] * dt))
            if kk == stride:
                out.append(alpha[0].copy())
        step0 += nb
    t = np.arange(len(out)) * stride * dt
    return Trajectory(t=t, alpha=np.array(out))


# ---------------------------------------------------------------------------
# number states and histograms

@dataclass
class PnEstimate:
    p: np.ndarray
    err: np.ndarray
    clipped_mass: float


def estimate_pn(samples, n_max=30, max_err=0.05, raise_on_error=True):
    """Number-state probabilities from Wigner samples of one mode."""
    a = np.asarray(samples).ravel()
    x = np.abs(a) ** 2
    ns = np.arange(n_max + 1)
    ker = 2.0 * ((-1.0) ** ns)[None, :] * np.exp(-2.0 * x)[:, None] * special.eval_laguerre(ns[None, :], 4.0 * x[:, None])
    p = ker.mean(0)
    err = ker.std(0, ddof=1) / math.sqrt(a.shape[0])
    if raise_on_error and np.any(err > max_err):
        raise InsufficientSamples("p_n error bars exceed the limit", worst=float(err.max()))
    clipped = float(-p[p < 0].sum())
    return PnEstimate(p=np.clip(p, 0.0, None), err=err, clipped_mass=clipped)


def mode_field(samples, mode):
    """Complex field of a mode index or of the superpositions 'm+' / 'm-'."""
    s = np.asarray(samples)
    if mode == "m+":
        return (s[:, 0] + s[:, 2]) / math.sqrt(2)
    if mode == "m-":
        return (s[:, 0] - s[:, 2]) / math.sqrt(2)
    return s[:, int(mode)]


@dataclass
class Histogram2D:
    x_edges: np.ndarray
    p_edges: np.ndarray
    density: np.ndarray
    outside_fraction: float


def wigner_histogram(samples, extent=(-5, 5, -5, 5), bins=(64, 64), mode=0):
    """Normalized density over (X, P) = (sqrt2 Re alpha, sqrt2 Im alpha)."""
    nx, npb = bins
    if nx < 1 or npb < 1 or not (extent[1] > extent[0] and extent[3] > extent[2]):
        raise EmptyGrid("grid has no cells")
    a = mode_field(samples, mode) if np.ndim(samples) == 2 else np.asarray(samples)
    X, P = math.sqrt(2) * a.real, math.sqrt(2) * a.imag
    H, xe, pe = np.histogram2d(X, P, bins=(nx, npb), range=((extent[0], extent[1]), (extent[2], extent[3])))
    inside = H.sum()
    if inside == 0:
        raise EmptyGrid("no samples fall inside the grid")
    area = np.outer(np.diff(xe), np.diff(pe))
    return Histogram2D(x_edges=xe, p_edges=pe, density=H / (inside * area),
                       outside_fraction=float(1.0 - inside / a.shape[0]))


def phase_statistics(samples):
    """KS p-value of arg(a1) - arg(a3) against uniform and circular spread of arg(a1) + arg(a3)."""
    s = np.asarray(samples)
    dif = np.mod(np.angle(s[:, 0]) - np.angle(s[:, 2]), 2 * np.pi)
    tot = np.angle(s[:, 0]) + np.angle(s[:, 2])
    ks = stats.kstest(dif / (2 * np.pi), "uniform")
    R_sum = abs(np.mean(np.exp(1j * tot)))
    R_dif = abs(np.mean(np.exp(1j * dif)))
    return dict(ks_pvalue=float(ks.pvalue), resultant_sum=float(R_sum), resultant_diff=float(R_dif))


# ---------------------------------------------------------------------------
# two-time correlators

OBSERVABLES = ("p_minus", "x_minus", "p_plus", "x_plus")


def observable_coefficients(observable, n_modes):
    """Coefficients c with O = Re(sum c_m alpha_m), laser-frame quadratures."""
    if not isinstance(observable, str):
        return np.asarray(observable, np.complex128)
    c = np.zeros(n_modes, np.complex128)
    s2 = math.sqrt(2)
    if observable in OBSERVABLES:
        if n_modes != 3:
            raise ValueError(f"{observable} needs three modes")
        sign = -1.0 if observable.endswith("minus") else 1.0
        rot = -1j if observable.startswith("p") else 1.0
        c[0] = rot
        c[2] = sign * rot
        return c
    if observable[0] in "xp" and observable[1:].isdigit():
        m = int(observable[1:]) - 1
        c[m] = s2 if observable[0] == "x" else -1j * s2
        return c
    raise ValueError(f"unknown observable {observable!r}")


@dataclass
class TwoTimeCorrelator:
    observable: str
    tau: np.ndarray
    g1: np.ndarray
    err: np.ndarray
    mean: float
    window: tuple
    n_traj: int


def autocorrelation(rec, n_lag):
    """Per-row time-origin-averaged products <O(t + k) O(t)>, k < n_lag."""
    rec = np.asarray(rec, float)
    L = rec.shape[1]
    nfft = 1 << int(math.ceil(math.log2(2 * L)))
    f = np.fft.rfft(rec, nfft, axis=1)
    ac = np.fft.irfft(f * np.conj(f), nfft, axis=1)[:, :n_lag]
    return ac / (L - np.arange(n_lag))[None, :]


def two_time_correlator(params, observable, tau_grid, n_traj=2000, settle_time=50.0,
                        master_seed=0, dt=1e-3, record_time=None, scheme="euler",
                        workers=None, check_stationary=True):
    """Stationary fluctuation correlator <O(t + tau) O(t)> - <O>^2 (symmetric order)."""
    tau = np.asarray(tau_grid, float)
    dtau = tau[1] - tau[0] if tau.size > 1 else dt
    if tau[0] != 0.0 or not np.allclose(np.diff(tau), dtau, rtol=1e-9, atol=1e-12):
        raise ValueError("tau grid must be uniform and start at 0")
    n_lag = tau.size
    record_time = 4.0 * tau[-1] if record_time is None else record_time
    n_obs = int(round(record_time / dtau)) + 1
    if n_obs < n_lag:
        raise ValueError("record shorter than the largest delay")
    coef = observable_coefficients(observable, params.n_modes)
    t_final = settle_time + (n_obs - 1) * dtau
    plan, parts = _simulate(params, n_traj, t_final, dt, master_seed, record_dt=t_final,
                            scheme=scheme, obs_coef=coef, obs_start_time=settle_time,
                            obs_dt=dtau, n_obs=n_obs, keep_endpoints=False, workers=workers)
    ens = _reduce(params, n_traj, master_seed, plan, parts)
    if ens.n_escaped > ESCAPE_LIMIT * n_traj:
        raise EscapeRateExceeded(f"{ens.n_escaped} of {n_traj} trajectories escaped",
                                 n_escaped=ens.n_escaped)
    rec = ens.obs
    mean = float(rec.mean())
    if check_stationary:
        _check_stationary(rec)
    ac = autocorrelation(rec, n_lag)
    g = ac.mean(0) - mean ** 2
    err = ac.std(0, ddof=1) / math.sqrt(rec.shape[0])
    return TwoTimeCorrelator(observable=str(observable), tau=tau, g1=g, err=err, mean=mean,
                             window=(settle_time, t_final), n_traj=rec.shape[0])


def _check_stationary(rec, n_win=4):
    """Compare the mean of the first and last record windows (3 sigma)."""
    L = rec.shape[1]
    w = L // n_win
    if w < 2:
        return
    first = rec[:, :w].mean(1)
    last = rec[:, -w:].mean(1)
    d = first - last
    s = d.std(ddof=1) / math.sqrt(rec.shape[0])
    if s > 0 and abs(d.mean()) > 3.0 * s:
        raise NotStationary("windowed mean of the observable drifts",
                            drift=float(d.mean()), sigma=float(s))

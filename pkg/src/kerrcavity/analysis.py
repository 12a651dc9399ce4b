"""Spectra from correlators, lineshape fits, and the thermodynamic-limit sweep.

Spectrum convention: S(omega) = int g1(tau) e^{i omega tau} dtau over the
two-sided delay axis with g1(-tau) = g1(tau)^*, so int S domega / 2pi = g1(0).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from .errors import FitDiverged, NonPositiveEnvelope, NonUniformGrid, PeakAtBoundary
from .model import Frame, FrameSpec, convert_grid, td_scale

WINDOW_ALPHA = 0.25
FIT_HALF_WIDTHS = 5.0
MAX_REL_ERR = 0.3
REFERENCE_EXPONENT = -1.0


@dataclass
class SpectrumEstimate:
    omega: np.ndarray
    S: np.ndarray
    frame: FrameSpec
    window: dict
    err: np.ndarray = None
    # kept for the inverse transform
    dtau: float = 0.0
    n_tau: int = 0


@dataclass
class LorentzianFit:
    a: float
    omega_peak: float
    gamma: float
    c: float
    cov: np.ndarray
    chi2: float
    r2: float
    window: tuple

    @property
    def gamma_err(self):
        return float(math.sqrt(max(self.cov[2, 2], 0.0)))

    @property
    def omega_peak_err(self):
        return float(math.sqrt(max(self.cov[1, 1], 0.0)))

    def __call__(self, omega):
        return lorentzian(omega, self.a, self.omega_peak, self.gamma, self.c)

    def to_dict(self):
        return {"a": self.a, "omega_peak": self.omega_peak, "gamma": self.gamma, "c": self.c,
                "cov": np.asarray(self.cov).tolist(), "chi2": self.chi2, "r2": self.r2,
                "window": list(self.window)}


@dataclass
class ExponentialFit:
    rate: float
    rate_err: float
    amplitude: float
    window: tuple


@dataclass
class PowerLawFit:
    exponent: float
    exponent_err: float
    prefactor: float
    used: np.ndarray
    reference_exponent: float = REFERENCE_EXPONENT


@dataclass
class ScalingSweep:
    N: np.ndarray
    gamma: np.ndarray
    gamma_err: np.ndarray
    omega_peak: np.ndarray
    populations: np.ndarray
    fits: list = field(default_factory=list)
    power_law: PowerLawFit = None

    @property
    def n_minus(self):
        """Mean population of the two side modes."""
        return 0.5 * (self.populations[:, 0] + self.populations[:, -1])

    def monotone_decreasing(self, n_sigma=1.0):
        g, e = self.gamma, self.gamma_err
        return bool(np.all(g[1:] - g[:-1] < n_sigma * np.hypot(e[1:], e[:-1])))


# ---------------------------------------------------------------------------
# transforms

def _uniform_step(tau):
    tau = np.asarray(tau, float)
    if tau.ndim != 1 or tau.size < 2:
        raise NonUniformGrid("need a 1-D delay grid with at least two points")
    d = np.diff(tau)
    if tau[0] != 0.0 or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12) or d[0] <= 0:
        raise NonUniformGrid("delay grid must be uniform, increasing and start at 0")
    return float(d[0])


def two_sided(g):
    """[g(-T)..g(0)..g(T)] from the one-sided correlator."""
    g = np.asarray(g, complex)
    return np.concatenate([np.conj(g[:0:-1]), g])


def taper(n_tau, alpha=WINDOW_ALPHA):
    """Symmetric Tukey taper on the two-sided delay axis."""
    if alpha <= 0:
        return np.ones(2 * n_tau - 1)
    return signal.windows.tukey(2 * n_tau - 1, alpha)


def psd_from_g1(g1, tau=None, window=WINDOW_ALPHA, frame=None, mode=None, pad=4):
    """Windowed Fourier transform of a stationary correlator.

    ``g1`` is a TwoTimeCorrelator-like object (``tau``, ``g1``, ``err``) or an
    array on ``tau``. With ``frame`` given and a mode index, the frequency axis
    is moved from the local-oscillator frame to the laser frame.
    """
    err = None
    if tau is None:
        tau, err, g = g1.tau, getattr(g1, "err", None), g1.g1
    else:
        g = g1
    dtau = _uniform_step(tau)
    g = np.asarray(g)
    n = g.size
    w = taper(n, window)
    x = two_sided(g) * w
    nfft = int(pad) * x.size
    buf = np.zeros(nfft, complex)
    # tau = 0 at index 0, negative delays wrapped to the end
    buf[:n] = x[n - 1:]
    buf[nfft - (n - 1):] = x[:n - 1]
    S = dtau * nfft * np.fft.ifft(buf)
    omega = 2 * np.pi * np.fft.fftfreq(nfft, dtau)
    order = np.argsort(omega)
    omega, S = omega[order], S[order]
    # Hermitian two-sided input: S is real up to rounding
    S_out = S.real
    spec = FrameSpec() if frame is None else (frame if isinstance(frame, FrameSpec) else FrameSpec(frame))
    if spec.frame == Frame.local_oscillator and mode is not None:
        omega = convert_grid(omega, mode, Frame.local_oscillator, Frame.laser, spec.omega_lc)
        spec = FrameSpec(Frame.laser, spec.omega_lc)
    S_err = None
    if err is not None:
        e = np.asarray(err, float)
        S_err = np.full(omega.shape, dtau * math.sqrt(2 * np.sum((w[n - 1:] * e) ** 2)))
    return SpectrumEstimate(omega=omega, S=S_out, frame=spec,
                            window={"kind": "tukey", "alpha": float(window), "pad": int(pad)},
                            err=S_err, dtau=dtau, n_tau=n)


def inverse_psd(spec, S_complex=None):
    """Windowed one-sided correlator recovered from a spectrum estimate."""
    S = spec.S if S_complex is None else S_complex
    nfft = spec.omega.size
    om = 2 * np.pi * np.fft.fftfreq(nfft, spec.dtau)
    order = np.argsort(om)
    buf = np.empty(nfft, complex)
    buf[order] = S
    g = np.fft.fft(buf) / (nfft * spec.dtau)
    return g[:spec.n_tau]


def parseval_g0(spec):
    """int S domega / 2pi, which equals g1(0) for this transform."""
    dom = spec.omega[1] - spec.omega[0]
    return float(np.sum(spec.S) * dom / (2 * np.pi))


# ---------------------------------------------------------------------------
# fits

def lorentzian(omega, a, omega_peak, gamma, c):
    return a / ((omega - omega_peak) ** 2 + gamma ** 2) + c


def _lorentzian_jac(omega, a, omega_peak, gamma, c):
    d = (omega - omega_peak) ** 2 + gamma ** 2
    return np.stack([1.0 / d, 2 * a * (omega - omega_peak) / d ** 2, -2 * a * gamma / d ** 2,
                     np.ones_like(omega)], axis=1)


def _half_width(omega, S, k):
    peak = S[k]
    base = np.min(S)
    half = base + 0.5 * (peak - base)
    lo = k
    while lo > 0 and S[lo] > half:
        lo -= 1
    hi = k
    while hi < S.size - 1 and S[hi] > half:
        hi += 1
    return max(0.5 * (omega[hi] - omega[lo]), omega[1] - omega[0])


def fit_lorentzian(spec, search=None, n_widths=FIT_HALF_WIDTHS, starts=(0.5, 1.0, 2.0)):
    """Lorentzian plus constant fitted within +-n_widths initial half-widths of the peak.

    ``search`` = (lo, hi) restricts where the peak is looked for.
    """
    omega = np.asarray(spec.omega if hasattr(spec, "omega") else spec[0], float)
    S = np.asarray(spec.S if hasattr(spec, "S") else spec[1], float)
    sel = np.ones(omega.size, bool) if search is None else (omega >= search[0]) & (omega <= search[1])
    idx = np.nonzero(sel)[0]
    if idx.size < 5:
        raise PeakAtBoundary("search range holds too few points")
    k = idx[np.argmax(S[idx])]
    if k in (idx[0], idx[-1]):
        raise PeakAtBoundary("spectral maximum on the edge of the search range",
                             omega=float(omega[k]))
    g0 = _half_width(omega, S, k)
    lo, hi = omega[k] - n_widths * g0, omega[k] + n_widths * g0
    m = (omega >= lo) & (omega <= hi)
    if m.sum() < 6:
        m = np.zeros_like(m)
        m[max(k - 3, 0):k + 4] = True
    x, y = omega[m], S[m]
    scale = float(np.max(np.abs(y))) or 1.0
    yn = y / scale
    best = None
    for f in starts:
        gi = g0 * f
        c0 = float(np.min(yn))
        p0 = [(yn.max() - c0) * gi ** 2, omega[k], gi, c0]
        try:
            p, _ = optimize.curve_fit(lorentzian, x, yn, p0=p0, jac=_lorentzian_jac,
                                      maxfev=20000, xtol=1e-14, ftol=1e-14)
        except RuntimeError:
            continue
        res = float(np.sum((lorentzian(x, *p) - yn) ** 2))
        if best is None or res < best[0]:
            J = _lorentzian_jac(x, *p)
            cov = np.linalg.pinv(J.T @ J) * res / max(x.size - 4, 1)
            best = (res, p, cov)
    if best is None:
        raise FitDiverged("no Lorentzian start converged")
    res, p, cov = best
    p = np.array(p, float)
    p[2] = abs(p[2])
    if not np.all(np.isfinite(p)) or not np.all(np.isfinite(cov)) or p[2] <= 0:
        raise FitDiverged("Lorentzian fit returned non-finite parameters")
    if not x[0] < p[1] < x[-1]:
        raise PeakAtBoundary("fitted peak outside the fit window", omega_peak=float(p[1]))
    sc = np.diag([scale, 1.0, 1.0, scale])
    cov = sc @ cov @ sc
    ss_tot = float(np.sum((yn - yn.mean()) ** 2)) or 1.0
    return LorentzianFit(a=float(p[0] * scale), omega_peak=float(p[1]), gamma=float(p[2]),
                         c=float(p[3] * scale), cov=cov, chi2=res * scale ** 2,
                         r2=1.0 - res / ss_tot, window=(float(x[0]), float(x[-1])))


def extrema_envelope(tau, g):
    """Points (tau_k, |g(tau_k)|) at the local maxima of |g|, refined by a parabola
    through log|g|. For a damped cosine these lie exactly on the decay curve."""
    y = np.abs(np.asarray(g, float))
    k, _ = signal.find_peaks(y)
    k = k[(y[k - 1] > 0) & (y[k + 1] > 0)]
    if k.size == 0:
        return np.empty(0), np.empty(0)
    l0, l1, l2 = np.log(y[k - 1]), np.log(y[k]), np.log(y[k + 1])
    den = l0 - 2 * l1 + l2
    s = np.where(den < 0, 0.5 * (l0 - l2) / np.where(den < 0, den, -1.0), 0.0)
    h = tau[1] - tau[0]
    return tau[k] + s * h, np.exp(l1 - 0.25 * (l0 - l2) * s)


def envelope(g, tau=None, method="auto"):
    """Envelope samples (tau, env) of a correlator.

    Complex correlators use |g|. Real ones that change sign use the extrema
    of |g| ("auto"/"extrema") or the analytic-signal magnitude ("hilbert").
    """
    g = np.asarray(g)
    tau = np.arange(g.size, dtype=float) if tau is None else np.asarray(tau, float)
    if np.iscomplexobj(g) and np.any(np.imag(g) != 0):
        return tau, np.abs(g)
    g = np.real(g)
    if method == "hilbert":
        return tau, np.abs(signal.hilbert(g))
    oscillating = np.count_nonzero(np.diff(np.sign(g)) != 0) >= 4
    if method == "extrema" or (method == "auto" and oscillating):
        return extrema_envelope(tau, g)
    return tau, np.abs(g)


def fit_exponential(tau, g, t_window, err=None, method="auto"):
    """Decay rate from a weighted straight-line fit to log(envelope) in t_window."""
    tau = np.asarray(tau, float)
    g = np.asarray(g)
    te, env = envelope(g, tau, method)
    m = (te >= t_window[0]) & (te <= t_window[1])
    if m.sum() < 3:
        raise NonPositiveEnvelope("fit window holds fewer than three envelope points")
    t, e = te[m], env[m]
    if np.any(~(e > 0)):
        raise NonPositiveEnvelope("envelope is not strictly positive in the fit window")
    if err is None:
        sig = np.ones(e.size)
    else:
        sig = np.maximum(np.interp(t, tau, np.asarray(err, float)) / e, 1e-12)
    # weights from the log-error sigma_log = sigma / envelope
    A = np.vstack([np.ones(e.size), t]).T
    W = 1.0 / sig ** 2
    cov = np.linalg.inv(A.T @ (A * W[:, None]))
    coef = cov @ (A.T @ (W * np.log(e)))
    if err is None:
        r = np.log(e) - A @ coef
        cov = cov * float(np.sum(r ** 2) / max(e.size - 2, 1))
    return ExponentialFit(rate=float(-coef[1]), rate_err=float(math.sqrt(max(cov[1, 1], 0.0))),
                          amplitude=float(math.exp(coef[0])), window=tuple(map(float, t_window)))


def fit_power_law(N, y, y_err, max_rel_err=MAX_REL_ERR):
    """log y = log A + k log N using points with relative error below max_rel_err."""
    N, y, y_err = (np.asarray(v, float) for v in (N, y, y_err))
    used = (y > 0) & (y_err / np.where(y > 0, y, 1.0) < max_rel_err) & np.isfinite(y_err)
    if used.sum() < 2:
        raise FitDiverged("fewer than two usable points for the power law")
    x = np.log(N[used])
    ly = np.log(y[used])
    s = np.maximum(y_err[used] / y[used], 1e-12)
    A = np.vstack([np.ones(x.size), x]).T
    W = 1.0 / s ** 2
    cov = np.linalg.inv(A.T @ (A * W[:, None]))
    coef = cov @ (A.T @ (W * ly))
    return PowerLawFit(exponent=float(coef[1]), exponent_err=float(math.sqrt(cov[1, 1])),
                       prefactor=float(math.exp(coef[0])), used=used)


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class LineResult:
    params: object
    correlator: object
    spectrum: SpectrumEstimate
    fit: LorentzianFit
    populations: np.ndarray


def line_of(params, observable="p_minus", tau_max=8.0, dtau=0.02, n_traj=2000, master_seed=0,
            settle_time=50.0, dt=1e-3, search=(0.5, np.inf), workers=None, record_factor=4.0):
    """Correlator -> spectrum -> Lorentzian for one parameter point (laser frame)."""
    from .wigner import ensemble_run, two_time_correlator

    tau = np.arange(int(round(tau_max / dtau)) + 1) * dtau
    corr = two_time_correlator(params, observable, tau, n_traj=n_traj, settle_time=settle_time,
                               master_seed=master_seed, dt=dt, record_time=record_factor * tau[-1],
                               workers=workers)
    spec = psd_from_g1(corr)
    fit = fit_lorentzian(spec, search=search)
    ens = ensemble_run(params, n_traj=max(64, n_traj // 4), t_final=settle_time + 20.0, dt=dt,
                       master_seed=master_seed + 7919, tavg_from=settle_time,
                       keep_endpoints=False, workers=workers)
    n, _ = ens.stationary_n()
    return LineResult(params=params, correlator=corr, spectrum=spec, fit=fit, populations=n)


def td_sweep(base, n_list, n_traj=2000, master_seed=0, tau_max=4.0, dtau=0.02, dt=1e-3,
             settle_time=50.0, observable="p_minus", workers=None, max_rel_err=MAX_REL_ERR):
    """Linewidth Gamma(N) under V0 -> V0/N, Omega0 -> Omega0 sqrt(N); delays grow with N."""
    n_list = np.asarray(n_list, float)
    res = []
    for k, N in enumerate(n_list):
        p = td_scale(base, N)
        res.append(line_of(p, observable, tau_max=tau_max * N, dtau=dtau, n_traj=n_traj,
                           master_seed=master_seed + 1000 * k, settle_time=settle_time, dt=dt,
                           workers=workers))
    g = np.array([r.fit.gamma for r in res])
    ge = np.array([r.fit.gamma_err for r in res])
    sweep = ScalingSweep(N=n_list, gamma=g, gamma_err=ge,
                         omega_peak=np.array([r.fit.omega_peak for r in res]),
                         populations=np.array([r.populations for r in res]),
                         fits=[r.fit for r in res])
    sweep.power_law = fit_power_law(n_list, g, ge, max_rel_err)
    return sweep, res


LINEWIDTH_N = (10.0, 2.0, 1.0)


def linewidth_table_rows(lc_base, a_base, n_list=LINEWIDTH_N, n_traj=2000, master_seed=0, tau_max=4.0,
                           dtau=0.02, dt=1e-3, settle_time=50.0, workers=None):
    """Peak position and half-width for the limit-cycle and below-threshold bases
    at V0 = base V0 / N."""
    rows = []
    for label, base in (("LC", lc_base), ("A", a_base)):
        for k, N in enumerate(n_list):
            p = td_scale(base, N)
            r = line_of(p, tau_max=tau_max * N if label == "LC" else tau_max, dtau=dtau,
                        n_traj=n_traj, master_seed=master_seed + 100 * k + (0 if label == "LC" else 50),
                        settle_time=settle_time, dt=dt, workers=workers)
            rows.append({"phase": label, "N": float(N), "v0": p.v0, "omega0": p.omega0,
                         "omega_peak": r.fit.omega_peak, "omega_peak_err": r.fit.omega_peak_err,
                         "gamma": r.fit.gamma, "gamma_err": r.fit.gamma_err})
    return rows


# ---------------------------------------------------------------------------
# dwell statistics

@dataclass
class DwellModes:
    modes: np.ndarray          # the two highest density maxima, ascending in x
    heights: np.ndarray
    all_maxima: np.ndarray
    dip: float                 # density minimum between the two largest maxima / smaller maximum
    grid: np.ndarray
    density: np.ndarray

    @property
    def bimodal(self):
        return self.modes.size >= 2 and self.dip < 0.8


def dwell_modes(x, n_grid=512, bw_method=None):
    """Maxima of a kernel density estimate of a scalar time series."""
    from scipy.stats import gaussian_kde

    x = np.asarray(x, float)
    kde = gaussian_kde(x, bw_method=bw_method)
    grid = np.linspace(x.min(), x.max(), n_grid)
    dens = kde(grid)
    k, _ = signal.find_peaks(dens)
    if dens[0] > dens[1]:
        k = np.append(0, k)
    if dens[-1] > dens[-2]:
        k = np.append(k, n_grid - 1)
    k = k[np.argsort(-dens[k])]
    top = np.sort(k[:2])
    dip = 1.0
    if top.size == 2:
        dip = float(dens[top[0]:top[1] + 1].min() / min(dens[top[0]], dens[top[1]]))
    return DwellModes(modes=grid[top], heights=dens[top], all_maxima=grid[np.sort(k)], dip=dip,
                      grid=grid, density=dens)

"""Linearized fluctuations around a mean-field solution.

Doubled basis B = (b_1..b_N, b_1^dag..b_N^dag) with dB/dt = M B + noise and
Fourier convention B(t) = int B(omega) e^{-i omega t}, so that

    C_in(w)  = (i w + M)^-1 D^1/2 N_xi D^1/2 (i w + M)^-dag
    C_out(w) = N(w) N_xi N(w)^dag,  N(w) = I + D^1/2 (i w + M)^-1 D^1/2

with D = diag(2 gamma) over both halves and N_xi = diag((1+n_th) I, n_th I).
Quadrature variances are unsymmetrized spectra <X(w) X(w)^dag>; vacuum
gives 1/2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FrameMismatch, NonUnitaryBasis, NotInLCPhase, SingularAtOmega
from .meanfield import FixedPoint, LimitCycle, drift_derivatives, gpe_drift
from .model import Frame, FrameSpec, co_rotating, validate

KERNEL_TOL = 1e-8
FRAME_TOL = 1e-6


@dataclass
class BogoliubovMatrix:
    M: np.ndarray
    frame: FrameSpec
    base_fp: object
    params: object       # params of the frame in which base_fp is stationary
    alpha: np.ndarray

    @property
    def n_modes(self):
        return self.M.shape[0] // 2


@dataclass
class CovarianceSpectrum:
    omega_grid: np.ndarray
    C: np.ndarray        # (n_omega, 2N, 2N)
    kind: str
    frame: FrameSpec = None


@dataclass
class QuadratureBasis:
    phases: np.ndarray
    theta: np.ndarray
    labels: tuple
    U: np.ndarray

    def check(self, tol=1e-10):
        err = np.linalg.norm(self.U @ self.U.conj().T - np.eye(self.U.shape[0]))
        if err > tol:
            raise NonUnitaryBasis(f"basis deviates from unitarity by {err:.3g}", error=float(err))
        return err


def _doubled(A, B):
    return np.block([[A, B], [B.conj(), A.conj()]])


def _swap(n):
    z = np.zeros((n, n))
    e = np.eye(n)
    return np.block([[z, e], [e, z]])


def build_m(fp, params, frame=None):
    """Bogoliubov matrix of the drift linearized at ``fp``.

    A LimitCycle (or any solution with rotating outer modes) must be given
    with the local-oscillator frame; its co-rotating detunings turn the
    orbit into a fixed point.
    """
    validate(params)
    frame = FrameSpec() if frame is None else frame
    if isinstance(fp, LimitCycle):
        if frame.frame != Frame.local_oscillator:
            raise FrameMismatch("limit-cycle solution needs the local-oscillator frame")
        if fp.alpha is None or fp.nu is None:
            raise NotInLCPhase("limit cycle was not polished to a co-rotating orbit")
        eff = co_rotating(params, fp.nu)
        alpha = np.asarray(fp.alpha, complex)
    else:
        alpha = np.asarray(fp.alpha if isinstance(fp, FixedPoint) else fp, complex)
        if frame.frame == Frame.laser or frame.omega_lc == 0.0:
            eff = params
        else:
            cands = [co_rotating(params, s * frame.omega_lc) for s in (1.0, -1.0)]
            res = [np.linalg.norm(gpe_drift(alpha, p)) for p in cands]
            eff = cands[int(np.argmin(res))]
        if np.linalg.norm(gpe_drift(alpha, eff)) > FRAME_TOL:
            raise FrameMismatch("solution is not stationary in the requested frame",
                                residual=float(np.linalg.norm(gpe_drift(alpha, eff))))
    A, B = drift_derivatives(alpha, eff)
    M = _doubled(A, B)
    n = alpha.shape[0]
    s = _swap(n)
    assert np.allclose(s @ M.conj() @ s, M, atol=1e-12), "doubled-basis conjugation symmetry"
    return BogoliubovMatrix(M=M, frame=frame, base_fp=fp, params=eff, alpha=alpha)


def excitation_spectrum(M, kernel_tol=KERNEL_TOL):
    """Eigenvalues sorted by decreasing real part and a kernel flag."""
    M = M.M if isinstance(M, BogoliubovMatrix) else M
    ev = np.linalg.eigvals(M)
    ev = ev[np.lexsort((ev.imag, -ev.real))]
    return ev, bool(np.min(np.abs(ev)) < kernel_tol)


def goldstone_vector(alpha):
    """Gauge direction (alpha_1, 0, -alpha_3, -alpha_1^*, 0, alpha_3^*)."""
    a = np.asarray(alpha, complex)
    return np.array([a[0], 0.0, -a[2], -np.conj(a[0]), 0.0, np.conj(a[2])])


def _noise(params):
    g = np.asarray(params.gamma, float)
    d = np.sqrt(np.concatenate([2 * g, 2 * g]))
    n = g.shape[0]
    nx = np.concatenate([np.full(n, 1.0 + params.n_th), np.full(n, params.n_th)])
    return d, nx


def _resolvents(bm, omega_grid):
    M = bm.M if isinstance(bm, BogoliubovMatrix) else bm
    w = np.asarray(omega_grid, float)
    _, kernel = excitation_spectrum(M)
    if kernel and np.any(np.abs(w) < 1e-14):
        raise SingularAtOmega("omega = 0 hits the kernel of M")
    eye = np.eye(M.shape[0])
    R = np.linalg.inv(1j * w[:, None, None] * eye + M[None])
    return w, R


def covariance_in(bm, params, omega_grid):
    w, R = _resolvents(bm, omega_grid)
    d, nx = _noise(params)
    K = R * d[None, None, :]
    C = np.einsum("wij,j,wkj->wik", K, nx, K.conj())
    return CovarianceSpectrum(omega_grid=w, C=C, kind="in_cavity",
                              frame=getattr(bm, "frame", None))


def n_matrix(bm, params, omega_grid):
    w, R = _resolvents(bm, omega_grid)
    d, _ = _noise(params)
    return w, np.eye(R.shape[1])[None] + d[None, :, None] * R * d[None, None, :]


def covariance_out(bm, params, omega_grid):
    w, N = n_matrix(bm, params, omega_grid)
    _, nx = _noise(params)
    C = np.einsum("wij,j,wkj->wik", N, nx, N.conj())
    return CovarianceSpectrum(omega_grid=w, C=C, kind="output",
                              frame=getattr(bm, "frame", None))


def quadrature_basis(alpha, theta=None, combine=True):
    """Quadratures aligned with the mean-field phases.

    c_m = b_m e^{-i(phi_m + theta_m)}; for three modes with combine=True the
    order is (X2, P2, X+, P+, X-, P-) with
    d_+ = (|a1| c_1 + |a3| c_3)/r and its orthogonal complement
    d_- = (|a3| c_1 - |a1| c_3)/r, r = sqrt(|a1|^2 + |a3|^2), which reduces to
    (c_1 - c_3)/sqrt2 on a limit cycle where |a1| = |a3|; otherwise
    (X1, P1, X2, P2, ...). X = (d + d^dag)/sqrt2, P = -i(d - d^dag)/sqrt2.
    """
    a = np.asarray(alpha, complex)
    n = a.shape[0]
    phases = np.where(np.abs(a) > 0, np.angle(a), 0.0)
    theta = np.zeros(n) if theta is None else np.asarray(theta, float)
    rot = np.exp(-1j * (phases + theta))
    if n == 3 and combine:
        w1, w3 = abs(a[0]), abs(a[2])
        nrm = math.hypot(w1, w3)
        if nrm < 1e-300:
            w1 = w3 = nrm = 1.0
            nrm = math.sqrt(2.0)
        modes = [np.array([0, rot[1], 0]),
                 np.array([w1 * rot[0], 0, w3 * rot[2]]) / nrm,
                 np.array([w3 * rot[0], 0, -w1 * rot[2]]) / nrm]
        labels = ("X2", "P2", "X+", "P+", "X-", "P-")
    else:
        modes = []
        labels = []
        for m in range(n):
            v = np.zeros(n, complex)
            v[m] = rot[m]
            modes.append(v)
            labels += [f"X{m + 1}", f"P{m + 1}"]
        labels = tuple(labels)
    rows = []
    s2 = math.sqrt(2.0)
    for v in modes:
        rows.append(np.concatenate([v, v.conj()]) / s2)
        rows.append(np.concatenate([-1j * v, 1j * v.conj()]) / s2)
    U = np.array(rows, dtype=complex)
    return QuadratureBasis(phases=phases, theta=theta, labels=labels, U=U)


def quadrature_spectra(C, basis):
    """Diagonal spectra in the quadrature basis, keyed by label."""
    basis.check()
    S = np.einsum("ij,wjk,lk->wil", basis.U, C.C, basis.U.conj())
    diag = np.real(np.einsum("wii->wi", S))
    return {lab: diag[:, i] for i, lab in enumerate(basis.labels)}


def output_quadrature_spectra(bm, params, omega_grid, basis):
    """Output quadrature spectra from the rows of U N(w).

    S_l(w) = sum_j |(U N(w))_lj|^2 N_xi,jj. Equal to quadrature_spectra of
    covariance_out, but never forms C_out, whose entries along the kernel
    grow as 1/w^2; squeezed quadratures stay accurate near w = 0.
    """
    basis.check()
    w = np.asarray(omega_grid, float)
    M = bm.M if isinstance(bm, BogoliubovMatrix) else bm
    _, kernel = excitation_spectrum(M)
    if kernel and np.any(np.abs(w) < 1e-14):
        raise SingularAtOmega("omega = 0 hits the kernel of M")
    d, nx = _noise(params)
    Ud = basis.U * d[None, :]
    eye = np.eye(M.shape[0])
    S = np.empty((w.size, basis.U.shape[0]))
    for k, wk in enumerate(w):
        # rows of U D (i w + M)^-1 from the transposed system
        r = np.linalg.solve((1j * wk * eye + M).T, Ud.T).T
        row = basis.U + r * d[None, :]
        S[k] = np.sum(np.abs(row) ** 2 * nx[None, :], axis=1)
    return {lab: S[:, i] for i, lab in enumerate(basis.labels)}


def mxp(bm, basis):
    basis.check()
    return basis.U @ bm.M @ basis.U.conj().T


@dataclass
class MxpReport:
    M_xp: np.ndarray
    off_block_norm: float
    kernel_column_norm: float
    m55: float
    m65: float
    m55_plus_2gamma: float
    printed_difference: np.ndarray


def printed_mxp(alpha, params):
    """Reference closed-form M_XP evaluated with |alpha_m| and the mean-field phases.

    Kept only as a cross-check; decay diagonals are absent in that form.
    """
    a = np.abs(alpha)
    phi = np.angle(alpha)
    P0 = 2 * phi[1] - phi[0] - phi[2]
    v, om = params.v0, params.omega0
    a1, a2 = a[0], a[1]
    s, c = math.sin(P0), math.cos(P0)
    r2 = 2 * math.sqrt(2) * v * a1 * a2
    q = om / a2
    return np.array([
        [q * math.sin(phi[1]), 4 * v * a1 ** 2 * c + q * math.cos(phi[1]), -r2 * s, -r2 * c, 0, 0],
        [2 * v * a2 ** 2 - q * math.cos(phi[1]), 4 * v * a1 ** 2 * s + q * math.sin(phi[1]), r2 * (2 + c), -r2 * s, 0, 0],
        [r2 * s, -r2 * c, 0, 2 * v * a2 ** 2 * c, 0, 0],
        [r2 * (2 + c), r2 * s, 6 * v * a1 ** 2, -2 * v * a2 ** 2 * s, 0, 0],
        [0, 0, 0, 0, -2 * v * a2 ** 2 * s, 0],
        [0, 0, 0, 0, -2 * v * (a1 ** 2 + a2 ** 2 * c), 0],
    ])


def mxp_block_structure(bm, basis=None):
    """M_XP = U M U^-1 for a three-mode LC solution and its block report."""
    if bm.n_modes != 3:
        raise NotInLCPhase("block structure needs three modes")
    a = bm.alpha
    if min(abs(a[0]), abs(a[2])) < 1e-8:
        raise NotInLCPhase("outer modes are empty")
    basis = quadrature_basis(a) if basis is None else basis
    Mx = mxp(bm, basis)
    off = math.hypot(np.linalg.norm(Mx[:4, 4:]), np.linalg.norm(Mx[4:, :4]))
    kern = float(np.linalg.norm(Mx[:, 5]))
    g = bm.params.gamma[0]
    m55 = float(Mx[4, 4].real)
    m65 = float(Mx[5, 4].real)
    diff = Mx.real - printed_mxp(a, bm.params)
    return MxpReport(M_xp=Mx, off_block_norm=float(off), kernel_column_norm=kern, m55=m55,
                     m65=m65, m55_plus_2gamma=float(m55 + 2 * g), printed_difference=diff)


def goldstone_closed_form(bm, params, omega_grid, tol=1e-8):
    """Closed-form output spectra of the antisymmetric mode at an LC point.

    S_X-(w) = w^2 / (2 (w^2 + M55^2))
    S_P-(w) = 1/2 (1 + 4 g^2 (w^2 + M55^2 + M65^2) / (w^2 (w^2 + M55^2)))
    Valid for gamma_1 = gamma_3 = g; requires M55 = -2 g, which is flagged
    in the returned report when violated.
    """
    rep = mxp_block_structure(bm)
    g1, g3 = bm.params.gamma[0], bm.params.gamma[2]
    if abs(g1 - g3) > 1e-12:
        raise NotInLCPhase("closed form assumes equal outer-mode decay")
    w = np.asarray(omega_grid, float)
    m55, m65 = rep.m55, rep.m65
    sx = 0.5 * w ** 2 / (w ** 2 + m55 ** 2)
    with np.errstate(divide="ignore"):
        sp = 0.5 * (1 + 4 * g1 ** 2 * (w ** 2 + m55 ** 2 + m65 ** 2) / (w ** 2 * (w ** 2 + m55 ** 2)))
    rep.valid = abs(rep.m55_plus_2gamma) < tol
    return sx, sp, rep


def pole_order(omega, S, n_fit=8):
    """Exponent k in S ~ |w|^-k from the smallest |w| samples."""
    w = np.abs(np.asarray(omega, float))
    idx = np.argsort(w)[:n_fit]
    idx = idx[w[idx] > 0]
    k, _ = np.polyfit(np.log(w[idx]), np.log(np.asarray(S)[idx]), 1)
    return -float(k)

"""Truncated Fock-space solvers.

Density matrices are vectorized by column stacking, vec(rho)[i + j*d] =
rho[i, j], so vec(A rho B) = (B^T kron A) vec(rho). A Liouvillian can be
restricted to a set of matrix-element pairs (i, j); for three modes pumped in
the middle the charge q = n1 - n3 is conserved by every term, and the steady
state lives in the pairs with q_i = q_j.

Master equation::

    drho/dt = -i[H, rho] + sum_m gamma_m (1 + n_th) (2 a rho a^dag - {a^dag a, rho})
                         + sum_m gamma_m n_th (2 a^dag rho a - {a a^dag, rho})
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy import special

from .errors import (DegenerateNullSpace, DimensionOverflow, EigsNoConvergence, NoConvergence,
                     NormUnderflow, PropagationError, TruncationError)
from .model import validate
from .parallel import unit_rng

TAIL_TOL = 1e-6
MAX_UNKNOWNS = 3_000_000
DIRECT_LIMIT = 6000


# ---------------------------------------------------------------------------
# basis and operators

@dataclass(frozen=True)
class FockBasis:
    n_max: tuple

    def __post_init__(self):
        object.__setattr__(self, "n_max", tuple(int(n) for n in self.n_max))

    @property
    def dims(self):
        return tuple(n + 1 for n in self.n_max)

    @property
    def d(self):
        return int(np.prod(self.dims))

    @property
    def n_modes(self):
        return len(self.n_max)

    def occupations(self):
        """(d, n_modes) table; row k is the occupation tuple of flat index k."""
        return np.array(list(itertools.product(*[range(k) for k in self.dims])), dtype=np.int64).reshape(self.d, self.n_modes)

    def index(self, occ):
        return int(np.ravel_multi_index(tuple(occ), self.dims))

    def raised(self, factor=1.3, modes=None):
        modes = range(self.n_modes) if modes is None else modes
        n = list(self.n_max)
        for m in modes:
            n[m] = max(n[m] + 2, int(math.ceil(n[m] * factor)))
        return FockBasis(tuple(n))


def ladder_ops(basis):
    """Annihilation operators of every mode on the product space (CSR)."""
    ops = []
    for m, nm in enumerate(basis.dims):
        a = sp.diags(np.sqrt(np.arange(1, nm)), 1, shape=(nm, nm), format="csr", dtype=complex)
        mats = [sp.identity(k, format="csr", dtype=complex) for k in basis.dims]
        mats[m] = a
        op = mats[0]
        for M in mats[1:]:
            op = sp.kron(op, M, format="csr")
        ops.append(op.tocsr())
    return ops


def hamiltonian(params, basis, ops=None):
    a = ladder_ops(basis) if ops is None else ops
    ad = [x.conj().T.tocsr() for x in a]
    num = [ad[m] @ a[m] for m in range(len(a))]
    v = params.v0
    H = sp.csr_matrix((basis.d, basis.d), dtype=complex)
    for m in range(len(a)):
        H = H + params.delta[m] * num[m] + 0.5 * v * (ad[m] @ ad[m] @ a[m] @ a[m])
    if params.xpm != 0.0:
        for m in range(len(a)):
            for k in range(m + 1, len(a)):
                H = H + params.xpm * v * (num[m] @ num[k])
    if params.has_exchange:
        ex = ad[1] @ ad[1] @ a[0] @ a[2]
        H = H + params.exch * v * (ex + ex.conj().T)
    p = params.p
    H = H + params.omega0 * (a[p] + ad[p])
    return H.tocsr()


# ---------------------------------------------------------------------------
# Liouvillian

@dataclass
class LiouvillianOperator:
    L: sp.csr_matrix
    basis: FockBasis
    pairs_i: np.ndarray
    pairs_j: np.ndarray
    params: object
    components: dict = field(default_factory=dict)
    sector: bool = False

    @property
    def n(self):
        return self.L.shape[0]

    @property
    def diag_mask(self):
        return self.pairs_i == self.pairs_j

    def vec(self, rho):
        """Restrict a d x d matrix to the pair list."""
        rho = rho.toarray() if sp.issparse(rho) else np.asarray(rho)
        return rho[self.pairs_i, self.pairs_j]

    def unvec(self, x):
        d = self.basis.d
        out = np.zeros((d, d), dtype=complex)
        out[self.pairs_i, self.pairs_j] = x
        return out

    def apply(self, rho):
        return self.unvec(self.L @ self.vec(rho))


def _pairs(basis, sector):
    d = basis.d
    if not sector:
        J, I = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        return I.ravel(), J.ravel()
    occ = basis.occupations()
    q = occ[:, 0] - occ[:, 2]
    pi, pj = [], []
    for val in np.unique(q):
        idx = np.nonzero(q == val)[0]
        J, I = np.meshgrid(idx, idx, indexing="ij")
        pi.append(I.ravel())
        pj.append(J.ravel())
    return np.concatenate(pi), np.concatenate(pj)


def _sandwich(A, B, pi, pj, table, d):
    """Entries of the map rho -> A rho B restricted to the pair list."""
    A = sp.csc_matrix(A)
    B = sp.csr_matrix(B)
    na = np.diff(A.indptr)[pi]
    nb = np.diff(B.indptr)[pj]
    cnt = na * nb
    tot = int(cnt.sum())
    src = np.repeat(np.arange(pi.shape[0]), cnt)
    off = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    nbs = np.repeat(nb, cnt)
    ka = A.indptr[pi[src]] + off // nbs
    kb = B.indptr[pj[src]] + off % nbs
    k = A.indices[ka]
    l = B.indices[kb]
    tgt = table[k + l * d]
    ok = tgt >= 0
    return tgt[ok], src[ok], (A.data[ka] * B.data[kb])[ok]


def use_sector(params):
    return params.n_modes == 3 and params.pump == 2


def build_liouvillian(params, basis, sector=None, keep_components=False,
                      max_unknowns=MAX_UNKNOWNS):
    """Sparse superoperator on the (optionally sector-restricted) pair list."""
    validate(params)
    if basis.n_modes != params.n_modes:
        raise ValueError("basis and params disagree on the number of modes")
    sector = use_sector(params) if sector is None else bool(sector)
    if sector and not use_sector(params):
        raise ValueError("charge sector requires three modes pumped in the middle")
    d = basis.d
    pi, pj = _pairs(basis, sector)
    if pi.shape[0] > max_unknowns:
        raise DimensionOverflow(f"{pi.shape[0]} unknowns exceed the budget {max_unknowns}",
                                unknowns=int(pi.shape[0]))
    table = -np.ones(d * d, dtype=np.int64)
    table[pi + pj * d] = np.arange(pi.shape[0])
    ops = ladder_ops(basis)
    H = hamiltonian(params, basis, ops)
    ident = sp.identity(d, format="csr", dtype=complex)
    nth = params.n_th
    damp = sp.csr_matrix((d, d), dtype=complex)
    jumps = []
    for m, a in enumerate(ops):
        g = params.gamma[m]
        ad = a.conj().T.tocsr()
        damp = damp + g * (1 + nth) * (ad @ a)
        jumps.append((f"decay{m + 1}", math.sqrt(2 * g * (1 + nth)) * a))
        if nth > 0:
            damp = damp + g * nth * (a @ ad)
            jumps.append((f"pump{m + 1}", math.sqrt(2 * g * nth) * ad))
    N = pi.shape[0]
    comps = {}

    def assemble(terms):
        rows, cols, vals = [], [], []
        for A, B in terms:
            r, c, v = _sandwich(A, B, pi, pj, table, d)
            rows.append(r)
            cols.append(c)
            vals.append(v)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N, N))

    Kh = (-1j * H).tocsr()
    if keep_components:
        comps["hamiltonian"] = assemble([(Kh, ident), (ident, (1j * H).tocsr())])
        for name, C in jumps:
            CdC = (C.conj().T @ C).tocsr()
            comps[name] = assemble([(C, C.conj().T.tocsr()), (-0.5 * CdC, ident), (ident, -0.5 * CdC)])
        L = sum(comps.values())
    else:
        K = (Kh - damp).tocsr()
        terms = [(K, ident), (ident, K.conj().T.tocsr())]
        terms += [(C, C.conj().T.tocsr()) for _, C in jumps]
        L = assemble(terms)
    return LiouvillianOperator(L=L.tocsr(), basis=basis, pairs_i=pi, pairs_j=pj, params=params,
                               components=comps, sector=sector)


# ---------------------------------------------------------------------------
# steady state

@dataclass
class DensityMatrix:
    rho: np.ndarray
    basis: FockBasis
    psd_projection: float = 0.0
    residual: float = 0.0
    tail: tuple = ()
    method: str = ""

    @property
    def trace(self):
        return float(np.trace(self.rho).real)


@dataclass
class SteadyStateSolver:
    """Keeps an ILU preconditioner for reuse along a parameter sweep."""

    drop_tol: float = 3e-2
    fill_factor: float = 2.0
    rtol: float = 1e-11
    restart: int = 200
    maxiter: int = 30
    ilu: object = None
    ilu_n: int = -1

    def solve(self, A, b):
        n = A.shape[0]
        for attempt in range(2):
            if self.ilu is None or self.ilu_n != n:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    self.ilu = sla.spilu(A.tocsc(), drop_tol=self.drop_tol,
                                         fill_factor=self.fill_factor, permc_spec="MMD_AT_PLUS_A")
                self.ilu_n = n
            M = sla.LinearOperator(A.shape, self.ilu.solve, dtype=complex)
            x, info = sla.gmres(A, b, M=M, rtol=self.rtol, atol=0.0, restart=self.restart,
                                maxiter=self.maxiter)
            if info == 0:
                return x
            self.ilu = None
        raise NoConvergence("preconditioned GMRES did not converge", info=int(info))


def _trace_row_system(lop):
    L = lop.L.tolil(copy=True)
    diag = np.nonzero(lop.diag_mask)[0]
    r0 = int(diag[0])
    L[r0, :] = 0
    L[r0, diag] = 1.0
    b = np.zeros(lop.n, dtype=complex)
    b[r0] = 1.0
    return L.tocsc(), b


def layer_populations(rho, basis):
    """Population of the top Fock layer of each mode."""
    p = np.real(np.diag(rho))
    occ = basis.occupations()
    return tuple(float(p[occ[:, m] == basis.n_max[m]].sum()) for m in range(basis.n_modes))


def _finish(lop, x, method, project=True):
    rho = lop.unvec(x)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    rho /= tr
    res = float(np.linalg.norm(lop.L @ lop.vec(rho)))
    proj = 0.0
    if project and rho.shape[0] <= 4000:
        w, V = np.linalg.eigh(rho)
        if w.min() < 0:
            proj = float(np.sqrt(np.sum(w[w < 0] ** 2)))
            w = np.clip(w, 0.0, None)
            rho = (V * w) @ V.conj().T
            rho /= np.trace(rho).real
    return DensityMatrix(rho=rho, basis=lop.basis, psd_projection=proj, residual=res,
                         tail=layer_populations(rho, lop.basis), method=method)


def steady_state(lop, method="auto", solver=None, tol=1e-8):
    """Null vector of L with unit trace (direct, ILU-GMRES, or time marching)."""
    if method == "auto":
        method = "direct" if (lop.n <= DIRECT_LIMIT or lop.basis.n_modes == 1) else "iterative"
    A, b = _trace_row_system(lop)
    if method == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.MatrixRankWarning)
            try:
                x = sla.spsolve(A, b)
            except sla.MatrixRankWarning:
                raise DegenerateNullSpace("trace-constrained system is singular")
    elif method == "iterative":
        solver = SteadyStateSolver() if solver is None else solver
        x = solver.solve(A, b)
    elif method == "evolve":
        return steady_state_evolve(lop, tol=1e-10)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(x)):
        raise DegenerateNullSpace("null-space solve produced non-finite values")
    dm = _finish(lop, x, method)
    if dm.residual > tol * max(1.0, np.abs(lop.L.diagonal()).max()):
        return steady_state_evolve(lop, rho0=dm.rho)
    return dm


def steady_state_evolve(lop, rho0=None, tol=1e-10, t_chunk=10.0, max_time=1e4):
    """Fallback: exponential time marching until ||L rho|| < tol."""
    d = lop.basis.d
    if rho0 is None:
        rho0 = np.zeros((d, d), complex)
        rho0[0, 0] = 1.0
    x = lop.vec(rho0)
    t = 0.0
    while t < max_time:
        x = sla.expm_multiply(lop.L * t_chunk, x)
        t += t_chunk
        tr = x[lop.diag_mask].sum().real
        x = x / tr
        if np.linalg.norm(lop.L @ x) < tol:
            return _finish(lop, x, "evolve")
    raise NoConvergence("time marching did not reach the steady state", time=t)


def adequate_steady_state(params, basis, tail_tol=TAIL_TOL, max_raises=4, solver=None, **kw):
    """Steady state with the truncation raised until every top layer < tail_tol."""
    for _ in range(max_raises + 1):
        lop = build_liouvillian(params, basis, **kw)
        dm = steady_state(lop, solver=solver)
        bad = [m for m, t in enumerate(dm.tail) if t >= tail_tol]
        if not bad:
            return dm, lop
        basis = basis.raised(modes=bad)
    raise TruncationError("top Fock layer stays above tail_tol", tail=str(dm.tail),
                          n_max=str(basis.n_max))


def check_truncation(dm, tail_tol=TAIL_TOL):
    if max(dm.tail) >= tail_tol:
        raise TruncationError("top Fock layer population exceeds tail_tol", tail=str(dm.tail))
    return dm


# ---------------------------------------------------------------------------
# spectrum and propagation

def liouvillian_spectrum(lop, k=3, sigma=1e-3, n_extra=12, dense_limit=1200):
    """The k eigenvalues of largest real part (lambda_0 = 0 included)."""
    L = lop.L if isinstance(lop, LiouvillianOperator) else lop
    n = L.shape[0]
    if n <= dense_limit:
        ev = np.linalg.eigvals(L.toarray())
    else:
        nev = min(n - 2, k + n_extra)
        try:
            ev = sla.eigs(L.tocsc(), k=nev, sigma=sigma, which="LM", return_eigenvectors=False,
                          maxiter=5000, tol=1e-12)
        except sla.ArpackNoConvergence as e:
            raise EigsNoConvergence("shift-invert Arnoldi did not converge", found=len(e.eigenvalues))
    ev = ev[np.lexsort((np.abs(ev.imag), -ev.real))]
    return ev[:k]


def propagate(lop, rho0, t_grid):
    """rho(t) on a uniform grid via Krylov exponential action."""
    t = np.asarray(t_grid, float)
    x0 = lop.vec(rho0)
    if t.size == 1:
        xs = sla.expm_multiply(lop.L * t[0], x0)[None]
    else:
        dt = t[1] - t[0]
        if not np.allclose(np.diff(t), dt):
            raise ValueError("t grid must be uniform")
        xs = sla.expm_multiply(lop.L, x0, start=t[0], stop=t[-1], num=t.size, endpoint=True)
    if not np.all(np.isfinite(xs)):
        raise PropagationError("non-finite density matrix during propagation")
    return xs


def expect_vec(lop, xs, op):
    """Tr(op rho) for vectorized states xs (rows)."""
    O = sp.csr_matrix(op)
    # Tr(O rho) = sum_ij O_ji rho_ij
    w = np.asarray(O[lop.pairs_j, lop.pairs_i]).ravel()
    return np.atleast_2d(xs) @ w


# ---------------------------------------------------------------------------
# observables

def partial_trace(rho, basis, keep):
    dims = basis.dims
    n = len(dims)
    r = np.asarray(rho).reshape(dims + dims)
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for m in range(n):
        if m != keep:
            col[m] = row[m]
    expr = "".join(row) + "".join(col) + "->" + row[keep] + col[keep]
    return np.einsum(expr, r)


def wigner_grid(rho1, xvec, pvec):
    """Wigner function W(X, P) of a single-mode density matrix,
    alpha = (X + iP)/sqrt2, normalized to integrate to 1 over dX dP."""
    X, P = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float), indexing="ij")
    A = (X + 1j * P) / math.sqrt(2.0)
    B = 4.0 * np.abs(A) ** 2
    M = rho1.shape[0]
    W = np.zeros(X.shape)
    logA = np.log(np.maximum(np.abs(2 * A), 1e-300))
    phase = np.exp(1j * np.angle(2 * A))
    for m in range(M):
        if rho1[m, m] != 0:
            W += np.real(rho1[m, m]) * (-1) ** m * special.eval_genlaguerre(m, 0, B) * np.exp(-B / 2)
        for n in range(m + 1, M):
            if rho1[m, n] == 0:
                continue
            k = n - m
            mag = np.exp(k * logA + 0.5 * (special.gammaln(m + 1) - special.gammaln(n + 1)) - B / 2)
            W += 2.0 * np.real(rho1[m, n] * (-1) ** m * phase ** k * mag * special.eval_genlaguerre(m, k, B))
    return W / math.pi


def observables(dm, basis=None, wigner_axes=None):
    """Per-mode populations, g2(0), quadrature moments, p_n and optional Wigner maps."""
    rho = dm.rho if isinstance(dm, DensityMatrix) else np.asarray(dm)
    basis = dm.basis if basis is None else basis
    out = {"n": [], "g2": [], "a": [], "x_mean": [], "p_mean": [], "x_var": [], "p_var": [],
           "p_n": [], "wigner": []}
    for m in range(basis.n_modes):
        r1 = partial_trace(rho, basis, m)
        k = np.arange(r1.shape[0])
        pn = np.real(np.diag(r1))
        nbar = float(np.sum(k * pn))
        nn1 = float(np.sum(k * (k - 1) * pn))
        # Tr(a rho) = sum_n sqrt(n) rho[n, n-1]
        a = complex(np.sum(np.sqrt(k[1:]) * r1[k[1:], k[1:] - 1]))
        a2 = complex(np.sum(np.sqrt(k[2:] * (k[2:] - 1)) * r1[k[2:], k[2:] - 2]))
        x_mean = math.sqrt(2) * a.real
        p_mean = math.sqrt(2) * a.imag
        # X = (a + a^dag)/sqrt2: <X^2> = (<a^2> + <a^dag^2> + 2n + 1)/2
        x2 = (2 * a2.real + 2 * nbar + 1) / 2
        p2 = (-2 * a2.real + 2 * nbar + 1) / 2
        out["n"].append(nbar)
        # nan when <n>^2 underflows (vacuum-like states)
        out["g2"].append(nn1 / nbar ** 2 if nbar ** 2 > 0 else float("nan"))
        out["a"].append(a)
        out["x_mean"].append(x_mean)
        out["p_mean"].append(p_mean)
        out["x_var"].append(x2 - x_mean ** 2)
        out["p_var"].append(p2 - p_mean ** 2)
        out["p_n"].append(pn)
        if wigner_axes is not None:
            out["wigner"].append(wigner_grid(r1, *wigner_axes))
    out["n"] = np.array(out["n"])
    out["g2"] = np.array(out["g2"])
    return out


# ---------------------------------------------------------------------------
# two-time correlations

def g1_qrt(lop, rho_ss, A, B, tau_grid, symmetrize=False, subtract_mean=True):
    """<B(tau) A(0)> - <B><A> from the quantum regression theorem.

    symmetrize=True returns (1/2)<{B(tau), A(0)}> instead, the ordering
    estimated by symmetric (Wigner) averages.
    """
    if lop.sector:
        raise ValueError("correlators need the full (unrestricted) Liouvillian")
    rho = rho_ss.rho if isinstance(rho_ss, DensityMatrix) else np.asarray(rho_ss)
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    src = A @ rho
    if symmetrize:
        src = 0.5 * (src + rho @ A)
    xs = propagate(lop, np.asarray(src), tau_grid)
    g = expect_vec(lop, xs, B)
    if subtract_mean:
        g = g - np.trace(B @ rho) * np.trace(A @ rho)
    return np.asarray(g).ravel()


# ---------------------------------------------------------------------------
# quantum jumps

@dataclass
class JumpTrajectory:
    t: np.ndarray
    n: np.ndarray              # (n_t, n_modes) photon numbers
    jump_times: np.ndarray
    jump_channels: np.ndarray
    seed: int
    psi_final: np.ndarray = None


class _Propagator:
    """exp(-i H_eff s) for arbitrary s from an eigendecomposition."""

    def __init__(self, Heff):
        w, V = la.eig(Heff)
        self.w, self.V = w, V
        self.Vi = la.inv(V)
        self.ok = np.linalg.cond(V) < 1e8
        self.Heff = Heff

    def __call__(self, psi, s):
        if self.ok:
            return self.V @ (np.exp(-1j * self.w * s) * (self.Vi @ psi))
        return la.expm(-1j * self.Heff * s) @ psi


def mcwf_trajectory(params, basis, t_final, dt, rng_seed, psi0=None, n_bisect=40, unit=0):
    """Quantum-jump unraveling with jump operators sqrt(2 gamma_m) a_m.

    The unnormalized state is propagated with the non-Hermitian Hamiltonian;
    a jump happens when its squared norm falls below a uniform threshold, and
    the crossing time inside a step is located by bisection.
    """
    validate(params)
    if params.n_th > 0:
        raise ValueError("quantum jumps implemented for n_th = 0")
    ops = [a.toarray() for a in ladder_ops(basis)]
    H = hamiltonian(params, basis).toarray()
    g = np.asarray(params.gamma)
    Heff = H - 1j * sum(g[m] * ops[m].conj().T @ ops[m] for m in range(len(ops)))
    prop = _Propagator(Heff)
    nops = [np.real(np.diag(o.conj().T @ o)) for o in ops]
    rng = unit_rng(rng_seed, unit)
    psi = np.zeros(basis.d, complex)
    if psi0 is None:
        psi[0] = 1.0
    else:
        psi[:] = psi0
    psi /= np.linalg.norm(psi)
    n_steps = int(round(t_final / dt))
    ts = np.arange(n_steps + 1) * dt
    rec = np.empty((n_steps + 1, len(ops)))
    rec[0] = [np.sum(nm * np.abs(psi) ** 2) for nm in nops]
    r = rng.random()
    jt, jc = [], []
    for k in range(n_steps):
        t0 = ts[k]
        remaining = dt
        t = t0
        while True:
            new = prop(psi, remaining)
            nrm2 = np.vdot(new, new).real
            if nrm2 > r:
                psi = new
                break
            # jump inside (t, t + remaining]: bisection on the crossing time
            lo, hi = 0.0, remaining
            for _ in range(n_bisect):
                mid = 0.5 * (lo + hi)
                x = prop(psi, mid)
                if np.vdot(x, x).real > r:
                    lo = mid
                else:
                    hi = mid
            psi = prop(psi, hi)
            rates = np.array([g[m] * np.sum(nops[m] * np.abs(psi) ** 2) for m in range(len(ops))])
            tot = rates.sum()
            if not tot > 0:
                raise NormUnderflow("no jump channel available", t=float(t + hi))
            ch = int(np.searchsorted(np.cumsum(rates) / tot, rng.random(), side="right"))
            ch = min(ch, len(ops) - 1)
            psi = ops[ch] @ psi
            nrm = np.linalg.norm(psi)
            if nrm < 1e-300:
                raise NormUnderflow("state vanished after a jump", t=float(t + hi))
            psi /= nrm
            t += hi
            jt.append(t)
            jc.append(ch)
            remaining -= hi
            r = rng.random()
            if remaining <= 0:
                break
        nrm = np.linalg.norm(psi)
        if nrm < 1e-150:
            raise NormUnderflow("norm underflow between jumps", t=float(ts[k + 1]))
        # keep the threshold relative to the current norm
        psi_n = psi / nrm
        r = r / nrm ** 2
        psi = psi_n
        rec[k + 1] = [np.sum(nm * np.abs(psi) ** 2) for nm in nops]
    return JumpTrajectory(t=ts, n=rec, jump_times=np.array(jt), jump_channels=np.array(jc, int),
                          seed=int(rng_seed), psi_final=psi)

"""Named reproduction pipelines driven by a RunConfig.

Each recipe takes (cfg, ctx), writes its tables through ctx and returns a
small JSON-able summary. Defaults live next to the recipe so a config file
only needs ``recipe = "<name>"``.
"""

import math

import numpy as np

from . import analysis as an
from . import bogoliubov as bg
from . import fock
from . import meanfield as mf
from . import wigner as tw
from .io import Checkpoint, svg_plot
from .model import FrameSpec

RATE_UNITS = "rates and frequencies in gamma0, times in 1/gamma0"

HARMONIC = {"kind": "three", "delta0": -3.0, "v0": 1.0, "spacing": 1.0, "delta_d": 0.0}
ANHARMONIC = {"kind": "three", "delta0": 0.0, "v0": 1.0, "spacing": 7.5, "delta_d": 5.0}
SINGLE = {"kind": "single", "delta0": -3.0, "v0": 1.0}


def _svg(ctx, name, *args, **kw):
    if "svg" in ctx.formats and not svg_plot(ctx.out_dir / name, *args, **kw):
        ctx.warn(f"plot {name} not rendered")
    elif "svg" in ctx.formats:
        ctx.files.append(name)


def _axis(cfg, name, default):
    ax = cfg.sweep.axes.get(name)
    return np.asarray(default, float) if ax is None else ax.grid()


def _mf_populations(p, cfg, unit):
    c = mf.census(p, n_seeds=cfg.solver.n_seeds, rng_seed=cfg.seed, unit=unit)
    rows = []
    for fp in c.stable_fixed_points:
        rows.append(("fp", fp.n))
    for lc in c.stable_limit_cycles:
        rows.append(("lc", np.asarray(lc.mean_amplitudes) ** 2))
    return rows, c


def _tw_populations(p, cfg, k):
    ens = tw.ensemble_run(p, n_traj=cfg.solver.n_traj, t_final=cfg.solver.t_final,
                          dt=cfg.solver.dt, master_seed=cfg.seed + 7919 * k,
                          tavg_from=cfg.solver.settle_time, keep_endpoints=False,
                          scheme=cfg.solver.scheme, workers=cfg.workers)
    return ens.stationary_n()


def _dm_state(p, cfg, solver=None):
    n_max = cfg.solver.n_max or ([40] if p.n_modes == 1 else [7, 21, 7])
    dm, lop = fock.adequate_steady_state(p, fock.FockBasis(tuple(n_max)),
                                         tail_tol=cfg.solver.tail_tol, solver=solver)
    return dm, lop


# ---------------------------------------------------------------------------

def phase_diagram(cfg, ctx):
    p = cfg.system.params()
    sweep = {name: ax.grid() for name, ax in cfg.sweep.axes.items()}
    if not sweep:
        sweep = {"omega0": np.linspace(0.5, 3.0, 11), "delta_d": np.linspace(0.0, 6.0, 7)}
    with ctx.stage("census"):
        axes, grid = mf.phase_diagram(p, sweep, n_seeds=cfg.solver.n_seeds, rng_seed=cfg.seed,
                                      workers=cfg.workers)
    cells = list(grid.ravel())
    cols = {}
    for i, a in enumerate(axes):
        cols[a] = [c.coords[i] for c in cells]
    cols["phase"] = [c.phase for c in cells]
    cols["n_attractors"] = [c.n_attractors for c in cells]
    cols["n_stable_fp"] = [c.n_stable_fp for c in cells]
    cols["lc_present"] = [c.lc_present for c in cells]
    cols["n_failed"] = [c.n_failed for c in cells]
    ctx.write_csv("phase_diagram.csv", cols, RATE_UNITS)
    if len(axes) == 2:
        z = np.vectorize(lambda c: "ABC".index(c.phase))(grid)
        v0, v1 = sweep[axes[0]], sweep[axes[1]]
        _svg(ctx, "phase_diagram.svg", None, None, axes[0], axes[1],
             heatmap={"z": z, "extent": [v0[0], v0[-1], v1[0], v1[-1]]})
    counts = {ph: int(sum(c.phase == ph for c in cells)) for ph in "ABC"}
    return {"axes": axes, "phase_counts": counts}


def _populations(cfg, ctx, with_dm):
    p0 = cfg.system.params()
    omegas = _axis(cfg, "omega0", np.linspace(0.5, 4.0, 8))
    mf_cols = {"omega0": [], "kind": [], "n1": [], "n2": [], "n3": []}
    tw_cols = {"omega0": [], "n1": [], "n2": [], "n3": [], "err1": [], "err2": [], "err3": []}
    dm_cols = {"omega0": [], "n1": [], "n2": [], "n3": [], "tail_max": []}
    ck = Checkpoint(ctx)
    solver = fock.SteadyStateSolver()
    for k, om in enumerate(omegas):
        p = p0.replace(omega0=float(om))
        with ctx.stage("meanfield"):
            rows, _ = _mf_populations(p, cfg, k)
        for kind, n in rows:
            mf_cols["omega0"].append(om)
            mf_cols["kind"].append(kind)
            for m in range(3):
                mf_cols[f"n{m + 1}"].append(float(n[m]))
        rec = ck.get(("tw", k))
        if rec is None:
            with ctx.stage("wigner"):
                n, e = _tw_populations(p, cfg, k)
            rec = {"n": list(map(float, n)), "e": list(map(float, e))}
            ck.put(("tw", k), rec)
        tw_cols["omega0"].append(om)
        for m in range(3):
            tw_cols[f"n{m + 1}"].append(rec["n"][m])
            tw_cols[f"err{m + 1}"].append(rec["e"][m])
        if with_dm:
            rec = ck.get(("dm", k))
            if rec is None:
                with ctx.stage("fock"):
                    dm, _ = _dm_state(p, cfg, solver)
                    n = fock.observables(dm)["n"]
                rec = {"n": list(map(float, n)), "tail": float(max(dm.tail))}
                ck.put(("dm", k), rec)
            dm_cols["omega0"].append(om)
            for m in range(3):
                dm_cols[f"n{m + 1}"].append(rec["n"][m])
            dm_cols["tail_max"].append(rec["tail"])
    ck.flush()
    ctx.write_csv("populations_meanfield.csv", mf_cols, RATE_UNITS)
    ctx.write_csv("populations_wigner.csv", tw_cols, RATE_UNITS)
    out = {"omega0": list(map(float, omegas))}
    if with_dm:
        ctx.write_csv("populations_fock.csv", dm_cols, RATE_UNITS)
    try:
        out["threshold_omega0"] = mf.parametric_threshold(p0, float(omegas[0]), float(omegas[-1]))
    except Exception as e:  # no threshold inside the sweep
        ctx.warn(f"threshold: {e}")
    _svg(ctx, "populations.svg", tw_cols["omega0"],
         [tw_cols["n1"], tw_cols["n2"], tw_cols["n3"]], "Omega0", "n",
         labels=["TW n1", "TW n2", "TW n3"])
    return out


def populations_harmonic(cfg, ctx):
    return _populations(cfg, ctx, with_dm=False)


def populations_anharmonic(cfg, ctx):
    return _populations(cfg, ctx, with_dm=True)


def limit_cycle(cfg, ctx):
    p = cfg.system.params()
    with ctx.stage("census"):
        c = mf.census(p, n_seeds=cfg.solver.n_seeds, rng_seed=cfg.seed)
    if not c.stable_limit_cycles:
        ctx.warn("no stable limit cycle at these parameters")
        return {"limit_cycle": False}
    lc = c.stable_limit_cycles[0]
    # record the orbit in the laser frame, starting on the polished cycle
    with ctx.stage("integrate"):
        tr = mf.integrate(lc.alpha, p, 10 * lc.period, dt_out=lc.period / 200)
        det = mf.detect_limit_cycle(tr)
    cols = {"t": tr.t}
    for m in range(p.n_modes):
        cols[f"re{m + 1}"] = tr.alpha[:, m].real
        cols[f"im{m + 1}"] = tr.alpha[:, m].imag
        cols[f"n{m + 1}"] = np.abs(tr.alpha[:, m]) ** 2
    ctx.write_csv("limit_cycle.csv", cols, RATE_UNITS)
    _svg(ctx, "limit_cycle.svg", tr.t, [cols["re1"], cols["im1"]], "t", "alpha_1",
         labels=["Re", "Im"])
    return {"period": det.period, "period_err": det.period_err, "omega_lc": det.omega_lc,
            "polished_period": lc.period, "mode_spacing": p.spacing,
            "mean_n": list(map(float, lc.mean_amplitudes ** 2))}


def quadrature_spectra(cfg, ctx):
    p = cfg.system.params()
    c = mf.census(p, n_seeds=cfg.solver.n_seeds, rng_seed=cfg.seed)
    if not c.stable_limit_cycles:
        ctx.warn("no stable limit cycle; spectra around the lowest stable fixed point")
        base = c.stable_fixed_points[0]
        bm = bg.build_m(base, p)
    else:
        base = c.stable_limit_cycles[0]
        bm = bg.build_m(base, p, FrameSpec("local_oscillator", base.omega_lc))
    w = _axis(cfg, "omega", np.linspace(-20, 20, 801))
    w = w[np.abs(w) > 1e-9]
    basis = bg.quadrature_basis(bm.alpha)
    S = bg.output_quadrature_spectra(bm, p, w, basis)
    cols = {"omega": w}
    cols.update({f"S_{k}": v for k, v in S.items()})
    out = {}
    if p.n_modes == 3 and c.stable_limit_cycles:
        sx, sp, rep = bg.goldstone_closed_form(bm, p, w)
        cols["S_X-_closed"] = sx
        cols["S_P-_closed"] = sp
        out["closed_form_valid"] = bool(rep.valid)
    ctx.write_csv("quadrature_spectra.csv", cols, RATE_UNITS, frame="local_oscillator",
                  spectra="output field, vacuum level 1/2")
    ev, kernel = bg.excitation_spectrum(bm.M)
    ctx.write_csv("bogoliubov_eigenvalues.csv",
                  {"index": np.arange(ev.size), "re": ev.real, "im": ev.imag}, RATE_UNITS,
                  frame="local_oscillator")
    labels = [k for k in S if k.endswith("-")] or list(S)[:2]
    _svg(ctx, "quadrature_spectra.svg", w, [S[k] for k in labels], "omega", "S", labels=labels)
    out.update({"has_kernel": kernel, "min_abs_eig": float(np.min(np.abs(ev))),
                "min_S": {k: float(v.min()) for k, v in S.items()}})
    return out


def wigner_maps(cfg, ctx):
    p = cfg.system.params()
    with ctx.stage("wigner"):
        ens = tw.ensemble_run(p, n_traj=cfg.solver.n_traj, t_final=cfg.solver.t_final,
                              dt=cfg.solver.dt, master_seed=cfg.seed, scheme=cfg.solver.scheme,
                              workers=cfg.workers)
    samples = ens.endpoints
    modes = list(range(p.n_modes)) + (["m+", "m-"] if p.n_modes == 3 else [])
    out = {}
    for mode in modes:
        h = tw.wigner_histogram(samples, mode=mode)
        xc = 0.5 * (h.x_edges[1:] + h.x_edges[:-1])
        pc = 0.5 * (h.p_edges[1:] + h.p_edges[:-1])
        X, Y = np.meshgrid(xc, pc, indexing="ij")
        tag = f"{mode + 1}" if isinstance(mode, int) else mode.replace("+", "plus").replace("-", "minus")
        ctx.write_csv(f"wigner_{tag}.csv", {"x": X.ravel(), "p": Y.ravel(), "w": h.density.ravel()},
                      RATE_UNITS, field=f"alpha = (x + i p)/sqrt2 for mode {mode}")
        _svg(ctx, f"wigner_{tag}.svg", None, None, "x", "p",
             heatmap={"z": h.density, "extent": [h.x_edges[0], h.x_edges[-1],
                                                 h.p_edges[0], h.p_edges[-1]]})
    if p.n_modes == 3:
        st = tw.phase_statistics(samples)
        out["phase_difference_ks_p"] = st["ks_pvalue"]
    out["n"] = list(map(float, ens.n[-1]))
    return out


def goldstone_linewidth(cfg, ctx):
    base = cfg.system.params()
    n_list = cfg.solver.n_list or [1.0, 2.0, 4.0, 8.0, 16.0]
    with ctx.stage("sweep"):
        sweep, _ = an.td_sweep(base, n_list, n_traj=cfg.solver.n_traj, master_seed=cfg.seed,
                               tau_max=cfg.solver.tau_max, dtau=cfg.solver.dtau,
                               dt=cfg.solver.dt, settle_time=cfg.solver.settle_time,
                               workers=cfg.workers)
    pl = sweep.power_law
    ctx.write_csv("linewidth.csv", {"N": sweep.N, "gamma": sweep.gamma, "gamma_err": sweep.gamma_err,
                                    "omega_peak": sweep.omega_peak, "n_minus": sweep.n_minus,
                                    "power_law": pl.prefactor * sweep.N ** pl.exponent,
                                    "reference_N^-1": sweep.gamma[0] * (sweep.N / sweep.N[0]) ** -1.0},
                  RATE_UNITS, observable="P- quadrature (laser frame)")
    ctx.write_json("linewidth_fits.json", {"fits": [f.to_dict() for f in sweep.fits],
                                           "exponent": pl.exponent, "exponent_err": pl.exponent_err,
                                           "reference_exponent": pl.reference_exponent})
    _svg(ctx, "linewidth.svg", sweep.N, [sweep.gamma, pl.prefactor * sweep.N ** pl.exponent], "N",
         "Gamma", labels=["TW", "power law"], logx=True, logy=True)
    return {"exponent": pl.exponent, "exponent_err": pl.exponent_err,
            "monotone": sweep.monotone_decreasing()}


def single_mode_recipe(cfg, ctx):
    p0 = cfg.system.params()
    omegas = _axis(cfg, "omega0", np.linspace(0.5, 4.0, 15))
    cub = {"omega0": [], "n": [], "stable": []}
    cols = {"omega0": omegas, "n_dm": [], "g2_dm": [], "n_tw": [], "err_tw": []}
    for k, om in enumerate(omegas):
        p = p0.replace(omega0=float(om))
        sol = mf.single_mode_cubic(p.v0, p.delta0, p.omega0, p.gamma[0])
        for n, s in zip(sol.roots, sol.stable):
            cub["omega0"].append(om)
            cub["n"].append(n)
            cub["stable"].append(s)
        with ctx.stage("fock"):
            dm, _ = _dm_state(p, cfg)
            ob = fock.observables(dm)
        cols["n_dm"].append(float(ob["n"][0]))
        cols["g2_dm"].append(float(ob["g2"][0]))
        with ctx.stage("wigner"):
            n, e = _tw_populations(p, cfg, k)
        cols["n_tw"].append(float(n[0]))
        cols["err_tw"].append(float(e[0]))
    ctx.write_csv("single_mode_meanfield.csv", cub, RATE_UNITS)
    ctx.write_csv("single_mode_populations.csv", cols, RATE_UNITS)
    _svg(ctx, "single_mode.svg", omegas, [cols["n_dm"], cols["n_tw"]], "Omega0", "n",
         labels=["Lindblad", "TW"])
    return {"max_g2": float(np.max(cols["g2_dm"]))}


def liouvillian_gap(cfg, ctx):
    p0 = cfg.system.params()
    v0s = cfg.solver.v0_list or [1.0, 0.5, 0.1]
    x = _axis(cfg, "omega0", np.linspace(1.0, 3.0, 21))
    cols = {"v0": [], "omega0": [], "n": []}
    for j in range(cfg.solver.n_eigs):
        cols[f"re{j}"] = []
        cols[f"im{j}"] = []
    mins = {}
    for v0 in v0s:
        # drive rescaled with sqrt(V0) so the bistable windows line up
        n_max = cfg.solver.n_max[0] if cfg.solver.n_max else int(max(40, math.ceil(12 / v0)))
        gaps = []
        for xv in x:
            om = xv / math.sqrt(v0)
            p = p0.replace(v0=float(v0), omega0=float(om))
            with ctx.stage("fock"):
                lop = fock.build_liouvillian(p, fock.FockBasis((n_max,)))
                ev = fock.liouvillian_spectrum(lop, cfg.solver.n_eigs)
                dm = fock.check_truncation(fock.steady_state(lop), cfg.solver.tail_tol)
            cols["v0"].append(v0)
            cols["omega0"].append(om)
            cols["n"].append(float(fock.observables(dm)["n"][0]))
            for j in range(cfg.solver.n_eigs):
                cols[f"re{j}"].append(float(ev[j].real))
                cols[f"im{j}"].append(float(ev[j].imag))
            gaps.append(abs(ev[1].real))
        k = int(np.argmin(gaps))
        mins[str(v0)] = {"omega0": float(x[k] / math.sqrt(v0)), "gap": float(gaps[k])}
    ctx.write_csv("liouvillian_gap.csv", cols, RATE_UNITS, frame="laser (drive frame)")
    return {"minimum_gap": mins}


def qmc_switching(cfg, ctx):
    p = cfg.system.params()
    n_max = (cfg.solver.n_max or [30])[0]
    basis = fock.FockBasis((n_max,))
    s = cfg.solver
    with ctx.stage("mcwf_single"):
        tr = fock.mcwf_trajectory(p, basis, s.dwell_t_final, s.mcwf_dt, cfg.seed)
    keep = tr.t >= 10.0
    ctx.write_csv("mcwf_trajectory.csv", {"t": tr.t[keep], "n": tr.n[keep, 0]}, RATE_UNITS)
    dw = an.dwell_modes(tr.n[keep, 0])
    ctx.write_csv("dwell_density.csv", {"n": dw.grid, "density": dw.density}, RATE_UNITS)
    sol = mf.single_mode_cubic(p.v0, p.delta0, p.omega0, p.gamma[0])
    branches = [n for n, st in zip(sol.roots, sol.stable) if st]
    # ensemble against Lindblad
    lop = fock.build_liouvillian(p, basis)
    rho0 = np.zeros((basis.d, basis.d), complex)
    rho0[0, 0] = 1.0
    n_t = int(round(s.mcwf_t_final / s.mcwf_dt))
    tg = np.arange(n_t + 1) * s.mcwf_dt
    a = fock.ladder_ops(basis)[0]
    with ctx.stage("lindblad"):
        n_lind = fock.expect_vec(lop, fock.propagate(lop, rho0, tg), a.conj().T @ a).real
    with ctx.stage("mcwf_ensemble"):
        ns = np.array([fock.mcwf_trajectory(p, basis, s.mcwf_t_final, s.mcwf_dt, cfg.seed + 1,
                                            unit=k).n[:, 0] for k in range(s.mcwf_trajectories)])
    ctx.write_csv("mcwf_ensemble.csv", {"t": tg, "n_mcwf": ns.mean(0),
                                        "err": ns.std(0, ddof=1) / math.sqrt(ns.shape[0]),
                                        "n_lindblad": n_lind}, RATE_UNITS)
    # fluctuation correlator
    with ctx.stage("qrt"):
        dm = fock.steady_state(lop)
        tau = np.arange(0, 30.0 + 1e-9, 0.05)
        g = fock.g1_qrt(lop, dm, a, a.conj().T, tau)
        ev = fock.liouvillian_spectrum(lop, 2)
    ctx.write_csv("qrt_g1.csv", {"tau": tau, "re": g.real, "im": g.imag, "abs": np.abs(g)},
                  RATE_UNITS, correlator="<a^dag(tau) a(0)> - |<a>|^2")
    tail = an.fit_exponential(tau, g, TAIL_WINDOW)
    return {"dwell_modes": list(map(float, dw.modes)), "bimodal": dw.bimodal,
            "mf_branches": branches, "tail_rate": tail.rate, "tail_rate_err": tail.rate_err,
            "gap": float(-ev[1].real), "n_jumps": int(tr.jump_times.size)}


# slow-tail fit window: from three damping times to ten
TAIL_WINDOW = (3.0, 10.0)


def linewidth_table(cfg, ctx):
    lc = cfg.system.params()
    a_phase = lc.replace(omega0=LINEWIDTH_A_OMEGA0)
    n_list = cfg.solver.n_list or list(an.LINEWIDTH_N)
    with ctx.stage("linewidth-table"):
        rows = an.linewidth_table_rows(lc, a_phase, n_list=n_list, n_traj=cfg.solver.n_traj,
                                       master_seed=cfg.seed, tau_max=cfg.solver.tau_max,
                                       dtau=cfg.solver.dtau, dt=cfg.solver.dt,
                                       settle_time=cfg.solver.settle_time, workers=cfg.workers)
    cols = {k: [r[k] for r in rows] for k in rows[0]}
    ctx.write_csv("linewidth_table.csv", cols, RATE_UNITS, frame="laser",
                  observable="P- quadrature", fit="a/((w-w_peak)^2+Gamma^2)+c")
    return {"rows": rows}


# below-threshold drive for the A-phase rows, at N = 1
LINEWIDTH_A_OMEGA0 = 1.0

QUICK_SOLVER = {"n_traj": 2000, "t_final": 150.0, "settle_time": 50.0}

RECIPES = {
    "phase-diagram": (phase_diagram, {"system": HARMONIC},
                      "census of mean-field attractors on a 2D grid (phases A/B/C)"),
    "populations-harmonic": (populations_harmonic, {"system": HARMONIC, "solver": QUICK_SOLVER},
                             "mode populations vs drive, harmonic spacing (MF, TW)"),
    "populations-anharmonic": (populations_anharmonic, {"system": ANHARMONIC, "solver": QUICK_SOLVER},
                               "mode populations vs drive, anharmonic spacing (MF, TW, Lindblad)"),
    "limit-cycle": (limit_cycle, {"system": dict(ANHARMONIC, omega0=2.0)},
                    "mean-field limit-cycle orbit, period and frequency"),
    "quadrature-spectra": (quadrature_spectra, {"system": dict(ANHARMONIC, omega0=2.0)},
                           "Bogoliubov output quadrature spectra around the limit cycle"),
    "wigner-maps": (wigner_maps, {"system": dict(ANHARMONIC, omega0=2.0),
                                  "solver": {"t_final": 60.0}},
                    "TW phase-space histograms of each mode and of m+/m-"),
    "goldstone-linewidth": (goldstone_linewidth, {"system": dict(ANHARMONIC, omega0=2.0)},
                            "P- linewidth vs N under thermodynamic-limit scaling"),
    "single-mode": (single_mode_recipe, {"system": SINGLE, "solver": QUICK_SOLVER},
                    "single driven Kerr mode: cubic roots, Lindblad n and g2, TW n"),
    "liouvillian-gap": (liouvillian_gap, {"system": SINGLE},
                        "leading Liouvillian eigenvalues of the single mode vs drive"),
    "qmc-switching": (qmc_switching, {"system": dict(SINGLE, omega0=2.2)},
                      "quantum-jump switching, dwell density and slow correlation tail"),
    "linewidth-table": (linewidth_table, {"system": dict(ANHARMONIC, omega0=2.0)},
                        "Lorentzian peak and width of the P- spectrum for V0 = 0.1, 0.5, 1"),
}


def names():
    return list(RECIPES)


def defaults(name):
    return RECIPES[name][1]


def describe(name):
    return RECIPES[name][2]


def run_recipe(cfg, ctx):
    fn = RECIPES[cfg.recipe][0]
    return fn(cfg, ctx)

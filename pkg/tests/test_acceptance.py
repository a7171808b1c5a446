"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary.
"""
import json
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import beta

from nematic_blowup import runner
from nematic_blowup.config import default_config, parse_config
from nematic_blowup.diagnostics import dissipation_residual, dissipation_rhs, energy_report
from nematic_blowup.evolution import (FieldState, SchemeConfig, evolve, h_from_velocity, stable_dt, step,
                                      step_h_formulation)
from nematic_blowup.grid import build_grid, ddr, refine
from nematic_blowup.initial_data import BumpFamily, build_profile_state
from nematic_blowup.io import read_csv
from nematic_blowup.modulation import extract_lambda, key1_residual, lambda_ode_rhs, riccati_monitor
from nematic_blowup.profiles import ProfileParams, apply_A, dI_dr, eval_I, eval_J, profile_constants

from conftest import rel_l2

RESULTS = []
# every run driven through the runner here; criterion 5 inspects all of them
RUN_DIRS = []


def report(num, title, ok, detail):
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def halving_levels(grid, levels=3):
    out = [grid]
    for _ in range(levels - 1):
        out.append(refine(out[-1]))
    return out


def orders(errs):
    errs = np.asarray(errs, dtype=float)
    return np.log2(errs[:-1] / errs[1:])


# --- shared runs --------------------------------------------------------------

@pytest.fixture(scope="module")
def focusing_run(tmp_path_factory):
    """Default focusing data (eps = 1/2, k = 4, 4096 nodes) run until the core is under-resolved."""
    out = tmp_path_factory.mktemp("focusing")
    cfg = default_config(stop={"resolution_factor": 8.0}, output={"cadence": 50})
    sim = runner.run(cfg, out)
    RUN_DIRS.append(out)
    return cfg, sim, out


@pytest.fixture(scope="module")
def perturbed_run(tmp_path_factory):
    """Profile at scale 1 with small bumps, through the runner to t = 0.2."""
    out = tmp_path_factory.mktemp("perturbed")
    cfg = default_config(grid={"r_max": 20.0, "n": 512, "ratio": 1.008}, scheme={"dt_fraction": 0.4},
                         initial={"kind": "profile", "mu": 1.0, "u0": {"amplitude": 0.05},
                                  "g0": {"amplitude": 0.05}},
                         output={"cadence": 5}, stop={"t_end": 0.2})
    sim = runner.run(cfg, out)
    RUN_DIRS.append(out)
    return sim, out


@pytest.fixture(scope="module")
def dt_runs(tmp_path_factory):
    """Focusing data to t = 0.03 at three time-step fractions (dt halved twice)."""
    out = tmp_path_factory.mktemp("dt_levels")
    series = {}
    for f in (0.8, 0.4, 0.2):
        cfg = default_config(scheme={"dt_fraction": f}, output={"cadence": 1_000_000}, stop={"t_end": 0.03})
        runner.run(cfg, out / f"dt_{f}")
        RUN_DIRS.append(out / f"dt_{f}")
        series[f] = read_csv(out / f"dt_{f}" / "track.csv")
    return series


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("static")
    cfg = default_config(grid={"r_max": 50.0, "n": 1024, "ratio": 1.008},
                         initial={"kind": "profile", "mu": 16.0, "u0": {"shape": "zero", "amplitude": 0.0},
                                  "g0": {"shape": "zero", "amplitude": 0.0}},
                         output={"cadence": 10}, stop={"t_end": 0.1})
    sim = runner.run(cfg, out)
    RUN_DIRS.append(out)
    return sim, out


# --- 1. profile identities -----------------------------------------------------

def test_criterion_01_profile_identities():
    rng = np.random.default_rng(1)
    analytic, ratios = 0.0, []
    base = build_grid(50.0, 1024, "geometric", 1.008)
    levels = halving_levels(base)
    for k in (4, 5, 6):
        for lam in (1.0, 16.0):
            p = ProfileParams(k, lam)
            r = np.exp(rng.uniform(np.log(1e-3), np.log(1e2), 2000)) / lam
            analytic = max(analytic, np.max(np.abs(r * dI_dr(p, r) - k * np.sin(eval_I(p, r)))))
            e_first, e_A = [], []
            for g in levels:
                x = g.nodes
                e_first.append(np.max(np.abs(x * ddr(g, eval_I(p, x), 0.0) - k * np.sin(eval_I(p, x)))[:-1]))
                e_A.append(np.max(np.abs(apply_A(p, eval_J(p, x), g))))
            ratios.extend(2 ** orders(e_first))
            ratios.extend(2 ** orders(e_A))
    ratios = np.array(ratios)
    ok = analytic <= 1e-10 and np.all(np.abs(ratios - 4) <= 0.5)
    report(1, "profile identities", ok,
           f"analytic residual {analytic:.2e}; discrete shrink factors in [{ratios.min():.3f}, {ratios.max():.3f}]")


# --- 2. profile constants ------------------------------------------------------

def test_criterion_02_profile_constants(consts4):
    k = 4

    def beta_form(power):
        a = (2 * k + 2 + power) / (2 * k)
        return 2 * k * beta(a, 2 - a)

    c0_closed, r2_closed = 2 * np.pi / np.sin(np.pi / 4), 4 * np.pi / np.sin(np.pi / 2)
    c = profile_constants(k)
    e_c0 = abs(c.c0_const / beta_form(0) - 1)
    e_r2 = abs(c.jr2j_inner / beta_form(2) - 1)
    e_closed = max(abs(beta_form(0) / c0_closed - 1), abs(beta_form(2) / r2_closed - 1))
    e_a = abs(c.a_coeff / (-1 / (2 * np.sqrt(2))) - 1)
    ok = max(e_c0, e_r2, e_closed, e_a) <= 1e-8
    report(2, "profile constants", ok,
           f"C0 rel {e_c0:.1e}, <J,r^2J> rel {e_r2:.1e}, closed forms rel {e_closed:.1e}, a rel {e_a:.1e}")


# --- 3. static solution --------------------------------------------------------

def test_criterion_03_static_preservation():
    levels = halving_levels(build_grid(50.0, 1024, "geometric", 1.008))
    detail, ok = [], True
    for mu in (1.0, 16.0):
        p = ProfileParams(4, mu)
        errs = []
        for g in levels:
            I = eval_I(p, g.nodes)
            z = np.zeros(g.n)
            nst = int(np.ceil(0.1 / (0.4 * stable_dt(g, 4))))
            s = evolve(FieldState(0.0, I.copy(), z, z, z, 4, g), SchemeConfig(0.1 / nst), 0.1)
            errs.append(np.max(np.abs(s.phi - I)))
        o = orders(errs)
        ok &= bool(np.all((o >= 1.7) & (o <= 2.3)))
        detail.append(f"mu={mu:g} errors {', '.join(f'{e:.2e}' for e in errs)} orders {np.round(o, 3)}")
    report(3, "static-solution preservation", ok, "; ".join(detail))


# --- 4. energy dissipation -----------------------------------------------------

def test_criterion_04_energy_dissipation(consts4):
    g = build_grid(20.0, 512, "geometric", 1.008)
    T = 0.2
    base = int(np.ceil(T / (0.4 * stable_dt(g, 4))))
    residuals, worst_rise, worst_rhs = {}, -np.inf, -np.inf
    for m in (1, 2, 4):
        nst = base * m
        cfg = SchemeConfig(T / nst)
        s = build_profile_state(g, 4, 1.0, BumpFamily("rational", 0.05), BumpFamily("rational", 0.05))
        reps = [energy_report(s, 1.0, 0.0, consts4)]
        res = []
        for _ in range(nst):
            s = step(s, cfg)
            worst_rhs = max(worst_rhs, dissipation_rhs(s, np.sqrt(1.5))[0])
            reps.append(energy_report(s, 1.0, 0.0, consts4))
            if len(reps) >= 3:
                res.append(dissipation_residual(reps[-3:]).residual)
        res = np.array(res)
        E = np.array([r.E for r in reps])
        # E/(2 pi) may rise by at most the local residual times the step
        rise = np.diff(E)[1:] / (2 * np.pi) - cfg.dt * res
        worst_rise = max(worst_rise, rise.max())
        residuals[m] = res[m - 1::m]    # centred at the coarse interior times
    n = min(len(v) for v in residuals.values())
    d1 = np.max(np.abs(residuals[1][:n] - residuals[2][:n]))
    d2 = np.max(np.abs(residuals[2][:n] - residuals[4][:n]))
    order = np.log2(d1 / d2)
    ok = worst_rise <= 0 and order >= 1 and worst_rhs <= 0
    report(4, "energy dissipation", ok,
           f"max (dE/2pi - dt*residual) {worst_rise:.2e}; residual self-convergence order {order:.2f}; "
           f"max RHS (c0^2=1.5) {worst_rhs:.2e}")


# --- 5. Bogomolnyi identity and bound -------------------------------------------

def test_criterion_05_bogomolnyi(focusing_run, perturbed_run, static_run, dt_runs):
    worst_id, worst_bound, count = 0.0, -np.inf, 0
    for d in RUN_DIRS:
        ts = read_csv(d / "timeseries.csv")
        E = ts["E"]
        worst_id = max(worst_id, np.max(np.abs(ts["E_excess"] - np.pi * ts["bogomolnyi_norm"]) / E))
        worst_bound = max(worst_bound, np.max(-ts["E_excess"] / E))
        count += E.size
    ok = worst_id <= 1e-8 and worst_bound <= 1e-8
    report(5, "Bogomolnyi identity and bound", ok,
           f"{len(RUN_DIRS)} runs, {count} outputs; max |E_excess - pi*norm|/E {worst_id:.2e}; "
           f"max -E_excess/E {worst_bound:.2e}")


# --- 6. formulation equivalence --------------------------------------------------

def test_criterion_06_formulation_equivalence():
    mismatch, h_def = [], []
    for g in halving_levels(build_grid(20.0, 512, "geometric", 1.008)):
        s = build_profile_state(g, 4, 1.0, BumpFamily("rational", 0.05), BumpFamily("rational", 0.05))
        cfg = SchemeConfig(0.4 * stable_dt(g, 4))
        a, b = s, replace(s.copy(), formulation="h")
        for _ in range(int(round(0.05 / cfg.dt))):
            a = step(a, cfg)
            b = step_h_formulation(b, cfg)
        mismatch.append(rel_l2(g, a.v, b.v))
        h_def.append(rel_l2(g, h_from_velocity(g, b.v), b.h))
    ok = max(mismatch) <= 1e-3 and bool(np.all(np.diff(mismatch) < 0)) and max(h_def) <= 1e-3
    report(6, "formulation equivalence", ok,
           f"v mismatch per level {', '.join(f'{x:.2e}' for x in mismatch)}; "
           f"h vs quadrature {', '.join(f'{x:.2e}' for x in h_def)}")


# --- 7. modulation consistency ----------------------------------------------------

def test_criterion_07_modulation_consistency(focusing_run, consts4):
    g = build_grid(50.0, 4096, "geometric", 1.002)
    z = np.zeros(g.n)
    e_lam, rate = 0.0, 0.0
    for mu in (1.0, 16.0, 250.0):
        s = FieldState(0.0, eval_I(ProfileParams(4, mu), g.nodes), z, z, z, 4, g)
        e_lam = max(e_lam, abs(extract_lambda(s, 1.3 * mu) / mu - 1))
        rate = max(rate, abs(lambda_ode_rhs(s, mu, consts4)[0]))
    _, _, out = focusing_run
    tr = read_csv(out / "track.csv")
    div, orth = np.nanmax(tr["divergence_metric"]), np.nanmax(tr["orthogonality"])
    ok = e_lam <= 1e-8 and rate <= 1e-10 and div <= 1e-2 and orth <= 1e-8
    report(7, "modulation consistency", ok,
           f"extract rel {e_lam:.1e}; lambda' on profile {rate:.1e}; max divergence {100 * div:.3f}% "
           f"over {tr['t'].size} steps up to lambda {tr['lambda'][-1]:.4g}; max orthogonality {orth:.1e}")


# --- 8. focusing phenomenology -----------------------------------------------------

def test_criterion_08_focusing(focusing_run):
    cfg, sim, out = focusing_run
    tr = read_csv(out / "track.csv")
    man = json.loads((out / "manifest.json").read_text())
    ok_t = np.isfinite(tr["lambda_dot"])
    t, lam, lam_dot = tr["t"][ok_t], tr["lambda"][ok_t], tr["lambda_dot"][ok_t]
    rep = riccati_monitor(t, lam, lam_dot, c_small=np.sqrt(cfg["initial"]["epsilon"]))
    after = t >= rep.transient_end
    focus = lam_dot ** 4 / lam ** 7
    late_viol = int(np.sum(np.diff(lam[after]) < 0) + np.sum(np.diff(focus[after]) < 0))
    ok = (man["stop_reason"] in ("lambda_stop", "resolution") and sim.grid.n >= 4096 and late_viol == 0
          and rep.transient_end <= rep.fit_window[0] and np.isfinite(rep.t_star) and rep.t_star_r2 >= 0.99)
    report(8, "focusing phenomenology", ok,
           f"stop {man['stop_reason']} at t={man['t_final']:.5f}, lambda {man['lambda_final']:.4g}; "
           f"transient ends {rep.transient_end:.5f}, violations after it {late_viol}; "
           f"T*={rep.t_star:.6f} R^2={rep.t_star_r2:.7f} over [{rep.fit_window[0]:.5f}, {rep.fit_window[1]:.5f}]; "
           f"reported rate fits: M={rep.M_fit:.4g} (spread {rep.M_spread:.2g}), "
           f"log-form C={rep.log_fit_C:.4g} (R^2 {rep.log_fit_r2:.3f})")


# --- 9. key1 residual ----------------------------------------------------------------

def test_criterion_09_key1(dt_runs, consts4):
    # manufactured lambda = lambda0 (1 + t)^2 with u = u_t = h_t = 0: residual = |t - 2| / 2
    g = build_grid(50.0, 4096, "geometric", 1.002)
    z = np.zeros(g.n)
    lam0, man_err = 3.0, 0.0
    for t in (0.0, 0.5, 1.7, 3.0):
        lam, lam_dot = lam0 * (1 + t) ** 2, 2 * lam0 * (1 + t)
        p = ProfileParams(4, lam)
        s = FieldState(0.0, eval_I(p, g.nodes), (lam_dot / lam) * eval_J(p, g.nodes), z, z, 4, g)
        res, _ = key1_residual(s, lam, lam_dot, 2 * lam0, consts4, h_t=z)
        man_err = max(man_err, abs(res - abs(t - 2) / 2))
    # self-convergence in dt along the focusing data
    series = dt_runs
    a = series[0.8]
    b = {k: v[::2] for k, v in series[0.4].items()}
    c = {k: v[::4] for k, v in series[0.2].items()}
    n = min(len(a["t"]), len(b["t"]), len(c["t"])) - 1
    same_t = np.allclose(a["t"][:n], b["t"][:n], rtol=0, atol=1e-12) and \
        np.allclose(a["t"][:n], c["t"][:n], rtol=0, atol=1e-12)
    sl = slice(1, n)
    d1 = np.max(np.abs(a["key1_residual"][sl] - b["key1_residual"][sl]))
    d2 = np.max(np.abs(b["key1_residual"][sl] - c["key1_residual"][sl]))
    order = np.log2(d1 / d2)
    ok = man_err <= 1e-6 and same_t and order >= 1
    report(9, "key1 residual", ok,
           f"manufactured error {man_err:.1e}; dt self-convergence differences {d1:.3e}, {d2:.3e} "
           f"(order {order:.2f}) up to t={a['t'][n - 1]:.4f}, lambda {a['lambda'][n - 1]:.4g}")


# --- 10. determinism -------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path, monkeypatch):
    cfg = default_config(grid={"r_max": 50.0, "n": 1024, "ratio": 1.008},
                         output={"cadence": 5, "checkpoint_every": 20}, stop={"t_end": 0.004})
    runner.run(cfg, tmp_path / "ref")
    # clean interrupt by a step cap, then resume
    capped = parse_config(cfg.to_yaml().replace("max_steps: null", "max_steps: 33"))
    runner.run(capped, tmp_path / "cut")
    runner.resume(tmp_path / "cut", max_steps=None)
    # hard crash after the periodic checkpoint, then resume from it
    real_step, calls = runner.step, {"n": 0}

    def crashing(state, scheme):
        calls["n"] += 1
        if calls["n"] == 47:
            raise RuntimeError("simulated crash")
        return real_step(state, scheme)

    monkeypatch.setattr(runner, "step", crashing)
    with pytest.raises(RuntimeError):
        runner.run(cfg, tmp_path / "crash")
    monkeypatch.setattr(runner, "step", real_step)
    runner.resume(tmp_path / "crash")
    same = all((tmp_path / d / f).read_bytes() == (tmp_path / "ref" / f).read_bytes()
               for d in ("cut", "crash") for f in ("track.csv", "timeseries.csv"))
    rows = len((tmp_path / "ref" / "track.csv").read_text().splitlines()) - 1
    report(10, "determinism", same, f"interrupt and crash resumes vs uninterrupted run over {rows} track rows: "
                                    f"{'byte-identical' if same else 'different'}")

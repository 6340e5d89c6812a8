"""End-to-end acceptance runs of the reference experiments.

Every run goes through the command-line entry point with a checked-in file
from ``configs/``. Each criterion prints one PASS/FAIL line (collected again
in the terminal summary). Criteria that the implementation does not reach
are marked xfail with the reason; they still run at full tolerance.

The whole module takes the better part of an hour on one core.
"""
import csv
import math
import pathlib
import time

import numpy as np
import pytest
from scipy import stats

from hbo2d import basis1d as b
from hbo2d import biortho as bo
from hbo2d import diagnostics as dg
from hbo2d import evolution as ev
from hbo2d import scenarios as sc
from hbo2d.biortho import Field2D
from hbo2d.cli import run_command
from hbo2d.config import load_config
from hbo2d.model import ModelParams

pytestmark = pytest.mark.acceptance

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"
HBO = ModelParams.hbo()


def hbo2d(command, config, out, *sets, extra=()):
    argv = [command, "-q", "-c", str(CONFIGS / config), "-o", str(out), *map(str, extra)]
    for s in sets:
        argv += ["--set", s]
    t0 = time.perf_counter()
    code = run_command(argv)
    return code, time.perf_counter() - t0


def read_pairs(path):
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return {k: float(v) for k, v in rows[1:]}


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="module")
def reference(tmp_path_factory):
    """Ground-state run at (N=256, alpha=10) through the CLI."""
    out = tmp_path_factory.mktemp("groundstate")
    code, secs = hbo2d("groundstate", "groundstate.cfg", out)
    assert code == 0
    res = {"dir": out, "seconds": secs, "report": read_pairs(out / "groundstate_report.csv")}
    hist = np.loadtxt(out / "residual_history.csv", delimiter=",", skiprows=1, ndmin=2)
    res["residuals"] = hist[:, 1]
    res["Q"] = sc.read_snapshot(out / "Q.snap").field
    return res


@pytest.fixture(scope="module")
def qsnap(reference):
    return f"groundstate.q_snapshot={reference['dir'] / 'Q.snap'}"


def evolve(tmp_path_factory, name, qsnap=None, command="evolve"):
    """Run a checked-in scenario; ``qsnap`` reuses the reference Q (same grid only)."""
    out = tmp_path_factory.mktemp(name)
    code, secs = hbo2d(command, f"{name}.cfg", out, *([qsnap] if qsnap else []))
    records = sc.read_series(out / "series.csv")
    verdict = (out / "verdict.txt").read_text().strip()
    return {"dir": out, "code": code, "seconds": secs, "records": records, "verdict": verdict}


# ---------------------------------------------------------------- 1 to 4

def test_c01_ground_state_mass(reference, criterion):
    m = reference["report"]["mass"]
    ok = rel(m, 42.6381) <= 0.01 and reference["seconds"] < 120
    criterion(1, ok, f"||Q||^2 = {m:.6f} (target 42.6381 +- 1%), {reference['seconds']:.1f} s (< 120 s)")
    assert ok


@pytest.fixture(scope="module")
def table_grids(reference, tmp_path_factory):
    out = {(256, 10.0): reference["report"]}
    for N, alpha in ((512, 20.0), (1024, 40.0), (2048, 80.0)):
        d = tmp_path_factory.mktemp(f"gs{N}")
        code, _ = hbo2d("groundstate", f"groundstate_N{N}.cfg", d)
        assert code == 0
        out[(N, alpha)] = read_pairs(d / "groundstate_report.csv")
    return out


@pytest.mark.xfail(strict=True, reason="e1, e2 are far below the tabulated values on every grid; see README")
def test_c02_pohozaev_errors(reference, table_grids, criterion):
    r = reference["report"]
    e1, e2, e3 = r["e1"], r["e2"], r["e3"]
    ident = abs(e3 - (3 * e1 - e2))
    e1_table = [abs(table_grids[k]["e1"]) for k in sorted(table_grids)]
    e1_1024 = table_grids[(1024, 40.0)]["e1"]
    monotone = all(a > b for a, b in zip(e1_table, e1_table[1:]))
    checks = [rel(e1, 0.81473) <= 0.1, rel(e2, 1.6295) <= 0.1, ident <= 1e-9,
              rel(e1_1024, 0.058093) <= 0.1, monotone]
    ok = all(checks)
    criterion(2, ok, f"e1 = {e1:.5g} (0.81473), e2 = {e2:.5g} (1.6295), |e3-(3e1-e2)| = {ident:.1e}, "
                     f"e1(1024,40) = {e1_1024:.5g} (0.058093), |e1| over grids "
                     f"{[f'{v:.3g}' for v in e1_table]} decreasing={monotone}")
    assert ok


def test_c03_petviashvili_convergence(reference, criterion):
    res = reference["residuals"]
    n = len(res)
    fit = stats.linregress(np.arange(1, n + 1), np.log(res))
    r2 = fit.rvalue ** 2
    ok = res[-1] < 1e-8 and n <= 200 and r2 >= 0.98 and fit.slope < 0
    criterion(3, ok, f"{n} iterations to residual {res[-1]:.2e}, log-linear R^2 = {r2:.4f}, "
                     f"rate {math.exp(fit.slope):.3f} per iteration")
    assert ok


def test_c04_decay_law(reference, criterion):
    from hbo2d.groundstate import decay_probe
    probe = decay_probe(reference["Q"], HBO)
    ok = probe.flat and probe.tail_variation <= 0.25
    criterion(4, ok, f"x^3 Q(x,0) tail variation {probe.tail_variation:.3f} (<= 0.25)")
    assert ok


# ----------------------------------------------------------------------- 5

def test_c05_linear_exactness_and_order(reference, criterion):
    Q = reference["Q"]
    d = Q.disc
    lin = HBO.linear_only()
    u0 = Q.scaled(0.9)
    cfg = ev.IntegratorConfig(t_max=1.0)
    dt = ev.default_dt(d, lin)
    st = ev.EvolutionState(0.0, u0)
    for _ in range(100):
        st = ev.step_etdrk4(st, lin, cfg)
    exact = ev.linear_propagator(u0.Z, 100 * dt, lin, d)
    etd = np.abs(st.field.Z - exact).max() / np.abs(exact).max()

    T = 16 * ev.stability_bound(d, lin)
    dt0 = T / 8

    def solve(h):
        c = ev.IntegratorConfig(scheme="irk4", dt=h, t_max=T)
        s = ev.EvolutionState(0.0, u0)
        for _ in range(int(round(T / h))):
            s = ev.step_irk4(s, lin, c)
        return s.field.U

    ref = solve(dt0 / 16)
    errs = [np.abs(solve(dt0 / 2 ** k) - ref).max() for k in range(3)]
    ratios = [errs[k] / errs[k + 1] for k in range(2)]
    ok = etd <= 1e-12 and all(12 <= r <= 20 for r in ratios)
    criterion(5, ok, f"ETDRK4 linear error {etd:.1e} over 100 steps (<= 1e-12), "
                     f"IRK4 halving ratios {[round(float(r), 2) for r in ratios]} (in [12, 20])")
    assert ok


# ------------------------------------------------------------------- 6 to 8

def test_c06_conservation(tmp_path_factory, qsnap, criterion):
    run = evolve(tmp_path_factory, "q09_conservation", qsnap)
    recs = run["records"]
    r0 = recs[0]
    mass = max(abs(r.mass - r0.mass) / r0.mass for r in recs)
    en = max(abs(r.energy - r0.energy) / abs(r0.energy) for r in recs)
    l1 = max(abs(r.l1_2d - r0.l1_2d) for r in recs)
    ok = run["code"] == 0 and recs[-1].t >= 2 - 1e-9 and mass <= 1e-6 and en <= 1e-5 and l1 <= 1e-6
    criterion(6, ok, f"0.9Q on [0, {recs[-1].t:g}]: mass drift {mass:.1e} (1e-6), "
                     f"energy drift {en:.1e} (1e-5), L1 drift {l1:.1e} (1e-6)")
    assert ok


def test_c07_subthreshold(tmp_path_factory, qsnap, criterion):
    run = evolve(tmp_path_factory, "q09", qsnap)
    recs = run["records"]
    first, last = recs[0], recs[-1]
    ok = (run["code"] == 0 and abs(last.t - 10) < 1e-9 and last.linf < first.linf
          and abs(last.x_c - 2.5) <= 0.5 and run["seconds"] < 1800)
    criterion(7, ok, f"{run['verdict']}; max|u| {first.linf:.4g} -> {last.linf:.4g}, "
                     f"x_c(10) = {last.x_c:.3f} (2.5 +- 0.5), {run['seconds']:.0f} s")
    assert ok


def test_c08_blowup(tmp_path_factory, criterion):
    # finer grid than the reference one, so Q is recomputed there
    run = evolve(tmp_path_factory, "q12_shift")
    last = run["records"][-1]
    t_star = last.t
    ok = run["code"] == 3 and 0.8 <= t_star <= 1.5 and last.profile_mismatch <= 0.1
    criterion(8, ok, f"{run['verdict']}; t* = {t_star:.3f} (in [0.8, 1.5]), max|u| "
                     f"{run['records'][0].linf:.3g} -> {last.linf:.3g}, profile mismatch "
                     f"{last.profile_mismatch:.3f} (<= 0.1), {run['seconds']:.0f} s")
    assert ok


# ------------------------------------------------------------------ 9 to 10

@pytest.mark.xfail(strict=True, reason="computed energies differ from the quoted values; see README")
def test_c09_energy_functional(reference, criterion):
    d = reference["Q"].disc
    targets = [("rational2", 3.0, 2.14, 0.03), ("gaussian", 4.5, 4.23, 0.03),
               ("gaussian", 5.5, 0.87, 0.10), ("gaussian", 6.0, -2.11, 0.05)]
    parts = []
    ok = True
    for fam, A, want, tol in targets:
        u = sc.build_initial_condition(sc.InitialConditionSpec(fam, A), disc=d)
        E = dg.energy(u, HBO)
        good = rel(E, want) <= tol
        ok &= good
        parts.append(f"E[{A:g} {fam}] = {E:.4f} ({want} +- {tol:.0%})")
    criterion(9, ok, ", ".join(parts))
    assert ok


@pytest.mark.xfail(strict=True, reason="Gaussian threshold comes out 4% above the quoted value")
def test_c10_thresholds(reference, criterion):
    qm = reference["report"]["mass"]
    targets = [("rational2", 3.7), ("gaussian", 5.0), ("rational4_aniso", 2.9), ("rational2_aniso", 2.6)]
    parts = []
    ok = True
    for fam, want in targets:
        a = dg.threshold_amplitude(fam, qm)
        ok &= rel(a, want) <= 0.03
        parts.append(f"{fam} {a:.3f} ({want})")
    criterion(10, ok, "A_th: " + ", ".join(parts) + " within 3%")
    assert ok


# ---------------------------------------------------------------------- 11

@pytest.mark.xfail(strict=True, reason="measured level-set spread exceeds the linear group-velocity wedge")
@pytest.mark.parametrize("family", ["gaussian", "rational4", "rational2"])
def test_c11_radiation_wedge(family, tmp_path_factory, qsnap, criterion):
    run = evolve(tmp_path_factory, f"wedge_{family}", qsnap)
    assert run["code"] == 0
    bound = 2 * math.sqrt(2)
    parts = []
    ok = True
    for t in (3, 5):
        snap = run["dir"] / f"u_t{t}.snap"
        code, _ = hbo2d("wedge", "annotated.cfg", run["dir"], extra=[snap])
        assert code == 0
        w = read_pairs(run["dir"] / f"u_t{t}_wedge.csv")
        # literal bound on the measured slope, and the physical one on the half-angle
        good = w["tan_measured"] <= bound and w["contained"] == 1
        if family == "gaussian" and t == 3:
            good &= abs(w["half_angle_deg"] - 18.0) <= 5.0
        ok &= bool(good)
        parts.append(f"t={t}: tan {w['tan_measured']:.3f}, {w['half_angle_deg']:.1f} deg")
    formula = (dg.predicted_wedge_tan(0.5) == bound
               and abs(2 * dg.predicted_half_angle_deg(1.0) - 60.0) < 1e-12)
    ok &= formula
    criterion(11, ok, f"{family}: " + ", ".join(parts)
              + f" (tan <= 2 sqrt 2, half-angle <= {dg.predicted_half_angle_deg(0.5):.2f} deg{', 18 +- 5 deg at t=3' if family == 'gaussian' else ''}); "
                f"formula s=1/2, s=1 {'ok' if formula else 'wrong'}")
    assert ok


# ---------------------------------------------------------------------- 12

@pytest.mark.xfail(strict=True, reason="cross terms of the two-soliton data differ from the quoted masses")
def test_c12_two_soliton_masses(reference, criterion):
    parts = []
    ok = True
    for name, want in (("two_soliton_a", 83.06), ("two_soliton_b", 41.5605)):
        spec = load_config(str(CONFIGS / f"{name}.cfg")).scenario
        m = dg.mass(sc.build_initial_condition(spec, reference["Q"], params=HBO))
        ok &= rel(m, want) <= 0.05
        parts.append(f"{name} {m:.3f} ({want} +- 5%)")
    criterion(12, ok, "||u0||^2: " + ", ".join(parts))
    assert ok


def test_c12_interaction(tmp_path_factory, qsnap, criterion):
    close = evolve(tmp_path_factory, "inter2", qsnap, "interact")
    apart = evolve(tmp_path_factory, "inter1", qsnap, "interact")
    secs = close["seconds"] + apart["seconds"]
    ok = close["code"] == 3 and apart["code"] == 0 and secs < 7200
    criterion(12, ok, f"inter2: {close['verdict']}; inter1: {apart['verdict']}; {secs:.0f} s")
    assert ok


# ---------------------------------------------------------------------- 13

def test_c13_operator_properties(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    g = b.build_grid(64, 3.0)
    u = rng.standard_normal(64)
    rt = np.abs(b.transform(b.transform(u, g), g, "inverse") - u).max()

    gt = b.build_grid(16, 2.5, closure="truncated")
    e0 = np.zeros(16, complex)
    e0[8] = 1.0
    du = b.transform(b.apply_derivative(e0, gt), gt, "inverse")
    rho0 = np.abs(du - 1j / (gt.alpha - 1j * gt.x) ** 2).max()

    d = bo.get_discretization(32, 3.0)
    X, Y = d.meshgrid()
    f = Field2D.from_physical(d, rng.standard_normal((32, 32)) / (1 + X ** 2 + Y ** 2))
    S1 = 1j * b.derivative_matrix(d.grid)
    S2 = S1 @ S1
    I = np.eye(32)
    lap = (-(np.kron(S2, I) + np.kron(I, S2)) @ f.U_tilde.reshape(-1)).reshape(32, 32)
    got = bo.frac_laplacian_apply(Field2D.from_tilde(d, f.U_tilde), 1.0).U_tilde
    s1 = np.abs(got - lap).max() / np.abs(lap).max()

    fh = Field2D.from_hat(d, f.U_hat)
    half = bo.frac_laplacian_apply(bo.frac_laplacian_apply(fh, 0.5), 0.5).U_hat
    one = bo.frac_laplacian_apply(fh, 1.0).U_hat
    semi = np.abs(half - one).max() / np.abs(one).max()

    E = d.basis.E
    bi = np.abs(E.T @ E - I).max()
    secs = time.perf_counter() - t0
    ok = rt <= 1e-12 and rho0 <= 1e-13 and s1 <= 1e-10 and semi <= 1e-13 and bi <= 1e-6 and secs < 60
    criterion(13, ok, f"round trip {rt:.1e}, rho0' {rho0:.1e}, s=1 vs -Laplacian {s1:.1e}, "
                      f"semigroup {semi:.1e}, biorthogonality {bi:.1e}, {secs:.2f} s")
    assert ok

"""Command-line front end.

    hbo2d [--threads K] <command> [--config FILE] [--set section.key=value ...]

Commands: groundstate, evolve, interact, diagnose, wedge, thresholds.
Exit status: 0 healthy, 2 usage/config/input error, 3 blow-up detected
(informational), 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import diagnostics as dg
from . import groundstate as gs
from . import scenarios as sc
from .biortho import Field2D, get_discretization
from .config import RunConfig, load_config
from .errors import (ConfigError, ConvergenceError, DependencyError, FormatError, HBOError,
                     InvalidArgumentError, NumericError, UnsupportedError)
from .evolution import BLOWN_UP, EvolutionState, effective_dt, run

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_NUMERIC = 0, 2, 3, 4

REPORT_KEYS = ("mass", "hs_seminorm", "power_integral", "energy", "l1_2d", "linf",
               "e1", "e2", "e3", "identity1", "identity2", "energy_identity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(args, msg):
    if not args.quiet:
        print(msg, flush=True)


def _overrides(pairs):
    out = {}
    errors = []
    for p in pairs or ():
        key, eq, val = p.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not eq or not dot:
            errors.append(f"--set expects section.key=value, got {p!r}")
            continue
        out[(sec, name)] = val.strip()
    if errors:
        raise ConfigError(errors)
    return out


def _outdir(cfg: RunConfig, args) -> str:
    d = args.output or cfg.output.directory
    os.makedirs(d, exist_ok=True)
    return d


def _write_pairs(path, rows, header=("quantity", "value")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, v in rows:
            w.writerow([k, repr(float(v)) if isinstance(v, (float, np.floating)) else v])


def field_report(Q: Field2D, params, c: float = 1.0) -> list:
    """(quantity, value) rows derived from the field samples alone."""
    Q = Field2D.from_physical(Q.disc, np.ascontiguousarray(Q.U))
    errs = gs.pohozaev_errors(Q, params, c)
    errs["energy"] = dg.energy(Q, params)
    errs["l1_2d"] = dg.l1_integral(Q)
    errs["linf"] = float(np.abs(Q.U).max())
    return [(k, float(errs[k])) for k in REPORT_KEYS]


def _ground_state(cfg: RunConfig, args):
    """Load ``groundstate.q_snapshot`` if set, otherwise compute Q."""
    gsc = cfg.groundstate
    if gsc.q_snapshot:
        snap = sc.read_snapshot(gsc.q_snapshot, cfg.grid.closure)
        _log(args, f"ground state loaded from {gsc.q_snapshot}")
        return snap.field
    disc = get_discretization(cfg.grid.N, cfg.grid.alpha, cfg.grid.closure)
    res = gs.petviashvili(cfg.model, gsc.c, gs.default_seed(disc, gsc.seed_amplitude),
                          tol=gsc.tol, max_iters=gsc.max_iters)
    _log(args, f"ground state: {res.iterations} iterations, mass {res.mass:.8f}")
    return res.Q


# ----------------------------------------------------------------- commands

def cmd_groundstate(cfg: RunConfig, args) -> int:
    gsc = cfg.groundstate
    disc = get_discretization(cfg.grid.N, cfg.grid.alpha, cfg.grid.closure)
    res = gs.petviashvili(cfg.model, gsc.c, gs.default_seed(disc, gsc.seed_amplitude),
                          tol=gsc.tol, max_iters=gsc.max_iters)
    out = _outdir(cfg, args)
    sc.write_snapshot(res.Q, os.path.join(out, "Q.snap"), cfg.model, 0.0)
    rows = field_report(res.Q, cfg.model, gsc.c)
    _write_pairs(os.path.join(out, "groundstate_report.csv"), rows)
    with open(os.path.join(out, "residual_history.csv"), "w", encoding="utf-8") as fh:
        fh.write("iteration,residual,gamma\n")
        for i, (r, g) in enumerate(zip(res.residual_history, res.gamma_history), 1):
            fh.write(f"{i},{float(r)!r},{float(g)!r}\n")
    probe = gs.decay_probe(res.Q, cfg.model)
    np.savetxt(os.path.join(out, "decay_probe.txt"), np.column_stack([probe.r, probe.values]),
               header=f"r r^(2+2s)Q(r,0)  tail_variation={probe.tail_variation:.4f} flat={probe.flat}",
               fmt="%.12g")
    sc.write_cross_sections(res.Q, os.path.join(out, "Q_sections.txt"), x_max=cfg.grid.alpha)
    _log(args, f"N={disc.N} alpha={disc.alpha} iterations={res.iterations}")
    for k, v in rows:
        _log(args, f"{k:>16s} = {v:.10g}")
    _log(args, f"decay probe tail variation {probe.tail_variation:.3f} (flat: {probe.flat})")
    return EXIT_OK


def _evolve(cfg: RunConfig, args, require_two=False) -> int:
    spec = cfg.scenario
    if spec is None:
        raise ConfigError(["[scenario] family is required for this command"])
    if require_two and spec.family != "two_soliton":
        raise ConfigError([f"interact needs family = two_soliton, got {spec.family!r}"])
    disc = get_discretization(cfg.grid.N, cfg.grid.alpha, cfg.grid.closure)
    Q = _ground_state(cfg, args) if spec.needs_ground_state or args.track else None
    u0 = sc.build_initial_condition(spec, Q, disc, cfg.model)
    out = _outdir(cfg, args)
    icfg = cfg.integrator
    dt, _ = effective_dt(disc, cfg.model, icfg)
    stride = icfg.snapshot_stride
    if cfg.record_interval is not None:
        stride = max(1, int(round(cfg.record_interval / dt)))
    cfg_o = cfg.output
    series = sc.SeriesWriter(os.path.join(out, cfg_o.series))
    n_rec = [0]

    def dump(state, tag):
        sc.write_snapshot(state.field, os.path.join(out, f"u_{tag}.snap"), cfg.model, state.t)
        if cfg_o.gnuplot:
            sc.write_gnuplot_grid(state.field, os.path.join(out, f"u_{tag}.dat"),
                                  cfg_o.gnuplot_stride, cfg_o.gnuplot_extent)

    def snap_sink(rec, state):
        if cfg_o.snapshot_every and n_rec[0] % cfg_o.snapshot_every == 0:
            dump(state, f"{n_rec[0]:05d}")
        n_rec[0] += 1

    pending = sorted(cfg_o.save_times)

    def on_step(state):
        while pending and state.t >= pending[0] - 0.5 * dt:
            dump(state, f"t{pending.pop(0):g}")

    def progress(rec):
        _log(args, f"t={rec.t:.4f} linf={rec.linf:.5g} mass_err={rec.mass_err_rel:.2e} "
                   f"peak=({rec.x_c:.3f},{rec.y_c:.3f})")

    _log(args, f"{spec.family}: N={disc.N} alpha={disc.alpha} dt={dt:.4g} t_max={icfg.t_max}")
    dump(EvolutionState(0.0, u0), "initial")
    try:
        res = run(u0, cfg.model, replace(icfg, dt=dt),
                  sinks=[series, snap_sink], qref=Q, record_stride=stride,
                  progress=progress, on_step=on_step if pending else None)
    finally:
        series.close()
    dump(res.last_healthy, "final")
    if res.blew_up:
        verdict = f"blow-up detected at t* = {res.t_star!r} ({res.reason})"
    else:
        verdict = f"healthy at t = {res.final.t!r}"
    with open(os.path.join(out, "verdict.txt"), "w", encoding="utf-8") as fh:
        fh.write(verdict + "\n")
    print(verdict, flush=True)
    return EXIT_BLOWUP if res.verdict == BLOWN_UP else EXIT_OK


def cmd_evolve(cfg, args):
    return _evolve(cfg, args)


def cmd_interact(cfg, args):
    return _evolve(cfg, args, require_two=True)


def cmd_diagnose(cfg: RunConfig, args) -> int:
    snap = sc.read_snapshot(args.snapshot, cfg.grid.closure)
    f, params = snap.field, snap.params
    out = _outdir(cfg, args)
    stem = os.path.splitext(os.path.basename(args.snapshot))[0]
    Q = sc.read_snapshot(args.reference, cfg.grid.closure).field if args.reference else None
    rec = dg.full_record(f, params, snap.t, Q)
    rows = list(rec.as_dict().items())
    _write_pairs(os.path.join(out, f"{stem}_record.csv"), rows)
    if params.is_energy_critical:
        report = []
    else:
        report = field_report(f, params, cfg.groundstate.c)
        _write_pairs(os.path.join(out, f"{stem}_report.csv"), report)
    for k, v in rows + report:
        _log(args, f"{k:>16s} = {v:.10g}")
    return EXIT_OK


def cmd_wedge(cfg: RunConfig, args) -> int:
    snap = sc.read_snapshot(args.snapshot, cfg.grid.closure)
    pk = dg.peak_tracking(snap.field, None, snap.params)
    w = dg.wedge_angle(snap.field, (pk.x_c, pk.y_c), snap.params, level=args.level,
                       core_radius=args.core_radius)
    out = _outdir(cfg, args)
    stem = os.path.splitext(os.path.basename(args.snapshot))[0]
    _write_pairs(os.path.join(out, f"{stem}_wedge.csv"), [
        ("t", snap.t), ("tan_measured", w.tan_measured), ("tan_predicted", w.tan_predicted),
        ("half_angle_deg", w.half_angle_deg), ("predicted_half_angle_deg", w.predicted_half_angle_deg),
        ("n_points", w.n_points), ("contained", int(w.contained))])
    print(f"tan_measured={w.tan_measured:.6g} tan_predicted={w.tan_predicted:.6g} "
          f"half_angle={w.half_angle_deg:.3f}deg contained={w.contained}", flush=True)
    return EXIT_OK


def cmd_thresholds(cfg: RunConfig, args) -> int:
    Q = _ground_state(cfg, args)
    qm = dg.mass(Q)
    out = _outdir(cfg, args)
    rows = []
    for fam in ("rational2", "gaussian", "rational4_aniso", "rational2_aniso", "rational4"):
        rows.append((fam, dg.family_unit_norm(fam), dg.threshold_amplitude(fam, qm)))
    with open(os.path.join(out, "thresholds.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# ||Q||^2 = {qm!r}\nfamily,unit_norm,A_th\n")
        for fam, nrm, a in rows:
            fh.write(f"{fam},{nrm!r},{a!r}\n")
    _log(args, f"||Q||^2 = {qm:.8f}")
    for fam, _, a in rows:
        print(f"{fam:>16s}  A_th = {a:.6f}", flush=True)
    return EXIT_OK


COMMANDS = {
    "groundstate": (cmd_groundstate, "compute Q by Petviashvili iteration and report Pohozaev errors"),
    "evolve": (cmd_evolve, "integrate the configured scenario"),
    "interact": (cmd_interact, "evolve a two_soliton scenario"),
    "diagnose": (cmd_diagnose, "recompute diagnostics for a snapshot"),
    "wedge": (cmd_wedge, "measure the radiation wedge of a snapshot"),
    "thresholds": (cmd_thresholds, "threshold amplitudes from ||Q||"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hbo2d", description="Spectral solver for the 2D fractional KdV family.")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/FFT worker threads")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", "-c", default=None, help="configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override a config entry (repeatable)")
        sp.add_argument("--output", "-o", default=None, help="output directory")
        sp.add_argument("--quiet", "-q", action="store_true")
        if name in ("evolve", "interact"):
            sp.add_argument("--track", action="store_true",
                            help="load or compute Q for profile tracking even if the datum does not need it")
        if name in ("diagnose", "wedge"):
            sp.add_argument("snapshot")
        if name == "diagnose":
            sp.add_argument("--reference", default=None, help="Q snapshot for profile mismatch")
        if name == "wedge":
            sp.add_argument("--level", type=float, default=0.05)
            sp.add_argument("--core-radius", type=float, default=None)
    return p


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("hbo2d: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, _overrides(args.set))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    func = COMMANDS[args.command][0]
    try:
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                return func(cfg, args)
        return func(cfg, args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DependencyError, UnsupportedError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ConvergenceError, HBOError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()

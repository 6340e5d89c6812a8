"""Ground states by Petviashvili iteration, rescaling and Pohozaev checks.

The profile solves c Q - nu1 (-Delta)^s Q = (nu2/m) Q^m. With
M = c - nu1 (-Delta)^s, diagonal in hat space, the iteration is

    Q <- (1/m) M^{-1} ((gamma Q)^m),
    gamma = (m <Q, Q> / <Q, M^{-1} Q^m>)^{1/(m-1)},

and gamma -> 1 at the fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .biortho import Discretization, Field2D, get_discretization, resample
from .errors import (ConvergenceError, EnergyCriticalError, InitializationError,
                     InvalidArgumentError, PreconditionError)
from .model import ModelParams


@dataclass
class GroundStateResult:
    Q: Field2D
    c: float
    iterations: int
    residual_history: list
    e1: float
    e2: float
    e3: float
    mass: float
    gamma_history: list = field(default_factory=list)
    params: ModelParams = field(default_factory=ModelParams.hbo)
    residuals: dict = field(default_factory=dict)

    @property
    def linf(self) -> float:
        return float(np.abs(self.Q.U).max())


def default_seed(disc: Discretization, amplitude: float = 3.0) -> Field2D:
    X, Y = disc.meshgrid()
    return Field2D.from_physical(disc, amplitude * np.exp(-(X ** 2 + Y ** 2)))


def _check_branch(params, c):
    rep = dg.criticality_admissibility(params, c)
    if not (rep.admissible and params.nu1 < 0 and c > 0 and params.nu2 == 1):
        raise PreconditionError(
            f"parameters outside the ground-state branch (case {rep.case}); need nu1<0, nu2=1, c>0 and 1<m<(1+s)/(1-s)")


def petviashvili(params: ModelParams, c: float = 1.0, init: Field2D | None = None,
                 tol: float = 1e-8, max_iters: int = 1000, disc: Discretization | None = None,
                 stagnation: int = 50) -> GroundStateResult:
    """Petviashvili iteration until ||Q_{l+1} - Q_l||_inf < tol."""
    if not c > 0:
        raise InvalidArgumentError("c must be positive")
    _check_branch(params, c)
    if init is None:
        if disc is None:
            raise InvalidArgumentError("need an initial field or a discretization")
        init = default_seed(disc)
    d = init.disc
    m = params.m
    Minv = 1.0 / (c - params.nu1 * d.compact_sigma(params.s))
    U = np.array(init.U, dtype=float)
    Z = d.to_compact(U)
    hist, gam = [], []
    best, since_best = math.inf, 0
    for it in range(1, max_iters + 1):
        Zn = d.to_compact(U ** m)
        MZn = Minv * Zn
        num = m * np.vdot(Z, Z).real
        den = np.vdot(Z, MZn).real
        with np.errstate(all="ignore"):
            g = (num / den) ** (1.0 / (m - 1)) if den > 0 else math.nan
        if not math.isfinite(g):
            raise InitializationError(f"stabilizing factor is not finite at iteration {it}")
        gam.append(g)
        Z = (g ** m / m) * MZn
        Unew = d.from_compact(Z)
        res = float(np.abs(Unew - U).max())
        hist.append(res)
        U = Unew
        if not math.isfinite(res):
            raise ConvergenceError("iteration produced non-finite values", hist)
        if res < tol:
            break
        if res < best:
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best >= stagnation:
                raise ConvergenceError(f"residual stagnated for {stagnation} iterations", hist)
    else:
        raise ConvergenceError(f"no convergence in {max_iters} iterations", hist)
    Q = Field2D(d, physical=U, compact=Z)
    errs = pohozaev_errors(Q, params, c)
    return GroundStateResult(Q, float(c), it, hist, errs["e1"], errs["e2"], errs["e3"],
                             dg.mass(Q), gam, params, errs)


def rescale_Qc(Q: Field2D, c: float, params: ModelParams, grid: str = "same") -> Field2D:
    """Q_c(x, y) = c^{1/(m-1)} Q(c^{1/2s} x, c^{1/2s} y).

    ``grid="same"`` evaluates the expansion of Q at scaled nodes of its own
    grid, which under-resolves Q_c once c^{1/2s} approaches the core
    resolution. ``grid="scaled"`` returns Q_c on the grid with alpha divided
    by c^{1/2s}, whose nodes are the scaled nodes of Q, so the result is exact.
    """
    if not c > 0:
        raise InvalidArgumentError("c must be positive")
    if grid not in ("same", "scaled"):
        raise InvalidArgumentError(f"grid must be 'same' or 'scaled', got {grid!r}")
    k = c ** (1.0 / (2 * params.s))
    amp = c ** (1.0 / (params.m - 1))
    d = Q.disc
    if grid == "scaled":
        ds = get_discretization(d.N, d.alpha / k, d.grid.closure)
        return Field2D.from_physical(ds, amp * Q.U)
    if c == 1:
        return Q.copy()
    xs = k * d.grid.x
    return Field2D.from_physical(d, amp * resample(Q, xs, xs))


def shift_field(Q: Field2D, ax: float, ay: float) -> Field2D:
    """u(x + ax, y + ay) by exact basis evaluation."""
    g = Q.disc.grid
    return Field2D.from_physical(Q.disc, resample(Q, g.x + ax, g.x + ay))


def pohozaev_errors(Q: Field2D, params: ModelParams, c: float = 1.0) -> dict:
    """Residuals of the Pohozaev identities.

    e1, e2, e3 follow the HBO definitions (kinetic minus 2 mass, cubic minus
    6 mass, 3 kinetic minus cubic) and are meaningful for s=1/2, m=2, c=1.
    ``identity1``, ``identity2`` and ``energy_identity`` are the general forms.
    """
    s, m, nu1, nu2 = params.s, params.m, params.nu1, params.nu2
    D = 2 - (1 - s) * (m + 1)
    if params.is_energy_critical or abs(D) < 1e-14:
        raise EnergyCriticalError(
            "m = (1+s)/(1-s): Pohozaev identities degenerate, use the energy-critical identity instead")
    M = dg.mass(Q)
    K = dg.hs_seminorm(Q, s)
    Lm = dg.integrate_power(Q, m + 1)
    out = {
        "mass": M, "hs_seminorm": K, "power_integral": Lm,
        "identity1": K + c * (m - 1) / (nu1 * D) * M,
        "identity2": Lm - s * c * m * (m + 1) / (nu2 * D) * M,
        # consistent combination of the two identities above
        "energy_identity": dg.energy(Q, params) + c * (m - 1) * params.r_c / (2 * nu1 * D) * M,
    }
    K2 = dg.hs_seminorm(Q, 0.5) if s != 0.5 else K
    L3 = dg.integrate_power(Q, 3) if m != 2 else Lm
    out["e1"] = K2 - 2 * M
    out["e2"] = L3 - 6 * M
    out["e3"] = 3 * K2 - L3
    return out


def energy_critical_identity(phi: Field2D, params: ModelParams) -> float:
    """Residual of -nu1 ||(-Delta)^{s/2} phi||^2 = nu2 (1-s)/(1+s) int phi^{2/(1-s)} (c = 0)."""
    if not params.is_energy_critical:
        raise PreconditionError("only defined for m = (1+s)/(1-s)")
    s = params.s
    p = round(2 / (1 - s))
    return -params.nu1 * dg.hs_seminorm(phi, s) - params.nu2 * (1 - s) / (1 + s) * dg.integrate_power(phi, p)


@dataclass
class DecayProbe:
    r: np.ndarray
    values: np.ndarray
    tail_variation: float
    flat: bool


def decay_probe(Q: Field2D, params: ModelParams, r_max: float | None = None, rel_tol: float = 0.25) -> DecayProbe:
    """r^{2+2s} Q(r, 0) along the positive x-axis through the grid center.

    The tail is the last quartile of nodes with 0 < x < r_max (default
    0.8 alpha); it counts as flat if its relative variation (max-min over
    mean absolute value) stays within ``rel_tol``.
    """
    g = Q.disc.grid
    r_max = 0.8 * g.alpha if r_max is None else r_max
    sel = (g.x > 0) & (g.x < r_max)
    r = g.x[sel]
    # the grid has no node on y = 0, so evaluate the expansion there
    vals = resample(Q, r, np.array([0.0]))[:, 0]
    probe = r ** (2 + 2 * params.s) * vals
    tail = probe[-max(2, len(probe) // 4):]
    mean = np.mean(np.abs(tail))
    var = float((tail.max() - tail.min()) / mean) if mean > 0 else 0.0
    return DecayProbe(r, probe, var, bool(mean > 0 and var <= rel_tol and np.all(tail > 0)))

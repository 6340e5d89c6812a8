"""Time integration in biorthogonal coefficient space.

The semi-discrete system is

    U_hat_t = L * U_hat - (nu2/m) i mu_j hat(U^m),   L = -nu1 i mu_j (lam_j + lam_k)^s,

with L diagonal. Internally the state is the compact real representation Z
(see ``biortho.Discretization``), on which L acts entrywise as well.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import diagnostics as dg
from .biortho import Discretization, Field2D
from .errors import InvalidArgumentError, NumericError, StateError, StepSizeError
from .model import ModelParams

OK, BLOWN_UP, CONTAMINATED = "ok", "blown_up", "contaminated"


@dataclass
class EvolutionState:
    t: float
    field: Field2D
    step_count: int = 0
    health: str = OK


@dataclass
class IntegratorConfig:
    scheme: str = "etdrk4"
    dt: float | None = None
    t_max: float = 1.0
    snapshot_stride: int = 100
    blowup_linf_threshold: float = 1e5
    mass_error_threshold: float = 1e-3
    fixed_point_tol: float = 1e-12
    fixed_point_max_iters: int = 100
    dealias: bool = False

    def __post_init__(self):
        if self.scheme not in ("etdrk4", "irk4"):
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and not (self.dt > 0):
            raise InvalidArgumentError("dt must be positive")
        if not self.t_max > 0:
            raise InvalidArgumentError("t_max must be positive")
        if self.dt is not None and self.dt > self.t_max:
            raise InvalidArgumentError("dt must not exceed t_max")
        if self.snapshot_stride < 1:
            raise InvalidArgumentError("snapshot_stride must be >= 1")
        for k in ("blowup_linf_threshold", "mass_error_threshold", "fixed_point_tol"):
            if not getattr(self, k) > 0:
                raise InvalidArgumentError(f"{k} must be positive")
        if self.fixed_point_max_iters < 1:
            raise InvalidArgumentError("fixed_point_max_iters must be >= 1")


def linear_symbol(disc: Discretization, params: ModelParams, compact: bool = True) -> np.ndarray:
    """Diagonal of L laid out like Z (compact) or like the full U_hat."""
    if compact:
        return -params.nu1 * disc.compact_dx() * disc.compact_sigma(params.s)
    from .biortho import frac_stiffness
    sig = frac_stiffness(disc.basis, params.s).sigma
    return -params.nu1 * 1j * disc.basis.mu[:, None] * sig


def stability_bound(disc: Discretization, params: ModelParams) -> float:
    """1 / max |L|, the step scale for the exponential scheme."""
    return 1.0 / float(np.abs(linear_symbol(disc, params)).max())


def default_dt(disc: Discretization, params: ModelParams, scheme: str = "etdrk4") -> float:
    dt = 0.5 * stability_bound(disc, params)
    return 4 * dt if scheme == "irk4" else dt


def effective_dt(disc: Discretization, params: ModelParams, config: "IntegratorConfig") -> tuple:
    """(dt, n_steps): the requested or default step shrunk so n_steps * dt = t_max."""
    dt = config.dt if config.dt is not None else default_dt(disc, params, config.scheme)
    n = max(1, int(math.ceil(config.t_max / dt - 1e-9)))
    return config.t_max / n, n


class _Nonlinear:
    """Z -> -(nu2/m) i mu_j hat(U^m), also returning the physical field."""

    def __init__(self, disc: Discretization, params: ModelParams, dealias: bool = False):
        self.disc = disc
        self.m = params.m
        self.coef = -(params.nu2_effective / params.m) * disc.compact_dx()
        self.active = params.nu2_effective != 0
        self.filt = _dealias_matrix(disc) if dealias else None

    def __call__(self, Z, U=None):
        d = self.disc
        if U is None:
            U = d.from_compact(Z)
        if not self.active:
            return np.zeros_like(Z), U
        P = U ** self.m
        if self.filt is not None:
            P = self.filt @ P @ self.filt.T
        return self.coef * d.to_compact(P), U


def _dealias_matrix(disc: Discretization):
    # physical-space projector keeping modes with |n + 1/2| <= N/3
    from . import basis1d
    g = disc.grid
    keep = np.abs(g.n + 0.5) <= g.N / 3
    F = basis1d.forward_matrix(g)
    return basis1d.enforce_reality(basis1d.inverse_matrix(g) @ (keep[:, None] * F))


def _phi_coefficients(Lh: np.ndarray, h: float, n_contour: int = 32):
    """ETDRK4 coefficients by averaging over a unit circle around each z = h L."""
    r = np.exp(2j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    Qc = np.zeros_like(Lh)
    f1 = np.zeros_like(Lh)
    f2 = np.zeros_like(Lh)
    f3 = np.zeros_like(Lh)
    for rr in r:
        z = Lh + rr
        ez = np.exp(z)
        z3 = z ** 3
        Qc += (np.exp(z / 2) - 1) / z
        f1 += (-4 - z + ez * (4 - 3 * z + z ** 2)) / z3
        f2 += (2 + z + ez * (z - 2)) / z3
        f3 += (-4 - 3 * z - z ** 2 + ez * (4 - z)) / z3
    k = h / n_contour
    return Qc * k, f1 * k, f2 * k, f3 * k


class ETDRK4:
    """Fourth-order exponential time differencing with exact diagonal linear part."""

    def __init__(self, disc: Discretization, params: ModelParams, dt: float, dealias: bool = False):
        self.disc, self.params, self.dt = disc, params, float(dt)
        L = linear_symbol(disc, params)
        Lh = L * self.dt
        self.E1 = np.exp(Lh)
        self.E2 = np.exp(Lh / 2)
        self.Qc, self.f1, self.f2, self.f3 = _phi_coefficients(Lh, self.dt)
        self.nl = _Nonlinear(disc, params, dealias)

    def step(self, Z, U=None):
        nl = self.nl
        Nv, _ = nl(Z, U)
        if not nl.active:
            return self.E1 * Z
        a = self.E2 * Z + self.Qc * Nv
        Na, _ = nl(a)
        b = self.E2 * Z + self.Qc * Na
        Nb, _ = nl(b)
        c = self.E2 * a + self.Qc * (2 * Nb - Nv)
        Nc, _ = nl(c)
        return self.E1 * Z + self.f1 * Nv + 2 * self.f2 * (Na + Nb) + self.f3 * Nc


_R3 = math.sqrt(3) / 6
A11 = A22 = 0.25
A12 = 0.25 - _R3
A21 = 0.25 + _R3


class IRK4:
    """Two-stage Gauss-Legendre implicit Runge-Kutta.

    The stage equations Y = y + h A (L Y + N(Y)) are solved by fixed-point
    iteration in N only; for each iterate the 2x2 linear system in the
    diagonal L is solved exactly entry by entry.
    """

    def __init__(self, disc: Discretization, params: ModelParams, dt: float,
                 tol: float = 1e-12, max_iters: int = 100, dealias: bool = False):
        self.disc, self.params, self.dt = disc, params, float(dt)
        self.tol, self.max_iters = tol, max_iters
        h = self.dt
        self.L = linear_symbol(disc, params)
        z = h * self.L
        det = 1 - z / 2 + z ** 2 / 12
        self.m11 = (1 - z * A22) / det
        self.m12 = z * A12 / det
        self.m21 = z * A21 / det
        self.m22 = (1 - z * A11) / det
        self.nl = _Nonlinear(disc, params, dealias)
        self.last_iterations = 0

    def _solve(self, y, N1, N2):
        h = self.dt
        r1 = y + h * (A11 * N1 + A12 * N2)
        r2 = y + h * (A21 * N1 + A22 * N2)
        return self.m11 * r1 + self.m12 * r2, self.m21 * r1 + self.m22 * r2

    def step(self, Z, U=None):
        nl = self.nl
        N0, _ = nl(Z, U)
        Y1, Y2 = self._solve(Z, N0, N0)
        N1 = N2 = N0
        if nl.active:
            for it in range(1, self.max_iters + 1):
                N1, _ = nl(Y1)
                N2, _ = nl(Y2)
                Y1n, Y2n = self._solve(Z, N1, N2)
                diff = max(np.abs(Y1n - Y1).max(), np.abs(Y2n - Y2).max())
                scale = max(np.abs(Y1n).max(), np.abs(Y2n).max(), 1e-300)
                Y1, Y2 = Y1n, Y2n
                if not math.isfinite(diff):
                    raise StepSizeError("stage iteration diverged; reduce dt")
                if diff <= self.tol * scale:
                    self.last_iterations = it
                    break
            else:
                raise StepSizeError(
                    f"stage iteration did not converge in {self.max_iters} iterations; reduce dt")
        h = self.dt
        L = self.L
        return Z + 0.5 * h * (L * Y1 + N1 + L * Y2 + N2)


def make_stepper(disc, params, config: IntegratorConfig):
    dt = config.dt if config.dt is not None else default_dt(disc, params, config.scheme)
    if config.scheme == "etdrk4":
        return ETDRK4(disc, params, dt, config.dealias)
    return IRK4(disc, params, dt, config.fixed_point_tol, config.fixed_point_max_iters, config.dealias)


# ------------------------------------------------------ single-op interface

def rhs(state: EvolutionState, params: ModelParams) -> np.ndarray:
    """Time derivative of the full U_hat."""
    f = state.field
    d = f.disc
    Z = f.Z
    N, U = _Nonlinear(d, params)(Z)
    if not np.all(np.isfinite(U)):
        state.health = BLOWN_UP
        raise NumericError("non-finite nonlinear product")
    return d.compact_to_hat(linear_symbol(d, params) * Z + N)


def linear_propagator(U_hat, dt: float, params: ModelParams, disc: Discretization) -> np.ndarray:
    """exp(L dt) entrywise, for full (N, N) or compact (N/2, N) arrays."""
    U_hat = np.asarray(U_hat)
    compact = U_hat.shape == (disc.N // 2, disc.N)
    if not compact and U_hat.shape != (disc.N, disc.N):
        raise InvalidArgumentError("array shape matches neither layout")
    return np.exp(linear_symbol(disc, params, compact) * dt) * U_hat


_STEPPERS = {}


def _cached_stepper(kind, disc, params, config):
    dt = config.dt if config.dt is not None else default_dt(disc, params, kind)
    key = (kind, id(disc), params, dt, config.fixed_point_tol, config.fixed_point_max_iters, config.dealias)
    st = _STEPPERS.get(key)
    if st is None:
        if len(_STEPPERS) > 8:
            _STEPPERS.clear()
        st = make_stepper(disc, params, replace(config, scheme=kind, dt=dt))
        _STEPPERS[key] = st
    return st


def _advance(kind, state, params, config):
    if state.health != OK:
        raise StateError(f"cannot step a state with health {state.health!r}")
    st = _cached_stepper(kind, state.field.disc, params, config)
    Zn = st.step(state.field.Z)
    if not np.all(np.isfinite(Zn)):
        return EvolutionState(state.t + st.dt, Field2D.from_compact(state.field.disc, Zn),
                              state.step_count + 1, BLOWN_UP)
    return EvolutionState(state.t + st.dt, Field2D.from_compact(state.field.disc, Zn),
                          state.step_count + 1, OK)


def step_etdrk4(state: EvolutionState, params: ModelParams, config: IntegratorConfig) -> EvolutionState:
    return _advance("etdrk4", state, params, config)


def step_irk4(state: EvolutionState, params: ModelParams, config: IntegratorConfig) -> EvolutionState:
    """One Gauss step; on stage non-convergence raises and leaves ``state`` untouched."""
    return _advance("irk4", state, params, config)


# ------------------------------------------------------------------- driver

@dataclass
class RunResult:
    final: EvolutionState
    records: list
    verdict: str
    t_star: float | None = None
    last_healthy: EvolutionState | None = None
    reason: str = ""
    dt: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.verdict == BLOWN_UP


Sink = Callable[[dg.DiagnosticsRecord, EvolutionState], None]


def run(initial: Field2D, params: ModelParams, config: IntegratorConfig,
        sinks: Iterable[Sink] = (), qref=None, record_stride: int | None = None,
        progress: Callable | None = None, on_step: Callable | None = None) -> RunResult:
    """Integrate to t_max or until blow-up is detected.

    A DiagnosticsRecord goes to every sink each ``snapshot_stride`` steps
    (``record_stride`` overrides it) and on termination. Blow-up is declared
    when max|u| exceeds the threshold, the relative mass error exceeds
    ``mass_error_threshold`` or values become non-finite; the reported time
    is the last healthy one. ``on_step`` receives every healthy state.
    """
    disc = initial.disc
    sinks = list(sinks)
    dt, n_steps = effective_dt(disc, params, config)
    bound = stability_bound(disc, params)
    notes = []
    if dt > bound:
        msg = f"dt={dt:.3e} exceeds the stability scale {bound:.3e}"
        if config.scheme == "etdrk4":
            raise InvalidArgumentError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    stepper = make_stepper(disc, params, replace(config, dt=dt))
    stride = record_stride or config.snapshot_stride

    ref = dg.full_record(initial, params, 0.0, qref)
    ref.mass_err_rel = ref.energy_err_rel = 0.0
    records = [ref]
    state = EvolutionState(0.0, initial, 0, OK)
    for s in sinks:
        s(ref, state)
    m0 = ref.mass
    Z = initial.Z
    U = initial.U
    last = state
    verdict, reason = OK, ""
    for k in range(1, n_steps + 1):
        try:
            Zn = stepper.step(Z, U)
        except FloatingPointError as exc:  # pragma: no cover
            verdict, reason = BLOWN_UP, f"floating point error: {exc}"
            break
        Un = disc.from_compact(Zn)
        t = k * dt
        mk = disc.parseval * 2.0 * float(np.vdot(Zn, Zn).real)
        linf = float(np.abs(Un).max())
        if not (math.isfinite(mk) and math.isfinite(linf)):
            verdict, reason = BLOWN_UP, "non-finite values"
        elif linf > config.blowup_linf_threshold:
            verdict, reason = BLOWN_UP, f"max|u| = {linf:.3e} above threshold"
        elif abs(mk - m0) > config.mass_error_threshold * (m0 if m0 > 0 else 1.0):
            merr = abs(mk - m0) / (m0 if m0 > 0 else 1.0)
            verdict, reason = BLOWN_UP, f"relative mass error {merr:.3e} above threshold"
        if verdict != OK:
            break
        Z, U = Zn, Un
        state = EvolutionState(t, Field2D(disc, compact=Z, physical=U), k, OK)
        last = state
        if on_step is not None:
            on_step(state)
        if k % stride == 0 or k == n_steps:
            rec = dg.full_record(state.field, params, t, qref, ref)
            records.append(rec)
            for s in sinks:
                s(rec, state)
            if progress is not None:
                progress(rec)
    if verdict == BLOWN_UP:
        final = EvolutionState(last.t, last.field, last.step_count, BLOWN_UP)
        if records[-1].t != last.t:
            rec = dg.full_record(last.field, params, last.t, qref, ref)
            records.append(rec)
            for s in sinks:
                s(rec, final)
        return RunResult(final, records, BLOWN_UP, last.t, last, reason, dt, notes)
    return RunResult(state, records, OK, None, state, "", dt, notes)

"""Initial-condition families, binary snapshots, CSV series and plot dumps.

Shifts follow the u(x + a_x, y + a_y) convention, so a profile with shift
(a_x, a_y) is centered at (-a_x, -a_y).
"""
from __future__ import annotations

import csv
import io
import math
import os
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import diagnostics as dg
from .biortho import Discretization, Field2D, get_discretization
from .errors import DependencyError, FormatError, InvalidArgumentError, UnsupportedError
from .groundstate import rescale_Qc
from .biortho import resample
from .model import ModelParams

FAMILIES = ("ground_state_multiple", "rational2", "rational4", "rational4_aniso",
            "rational2_aniso", "gaussian", "two_soliton")
Q_FAMILIES = ("ground_state_multiple", "two_soliton")


@dataclass(frozen=True)
class SolitonComponent:
    """One term a * Q_c(x + x0, y + y0)."""
    amplitude: float
    c: float = 1.0
    x0: float = 0.0
    y0: float = 0.0


@dataclass
class InitialConditionSpec:
    family: str
    amplitude: float = 1.0
    shift: tuple = (0.0, 0.0)
    c: float = 1.0
    # anisotropic families use y_scale * y in place of y
    y_scale: float = 0.5
    components: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedError(f"unknown initial-condition family {self.family!r}")
        self.shift = tuple(float(v) for v in self.shift)
        if len(self.shift) != 2:
            raise InvalidArgumentError("shift needs two entries")
        vals = [self.amplitude, self.c, self.y_scale, *self.shift]
        comps = []
        for comp in self.components:
            if not isinstance(comp, SolitonComponent):
                if len(comp) != 4:
                    raise InvalidArgumentError("two_soliton components need (a, c, x0, y0)")
                comp = SolitonComponent(*map(float, comp))
            comps.append(comp)
            vals += [comp.amplitude, comp.c, comp.x0, comp.y0]
        self.components = tuple(comps)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError("parameters must be finite")
        if self.family == "two_soliton" and len(self.components) != 2:
            raise InvalidArgumentError("two_soliton needs exactly two components")
        if self.family != "two_soliton" and self.components:
            raise InvalidArgumentError(f"family {self.family!r} takes no components")
        if self.c <= 0 or any(cp.c <= 0 for cp in self.components):
            raise InvalidArgumentError("speeds c must be positive")

    @property
    def needs_ground_state(self) -> bool:
        return self.family in Q_FAMILIES


def _closed_form(family, X, Y, A, ys):
    if family == "rational2":
        return A / (1 + X ** 2 + Y ** 2)
    if family == "rational4":
        return A / (1 + (X ** 2 + Y ** 2) ** 2)
    if family == "rational4_aniso":
        return A / (1 + (X ** 2 + (ys * Y) ** 2) ** 2)
    if family == "rational2_aniso":
        return A / (1 + X ** 2 + (ys * Y) ** 2)
    if family == "gaussian":
        return A * np.exp(-(X ** 2 + Y ** 2))
    raise UnsupportedError(family)  # pragma: no cover


def soliton_term(Q: Field2D, comp: SolitonComponent, params: ModelParams) -> np.ndarray:
    """Samples of a * Q_c(x + x0, y + y0) by exact basis evaluation."""
    g = Q.disc.grid
    k = comp.c ** (1.0 / (2 * params.s))
    vals = resample(Q, k * (g.x + comp.x0), k * (g.x + comp.y0))
    return comp.amplitude * comp.c ** (1.0 / (params.m - 1)) * vals


def build_initial_condition(spec: InitialConditionSpec, qres=None, disc: Discretization | None = None,
                            params: ModelParams | None = None) -> Field2D:
    """Sample the initial condition described by ``spec``.

    ``qres`` (a GroundStateResult or a Field2D holding Q at c=1) is needed
    for the ground-state families; its grid is used unless ``disc`` is given.
    """
    params = params or ModelParams.hbo()
    Q = getattr(qres, "Q", qres)
    if spec.needs_ground_state:
        if Q is None:
            raise DependencyError(f"family {spec.family!r} requires a ground state")
        if disc is not None and (disc.N, disc.alpha) != (Q.disc.N, Q.disc.alpha):
            raise DependencyError("ground state lives on a different grid")
        disc = Q.disc
        if spec.family == "ground_state_multiple":
            comps = [SolitonComponent(spec.amplitude, spec.c, *spec.shift)]
        else:
            comps = spec.components
        if len(comps) == 1 and comps[0] == SolitonComponent(1.0):
            return Q.copy()
        U = sum(soliton_term(Q, cp, params) for cp in comps)
        return Field2D.from_physical(disc, U)
    if disc is None:
        if Q is None:
            raise InvalidArgumentError("need a discretization")
        disc = Q.disc
    g = disc.grid
    X, Y = np.meshgrid(g.x + spec.shift[0], g.x + spec.shift[1], indexing="ij")
    return Field2D.from_physical(disc, _closed_form(spec.family, X, Y, spec.amplitude, spec.y_scale))


# ---------------------------------------------------------------- snapshots

MAGIC = b"HBO2"
VERSION = 1
_HEADER = struct.Struct("<4sII6d")


@dataclass
class Snapshot:
    field: Field2D
    params: ModelParams
    t: float


def write_snapshot(field: Field2D, path, params: ModelParams | None = None, t: float = 0.0) -> None:
    """Header (magic, version, N, alpha, s, m, nu1, nu2, t) then N*N float64, x fastest."""
    params = params or ModelParams.hbo()
    d = field.disc
    head = _HEADER.pack(MAGIC, VERSION, d.N, d.alpha, params.s, float(params.m),
                        params.nu1, params.nu2, float(t))
    payload = np.asarray(field.U, dtype="<f8").ravel(order="F").tobytes()
    tmp = f"{path}.part"
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(payload)
    os.replace(tmp, path)


def read_snapshot(path, closure: str = "conservative") -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than the snapshot header")
    magic, version, N, alpha, s, m, nu1, nu2, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    expect = _HEADER.size + 8 * N * N
    if len(raw) != expect:
        raise FormatError(f"payload has {len(raw) - _HEADER.size} bytes, expected {8 * N * N}")
    U = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape((N, N), order="F")
    try:
        params = ModelParams(s, int(m), nu1, nu2)
        disc = get_discretization(N, alpha, closure)
    except InvalidArgumentError as exc:
        raise FormatError(f"invalid header: {exc}") from exc
    return Snapshot(Field2D(disc, physical=np.ascontiguousarray(U, dtype=float)), params, t)


# ------------------------------------------------------------- CSV series

class SeriesWriter:
    """CSV sink for DiagnosticsRecords: header on open, one flushed row per record."""

    def __init__(self, path_or_stream):
        if isinstance(path_or_stream, (str, os.PathLike)):
            self.path = os.fspath(path_or_stream)
            self._fh = open(self.path, "w", newline="", encoding="utf-8")
            self._own = True
        else:
            self.path = None
            self._fh = path_or_stream
            self._own = False
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(dg.SERIES_COLUMNS)
        self._fh.flush()
        self.rows = 0

    def append(self, record: dg.DiagnosticsRecord) -> None:
        append_series(record, self)

    def __call__(self, record, state=None):
        self.append(record)

    def close(self):
        if self._own and not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v) -> str:
    return repr(float(v))


def append_series(record: dg.DiagnosticsRecord, sink: SeriesWriter) -> None:
    try:
        sink._w.writerow([_fmt(v) for v in record.as_row()])
        sink._fh.flush()
    except OSError:
        warnings.warn(f"series file {sink.path} may be incomplete after {sink.rows} rows", RuntimeWarning)
        raise
    sink.rows += 1


def read_series(path_or_text) -> list:
    if isinstance(path_or_text, (str, os.PathLike)) and os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(path_or_text)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != dg.SERIES_COLUMNS:
        raise FormatError("unexpected series header")
    return [dg.DiagnosticsRecord(*map(float, r)) for r in rows[1:] if r]


# --------------------------------------------------------------- plot dumps

def write_gnuplot_grid(field: Field2D, path, stride: int = 1, x_max: float | None = None) -> None:
    """Whitespace-separated 'x y u' lines, blank line between x blocks (splot format)."""
    g = field.disc.grid
    sel = np.arange(0, g.N, stride)
    if x_max is not None:
        sel = sel[np.abs(g.x[sel]) <= x_max]
    U = field.U
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# x y u  (N={g.N} alpha={g.alpha})\n")
        for i in sel:
            for j in sel:
                fh.write(f"{g.x[i]:.10g} {g.x[j]:.10g} {U[i, j]:.12g}\n")
            fh.write("\n")


def write_cross_sections(field: Field2D, path, center=(0.0, 0.0), x_max: float | None = None,
                         reference: Field2D | None = None) -> None:
    """Cross-sections through ``center`` along x and y, optionally with a reference."""
    g = field.disc.grid
    xs = g.x if x_max is None else g.x[np.abs(g.x) <= x_max]
    cx = np.array([center[0]])
    cy = np.array([center[1]])
    ux = resample(field, xs, cy)[:, 0]
    uy = resample(field, cx, xs)[0]
    cols = [xs, ux, uy]
    names = "s u(s,y_c) u(x_c,s)"
    if reference is not None:
        cols += [resample(reference, xs, cy)[:, 0], resample(reference, cx, xs)[0]]
        names += " ref(s,y_c) ref(x_c,s)"
    np.savetxt(path, np.column_stack(cols), header=names, fmt="%.12g")


def load_ground_state(path) -> Field2D:
    return read_snapshot(path).field


def scenario_presets() -> dict:
    """Initial conditions of the reference experiments."""
    S, C = InitialConditionSpec, SolitonComponent
    return {
        "Q_0.9": S("ground_state_multiple", 0.9),
        "Q_1.2_shift": S("ground_state_multiple", 1.2, shift=(1.0, 0.0)),
        "rational2_3": S("rational2", 3.0),
        "rational2_shift5": S("rational2", 1.0, shift=(-5.0, 0.0)),
        "gaussian_4.5": S("gaussian", 4.5),
        "gaussian_5.5": S("gaussian", 5.5),
        "gaussian_6": S("gaussian", 6.0),
        "wedge_gaussian": S("gaussian", 1.0),
        "wedge_rational4": S("rational4", 1.0),
        "wedge_rational2": S("rational2", 1.0),
        "two_soliton_a": S("two_soliton", components=(C(0.9, 1.0, 5.0, 0.0), C(1.0, 0.25, 1.0, 0.0))),
        "two_soliton_b": S("two_soliton", components=(C(0.7, 0.5, 4.0, 0.0), C(0.5, 0.25, 0.0, 0.0))),
        "inter1": S("two_soliton", components=(C(0.9, 1.0, 0.0, -5.0), C(0.9, 1.0, 0.0, 5.0))),
        "inter2": S("two_soliton", components=(C(0.9, 1.0, 5.0, -1.0), C(0.9, 1.0, 5.0, 1.0))),
    }

"""Line-based run configuration.

Format: UTF-8 text, ``[section]`` headers and ``key = value`` lines; ``#``
starts a comment. Every problem is collected with its line number and
reported together. See ``configs/annotated.cfg`` for all keys.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError, InvalidArgumentError
from .evolution import IntegratorConfig
from .model import ModelParams
from .scenarios import FAMILIES, InitialConditionSpec, SolitonComponent

OUTPUT_ENV = "HBO2D_OUTPUT_DIR"
DEFAULT_OUTPUT = "hbo2d_out"


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _opt_float(v):
    return None if v.lower() in ("auto", "none", "") else float(v)


def _opt_str(v):
    return None if v.lower() in ("none", "") else v


def _components(v):
    parts = [p.strip() for p in v.split(",")]
    if len(parts) != 4:
        raise ValueError("expected 'a, c, x0, y0'")
    return tuple(float(p) for p in parts)


# section -> key -> (parser, default)
SCHEMA = {
    "model": {"s": (float, 0.5), "m": (int, 2), "nu1": (float, -1.0), "nu2": (float, 1.0)},
    "grid": {"N": (int, 256), "alpha": (float, 10.0), "closure": (str, "conservative")},
    "groundstate": {
        "c": (float, 1.0), "tol": (float, 1e-8), "max_iters": (int, 1000),
        "seed_amplitude": (float, 3.0), "q_snapshot": (_opt_str, None),
    },
    "integrator": {
        "scheme": (str, "etdrk4"), "dt": (_opt_float, None), "t_max": (float, 1.0),
        "snapshot_stride": (int, 100), "record_interval": (_opt_float, None),
        "blowup_linf_threshold": (float, 1e5), "mass_error_threshold": (float, 1e-3),
        "fixed_point_tol": (float, 1e-12), "fixed_point_max_iters": (int, 100),
        "dealias": (_bool, False),
    },
    "scenario": {
        "family": (_opt_str, None), "amplitude": (float, 1.0), "shift_x": (float, 0.0),
        "shift_y": (float, 0.0), "c": (float, 1.0), "y_scale": (float, 0.5),
        "component1": (_components, None), "component2": (_components, None),
    },
    "output": {
        "directory": (_opt_str, None), "series": (str, "series.csv"),
        "snapshot_every": (int, 0), "gnuplot": (_bool, False), "gnuplot_stride": (int, 2),
        "gnuplot_extent": (_opt_float, None), "save_times": (str, ""),
    },
}


@dataclass
class GridConfig:
    N: int = 256
    alpha: float = 10.0
    closure: str = "conservative"


@dataclass
class GroundStateConfig:
    c: float = 1.0
    tol: float = 1e-8
    max_iters: int = 1000
    seed_amplitude: float = 3.0
    q_snapshot: str | None = None


@dataclass
class OutputConfig:
    directory: str = DEFAULT_OUTPUT
    series: str = "series.csv"
    snapshot_every: int = 0
    gnuplot: bool = False
    gnuplot_stride: int = 2
    gnuplot_extent: float | None = None
    save_times: tuple = ()


@dataclass
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams.hbo)
    grid: GridConfig = field(default_factory=GridConfig)
    groundstate: GroundStateConfig = field(default_factory=GroundStateConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    record_interval: float | None = None
    scenario: InitialConditionSpec | None = None
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str | None = None


def _parse(text):
    values = {sec: {} for sec in SCHEMA}
    lines = {}
    errors = []
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {no}: malformed section header {raw.strip()!r}")
                section = None
                continue
            name = line[1:-1].strip()
            if name not in SCHEMA:
                errors.append(f"line {no}: unknown section [{name}]")
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if section is None:
            errors.append(f"line {no}: key {key!r} outside a known section")
            continue
        if key not in SCHEMA[section]:
            errors.append(f"line {no}: unknown key {key!r} in [{section}]")
            continue
        if (section, key) in lines:
            errors.append(f"line {no}: duplicate key {key!r} in [{section}]")
            continue
        lines[(section, key)] = no
        conv = SCHEMA[section][key][0]
        try:
            values[section][key] = conv(val)
        except (TypeError, ValueError) as exc:
            errors.append(f"line {no}: bad value for {section}.{key}: {exc}")
    return values, lines, errors


def validate_config(text: str, overrides: dict | None = None, source: str | None = None) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem."""
    vals, lines, errors = _parse(text)
    for (sec, key), raw in (overrides or {}).items():
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            errors.append(f"override: unknown key {sec}.{key}")
            continue
        try:
            vals[sec][key] = SCHEMA[sec][key][0](str(raw))
        except (TypeError, ValueError) as exc:
            errors.append(f"override: bad value for {sec}.{key}: {exc}")

    def get(sec, key):
        return vals[sec].get(key, SCHEMA[sec][key][1])

    def where(sec, key):
        no = lines.get((sec, key))
        return f"line {no}" if no else f"{sec}.{key}"

    cfg = RunConfig(source=source)
    n_err = len(errors)
    s = get("model", "s")
    if not (0.0 < s < 1.0):
        errors.append(f"{where('model', 's')}: s must lie in (0,1)")
    m = get("model", "m")
    if m < 2:
        errors.append(f"{where('model', 'm')}: m must be an integer > 1")
    nu1 = get("model", "nu1")
    if nu1 == 0 or not math.isfinite(nu1):
        errors.append(f"{where('model', 'nu1')}: nu1 must be a nonzero real")
    nu2 = get("model", "nu2")
    if nu2 not in (-1.0, 1.0):
        errors.append(f"{where('model', 'nu2')}: nu2 must be +1 or -1")
    if len(errors) == n_err:
        cfg.model = ModelParams(s, m, nu1, nu2)

    N, alpha, closure = get("grid", "N"), get("grid", "alpha"), get("grid", "closure")
    if N % 2 or N < 8:
        errors.append(f"{where('grid', 'N')}: N must be even and >= 8")
    if not alpha > 0:
        errors.append(f"{where('grid', 'alpha')}: alpha must be positive")
    if closure not in ("conservative", "truncated"):
        errors.append(f"{where('grid', 'closure')}: closure must be 'conservative' or 'truncated'")
    cfg.grid = GridConfig(N, alpha, closure)

    gsc = GroundStateConfig(**{k: get("groundstate", k) for k in SCHEMA["groundstate"]})
    if not gsc.c > 0:
        errors.append(f"{where('groundstate', 'c')}: c must be positive")
    if not gsc.tol > 0:
        errors.append(f"{where('groundstate', 'tol')}: tol must be positive")
    if gsc.max_iters < 1:
        errors.append(f"{where('groundstate', 'max_iters')}: max_iters must be >= 1")
    if gsc.q_snapshot and not os.path.exists(gsc.q_snapshot):
        errors.append(f"{where('groundstate', 'q_snapshot')}: file {gsc.q_snapshot!r} not found")
    cfg.groundstate = gsc

    ikw = {k: get("integrator", k) for k in SCHEMA["integrator"] if k != "record_interval"}
    try:
        cfg.integrator = IntegratorConfig(**ikw)
    except InvalidArgumentError as exc:
        errors.append(f"[integrator]: {exc}")
    ri = get("integrator", "record_interval")
    if ri is not None and not ri > 0:
        errors.append(f"{where('integrator', 'record_interval')}: record_interval must be positive")
    cfg.record_interval = ri

    fam = get("scenario", "family")
    if fam is not None:
        if fam not in FAMILIES:
            errors.append(f"{where('scenario', 'family')}: unknown family {fam!r}")
        else:
            comps = tuple(SolitonComponent(*c) for c in (get("scenario", "component1"), get("scenario", "component2")) if c)
            if fam == "two_soliton" and len(comps) != 2:
                errors.append(f"{where('scenario', 'family')}: two_soliton needs component1 and component2")
            elif fam != "two_soliton" and comps:
                errors.append(f"{where('scenario', 'component1')}: components only apply to two_soliton")
            else:
                try:
                    cfg.scenario = InitialConditionSpec(
                        fam, get("scenario", "amplitude"),
                        (get("scenario", "shift_x"), get("scenario", "shift_y")),
                        get("scenario", "c"), get("scenario", "y_scale"), comps)
                except InvalidArgumentError as exc:
                    errors.append(f"[scenario]: {exc}")

    out = OutputConfig(**{k: get("output", k) for k in SCHEMA["output"] if k != "save_times"})
    if out.directory is None:
        out.directory = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    try:
        out.save_times = tuple(float(v) for v in get("output", "save_times").replace(",", " ").split())
    except ValueError:
        errors.append(f"{where('output', 'save_times')}: expected a list of times")
    if out.snapshot_every < 0:
        errors.append(f"{where('output', 'snapshot_every')}: must be >= 0")
    if out.gnuplot_stride < 1:
        errors.append(f"{where('output', 'gnuplot_stride')}: must be >= 1")
    cfg.output = out

    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return validate_config("", overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path!r}: {exc}"]) from exc
    return validate_config(text, overrides, source=path)

"""Conserved quantities, peak tracking, radiation wedge and theory checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import basis1d
from .biortho import Field2D, resample
from .errors import InvalidArgumentError, NumericDomainError, UnsupportedError
from .model import ModelParams, critical_index, energy_critical_power

NAN = float("nan")

SERIES_COLUMNS = (
    "t", "mass", "energy", "hs_seminorm", "l1_2d", "linf", "x_c", "y_c",
    "c_estimate", "profile_mismatch", "mass_err_rel", "energy_err_rel",
)


@dataclass
class DiagnosticsRecord:
    t: float = 0.0
    mass: float = NAN
    energy: float = NAN
    hs_seminorm: float = NAN
    l1_2d: float = NAN
    linf: float = NAN
    x_c: float = NAN
    y_c: float = NAN
    c_estimate: float = NAN
    profile_mismatch: float = NAN
    mass_err_rel: float = NAN
    energy_err_rel: float = NAN

    @property
    def peak(self):
        return (self.x_c, self.y_c)

    def as_row(self):
        return [getattr(self, k) for k in SERIES_COLUMNS]

    def as_dict(self):
        return asdict(self)


assert tuple(f.name for f in fields(DiagnosticsRecord)) == SERIES_COLUMNS


# ---------------------------------------------------------------- integrals

def mass(field: Field2D) -> float:
    """L2 norm squared via Parseval on the compact coefficients."""
    Z = field.Z
    return field.disc.parseval * 2.0 * float(np.vdot(Z, Z).real)


def hs_seminorm(field: Field2D, s: float) -> float:
    """|| (-Delta)^{s/2} u ||^2 from the diagonal hat-space weights."""
    Z = field.Z
    sig = field.disc.compact_sigma(s)
    return field.disc.parseval * 2.0 * float(np.sum(sig * (Z.real ** 2 + Z.imag ** 2)))


def inner(f: Field2D, g: Field2D) -> float:
    return f.disc.parseval * 2.0 * float(np.vdot(g.Z, f.Z).real)


def integrate_power(field: Field2D, power: int) -> float:
    """Integral of u**power by the theta-trapezoid rule in both directions."""
    U = field.U
    if not np.all(np.isfinite(U)):
        raise NumericDomainError("non-finite field")
    w = field.disc.grid.quad_weights
    return float(w @ (U ** int(power)) @ w)


def l1_integral(field: Field2D) -> float:
    """Integral of u over the plane, exact for the rational interpolant."""
    q = basis1d.integral_weights(field.disc.grid)
    return float(q @ field.U @ q)


def energy(field: Field2D, params: ModelParams) -> float:
    m = params.m
    nl = params.nu2 / (params.nu1 * m * (m + 1)) * integrate_power(field, m + 1)
    return 0.5 * hs_seminorm(field, params.s) + nl


def conserved_quantities(field: Field2D, params: ModelParams, t: float = 0.0) -> DiagnosticsRecord:
    U = field.U
    return DiagnosticsRecord(
        t=float(t), mass=mass(field), energy=energy(field, params),
        hs_seminorm=hs_seminorm(field, params.s), l1_2d=l1_integral(field),
        linf=float(np.abs(U).max()),
    )


def reality_residue(field: Field2D) -> float:
    """Imaginary part of the physical field rebuilt through the full hat path."""
    d = field.disc
    u = d.tilde_to_physical(d.hat_to_tilde(field.U_hat))
    return float(np.abs(u.imag).max())


# ------------------------------------------------------------ peak tracking

@dataclass
class PeakInfo:
    x_c: float
    y_c: float
    linf: float
    c_estimate: float = NAN
    profile_mismatch: float = NAN
    index: tuple = (0, 0)


def _parabolic(theta, vals, i):
    if i <= 0 or i >= len(vals) - 1:
        return theta[i]
    fm, f0, fp = vals[i - 1], vals[i], vals[i + 1]
    den = fm - 2 * f0 + fp
    if den >= 0:
        return theta[i]
    delta = 0.5 * (fm - fp) / den
    h = theta[1] - theta[0]
    return theta[i] + float(np.clip(delta, -0.5, 0.5)) * h


def speed_estimate(linf: float, q_linf: float, params: ModelParams) -> float:
    """c with max Q_c = linf, using max Q_c = c^{1/(m-1)} max Q."""
    return (linf / q_linf) ** (params.m - 1)


def rescaled_profile_at(Q: Field2D, c: float, center, params: ModelParams, xs=None, ys=None):
    """Samples of Q_c(x - x_c, y - y_c) on the grid (or given nodes)."""
    g = Q.disc.grid
    xs = g.x if xs is None else xs
    ys = g.x if ys is None else ys
    k = c ** (1.0 / (2 * params.s))
    return c ** (1.0 / (params.m - 1)) * resample(Q, k * (xs - center[0]), k * (ys - center[1]))


def profile_mismatch(field: Field2D, Q: Field2D, c: float, center, params: ModelParams) -> float:
    """Relative L2 distance to the centered Q_c over the disk of radius 2/c^{1/2s}."""
    g = field.disc.grid
    radius = 2.0 / c ** (1.0 / (2 * params.s))
    X, Y = np.meshgrid(g.x - center[0], g.x - center[1], indexing="ij")
    mask = X ** 2 + Y ** 2 <= radius ** 2
    if not mask.any():
        return NAN
    Qc = rescaled_profile_at(Q, c, center, params)
    W = np.outer(g.quad_weights, g.quad_weights) * mask
    num = np.sum(W * (field.U - Qc) ** 2)
    den = np.sum(W * Qc ** 2)
    return float(np.sqrt(num / den))


def peak_tracking(field: Field2D, qref=None, params: ModelParams | None = None) -> PeakInfo:
    """Location of max |u| refined by a parabola per axis in theta.

    ``qref`` is an optional ground state (a GroundStateResult or a Field2D)
    used for the speed estimate and the profile mismatch.
    """
    g = field.disc.grid
    A = np.abs(field.U)
    i, j = np.unravel_index(int(np.argmax(A)), A.shape)
    th_x = _parabolic(g.theta, A[:, j], i)
    th_y = _parabolic(g.theta, A[i, :], j)
    x_c = g.alpha * math.tan(th_x / 2)
    y_c = g.alpha * math.tan(th_y / 2)
    info = PeakInfo(x_c, y_c, float(A[i, j]), index=(int(i), int(j)))
    if qref is not None:
        params = params or ModelParams.hbo()
        Q = getattr(qref, "Q", qref)
        q_inf = float(np.abs(Q.U).max())
        c = speed_estimate(info.linf, q_inf, params)
        info.c_estimate = c
        info.profile_mismatch = profile_mismatch(field, Q, c, (x_c, y_c), params)
    return info


def full_record(field: Field2D, params: ModelParams, t: float = 0.0, qref=None, reference=None):
    """DiagnosticsRecord with peak data and errors relative to ``reference``."""
    rec = conserved_quantities(field, params, t)
    pk = peak_tracking(field, qref, params)
    rec.x_c, rec.y_c = pk.x_c, pk.y_c
    rec.c_estimate, rec.profile_mismatch = pk.c_estimate, pk.profile_mismatch
    if reference is not None:
        rec.mass_err_rel = abs(rec.mass - reference.mass) / max(abs(reference.mass), 1e-300)
        rec.energy_err_rel = abs(rec.energy - reference.energy) / max(abs(reference.energy), 1e-300)
    return rec


# ----------------------------------------------------------- radiation wedge

def predicted_wedge_tan(s: float) -> float:
    """tan(theta_min) = sqrt(1+2s)/s; the wedge edge makes 90 - theta_min with the x-axis."""
    return math.sqrt(1 + 2 * s) / s


def predicted_half_angle_deg(s: float) -> float:
    return 90.0 - math.degrees(math.atan(predicted_wedge_tan(s)))


@dataclass
class WedgeResult:
    tan_measured: float
    tan_predicted: float
    half_angle_deg: float
    predicted_half_angle_deg: float
    n_points: int
    applicable: bool = True

    @property
    def contained(self) -> bool:
        """Measured half-angle does not exceed the predicted wedge edge."""
        return self.tan_measured <= 1.0 / self.tan_predicted


def contour_points(X, Y, A, level):
    """Linear-interpolated crossings of A = level along grid edges."""
    pts = []
    D = A - level
    for axis in (0, 1):
        a = D[:-1, :] if axis == 0 else D[:, :-1]
        b = D[1:, :] if axis == 0 else D[:, 1:]
        cross = (a * b) < 0
        idx = np.nonzero(cross)
        t = a[idx] / (a[idx] - b[idx])
        if axis == 0:
            x = X[idx] + t * (X[idx[0] + 1, idx[1]] - X[idx])
            y = Y[idx]
        else:
            x = X[idx]
            y = Y[idx] + t * (Y[idx[0], idx[1] + 1] - Y[idx])
        pts.append(np.column_stack([x, y]))
    return np.vstack(pts)


def wedge_angle(field: Field2D, peak, params: ModelParams, level: float = 0.05,
                core_radius: float | None = None, x_range: float | None = None,
                far_fraction: float = 0.5) -> WedgeResult:
    """Half-angle of the radiation sector behind the peak.

    Contour points of |u| = level * max|u| with x < x_c are collected and the
    measured tangent is the largest slope |y - y_c| / (x_c - x). The level set
    encloses the peak itself, so near x_c that slope is unbounded. By default
    only the far part of the contour is used: points at least
    ``far_fraction`` times the largest distance x_c - x behind the peak.
    Passing ``core_radius`` instead excludes a fixed disk around the peak.
    ``x_range`` limits the search to the band |x|, |y| < x_range
    (default 4 alpha, where the grid is well resolved).
    """
    g = field.disc.grid
    x_c, y_c = peak
    A = np.abs(field.U)
    X, Y = np.meshgrid(g.x, g.x, indexing="ij")
    pts = contour_points(X, Y, A, level * A.max())
    if x_range is None:
        x_range = 4.0 * g.alpha
    dx = x_c - pts[:, 0]
    dy = np.abs(pts[:, 1] - y_c)
    keep = (dx > 0) & (np.abs(pts[:, 0]) < x_range) & (np.abs(pts[:, 1]) < x_range)
    if core_radius is not None:
        keep &= np.hypot(dx, dy) > core_radius
    elif keep.any():
        keep &= dx >= far_fraction * dx[keep].max()
    tan_p = predicted_wedge_tan(params.s)
    if not keep.any():
        return WedgeResult(NAN, tan_p, NAN, predicted_half_angle_deg(params.s), 0, applicable=False)
    slope = float(np.max(dy[keep] / dx[keep]))
    return WedgeResult(slope, tan_p, math.degrees(math.atan(slope)),
                       predicted_half_angle_deg(params.s), int(keep.sum()))


# ------------------------------------------------------------------ theory

@dataclass
class TheoryReport:
    r_c: float
    criticality_class: str
    admissible: bool
    case: str | None
    C_GN: float | None = None
    certificate: str | None = None
    details: dict = field(default_factory=dict)


def criticality_class(s: float, m: float) -> str:
    r = critical_index(s, m)
    if s < 1 and math.isclose(m, energy_critical_power(s)):
        return "energy_critical"
    if math.isclose(r, 0.0, abs_tol=1e-14):
        return "critical"
    return "subcritical" if r < 0 else "supercritical"


def _is_odd_integer(m):
    return float(m).is_integer() and int(m) % 2 == 1


def _base_cases(nu1, c, m, mstar):
    below = 1 < m < mstar and not math.isclose(m, mstar)
    above = m > mstar and not math.isclose(m, mstar)
    out = []
    if nu1 < 0 and c > 0 and below:
        out.append("(i)")
    if nu1 > 0 and c < 0 and below:
        out.append("(ii)")
    if nu1 > 0 and c > 0 and above:
        out.append("(iii)")
    if nu1 < 0 and c < 0 and above:
        out.append("(iv)")
    return out


def admissibility_case(params: ModelParams, c: float, modified: bool = False):
    """Matched case label of the solitary-wave non-existence criteria, or None.

    For odd m the sign of nu2 c further restricts the first four cases,
    reported as (v) or (vi). ``modified`` selects the list for the
    |u|^{m-1} u nonlinearity.
    """
    s, m, nu1, nu2 = params.s, params.m, params.nu1, params.nu2
    mstar = energy_critical_power(s)
    crit = math.isclose(m, mstar)
    if modified:
        below = 1 < m < mstar and not crit
        above = m > mstar and not crit
        if nu1 < 0 and nu2 == 1 and c > 0 and below:
            return "(a)"
        if nu1 > 0 and nu2 == -1 and c < 0 and below:
            return "(b)"
        if nu1 > 0 and nu2 == -1 and c > 0 and above:
            return "(c)"
        if nu1 < 0 and nu2 == 1 and c < 0 and above:
            return "(d)"
        if c == 0 and nu1 * nu2 < 0 and crit:
            return "(e)"
        return None
    if c == 0:
        return "(vii)" if crit and _is_odd_integer(m) and nu1 * nu2 < 0 else None
    base = _base_cases(nu1, c, m, mstar)
    if not base:
        return None
    if _is_odd_integer(m):
        if nu2 * c > 0 and base[0] in ("(i)", "(ii)"):
            return "(v)" + base[0]
        if nu2 * c < 0 and base[0] in ("(iii)", "(iv)"):
            return "(vi)" + base[0]
        return None
    return base[0]


def criticality_admissibility(params: ModelParams, c: float = 1.0, modified: bool = False) -> TheoryReport:
    case = admissibility_case(params, c, modified)
    return TheoryReport(params.r_c, criticality_class(params.s, params.m), case is not None, case)


def gn_prefactor(s: float, m: float) -> float:
    a = s * (m + 1) - (m - 1)
    if a <= 0:
        raise NumericDomainError("s(m+1) <= m-1: the inequality does not apply")
    return m * s * (m + 1) / ((m - 1) ** ((m - 1) / (2 * s)) * a ** ((2 * s - (m - 1)) / (2 * s)))


def gn_sharp_constant(q_mass: float, params: ModelParams) -> float:
    """Sharp Gagliardo-Nirenberg constant from the ground-state mass.

    ``q_mass`` is ||Q||^2 in L2; the constant is the prefactor over ||Q||^{m-1}.
    """
    if not q_mass > 0:
        raise InvalidArgumentError("q_mass must be positive")
    return gn_prefactor(params.s, params.m) / q_mass ** ((params.m - 1) / 2)


@dataclass
class Certificate:
    label: str | None
    quantities: dict
    flag: str = ""


def existence_certificate(u0: Field2D, qres, params: ModelParams) -> Certificate:
    """Uniform-bound criterion met by u0: 'C1', 'C2', 'C3' or None."""
    Q = getattr(qres, "Q", qres)
    cls = criticality_class(params.s, params.m)
    M0, MQ = mass(u0), mass(Q)
    q = {"mass_u0": M0, "mass_Q": MQ, "class": cls}
    if cls == "subcritical":
        return Certificate("C1", q)
    if cls == "critical":
        return Certificate("C2" if M0 < MQ else None, q)
    E0, EQ = energy(u0, params), energy(Q, params)
    K0, KQ = hs_seminorm(u0, params.s), hs_seminorm(Q, params.s)
    th = params.r_c / params.s
    q.update(energy_u0=E0, energy_Q=EQ, theta=th)
    if E0 < 0:
        return Certificate(None, q, "negative energy: criterion does not apply")
    lhs1, rhs1 = E0 ** th * M0 ** (1 - th), EQ ** th * MQ ** (1 - th)
    lhs2 = math.sqrt(K0) ** th * math.sqrt(M0) ** (1 - th)
    rhs2 = math.sqrt(KQ) ** th * math.sqrt(MQ) ** (1 - th)
    q.update(energy_mass=(lhs1, rhs1), gradient_mass=(lhs2, rhs2))
    return Certificate("C3" if (lhs1 < rhs1 and lhs2 < rhs2) else None, q)


# closed-form L2 norms ||u(A=1)|| of the amplitude families
_FAMILY_NORM = {
    "rational2": math.sqrt(math.pi),
    "gaussian": math.sqrt(math.pi / 2),
    "rational4_aniso": math.pi / math.sqrt(2),
    "rational2_aniso": math.sqrt(2 * math.pi),
    "rational4": math.pi / 2,
}


def family_unit_norm(family: str) -> float:
    try:
        return _FAMILY_NORM[family]
    except KeyError:
        raise UnsupportedError(f"no closed-form L2 norm for family {family!r}") from None


def threshold_amplitude(family: str, q_mass: float) -> float:
    """Amplitude A with ||u0(A)||_L2 = ||Q||_L2 (``q_mass`` = ||Q||^2)."""
    return math.sqrt(q_mass) / family_unit_norm(family)

"""Rational (Wiener) basis on the real line.

The basis functions are

    rho_n(x) = (alpha + i x)^n / (alpha - i x)^(n+1),   n = -N/2 .. N/2-1,

and under the map x = alpha*tan(theta/2) they become

    rho_n(x(theta)) = (cos(theta/2)/alpha) * exp(i (n+1/2) theta),

so that after removing the weight cos(theta/2)/alpha * exp(i theta/2) the
expansion is an ordinary trigonometric series in theta and can be computed
with the FFT. Nodes sit on the half-shifted grid theta_j = 2 pi (j+1/2)/N,
which never touches the point at infinity.

Coefficient arrays are stored with array index q = n + N/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContaminationError, InvalidArgumentError, NumericDomainError

REALITY_TOL = 1e-8
CLOSURES = ("conservative", "truncated")


def grid_angles(N: int) -> np.ndarray:
    """Half-shifted angles 2 pi (j + 1/2)/N for j = -N/2 .. N/2-1."""
    j = np.arange(-(N // 2), N // 2)
    return 2.0 * np.pi * (j + 0.5) / N


def grid_nodes(N: int, alpha: float) -> np.ndarray:
    return alpha * np.tan(grid_angles(N) / 2.0)


def mode_indices(N: int) -> np.ndarray:
    return np.arange(-(N // 2), N // 2)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec1D:
    N: int
    alpha: float
    theta: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    closure: str = "conservative"

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.N

    @property
    def n(self) -> np.ndarray:
        return mode_indices(self.N)

    @property
    def weight(self) -> np.ndarray:
        """Sample weight w_j with rho_n(x_j) = w_j exp(i n theta_j)."""
        th = self.theta
        return np.cos(th / 2) * np.exp(0.5j * th) / self.alpha

    @property
    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights in theta including the Jacobian dx/dtheta."""
        return (np.pi * self.alpha / self.N) / np.cos(self.theta / 2) ** 2

    def __eq__(self, other):
        if not isinstance(other, GridSpec1D):
            return NotImplemented
        return (self.N, self.alpha, self.closure) == (other.N, other.alpha, other.closure)

    def __hash__(self):
        return hash((self.N, self.alpha, self.closure))


def build_grid(N: int, alpha: float, closure: str = "conservative") -> GridSpec1D:
    """Build the collocation grid; N must be even and at least 8.

    ``closure`` selects the derivative at the two band-edge modes, see
    ``derivative_bands``.
    """
    if int(N) != N or N % 2 or N < 8:
        raise InvalidArgumentError(f"N must be an even integer >= 8, got {N}")
    if not np.isfinite(alpha) or alpha <= 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    if closure not in CLOSURES:
        raise InvalidArgumentError(f"closure must be one of {CLOSURES}")
    N = int(N)
    alpha = float(alpha)
    theta = grid_angles(N)
    x = alpha * np.tan(theta / 2)
    return GridSpec1D(N, alpha, _readonly(theta), _readonly(x), closure)


def _phase(grid: GridSpec1D) -> np.ndarray:
    # exp(i n (pi - pi/N)) links the node order to the FFT ordering
    return np.exp(1j * grid.n * (np.pi - np.pi / grid.N))


def _alternating(N: int) -> np.ndarray:
    return np.where(np.arange(N) % 2 == 0, 1.0, -1.0)


def _shape(a, axis):
    shape = [1] * a.ndim
    shape[axis] = -1
    return shape


def transform(data, grid: GridSpec1D, direction: str = "forward", axis: int = -1):
    """Map samples u(x_j) to coefficients (forward) or back (inverse).

    Works along ``axis`` of an array of any dimension.
    """
    data = np.asarray(data)
    if data.shape[axis] != grid.N:
        raise InvalidArgumentError(
            f"length {data.shape[axis]} along axis {axis} does not match N={grid.N}")
    sh = _shape(data, axis)
    sgn = _alternating(grid.N).reshape(sh)
    if direction == "forward":
        v = data / grid.weight.reshape(sh)
        c = np.fft.fft(v * sgn, axis=axis) / grid.N
        return c * _phase(grid).reshape(sh)
    if direction == "inverse":
        c = data * np.conj(_phase(grid)).reshape(sh)
        v = sgn * np.fft.ifft(c, axis=axis) * grid.N
        return v * grid.weight.reshape(sh)
    raise InvalidArgumentError(f"unknown direction {direction!r}")


def forward_matrix(grid: GridSpec1D) -> np.ndarray:
    """Dense matrix F with coefficients = F @ samples."""
    return transform(np.eye(grid.N), grid, "forward", axis=0)


def inverse_matrix(grid: GridSpec1D) -> np.ndarray:
    return transform(np.eye(grid.N, dtype=complex), grid, "inverse", axis=0)


def basis_matrix(xp, grid: GridSpec1D) -> np.ndarray:
    """R[p, q] = rho_{n_q}(xp[p]), evaluated through the angle for stability."""
    xp = np.asarray(xp, dtype=float)
    th = 2.0 * np.arctan(xp / grid.alpha)
    w = np.cos(th / 2) / grid.alpha
    return w[:, None] * np.exp(1j * np.outer(th, grid.n + 0.5))


def derivative_bands(grid: GridSpec1D):
    """Diagonal and off-diagonal of the real symmetric S with S1 = i S.

    Row n is (n, 2n+1, n+1)/(2 alpha) on (n-1, n, n+1). With the
    "truncated" closure the out-of-range neighbours are simply dropped. The
    default "conservative" closure also replaces the two corner diagonal
    entries by +-(N/2-1)/(2 alpha), which makes the integral of every
    discrete derivative vanish exactly (so the integral of u is conserved by
    the flow) while keeping S symmetric, block-split and odd under n -> -n-1.
    Only modes with |n + 1/2| = (N-1)/2 are affected.
    """
    n = grid.n.astype(float)
    d = (2 * n + 1) / (2 * grid.alpha)
    e = n[1:] / (2 * grid.alpha)
    if grid.closure == "conservative":
        edge = (grid.N // 2 - 1) / (2 * grid.alpha)
        d[0], d[-1] = -edge, edge
    return d, e


def derivative_matrix(grid: GridSpec1D) -> np.ndarray:
    d, e = derivative_bands(grid)
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def apply_derivative(coeffs, grid: GridSpec1D, order: int = 1, axis: int = 0):
    """Apply S1 (order 1) or S2 = S1 S1 (order 2) along ``axis``.

    Coupling to the out-of-range modes n = -N/2-1 and n = N/2 is dropped.
    """
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    c = np.moveaxis(np.asarray(coeffs, dtype=complex), axis, 0)
    if c.shape[0] != grid.N:
        raise InvalidArgumentError("coefficient length does not match grid")
    d, e = derivative_bands(grid)
    ex = (slice(None),) + (None,) * (c.ndim - 1)
    for _ in range(order):
        out = d[ex] * c
        out[:-1] += e[ex] * c[1:]
        out[1:] += e[ex] * c[:-1]
        c = 1j * out
    return np.moveaxis(c, 0, axis)


def quadrature_integrate(samples, grid: GridSpec1D, power: int = 1, axis: int = -1):
    """Integral of u**power over the line by the theta-trapezoid rule."""
    u = np.asarray(samples)
    if not np.all(np.isfinite(u)):
        raise NumericDomainError("non-finite samples")
    if int(power) != power or power < 1:
        raise InvalidArgumentError("power must be a positive integer")
    return np.tensordot(u ** int(power), grid.quad_weights, axes=([axis], [0]))


def integral_weights(grid: GridSpec1D) -> np.ndarray:
    """Weights q with q @ u equal to the exact integral of the interpolant.

    The symmetric (principal value) integral of rho_n is pi (-1)^n for n >= 0
    and -pi (-1)^n for n < 0. Unlike the trapezoid rule this stays accurate
    for fields with 1/x tails.
    """
    n = grid.n
    I = np.where(n >= 0, 1.0, -1.0) * np.pi * (-1.0) ** n
    return (I @ forward_matrix(grid)).real


def enforce_reality(samples, tol: float = REALITY_TOL):
    """Drop a negligible imaginary part; raise if it is not negligible."""
    u = np.asarray(samples)
    if not np.iscomplexobj(u):
        return u
    if u.size == 0:
        return u.real
    im = np.abs(u.imag).max()
    if not np.isfinite(im) or im > tol * (1.0 + np.abs(u.real).max()):
        raise ContaminationError(f"imaginary residue {im:.3e} above tolerance")
    return np.ascontiguousarray(u.real)

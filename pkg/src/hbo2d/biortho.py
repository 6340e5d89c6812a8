"""Biorthogonal eigenbasis of the derivative structure and 2D fields.

S (real symmetric tridiagonal, S1 = i S) is diagonalized as S = E diag(mu) E^T.
In the recombined basis both d/dx and (-Delta)^s act diagonally:

    d/dx        ->  i mu_j            (first index runs along x)
    (-Delta)^s  ->  (lam_j + lam_k)^s,   lam = mu^2.

S decouples exactly into the blocks n < 0 and n >= 0 (the coupling entry is
(n+1)/(2 alpha) at n = -1), and the reversal n -> -n-1 maps one block to minus
the other. Eigenvectors with mu > 0 live on n >= 0 and their partners are
mirror images. For real fields this halves the independent hat coefficients,
which is exploited by a compact real representation Z (see ``Discretization``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import basis1d
from .errors import InvalidArgumentError, NumericError, PreconditionError, StateError

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SpectralBasis1D:
    grid: basis1d.GridSpec1D
    E: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    # E[:, N-1-k] = pair_sign[k] * P E[:, k] with P the reversal n -> -n-1
    pair_sign: np.ndarray = field(repr=False)

    @property
    def N(self):
        return self.grid.N


def _fix_signs(E, thresh=1e-12):
    for k in range(E.shape[1]):
        col = E[:, k]
        idx = np.flatnonzero(np.abs(col) > thresh)
        if idx.size and col[idx[0]] < 0:
            E[:, k] = -col
    return E


def diagonalize(S, grid: basis1d.GridSpec1D | None = None) -> SpectralBasis1D:
    """Eigendecomposition of the real symmetric tridiagonal matrix S.

    Eigenvalues ascend; each eigenvector's first entry above 1e-12 in
    magnitude is positive.
    """
    S = np.asarray(S, dtype=float)
    N = S.shape[0]
    if S.shape != (N, N):
        raise PreconditionError("S must be square")
    if np.abs(S - S.T).max() > 1e-13:
        raise PreconditionError("S is not symmetric")
    if np.abs(np.triu(S, 2)).max(initial=0.0) > 0:
        raise PreconditionError("S is not tridiagonal")
    d = np.diag(S).copy()
    e = np.diag(S, 1).copy()
    h = N // 2
    P = np.arange(N)[::-1]
    split = N % 2 == 0 and e[h - 1] == 0.0 and np.array_equal(S[np.ix_(P, P)], -S)
    try:
        if split:
            # solve the n >= 0 block and mirror it
            mp, Vp = eigh_tridiagonal(d[h:], e[h:])
            E = np.zeros((N, N))
            mu = np.concatenate([-mp[::-1], mp])
            E[h:, h:] = Vp
            E[:, :h] = E[P][:, h:][:, ::-1]
        else:
            mu, E = eigh_tridiagonal(d, e)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"eigensolver failed: {exc}") from exc
    E = _fix_signs(E)
    resid = np.abs(S - (E * mu) @ E.T).max()
    if resid > 1e-10 * max(1.0, np.abs(mu).max()):
        raise NumericError(f"eigen reconstruction residual {resid:.2e}")
    pair_sign = np.sign(np.einsum("ik,ik->k", E[:, ::-1], E[P]))
    if grid is None and N % 2 == 0:
        closure = "truncated" if np.isclose(d[-1], (N - 1) * d[h]) else "conservative"
        grid = basis1d.build_grid(N, 1.0 / (2 * d[h]), closure)
    for a in (E, mu, pair_sign):
        a.setflags(write=False)
    lam = mu ** 2
    lam.setflags(write=False)
    return SpectralBasis1D(grid, E, mu, lam, pair_sign)


def spectral_basis(grid: basis1d.GridSpec1D) -> SpectralBasis1D:
    return diagonalize(basis1d.derivative_matrix(grid), grid)


@dataclass(frozen=True)
class FracStiffness2D:
    s: float
    sigma: np.ndarray = field(repr=False)


def _check_s(s):
    if not (0.0 < s <= 1.0):
        raise InvalidArgumentError(f"s must lie in (0, 1], got {s}")


def frac_power(base, s):
    """base**s with the continuous extension 0 at base = 0."""
    base = np.asarray(base, dtype=float)
    return np.where(base > 0, np.abs(base) ** s, 0.0)


def frac_stiffness(basis: SpectralBasis1D, s: float) -> FracStiffness2D:
    _check_s(s)
    sig = frac_power(basis.lam[:, None] + basis.lam[None, :], s)
    sig.setflags(write=False)
    return FracStiffness2D(float(s), sig)


class Discretization:
    """Square N x N grid with the 1D basis and dense transform plans.

    Compact representation: with K+ the indices of positive mu, Z is the
    (N/2, N) complex array obtained by transforming a real field to hat
    coefficients along x (rows K+) and to a real 2-per-mode representation
    along y (columns: sqrt2*Re and sqrt2*Im of the y hat coefficients on K+).
    Real fields are exactly represented by Z, the full hat coefficients can be
    rebuilt from it, sum |U_hat|^2 = 2 sum |Z|^2 and both diagonal operators
    act on Z entrywise.
    """

    def __init__(self, N: int, alpha: float, closure: str = "conservative"):
        self.grid = basis1d.build_grid(N, alpha, closure)
        self.N = self.grid.N
        self.alpha = self.grid.alpha
        self.basis = spectral_basis(self.grid)
        self._plans = None
        self._sigma_cache = {}

    def __repr__(self):
        return f"Discretization(N={self.N}, alpha={self.alpha}, closure={self.grid.closure!r})"

    @property
    def x(self):
        return self.grid.x

    @property
    def parseval(self) -> float:
        """Factor c with L2 norm squared = c * sum |U_tilde|^2."""
        return (np.pi / self.alpha) ** 2

    @property
    def kp(self):
        return np.arange(self.N // 2, self.N)

    @property
    def plans(self):
        if self._plans is None:
            self._plans = self._build_plans()
        return self._plans

    def _build_plans(self):
        E = self.basis.E
        kp = self.kp
        F = basis1d.forward_matrix(self.grid)
        T = E.T @ F
        del F
        Tp = T[kp]
        del T
        Tr = np.vstack([SQRT2 * Tp.real, SQRT2 * Tp.imag])
        Finv = basis1d.inverse_matrix(self.grid)
        Bp = Finv @ E[:, kp]
        del Finv
        Br = SQRT2 * np.hstack([Bp.real, -Bp.imag])
        p = dict(
            TpR=np.ascontiguousarray(Tp.real), TpI=np.ascontiguousarray(Tp.imag),
            TrT=np.ascontiguousarray(Tr.T),
            BpR2=np.ascontiguousarray(2 * Bp.real), BpI2=np.ascontiguousarray(2 * Bp.imag),
            BrT=np.ascontiguousarray(Br.T),
        )
        lx = self.basis.lam[kp]
        p["lam_x"] = lx
        p["lam_y"] = np.concatenate([lx, lx])
        p["mu_x"] = self.basis.mu[kp]
        p["sign_y"] = self.basis.pair_sign[kp]
        for a in p.values():
            a.setflags(write=False)
        return p

    def to_compact(self, U):
        p = self.plans
        Y = np.asarray(U, dtype=float) @ p["TrT"]
        return (p["TpR"] @ Y) + 1j * (p["TpI"] @ Y)

    def from_compact(self, Z):
        p = self.plans
        Y = p["BpR2"] @ np.ascontiguousarray(Z.real) - p["BpI2"] @ np.ascontiguousarray(Z.imag)
        return Y @ p["BrT"]

    def compact_sigma(self, s):
        """(lam_j + lam_k)^s laid out like Z."""
        key = float(s)
        if key not in self._sigma_cache:
            _check_s(s)
            p = self.plans
            sig = frac_power(p["lam_x"][:, None] + p["lam_y"][None, :], s)
            sig.setflags(write=False)
            self._sigma_cache[key] = sig
        return self._sigma_cache[key]

    def compact_dx(self):
        """Multiplier i mu_j laid out like Z (broadcasting column)."""
        return 1j * self.plans["mu_x"][:, None]

    def compact_to_hat(self, Z):
        N, h = self.N, self.N // 2
        kp = self.kp
        sg = self.basis.pair_sign
        Za, Zb = Z[:, :h], Z[:, h:]
        Uh = np.empty((N, N), dtype=complex)
        Uh[h:, h:] = (Za + 1j * Zb) / SQRT2
        # column N-1-k for k in K+ is at position h-1-i (reversed)
        Uh[h:, :h] = ((Za - 1j * Zb) * sg[kp][None, :] / SQRT2)[:, ::-1]
        # rows of negative mu from the reality relation
        rev = np.arange(N)[::-1]
        Uh[:h, :] = (sg[kp][::-1, None] * sg[None, :]) * np.conj(Uh[h:, :][::-1][:, rev])
        return Uh

    def hat_to_compact(self, Uh):
        h = self.N // 2
        kp = self.kp
        sg = self.basis.pair_sign[kp]
        A = Uh[h:, h:]
        Bm = Uh[h:, :h][:, ::-1] * sg[None, :]
        return np.hstack([(A + Bm) / SQRT2, (A - Bm) / (1j * SQRT2)])

    def physical_to_tilde(self, U):
        c = basis1d.transform(U, self.grid, "forward", axis=0)
        return basis1d.transform(c, self.grid, "forward", axis=1)

    def tilde_to_physical(self, Ut):
        v = basis1d.transform(Ut, self.grid, "inverse", axis=0)
        return basis1d.transform(v, self.grid, "inverse", axis=1)

    def tilde_to_hat(self, Ut):
        E = self.basis.E
        return (E.T @ Ut.real @ E) + 1j * (E.T @ Ut.imag @ E)

    def hat_to_tilde(self, Uh):
        E = self.basis.E
        return (E @ Uh.real @ E.T) + 1j * (E @ Uh.imag @ E.T)

    def meshgrid(self):
        return np.meshgrid(self.x, self.x, indexing="ij")


@lru_cache(maxsize=4)
def get_discretization(N: int, alpha: float, closure: str = "conservative") -> Discretization:
    return Discretization(int(N), float(alpha), closure)


_VIEWS = ("physical", "tilde", "hat", "compact")


class Field2D:
    """Real field on the N x N grid with lazily synchronized views.

    Views: ``U`` physical samples (U[i, j] = u(x_i, y_j)), ``U_tilde`` rational
    coefficients, ``U_hat`` biorthogonal coefficients and ``Z`` the compact
    real representation. Accessing a view computes it from a current one.
    Fields are treated as immutable; operations return new fields.
    """

    def __init__(self, disc: Discretization, **views):
        self.disc = disc
        self._v = dict.fromkeys(_VIEWS)
        for k, val in views.items():
            if k not in _VIEWS:
                raise InvalidArgumentError(f"unknown view {k!r}")
            if val is not None:
                self._v[k] = val
        if all(v is None for v in self._v.values()):
            raise StateError("Field2D needs at least one view")

    @classmethod
    def from_physical(cls, disc, U):
        U = basis1d.enforce_reality(np.asarray(U))
        U = np.array(U, dtype=float)
        if U.shape != (disc.N, disc.N):
            raise InvalidArgumentError(f"expected shape {(disc.N, disc.N)}, got {U.shape}")
        return cls(disc, physical=U)

    @classmethod
    def from_hat(cls, disc, Uh):
        return cls(disc, hat=np.asarray(Uh, dtype=complex))

    @classmethod
    def from_tilde(cls, disc, Ut):
        return cls(disc, tilde=np.asarray(Ut, dtype=complex))

    @classmethod
    def from_compact(cls, disc, Z):
        return cls(disc, compact=np.asarray(Z, dtype=complex))

    @classmethod
    def zeros(cls, disc):
        return cls(disc, physical=np.zeros((disc.N, disc.N)))

    @property
    def grid_x(self):
        return self.disc.grid

    grid_y = grid_x

    def is_current(self, view: str) -> bool:
        return self._v[view] is not None

    def current_views(self):
        return tuple(k for k in _VIEWS if self._v[k] is not None)

    def _get(self, view):
        v = self._v
        if v[view] is not None:
            return v[view]
        d = self.disc
        if view == "physical":
            if v["compact"] is not None:
                out = d.from_compact(v["compact"])
            else:
                out = basis1d.enforce_reality(d.tilde_to_physical(self._get("tilde")))
        elif view == "tilde":
            if v["hat"] is not None or v["compact"] is not None:
                out = d.hat_to_tilde(self._get("hat"))
            else:
                out = d.physical_to_tilde(v["physical"])
        elif view == "hat":
            if v["compact"] is not None:
                out = d.compact_to_hat(v["compact"])
            else:
                out = d.tilde_to_hat(self._get("tilde"))
        else:
            if v["hat"] is not None and v["physical"] is None:
                out = d.hat_to_compact(v["hat"])
            else:
                out = d.to_compact(self._get("physical"))
        v[view] = out
        return out

    @property
    def U(self) -> np.ndarray:
        return self._get("physical")

    @property
    def U_tilde(self) -> np.ndarray:
        return self._get("tilde")

    @property
    def U_hat(self) -> np.ndarray:
        return self._get("hat")

    @property
    def Z(self) -> np.ndarray:
        return self._get("compact")

    def scaled(self, a: float) -> "Field2D":
        return Field2D(self.disc, **{k: None if val is None else a * val for k, val in self._v.items()})

    def copy(self) -> "Field2D":
        return Field2D(self.disc, **{k: None if val is None else val.copy() for k, val in self._v.items()})

    def __add__(self, other: "Field2D") -> "Field2D":
        return Field2D.from_compact(self.disc, self.Z + other.Z)

    def __repr__(self):
        return f"Field2D(N={self.disc.N}, alpha={self.disc.alpha}, views={self.current_views()})"


def biortho_transform(field: Field2D, direction: str) -> Field2D:
    """to_hat: U_hat = E^T U_tilde E; from_hat: U_tilde = E U_hat E^T."""
    d = field.disc
    if direction == "to_hat":
        if not field.is_current("tilde"):
            raise StateError("rational coefficients are not current")
        return Field2D(d, tilde=field.U_tilde, hat=d.tilde_to_hat(field.U_tilde))
    if direction == "from_hat":
        if not field.is_current("hat"):
            raise StateError("biorthogonal coefficients are not current")
        return Field2D(d, hat=field.U_hat, tilde=d.hat_to_tilde(field.U_hat))
    raise InvalidArgumentError(f"unknown direction {direction!r}")


def frac_laplacian_apply(field: Field2D, s: float) -> Field2D:
    """(-Delta)^s as the diagonal multiplier (lam_j + lam_k)^s on U_hat."""
    _check_s(s)
    d = field.disc
    if field.is_current("compact"):
        return Field2D.from_compact(d, d.compact_sigma(s) * field.Z)
    sig = frac_stiffness(d.basis, s).sigma
    return Field2D.from_hat(d, sig * field.U_hat)


def x_derivative_hat(field: Field2D) -> Field2D:
    """d/dx as the diagonal multiplier i mu_j (j the x index)."""
    d = field.disc
    if field.is_current("compact"):
        return Field2D.from_compact(d, d.compact_dx() * field.Z)
    return Field2D.from_hat(d, 1j * d.basis.mu[:, None] * field.U_hat)


def resample(field: Field2D, xs, ys) -> np.ndarray:
    """Evaluate the rational expansion of ``field`` at arbitrary nodes.

    Returns the real array u(xs[i], ys[j]).
    """
    g = field.disc.grid
    Rx = basis1d.basis_matrix(xs, g)
    Ry = Rx if ys is xs else basis1d.basis_matrix(ys, g)
    return basis1d.enforce_reality(Rx @ field.U_tilde @ Ry.T)

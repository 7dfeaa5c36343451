"""Warped-product G2-structures on ``N^6 x L`` and their torsion.

A warped structure is fixed by three functions of ``r`` and one constant:

    phi = G h^3 dr ^ omega + h^3 Re(e^{i theta} Omega),     metric G^2 dr^2 + h^2 g_6,

where ``(omega, Omega)`` is a Calabi-Yau (``lam == 0``) or nearly Kaehler
(``lam != 0``) SU(3)-structure on ``N^6``. The torsion is captured by three
functions

    alpha = theta' / G,   beta = lam sin(theta) / h,   gamma = h'/h + lam G cos(theta) / h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateTorsion,
    NegativeRadicand,
    NoBranchMatched,
    NonPeriodicConformalFactor,
    ZeroConformalFactor,
)
from .numerics import Grid, check_field, diff, interpolate, quadrature

__all__ = [
    "SU3Background",
    "WarpedProfile",
    "TorsionABC",
    "TorsionComponents",
    "FullTorsion",
    "TorsionClass",
    "DegenerateData",
    "compute_abc",
    "torsion_components",
    "full_torsion",
    "torsion_class",
    "conformal_transform",
    "gauge_fix_gamma",
    "reconstruct_profile",
    "reconstruct_degenerate",
    "nk_torsion_free_sign",
    "cyclic_winding",
    "J6",
]

DEFAULT_TOL = 1e-9

# complex structure on R^6 in an adapted frame (e1, Je1, e2, Je2, e3, Je3)
J6 = np.zeros((6, 6))
for _k in range(3):
    J6[2 * _k + 1, 2 * _k] = 1.0
    J6[2 * _k, 2 * _k + 1] = -1.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _scale(*fields) -> float:
    return max([1.0] + [float(np.max(np.abs(f))) for f in fields])


def cyclic_winding(theta: np.ndarray) -> float:
    """Total increase of an unwrapped phase sampled once around a circle."""
    steps = np.diff(np.append(theta, theta[0]))
    wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
    return float(np.sum(wrapped))


@dataclass(frozen=True)
class SU3Background:
    """Torsion constant of the SU(3)-structure: ``d omega = -3 lam Re Omega``."""

    lam: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ValueError("lambda must be finite")

    @property
    def is_calabi_yau(self) -> bool:
        return self.lam == 0.0

    @property
    def is_nearly_kaehler(self) -> bool:
        return self.lam != 0.0


@dataclass(frozen=True)
class WarpedProfile:
    """Sampled profile ``(G, h, theta)`` of a warped G2-structure.

    ``theta`` is stored unwrapped. On circle grids ``theta_winding`` records
    ``theta(r + L) - theta(r)`` (a multiple of ``2 pi`` for a globally defined
    structure), so that derivatives of ``theta`` stay periodic.
    """

    grid: Grid
    G: np.ndarray
    h: np.ndarray
    theta: np.ndarray
    background: SU3Background = SU3Background()
    theta_winding: float = 0.0

    def __post_init__(self):
        G = check_field(self.G, self.grid, "G")
        h = check_field(self.h, self.grid, "h")
        theta = check_field(self.theta, self.grid, "theta")
        if np.any(G <= 0):
            raise ValueError("G must be positive everywhere")
        if not (np.all(h > 0) or np.all(h < 0)):
            raise ValueError("h must be nonzero with a single sign")
        object.__setattr__(self, "G", _frozen(G))
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "theta", _frozen(theta))
        if not self.grid.periodic:
            object.__setattr__(self, "theta_winding", 0.0)

    @property
    def lam(self) -> float:
        return self.background.lam

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def F(self) -> np.ndarray:
        """Complex function ``h e^{i theta/3}`` combining fibre scale and phase."""
        return self.h * np.exp(1j * self.theta / 3.0)

    def with_fields(self, G=None, h=None, theta=None) -> "WarpedProfile":
        return WarpedProfile(
            self.grid,
            self.G if G is None else G,
            self.h if h is None else h,
            self.theta if theta is None else theta,
            self.background,
            self.theta_winding,
        )

    def theta_prime(self) -> np.ndarray:
        return diff(self.theta, self.grid, self.theta_winding)

    def h_prime(self) -> np.ndarray:
        return diff(self.h, self.grid)


@dataclass(frozen=True)
class TorsionABC:
    """Torsion coordinates ``(alpha, beta, gamma)`` sampled on a grid."""

    grid: Grid
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, _frozen(check_field(getattr(self, name), self.grid, name)))

    @classmethod
    def constant(cls, grid: Grid, alpha: float, beta: float, gamma: float = 0.0) -> "TorsionABC":
        return cls(grid, grid.constant(alpha), grid.constant(beta), grid.constant(gamma))

    def is_co_closed(self, tol: float = DEFAULT_TOL) -> bool:
        return float(np.max(np.abs(self.gamma))) <= tol * _scale(self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class TorsionComponents:
    tau1: np.ndarray
    tau7_coeff: np.ndarray
    tau27_scale: np.ndarray
    trace_T: np.ndarray

    @property
    def tau14(self) -> np.ndarray:
        # the 14-component of a warped structure vanishes identically
        return np.zeros_like(self.tau1)


@dataclass(frozen=True)
class FullTorsion:
    """``T = diag(alpha, -beta delta_6) - (gamma / G) J_6`` in the frame ``(G dr, h e_i)``."""

    diag_r: np.ndarray
    diag_6: np.ndarray
    j6_coeff: np.ndarray

    @property
    def trace(self) -> np.ndarray:
        return self.diag_r + 6.0 * self.diag_6

    def matrices(self) -> np.ndarray:
        """Stack of 7x7 matrices, one per grid node."""
        n = self.diag_r.size
        T = np.zeros((n, 7, 7))
        T[:, 0, 0] = self.diag_r
        idx = np.arange(1, 7)
        T[:, idx, idx] = self.diag_6[:, None]
        T[:, 1:, 1:] += self.j6_coeff[:, None, None] * J6[None, :, :]
        return T

    def symmetric_part(self) -> np.ndarray:
        T = self.matrices()
        return 0.5 * (T + np.swapaxes(T, 1, 2))

    def skew_part(self) -> np.ndarray:
        T = self.matrices()
        return 0.5 * (T - np.swapaxes(T, 1, 2))

    def is_symmetric(self, tol: float = DEFAULT_TOL) -> bool:
        return float(np.max(np.abs(self.skew_part()))) <= tol


@dataclass(frozen=True)
class TorsionClass:
    torsion_free: bool
    closed: bool
    co_closed: bool
    nearly_parallel: bool
    pure_27: bool

    def as_dict(self) -> dict:
        return {
            "torsion_free": self.torsion_free,
            "closed": self.closed,
            "co_closed": self.co_closed,
            "nearly_parallel": self.nearly_parallel,
            "pure_27": self.pure_27,
        }


def compute_abc(p: WarpedProfile) -> TorsionABC:
    lam = p.lam
    alpha = p.theta_prime() / p.G
    hp = p.h_prime()
    if lam == 0.0:
        beta = np.zeros(p.grid.n)
        gamma = hp / p.h
    else:
        beta = lam * np.sin(p.theta) / p.h
        gamma = hp / p.h + lam * p.G * np.cos(p.theta) / p.h
    return TorsionABC(p.grid, alpha, beta, gamma)


def torsion_components(t: TorsionABC) -> TorsionComponents:
    trace = t.alpha - 6.0 * t.beta
    return TorsionComponents(
        tau1=trace / 7.0,
        tau7_coeff=-np.asarray(t.gamma),
        tau27_scale=(t.alpha + t.beta) / 7.0,
        trace_T=trace,
    )


def full_torsion(t: TorsionABC, G) -> FullTorsion:
    G = check_field(G, t.grid, "G")
    if np.any(G <= 0):
        raise ValueError("G must be positive")
    return FullTorsion(
        diag_r=np.array(t.alpha),
        diag_6=-np.array(t.beta),
        j6_coeff=-np.asarray(t.gamma) / G,
    )


def torsion_class(t: TorsionABC, tol: float = DEFAULT_TOL) -> TorsionClass:
    """Classify torsion; thresholds are ``tol`` times ``max(1, max field magnitude)``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    thr = tol * _scale(t.alpha, t.beta, t.gamma)

    def small(x) -> bool:
        return float(np.max(np.abs(x))) <= thr

    co_closed = small(t.gamma)
    torsion_free = co_closed and small(t.alpha) and small(t.beta)
    tau1 = (t.alpha - 6.0 * t.beta) / 7.0
    nearly_parallel = co_closed and small(t.alpha + t.beta) and float(np.ptp(tau1)) <= thr
    pure_27 = co_closed and small(t.alpha - 6.0 * t.beta)
    return TorsionClass(
        torsion_free=torsion_free,
        closed=torsion_free,
        co_closed=co_closed,
        nearly_parallel=nearly_parallel,
        pure_27=pure_27,
    )


def conformal_transform(t: TorsionABC, f) -> TorsionABC:
    """Torsion of ``f^3 phi``: ``(alpha/f, beta/f, gamma + f'/f)``."""
    f = check_field(f, t.grid, "f")
    if float(np.min(np.abs(f))) <= 1e-12 * _scale(f):
        raise ZeroConformalFactor("conformal factor vanishes on the grid")
    # f'/f as (log|f|)': diff is linear, so composing transforms adds exactly
    return TorsionABC(t.grid, t.alpha / f, t.beta / f, t.gamma + diff(np.log(np.abs(f)), t.grid))


def gauge_fix_gamma(t: TorsionABC, r0: float):
    """Conformal factor ``f = exp(-int_{r0}^r gamma)`` removing ``gamma``.

    Returns the transformed torsion (with ``gamma`` set to zero, not
    recomputed) and ``f``. On a circle ``f`` is single valued only if
    ``gamma`` integrates to zero over the period.
    """
    grid = t.grid
    if grid.periodic:
        total = float(np.sum(t.gamma)) * grid.dr
        if abs(total) > 1e-10 * max(1.0, grid.length * float(np.max(np.abs(t.gamma)))):
            raise NonPeriodicConformalFactor(
                f"gamma integrates to {total:.3e} over the circle; exp(-int gamma) is not periodic"
            )
    f = np.exp(-quadrature(t.gamma, grid, r0))
    return TorsionABC(grid, t.alpha / f, t.beta / f, np.zeros(grid.n)), f


def _nowhere_small(x: np.ndarray, thr: float) -> bool:
    return float(np.min(np.abs(x))) > thr


def reconstruct_profile(
    t: TorsionABC,
    background: SU3Background,
    h0: float,
    r0: float,
    theta_branch: int = 0,
    tol: float = 1e-8,
) -> WarpedProfile:
    """Recover ``(G, h, theta)`` from torsion with ``lam != 0``.

    ``h0`` is the value of ``h`` at ``r0``. If ``gamma`` is not zero the
    torsion is first gauge fixed with :func:`gauge_fix_gamma` and the
    conformal factor (equal to 1 at ``r0``) is divided out at the end.
    ``theta`` is returned in ``(-pi, pi] + 2 pi theta_branch`` at the first
    node and unwrapped along the grid.

    Where ``cos(theta)`` vanishes the quotient defining ``G`` is 0/0, so
    ``beta'`` must be nowhere zero as well.
    """
    lam = background.lam
    if lam == 0.0:
        raise DegenerateTorsion("reconstruction needs a nearly Kaehler background (lambda != 0)")
    if h0 == 0 or not np.isfinite(h0):
        raise ValueError("h0 must be finite and nonzero")
    grid = t.grid
    f = None
    if not t.is_co_closed(tol):
        t, f = gauge_fix_gamma(t, r0)

    a, b = np.asarray(t.alpha), np.asarray(t.beta)
    thr = tol * _scale(a, b)
    for name, field in (("alpha", a), ("beta", b), ("alpha + beta", a + b)):
        if not _nowhere_small(field, thr):
            raise DegenerateTorsion(f"{name} vanishes on the grid; use reconstruct_degenerate")
    bp = diff(b, grid)
    if not _nowhere_small(bp, thr):
        raise DegenerateTorsion("beta' vanishes on the grid, so cos(theta) does and G is undetermined")

    h = h0 * np.exp(-quadrature(bp / (a + b), grid, r0))
    beta0 = interpolate(b, grid, r0)[0]
    sin_theta = (beta0 * h0 / lam) * np.exp(quadrature(bp / b * (a / (a + b)), grid, r0))
    hp = diff(h, grid)
    rad = lam**2 - h**2 * b**2
    if float(np.min(rad)) <= 0.0:
        raise NegativeRadicand("lambda^2 - h^2 beta^2 is not positive on the grid")
    G = np.abs(hp) / np.sqrt(rad)
    cos_theta = -hp / (lam * G)
    theta = np.unwrap(np.arctan2(sin_theta, cos_theta)) + 2 * np.pi * theta_branch
    winding = cyclic_winding(theta) if grid.periodic else 0.0

    if f is not None:
        G = G / f
        h = h / f
    return WarpedProfile(grid, G, h, theta, background, winding)


@dataclass(frozen=True)
class DegenerateData:
    """Free data for the degenerate reconstruction branches.

    ``G`` defaults to 1. ``theta0`` defaults to ``pi/2``, except on the
    ``beta == 0`` branch where ``sin(theta)`` must vanish and it defaults
    to 0. ``r0`` defaults to the left end of the grid.
    """

    G: Optional[np.ndarray] = None
    theta0: Optional[float] = None
    h0: float = 1.0
    r0: Optional[float] = None


def _degenerate_branch(t: TorsionABC, tol: float) -> str:
    a, b = np.asarray(t.alpha), np.asarray(t.beta)
    thr = tol * _scale(a, b, t.gamma)

    def zero(x):
        return float(np.max(np.abs(x))) <= thr

    if not zero(t.gamma):
        raise NoBranchMatched("degenerate branches require gamma == 0")
    matches = []
    if zero(b):
        if not zero(a):
            raise NoBranchMatched("beta == 0 with lambda != 0 forces alpha == 0")
        matches.append("beta_zero")
    if zero(a) and _nowhere_small(b, thr):
        matches.append("alpha_zero")
    if zero(a + b) and _nowhere_small(a, thr):
        if float(np.ptp(a)) > thr:
            raise NoBranchMatched("alpha + beta == 0 forces alpha to be constant")
        matches.append("nearly_parallel")
    if len(matches) != 1:
        raise NoBranchMatched(
            "no degenerate branch matches" if not matches else f"ambiguous branches {matches}"
        )
    return matches[0]


def reconstruct_degenerate(
    t: TorsionABC,
    background: SU3Background,
    data: DegenerateData = DegenerateData(),
    tol: float = 1e-8,
) -> WarpedProfile:
    """Profiles for co-closed torsion with ``beta == 0``, ``alpha == 0`` or ``alpha + beta == 0``."""
    lam = background.lam
    if lam == 0.0:
        raise NoBranchMatched("degenerate branches are defined for lambda != 0")
    grid = t.grid
    branch = _degenerate_branch(t, tol)
    r0 = grid.r_min if data.r0 is None else data.r0
    G = grid.constant(1.0) if data.G is None else check_field(data.G, grid, "G")
    n = grid.n

    if branch == "beta_zero":
        theta0 = 0.0 if data.theta0 is None else data.theta0
        if abs(np.sin(theta0)) > tol:
            raise NoBranchMatched("beta == 0 needs sin(theta) == 0")
        h = data.h0 - lam * np.cos(theta0) * quadrature(G, grid, r0)
        return WarpedProfile(grid, G, h, np.full(n, theta0), background)

    if branch == "alpha_zero":
        theta0 = np.pi / 2 if data.theta0 is None else data.theta0
        s = np.sin(theta0)
        if abs(s) <= tol:
            raise NoBranchMatched("alpha == 0 with beta != 0 needs sin(theta) != 0")
        h = lam * s / np.asarray(t.beta)
        c = np.cos(theta0)
        if abs(c) > tol:
            G = -diff(h, grid) / (lam * c)
            if np.any(G <= 0):
                raise NoBranchMatched("h' = -lambda G cos(theta) gives a non-positive G")
        elif float(np.ptp(t.beta)) > tol * _scale(t.beta):
            raise NoBranchMatched("cos(theta) == 0 forces beta to be constant")
        return WarpedProfile(grid, G, h, np.full(n, theta0), background)

    alpha = float(np.mean(t.alpha))
    theta0 = np.pi / 2 if data.theta0 is None else data.theta0
    theta = theta0 + alpha * quadrature(G, grid, r0)
    winding = alpha * float(np.sum(G)) * grid.dr if grid.periodic else 0.0
    h = -(lam / alpha) * np.sin(theta)
    return WarpedProfile(grid, G, h, theta, background, winding)


def nk_torsion_free_sign(p: WarpedProfile, tol: float = DEFAULT_TOL) -> Optional[int]:
    """Sign ``s`` with ``h' = s lam G`` for a torsion-free nearly Kaehler profile.

    Returns ``None`` when the profile is not torsion free (or ``lam == 0``).
    """
    if p.lam == 0.0:
        return None
    if not torsion_class(compute_abc(p), tol).torsion_free:
        return None
    hp = p.h_prime()
    thr = tol * _scale(hp, p.lam * p.G)
    for sign in (1, -1):
        if float(np.max(np.abs(hp - sign * p.lam * p.G))) <= thr:
            return sign
    return None

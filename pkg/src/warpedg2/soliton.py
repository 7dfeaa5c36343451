"""Soliton ODE systems of the modified coflow in the gauge ``G = 1``.

A soliton vector field is ``X = l(r) d/dr``. Written with the torsion
functions, the soliton condition is a first-order system for
``(alpha, beta, l)`` plus one algebraic constant ``mu``. On a Calabi-Yau
background ``beta == 0`` and ``mu == 0`` and the system

    l' = -alpha^2 + 2 C alpha,      alpha' = alpha l

has the first integral ``R^2 = l^2 + (alpha - 2C)^2`` and explicit solutions
in three families (parabolic, hyperbolic, trigonometric).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConstraintOnly,
    DomainError,
    SingularAtLZero,
    SingularDenominator,
    StepSizeUnderflow,
)
from .numerics import Grid, StepControl, diff, integrate_ode

__all__ = [
    "SolitonParams",
    "SolitonState",
    "SolitonSample",
    "FamilyKind",
    "CYFamily",
    "PeriodicityReport",
    "NKCatalogEntry",
    "SolitonTrajectory",
    "soliton_rhs_general_k",
    "soliton_rhs_nk",
    "cy_soliton_rhs",
    "first_integral_R2",
    "cy_closed_form",
    "cy_family_from_ics",
    "cy_periodicity",
    "kmt_reduction",
    "kmt_family",
    "residual",
    "residual_components",
    "nk_constant_catalog",
    "catalog_points_at_l0",
    "nk_conserved_F",
    "constant_alpha_rhs",
    "torsion_free_line",
    "solve_soliton_bvp",
    "grid_search_l0_zeros",
]

L_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SolitonParams:
    C: float = 0.0
    mu: float = 0.0
    k: float = 2.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.C, self.mu, self.k)):
            raise ValueError("soliton parameters must be finite")


@dataclass(frozen=True)
class SolitonState:
    alpha: float
    beta: float
    l: float

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.l], dtype=float)


# ---------------------------------------------------------------------------
# right-hand sides


def soliton_rhs_general_k(s: SolitonState, p: SolitonParams, k: Optional[float] = None):
    """``(alpha', beta', l')`` of the soliton system for flow coefficient ``k``.

    Raises :class:`ConstraintOnly` at ``k == 1`` (the ``(alpha - 6 beta)'``
    equation collapses to ``alpha l = 0``), :class:`SingularAtLZero` where
    ``l`` vanishes and :class:`SingularDenominator` where ``alpha + beta`` does.
    """
    k = p.k if k is None else k
    a, b, l = s.alpha, s.beta, s.l
    C, mu = p.C, p.mu
    if k == 1:
        raise ConstraintOnly("at k = 1 the soliton system reduces to the constraint alpha l = 0")
    if abs(l) <= L_ZERO_TOL:
        raise SingularAtLZero("l = 0: the soliton equations are constraints, not an ODE")
    lp = (1 - k) * a * a + 3 * b * b + 6 * k * a * b + k * C * a - mu
    if a == 0 and b == 0:
        return 0.0, 0.0, lp
    if abs(a + b) <= 1e-13 * max(abs(a), abs(b), 1.0):
        raise SingularDenominator("alpha + beta = 0 in the soliton system")
    bp = (mu - 3 * (1 - 2 * k) * b * b - (k - 1) * a * b + k * C * b) * (a + b) / l
    ap = a * l / (k - 1) + 6 * bp
    return ap, bp, lp


def soliton_rhs_nk(s: SolitonState, p: SolitonParams):
    """Nearly Kaehler soliton system at ``k = 2``:

    ``l' = -alpha^2 + 3 beta^2 + 12 alpha beta + 2 C alpha - mu``,
    ``beta' = (9 beta^2 - alpha beta + 2 C beta + mu)(alpha + beta) / l``,
    ``alpha' = alpha l + 6 beta'``.
    """
    return soliton_rhs_general_k(s, p, 2.0)


def cy_soliton_rhs(s: SolitonState, C: float):
    """``(alpha', l')`` on a Calabi-Yau background (``beta = 0``, ``mu = 0``)."""
    a, l = s.alpha, s.l
    return a * l, -a * a + 2 * C * a


def first_integral_R2(s: SolitonState, C: float) -> float:
    return s.l**2 + (s.alpha - 2 * C) ** 2


# ---------------------------------------------------------------------------
# Calabi-Yau closed forms


class FamilyKind(str, enum.Enum):
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"
    TRIGONOMETRIC = "trig"


@dataclass(frozen=True)
class CYFamily:
    """One closed-form Calabi-Yau soliton, anchored so that ``l(r0) = 0``,
    ``alpha(r0) = 2C + sign R`` and ``theta(r0) = theta0``.

    For the parabolic family ``R = 2|C|`` and only ``alpha(r0) = 4C`` is
    non-trivial, so ``sign`` is ignored.
    """

    kind: FamilyKind
    C: float
    R: float
    r0: float = 0.0
    theta0: float = 0.0
    sign: int = 1
    rel_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        if self.R < 0:
            raise DomainError("R is a non-negative radius")
        d = self.R**2 - 4 * self.C**2
        thr = self.rel_tol * max(1.0, self.R**2, 4 * self.C**2)
        if self.kind is FamilyKind.PARABOLIC:
            if abs(d) > thr or self.C == 0:
                raise DomainError("parabolic family needs R^2 = 4C^2 with C != 0")
        elif self.kind is FamilyKind.HYPERBOLIC:
            if d <= thr:
                raise DomainError("hyperbolic family needs R^2 > 4C^2")
        elif d >= -thr:
            raise DomainError("trigonometric family needs R^2 < 4C^2")

    @property
    def Q(self) -> float:
        return math.sqrt(abs(self.R**2 - 4 * self.C**2))

    @property
    def alpha0(self) -> float:
        if self.kind is FamilyKind.PARABOLIC:
            return 4 * self.C
        return 2 * self.C + self.sign * self.R

    @property
    def period(self) -> Optional[float]:
        return 2 * math.pi / self.Q if self.kind is FamilyKind.TRIGONOMETRIC else None


def _alpha_l(f: CYFamily, r):
    """``alpha`` and ``l``; written with numpy ufuncs so complex ``r`` works."""
    x = r - f.r0
    C, R = f.C, f.R
    if f.kind is FamilyKind.PARABOLIC:
        den = 4 * C * C * x * x + 1
        return 4 * C / den, -8 * C * C * x / den
    Q = f.Q
    if f.kind is FamilyKind.HYPERBOLIC:
        s = f.sign
        e = np.exp(-x * Q)
        den = (e * R - s * 2 * C) ** 2 + Q * Q
        return s * 2 * R * Q * Q * e / den, R * R * Q * (e * e - 1) / den
    y = x * Q + (math.pi if f.sign == 1 else 0.0)
    den = 2 * C + R * np.cos(y)
    return Q * Q / den, Q * R * np.sin(y) / den


def _trig_phase(y: np.ndarray, kk: float, unwrap: bool) -> np.ndarray:
    """Continuous ``psi`` with ``tan(psi) = kk tan(y)`` and ``psi(0) = 0``."""
    if not unwrap:
        return np.arctan(kk * np.tan(y))
    a = np.arctan2(kk * np.sin(y), np.cos(y))
    track = y if kk > 0 else -y
    return a + 2 * np.pi * np.round((track - a) / (2 * np.pi))


def cy_closed_form(f: CYFamily, r, unwrap: bool = True):
    """``(alpha, l, theta)`` of a closed-form Calabi-Yau soliton at ``r``.

    ``theta`` is unwrapped across the branch cuts of the arctangent so that
    it is continuous. ``unwrap=False`` returns the principal-branch formula
    (trigonometric family only; the other families have no cuts).
    """
    r = np.asarray(r, dtype=float)
    alpha, l = _alpha_l(f, r)
    x = r - f.r0
    C, R = f.C, f.R
    if f.kind is FamilyKind.PARABOLIC:
        theta = 2 * np.arctan(2 * C * x) + f.theta0
    elif f.kind is FamilyKind.HYPERBOLIC:
        Q, s = f.Q, f.sign
        e = np.exp(-x * Q)
        theta = 2 * np.arctan((2 * C - s * e * R) / Q) + f.theta0 - 2 * np.arctan((2 * C - s * R) / Q)
    else:
        Q = f.Q
        kk = (2 * C - R) / Q
        shift = math.pi if f.sign == 1 else 0.0
        y = (x * Q + shift) / 2
        y0 = shift / 2
        if unwrap:
            psi = _trig_phase(y, kk, True) - _trig_phase(np.asarray(y0), kk, True)
        else:
            psi = _trig_phase(y, kk, False)
        theta = 2 * psi + f.theta0
    return alpha, l, theta


def cy_family_from_ics(C: float, alpha0: float, r0: float = 0.0, theta0: float = 0.0, tol: float = 1e-12) -> CYFamily:
    """The closed-form family through ``(alpha, l) = (alpha0, 0)`` at ``r0``."""
    R = abs(alpha0 - 2 * C)
    d = R * R - 4 * C * C
    scale = max(1.0, R * R, 4 * C * C)
    sign = 1 if alpha0 - 2 * C >= 0 else -1
    if alpha0 == 0:
        raise DomainError("alpha = 0 is the torsion-free line of fixed points")
    if abs(d) <= tol * scale:
        return CYFamily(FamilyKind.PARABOLIC, C, R, r0, theta0, 1)
    kind = FamilyKind.HYPERBOLIC if d > 0 else FamilyKind.TRIGONOMETRIC
    return CYFamily(kind, C, R, r0, theta0, sign)


@dataclass(frozen=True)
class PeriodicityReport:
    periodic: bool
    n: Optional[int]
    Q: Optional[float]
    q_is_integer: bool
    q_equals_2n: bool
    q_squared_equals_2n: bool
    max_mismatch: float


def cy_periodicity(C: float, R: float, circle_circumference: float = 2 * math.pi, tol: float = 1e-10) -> PeriodicityReport:
    """Whether the trigonometric soliton closes up on a circle.

    The verdict is numerical: ``alpha``, ``l`` and ``e^{i theta}`` are sampled
    at ``r`` and ``r + circumference`` and compared. The two analytic
    conditions (``Q = 2n`` and ``Q^2 = 2n``) are reported alongside.
    """
    if R < 0 or R * R >= 4 * C * C:
        return PeriodicityReport(False, None, None, False, False, False, math.inf)
    f = CYFamily(FamilyKind.TRIGONOMETRIC, C, R)
    Q = f.Q
    L = circle_circumference
    r = np.linspace(0.0, L, 64, endpoint=False)
    a1, l1, t1 = cy_closed_form(f, r)
    a2, l2, t2 = cy_closed_form(f, r + L)
    mismatch = max(
        float(np.max(np.abs(a1 - a2))),
        float(np.max(np.abs(l1 - l2))),
        float(np.max(np.abs(np.exp(1j * t1) - np.exp(1j * t2)))),
    )
    scale = max(1.0, float(np.max(np.abs(a1))), float(np.max(np.abs(l1))))
    periodic = mismatch <= tol * scale

    def is_int(x):
        return abs(x - round(x)) <= 1e-9 * max(1.0, abs(x))

    turns = Q * L / (2 * math.pi)
    return PeriodicityReport(
        periodic=periodic,
        n=int(round(turns)) if periodic else None,
        Q=Q,
        q_is_integer=is_int(Q),
        q_equals_2n=is_int(Q / 2),
        q_squared_equals_2n=is_int(Q * Q / 2),
        max_mismatch=mismatch,
    )


def kmt_reduction(b: float, c: float, r):
    """``l = b (1 - c^2 e^{2br}) / (1 + c^2 e^{2br})`` and ``theta = 2 arctan(c e^{br})``."""
    r = np.asarray(r, dtype=float)
    e = c * c * np.exp(2 * b * r)
    return b * (1 - e) / (1 + e), 2 * np.arctan(c * np.exp(b * r))


def kmt_family(b: float, c: float) -> CYFamily:
    """Hyperbolic family with ``C = 0`` equal to the ``(b, c)`` solution for ``b < 0``, ``c != 0``.

    ``Q = R = -b``, ``A0 = -2 Q c``, ``sign = sign(A0)``,
    ``r0 = log(|A0| / 2R) / Q`` and ``theta0 = 2 arctan(-sign)``.
    """
    if not b < 0 or c == 0:
        raise DomainError("the reduction needs b < 0 and c != 0")
    Q = -b
    A0 = -2 * Q * c
    sign = 1 if A0 > 0 else -1
    r0 = math.log(abs(A0) / (2 * Q)) / Q
    return CYFamily(FamilyKind.HYPERBOLIC, 0.0, Q, r0, 2 * math.atan(-sign), sign)


# ---------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class SolitonSample:
    """Values and derivatives of ``(alpha, beta, l)`` at a set of points."""

    alpha: np.ndarray
    beta: np.ndarray
    l: np.ndarray
    alpha_p: np.ndarray
    beta_p: np.ndarray
    l_p: np.ndarray
    beta_pp: np.ndarray

    @classmethod
    def constant(cls, alpha: float, beta: float, l: float, l_p: float = 0.0) -> "SolitonSample":
        z = np.zeros(1)
        return cls(z + alpha, z + beta, z + l, z, z.copy(), z + l_p, z.copy())

    @classmethod
    def from_grid(cls, alpha, beta, l, grid: Grid) -> "SolitonSample":
        a, b, ll = (np.asarray(x, dtype=float) for x in (alpha, beta, l))
        bp = diff(b, grid)
        return cls(a, b, ll, diff(a, grid), bp, diff(ll, grid), diff(bp, grid))

    @classmethod
    def from_function(cls, fn: Callable, r, step: float = 1e-20, h2: float = 1e-4) -> "SolitonSample":
        """Sample a closed form ``fn(r) -> (alpha, beta, l)`` with complex-step derivatives.

        ``fn`` must accept complex arguments. ``beta''`` is a central
        difference of complex-step first derivatives.
        """
        r = np.asarray(r, dtype=float)
        vals = [np.real(np.asarray(v, dtype=complex)) * np.ones_like(r) for v in fn(r + 0j)]
        ders = [np.imag(np.asarray(v, dtype=complex)) / step * np.ones_like(r) for v in fn(r + 1j * step)]
        bp_plus = np.imag(np.asarray(fn(r + h2 + 1j * step)[1], dtype=complex)) / step
        bp_minus = np.imag(np.asarray(fn(r - h2 + 1j * step)[1], dtype=complex)) / step
        bpp = (bp_plus - bp_minus) / (2 * h2) * np.ones_like(r)
        return cls(vals[0], vals[1], vals[2], ders[0], ders[1], ders[2], bpp)


def residual_components(sample: SolitonSample, p: SolitonParams, lam: float) -> dict:
    """Each soliton equation in the form ``expression = 0``, maximised over the sample.

    Nearly Kaehler (``lam != 0``): the ``l'`` equation, the
    ``(alpha - 6 beta)'`` equation, the ``beta'`` equation multiplied by
    ``alpha + beta`` and the co-closedness condition multiplied by ``l``.
    Calabi-Yau: the same first two equations plus ``|beta|`` and ``|mu|``.
    """
    s = sample
    k, C, mu = p.k, p.C, p.mu
    a, b, l = s.alpha, s.beta, s.l
    e1 = (1 - k) * a * a + 3 * b * b + 6 * k * a * b + k * C * a - s.l_p - mu
    e2 = (k - 1) * (s.alpha_p - 6 * s.beta_p) - a * l
    out = {"l_eq": float(np.max(np.abs(e1))), "trace_eq": float(np.max(np.abs(e2)))}
    if lam == 0.0:
        out["beta_zero"] = float(np.max(np.abs(b)))
        out["mu_zero"] = abs(mu)
        return out
    e3 = (3 * (1 - 2 * k) * b * b + (k - 1) * a * b - k * C * b - mu) * (a + b) + s.beta_p * l
    bp = s.beta_p
    e4 = l * (bp * bp - s.beta_pp * (a + b) + bp * (s.alpha_p + bp) - a * b * (a + b) ** 2)
    out["beta_eq"] = float(np.max(np.abs(e3)))
    out["co_closed"] = float(np.max(np.abs(e4)))
    return out


def residual(sample: SolitonSample, p: SolitonParams, lam: float) -> float:
    """Largest absolute residual of all applicable soliton equations."""
    return max(residual_components(sample, p, lam).values())


# ---------------------------------------------------------------------------
# nearly Kaehler catalog


@dataclass(frozen=True)
class NKCatalogEntry:
    """A solution of the nearly Kaehler soliton system with a constant variable.

    ``alpha`` and ``beta`` are constants. ``l`` is ``l_value + l_slope r``;
    ``l_arbitrary`` means any constant ``l`` works (``l_value`` is then a
    representative). ``branch`` labels the root for multi-valued entries.
    """

    id: int
    alpha: float
    beta: float
    l_value: float
    l_slope: float
    l_arbitrary: bool
    mu: float
    validity: str
    branch: str = ""

    def sample(self, r=None, l0: Optional[float] = None) -> SolitonSample:
        r = np.zeros(1) if r is None else np.atleast_1d(np.asarray(r, dtype=float))
        base = self.l_value if l0 is None else l0
        z = np.zeros_like(r)
        return SolitonSample(
            z + self.alpha, z + self.beta, base + self.l_slope * r, z, z.copy(), z + self.l_slope, z.copy()
        )

    def as_dict(self, C: float, lam: float = 1.0) -> dict:
        res = residual(self.sample(np.linspace(-1, 1, 5)), SolitonParams(C, self.mu), lam)
        return {
            "id": self.id,
            "branch": self.branch,
            "alpha": self.alpha,
            "beta": self.beta,
            "l": "arbitrary" if self.l_arbitrary else {"value_at_0": self.l_value, "slope": self.l_slope},
            "mu": self.mu,
            "validity": self.validity,
            "residual": res,
        }


def nk_constant_catalog(C: float, mu: float, tol: float = 1e-12) -> List[NKCatalogEntry]:
    """Every catalog solution valid at ``(C, mu)`` (``k = 2``).

    Entry 5 is listed with both signs of ``sqrt(3 mu)``; the negative root
    solves the same equations.
    """
    out: List[NKCatalogEntry] = []
    out.append(NKCatalogEntry(1, 0.0, 0.0, 0.0, -mu, True, mu, "all (C, mu); l = l0 - mu r"))

    disc = C * C - 9 * mu
    if disc >= 0:
        roots = sorted({(-C + math.sqrt(disc)) / 9, (-C - math.sqrt(disc)) / 9})
        labels = ["-", "+"] if len(roots) == 2 else [""]
        for b, lab in zip(roots, labels):
            out.append(
                NKCatalogEntry(
                    2, 0.0, b, 0.0, 2 * b * (6 * b + C), True, mu,
                    "C^2 >= 9 mu; mu = -9 beta^2 - 2 C beta", lab,
                )
            )

    if abs(mu - C * C / 12) <= tol * max(1.0, C * C):
        out.append(NKCatalogEntry(3, 0.0, -C / 6, 0.0, 0.0, True, mu, "mu = C^2 / 12; l any constant"))

    disc = C * C - 10 * mu
    if disc >= 0:
        for sgn in (1, -1):
            a = (C + sgn * math.sqrt(disc)) / 10
            out.append(NKCatalogEntry(4, a, -a, 0.0, 0.0, False, mu, "mu <= C^2 / 10; l = 0", "+" if sgn > 0 else "-"))
            if disc == 0:
                break

    if mu >= 0:
        for sgn in (1, -1):
            s = sgn * math.sqrt(3 * mu)
            out.append(NKCatalogEntry(5, 4 * s + 2 * C, s / 3, 0.0, 0.0, False, mu, "mu >= 0; l = 0", "+" if sgn > 0 else "-"))
            if mu == 0:
                break
    return out


def catalog_points_at_l0(C: float, mu: float) -> List[Tuple[float, float]]:
    """Constant ``(alpha, beta)`` of catalog entries compatible with ``l == 0`` identically."""
    pts = []
    for e in nk_constant_catalog(C, mu):
        if e.l_arbitrary and abs(e.l_slope) > 1e-14:
            continue
        pts.append((e.alpha, e.beta))
    return pts


def nk_conserved_F(s: SolitonState, C: float, mu: float) -> float:
    """``F = alpha l^2 + 12 (beta^3 + 6 alpha beta^2 - (alpha^2 - 2 C alpha + mu) beta)``."""
    a, b, l = s.alpha, s.beta, s.l
    return a * l * l + 12 * (b**3 + 6 * a * b * b - (a * a - 2 * C * a + mu) * b)


def constant_alpha_rhs(alpha: float, C: float, mu: float):
    """Right-hand side in ``(beta, l)`` of the subsystem with ``alpha`` frozen."""

    def rhs(_r, y):
        b, l = y
        return np.array([-alpha * l / 6, -alpha * alpha + 3 * b * b + 12 * alpha * b + 2 * C * alpha - mu])

    return rhs


def torsion_free_line(mu: float, l0: float, h0: float, lam: float = 1.0):
    """Torsion-free soliton: ``alpha = beta = 0``, ``theta = 0``, ``h = h0 - lam r``, ``l = l0 - mu r``.

    Returns a function of ``r`` giving ``(alpha, beta, l, h, theta)``.
    """

    def at(r):
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        return z, z.copy(), l0 - mu * r, h0 - lam * r, z.copy()

    return at


# ---------------------------------------------------------------------------
# completeness search at l = 0


def _l0_equations(a, b, C, mu):
    e1 = -a * a + 3 * b * b + 12 * a * b + 2 * C * a - mu
    p = -9 * b * b + a * b - 2 * C * b - mu
    e3 = p * (a + b)
    return e1, e3


def _l0_jacobian(a, b, C, mu):
    p = -9 * b * b + a * b - 2 * C * b - mu
    de1 = (-2 * a + 12 * b + 2 * C, 6 * b + 12 * a)
    dp = (b, -18 * b + a - 2 * C)
    de3 = (dp[0] * (a + b) + p, dp[1] * (a + b) + p)
    return de1, de3


def grid_search_l0_zeros(
    C: float,
    mu: float,
    box: float = 5.0,
    resolution: float = 1e-3,
    chunk: int = 500,
) -> List[Tuple[float, float]]:
    """Common zeros of the ``l == 0`` constraints on a dense ``(alpha, beta)`` grid.

    A node is flagged when both constraints are smaller than the variation of
    the constraint across one grid cell. Flagged clusters are refined by
    Newton's method and returned sorted and de-duplicated.
    """
    from scipy import ndimage

    axis = np.arange(-box, box + resolution / 2, resolution)
    m = axis.size
    mask = np.zeros((m, m), dtype=bool)
    for start in range(0, m, chunk):
        a = axis[start : start + chunk, None]
        b = axis[None, :]
        e1 = -a * a + 3 * b * b + 12 * a * b + 2 * C * a - mu
        g1 = (np.abs(-2 * a + 12 * b + 2 * C) + np.abs(6 * b + 12 * a)) * resolution
        # the first test leaves a thin band; the second is only evaluated there
        ia, ib = np.nonzero(np.abs(e1) <= g1)
        aa, bb = axis[start + ia], axis[ib]
        _, e3 = _l0_equations(aa, bb, C, mu)
        _, de3 = _l0_jacobian(aa, bb, C, mu)
        g3 = (np.abs(de3[0]) + np.abs(de3[1])) * resolution
        keep = np.abs(e3) <= g3
        mask[start + ia[keep], ib[keep]] = True
    labels, count = ndimage.label(mask, structure=np.ones((3, 3)))
    found: List[Tuple[float, float]] = []
    for idx in ndimage.find_objects(labels):
        if idx is None:
            continue
        ia = (idx[0].start + idx[0].stop - 1) / 2
        ib = (idx[1].start + idx[1].stop - 1) / 2
        x = np.array([axis[0] + ia * resolution, axis[0] + ib * resolution])
        x = _newton_l0(x, C, mu)
        if x is None:
            continue
        if not any(abs(x[0] - f[0]) + abs(x[1] - f[1]) < 10 * resolution for f in found):
            found.append((float(x[0]), float(x[1])))
    return sorted(found)


def _newton_l0(x, C, mu, iters: int = 60):
    for _ in range(iters):
        e1, e3 = _l0_equations(x[0], x[1], C, mu)
        de1, de3 = _l0_jacobian(x[0], x[1], C, mu)
        J = np.array([de1, de3], dtype=float)
        F = np.array([e1, e3], dtype=float)
        step = np.linalg.lstsq(J, F, rcond=None)[0]
        x = x - step
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(x))):
            break
    e1, e3 = _l0_equations(x[0], x[1], C, mu)
    if max(abs(e1), abs(e3)) > 1e-8:
        return None
    return x


# ---------------------------------------------------------------------------
# integration


@dataclass
class SolitonTrajectory:
    r: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    l: np.ndarray
    theta: np.ndarray
    R2: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    mode: str = "cy"

    @property
    def R2_drift(self) -> float:
        if self.R2 is None:
            return math.nan
        return float(np.max(np.abs(self.R2 - self.R2[0])))


# tighter than the generic default: at rtol 1e-9 the R^2 drift of large
# trigonometric orbits reaches 1e-8 within three periods
SOLITON_CONTROL = StepControl(rtol=1e-11, atol=1e-13)


def solve_soliton_bvp(
    ics: SolitonState,
    p: SolitonParams,
    lam: float,
    r_span: Tuple[float, float],
    ctl: StepControl = SOLITON_CONTROL,
    r_eval: Optional[Sequence[float]] = None,
    theta0: float = 0.0,
) -> SolitonTrajectory:
    """Integrate the soliton system from ``r_span[0]`` to ``r_span[1]``.

    ``lam == 0`` integrates the Calabi-Yau system for ``(alpha, l)`` and
    records ``R^2``. Otherwise the nearly Kaehler system for
    ``(alpha, beta, l)`` is used and crossing ``l = 0`` raises
    :class:`SingularAtLZero`. ``theta`` is integrated alongside from
    ``theta' = alpha``.
    """
    r0, r1 = r_span
    if lam == 0.0:
        if ics.beta != 0.0:
            raise DomainError("a Calabi-Yau soliton has beta = 0")

        def rhs(_r, y):
            ap, lp = cy_soliton_rhs(SolitonState(y[0], 0.0, y[1]), p.C)
            return np.array([ap, lp, y[0]])

        traj = integrate_ode(rhs, [ics.alpha, ics.l, theta0], r0, r1, ctl, t_eval=r_eval)
        a, l, th = traj.y[:, 0], traj.y[:, 1], traj.y[:, 2]
        return SolitonTrajectory(
            traj.t, a, np.zeros_like(a), l, th, R2=l * l + (a - 2 * p.C) ** 2, mode="cy"
        )

    if abs(ics.l) <= L_ZERO_TOL:
        raise SingularAtLZero("initial l = 0: use the constant-variable catalog")
    sign0 = np.sign(ics.l)

    def rhs(_r, y):
        if np.sign(y[2]) != sign0 or abs(y[2]) <= L_ZERO_TOL:
            # rejected trial step; the integrator retries with a smaller one
            return np.full(4, np.nan)
        ap, bp, lp = soliton_rhs_general_k(SolitonState(y[0], y[1], y[2]), p)
        return np.array([ap, bp, lp, y[0]])

    try:
        traj = integrate_ode(rhs, [ics.alpha, ics.beta, ics.l, theta0], r0, r1, ctl, t_eval=r_eval)
    except StepSizeUnderflow as exc:
        part = exc.trajectory
        l_last = part.y[-1, 2] if part is not None and len(part) else ics.l
        if abs(l_last) <= 1e-3 * max(1.0, abs(ics.l)):
            raise SingularAtLZero(f"trajectory reaches l = 0 near r = {exc.t_last:.6g}") from exc
        raise
    a, b, l, th = (traj.y[:, i] for i in range(4))
    F = a * l * l + 12 * (b**3 + 6 * a * b * b - (a * a - 2 * p.C * a + p.mu) * b)
    return SolitonTrajectory(traj.t, a, b, l, th, F=F, mode="nk")

"""SU(3)-equivariant 3-forms on a warped product and the Laplacian of ``phi``.

An equivariant 3-form is written

    chi = Re(A F^3 Omega) + B G h^2 dr ^ omega,     F = h e^{i theta / 3},

and is stored through the triple ``(Re A, Im A, B)``. For ``chi = phi`` the
triple is ``(1, 0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCoClosed, SingularDenominator
from .geometry import DEFAULT_TOL, TorsionABC, WarpedProfile, compute_abc
from .numerics import check_field, diff

__all__ = [
    "SymThreeForm",
    "G2Decomp",
    "phi_form",
    "g2_decompose",
    "star_d",
    "star_d_phi",
    "d_star",
    "star_d_psi",
    "laplacian_phi",
    "laplacian_phi_gamma0",
    "laplacian_phi_profile",
    "laplacian_g2_decomp",
    "cos_ratio",
]

SINGULAR_RTOL = 1e-13


@dataclass(frozen=True)
class SymThreeForm:
    re1: np.ndarray
    im1: np.ndarray
    re2: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("re1", "im1", "re2")]
        shape = np.broadcast_shapes(*(a.shape for a in arrs))
        for k, a in zip(("re1", "im1", "re2"), arrs):
            object.__setattr__(self, k, np.broadcast_to(a, shape).copy())

    def __add__(self, other: "SymThreeForm") -> "SymThreeForm":
        return SymThreeForm(self.re1 + other.re1, self.im1 + other.im1, self.re2 + other.re2)

    def __sub__(self, other: "SymThreeForm") -> "SymThreeForm":
        return SymThreeForm(self.re1 - other.re1, self.im1 - other.im1, self.re2 - other.re2)

    def as_array(self) -> np.ndarray:
        return np.stack([self.re1, self.im1, self.re2])


@dataclass(frozen=True)
class G2Decomp:
    """``chi = i_phi(s) + X ⌟ psi`` with ``X = x_coeff G^{-1} d/dr`` and
    ``s = s_rr G^2 dr^2 + s_6 h^2 g_6``."""

    x_coeff: np.ndarray
    s_rr: np.ndarray
    s_6: np.ndarray
    trace_s: np.ndarray

    @property
    def s_sharp_eigenvalues(self):
        """Eigenvalues of ``s`` raised with the metric: ``s_rr`` once and ``s_6`` six times."""
        return self.s_rr, self.s_6


def phi_form(n: int) -> SymThreeForm:
    return SymThreeForm(np.ones(n), np.zeros(n), np.ones(n))


def g2_decompose(chi: SymThreeForm) -> G2Decomp:
    re1, im1, re2 = chi.re1, chi.im1, chi.re2
    return G2Decomp(
        x_coeff=np.array(im1),
        s_rr=3.0 * re2 - 2.0 * re1,
        s_6=np.array(re1),
        trace_s=3.0 * re2 + 4.0 * re1,
    )


def star_d(chi: SymThreeForm, p: WarpedProfile) -> SymThreeForm:
    """Components of ``*d chi``."""
    grid = p.grid
    ReA = check_field(chi.re1, grid, "Re A")
    ImA = check_field(chi.im1, grid, "Im A")
    B = check_field(chi.re2, grid, "B")
    G, h, lam = p.G, p.h, p.lam
    hp_h = p.h_prime() / h
    tp = p.theta_prime()
    s, c = np.sin(p.theta), np.cos(p.theta)
    re1 = (diff(ImA, grid) + 3.0 * hp_h * ImA + tp * ReA - 3.0 * lam * B * G * s / h) / G
    im1 = (-diff(ReA, grid) - 3.0 * hp_h * ReA + tp * ImA - 3.0 * lam * B * G * c / h) / G
    re2 = -4.0 * lam * (s * ReA + c * ImA) / h
    return SymThreeForm(re1, im1, re2)


def star_d_phi(p: WarpedProfile) -> SymThreeForm:
    """``*d phi``, obtained from :func:`star_d` with ``chi = phi``."""
    return star_d(phi_form(p.grid.n), p)


def d_star(chi: SymThreeForm, p: WarpedProfile):
    """Coefficients of ``d*chi`` and ``*d*chi``.

    ``d*chi = five_form G h^3 dr ^ omega^2`` and
    ``*d*chi = 4 h^{-1} two_form (G^{-1} d/dr) ⌟ phi``.
    """
    grid = p.grid
    ReA = check_field(chi.re1, grid, "Re A")
    ImA = check_field(chi.im1, grid, "Im A")
    B = check_field(chi.re2, grid, "B")
    G, h, lam = p.G, p.h, p.lam
    Bp, hp = diff(B, grid), p.h_prime()
    twist = lam * (np.cos(p.theta) * ReA - np.sin(p.theta) * ImA)
    five = 0.5 * Bp * h / G + 2.0 * hp * B / G + 2.0 * twist
    two = 0.25 * Bp * h / G + hp * B / G + twist
    return five, two


def star_d_psi(p: WarpedProfile) -> np.ndarray:
    """Coefficient ``c`` in ``*d psi = 4 h^{-1} c (G^{-1} d/dr) ⌟ phi``."""
    return d_star(phi_form(p.grid.n), p)[1]


def cos_ratio(t: TorsionABC, everywhere: bool = False) -> np.ndarray:
    """``lam G cos(theta) / h`` expressed through torsion: ``(beta' + beta gamma)/(alpha + beta)``.

    By default the ratio is only required where ``gamma != 0``. Zero
    numerators over vanishing denominators (as for Calabi-Yau backgrounds)
    give zero; otherwise a vanishing ``alpha + beta`` raises.
    """
    a, b, g = np.asarray(t.alpha), np.asarray(t.beta), np.asarray(t.gamma)
    num = diff(b, t.grid) + b * g
    den = a + b
    thr = SINGULAR_RTOL * np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    tiny = np.abs(den) < thr
    active = np.ones_like(tiny) if everywhere else g != 0.0
    bad = tiny & active & (np.abs(num) > thr)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularDenominator(f"alpha + beta vanishes at r = {t.grid.nodes[i]:.6g}")
    out = np.zeros_like(den)
    ok = ~tiny
    out[ok] = num[ok] / den[ok]
    return out


def laplacian_phi_gamma0(alpha, beta, G, grid) -> SymThreeForm:
    """``Delta phi`` for co-closed torsion ``(alpha, beta, 0)``."""
    a, b = np.asarray(alpha), np.asarray(beta)
    return SymThreeForm(
        a * a - 3.0 * b * a + 12.0 * b * b,
        (6.0 * diff(b, grid) - diff(a, grid)) / G,
        -4.0 * b * (a - 3.0 * b),
    )


def laplacian_phi(t: TorsionABC, G) -> SymThreeForm:
    """Components of ``Delta phi`` from torsion and the warp factor ``G``.

    With ``c = lam G cos(theta)/h`` the ``gamma`` corrections are

        Re_1 += 3 G^{-2} (-gamma' + gamma (7c - 3 gamma)) + 3 G^{-3} G' gamma
        Im_1 += -6 G^{-1} alpha gamma
        Re_2 += 4 G^{-2} (-gamma' + gamma (5c - 2 gamma)) + 4 G^{-3} G' gamma

    For ``gamma == 0`` this is exactly :func:`laplacian_phi_gamma0`.
    """
    grid = t.grid
    G = check_field(G, grid, "G")
    base = laplacian_phi_gamma0(t.alpha, t.beta, G, grid)
    g = np.asarray(t.gamma)
    if not np.any(g):
        return base
    c = cos_ratio(t)
    gp = diff(g, grid)
    Gp_G = diff(G, grid) / G
    G2 = G * G
    return SymThreeForm(
        base.re1 + 3.0 * (-gp + g * (7.0 * c - 3.0 * g) + Gp_G * g) / G2,
        base.im1 - 6.0 * t.alpha * g / G,
        base.re2 + 4.0 * (-gp + g * (5.0 * c - 2.0 * g) + Gp_G * g) / G2,
    )


def laplacian_phi_profile(p: WarpedProfile) -> SymThreeForm:
    """``Delta phi = d* d phi + d d* phi`` computed directly from the profile.

    Independent of :func:`laplacian_phi`: it applies :func:`star_d` twice and
    differentiates ``*d psi``, never dividing by ``alpha + beta``.
    """
    grid = p.grid
    dd = star_d(star_d_phi(p), p)
    gam = compute_abc(p).gamma
    G, h, lam = p.G, p.h, p.lam
    # d(*d psi) as an equivariant 3-form
    w = 4.0 * gam * h * h / G
    corr = SymThreeForm(
        -12.0 * lam * gam * np.cos(p.theta) / (h * G),
        12.0 * lam * gam * np.sin(p.theta) / (h * G),
        diff(w, grid) / (G * h * h),
    )
    return dd - corr


def laplacian_g2_decomp(t: TorsionABC, G, tol: float = DEFAULT_TOL) -> G2Decomp:
    """G2-decomposition of ``Delta phi`` for co-closed torsion, in closed form.

    ``X = G^{-1}(6 beta' - alpha') G^{-1} d/dr``,
    ``s = (-2 alpha^2 - 6 alpha beta + 12 beta^2) G^2 dr^2 + (alpha^2 - 3 alpha beta + 12 beta^2) h^2 g_6``.
    """
    if not t.is_co_closed(tol):
        raise NotCoClosed("laplacian_g2_decomp needs gamma == 0")
    grid = t.grid
    G = check_field(G, grid, "G")
    a, b = np.asarray(t.alpha), np.asarray(t.beta)
    s6 = a * a - 3.0 * a * b + 12.0 * b * b
    srr = -2.0 * a * a - 6.0 * a * b + 12.0 * b * b
    return G2Decomp(
        x_coeff=(6.0 * diff(b, grid) - diff(a, grid)) / G,
        s_rr=srr,
        s_6=s6,
        trace_s=srr + 6.0 * s6,
    )

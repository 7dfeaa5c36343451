"""Invariant checks behind ``warpedg2 verify``.

Each check returns ``(measured, tolerance)`` and passes when
``measured <= tolerance``. Checks call library functions through their
modules so that a patched function is what gets verified.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import flow as fl
from . import geometry as geo
from . import laplacian as lap
from . import numerics as nm
from . import soliton as sol
from .errors import StepSizeUnderflow

__all__ = ["CheckResult", "Report", "SUITES", "run_suite"]

Check = Callable[[], Tuple[float, float]]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    status: str
    value: float
    tolerance: float
    elapsed: float
    detail: str = ""


@dataclass
class Report:
    results: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.status == "pass" for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if r.status != "pass"]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(r) for r in self.results]}

    def table(self) -> str:
        w = max([len(f"{r.suite}/{r.name}") for r in self.results] + [5])
        lines = [f"{'check'.ljust(w)}  status  {'value':>12}  {'tolerance':>10}  {'seconds':>8}"]
        for r in self.results:
            lines.append(
                f"{(r.suite + '/' + r.name).ljust(w)}  {r.status:<6}  {r.value:12.3e}  {r.tolerance:10.1e}  {r.elapsed:8.3f}"
                + (f"  {r.detail}" if r.detail else "")
            )
        return "\n".join(lines) + "\n"


def _maxabs(x) -> float:
    return float(np.max(np.abs(x)))


# --------------------------------------------------------------------- numerics


def _diff_sin():
    g = nm.Grid.circle(256)
    return _maxabs(nm.diff(np.sin(g.nodes), g) - np.cos(g.nodes)), 1e-7


def _diff_quartic():
    g = nm.Grid.interval(64, 0.0, 1.0)
    r = g.nodes
    return _maxabs(nm.diff(1 + r - 2 * r**2 + r**3 - 0.5 * r**4, g) - (1 - 4 * r + 3 * r**2 - 2 * r**3)), 1e-10


def _quadrature_cos():
    g = nm.Grid.circle(256)
    return _maxabs(nm.quadrature(np.cos(g.nodes), g, 0.0) - np.sin(g.nodes)), 1e-8


def _diff_quadrature_order():
    errs = []
    for n in (64, 128, 256):
        g = nm.Grid.interval(n, 0.0, 2.0)
        f = np.exp(np.sin(2 * g.nodes))
        errs.append(_maxabs(nm.diff(nm.quadrature(f, g, 0.0), g) - f))
    order = min(math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2]))
    return max(0.0, 3.5 - order), 0.0


def _ode_exp():
    tr = nm.integrate_ode(lambda t, y: y, [1.0], 0.0, 1.0)
    return abs(tr.final[0] - math.e) / math.e, 1e-8


def _ode_blowup():
    try:
        nm.integrate_ode(lambda t, y: y * y, [1.0], 0.0, 2.0)
    except StepSizeUnderflow as exc:
        return (0.0 if exc.t_last < 1.0 else 1.0), 0.0
    return 1.0, 0.0


# --------------------------------------------------------------------- geometry


def _abc_example():
    g = nm.Grid.circle(256)
    r = g.nodes
    p = geo.WarpedProfile(g, np.ones(g.n), np.ones(g.n), r.copy(), geo.SU3Background(1.0), 2 * math.pi)
    t = geo.compute_abc(p)
    return max(_maxabs(t.alpha - 1), _maxabs(t.beta - np.sin(r)), _maxabs(t.gamma - np.cos(r))), 1e-7


def _round_trip():
    g = nm.Grid.interval(512, 0.2, 1.4)
    r = g.nodes
    p = geo.WarpedProfile(g, 1 + 0.1 * r, 1.2 + 0.2 * np.cos(r), r.copy(), geo.SU3Background(1.0))
    q = geo.reconstruct_profile(geo.compute_abc(p), p.background, float(p.h[0]), 0.2)
    err = max(_maxabs((q.G - p.G) / p.G), _maxabs((q.h - p.h) / p.h), _maxabs(q.theta - p.theta))
    return err, 1e-5


def _gauge_fix():
    g = nm.Grid.interval(256, 0.0, 3.0)
    r = g.nodes
    t = geo.TorsionABC(g, np.cos(r), 0.3 * np.sin(2 * r), 0.5 + np.sin(r))
    tt, f = geo.gauge_fix_gamma(t, 1.0)
    back = geo.conformal_transform(t, f)
    return _maxabs(back.gamma), 1e-8


def _conformal_composition():
    g = nm.Grid.circle(256)
    r = g.nodes
    t = geo.TorsionABC(g, np.cos(r), np.sin(r), 0.2 * np.cos(2 * r))
    f1, f2 = 2 + np.sin(r), 1.5 + 0.5 * np.cos(3 * r)
    a = geo.conformal_transform(geo.conformal_transform(t, f1), f2)
    b = geo.conformal_transform(t, f1 * f2)
    return max(_maxabs(a.alpha - b.alpha), _maxabs(a.beta - b.beta), _maxabs(a.gamma - b.gamma)), 1e-10


def _cy_beta_exact():
    g = nm.Grid.circle(64)
    r = g.nodes
    p = geo.WarpedProfile(g, 1 + 0.2 * np.cos(r), 2 + np.sin(r), np.sin(r), geo.SU3Background(0.0))
    return _maxabs(geo.compute_abc(p).beta), 0.0


def _nk_torsion_free():
    g = nm.Grid.interval(64, 0.0, 1.0)
    r = g.nodes
    bad = 0.0
    for theta, sign in ((0.0, -1), (math.pi, 1)):
        p = geo.WarpedProfile(g, np.ones(g.n), 2.0 + sign * r, np.full(g.n, theta), geo.SU3Background(1.0))
        bad += 0.0 if geo.nk_torsion_free_sign(p) == sign else 1.0
    return bad, 0.0


# -------------------------------------------------------------------- laplacian


def _random_cc_torsion(n=256, seed=7):
    rng = np.random.default_rng(seed)
    g = nm.Grid.circle(n)
    r = g.nodes
    c = rng.uniform(-1, 1, 6)
    alpha = 1.5 + c[0] * np.cos(r) + c[1] * np.sin(2 * r)
    beta = 0.4 + c[2] * 0.3 * np.sin(r) + c[3] * 0.2 * np.cos(3 * r)
    G = 1.2 + 0.3 * c[4] * np.cos(r) + 0.1 * c[5] * np.sin(r)
    return geo.TorsionABC(g, alpha, beta, np.zeros(n)), G


def _decomp_consistency():
    t, G = _random_cc_torsion()
    a = lap.laplacian_g2_decomp(t, G)
    b = lap.g2_decompose(lap.laplacian_phi(t, G))
    err = max(_maxabs(a.x_coeff - b.x_coeff), _maxabs(a.s_rr - b.s_rr), _maxabs(a.s_6 - b.s_6), _maxabs(a.trace_s - b.trace_s))
    return err, 1e-12


def _gamma0_exact():
    t, G = _random_cc_torsion()
    a = lap.laplacian_phi(t, G).as_array()
    al, be = t.alpha, t.beta
    ref = np.stack([
        al * al - 3.0 * be * al + 12.0 * be * be,
        (6.0 * nm.diff(be, t.grid) - nm.diff(al, t.grid)) / G,
        -4.0 * be * (al - 3.0 * be),
    ])
    return float(np.max(np.abs(a - ref))), 0.0


def _laplacian_two_routes():
    g = nm.Grid.circle(1024)
    r = g.nodes
    p = geo.WarpedProfile(g, 1.2 + 0.2 * np.cos(r), 2.5 + 0.3 * np.sin(r), 1.0 + 0.4 * np.sin(r), geo.SU3Background(1.0))
    a = lap.laplacian_phi(geo.compute_abc(p), p.G).as_array()
    b = lap.laplacian_phi_profile(p).as_array()
    return float(np.max(np.abs(a - b))), 1e-6


def _harmonic_cc_torsion_free():
    # smallest eigenvalue of the quadratic form alpha^2 - 3 alpha beta + 12 beta^2
    ev = float(np.linalg.eigvalsh(np.array([[1.0, -1.5], [-1.5, 12.0]])).min())
    return max(0.0, -ev), 0.0


def _star_d_phi():
    g = nm.Grid.circle(128)
    r = g.nodes
    p = geo.WarpedProfile(g, 1 + 0.2 * np.sin(r), 2 + 0.3 * np.cos(r), 0.5 * np.sin(r), geo.SU3Background(1.0))
    t = geo.compute_abc(p)
    sd = lap.star_d_phi(p)
    ref = np.stack([t.alpha - 3 * t.beta, -3 * t.gamma / p.G, -4 * t.beta])
    return float(np.max(np.abs(sd.as_array() - ref))), 1e-12


# ------------------------------------------------------------------------- flow


def _k0_k2_sign():
    g = nm.Grid.circle(64)
    r = g.nodes
    p = geo.WarpedProfile(g, 1 + 0.2 * np.cos(r), np.ones(g.n), np.sin(r), geo.SU3Background(0.0))
    s = fl.FlowState(0.0, p)
    G0 = fl.flow_rhs(s, fl.FlowParams(0.0, 0.0))[0] / p.G
    G2 = fl.flow_rhs(s, fl.FlowParams(2.0, 0.0))[0] / p.G
    return _maxabs(G0 + G2), 0.0


def _separable_tracking():
    p = fl.separable_cy_profile(1.0, 1.0, 32)
    T = fl.blow_up_time(1.0, 1.0)
    t_end = 0.9 * T  # G_t^2 = 0.1
    res = fl.evolve(fl.FlowState(0.0, p), fl.FlowParams(2.0, 0.0), t_end, t_eval=np.linspace(0, t_end, 10))
    err = 0.0
    for s in res.states:
        G, _, alpha = fl.separable_cy(1.0, 1.0, s.t, s.profile.r)
        a = geo.compute_abc(s.profile).alpha
        err = max(err, _maxabs((s.profile.G - G) / G), _maxabs((a - alpha) / alpha))
    return err, 1e-4


def _nk_initial(n, e1, e2, d1, d2):
    g = nm.Grid.circle(n)
    r = g.nodes
    theta = math.pi / 2 + e1 * np.sin(r) + e2 * np.sin(2 * r)
    G = 1 + d1 * np.cos(r) + d2 * np.cos(2 * r)
    h = 2.0 - nm.quadrature(G * np.cos(theta), g, 0.0)
    return geo.WarpedProfile(g, G, h, theta, geo.SU3Background(1.0))


def _commuting_diagram():
    p = _nk_initial(128, 0.1, -0.05, 0.1, 0.05)
    params = fl.FlowParams(2.0, 0.5)
    te = np.linspace(0, 0.02, 3)
    res = fl.evolve(fl.FlowState(0.0, p), params, 0.02, t_eval=te)
    tr = fl.evolve_abc(geo.compute_abc(p), p.G, params, 0.02, t_eval=te)
    n = p.grid.n
    err = 0.0
    for s, y in zip(res.states, tr.y):
        t = geo.compute_abc(s.profile)
        err = max(err, _maxabs(t.alpha - y[:n]), _maxabs(t.beta - y[n : 2 * n]))
    return err, 1e-5


def _co_closed_preserved():
    p = _nk_initial(128, 0.1, -0.05, 0.1, 0.05)
    res = fl.evolve(fl.FlowState(0.0, p), fl.FlowParams(2.0, 0.5), 0.02, t_eval=[0.02])
    return _maxabs(geo.compute_abc(res.final.profile).gamma), 1e-5


# ------------------------------------------------------------------ cy-soliton


def _first_integral():
    worst = 0.0
    for C, a0 in ((0.5, 2.0), (0.0, 1.0), (0.3, 2.1)):
        tr = sol.solve_soliton_bvp(sol.SolitonState(a0, 0.0, 0.0), sol.SolitonParams(C, 0.0), 0.0, (0.0, 10.0))
        worst = max(worst, float(np.max(np.abs(sol.first_integral_R2(sol.SolitonState(tr.alpha, 0.0, tr.l), C) - (a0 - 2 * C) ** 2))))
    f = sol.CYFamily("trig", 1.0, 0.5, sign=-1)
    tr = sol.solve_soliton_bvp(sol.SolitonState(f.alpha0, 0.0, 0.0), sol.SolitonParams(1.0, 0.0), 0.0, (0.0, 3 * f.period))
    worst = max(worst, float(np.max(np.abs(sol.first_integral_R2(sol.SolitonState(tr.alpha, 0.0, tr.l), 1.0) - 0.25))))
    return worst, 1e-8


def _closed_form_residuals():
    worst = 0.0
    r = np.linspace(-5, 5, 1000)
    fams = [
        sol.CYFamily("parabolic", 0.5, 1.0),
        sol.CYFamily("hyperbolic", 0.3, 1.5, sign=1),
        sol.CYFamily("hyperbolic", 0.3, 1.5, sign=-1),
        sol.CYFamily("trig", 1.0, 0.5, sign=1),
        sol.CYFamily("trig", 1.0, 0.5, sign=-1),
    ]
    for f in fams:
        def fn(x, f=f):
            a, l = sol._alpha_l(f, x)
            return a, 0 * x, l
        S = sol.SolitonSample.from_function(fn, r)
        worst = max(worst, sol.residual(S, sol.SolitonParams(f.C, 0.0), 0.0))
    return worst, 1e-10


def _periodicity():
    good = sol.cy_periodicity(1.25, 1.5)
    bad = sol.cy_periodicity(1.0, math.sqrt(2.0))
    return (0.0 if good.periodic and not bad.periodic else 1.0), 0.0


def _kmt():
    r = np.linspace(-5, 5, 1001)
    f = sol.kmt_family(-1.0, -0.5)
    _, l, th = sol.cy_closed_form(f, r)
    l2, th2 = sol.kmt_reduction(-1.0, -0.5, r)
    return max(_maxabs(l - l2), _maxabs(th - th2)), 1e-12


def _hyperbolic_limits():
    worst = 0.0
    for C in (0.0, 0.5, 1.0, 2.0):
        R = math.sqrt(1 + 4 * C * C)
        f = sol.CYFamily("hyperbolic", C, R)
        a, l, _ = sol.cy_closed_form(f, np.array([20.0, -20.0]))
        worst = max(worst, abs(l[0] + 1), abs(l[1] - 1), float(np.max(np.abs(a))))
    return worst, 1e-3


# ------------------------------------------------------------------ nk-soliton


def _catalog_sweep():
    worst = 0.0
    for C in np.linspace(-2, 2, 9):
        for mu in np.linspace(-1, 1, 9):
            for e in sol.nk_constant_catalog(C, mu):
                worst = max(worst, sol.residual(e.sample(np.linspace(-1, 1, 5)), sol.SolitonParams(C, mu), 1.0))
    return worst, 1e-12


def _special_values():
    worst = 0.0
    C = -1.3
    mu = 12 * C * C / 169
    ab = [e for e in sol.nk_constant_catalog(C, mu) if e.id == 5]
    worst = max(worst, min(abs(e.alpha + e.beta) for e in ab))
    for C in (1.0, -0.7):
        mu = C * C / 3
        worst = max(worst, min(abs(e.alpha - 6 * e.beta) for e in sol.nk_constant_catalog(C, mu) if e.id == 5))
    return worst, 1e-12


def _conserved_F():
    a, C, mu = 0.7, 0.2, 0.1
    tr = nm.integrate_ode(sol.constant_alpha_rhs(a, C, mu), [0.3, 0.5], 0.0, 2.0)
    F = [sol.nk_conserved_F(sol.SolitonState(a, b, l), C, mu) for b, l in tr.y]
    return float(np.max(np.abs(np.array(F) - F[0]))), 1e-8


def _completeness():
    C, mu = 1.0, 0.05
    found = sol.grid_search_l0_zeros(C, mu, resolution=2e-3)
    cat = sol.catalog_points_at_l0(C, mu)
    worst = 0.0
    for x in found:
        worst = max(worst, min(abs(x[0] - c[0]) + abs(x[1] - c[1]) for c in cat))
    return worst, 1e-6


SUITES: Dict[str, Dict[str, Check]] = {
    "numerics": {
        "diff_sin_circle": _diff_sin,
        "diff_quartic_interval": _diff_quartic,
        "quadrature_cos": _quadrature_cos,
        "diff_quadrature_order": _diff_quadrature_order,
        "ode_exponential": _ode_exp,
        "ode_blowup_underflow": _ode_blowup,
    },
    "geometry": {
        "abc_example": _abc_example,
        "reconstruction_round_trip": _round_trip,
        "gauge_fix_gamma": _gauge_fix,
        "conformal_composition": _conformal_composition,
        "calabi_yau_beta_exact": _cy_beta_exact,
        "nk_torsion_free_sign": _nk_torsion_free,
    },
    "laplacian": {
        "decomposition_consistency": _decomp_consistency,
        "gamma0_specialisation": _gamma0_exact,
        "two_routes_agree": _laplacian_two_routes,
        "harmonic_coclosed_form_definite": _harmonic_cc_torsion_free,
        "star_d_phi": _star_d_phi,
    },
    "flow": {
        "k0_k2_sign_relation": _k0_k2_sign,
        "separable_tracking": _separable_tracking,
        "commuting_diagram": _commuting_diagram,
        "co_closed_preserved": _co_closed_preserved,
    },
    "cy-soliton": {
        "first_integral_drift": _first_integral,
        "closed_form_residuals": _closed_form_residuals,
        "periodicity": _periodicity,
        "c0_reduction": _kmt,
        "hyperbolic_limits": _hyperbolic_limits,
    },
    "nk-soliton": {
        "catalog_residuals": _catalog_sweep,
        "special_values": _special_values,
        "conserved_F": _conserved_F,
        "l0_completeness": _completeness,
    },
}


def run_suite(name: str) -> Report:
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(name)
    results = []
    for suite in names:
        for check_name, fn in SUITES[suite].items():
            t0 = time.perf_counter()
            try:
                value, tol = fn()
                status = "pass" if value <= tol else "fail"
                detail = ""
            except Exception as exc:  # a crashing check is a failed check
                value, tol, status, detail = math.inf, 0.0, "fail", f"{type(exc).__name__}: {exc}"
            results.append(CheckResult(suite, check_name, status, float(value), float(tol), time.perf_counter() - t0, detail))
    return Report(results)

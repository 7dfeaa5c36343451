"""Acceptance suite: fifteen end-to-end criteria at their stated tolerances.

Each criterion returns ``(passed, detail)`` and prints one ``PASS`` or
``FAIL`` line. Run standalone with ``python3 tests/test_acceptance.py``.
"""

import math
import pathlib
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from conftest import co_closed_nk_profile, random_profile, random_smooth  # noqa: E402
from warpedg2 import cli  # noqa: E402
from warpedg2.flow import (  # noqa: E402
    FlowParams,
    FlowState,
    blow_up_time,
    evolve,
    evolve_abc,
    flow_rhs,
    separable_cy,
    separable_cy_profile,
)
from warpedg2.geometry import (  # noqa: E402
    SU3Background,
    TorsionABC,
    WarpedProfile,
    compute_abc,
    conformal_transform,
    full_torsion,
    gauge_fix_gamma,
    reconstruct_profile,
    torsion_components,
)
from warpedg2.laplacian import g2_decompose, laplacian_g2_decomp, laplacian_phi  # noqa: E402
from warpedg2.numerics import Grid, diff, quadrature  # noqa: E402
from warpedg2.soliton import (  # noqa: E402
    CYFamily,
    SolitonParams,
    SolitonSample,
    SolitonState,
    _alpha_l,
    catalog_points_at_l0,
    cy_closed_form,
    cy_periodicity,
    grid_search_l0_zeros,
    kmt_family,
    kmt_reduction,
    nk_constant_catalog,
    residual,
    solve_soliton_bvp,
    torsion_free_line,
)

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"


def maxabs(x):
    return float(np.max(np.abs(x)))


def family_for(C, R, sign=1):
    d = R * R - 4 * C * C
    kind = "parabolic" if abs(d) <= 1e-12 * max(1.0, R * R) else ("hyperbolic" if d > 0 else "trig")
    return CYFamily(kind, C, R, sign=sign)


# ---------------------------------------------------------------------------


def torsion_formulas():
    rng = np.random.default_rng(101)
    mismatches, trace_err, tau14 = 0, 0.0, 0.0
    for i in range(100):
        if i % 2 == 0:
            p = random_profile(rng, 256, lam=float(rng.choice([-1.0, 1.0, 0.5])))
        else:
            # constant h on a Calabi-Yau background: gamma vanishes identically
            g = Grid.circle(256)
            r = g.nodes
            p = WarpedProfile(g, 1.2 + 0.3 * np.tanh(random_smooth(rng, r)), np.full(256, rng.uniform(0.5, 3)),
                              r + random_smooth(rng, r), SU3Background(0.0), 2 * math.pi)
        t = compute_abc(p)
        T = full_torsion(t, p.G)
        mismatches += T.is_symmetric() != (maxabs(t.gamma) <= 1e-9)
        trace_err = max(trace_err, maxabs(T.trace - (t.alpha - 6 * t.beta)))
        trace_err = max(trace_err, maxabs(torsion_components(t).trace_T - (t.alpha - 6 * t.beta)))
        tau14 = max(tau14, maxabs(torsion_components(t).tau14))
    ok = mismatches == 0 and trace_err == 0.0 and tau14 == 0.0
    return ok, f"symmetry mismatches={mismatches}, trace error={trace_err:.1e}, max|tau14|={tau14:.1e}"


def gauge_fixing():
    rng = np.random.default_rng(102)
    # gamma~ is recomputed by finite differences; truncation is 1e-7 at n=512, 4e-10 here
    g = Grid.interval(2048, 0.0, 2 * math.pi)
    r = g.nodes
    worst = 0.0
    for _ in range(100):
        t = TorsionABC(g, random_smooth(rng, r), random_smooth(rng, r), random_smooth(rng, r))
        fixed, f = gauge_fix_gamma(t, float(rng.uniform(0, 2 * math.pi)))
        worst = max(worst, maxabs(conformal_transform(t, f).gamma), maxabs(fixed.gamma))
    return worst <= 1e-8, f"max|gamma~|={worst:.2e} (tol 1e-8)"


def reconstruction():
    rng = np.random.default_rng(103)
    g = Grid.interval(512, 0.0, 1.0)
    r = g.nodes
    worst = 0.0
    for _ in range(20):
        # co-closed nearly Kaehler data with sin, cos, theta', beta' all of one sign
        c = rng.uniform(0.2, 0.5)
        theta = 0.3 + c * r + 0.05 * np.sin(rng.uniform(1, 3) * r)
        G = 1 + 0.2 * np.tanh(random_smooth(rng, r, scale=0.5))
        h = rng.uniform(2, 3) - quadrature(G * np.cos(theta), g, 0.0)
        p = WarpedProfile(g, G, h, theta, SU3Background(1.0))
        q = reconstruct_profile(compute_abc(p), p.background, float(h[0]), 0.0)
        worst = max(worst, maxabs((q.G - G) / G), maxabs((q.h - h) / h), maxabs((q.theta - theta) / theta))
    return worst <= 1e-5, f"max relative error={worst:.2e} (tol 1e-5)"


def laplacian_consistency():
    rng = np.random.default_rng(104)
    g = Grid.circle(256)
    r = g.nodes
    decomp, exact = 0.0, 0.0
    for _ in range(20):
        a, b = random_smooth(rng, r), random_smooth(rng, r)
        G = 1 + 0.3 * np.tanh(random_smooth(rng, r))
        t = TorsionABC(g, a, b, np.zeros(g.n))
        x, y = laplacian_g2_decomp(t, G), g2_decompose(laplacian_phi(t, G))
        for u, v in ((x.x_coeff, y.x_coeff), (x.s_rr, y.s_rr), (x.s_6, y.s_6), (x.trace_s, y.trace_s)):
            decomp = max(decomp, maxabs(u - v))
        ref = np.stack([a * a - 3.0 * b * a + 12.0 * b * b, (6.0 * diff(b, g) - diff(a, g)) / G, -4.0 * b * (a - 3.0 * b)])
        exact = max(exact, maxabs(laplacian_phi(t, G).as_array() - ref))
    return decomp <= 1e-12 and exact == 0.0, f"decomposition gap={decomp:.1e} (tol 1e-12), gamma=0 gap={exact:.1e} (exact)"


def harmonic_forces_torsion_free():
    ev = np.linalg.eigvalsh(np.array([[1.0, -1.5], [-1.5, 12.0]]))
    rng = np.random.default_rng(105)
    n = 10_000
    direction = rng.normal(size=(n, 2))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    # radii from 1e-5 up: below that the quadratic components are under 1e-12 by scale alone
    pts = direction * np.logspace(-5, 2, n)[:, None]
    lap = laplacian_phi(TorsionABC(Grid.circle(n), pts[:, 0], pts[:, 1], np.zeros(n)), np.ones(n))
    both_small = int(np.sum((np.abs(lap.re1) < 1e-12) & (np.abs(lap.re2) < 1e-12)))
    ok = bool(np.all(ev > 0)) and both_small == 0
    return ok, f"eigenvalues={ev.round(4).tolist()}, sampled zeros={both_small}"


def commuting_diagram():
    rng = np.random.default_rng(106)
    params = FlowParams(2.0, 0.0)
    te = np.linspace(0, 0.05, 6)
    worst, min_sum = 0.0, np.inf
    for _ in range(10):
        p = co_closed_nk_profile(rng, 256)
        t0 = compute_abc(p)
        min_sum = min(min_sum, float(np.min(np.abs(t0.alpha + t0.beta))))
        res = evolve(FlowState(0.0, p), params, 0.05, t_eval=te)
        tr = evolve_abc(t0, p.G, params, 0.05, t_eval=te)
        for s, y in zip(res.states, tr.y):
            t = compute_abc(s.profile)
            worst = max(worst, maxabs(t.alpha - y[:256]), maxabs(t.beta - y[256:512]))
    return worst <= 1e-5, f"max gap={worst:.2e} (tol 1e-5), min|alpha+beta|={min_sum:.2f}"


def sign_relation():
    rng = np.random.default_rng(107)
    g = Grid.circle(128)
    r = g.nodes
    bad = 0
    for _ in range(10):
        p = WarpedProfile(g, 1 + 0.3 * np.tanh(random_smooth(rng, r)), np.full(128, 1.7),
                          r + random_smooth(rng, r), SU3Background(0.0), 2 * math.pi)
        s = FlowState(0.0, p)
        G0, th0, h0 = flow_rhs(s, FlowParams(0.0, 0.0))
        G2, th2, h2 = flow_rhs(s, FlowParams(2.0, 0.0))
        bad += not (np.array_equal(G0, -G2) and np.array_equal(th0, -th2) and np.all(h0 == 0) and np.all(h2 == 0))
    return bad == 0, f"profiles violating the exact identity: {bad} of 10"


def separable_blow_up():
    lines, ok = [], True
    for lam1, th in ((1.0, 1.0), (1.0, 2.0), (2.0, 1.0)):
        T = blow_up_time(lam1, th)
        p = separable_cy_profile(lam1, th, 32)
        t_end = 0.9 * T  # G_t^2 = 0.1
        te = np.linspace(0, t_end, 20)
        res = evolve(FlowState(0.0, p), FlowParams(), t_end, t_eval=te)
        track = 0.0
        for s in res.states:
            G, _, alpha = separable_cy(lam1, th, s.t, s.profile.r)
            track = max(track, maxabs(s.profile.G / G - 1), maxabs(compute_abc(s.profile).alpha / alpha - 1))
        ts = np.array([s.t for s in res.states])
        G2 = np.array([np.mean(s.profile.G) ** 2 for s in res.states])
        slope, icpt = np.polyfit(ts, G2, 1)
        t_extrap = -icpt / slope
        rel = abs(t_extrap / T - 1)
        ok &= track <= 1e-4 and rel <= 0.01
        lines.append(f"({lam1:g},{th:g}) tracking={track:.1e} T_extrap/T-1={rel:.1e}")
    return ok, "; ".join(lines)


def cy_closed_forms():
    res_worst = 0.0
    pairs = [(0.5, 1.0), (-0.75, 1.5), (1.0, 2.0), (0.0, 1.0), (0.3, 1.5), (-0.4, 1.0), (0.2, 2.5), (-1.0, 2.5),
             (1.0, 0.5), (1.0, 1.5), (-1.25, 1.5), (2.0, 1.0), (0.8, 0.0), (-0.6, 0.9), (1.5, 2.9), (-2.0, 3.5),
             (0.25, 0.5), (0.1, 1.2), (1.2, 2.0), (-1.5, 1.0)]
    kinds = set()
    r = np.linspace(0, 5, 51)
    fam_worst = 0.0
    for C, R in pairs:
        for sign in (1, -1):
            f = family_for(C, R, sign)
            kinds.add(f.kind.value)
            if f.kind.value == "parabolic" and sign == -1:
                continue
            x = np.linspace(-5, 5, 1000)
            S = SolitonSample.from_function(lambda z, f=f: (*_alpha_l(f, z)[:1], 0 * z, _alpha_l(f, z)[1]), x)
            res_worst = max(res_worst, residual(S, SolitonParams(C, 0.0), 0.0))
            tr = solve_soliton_bvp(SolitonState(f.alpha0, 0.0, 0.0), SolitonParams(C, 0.0), 0.0, (0, 5), r_eval=r)
            a, l, _ = cy_closed_form(f, r)
            fam_worst = max(fam_worst, maxabs(tr.alpha - a), maxabs(tr.l - l))
    ok = res_worst <= 1e-10 and fam_worst <= 1e-6 and kinds == {"parabolic", "hyperbolic", "trig"}
    return ok, f"max residual={res_worst:.1e} (tol 1e-10), max integration gap={fam_worst:.1e} (tol 1e-6), cases={sorted(kinds)}"


def first_integral():
    worst = 0.0
    for f in (CYFamily("parabolic", 0.5, 1.0), CYFamily("hyperbolic", 0.0, 1.0), CYFamily("hyperbolic", 0.3, 1.5, sign=-1),
              CYFamily("hyperbolic", -0.5, 2.0)):
        tr = solve_soliton_bvp(SolitonState(f.alpha0, 0.0, 0.0), SolitonParams(f.C), 0.0, (0, 10))
        worst = max(worst, tr.R2_drift)
    for f in (CYFamily("trig", 1.0, 0.5, sign=-1), CYFamily("trig", 1.25, 1.5), CYFamily("trig", -1.0, 1.9, sign=-1)):
        tr = solve_soliton_bvp(SolitonState(f.alpha0, 0.0, 0.0), SolitonParams(f.C), 0.0, (0, 3 * f.period))
        worst = max(worst, tr.R2_drift)
    return worst <= 1e-8, f"max R^2 drift={worst:.1e} (tol 1e-8)"


def compact_solitons():
    r = np.linspace(0, 2 * math.pi, 257)
    f = CYFamily("trig", 1.25, 1.5, theta0=0.4)
    a0, l0, th0 = cy_closed_form(f, r)
    a1, l1, th1 = cy_closed_form(f, r + 2 * math.pi)
    q2 = max(maxabs(a1 - a0), maxabs(l1 - l0), maxabs(np.exp(1j * th1) - np.exp(1j * th0)))
    g = CYFamily("trig", 1.0, math.sqrt(2.0))
    _, _, u0 = cy_closed_form(g, r)
    _, _, u1 = cy_closed_form(g, r + 2 * math.pi)
    irrational = maxabs(np.exp(1j * u1) - np.exp(1j * u0))
    rep_ok, rep_bad = cy_periodicity(1.25, 1.5), cy_periodicity(1.0, math.sqrt(2.0))
    ok = q2 <= 1e-10 and rep_ok.periodic and irrational > 1e-10 and not rep_bad.periodic
    return ok, (f"Q=2 mismatch={q2:.1e} (tol 1e-10); Q^2=2 e^(i theta) mismatch={irrational:.2f}, "
                "so that periodicity check fails as expected")


def kmt_recovery():
    r = np.linspace(-5, 5, 2001)
    worst = 0.0
    for b, c in ((-1.0, -0.5), (-1.0, 0.5), (-2.0, 3.0), (-0.5, -0.1), (-3.0, 0.2)):
        _, l, th = cy_closed_form(kmt_family(b, c), r)
        l2, th2 = kmt_reduction(b, c, r)
        worst = max(worst, maxabs(l - l2), maxabs(th - th2))
    return worst <= 1e-12, f"max gap={worst:.1e} (tol 1e-12)"


def nk_catalog():
    worst = 0.0
    r = np.linspace(-1, 1, 5)
    params = [(C, mu) for C in np.linspace(-2, 2, 9) for mu in np.linspace(-1, 1, 9)]
    params += [(C, 12 * C * C / 169) for C in (-0.5, -1.0, -2.0)] + [(C, C * C / 3) for C in (-1.0, 0.5, 2.0)]
    ids = set()
    for C, mu in params:
        for e in nk_constant_catalog(C, mu):
            ids.add(e.id)
            for l0 in (None, 0.7, -1.3):
                worst = max(worst, residual(e.sample(r, l0 if e.l_arbitrary else None), SolitonParams(C, mu), 1.0))
        g = Grid.interval(16, 0.0, 2.0)
        a, b, l, _, _ = torsion_free_line(mu, 1.5, 3.0)(g.nodes)
        worst = max(worst, residual(SolitonSample.from_grid(a, b, l, g), SolitonParams(C, mu), 1.0))
    strays = 0
    for C, mu in ((1.0, 0.05), (10.0, 0.0), (0.0, 3.0), (-1.0, 0.2), (2.0, 1.0 / 3.0)):
        cat = catalog_points_at_l0(C, mu)
        for x in grid_search_l0_zeros(C, mu, resolution=1e-3):
            if all(abs(x[0] - c[0]) + abs(x[1] - c[1]) > 1e-6 for c in cat):
                strays += 1
    ok = worst <= 1e-12 and ids == {1, 2, 3, 4, 5} and strays == 0
    return ok, f"max residual={worst:.1e} (tol 1e-12), families seen={sorted(ids)}, non-catalog zeros={strays}"


def hyperbolic_asymptotics():
    worst = 0.0
    for C in (0.0, 0.5, 1.0, -1.5):
        for sign in (1, -1):
            f = CYFamily("hyperbolic", C, math.sqrt(1 + 4 * C * C), sign=sign)
            a, l, _ = cy_closed_form(f, np.array([20.0, -20.0]))
            worst = max(worst, abs(l[0] + f.Q), abs(l[1] - f.Q), maxabs(a))
    return worst <= 1e-3, f"max deviation from limits={worst:.1e} (tol 1e-3)"


def cli_determinism(tmp):
    runs = [
        ["torsion", "--config", str(CONFIGS / "torsion_nk.json")],
        ["flow", "--config", str(CONFIGS / "flow_separable.json")],
        ["flow", "--config", str(CONFIGS / "flow_blowup.json")],
        ["soliton", "--config", str(CONFIGS / "soliton_parabolic.json"), "--format", "svg"],
        ["soliton", "--config", str(CONFIGS / "soliton_catalog.json"), "--format", "json"],
        ["sweep", "--config", str(CONFIGS / "sweep.json"), "--workers", "2"],
    ]
    differ = 0
    for i, argv in enumerate(runs):
        outs = []
        for rep in range(2):
            d = tmp / f"{i}-{rep}"
            if cli.main(argv + ["--out", str(d)]) != 0:
                return False, f"{argv[0]} failed"
            outs.append({p.relative_to(d): p.read_bytes() for p in d.rglob("*") if p.is_file()})
        differ += outs[0] != outs[1]
    code = cli.main(["verify", "--suite", "all", "--out", str(tmp / "verify")])
    return differ == 0 and code == 0, f"runs with differing bytes={differ} of {len(runs)}, verify exit={code}"


CRITERIA = [
    (1, "torsion formulas", torsion_formulas),
    (2, "conformal gauge fixing", gauge_fixing),
    (3, "reconstruction round trip", reconstruction),
    (4, "Laplacian consistency", laplacian_consistency),
    (5, "harmonic co-closed is torsion-free", harmonic_forces_torsion_free),
    (6, "flow commuting diagram", commuting_diagram),
    (7, "k=0/k=2 sign relation", sign_relation),
    (8, "separable blow-up", separable_blow_up),
    (9, "CY soliton closed forms", cy_closed_forms),
    (10, "first integral", first_integral),
    (11, "compact solitons", compact_solitons),
    (12, "explicit C=0 reduction", kmt_recovery),
    (13, "NK catalog", nk_catalog),
    (14, "hyperbolic asymptotics", hyperbolic_asymptotics),
    (15, "CLI determinism", cli_determinism),
]


def run_criterion(fn, tmp):
    t0 = time.perf_counter()
    try:
        ok, detail = fn(tmp) if fn is cli_determinism else fn()
    except Exception as exc:  # a crash counts as a failure with its reason
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return bool(ok), detail, time.perf_counter() - t0


@pytest.mark.parametrize("num, name, fn", CRITERIA, ids=[f"{n:02d}-{s.replace(' ', '_')}" for n, s, _ in CRITERIA])
def test_criterion(num, name, fn, tmp_path, capsys):
    ok, detail, elapsed = run_criterion(fn, tmp_path)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} #{num:02d} {name}: {detail} [{elapsed:.1f}s]")
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    failed = 0
    with tempfile.TemporaryDirectory() as d:
        for num, name, fn in CRITERIA:
            ok, detail, elapsed = run_criterion(fn, pathlib.Path(d))
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'} #{num:02d} {name}: {detail} [{elapsed:.1f}s]", flush=True)
    sys.exit(1 if failed else 0)

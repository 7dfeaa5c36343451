"""Modified Laplacian coflow of co-closed warped G2-structures.

The flow ``d psi/dt = Delta psi + k d((C - Tr T) phi)`` preserves the warped
ansatz and reduces to a parabolic system for ``(G, h, theta)`` in ``(t, r)``.
:func:`evolve` integrates it by the method of lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import BeyondBlowUp, NotCoClosed, SingularDenominator, StepSizeUnderflow
from .geometry import SU3Background, TorsionABC, WarpedProfile, compute_abc
from .laplacian import SINGULAR_RTOL
from .numerics import Grid, StepControl, check_field, diff, integrate_ode

__all__ = [
    "FlowParams",
    "FlowState",
    "PsiDot",
    "BlowUp",
    "StepDiagnostics",
    "FlowResult",
    "psi_dot_from_rates",
    "abc_dot_from_rates",
    "flow_rhs",
    "abc_flow_rhs",
    "evolve",
    "evolve_abc",
    "separable_cy",
    "separable_cy_profile",
    "blow_up_time",
]

CO_CLOSED_TOL = 1e-6


@dataclass(frozen=True)
class FlowParams:
    k: float = 2.0
    C: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.k) and np.isfinite(self.C)):
            raise ValueError("flow parameters must be finite")

    @property
    def well_posed(self) -> bool:
        """``k > 1`` is the weakly parabolic regime."""
        return self.k > 1


@dataclass(frozen=True)
class FlowState:
    t: float
    profile: WarpedProfile


@dataclass(frozen=True)
class PsiDot:
    re1: np.ndarray
    im1: np.ndarray
    re2: np.ndarray


@dataclass(frozen=True)
class BlowUp:
    t_last: float
    reason: str = ""


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    alpha_max: float
    beta_max: float
    gamma_max: float
    min_abs_alpha_plus_beta: float


@dataclass
class FlowResult:
    states: List[FlowState]
    diagnostics: List[StepDiagnostics] = field(default_factory=list)
    blow_up: Optional[BlowUp] = None
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    @property
    def alpha_beta_crossings(self) -> List[float]:
        """Times at which ``alpha + beta`` changed sign somewhere on the grid (reported only)."""
        out = []
        for d in self.diagnostics:
            if d.min_abs_alpha_plus_beta <= SINGULAR_RTOL:
                out.append(d.t)
        return out


def _ratio(num: np.ndarray, den: np.ndarray, grid: Grid, scale: np.ndarray) -> np.ndarray:
    thr = SINGULAR_RTOL * np.maximum(scale, 1.0)
    tiny = np.abs(den) < thr
    if np.any(tiny & (np.abs(num) > thr)):
        i = int(np.argmax(tiny & (np.abs(num) > thr)))
        raise SingularDenominator(f"alpha + beta vanishes at r = {grid.nodes[i]:.6g}")
    out = np.zeros_like(den)
    out[~tiny] = num[~tiny] / den[~tiny]
    return out


def psi_dot_from_rates(Gdot, hdot, thetadot, p: WarpedProfile) -> PsiDot:
    grid = p.grid
    Gdot = check_field(Gdot, grid, "Gdot")
    hdot = check_field(hdot, grid, "hdot")
    thetadot = check_field(thetadot, grid, "thetadot")
    hh = hdot / p.h
    return PsiDot(Gdot / p.G + 3.0 * hh, np.array(thetadot), 4.0 * hh)


def abc_dot_from_rates(Gdot, hdot, thetadot, t: TorsionABC, p: WarpedProfile):
    """Time derivatives of ``(alpha, beta, gamma)`` induced by given rates of ``(G, h, theta)``."""
    grid = p.grid
    Gdot = check_field(Gdot, grid, "Gdot")
    hdot = check_field(hdot, grid, "hdot")
    thetadot = check_field(thetadot, grid, "thetadot")
    a, b, g = np.asarray(t.alpha), np.asarray(t.beta), np.asarray(t.gamma)
    G = p.G
    GG, hh = Gdot / G, hdot / p.h
    c = _ratio(b * g + diff(b, grid), a + b, grid, np.maximum(np.abs(a), np.abs(b)))
    alphadot = diff(thetadot, grid) / G - a * GG
    betadot = thetadot * c / G - hh * b
    gammadot = diff(hh, grid) + (GG - hh) * c - thetadot * G * b
    return alphadot, betadot, gammadot


def _log_rates(alpha, beta, params: FlowParams):
    k, C = params.k, params.C
    gg = (1 - k) * alpha**2 + 3 * beta**2 + 6 * k * alpha * beta + k * C * alpha
    hh = 3 * (1 - 2 * k) * beta**2 + (k - 1) * alpha * beta - k * C * beta
    return gg, hh


def _profile_rates(G, h, theta, lam, grid, winding, params: FlowParams):
    tp = diff(theta, grid, winding)
    alpha = tp / G
    beta = lam * np.sin(theta) / h if lam != 0.0 else np.zeros_like(G)
    gg, hh = _log_rates(alpha, beta, params)
    thetadot = (params.k - 1) * diff(alpha - 6 * beta, grid) / G
    return G * gg, thetadot, h * hh, alpha, beta


def flow_rhs(state: FlowState, params: FlowParams, tol: float = CO_CLOSED_TOL):
    """Rates ``(Gdot, thetadot, hdot)`` of the modified coflow at a co-closed state."""
    p = state.profile
    t = compute_abc(p)
    if not t.is_co_closed(tol):
        raise NotCoClosed(f"gamma reaches {np.max(np.abs(t.gamma)):.3e}; the flow needs gamma == 0")
    Gdot, thetadot, hdot, _, _ = _profile_rates(
        p.G, p.h, p.theta, p.lam, p.grid, p.theta_winding, params
    )
    return Gdot, thetadot, hdot


def abc_flow_rhs(t: TorsionABC, G, params: FlowParams):
    """``(alphadot, betadot)`` of the coflow written in torsion variables."""
    grid = t.grid
    G = check_field(G, grid, "G")
    a, b = np.asarray(t.alpha), np.asarray(t.beta)
    k, C = params.k, params.C
    tr = a - 6 * b
    trp = diff(tr, grid)
    trpp = diff(trp, grid)
    Gp = diff(G, grid)
    ratio = _ratio(diff(b, grid), a + b, grid, np.maximum(np.abs(a), np.abs(b)))
    alphadot = (
        (k - 1) * (trpp - Gp / G * trp) / G**2
        + (k - 1) * a**3
        - 6 * k * b * a**2
        - 3 * b**2 * a
        - k * C * a**2
    )
    betadot = (
        (k - 1) * trp * ratio / G**2
        + (1 - k) * b**2 * a
        + 3 * (2 * k - 1) * b**3
        + k * C * b**2
    )
    return alphadot, betadot


def evolve(
    state: FlowState,
    params: FlowParams,
    t_end: float,
    ctl: StepControl = StepControl(),
    snapshot_stride: int = 1,
    t_eval: Optional[Sequence[float]] = None,
    tol: float = CO_CLOSED_TOL,
) -> FlowResult:
    """Method-of-lines integration of ``(G, h, theta)`` from ``state.t`` to ``t_end``.

    Snapshots are kept every ``snapshot_stride`` accepted steps (the final
    step is always kept), or at the times ``t_eval`` if given. A step-size
    collapse ends the run early and is reported as ``blow_up``; other
    integrator failures propagate.
    """
    p0 = state.profile
    t0 = compute_abc(p0)
    if not t0.is_co_closed(tol):
        raise NotCoClosed("initial data must be co-closed")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be positive")
    grid, lam, winding, n = p0.grid, p0.lam, p0.theta_winding, p0.grid.n

    def rhs(_t, y):
        G, h, theta = y[:n], y[n : 2 * n], y[2 * n :]
        if np.any(G <= 0) or not (np.all(h > 0) or np.all(h < 0)):
            return np.full_like(y, np.nan)
        Gdot, thetadot, hdot, _, _ = _profile_rates(G, h, theta, lam, grid, winding, params)
        return np.concatenate([Gdot, hdot, thetadot])

    def make_state(t, y) -> FlowState:
        return FlowState(
            float(t),
            WarpedProfile(grid, y[:n], y[n : 2 * n], y[2 * n :], p0.background, winding),
        )

    result = FlowResult(states=[state])
    counter = {"i": 0}
    last = {"t": state.t}

    def on_step(t, y):
        G, h, theta = y[:n], y[n : 2 * n], y[2 * n :]
        alpha = diff(theta, grid, winding) / G
        beta = lam * np.sin(theta) / h if lam != 0.0 else np.zeros(n)
        gamma = diff(h, grid) / h + (lam * G * np.cos(theta) / h if lam != 0.0 else 0.0)
        result.diagnostics.append(
            StepDiagnostics(
                float(t),
                float(np.max(np.abs(alpha))),
                float(np.max(np.abs(beta))),
                float(np.max(np.abs(gamma))),
                float(np.min(np.abs(alpha + beta))),
            )
        )
        counter["i"] += 1
        last["t"] = t
        if t_eval is None and (counter["i"] % snapshot_stride == 0 or t == t_end):
            result.states.append(make_state(t, y))

    y0 = np.concatenate([p0.G, p0.h, p0.theta])
    try:
        traj = integrate_ode(rhs, y0, state.t, t_end, ctl, t_eval=t_eval, on_step=on_step)
    except StepSizeUnderflow as exc:
        result.blow_up = BlowUp(float(exc.t_last), str(exc))
        traj = exc.trajectory
        if traj is not None:
            result.n_steps, result.n_rejected = traj.n_steps, traj.n_rejected
        if t_eval is not None and traj is not None:
            result.states = [make_state(t, y) for t, y in traj]
        elif traj is not None and len(traj) and result.states[-1].t != traj.t[-1]:
            result.states.append(make_state(traj.t[-1], traj.y[-1]))
        return result
    result.n_steps, result.n_rejected = traj.n_steps, traj.n_rejected
    if t_eval is not None:
        result.states = [make_state(t, y) for t, y in traj]
    elif result.states[-1].t != t_end:
        result.states.append(make_state(traj.t[-1], traj.y[-1]))
    return result


def evolve_abc(
    t: TorsionABC,
    G,
    params: FlowParams,
    t_end: float,
    ctl: StepControl = StepControl(),
    t_eval: Optional[Sequence[float]] = None,
):
    """Evolve ``(alpha, beta, G)`` directly by the torsion form of the flow.

    Returns the integrator trajectory with state vectors ``[alpha, beta, G]``.
    """
    grid = t.grid
    n = grid.n
    G = check_field(G, grid, "G")

    def rhs(_t, y):
        a, b, g = y[:n], y[n : 2 * n], y[2 * n :]
        if np.any(g <= 0):
            return np.full_like(y, np.nan)
        ad, bd = abc_flow_rhs(TorsionABC(grid, a, b, np.zeros(n)), g, params)
        gg, _ = _log_rates(a, b, params)
        return np.concatenate([ad, bd, g * gg])

    y0 = np.concatenate([t.alpha, t.beta, G])
    return integrate_ode(rhs, y0, 0.0, t_end, ctl, t_eval=t_eval)


def blow_up_time(lambda1: float, theta_t: float) -> float:
    """``T = 1 / (2 lambda1 theta_t^2)``, where ``G_t^2 = 1 - 2 lambda1 theta_t^2 t`` vanishes."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    if theta_t == 0:
        return np.inf
    return 1.0 / (2.0 * lambda1 * theta_t**2)


def separable_cy(lambda1: float, theta_t: float, t: float, r):
    """Separable Calabi-Yau solution of the ``k = 2``, ``C = 0`` flow with ``G_r = 1``.

    Returns ``(G, theta, alpha)`` at time ``t`` and positions ``r``.
    """
    T = blow_up_time(lambda1, theta_t)
    if t >= T:
        raise BeyondBlowUp(f"t = {t} is at or beyond the blow-up time {T}")
    r = np.asarray(r, dtype=float)
    Gt = np.sqrt(1.0 - 2.0 * lambda1 * theta_t**2 * t)
    sq = np.sqrt(lambda1)
    G = np.full_like(r, Gt)
    theta = theta_t * sq * r
    alpha = np.full_like(r, sq * theta_t / Gt)
    return G, theta, alpha


def separable_cy_profile(lambda1: float, theta_t: float, n: int = 64) -> WarpedProfile:
    """Initial data of the separable solution on a circle of length ``2 pi / sqrt(lambda1)``.

    On this circle ``theta`` winds by ``2 pi theta_t``.
    """
    grid = Grid.circle(n, 2 * np.pi / np.sqrt(lambda1))
    G, theta, _ = separable_cy(lambda1, theta_t, 0.0, grid.nodes)
    return WarpedProfile(
        grid, G, np.ones(n), theta, SU3Background(0.0), theta_winding=2 * np.pi * theta_t
    )

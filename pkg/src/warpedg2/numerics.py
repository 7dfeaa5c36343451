"""Uniform grids on the one-dimensional factor, finite differences, quadrature
and an adaptive Dormand-Prince integrator.

Fields are plain ``numpy`` arrays sampled on a :class:`Grid`; every function
here is pure and safe to call from several threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MaxStepsExceeded, StepSizeUnderflow

__all__ = [
    "Topology",
    "Grid",
    "StepControl",
    "Trajectory",
    "check_field",
    "diff",
    "diff2",
    "quadrature",
    "interpolate",
    "integrate_ode",
]


class Topology(str, enum.Enum):
    CIRCLE = "circle"
    INTERVAL = "interval"


@dataclass(frozen=True)
class Grid:
    """Uniform samples of the coordinate ``r``.

    On a circle the node ``r_max`` is identified with ``r_min`` and is not
    stored; on an interval both endpoints are nodes.
    """

    n: int
    r_min: float
    r_max: float
    topology: Topology = Topology.CIRCLE

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs an integer n >= 8, got {self.n!r}")
        if not (np.isfinite(self.r_min) and np.isfinite(self.r_max)):
            raise ValueError("grid endpoints must be finite")
        if not self.r_max > self.r_min:
            raise ValueError("grid needs r_max > r_min")

    @classmethod
    def circle(cls, n: int, length: float = 2 * np.pi, r_min: float = 0.0) -> "Grid":
        return cls(n, r_min, r_min + length, Topology.CIRCLE)

    @classmethod
    def interval(cls, n: int, r_min: float, r_max: float) -> "Grid":
        return cls(n, r_min, r_max, Topology.INTERVAL)

    @property
    def periodic(self) -> bool:
        return self.topology is Topology.CIRCLE

    @property
    def length(self) -> float:
        return self.r_max - self.r_min

    @property
    def dr(self) -> float:
        if self.periodic:
            return self.length / self.n
        return self.length / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.r_min + self.dr * np.arange(self.n)

    def contains(self, r: float) -> bool:
        if self.periodic:
            return self.r_min <= r <= self.r_max
        return self.r_min - 1e-12 * self.length <= r <= self.r_max + 1e-12 * self.length

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.n, float(value))


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-9
    atol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    max_steps: int = 10_000_000
    dt_max: Optional[float] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not (self.dt_init > 0 and self.dt_min > 0):
            raise ValueError("dt_init and dt_min must be positive")
        if not self.dt_min < self.dt_init:
            raise ValueError("dt_min must be smaller than dt_init")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


def check_field(values, grid: Grid, name: str = "field") -> np.ndarray:
    """Return ``values`` as a float array after checking length and finiteness."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.n,):
        raise ValueError(f"{name} has shape {arr.shape}, grid expects ({grid.n},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


# ---------------------------------------------------------------------------
# differentiation

# one-sided fourth-order stencils for the first two and last two nodes
_LEFT = np.array(
    [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
    ]
) / 12.0


def diff(values, grid: Grid, winding: float = 0.0) -> np.ndarray:
    """Fourth-order finite-difference derivative ``df/dr``.

    ``winding`` is the jump ``f(r + L) - f(r)`` across one turn of a circle
    grid. It lets quantities such as the phase ``theta`` wind around the
    circle while their derivative stays periodic. Interval grids ignore it.
    """
    f = check_field(values, grid)
    h = grid.dr
    if grid.periodic:
        slope = winding / grid.length
        g = f - slope * (grid.nodes - grid.r_min) if winding else f
        # differences first, so constants give exact zeros
        out = (
            8.0 * (np.roll(g, -1) - np.roll(g, 1)) - (np.roll(g, -2) - np.roll(g, 2))
        ) / (12.0 * h)
        return out + slope

    out = np.empty_like(f)
    out[2:-2] = (8.0 * (f[3:-1] - f[1:-3]) - (f[4:] - f[:-4])) / (12.0 * h)
    left, right = f[:5] - f[0], f[::-1][:5] - f[-1]
    out[0] = _LEFT[0] @ left / h
    out[1] = _LEFT[1] @ left / h
    out[-1] = -(_LEFT[0] @ right) / h
    out[-2] = -(_LEFT[1] @ right) / h
    return out


def diff2(values, grid: Grid, winding: float = 0.0) -> np.ndarray:
    """Second derivative as :func:`diff` applied twice."""
    return diff(diff(values, grid, winding), grid)


# ---------------------------------------------------------------------------
# quadrature and interpolation


def _cell_integrals(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Integral of the local cubic interpolant over each cell ``[r_i, r_{i+1}]``."""
    h = grid.dr
    if grid.periodic:
        return h / 24.0 * (
            -np.roll(f, 1) + 13.0 * f + 13.0 * np.roll(f, -1) - np.roll(f, -2)
        )
    cells = np.empty(grid.n - 1)
    cells[1:-1] = h / 24.0 * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    cells[0] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    cells[-1] = h / 24.0 * (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4])
    return cells


def interpolate(values, grid: Grid, r) -> np.ndarray:
    """Cubic Lagrange interpolation of sampled values at arbitrary points."""
    f = np.asarray(values, dtype=float)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = (r - grid.r_min) / grid.dr
    if grid.periodic:
        base = np.floor(x).astype(int) - 1
    else:
        base = np.clip(np.floor(x).astype(int) - 1, 0, grid.n - 4)
    s = x - base
    out = np.zeros_like(r)
    for j in range(4):
        w = np.ones_like(r)
        for m in range(4):
            if m != j:
                w *= (s - m) / (j - m)
        idx = (base + j) % grid.n if grid.periodic else base + j
        out += w * f[idx]
    return out


def quadrature(values, grid: Grid, r0: float) -> np.ndarray:
    """Antiderivative ``F(r) = integral of f from r0 to r`` on the grid nodes."""
    f = check_field(values, grid)
    if not grid.contains(r0):
        raise ValueError(f"r0={r0} lies outside the grid [{grid.r_min}, {grid.r_max}]")
    cells = _cell_integrals(f, grid)
    F = np.zeros(grid.n)
    F[1:] = np.cumsum(cells[: grid.n - 1])
    return F - interpolate(F, grid, r0)[0]


# ---------------------------------------------------------------------------
# adaptive Runge-Kutta (Dormand-Prince 5(4) with fourth-order dense output)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4
# coefficients of theta, theta^2, theta^3, theta^4 in the continuous extension
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass
class Trajectory:
    """Accepted states of an integration (or dense samples at ``t_eval``)."""

    t: np.ndarray
    y: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0
    step_t: list = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter(zip(self.t, self.y))

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


def _dense(y0, h, K, theta):
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y0 + h * (K.T @ (_P @ powers))


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    t0: float,
    t1: float,
    ctl: StepControl = StepControl(),
    t_eval: Optional[Sequence[float]] = None,
    on_step: Optional[Callable[[float, np.ndarray], None]] = None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1``.

    Each accepted step satisfies ``|err_i| <= atol + rtol * max(|y_i|, |y_new_i|)``
    componentwise. Steps whose trial values are not finite are rejected and
    retried with a smaller step, so blow-up shows up as
    :class:`StepSizeUnderflow` instead of NaNs. Both exceptions carry the
    trajectory accepted so far.

    With ``t_eval`` the returned trajectory holds the dense-output samples at
    those times (which must lie in ``[t0, t1]`` in integration order);
    otherwise it holds every accepted step.
    """
    y = np.array(y0, dtype=float).ravel()
    t = float(t0)
    t1 = float(t1)
    direction = 1.0 if t1 >= t else -1.0
    span = abs(t1 - t)

    eval_times = None
    if t_eval is not None:
        eval_times = np.asarray(t_eval, dtype=float)
        if np.any(direction * np.diff(eval_times) < 0):
            raise ValueError("t_eval must be ordered in the direction of integration")
        lo, hi = min(t, t1), max(t, t1)
        if eval_times.size and (eval_times.min() < lo - 1e-12 * max(1, span) or eval_times.max() > hi + 1e-12 * max(1, span)):
            raise ValueError("t_eval must lie inside the integration span")
    out_t: list = []
    out_y: list = []
    next_eval = 0

    def emit_samples(t_old, y_old, h, K, t_new):
        nonlocal next_eval
        while next_eval < len(eval_times) and direction * (eval_times[next_eval] - t_new) <= 0:
            te = eval_times[next_eval]
            theta = (te - t_old) / h if h != 0 else 0.0
            out_t.append(te)
            out_y.append(_dense(y_old, h, K, theta))
            next_eval += 1

    def partial():
        return Trajectory(np.array(out_t), np.array(out_y).reshape(len(out_t), y.size), n_steps, n_rejected)

    if eval_times is None:
        out_t.append(t)
        out_y.append(y.copy())
    else:
        while next_eval < len(eval_times) and direction * (eval_times[next_eval] - t) <= 0:
            out_t.append(eval_times[next_eval])
            out_y.append(y.copy())
            next_eval += 1

    if span == 0.0:
        return partial()

    f = np.asarray(rhs(t, y), dtype=float).ravel()
    K = np.empty((7, y.size))
    dt = min(ctl.dt_init, span)
    if ctl.dt_max is not None:
        dt = min(dt, ctl.dt_max)
    n_steps = 0
    n_rejected = 0

    while direction * (t1 - t) > 0:
        if n_steps >= ctl.max_steps:
            raise MaxStepsExceeded(
                f"max_steps={ctl.max_steps} reached at t={t}", t_last=t, trajectory=partial()
            )
        if dt < ctl.dt_min:
            raise StepSizeUnderflow(
                f"step size {dt:.3e} below dt_min={ctl.dt_min:.3e} at t={t}",
                t_last=t,
                trajectory=partial(),
            )
        remaining = abs(t1 - t)
        last = dt >= remaining * (1 - 1e-14)
        h = direction * (remaining if last else dt)

        K[0] = f
        ok = True
        for s in range(1, 7):
            ys = y + h * (np.asarray(_A[s]) @ K[:s])
            ks = np.asarray(rhs(t + _C[s] * h, ys), dtype=float).ravel()
            if not np.all(np.isfinite(ks)):
                ok = False
                break
            K[s] = ks
        if ok:
            y_new = y + h * (_B5 @ K)
            err_vec = h * (_E @ K)
            scale = ctl.atol + ctl.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.max(np.abs(err_vec) / scale) if y.size else 0.0
            ok = np.isfinite(err) and np.all(np.isfinite(y_new))
        if not ok:
            n_rejected += 1
            dt = abs(h) * 0.25
            continue

        if err <= 1.0:
            t_new = t1 if last else t + h
            if eval_times is not None:
                emit_samples(t, y, h, K, t_new)
            t, y, f = t_new, y_new, K[6].copy()
            n_steps += 1
            if eval_times is None:
                out_t.append(t)
                out_y.append(y.copy())
            if on_step is not None:
                on_step(t, y)
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            dt = abs(h) * factor if not last else dt
        else:
            n_rejected += 1
            dt = abs(h) * max(0.2, 0.9 * err ** -0.2)
        if ctl.dt_max is not None:
            dt = min(dt, ctl.dt_max)

    return partial()

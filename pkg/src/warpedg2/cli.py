"""``warpedg2`` command line: torsion, flow, soliton, verify and sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from . import io as wio
from . import verification
from .config import (
    build_flow_params,
    build_profile,
    build_step_control,
    load_config,
    parse_sweep,
)
from .errors import ConfigError, DomainError, WarpedG2Error
from .flow import FlowState, evolve
from .geometry import compute_abc, torsion_class
from .soliton import (
    CYFamily,
    FamilyKind,
    SolitonParams,
    SolitonState,
    cy_closed_form,
    cy_periodicity,
    nk_constant_catalog,
    solve_soliton_bvp,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

NK_COLUMNS = ["r", "alpha", "beta", "l", "theta", "F"]
CATALOG_COLUMNS = ["id", "alpha", "beta", "l_value", "l_slope", "l_arbitrary", "mu", "residual"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class Output:
    """Files produced by one command; ``primary`` goes to stdout without ``--out``."""

    files: Dict[str, str]
    primary: str
    notes: List[str] = field(default_factory=list)


def _require(data, key, command):
    if key not in data:
        raise ConfigError(f"the {command} command needs a '{key}' block")
    return data[key]


# ---------------------------------------------------------------------------
# commands


def run_torsion(data, fmt: str, stride: Optional[int] = None) -> Output:
    p = build_profile(_require(data, "profile", "torsion"))
    flags = torsion_class(compute_abc(p)).as_dict()
    note = "class: " + " ".join(f"{k}={str(v).lower()}" for k, v in flags.items())
    rows = wio.torsion_rows(p)
    if fmt == "csv":
        return Output({"torsion.csv": wio.csv_text(wio.TORSION_COLUMNS, rows)}, "torsion.csv", [note])
    if fmt == "json":
        cols = {c: [row[i] for row in rows] for i, c in enumerate(wio.TORSION_COLUMNS)}
        return Output({"torsion.json": wio.json_text({"class": flags, "columns": cols})}, "torsion.json", [note])
    raise UsageError("torsion supports --format csv or json")


def run_flow(data, fmt: str, stride: Optional[int] = None) -> Output:
    prof = _require(data, "profile", "flow")
    f = _require(data, "flow", "flow")
    p = build_profile(prof)
    params = build_flow_params(data)
    ctl = build_step_control(data)
    stride = stride or data.get("snapshot_stride", 1)
    res = evolve(FlowState(0.0, p), params, float(f["t_end"]), ctl, snapshot_stride=stride)
    final = res.final
    t = compute_abc(final.profile)
    summary = {
        "params": {"k": params.k, "C": params.C, "t_end": f["t_end"]},
        "well_posed": params.well_posed,
        "t_final": final.t,
        "n_snapshots": len(res.states),
        "n_steps": res.n_steps,
        "n_rejected": res.n_rejected,
        "blow_up": None if res.blow_up is None else {"t_last": res.blow_up.t_last, "reason": res.blow_up.reason},
        "alpha_beta_crossings": res.alpha_beta_crossings,
        "final": {
            "alpha_max": float(np.max(np.abs(t.alpha))),
            "beta_max": float(np.max(np.abs(t.beta))),
            "gamma_max": float(np.max(np.abs(t.gamma))),
            "G_min": float(np.min(final.profile.G)),
        },
    }
    notes = []
    if res.blow_up is not None:
        notes.append(f"blow-up: step size collapsed at t = {res.blow_up.t_last:.17g}")
    if fmt == "csv":
        files = {"flow.csv": wio.csv_text(wio.FLOW_COLUMNS, wio.flow_rows(res)), "flow_summary.json": wio.json_text(summary)}
        return Output(files, "flow.csv", notes + ["summary: " + wio.json_line(summary)])
    if fmt == "json":
        summary["snapshots"] = [
            {"t": s.t, "G": s.profile.G, "h": s.profile.h, "theta": s.profile.theta} for s in res.states
        ]
        return Output({"flow.json": wio.json_text(summary)}, "flow.json", notes)
    raise UsageError("flow supports --format csv or json")


def _family(spec) -> CYFamily:
    try:
        return CYFamily(
            spec["family"], spec["C"], spec["R"], spec.get("r0", 0.0), spec.get("theta0", 0.0), spec.get("sign", 1)
        )
    except DomainError as exc:
        raise ConfigError(f"soliton: {exc}") from exc


def _span(spec, f: Optional[CYFamily] = None):
    if "r_span" in spec:
        a, b = spec["r_span"]
    elif f is not None and f.kind is FamilyKind.TRIGONOMETRIC:
        a, b = f.r0, f.r0 + f.period
    else:
        r0 = spec.get("r0", 0.0)
        a, b = r0 - 10.0, r0 + 10.0
    if not b > a:
        raise ConfigError("soliton: r_span needs r_span[1] > r_span[0]")
    return float(a), float(b)


def _soliton_family(spec, fmt: str) -> Output:
    f = _family(spec)
    a, b = _span(spec, f)
    r = np.linspace(a, b, spec.get("n_samples", 401))
    alpha, l, theta = cy_closed_form(f, r)
    curves = [(f"{f.kind.value} closed form", alpha, l)]
    info = {
        "family": f.kind.value,
        "C": f.C,
        "R": f.R,
        "Q": f.Q,
        "r0": f.r0,
        "theta0": f.theta0,
        "sign": f.sign,
        "alpha0": f.alpha0,
        "period": f.period,
        "r_span": [a, b],
    }
    if f.kind is FamilyKind.TRIGONOMETRIC:
        rep = cy_periodicity(f.C, f.R)
        info["periodicity"] = {k: getattr(rep, k) for k in rep.__dataclass_fields__}
    cols, rows = wio.PHASE_COLUMNS, wio.phase_rows(r, alpha, l, theta, f.C)
    if spec.get("integrate", False):
        num = _integrate_family(f, r)
        dev = float(np.max(np.abs(np.concatenate([num[0] - alpha, num[1] - l]))))
        info["integration_max_deviation"] = dev
        curves.append(("integrated", num[0], num[1]))
        cols = cols + ["alpha_num", "l_num", "theta_num"]
        rows = [row + [x, y, z] for row, x, y, z in zip(rows, *num)]
    return _soliton_output(fmt, cols, rows, info, curves, f"{f.kind.value} soliton, C={f.C:g}, R={f.R:g}")


def _integrate_family(f: CYFamily, r):
    """Integrate the ODE from ``(alpha0, 0, theta0)`` at ``r0`` in both directions onto ``r``."""
    p = SolitonParams(f.C, 0.0)
    ics = SolitonState(f.alpha0, 0.0, 0.0)
    out = np.empty((3, r.size))
    fwd, bwd = r >= f.r0, r < f.r0
    for mask, end in ((fwd, r[-1]), (bwd, r[0])):
        if not mask.any() or end == f.r0:
            continue
        pts = r[mask] if end > f.r0 else r[mask][::-1]
        tr = solve_soliton_bvp(ics, p, 0.0, (f.r0, end), r_eval=pts, theta0=f.theta0)
        vals = np.stack([tr.alpha, tr.l, tr.theta])
        out[:, mask] = vals if end > f.r0 else vals[:, ::-1]
    if fwd.any() and r[-1] == f.r0:
        out[:, fwd] = np.array([[f.alpha0], [0.0], [f.theta0]])
    return out


def _soliton_ics(spec, fmt: str) -> Output:
    ic = spec["ics"]
    lam = float(spec.get("lambda", 0.0))
    p = SolitonParams(spec.get("C", 0.0), spec.get("mu", 0.0), spec.get("k", 2.0))
    a, b = _span(spec)
    r = np.linspace(a, b, spec.get("n_samples", 401))
    tr = solve_soliton_bvp(SolitonState(ic["alpha"], ic.get("beta", 0.0), ic["l"]), p, lam, (a, b), r_eval=r)
    info = {"lambda": lam, "C": p.C, "mu": p.mu, "k": p.k, "r_span": [a, b], "mode": tr.mode}
    if tr.mode == "cy":
        info["R2_drift"] = tr.R2_drift
        cols, rows = wio.PHASE_COLUMNS, wio.phase_rows(tr.r, tr.alpha, tr.l, tr.theta, p.C)
    else:
        info["F_drift"] = float(np.max(np.abs(tr.F - tr.F[0])))
        cols, rows = NK_COLUMNS, [list(v) for v in zip(tr.r, tr.alpha, tr.beta, tr.l, tr.theta, tr.F)]
    return _soliton_output(fmt, cols, rows, info, [("integrated", tr.alpha, tr.l)], f"soliton, lambda={lam:g}, C={p.C:g}")


def _soliton_output(fmt, cols, rows, info, curves, title) -> Output:
    if fmt == "csv":
        return Output({"soliton.csv": wio.csv_text(cols, rows), "soliton_summary.json": wio.json_text(info)}, "soliton.csv")
    if fmt == "json":
        info = dict(info, columns={c: [row[i] for row in rows] for i, c in enumerate(cols)})
        return Output({"soliton.json": wio.json_text(info)}, "soliton.json")
    return Output({"soliton.svg": wio.phase_svg(curves, title), "soliton.csv": wio.csv_text(cols, rows)}, "soliton.svg")


def _soliton_catalog(spec, fmt: str) -> Output:
    C, mu = spec["C"], spec["mu"]
    entries = nk_constant_catalog(C, mu)
    dicts = [e.as_dict(C) for e in entries]
    if fmt == "json":
        return Output({"catalog.json": wio.json_text({"C": C, "mu": mu, "entries": dicts})}, "catalog.json")
    if fmt == "csv":
        rows = [
            [e.id, e.alpha, e.beta, e.l_value, e.l_slope, int(e.l_arbitrary), e.mu, d["residual"]]
            for e, d in zip(entries, dicts)
        ]
        return Output({"catalog.csv": wio.csv_text(CATALOG_COLUMNS, rows)}, "catalog.csv")
    raise UsageError("the catalog request supports --format csv or json")


def run_soliton(data, fmt: str, stride: Optional[int] = None) -> Output:
    spec = _require(data, "soliton", "soliton")
    if "catalog" in spec:
        return _soliton_catalog(spec["catalog"], fmt)
    if "family" in spec:
        return _soliton_family(spec, fmt)
    return _soliton_ics(spec, fmt)


COMMANDS = {"torsion": run_torsion, "flow": run_flow, "soliton": run_soliton}


# ---------------------------------------------------------------------------
# plumbing


def _write(out_dir: str, files: Dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit(output: Output, out_dir: Optional[str]) -> None:
    for note in output.notes:
        print(note, file=sys.stderr)
    if out_dir is None:
        sys.stdout.write(output.files[output.primary])
    else:
        _write(out_dir, output.files)


def _run_one(command, data, fmt, stride):
    try:
        return EXIT_OK, COMMANDS[command](data, fmt, stride), ""
    except (ConfigError, UsageError) as exc:
        return EXIT_USAGE, None, str(exc)
    except WarpedG2Error as exc:
        return EXIT_NUMERICAL, None, f"{type(exc).__name__}: {exc}"


def _cmd_verify(args) -> int:
    report = verification.run_suite(args.suite)
    fmt = args.format or "csv"
    if fmt == "json":
        text, name = wio.json_text(report.as_dict()), "verify.json"
    elif fmt == "csv":
        text, name = report.table(), "verify.txt"
    else:
        raise UsageError("verify supports --format csv (table) or json")
    if args.out:
        _write(args.out, {name: text})
    else:
        sys.stdout.write(text)
    for r in report.failures:
        print(f"FAILED {r.suite}/{r.name}: value {r.value:.3e} > tolerance {r.tolerance:.1e} {r.detail}".rstrip(), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_sweep(args) -> int:
    if not args.out:
        raise UsageError("sweep needs --out DIR")
    sweep = parse_sweep(_read(args.config))
    runs = sweep["runs"]
    fmt = args.format or "csv"

    def task(run):
        return _run_one(run["command"], run["config"], fmt, args.snapshot_stride)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(task, runs))
    summary, worst = [], EXIT_OK
    for run, (code, output, err) in zip(runs, results):
        if output is not None:
            _write(os.path.join(args.out, run["name"]), output.files)
        summary.append({"name": run["name"], "command": run["command"], "exit_code": code, "error": err or None})
        worst = max(worst, code)
    _write(args.out, {"sweep_summary.json": wio.json_text({"runs": summary})})
    for s in summary:
        print(f"{s['name']}: exit {s['exit_code']}" + (f" ({s['error']})" if s["error"] else ""), file=sys.stderr)
    return worst


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="warpedg2", description="Torsion, coflow and solitons of warped G2-structures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True, formats=("csv", "json", "svg")):
        p.add_argument("--config", required=config_required, metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", help="write output files here instead of stdout")
        p.add_argument("--format", choices=formats, default=None)
        p.add_argument("--snapshot-stride", type=int, default=None, metavar="N")

    for name, helptext in (
        ("torsion", "torsion of a warped profile"),
        ("flow", "evolve a profile by the modified coflow"),
        ("soliton", "closed-form, integrated or catalog solitons"),
    ):
        common(sub.add_parser(name, help=helptext))
    v = sub.add_parser("verify", help="run invariant checks")
    v.add_argument("--suite", default="all", choices=sorted(verification.SUITES) + ["all"])
    v.add_argument("--out", metavar="DIR")
    v.add_argument("--format", choices=("csv", "json"), default=None)
    s = sub.add_parser("sweep", help="run several configurations")
    common(s)
    s.add_argument("--workers", type=int, default=1, metavar="N")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "snapshot_stride", None) is not None and args.snapshot_stride < 1:
        print("warpedg2: error: --snapshot-stride must be positive", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "workers", 1) < 1:
        print("warpedg2: error: --workers must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        data = load_config(args.config)
    except (ConfigError, UsageError) as exc:
        print(f"warpedg2: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, output, err = _run_one(args.command, data, args.format or "csv", args.snapshot_stride)
    if output is None:
        print(f"warpedg2: error: {err}", file=sys.stderr)
        return code
    _emit(output, args.out)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

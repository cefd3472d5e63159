"""Scenario-driven command line front end.

Subcommands: validate, run, game-solve, xcheck.  Exit codes: 0 success,
1 scenario/validation error, 2 numerical-invariant failure.  The
HYSTK_SEED environment variable overrides the scenario seed.  Outputs are
CSV traces (12 significant digits, byte-stable) and plain-text reports.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .hysteresis import FamilyError, apply
from .markov import (
    MarkovError,
    NonStochasticResultError,
    SeriesConvergenceError,
    fundamental_matrix_product,
    fundamental_matrix_series,
    propagate,
)
from .relay import RelayError, evolve, output_at, validate
from .scenario import (
    Scenario,
    ScenarioError,
    build_family,
    build_game,
    build_impulsive,
    build_markov,
    build_relay,
    generate_signal,
    load_scenario,
)

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_NUMERIC = 2

EPS_TRACE = 1e-8


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_report(path: Path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _effective_seed(scn: Scenario) -> int:
    env = os.environ.get("HYSTK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScenarioError("HYSTK_SEED", f"not an integer: {env!r}")
    return scn.seed


def _load(path: str) -> Scenario:
    return load_scenario(path)


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    scn = _load(args.scenario)
    seed = _effective_seed(scn)
    lines = [f"scenario: {scn.path}", f"kind: {scn.kind}", f"seed: {seed}"]
    problems = 0
    if scn.kind == "relay":
        spec, _ = build_relay(scn.data["relay"], seed)
        viols = validate(spec)
        for v in viols:
            lines.append(f"violation: {v.describe()}")
        problems = len(viols)
    elif scn.kind in ("hysteresis",):
        family = build_family(scn.data["family"])
        for m in family.members:
            for v in validate(m.spec):
                lines.append(f"violation[{m.label}]: {v.describe()}")
                problems += 1
    elif scn.kind == "markov":
        cfg = build_markov(scn.data["markov"])
        rng = np.random.default_rng(seed)
        xi = cfg["xi"]
        defect = cfg["flow"].check_axioms(rng, xi - 1.0, xi + 1.0,
                                          (cfg["start"], cfg["end"]))
        lines.append(f"semi-flow axiom defect: {_fmt(defect)}")
    elif scn.kind == "fundamental-matrix":
        build_impulsive(scn.data["impulsive"])
        lines.append("impulsive system well-formed")
    elif scn.kind == "game":
        build_game(scn.data["game"])
        lines.append("game spec well-formed")
    lines.append(f"result: {'INVALID' if problems else 'OK'}")
    print("\n".join(lines))
    return EXIT_SCENARIO if problems else EXIT_OK


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    scn = _load(args.scenario)
    seed = _effective_seed(scn)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace = out_dir / scn.trace_name
    report = out_dir / scn.report_name
    lines = [f"scenario: {Path(scn.path).name}", f"kind: {scn.kind}", f"seed: {seed}"]

    if scn.kind == "relay":
        spec, alpha0 = build_relay(scn.data["relay"], seed)
        viols = validate(spec)
        if viols:
            for v in viols:
                lines.append(f"violation: {v.describe()}")
            lines.append("result: INVALID")
            _write_report(report, lines)
            print(f"scenario error: relay spec invalid ({len(viols)} violations), "
                  f"see {report}", file=sys.stderr)
            return EXIT_SCENARIO
        signal = generate_signal(scn.data["signal"])
        traj = evolve(spec, signal, alpha0)
        times = [signal.t_start] + [ev.time for ev in traj.switch_events]
        rows = [(t, output_at(traj, t)) for t in times]
        if times[-1] < signal.t_end:
            rows.append((signal.t_end, output_at(traj, signal.t_end)))
        _write_csv(trace, ["time", "state"], rows)
        lines.append(f"events: {len(traj.switch_events)}")
        lines.append("result: OK")
        _write_report(report, lines)
        return EXIT_OK

    if scn.kind == "hysteresis":
        family = build_family(scn.data["family"])
        bad = 0
        for m in family.members:
            for v in validate(m.spec):
                lines.append(f"violation[{m.label}]: {v.describe()}")
                bad += 1
        if bad:
            lines.append("result: INVALID")
            _write_report(report, lines)
            print(f"scenario error: family invalid ({bad} violations), see {report}",
                  file=sys.stderr)
            return EXIT_SCENARIO
        signal = generate_signal(scn.data["signal"])
        out = apply(family, signal)
        rows = [(t,) + tuple(v) for t, v in zip(out.times, out.values)]
        header = ["time"] + (["H_output"] if out.values.shape[1] == 1 else
                             [f"H_{j}" for j in range(out.values.shape[1])])
        _write_csv(trace, header, rows)
        lines.append(f"members: {len(family.members)}")
        lines.append(f"breakpoints: {len(out.times)}")
        lines.append("result: OK")
        _write_report(report, lines)
        return EXIT_OK

    if scn.kind == "markov":
        cfg = build_markov(scn.data["markov"])
        field, flow = cfg["field"], cfg["flow"]
        s, T, xi = cfg["start"], cfg["end"], cfg["xi"]
        n = field.state_count
        diag: list = []
        ts = np.linspace(s, T, cfg["samples"] + 1)
        rows = []
        worst_dev = 0.0
        for t in ts:
            pi = propagate(field, flow, s, float(t), xi, diagnostics=diag)
            dev = float(np.abs(pi.entries.sum(axis=1) - 1.0).max())
            worst_dev = max(worst_dev, dev)
            if dev > EPS_TRACE:
                lines.append(f"result: ROW-SUM VIOLATION at t={_fmt(t)} ({dev:.3e})")
                _write_report(report, lines)
                print("numerical invariant failure: row sums", file=sys.stderr)
                return EXIT_NUMERIC
            rows.append((float(t),) + tuple(pi.entries.reshape(-1)))
        header = ["time"] + [f"pi_{a}{b}" for a in range(n) for b in range(n)]
        _write_csv(trace, header, rows)
        lines.append(f"propagations: {len(ts)}")
        lines.append(f"max row-sum deviation: {worst_dev:.3e}")
        lines.append(f"min recorded entry: {min((m for _, m in diag), default=0.0):.3e}")
        lines.append("result: OK")
        _write_report(report, lines)
        return EXIT_OK

    if scn.kind == "fundamental-matrix":
        cfg = build_impulsive(scn.data["impulsive"])
        sys_, t0, t1 = cfg["system"], cfg["t_prime"], cfg["t"]
        ts = np.linspace(t0, t1, 9)[1:]
        rows = []
        for t in ts:
            phi = fundamental_matrix_product(sys_, t0, float(t))
            rows.append((float(t),) + tuple(phi.reshape(-1)))
        d = rows[0][1:]
        dim = int(np.sqrt(len(d)))
        header = ["time"] + [f"phi_{a}{b}" for a in range(dim) for b in range(dim)]
        _write_csv(trace, header, rows)
        resid = _xcheck_residual(cfg)
        lines.append(f"cross-method residual: {resid:.3e}")
        if resid > cfg["threshold"]:
            lines.append("result: CROSS-METHOD DISAGREEMENT")
            _write_report(report, lines)
            print("numerical invariant failure: cross-method residual", file=sys.stderr)
            return EXIT_NUMERIC
        lines.append("result: OK")
        _write_report(report, lines)
        return EXIT_OK

    if scn.kind == "game":
        return _run_game(scn, seed, trace, report, lines, refine=0)

    raise ScenarioError("kind", f"unhandled kind {scn.kind}")


def _xcheck_residual(cfg) -> float:
    p = fundamental_matrix_product(cfg["system"], cfg["t_prime"], cfg["t"])
    s = fundamental_matrix_series(cfg["system"], cfg["t_prime"], cfg["t"], cfg["tol"])
    return float(np.abs(p - s).max())


def _run_game(scn, seed, trace, report, lines, refine: int) -> int:
    from .game import solve
    from .scenario import build_game

    cfg = build_game(scn.data["game"])
    spec, grid = cfg["spec"], cfg["grid"]
    if refine:
        from .game import SpatialGrid
        import dataclasses

        factor = 2 ** refine
        spec = dataclasses.replace(spec, time_steps=spec.time_steps * factor)
        grid = SpatialGrid(tuple(
            np.linspace(a[0], a[-1], (len(a) - 1) * factor + 1) for a in grid.axes))
        lines.append(f"refine: {refine} (x{factor})")
    table = solve(spec, grid)
    nodes = grid.nodes()
    rows = []
    for p_idx, p in enumerate(spec.profiles()):
        vals = table.values[0][p].reshape(-1)
        for x, v in zip(nodes, vals):
            rows.append(tuple(x) + (p_idx, v))
    header = [f"x_{j}" for j in range(grid.dim)] + ["profile", "V0"]
    _write_csv(trace, header, rows)
    lines.append(f"profiles: {len(spec.profiles())}")
    lines.append(f"grid nodes: {len(nodes)}")
    lines.append(f"time steps: {spec.time_steps}")
    lines.append(f"clamped backups: {table.clamp_count}/{table.backup_count}")
    lines.append("result: OK")
    _write_report(report, lines)
    return EXIT_OK


def cmd_game_solve(args) -> int:
    scn = _load(args.scenario)
    if scn.kind != "game":
        raise ScenarioError("kind", f"game-solve needs a game scenario, got {scn.kind}")
    seed = _effective_seed(scn)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"scenario: {Path(scn.path).name}", f"kind: {scn.kind}", f"seed: {seed}"]
    return _run_game(scn, seed, out_dir / scn.trace_name, out_dir / scn.report_name,
                     lines, refine=args.refine)


def cmd_xcheck(args) -> int:
    scn = _load(args.scenario)
    if scn.kind != "fundamental-matrix":
        raise ScenarioError(
            "kind", f"xcheck needs a fundamental-matrix scenario, got {scn.kind}")
    cfg = build_impulsive(scn.data["impulsive"])
    resid = _xcheck_residual(cfg)
    print(f"max residual: {_fmt(resid)}")
    if resid > cfg["threshold"]:
        print(f"FAIL: residual above threshold {_fmt(cfg['threshold'])}",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"OK: within threshold {_fmt(cfg['threshold'])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hystk",
        description="relay, hysteresis, impulsive-Markov and game scenarios")
    ap.add_argument("--version", action="version", version=f"hystk {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural validation of a scenario")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario, write CSV trace and report")
    p.add_argument("scenario")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("game-solve", help="solve a game scenario")
    p.add_argument("scenario")
    p.add_argument("--refine", type=int, default=0,
                   help="halve grid and time steps this many times")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(fn=cmd_game_solve)

    p = sub.add_parser("xcheck", help="cross-check the two fundamental-matrix methods")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_xcheck)
    return ap


def main(argv=None) -> int:
    from .game import GameError, GridClampError

    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except (RelayError, FamilyError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except (NonStochasticResultError, SeriesConvergenceError, GridClampError) as e:
        print(f"numerical invariant failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MarkovError, GameError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())

"""Scenario files: a YAML schema with named sections and a registry of
built-in functions.

All callable ingredients (intensities, kernels, flows, costs) are chosen by
name from the registry with numeric parameters, so scenario runs are fully
reproducible without executing user code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import yaml

from .geometry import BoundaryFacet, HalfSpace, Region, Signal
from .hysteresis import RelayFamily, preisach_family, preisach_grid
from .markov import ImpulseSurface, ImpulsiveSystem, MarkovField, SemiFlow
from .relay import RelaySpec, classic_relay, triangle_relay

KINDS = ("relay", "hysteresis", "markov", "fundamental-matrix", "game")


class ScenarioError(Exception):
    """Scenario parse/validation problem, with the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _need(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return mapping[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    return value


@dataclass
class Scenario:
    kind: str
    seed: int
    data: Dict[str, Any]
    outputs: Dict[str, str] = field(default_factory=dict)
    path: str = "<memory>"

    @property
    def trace_name(self) -> str:
        return self.outputs.get("trace", "trace.csv")

    @property
    def report_name(self) -> str:
        return self.outputs.get("report", "report.txt")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ScenarioError(str(path), f"YAML parse error: {e}") from e
    except OSError as e:
        raise ScenarioError(str(path), f"cannot read scenario: {e}") from e
    if not isinstance(raw, dict):
        raise ScenarioError(str(path), "scenario must be a mapping")
    kind = _need(raw, "kind", "scenario")
    if kind not in KINDS:
        raise ScenarioError("scenario.kind", f"unknown kind {kind!r}, expected one of {KINDS}")
    seed = _int(_need(raw, "seed", "scenario"), "scenario.seed")
    outputs = raw.get("outputs", {}) or {}
    if not isinstance(outputs, dict):
        raise ScenarioError("scenario.outputs", "must be a mapping")
    return Scenario(kind=kind, seed=seed, data=raw, outputs=outputs, path=str(path))


# ---------------------------------------------------------------------------
# signal generators


def generate_signal(spec: dict, path: str = "signal") -> Signal:
    """Deterministic signal from a generator description."""
    if not isinstance(spec, dict):
        raise ScenarioError(path, "signal section must be a mapping")
    gen = _need(spec, "generator", path)
    if gen == "ramp":
        t0 = _num(spec.get("t0", 0.0), f"{path}.t0")
        t1 = _num(_need(spec, "t1", path), f"{path}.t1")
        u0 = _num(_need(spec, "u0", path), f"{path}.u0")
        u1 = _num(_need(spec, "u1", path), f"{path}.u1")
        samples = _int(spec.get("samples", 2), f"{path}.samples")
        if samples < 2 or t1 <= t0:
            raise ScenarioError(path, "ramp needs samples >= 2 and t1 > t0")
        ts = np.linspace(t0, t1, samples)
        return Signal.scalar(ts, np.linspace(u0, u1, samples))
    if gen == "triangle-wave":
        amp = _num(_need(spec, "amplitude", path), f"{path}.amplitude")
        period = _num(_need(spec, "period", path), f"{path}.period")
        halves = _int(_need(spec, "half_periods", path), f"{path}.half_periods")
        t0 = _num(spec.get("t0", 0.0), f"{path}.t0")
        offset = _num(spec.get("offset", 0.0), f"{path}.offset")
        if halves < 1 or period <= 0:
            raise ScenarioError(path, "triangle-wave needs half_periods >= 1, period > 0")
        ts = t0 + 0.5 * period * np.arange(halves + 1)
        vs = offset + amp * (np.arange(halves + 1) % 2)
        return Signal.scalar(ts, vs)
    if gen == "piecewise-linear":
        times = _need(spec, "times", path)
        if "points" in spec:
            return Signal(np.asarray(times, dtype=float),
                          np.asarray(spec["points"], dtype=float))
        values = _need(spec, "values", path)
        return Signal.scalar(times, values)
    if gen == "sinusoid":
        amp = _num(_need(spec, "amplitude", path), f"{path}.amplitude")
        period = _num(_need(spec, "period", path), f"{path}.period")
        samples = _int(_need(spec, "samples", path), f"{path}.samples")
        t0 = _num(spec.get("t0", 0.0), f"{path}.t0")
        duration = _num(_need(spec, "duration", path), f"{path}.duration")
        offset = _num(spec.get("offset", 0.0), f"{path}.offset")
        phase = _num(spec.get("phase", 0.0), f"{path}.phase")
        if samples < 2:
            raise ScenarioError(path, "sinusoid needs samples >= 2")
        ts = np.linspace(t0, t0 + duration, samples)
        vs = offset + amp * np.sin(2 * math.pi * (ts - t0) / period + phase)
        return Signal.scalar(ts, vs)
    raise ScenarioError(f"{path}.generator", f"unknown generator {gen!r}")


# ---------------------------------------------------------------------------
# relay / family sections


def build_relay(spec: dict, seed: int, path: str = "relay") -> tuple:
    """(RelaySpec, initial state index) from a relay section."""
    kind = _need(spec, "type", path)
    if kind == "classic":
        rho1 = _num(_need(spec, "rho1", path), f"{path}.rho1")
        rho2 = _num(_need(spec, "rho2", path), f"{path}.rho2")
        init = _int(spec.get("initial", -1), f"{path}.initial")
        if init not in (-1, 1):
            raise ScenarioError(f"{path}.initial", "classic initial must be -1 or +1")
        if rho1 <= rho2:
            raise ScenarioError(path, f"classic relay needs rho1 > rho2 "
                                      f"(got {rho1} <= {rho2})")
        return classic_relay(rho1, rho2, seed=seed), (0 if init == -1 else 1)
    if kind == "triangle":
        init = _int(spec.get("initial", 2), f"{path}.initial")
        if init not in (1, 2, 3):
            raise ScenarioError(f"{path}.initial", "triangle initial must be 1, 2 or 3")
        return triangle_relay(seed=seed), init
    if kind == "custom-classic-pair":
        # deliberately unchecked threshold order, for exercising validation
        lo = _num(_need(spec, "rho1", path), f"{path}.rho1")
        hi = _num(_need(spec, "rho2", path), f"{path}.rho2")
        from .relay import StateId
        omega = Region.whole_space(1)
        c_minus = Region((HalfSpace(np.array([1.0]), lo),), 1, np.array([lo - 1.0]))
        c_plus = Region((HalfSpace(np.array([-1.0]), -hi),), 1, np.array([hi + 1.0]))
        return RelaySpec(
            omega=omega,
            states=[StateId(0, -1.0), StateId(1, 1.0)],
            continuation={0: c_minus, 1: c_plus},
            switch_facets={(0, 1): BoundaryFacet(c_minus, 0),
                           (1, 0): BoundaryFacet(c_plus, 0)},
            seed=seed,
        ), 0
    raise ScenarioError(f"{path}.type", f"unknown relay type {kind!r}")


def build_family(spec: dict, path: str = "family") -> RelayFamily:
    kind = _need(spec, "type", path)
    if kind == "preisach-list":
        rows = _need(spec, "members", path)
        if not isinstance(rows, list) or not rows:
            raise ScenarioError(f"{path}.members", "need a nonempty list of member rows")
        parsed = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != 4:
                raise ScenarioError(f"{path}.members[{i}]",
                                    "member row is [rho1, rho2, weight, initial]")
            parsed.append((float(row[0]), float(row[1]), float(row[2]), int(row[3])))
        return preisach_family(parsed)
    if kind == "preisach-grid":
        n = _int(_need(spec, "n", path), f"{path}.n")
        lo = _num(_need(spec, "rho_lo", path), f"{path}.rho_lo")
        hi = _num(_need(spec, "rho_hi", path), f"{path}.rho_hi")
        start = spec.get("start_value")
        return preisach_grid(n, lo, hi,
                             start_value=None if start is None else float(start))
    raise ScenarioError(f"{path}.type", f"unknown family type {kind!r}")


# ---------------------------------------------------------------------------
# markov sections


def _build_intensities(spec: dict, n: int, path: str):
    name = _need(spec, "name", path)
    if name == "constant":
        rates = np.asarray(_need(spec, "rates", path), dtype=float)
        if rates.shape != (n,):
            raise ScenarioError(f"{path}.rates", f"need {n} rates")
        return lambda t, x: rates
    if name == "affine-time":
        base = np.asarray(_need(spec, "base", path), dtype=float)
        slope = np.asarray(_need(spec, "slope", path), dtype=float)
        if base.shape != (n,) or slope.shape != (n,):
            raise ScenarioError(path, f"base/slope must have length {n}")
        return lambda t, x: np.maximum(base + slope * t, 0.0)
    raise ScenarioError(f"{path}.name", f"unknown intensities {name!r}")


def _build_matrix(spec: dict, n: int, path: str) -> np.ndarray:
    name = _need(spec, "name", path)
    if name == "matrix":
        rows = np.asarray(_need(spec, "rows", path), dtype=float)
        if rows.shape != (n, n):
            raise ScenarioError(f"{path}.rows", f"need an {n}x{n} matrix")
        return rows
    if name == "uniform-offdiag":
        g = np.full((n, n), 1.0 / (n - 1))
        np.fill_diagonal(g, 0.0)
        return g
    raise ScenarioError(f"{path}.name", f"unknown matrix {name!r}")


def _build_flow(spec: dict, path: str) -> SemiFlow:
    name = _need(spec, "name", path)
    if name == "frozen":
        return SemiFlow.from_map(lambda s, t, xi: xi)
    if name == "translation":
        v = np.asarray(_need(spec, "velocity", path), dtype=float)
        return SemiFlow.from_map(lambda s, t, xi: xi + (t - s) * v)
    if name == "decay":
        a = _num(_need(spec, "rate", path), f"{path}.rate")
        return SemiFlow.from_map(lambda s, t, xi: xi * math.exp(-a * (t - s)))
    if name == "integrated-sine":
        amp = _num(spec.get("amplitude", 1.0), f"{path}.amplitude")
        return SemiFlow.from_map(
            lambda s, t, xi: xi + amp * (math.cos(s) - math.cos(t)) * np.ones_like(xi))
    raise ScenarioError(f"{path}.name", f"unknown flow {name!r}")


def build_markov(spec: dict, path: str = "markov") -> dict:
    n = _int(_need(spec, "states", path), f"{path}.states")
    if n < 2:
        raise ScenarioError(f"{path}.states", "need at least 2 states")
    intensities = _build_intensities(_need(spec, "intensities", path), n,
                                     f"{path}.intensities")
    g = _build_matrix(_need(spec, "jump_kernel", path), n, f"{path}.jump_kernel")
    surfaces = []
    for i, imp in enumerate(spec.get("impulses", []) or []):
        ipath = f"{path}.impulses[{i}]"
        p = _build_matrix(_need(imp, "p", ipath), n, f"{ipath}.p")
        pf = (lambda mat: lambda t, x: mat)(p)
        if "at_time" in imp:
            surfaces.append(ImpulseSurface(p=pf, at_time=_num(imp["at_time"],
                                                              f"{ipath}.at_time")))
        elif "facet_level" in imp:
            level = _num(imp["facet_level"], f"{ipath}.facet_level")
            axis = _int(imp.get("axis", 0), f"{ipath}.axis")
            dim = len(np.atleast_1d(np.asarray(_need(spec, "xi", path), dtype=float)))
            normal = np.zeros(dim)
            normal[axis] = 1.0
            region = Region((HalfSpace(normal, level),), dim,
                            _facet_witness(normal, level, dim))
            surfaces.append(ImpulseSurface(p=pf, facet=BoundaryFacet(region, 0)))
        else:
            raise ScenarioError(ipath, "impulse needs at_time or facet_level")
    field_ = MarkovField(intensities=intensities,
                         jump_kernel=(lambda mat: lambda t, x: mat)(g),
                         impulse_set=tuple(surfaces), state_count=n)
    flow = _build_flow(_need(spec, "flow", path), f"{path}.flow")
    return {
        "field": field_,
        "flow": flow,
        "start": _num(_need(spec, "start", path), f"{path}.start"),
        "end": _num(_need(spec, "end", path), f"{path}.end"),
        "xi": np.atleast_1d(np.asarray(_need(spec, "xi", path), dtype=float)),
        "samples": _int(spec.get("samples", 20), f"{path}.samples"),
    }


def _facet_witness(normal, level, dim):
    w = np.zeros(dim)
    w[np.argmax(np.abs(normal))] = level - 1.0
    return w


def build_impulsive(spec: dict, path: str = "impulsive") -> dict:
    gspec = _need(spec, "generator", path)
    name = _need(gspec, "name", f"{path}.generator")
    if name == "constant-matrix":
        A = np.asarray(_need(gspec, "rows", f"{path}.generator"), dtype=float)
        gen = lambda t: A
        dim = A.shape[0]
    elif name == "harmonic":
        base = np.asarray(_need(gspec, "base", f"{path}.generator"), dtype=float)
        amp = np.asarray(_need(gspec, "amplitude", f"{path}.generator"), dtype=float)
        omega = _num(_need(gspec, "omega", f"{path}.generator"), f"{path}.generator.omega")
        gen = lambda t: base + amp * math.sin(omega * t)
        dim = base.shape[0]
    else:
        raise ScenarioError(f"{path}.generator.name", f"unknown generator {name!r}")
    horizon = _need(spec, "horizon", path)
    impulses = []
    for i, imp in enumerate(spec.get("impulses", []) or []):
        ipath = f"{path}.impulses[{i}]"
        tau = _num(_need(imp, "time", ipath), f"{ipath}.time")
        B = np.asarray(_need(imp, "matrix", ipath), dtype=float)
        if B.shape != (dim, dim):
            raise ScenarioError(f"{ipath}.matrix", f"need {dim}x{dim}")
        impulses.append((tau, B))
    sys_ = ImpulsiveSystem(generator=gen, impulses=tuple(impulses),
                           horizon=(float(horizon[0]), float(horizon[1])))
    return {
        "system": sys_,
        "t_prime": _num(_need(spec, "t_prime", path), f"{path}.t_prime"),
        "t": _num(_need(spec, "t", path), f"{path}.t"),
        "tol": _num(spec.get("tol", 1e-10), f"{path}.tol"),
        "threshold": _num(spec.get("threshold", 1e-6), f"{path}.threshold"),
    }


# ---------------------------------------------------------------------------
# game sections


def _build_dynamics(spec: dict, path: str):
    name = _need(spec, "name", path)
    if name == "zero":
        return lambda t, y, c1, u2: np.zeros_like(y)
    if name == "affine":
        a = _num(spec.get("a", 0.0), f"{path}.a")
        b1 = _num(spec.get("b1", 0.0), f"{path}.b1")
        bg = _num(spec.get("b_g", 0.0), f"{path}.b_g")
        b2 = _num(spec.get("b2", 0.0), f"{path}.b2")
        return lambda t, y, c1, u2: a * y + b1 * c1 + bg * u2[0] + b2 * u2[1]
    raise ScenarioError(f"{path}.name", f"unknown dynamics {name!r}")


def _build_running_cost(spec: dict, path: str):
    name = _need(spec, "name", path)
    if name == "zero":
        return lambda t, y, c1, u2: 0.0
    if name == "bilinear":
        q = _num(spec.get("q", 1.0), f"{path}.q")
        r = _num(spec.get("r", 0.0), f"{path}.r")
        return lambda t, y, c1, u2: q * c1 * float(y[0]) + r * u2[1] * float(y[0])
    if name == "quadratic":
        qy = _num(spec.get("qy", 1.0), f"{path}.qy")
        q1 = _num(spec.get("q1", 0.0), f"{path}.q1")
        q2 = _num(spec.get("q2", 0.0), f"{path}.q2")
        return lambda t, y, c1, u2: (qy * float(y[0]) ** 2 + q1 * c1 ** 2
                                     + q2 * u2[1] ** 2)
    raise ScenarioError(f"{path}.name", f"unknown running cost {name!r}")


def _build_terminal(spec: dict, path: str):
    name = _need(spec, "name", path)
    if name == "zero":
        return lambda y: 0.0
    if name == "quadratic":
        w = _num(spec.get("w", 1.0), f"{path}.w")
        return lambda y: w * float(np.sum(np.asarray(y) ** 2))
    if name == "abs":
        return lambda y: float(np.sum(np.abs(np.asarray(y))))
    raise ScenarioError(f"{path}.name", f"unknown terminal cost {name!r}")


def _build_coupling(spec: dict, path: str):
    name = _need(spec, "name", path)
    if name == "identity":
        return lambda t, h: float(np.atleast_1d(h)[0])
    if name == "scaled":
        k = _num(spec.get("k", 1.0), f"{path}.k")
        return lambda t, h: k * float(np.atleast_1d(h)[0])
    raise ScenarioError(f"{path}.name", f"unknown coupling {name!r}")


def build_game(spec: dict, path: str = "game") -> dict:
    from .game import GameSpec, SpatialGrid

    family = build_family(_need(spec, "family", path), f"{path}.family")
    gs = GameSpec(
        dynamics=_build_dynamics(_need(spec, "dynamics", path), f"{path}.dynamics"),
        running_cost=_build_running_cost(_need(spec, "running_cost", path),
                                         f"{path}.running_cost"),
        terminal_cost=_build_terminal(_need(spec, "terminal_cost", path),
                                      f"{path}.terminal_cost"),
        c1_grid=[float(c) for c in _need(spec, "c1_grid", path)],
        c2_grid=[float(c) for c in _need(spec, "c2_grid", path)],
        family=family,
        coupling=_build_coupling(_need(spec, "coupling", path), f"{path}.coupling"),
        horizon=_num(_need(spec, "horizon", path), f"{path}.horizon"),
        time_steps=_int(_need(spec, "time_steps", path), f"{path}.time_steps"),
    )
    gspec = _need(spec, "grid", path)
    grid = SpatialGrid.uniform(_need(gspec, "lo", f"{path}.grid"),
                               _need(gspec, "hi", f"{path}.grid"),
                               _need(gspec, "counts", f"{path}.grid"))
    return {"spec": gs, "grid": grid}

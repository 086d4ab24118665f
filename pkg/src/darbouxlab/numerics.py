"""Floating-point validation: trajectories, conservation drift, Lyapunov exponent.

The exact polynomial right-hand side is compiled once into a flat float64
evaluation function (plain sums of coefficient*power products, so a state
with x_i = 0 yields exactly 0.0 for a component divisible by x_i, keeping
coordinate planes invariant to the last bit).  Integration is a fixed-step
classical RK4 or an embedded Dormand-Prince 5(4) pair with a deterministic
PI step controller:

    factor = 0.9 * err^(-0.7/5) * err_prev^(0.4/5), clipped to [0.2, 10]

with absolute/relative tolerances 1e-10 by default and initial step 1e-3.
All arithmetic is sequential float64, so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .darboux import EvalDomainError
from .exactcore import Poly
from .field import VectorField

SAFETY = 0.9
PI_ALPHA = 0.7 / 5.0   # exponent on the current error
PI_BETA = 0.4 / 5.0    # exponent on the previous error
FACTOR_MIN = 0.2
FACTOR_MAX = 10.0
DT_FLOOR = 1e-13


class NonFiniteStateError(RuntimeError):
    """Integration hit a non-finite state; carries the time of failure."""

    def __init__(self, t: float):
        super().__init__(f"state became non-finite near t = {t:.6g}")
        self.t = t


@dataclass
class Trajectory:
    times: np.ndarray            # strictly increasing, shape (n_points,)
    states: np.ndarray           # shape (n_points, dim)
    variables: tuple[str, ...]
    metadata: dict = dc_field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class DriftReport:
    expression_id: str
    initial_value: float
    max_abs_drift: float
    relative_drift: float

    def record(self) -> dict:
        return {
            "expression": self.expression_id,
            "initial_value": self.initial_value,
            "max_abs_drift": self.max_abs_drift,
            "relative_drift": self.relative_drift,
        }


# -- compilation of the exact RHS into float64 code --------------------------

def _term_source(coeff: Fraction, mono: tuple, names: Sequence[str]) -> str:
    parts = [repr(float(coeff))]
    for name, e in zip(names, mono):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}**{e}")
    return "*".join(parts)


def _poly_source(p: Poly, names: Sequence[str]) -> str:
    if not p.terms:
        return "0.0"
    ordered = sorted(p.terms.items(), key=lambda t: (sum(t[0]), t[0]))
    return " + ".join(_term_source(c, m, names) for m, c in ordered)


def compile_rhs(X: VectorField) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
    """Compile the field into rhs(t, state, out) -> out, pure float64."""
    names = [f"v{i}" for i in range(len(X.variables))]
    lines = ["def _rhs(t, s, out):"]
    for i, name in enumerate(names):
        lines.append(f"    {name} = s[{i}]")
    for i, comp in enumerate(X.components):
        lines.append(f"    out[{i}] = {_poly_source(comp, names)}")
    lines.append("    return out")
    namespace: dict = {}
    exec("\n".join(lines), namespace)
    return namespace["_rhs"]


def jacobian_polys(X: VectorField) -> list[list[Poly]]:
    return [[comp.diff(v) for v in X.variables] for comp in X.components]


def compile_jacobian(X: VectorField) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
    """Compile the analytic Jacobian into jac(t, state, out) -> out (n x n)."""
    names = [f"v{i}" for i in range(len(X.variables))]
    lines = ["def _jac(t, s, out):"]
    for i, name in enumerate(names):
        lines.append(f"    {name} = s[{i}]")
    for i, row in enumerate(jacobian_polys(X)):
        for j, entry in enumerate(row):
            lines.append(f"    out[{i}, {j}] = {_poly_source(entry, names)}")
    lines.append("    return out")
    namespace: dict = {}
    exec("\n".join(lines), namespace)
    return namespace["_jac"]


def jacobian_at(X: VectorField, state: Sequence[float]) -> np.ndarray:
    out = np.empty((len(X.variables), len(X.variables)), dtype=float)
    return compile_jacobian(X)(0.0, np.asarray(state, dtype=float), out)


# -- integrators --------------------------------------------------------------

# Dormand-Prince 5(4) tableau (FSAL: the 7th stage is the next step's first)
_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_DP_ERR = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
           -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


class _DormandPrince:
    """Minimal deterministic embedded 5(4) stepper with a PI controller."""

    def __init__(self, rhs, dim: int, rtol: float, atol: float, dt_init: float):
        self.rhs = rhs
        self.rtol = rtol
        self.atol = atol
        self.dt = dt_init
        self.err_prev = 1.0
        self.k = [np.empty(dim, dtype=float) for _ in range(7)]
        self.work = np.empty(dim, dtype=float)
        self.y_new = np.empty(dim, dtype=float)
        self.have_k1 = False
        self.n_accepted = 0
        self.n_rejected = 0

    def advance(self, t: float, y: np.ndarray, t_stop: float,
                on_accept=None) -> float:
        """Integrate y in place from t to t_stop; returns the final time."""
        with np.errstate(all="ignore"):  # blow-ups handled by rejection
            return self._advance(t, y, t_stop, on_accept)

    def _advance(self, t, y, t_stop, on_accept):
        rhs, k = self.rhs, self.k
        while t < t_stop:
            dt = min(self.dt, t_stop - t)
            if not self.have_k1:
                rhs(t, y, k[0])
                self.have_k1 = True
            for stage in range(6):
                a = _DP_A[stage]
                self.work[:] = y
                for j, coeff in enumerate(a):
                    if coeff != 0.0:
                        self.work += (dt * coeff) * k[j]
                t_stage = t + dt * (_DP_C[stage] if stage < 5 else 1.0)
                rhs(t_stage, self.work, k[stage + 1])
            # 5th-order solution is stage 6's argument (FSAL construction)
            self.y_new[:] = y
            for j, coeff in enumerate(_DP_A[5]):
                if coeff != 0.0:
                    self.y_new += (dt * coeff) * k[j]
            err_vec = np.zeros_like(y)
            for j, coeff in enumerate(_DP_ERR):
                if coeff != 0.0:
                    err_vec += (dt * coeff) * k[j]
            scale = self.atol + self.rtol * np.maximum(np.abs(y),
                                                       np.abs(self.y_new))
            with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
                err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not math.isfinite(err) or not np.isfinite(self.y_new).all():
                self.n_rejected += 1
                self.dt = dt * FACTOR_MIN
                self.have_k1 = False
                if self.dt < DT_FLOOR:
                    raise NonFiniteStateError(t)
                continue
            if err <= 1.0:
                clipped = dt < self.dt
                t = t + dt
                y[:] = self.y_new
                k[0][:] = k[6]          # FSAL
                self.n_accepted += 1
                factor = SAFETY * (err ** -PI_ALPHA if err > 0.0 else
                                   FACTOR_MAX) * (self.err_prev ** PI_BETA)
                self.err_prev = max(err, 1e-4)
                if not clipped:  # a boundary-clipped step says nothing new
                    self.dt = dt * min(FACTOR_MAX, max(FACTOR_MIN, factor))
                if on_accept is not None:
                    on_accept(t, y)
            else:
                self.n_rejected += 1
                factor = SAFETY * err ** -PI_ALPHA
                self.dt = dt * min(1.0, max(FACTOR_MIN, factor))
                self.have_k1 = False
                if self.dt < DT_FLOOR:
                    raise NonFiniteStateError(t)
        return t


def _rk4_advance(rhs, t: float, y: np.ndarray, t_stop: float, dt: float,
                 on_accept=None, counters=None) -> float:
    dim = len(y)
    k1, k2, k3, k4 = (np.empty(dim) for _ in range(4))
    work = np.empty(dim)
    with np.errstate(all="ignore"):
        return _rk4_loop(rhs, t, y, t_stop, dt, on_accept, counters,
                         k1, k2, k3, k4, work)


def _rk4_loop(rhs, t, y, t_stop, dt, on_accept, counters, k1, k2, k3, k4, work):
    while t < t_stop - 1e-15 * max(1.0, abs(t_stop)):
        h = min(dt, t_stop - t)
        rhs(t, y, k1)
        work[:] = y + (h / 2.0) * k1
        rhs(t + h / 2.0, work, k2)
        work[:] = y + (h / 2.0) * k2
        rhs(t + h / 2.0, work, k3)
        work[:] = y + h * k3
        rhs(t + h, work, k4)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if not np.isfinite(y).all():
            raise NonFiniteStateError(t)
        if counters is not None:
            counters[0] += 1
        if on_accept is not None:
            on_accept(t, y)
    return t


def simulate(X: VectorField, x0: Sequence[float], t_end: float,
             method: str = "dp54", rtol: float = 1e-10, atol: float = 1e-10,
             dt: float | None = None, dt_init: float = 1e-3) -> Trajectory:
    """Deterministic trajectory of the field from x0 over [0, t_end]."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    dim = len(X.variables)
    if len(x0) != dim:
        raise ValueError(f"x0 must have {dim} components")
    rhs = compile_rhs(X)
    y = np.array([float(v) for v in x0], dtype=float)
    if not np.isfinite(y).all():
        raise NonFiniteStateError(0.0)
    times = [0.0]
    states = [y.copy()]

    def on_accept(t, state):
        times.append(t)
        states.append(state.copy())

    if method == "rk4":
        if dt is None or dt <= 0:
            raise ValueError("rk4 requires a positive fixed dt")
        counters = [0]
        _rk4_advance(rhs, 0.0, y, t_end, dt, on_accept, counters)
        meta = {"method": "rk4", "dt": dt, "n_accepted": counters[0],
                "n_rejected": 0}
    elif method == "dp54":
        stepper = _DormandPrince(rhs, dim, rtol, atol, dt_init)
        stepper.advance(0.0, y, t_end, on_accept)
        meta = {"method": "dp54", "rtol": rtol, "atol": atol,
                "dt_init": dt_init, "n_accepted": stepper.n_accepted,
                "n_rejected": stepper.n_rejected}
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(np.array(times), np.array(states), X.variables, meta)


# -- conserved-quantity drift -------------------------------------------------

def _as_evaluator(H) -> tuple[str, Callable[[Sequence[float]], float]]:
    if isinstance(H, Poly):
        return str(H), H.evaluate_float
    if hasattr(H, "evaluate_float"):
        name = H.text() if hasattr(H, "text") else type(H).__name__
        return name, H.evaluate_float
    if callable(H):
        return getattr(H, "__name__", "callable"), H
    raise TypeError("H must be a Poly, a Darboux function, or a callable")


def conservation_drift(traj: Trajectory, H, name: str | None = None) -> DriftReport:
    """Max |H(state) - H(state_0)| along the trajectory, absolute and relative."""
    ident, evaluator = _as_evaluator(H)
    if name is not None:
        ident = name
    h0 = evaluator(traj.states[0])
    max_abs = 0.0
    for state in traj.states[1:]:
        value = evaluator(state)
        if not math.isfinite(value):
            raise EvalDomainError(f"{ident} non-finite along the trajectory")
        max_abs = max(max_abs, abs(value - h0))
    relative = max_abs / abs(h0) if h0 != 0.0 else max_abs
    return DriftReport(ident, h0, max_abs, relative)


# -- largest Lyapunov exponent ------------------------------------------------

def lyapunov_max(X: VectorField, x0: Sequence[float], t_end: float,
                 renorm_dt: float, rtol: float = 1e-8, atol: float = 1e-8,
                 dt_init: float = 1e-3) -> float:
    """Average log stretching rate of one tangent vector along the flow.

    The state and a unit tangent vector (evolved by the analytic Jacobian)
    are integrated together; the tangent is renormalized every renorm_dt and
    the accumulated log norm divided by the total time.  Deterministic for
    fixed inputs.
    """
    if renorm_dt <= 0 or t_end <= renorm_dt:
        raise ValueError("need t_end > renorm_dt > 0")
    dim = len(X.variables)
    if len(x0) != dim:
        raise ValueError(f"x0 must have {dim} components")
    rhs = compile_rhs(X)
    jac = compile_jacobian(X)
    jmat = np.empty((dim, dim), dtype=float)

    def rhs_aug(t, s, out):
        rhs(t, s[:dim], out[:dim])
        jac(t, s[:dim], jmat)
        out[dim:] = jmat @ s[dim:]
        return out

    y = np.empty(2 * dim, dtype=float)
    y[:dim] = [float(v) for v in x0]
    y[dim:] = 1.0 / math.sqrt(dim)
    stepper = _DormandPrince(rhs_aug, 2 * dim, rtol, atol, dt_init)
    n_intervals = int(round(t_end / renorm_dt))
    log_sum = 0.0
    t = 0.0
    for i in range(1, n_intervals + 1):
        t = stepper.advance(t, y, i * renorm_dt)
        norm = float(np.linalg.norm(y[dim:]))
        if norm == 0.0 or not math.isfinite(norm):
            raise NonFiniteStateError(t)
        log_sum += math.log(norm)
        y[dim:] /= norm
        stepper.have_k1 = False  # tangent was rescaled: stage cache invalid
    return log_sum / (n_intervals * renorm_dt)


# -- CSV emission --------------------------------------------------------------

def emit_csv(traj: Trajectory, path: str | Path,
             integrals: Sequence[tuple[str, object]] = ()) -> None:
    """Write `t,<vars>[,H...]` rows, float64 with 17 significant digits, LF."""
    evaluators = [( name, _as_evaluator(H)[1]) for name, H in integrals]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = ["t", *traj.variables, *(name for name, _ in evaluators)]
        fh.write(",".join(header) + "\n")
        for t, state in zip(traj.times, traj.states):
            row = [f"{t:.17g}"]
            row.extend(f"{v:.17g}" for v in state)
            row.extend(f"{ev(state):.17g}" for _, ev in evaluators)
            fh.write(",".join(row) + "\n")

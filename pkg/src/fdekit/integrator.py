"""Fixed-step integration of delay models with dense output.

Classical 4-stage Runge-Kutta advances the state; each completed step adds a
cubic segment (endpoint values and derivatives) to the history buffer, which
is what delayed evaluations read.  Delayed arguments that land inside the
step being computed are served by extrapolating the previous segment, except
for an argument at exactly the stage time, which uses the stage value itself
(so zero-delay terms reduce to the classical ODE scheme).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, PreconditionError
from .fading_memory import HistoryBuffer, InitialHistory
from .models import rhs


@dataclass
class IntegratorConfig:
    step: float = 0.01
    horizon: float = 100.0
    tail_tol: float = 1e-8
    positivity_floor: float = 1e-8  # diagnostic threshold, never enforced
    output_stride: int = 1

    def __post_init__(self):
        if not self.step > 0 or not self.horizon > 0:
            raise ValueError("step and horizon must be positive")
        if self.step > self.horizon:
            raise ValueError("step must not exceed the horizon")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.positivity_floor < 0:
            raise ValueError("positivity_floor must be nonnegative")
        if self.output_stride < 1:
            raise ValueError("output_stride must be at least 1")


@dataclass
class StepDiagnostics:
    max_junction_residual: float = 0.0
    min_component: float = np.inf
    positivity_violations: int = 0
    wall_clock_seconds: float = 0.0


@dataclass
class Trajectory:
    """Result of one integration: endpoint samples plus the evaluable past."""

    times: np.ndarray
    values: np.ndarray  # shape (len(times), n)
    buffer: HistoryBuffer
    diagnostics: StepDiagnostics = field(default_factory=StepDiagnostics)

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(self.times[-1])


class _StageView:
    """Read view of a buffer carrying the not-yet-committed stage value.

    Evaluations at exactly ``state_time`` return ``state``; times inside the
    open step extrapolate the last committed segment.
    """

    __slots__ = ("_buffer", "state_time", "state")

    def __init__(self, buffer, state_time, state):
        self._buffer = buffer
        self.state_time = state_time
        self.state = state

    @property
    def n(self):
        return self._buffer.n

    @property
    def step(self):
        return self._buffer.step

    @property
    def frontier(self):
        return self.state_time

    @property
    def initial(self):
        return self._buffer.initial

    def sup_bound(self):
        return max(self._buffer.sup_bound(), float(np.max(np.abs(self.state))))

    def eval_matrix(self, times, state_time=None, state=None):
        return self._buffer.eval_matrix(times, state_time=self.state_time, state=self.state)


def integrate(model, initial, cfg: IntegratorConfig) -> Trajectory:
    """Advance the model from a positive bounded initial history over
    [0, horizon], producing dense output usable for delayed evaluation."""
    if isinstance(initial, (list, tuple, np.ndarray)):
        initial = InitialHistory.constant(initial)
    if initial.n != model.n:
        raise PreconditionError(
            f"initial history has {initial.n} components, model has {model.n}"
        )
    if not initial.is_strictly_positive():
        raise PreconditionError("initial history must be strictly positive")

    t_start = time.perf_counter()
    h = cfg.step
    n_steps = max(1, round(cfg.horizon / h))
    buffer = HistoryBuffer(initial, step=h, capacity=n_steps)
    n = model.n
    tail_tol = cfg.tail_tol

    times = np.arange(n_steps + 1) * h
    values = np.empty((n_steps + 1, n))
    y = initial.value_at(0.0)
    values[0] = y
    diag = StepDiagnostics(min_component=float(np.min(y)))

    def f(t, state):
        view = _StageView(buffer, t, state)
        return rhs(model, t, view, tail_tol, state=state)

    with np.errstate(over="ignore", invalid="ignore"):
        fn = f(0.0, y)
        for k in range(n_steps):
            t = k * h
            k1 = fn
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
            y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y_next)):
                raise BlowUpError(t + h)
            f_next = f(t + h, y_next)
            if not np.all(np.isfinite(f_next)):
                raise BlowUpError(t + h)
            buffer.append_segment(y, k1, y_next, f_next)
            y = y_next
            fn = f_next
            values[k + 1] = y
            m = float(np.min(y))
            if m < diag.min_component:
                diag.min_component = m
            if m < -cfg.positivity_floor:
                diag.positivity_violations += 1

    diag.max_junction_residual = buffer.junction_residual()
    diag.wall_clock_seconds = time.perf_counter() - t_start
    return Trajectory(times=times, values=values, buffer=buffer, diagnostics=diag)


def write_trajectory_csv(traj: Trajectory, path, stride=1):
    """Write `t,x1,...,xn` rows with 17 significant digits, one row per
    output stride."""
    n = traj.n
    header = "t," + ",".join(f"x{i + 1}" for i in range(n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k in range(0, traj.times.size, stride):
            row = [f"{traj.times[k]:.17g}"] + [f"{v:.17g}" for v in traj.values[k]]
            fh.write(",".join(row) + "\n")

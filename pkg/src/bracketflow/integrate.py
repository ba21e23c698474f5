"""Dormand-Prince 5(4) stepping with PI step-size control and Hermite dense output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Dormand-Prince tableau
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
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

SAFETY = 0.9
MIN_FACTOR, MAX_FACTOR = 0.2, 5.0
BETA1, BETA2 = 0.7 / 5, 0.4 / 5


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.1
    min_step: float = 1e-14
    stop_norm: float = 1e6
    first_step: float | None = None
    max_steps: int = 500_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be smaller than max_step")


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    max_error_estimate: float = 0.0


@dataclass
class Solution:
    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    stats: StepStats = field(default_factory=StepStats)
    halt_reason: str = "completed"


def hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def solve(rhs, t0: float, y0, t_end: float, cfg: IntegratorConfig, *, admissible=None,
          on_accept=None, t_eval=None, norm=None, reject_reason="nondegeneracy loss") -> Solution:
    """Integrate ``y' = rhs(y)`` from ``t0`` to ``t_end`` (either direction).

    ``admissible(y)`` returning False rejects a trial step; if the step then
    underflows, integration halts with ``reject_reason``.  ``on_accept(t, y)``
    may return a halt reason or raise.  Every accepted step is recorded and
    steps are clipped to land on each time in ``t_eval``.
    """
    norm = norm or np.linalg.norm
    y = np.array(y0, dtype=float).ravel()
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    stops = sorted({float(t) for t in (t_eval if t_eval is not None else ())
                    if direction * (t - t0) > 0 and direction * (t_end - t) > 0})
    stops = (stops if direction > 0 else stops[::-1]) + [t_end]
    f = np.asarray(rhs(y), dtype=float).ravel()
    times, states, derivs = [t0], [y.copy()], [f.copy()]
    stats = StepStats()
    if span == 0:
        return Solution(np.array(times), np.array(states), np.array(derivs), stats)

    h = cfg.first_step or min(cfg.max_step, 1e-3 * max(span, 1.0), span)
    err_prev = 1.0
    t = t0
    stop_idx = 0
    reason = "completed"
    last_rejected_by_check = False
    while True:
        if stats.accepted + stats.rejected >= cfg.max_steps:
            reason = "max steps"
            break
        target = stops[stop_idx]
        remaining = abs(target - t)
        h = min(h, cfg.max_step)
        clipped = h >= remaining
        step = remaining if clipped else h
        if step < cfg.min_step and not clipped:
            if stats.accepted == 0 and not last_rejected_by_check:
                raise IntegrationError("step size underflow at the first step")
            reason = reject_reason if last_rejected_by_check else "step underflow"
            break
        ks = [f]
        for i in range(1, 7):
            yi = y + direction * step * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(np.asarray(rhs(yi), dtype=float).ravel())
        y_new = y + direction * step * sum(b * k for b, k in zip(_B, ks))
        err_vec = direction * step * sum(e * k for e, k in zip(_E, ks))
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not np.isfinite(err):
            err = np.inf
        if err > 1.0:
            # a non-finite estimate means a stage left the domain of rhs
            stats.rejected += 1
            last_rejected_by_check = not np.isfinite(err)
            factor = max(MIN_FACTOR, SAFETY * err ** (-1 / 5)) if np.isfinite(err) else 0.5
            h = step * factor
            continue
        if admissible is not None and not admissible(y_new):
            stats.rejected += 1
            last_rejected_by_check = True
            h = 0.5 * step
            continue
        last_rejected_by_check = False
        stats.accepted += 1
        stats.max_error_estimate = max(stats.max_error_estimate, err)
        t = target if clipped else t + direction * step
        y = y_new
        f = ks[6]
        times.append(t)
        states.append(y.copy())
        derivs.append(f.copy())
        if clipped:
            stop_idx += 1
        if on_accept is not None:
            halt = on_accept(t, y)
            if halt:
                reason = halt
                break
        if norm(y) > cfg.stop_norm:
            reason = "blow-up"
            break
        if clipped and stop_idx == len(stops):
            break
        err = max(err, 1e-10)
        factor = SAFETY * err ** (-BETA1) * err_prev ** BETA2
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        err_prev = err
        if not clipped or h < remaining:
            h = step * factor
    return Solution(np.array(times), np.array(states), np.array(derivs), stats, reason)

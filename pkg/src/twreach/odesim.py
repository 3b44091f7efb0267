"""Validated numerical simulation.

A simulation is a sequence of time-stamped boxes, each guaranteed (up to the
empirically validated error model) to contain the true trajectory at its
node time, with the hull of consecutive boxes covering the trajectory in
between.  Boxes are numeric Runge-Kutta points inflated by an accumulated
local-error bound; the bound is propagated between steps with the
logarithmic norm of the Jacobian, which keeps enclosures tight on
dissipative dynamics instead of exploding like a plain Lipschitz factor.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, DomainError, ToleranceError
from .geometry import Box, hull_of

# Fehlberg 4(5) tableau: fourth-order propagating solution with an embedded
# fifth-order solution for the local error estimate.
_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)
_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)


def _rkf45_step(f, t, y, h):
    k = []
    for i in range(6):
        yi = y
        for j, a in enumerate(_A[i]):
            yi = yi + (h * a) * k[j]
        k.append(f(yi, t + _C[i] * h))
    y4 = y + h * sum(b * ki for b, ki in zip(_B4, k))
    y5 = y + h * sum(b * ki for b, ki in zip(_B5, k))
    err = float(np.linalg.norm(y5 - y4))
    return y4, err


def _numerical_jacobian(f, x, t, h=1e-7):
    n = x.size
    j = np.empty((n, n))
    fx = f(x, t)
    for i in range(n):
        xp = x.copy()
        xp[i] += h
        j[:, i] = (f(xp, t) - fx) / h
    return j


def _growth_rate(field, y0, y1, t):
    """Local one-sided growth estimate over a step: the 2-norm logarithmic
    norm (largest eigenvalue of the symmetric Jacobian part) at both
    endpoints.  Negative on contracting dynamics, so accumulated error
    bounds shrink instead of compounding."""
    jac = getattr(field, "jacobian", None)
    if jac is None:
        j0 = _numerical_jacobian(field.f, y0, t)
        j1 = _numerical_jacobian(field.f, y1, t)
    else:
        j0 = jac(y0, t)
        j1 = jac(y1, t)
    m0 = float(np.linalg.eigvalsh(0.5 * (j0 + j0.T))[-1])
    m1 = float(np.linalg.eigvalsh(0.5 * (j1 + j1.T))[-1])
    return max(m0, m1)


@dataclass(frozen=True)
class ValidatedTrace:
    """Time-stamped enclosure sequence for one trajectory."""

    boxes: tuple
    times: np.ndarray
    origin: np.ndarray
    tau: float
    eps: float
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        origin = np.asarray(self.origin, dtype=float)
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        if times[0] != 0.0:
            raise DomainError("trace must start at t = 0")
        if abs(times[-1] - self.horizon) > 1e-12:
            raise DomainError("trace must end exactly at the horizon")
        gaps = np.diff(times)
        if np.any(gaps <= 0) or np.any(gaps > self.tau + 1e-12):
            raise DomainError("node spacing must lie in (0, tau]")
        for b in self.boxes:
            if b.diameter > self.eps * (1 + 1e-9):
                raise DomainError("node enclosure exceeds the diameter bound")

    def __len__(self) -> int:
        return len(self.boxes)

    def segment_hull(self, k: int) -> Box:
        """Hull of nodes k-1 and k, covering the trajectory on that interval."""
        return self.boxes[k - 1].hull(self.boxes[k])

    def bounding_box(self) -> Box:
        return hull_of(self.boxes)

    def max_radius(self) -> float:
        return max(0.5 * b.diameter for b in self.boxes)


def simulate(x0, tau: float, eps: float, horizon: float, field,
             min_step: float = 1e-9, safety: float = 2.0) -> ValidatedTrace:
    """Integrate from x0 and return enclosing boxes on a grid of spacing tau.

    Internal steps adapt to the local error; nodes are also placed on the
    field's switch times so discontinuous inputs never straddle a step.
    If a node enclosure cannot meet the diameter bound eps even at the
    minimum internal step, a ToleranceError is raised.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.isfinite(x0).all():
        raise DomainError("non-finite initial state")
    if tau <= 0 or eps <= 0 or horizon <= 0:
        raise DomainError("tau, eps and horizon must be positive")

    switches = [t for t in getattr(field, "switch_times", tuple)()
                if 0.0 < t < horizon]
    targets = sorted(set(np.arange(1, int(np.ceil(horizon / tau)) + 1) * tau)
                     | set(switches) | {horizon})
    targets = [t for t in targets if t <= horizon + 1e-15]

    t = 0.0
    y = x0.copy()
    radius = 0.0
    boxes = [Box.point(x0)]
    times = [0.0]
    h = tau

    for target in targets:
        target = min(target, horizon)
        path_lo = y - radius
        path_hi = y + radius
        while t < target - 1e-15:
            h = min(h, target - t)
            while True:
                y_new, err = _rkf45_step(field.f, t, y, h)
                if np.isfinite(y_new).all():
                    break
                if h <= min_step:
                    raise DivergenceError(f"state diverged near t = {t:.6g}", time=t)
                h *= 0.5
            mu = _growth_rate(field, y, y_new, t)
            radius_new = radius * float(np.exp(mu * h)) + safety * err
            if 2.0 * radius_new > eps and h > min_step:
                h *= 0.5
                continue
            if 2.0 * radius_new > eps:
                raise ToleranceError(
                    f"enclosure diameter {2 * radius_new:.3e} exceeds eps={eps:.3e} "
                    f"at t = {t:.6g} with the minimum step")
            t += h
            y = y_new
            radius = radius_new
            path_lo = np.minimum(path_lo, y - radius)
            path_hi = np.maximum(path_hi, y + radius)
            if err < 1e-4 * eps:
                h = min(2.0 * h, tau)
        t = target
        # Node box, widened so hull(previous node, node) covers the whole
        # internal path between them.
        lo = np.minimum(y - radius, path_lo)
        hi = np.maximum(y + radius, path_hi)
        prev = boxes[-1]
        lo = np.where(prev.lo <= path_lo, y - radius, lo)
        hi = np.where(prev.hi >= path_hi, y + radius, hi)
        box = Box(lo, hi)
        if box.diameter > eps:
            raise ToleranceError(
                f"node enclosure diameter {box.diameter:.3e} exceeds eps={eps:.3e} "
                f"at t = {t:.6g}")
        boxes.append(box)
        times.append(t)

    return ValidatedTrace(boxes=tuple(boxes), times=np.array(times),
                          origin=x0, tau=tau, eps=eps, horizon=horizon)


def dense_point(trace: ValidatedTrace, t: float) -> Box:
    """Guaranteed enclosure of the trajectory at any time inside the horizon."""
    if t < 0.0 or t > trace.horizon + 1e-12:
        raise DomainError(f"time {t} outside [0, {trace.horizon}]")
    times = trace.times
    k = bisect_left(times, t)
    if k < len(times) and times[k] == t:
        return trace.boxes[k]
    if k == 0:
        return trace.boxes[0]
    if k >= len(times):
        return trace.boxes[-1]
    return trace.boxes[k - 1].hull(trace.boxes[k])


def trace_csv_rows(trace: ValidatedTrace):
    """Rows of (t, lo_0, hi_0, ..., lo_{n-1}, hi_{n-1})."""
    for t, b in zip(trace.times, trace.boxes):
        row = [float(t)]
        for lo, hi in zip(b.lo, b.hi):
            row.extend((float(lo), float(hi)))
        yield row

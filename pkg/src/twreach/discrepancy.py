"""Trajectory-local discrepancy bounds.

For each step of a validated simulation we enclose the one-step reach set
of the surrounding ball, bound the largest eigenvalue of the symmetric part
of the Jacobian over that enclosure, and chain the resulting per-step
exponential rates into a piecewise bound on how far neighboring
trajectories can drift from the simulated one.

Swept conductance parameters ride along as state variables with zero
dynamics.  Their Jacobian rows are zero, so instead of folding them into
the eigenvalue bound (which would freeze the bound at the parameter
spread), the coupling column is treated as a bounded constant input to the
voltage block: the voltage deviation r obeys r' <= lambda r + gain * |dp|,
which integrates to the same piecewise-exponential form plus an input
response term.  Both terms vanish as the initial separations vanish.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalError
from .geometry import Box, interval_mag, rowsum_norm
from .odesim import ValidatedTrace


# --------------------------------------------------------------------------
# small dense symmetric eigensolver

def jacobi_max_eig(a, tol: float = 1e-12, max_sweeps: int = 60) -> float:
    """Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.

    Deterministic and dependency-free; plenty for the 9 to 12 dimensional
    matrices this engine produces.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(a * a) - np.sum(np.diag(a) ** 2))))
        if off <= tol * scale:
            return float(np.max(np.diag(a)))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise NumericalError("Jacobi eigenvalue iteration failed to converge")


# --------------------------------------------------------------------------
# interval Jacobian helpers

def _interval_jacobian(field, region: Box):
    ij = getattr(field, "interval_jacobian", None)
    if ij is None:
        raise ConfigurationError(
            "field does not expose an interval Jacobian; discrepancy bounds "
            "need a rigorous entrywise enclosure")
    jlo, jhi = ij(region)
    jlo = np.asarray(jlo, dtype=float)
    jhi = np.asarray(jhi, dtype=float)
    if not (np.isfinite(jlo).all() and np.isfinite(jhi).all()):
        raise DomainError("interval Jacobian is unbounded over the region")
    return jlo, jhi


def lipschitz_estimate(region: Box, field) -> float:
    """Upper bound on the Jacobian's induced infinity norm over the region."""
    jlo, jhi = _interval_jacobian(field, region)
    return rowsum_norm(interval_mag(jlo, jhi))


def symmetric_eig_upper(region: Box, field) -> float:
    """Upper bound on the largest eigenvalue of the symmetric Jacobian part
    anywhere in the region: eigenvalue at the center plus a row-sum bound on
    the symmetric interval perturbation."""
    jlo, jhi = _interval_jacobian(field, region)
    jc = field.jacobian(region.center)
    return _eig_upper_from(jlo, jhi, jc)


def _eig_upper_from(jlo, jhi, jc) -> float:
    err = np.maximum(np.maximum(jhi - jc, jc - jlo), 0.0)
    lam = jacobi_max_eig(0.5 * (jc + jc.T))
    return lam + rowsum_norm(0.5 * (err + err.T))


@dataclass(frozen=True)
class CoarseEnclosure:
    """One-step over-approximation of the reach set around a trace step."""

    region: Box
    lipschitz: float


def coarse_reach(trace: ValidatedTrace, k: int, delta: float, lipschitz: float) -> CoarseEnclosure:
    """Hull of step k bloated by the worst-case Lipschitz growth of a
    delta-ball over that step."""
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    dt = float(trace.times[k] - trace.times[k - 1])
    grow = delta * math.exp(lipschitz * dt)
    if not np.isfinite(grow):
        raise DomainError("coarse enclosure overflow: lipschitz * dt too large")
    return CoarseEnclosure(trace.segment_hull(k).bloat(grow), lipschitz)


# --------------------------------------------------------------------------
# the discrepancy bound proper

def _phi(rate: float, dt: float) -> float:
    """Integral of e^{rate * s} over [0, dt], stable near rate = 0."""
    x = rate * dt
    if abs(x) < 1e-12:
        return dt * (1.0 + 0.5 * x)
    return float(np.expm1(x) / rate)


@dataclass(frozen=True)
class DiscrepancyBound:
    """Piecewise-exponential bound on trajectory divergence near one trace.

    `amp[k]` is the accumulated product of the per-piece rate exponentials at
    node k; `inp[k]` is the accumulated input response per unit parameter
    distance.  The voltage-block distance bound at node k for initial
    separations (dv, dp) in max-norm is

        amp[k] * sqrt(n_state) * dv  +  inp[k] * sqrt(n_param) * dp

    and the parameter block never moves, so the full-state bound is the max
    of that expression with dp.
    """

    pieces: tuple                # (t_lo, t_hi, rate, gain) per trace step
    initial_radius: float
    v_radius: float
    p_radius: float
    n_state: int
    n_param: int
    valid_region: Box
    amp: np.ndarray
    inp: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        for name in ("amp", "inp", "times"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def _coeffs(self, t: float) -> tuple:
        if t < -1e-12 or t > self.times[-1] + 1e-9:
            raise DomainError(f"time {t} outside the bound's horizon")
        k = bisect_right(self.times, t) - 1
        k = min(max(k, 0), len(self.times) - 2)
        t_lo, _, rate, gain = self.pieces[k]
        dt = max(0.0, t - t_lo)
        grow = math.exp(min(rate * dt, 700.0))
        amp = self.amp[k] * grow
        inp = self.inp[k] * grow + gain * _phi(rate, dt)
        return amp, inp

    def beta_pair(self, sep_v: float, sep_p: float, t: float) -> float:
        """Distance bound at time t for a pair with the given initial
        max-norm separations in the voltage and parameter blocks."""
        amp, inp = self._coeffs(t)
        r = amp * math.sqrt(self.n_state) * sep_v
        if self.n_param:
            r += inp * math.sqrt(self.n_param) * sep_p
            return max(r, sep_p)
        return r

    def beta(self, t: float) -> float:
        """Distance bound at time t for the radii the bound was built with."""
        return self.beta_pair(self.v_radius, self.p_radius, t)

    def node_v_radius(self, k: int) -> float:
        return float(self.amp[k] * math.sqrt(self.n_state) * self.v_radius
                     + self.inp[k] * math.sqrt(self.n_param) * self.p_radius)

    def segment_v_bloat(self, k: int) -> float:
        """Max of the voltage deviation bound over piece k (monotone within a
        piece, so the endpoints dominate)."""
        return max(self.node_v_radius(k - 1), self.node_v_radius(k))


def local_discrepancy(trace: ValidatedTrace, delta: float, field,
                      v_radius: float | None = None, passes: int = 1,
                      rate_bound: str = "eigen") -> DiscrepancyBound:
    """Build the discrepancy bound along a trace for a ball of radius delta.

    For augmented systems the ball width sits on the constant parameter
    dimensions; `v_radius` overrides the voltage-block width (the sweep
    driver passes 0 there because its initial set is a single voltage
    state).  `rate_bound="lipschitz"` uses the coarse norm bound instead of
    the symmetric-eigenvalue bound, for comparison.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    if rate_bound not in ("eigen", "lipschitz"):
        raise ConfigurationError(f"unknown rate_bound {rate_bound!r}")
    const = tuple(getattr(field, "constant_dims", ()) or ())
    dim = trace.origin.size
    state_idx = np.array([i for i in range(dim) if i not in const], dtype=int)
    param_idx = np.array(sorted(const), dtype=int)
    n_v, n_p = state_idx.size, param_idx.size
    d_v = delta if v_radius is None else float(v_radius)
    d_p = delta if n_p else 0.0
    r2 = math.sqrt(n_v) * d_v        # 2-norm radius of the voltage block
    p2 = math.sqrt(n_p) * d_p        # 2-norm bound on the parameter spread

    def bloat_vec(margin):
        out = np.zeros(dim)
        out[state_idx] = margin
        if n_p:
            out[param_idx] = d_p
        return out

    # global seed for the per-step fixed point
    bbox = trace.bounding_box().bloat(bloat_vec(2.0 * (r2 + p2) + 1e-9))
    lip_prev = lipschitz_estimate(bbox, field)
    gain_prev = _gain_bound(field, bbox, state_idx, param_idx) if n_p else 0.0

    times = trace.times
    amp = [1.0]
    inp = [0.0]
    pieces = []
    region = None
    r_prev = r2
    for k in range(1, len(trace)):
        dt = float(times[k] - times[k - 1])
        hull = trace.segment_hull(k)
        margin = (r_prev + p2 * gain_prev * dt) * math.exp(min(lip_prev * dt, 700.0))
        for attempt in range(6):
            enc = hull.bloat(bloat_vec(margin))
            lip = lipschitz_estimate(enc, field)
            for _ in range(max(0, passes - 1)):
                enc = hull.bloat(bloat_vec((r_prev + p2 * gain_prev * dt)
                                           * math.exp(min(lip * dt, 700.0))))
                lip = lipschitz_estimate(enc, field)
            rate, gain = _step_bounds(field, enc, state_idx, param_idx, rate_bound)
            grow = math.exp(min(rate * dt, 700.0))
            r_end = r_prev * grow + (p2 * gain * _phi(rate, dt) if n_p else 0.0)
            need = max(r_prev, r_end)
            if need <= margin * (1.0 + 1e-9) or attempt == 5:
                break
            margin = 1.5 * need
        amp.append(amp[-1] * grow)
        inp.append(inp[-1] * grow + (gain * _phi(rate, dt) if n_p else 0.0))
        pieces.append((float(times[k - 1]), float(times[k]), rate, gain))
        region = enc if region is None else region.hull(enc)
        r_prev = r_end
        lip_prev, gain_prev = lip, gain

    return DiscrepancyBound(
        pieces=tuple(pieces), initial_radius=delta, v_radius=d_v, p_radius=d_p,
        n_state=n_v, n_param=n_p, valid_region=region,
        amp=np.array(amp), inp=np.array(inp), times=times.copy())


def _step_bounds(field, enc: Box, state_idx, param_idx, rate_bound: str) -> tuple:
    """Per-step rate (voltage block) and parameter-coupling gain over an
    enclosure."""
    jlo, jhi = _interval_jacobian(field, enc)
    vv = np.ix_(state_idx, state_idx)
    if rate_bound == "lipschitz":
        rate = rowsum_norm(interval_mag(jlo[vv], jhi[vv]))
    else:
        jc = field.jacobian(enc.center)
        rate = _eig_upper_from(jlo[vv], jhi[vv], np.asarray(jc)[vv])
    gain = 0.0
    if param_idx.size:
        mag = interval_mag(jlo[np.ix_(state_idx, param_idx)],
                           jhi[np.ix_(state_idx, param_idx)])
        gain = float(np.sqrt(np.sum(mag * mag)))   # Frobenius bounds the 2-norm
    return rate, gain


def _gain_bound(field, region: Box, state_idx, param_idx) -> float:
    jlo, jhi = _interval_jacobian(field, region)
    mag = interval_mag(jlo[np.ix_(state_idx, param_idx)],
                       jhi[np.ix_(state_idx, param_idx)])
    return float(np.sqrt(np.sum(mag * mag)))

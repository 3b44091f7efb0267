"""Tap-withdrawal circuit model.

Nine membrane potentials coupled by counted gap junctions and chemical
synapses, normalized so every coefficient is a rate in 1/s and every state
is a voltage.  This module owns the wiring and constants, the vector field
and its Jacobian, the resting-potential solve, ablation, the augmentation
of the state with swept conductance parameters, and the direct-simulation
behavior readout used as an oracle by the verification layers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalError
from .geometry import Box, interval_mul

log = logging.getLogger(__name__)

NEURON_NAMES = ("PLM", "PVD", "ALM", "AVM", "AVD", "DVA", "PVC", "AVA", "AVB")
SENSORY_NAMES = frozenset({"PLM", "PVD", "ALM", "AVM"})
READOUT_NAMES = ("AVA", "AVB")
POLARITIES = ("excitatory", "inhibitory", "unknown")

# Steepness of the synaptic activation: the gate rises from 10% to 90% as the
# pre-synaptic potential crosses one v_range centered on its rest value.
SIGMOID_GAIN = 4.3944

# Conductance sweeps use p = PARAM_SCALE / g so the interesting range lands
# on [0.01, 1].
PARAM_SCALE = 10.0


@dataclass(frozen=True)
class NeuronId:
    name: str
    index: int


@dataclass(frozen=True)
class Connectome:
    """Wiring: symmetric gap-junction counts, directed synapse counts
    (row = post-synaptic target), and per-neuron polarity tags."""

    names: tuple
    n_gap: np.ndarray
    n_syn: np.ndarray
    polarity: tuple

    def __post_init__(self):
        names = tuple(self.names)
        n = len(names)
        if len(set(names)) != n:
            raise ConfigurationError("duplicate neuron names")
        n_gap = np.asarray(self.n_gap, dtype=int)
        n_syn = np.asarray(self.n_syn, dtype=int)
        for label, m in (("n_gap", n_gap), ("n_syn", n_syn)):
            if m.shape != (n, n):
                raise ConfigurationError(f"{label} must be {n}x{n}, got {m.shape}")
            if np.any(m < 0):
                raise ConfigurationError(f"{label} has negative counts")
            if np.any(np.diag(m) != 0):
                raise ConfigurationError(f"{label} must have a zero diagonal")
        if np.any(n_gap != n_gap.T):
            raise ConfigurationError("gap-junction counts must be symmetric")
        polarity = tuple(self.polarity)
        if len(polarity) != n:
            raise ConfigurationError("polarity list length mismatch")
        for p in polarity:
            if p not in POLARITIES:
                raise ConfigurationError(f"unknown polarity {p!r}")
        n_gap.setflags(write=False)
        n_syn.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "n_gap", n_gap)
        object.__setattr__(self, "n_syn", n_syn)
        object.__setattr__(self, "polarity", polarity)

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def gap_degree(self) -> np.ndarray:
        return self.n_gap.sum(axis=1)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigurationError(f"no neuron named {name!r}") from None

    def neuron(self, name: str) -> NeuronId:
        return NeuronId(name, self.index(name))


@dataclass(frozen=True)
class StimulusSchedule:
    """Rectangular current pulses, stored as (neuron index, start, end,
    amplitude) with amplitudes already normalized to V/s."""

    pulses: tuple

    def __post_init__(self):
        pulses = tuple((int(i), float(a), float(b), float(amp))
                       for i, a, b, amp in self.pulses)
        per_neuron = {}
        for i, a, b, amp in pulses:
            if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(amp)):
                raise ConfigurationError("stimulus entries must be finite")
            if b <= a:
                raise ConfigurationError(f"stimulus window [{a}, {b}] is empty")
            per_neuron.setdefault(i, []).append((a, b))
        for i, wins in per_neuron.items():
            wins.sort()
            for (a1, b1), (a2, b2) in zip(wins, wins[1:]):
                if a2 < b1:
                    raise ConfigurationError(f"overlapping stimulus windows on neuron {i}")
        object.__setattr__(self, "pulses", pulses)

    @classmethod
    def empty(cls) -> "StimulusSchedule":
        return cls(())

    def current(self, t: float, size: int) -> np.ndarray:
        out = np.zeros(size)
        for i, a, b, amp in self.pulses:
            if a <= t < b:
                out[i] += amp
        return out

    def switch_times(self) -> tuple:
        ts = sorted({t for _, a, b, _ in self.pulses for t in (a, b)})
        return tuple(ts)

    def onset(self):
        return min((a for _, a, _, _ in self.pulses), default=None)

    def restricted_to(self, keep: list) -> "StimulusSchedule":
        remap = {old: new for new, old in enumerate(keep)}
        return StimulusSchedule(tuple((remap[i], a, b, amp)
                                      for i, a, b, amp in self.pulses if i in remap))


@dataclass(frozen=True)
class CircuitParams:
    """Per-neuron normalized constants of the membrane dynamics."""

    g_leak: np.ndarray   # 1/(R_m C_m), 1/s
    g_gap: np.ndarray    # gap conductance over capacitance, 1/s
    g_syn: np.ndarray    # peak synaptic conductance over capacitance, 1/s
    v_leak: np.ndarray   # leakage potential, V
    e_rev: np.ndarray    # synaptic reversal potential of each pre-synaptic neuron, V
    v_range: float       # pre-synaptic activation range, V
    v_eq: np.ndarray | None  # sigmoid centers = resting potentials, V
    stim: StimulusSchedule

    def __post_init__(self):
        arrays = {}
        for name in ("g_leak", "g_gap", "g_syn", "v_leak", "e_rev"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1 or not np.isfinite(a).all():
                raise ConfigurationError(f"{name} must be a finite vector")
            a.setflags(write=False)
            arrays[name] = a
        n = arrays["g_leak"].size
        for name, a in arrays.items():
            if a.size != n:
                raise ConfigurationError("parameter vector lengths disagree")
        for name in ("g_leak", "g_gap", "g_syn"):
            if np.any(arrays[name] <= 0):
                raise ConfigurationError(f"{name} must be strictly positive")
        if not self.v_range > 0:
            raise ConfigurationError("v_range must be positive")
        if self.v_eq is not None:
            v_eq = np.asarray(self.v_eq, dtype=float)
            if v_eq.shape != (n,) or not np.isfinite(v_eq).all():
                raise ConfigurationError("v_eq must be a finite vector of circuit size")
            v_eq.setflags(write=False)
            object.__setattr__(self, "v_eq", v_eq)
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def size(self) -> int:
        return self.g_leak.size


def polarity_reversal(polarity, e_exc: float, e_inh: float,
                      unknown_as: str = "excitatory") -> np.ndarray:
    """Map polarity tags to reversal potentials; unknown tags take a default
    class that is logged rather than silently assumed."""
    if e_exc <= e_inh:
        raise ConfigurationError("excitatory reversal must exceed inhibitory reversal")
    if unknown_as not in ("excitatory", "inhibitory"):
        raise ConfigurationError(f"unknown_as must name a polarity class, got {unknown_as!r}")
    out = np.empty(len(polarity))
    for i, p in enumerate(polarity):
        if p == "unknown":
            log.info("neuron %d has unknown polarity; treating as %s", i, unknown_as)
            p = unknown_as
        out[i] = e_exc if p == "excitatory" else e_inh
    return out


# --------------------------------------------------------------------------
# dynamics

def synapse_gate(v, centers, v_range):
    """Logistic activation of each pre-synaptic terminal, in (0, 1).

    Exactly 1/2 when the pre-synaptic potential sits at its rest value.
    """
    z = SIGMOID_GAIN * (np.asarray(v, dtype=float) - centers) / v_range
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _gate_derivative(gate, v_range):
    return (SIGMOID_GAIN / v_range) * gate * (1.0 - gate)


def _require_v_eq(params: CircuitParams):
    if params.v_eq is None:
        raise ConfigurationError("equilibrium potentials not installed; "
                                 "call with_equilibrium() first")


def _check_state(v, n):
    if v.shape[-1] != n:
        raise ConfigurationError(f"state has {v.shape[-1]} entries, circuit has {n}")
    if not np.isfinite(v).all():
        raise DomainError("non-finite state")


def _leak_syn_stim(v, params: CircuitParams, conn: Connectome, t: float):
    """Everything except the gap-junction term; batched over leading axes."""
    gate = synapse_gate(v, params.v_eq, params.v_range)
    leak = params.g_leak * (params.v_leak - v)
    syn = params.g_syn * ((gate * params.e_rev) @ conn.n_syn.T - v * (gate @ conn.n_syn.T))
    return leak + syn + params.stim.current(t, conn.size)


def vector_field(v, params: CircuitParams, conn: Connectome, t: float = 0.0) -> np.ndarray:
    """Membrane dynamics dV/dt in V/s.  Accepts a batch with shape (..., N)."""
    v = np.asarray(v, dtype=float)
    _check_state(v, conn.size)
    _require_v_eq(params)
    gap = params.g_gap * (v @ conn.n_gap.T - conn.gap_degree * v)
    return _leak_syn_stim(v, params, conn, t) + gap


def jacobian(v, params: CircuitParams, conn: Connectome) -> np.ndarray:
    """Partial derivatives of the dynamics with respect to the potentials."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ConfigurationError("jacobian takes a single state vector")
    _check_state(v, conn.size)
    _require_v_eq(params)
    gate = synapse_gate(v, params.v_eq, params.v_range)
    dgate = _gate_derivative(gate, params.v_range)
    j = (params.g_gap[:, None] * conn.n_gap
         + params.g_syn[:, None] * conn.n_syn
         * (params.e_rev[None, :] - v[:, None]) * dgate[None, :])
    diag = -(params.g_leak + params.g_gap * conn.gap_degree
             + params.g_syn * (conn.n_syn @ gate))
    j[np.diag_indices_from(j)] = diag
    return j


# --------------------------------------------------------------------------
# resting potentials

def _equilibrium_system(gap_rates, params: CircuitParams, conn: Connectome):
    """Linear system for the rest state with every gate held at 1/2.

    `gap_rates[i, j]` is the effective rate of junction (i, j) as seen from
    row i, already multiplied by the connection count.
    """
    g_leak = params.g_leak
    half_syn = 0.5 * params.g_syn
    a = -gap_rates / g_leak[:, None]
    diag = 1.0 + (gap_rates.sum(axis=1) + half_syn * conn.n_syn.sum(axis=1)) / g_leak
    a[np.diag_indices_from(a)] = diag
    b = params.v_leak + half_syn * (conn.n_syn @ params.e_rev) / g_leak
    return a, b


def _solve_equilibrium(gap_rates, params, conn) -> np.ndarray:
    a, b = _equilibrium_system(gap_rates, params, conn)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"rest-state system ill-conditioned (cond={cond:.3e})")
    return np.linalg.solve(a, b)


def equilibrium(params: CircuitParams, conn: Connectome) -> np.ndarray:
    """Resting potentials: the zero of the dynamics with gates at half
    activation and no stimulus."""
    gap_rates = params.g_gap[:, None] * conn.n_gap
    return _solve_equilibrium(gap_rates, params, conn)


def with_equilibrium(params: CircuitParams, conn: Connectome) -> CircuitParams:
    """Solve for the rest state and install it as the sigmoid centers, making
    it an exact fixed point of the unstimulated dynamics."""
    return replace(params, v_eq=equilibrium(params, conn))


# --------------------------------------------------------------------------
# ablation and parameter augmentation

def ablate(conn: Connectome, params: CircuitParams, dead) -> tuple:
    """Remove neurons outright: rows/columns drop from both count matrices and
    from every per-neuron vector.  The rest state must be recomputed on the
    reduced system by the caller (see with_equilibrium)."""
    dead = frozenset(dead)
    unknown = dead - set(conn.names)
    if unknown:
        raise ConfigurationError(f"cannot ablate unknown neurons {sorted(unknown)}")
    banned = dead & set(READOUT_NAMES)
    if banned:
        raise ConfigurationError(f"refusing to ablate readout neurons {sorted(banned)}")
    if not dead:
        return conn, params
    keep = [i for i, name in enumerate(conn.names) if name not in dead]
    idx = np.asarray(keep)
    new_conn = Connectome(
        names=tuple(conn.names[i] for i in keep),
        n_gap=conn.n_gap[np.ix_(idx, idx)],
        n_syn=conn.n_syn[np.ix_(idx, idx)],
        polarity=tuple(conn.polarity[i] for i in keep),
    )
    new_params = CircuitParams(
        g_leak=params.g_leak[idx], g_gap=params.g_gap[idx], g_syn=params.g_syn[idx],
        v_leak=params.v_leak[idx], e_rev=params.e_rev[idx], v_range=params.v_range,
        v_eq=None if params.v_eq is None else params.v_eq[idx],
        stim=params.stim.restricted_to(keep),
    )
    return new_conn, new_params


@dataclass(frozen=True)
class ParamAxis:
    """One swept conductance: the gap junctions owned by a sensory neuron,
    reparameterized as p = 10/g so the range of interest is [0.01, 1]."""

    neuron: str
    lo: float = 0.01
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"axis range [{self.lo}, {self.hi}] is empty")
        if self.lo <= 0:
            raise ConfigurationError("axis range must be positive (p = 10/g)")


class TapWithdrawalField:
    """Vector-field handle over the plain circuit state."""

    def __init__(self, conn: Connectome, params: CircuitParams):
        _require_v_eq(params)
        self.conn = conn
        self.params = params
        self.constant_dims = ()

    @property
    def dim(self) -> int:
        return self.conn.size

    def f(self, x, t=0.0):
        return vector_field(x, self.params, self.conn, t)

    def jacobian(self, x, t=0.0):
        return jacobian(x, self.params, self.conn)

    def interval_jacobian(self, box: Box):
        jlo, jhi = _interval_jacobian_vv(box.lo, box.hi,
                                         self.params.g_gap[:, None] * self.conn.n_gap,
                                         self.params, self.conn)
        return jlo, jhi

    def switch_times(self):
        return self.params.stim.switch_times()


def _interval_gate(vlo, vhi, params):
    glo = synapse_gate(vlo, params.v_eq, params.v_range)
    ghi = synapse_gate(vhi, params.v_eq, params.v_range)
    return glo, ghi


def _interval_gate_derivative(vlo, vhi, params):
    # The derivative peaks where v crosses the center; split on that.
    glo, ghi = _interval_gate(vlo, vhi, params)
    dlo_end = _gate_derivative(glo, params.v_range)
    dhi_end = _gate_derivative(ghi, params.v_range)
    lo = np.minimum(dlo_end, dhi_end)
    hi = np.maximum(dlo_end, dhi_end)
    peak = SIGMOID_GAIN / (4.0 * params.v_range)
    covers = (vlo <= params.v_eq) & (params.v_eq <= vhi)
    hi = np.where(covers, peak, hi)
    return lo, hi


def _interval_jacobian_vv(vlo, vhi, gap_rates_lo, params, conn, gap_rates_hi=None):
    """Entrywise interval enclosure of the Jacobian over a state box.

    `gap_rates` may itself be an interval matrix (for swept junctions)."""
    if gap_rates_hi is None:
        gap_rates_hi = gap_rates_lo
    glo, ghi = _interval_gate(vlo, vhi, params)
    dglo, dghi = _interval_gate_derivative(vlo, vhi, params)
    # off-diagonal synaptic part: g_syn_i n_ij (e_j - v_i) * gate'(v_j)
    drive_lo = params.e_rev[None, :] - vhi[:, None]
    drive_hi = params.e_rev[None, :] - vlo[:, None]
    prod_lo, prod_hi = interval_mul(drive_lo, drive_hi,
                                    np.broadcast_to(dglo[None, :], drive_lo.shape),
                                    np.broadcast_to(dghi[None, :], drive_lo.shape))
    syn_w = params.g_syn[:, None] * conn.n_syn
    jlo = gap_rates_lo + syn_w * prod_lo
    jhi = gap_rates_hi + syn_w * prod_hi
    # diagonal: -g_leak - sum of gap rates - g_syn * sum n_ij gate(v_j)
    syn_open_lo = conn.n_syn @ glo
    syn_open_hi = conn.n_syn @ ghi
    dlo = -(params.g_leak + gap_rates_hi.sum(axis=1) + params.g_syn * syn_open_hi)
    dhi = -(params.g_leak + gap_rates_lo.sum(axis=1) + params.g_syn * syn_open_lo)
    jlo[np.diag_indices_from(jlo)] = dlo
    jhi[np.diag_indices_from(jhi)] = dhi
    return jlo, jhi


class AugmentedField:
    """Circuit extended with constant-dynamics conductance parameters.

    Each axis owns every gap junction incident to its neuron; their
    conductance is read as 10/p wherever they appear, i.e. in the owner's
    row and in each neighbor's row (scaled by the rows' normalization when
    capacitances differ).  A junction cannot be owned by two axes.
    """

    def __init__(self, conn: Connectome, params: CircuitParams, axes):
        _require_v_eq(params)
        axes = tuple(axes)
        if not 1 <= len(axes) <= 3:
            raise ConfigurationError("augmentation takes between one and three axes")
        names = [ax.neuron for ax in axes]
        if len(set(names)) != len(names):
            raise ConfigurationError("axes must reference distinct neurons")
        for name in names:
            if name not in SENSORY_NAMES:
                raise ConfigurationError(f"{name} is not a sensory neuron")
            if name not in conn.names:
                raise ConfigurationError(f"axis neuron {name} is not in the circuit "
                                         "(ablated?)")
        self.conn = conn
        self.params = params
        self.axes = axes
        n = conn.size
        owners = np.full((n, n), -1, dtype=int)
        weights = []
        for k, ax in enumerate(axes):
            a = conn.index(ax.neuron)
            if conn.n_gap[a].sum() == 0:
                raise ConfigurationError(f"{ax.neuron} has no gap junctions to sweep")
            incident = conn.n_gap[a] > 0
            if np.any(owners[a, incident] >= 0):
                raise ConfigurationError("a gap junction is claimed by two axes")
            owners[a, incident] = k
            owners[incident, a] = k
            # row-wise weight: count times the capacitance ratio C_axis/C_row
            w = np.zeros((n, n))
            w[a, :] = conn.n_gap[a, :]
            w[:, a] = conn.n_gap[:, a] * (params.g_gap / params.g_gap[a])
            weights.append(w)
        self._axis_weights = tuple(weights)
        base = params.g_gap[:, None] * conn.n_gap.astype(float)
        base[owners >= 0] = 0.0
        self._base_gap = base
        self.constant_dims = tuple(range(n, n + len(axes)))

    @property
    def dim(self) -> int:
        return self.conn.size + len(self.axes)

    def split(self, x):
        n = self.conn.size
        return x[..., :n], x[..., n:]

    def _check_p(self, p):
        if np.any(p <= 0):
            raise DomainError("swept parameter must stay positive")

    def f(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            raise DomainError("non-finite state")
        v, p = self.split(x)
        self._check_p(p)
        dv = _leak_syn_stim(v, self.params, self.conn, t)
        dv = dv + v @ self._base_gap.T - v * self._base_gap.sum(axis=1)
        for k, w in enumerate(self._axis_weights):
            rate = PARAM_SCALE / p[..., k : k + 1]
            dv = dv + rate * (v @ w.T - v * w.sum(axis=1))
        return np.concatenate([dv, np.zeros_like(p)], axis=-1)

    def _gap_rates(self, p):
        rates = self._base_gap.copy()
        for k, w in enumerate(self._axis_weights):
            rates += (PARAM_SCALE / p[k]) * w
        return rates

    def jacobian(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        v, p = self.split(x)
        self._check_p(p)
        n, m = self.conn.size, len(self.axes)
        params, conn = self.params, self.conn
        gate = synapse_gate(v, params.v_eq, params.v_range)
        dgate = _gate_derivative(gate, params.v_range)
        rates = self._gap_rates(p)
        jvv = (rates + params.g_syn[:, None] * conn.n_syn
               * (params.e_rev[None, :] - v[:, None]) * dgate[None, :])
        diag = -(params.g_leak + rates.sum(axis=1) + params.g_syn * (conn.n_syn @ gate))
        jvv[np.diag_indices_from(jvv)] = diag
        j = np.zeros((n + m, n + m))
        j[:n, :n] = jvv
        for k, w in enumerate(self._axis_weights):
            j[:n, n + k] = -(PARAM_SCALE / p[k] ** 2) * (w @ v - w.sum(axis=1) * v)
        return j

    def interval_jacobian(self, box: Box):
        n, m = self.conn.size, len(self.axes)
        vlo, vhi = box.lo[:n], box.hi[:n]
        plo, phi = box.lo[n:], box.hi[n:]
        self._check_p(plo)
        gap_lo = self._base_gap.copy()
        gap_hi = self._base_gap.copy()
        for k, w in enumerate(self._axis_weights):
            gap_lo += (PARAM_SCALE / phi[k]) * w
            gap_hi += (PARAM_SCALE / plo[k]) * w
        jvv_lo, jvv_hi = _interval_jacobian_vv(vlo, vhi, gap_lo, self.params,
                                               self.conn, gap_rates_hi=gap_hi)
        jlo = np.zeros((n + m, n + m))
        jhi = np.zeros((n + m, n + m))
        jlo[:n, :n] = jvv_lo
        jhi[:n, :n] = jvv_hi
        for k, w in enumerate(self._axis_weights):
            dlo = w @ vlo - w.sum(axis=1) * vhi   # interval of sum_j w_ij (v_j - v_i)
            dhi = w @ vhi - w.sum(axis=1) * vlo
            slo = np.full(n, PARAM_SCALE / phi[k] ** 2)
            shi = np.full(n, PARAM_SCALE / plo[k] ** 2)
            plo_col, phi_col = interval_mul(dlo, dhi, slo, shi)
            jlo[:n, n + k] = -phi_col
            jhi[:n, n + k] = -plo_col
        return jlo, jhi

    def equilibrium(self, p) -> np.ndarray:
        """Rest state of the circuit with the swept junctions frozen at p."""
        p = np.asarray(p, dtype=float)
        self._check_p(p)
        return _solve_equilibrium(self._gap_rates(p), self.params, self.conn)

    def with_equilibrium(self, p) -> "AugmentedField":
        """Recenter the synaptic gates on the rest state at parameter p."""
        v_eq = self.equilibrium(p)
        return AugmentedField(self.conn, replace(self.params, v_eq=v_eq), self.axes)

    def switch_times(self):
        return self.params.stim.switch_times()


def augment(conn: Connectome, params: CircuitParams, axes) -> AugmentedField:
    return AugmentedField(conn, params, axes)


# --------------------------------------------------------------------------
# behavior readout

def classify_behavior(times, states, ava: int, avb: int, onset: float,
                      threshold: float, grace: float = 0.1) -> tuple:
    """Label a sampled trajectory by the signed area between the readout pair.

    Integrates V_AVA - V_AVB from stimulation onset until the trajectory ends
    or the integrand changes sign, ignoring sign changes within the grace
    window.  Returns (label, integral).
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if threshold <= 0:
        raise DomainError("classification threshold must be positive")
    if times[-1] < onset + grace:
        raise DomainError("trajectory ends inside the grace window")
    d = states[:, ava] - states[:, avb]
    mask = times >= onset
    t = times[mask]
    y = d[mask]
    integral = 0.0
    guard = onset + grace
    for k in range(1, t.size):
        t0, t1, y0, y1 = t[k - 1], t[k], y[k - 1], y[k]
        if y0 * y1 < 0:
            tc = t0 + (t1 - t0) * (y0 / (y0 - y1))
            if tc >= guard:
                # stop at the interpolated crossing
                integral += 0.5 * y0 * (tc - t0)
                break
        integral += 0.5 * (y0 + y1) * (t1 - t0)
    if integral > threshold:
        label = "reversal"
    elif integral < -threshold:
        label = "acceleration"
    else:
        label = "no_response"
    return label, float(integral)


# --------------------------------------------------------------------------
# circuit definition files

_CIRCUIT_KEYS = {"name", "version", "notes", "neurons", "n_gap", "n_syn",
                 "reversal_potentials", "v_range", "stimulus",
                 "classification", "simulation", "unknown_polarity_as"}
_NEURON_KEYS = {"name", "polarity", "g_leak", "g_gap", "g_syn", "v_leak", "notes"}
_PULSE_KEYS = {"neuron", "start", "end", "amplitude"}
_CLASSIFY_KEYS = {"grace", "threshold", "onset"}
_SIM_KEYS = {"tau", "eps", "horizon"}


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigurationError(f"unknown key {sorted(extra)[0]!r} in {where}")


@dataclass(frozen=True)
class CircuitDefinition:
    """Parsed circuit file: wiring, constants and run defaults."""

    name: str
    version: str
    conn: Connectome
    params: CircuitParams
    grace: float
    threshold: float
    tau: float
    eps: float
    horizon: float

    @property
    def onset(self) -> float:
        t = self.params.stim.onset()
        return 0.0 if t is None else t

    def field(self) -> TapWithdrawalField:
        return TapWithdrawalField(self.conn, self.params)

    def ablated(self, dead) -> tuple:
        """Reduced (conn, params) with the rest state recomputed."""
        conn, params = ablate(self.conn, self.params, dead)
        return conn, with_equilibrium(params, conn)


def load_circuit(path, unknown_polarity_as: str | None = None) -> CircuitDefinition:
    """Parse a circuit definition file.  Parsing is strict: unknown keys are
    rejected so typos cannot silently change the model."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    _reject_unknown(raw, _CIRCUIT_KEYS, str(path))
    for key in ("neurons", "n_gap", "n_syn", "reversal_potentials", "v_range"):
        if key not in raw:
            raise ConfigurationError(f"{path}: missing required key {key!r}")

    neurons = raw["neurons"]
    names, polarity = [], []
    per = {k: [] for k in ("g_leak", "g_gap", "g_syn", "v_leak")}
    for entry in neurons:
        _reject_unknown(entry, _NEURON_KEYS, f"{path}:neurons")
        names.append(entry["name"])
        polarity.append(entry["polarity"])
        for k in per:
            if k not in entry:
                raise ConfigurationError(f"{path}: neuron {entry['name']} missing {k!r}")
            per[k].append(entry[k])

    rev = raw["reversal_potentials"]
    _reject_unknown(rev, {"excitatory", "inhibitory"}, f"{path}:reversal_potentials")
    unknown_as = unknown_polarity_as or raw.get("unknown_polarity_as", "excitatory")
    e_rev = polarity_reversal(polarity, rev["excitatory"], rev["inhibitory"], unknown_as)

    conn = Connectome(tuple(names), raw["n_gap"], raw["n_syn"], tuple(polarity))

    pulses = []
    for pulse in raw.get("stimulus", []):
        _reject_unknown(pulse, _PULSE_KEYS, f"{path}:stimulus")
        pulses.append((conn.index(pulse["neuron"]), pulse["start"],
                       pulse["end"], pulse["amplitude"]))
    stim = StimulusSchedule(tuple(pulses))

    params = CircuitParams(
        g_leak=np.array(per["g_leak"], dtype=float),
        g_gap=np.array(per["g_gap"], dtype=float),
        g_syn=np.array(per["g_syn"], dtype=float),
        v_leak=np.array(per["v_leak"], dtype=float),
        e_rev=e_rev, v_range=float(raw["v_range"]), v_eq=None, stim=stim)
    params = with_equilibrium(params, conn)

    cls = raw.get("classification", {})
    _reject_unknown(cls, _CLASSIFY_KEYS, f"{path}:classification")
    sim = raw.get("simulation", {})
    _reject_unknown(sim, _SIM_KEYS, f"{path}:simulation")

    return CircuitDefinition(
        name=raw.get("name", path.stem),
        version=str(raw.get("version", "0")),
        conn=conn, params=params,
        grace=float(cls.get("grace", 0.1)),
        threshold=float(cls.get("threshold", 1e-4)),
        tau=float(sim.get("tau", 5e-3)),
        eps=float(sim.get("eps", 1e-4)),
        horizon=float(sim.get("horizon", 1.0)),
    )


def bundled_circuit_path() -> Path:
    return Path(__file__).parent / "data" / "tw_circuit.json"

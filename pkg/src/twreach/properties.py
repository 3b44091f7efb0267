"""Tap-withdrawal behaviors as reach-tube predicates.

Each behavior has a sufficient condition on a segment box's projections
onto the two readout potentials.  Conditions use strict inequalities on
closed boxes, so a tie is inconclusive rather than certified: soundness
over progress.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, DomainError
from .geometry import Box
from .reach import FAILS, HOLDS, INCONCLUSIVE, ReachTube, Verdict, check_cell

BEHAVIORS = ("reversal", "acceleration", "no_response")


def _project(box: Box, index: int, label: str):
    if index < 0 or index >= box.dim:
        raise ConfigurationError(f"segment box has no {label} coordinate {index}")
    return box.project(index)


def reversal_condition(box: Box, ava: int, avb: int) -> str:
    """Holds when the backward-command potential provably exceeds the
    forward-command potential over the whole box."""
    ava_lo, ava_hi = _project(box, ava, "AVA")
    avb_lo, avb_hi = _project(box, avb, "AVB")
    if ava_lo > avb_hi:
        return HOLDS
    if ava_hi < avb_lo:
        return FAILS
    return INCONCLUSIVE


def acceleration_condition(box: Box, ava: int, avb: int) -> str:
    """Mirror image of reversal: forward command provably dominates."""
    return reversal_condition(box, avb, ava)


def no_response_condition(box: Box, ava: int, avb: int, resp_epsilon: float) -> str:
    """Holds when the readout difference over the box stays inside the
    +/- epsilon band, fails when it stays entirely outside."""
    if resp_epsilon <= 0:
        raise DomainError("resp_epsilon must be positive")
    ava_lo, ava_hi = _project(box, ava, "AVA")
    avb_lo, avb_hi = _project(box, avb, "AVB")
    d_lo = ava_lo - avb_hi
    d_hi = ava_hi - avb_lo
    if -resp_epsilon <= d_lo and d_hi <= resp_epsilon:
        return HOLDS
    if d_lo > resp_epsilon or d_hi < -resp_epsilon:
        return FAILS
    return INCONCLUSIVE


@dataclass(frozen=True)
class BehaviorProperty:
    """A behavior, its checked window, and the readout coordinates.

    The checked window starts no earlier than stimulation onset plus the
    grace period, so early transients never influence the verdict.
    `invert_readout` swaps the roles of the two readout potentials, for
    exploring the opposite sign convention.
    """

    kind: str
    t_int: tuple
    ava: int
    avb: int
    onset: float = 0.0
    grace: float = 0.1
    resp_epsilon: float = 1e-3
    invert_readout: bool = False

    def __post_init__(self):
        if self.kind not in BEHAVIORS:
            raise ConfigurationError(f"unknown behavior {self.kind!r}")
        if self.grace < 0:
            raise ConfigurationError("grace must be nonnegative")
        if self.resp_epsilon <= 0:
            raise ConfigurationError("resp_epsilon must be positive")
        lo, hi = float(self.t_int[0]), float(self.t_int[1])
        if lo >= hi:
            raise ConfigurationError("checked interval is empty")
        if lo < self.onset + self.grace - 1e-12:
            raise ConfigurationError(
                "checked interval must start after stimulation onset plus grace")
        object.__setattr__(self, "t_int", (lo, hi))

    def segment_condition(self, box: Box) -> str:
        ava, avb = self.ava, self.avb
        if self.invert_readout:
            ava, avb = avb, ava
        if self.kind == "reversal":
            return reversal_condition(box, ava, avb)
        if self.kind == "acceleration":
            return acceleration_condition(box, ava, avb)
        return no_response_condition(box, ava, avb, self.resp_epsilon)


def default_window(onset: float, grace: float, horizon: float) -> tuple:
    """Checked interval from end of grace to the simulation horizon."""
    lo = onset + grace
    if lo >= horizon:
        raise ConfigurationError("horizon ends before the grace window does")
    return (lo, horizon)


def evaluate(tube: ReachTube, prop: BehaviorProperty, *,
             partial_containment_violates: bool = False) -> Verdict:
    """Verdict for one behavior over one tube."""
    return check_cell(tube, prop.segment_condition, prop.t_int,
                      partial_containment_violates=partial_containment_violates)

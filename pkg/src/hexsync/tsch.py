"""Timeslotted synchronization layer: 15 ms slots, ASN, parent resync.

Slot boundaries are defined in continuous local seconds (boundary for slot
number n sits at local time (n - asn_origin) * 0.015 s past the node's
alignment origin) and quantized down to the node's tick grid when converted
to true time. 15 ms is 491.52 ticks, so consecutive boundaries land 15 ms
apart in local time only to within one tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .clock import (
    NOMINAL_FREQ_HZ,
    DriftingClock,
    as_seconds,
    ticks_at,
    true_time_of_tick,
)

SLOT_LENGTH_S = Fraction(15, 1000)
TICKS_PER_SLOT = SLOT_LENGTH_S * NOMINAL_FREQ_HZ  # 491.52, not an integer
DEFAULT_KEEPALIVE_PERIOD_S = 30.0


@dataclass
class MoteState:
    """One network node: identity, role, clock, ASN alignment, keep-alive state.

    asn_origin / origin_local_ticks pin the node's slot grid: slot
    asn_origin begins at local tick origin_local_ticks. Resynchronization
    rewrites this alignment against the unchanged local clock, which is
    observably equivalent to shifting the clock's tick offset but leaves
    free-running local-time readings untouched.
    """

    node_id: str
    clock: DriftingClock
    parent_id: Optional[str] = None
    asn_origin: int = 0
    origin_local_ticks: int = 0
    last_resync_true_s: Fraction = Fraction(0)
    keepalive_period_s: Fraction = Fraction(30)
    gait: Optional["object"] = None  # gait.GaitArmState once armed

    @property
    def is_root(self) -> bool:
        return self.parent_id is None


def make_mote(node_id: str, clock: DriftingClock, parent_id: Optional[str] = None,
              keepalive_period_s=DEFAULT_KEEPALIVE_PERIOD_S) -> MoteState:
    return MoteState(node_id=node_id, clock=clock, parent_id=parent_id,
                     keepalive_period_s=as_seconds(keepalive_period_s))


def slot_boundary_true_time(node: MoteState, asn: int) -> Fraction:
    """True time at which the node's local time first reaches slot asn's start.

    The grid extends backwards on the same 15 ms spacing, so slots shortly
    before the alignment origin (reachable right after a resync pins the
    origin at the *next* parent boundary) resolve too.
    """
    target_ticks = node.origin_local_ticks + (asn - node.asn_origin) * TICKS_PER_SLOT
    k = math.floor(target_ticks)
    if k < node.clock.tick_offset:
        raise ValueError(f"slot {asn} precedes the clock's representable range")
    return true_time_of_tick(node.clock, k)


def asn_at(node: MoteState, t_true) -> int:
    """Largest slot number whose boundary is at or before t_true."""
    t = as_seconds(t_true)
    elapsed_ticks = ticks_at(node.clock, t) + 1 - node.origin_local_ticks
    return node.asn_origin + math.ceil(elapsed_ticks / TICKS_PER_SLOT) - 1


def resync_to_parent(child: MoteState, parent: MoteState, t_true) -> float:
    """Align the child's ASN and slot grid to its parent at a message instant.

    The child adopts the parent's current ASN and re-pins its slot grid so
    its next boundary coincides with the parent's next boundary, quantized
    to the child's own tick grid. Returns the residual misalignment in us,
    always less than one tick.
    """
    if child.is_root:
        raise ValueError("root has no time-source parent to resync to")
    t = as_seconds(t_true)
    parent_asn = asn_at(parent, t)
    parent_next = slot_boundary_true_time(parent, parent_asn + 1)
    child.asn_origin = parent_asn + 1
    child.origin_local_ticks = ticks_at(child.clock, parent_next)
    child.last_resync_true_s = t
    own_next = slot_boundary_true_time(child, child.asn_origin)
    return float((parent_next - own_next) * 10**6)


def pairwise_sync_error(a: MoteState, b: MoteState, asn: int) -> float:
    """Signed true-time difference (us) between two nodes' boundary for one slot."""
    return float((slot_boundary_true_time(a, asn) - slot_boundary_true_time(b, asn)) * 10**6)


def next_keepalive_due(node: MoteState) -> Fraction:
    """Latest instant by which the child must next hear from the root."""
    if node.is_root:
        raise ValueError("root does not keep-alive to anyone")
    return node.last_resync_true_s + node.keepalive_period_s

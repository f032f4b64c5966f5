"""Feeding-cycle supervisor: a deterministic finite state machine.

States X0..X10 and operator/system signals u1..u11 plus two internal
events. The emergency stop dominates every state; the pause signal returns
to waiting from everywhere except the emergency stop, which only a fresh
start signal clears.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field


class FeedingState(str, enum.Enum):
    WAITING = "X0"
    PRODUCT_SEARCH = "X1"
    PRODUCT_POSITIONING = "X2"
    GRASP = "X3"
    FACE_SEARCH = "X4"
    MOVE_TO_FACE = "X5"
    FEEDING = "X6"
    REPEAT = "X7"
    EMERGENCY_STOP = "X8"
    AWAIT_CONFIRMATION = "X9"
    NO_OBJECTS = "X10"


class Signal(str, enum.Enum):
    START = "u1"
    POSITIONING_DONE = "u2"
    GRASP_CONFIRMED = "u3"
    FACE_ACQUIRED = "u4"
    FEED_POSE_REACHED = "u5"
    FEEDING_DONE = "u6"
    REPEAT_REQUEST = "u7"
    EMERGENCY_STOP = "u8"
    CONFIRM_WAIT = "u9"
    PAUSE = "u10"
    SEARCH_FAILED = "u11"
    # internal events
    PRODUCT_FOUND = "p_found"
    REPEAT_DONE = "repeat_done"


U_SIGNALS = tuple(s for s in Signal if s.value.startswith("u"))

_S = FeedingState
_G = Signal

# explicit transitions; everything else self-loops, except the global rules
_TABLE: dict[tuple[FeedingState, Signal], FeedingState] = {
    (_S.WAITING, _G.START): _S.PRODUCT_SEARCH,
    (_S.PRODUCT_SEARCH, _G.PRODUCT_FOUND): _S.PRODUCT_POSITIONING,
    (_S.PRODUCT_SEARCH, _G.SEARCH_FAILED): _S.NO_OBJECTS,
    (_S.PRODUCT_POSITIONING, _G.POSITIONING_DONE): _S.GRASP,
    (_S.GRASP, _G.GRASP_CONFIRMED): _S.FACE_SEARCH,
    (_S.FACE_SEARCH, _G.FACE_ACQUIRED): _S.MOVE_TO_FACE,
    (_S.FACE_SEARCH, _G.SEARCH_FAILED): _S.NO_OBJECTS,
    (_S.MOVE_TO_FACE, _G.FEED_POSE_REACHED): _S.FEEDING,
    (_S.FEEDING, _G.FEEDING_DONE): _S.AWAIT_CONFIRMATION,
    (_S.AWAIT_CONFIRMATION, _G.REPEAT_REQUEST): _S.REPEAT,
    (_S.AWAIT_CONFIRMATION, _G.CONFIRM_WAIT): _S.WAITING,
    (_S.REPEAT, _G.REPEAT_DONE): _S.FACE_SEARCH,
    (_S.NO_OBJECTS, _G.START): _S.PRODUCT_SEARCH,
    (_S.NO_OBJECTS, _G.PAUSE): _S.WAITING,
    (_S.EMERGENCY_STOP, _G.START): _S.WAITING,
}


def step(state: FeedingState, signal: Signal) -> FeedingState:
    """One deterministic transition. The emergency stop wins from any
    state; pause resets everything but an emergency stop."""
    if signal is _G.EMERGENCY_STOP:
        return _S.EMERGENCY_STOP
    if state is _S.EMERGENCY_STOP:
        return _TABLE.get((state, signal), state)
    if signal is _G.PAUSE:
        return _S.WAITING
    return _TABLE.get((state, signal), state)


def is_transient(state: FeedingState) -> bool:
    """The repeat state completes immediately and hands back to the face
    search."""
    return state is _S.REPEAT


@dataclass(frozen=True)
class TraceRow:
    t: float
    state: FeedingState
    signal: Signal
    next: FeedingState


@dataclass
class Trace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, t: float, state: FeedingState, signal: Signal, nxt: FeedingState) -> None:
        self.rows.append(TraceRow(t=t, state=state, signal=signal, next=nxt))

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.rows:
                fh.write(
                    json.dumps(
                        {
                            "t": row.t,
                            "state": row.state.value,
                            "signal": row.signal.value,
                            "next": row.next.value,
                        },
                        sort_keys=True,
                    )
                )
                fh.write("\n")

    def states_visited(self) -> list[FeedingState]:
        out = []
        for row in self.rows:
            if not out or out[-1] is not row.next:
                out.append(row.next)
        return out


def run_sequence(
    start: FeedingState, signals, t0: float = 0.0, dt: float = 1.0
) -> tuple[FeedingState, Trace]:
    """Fold a signal sequence through the machine, resolving the transient
    repeat state after each hop; returns the final state and full trace."""
    trace = Trace()
    state = start
    t = t0
    for sig in signals:
        sig = Signal(sig)
        nxt = step(state, sig)
        trace.append(t, state, sig, nxt)
        state = nxt
        if is_transient(state):
            nxt = step(state, _G.REPEAT_DONE)
            trace.append(t, state, _G.REPEAT_DONE, nxt)
            state = nxt
        t += dt
    return state, trace


def reachable_states(start: FeedingState, alphabet=None) -> set[FeedingState]:
    """Breadth-first closure over the transition table."""
    if alphabet is None:
        alphabet = tuple(Signal)
    seen = {start}
    frontier = [start]
    while frontier:
        state = frontier.pop()
        for sig in alphabet:
            nxt = step(state, Signal(sig))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen

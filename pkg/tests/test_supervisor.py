import json

from robofeed.supervisor import (
    U_SIGNALS,
    FeedingState,
    Signal,
    Trace,
    is_transient,
    reachable_states,
    run_sequence,
    step,
)

S = FeedingState
G = Signal

# the full expected transition map over operator/system signals, spelled
# out so a regression in any cell is caught
EXPECTED = {
    (S.WAITING, G.START): S.PRODUCT_SEARCH,
    (S.PRODUCT_SEARCH, G.SEARCH_FAILED): S.NO_OBJECTS,
    (S.PRODUCT_POSITIONING, G.POSITIONING_DONE): S.GRASP,
    (S.GRASP, G.GRASP_CONFIRMED): S.FACE_SEARCH,
    (S.FACE_SEARCH, G.FACE_ACQUIRED): S.MOVE_TO_FACE,
    (S.FACE_SEARCH, G.SEARCH_FAILED): S.NO_OBJECTS,
    (S.MOVE_TO_FACE, G.FEED_POSE_REACHED): S.FEEDING,
    (S.FEEDING, G.FEEDING_DONE): S.AWAIT_CONFIRMATION,
    (S.AWAIT_CONFIRMATION, G.REPEAT_REQUEST): S.REPEAT,
    (S.AWAIT_CONFIRMATION, G.CONFIRM_WAIT): S.WAITING,
    (S.NO_OBJECTS, G.START): S.PRODUCT_SEARCH,
    (S.EMERGENCY_STOP, G.START): S.WAITING,
}


def expected_next(state, sig):
    if sig is G.EMERGENCY_STOP:
        return S.EMERGENCY_STOP
    if state is S.EMERGENCY_STOP:
        return EXPECTED.get((state, sig), state)
    if sig is G.PAUSE:
        return S.WAITING
    return EXPECTED.get((state, sig), state)


def test_exhaustive_transition_table():
    for state in FeedingState:
        for sig in U_SIGNALS:
            assert step(state, sig) is expected_next(state, sig), (state, sig)


def test_internal_events():
    assert step(S.PRODUCT_SEARCH, G.PRODUCT_FOUND) is S.PRODUCT_POSITIONING
    assert step(S.REPEAT, G.REPEAT_DONE) is S.FACE_SEARCH
    # internal events mean nothing elsewhere
    assert step(S.WAITING, G.PRODUCT_FOUND) is S.WAITING
    assert step(S.FEEDING, G.REPEAT_DONE) is S.FEEDING


def test_emergency_dominates_everything():
    for state in FeedingState:
        assert step(state, G.EMERGENCY_STOP) is S.EMERGENCY_STOP


def test_emergency_exits_only_via_start():
    for sig in Signal:
        nxt = step(S.EMERGENCY_STOP, sig)
        if sig is G.START:
            assert nxt is S.WAITING
        else:
            assert nxt is S.EMERGENCY_STOP


def test_pause_resets_except_emergency():
    for state in FeedingState:
        nxt = step(state, G.PAUSE)
        if state is S.EMERGENCY_STOP:
            assert nxt is S.EMERGENCY_STOP
        else:
            assert nxt is S.WAITING


def test_nominal_cycle_with_repeat():
    signals = ["u1", "p_found", "u2", "u3", "u4", "u5", "u6", "u7", "u4", "u5", "u6", "u9"]
    final, trace = run_sequence(S.WAITING, signals)
    assert final is S.WAITING
    visited = trace.states_visited()
    assert visited[0] is S.PRODUCT_SEARCH
    assert S.FEEDING in visited
    assert S.REPEAT in visited  # transient but traced
    assert visited[-1] is S.WAITING
    # the transient repeat resolves in the same step
    repeat_rows = [r for r in trace.rows if r.state is S.REPEAT]
    assert len(repeat_rows) == 1 and repeat_rows[0].next is S.FACE_SEARCH


def test_trace_rows_chain():
    _, trace = run_sequence(S.WAITING, ["u1", "p_found", "u2", "u8", "u1"])
    for a, b in zip(trace.rows, trace.rows[1:]):
        assert a.next is b.state


def test_is_transient():
    assert is_transient(S.REPEAT)
    assert not any(is_transient(s) for s in FeedingState if s is not S.REPEAT)


def test_all_states_reachable():
    assert reachable_states(S.WAITING) == set(FeedingState)


def test_reachability_restricted_alphabet():
    # with only the emergency stop, the machine can never leave {start, X8}
    assert reachable_states(S.GRASP, alphabet=(G.EMERGENCY_STOP,)) == {
        S.GRASP,
        S.EMERGENCY_STOP,
    }


def test_every_state_can_return_to_waiting():
    for state in FeedingState:
        final, _ = run_sequence(state, ["u8", "u1"])
        assert final is S.WAITING


def test_trace_jsonl(tmp_path):
    _, trace = run_sequence(S.WAITING, ["u1", "u8"])
    out = tmp_path / "trace.jsonl"
    trace.to_jsonl(out)
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    row = json.loads(lines[0])
    assert row == {"t": 0.0, "state": "X0", "signal": "u1", "next": "X1"}

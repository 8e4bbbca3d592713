"""Behavioral-programming runtime: selection, blocking, forks, snapshots."""

import pytest

from bpchess.bp import (ALL_MOVES, DEADLOCK, MOVE, INCREMENT, SET_STATE,
                        BThread, BThreadError, Event, EventSet, Kernel,
                        NOTHING, SyncStatement, select_event)


def request_once(events):
    """Thread that requests `events` until each has been delivered."""
    def step(bt, event):
        if event is None:
            bt.scratch["todo"] = list(events)
        elif event in bt.scratch.get("todo", []):
            bt.scratch["todo"].remove(event)
        todo = bt.scratch.get("todo", [])
        if todo:
            return SyncStatement(requested=tuple(todo))
        return SyncStatement(watched=NOTHING)
    return step


def make_thread(name, events, registers=None):
    return BThread(name, request_once(events), registers or {})


MOVE_A = Event(MOVE, "e4")
MOVE_B = Event(MOVE, "d4")
INC = Event(INCREMENT, "white_pawn_moves", 1)
SET = Event(SET_STATE, "white_castle_state", 1)


class TestSelectEvent:
    def test_internal_outranks_move(self):
        statements = [SyncStatement(requested=(MOVE_A, INC))]
        assert select_event(statements) == INC

    def test_internal_beats_move_across_threads(self):
        statements = [SyncStatement(requested=(MOVE_A,)),
                      SyncStatement(requested=(SET,))]
        assert select_event(statements) == SET

    def test_tie_breaks_by_registration_order(self):
        statements = [SyncStatement(requested=(MOVE_B,)),
                      SyncStatement(requested=(MOVE_A,))]
        assert select_event(statements) == MOVE_B

    def test_tie_breaks_by_request_position(self):
        statements = [SyncStatement(requested=(MOVE_B, MOVE_A))]
        assert select_event(statements) == MOVE_B

    def test_blocked_event_not_selected(self):
        block_b = EventSet("no-d4", lambda e: e.name == "d4")
        statements = [SyncStatement(requested=(MOVE_B, MOVE_A)),
                      SyncStatement(blocked=block_b)]
        assert select_event(statements) == MOVE_A

    def test_blocking_own_request_deadlocks(self):
        block_all = EventSet("all", lambda e: True)
        statements = [SyncStatement(requested=(MOVE_A,), blocked=block_all)]
        assert select_event(statements) is DEADLOCK

    def test_no_requests_is_deadlock(self):
        assert select_event([SyncStatement(watched=ALL_MOVES)]) is DEADLOCK


class TestKernel:
    def test_duplicate_name_rejected(self):
        k = Kernel()
        k.register(make_thread("a", []))
        with pytest.raises(ValueError, match="duplicate"):
            k.register(make_thread("a", []))

    def test_register_after_start_rejected(self):
        k = Kernel()
        k.register(make_thread("a", []))
        k.start()
        with pytest.raises(RuntimeError, match="started"):
            k.register(make_thread("b", []))

    def test_register_name_collision_detected(self):
        k = Kernel()
        k.register(make_thread("a", [], {"x": 0}))
        k.register(make_thread("b", [], {"x": 0}))
        with pytest.raises(ValueError, match="collide"):
            k.register_names()

    def test_super_step_trace_is_deterministic(self):
        def build():
            k = Kernel()
            k.register(make_thread("a", [MOVE_A, INC]))
            k.register(make_thread("b", [SET]))
            k.start()
            return k
        t1 = build().super_step()
        t2 = build().super_step()
        assert t1 == t2
        assert t1[0] == INC  # internal events drain before the move
        assert t1[1] == SET
        assert t1[2] == MOVE_A

    def test_dispatch_applies_increment_and_drains(self):
        def step(bt, event):
            if event is None:
                return SyncStatement(watched=ALL_MOVES)
            if event.kind == MOVE:
                return SyncStatement(requested=(Event(INCREMENT, "n", 2),))
            bt.local_state["n"] += event.value
            return SyncStatement(watched=ALL_MOVES)

        k = Kernel()
        k.register(BThread("counter", step, {"n": 0}))
        k.start()
        trace = k.dispatch(MOVE_A)
        assert trace[0] == MOVE_A
        assert k.snapshot().values["n"] == 2
        k.dispatch(MOVE_B)
        assert k.snapshot().values["n"] == 4

    def test_snapshot_schema_id_stable_and_ordered(self):
        k = Kernel()
        k.register(make_thread("a", [], {"x": 1}))
        k.register(make_thread("b", [], {"y": 2}))
        k.start()
        snap = k.snapshot()
        assert list(snap.values) == ["x", "y"]
        assert snap.schema_id == k.schema_id()
        assert snap.as_tuple() == (1, 2)

    def test_thread_error_carries_name_and_trace(self):
        def bad_step(bt, event):
            if event is None:
                return SyncStatement(watched=ALL_MOVES)
            raise KeyError("boom")

        k = Kernel()
        k.register(BThread("fragile", bad_step, {}))
        k.start()
        with pytest.raises(BThreadError) as exc:
            k.dispatch(MOVE_A)
        assert exc.value.thread_name == "fragile"
        assert [e.name for e in exc.value.trace] == ["e4"]

    def test_fork_isolates_register_state(self):
        def step(bt, event):
            if event is None:
                return SyncStatement(watched=ALL_MOVES)
            bt.local_state["n"] += 1
            return SyncStatement(watched=ALL_MOVES)

        k = Kernel()
        k.register(BThread("counter", step, {"n": 0}))
        k.start()
        k.dispatch(MOVE_A)
        fork = k.fork()
        k.dispatch(MOVE_B)
        assert k.snapshot().values["n"] == 2
        assert fork.snapshot().values["n"] == 1
        fork.dispatch(MOVE_B)
        fork.dispatch(MOVE_A)
        assert fork.snapshot().values["n"] == 3
        assert k.snapshot().values["n"] == 2


class TestEventSet:
    def test_membership_is_predicate(self):
        moves_only = EventSet("moves", lambda e: e.kind == MOVE)
        assert MOVE_A in moves_only
        assert INC not in moves_only
        assert MOVE_A not in NOTHING

"""Minimal behavioral-programming runtime.

B-threads are cooperative resumable step functions, never OS threads: a
step consumes the last delivered event and returns the next
synchronization statement. The kernel is strictly sequential, which makes
traces deterministic and forks cheap.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from hashlib import sha1
from typing import Callable, Optional

MOVE, INCREMENT, SET_STATE = "move", "increment", "set_state"

_INTERNAL_KINDS = (INCREMENT, SET_STATE)


@dataclass(frozen=True)
class Event:
    kind: str  # move | increment | set_state
    name: str  # SAN text / register name
    value: object = None  # move payload / increment amount / new state

    def is_internal(self) -> bool:
        return self.kind in _INTERNAL_KINDS


class EventSet:
    """Named pure predicate over events."""

    def __init__(self, name: str, predicate: Callable[[Event], bool]):
        self.name = name
        self.predicate = predicate

    def __contains__(self, event: Event) -> bool:
        return self.predicate(event)

    def __repr__(self):
        return f"EventSet({self.name})"


NOTHING = EventSet("nothing", lambda e: False)
ALL_MOVES = EventSet("all-moves", lambda e: e.kind == MOVE)


@dataclass(frozen=True)
class SyncStatement:
    requested: tuple = ()
    watched: EventSet = NOTHING
    blocked: EventSet = NOTHING


class BThread:
    """A named behavior with numeric registers and a resumable step function.

    `step(bt, event)` receives None on startup and the delivered event
    afterwards; it must only mutate `local_state` and `scratch`.
    """

    def __init__(self, name: str, step: Callable, registers: dict):
        self.name = name
        self.step = step
        self.local_state = dict(registers)
        self.scratch: dict = {}

    def clone(self) -> "BThread":
        bt = BThread.__new__(BThread)
        bt.name = self.name
        bt.step = self.step
        bt.local_state = dict(self.local_state)
        bt.scratch = copy.deepcopy(self.scratch)
        return bt


class Deadlock:
    """Sentinel: every requested event is blocked, or nothing is requested."""

    def __repr__(self):
        return "Deadlock"


DEADLOCK = Deadlock()


class BThreadError(RuntimeError):
    def __init__(self, thread_name: str, trace: list, cause: BaseException):
        super().__init__(f"b-thread {thread_name!r} failed after trace "
                         f"{[e.name for e in trace]}: {cause!r}")
        self.thread_name = thread_name
        self.trace = trace
        self.cause = cause


@dataclass
class KernelSnapshot:
    values: dict  # ordered register name -> number
    schema_id: str

    def as_tuple(self) -> tuple:
        return tuple(self.values.values())

    def __eq__(self, other):
        return (isinstance(other, KernelSnapshot)
                and self.schema_id == other.schema_id
                and self.values == other.values)


def select_event(statements: list):
    """Pick a requested, not-blocked event or DEADLOCK.

    Priority: internal events (increment/set_state) outrank moves; ties
    break by requester registration order, then request-list position.
    """
    best = None
    best_rank = None
    for ti, st in enumerate(statements):
        for ri, ev in enumerate(st.requested):
            rank = (0 if ev.is_internal() else 1, ti, ri)
            if best_rank is not None and rank >= best_rank:
                continue
            if any(ev in other.blocked for other in statements):
                continue
            best, best_rank = ev, rank
    return DEADLOCK if best is None else best


class Kernel:
    """Registers b-threads and runs super-steps over their statements."""

    def __init__(self):
        self.threads: list = []
        self.statements: list = []
        self.started = False

    def register(self, bthread: BThread) -> int:
        if self.started:
            raise RuntimeError("kernel already started")
        if any(t.name == bthread.name for t in self.threads):
            raise ValueError(f"duplicate b-thread name {bthread.name!r}")
        self.threads.append(bthread)
        return len(self.threads) - 1

    def start(self) -> None:
        if self.started:
            return
        self.started = True
        self.statements = [self._step(t, None, []) for t in self.threads]

    def _step(self, thread: BThread, event, trace) -> SyncStatement:
        try:
            return thread.step(thread, event)
        except Exception as e:  # noqa: BLE001 - repackaged with context
            raise BThreadError(thread.name, trace, e) from e

    def _deliver(self, event: Event, trace: list) -> None:
        for i, thread in enumerate(self.threads):
            st = self.statements[i]
            if event in st.watched or event in st.requested:
                self.statements[i] = self._step(thread, event, trace)

    def super_step(self) -> list:
        """Select and deliver events until deadlock; returns the trace."""
        self.start()
        trace: list = []
        while True:
            ev = select_event(self.statements)
            if ev is DEADLOCK:
                return trace
            trace.append(ev)
            self._deliver(ev, trace)

    def dispatch(self, event: Event) -> list:
        """Deliver an externally produced event, then drain internal events."""
        self.start()
        trace = [event]
        self._deliver(event, trace)
        trace.extend(self.super_step())
        return trace

    def register_names(self) -> list:
        names = []
        for t in self.threads:
            names.extend(t.local_state.keys())
        if len(names) != len(set(names)):
            raise ValueError("register names collide across b-threads")
        return names

    def schema_id(self) -> str:
        return sha1("\n".join(self.register_names()).encode()).hexdigest()[:12]

    def snapshot(self) -> KernelSnapshot:
        values = {}
        for t in self.threads:
            values.update(t.local_state)
        return KernelSnapshot(values, self.schema_id())

    def fork(self) -> "Kernel":
        k = Kernel.__new__(Kernel)
        k.threads = [t.clone() for t in self.threads]
        k.statements = list(self.statements)
        k.started = self.started
        return k

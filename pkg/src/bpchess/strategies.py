"""Playbook strategies as b-threads plus the feature schema they expose.

Sixteen behaviors: five per-piece move counters, eight basic opening
strategies, three advanced ones; a ply clock is added as plumbing. Each
behavior owns named numeric registers. Registers come in two flavors:

* event-incremented counters (piece moves, useless pawn moves, attacks,
  pins, captures) that only ever grow, plus sticky states (early-queen
  flag, castle state);
* recomputed values (center control, development, space, weak-square
  pressure, pawn weaknesses, defended pieces, material) refreshed from
  PositionFacts after every move, for both colors.

`FeatureExtractor` is a vectorized evaluator of the exact same update
rules, used to score every legal candidate move per ply without paying
kernel overhead; parity with the kernel is enforced by tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from hashlib import sha1

import numpy as np

from .board import (
    BISHOP, BLACK, FLAG_CASTLE_K, FLAG_CASTLE_Q, KNIGHT, PAWN, QUEEN, ROOK,
    WHITE, Board, Move, apply_move, legal_moves, move_to_san, piece_type,
)
from .bp import (
    ALL_MOVES, INCREMENT, MOVE, SET_STATE, BThread, Event, Kernel,
    SyncStatement,
)
from .facts import CENTER_MASK, PositionFacts, position_facts

EARLY_QUEEN_FULLMOVE_LIMIT = 6  # "more than a few times"; documented constant

COLOR_NAMES = ("white", "black")

COUNTER_REGS = ("pawn_moves", "knight_moves", "bishop_moves",
                "rook_moves", "queen_moves")
BASIC_REGS = COUNTER_REGS + (
    "center_control", "developed", "space", "weak_square_pressure",
    "pawn_weaknesses", "early_queen_flag", "useless_pawn_moves",
    "castle_state")
ADVANCED_REGS = ("defended_pieces", "attacks_made", "pins_made",
                 "captures_made", "material_points")

# registers refreshed from PositionFacts for both colors after each move
RECOMPUTED_REGS = ("center_control", "developed", "space",
                   "weak_square_pressure", "pawn_weaknesses")
RECOMPUTED_ADVANCED = ("defended_pieces", "material_points")

REGISTER_RANGES = {
    "pawn_moves": "0+", "knight_moves": "0+", "bishop_moves": "0+",
    "rook_moves": "0+", "queen_moves": "0+",
    "center_control": "0..8", "developed": "0..7", "space": "0..32",
    "weak_square_pressure": "0+", "pawn_weaknesses": "0..16",
    "early_queen_flag": "0..1", "useless_pawn_moves": "0+",
    "castle_state": "0..2",
    "defended_pieces": "0..7", "attacks_made": "0+", "pins_made": "0+",
    "captures_made": "0+", "material_points": "0..103",
    "ply_index": "0+",
}

_COUNTER_BY_TYPE = {PAWN: "pawn_moves", KNIGHT: "knight_moves",
                    BISHOP: "bishop_moves", ROOK: "rook_moves",
                    QUEEN: "queen_moves"}


@dataclass(frozen=True)
class MovePayload:
    """Context carried by a Move event: the move plus both positions."""
    san: str
    move: Move
    before: Board
    after: Board

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return id(self)


def move_event(board: Board, move: Move, san: str | None = None) -> Event:
    after = apply_move(board, move, _trust=True)
    if san is None:
        san = move_to_san(board, move)
    return Event(MOVE, san, MovePayload(san, move, board, after))


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered register names of one snapshot vector, mover-relative."""
    advanced: bool

    @property
    def per_color_regs(self) -> tuple:
        return BASIC_REGS + (ADVANCED_REGS if self.advanced else ())

    @property
    def names(self) -> tuple:
        regs = self.per_color_regs
        return tuple(f"own_{r}" for r in regs) + \
            tuple(f"opp_{r}" for r in regs) + ("ply_index",)

    @property
    def storage_names(self) -> tuple:
        """Color-fixed layout used internally: white block, black block, ply."""
        regs = self.per_color_regs
        return tuple(f"white_{r}" for r in regs) + \
            tuple(f"black_{r}" for r in regs) + ("ply_index",)

    def __len__(self):
        return 2 * len(self.per_color_regs) + 1

    @property
    def version_id(self) -> str:
        tag = "advanced" if self.advanced else "basic"
        return tag + "-" + sha1("\n".join(self.names).encode()).hexdigest()[:10]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"# feature schema {self.version_id}\n")
            f.write(f"advanced={int(self.advanced)}\n")
            for name in self.names:
                base = name.split("_", 1)[1] if name != "ply_index" else name
                f.write(f"{name}:{REGISTER_RANGES[base]}\n")

    @staticmethod
    def read(path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as f:
            lines = [ln.strip() for ln in f if ln.strip()]
        adv = any(ln == "advanced=1" for ln in lines)
        schema = FeatureSchema(advanced=adv)
        names = tuple(ln.split(":")[0] for ln in lines
                      if ":" in ln and not ln.startswith("#"))
        if names != schema.names:
            raise ValueError("schema file does not match a known register layout")
        return schema


# ---------------------------------------------------------------------------
# shared update rules (used by b-threads and by the vectorized extractor)


def counted_piece_register(move: Move) -> str | None:
    """Which per-piece counter a move increments; castling counts the rook."""
    if move.flags & (FLAG_CASTLE_K | FLAG_CASTLE_Q):
        return "rook_moves"
    return _COUNTER_BY_TYPE.get(piece_type(move.piece))


def is_useless_pawn_move(move: Move, color: int) -> bool:
    """Pawn move whose destination neither occupies nor attacks a central square."""
    if piece_type(move.piece) != PAWN:
        return False
    to = move.to
    if CENTER_MASK >> to & 1:
        return False
    attack = 0
    f = to & 7
    nxt = to + (8 if color == WHITE else -8)
    if 0 <= nxt < 64:
        if f > 0:
            attack |= 1 << (nxt - 1)
        if f < 7:
            attack |= 1 << (nxt + 1)
    return not (attack & CENTER_MASK)


def castle_kind(move: Move) -> int:
    if move.flags & FLAG_CASTLE_K:
        return 1
    if move.flags & FLAG_CASTLE_Q:
        return 2
    return 0


def is_early_queen_move(move: Move, before: Board) -> bool:
    return piece_type(move.piece) == QUEEN and \
        before.fullmove <= EARLY_QUEEN_FULLMOVE_LIMIT


def new_attacks(fb: PositionFacts, fa: PositionFacts, color: int) -> int:
    """Newly created attacks on enemy non-pawn units (by square identity)."""
    before = fb.for_color(color).threat_mask
    after = fa.for_color(color).threat_mask
    return bin(after & ~before).count("1")


def new_pins(fb: PositionFacts, fa: PositionFacts, color: int) -> int:
    before = set(fb.for_color(color).pins)
    return sum(1 for p in fa.for_color(color).pins if p not in before)


def recomputed_values(facts: PositionFacts, color: int, advanced: bool) -> dict:
    cf = facts.for_color(color)
    vals = {
        "center_control": cf.center_control,
        "developed": cf.developed,
        "space": cf.space,
        "weak_square_pressure": cf.weak_square_pressure,
        "pawn_weaknesses": cf.doubled_pawns + cf.isolated_pawns,
    }
    if advanced:
        vals["defended_pieces"] = cf.defended
        vals["material_points"] = cf.material
    return vals


# ---------------------------------------------------------------------------
# b-threads


def _watch_moves() -> SyncStatement:
    return SyncStatement(watched=ALL_MOVES)


def _make_thread(name: str, registers: dict, compute) -> BThread:
    """Generic strategy thread: watch moves, then request the updates the
    move implies as internal events and apply them as they are selected."""

    def step(bt, event):
        if event is None:
            bt.scratch["pending"] = []
            return _watch_moves()
        pending = bt.scratch["pending"]
        if event.kind == MOVE:
            pending[:] = compute(bt, event.value)
        else:
            if event.kind == INCREMENT:
                bt.local_state[event.name] += event.value
            else:
                bt.local_state[event.name] = event.value
            pending.pop(0)
        if pending:
            return SyncStatement(requested=tuple(pending))
        return _watch_moves()

    return BThread(name, step, registers)


def _initial_registers(regs, init_facts, advanced):
    state = {}
    for color, cname in enumerate(COLOR_NAMES):
        vals = recomputed_values(init_facts, color, advanced)
        for r in regs:
            state[f"{cname}_{r}"] = vals.get(r, 0)
    return state


def counter_threads() -> list:
    """Five piece-move counters (castling counts as a rook move)."""
    threads = []
    for reg in COUNTER_REGS:
        def compute(bt, payload, reg=reg):
            mover = payload.before.stm
            if counted_piece_register(payload.move) == reg:
                return [Event(INCREMENT, f"{COLOR_NAMES[mover]}_{reg}", 1)]
            return []
        regs = {f"{c}_{reg}": 0 for c in COLOR_NAMES}
        threads.append(_make_thread(f"{reg.split('_')[0]}-counter", regs, compute))
    return threads


def _recompute_thread(name: str, reg: str) -> BThread:
    def compute(bt, payload):
        fa = position_facts(payload.after)
        events = []
        for color, cname in enumerate(COLOR_NAMES):
            new = recomputed_values(fa, color, advanced=True)[reg]
            key = f"{cname}_{reg}"
            if bt.local_state[key] != new:
                events.append(Event(SET_STATE, key, new))
        return events

    init = position_facts(Board.initial())
    regs = {}
    for color, cname in enumerate(COLOR_NAMES):
        regs[f"{cname}_{reg}"] = recomputed_values(init, color, True)[reg]
    return _make_thread(name, regs, compute)


def basic_strategy_threads() -> list:
    """The eight opening strategies from the playbook."""
    threads = [
        _recompute_thread("control-center", "center_control"),
        _recompute_thread("development", "developed"),
        _recompute_thread("space", "space"),
        _recompute_thread("weak-square", "weak_square_pressure"),
        _recompute_thread("pawn-structure", "pawn_weaknesses"),
    ]

    def eq_compute(bt, payload):
        mover = payload.before.stm
        key = f"{COLOR_NAMES[mover]}_early_queen_flag"
        if bt.local_state[key] == 0 and is_early_queen_move(payload.move, payload.before):
            return [Event(SET_STATE, key, 1)]
        return []

    threads.append(_make_thread(
        "early-queen", {f"{c}_early_queen_flag": 0 for c in COLOR_NAMES}, eq_compute))

    def up_compute(bt, payload):
        mover = payload.before.stm
        if is_useless_pawn_move(payload.move, mover):
            return [Event(INCREMENT, f"{COLOR_NAMES[mover]}_useless_pawn_moves", 1)]
        return []

    threads.append(_make_thread(
        "pawn-purpose", {f"{c}_useless_pawn_moves": 0 for c in COLOR_NAMES}, up_compute))

    def castle_compute(bt, payload):
        kind = castle_kind(payload.move)
        if kind:
            mover = payload.before.stm
            return [Event(SET_STATE, f"{COLOR_NAMES[mover]}_castle_state", kind)]
        return []

    threads.append(_make_thread(
        "castling", {f"{c}_castle_state": 0 for c in COLOR_NAMES}, castle_compute))
    return threads


def advanced_strategy_threads() -> list:
    """Defending, attacking-and-pinning, and piece-trading behaviors."""
    threads = [_recompute_thread("defending", "defended_pieces")]

    def ap_compute(bt, payload):
        fb = position_facts(payload.before)
        fa = position_facts(payload.after)
        mover = payload.before.stm
        cname = COLOR_NAMES[mover]
        events = []
        na = new_attacks(fb, fa, mover)
        if na:
            events.append(Event(INCREMENT, f"{cname}_attacks_made", na))
        np_ = new_pins(fb, fa, mover)
        if np_:
            events.append(Event(INCREMENT, f"{cname}_pins_made", np_))
        return events

    regs = {f"{c}_{r}": 0 for c in COLOR_NAMES for r in ("attacks_made", "pins_made")}
    threads.append(_make_thread("attack-pin", regs, ap_compute))

    def trade_compute(bt, payload):
        events = []
        mover = payload.before.stm
        if payload.move.captured:
            events.append(Event(INCREMENT, f"{COLOR_NAMES[mover]}_captures_made", 1))
        fa = position_facts(payload.after)
        for color, cname in enumerate(COLOR_NAMES):
            new = fa.for_color(color).material
            key = f"{cname}_material_points"
            if bt.local_state[key] != new:
                events.append(Event(SET_STATE, key, new))
        return events

    init = position_facts(Board.initial())
    regs = {f"{c}_captures_made": 0 for c in COLOR_NAMES}
    for color, cname in enumerate(COLOR_NAMES):
        regs[f"{cname}_material_points"] = init.for_color(color).material
    threads.append(_make_thread("trading", regs, trade_compute))
    return threads


def ply_clock_thread() -> BThread:
    def compute(bt, payload):
        return [Event(INCREMENT, "ply_index", 1)]
    return _make_thread("ply-clock", {"ply_index": 0}, compute)


def build_kernel(schema: FeatureSchema) -> Kernel:
    """A kernel whose snapshot registers follow `schema.storage_names`."""
    kernel = Kernel()
    threads = counter_threads() + basic_strategy_threads()
    if schema.advanced:
        threads += advanced_strategy_threads()
    threads.append(ply_clock_thread())
    for t in threads:
        kernel.register(t)
    kernel.start()
    return kernel


def snapshot_vector(kernel: Kernel, schema: FeatureSchema) -> np.ndarray:
    """Kernel snapshot reordered into the storage layout."""
    values = kernel.snapshot().values
    return np.array([values[n] for n in schema.storage_names], dtype=np.float32)


# ---------------------------------------------------------------------------
# mover-relative encoding


def encode(state: np.ndarray, mover: int, schema: FeatureSchema) -> np.ndarray:
    """Reorder a storage vector into own-block, opponent-block, ply."""
    if state.shape[-1] != len(schema):
        raise ValueError(f"state length {state.shape[-1]} does not match "
                         f"schema {schema.version_id} ({len(schema)})")
    n = len(schema.per_color_regs)
    w, b, ply = state[..., :n], state[..., n:2 * n], state[..., 2 * n:]
    own, opp = (w, b) if mover == WHITE else (b, w)
    return np.concatenate([own, opp, ply], axis=-1)


# ---------------------------------------------------------------------------
# vectorized candidate extraction


class _CandidateEntry:
    __slots__ = ("moves", "sans", "rec", "inc", "eq_rows", "castle_rows")

    def __init__(self, moves, sans, rec, inc, eq_rows, castle_rows):
        self.moves = moves
        self.sans = sans
        self.rec = rec
        self.inc = inc
        self.eq_rows = eq_rows
        self.castle_rows = castle_rows


class FeatureExtractor:
    """Applies the strategy update rules to whole candidate-move sets.

    Per-position geometry is cached, so repeated opening lines across a
    large game collection are nearly free.
    """

    CACHE_CAP = 100_000

    def __init__(self, schema: FeatureSchema):
        self.schema = schema
        regs = schema.per_color_regs
        self._index = {n: i for i, n in enumerate(schema.storage_names)}
        idx = self._index
        self._rec_cols = {}
        self._add_cols = {}
        add_regs = COUNTER_REGS + ("useless_pawn_moves",)
        if schema.advanced:
            add_regs += ("attacks_made", "pins_made", "captures_made")
        self._add_regs = add_regs
        rec_regs = RECOMPUTED_REGS + (RECOMPUTED_ADVANCED if schema.advanced else ())
        self._rec_regs = rec_regs
        for color, cname in enumerate(COLOR_NAMES):
            self._rec_cols[color] = np.array([idx[f"{cname}_{r}"] for r in rec_regs])
            self._add_cols[color] = np.array([idx[f"{cname}_{r}"] for r in add_regs])
        self._ply_col = idx["ply_index"]
        self._eq_col = {c: idx[f"{COLOR_NAMES[c]}_early_queen_flag"] for c in (0, 1)}
        self._cs_col = {c: idx[f"{COLOR_NAMES[c]}_castle_state"] for c in (0, 1)}
        self._cache: dict = {}

    def col(self, name: str) -> int:
        return self._index[name]

    def initial_state(self, board: Board | None = None) -> np.ndarray:
        """Register values for a game starting at `board` (counters zeroed)."""
        board = board or Board.initial()
        state = np.zeros(len(self.schema), dtype=np.float32)
        facts = position_facts(board)
        for color in (WHITE, BLACK):
            vals = recomputed_values(facts, color, self.schema.advanced)
            for r, v in vals.items():
                state[self._index[f"{COLOR_NAMES[color]}_{r}"]] = v
        return state

    def _entry(self, board: Board) -> _CandidateEntry:
        entry = self._cache.get(board.key())
        if entry is not None:
            return entry
        moves = legal_moves(board)
        fb = position_facts(board)
        mover = board.stm
        L = len(moves)
        rec = np.empty((L, 2 * len(self._rec_regs)), dtype=np.float32)
        inc = np.zeros((L, len(self._add_regs)), dtype=np.float32)
        eq_rows = np.zeros(L, dtype=np.float32)
        castle_rows = np.zeros(L, dtype=np.float32)
        sans = []
        add_index = {r: i for i, r in enumerate(self._add_regs)}
        for i, mv in enumerate(moves):
            after = apply_move(board, mv, _trust=True)
            fa = position_facts(after)
            rec[i, :len(self._rec_regs)] = [
                recomputed_values(fa, WHITE, self.schema.advanced)[r]
                for r in self._rec_regs]
            rec[i, len(self._rec_regs):] = [
                recomputed_values(fa, BLACK, self.schema.advanced)[r]
                for r in self._rec_regs]
            creg = counted_piece_register(mv)
            if creg:
                inc[i, add_index[creg]] = 1
            if is_useless_pawn_move(mv, mover):
                inc[i, add_index["useless_pawn_moves"]] = 1
            if self.schema.advanced:
                inc[i, add_index["attacks_made"]] = new_attacks(fb, fa, mover)
                inc[i, add_index["pins_made"]] = new_pins(fb, fa, mover)
                inc[i, add_index["captures_made"]] = 1 if mv.captured else 0
            if is_early_queen_move(mv, board):
                eq_rows[i] = 1
            castle_rows[i] = castle_kind(mv)
            sans.append(move_to_san(board, mv, moves))
        entry = _CandidateEntry(moves, sans, rec, inc, eq_rows, castle_rows)
        if len(self._cache) >= self.CACHE_CAP:
            self._cache.clear()
        self._cache[board.key()] = entry
        return entry

    def candidate_states(self, board: Board, state: np.ndarray):
        """After-state matrix for every legal move, in canonical order.

        Returns (moves, sans, afters) with afters.shape == (L, len(schema)).
        """
        entry = self._entry(board)
        mover = board.stm
        L = len(entry.moves)
        afters = np.repeat(state[None, :], L, axis=0)
        rec_cols = np.concatenate([self._rec_cols[WHITE], self._rec_cols[BLACK]])
        afters[:, rec_cols] = entry.rec
        afters[:, self._add_cols[mover]] += entry.inc
        eq = self._eq_col[mover]
        afters[:, eq] = np.maximum(afters[:, eq], entry.eq_rows)
        cs = self._cs_col[mover]
        afters[:, cs] = np.where(entry.castle_rows > 0, entry.castle_rows,
                                 afters[:, cs])
        afters[:, self._ply_col] += 1
        return entry.moves, entry.sans, afters

    def advance(self, board: Board, state: np.ndarray, move: Move) -> np.ndarray:
        """After-state of a single move; same rules as candidate_states."""
        moves, _, afters = self.candidate_states(board, state)
        return afters[moves.index(move)].copy()

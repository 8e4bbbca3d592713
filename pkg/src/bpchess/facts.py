"""Geometric position facts consumed by the strategy threads.

Attack maps are bitboards (64-bit ints) of full pseudo-capture reach,
friendly-occupied squares included; counting code masks them as needed.
Results are memoized by position key since openings repeat heavily.
"""

from __future__ import annotations

from typing import NamedTuple

from .board import (
    BISHOP, BISHOP_RAYS, BLACK, KING, KING_MOVES, KNIGHT, KNIGHT_MOVES, PAWN,
    QUEEN, ROOK, ROOK_RAYS, WHITE, Board, attackers_of, make_piece,
    parse_square, piece_color, piece_type, sq_index,
)

PIECE_VALUES = {PAWN: 1, KNIGHT: 3, BISHOP: 3, ROOK: 5, QUEEN: 9, KING: 0}

CENTER_SQUARES = tuple(parse_square(s) for s in
                       ("c4", "c5", "d4", "d5", "e4", "e5", "f4", "f5"))
CENTER_MASK = sum(1 << s for s in CENTER_SQUARES)

# the half of the board past the frontier, per attacking color
ENEMY_HALF = {WHITE: sum(1 << s for s in range(32, 64)),
              BLACK: sum(1 << s for s in range(0, 32))}

WEAK_SQUARE = {WHITE: parse_square("f7"), BLACK: parse_square("f2")}

# game-start squares per (color, piece type); "developed" means off these
HOME_SQUARES = {
    (WHITE, KNIGHT): frozenset((1, 6)), (WHITE, BISHOP): frozenset((2, 5)),
    (WHITE, ROOK): frozenset((0, 7)), (WHITE, QUEEN): frozenset((3,)),
    (BLACK, KNIGHT): frozenset((57, 62)), (BLACK, BISHOP): frozenset((58, 61)),
    (BLACK, ROOK): frozenset((56, 63)), (BLACK, QUEEN): frozenset((59,)),
}

_KNIGHT_MASK = tuple(sum(1 << d for d in KNIGHT_MOVES[s]) for s in range(64))
_KING_MASK = tuple(sum(1 << d for d in KING_MOVES[s]) for s in range(64))


class ColorFacts(NamedTuple):
    attack_mask: int  # squares this color attacks (pseudo-capture reach)
    material: int
    developed: int
    defended: int
    center_control: int
    space: int
    weak_square_pressure: int
    doubled_pawns: int
    isolated_pawns: int
    threat_mask: int  # attacked squares holding enemy non-pawn units
    pins: tuple  # (pinner_sq, pinned_sq, target_sq) pins made BY this color


class PositionFacts(NamedTuple):
    white: ColorFacts
    black: ColorFacts

    def for_color(self, color: int) -> ColorFacts:
        return self.white if color == WHITE else self.black


def _attack_mask(board: Board, color: int) -> int:
    bs = board.sq
    mask = 0
    occ = 0
    for s in range(64):
        if bs[s]:
            occ |= 1 << s
    for s in range(64):
        p = bs[s]
        if not p or piece_color(p) != color:
            continue
        t = piece_type(p)
        if t == PAWN:
            f = s & 7
            to = s + (8 if color == WHITE else -8)
            if 0 <= to < 64:
                if f > 0:
                    mask |= 1 << (to - 1)
                if f < 7:
                    mask |= 1 << (to + 1)
        elif t == KNIGHT:
            mask |= _KNIGHT_MASK[s]
        elif t == KING:
            mask |= _KING_MASK[s]
        else:
            rays = BISHOP_RAYS[s] if t == BISHOP else ROOK_RAYS[s] if t == ROOK \
                else BISHOP_RAYS[s] + ROOK_RAYS[s]
            for ray in rays:
                for d in ray:
                    mask |= 1 << d
                    if occ & (1 << d):
                        break
    return mask


def _pins_by(board: Board, pinner_color: int) -> tuple:
    """Pins made by `pinner_color` whose shielded target is the enemy K or Q."""
    bs = board.sq
    victim = pinner_color ^ 1
    targets = [s for s in range(64)
               if bs[s] in (make_piece(victim, KING), make_piece(victim, QUEEN))]
    pins = []
    for tsq in targets:
        for rays, slider_t in ((BISHOP_RAYS, BISHOP), (ROOK_RAYS, ROOK)):
            for ray in rays[tsq]:
                blocker = -1
                for d in ray:
                    p = bs[d]
                    if not p:
                        continue
                    if piece_color(p) == victim:
                        if blocker >= 0:
                            break
                        if piece_type(p) == KING:
                            break  # a king cannot be the pinned unit
                        blocker = d
                    else:
                        t = piece_type(p)
                        if blocker >= 0 and (t == slider_t or t == QUEEN):
                            pins.append((d, blocker, tsq))
                        break
    pins.sort()
    return tuple(pins)


def _color_facts(board: Board, color: int, attack: int, enemy_attack: int) -> ColorFacts:
    bs = board.sq
    material = developed = defended = 0
    occupied = 0
    pawn_files = [0] * 8
    enemy = color ^ 1
    enemy_nonpawn = 0
    for s in range(64):
        p = bs[s]
        if not p:
            continue
        c = piece_color(p)
        t = piece_type(p)
        if c == color:
            occupied |= 1 << s
            material += PIECE_VALUES[t]
            if t == PAWN:
                pawn_files[s & 7] += 1
            elif t != KING:
                if s not in HOME_SQUARES[(color, t)]:
                    developed += 1
                if attack & (1 << s):
                    defended += 1
        elif t != PAWN:
            enemy_nonpawn |= 1 << s
    developed = min(developed, 7)
    doubled = sum(n - 1 for n in pawn_files if n > 1)
    isolated = 0
    for f, n in enumerate(pawn_files):
        if n == 0:
            continue
        left = pawn_files[f - 1] if f > 0 else 0
        right = pawn_files[f + 1] if f < 7 else 0
        if left == 0 and right == 0:
            isolated += n
    center = bin((attack | occupied) & CENTER_MASK).count("1")
    space = bin(attack & ENEMY_HALF[color]).count("1")
    weak = len(attackers_of(board, WEAK_SQUARE[color], color))
    return ColorFacts(
        attack_mask=attack, material=material, developed=developed,
        defended=defended, center_control=center, space=space,
        weak_square_pressure=weak, doubled_pawns=doubled,
        isolated_pawns=isolated, threat_mask=attack & enemy_nonpawn,
        pins=_pins_by(board, color))


_CACHE: dict = {}
_CACHE_CAP = 600_000


def position_facts(board: Board) -> PositionFacts:
    key = board.key()
    facts = _CACHE.get(key)
    if facts is None:
        wa = _attack_mask(board, WHITE)
        ba = _attack_mask(board, BLACK)
        facts = PositionFacts(_color_facts(board, WHITE, wa, ba),
                              _color_facts(board, BLACK, ba, wa))
        if len(_CACHE) >= _CACHE_CAP:
            _CACHE.clear()
        _CACHE[key] = facts
    return facts


def clear_cache() -> None:
    _CACHE.clear()


def mirror_board(board: Board) -> Board:
    """Color-flip + vertical flip; used by the symmetry tests."""
    sq = bytearray(64)
    for s in range(64):
        p = board.sq[s]
        if p:
            sq[s ^ 56] = make_piece(piece_color(p) ^ 1, piece_type(p))
    castling = ((board.castling & 0b0011) << 2) | ((board.castling & 0b1100) >> 2)
    ep = board.ep ^ 56 if board.ep >= 0 else -1
    return Board(bytes(sq), board.stm ^ 1, castling, ep,
                 board.halfmove, board.fullmove)

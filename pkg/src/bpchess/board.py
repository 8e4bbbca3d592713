"""Chess rules engine: board state, legal move generation, SAN and FEN.

Board objects are immutable values; apply_move returns a new board. Move
generation returns moves in a canonical order (from-square, to-square,
promotion) so downstream dataset rows are reproducible.
"""

from __future__ import annotations

from typing import NamedTuple

WHITE, BLACK = 0, 1

# piece codes: low 3 bits = type, bit 3 = color
EMPTY = 0
PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = 1, 2, 3, 4, 5, 6
PIECE_CHARS = ".PNBRQK"

WP, WN, WB, WR, WQ, WK = 1, 2, 3, 4, 5, 6
BP, BN, BB, BR, BQ, BK = 9, 10, 11, 12, 13, 14


def piece_color(code: int) -> int:
    return code >> 3


def piece_type(code: int) -> int:
    return code & 7


def make_piece(color: int, ptype: int) -> int:
    return (color << 3) | ptype


def sq_index(file: int, rank: int) -> int:
    return rank * 8 + file


def sq_name(sq: int) -> str:
    return "abcdefgh"[sq & 7] + str((sq >> 3) + 1)


def parse_square(name: str) -> int:
    f = "abcdefgh".index(name[0])
    r = int(name[1]) - 1
    if not (0 <= r < 8):
        raise ValueError(f"bad square {name!r}")
    return sq_index(f, r)


# castle / special-move flags
FLAG_CASTLE_K = 1
FLAG_CASTLE_Q = 2
FLAG_EN_PASSANT = 4


class Move(NamedTuple):
    frm: int
    to: int
    piece: int  # full piece code of the mover
    captured: int  # piece code or EMPTY (ep stores the captured pawn)
    promo: int = 0  # piece *type* or 0
    flags: int = 0

    def uci(self) -> str:
        s = sq_name(self.frm) + sq_name(self.to)
        if self.promo:
            s += "pnbrqk"[self.promo - 1]
        return s

    def sort_key(self):
        return (self.frm, self.to, self.promo)


# ---------------------------------------------------------------------------
# precomputed geometry

_KNIGHT_DELTAS = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))
_KING_DELTAS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_BISHOP_DIRS = ((1, 1), (-1, 1), (-1, -1), (1, -1))
_ROOK_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _build_step_table(deltas):
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        dests = []
        for df, dr in deltas:
            nf, nr = f + df, r + dr
            if 0 <= nf < 8 and 0 <= nr < 8:
                dests.append(sq_index(nf, nr))
        table.append(tuple(dests))
    return tuple(table)


def _build_ray_table(dirs):
    # RAYS[sq] = tuple of rays; each ray = tuple of squares walking outward
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        rays = []
        for df, dr in dirs:
            ray = []
            nf, nr = f + df, r + dr
            while 0 <= nf < 8 and 0 <= nr < 8:
                ray.append(sq_index(nf, nr))
                nf += df
                nr += dr
            if ray:
                rays.append(tuple(ray))
        table.append(tuple(rays))
    return tuple(table)


KNIGHT_MOVES = _build_step_table(_KNIGHT_DELTAS)
KING_MOVES = _build_step_table(_KING_DELTAS)
BISHOP_RAYS = _build_ray_table(_BISHOP_DIRS)
ROOK_RAYS = _build_ray_table(_ROOK_DIRS)
QUEEN_RAYS = tuple(BISHOP_RAYS[sq] + ROOK_RAYS[sq] for sq in range(64))

# direction index (df, dr normalized) between aligned squares, None otherwise
_DIR_BETWEEN = {}
for _sq in range(64):
    _f, _r = _sq & 7, _sq >> 3
    for _df, _dr in _BISHOP_DIRS + _ROOK_DIRS:
        _nf, _nr = _f + _df, _r + _dr
        while 0 <= _nf < 8 and 0 <= _nr < 8:
            _DIR_BETWEEN[(_sq, sq_index(_nf, _nr))] = (_df, _dr)
            _nf += _df
            _nr += _dr


_START_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"

# castling-right bits
CR_WK, CR_WQ, CR_BK, CR_BQ = 1, 2, 4, 8

_CR_MASK_BY_SQUARE = {0: ~CR_WQ, 4: ~(CR_WK | CR_WQ), 7: ~CR_WK,
                      56: ~CR_BQ, 60: ~(CR_BK | CR_BQ), 63: ~CR_BK}


class Board:
    """Immutable chess position."""

    __slots__ = ("sq", "stm", "castling", "ep", "halfmove", "fullmove", "_key")

    def __init__(self, sq: bytes, stm: int, castling: int, ep: int,
                 halfmove: int, fullmove: int):
        self.sq = sq
        self.stm = stm
        self.castling = castling
        self.ep = ep
        self.halfmove = halfmove
        self.fullmove = fullmove
        self._key = None

    @staticmethod
    def initial() -> "Board":
        return Board.from_fen(_START_FEN)

    @staticmethod
    def from_fen(fen: str) -> "Board":
        parts = fen.split()
        if len(parts) < 4:
            raise ValueError(f"bad FEN {fen!r}")
        placement, stm_s, cast_s, ep_s = parts[:4]
        halfmove = int(parts[4]) if len(parts) > 4 else 0
        fullmove = int(parts[5]) if len(parts) > 5 else 1
        sq = bytearray(64)
        ranks = placement.split("/")
        if len(ranks) != 8:
            raise ValueError(f"bad FEN placement {placement!r}")
        for r, row in enumerate(ranks):
            rank = 7 - r
            f = 0
            for ch in row:
                if ch.isdigit():
                    f += int(ch)
                else:
                    t = PIECE_CHARS.index(ch.upper())
                    color = WHITE if ch.isupper() else BLACK
                    sq[sq_index(f, rank)] = make_piece(color, t)
                    f += 1
            if f != 8:
                raise ValueError(f"bad FEN rank {row!r}")
        castling = 0
        if "K" in cast_s:
            castling |= CR_WK
        if "Q" in cast_s:
            castling |= CR_WQ
        if "k" in cast_s:
            castling |= CR_BK
        if "q" in cast_s:
            castling |= CR_BQ
        ep = -1 if ep_s == "-" else parse_square(ep_s)
        stm = WHITE if stm_s == "w" else BLACK
        b = Board(bytes(sq), stm, castling, ep, halfmove, fullmove)
        b.validate()
        return b

    def to_fen(self) -> str:
        rows = []
        for rank in range(7, -1, -1):
            row = ""
            empty = 0
            for f in range(8):
                p = self.sq[sq_index(f, rank)]
                if p == EMPTY:
                    empty += 1
                else:
                    if empty:
                        row += str(empty)
                        empty = 0
                    ch = PIECE_CHARS[piece_type(p)]
                    row += ch if piece_color(p) == WHITE else ch.lower()
            if empty:
                row += str(empty)
            rows.append(row)
        cast = "".join(c for bit, c in ((CR_WK, "K"), (CR_WQ, "Q"), (CR_BK, "k"), (CR_BQ, "q"))
                       if self.castling & bit) or "-"
        ep = sq_name(self.ep) if self.ep >= 0 else "-"
        return "{} {} {} {} {} {}".format(
            "/".join(rows), "wb"[self.stm], cast, ep, self.halfmove, self.fullmove)

    def key(self):
        k = self._key
        if k is None:
            k = (self.sq, self.stm, self.castling, self.ep)
            self._key = k
        return k

    def __eq__(self, other):
        return isinstance(other, Board) and self.key() == other.key() \
            and self.halfmove == other.halfmove and self.fullmove == other.fullmove

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Board({self.to_fen()!r})"

    def king_square(self, color: int) -> int:
        target = make_piece(color, KING)
        return self.sq.index(target)

    def validate(self) -> None:
        """Check the structural invariants the move generator relies on."""
        if self.sq.count(WK) != 1 or self.sq.count(BK) != 1:
            raise ValueError("position must have exactly one king per color")
        # the side not to move must not be in check (its king capturable)
        opp = self.stm ^ 1
        if is_attacked(self, self.king_square(opp), self.stm):
            raise ValueError("side not to move is in check")
        for bit, ksq, rsq, kc, rc in ((CR_WK, 4, 7, WK, WR), (CR_WQ, 4, 0, WK, WR),
                                      (CR_BK, 60, 63, BK, BR), (CR_BQ, 60, 56, BK, BR)):
            if self.castling & bit and (self.sq[ksq] != kc or self.sq[rsq] != rc):
                raise ValueError("castling rights inconsistent with king/rook squares")


def is_attacked(board: Board, sq: int, by_color: int) -> bool:
    """Is `sq` attacked by any piece of `by_color`?"""
    bs = board.sq
    # pawns: an enemy pawn attacks sq from one rank towards its own side
    pawn = make_piece(by_color, PAWN)
    dr = -1 if by_color == WHITE else 1
    r = (sq >> 3) + dr
    if 0 <= r < 8:
        f = sq & 7
        if f > 0 and bs[sq_index(f - 1, r)] == pawn:
            return True
        if f < 7 and bs[sq_index(f + 1, r)] == pawn:
            return True
    knight = make_piece(by_color, KNIGHT)
    for d in KNIGHT_MOVES[sq]:
        if bs[d] == knight:
            return True
    king = make_piece(by_color, KING)
    for d in KING_MOVES[sq]:
        if bs[d] == king:
            return True
    bishop = make_piece(by_color, BISHOP)
    queen = make_piece(by_color, QUEEN)
    for ray in BISHOP_RAYS[sq]:
        for d in ray:
            p = bs[d]
            if p:
                if p == bishop or p == queen:
                    return True
                break
    rook = make_piece(by_color, ROOK)
    for ray in ROOK_RAYS[sq]:
        for d in ray:
            p = bs[d]
            if p:
                if p == rook or p == queen:
                    return True
                break
    return False


def attackers_of(board: Board, sq: int, by_color: int) -> list:
    """Squares of all `by_color` pieces attacking `sq`."""
    bs = board.sq
    out = []
    pawn = make_piece(by_color, PAWN)
    dr = -1 if by_color == WHITE else 1
    r = (sq >> 3) + dr
    if 0 <= r < 8:
        f = sq & 7
        if f > 0 and bs[sq_index(f - 1, r)] == pawn:
            out.append(sq_index(f - 1, r))
        if f < 7 and bs[sq_index(f + 1, r)] == pawn:
            out.append(sq_index(f + 1, r))
    knight = make_piece(by_color, KNIGHT)
    for d in KNIGHT_MOVES[sq]:
        if bs[d] == knight:
            out.append(d)
    king = make_piece(by_color, KING)
    for d in KING_MOVES[sq]:
        if bs[d] == king:
            out.append(d)
    bishop = make_piece(by_color, BISHOP)
    rook = make_piece(by_color, ROOK)
    queen = make_piece(by_color, QUEEN)
    for rays, slider in ((BISHOP_RAYS, bishop), (ROOK_RAYS, rook)):
        for ray in rays[sq]:
            for d in ray:
                p = bs[d]
                if p:
                    if p == slider or p == queen:
                        out.append(d)
                    break
    return out


def _pinned_map(board: Board, color: int) -> dict:
    """Map pinned-square -> set of squares it may still move to (the pin line)."""
    ksq = board.king_square(color)
    bs = board.sq
    pinned = {}
    enemy = color ^ 1
    for rays, slider_t in ((BISHOP_RAYS, BISHOP), (ROOK_RAYS, ROOK)):
        for ray in rays[ksq]:
            blocker = -1
            for d in ray:
                p = bs[d]
                if not p:
                    continue
                if piece_color(p) == color:
                    if blocker >= 0:
                        break
                    blocker = d
                else:
                    t = piece_type(p)
                    if blocker >= 0 and (t == slider_t or t == QUEEN):
                        line = set()
                        for s in ray:
                            line.add(s)
                            if s == d:
                                break
                        pinned[blocker] = line
                    break
    return pinned


def _checkers(board: Board, color: int) -> list:
    return attackers_of(board, board.king_square(color), color ^ 1)


def in_check(board: Board) -> bool:
    return bool(_checkers(board, board.stm))


def _between_squares(a: int, b: int) -> set:
    """Squares strictly between two aligned squares (empty set if adjacent)."""
    d = _DIR_BETWEEN.get((a, b))
    out = set()
    if d is None:
        return out
    df, dr = d
    f, r = (a & 7) + df, (a >> 3) + dr
    while sq_index(f, r) != b:
        out.add(sq_index(f, r))
        f += df
        r += dr
    return out


def legal_moves(board: Board) -> list:
    """All legal moves in canonical (from, to, promotion) order."""
    color = board.stm
    enemy = color ^ 1
    bs = board.sq
    ksq = board.king_square(color)
    checkers = _checkers(board, color)
    pinned = _pinned_map(board, color)
    moves = []

    # when in single check, non-king moves must capture the checker or block
    evasion_targets = None
    if len(checkers) == 1:
        c = checkers[0]
        evasion_targets = {c} | (_between_squares(ksq, c)
                                 if piece_type(bs[c]) in (BISHOP, ROOK, QUEEN) else set())

    def push(frm, to, piece, captured, promo=0, flags=0):
        moves.append(Move(frm, to, piece, captured, promo, flags))

    if len(checkers) < 2:
        fwd = 8 if color == WHITE else -8
        start_rank = 1 if color == WHITE else 6
        promo_rank = 7 if color == WHITE else 0
        for frm in range(64):
            p = bs[frm]
            if not p or piece_color(p) != color:
                continue
            t = piece_type(p)
            allowed = pinned.get(frm)
            if t == PAWN:
                dests = []
                to = frm + fwd
                if bs[to] == EMPTY:
                    dests.append((to, EMPTY, 0))
                    if (frm >> 3) == start_rank and bs[to + fwd] == EMPTY:
                        dests.append((to + fwd, EMPTY, 0))
                f = frm & 7
                for df in (-1, 1):
                    nf = f + df
                    if not (0 <= nf < 8):
                        continue
                    to = frm + fwd + df
                    cap = bs[to]
                    if cap and piece_color(cap) == enemy:
                        dests.append((to, cap, 0))
                    elif to == board.ep:
                        dests.append((to, make_piece(enemy, PAWN), FLAG_EN_PASSANT))
                for to, cap, fl in dests:
                    if allowed is not None and to not in allowed:
                        continue
                    if fl == FLAG_EN_PASSANT:
                        # ep can expose the king along the rank; verify by doing it
                        nb = apply_move(board, Move(frm, to, p, cap, 0, fl), _trust=True)
                        if is_attacked(nb, nb.king_square(color), enemy):
                            continue
                        if evasion_targets is not None and to not in evasion_targets \
                                and (to - fwd) not in evasion_targets:
                            continue
                        push(frm, to, p, cap, 0, fl)
                        continue
                    if evasion_targets is not None and to not in evasion_targets:
                        continue
                    if (to >> 3) == promo_rank:
                        for promo in (KNIGHT, BISHOP, ROOK, QUEEN):
                            push(frm, to, p, cap, promo)
                    else:
                        push(frm, to, p, cap)
            elif t == KNIGHT:
                if allowed is not None:
                    continue  # a pinned knight can never stay on the pin line
                for to in KNIGHT_MOVES[frm]:
                    cap = bs[to]
                    if cap and piece_color(cap) == color:
                        continue
                    if evasion_targets is not None and to not in evasion_targets:
                        continue
                    push(frm, to, p, cap)
            elif t in (BISHOP, ROOK, QUEEN):
                rays = {BISHOP: BISHOP_RAYS, ROOK: ROOK_RAYS, QUEEN: QUEEN_RAYS}[t][frm]
                for ray in rays:
                    for to in ray:
                        cap = bs[to]
                        if cap and piece_color(cap) == color:
                            break
                        ok = (allowed is None or to in allowed) and \
                             (evasion_targets is None or to in evasion_targets)
                        if ok:
                            push(frm, to, p, cap)
                        if cap:
                            break

    # king moves (legal even in double check)
    p = bs[ksq]
    for to in KING_MOVES[ksq]:
        cap = bs[to]
        if cap and piece_color(cap) == color:
            continue
        nb = apply_move(board, Move(ksq, to, p, cap), _trust=True)
        if not is_attacked(nb, to, enemy):
            push(ksq, to, p, cap)

    # castling
    if not checkers:
        if color == WHITE:
            rights = ((CR_WK, 4, 6, (5, 6), FLAG_CASTLE_K),
                      (CR_WQ, 4, 2, (1, 2, 3), FLAG_CASTLE_Q))
        else:
            rights = ((CR_BK, 60, 62, (61, 62), FLAG_CASTLE_K),
                      (CR_BQ, 60, 58, (57, 58, 59), FLAG_CASTLE_Q))
        for bit, kfrm, kto, empties, flag in rights:
            if not (board.castling & bit):
                continue
            if any(bs[s] for s in empties):
                continue
            path = (kfrm + kto) // 2
            if is_attacked(board, path, enemy) or is_attacked(board, kto, enemy):
                continue
            push(kfrm, kto, p, EMPTY, 0, flag)

    moves.sort(key=Move.sort_key)
    return moves


def apply_move(board: Board, move: Move, _trust: bool = False) -> Board:
    """Return the position after `move`. The input board is unchanged."""
    if not _trust and move not in legal_moves(board):
        raise ValueError(f"illegal move {move.uci()} in {board.to_fen()}")
    sq = bytearray(board.sq)
    color = piece_color(move.piece)
    t = piece_type(move.piece)
    sq[move.frm] = EMPTY
    sq[move.to] = move.piece if not move.promo else make_piece(color, move.promo)
    if move.flags & FLAG_EN_PASSANT:
        sq[move.to + (-8 if color == WHITE else 8)] = EMPTY
    elif move.flags & FLAG_CASTLE_K:
        sq[move.to + 1] = EMPTY
        sq[move.to - 1] = make_piece(color, ROOK)
    elif move.flags & FLAG_CASTLE_Q:
        sq[move.to - 2] = EMPTY
        sq[move.to + 1] = make_piece(color, ROOK)
    castling = board.castling
    for s in (move.frm, move.to):
        m = _CR_MASK_BY_SQUARE.get(s)
        if m is not None:
            castling &= m
    ep = -1
    if t == PAWN and abs(move.to - move.frm) == 16:
        ep = (move.frm + move.to) // 2
    halfmove = 0 if (t == PAWN or move.captured) else board.halfmove + 1
    fullmove = board.fullmove + (1 if color == BLACK else 0)
    return Board(bytes(sq), color ^ 1, castling, ep, halfmove, fullmove)


def gives_check(board: Board, move: Move) -> bool:
    after = apply_move(board, move, _trust=True)
    return in_check(after)


# ---------------------------------------------------------------------------
# SAN

import re

_SAN_RE = re.compile(
    r"^(?P<castle>O-O(?:-O)?)|"
    r"(?P<piece>[NBRQK])?(?P<disfile>[a-h])?(?P<disrank>[1-8])?(?P<capture>x)?"
    r"(?P<dest>[a-h][1-8])(?:=(?P<promo>[NBRQ]))?$"
)


class SanError(ValueError):
    pass


def parse_san(board: Board, san: str) -> Move:
    """Resolve a SAN token against the current position."""
    token = san.rstrip("+#!?")
    m = _SAN_RE.match(token)
    if not m:
        raise SanError(f"unparseable SAN {san!r} in {board.to_fen()}")
    legal = legal_moves(board)
    if m.group("castle"):
        flag = FLAG_CASTLE_Q if m.group("castle") == "O-O-O" else FLAG_CASTLE_K
        for mv in legal:
            if mv.flags & flag:
                return mv
        raise SanError(f"illegal SAN {san!r} in {board.to_fen()}")
    ptype = PIECE_CHARS.index(m.group("piece")) if m.group("piece") else PAWN
    dest = parse_square(m.group("dest"))
    promo = PIECE_CHARS.index(m.group("promo")) if m.group("promo") else 0
    disfile = "abcdefgh".index(m.group("disfile")) if m.group("disfile") else -1
    disrank = int(m.group("disrank")) - 1 if m.group("disrank") else -1
    cands = []
    for mv in legal:
        if piece_type(mv.piece) != ptype or mv.to != dest or mv.promo != promo:
            continue
        if mv.flags & (FLAG_CASTLE_K | FLAG_CASTLE_Q):
            continue
        if disfile >= 0 and (mv.frm & 7) != disfile:
            continue
        if disrank >= 0 and (mv.frm >> 3) != disrank:
            continue
        # a pawn capture SAN always names the source file
        if ptype == PAWN and m.group("capture") and disfile < 0:
            continue
        if ptype == PAWN and not m.group("capture") and mv.captured:
            continue
        cands.append(mv)
    if not cands:
        raise SanError(f"illegal SAN {san!r} in {board.to_fen()}")
    if len(cands) > 1:
        raise SanError(f"ambiguous SAN {san!r} in {board.to_fen()}")
    return cands[0]


def move_to_san(board: Board, move: Move, legal=None) -> str:
    if move.flags & FLAG_CASTLE_K:
        san = "O-O"
    elif move.flags & FLAG_CASTLE_Q:
        san = "O-O-O"
    else:
        t = piece_type(move.piece)
        if t == PAWN:
            san = ""
            if move.captured:
                san += "abcdefgh"[move.frm & 7] + "x"
            san += sq_name(move.to)
            if move.promo:
                san += "=" + PIECE_CHARS[move.promo]
        else:
            san = PIECE_CHARS[t]
            if legal is None:
                legal = legal_moves(board)
            rivals = [mv for mv in legal
                      if mv.piece == move.piece and mv.to == move.to and mv.frm != move.frm]
            if rivals:
                same_file = any((mv.frm & 7) == (move.frm & 7) for mv in rivals)
                same_rank = any((mv.frm >> 3) == (move.frm >> 3) for mv in rivals)
                if not same_file:
                    san += "abcdefgh"[move.frm & 7]
                elif not same_rank:
                    san += str((move.frm >> 3) + 1)
                else:
                    san += sq_name(move.frm)
            if move.captured:
                san += "x"
            san += sq_name(move.to)
    after = apply_move(board, move, _trust=True)
    if in_check(after):
        san += "#" if not legal_moves(after) else "+"
    return san


def perft(board: Board, depth: int) -> int:
    if depth == 0:
        return 1
    moves = legal_moves(board)
    if depth == 1:
        return len(moves)
    return sum(perft(apply_move(board, mv, _trust=True), depth - 1) for mv in moves)

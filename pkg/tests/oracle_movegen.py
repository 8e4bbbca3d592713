"""Independent brute-force move generator used only as a test oracle.

Deliberately shares no code with bpchess.board: FEN is parsed here, moves
are generated by scanning all 64x64 from/to pairs against per-piece
movement rules, and legality is decided by making the move on a copied
position and checking whether the king can be captured. Slow and simple on
purpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

FILES = "abcdefgh"


@dataclass
class OraclePos:
    squares: list  # 64 chars, '.' empty, uppercase white
    white_to_move: bool
    castling: str  # subset of "KQkq" or "-"
    ep: int | None  # en-passant target square or None
    fields_rest: tuple = field(default=())


def parse_fen(fen: str) -> OraclePos:
    parts = fen.split()
    rows = parts[0].split("/")
    squares = ["."] * 64
    for r, row in enumerate(rows):
        f = 0
        for ch in row:
            if ch.isdigit():
                f += int(ch)
            else:
                squares[(7 - r) * 8 + f] = ch
                f += 1
    ep = None
    if parts[3] != "-":
        ep = (ord(parts[3][0]) - 97) + (int(parts[3][1]) - 1) * 8
    return OraclePos(squares, parts[1] == "w", parts[2], ep, tuple(parts[4:]))


def _own(pos: OraclePos, ch: str) -> bool:
    return ch != "." and (ch.isupper() == pos.white_to_move)


def _enemy(pos: OraclePos, ch: str) -> bool:
    return ch != "." and (ch.isupper() != pos.white_to_move)


def _on_board(f, r):
    return 0 <= f < 8 and 0 <= r < 8


def _slides(sq, directions):
    f0, r0 = sq % 8, sq // 8
    for df, dr in directions:
        f, r = f0 + df, r0 + dr
        while _on_board(f, r):
            yield r * 8 + f
            f, r = f + df, r + dr


def _attacks_square(squares, target: int, by_white: bool) -> bool:
    """Does `by_white` attack `target` on this raw square list?"""
    tf, tr = target % 8, target // 8
    for sq, ch in enumerate(squares):
        if ch == "." or ch.isupper() != by_white:
            continue
        f, r = sq % 8, sq // 8
        p = ch.upper()
        if p == "P":
            dr = 1 if by_white else -1
            if r + dr == tr and abs(f - tf) == 1:
                return True
        elif p == "N":
            if (abs(f - tf), abs(r - tr)) in ((1, 2), (2, 1)):
                return True
        elif p == "K":
            if max(abs(f - tf), abs(r - tr)) == 1:
                return True
        else:
            dirs = []
            if p in "BQ":
                dirs += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
            if p in "RQ":
                dirs += [(1, 0), (-1, 0), (0, 1), (0, -1)]
            for df, dr in dirs:
                cf, cr = f + df, r + dr
                while _on_board(cf, cr):
                    csq = cr * 8 + cf
                    if csq == target:
                        return True
                    if squares[csq] != ".":
                        break
                    cf, cr = cf + df, cr + dr
    return False


def _pseudo_moves(pos: OraclePos):
    """Yield (frm, to, promo, is_ep, is_castle) pseudo-legal moves."""
    white = pos.white_to_move
    for sq, ch in enumerate(pos.squares):
        if not _own(pos, ch):
            continue
        f, r = sq % 8, sq // 8
        p = ch.upper()
        if p == "P":
            dr = 1 if white else -1
            promo_rank = 7 if white else 0
            one = sq + 8 * dr
            if 0 <= one < 64 and pos.squares[one] == ".":
                promos = "QRBN" if one // 8 == promo_rank else [""]
                for pr in promos:
                    yield sq, one, pr, False, False
                start_rank = 1 if white else 6
                two = sq + 16 * dr
                if r == start_rank and pos.squares[two] == ".":
                    yield sq, two, "", False, False
            for df in (-1, 1):
                if not _on_board(f + df, r + dr):
                    continue
                to = (r + dr) * 8 + (f + df)
                if _enemy(pos, pos.squares[to]):
                    promos = "QRBN" if to // 8 == promo_rank else [""]
                    for pr in promos:
                        yield sq, to, pr, False, False
                elif to == pos.ep:
                    yield sq, to, "", True, False
        elif p == "N":
            for df, dr2 in ((1, 2), (2, 1), (2, -1), (1, -2),
                            (-1, -2), (-2, -1), (-2, 1), (-1, 2)):
                if _on_board(f + df, r + dr2):
                    to = (r + dr2) * 8 + (f + df)
                    if not _own(pos, pos.squares[to]):
                        yield sq, to, "", False, False
        elif p == "K":
            for df, dr2 in ((1, 0), (1, 1), (0, 1), (-1, 1),
                            (-1, 0), (-1, -1), (0, -1), (1, -1)):
                if _on_board(f + df, r + dr2):
                    to = (r + dr2) * 8 + (f + df)
                    if not _own(pos, pos.squares[to]):
                        yield sq, to, "", False, False
            yield from _castles(pos, sq)
        else:
            dirs = []
            if p in "BQ":
                dirs += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
            if p in "RQ":
                dirs += [(1, 0), (-1, 0), (0, 1), (0, -1)]
            for df, dr2 in dirs:
                cf, cr = f + df, r + dr2
                while _on_board(cf, cr):
                    to = cr * 8 + cf
                    if _own(pos, pos.squares[to]):
                        break
                    yield sq, to, "", False, False
                    if pos.squares[to] != ".":
                        break
                    cf, cr = cf + df, cr + dr2


def _castles(pos: OraclePos, king_sq: int):
    white = pos.white_to_move
    home = 4 if white else 60
    if king_sq != home:
        return
    rights = ("K", "Q") if white else ("k", "q")
    enemy = not white
    if _attacks_square(pos.squares, home, enemy):
        return
    if rights[0] in pos.castling:
        if (pos.squares[home + 1] == "." and pos.squares[home + 2] == "."
                and not _attacks_square(pos.squares, home + 1, enemy)
                and not _attacks_square(pos.squares, home + 2, enemy)):
            yield home, home + 2, "", False, True
    if rights[1] in pos.castling:
        if (pos.squares[home - 1] == "." and pos.squares[home - 2] == "."
                and pos.squares[home - 3] == "."
                and not _attacks_square(pos.squares, home - 1, enemy)
                and not _attacks_square(pos.squares, home - 2, enemy)):
            yield home, home - 2, "", False, True


def _make(pos: OraclePos, frm, to, promo, is_ep, is_castle) -> OraclePos:
    squares = list(pos.squares)
    piece = squares[frm]
    squares[frm] = "."
    if is_ep:
        squares[to + (-8 if pos.white_to_move else 8)] = "."
    squares[to] = (promo.upper() if pos.white_to_move else promo.lower()) \
        if promo else piece
    if is_castle:
        if to > frm:  # kingside: rook h-file -> f-file
            squares[frm + 1] = squares[frm + 3]
            squares[frm + 3] = "."
        else:
            squares[frm - 1] = squares[frm - 4]
            squares[frm - 4] = "."
    castling = pos.castling
    for square, lost in ((4, "KQ"), (0, "Q"), (7, "K"),
                         (60, "kq"), (56, "q"), (63, "k")):
        if frm == square or to == square:
            castling = "".join(c for c in castling if c not in lost)
    if not castling:
        castling = "-"
    ep = None
    if piece.upper() == "P" and abs(to - frm) == 16:
        ep = (frm + to) // 2
    return OraclePos(squares, not pos.white_to_move, castling, ep)


def legal_moves(pos: OraclePos) -> list:
    """Sorted (frm, to, promo) triples of all strictly legal moves."""
    out = []
    for frm, to, promo, is_ep, is_castle in _pseudo_moves(pos):
        nxt = _make(pos, frm, to, promo, is_ep, is_castle)
        king = "K" if pos.white_to_move else "k"
        ksq = nxt.squares.index(king)
        if not _attacks_square(nxt.squares, ksq, nxt.white_to_move):
            out.append((frm, to, promo))
    return sorted(out)


def perft(pos: OraclePos, depth: int) -> int:
    if depth == 0:
        return 1
    total = 0
    for frm, to, promo, is_ep, is_castle in _pseudo_moves(pos):
        nxt = _make(pos, frm, to, promo, is_ep, is_castle)
        king = "K" if pos.white_to_move else "k"
        ksq = nxt.squares.index(king)
        if _attacks_square(nxt.squares, ksq, nxt.white_to_move):
            continue
        total += perft(nxt, depth - 1)
    return total

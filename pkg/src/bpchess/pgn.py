"""Tolerant PGN import: headers + SAN movetext, comments/variations stripped.

Malformed games are skipped with a diagnostic rather than aborting the
stream, since public game dumps routinely contain junk.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .board import Board, SanError, apply_move, parse_san

RESULT_TOKENS = {"1-0", "0-1", "1/2-1/2", "*"}

_HEADER_RE = re.compile(r'^\[(\w+)\s+"(.*)"\]\s*$')
_MOVENUM_RE = re.compile(r"^\d+\.(\.\.)?$|^\d+\.\.\.$")
_NAG_RE = re.compile(r"^\$\d+$")


@dataclass
class GameRecord:
    headers: dict
    san_moves: list
    source_id: str

    def elo(self, color_header: str) -> int | None:
        v = self.headers.get(color_header, "")
        try:
            return int(v)
        except ValueError:
            return None


@dataclass
class ParseDiagnostic:
    source_id: str
    reason: str


def _split_movetext(text: str) -> list:
    """Strip comments, variations, NAGs and clock annotations; return SAN tokens."""
    out = []
    depth = 0
    i = 0
    n = len(text)
    buf = []

    def flush():
        if buf:
            out.append("".join(buf))
            buf.clear()

    while i < n:
        c = text[i]
        if c == "{":
            flush()
            j = text.find("}", i)
            i = n if j < 0 else j + 1
            continue
        if c == "(":
            flush()
            depth += 1
            i += 1
            continue
        if c == ")":
            flush()
            depth = max(0, depth - 1)
            i += 1
            continue
        if depth > 0:
            i += 1
            continue
        if c.isspace():
            flush()
        else:
            buf.append(c)
        i += 1
    flush()

    tokens = []
    for tok in out:
        # "1.e4" style glued move numbers
        m = re.match(r"^(\d+)\.(\.\.)?(.*)$", tok)
        if m and m.group(3):
            tok = m.group(3)
        if not tok or _MOVENUM_RE.match(tok) or _NAG_RE.match(tok):
            continue
        if tok in RESULT_TOKENS:
            tokens.append(tok)
            break
        tokens.append(tok)
    return tokens


def parse_pgn(stream: Iterable[str] | TextIO) -> tuple:
    """Parse concatenated PGN games.

    Returns (records, diagnostics). A game with an illegal or unparseable
    SAN token is skipped and reported; stream-level errors never raise.
    """
    records = []
    diagnostics = []
    headers: dict = {}
    movetext_lines: list = []
    index = 0

    def close_game():
        nonlocal headers, movetext_lines, index
        if not headers and not movetext_lines:
            return
        index += 1
        source_id = headers.get("Site") or headers.get("GameId") or f"game-{index}"
        tokens = _split_movetext(" ".join(movetext_lines))
        if tokens and tokens[-1] in RESULT_TOKENS:
            tokens = tokens[:-1]
        if not tokens:
            diagnostics.append(ParseDiagnostic(source_id, "empty movetext"))
        else:
            rec = GameRecord(headers, tokens, source_id)
            err = _verify_replay(rec)
            if err:
                diagnostics.append(ParseDiagnostic(source_id, err))
            else:
                records.append(rec)
        headers = {}
        movetext_lines = []

    in_moves = False
    for line in stream:
        line = line.strip()
        m = _HEADER_RE.match(line)
        if m:
            if in_moves:
                close_game()
                in_moves = False
            headers[m.group(1)] = m.group(2)
        elif line:
            in_moves = True
            movetext_lines.append(line)
    close_game()
    return records, diagnostics


def _verify_replay(record: GameRecord) -> str | None:
    board = Board.initial()
    for san in record.san_moves:
        try:
            board = apply_move(board, parse_san(board, san), _trust=True)
        except SanError as e:
            return f"bad SAN token {san!r}: {e}"
    return None


def replay(record: GameRecord):
    """Yield (board_before, move, board_after) per ply."""
    board = Board.initial()
    for san in record.san_moves:
        mv = parse_san(board, san)
        after = apply_move(board, mv, _trust=True)
        yield board, mv, after
        board = after


def format_game(headers: dict, san_moves: list, result: str) -> str:
    """Render one PGN game (used by the corpus generator and tests)."""
    lines = [f'[{k} "{v}"]' for k, v in headers.items()]
    lines.append("")
    toks = []
    for i, san in enumerate(san_moves):
        if i % 2 == 0:
            toks.append(f"{i // 2 + 1}.")
        toks.append(san)
    toks.append(result)
    body, cur = [], ""
    for t in toks:
        if cur and len(cur) + 1 + len(t) > 80:
            body.append(cur)
            cur = t
        else:
            cur = f"{cur} {t}".strip()
    if cur:
        body.append(cur)
    lines.extend(body)
    lines.append("")
    return "\n".join(lines)

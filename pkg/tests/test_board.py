"""Move generation, SAN, FEN — cross-checked against the brute-force oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle_movegen as oracle
from bpchess.board import (Board, Move, SanError, apply_move, gives_check,
                           in_check, legal_moves, move_to_san, parse_san,
                           parse_square, perft, sq_name)

START = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"
KIWIPETE = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"
POSITION3 = "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1"
POSITION5 = "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8"

_PROMO_CHARS = {0: "", 2: "N", 3: "B", 4: "R", 5: "Q"}


def as_triples(moves):
    return sorted((m.frm, m.to, _PROMO_CHARS[m.promo]) for m in moves)


def random_position(seed: int, plies: int) -> Board:
    """Walk `plies` random legal moves from the start position."""
    rng = np.random.default_rng(seed)
    board = Board.initial()
    for _ in range(plies):
        moves = legal_moves(board)
        if not moves:
            break
        board = apply_move(board, moves[int(rng.integers(len(moves)))])
    return board


class TestPerft:
    @pytest.mark.parametrize("depth,expected",
                             [(0, 1), (1, 20), (2, 400), (3, 8902)])
    def test_initial_counts(self, depth, expected):
        assert perft(Board.initial(), depth) == expected
        assert oracle.perft(oracle.parse_fen(START), depth) == expected

    def test_depth_four(self):
        assert perft(Board.initial(), 4) == 197281

    @pytest.mark.parametrize("fen,depth,expected", [
        (KIWIPETE, 1, 48), (KIWIPETE, 2, 2039),
        (POSITION3, 2, 191), (POSITION3, 3, 2812),
        (POSITION5, 1, 44), (POSITION5, 2, 1486),
    ])
    def test_fixed_positions_match_oracle(self, fen, depth, expected):
        assert perft(Board.from_fen(fen), depth) == expected
        assert oracle.perft(oracle.parse_fen(fen), depth) == expected


class TestLegalMovesVsOracle:
    @pytest.mark.parametrize("fen", [START, KIWIPETE, POSITION3, POSITION5])
    def test_fixed_positions(self, fen):
        ours = as_triples(legal_moves(Board.from_fen(fen)))
        assert ours == oracle.legal_moves(oracle.parse_fen(fen))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), plies=st.integers(0, 60))
    def test_random_walks(self, seed, plies):
        board = random_position(seed, plies)
        ours = as_triples(legal_moves(board))
        assert ours == oracle.legal_moves(oracle.parse_fen(board.to_fen()))

    def test_canonical_order(self):
        moves = legal_moves(Board.initial())
        assert moves == sorted(moves, key=lambda m: (m.frm, m.to, m.promo))


class TestFen:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), plies=st.integers(0, 40))
    def test_round_trip(self, seed, plies):
        board = random_position(seed, plies)
        assert Board.from_fen(board.to_fen()).to_fen() == board.to_fen()

    def test_initial_fen(self):
        assert Board.initial().to_fen() == START


class TestApplyMove:
    def test_en_passant_capture_removes_pawn(self):
        board = Board.initial()
        for san in ("e4", "a6", "e5", "d5"):
            board = apply_move(board, parse_san(board, san))
        mv = parse_san(board, "exd6")
        after = apply_move(board, mv)
        assert after.sq[parse_square("d5")] == 0
        assert after.to_fen().split()[0].count("p") == 7

    def test_castling_moves_rook(self):
        board = Board.initial()
        for san in ("e4", "e5", "Nf3", "Nc6", "Bc4", "Bc5"):
            board = apply_move(board, parse_san(board, san))
        after = apply_move(board, parse_san(board, "O-O"))
        fen = after.to_fen()
        assert fen.split()[0].split("/")[-1] == "RNBQ1RK1"
        assert "K" not in fen.split()[2]  # white rights gone

    def test_promotion(self):
        board = Board.from_fen("8/P6k/8/8/8/8/8/K7 w - - 0 1")
        mv = parse_san(board, "a8=Q")
        after = apply_move(board, mv)
        assert after.to_fen().split()[0].startswith("Q7/")

    def test_halfmove_and_fullmove_clocks(self):
        board = Board.initial()
        board = apply_move(board, parse_san(board, "Nf3"))
        assert board.halfmove == 1 and board.fullmove == 1
        board = apply_move(board, parse_san(board, "d5"))
        assert board.halfmove == 0 and board.fullmove == 2


class TestSan:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), plies=st.integers(0, 50))
    def test_round_trip_every_legal_move(self, seed, plies):
        board = random_position(seed, plies)
        moves = legal_moves(board)
        sans = [move_to_san(board, m, moves) for m in moves]
        assert len(set(sans)) == len(sans)  # disambiguation is complete
        for san, mv in zip(sans, moves):
            assert parse_san(board, san) == mv

    def test_check_and_mate_suffixes(self):
        board = Board.from_fen("k7/8/1K6/8/7Q/8/8/8 w - - 0 1")
        assert move_to_san(board, parse_san(board, "Qa4")).endswith("+")
        assert move_to_san(board, parse_san(board, "Qd8")).endswith("#")

    def test_file_disambiguation(self):
        board = Board.from_fen("k7/8/8/8/8/8/8/K1N1N3 w - - 0 1")
        mv = parse_san(board, "Ncd3")
        assert sq_name(mv.frm) == "c1"

    def test_ambiguous_san_rejected(self):
        board = Board.from_fen("k7/8/8/8/8/8/8/K1N1N3 w - - 0 1")
        with pytest.raises(SanError):
            parse_san(board, "Nd3")

    def test_illegal_san_rejected(self):
        with pytest.raises(SanError):
            parse_san(Board.initial(), "Ke2")
        with pytest.raises(SanError):
            parse_san(Board.initial(), "garbage")


class TestChecks:
    def test_gives_check_matches_resulting_position(self):
        board = random_position(3, 24)
        for mv in legal_moves(board):
            assert gives_check(board, mv) == in_check(apply_move(board, mv))

    def test_stalemate_has_no_moves_and_no_check(self):
        board = Board.from_fen("k7/8/1Q6/8/8/8/8/K7 b - - 0 1")
        assert legal_moves(board) == []
        assert not in_check(board)

    def test_checkmate_has_no_moves_and_check(self):
        board = Board.from_fen("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1")
        assert legal_moves(board) == []
        assert in_check(board)


class TestMoveType:
    def test_promo_default(self):
        mv = Move(frm=8, to=16, piece=1, captured=0)
        assert mv.promo == 0 and mv.flags == 0

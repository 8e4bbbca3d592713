"""Strategy threads and the vectorized extractor must agree exactly."""

import numpy as np
import pytest

from bpchess.board import (BLACK, WHITE, Board, apply_move, legal_moves,
                           parse_san)
from bpchess.strategies import (ADVANCED_REGS, BASIC_REGS, COUNTER_REGS,
                                REGISTER_RANGES, FeatureExtractor,
                                FeatureSchema, build_kernel,
                                counted_piece_register, encode,
                                is_useless_pawn_move, move_event,
                                snapshot_vector)

ADV = FeatureSchema(advanced=True)
BASIC = FeatureSchema(advanced=False)

CASTLING_GAME = ["e4", "e5", "Nf3", "Nc6", "Bc4", "Nf6", "O-O", "Bc5",
                 "d3", "d6", "Bg5", "Bg4", "Nc3", "Qd7", "Nd5", "O-O-O",
                 "Qd2", "h6", "Bxf6", "gxf6"]


def kernel_states(schema, sans):
    """Storage-layout state after every ply, driven through the kernel."""
    kernel = build_kernel(schema)
    board = Board.initial()
    states = [snapshot_vector(kernel, schema)]
    for san in sans:
        move = parse_san(board, san)
        kernel.dispatch(move_event(board, move, san))
        board = apply_move(board, move)
        states.append(snapshot_vector(kernel, schema))
    return states


def extractor_states(schema, sans):
    ex = FeatureExtractor(schema)
    board = Board.initial()
    state = ex.initial_state()
    states = [state.copy()]
    for san in sans:
        move = parse_san(board, san)
        state = ex.advance(board, state, move)
        board = apply_move(board, move, _trust=True)
        states.append(state.copy())
    return states


class TestSchema:
    def test_lengths(self):
        assert len(BASIC) == 27
        assert len(ADV) == 37
        assert len(BASIC.names) == 27
        assert len(ADV.storage_names) == 37

    def test_register_roster(self):
        assert len(COUNTER_REGS) == 5
        assert len(BASIC_REGS) == 13  # five counters + eight basic strategies
        assert len(ADVANCED_REGS) == 5

    def test_version_ids_distinct_and_stable(self):
        assert ADV.version_id != BASIC.version_id
        assert ADV.version_id == FeatureSchema(True).version_id

    def test_write_read_round_trip(self, tmp_path):
        for schema in (BASIC, ADV):
            path = tmp_path / "schema.txt"
            schema.write(path)
            assert FeatureSchema.read(path) == schema

    def test_read_rejects_tampered_file(self, tmp_path):
        path = tmp_path / "schema.txt"
        ADV.write(path)
        text = path.read_text().replace("own_space", "own_pace")
        path.write_text(text)
        with pytest.raises(ValueError, match="register layout"):
            FeatureSchema.read(path)


class TestKernelExtractorParity:
    @pytest.mark.parametrize("schema", [BASIC, ADV], ids=["basic", "advanced"])
    def test_full_game_states_identical(self, schema):
        ks = kernel_states(schema, CASTLING_GAME)
        es = extractor_states(schema, CASTLING_GAME)
        for ply, (a, b) in enumerate(zip(ks, es)):
            assert np.array_equal(a, b), \
                f"ply {ply}: {dict(zip(schema.storage_names, a - b))}"

    def test_candidate_rows_match_kernel_forks(self):
        """Every candidate after-state equals a forked kernel's snapshot."""
        schema = ADV
        kernel = build_kernel(schema)
        ex = FeatureExtractor(schema)
        board = Board.initial()
        state = ex.initial_state()
        for san in ["e4", "e5", "Nf3", "Nc6", "Bb5"]:
            moves, sans, afters = ex.candidate_states(board, state)
            for pick in (0, len(moves) // 2, len(moves) - 1):
                fork = kernel.fork()
                fork.dispatch(move_event(board, moves[pick], sans[pick]))
                assert np.array_equal(snapshot_vector(fork, schema),
                                      afters[pick])
            move = parse_san(board, san)
            kernel.dispatch(move_event(board, move, san))
            state = ex.advance(board, state, move)
            board = apply_move(board, move)


class TestUpdateRules:
    def test_counters_monotone_and_castle_counts_rook(self):
        states = extractor_states(ADV, CASTLING_GAME)
        ex = FeatureExtractor(ADV)
        for reg in COUNTER_REGS:
            for cname in ("white", "black"):
                col = ex.col(f"{cname}_{reg}")
                vals = [s[col] for s in states]
                assert all(b >= a for a, b in zip(vals, vals[1:]))
        # white castled kingside at ply 7: rook_moves ticks, king not counted
        col = ex.col("white_rook_moves")
        assert states[7][col] == states[6][col] + 1

    def test_castle_state_latches(self):
        states = extractor_states(ADV, CASTLING_GAME)
        ex = FeatureExtractor(ADV)
        wc = ex.col("white_castle_state")
        bc = ex.col("black_castle_state")
        assert states[6][wc] == 0 and states[7][wc] == 1  # O-O
        assert states[16][bc] == 2  # O-O-O
        assert all(s[wc] == 1 for s in states[7:])

    def test_early_queen_flag(self):
        states = extractor_states(ADV, ["e4", "e5", "Qh5", "Nc6"])
        ex = FeatureExtractor(ADV)
        col = ex.col("white_early_queen_flag")
        assert states[2][col] == 0
        assert states[3][col] == 1
        assert states[4][col] == 1  # latched

    def test_useless_pawn_move_rule(self):
        board = Board.initial()
        by_san = {}
        for mv in legal_moves(board):
            from bpchess.board import move_to_san
            by_san[move_to_san(board, mv)] = mv
        assert is_useless_pawn_move(by_san["a4"], WHITE)
        assert is_useless_pawn_move(by_san["h3"], WHITE)
        assert not is_useless_pawn_move(by_san["e4"], WHITE)  # occupies center
        assert not is_useless_pawn_move(by_san["b3"], WHITE)  # eyes c4
        assert not is_useless_pawn_move(by_san["Nf3"], WHITE)  # not a pawn

    def test_ply_index_counts_all_moves(self):
        states = extractor_states(ADV, CASTLING_GAME)
        ex = FeatureExtractor(ADV)
        col = ex.col("ply_index")
        assert [s[col] for s in states] == list(range(len(CASTLING_GAME) + 1))

    def test_counted_piece_register_rules(self):
        board = Board.initial()
        mv = parse_san(board, "Nf3")
        assert counted_piece_register(mv) == "knight_moves"


class TestRanges:
    def test_fixture_registers_within_documented_ranges(self, fixture_dataset):
        ds = fixture_dataset
        names = ds.schema.names
        for matrix in (ds.before, ds.after):
            for j, name in enumerate(names):
                base = name.split("_", 1)[1] if name != "ply_index" else name
                rng = REGISTER_RANGES[base]
                col = matrix[:, j]
                assert col.min() >= 0, name
                if ".." in rng:
                    hi = float(rng.split("..")[1])
                    assert col.max() <= hi, name


class TestEncode:
    def test_mover_relative_swap(self):
        state = np.arange(37, dtype=np.float32)
        w = encode(state, WHITE, ADV)
        b = encode(state, BLACK, ADV)
        n = len(ADV.per_color_regs)
        assert np.array_equal(w[:n], state[:n])
        assert np.array_equal(b[:n], state[n:2 * n])
        assert np.array_equal(w[n:2 * n], b[:n])
        assert w[-1] == b[-1] == state[-1]

    def test_encode_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="length"):
            encode(np.zeros(27, dtype=np.float32), WHITE, ADV)

    def test_encode_matrix_rows(self):
        mat = np.arange(74, dtype=np.float32).reshape(2, 37)
        enc = encode(mat, BLACK, ADV)
        assert enc.shape == (2, 37)
        assert np.array_equal(enc[0], encode(mat[0], BLACK, ADV))

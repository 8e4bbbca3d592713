#!/usr/bin/env python3
"""Generate the bundled PGN corpus with a principle-following move policy.

Games are played by sampling moves from a softmax over feature deltas: the
same registers the pipeline extracts (center control, development,
castling, material, ...) score each legal move, and a temperature controls
how faithfully the mover follows the principles. This yields openings with
a learnable structure-to-move mapping plus realistic label noise, without
any external data dependency.

A slice of contaminant games (wrong Elo, bullet/classical time controls,
abandoned or unterminated games) is mixed in so the filtering stages have
real work to do.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from bpchess.board import Board, apply_move  # noqa: E402
from bpchess.pgn import format_game  # noqa: E402
from bpchess.strategies import FeatureExtractor, FeatureSchema, encode  # noqa: E402

# Principle weights over mover-relative register deltas. Positive: the
# policy seeks the register; negative: it avoids increasing it.
POLICY_WEIGHTS = {
    "own_center_control": 1.0,
    "own_developed": 1.3,
    "own_space": 0.25,
    "own_weak_square_pressure": 0.6,
    "own_pawn_weaknesses": -0.8,
    "own_early_queen_flag": -1.6,
    "own_useless_pawn_moves": -1.6,
    "own_castle_state": 1.2,
    "own_queen_moves": -0.5,
    "own_rook_moves": -0.4,
    "own_defended_pieces": 0.25,
    "own_attacks_made": 0.25,
    "own_pins_made": 0.5,
    "own_captures_made": 0.4,
    "opp_material_points": -1.1,
    "opp_center_control": -0.3,
    "opp_space": -0.15,
}

RESULTS = ("1-0", "0-1", "1/2-1/2")
RESULT_WEIGHTS = (0.48, 0.45, 0.07)
TIME_CONTROLS = ("600+0", "600+5", "900+10", "1200+0")
_ID_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def weight_vector(schema: FeatureSchema) -> np.ndarray:
    w = np.zeros(len(schema), dtype=np.float64)
    for name, value in POLICY_WEIGHTS.items():
        w[schema.names.index(name)] = value
    return w


def play_game(extractor: FeatureExtractor, wvec: np.ndarray,
              temperature: float, max_plies: int, rng) -> list:
    schema = extractor.schema
    board = Board.initial()
    state = extractor.initial_state()
    sans_out = []
    for _ in range(max_plies):
        moves, sans, afters = extractor.candidate_states(board, state)
        if not moves:
            break
        before_enc = encode(state, board.stm, schema)
        afters_enc = encode(afters, board.stm, schema)
        scores = (afters_enc - before_enc) @ wvec
        z = (scores - scores.max()) / temperature
        probs = np.exp(z)
        probs /= probs.sum()
        idx = int(rng.choice(len(moves), p=probs))
        sans_out.append(sans[idx])
        state = afters[idx]
        board = apply_move(board, moves[idx], _trust=True)
    return sans_out


def game_headers(n: int, bucket: int, rng, kind: str = "clean") -> tuple:
    """(headers, result) for one game; `kind` selects a contamination mode."""
    site_id = "".join(rng.choice(list(_ID_ALPHABET), size=8))
    we = int(rng.integers(bucket, bucket + 100))
    be = int(rng.integers(bucket, bucket + 100))
    tc = str(rng.choice(TIME_CONTROLS))
    result = str(rng.choice(RESULTS, p=RESULT_WEIGHTS))
    termination = "Normal"
    if kind == "elo":
        offset = int(rng.choice([-300, 300]))
        we, be = we + offset, be + offset
    elif kind == "time":
        tc = str(rng.choice(["60+0", "180+2", "1800+20"]))
    elif kind == "abandoned":
        termination = "Abandoned"
    elif kind == "unfinished":
        result = "*"
    headers = {
        "Event": "Rated Rapid game",
        "Site": f"https://lichess.org/{site_id}",
        "White": f"player{2 * n}",
        "Black": f"player{2 * n + 1}",
        "Result": result,
        "WhiteElo": str(we),
        "BlackElo": str(be),
        "TimeControl": tc,
        "Termination": termination,
    }
    return headers, result


def generate(out_path: Path, n_clean: int, n_contaminated: int, bucket: int,
             temperature: float, max_plies: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(advanced=True)
    extractor = FeatureExtractor(schema)
    wvec = weight_vector(schema)
    kinds = ["clean"] * n_clean
    contaminant_cycle = ("elo", "time", "abandoned", "unfinished")
    kinds += [contaminant_cycle[i % 4] for i in range(n_contaminated)]
    order = rng.permutation(len(kinds))
    with open(out_path, "w", encoding="utf-8") as f:
        for n, pos in enumerate(order):
            kind = kinds[pos]
            headers, result = game_headers(n, bucket, rng, kind)
            plies = int(rng.integers(max_plies - 6, max_plies + 1))
            sans = play_game(extractor, wvec, temperature, plies, rng)
            f.write(format_game(headers, sans, result))
            f.write("\n")
            if (n + 1) % 500 == 0:
                print(f"{n + 1}/{len(kinds)} games", file=sys.stderr)
    print(f"wrote {len(kinds)} games ({n_clean} in-bucket) to {out_path}",
          file=sys.stderr)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--games", type=int, default=5500,
                    help="in-bucket, complete games")
    ap.add_argument("--contaminants", type=int, default=300,
                    help="games the filter should reject")
    ap.add_argument("--bucket", type=int, default=1200)
    ap.add_argument("--temperature", type=float, default=0.35)
    ap.add_argument("--max-plies", type=int, default=28)
    ap.add_argument("--seed", type=int, default=20240817)
    args = ap.parse_args()
    generate(args.out, args.games, args.contaminants, args.bucket,
             args.temperature, args.max_plies, args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""PGN archives -> training matrices.

Pipeline: filter games (time control, Elo window, completeness), truncate
each game to its opening, replay it while emitting one row per legal
candidate move (label 1 for the move actually played), then optionally
balance with SMOTE or aggregate played-frequencies into probability
labels. Every stage is seeded and deterministic; a provenance report
records counts and the exact configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd

from .board import Board, SanError, apply_move, parse_san
from .pgn import GameRecord, ParseDiagnostic, parse_pgn
from .strategies import FeatureExtractor, FeatureSchema, encode


def release_memory() -> None:
    """Return freed heap pages to the OS after allocation-heavy phases.

    Replaying thousands of games churns millions of small objects; glibc
    keeps the freed arena resident, which can push a multi-million-row
    pipeline over the container memory limit. malloc_trim gives those
    pages back so the model-fitting phase starts from the true live set.
    """
    import ctypes
    import gc

    gc.collect()
    try:
        ctypes.CDLL("libc.so.6").malloc_trim(0)
    except OSError:  # non-glibc platform; trimming is a best-effort hint
        pass

OPENING_PLY_LIMIT = 20  # ten full moves when castling does not decide it


class DataError(ValueError):
    """Bad input data (malformed files, empty filter results, schema drift)."""


@dataclass
class FilterConfig:
    elo_lo: int = 1200
    elo_hi: int = 1300
    time_base_min: int = 600
    time_base_max: int = 1200
    require_complete: bool = True
    max_games: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.elo_lo >= self.elo_hi:
            raise ValueError("elo_lo must be below elo_hi")
        if not (0 < self.time_base_min <= self.time_base_max):
            raise ValueError("bad time-control window")


def time_control_base(tc: str) -> int | None:
    """Base thinking seconds of a TimeControl header like '600+5'."""
    base = tc.split("+")[0]
    try:
        return int(base)
    except ValueError:
        return None


_BAD_TERMINATIONS = {"abandoned", "unterminated"}
_COMPLETE_RESULTS = {"1-0", "0-1", "1/2-1/2"}


def filter_games(records: list, config: FilterConfig):
    """Apply the filtering scheme; returns (kept, diagnostics, stage_counts)."""
    diagnostics = []
    counts = {"input": len(records)}

    def drop(rec, reason):
        diagnostics.append(ParseDiagnostic(rec.source_id, reason))

    stage = []
    for rec in records:
        tc = rec.headers.get("TimeControl")
        if tc is None:
            drop(rec, "missing TimeControl header")
            continue
        base = time_control_base(tc)
        if base is None or not (config.time_base_min <= base <= config.time_base_max):
            drop(rec, f"time control {tc!r} outside rapid window")
            continue
        stage.append(rec)
    counts["after_time_filter"] = len(stage)

    kept = []
    for rec in stage:
        we, be = rec.elo("WhiteElo"), rec.elo("BlackElo")
        if we is None or be is None:
            drop(rec, "missing or unparseable Elo header")
            continue
        if not (config.elo_lo <= we < config.elo_hi and
                config.elo_lo <= be < config.elo_hi):
            drop(rec, f"Elo {we}/{be} outside [{config.elo_lo},{config.elo_hi})")
            continue
        kept.append(rec)
    counts["after_elo_filter"] = len(kept)

    if config.require_complete:
        stage, kept = kept, []
        for rec in stage:
            result = rec.headers.get("Result", "*")
            term = rec.headers.get("Termination", "").lower()
            if result not in _COMPLETE_RESULTS or term in _BAD_TERMINATIONS:
                drop(rec, f"unfinished game (result {result!r})")
                continue
            kept.append(rec)
    counts["after_result_filter"] = len(kept)

    if config.max_games is not None and len(kept) > config.max_games:
        rng = np.random.default_rng(config.seed)
        idx = sorted(rng.choice(len(kept), size=config.max_games, replace=False))
        kept = [kept[i] for i in idx]
    counts["after_sampling"] = len(kept)
    return kept, diagnostics, counts


def truncate_opening(record: GameRecord) -> GameRecord:
    """Cut at the second castle; otherwise at ten full moves."""
    castle_plies = [i for i, san in enumerate(record.san_moves)
                    if san.startswith("O-O")]
    if len(castle_plies) >= 2:
        cut = castle_plies[1] + 1
    else:
        cut = min(len(record.san_moves), OPENING_PLY_LIMIT)
    return GameRecord(record.headers, record.san_moves[:cut], record.source_id)


@dataclass
class Dataset:
    """Feature rows plus enough bookkeeping to split and re-run exactly."""
    schema: FeatureSchema
    before: np.ndarray  # (n, len(schema)) mover-relative
    after: np.ndarray
    label: np.ndarray  # float32; binary 0/1 or probability
    games: list  # game id strings
    game_index: np.ndarray  # (n,) int32 into games
    ply: np.ndarray  # (n,) int32
    move_san: list  # per-row SAN, debug only
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.label)

    @property
    def game_id_per_row(self):
        return [self.games[i] for i in self.game_index]


def extract_rows(record: GameRecord, extractor: FeatureExtractor):
    """Rows for every (ply, legal move) of one truncated game.

    Raises SanError when the recorded moves do not replay; the caller
    drops the game with a diagnostic.
    """
    schema = extractor.schema
    board = Board.initial()
    state = extractor.initial_state()
    befores, afters_all, labels, plies, sans_all = [], [], [], [], []
    for ply, san in enumerate(record.san_moves):
        played = parse_san(board, san)
        moves, sans, afters = extractor.candidate_states(board, state)
        played_idx = moves.index(played)
        mover = board.stm
        before_enc = encode(state, mover, schema)
        afters_enc = encode(afters, mover, schema)
        lab = np.zeros(len(moves), dtype=np.float32)
        lab[played_idx] = 1.0
        befores.append(np.repeat(before_enc[None, :], len(moves), axis=0))
        afters_all.append(afters_enc)
        labels.append(lab)
        plies.append(np.full(len(moves), ply, dtype=np.int32))
        sans_all.extend(sans)
        state = afters[played_idx]
        board = apply_move(board, played, _trust=True)
    return (np.concatenate(befores), np.concatenate(afters_all),
            np.concatenate(labels), np.concatenate(plies), sans_all)


def build_dataset(records: list, schema: FeatureSchema,
                  provenance: dict | None = None) -> Dataset:
    """Replay filtered+truncated games and assemble the row matrices."""
    extractor = FeatureExtractor(schema)
    befores, afters, labels, plies, game_index = [], [], [], [], []
    sans = []
    games = []
    diagnostics = []
    for rec in records:
        rec = truncate_opening(rec)
        try:
            b, a, l, p, s = extract_rows(rec, extractor)
        except SanError as e:
            diagnostics.append(ParseDiagnostic(rec.source_id, f"replay failed: {e}"))
            continue
        gi = len(games)
        games.append(rec.source_id)
        befores.append(b)
        afters.append(a)
        labels.append(l)
        plies.append(p)
        game_index.append(np.full(len(l), gi, dtype=np.int32))
        sans.extend(s)
    if not befores:
        raise DataError("no games survived extraction")
    prov = dict(provenance or {})
    prov["games_extracted"] = len(games)
    prov["replay_dropped"] = len(diagnostics)
    prov["rows"] = int(sum(len(l) for l in labels))
    ds = Dataset(schema=schema,
                 before=np.concatenate(befores),
                 after=np.concatenate(afters),
                 label=np.concatenate(labels),
                 games=games,
                 game_index=np.concatenate(game_index),
                 ply=np.concatenate(plies),
                 move_san=sans,
                 provenance=prov)
    ds.provenance["extraction_diagnostics"] = [
        f"{d.source_id}: {d.reason}" for d in diagnostics]
    release_memory()
    return ds


def aggregate_probabilities(before: np.ndarray, after: np.ndarray,
                            label: np.ndarray):
    """Collapse duplicate (before, after) rows into played-frequency labels.

    The probability of a move is (#times played from its before-state) /
    (#times the before-state occurred); per before-state the labels over
    observed moves sum to one.
    """
    before = np.ascontiguousarray(before, dtype=np.float32)
    after = np.ascontiguousarray(after, dtype=np.float32)
    pair = np.concatenate([before, after], axis=1)
    pair_v = pair.view([("", pair.dtype)] * pair.shape[1]).ravel()
    _, pair_first, pair_inv = np.unique(pair_v, return_index=True,
                                        return_inverse=True)
    before_v = pair_v = None  # noqa: F841 - free the big views eagerly
    bv = before.view([("", before.dtype)] * before.shape[1]).ravel()
    _, before_inv = np.unique(bv, return_inverse=True)

    played_per_pair = np.bincount(pair_inv, weights=label)
    # each occurrence of a before-state contributes exactly one played row
    state_occurrences = np.bincount(before_inv, weights=label)
    state_of_pair = before_inv[pair_first]
    if np.any(state_occurrences == 0):
        raise DataError("before-state with no played move; rows are not "
                        "grouped by ply (every ply must contribute exactly "
                        "one label-1 row)")
    # float64 keeps per-group sums within 1e-9 of one; float32 would not
    probs = played_per_pair / state_occurrences[state_of_pair]
    return before[pair_first], after[pair_first], probs, state_of_pair


# ---------------------------------------------------------------------------
# serialization

_BOOKKEEPING = ("game_id", "ply", "move", "label")


def _columns(schema: FeatureSchema) -> list:
    return list(_BOOKKEEPING) + [f"before_{n}" for n in schema.names] + \
        [f"after_{n}" for n in schema.names]


def write_dataset(ds: Dataset, path) -> None:
    """CSV, UTF-8, floats at 9 significant digits; byte-stable given a seed."""
    cols = _columns(ds.schema)
    frame = {"game_id": pd.Series(ds.game_id_per_row, dtype="string"),
             "ply": ds.ply,
             "move": pd.Series(ds.move_san, dtype="string"),
             "label": ds.label}
    for j, n in enumerate(ds.schema.names):
        frame[f"before_{n}"] = ds.before[:, j]
    for j, n in enumerate(ds.schema.names):
        frame[f"after_{n}"] = ds.after[:, j]
    df = pd.DataFrame(frame, columns=cols)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# schema={ds.schema.version_id}\n")
        df.to_csv(f, index=False, float_format="%.9g", lineterminator="\n")


def read_dataset(path, schema: FeatureSchema | None = None) -> Dataset:
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith("# schema="):
            raise DataError(f"{path}: missing schema marker line")
        version = first.strip().split("=", 1)[1]
        for candidate in (FeatureSchema(False), FeatureSchema(True)):
            if candidate.version_id == version:
                file_schema = candidate
                break
        else:
            raise DataError(f"{path}: unknown schema version {version!r}")
        if schema is not None and schema.version_id != version:
            raise DataError(f"{path}: schema {version} does not match "
                            f"expected {schema.version_id}")
        df = pd.read_csv(f, dtype={"game_id": "string", "move": "string"})
    expected = _columns(file_schema)
    unknown = [c for c in df.columns if c not in expected]
    if unknown:
        raise DataError(f"{path}: unknown column {unknown[0]!r}")
    missing = [c for c in expected if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing column {missing[0]!r}")
    codes, uniques = pd.factorize(df["game_id"])
    games = [str(g) for g in uniques]
    game_index = codes.astype(np.int32)
    n = len(file_schema.names)
    before = df[[f"before_{c}" for c in file_schema.names]].to_numpy(np.float32)
    after = df[[f"after_{c}" for c in file_schema.names]].to_numpy(np.float32)
    return Dataset(schema=file_schema, before=before, after=after,
                   label=df["label"].to_numpy(np.float32),
                   games=games, game_index=game_index,
                   ply=df["ply"].to_numpy(np.int32),
                   move_san=df["move"].tolist())


def write_provenance(ds: Dataset, counts: dict, config, seed: int,
                     sources: list, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("bpchess dataset provenance\n")
        f.write(f"schema={ds.schema.version_id}\n")
        f.write(f"seed={seed}\n")
        for s in sources:
            f.write(f"source={s}\n")
        for k, v in asdict(config).items():
            f.write(f"config.{k}={v}\n")
        for k, v in counts.items():
            f.write(f"count.{k}={v}\n")
        for k in ("games_extracted", "replay_dropped", "rows"):
            f.write(f"count.{k}={ds.provenance.get(k)}\n")
        for line in ds.provenance.get("extraction_diagnostics", []):
            f.write(f"skip: {line}\n")

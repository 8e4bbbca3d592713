"""bpchess command line.

Subcommands: build, train, eval, report, explain, perft, grid, config.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Every command is deterministic given identical inputs and seed; the seed
resolves as flag > config file > BPCHESS_SEED > 0.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .board import Board, SanError, apply_move, parse_san, perft
from .dataset import (DataError, FilterConfig, build_dataset, filter_games,
                      aggregate_probabilities, read_dataset, truncate_opening,
                      write_dataset, write_provenance)
from .evaluation import run_protocol, read_eval_csvs, write_eval_csv, \
    format_report_csv, format_report_markdown
from .models import (CLASSIFIERS, FAMILIES, REGRESSORS, TrainConfig,
                     fit_model, load_model, save_model)
from .pgn import parse_pgn
from .smote import smote_balance
from .strategies import FeatureExtractor, FeatureSchema, encode

BUCKET_WIDTH = 100


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully resolved knobs for one command: config file merged with flags.

    Flags win over file keys, file keys win over defaults. `seed=None`
    falls back to BPCHESS_SEED and finally 0.
    """
    elo_bucket: int = 1200
    time_base_min: int = 600
    time_base_max: int = 1200
    require_complete: bool = True
    max_games: int | None = None
    advanced: bool = False
    task: str = "binary"
    family: str = "ridge"
    seed: int = 0
    repeats: int = 10
    split_frac: float = 0.8
    smote_k: int = 5
    ridge_alpha: float = 1.0
    logreg_c: float = 0.1
    logreg_max_iter: int = 4000
    logreg_tol: float = 1e-4
    svc_c: float = 1.0
    svc_max_iter: int = 1000
    mlp_hidden: str = "32,16"
    mlp_lr: float = 5e-2
    mlp_epochs: int = 60
    mlp_batch: int = 128

    def filter_config(self) -> FilterConfig:
        return FilterConfig(elo_lo=self.elo_bucket,
                            elo_hi=self.elo_bucket + BUCKET_WIDTH,
                            time_base_min=self.time_base_min,
                            time_base_max=self.time_base_max,
                            require_complete=self.require_complete,
                            max_games=self.max_games, seed=self.seed)

    def train_config(self, family: str | None = None) -> TrainConfig:
        hidden = tuple(int(x) for x in str(self.mlp_hidden).split(",") if x)
        return TrainConfig(family=family or self.family,
                           ridge_alpha=self.ridge_alpha,
                           logreg_c=self.logreg_c,
                           logreg_max_iter=self.logreg_max_iter,
                           logreg_tol=self.logreg_tol,
                           svc_c=self.svc_c, svc_max_iter=self.svc_max_iter,
                           mlp_hidden=hidden, mlp_lr=self.mlp_lr,
                           mlp_epochs=self.mlp_epochs,
                           mlp_batch=self.mlp_batch, seed=self.seed,
                           split_frac=self.split_frac, repeats=self.repeats)


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    current = getattr(RunConfig(), key)
    if key == "max_games":
        return None if raw.lower() in ("none", "") else int(raw)
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise UsageError(f"config key {key} expects a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def load_config_file(path: str) -> dict:
    """Flat key=value text; '#' starts a comment; unknown keys are errors."""
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}")
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise UsageError(f"config line without '=': {ln!r}")
        key, raw = (part.strip() for part in ln.split("=", 1))
        values[key] = _coerce(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_values = load_config_file(args.config) if getattr(args, "config", None) \
        else {}
    for key, value in file_values.items():
        setattr(cfg, key, value)
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    if getattr(args, "seed", None) is None and "seed" not in file_values:
        cfg.seed = int(os.environ.get("BPCHESS_SEED", "0"))
    return cfg


def dump_config(cfg: RunConfig, out=None) -> None:
    out = out if out is not None else sys.stdout  # bind stdout at call time
    for f in fields(RunConfig):
        out.write(f"{f.name}={getattr(cfg, f.name)}\n")


# ---------------------------------------------------------------------------
# command bodies


def _read_pgns(paths: list):
    records, diagnostics = [], []
    for path in paths:
        try:
            with open(path, encoding="utf-8") as f:
                recs, diags = parse_pgn(f)
        except OSError as e:
            raise UsageError(f"cannot read PGN file {path}: {e}")
        records.extend(recs)
        diagnostics.extend(diags)
    return records, diagnostics


def _build_one(pgn_paths, cfg: RunConfig, out_path: str, advanced: bool):
    records, parse_diags = _read_pgns(pgn_paths)
    fconf = cfg.filter_config()
    kept, filter_diags, counts = filter_games(records, fconf)
    if not kept:
        raise DataError("zero games survived filtering; check the Elo bucket "
                        "and time-control window")
    counts["parse_failures"] = len(parse_diags)
    schema = FeatureSchema(advanced=advanced)
    ds = build_dataset(kept, schema,
                       provenance={"elo_bucket": fconf.elo_lo})
    write_dataset(ds, out_path)
    schema.write(out_path + ".schema")
    write_provenance(ds, counts, fconf, cfg.seed, sorted(pgn_paths),
                     out_path + ".provenance.txt")
    return ds, counts


def cmd_build(args) -> int:
    cfg = resolve_config(args)
    ds, counts = _build_one(args.pgn, cfg, args.out, cfg.advanced)
    print(f"wrote {len(ds)} rows from {counts['after_sampling']} games "
          f"to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    family = args.model
    if args.task == "binary" and family not in CLASSIFIERS:
        raise UsageError(f"{family} is a regressor; binary task needs one of "
                         f"{', '.join(CLASSIFIERS)}")
    if args.task == "regression" and family not in REGRESSORS:
        raise UsageError(f"{family} is a classifier; regression task needs "
                         f"one of {', '.join(REGRESSORS)}")
    ds = read_dataset(args.data)
    if len(ds) == 0:
        raise DataError(f"{args.data}: dataset has no rows")
    tconf = cfg.train_config(family)
    X = np.concatenate([ds.before, ds.after], axis=1)
    if args.task == "binary":
        y = (ds.label > 0.5).astype(np.int64)
        X, y, _ = smote_balance(X, y, k=cfg.smote_k, seed=cfg.seed)
    else:
        b, a, y, _ = aggregate_probabilities(ds.before, ds.after, ds.label)
        X = np.concatenate([b, a], axis=1)
    model = fit_model(family, X, y, tconf.hyper(),
                      schema_version=ds.schema.version_id, seed=cfg.seed)
    save_model(model, args.out)
    print(f"wrote {family} model ({args.task}) to {args.out}")
    return 0


def _bucket_of(data_path: str, flag: int | None) -> int:
    if flag is not None:
        return flag
    prov = data_path + ".provenance.txt"
    if os.path.exists(prov):
        with open(prov, encoding="utf-8") as f:
            for ln in f:
                if ln.startswith("config.elo_lo="):
                    return int(ln.strip().split("=", 1)[1])
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    ds = read_dataset(args.data)
    model = load_model(args.model)
    if model.schema_version != ds.schema.version_id:
        raise DataError(f"model schema {model.schema_version} does not match "
                        f"dataset schema {ds.schema.version_id}")
    ds.provenance["elo_bucket"] = _bucket_of(args.data, args.bucket)
    task = "binary" if model.family in CLASSIFIERS else "regression"
    result = run_protocol(ds, model.family, task, repeats=cfg.repeats,
                          seed=cfg.seed, split_frac=cfg.split_frac,
                          hyper=model.hyper, smote_k=cfg.smote_k)
    unit = "% accuracy" if task == "binary" else " pp mean error"
    print(f"{model.family} {task}: {result.mean:.2f} ± {result.std:.2f}{unit} "
          f"over {result.repeats} repeats")
    out = args.out or (os.path.splitext(args.data)[0] + ".eval.csv")
    write_eval_csv([result], out)
    return 0


def cmd_report(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.runs, "*.eval.csv")))
    if not paths:
        raise DataError(f"no eval CSVs (*.eval.csv) found in {args.runs}")
    rows = read_eval_csvs(paths)
    md, csv_parts = [], []
    for task in ("binary", "regression"):
        if any(r["task"] == task for r in rows):
            md.append(format_report_markdown(rows, task))
            csv_parts.append(f"# task={task}\n" + format_report_csv(rows, task))
    md_path = os.path.join(args.runs, "report.md")
    csv_path = os.path.join(args.runs, "report.csv")
    with open(md_path, "w", encoding="utf-8") as f:
        f.write("\n".join(md))
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("".join(csv_parts))
    print("\n".join(md))
    print(f"wrote {md_path} and {csv_path}")
    return 0


def cmd_explain(args) -> int:
    cfg = resolve_config(args)
    records, _ = _read_pgns([args.pgn])
    if not (0 <= args.game < len(records)):
        raise UsageError(f"game index {args.game} out of range "
                         f"(file has {len(records)} games)")
    record = truncate_opening(records[args.game])
    if not (0 <= args.ply < len(record.san_moves)):
        raise UsageError(
            f"ply {args.ply} is beyond the truncated opening "
            f"({len(record.san_moves)} plies: openings end at the second "
            f"castle or ply 20, whichever comes first)")
    schema = FeatureSchema(advanced=cfg.advanced)
    extractor = FeatureExtractor(schema)
    board = Board.initial()
    state = extractor.initial_state()
    for san in record.san_moves[:args.ply]:
        move = parse_san(board, san)
        state = extractor.advance(board, state, move)
        board = apply_move(board, move, _trust=True)
    mover = board.stm
    before = encode(state, mover, schema)
    moves, sans, afters = extractor.candidate_states(board, state)
    played_san = record.san_moves[args.ply]
    print(f"game {args.game} ply {args.ply}, "
          f"{'white' if mover == 0 else 'black'} to move")
    print("before: " + " ".join(f"{n}={v:g}" for n, v in
                                zip(schema.names, before)))
    afters_enc = encode(afters, mover, schema)
    for san, after in zip(sans, afters_enc):
        deltas = [f"{n}:{b:g}->{a:g}" for n, b, a in
                  zip(schema.names, before, after) if a != b]
        marker = "  [played]" if san == played_san else ""
        print(f"  {san:<8}" + " ".join(deltas) + marker)
    return 0


def cmd_perft(args) -> int:
    if args.depth < 0:
        raise UsageError("depth must be non-negative")
    if args.depth > 6:
        raise UsageError("depth > 6 refused (node counts grow too fast)")
    board = Board.from_fen(args.fen) if args.fen else Board.initial()
    print(perft(board, args.depth))
    return 0


_GRID_TASKS = (("binary", CLASSIFIERS), ("regression", REGRESSORS))


def cmd_grid(args) -> int:
    """Buckets x strategy sets x families; regenerates the full result grid."""
    cfg = resolve_config(args)
    buckets = [int(b) for b in args.buckets.split(",")]
    families = args.families.split(",") if args.families else list(FAMILIES)
    for fam in families:
        if fam not in FAMILIES:
            raise UsageError(f"unknown model family {fam!r}")
    os.makedirs(args.out_dir, exist_ok=True)
    results = []
    for bucket in buckets:
        for advanced in (False, True):
            strat = "advanced" if advanced else "basic"
            sub = RunConfig(**{f.name: getattr(cfg, f.name)
                               for f in fields(RunConfig)})
            sub.elo_bucket = bucket
            sub.advanced = advanced
            data_path = os.path.join(args.out_dir,
                                     f"bucket{bucket}_{strat}.csv")
            ds, _counts = _build_one(args.pgn, sub, data_path, advanced)
            for task, members in _GRID_TASKS:
                for fam_idx, fam in enumerate(FAMILIES):
                    if fam not in families or fam not in members:
                        continue
                    # independent per-job seed derived from the master seed
                    job_seed = int(np.random.SeedSequence(
                        [cfg.seed, bucket, int(advanced), fam_idx]
                    ).generate_state(1)[0])
                    tconf = sub.train_config(fam)
                    res = run_protocol(ds, fam, task, repeats=cfg.repeats,
                                       seed=job_seed,
                                       split_frac=cfg.split_frac,
                                       hyper=tconf.hyper(),
                                       smote_k=cfg.smote_k)
                    results.append(res)
                    print(f"bucket {bucket} {strat} {fam} {task}: "
                          f"{res.mean:.2f} ± {res.std:.2f} "
                          f"({res.runtime:.1f}s)")
    write_eval_csv(results, os.path.join(args.out_dir, "grid.eval.csv"))
    args_report = argparse.Namespace(runs=args.out_dir)
    return cmd_report(args_report)


def cmd_config(args) -> int:
    if args.dump:
        dump_config(resolve_config(args))
        return 0
    raise UsageError("config: nothing to do (try --dump)")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: BPCHESS_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bpchess",
                     description="Opening-move prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="PGN files -> dataset CSV + provenance")
    p.add_argument("--pgn", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--elo-bucket", dest="elo_bucket", type=int, default=None)
    p.add_argument("--advanced", action="store_const", const=True,
                   default=None, dest="advanced")
    p.add_argument("--max-games", dest="max_games", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="dataset -> model artifact")
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=("binary", "regression"),
                   required=True)
    p.add_argument("--model", choices=FAMILIES, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="repeated-split evaluation of one model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model artifact path")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--bucket", type=int, default=None,
                   help="Elo bucket label for the eval CSV")
    p.add_argument("--out", default=None, help="eval CSV path")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="directory of eval CSVs -> tables")
    p.add_argument("--runs", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("explain", help="feature dump for one position")
    p.add_argument("--pgn", required=True)
    p.add_argument("--game", type=int, required=True)
    p.add_argument("--ply", type=int, required=True)
    p.add_argument("--advanced", action="store_const", const=True,
                   default=None, dest="advanced")
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("perft", help="move-generator node count")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--fen", default=None)
    p.set_defaults(func=cmd_perft)

    p = sub.add_parser("grid", help="buckets x strategy sets x families")
    p.add_argument("--pgn", nargs="+", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--buckets", default="1200")
    p.add_argument("--families", default=None,
                   help="comma list; default all five")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--max-games", dest="max_games", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("config", help="show resolved configuration")
    p.add_argument("--dump", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, SanError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - contract: internal errors exit 3
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

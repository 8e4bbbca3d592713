"""Repeated-runs evaluation protocol and Table-style reporting.

Splits are always by game, never by row, so plies of one game cannot leak
across the train/test boundary. Binary test sets are balanced by
undersampling the majority class (synthetic SMOTE rows exist only on the
training side), making 50% the chance baseline. Metrics: accuracy in
percent for the binary task, mean absolute error in percentage points for
the regression task.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, aggregate_probabilities, release_memory
from .models import CLASSIFIERS, ModelParams, fit_model
from .smote import smote_balance


@dataclass
class EvalResult:
    bucket: int
    strategy_set: str  # basic | advanced
    family: str
    task: str
    metrics: list  # one metric per repeat
    runtime: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.metrics))

    @property
    def std(self) -> float:
        return float(np.std(self.metrics))

    @property
    def repeats(self) -> int:
        return len(self.metrics)


def split_games(n_games: int, frac: float, rng) -> np.ndarray:
    """Boolean mask over game indices; True = training game."""
    train = np.zeros(n_games, dtype=bool)
    n_train = int(round(n_games * frac))
    train[rng.choice(n_games, size=n_train, replace=False)] = True
    return train


def undersample_balanced(y: np.ndarray, rng) -> np.ndarray:
    """Row indices of a class-balanced subsample (no synthetic points)."""
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    k = min(len(pos), len(neg))
    keep = np.concatenate([rng.choice(pos, size=k, replace=False),
                           rng.choice(neg, size=k, replace=False)])
    keep.sort()
    return keep


def binary_accuracy(model: ModelParams, X, y) -> float:
    return float(np.mean(model.predict(X) == y) * 100.0)


def regression_mean_error(model: ModelParams, X, y) -> float:
    pred = np.clip(model.decision(X), 0.0, 1.0)
    return float(np.mean(np.abs(pred - y)) * 100.0)


def features(before: np.ndarray, after: np.ndarray, idx=None) -> np.ndarray:
    """[before | after] design matrix, optionally row-selected by `idx`.

    Fills a preallocated matrix half by half so only one fancy-indexing
    temporary is alive at a time (np.concatenate holds both halves plus
    the result, which matters at multi-GB scale).
    """
    n = len(before) if idx is None else (int(idx.sum())
                                         if idx.dtype == bool else len(idx))
    X = np.empty((n, before.shape[1] + after.shape[1]), dtype=np.float32)
    X[:, :before.shape[1]] = before if idx is None else before[idx]
    X[:, before.shape[1]:] = after if idx is None else after[idx]
    return X


def run_protocol(ds: Dataset, family: str, task: str, repeats: int = 10,
                 seed: int = 0, split_frac: float = 0.8,
                 hyper: dict | None = None, smote_k: int = 5) -> EvalResult:
    """Repeated 80/20 by-game splits; returns per-repeat metrics."""
    if task == "binary" and family not in CLASSIFIERS:
        raise ValueError(f"{family} cannot run the binary task")
    if task == "regression" and family in CLASSIFIERS:
        raise ValueError(f"{family} cannot run the regression task")
    t0 = time.time()
    metrics = []
    master = np.random.default_rng(seed)
    for rep in range(repeats):
        rep_seed = int(master.integers(0, 2 ** 31 - 1))
        rng = np.random.default_rng(rep_seed)
        train_games = split_games(len(ds.games), split_frac, rng)
        in_train = train_games[ds.game_index]
        metrics.append(_run_once(ds, family, task, in_train, rng, rep_seed,
                                 hyper, smote_k))
        release_memory()  # drop repeat-local matrices before the next split
    return EvalResult(bucket=ds.provenance.get("elo_bucket", 0),
                      strategy_set="advanced" if ds.schema.advanced else "basic",
                      family=family, task=task, metrics=metrics,
                      runtime=time.time() - t0)


def _run_once(ds, family, task, in_train, rng, rep_seed, hyper, smote_k):
    ytr = ds.label[in_train]
    yte = ds.label[~in_train]
    if task == "binary":
        # large-matrix hygiene: build the train matrix, balance, drop the
        # original, fit in place, and only then build the test matrix
        holder = [features(ds.before, ds.after, in_train)]
        Xb, yb, _synth = smote_balance(holder[0],
                                       (ytr > 0.5).astype(np.int64),
                                       k=smote_k, seed=rep_seed,
                                       release=holder.clear)
        model = fit_model(family, Xb, yb, hyper,
                          schema_version=ds.schema.version_id, seed=rep_seed,
                          overwrite_x=True)
        del Xb
        keep = undersample_balanced((yte > 0.5).astype(np.int64), rng)
        Xte = features(ds.before, ds.after, ~in_train)
        return binary_accuracy(model, Xte[keep],
                               (yte[keep] > 0.5).astype(np.int64))
    # regression: probability labels are aggregated per split to avoid
    # frequencies computed from test games leaking into training rows
    btr, atr, ptr, _ = aggregate_probabilities(ds.before[in_train],
                                               ds.after[in_train], ytr)
    bte, ate, pte, _ = aggregate_probabilities(ds.before[~in_train],
                                               ds.after[~in_train], yte)
    model = fit_model(family, features(btr, atr), ptr, hyper,
                      schema_version=ds.schema.version_id, seed=rep_seed)
    return regression_mean_error(model, features(bte, ate), pte)


# ---------------------------------------------------------------------------
# eval CSV + report tables

EVAL_COLUMNS = ("bucket", "strategy_set", "family", "task",
                "metric_mean", "metric_std", "repeats")


def write_eval_csv(results: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EVAL_COLUMNS)
        for r in results:
            w.writerow([r.bucket, r.strategy_set, r.family, r.task,
                        f"{r.mean:.9g}", f"{r.std:.9g}", r.repeats])


def read_eval_csvs(paths) -> list:
    rows = []
    for path in paths:
        with open(path, encoding="utf-8") as f:
            for rec in csv.DictReader(f):
                rows.append(rec)
    return rows


_FAMILY_LABELS = {"ridge": "Ridge Classifier", "logreg": "Logistic Regression",
                  "svc": "Linear SVC", "linreg": "Linear Regression",
                  "mlp": "MLP"}


def build_report(rows: list, task: str):
    """(row_labels, buckets, table, best_mask) for one task's results."""
    rows = [r for r in rows if r["task"] == task]
    buckets = sorted({int(r["bucket"]) for r in rows})
    keys = []
    for r in rows:
        key = (r["strategy_set"], r["family"])
        if key not in keys:
            keys.append(key)
    keys.sort(key=lambda k: (k[0] != "basic", list(_FAMILY_LABELS).index(k[1])))
    table = {}
    for r in rows:
        table[(r["strategy_set"], r["family"], int(r["bucket"]))] = \
            float(r["metric_mean"])
    # best = max accuracy for binary, min error for regression
    best = {}
    for b in buckets:
        vals = [(table[(s, f, b)], (s, f)) for (s, f) in keys
                if (s, f, b) in table]
        if vals:
            pick = max(vals)[1] if task == "binary" else min(vals)[1]
            best[b] = pick
    return keys, buckets, table, best


def format_report_markdown(rows: list, task: str) -> str:
    keys, buckets, table, best = build_report(rows, task)
    metric = "accuracy %" if task == "binary" else "mean error (pp)"
    out = [f"### {task} task ({metric})", ""]
    out.append("| Strategy set | Model | " +
               " | ".join(f"Elo {b}" for b in buckets) + " |")
    out.append("|---|---|" + "---|" * len(buckets))
    for s, f in keys:
        cells = []
        for b in buckets:
            v = table.get((s, f, b))
            if v is None:
                cells.append("—")
            else:
                cell = f"{v:.2f}"
                if best.get(b) == (s, f):
                    cell = f"**{cell}**"
                cells.append(cell)
        out.append(f"| {s} | {_FAMILY_LABELS.get(f, f)} | " +
                   " | ".join(cells) + " |")
    out.append("")
    return "\n".join(out)


def format_report_csv(rows: list, task: str) -> str:
    keys, buckets, table, best = build_report(rows, task)
    lines = ["strategy_set,family," + ",".join(str(b) for b in buckets)]
    for s, f in keys:
        cells = []
        for b in buckets:
            v = table.get((s, f, b))
            if v is None:
                cells.append("—")
            else:
                cell = f"{v:.2f}"
                if best.get(b) == (s, f):
                    cell += "*"
                cells.append(cell)
        lines.append(f"{s},{f}," + ",".join(cells))
    return "\n".join(lines) + "\n"

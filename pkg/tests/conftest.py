import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bpchess.dataset import FilterConfig, build_dataset, filter_games
from bpchess.pgn import parse_pgn
from bpchess.strategies import FeatureSchema

FIXTURE_PGN = os.path.join(os.path.dirname(__file__), "data", "fixture_50.pgn")
CORPUS_PGN = os.path.join(os.path.dirname(__file__), os.pardir,
                          "data", "corpus.pgn")


@pytest.fixture(scope="session")
def fixture_records():
    with open(FIXTURE_PGN, encoding="utf-8") as f:
        records, diagnostics = parse_pgn(f)
    assert not diagnostics
    return records


@pytest.fixture(scope="session")
def fixture_filtered(fixture_records):
    kept, _, counts = filter_games(fixture_records, FilterConfig())
    return kept, counts


@pytest.fixture(scope="session")
def fixture_dataset(fixture_filtered):
    kept, _ = fixture_filtered
    return build_dataset(kept, FeatureSchema(advanced=True),
                         provenance={"elo_bucket": 1200})


@pytest.fixture(scope="session")
def fixture_dataset_basic(fixture_filtered):
    kept, _ = fixture_filtered
    return build_dataset(kept, FeatureSchema(advanced=False),
                         provenance={"elo_bucket": 1200})

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# Acceptance outcomes, printed as one line per criterion at the end of the run.
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])


@pytest.fixture
def tiny_did():
    """Two units, two waves; only unit 2's second wave is treated."""
    return pd.DataFrame(
        {
            "id": [1, 1, 2, 2],
            "wave": [2012, 2014, 2012, 2014],
            "d_it": [0, 0, 0, 1],
            "employment": [0.0, 0.0, 0.0, 1.0],
            "event_wave": pd.array([pd.NA, pd.NA, 2014, 2014], dtype="Int64"),
        }
    )


def random_panel(rng, n_max=30, t_max=6, n_cov=1, unbalanced=True):
    """Small random panel, each unit with at least two waves."""
    n = int(rng.integers(4, n_max))
    T = int(rng.integers(2, t_max))
    rows = [(i, 2012 + 2 * t) for i in range(1, n + 1) for t in range(T)]
    df = pd.DataFrame(rows, columns=["id", "wave"])
    if unbalanced and T > 2:
        keep = rng.random(len(df)) > 0.15
        df = df[keep]
        df = df[df.groupby("id")["id"].transform("size") >= 2].reset_index(drop=True)
    N = len(df)
    df["d_it"] = rng.integers(0, 2, N)
    for k in range(n_cov):
        df[f"x{k}"] = rng.normal(size=N)
    df["employment"] = rng.normal(size=N)
    return df

"""CSV writers for round statistics, comparison curves and query transcripts."""

import csv
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

ROUND_COLUMNS = (
    "round",
    "cluster_local_id",
    "sample_size",
    "recovered",
    "residual",
    "queries_cumulative",
    "error_so_far",
    "wall_time_s",
)
COMPARE_COLUMNS = ("algo", "seed", "round", "queries_cumulative", "error")
TRANSCRIPT_COLUMNS = ("seq", "i", "j", "answer")


def _cell(value: Any) -> Any:
    return "" if value is None else value


def write_rows(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
) -> Path:
    """Write ``rows`` to ``path`` as UTF-8 CSV with a header row; missing values are blank."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: _cell(row.get(column)) for column in columns})
    return path


def write_rounds(path: str | Path, rounds: Iterable[Any]) -> Path:
    """Write per-round statistics (objects exposing ``to_row()``)."""
    return write_rows(path, ROUND_COLUMNS, (stats.to_row() for stats in rounds))

"""Row-keyed value tables shared by the metric, preprocessing, and report stages.

Tables are deliberately plain: an ordered list of run keys plus named columns
of optional floats. Missing cells are ``None`` in memory and empty strings on
disk. CSV serialization uses ``repr``-style shortest float formatting so a
re-run with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple


class RunKey(NamedTuple):
    experiment_id: str
    scenario_id: str
    run_index: int


KEY_COLUMNS = ("experiment_id", "scenario_id", "run_index")


def fmt_cell(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def parse_cell(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    return float(text)


@dataclass
class MetricTable:
    """Experiments x metrics, raw values straight from the metric engine."""

    keys: list[RunKey]
    columns: dict[str, list[float | None]]

    def __post_init__(self) -> None:
        for name, col in self.columns.items():
            if len(col) != len(self.keys):
                raise ValueError(
                    f"column '{name}' has {len(col)} cells for {len(self.keys)} rows"
                )

    @property
    def experiment_ids(self) -> list[str]:
        return [k.experiment_id for k in self.keys]

    def row(self, i: int) -> dict[str, float | None]:
        return {name: col[i] for name, col in self.columns.items()}

    def column(self, name: str) -> list[float | None]:
        return self.columns[name]


@dataclass
class NormalizedTable:
    """Experiments x metrics scaled to [0, 1].

    ``kind`` says which side the table holds ("qm" or "hm"). HM tables carry the scaled
    standard deviations alongside; ``imputed`` flags cells filled in for
    clustering.
    """

    keys: list[RunKey]
    columns: dict[str, list[float | None]]
    kind: str = "qm"
    stds: dict[str, list[float | None]] | None = None
    imputed: set[tuple[str, str]] = field(default_factory=set)  # (experiment_id, column)

    def __post_init__(self) -> None:
        if self.kind not in ("qm", "hm"):
            raise ValueError(f"kind must be 'qm' or 'hm', got '{self.kind}'")
        for name, col in self.columns.items():
            if len(col) != len(self.keys):
                raise ValueError(
                    f"column '{name}' has {len(col)} cells for {len(self.keys)} rows"
                )

    @property
    def experiment_ids(self) -> list[str]:
        return [k.experiment_id for k in self.keys]

    def column(self, name: str) -> list[float | None]:
        return self.columns[name]

    def complete_columns(self) -> list[str]:
        return [name for name, col in self.columns.items() if all(v is not None for v in col)]


def write_table_csv(path: str | Path, keys: list[RunKey],
                    columns: dict[str, list[float | None]]) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(KEY_COLUMNS) + list(columns))
        for i, key in enumerate(keys):
            writer.writerow(
                [key.experiment_id, key.scenario_id, str(key.run_index)]
                + [fmt_cell(columns[name][i]) for name in columns]
            )


def read_table_csv(path: str | Path) -> tuple[list[RunKey], dict[str, list[float | None]]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != list(KEY_COLUMNS):
            raise ValueError(f"{path}: expected key columns {KEY_COLUMNS}, got {header[:3]}")
        names = header[3:]
        keys: list[RunKey] = []
        columns: dict[str, list[float | None]] = {name: [] for name in names}
        for row in reader:
            if not row:
                continue
            keys.append(RunKey(row[0], row[1], int(row[2])))
            for name, cell in zip(names, row[3:]):
                columns[name].append(parse_cell(cell))
    return keys, columns


def write_rows_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

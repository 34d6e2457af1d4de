"""Per-tile transform cost tables (FLOPs and AI) for the three fast methods.

The tables ship as a CSV resource with columns ``method,m,r,stage,flops,ai``.
Setting ``CONV_ROOFLINE_TABLES`` to a path replaces the embedded resource.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .model import Method

TABLES_ENV = "CONV_ROOFLINE_TABLES"
CSV_HEADER = ("method", "m", "r", "stage", "flops", "ai")


class Stage(str, enum.Enum):
    INPUT = "Input"
    KERNEL = "Kernel"
    OUTPUT = "Output"


class MissingEntryError(KeyError):
    """No printed table cell for the requested (method, m, r, stage)."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing table entry"


@dataclass(frozen=True)
class TransformCostEntry:
    method: Method
    m: int
    r: int
    stage: Stage
    flops: int
    ai: float

    @property
    def t(self) -> int:
        return self.m + self.r - 1


class CostTables:
    """Immutable lookup over the transform cost entries."""

    def __init__(self, entries: Iterable[TransformCostEntry]):
        table: dict[tuple[Method, int, int, Stage], TransformCostEntry] = {}
        for entry in entries:
            if entry.method is Method.DIRECT:
                raise ValueError("Direct convolution has no transform table")
            if entry.flops <= 0 or entry.ai <= 0:
                raise ValueError(f"non-positive cost in table entry {entry}")
            key = (entry.method, entry.m, entry.r, entry.stage)
            if key in table:
                raise ValueError(f"duplicate table entry for {key}")
            table[key] = entry
        self._table = table

    @classmethod
    def from_csv(cls, text: str) -> "CostTables":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"cost table header must be {','.join(CSV_HEADER)}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            try:
                entries.append(
                    TransformCostEntry(
                        method=Method.parse(row["method"]),
                        m=int(row["m"]),
                        r=int(row["r"]),
                        stage=Stage(row["stage"]),
                        flops=int(row["flops"]),
                        ai=float(row["ai"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"cost table line {lineno}: {exc}") from None
        return cls(entries)

    @classmethod
    def from_path(cls, path: str | Path) -> "CostTables":
        return cls.from_csv(Path(path).read_text())

    def __len__(self) -> int:
        return len(self._table)

    def __iter__(self) -> Iterator[TransformCostEntry]:
        return iter(self._table.values())

    def __contains__(self, key: object) -> bool:
        return key in self._table

    def covered_m(self, method: Method, r: int) -> list[int]:
        """Output tile sizes with all three stages printed for kernel size ``r``."""
        ms = {e.m for e in self._table.values() if e.method is method and e.r == r}
        return sorted(
            m for m in ms if all((method, m, r, s) in self._table for s in Stage)
        )

    def covered_r(self, method: Method) -> list[int]:
        return sorted({e.r for e in self._table.values() if e.method is method})

    def get(self, method: Method, m: int, r: int, stage: Stage) -> TransformCostEntry:
        method = Method.parse(method)
        stage = Stage(stage)
        try:
            return self._table[(method, m, r, stage)]
        except KeyError:
            pass
        rs = self.covered_r(method)
        if r in rs:
            ms = self.covered_m(method, r)
            hint = f"for r={r} the table covers m in [{ms[0]}, {ms[-1]}]"
        elif rs:
            hint = f"the table covers r in [{rs[0]}, {rs[-1]}]"
        else:
            hint = "the table has no entries for this method"
        raise MissingEntryError(
            f"no {method.value} {stage.value} transform cost for m={m}, r={r}; {hint}"
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for e in self._table.values():
            writer.writerow([e.method.value, e.m, e.r, e.stage.value, e.flops, f"{e.ai:.2f}"])
        return out.getvalue()


@functools.lru_cache(maxsize=None)
def _load(path: str | None) -> CostTables:
    if path:
        return CostTables.from_path(path)
    text = resources.files("conv_roofline").joinpath("data/cost_tables.csv").read_text()
    return CostTables.from_csv(text)


def default_tables() -> CostTables:
    """The embedded tables, or the file named by ``CONV_ROOFLINE_TABLES``."""
    return _load(os.environ.get(TABLES_ENV) or None)


def transform_cost(
    method: Method | str,
    m: int,
    r: int,
    stage: Stage | str,
    tables: CostTables | None = None,
) -> TransformCostEntry:
    return (tables or default_tables()).get(Method.parse(method), m, r, Stage(stage))


def tile_search_space(
    method: Method | str,
    r: int,
    max_winograd_tile: int = 6,
    tables: CostTables | None = None,
) -> list[int]:
    """Candidate output tile sizes m for a planner search.

    Winograd is capped at input tiles of ``max_winograd_tile`` (6 by
    convention, 8 for the lower-accuracy variant); the FFT methods may use any
    tile the tables cover.
    """
    method = Method.parse(method)
    if r < 2:
        raise ValueError(f"kernel size must be >= 2, got {r}")
    if max_winograd_tile not in (6, 8):
        raise ValueError(f"max_winograd_tile must be 6 or 8, got {max_winograd_tile}")
    covered = (tables or default_tables()).covered_m(method, r)
    if method is Method.WINOGRAD:
        return [m for m in covered if m + r - 1 <= max_winograd_tile]
    return covered


@dataclass(frozen=True)
class GaussDelta:
    m: int
    r: int
    stage: Stage
    delta: int
    expected: int

    @property
    def t(self) -> int:
        return self.m + self.r - 1

    @property
    def ok(self) -> bool:
        return self.delta == self.expected


# Observed Gauss-minus-Regular FLOP overhead per tile, in units of t^2.
GAUSS_OVERHEAD = {Stage.INPUT: 1, Stage.KERNEL: 2, Stage.OUTPUT: 2}


def gauss_table_consistency(tables: CostTables | None = None) -> list[GaussDelta]:
    """Gauss-FFT minus Regular-FFT FLOPs for every cell printed in both tables.

    The text attributes 2t*ceil((t+1)/2) extra operations to a Gauss kernel
    transform, but the printed tables consistently add t^2 (input) and 2t^2
    (kernel, output); the tables are checked against the latter pattern.
    """
    tables = tables or default_tables()
    report = []
    for gauss in tables:
        if gauss.method is not Method.GAUSS_FFT:
            continue
        key = (Method.REGULAR_FFT, gauss.m, gauss.r, gauss.stage)
        if key not in tables:
            continue
        regular = tables.get(*key)
        t = gauss.t
        report.append(
            GaussDelta(
                m=gauss.m,
                r=gauss.r,
                stage=gauss.stage,
                delta=gauss.flops - regular.flops,
                expected=GAUSS_OVERHEAD[gauss.stage] * t * t,
            )
        )
    report.sort(key=lambda d: (d.r, d.m, list(Stage).index(d.stage)))
    return report

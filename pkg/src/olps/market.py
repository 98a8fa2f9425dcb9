"""Market representations: price relative sequences, CSV I/O and synthetic markets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class MarketDataError(ValueError):
    """Raised when market data cannot be parsed or violates an invariant."""


class ParseError(MarketDataError):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class ShapeError(MarketDataError):
    pass


@dataclass(frozen=True)
class PriceRelativeSequence:
    """An n x m matrix of gross per-period returns x_{t,i} = p_{t,i} / p_{t-1,i}.

    The underlying array is read-only, so one sequence can be shared by many
    backtests.
    """

    relatives: np.ndarray
    asset_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        arr = np.array(self.relatives, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"expected a 2-d matrix, got {arr.ndim} dimensions")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"need at least one period and one asset, got shape {arr.shape}")
        bad = ~np.isfinite(arr) | (arr <= 0)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ParseError(f"price relative must be finite and > 0, got {arr[r, c]!r}",
                             row=int(r) + 1, column=int(c) + 1)
        arr.setflags(write=False)
        object.__setattr__(self, "relatives", arr)
        if self.asset_names is not None:
            names = tuple(str(a) for a in self.asset_names)
            if len(names) != arr.shape[1]:
                raise ShapeError(f"{len(names)} asset names for {arr.shape[1]} columns")
            object.__setattr__(self, "asset_names", names)

    @property
    def n(self) -> int:
        return self.relatives.shape[0]

    @property
    def m(self) -> int:
        return self.relatives.shape[1]

    def __len__(self) -> int:
        return self.n

    def window(self, start: int, end: int) -> "MarketWindow":
        return MarketWindow(self, start, end)

    def head(self, k: int) -> "PriceRelativeSequence":
        """First k periods as a new sequence."""
        return PriceRelativeSequence(self.relatives[:k], self.asset_names)

    def permuted(self, order: Sequence[int]) -> "PriceRelativeSequence":
        return PriceRelativeSequence(self.relatives[np.asarray(order)], self.asset_names)


@dataclass(frozen=True)
class MarketWindow:
    """Periods start..end (1-based, inclusive) of a sequence."""

    seq: PriceRelativeSequence
    start: int
    end: int

    def __post_init__(self):
        if not 1 <= self.start <= self.end <= self.seq.n:
            raise ValueError(f"invalid window [{self.start}, {self.end}] for n={self.seq.n}")

    @property
    def relatives(self) -> np.ndarray:
        return self.seq.relatives[self.start - 1:self.end]

    def __len__(self) -> int:
        return self.end - self.start + 1


def prices_to_relatives(prices) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 2 or prices.shape[0] < 2:
        raise ShapeError("price matrix needs at least two rows")
    return prices[1:] / prices[:-1]


def relatives_to_prices(relatives, initial=None) -> np.ndarray:
    """Cumulative price path p_0..p_n; p_0 defaults to all-ones."""
    relatives = np.asarray(relatives, dtype=float)
    p0 = np.ones(relatives.shape[1]) if initial is None else np.asarray(initial, dtype=float)
    return np.vstack([p0, p0 * np.cumprod(relatives, axis=0)])


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_price_relatives(path, format: str = "relatives",
                         has_header: Optional[bool] = None) -> PriceRelativeSequence:
    """Read a CSV with one period per row.

    ``format="prices"`` converts n price rows to n-1 relative rows.  With
    ``has_header=None`` the first row is treated as asset names when none of
    its cells parse as numbers.
    """
    if format not in ("relatives", "prices"):
        raise ValueError(f"unknown format {format!r}")
    path = Path(path)
    if not path.exists():
        raise MarketDataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ShapeError(f"{path} contains no data")

    names = None
    if has_header is None:
        has_header = not any(_is_number(c) for c in rows[0])
    if has_header:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
    if not rows:
        raise ShapeError(f"{path} contains a header but no data")

    first = 2 if has_header else 1
    width = len(rows[0])
    values = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ShapeError(f"row {r + first} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell.strip()!r}", row=r + first, column=c + 1) from None
            if not np.isfinite(v) or v <= 0:
                raise ParseError(f"value must be finite and > 0, got {cell.strip()!r}",
                                 row=r + first, column=c + 1)
            values[r, c] = v

    if names is not None and len(names) != width:
        raise ShapeError(f"header has {len(names)} names for {width} columns")
    if format == "prices":
        if values.shape[0] < 2:
            raise ShapeError("price file needs at least two rows")
        values = prices_to_relatives(values)
    return PriceRelativeSequence(values, names)


def write_price_relatives(seq: PriceRelativeSequence, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        if seq.asset_names is not None:
            writer.writerow(seq.asset_names)
        for row in seq.relatives:
            writer.writerow([repr(float(v)) for v in row])


def synthetic_cg86(n: int) -> PriceRelativeSequence:
    """Cash plus one asset that alternately doubles and halves: (1,2),(1,1/2),(1,2),..."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rel = np.ones((n, 2))
    rel[0::2, 1] = 2.0
    rel[1::2, 1] = 0.5
    return PriceRelativeSequence(rel, ("cash", "volatile"))


def synthetic_iid(m: int, n: int, seed: int = 0, low: float = 0.5,
                  high: float = 1.5) -> PriceRelativeSequence:
    """i.i.d. uniform price relatives on [low, high]; deterministic in ``seed``."""
    if m < 1 or n < 1:
        raise ValueError(f"m and n must be >= 1, got m={m}, n={n}")
    if low <= 0 or high < low:
        raise ValueError(f"need 0 < low <= high, got low={low}, high={high}")
    rng = np.random.default_rng(seed)
    return PriceRelativeSequence(rng.uniform(low, high, size=(n, m)))

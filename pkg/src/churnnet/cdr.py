"""Call-detail records: parsing, filtering, churn labels and the month timeline.

Records are held column-wise in numpy arrays. Customer ids are strings; each
store keeps a sorted array of the in-network customers and refers to them by
integer index, so every downstream vector (graph rows, scores, features) is
aligned with ``store.customers``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .exceptions import ConfigError, RangeError, SchemaError

DAY = 86_400
WEEK = 7 * DAY
MONTH = 30 * DAY
N_MONTHS = 6
CHURN_GAP_DAYS = 30
MIN_CALL_SECONDS = 4


@dataclass(frozen=True)
class CdrRecord:
    caller: str
    callee: str
    start: int
    duration: int


@dataclass(frozen=True)
class CdrSchema:
    """Column names of a CDR file (the header remap)."""

    caller: str = "caller"
    callee: str = "callee"
    timestamp: str = "timestamp"
    duration: str = "duration"

    @classmethod
    def from_settings(cls, settings) -> "CdrSchema":
        s = settings.section("cdr.columns")
        return cls(
            caller=s.str("caller", "caller"),
            callee=s.str("callee", "callee"),
            timestamp=s.str("timestamp", "timestamp"),
            duration=s.str("duration", "duration"),
        )


@dataclass(frozen=True, eq=False)
class CdrStore:
    """Immutable, start-sorted collection of call records.

    ``weight`` is an optional per-record multiplier used by segment
    combinations; ``None`` means every record counts once.
    """

    customers: np.ndarray
    caller: np.ndarray
    callee: np.ndarray
    start: np.ndarray
    duration: np.ndarray
    epoch: int
    weight: np.ndarray | None = None
    errors: tuple = field(default=(), repr=False)

    def __len__(self) -> int:
        return int(self.start.shape[0])

    @property
    def n_customers(self) -> int:
        return int(self.customers.shape[0])

    @property
    def end(self) -> int:
        return self.epoch + N_MONTHS * MONTH

    @property
    def months(self) -> list[tuple[int, int]]:
        return [month_interval(self.epoch, m) for m in range(1, N_MONTHS + 1)]

    def record(self, i: int) -> CdrRecord:
        return CdrRecord(
            str(self.customers[self.caller[i]]),
            str(self.customers[self.callee[i]]),
            int(self.start[i]),
            int(self.duration[i]),
        )

    def index_of(self, ids: Iterable[str]) -> np.ndarray:
        ids = np.asarray(list(ids), dtype=self.customers.dtype)
        pos = np.searchsorted(self.customers, ids)
        ok = (pos < self.n_customers) & (self.customers[np.minimum(pos, self.n_customers - 1)] == ids)
        if not ok.all():
            raise KeyError(f"unknown customer ids: {ids[~ok][:5].tolist()}")
        return pos

    def multipliers(self) -> np.ndarray:
        if self.weight is None:
            return np.ones(len(self), dtype=float)
        return self.weight

    def subset(self, mask: np.ndarray, weight: np.ndarray | None = None) -> "CdrStore":
        """View restricted to ``mask`` (boolean or index array) over records."""
        w = self.weight[mask] if self.weight is not None else None
        if weight is not None:
            w = weight if w is None else w * weight
        return CdrStore(
            customers=self.customers,
            caller=self.caller[mask],
            callee=self.callee[mask],
            start=self.start[mask],
            duration=self.duration[mask],
            epoch=self.epoch,
            weight=w,
        )

    def between(self, t0: int, t1: int) -> "CdrStore":
        lo, hi = np.searchsorted(self.start, [t0, t1], side="left")
        return self.subset(slice(lo, hi))

    def in_months(self, first: int, last: int) -> "CdrStore":
        t0, _ = month_interval(self.epoch, first)
        _, t1 = month_interval(self.epoch, last)
        return self.between(t0, t1)


def month_interval(epoch: int, m: int) -> tuple[int, int]:
    """Half-open ``[start, end)`` of month ``m`` (1-based, fixed 30-day months)."""
    if not 1 <= m <= N_MONTHS:
        raise RangeError(f"month index {m} outside 1..{N_MONTHS}")
    return epoch + (m - 1) * MONTH, epoch + m * MONTH


def make_store(customers, caller, callee, start, duration, epoch: int, errors=()) -> CdrStore:
    """Build a store from raw columns; sorts records and validates invariants.

    ``caller``/``callee`` are either id strings or indices into ``customers``.
    """
    customers = np.asarray(customers)
    if customers.dtype.kind not in "US":
        customers = customers.astype(str)
    order = np.argsort(customers, kind="stable")
    customers = customers[order]
    if customers.size and (customers[1:] == customers[:-1]).any():
        raise ValueError("duplicate customer ids")
    caller = np.asarray(caller)
    callee = np.asarray(callee)
    if caller.dtype.kind in "US" or caller.dtype == object:
        caller = _lookup(customers, caller)
        callee = _lookup(customers, callee)
    else:
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        caller = inverse[caller.astype(np.int64)] if caller.size else caller.astype(np.int64)
        callee = inverse[callee.astype(np.int64)] if callee.size else callee.astype(np.int64)
    start = np.asarray(start, dtype=np.int64)
    duration = np.asarray(duration, dtype=np.int64)
    if (caller == callee).any():
        raise RangeError("record with caller == callee")
    if (duration < 0).any():
        raise RangeError("negative call duration")
    end = epoch + N_MONTHS * MONTH
    if start.size and (start.min() < epoch or start.max() >= end):
        raise RangeError("record outside the six-month observation window")
    idx = np.lexsort((duration, callee, caller, start))
    return CdrStore(
        customers=customers,
        caller=caller[idx].astype(np.int32),
        callee=callee[idx].astype(np.int32),
        start=start[idx],
        duration=duration[idx],
        epoch=int(epoch),
        errors=tuple(errors),
    )


def _lookup(customers: np.ndarray, ids: np.ndarray) -> np.ndarray:
    ids = ids.astype(customers.dtype) if ids.size else ids.astype(str)
    pos = np.searchsorted(customers, ids)
    return pos.astype(np.int64)


def parse_cdr(
    source: TextIO | str,
    schema: CdrSchema | None = None,
    epoch: int | None = None,
    customers: Iterable[str] | None = None,
) -> CdrStore:
    """Parse a CSV stream of call records.

    Malformed rows (unparseable numbers, negative durations, self-calls,
    timestamps outside the observation window) are skipped and listed in
    ``store.errors`` as ``(line_number, reason)``. A missing required column
    raises :class:`SchemaError`.

    ``epoch`` defaults to midnight (UTC) of the earliest valid record.
    ``customers`` restricts parsing to in-network ids; other rows are dropped
    silently (they are not errors, just out-of-network calls).
    """
    schema = schema or CdrSchema()
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty input: no header") from None
    cols = {}
    for key in ("caller", "callee", "timestamp", "duration"):
        name = getattr(schema, key)
        if name not in header:
            raise SchemaError(f"missing required column {name!r}")
        cols[key] = header.index(name)

    allowed = set(customers) if customers is not None else None
    errors: list[tuple[int, str]] = []
    rows: list[tuple[str, str, int, int]] = []
    for lineno, row in enumerate(reader, 2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            a = row[cols["caller"]].strip()
            b = row[cols["callee"]].strip()
            ts = int(row[cols["timestamp"]])
            dur = int(row[cols["duration"]])
        except (IndexError, ValueError) as exc:
            errors.append((lineno, f"unparseable row: {exc}"))
            continue
        if not a or not b:
            errors.append((lineno, "empty customer id"))
        elif a == b:
            errors.append((lineno, "caller equals callee"))
        elif dur < 0:
            errors.append((lineno, "negative duration"))
        elif allowed is not None and (a not in allowed or b not in allowed):
            continue
        else:
            rows.append((a, b, ts, dur))

    if epoch is None:
        epoch = (min(r[2] for r in rows) // DAY) * DAY if rows else 0
    end = epoch + N_MONTHS * MONTH
    kept = []
    for r in rows:
        if epoch <= r[2] < end:
            kept.append(r)
        else:
            errors.append((-1, f"timestamp {r[2]} outside observation window"))

    ids = set(allowed) if allowed is not None else set()
    for a, b, _, _ in kept:
        ids.add(a)
        ids.add(b)
    cust = np.array(sorted(ids), dtype=str) if ids else np.array([], dtype="<U1")
    if kept:
        a, b, ts, dur = zip(*kept)
    else:
        a = b = ts = dur = ()
    return make_store(
        cust,
        np.array(a, dtype=cust.dtype),
        np.array(b, dtype=cust.dtype),
        np.array(ts, dtype=np.int64),
        np.array(dur, dtype=np.int64),
        epoch=epoch,
        errors=errors,
    )


def write_cdr(store: CdrStore, fh: TextIO, schema: CdrSchema | None = None) -> None:
    schema = schema or CdrSchema()
    fh.write(f"{schema.caller},{schema.callee},{schema.timestamp},{schema.duration}\n")
    a = store.customers[store.caller]
    b = store.customers[store.callee]
    lines = [f"{x},{y},{t},{d}\n" for x, y, t, d in zip(a.tolist(), b.tolist(), store.start.tolist(), store.duration.tolist())]
    fh.write("".join(lines))


def filter_short_calls(store: CdrStore, min_duration: int = MIN_CALL_SECONDS) -> CdrStore:
    """Drop calls shorter than ``min_duration`` seconds (treated as unintentional)."""
    if min_duration < 0:
        raise ConfigError("min_duration must be non-negative")
    return store.subset(store.duration >= min_duration)


@dataclass(frozen=True, eq=False)
class ChurnLabels:
    """Churn labels aligned with ``customers``.

    ``churndate`` holds the first inactive second-of-day for churners and -1
    elsewhere.
    """

    customers: np.ndarray
    is_churner: np.ndarray
    churndate: np.ndarray
    window: tuple[int, int]

    @property
    def rate(self) -> float:
        return float(self.is_churner.mean()) if self.is_churner.size else 0.0

    def as_dict(self) -> dict[str, int]:
        return {str(c): int(v) for c, v in zip(self.customers, self.is_churner)}

    def churndates(self) -> dict[str, int]:
        idx = np.flatnonzero(self.is_churner)
        return {str(self.customers[i]): int(self.churndate[i]) for i in idx}


def activity_days(store: CdrStore, t0: int, t1: int) -> tuple[np.ndarray, np.ndarray]:
    """Unique ``(customer, day)`` pairs with any call (either direction) in ``[t0, t1)``.

    Days are counted from ``t0``. Returned sorted by customer then day.
    """
    view = store.between(t0, t1)
    day = (view.start - t0) // DAY
    cust = np.concatenate([view.caller, view.callee]).astype(np.int64)
    day = np.concatenate([day, day])
    n_days = max(1, -(-(t1 - t0) // DAY))
    key = np.unique(cust * n_days + day)
    return key // n_days, key % n_days


def label_churn(store: CdrStore, window: tuple[int, int], horizon: int | None = None) -> ChurnLabels:
    """Label churners: customers whose 30-day inactivity gap starts inside ``window``.

    Activity is scanned from ``window[0]`` up to ``horizon`` (default: end of
    the store), so a gap may extend past the window end; this is why the
    month following a labeled month must be present. Gaps that began before
    ``window[0]`` are clipped to it.
    """
    t0, t1 = window
    if t1 - t0 < CHURN_GAP_DAYS * DAY:
        raise ConfigError("labeling window must span at least 30 days")
    horizon = store.end if horizon is None else horizon
    if horizon < t1:
        raise ConfigError("horizon must not end before the labeling window")
    n_days = -(-(horizon - t0) // DAY)
    win_days = -(-(t1 - t0) // DAY)
    cust, day = activity_days(store, t0, horizon)
    n = store.n_customers

    # each active day opens a gap running to the next active day of the same customer
    nxt = np.empty_like(day)
    nxt[:-1] = day[1:]
    same = np.zeros(day.shape, dtype=bool)
    same[:-1] = cust[1:] == cust[:-1]
    nxt[~same] = n_days
    gap_start = np.concatenate([day + 1, np.zeros(n, dtype=np.int64)])
    gap_len = np.concatenate([nxt - day - 1, np.full(n, n_days, dtype=np.int64)])
    gap_cust = np.concatenate([cust, np.arange(n, dtype=np.int64)])
    # leading gap: from day 0 to the first active day
    first = np.full(n, n_days, dtype=np.int64)
    np.minimum.at(first, cust, day)
    gap_len[-n:] = first

    ok = (gap_len >= CHURN_GAP_DAYS) & (gap_start < win_days)
    date = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(date, gap_cust[ok], gap_start[ok])
    churner = date < np.iinfo(np.int64).max
    churndate = np.where(churner, t0 + date * DAY, -1)
    return ChurnLabels(store.customers, churner, churndate, (t0, t1))


def month_index(store: CdrStore) -> np.ndarray:
    """1-based month of every record; raises if any record falls outside M1..M6."""
    m = (store.start - store.epoch) // MONTH + 1
    if m.size and (m.min() < 1 or m.max() > N_MONTHS):
        raise RangeError("record outside months M1..M6")
    return m


def partition_months(store: CdrStore) -> list[CdrStore]:
    """Split a store into the six month views M1..M6 (index 0 is M1)."""
    month_index(store)
    return [store.in_months(m, m) for m in range(1, N_MONTHS + 1)]


def monthly_labels(store: CdrStore) -> dict[int, ChurnLabels]:
    """Churn labels for M1..M5; M6 only serves as look-ahead for the gap scan."""
    return {m: label_churn(store, month_interval(store.epoch, m)) for m in range(1, N_MONTHS)}

"""Parse transaction logs and aggregate them into weekly series.

Week bucketing uses the ISO-8601 week-year, so a bucket is identified by a
string like ``2017-W18`` and every series produced from one ingestion shares
the same grid.  Amounts are summed as-is; negative amounts (refunds) are
kept but flagged in the warnings list.
"""

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, ShapeError

COLUMN_ROLES = ("entity", "amount", "timestamp")


@dataclass(frozen=True)
class Transaction:
    entity_name: str
    amount: float
    timestamp: datetime


@dataclass(frozen=True)
class RejectedRow:
    line: int  # 1-based line number in the input, header included
    reason: str


@dataclass
class WeeklySeries:
    """One entity's purchase totals on the shared weekly grid."""

    entity_name: str
    values: np.ndarray
    grid_start: str
    grid_len: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid_len,):
            raise ShapeError(
                f"{self.entity_name}: {self.values.shape[0]} values on a "
                f"grid of length {self.grid_len}")


@dataclass
class SeriesMatrix:
    """All entities' weekly series on one shared grid."""

    labels: list[str]
    values: np.ndarray
    grid_start: str
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.labels):
            raise ShapeError(
                f"values shape {self.values.shape} does not match {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise InputError("entity names must be unique")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def t(self):
        return self.values.shape[1]

    @property
    def series(self):
        return [WeeklySeries(lab, self.values[i], self.grid_start, self.t)
                for i, lab in enumerate(self.labels)]


def parse_timestamp(raw):
    """Accept epoch seconds or an ISO date / 'YYYY-MM-DD HH:MM:SS' string."""
    text = raw.strip()
    if not text:
        raise ValueError("empty timestamp")
    if text.lstrip("-").isdigit():
        return datetime.fromtimestamp(int(text))
    return datetime.fromisoformat(text)


def parse_transactions(source, column_map, delimiter=","):
    """Read a delimited text stream into transactions.

    ``column_map`` maps the roles ``entity``, ``amount`` and ``timestamp``
    to column names in the header; any other columns are ignored.  Returns
    ``(transactions, rejects)`` where rejects carry the 1-based line number
    and a reason for every row whose amount or timestamp failed to parse.
    """
    close = False
    if isinstance(source, (str, Path)):
        source = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.reader(source, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty input: no header row") from None
        missing = [role for role in COLUMN_ROLES if role not in column_map]
        if missing:
            raise ConfigError(f"column_map lacks roles: {', '.join(missing)}")
        idx = {}
        for role in COLUMN_ROLES:
            col = column_map[role]
            if col not in header:
                raise ConfigError(f"mapped column {col!r} not found in header")
            idx[role] = header.index(col)
        txns = []
        rejects = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                entity = row[idx["entity"]].strip()
                if not entity:
                    raise ValueError("empty entity name")
                amount = float(row[idx["amount"]].strip())
                ts = parse_timestamp(row[idx["timestamp"]])
            except (ValueError, IndexError) as exc:
                rejects.append(RejectedRow(line=line_no, reason=str(exc)))
                continue
            txns.append(Transaction(entity_name=entity, amount=amount, timestamp=ts))
        return txns, rejects
    finally:
        if close:
            source.close()


def week_id(ts):
    """ISO week identifier, e.g. '2017-W18'."""
    iso = ts.isocalendar()
    return f"{iso[0]:04d}-W{iso[1]:02d}"


def parse_week_id(text):
    try:
        y, w = text.split("-W")
        return int(y), int(w)
    except ValueError:
        raise ConfigError(f"bad week identifier {text!r}; expected e.g. 2017-W18") from None


def _week_monday(year, week):
    return date.fromisocalendar(year, week, 1)


def _enumerate_weeks(start, end):
    """All week ids from start to end inclusive."""
    cur = _week_monday(*start)
    stop = _week_monday(*end)
    if cur > stop:
        raise ConfigError("week range end precedes start")
    out = []
    while cur <= stop:
        iso = cur.isocalendar()
        out.append(f"{iso[0]:04d}-W{iso[1]:02d}")
        cur += timedelta(days=7)
    return out


def aggregate_weekly(txns, span=None):
    """Sum amounts per entity per ISO week on the union grid.

    Weeks with no transactions are filled with 0.0.  The grid spans the
    earliest to the latest transaction week unless ``span`` (a pair of week
    identifiers) overrides it, in which case out-of-span transactions are
    dropped with a warning.  Entities come out sorted lexicographically.
    """
    if not txns and span is None:
        raise InputError("no transactions and no explicit week span")
    if span is not None:
        weeks = _enumerate_weeks(parse_week_id(span[0]), parse_week_id(span[1]))
    else:
        keys = [t.timestamp.isocalendar()[:2] for t in txns]
        weeks = _enumerate_weeks(min(keys), max(keys))
    col = {w: i for i, w in enumerate(weeks)}
    labels = sorted({t.entity_name for t in txns})
    row = {e: i for i, e in enumerate(labels)}
    values = np.zeros((len(labels), len(weeks)))
    warnings = []
    dropped = 0
    for t in txns:
        w = week_id(t.timestamp)
        if w not in col:
            dropped += 1
            continue
        values[row[t.entity_name], col[w]] += t.amount
        if t.amount < 0:
            warnings.append(f"negative amount {t.amount} for {t.entity_name} in {w}")
    if dropped:
        warnings.append(f"{dropped} transactions outside the explicit span were dropped")
    return SeriesMatrix(labels=labels, values=values, grid_start=weeks[0], warnings=warnings)


def write_weekly_csv(sm, path, meta_path):
    """Weekly-series CSV (header entity,week_0,...) plus a key-value sidecar."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity"] + [f"week_{i}" for i in range(sm.t)])
        for lab, row in zip(sm.labels, sm.values):
            w.writerow([lab] + [repr(float(v)) for v in row])
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(f"grid_start={sm.grid_start}\n")
        fh.write(f"grid_len={sm.t}\n")


def read_weekly_csv(path, meta_path):
    meta = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                k, _, v = line.partition("=")
                meta[k] = v
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "entity":
            raise InputError(f"{path}: not a weekly-series CSV")
        labels = []
        rows = []
        for row in reader:
            labels.append(row[0])
            rows.append([float(v) for v in row[1:]])
    values = np.array(rows) if rows else np.zeros((0, len(header) - 1))
    sm = SeriesMatrix(labels=labels, values=values, grid_start=meta.get("grid_start", ""))
    if int(meta.get("grid_len", sm.t)) != sm.t:
        raise InputError(f"{path}: sidecar grid_len disagrees with the CSV width")
    return sm


def dedupe_rows(text, delimiter=","):
    """Drop exact duplicate data rows, keeping the first occurrence."""
    lines = text.splitlines()
    if not lines:
        return text
    seen = set()
    out = [lines[0]]
    for line in lines[1:]:
        if line not in seen:
            seen.add(line)
            out.append(line)
    return "\n".join(out) + ("\n" if text.endswith("\n") else "")

"""Ingestion and preconditioning of county profiles and daily case series.

Inputs are plain CSV files. Profile files carry one row per county with a
designated name column plus numeric feature columns. Case files are long
format with one row per (date, county) pair. County names are reduced to a
plain ASCII key so that rows from differently spelled sources merge.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import (
    DegenerateColumn,
    DuplicateCounty,
    EmptyName,
    EmptySeries,
    EmptySlice,
    MissingNameColumn,
    ParseError,
)

logger = logging.getLogger(__name__)

_WS = re.compile(r" +")
_KEY_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789- ")


@dataclass(frozen=True)
class CountyKey:
    """A county name together with its normalized merge key.

    Equality and hashing use only the normalized form, so spelling
    variants of the same county compare equal.
    """

    raw_name: str = field(compare=False)
    normalized: str = ""

    def __str__(self) -> str:
        return self.normalized


def _strip_marks(text: str) -> str:
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(ch for ch in decomposed if unicodedata.category(ch) != "Mn")


def normalize_name(raw: str) -> CountyKey:
    """Build the merge key for a raw county name.

    Accents are stripped, case is folded, punctuation other than hyphens
    is dropped, and runs of whitespace collapse to a single space.
    Raises EmptyName when nothing usable remains.
    """
    if raw is None or not raw.strip():
        raise EmptyName("county name is empty")
    # casefold can itself introduce combining marks, so strip twice
    text = _strip_marks(_strip_marks(raw).casefold())
    kept = []
    for ch in text:
        if ch.isspace():
            kept.append(" ")
        elif ch in _KEY_CHARS:
            kept.append(ch)
    key = _WS.sub(" ", "".join(kept)).strip()
    if not key:
        raise EmptyName(f"county name {raw!r} has no usable characters")
    return CountyKey(raw_name=raw, normalized=key)


@dataclass(frozen=True)
class FeatureMatrix:
    """County-by-feature numeric matrix with aligned row and column labels.

    Values are held in a read-only float array; transformation helpers
    return new matrices rather than mutating.
    """

    county_keys: tuple[CountyKey, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        keys = tuple(self.county_keys)
        names = tuple(self.feature_names)
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if values.shape != (len(keys), len(names)):
            raise ValueError(
                f"shape {values.shape} does not match {len(keys)} counties "
                f"x {len(names)} features"
            )
        seen = set()
        for key in keys:
            if key.normalized in seen:
                raise DuplicateCounty(key.normalized)
            seen.add(key.normalized)
        values.setflags(write=False)
        object.__setattr__(self, "county_keys", keys)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", values)

    @property
    def n_counties(self) -> int:
        return len(self.county_keys)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


@dataclass(frozen=True)
class ProfileSchema:
    """Column layout of a profile CSV.

    feature_cols of None means every column other than the name column.
    """

    name_col: str
    feature_cols: tuple[str, ...] | None = None


def load_profiles(path, schema: ProfileSchema) -> FeatureMatrix:
    """Read a profile CSV into a FeatureMatrix.

    Every feature cell must parse as a float; a failed cell raises
    ParseError carrying the 1-based file line and the column name.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("profile file is empty", row=1)
        header = [h.strip() for h in header]
        if schema.name_col not in header:
            raise MissingNameColumn(
                f"column {schema.name_col!r} not in header {header}"
            )
        name_idx = header.index(schema.name_col)
        if schema.feature_cols is None:
            feature_names = [h for i, h in enumerate(header) if i != name_idx]
        else:
            for col in schema.feature_cols:
                if col not in header:
                    raise ParseError(f"feature column {col!r} not in header",
                                     row=1, column=col)
            feature_names = list(schema.feature_cols)
        feature_idx = [header.index(c) for c in feature_names]

        keys: list[CountyKey] = []
        rows: list[list[float]] = []
        seen: set[str] = set()
        for lineno, rec in enumerate(reader, start=2):
            if not any(cell.strip() for cell in rec):
                continue
            if len(rec) < len(header):
                raise ParseError(f"row has {len(rec)} cells, expected "
                                 f"{len(header)}", row=lineno)
            key = normalize_name(rec[name_idx])
            if key.normalized in seen:
                raise DuplicateCounty(key.normalized)
            seen.add(key.normalized)
            vals = []
            for col, j in zip(feature_names, feature_idx):
                cell = rec[j].strip()
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {cell!r}", row=lineno, column=col
                    ) from None
            keys.append(key)
            rows.append(vals)
    if not keys:
        raise ParseError("profile file has no data rows", row=1)
    return FeatureMatrix(tuple(keys), tuple(feature_names), np.array(rows))


def merge_profiles(matrices) -> FeatureMatrix:
    """Merge several profile matrices into one.

    Matrices earlier in the sequence take precedence: when a feature name
    appears more than once, the first occurrence supplies the values.
    Counties are the intersection, in the first matrix's row order, since
    features are not imputed for counties absent from a source.
    """
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one matrix")
    common = set(matrices[0].county_keys)
    for m in matrices[1:]:
        common &= set(m.county_keys)
    if not common:
        raise ValueError("matrices share no counties")
    keys = tuple(k for k in matrices[0].county_keys if k in common)

    names: list[str] = []
    columns: list[np.ndarray] = []
    for m in matrices:
        index = {k: i for i, k in enumerate(m.county_keys)}
        order = [index[k] for k in keys]
        for j, name in enumerate(m.feature_names):
            if name in names:
                continue
            names.append(name)
            columns.append(m.values[order, j])
    return FeatureMatrix(keys, tuple(names), np.column_stack(columns))


def prune_correlated(m: FeatureMatrix, threshold: float = 0.9):
    """Drop redundant feature columns, keeping the earlier of any pair.

    Scans columns left to right; a column is dropped when its absolute
    Pearson correlation with an already kept column exceeds threshold.
    Constant columns are dropped too (correlation is undefined for them)
    and reported in the same list. Returns (pruned matrix, dropped names).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if m.n_features == 0:
        return m, []
    X = m.values
    keep: list[int] = []
    dropped: list[str] = []
    for j, name in enumerate(m.feature_names):
        col = X[:, j]
        if np.std(col) == 0.0:
            logger.warning("dropping constant feature %r", name)
            dropped.append(name)
            continue
        redundant = False
        for i in keep:
            r = np.corrcoef(X[:, i], col)[0, 1]
            if abs(r) > threshold:
                logger.info("dropping %r, |r|=%.4f with %r",
                            name, abs(r), m.feature_names[i])
                redundant = True
                break
        if redundant:
            dropped.append(name)
        else:
            keep.append(j)
    pruned = FeatureMatrix(
        m.county_keys,
        tuple(m.feature_names[i] for i in keep),
        X[:, keep],
    )
    return pruned, dropped


def minmax_scale(m: FeatureMatrix) -> FeatureMatrix:
    """Rescale every feature column to [0, 1] by (x - min) / (max - min).

    Raises DegenerateColumn for constant columns; run prune_correlated
    first to remove them.
    """
    X = m.values
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    for name, a, b in zip(m.feature_names, lo, hi):
        if a == b:
            raise DegenerateColumn(f"feature {name!r} is constant")
    return FeatureMatrix(m.county_keys, m.feature_names, (X - lo) / (hi - lo))


@dataclass(frozen=True)
class Period:
    """Closed date interval [start, end]."""

    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"period start {self.start} is after {self.end}")

    @classmethod
    def parse(cls, text: str) -> "Period":
        """Parse 'YYYY-MM-DD..YYYY-MM-DD'."""
        parts = text.split("..")
        if len(parts) != 2:
            raise ValueError(f"expected 'start..end', got {text!r}")
        return cls(date.fromisoformat(parts[0]), date.fromisoformat(parts[1]))

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end

    def __str__(self) -> str:
        return f"{self.start.isoformat()}..{self.end.isoformat()}"


@dataclass(frozen=True)
class CaseSeries:
    """Gap-free daily counts for one county.

    dates are consecutive calendar days; new_cases, new_deaths and
    cumulative_cases are aligned nonnegative integer arrays and the
    cumulative column is the running total of new cases, possibly offset
    by history before the first date (after slicing).
    """

    county: CountyKey
    dates: tuple[date, ...]
    new_cases: np.ndarray
    new_deaths: np.ndarray
    cumulative_cases: np.ndarray

    def __post_init__(self):
        dates = tuple(self.dates)
        if not dates:
            raise EmptySeries(self.county.normalized)
        cases = np.array(self.new_cases, dtype=np.int64)
        deaths = np.array(self.new_deaths, dtype=np.int64)
        cum = np.array(self.cumulative_cases, dtype=np.int64)
        n = len(dates)
        if cases.shape != (n,) or deaths.shape != (n,) or cum.shape != (n,):
            raise ValueError("date and count arrays must align")
        for prev, cur in zip(dates, dates[1:]):
            if (cur - prev).days != 1:
                raise ValueError(f"dates not consecutive at {prev} -> {cur}")
        if (cases < 0).any() or (deaths < 0).any() or (cum < 0).any():
            raise ValueError("counts must be nonnegative")
        if n > 1 and not np.array_equal(np.diff(cum), cases[1:]):
            raise ValueError("cumulative_cases must accumulate new_cases")
        if cum[0] < cases[0]:
            raise ValueError("cumulative total below first day's new cases")
        for arr in (cases, deaths, cum):
            arr.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "new_cases", cases)
        object.__setattr__(self, "new_deaths", deaths)
        object.__setattr__(self, "cumulative_cases", cum)

    @classmethod
    def from_daily(cls, county: CountyKey, start: date, new_cases,
                   new_deaths=None, carried: int = 0) -> "CaseSeries":
        """Build a series from daily increments starting at a date.

        carried is the cumulative total before the first day.
        """
        cases = np.asarray(new_cases, dtype=np.int64)
        if new_deaths is None:
            deaths = np.zeros(cases.size, dtype=np.int64)
        else:
            deaths = np.asarray(new_deaths, dtype=np.int64)
        dates = tuple(start + timedelta(days=i) for i in range(cases.size))
        return cls(county, dates, cases, deaths, carried + np.cumsum(cases))

    @property
    def length(self) -> int:
        return len(self.dates)

    @property
    def total_cases(self) -> int:
        return int(self.cumulative_cases[-1])

    @property
    def total_deaths(self) -> int:
        return int(self.new_deaths.sum())


def slice_period(series: CaseSeries, period: Period) -> CaseSeries:
    """Restrict a series to the days inside a period.

    Cumulative totals keep their original values, so the first entry
    carries all history before the period. Raises EmptySlice when the
    period overlaps no dates.
    """
    idx = [i for i, d in enumerate(series.dates) if period.contains(d)]
    if not idx:
        raise EmptySlice(
            f"{series.county.normalized}: no dates in {period}"
        )
    lo, hi = idx[0], idx[-1] + 1
    return CaseSeries(
        series.county,
        series.dates[lo:hi],
        series.new_cases[lo:hi],
        series.new_deaths[lo:hi],
        series.cumulative_cases[lo:hi],
    )


@dataclass(frozen=True)
class LoadWarning:
    """One repaired irregularity found while loading a case file."""

    county: str
    day: date | None
    kind: str
    detail: str

    def as_dict(self) -> dict:
        return {
            "county": self.county,
            "date": self.day.isoformat() if self.day else None,
            "kind": self.kind,
            "detail": self.detail,
        }


class CaseSeriesMap(dict):
    """Mapping of normalized county key to CaseSeries.

    Carries the list of load warnings (negative counts clamped to zero)
    so callers can persist a data-quality report.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.warnings: list[LoadWarning] = []

    def write_report(self, path) -> None:
        """Write warnings as JSON lines."""
        with open(path, "w", encoding="utf-8") as fh:
            for w in self.warnings:
                fh.write(json.dumps(w.as_dict(), sort_keys=True) + "\n")


_CASE_COLUMNS = ("date", "county", "new_cases", "new_deaths")


def _parse_count(cell: str, lineno: int, column: str) -> int:
    cell = cell.strip()
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric count {cell!r}",
                         row=lineno, column=column) from None
    if not value.is_integer():
        raise ParseError(f"count {cell!r} is not an integer",
                         row=lineno, column=column)
    return int(value)


def load_case_series(path) -> CaseSeriesMap:
    """Read a long-format case CSV into per-county daily series.

    The file needs columns date, county, new_cases, new_deaths. Missing
    days inside a county's date range are filled with zero counts, and
    negative counts are clamped to zero with a warning recorded on the
    returned map. Cumulative cases are recomputed from the repaired
    daily values.
    """
    per_county: dict[str, dict[date, list[int]]] = {}
    keys: dict[str, CountyKey] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        fieldnames = [f.strip() for f in (reader.fieldnames or [])]
        for col in _CASE_COLUMNS:
            if col not in fieldnames:
                raise ParseError(f"case file missing column {col!r}",
                                 row=1, column=col)
        for lineno, rec in enumerate(reader, start=2):
            if not any((v or "").strip() for v in rec.values()):
                continue
            raw_date = (rec.get("date") or "").strip()
            try:
                day = date.fromisoformat(raw_date)
            except ValueError:
                raise ParseError(f"bad date {raw_date!r}",
                                 row=lineno, column="date") from None
            try:
                key = normalize_name(rec.get("county") or "")
            except EmptyName:
                raise ParseError("empty county name",
                                 row=lineno, column="county") from None
            cases = _parse_count(rec.get("new_cases") or "", lineno,
                                 "new_cases")
            deaths = _parse_count(rec.get("new_deaths") or "", lineno,
                                  "new_deaths")
            days = per_county.setdefault(key.normalized, {})
            if day in days:
                raise ParseError(
                    f"duplicate row for {key.normalized} on {day}",
                    row=lineno, column="date",
                )
            keys.setdefault(key.normalized, key)
            days[day] = [cases, deaths]

    result = CaseSeriesMap()
    if not per_county:
        raise ParseError("case file has no data rows", row=1)
    for norm in sorted(per_county):
        days = per_county[norm]
        key = keys[norm]
        first = min(days)
        last = max(days)
        span = (last - first).days + 1
        cases = np.zeros(span, dtype=np.int64)
        deaths = np.zeros(span, dtype=np.int64)
        for day, (c, d) in days.items():
            i = (day - first).days
            if c < 0:
                result.warnings.append(LoadWarning(
                    norm, day, "negative_new_cases",
                    f"clamped {c} to 0"))
                c = 0
            if d < 0:
                result.warnings.append(LoadWarning(
                    norm, day, "negative_new_deaths",
                    f"clamped {d} to 0"))
                d = 0
            cases[i] = c
            deaths[i] = d
        result[norm] = CaseSeries.from_daily(key, first, cases, deaths)
    return result

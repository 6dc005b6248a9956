"""Questionnaire schema (codebook), immutable record tables, and CSV ingestion.

A cell value is one of:

* ``str``   -- a category, for categorical / binary / ordinal attributes
* ``int`` or ``float`` -- a number, for numeric attributes
* :data:`MISSING` -- an explicit missing marker, never a category string
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import (
    CodebookError,
    DuplicateAttribute,
    HeaderMismatch,
    InvalidAttribute,
    InvalidValue,
    NonNumericValue,
    UnknownAttribute,
    UnknownCategory,
)

KINDS = ("categorical", "binary", "ordinal", "numeric")
GROUPS = ("general", "personal", "work", "interests")


class _Missing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __reduce__(self):
        return (_Missing, ())

    def __bool__(self) -> bool:
        return False


MISSING = _Missing()


def is_missing(value: Any) -> bool:
    return value is MISSING


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    group: str = "general"

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if not self.name or not isinstance(self.name, str):
            raise InvalidAttribute(f"attribute name must be a non-empty string, got {self.name!r}")
        if self.kind not in KINDS:
            raise InvalidAttribute(f"{self.name}: unknown kind {self.kind!r}")
        if self.group not in GROUPS:
            raise InvalidAttribute(f"{self.name}: unknown group {self.group!r}")
        if len(set(self.categories)) != len(self.categories):
            raise InvalidAttribute(f"{self.name}: repeated category")
        if self.kind == "numeric":
            if self.categories:
                raise InvalidAttribute(f"{self.name}: numeric attribute cannot list categories")
        elif self.kind == "binary":
            if len(self.categories) != 2:
                raise InvalidAttribute(
                    f"{self.name}: binary attribute needs exactly 2 categories, "
                    f"got {len(self.categories)}"
                )
        elif len(self.categories) < 2:
            raise InvalidAttribute(f"{self.name}: {self.kind} attribute needs at least 2 categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"

    def accepts(self, value: Any) -> bool:
        if value is MISSING:
            return True
        if self.is_numeric:
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        return isinstance(value, str) and value in self.categories

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "categories": list(self.categories),
            "group": self.group,
        }


@dataclass(frozen=True)
class Codebook:
    attributes: tuple[AttributeSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        if not attrs:
            raise CodebookError("codebook must declare at least one attribute")
        index = {}
        for i, spec in enumerate(attrs):
            if spec.name in index:
                raise DuplicateAttribute(f"duplicate attribute name {spec.name!r}")
            index[spec.name] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.attributes)

    def __iter__(self) -> Iterator[AttributeSpec]:
        return iter(self.attributes)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> AttributeSpec:
        try:
            return self.attributes[self._index[name]]
        except KeyError:
            raise UnknownAttribute(name) from None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownAttribute(name) from None

    def without(self, names: Iterable[str]) -> "Codebook":
        names = set(names)
        for n in names:
            self.index(n)
        return Codebook(tuple(a for a in self.attributes if a.name not in names))

    def to_dict(self) -> dict:
        return {"attributes": [a.to_dict() for a in self.attributes]}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Codebook":
        try:
            raw = payload["attributes"]
            specs = [
                AttributeSpec(
                    name=item["name"],
                    kind=item["kind"],
                    categories=tuple(item.get("categories", ())),
                    group=item["group"],
                )
                for item in raw
            ]
        except (KeyError, TypeError) as exc:
            raise CodebookError(f"malformed codebook: {exc}") from exc
        return cls(tuple(specs))


def load_codebook(path: str | Path) -> Codebook:
    """Read a codebook JSON file, keeping the declared attribute order."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CodebookError(f"{path}: invalid JSON: {exc}") from exc
    return Codebook.from_dict(payload)


def save_codebook(codebook: Codebook, path: str | Path) -> None:
    Path(path).write_text(json.dumps(codebook.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    """Immutable table of questionnaire records, one value per codebook attribute.

    Rows are positional tuples; the row index is the only record identity.
    """

    codebook: Codebook
    rows: tuple[tuple[Any, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        width = len(self.codebook)
        specs = self.codebook.attributes
        for i, row in enumerate(rows):
            if len(row) != width:
                raise InvalidValue(f"row {i} has {len(row)} values, expected {width}")
            for spec, value in zip(specs, row):
                if not spec.accepts(value):
                    raise InvalidValue(f"row {i}, column {spec.name!r}: {value!r} not admissible")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def names(self) -> tuple[str, ...]:
        return self.codebook.names

    def column(self, name: str) -> list:
        j = self.codebook.index(name)
        return [row[j] for row in self.rows]

    def records(self) -> Iterator[dict[str, Any]]:
        names = self.names
        for row in self.rows:
            yield dict(zip(names, row))

    def is_complete(self) -> bool:
        return all(v is not MISSING for row in self.rows for v in row)

    def take(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(self.codebook, tuple(self.rows[i] for i in indices))

    def drop_columns(self, names: Iterable[str]) -> "Dataset":
        names = list(names)
        keep = [i for i, n in enumerate(self.names) if n not in set(names)]
        codebook = self.codebook.without(names)
        return Dataset(codebook, tuple(tuple(row[i] for i in keep) for row in self.rows))

    def with_column(self, spec: AttributeSpec, values: Sequence[Any]) -> "Dataset":
        if len(values) != len(self.rows):
            raise InvalidValue(f"{spec.name}: {len(values)} values for {len(self.rows)} rows")
        codebook = Codebook(self.codebook.attributes + (spec,))
        return Dataset(codebook, tuple(row + (v,) for row, v in zip(self.rows, values)))

    def replace_column(self, spec: AttributeSpec, values: Sequence[Any]) -> "Dataset":
        j = self.codebook.index(spec.name)
        attrs = list(self.codebook.attributes)
        attrs[j] = spec
        rows = tuple(row[:j] + (v,) + row[j + 1 :] for row, v in zip(self.rows, values))
        return Dataset(Codebook(tuple(attrs)), rows)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


_INT_RE = re.compile(r"[+-]?\d+")


def format_value(value: Any) -> str:
    if value is MISSING:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(token: str, spec: AttributeSpec, row: int) -> Any:
    if token == "":
        return MISSING
    if spec.is_numeric:
        token = token.strip()
        if _INT_RE.fullmatch(token):
            return int(token)
        try:
            return float(token)
        except ValueError:
            raise NonNumericValue(row, spec.name, token) from None
    if token not in spec.categories:
        raise UnknownCategory(row, spec.name, token)
    return token


def parse_csv_text(text: str, codebook: Codebook, *, source: str = "<csv>") -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch(f"{source}: empty file, expected header {list(codebook.names)}") from None
    if tuple(header) != codebook.names:
        raise HeaderMismatch(f"{source}: header {header} does not match codebook {list(codebook.names)}")
    specs = codebook.attributes
    rows = []
    for i, tokens in enumerate(reader):
        if not tokens:
            continue
        if len(tokens) != len(specs):
            raise HeaderMismatch(f"{source}: data row {i} has {len(tokens)} fields, expected {len(specs)}")
        rows.append(tuple(parse_value(tok, spec, i) for tok, spec in zip(tokens, specs)))
    return Dataset(codebook, tuple(rows))


def ingest_csv(path: str | Path, codebook: Codebook) -> Dataset:
    """Read a questionnaire CSV whose header matches the codebook exactly.

    Empty fields become :data:`MISSING`. Category tokens are checked against
    the attribute's category list; row numbers in errors are 0-based data rows.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_csv_text(text, codebook, source=str(path))


@dataclass
class AttributeSummary:
    name: str
    kind: str
    missing: int
    frequencies: dict[str, int] = field(default_factory=dict)
    minimum: float | None = None
    maximum: float | None = None


@dataclass
class ValidationReport:
    n_rows: int
    attributes: list[AttributeSummary]

    def __getitem__(self, name: str) -> AttributeSummary:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UnknownAttribute(name)

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "attributes": [
                {
                    "name": a.name,
                    "kind": a.kind,
                    "missing": a.missing,
                    "frequencies": a.frequencies,
                    "min": a.minimum,
                    "max": a.maximum,
                }
                for a in self.attributes
            ],
        }


def validate(dataset: Dataset) -> ValidationReport:
    summaries = []
    for spec in dataset.codebook:
        col = dataset.column(spec.name)
        observed = [v for v in col if v is not MISSING]
        summary = AttributeSummary(spec.name, spec.kind, missing=len(col) - len(observed))
        if spec.is_numeric:
            if observed:
                summary.minimum = min(observed)
                summary.maximum = max(observed)
        else:
            counts = Counter(observed)
            summary.frequencies = {c: counts[c] for c in spec.categories if counts[c]}
        summaries.append(summary)
    return ValidationReport(dataset.n_rows, summaries)

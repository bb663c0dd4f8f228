"""Study tables, the embedded Carvedilol data, and JSON reports.

CSV dialect: comma separated, UTF-8, header row required, empty cells or
``NA`` mean missing. Recognised columns are listed in :data:`COLUMNS`;
anything else is kept verbatim in :attr:`StudyRecord.extra`.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .core import Inequality, Study, StudySet, z_from_p
from .numerics import normal_quantile, normal_sf

__all__ = [
    "COLUMNS",
    "CsvFormatError",
    "StudyRecord",
    "StudyTable",
    "AnalysisReport",
    "load_csv",
    "dump_csv",
    "write_csv",
    "se_from_ci",
    "wald_p_one_sided",
    "carvedilol_dataset",
    "load_dataset",
    "write_report",
    "read_report",
    "canonical_json",
]

COLUMNS = (
    "id",
    "p_one_sided",
    "effect",
    "se",
    "ci_lower",
    "ci_upper",
    "weight",
    "sample_size",
    "benefit_direction",
)
_FLOAT_COLUMNS = ("p_one_sided", "effect", "se", "ci_lower", "ci_upper", "weight")
_MISSING = ("", "NA")
DIRECTIONS = ("positive", "negative")


class CsvFormatError(ValueError):
    """Malformed study table; the message carries the row and column."""


@dataclass(frozen=True)
class StudyRecord:
    """One row of a study table.

    ``effect`` is on the analysis scale (log hazard ratio for Carvedilol);
    ``ci_lower``/``ci_upper`` are on the exponentiated (ratio) scale.
    """

    id: str
    p_one_sided: Optional[float] = None
    effect: Optional[float] = None
    se: Optional[float] = None
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    weight: Optional[float] = None
    sample_size: Optional[int] = None
    extra: Tuple[Tuple[str, str], ...] = ()

    def standard_error(self, level: float = 0.95) -> Optional[float]:
        if self.se is not None:
            return self.se
        if self.ci_lower is not None and self.ci_upper is not None:
            return se_from_ci(self.ci_lower, self.ci_upper, level)
        return None

    def point_effect(self) -> Optional[float]:
        if self.effect is not None:
            return self.effect
        if self.ci_lower is not None and self.ci_upper is not None:
            return 0.5 * (math.log(self.ci_lower) + math.log(self.ci_upper))
        return None


@dataclass(frozen=True)
class StudyTable:
    rows: Tuple[StudyRecord, ...]
    source: str = "memory"
    benefit_direction: str = "positive"

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if not self.rows:
            raise ValueError("no studies")
        ids = [r.id for r in self.rows]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate study ids: {dupes}")
        if self.benefit_direction not in DIRECTIONS:
            raise ValueError(f"benefit_direction must be one of {DIRECTIONS}")
        for r in self.rows:
            self._study(r, "none", "reported")

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        # the source path is provenance, not content
        if not isinstance(other, StudyTable):
            return NotImplemented
        return self.rows == other.rows and self.benefit_direction == other.benefit_direction

    def __hash__(self):
        return hash((self.rows, self.benefit_direction))

    @property
    def sign(self) -> int:
        return 1 if self.benefit_direction == "positive" else -1

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.rows]

    def row(self, study_id: str) -> StudyRecord:
        for r in self.rows:
            if r.id == study_id:
                return r
        raise KeyError(f"unknown study id {study_id!r}")

    def _study(self, r: StudyRecord, weights: str, effects: str) -> Study:
        se = r.standard_error()
        reported = r.point_effect()
        if r.p_one_sided is not None:
            z = z_from_p(r.p_one_sided)
        elif reported is not None and se is not None:
            z = self.sign * reported / se
        else:
            raise ValueError(f"study {r.id}: need a p-value, or an effect with a standard error")
        if effects == "reconstructed" and se is not None:
            effect = self.sign * z * se
        else:
            effect = reported
        if weights == "none":
            w = None
        elif weights == "inverse_variance":
            if se is None:
                raise ValueError(f"study {r.id}: inverse-variance weights need a standard error")
            w = 1.0 / se**2
        elif weights == "explicit":
            if r.weight is None:
                raise ValueError(f"study {r.id}: explicit weights requested but the weight column is empty")
            w = r.weight
        else:
            raise ValueError(f"unknown weights mode {weights!r}")
        return Study(r.id, z=z, effect=effect, se=se, weight=w, sample_size=r.sample_size)

    def to_study_set(self, weights: str = "none", effects: str = "reported") -> StudySet:
        """Build a :class:`StudySet` with z-scores from the one-sided p-values.

        ``effects="reconstructed"`` replaces each effect estimate by
        ``z * se`` oriented towards benefit, the convention used for the
        fixed-effects meta-analysis.
        """
        if effects not in ("reported", "reconstructed"):
            raise ValueError("effects must be 'reported' or 'reconstructed'")
        return StudySet(tuple(self._study(r, weights, effects) for r in self.rows))

    @property
    def pvalues(self) -> List[float]:
        return [r.p_one_sided if r.p_one_sided is not None else normal_sf(self.sign * r.point_effect() / r.standard_error()) for r in self.rows]

    @property
    def ses(self) -> List[Optional[float]]:
        return [r.standard_error() for r in self.rows]

    def reconstructed_effects(self) -> List[float]:
        return [s.effect for s in self.to_study_set(effects="reconstructed")]

    def perturb(self, study_id: str, factor: float) -> "StudyTable":
        """Multiply one study's p-value by ``factor``; its effect is re-derived as ``z * se``."""
        if not factor > 0:
            raise ValueError("perturbation factor must be positive")
        old = self.row(study_id)
        if old.p_one_sided is None:
            raise ValueError(f"study {study_id} has no p-value to perturb")
        p = old.p_one_sided * factor
        if not p < 1:
            raise ValueError(f"perturbed p-value {p:g} for study {study_id} is not below 1")
        if factor == 1:
            return self
        se = old.standard_error()
        effect = None if se is None else self.sign * z_from_p(p) * se
        new = replace(old, p_one_sided=p, effect=effect, ci_lower=None, ci_upper=None, se=se)
        rows = tuple(new if r.id == study_id else r for r in self.rows)
        return StudyTable(rows, f"{self.source} (study {study_id} p x {factor:g})", self.benefit_direction)

    def sha256(self) -> str:
        return hashlib.sha256(dump_csv(self).encode("utf-8")).hexdigest()


def se_from_ci(lower: float, upper: float, level: float = 0.95) -> float:
    """Standard error of a log ratio from its confidence limits on the ratio scale."""
    if not 0 < lower < upper:
        raise ValueError("need 0 < lower < upper")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return (math.log(upper) - math.log(lower)) / (2.0 * normal_quantile((1.0 + level) / 2.0))


def wald_p_one_sided(effect: float, se: float, benefit: str = "negative") -> float:
    """One-sided Wald p-value for an effect in the ``benefit`` direction."""
    if not se > 0:
        raise ValueError("standard error must be positive")
    if benefit not in DIRECTIONS:
        raise ValueError(f"benefit must be one of {DIRECTIONS}")
    sign = 1 if benefit == "positive" else -1
    return normal_sf(sign * effect / se)


# Five trials of Carvedilol on mortality: log-rank one-sided p-values, log
# hazard ratios and their standard errors. Benefit is a negative log HR.
_CARVEDILOL = (
    ("220", 0.00025, -1.31, 0.41),
    ("240", 0.0245, -1.51, 0.85),
    ("223", 0.128, -0.33, 0.29),
    ("221", 0.1305, -0.56, 0.51),
    ("239", 0.2575, -0.63, 1.02),
)


def carvedilol_dataset() -> StudyTable:
    rows = tuple(StudyRecord(i, p_one_sided=p, effect=e, se=s) for i, p, e, s in _CARVEDILOL)
    return StudyTable(rows, "embedded:carvedilol", "negative")


EMBEDDED = {"carvedilol": carvedilol_dataset}


def load_dataset(name: str) -> StudyTable:
    try:
        return EMBEDDED[name]()
    except KeyError:
        raise ValueError(f"unknown embedded dataset {name!r}; available: {sorted(EMBEDDED)}") from None


# -- CSV ---------------------------------------------------------------------


def _parse_float(text, where):
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise CsvFormatError(f"{where}: value must be finite")
    return value


def load_csv(path) -> StudyTable:
    """Read a study table from ``path``."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return parse_csv(text, source=os.fspath(path))


def parse_csv(text: str, source: str = "memory") -> StudyTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CsvFormatError(f"{source}: empty file, header row required") from None
    if "id" not in header:
        raise CsvFormatError(f"{source}: header must contain an 'id' column")
    rows = []
    directions = set()
    seen = set()
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise CsvFormatError(f"{source}:{lineno}: expected {len(header)} fields, found {len(raw)}")
        cells = {h: c.strip() for h, c in zip(header, raw)}
        values = {}
        extra = []
        for col in header:
            cell = cells[col]
            where = f"{source}:{lineno}: column {col!r}"
            if col == "id":
                if cell in _MISSING:
                    raise CsvFormatError(f"{where}: study id is required")
                values["id"] = cell
            elif col in _FLOAT_COLUMNS:
                values[col] = None if cell in _MISSING else _parse_float(cell, where)
            elif col == "sample_size":
                if cell in _MISSING:
                    values[col] = None
                else:
                    try:
                        values[col] = int(cell)
                    except ValueError:
                        raise CsvFormatError(f"{where}: sample size must be an integer") from None
            elif col == "benefit_direction":
                if cell not in _MISSING:
                    if cell not in DIRECTIONS:
                        raise CsvFormatError(f"{where}: expected one of {DIRECTIONS}")
                    directions.add(cell)
            else:
                extra.append((col, cell))
        if values["id"] in seen:
            raise CsvFormatError(f"{source}:{lineno}: duplicate study id {values['id']!r}")
        seen.add(values["id"])
        p = values.get("p_one_sided")
        if p is not None and not 0 < p < 1:
            raise CsvFormatError(f"{source}:{lineno}: column 'p_one_sided': {p:g} outside the open interval (0, 1)")
        try:
            rows.append(StudyRecord(extra=tuple(extra), **values))
        except (TypeError, ValueError) as exc:
            raise CsvFormatError(f"{source}:{lineno}: {exc}") from None
    if not rows:
        raise CsvFormatError(f"{source}: no studies")
    if len(directions) > 1:
        raise CsvFormatError(f"{source}: benefit_direction must be the same for every row")
    direction = directions.pop() if directions else "positive"
    try:
        return StudyTable(tuple(rows), source, direction)
    except ValueError as exc:
        raise CsvFormatError(f"{source}: {exc}") from None


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_csv(table: StudyTable) -> str:
    """Canonical CSV text: fixed column order, shortest round-trip floats."""
    extra_cols = []
    for r in table.rows:
        for k, _ in r.extra:
            if k not in extra_cols:
                extra_cols.append(k)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(COLUMNS) + extra_cols)
    for r in table.rows:
        extra = dict(r.extra)
        cells = [getattr(r, c) for c in COLUMNS[:-1]] + [table.benefit_direction]
        writer.writerow([_fmt(c) for c in cells] + [extra.get(k, "") for k in extra_cols])
    return out.getvalue()


def write_csv(table: StudyTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_csv(table))


# -- JSON reports ------------------------------------------------------------

SIG_DIGITS = 6


def _canonical(obj):
    if isinstance(obj, Inequality):
        return {"gt": _canonical(obj.gt)}
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
        return float(f"{obj:.{SIG_DIGITS}g}")
    if hasattr(obj, "item") and callable(obj.item):
        return _canonical(obj.item())
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _revive(obj):
    if isinstance(obj, dict):
        if set(obj) == {"gt"}:
            return Inequality(obj["gt"])
        return {k: _revive(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_revive(v) for v in obj]
    return obj


@dataclass
class AnalysisReport:
    """JSON-serialisable analysis bundle.

    Floats are rounded to six significant digits on construction so that
    ``read_report(write_report(r)) == r``.
    """

    dataset: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    bounds: Optional[dict] = None
    ci: Optional[dict] = None
    version: str = ""

    def __post_init__(self):
        if not self.version:
            from . import __version__

            self.version = __version__
        for name in ("dataset", "settings", "results", "bounds", "ci"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, _revive(_canonical(value)))

    def to_dict(self) -> dict:
        d = {
            "dataset": self.dataset,
            "settings": self.settings,
            "results": self.results,
            "version": self.version,
        }
        if self.bounds is not None:
            d["bounds"] = self.bounds
        if self.ci is not None:
            d["ci"] = self.ci
        return _canonical(d)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        unknown = set(d) - {"dataset", "settings", "results", "bounds", "ci", "version"}
        if unknown:
            raise ValueError(f"unexpected report keys {sorted(unknown)}")
        return cls(
            dataset=d.get("dataset", {}),
            settings=d.get("settings", {}),
            results=d.get("results", {}),
            bounds=d.get("bounds"),
            ci=d.get("ci"),
            version=d.get("version", ""),
        )


def canonical_json(obj) -> str:
    data = obj.to_dict() if isinstance(obj, AnalysisReport) else _canonical(obj)
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: AnalysisReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(report))


def read_report(path) -> AnalysisReport:
    with open(path, encoding="utf-8") as fh:
        return AnalysisReport.from_dict(_revive(json.load(fh)))

"""Data Extraction Form (DEF) records: types, JSON (de)serialization, validation.

A DEF document is UTF-8 JSON::

    {"id": ..., "citation": ..., "studies": [{...StudyRecord fields...}, ...]}

Parsing is strict: unknown keys, missing keys and wrong types are all errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator, Literal, Optional

PValueKind = Literal["exact", "less_than"]
Funding = Literal["government", "non_government", "mixed", "unfunded", "unknown"]
Severity = Literal["error", "warning", "info"]

FUNDING_VALUES = ("government", "non_government", "mixed", "unfunded", "unknown")


class DefFormatError(ValueError):
    """Raised when a DEF document cannot be turned into a MetaRecord."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class EffectEstimate:
    rr: float
    cl_low: float
    cl_high: float
    level: float = 0.95

    def __post_init__(self):
        for name in ("rr", "cl_low", "cl_high"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if not self.cl_high > self.cl_low:
            raise ValueError(f"inverted interval: cl_low={self.cl_low} >= cl_high={self.cl_high}")
        if not 0 < self.level < 1:
            raise ValueError(f"level must lie in (0, 1), got {self.level!r}")

    @property
    def consistent(self) -> bool:
        """True when the point estimate lies inside its own interval."""
        return self.cl_low <= self.rr <= self.cl_high


@dataclass(frozen=True)
class PValueBound:
    """A reported p-value, possibly only as an upper bound such as ``<0.001``."""

    kind: PValueKind
    value: float

    def __post_init__(self):
        if self.kind not in ("exact", "less_than"):
            raise ValueError(f"unknown p-value kind {self.kind!r}")
        if not 0 < self.value <= 1:
            raise ValueError(f"p-value must lie in (0, 1], got {self.value!r}")

    def __str__(self) -> str:
        return f"<{self.value:g}" if self.kind == "less_than" else f"{self.value:g}"


@dataclass(frozen=True)
class SampleGroup:
    label: str
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"group {self.label!r}: size must be >= 1, got {self.size}")


@dataclass(frozen=True)
class CountSet:
    outcomes: int
    predictors: int
    covariates: int

    def __post_init__(self):
        for name in ("outcomes", "predictors", "covariates"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def dominates(self, other: "CountSet") -> bool:
        return (self.outcomes >= other.outcomes and self.predictors >= other.predictors
                and self.covariates >= other.covariates)


@dataclass(frozen=True)
class EndpointEffect:
    """An additional effect row a study contributes to the meta-analysis."""

    endpoint: str
    effect: EffectEstimate


@dataclass(frozen=True)
class StudyRecord:
    id: str
    citation: str
    journal_year: str
    overall_n: int
    groups: tuple[SampleGroup, ...]
    abstract_counts: CountSet
    text_counts: CountSet
    ffq_items: int
    tcovars: Optional[int]
    n_groups: int
    n_tests: int
    smallest_p: PValueBound
    largest_effect: EffectEstimate
    meta_effect: Optional[EffectEstimate]
    multiplicity_adjusted: bool
    funding: Funding
    extra_meta_effects: tuple[EndpointEffect, ...] = ()
    reported_space_abstract: Optional[int] = None
    reported_space_text: Optional[int] = None

    def counts(self, source: str) -> CountSet:
        if source == "abstract":
            return self.abstract_counts
        if source == "text":
            return self.text_counts
        raise ValueError(f"unknown count source {source!r}")

    def reported_space(self, source: str) -> Optional[int]:
        if source not in ("abstract", "text"):
            raise ValueError(f"unknown count source {source!r}")
        return self.reported_space_abstract if source == "abstract" else self.reported_space_text

    def effect_rows(self) -> list[tuple[str, EffectEstimate]]:
        """(row label, effect) for every meta-analysis row of this study."""
        rows = []
        if self.meta_effect is not None:
            rows.append((self.id, self.meta_effect))
        for extra in self.extra_meta_effects:
            rows.append((f"{self.id} ({extra.endpoint})", extra.effect))
        return rows


@dataclass(frozen=True)
class MetaRecord:
    id: str
    citation: str
    studies: tuple[StudyRecord, ...]

    def __post_init__(self):
        if not self.studies:
            raise DefFormatError("EMPTY_META", "a meta-analysis needs at least one study")
        seen = set()
        for s in self.studies:
            if s.id in seen:
                raise DefFormatError("DUPLICATE_ID", f"study id {s.id!r} appears twice")
            seen.add(s.id)

    def __getitem__(self, study_id: str) -> StudyRecord:
        for s in self.studies:
            if s.id == study_id:
                return s
        raise KeyError(study_id)

    def __iter__(self) -> Iterator[StudyRecord]:
        return iter(self.studies)

    def __len__(self) -> int:
        return len(self.studies)

    @property
    def total_n(self) -> int:
        return sum(s.overall_n for s in self.studies)


@dataclass(frozen=True)
class ValidationFinding:
    severity: Severity
    code: str
    field: str
    message: str


# --- parsing -----------------------------------------------------------------

def _expect_keys(obj: Any, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise DefFormatError("TYPE_MISMATCH", f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise DefFormatError("MISSING_FIELD", f"{where}: missing {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise DefFormatError("UNKNOWN_FIELD", f"{where}: unknown keys {sorted(unknown)}")


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise DefFormatError("TYPE_MISMATCH", f"{where}: expected an integer, got {v!r}")
    return v


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DefFormatError("TYPE_MISMATCH", f"{where}: expected a number, got {v!r}")
    return float(v)


def _str(v: Any, where: str) -> str:
    if not isinstance(v, str):
        raise DefFormatError("TYPE_MISMATCH", f"{where}: expected a string, got {v!r}")
    return v


def _effect(obj: Any, where: str) -> EffectEstimate:
    _expect_keys(obj, where, {"rr", "cl_low", "cl_high"}, {"level"})
    rr, lo, hi = (_num(obj[k], f"{where}.{k}") for k in ("rr", "cl_low", "cl_high"))
    level = _num(obj.get("level", 0.95), f"{where}.level")
    if rr <= 0 or lo <= 0 or hi <= 0:
        raise DefFormatError("NON_POSITIVE_EFFECT", f"{where}: ratios and limits must be > 0")
    if hi <= lo:
        raise DefFormatError("INVERTED_INTERVAL", f"{where}: cl_high {hi} <= cl_low {lo}")
    try:
        return EffectEstimate(rr, lo, hi, level)
    except ValueError as exc:
        raise DefFormatError("INVALID_VALUE", f"{where}: {exc}") from None


def _counts(obj: Any, where: str) -> CountSet:
    _expect_keys(obj, where, {"outcomes", "predictors", "covariates"})
    vals = [_int(obj[k], f"{where}.{k}") for k in ("outcomes", "predictors", "covariates")]
    if min(vals) < 0:
        raise DefFormatError("NEGATIVE_COUNT", f"{where}: counts must be >= 0")
    return CountSet(*vals)


def _pvalue(obj: Any, where: str) -> PValueBound:
    _expect_keys(obj, where, {"kind", "value"})
    kind = _str(obj["kind"], f"{where}.kind")
    value = _num(obj["value"], f"{where}.value")
    if kind not in ("exact", "less_than"):
        raise DefFormatError("INVALID_VALUE", f"{where}.kind: {kind!r}")
    if not 0 < value <= 1:
        raise DefFormatError("INVALID_VALUE", f"{where}.value must lie in (0, 1]")
    return PValueBound(kind, value)  # type: ignore[arg-type]


_STUDY_REQUIRED = {
    "id", "citation", "journal_year", "overall_n", "groups", "abstract_counts",
    "text_counts", "ffq_items", "tcovars", "n_groups", "n_tests", "smallest_p",
    "largest_effect", "meta_effect", "multiplicity_adjusted", "funding",
}
_STUDY_OPTIONAL = {"extra_meta_effects", "reported_space_abstract", "reported_space_text"}


def _positive(v: Any, where: str, code: str = "NON_POSITIVE") -> int:
    v = _int(v, where)
    if v < 1:
        raise DefFormatError(code, f"{where} must be >= 1, got {v}")
    return v


def _optional_int(v: Any, where: str) -> Optional[int]:
    return None if v is None else _int(v, where)


def _study(obj: Any, idx: int) -> StudyRecord:
    where = f"studies[{idx}]"
    _expect_keys(obj, where, _STUDY_REQUIRED, _STUDY_OPTIONAL)
    sid = _str(obj["id"], f"{where}.id")
    where = f"study {sid!r}"

    groups_raw = obj["groups"]
    if not isinstance(groups_raw, list):
        raise DefFormatError("TYPE_MISMATCH", f"{where}.groups: expected a list")
    groups = []
    for j, g in enumerate(groups_raw):
        _expect_keys(g, f"{where}.groups[{j}]", {"label", "size"})
        groups.append(SampleGroup(
            _str(g["label"], f"{where}.groups[{j}].label"),
            _positive(g["size"], f"{where}.groups[{j}].size", "NON_POSITIVE_SAMPLE_SIZE"),
        ))

    extras_raw = obj.get("extra_meta_effects", [])
    if not isinstance(extras_raw, list):
        raise DefFormatError("TYPE_MISMATCH", f"{where}.extra_meta_effects: expected a list")
    extras = []
    for j, e in enumerate(extras_raw):
        w = f"{where}.extra_meta_effects[{j}]"
        _expect_keys(e, w, {"endpoint", "effect"})
        extras.append(EndpointEffect(_str(e["endpoint"], f"{w}.endpoint"), _effect(e["effect"], f"{w}.effect")))

    funding = _str(obj["funding"], f"{where}.funding")
    if funding not in FUNDING_VALUES:
        raise DefFormatError("INVALID_VALUE", f"{where}.funding: {funding!r}")
    adjusted = obj["multiplicity_adjusted"]
    if not isinstance(adjusted, bool):
        raise DefFormatError("TYPE_MISMATCH", f"{where}.multiplicity_adjusted: expected a boolean")
    tcovars = _optional_int(obj["tcovars"], f"{where}.tcovars")
    if tcovars is not None and tcovars < 0:
        raise DefFormatError("NEGATIVE_COUNT", f"{where}.tcovars must be >= 0")

    return StudyRecord(
        id=sid,
        citation=_str(obj["citation"], f"{where}.citation"),
        journal_year=_str(obj["journal_year"], f"{where}.journal_year"),
        overall_n=_positive(obj["overall_n"], f"{where}.overall_n", "NON_POSITIVE_SAMPLE_SIZE"),
        groups=tuple(groups),
        abstract_counts=_counts(obj["abstract_counts"], f"{where}.abstract_counts"),
        text_counts=_counts(obj["text_counts"], f"{where}.text_counts"),
        ffq_items=_positive(obj["ffq_items"], f"{where}.ffq_items"),
        tcovars=tcovars,
        n_groups=_positive(obj["n_groups"], f"{where}.n_groups"),
        n_tests=_positive(obj["n_tests"], f"{where}.n_tests"),
        smallest_p=_pvalue(obj["smallest_p"], f"{where}.smallest_p"),
        largest_effect=_effect(obj["largest_effect"], f"{where}.largest_effect"),
        meta_effect=None if obj["meta_effect"] is None else _effect(obj["meta_effect"], f"{where}.meta_effect"),
        multiplicity_adjusted=adjusted,
        funding=funding,  # type: ignore[arg-type]
        extra_meta_effects=tuple(extras),
        reported_space_abstract=_optional_int(obj.get("reported_space_abstract"), f"{where}.reported_space_abstract"),
        reported_space_text=_optional_int(obj.get("reported_space_text"), f"{where}.reported_space_text"),
    )


def meta_from_dict(doc: Any) -> MetaRecord:
    _expect_keys(doc, "document", {"id", "citation", "studies"})
    studies_raw = doc["studies"]
    if not isinstance(studies_raw, list):
        raise DefFormatError("TYPE_MISMATCH", "document.studies: expected a list")
    if not studies_raw:
        raise DefFormatError("EMPTY_META", "document has no studies")
    studies = tuple(_study(s, i) for i, s in enumerate(studies_raw))
    return MetaRecord(_str(doc["id"], "document.id"), _str(doc["citation"], "document.citation"), studies)


def parse_def_file(data: bytes | str) -> MetaRecord:
    """Parse a DEF JSON document into a :class:`MetaRecord`.

    Raises :class:`DefFormatError` on any malformed or invalid input.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DefFormatError("MALFORMED", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DefFormatError("MALFORMED", str(exc)) from None
    return meta_from_dict(doc)


def _effect_dict(e: EffectEstimate) -> dict:
    return {"rr": e.rr, "cl_low": e.cl_low, "cl_high": e.cl_high, "level": e.level}


def _counts_dict(c: CountSet) -> dict:
    return {"outcomes": c.outcomes, "predictors": c.predictors, "covariates": c.covariates}


def study_to_dict(s: StudyRecord) -> dict:
    d = {
        "id": s.id,
        "citation": s.citation,
        "journal_year": s.journal_year,
        "overall_n": s.overall_n,
        "groups": [{"label": g.label, "size": g.size} for g in s.groups],
        "abstract_counts": _counts_dict(s.abstract_counts),
        "text_counts": _counts_dict(s.text_counts),
        "ffq_items": s.ffq_items,
        "tcovars": s.tcovars,
        "n_groups": s.n_groups,
        "n_tests": s.n_tests,
        "smallest_p": {"kind": s.smallest_p.kind, "value": s.smallest_p.value},
        "largest_effect": _effect_dict(s.largest_effect),
        "meta_effect": None if s.meta_effect is None else _effect_dict(s.meta_effect),
        "multiplicity_adjusted": s.multiplicity_adjusted,
        "funding": s.funding,
    }
    if s.extra_meta_effects:
        d["extra_meta_effects"] = [
            {"endpoint": e.endpoint, "effect": _effect_dict(e.effect)} for e in s.extra_meta_effects
        ]
    if s.reported_space_abstract is not None:
        d["reported_space_abstract"] = s.reported_space_abstract
    if s.reported_space_text is not None:
        d["reported_space_text"] = s.reported_space_text
    return d


def serialize(meta: MetaRecord) -> bytes:
    doc = {"id": meta.id, "citation": meta.citation, "studies": [study_to_dict(s) for s in meta.studies]}
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def bundled_malik_dataset() -> MetaRecord:
    """The ten primary studies of the Malik et al. (2010) sugar-sweetened beverage meta-analysis.

    Search-space sizes printed alongside the counts are kept verbatim in
    ``reported_space_abstract`` / ``reported_space_text``, including the ones that
    do not agree with their own counts.
    """
    data = resources.files("mtmm_audit").joinpath("data/malik2010.def.json").read_bytes()
    return parse_def_file(data)


# --- validation --------------------------------------------------------------

def _effect_findings(e: EffectEstimate, name: str) -> list[ValidationFinding]:
    if e.consistent:
        return []
    return [ValidationFinding(
        "warning", "RR_OUTSIDE_CI", name,
        f"point estimate {e.rr:g} lies outside its interval ({e.cl_low:g}, {e.cl_high:g})",
    )]


def validate_study(record: StudyRecord) -> list[ValidationFinding]:
    """Check a parsed record; returns findings sorted by field name, then code."""
    out: list[ValidationFinding] = []
    for source in ("abstract", "text"):
        c = record.counts(source)
        fname = f"{source}_counts"
        if c.outcomes == 0:
            out.append(ValidationFinding("error", "ZERO_OUTCOMES", fname, "outcomes must be >= 1 for an audit"))
        if c.predictors == 0:
            out.append(ValidationFinding("error", "ZERO_PREDICTORS", fname, "predictors must be >= 1 for an audit"))

    if record.groups:
        largest = max(g.size for g in record.groups)
        total = sum(g.size for g in record.groups)
        if largest > record.overall_n:
            out.append(ValidationFinding(
                "error", "GROUP_EXCEEDS_OVERALL", "groups",
                f"group of {largest} exceeds overall sample size {record.overall_n}",
            ))
        if total != record.overall_n:
            out.append(ValidationFinding(
                "info", "GROUP_SUM_DIFFERS", "groups",
                f"group sizes sum to {total}, overall sample size is {record.overall_n}",
            ))

    out += _effect_findings(record.largest_effect, "largest_effect")
    if record.meta_effect is not None:
        out += _effect_findings(record.meta_effect, "meta_effect")
    for j, extra in enumerate(record.extra_meta_effects):
        out += _effect_findings(extra.effect, f"extra_meta_effects[{j}]")

    if record.multiplicity_adjusted:
        out.append(ValidationFinding(
            "info", "MULTIPLICITY_ADJUSTED", "multiplicity_adjusted",
            "study reports a multiplicity adjustment",
        ))
    out.sort(key=lambda f: (f.field, f.code))
    return out

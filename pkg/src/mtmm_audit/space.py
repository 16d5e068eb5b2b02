"""Analysis search-space sizes and the reliability gate built on them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

from .defs import CountSet, MetaRecord, StudyRecord, ValidationFinding

Source = Literal["abstract", "text"]

# Gate thresholds from the audit protocol.
SPACE_LIMIT = 100
OP_LIMIT = 10
META_FRACTION = Fraction(1, 4)

# Exact integers are capped at 128 bits unless the caller asks for more.
MAX_SPACE = 2**128 - 1


class SpaceOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class SpaceSize:
    value: int
    source: Source


@dataclass(frozen=True)
class ReliabilityVerdict:
    study_id: str
    counts: CountSet
    space: SpaceSize
    op_product: int
    triggered_rules: tuple[str, ...]

    @property
    def unreliable(self) -> bool:
        return bool(self.triggered_rules)


@dataclass(frozen=True)
class MetaVerdict:
    source: Source
    per_study: tuple[ReliabilityVerdict, ...]
    unreliable_fraction: Fraction
    meta_unreliable: bool

    @property
    def unreliable_ids(self) -> list[str]:
        return [v.study_id for v in self.per_study if v.unreliable]


@dataclass(frozen=True)
class TableDiscrepancy:
    study_id: str
    source: Source
    reported: int
    recomputed: int

    @property
    def consistent(self) -> bool:
        return self.reported == self.recomputed


def compute_search_space(counts: CountSet, source: Source = "text", limit: int = MAX_SPACE) -> SpaceSize:
    """outcomes x predictors x 2**covariates, as an exact integer."""
    if counts.outcomes < 1:
        raise ValueError("search space needs at least one outcome")
    if counts.predictors < 1:
        raise ValueError("search space needs at least one predictor")
    if counts.covariates < 0:
        raise ValueError("covariate count must be >= 0")
    value = (counts.outcomes * counts.predictors) << counts.covariates
    if value > limit:
        raise SpaceOverflowError(
            f"search space {counts.outcomes}x{counts.predictors}x2^{counts.covariates} "
            f"exceeds the representation limit ({limit.bit_length()} bits)"
        )
    return SpaceSize(value, source)


def gate_counts(study_id: str, counts: CountSet, source: Source = "text",
                space_limit: int = SPACE_LIMIT, op_limit: int = OP_LIMIT) -> ReliabilityVerdict:
    space = compute_search_space(counts, source)
    op = counts.outcomes * counts.predictors
    rules = []
    if space.value > space_limit:
        rules.append("SPACE_GT_100")
    if op > op_limit:
        rules.append("OP_GT_10")
    return ReliabilityVerdict(study_id, counts, space, op, tuple(rules))


def gate_study(record: StudyRecord, source: Source,
               space_limit: int = SPACE_LIMIT, op_limit: int = OP_LIMIT) -> ReliabilityVerdict:
    """Apply the reliability gate to one study's abstract or text counts.

    A study is unreliable when its search space exceeds ``space_limit`` or
    outcomes x predictors exceeds ``op_limit`` (both strict).
    """
    return gate_counts(record.id, record.counts(source), source, space_limit, op_limit)


def meta_verdict(verdicts: list[ReliabilityVerdict], source: Source,
                 meta_fraction: Fraction = META_FRACTION) -> MetaVerdict:
    if not verdicts:
        raise ValueError("cannot gate an empty meta-analysis")
    k = sum(v.unreliable for v in verdicts)
    frac = Fraction(k, len(verdicts))
    return MetaVerdict(source, tuple(verdicts), frac, frac > meta_fraction)


def gate_meta(meta: MetaRecord, source: Source, space_limit: int = SPACE_LIMIT,
              op_limit: int = OP_LIMIT, meta_fraction: Fraction = META_FRACTION) -> MetaVerdict:
    """The meta-analysis is unreliable when strictly more than ``meta_fraction`` of its studies are."""
    verdicts = [gate_study(s, source, space_limit, op_limit) for s in meta.studies]
    return meta_verdict(verdicts, source, meta_fraction)


def audit_reported_tables(meta: MetaRecord, findings: Optional[list[ValidationFinding]] = None
                          ) -> list[TableDiscrepancy]:
    """Recompute every printed search-space value and compare.

    Studies without a printed value for a source are skipped; an info finding
    is appended to ``findings`` when a list is given.
    """
    out = []
    for source in ("abstract", "text"):
        for s in meta.studies:
            reported = s.reported_space(source)
            if reported is None:
                if findings is not None:
                    findings.append(ValidationFinding(
                        "info", "NO_REPORTED_SPACE", f"reported_space_{source}",
                        f"{s.id}: no printed {source} search space to audit",
                    ))
                continue
            recomputed = compute_search_space(s.counts(source), source).value
            out.append(TableDiscrepancy(s.id, source, reported, recomputed))
    return out

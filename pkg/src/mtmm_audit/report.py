"""End-to-end audit report: assembly, JSON and plain-text rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Optional, Sequence

from .defs import MetaRecord, validate_study
from .space import MetaVerdict, audit_reported_tables, gate_meta
from .stattools import OrderStatRow, bonferroni_factor, z_test

SCHEMA_VERSION = "1.0"


class MissingFieldError(ValueError):
    pass


def _sig(x: float, digits: int = 4) -> float:
    """Round to ``digits`` significant figures (report precision)."""
    return float(f"{x:.{digits}g}")


@dataclass
class ZRow:
    row: str
    rr: float
    cl_low: float
    cl_high: float
    beta: float
    beta_se: float
    z: float
    p_one_sided: float
    adj_factor: int
    adj_p: float


def ztest_rows(meta: MetaRecord) -> list[ZRow]:
    """One row per meta-analysis effect; raises MissingFieldError naming the first gap."""
    primary, extra = [], []
    for s in meta.studies:
        if s.meta_effect is None:
            raise MissingFieldError(f"study {s.id!r}: meta_effect is missing")
        if s.tcovars is None:
            raise MissingFieldError(f"study {s.id!r}: tcovars is missing")
        factor = bonferroni_factor(s.ffq_items, s.tcovars)
        # additional endpoints go after every study's main row
        for i, (label, eff) in enumerate(s.effect_rows()):
            r = z_test(eff, factor)
            (primary if i == 0 else extra).append(ZRow(
                label, eff.rr, eff.cl_low, eff.cl_high,
                round(r.beta, 3), round(r.beta_se, 3), round(r.z, 3),
                _sig(r.p_one_sided), r.adj_factor, _sig(r.adj_p),
            ))
    return primary + extra


@dataclass
class AuditReport:
    meta_id: str
    generated_at: str
    sources: list[str]
    n_studies: int
    n_multiplicity_adjusted: int
    space_section: dict
    ztest_section: Optional[list[dict]]
    discrepancy_section: list[dict]
    order_stat_section: Optional[list[dict]] = None
    notes: list[str] = field(default_factory=list)

    @property
    def meta_unreliable(self) -> bool:
        return any(m["meta_unreliable"] for m in self.space_section["meta"])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "meta_id": self.meta_id,
            "generated_at": self.generated_at,
            "sources": self.sources,
            "headline": {
                "n_studies": self.n_studies,
                "n_multiplicity_adjusted": self.n_multiplicity_adjusted,
                "meta_unreliable": self.meta_unreliable,
            },
            "space_section": self.space_section,
            "ztest_section": self.ztest_section,
            "discrepancy_section": self.discrepancy_section,
            "order_stat_section": self.order_stat_section,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        return cls(
            meta_id=d["meta_id"],
            generated_at=d["generated_at"],
            sources=list(d["sources"]),
            n_studies=d["headline"]["n_studies"],
            n_multiplicity_adjusted=d["headline"]["n_multiplicity_adjusted"],
            space_section=d["space_section"],
            ztest_section=d["ztest_section"],
            discrepancy_section=d["discrepancy_section"],
            order_stat_section=d["order_stat_section"],
            notes=list(d["notes"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _verdict_dicts(mv: MetaVerdict) -> list[dict]:
    return [
        {
            "id": v.study_id,
            "source": mv.source,
            "outcomes": v.counts.outcomes,
            "predictors": v.counts.predictors,
            "covariates": v.counts.covariates,
            "space": str(v.space.value),
            "op_product": v.op_product,
            "unreliable": v.unreliable,
            "triggered_rules": list(v.triggered_rules),
        }
        for v in mv.per_study
    ]


def _timestamp(now: Optional[datetime]) -> str:
    now = now or datetime.now(timezone.utc)
    return now.astimezone(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


def build_report(meta: MetaRecord, sources: Sequence[str] = ("text",),
                 now: Optional[datetime] = None,
                 order_stats: Optional[list[OrderStatRow]] = None) -> AuditReport:
    studies, metas = [], []
    for source in sources:
        mv = gate_meta(meta, source)  # type: ignore[arg-type]
        studies += _verdict_dicts(mv)
        k = sum(v.unreliable for v in mv.per_study)
        metas.append({
            "source": source,
            "unreliable_fraction": f"{k}/{len(mv.per_study)}",
            "unreliable_ids": mv.unreliable_ids,
            "meta_unreliable": mv.meta_unreliable,
        })

    notes = []
    n_adj = sum(s.multiplicity_adjusted for s in meta.studies)
    if n_adj == 0:
        notes.append(f"None of the {len(meta)} studies report a multiplicity adjustment.")
    for s in meta.studies:
        for f in validate_study(s):
            if f.severity != "info":
                notes.append(f"{s.id}: {f.severity} {f.code} in {f.field}: {f.message}")

    try:
        zsec = [vars(r) for r in ztest_rows(meta)]
    except MissingFieldError as exc:
        zsec = None
        notes.append(f"z-test section omitted: {exc}")
    if zsec is not None:
        n_sig = sum(r["adj_p"] < 0.05 for r in zsec)
        notes.append(f"{n_sig} of {len(zsec)} effect rows have Bonferroni-adjusted p < 0.05.")

    discrepancies = [
        {"id": d.study_id, "source": d.source, "reported": str(d.reported),
         "recomputed": str(d.recomputed), "consistent": d.consistent}
        for d in audit_reported_tables(meta)
    ]
    bad = sum(not d["consistent"] for d in discrepancies)
    if discrepancies:
        notes.append(f"{bad} of {len(discrepancies)} printed search-space values disagree with their counts.")

    osec = None
    if order_stats is not None:
        osec = [{"n": r.n, "expected_max": round(r.expected_max, 6),
                 "p_two_sided": _sig(r.p_two_sided, 5)} for r in order_stats]

    return AuditReport(
        meta_id=meta.id,
        generated_at=_timestamp(now),
        sources=list(sources),
        n_studies=len(meta),
        n_multiplicity_adjusted=n_adj,
        space_section={"studies": studies, "meta": metas},
        ztest_section=zsec,
        discrepancy_section=discrepancies,
        order_stat_section=osec,
        notes=notes,
    )


def format_prob(p: float) -> str:
    return "<0.0001" if p < 0.0001 else f"{p:.4f}"


def ztable_text(rows: list[ZRow]) -> str:
    head = f"{'Ref':<28}{'RR':>6}{'CLL':>6}{'CLH':>6}{'Beta':>8}{'BetaSE':>8}{'Z':>8}{'Prob':>9}{'AdjFactor':>11}{'AdjP':>11}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.row:<28}{r.rr:>6g}{r.cl_low:>6g}{r.cl_high:>6g}{r.beta:>8.3f}{r.beta_se:>8.3f}"
            f"{r.z:>8.3f}{format_prob(r.p_one_sided):>9}{r.adj_factor:>11d}{r.adj_p:>11.4g}"
        )
    n_sig = sum(r.adj_p < 0.05 for r in rows)
    lines.append(f"rows with adjusted p < 0.05: {n_sig} of {len(rows)}")
    return "\n".join(lines) + "\n"


def report_text(rep: AuditReport) -> str:
    out = [f"Audit of {rep.meta_id}", f"generated at {rep.generated_at}", ""]
    out.append(f"Studies: {rep.n_studies}; reporting a multiplicity adjustment: {rep.n_multiplicity_adjusted}")
    out.append("")
    out.append("Search space")
    out.append(f"  {'study':<14}{'source':<10}{'O':>4}{'P':>4}{'c':>4}{'space':>14}{'OxP':>6}  verdict")
    for s in rep.space_section["studies"]:
        verdict = "unreliable " + ",".join(s["triggered_rules"]) if s["unreliable"] else "reliable"
        out.append(f"  {s['id']:<14}{s['source']:<10}{s['outcomes']:>4}{s['predictors']:>4}"
                   f"{s['covariates']:>4}{s['space']:>14}{s['op_product']:>6}  {verdict}")
    for m in rep.space_section["meta"]:
        state = "UNRELIABLE" if m["meta_unreliable"] else "reliable"
        out.append(f"  meta-analysis ({m['source']}): {m['unreliable_fraction']} studies unreliable -> {state}")
    if rep.ztest_section is not None:
        out.append("")
        out.append("Z-tests")
        out.append(ztable_text([ZRow(**r) for r in rep.ztest_section]).rstrip("\n"))
    if rep.discrepancy_section:
        out.append("")
        out.append("Printed search spaces")
        for d in rep.discrepancy_section:
            flag = "ok" if d["consistent"] else "MISMATCH"
            out.append(f"  {d['id']:<14}{d['source']:<10}{d['reported']:>14}{d['recomputed']:>14}  {flag}")
    if rep.order_stat_section:
        out.append("")
        out.append("Expected maxima")
        for r in rep.order_stat_section:
            out.append(f"  {r['n']:>6}{r['expected_max']:>12.6f}{r['p_two_sided']:>12.5g}")
    if rep.notes:
        out.append("")
        out.append("Notes")
        out += [f"  - {n}" for n in rep.notes]
    return "\n".join(out) + "\n"


def load_schema() -> dict:
    return json.loads(resources.files("mtmm_audit").joinpath("data/audit_report.schema.json").read_text())

"""Shared adapter plumbing: result containers, mapping tables, fragment merge.

Imports return a model *fragment* plus trace links and findings; merging
the fragment into a target model is a separate step so callers can
inspect what an import would do. Merging creates placeholder elements
for references the external tool could not express, keeping the merged
model serializable (the canonical format refuses dangling references).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import KindConflictError
from ..model import (
    AssetKind,
    AttackScenario,
    Attacker,
    BusinessAsset,
    DreadedEvent,
    Goal,
    Risk,
    RiskModel,
    SecurityProperty,
    SupportAsset,
    SupportCategory,
    TraceLink,
    Vulnerability,
    Zone,
    is_valid_id,
    is_valid_level,
    referenced_ids,
    slugify,
    upsert_element,
)
from ..validation import Finding, make_finding


@dataclass
class ImportResult:
    """Outcome of reading an external document into canonical form."""

    fragment: RiskModel
    trace_links: list[TraceLink] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)

    def mapped_element_ids(self) -> set[str]:
        return {link.element for link in self.trace_links}


@dataclass
class ExportResult:
    """Outcome of projecting a model onto an external document."""

    document: dict
    trace_links: list[TraceLink] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)
    # (kind, element id, reason) for model content the tool cannot represent.
    skipped: list[tuple[str, str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class MappingEntry:
    external: str
    canonical: str  # element kind name, or "-" when deliberately unmapped
    notes: str = ""


@dataclass(frozen=True)
class MappingTable:
    tool: str
    entries: tuple[MappingEntry, ...]

    def canonical_kinds(self) -> set[str]:
        return {e.canonical for e in self.entries if e.canonical != "-"}


PISTAR_TABLE = MappingTable(
    tool="pistar",
    entries=(
        MappingEntry("actor (organisation)", "-", "kept as owner annotation on goal trace links"),
        MappingEntry("actor with security=attacker", "attacker", "capability/motive in custom properties"),
        MappingEntry("goal node", "goal", "parent/refinement/secures in custom properties"),
        MappingEntry("resource node", "support_asset", "category defaults to software"),
        MappingEntry("node with security=antigoal", "dreaded_event", "target/violates/severity in custom properties"),
        MappingEntry("task with security=malicious", "attack_scenario", "imported as skeleton, steps added later"),
        MappingEntry("quality node", "-", "no canonical counterpart; warning on import"),
        MappingEntry("plain task node", "-", "no canonical counterpart; warning on import"),
    ),
)

MONARC_TABLE = MappingTable(
    tool="monarc",
    entries=(
        MappingEntry("top-level asset", "business_asset", "kind defaults to service"),
        MappingEntry("nested asset (any depth)", "support_asset", "depth kept as name prefix"),
        MappingEntry("risk row threat", "attacker", "one synthesized attacker per threat name"),
        MappingEntry("risk row threat", "dreaded_event", "violated property parsed from threat name"),
        MappingEntry("risk row vulnerability", "vulnerability", "qualification from likelihood"),
        MappingEntry("risk row", "attack_scenario", "single step; extra steps ride in the remark"),
        MappingEntry("risk row", "risk", "strategy parsed case-insensitively"),
        MappingEntry("risk row measures", "control", "line of defence defaults to protect"),
    ),
)

CYRUS_TABLE = MappingTable(
    tool="cyrus",
    entries=(
        MappingEntry("component row", "support_asset", ""),
        MappingEntry("component.zone / interface endpoints", "zone", "carried as column values"),
        MappingEntry("interface row", "conduit", ""),
        MappingEntry("vulnerability row", "vulnerability", "CVE ids joined into one column"),
        MappingEntry("attack_path row", "attack_scenario", "ordered steps serialized"),
        MappingEntry("test_suite row", "risk", "one suite per mitigate-strategy risk"),
    ),
)

MAPPING_TABLES = (PISTAR_TABLE, MONARC_TABLE, CYRUS_TABLE)


def uncovered_kinds() -> set[str]:
    """Element kinds reachable from no tool mapping (should be empty)."""
    from ..model import KINDS

    covered = set()
    for table in MAPPING_TABLES:
        covered |= table.canonical_kinds()
    return set(KINDS) - covered


def canon_id(external_id: str) -> str:
    """External identifier -> valid element id, reusing it when already valid."""
    return external_id if is_valid_id(external_id) else slugify(external_id)


def parse_int(raw, default: int) -> tuple[int, bool]:
    """Best-effort integer parse; returns (value, parsed ok)."""
    if isinstance(raw, bool):
        return default, False
    try:
        return int(raw), True
    except (TypeError, ValueError):
        return default, False


def child_id(base: str, suffix: str) -> str:
    return base[: 64 - len(suffix) - 1].rstrip("-") + "-" + suffix


def _stub_for(kind: str, ref: str, model: RiskModel):
    if kind == "zone":
        return [Zone(id=ref, name=ref)]
    if kind == "business_asset":
        needs: dict[SecurityProperty, int] = {}
        for event in model.dreaded_events.values():
            if event.target == ref:
                level = event.severity if is_valid_level(event.severity) else 1
                needs[event.violates] = max(needs.get(event.violates, 1), max(1, level))
        for goal in model.goals.values():
            for asset_id, prop in goal.secures:
                if asset_id == ref:
                    needs.setdefault(prop, 1)
        if not needs:
            needs = {SecurityProperty.AVAILABILITY: 1}
        return [BusinessAsset(id=ref, name=ref, kind=AssetKind.SERVICE, security_needs=needs)]
    if kind == "support_asset":
        return [SupportAsset(id=ref, name=ref, category=SupportCategory.SOFTWARE)]
    if kind == "vulnerability":
        affects = {a.id for a in model.support_assets.values() if ref in a.vulnerabilities}
        for scenario in model.attack_scenarios.values():
            for step in scenario.steps:
                if step.vulnerability == ref and step.asset in model.support_assets:
                    affects.add(step.asset)
        return [Vulnerability(id=ref, name=ref, affects=affects)]
    if kind == "attacker":
        return [Attacker(id=ref, name=ref)]
    if kind == "goal":
        return [Goal(id=ref, statement=ref)]
    if kind == "dreaded_event":
        attacker_id, target_id = child_id(ref, "att"), child_id(ref, "tgt")
        return [
            DreadedEvent(
                id=ref,
                attacker=attacker_id,
                target=target_id,
                violates=SecurityProperty.AVAILABILITY,
                severity=0,
            )
        ]
    if kind == "attack_scenario":
        return [AttackScenario(id=ref, realizes=child_id(ref, "event"))]
    if kind == "risk":
        # Keep the stub aligned: its scenario realizes its dreaded event.
        event_id, scenario_id = child_id(ref, "event"), child_id(ref, "scen")
        stubs = [Risk(id=ref, dreaded_event=event_id, scenario=scenario_id)]
        if scenario_id not in model.attack_scenarios:
            stubs.append(AttackScenario(id=scenario_id, realizes=event_id))
        return stubs
    raise ValueError(f"cannot stub a {kind}")


def stub_missing_references(model: RiskModel) -> list[Finding]:
    """Create minimal placeholders so every reference resolves.

    Dangling trace links are dropped instead (there is nothing sensible to
    invent for them). References resolving to an element of the wrong kind
    are left alone; the validator reports those.
    """
    findings: list[Finding] = []
    for _ in range(10):
        created = False
        for ref, kind, context in sorted(set(referenced_ids(model)), key=lambda t: (t[2], t[0])):
            if model.find(ref) is not None:
                continue
            if kind is None:
                if context.startswith("attacker "):
                    kind = "goal"  # cooperative facet defaults to a goal placeholder
                else:
                    continue  # trace links handled below
            try:
                for stub in _stub_for(kind, ref, model):
                    if model.find(stub.id) is None:
                        upsert_element(model, stub)
                        created = True
                        findings.append(
                            make_finding(
                                "W-STUB-CREATED",
                                stub.id,
                                f"created placeholder for {context} -> {ref!r}",
                            )
                        )
            except KindConflictError:
                continue
        if not created:
            break

    kept = []
    for link in model.trace_links:
        if model.find(link.element) is None:
            findings.append(
                make_finding(
                    "W-INCOMPLETE-ELEMENT",
                    link.element,
                    f"dropped trace link {link.source_tool.value}:{link.external_id}: "
                    f"element {link.element!r} does not exist",
                )
            )
        else:
            kept.append(link)
    model.trace_links[:] = kept
    return findings


def merge_fragment(model: RiskModel, result: ImportResult) -> list[Finding]:
    """Upsert an imported fragment into a model and record its trace links.

    Conflicting ids (same id, different kind) are skipped with a finding.
    Trace links are stamped with the post-merge revision; exact duplicates
    of existing links are not added twice.
    """
    findings = list(result.findings)
    skipped: set[str] = set()
    for kind, element in result.fragment.elements():
        try:
            upsert_element(model, element)
        except KindConflictError as exc:
            skipped.add(element.id)
            findings.append(
                make_finding(
                    "E-KIND-CONFLICT",
                    element.id,
                    f"cannot import {kind} {element.id!r}: {exc.existing_kind} has this id",
                )
            )
    findings.extend(stub_missing_references(model))

    existing = {
        (l.source_tool, l.external_id, l.element, l.revision) for l in model.trace_links
    }
    for link in result.trace_links:
        if link.element in skipped:
            continue
        stamped = TraceLink(
            source_tool=link.source_tool,
            external_id=link.external_id,
            element=link.element,
            direction=link.direction,
            revision=model.revision,
            note=link.note,
        )
        key = (stamped.source_tool, stamped.external_id, stamped.element, stamped.revision)
        if key not in existing:
            existing.add(key)
            model.trace_links.append(stamped)
    return sorted(findings, key=Finding.sort_key)


def record_export_links(model: RiskModel, links: list[TraceLink]) -> None:
    """Stamp and append trace links produced by an export."""
    model.revision += 1
    existing = {
        (l.source_tool, l.external_id, l.element, l.revision) for l in model.trace_links
    }
    for link in links:
        stamped = TraceLink(
            source_tool=link.source_tool,
            external_id=link.external_id,
            element=link.element,
            direction=link.direction,
            revision=model.revision,
            note=link.note,
        )
        key = (stamped.source_tool, stamped.external_id, stamped.element, stamped.revision)
        if key not in existing:
            existing.add(key)
            model.trace_links.append(stamped)

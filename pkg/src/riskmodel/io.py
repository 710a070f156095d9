"""Canonical model document: a versioned, diff-friendly JSON format.

Saving is deterministic: keys sorted, element arrays sorted by id, trace
links sorted by (tool, external id, revision). Two structurally equal
models always serialize to byte-identical documents.

Loading is strict about shape (schema version, required fields, enum
values, reference resolution) but deliberately not about consistency
rules such as level ranges or conduit endpoints; those are reported by
the validation module so imperfect models can be inspected and repaired.
"""

from __future__ import annotations

import json
from enum import Enum

from .errors import DanglingRefError, ParseError, SchemaError
from .model import (
    KINDS,
    SCHEMA_VERSION,
    AssetKind,
    AttackScenario,
    Attacker,
    BusinessAsset,
    Conduit,
    Control,
    Direction,
    DreadedEvent,
    Goal,
    LineOfDefence,
    Refinement,
    Risk,
    RiskModel,
    ScenarioStep,
    SecurityProperty,
    SupportAsset,
    SupportCategory,
    Tool,
    TraceLink,
    TreatmentStrategy,
    Vulnerability,
    Zone,
    dangling_refs,
)

FILE_EXTENSION = ".riskmodel.json"

_COLLECTION_KEYS = tuple(attr for _, (_, attr) in KINDS.items())
_TOP_LEVEL_KEYS = ("schema_version", "revision", *_COLLECTION_KEYS, "trace_links")


def _enum_value(value):
    return value.value if isinstance(value, Enum) else value


def _element_to_dict(kind: str, element) -> dict:
    if kind == "business_asset":
        return {
            "id": element.id,
            "name": element.name,
            "kind": element.kind.value,
            "security_needs": {p.value: lvl for p, lvl in element.security_needs.items()},
            "supported_by": sorted(element.supported_by),
        }
    if kind == "support_asset":
        return {
            "id": element.id,
            "name": element.name,
            "category": element.category.value,
            "zone": element.zone,
            "vulnerabilities": sorted(element.vulnerabilities),
        }
    if kind == "zone":
        return {
            "id": element.id,
            "name": element.name,
            "target_security_level": element.target_security_level,
        }
    if kind == "conduit":
        return {
            "id": element.id,
            "name": element.name,
            "endpoints": list(element.endpoints),
            "channel": element.channel,
        }
    if kind == "goal":
        return {
            "id": element.id,
            "statement": element.statement,
            "parent": element.parent,
            "refinement": element.refinement.value,
            "secures": [
                {"asset": a, "property": p.value}
                for a, p in sorted(element.secures, key=lambda t: (t[0], t[1].value))
            ],
        }
    if kind == "attacker":
        return {
            "id": element.id,
            "name": element.name,
            "capability": element.capability,
            "motive": element.motive,
            "cooperative_facet": element.cooperative_facet,
        }
    if kind == "dreaded_event":
        return {
            "id": element.id,
            "attacker": element.attacker,
            "target": element.target,
            "violates": element.violates.value,
            "severity": element.severity,
        }
    if kind == "vulnerability":
        return {
            "id": element.id,
            "name": element.name,
            "cve_ids": list(element.cve_ids),
            "qualification": element.qualification,
            "affects": sorted(element.affects),
        }
    if kind == "attack_scenario":
        return {
            "id": element.id,
            "realizes": element.realizes,
            "entry_zone": element.entry_zone,
            "steps": [{"asset": s.asset, "vulnerability": s.vulnerability} for s in element.steps],
        }
    if kind == "risk":
        return {
            "id": element.id,
            "dreaded_event": element.dreaded_event,
            "scenario": element.scenario,
            "impact": element.impact,
            "feasibility": element.feasibility,
            "strategy": element.strategy.value,
        }
    if kind == "control":
        return {
            "id": element.id,
            "name": element.name,
            "line_of_defence": element.line_of_defence.value,
            "mitigates": sorted(element.mitigates),
            "feasibility_reduction": element.feasibility_reduction,
            "impact_reduction": element.impact_reduction,
        }
    raise ValueError(f"unknown kind {kind!r}")


def model_to_dict(model: RiskModel) -> dict:
    doc = {
        "schema_version": model.schema_version,
        "revision": model.revision,
        "trace_links": [
            {
                "source_tool": l.source_tool.value,
                "external_id": l.external_id,
                "element": l.element,
                "direction": l.direction.value,
                "revision": l.revision,
                "note": l.note,
            }
            for l in sorted(model.trace_links, key=TraceLink.sort_key)
        ],
    }
    for kind, collection in model.collections():
        attr = KINDS[kind][1]
        doc[attr] = [_element_to_dict(kind, collection[i]) for i in sorted(collection)]
    return doc


def save_model(model: RiskModel) -> bytes:
    """Serialize to the canonical document. Requires all references to resolve."""
    text = json.dumps(model_to_dict(model), sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def save_model_file(model: RiskModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


class _Reader:
    """Field-by-field extraction with SchemaError diagnostics."""

    def __init__(self, obj: dict, where: str, allowed: set[str]):
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
        unknown = set(obj) - allowed
        if unknown:
            raise SchemaError(f"{where}: unexpected field(s) {sorted(unknown)}")
        self.obj = obj
        self.where = where

    def req(self, key: str):
        if key not in self.obj:
            raise SchemaError(f"{self.where}: missing required field {key!r}")
        return self.obj[key]

    def string(self, key: str) -> str:
        value = self.req(key)
        if not isinstance(value, str):
            raise SchemaError(f"{self.where}: field {key!r} must be a string")
        return value

    def integer(self, key: str) -> int:
        value = self.req(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"{self.where}: field {key!r} must be an integer")
        return value

    def opt_string(self, key: str) -> str | None:
        value = self.obj.get(key)
        if value is not None and not isinstance(value, str):
            raise SchemaError(f"{self.where}: field {key!r} must be a string or null")
        return value

    def string_list(self, key: str) -> list[str]:
        value = self.req(key)
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise SchemaError(f"{self.where}: field {key!r} must be an array of strings")
        return value

    def enum(self, key: str, enum_cls):
        value = self.string(key)
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise SchemaError(
                f"{self.where}: field {key!r} has unknown value {value!r} (expected one of {allowed})"
            )


def _parse_security_property(raw: str, where: str) -> SecurityProperty:
    try:
        return SecurityProperty(raw)
    except ValueError:
        raise SchemaError(f"{where}: unknown security property {raw!r}")


_FIELD_SETS = {
    "business_asset": {"id", "name", "kind", "security_needs", "supported_by"},
    "support_asset": {"id", "name", "category", "zone", "vulnerabilities"},
    "zone": {"id", "name", "target_security_level"},
    "conduit": {"id", "name", "endpoints", "channel"},
    "goal": {"id", "statement", "parent", "refinement", "secures"},
    "attacker": {"id", "name", "capability", "motive", "cooperative_facet"},
    "dreaded_event": {"id", "attacker", "target", "violates", "severity"},
    "vulnerability": {"id", "name", "cve_ids", "qualification", "affects"},
    "attack_scenario": {"id", "realizes", "entry_zone", "steps"},
    "risk": {"id", "dreaded_event", "scenario", "impact", "feasibility", "strategy"},
    "control": {
        "id",
        "name",
        "line_of_defence",
        "mitigates",
        "feasibility_reduction",
        "impact_reduction",
    },
}


def _element_from_dict(kind: str, obj: dict, where: str):
    r = _Reader(obj, where, _FIELD_SETS[kind])
    if kind == "business_asset":
        raw_needs = r.req("security_needs")
        if not isinstance(raw_needs, dict):
            raise SchemaError(f"{where}: security_needs must be an object")
        needs = {}
        for prop, lvl in raw_needs.items():
            if not isinstance(lvl, int) or isinstance(lvl, bool):
                raise SchemaError(f"{where}: security need {prop!r} must be an integer level")
            needs[_parse_security_property(prop, where)] = lvl
        return BusinessAsset(
            id=r.string("id"),
            name=r.string("name"),
            kind=r.enum("kind", AssetKind),
            security_needs=needs,
            supported_by=set(r.string_list("supported_by")),
        )
    if kind == "support_asset":
        return SupportAsset(
            id=r.string("id"),
            name=r.string("name"),
            category=r.enum("category", SupportCategory),
            zone=r.opt_string("zone"),
            vulnerabilities=set(r.string_list("vulnerabilities")),
        )
    if kind == "zone":
        return Zone(
            id=r.string("id"),
            name=r.string("name"),
            target_security_level=r.integer("target_security_level"),
        )
    if kind == "conduit":
        endpoints = r.req("endpoints")
        if (
            not isinstance(endpoints, list)
            or len(endpoints) != 2
            or not all(isinstance(e, str) for e in endpoints)
        ):
            raise SchemaError(f"{where}: endpoints must be an array of two zone ids")
        return Conduit(
            id=r.string("id"),
            name=r.string("name"),
            endpoints=(endpoints[0], endpoints[1]),
            channel=r.string("channel"),
        )
    if kind == "goal":
        raw_secures = r.req("secures")
        if not isinstance(raw_secures, list):
            raise SchemaError(f"{where}: secures must be an array")
        secures = set()
        for entry in raw_secures:
            er = _Reader(entry, f"{where} secures entry", {"asset", "property"})
            secures.add((er.string("asset"), _parse_security_property(er.string("property"), where)))
        return Goal(
            id=r.string("id"),
            statement=r.string("statement"),
            parent=r.opt_string("parent"),
            refinement=r.enum("refinement", Refinement),
            secures=secures,
        )
    if kind == "attacker":
        return Attacker(
            id=r.string("id"),
            name=r.string("name"),
            capability=r.integer("capability"),
            motive=r.string("motive"),
            cooperative_facet=r.opt_string("cooperative_facet"),
        )
    if kind == "dreaded_event":
        return DreadedEvent(
            id=r.string("id"),
            attacker=r.string("attacker"),
            target=r.string("target"),
            violates=r.enum("violates", SecurityProperty),
            severity=r.integer("severity"),
        )
    if kind == "vulnerability":
        return Vulnerability(
            id=r.string("id"),
            name=r.string("name"),
            cve_ids=r.string_list("cve_ids"),
            qualification=r.integer("qualification"),
            affects=set(r.string_list("affects")),
        )
    if kind == "attack_scenario":
        raw_steps = r.req("steps")
        if not isinstance(raw_steps, list):
            raise SchemaError(f"{where}: steps must be an array")
        steps = []
        for entry in raw_steps:
            sr = _Reader(entry, f"{where} step", {"asset", "vulnerability"})
            steps.append(ScenarioStep(asset=sr.string("asset"), vulnerability=sr.string("vulnerability")))
        return AttackScenario(
            id=r.string("id"),
            realizes=r.string("realizes"),
            entry_zone=r.opt_string("entry_zone"),
            steps=steps,
        )
    if kind == "risk":
        return Risk(
            id=r.string("id"),
            dreaded_event=r.string("dreaded_event"),
            scenario=r.string("scenario"),
            impact=r.integer("impact"),
            feasibility=r.integer("feasibility"),
            strategy=r.enum("strategy", TreatmentStrategy),
        )
    if kind == "control":
        return Control(
            id=r.string("id"),
            name=r.string("name"),
            line_of_defence=r.enum("line_of_defence", LineOfDefence),
            mitigates=set(r.string_list("mitigates")),
            feasibility_reduction=r.integer("feasibility_reduction"),
            impact_reduction=r.integer("impact_reduction"),
        )
    raise ValueError(f"unknown kind {kind!r}")


def load_model(data: bytes | str) -> RiskModel:
    """Parse a canonical document into a RiskModel.

    Raises ParseError for malformed text, SchemaError for unknown versions
    or shape problems, DanglingRefError when a reference does not resolve.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not valid UTF-8: {exc}")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno)
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")

    unknown = set(doc) - set(_TOP_LEVEL_KEYS)
    if unknown:
        raise SchemaError(f"unexpected top-level field(s) {sorted(unknown)}")
    for key in _TOP_LEVEL_KEYS:
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}")

    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unknown schema_version {version!r} (supported: {SCHEMA_VERSION!r})")
    revision = doc["revision"]
    if not isinstance(revision, int) or isinstance(revision, bool) or revision < 0:
        raise SchemaError("revision must be a non-negative integer")

    model = RiskModel(schema_version=version, revision=revision)
    for kind, (_, attr) in KINDS.items():
        raw = doc[attr]
        if not isinstance(raw, list):
            raise SchemaError(f"field {attr!r} must be an array")
        collection = getattr(model, attr)
        for i, entry in enumerate(raw):
            element = _element_from_dict(kind, entry, f"{attr}[{i}]")
            if element.id in collection:
                raise SchemaError(f"duplicate id {element.id!r} in {attr}")
            collection[element.id] = element

    raw_links = doc["trace_links"]
    if not isinstance(raw_links, list):
        raise SchemaError("field 'trace_links' must be an array")
    for i, entry in enumerate(raw_links):
        r = _Reader(
            entry,
            f"trace_links[{i}]",
            {"source_tool", "external_id", "element", "direction", "revision", "note"},
        )
        model.trace_links.append(
            TraceLink(
                source_tool=r.enum("source_tool", Tool),
                external_id=r.string("external_id"),
                element=r.string("element"),
                direction=r.enum("direction", Direction),
                revision=r.integer("revision"),
                note=entry.get("note", ""),
            )
        )

    dangling = dangling_refs(model)
    if dangling:
        ref, context = dangling[0]
        raise DanglingRefError(ref, context)
    return model


def load_model_file(path) -> RiskModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())

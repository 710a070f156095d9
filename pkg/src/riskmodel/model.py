"""Core metamodel types and the canonical in-memory model container.

The types deliberately accept inconsistent data (wrong ranges, dangling
references, duplicate links): consistency is the validation module's job,
so that imperfect external models can be loaded, reported on and repaired
instead of blowing up at construction time.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field, fields
from enum import Enum

from .errors import KindConflictError

# Stable element identifier, unique across all collections of one model.
ElementId = str

ID_PATTERN = re.compile(r"[a-z0-9-]{1,64}")

# Ordinal scale shared by impact, feasibility, capability, exploitability
# and zone security levels.
Level = int

LEVEL_MIN = 0
LEVEL_MAX = 4
LEVEL_LABELS = ("negligible", "low", "medium", "high", "critical")

CVE_PATTERN = re.compile(r"CVE-\d{4}-\d{4,}")


def is_valid_id(value: str) -> bool:
    return bool(ID_PATTERN.fullmatch(value))


def is_valid_level(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and LEVEL_MIN <= value <= LEVEL_MAX


def slugify(text: str, max_length: int = 64) -> str:
    """Derive a valid element id from arbitrary external text."""
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    slug = slug[:max_length].strip("-")
    return slug or "x"


class SecurityProperty(str, Enum):
    CONFIDENTIALITY = "confidentiality"
    INTEGRITY = "integrity"
    AVAILABILITY = "availability"


class AssetKind(str, Enum):
    INFORMATION = "information"
    SERVICE = "service"
    PROCESS = "process"


class SupportCategory(str, Enum):
    HARDWARE = "hardware"
    SOFTWARE = "software"
    NETWORK = "network"
    PERSONNEL = "personnel"
    SITE = "site"
    ORGANISATION = "organisation"


class Refinement(str, Enum):
    AND = "and"
    OR = "or"


class TreatmentStrategy(str, Enum):
    ACCEPT = "accept"
    TRANSFER = "transfer"
    MITIGATE = "mitigate"
    AVOID = "avoid"


class LineOfDefence(str, Enum):
    """NIST CSF function locating a control."""

    IDENTIFY = "identify"
    PROTECT = "protect"
    DETECT = "detect"
    RESPOND = "respond"
    RECOVER = "recover"


class Tool(str, Enum):
    PISTAR = "pistar"
    MONARC = "monarc"
    CYRUS = "cyrus"


class Direction(str, Enum):
    IMPORTED = "imported"
    EXPORTED = "exported"


@dataclass
class BusinessAsset:
    """Information, service or process whose security needs drive the analysis."""

    id: ElementId
    name: str
    kind: AssetKind
    security_needs: dict[SecurityProperty, Level] = field(default_factory=dict)
    supported_by: set[ElementId] = field(default_factory=set)


@dataclass
class SupportAsset:
    """Concrete element (hardware, software, people, ...) that carries vulnerabilities."""

    id: ElementId
    name: str
    category: SupportCategory
    zone: ElementId | None = None
    vulnerabilities: set[ElementId] = field(default_factory=set)


@dataclass
class Zone:
    id: ElementId
    name: str
    target_security_level: Level = 0


@dataclass
class Conduit:
    """Controlled channel between two distinct zones."""

    id: ElementId
    name: str
    endpoints: tuple[ElementId, ElementId] = ("", "")
    channel: str = ""

    def __post_init__(self):
        self.endpoints = tuple(self.endpoints)  # type: ignore[assignment]


@dataclass
class Goal:
    id: ElementId
    statement: str
    parent: ElementId | None = None
    # Meaning of this goal's children set when it is refined.
    refinement: Refinement = Refinement.AND
    secures: set[tuple[ElementId, SecurityProperty]] = field(default_factory=set)


@dataclass
class Attacker:
    id: ElementId
    name: str
    capability: Level = 0
    motive: str = ""
    cooperative_facet: ElementId | None = None


@dataclass
class DreadedEvent:
    """Attacker anti-goal: violation of a security property of a business asset."""

    id: ElementId
    attacker: ElementId
    target: ElementId
    violates: SecurityProperty
    severity: Level = 0


@dataclass
class Vulnerability:
    id: ElementId
    name: str
    cve_ids: list[str] = field(default_factory=list)
    qualification: Level = 0
    affects: set[ElementId] = field(default_factory=set)


@dataclass
class ScenarioStep:
    """One exploitation step: a vulnerability exercised on a support asset."""

    asset: ElementId
    vulnerability: ElementId


@dataclass
class AttackScenario:
    id: ElementId
    realizes: ElementId
    entry_zone: ElementId | None = None
    steps: list[ScenarioStep] = field(default_factory=list)


@dataclass
class Risk:
    """Couples a dreaded event (impact side) with a scenario (feasibility side)."""

    id: ElementId
    dreaded_event: ElementId
    scenario: ElementId
    impact: Level = 0
    feasibility: Level = 0
    strategy: TreatmentStrategy = TreatmentStrategy.ACCEPT


@dataclass
class Control:
    id: ElementId
    name: str
    line_of_defence: LineOfDefence = LineOfDefence.PROTECT
    mitigates: set[ElementId] = field(default_factory=set)
    feasibility_reduction: int = 0
    impact_reduction: int = 0


@dataclass
class TraceLink:
    """Provenance edge between a canonical element and an external tool element."""

    source_tool: Tool
    external_id: str
    element: ElementId
    direction: Direction
    revision: int = 0
    note: str = ""

    def sort_key(self):
        return (
            self.source_tool.value,
            self.external_id,
            self.revision,
            self.element,
            self.direction.value,
            self.note,
        )


Element = (
    BusinessAsset
    | SupportAsset
    | Zone
    | Conduit
    | Goal
    | Attacker
    | DreadedEvent
    | Vulnerability
    | AttackScenario
    | Risk
    | Control
)

# kind name -> (element class, RiskModel attribute holding the collection)
KINDS: dict[str, tuple[type, str]] = {
    "business_asset": (BusinessAsset, "business_assets"),
    "support_asset": (SupportAsset, "support_assets"),
    "zone": (Zone, "zones"),
    "conduit": (Conduit, "conduits"),
    "goal": (Goal, "goals"),
    "attacker": (Attacker, "attackers"),
    "dreaded_event": (DreadedEvent, "dreaded_events"),
    "vulnerability": (Vulnerability, "vulnerabilities"),
    "attack_scenario": (AttackScenario, "attack_scenarios"),
    "risk": (Risk, "risks"),
    "control": (Control, "controls"),
}

_CLASS_TO_KIND = {cls: kind for kind, (cls, _) in KINDS.items()}

SCHEMA_VERSION = "1.0"


def kind_of(element: Element) -> str:
    """Return the kind name for a domain element instance."""
    try:
        return _CLASS_TO_KIND[type(element)]
    except KeyError:
        raise TypeError(f"not a model element: {type(element).__name__}")


@dataclass(eq=False)
class RiskModel:
    """Canonical container of all elements plus trace links.

    A model is a plain value: one writer mutates it at a time, read-only
    operations never change it and may run concurrently on a shared copy.
    """

    schema_version: str = SCHEMA_VERSION
    revision: int = 0
    business_assets: dict[ElementId, BusinessAsset] = field(default_factory=dict)
    support_assets: dict[ElementId, SupportAsset] = field(default_factory=dict)
    zones: dict[ElementId, Zone] = field(default_factory=dict)
    conduits: dict[ElementId, Conduit] = field(default_factory=dict)
    goals: dict[ElementId, Goal] = field(default_factory=dict)
    attackers: dict[ElementId, Attacker] = field(default_factory=dict)
    dreaded_events: dict[ElementId, DreadedEvent] = field(default_factory=dict)
    vulnerabilities: dict[ElementId, Vulnerability] = field(default_factory=dict)
    attack_scenarios: dict[ElementId, AttackScenario] = field(default_factory=dict)
    risks: dict[ElementId, Risk] = field(default_factory=dict)
    controls: dict[ElementId, Control] = field(default_factory=dict)
    trace_links: list[TraceLink] = field(default_factory=list)

    def collections(self):
        """Yield (kind, collection dict) pairs in declaration order."""
        for kind, (_, attr) in KINDS.items():
            yield kind, getattr(self, attr)

    def elements(self):
        """Yield (kind, element) pairs over all collections."""
        for kind, collection in self.collections():
            for element in collection.values():
                yield kind, element

    def find(self, element_id: ElementId):
        """Return (kind, element) for an id, or None if absent everywhere."""
        for kind, collection in self.collections():
            if element_id in collection:
                return kind, collection[element_id]
        return None

    def element_count(self) -> int:
        return sum(len(c) for _, c in self.collections())

    def copy(self) -> "RiskModel":
        return copy.deepcopy(self)

    def __eq__(self, other):
        if not isinstance(other, RiskModel):
            return NotImplemented
        if self.schema_version != other.schema_version or self.revision != other.revision:
            return False
        for kind, (_, attr) in KINDS.items():
            if getattr(self, attr) != getattr(other, attr):
                return False
        # Trace links compare as an unordered collection.
        return sorted(self.trace_links, key=TraceLink.sort_key) == sorted(
            other.trace_links, key=TraceLink.sort_key
        )


def upsert_element(model: RiskModel, element: Element) -> RiskModel:
    """Insert or replace one element under its id, bumping the revision.

    Raises KindConflictError when the id is already taken by an element of
    a different kind; ids are never reused across kinds within one model.
    """
    kind = kind_of(element)
    existing = model.find(element.id)
    if existing is not None and existing[0] != kind:
        raise KindConflictError(element.id, existing[0], kind)
    getattr(model, KINDS[kind][1])[element.id] = element
    model.revision += 1
    return model


def referenced_ids(model: RiskModel):
    """Yield (referenced id, expected kind or None, context) for every reference.

    Expected kind None means the reference may point at an element of any kind
    (trace links, cooperative facets).
    """
    for asset in model.business_assets.values():
        for ref in asset.supported_by:
            yield ref, "support_asset", f"business_asset {asset.id} supported_by"
    for asset in model.support_assets.values():
        if asset.zone is not None:
            yield asset.zone, "zone", f"support_asset {asset.id} zone"
        for ref in asset.vulnerabilities:
            yield ref, "vulnerability", f"support_asset {asset.id} vulnerabilities"
    for conduit in model.conduits.values():
        for ref in conduit.endpoints:
            yield ref, "zone", f"conduit {conduit.id} endpoints"
    for goal in model.goals.values():
        if goal.parent is not None:
            yield goal.parent, "goal", f"goal {goal.id} parent"
        for ref, _prop in goal.secures:
            yield ref, "business_asset", f"goal {goal.id} secures"
    for attacker in model.attackers.values():
        if attacker.cooperative_facet is not None:
            yield attacker.cooperative_facet, None, f"attacker {attacker.id} cooperative_facet"
    for event in model.dreaded_events.values():
        yield event.attacker, "attacker", f"dreaded_event {event.id} attacker"
        yield event.target, "business_asset", f"dreaded_event {event.id} target"
    for vuln in model.vulnerabilities.values():
        for ref in vuln.affects:
            yield ref, "support_asset", f"vulnerability {vuln.id} affects"
    for scenario in model.attack_scenarios.values():
        yield scenario.realizes, "dreaded_event", f"attack_scenario {scenario.id} realizes"
        if scenario.entry_zone is not None:
            yield scenario.entry_zone, "zone", f"attack_scenario {scenario.id} entry_zone"
        for step in scenario.steps:
            yield step.asset, "support_asset", f"attack_scenario {scenario.id} step asset"
            yield step.vulnerability, "vulnerability", f"attack_scenario {scenario.id} step vulnerability"
    for risk in model.risks.values():
        yield risk.dreaded_event, "dreaded_event", f"risk {risk.id} dreaded_event"
        yield risk.scenario, "attack_scenario", f"risk {risk.id} scenario"
    for control in model.controls.values():
        for ref in control.mitigates:
            yield ref, "risk", f"control {control.id} mitigates"
    for link in model.trace_links:
        yield link.element, None, f"trace_link {link.external_id} element"


def dangling_refs(model: RiskModel) -> list[tuple[str, str]]:
    """Return (ref, context) pairs for references that do not resolve.

    A reference resolving to an element of the wrong kind counts as dangling:
    the association it encodes is meaningless.
    """
    out = []
    for ref, expected_kind, context in referenced_ids(model):
        found = model.find(ref)
        if found is None or (expected_kind is not None and found[0] != expected_kind):
            out.append((ref, context))
    return out


def element_fields(element: Element) -> dict:
    """Field name -> value mapping, used by diff and serialization."""
    return {f.name: getattr(element, f.name) for f in fields(element)}

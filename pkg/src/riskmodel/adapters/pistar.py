"""Strategic-model (actor/node/link JSON) adapter.

The stock notation has no anti-goal or malicious-task node kinds, so the
mapping rides on node custom properties under the ``security`` key
(``attacker`` on actors, ``antigoal`` and ``malicious`` on nodes), plus
further custom properties for data the notation cannot express at all
(capability, violated property, severity, goal refinement, ...). Exports
always write those properties, which is what makes re-import lossless on
the mapped subset.

Node kinds without a canonical counterpart (quality, plain tasks, role
actors) are never dropped silently: each produces a warning finding.
"""

from __future__ import annotations

import json

from ..errors import ParseError
from ..model import (
    AttackScenario,
    Attacker,
    Direction,
    DreadedEvent,
    Goal,
    Refinement,
    RiskModel,
    SecurityProperty,
    SupportAsset,
    SupportCategory,
    Tool,
    TraceLink,
)
from ..validation import Finding, make_finding, require_no_errors
from .common import ExportResult, ImportResult, canon_id, child_id

_NODE_TYPES = {"goal", "task", "resource", "quality"}


def _norm_type(raw: str) -> str:
    return raw.lower().removeprefix("istar.").strip()


def _parse_doc(doc) -> dict:
    if isinstance(doc, (bytes, str)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, column=exc.colno)
    if not isinstance(doc, dict):
        raise ParseError("strategic-model document must be a JSON object")
    return doc


def _props(obj: dict) -> dict:
    props = obj.get("customProperties") or {}
    return props if isinstance(props, dict) else {}


def _parse_level(raw, default: int) -> tuple[int, bool]:
    try:
        return int(raw), True
    except (TypeError, ValueError):
        return default, False


class _Importer:
    def __init__(self):
        self.fragment = RiskModel()
        self.links: list[TraceLink] = []
        self.findings: list[Finding] = []
        self.ext_to_canon: dict[str, str] = {}
        self.taken: set[str] = set()
        # scenario id -> external id, for late realizes resolution via links
        self.pending_realizes: dict[str, str] = {}

    def warn(self, rule: str, element: str | None, message: str) -> None:
        self.findings.append(make_finding(rule, element, message))

    def preregister(self, data: dict) -> None:
        """Assign canonical ids to every actor and node up front so that
        forward references (parent, realizes, secures) resolve consistently."""
        for actor in data.get("actors") or []:
            if isinstance(actor, dict) and "id" in actor:
                self.assign_id(str(actor["id"]))
                for node in actor.get("nodes") or []:
                    if isinstance(node, dict) and "id" in node:
                        self.assign_id(str(node["id"]))
        for node in data.get("orphans") or []:
            if isinstance(node, dict) and "id" in node:
                self.assign_id(str(node["id"]))

    def assign_id(self, external_id: str) -> str:
        if external_id in self.ext_to_canon:
            return self.ext_to_canon[external_id]
        base = canon_id(external_id)
        candidate, n = base, 1
        while candidate in self.taken:
            n += 1
            candidate = child_id(base, str(n))
        self.taken.add(candidate)
        self.ext_to_canon[external_id] = candidate
        return candidate

    def resolve_ref(self, raw: str) -> str:
        return self.ext_to_canon.get(raw, canon_id(raw))

    def trace(self, external_id: str, element_id: str, note: str = "") -> None:
        self.links.append(
            TraceLink(
                source_tool=Tool.PISTAR,
                external_id=external_id,
                element=element_id,
                direction=Direction.IMPORTED,
                note=note,
            )
        )

    # -- nodes ----------------------------------------------------------

    def import_goal(self, node: dict, owner_note: str) -> None:
        props = _props(node)
        goal_id = self.assign_id(node["id"])
        refinement = Refinement.AND
        if props.get("refinement") in ("and", "or"):
            refinement = Refinement(props["refinement"])
        secures = set()
        for item in filter(None, (props.get("secures") or "").split(",")):
            asset, _, prop = item.strip().partition(":")
            try:
                secures.add((self.resolve_ref(asset), SecurityProperty(prop)))
            except ValueError:
                self.warn(
                    "W-INCOMPLETE-ELEMENT",
                    goal_id,
                    f"goal {node['id']!r}: unparseable secures entry {item!r}",
                )
        parent = props.get("parent")
        self.fragment.goals[goal_id] = Goal(
            id=goal_id,
            statement=node.get("text", goal_id),
            parent=self.resolve_ref(parent) if parent else None,
            refinement=refinement,
            secures=secures,
        )
        self.trace(node["id"], goal_id, note=owner_note)

    def import_resource(self, node: dict) -> None:
        props = _props(node)
        asset_id = self.assign_id(node["id"])
        category = SupportCategory.SOFTWARE
        if props.get("category"):
            try:
                category = SupportCategory(props["category"])
            except ValueError:
                self.warn(
                    "W-INCOMPLETE-ELEMENT",
                    asset_id,
                    f"resource {node['id']!r}: unknown category {props['category']!r}",
                )
        zone = props.get("zone")
        self.fragment.support_assets[asset_id] = SupportAsset(
            id=asset_id,
            name=node.get("text", asset_id),
            category=category,
            zone=self.resolve_ref(zone) if zone else None,
        )
        self.trace(node["id"], asset_id)

    def import_antigoal(self, node: dict, attacker_id: str | None) -> None:
        props = _props(node)
        event_id = self.assign_id(node["id"])
        missing = [k for k in ("target", "violates", "severity") if not props.get(k)]
        if attacker_id is None:
            attacker_id = child_id(event_id, "att")
            missing.append("attacker (node sits outside an attacker actor)")
        violates = SecurityProperty.AVAILABILITY
        if props.get("violates"):
            try:
                violates = SecurityProperty(props["violates"])
            except ValueError:
                missing.append(f"violates (unknown {props['violates']!r})")
        severity, ok = _parse_level(props.get("severity"), 2)
        if props.get("severity") and not ok:
            missing.append(f"severity (unparseable {props['severity']!r})")
        target = props.get("target")
        target_id = self.resolve_ref(target) if target else child_id(event_id, "tgt")
        self.fragment.dreaded_events[event_id] = DreadedEvent(
            id=event_id,
            attacker=attacker_id,
            target=target_id,
            violates=violates,
            severity=severity,
        )
        if missing:
            self.warn(
                "W-INCOMPLETE-ELEMENT",
                event_id,
                f"anti-goal {node['id']!r} missing {', '.join(missing)}; placeholders used",
            )
        self.trace(node["id"], event_id)

    def import_malicious_task(self, node: dict) -> None:
        props = _props(node)
        scenario_id = self.assign_id(node["id"])
        realizes = props.get("realizes")
        entry_zone = props.get("entry_zone")
        self.fragment.attack_scenarios[scenario_id] = AttackScenario(
            id=scenario_id,
            realizes=self.resolve_ref(realizes) if realizes else "",
            entry_zone=self.resolve_ref(entry_zone) if entry_zone else None,
        )
        if not realizes:
            self.pending_realizes[scenario_id] = node["id"]
        self.trace(node["id"], scenario_id)

    def import_node(self, node: dict, attacker_id: str | None, owner_note: str) -> None:
        if not isinstance(node, dict) or "id" not in node:
            self.warn("W-UNMAPPED-ELEMENT", None, f"skipping malformed node: {node!r}")
            return
        node = {**node, "id": str(node["id"])}
        node_type = _norm_type(str(node.get("type", "")))
        security = _props(node).get("security")
        if security == "antigoal":
            self.import_antigoal(node, attacker_id)
        elif security == "malicious":
            if node_type != "task":
                self.warn(
                    "W-INCOMPLETE-ELEMENT",
                    None,
                    f"node {node['id']!r} flagged malicious but is a {node_type}, importing as scenario",
                )
            self.import_malicious_task(node)
        elif node_type == "goal":
            self.import_goal(node, owner_note)
        elif node_type == "resource":
            self.import_resource(node)
        else:
            label = node_type or "untyped"
            self.warn(
                "W-UNMAPPED-ELEMENT",
                None,
                f"unmapped: {label} node {node['id']!r} has no canonical counterpart",
            )

    # -- actors and links -----------------------------------------------

    def import_actor(self, actor: dict) -> None:
        if not isinstance(actor, dict) or "id" not in actor:
            self.warn("W-UNMAPPED-ELEMENT", None, f"skipping malformed actor: {actor!r}")
            return
        actor = {**actor, "id": str(actor["id"])}
        props = _props(actor)
        nodes = actor.get("nodes") or []
        actor_type = _norm_type(str(actor.get("type", "actor")))

        if props.get("security") == "attacker":
            attacker_id = self.assign_id(actor["id"])
            capability, _ = _parse_level(props.get("capability"), 2)
            facet = props.get("cooperative_facet")
            self.fragment.attackers[attacker_id] = Attacker(
                id=attacker_id,
                name=actor.get("text", attacker_id),
                capability=capability,
                motive=props.get("motive", ""),
                cooperative_facet=self.resolve_ref(facet) if facet else None,
            )
            self.trace(actor["id"], attacker_id)
            for node in nodes:
                self.import_node(node, attacker_id, owner_note="")
            return

        if actor_type == "role":
            self.warn(
                "W-UNMAPPED-ELEMENT",
                None,
                f"unmapped: role/person distinction of actor {actor['id']!r} is not captured",
            )
        mapped_before = len(self.links)
        for node in nodes:
            self.import_node(node, None, owner_note=f"owner={actor['id']}")
        if len(self.links) == mapped_before and actor_type != "role":
            self.warn(
                "W-UNMAPPED-ELEMENT",
                None,
                f"unmapped: actor {actor['id']!r} has no mappable content",
            )

    def import_links(self, links: list) -> None:
        for link in links:
            if not isinstance(link, dict):
                continue
            link_type = _norm_type(str(link.get("type", "")))
            source = self.ext_to_canon.get(str(link.get("source", "")))
            target = self.ext_to_canon.get(str(link.get("target", "")))
            if link_type in ("and-refinement", "or-refinement", "andrefinementlink", "orrefinementlink"):
                child = self.fragment.goals.get(source or "")
                parent = self.fragment.goals.get(target or "")
                if child is not None and parent is not None:
                    if child.parent is None:
                        child.parent = parent.id
                    parent.refinement = (
                        Refinement.AND if link_type.startswith("and") else Refinement.OR
                    )
            elif link_type == "realizes":
                scenario = self.fragment.attack_scenarios.get(source or "")
                if scenario is not None and not scenario.realizes and target:
                    scenario.realizes = target
                    self.pending_realizes.pop(scenario.id, None)
            else:
                self.warn(
                    "W-UNMAPPED-ELEMENT",
                    None,
                    f"unmapped: link type {link.get('type')!r} "
                    f"({link.get('source')!r} -> {link.get('target')!r})",
                )

    def finish(self) -> ImportResult:
        for scenario_id, ext_id in sorted(self.pending_realizes.items()):
            # No realizes property and no realizes link: drop the skeleton.
            del self.fragment.attack_scenarios[scenario_id]
            self.links = [l for l in self.links if l.element != scenario_id]
            self.warn(
                "W-INCOMPLETE-ELEMENT",
                None,
                f"malicious task {ext_id!r} realizes no anti-goal; skipped",
            )
        return ImportResult(
            fragment=self.fragment,
            trace_links=self.links,
            findings=sorted(self.findings, key=Finding.sort_key),
        )


def import_pistar(doc) -> ImportResult:
    """Read a strategic-model document into a canonical fragment.

    Accepts a parsed object, JSON text or bytes. Structural problems raise
    ParseError; every mapping problem becomes a finding instead.
    """
    data = _parse_doc(doc)
    importer = _Importer()
    importer.preregister(data)
    for actor in data.get("actors") or []:
        importer.import_actor(actor)
    for node in data.get("orphans") or []:
        importer.import_node(node, None, owner_note="")
    importer.import_links(data.get("links") or [])
    return importer.finish()


def _secures_prop(goal: Goal) -> str:
    return ",".join(
        f"{asset}:{prop.value}"
        for asset, prop in sorted(goal.secures, key=lambda t: (t[0], t[1].value))
    )


def export_pistar(model: RiskModel) -> ExportResult:
    """Project a consistent model onto a strategic-model document.

    Covers goals, attackers, dreaded events, scenario skeletons and
    support assets; everything else lands in the skipped list. Output is
    deterministic, and re-importing it reproduces the mapped subset
    (scenario steps excluded: the notation cannot carry them).
    """
    require_no_errors(model)
    actors: list[dict] = []
    links: list[TraceLink] = []
    skipped: list[tuple[str, str, str]] = []

    org_nodes: list[dict] = []
    for goal_id in sorted(model.goals):
        goal = model.goals[goal_id]
        props = {"refinement": goal.refinement.value}
        if goal.parent:
            props["parent"] = goal.parent
        if goal.secures:
            props["secures"] = _secures_prop(goal)
        org_nodes.append(
            {"id": goal.id, "text": goal.statement, "type": "istar.Goal", "customProperties": props}
        )
        links.append(_exported(goal.id, note="owner=organisation"))
    for asset_id in sorted(model.support_assets):
        asset = model.support_assets[asset_id]
        props = {"category": asset.category.value}
        if asset.zone:
            props["zone"] = asset.zone
        org_nodes.append(
            {"id": asset.id, "text": asset.name, "type": "istar.Resource", "customProperties": props}
        )
        links.append(_exported(asset.id))
    if org_nodes:
        actors.append(
            {
                "id": "organisation",
                "text": "Organisation",
                "type": "istar.Actor",
                "customProperties": {},
                "nodes": org_nodes,
            }
        )

    scenarios_by_event: dict[str, list[str]] = {}
    for scenario_id in sorted(model.attack_scenarios):
        scenario = model.attack_scenarios[scenario_id]
        scenarios_by_event.setdefault(scenario.realizes, []).append(scenario_id)

    refinement_links: list[dict] = []
    for attacker_id in sorted(model.attackers):
        attacker = model.attackers[attacker_id]
        props = {
            "security": "attacker",
            "capability": str(attacker.capability),
            "motive": attacker.motive,
        }
        if attacker.cooperative_facet:
            props["cooperative_facet"] = attacker.cooperative_facet
        nodes: list[dict] = []
        for event_id in sorted(model.dreaded_events):
            event = model.dreaded_events[event_id]
            if event.attacker != attacker_id:
                continue
            nodes.append(
                {
                    "id": event.id,
                    "text": f"violate {event.violates.value} of {event.target}",
                    "type": "istar.Goal",
                    "customProperties": {
                        "security": "antigoal",
                        "target": event.target,
                        "violates": event.violates.value,
                        "severity": str(event.severity),
                    },
                }
            )
            links.append(_exported(event.id))
            for scenario_id in scenarios_by_event.get(event_id, ()):
                scenario = model.attack_scenarios[scenario_id]
                task_props = {"security": "malicious", "realizes": event.id}
                if scenario.entry_zone:
                    task_props["entry_zone"] = scenario.entry_zone
                nodes.append(
                    {
                        "id": scenario.id,
                        "text": scenario.id,
                        "type": "istar.Task",
                        "customProperties": task_props,
                    }
                )
                refinement_links.append(
                    {"type": "realizes", "source": scenario.id, "target": event.id}
                )
                links.append(_exported(scenario.id))
                if scenario.steps:
                    skipped.append(
                        (
                            "attack_scenario",
                            scenario.id,
                            "steps cannot be represented; exported as skeleton",
                        )
                    )
        actors.append(
            {
                "id": attacker.id,
                "text": attacker.name,
                "type": "istar.Agent",
                "customProperties": props,
                "nodes": nodes,
            }
        )
        links.append(_exported(attacker.id))

    for goal_id in sorted(model.goals):
        goal = model.goals[goal_id]
        if goal.parent:
            parent = model.goals[goal.parent]
            refinement_links.append(
                {
                    "type": f"{parent.refinement.value}-refinement",
                    "source": goal.id,
                    "target": goal.parent,
                }
            )

    refinement_links.sort(key=lambda l: (l["type"], l["source"], l["target"]))
    doc_links = [
        {"id": f"link-{n}", **link} for n, link in enumerate(refinement_links)
    ]

    for kind, collection in (
        ("business_asset", model.business_assets),
        ("zone", model.zones),
        ("conduit", model.conduits),
        ("vulnerability", model.vulnerabilities),
        ("risk", model.risks),
        ("control", model.controls),
    ):
        for element_id in sorted(collection):
            skipped.append((kind, element_id, "no piStar counterpart"))

    document = {"actors": actors, "links": doc_links, "orphans": []}
    return ExportResult(document=document, trace_links=links, skipped=skipped)


def _exported(element_id: str, note: str = "") -> TraceLink:
    return TraceLink(
        source_tool=Tool.PISTAR,
        external_id=element_id,
        element=element_id,
        direction=Direction.EXPORTED,
        note=note,
    )

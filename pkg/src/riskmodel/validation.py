"""Rule-based consistency checking producing machine-readable findings.

All consistency problems are findings, never exceptions, so that models
imported from under-constrained external tools can be loaded, inspected
and repaired. Anything that would break downstream computation is an
error; analyst-judgment mismatches are warnings.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import (
    CVE_PATTERN,
    RiskModel,
    TreatmentStrategy,
    dangling_refs,
    is_valid_id,
    is_valid_level,
)


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    rule_id: str
    severity: Severity
    element: str | None
    message: str

    def sort_key(self):
        return (self.severity.value, self.rule_id, self.element or "", self.message)


@dataclass(frozen=True)
class Rule:
    rule_id: str
    severity: Severity
    description: str


_E = Severity.ERROR
_W = Severity.WARNING

# Published catalogue. The first block is checked by validate(); the second
# block is emitted by adapters and merge plumbing but published here so every
# finding's rule_id resolves to one catalogue entry.
RULES: tuple[Rule, ...] = (
    Rule("R-ID-FORMAT", _E, "element ids match [a-z0-9-]{1,64}"),
    Rule("R-ID-UNIQUE", _E, "element ids are unique across all collections"),
    Rule("R-REF-DANGLING", _E, "every reference resolves to an element of the expected kind"),
    Rule("R-LEVEL-RANGE", _E, "ordinal levels and control reductions lie in 0..4"),
    Rule("R-CONDUIT-DISTINCT", _E, "conduit endpoints are two distinct zones"),
    Rule("R-CONDUIT-UNIQUE", _E, "at most one conduit per unordered zone pair"),
    Rule("R-GOAL-ACYCLIC", _E, "goal parent relationships form a forest (no cycles)"),
    Rule("R-GOAL-SECURES", _E, "secured properties appear in the secured asset's declared needs"),
    Rule("R-EVENT-NEED", _E, "a dreaded event violates a property declared in the target's needs"),
    Rule("R-STEP-VULN", _E, "each scenario step's vulnerability affects the step's asset"),
    Rule(
        "R-STEP-TERMINAL",
        _E,
        "a scenario's final step lands on a support asset supporting the attacked business asset",
    ),
    Rule("R-SCENARIO-STEPS", _E, "attack scenarios carry at least one step"),
    Rule("R-RISK-ALIGNED", _E, "a risk's scenario realizes that risk's dreaded event"),
    Rule("R-IMPACT-CACHED", _E, "a risk's cached impact equals its dreaded event's severity"),
    Rule(
        "R-CTRL-MITIGATE",
        _E,
        "controls attach only to risks treated with the mitigate strategy",
    ),
    Rule("R-CTRL-EFFECT", _E, "a control reduces feasibility or impact by at least one"),
    Rule("R-NEED-PRESENT", _E, "a business asset declares at least one security need of level 1+"),
    Rule(
        "R-VULN-BIDIR",
        _E,
        "a support asset's vulnerability list is mirrored by the vulnerability's affected set",
    ),
    Rule("R-VULN-AFFECTS", _E, "a vulnerability affects at least one support asset"),
    Rule("R-CVE-FORMAT", _E, "CVE identifiers match CVE-<year>-<serial>"),
    Rule(
        "R-TOPOLOGY",
        _E,
        "consecutive scenario steps in different zones require a direct conduit",
    ),
    Rule("R-TRACE-UNIQUE", _E, "(tool, external id, element) is unique per trace revision"),
    Rule("W-SEVERITY-EXCEEDS", _W, "dreaded event severity exceeds the declared security need"),
    Rule("W-MITIGATE-EMPTY", _W, "a mitigate-strategy risk has no control attached"),
    Rule("W-ZONELESS", _W, "a scenario step's asset has no zone; topology check skipped"),
    # Adapter and merge findings.
    Rule("W-UNMAPPED-ELEMENT", _W, "an external element has no canonical counterpart"),
    Rule("W-INCOMPLETE-ELEMENT", _W, "an external element lacks data the canonical model needs"),
    Rule("E-DANGLING-EXTERNAL", _E, "an external record references an unknown external element"),
    Rule("W-UNKNOWN-STRATEGY", _W, "unknown treatment strategy string, defaulted to accept"),
    Rule("W-MULTISTEP-LOSS", _W, "a multi-step scenario was flattened to a single-vulnerability row"),
    Rule("W-CONTROL-UNVERIFIED", _W, "a failed test verdict leaves a control unverified"),
    Rule("E-KIND-CONFLICT", _E, "an imported id collides with an element of a different kind"),
    Rule("W-STUB-CREATED", _W, "a placeholder element was created for an unresolved reference"),
)

_RULE_INDEX = {rule.rule_id: rule for rule in RULES}


def rule_catalogue() -> list[Rule]:
    """The published, stable rule catalogue."""
    return list(RULES)


def make_finding(rule_id: str, element: str | None, message: str) -> Finding:
    rule = _RULE_INDEX[rule_id]
    return Finding(rule_id=rule_id, severity=rule.severity, element=element, message=message)


def _check_ids(model: RiskModel, out: list[Finding]) -> None:
    seen: dict[str, str] = {}
    for kind, element in model.elements():
        if not is_valid_id(element.id):
            out.append(
                make_finding("R-ID-FORMAT", element.id, f"{kind} id {element.id!r} is not a valid id")
            )
        if element.id in seen:
            out.append(
                make_finding(
                    "R-ID-UNIQUE",
                    element.id,
                    f"id {element.id!r} used by both a {seen[element.id]} and a {kind}",
                )
            )
        else:
            seen[element.id] = kind


def _check_refs(model: RiskModel, out: list[Finding]) -> None:
    for ref, context in dangling_refs(model):
        element = context.split(" ", 2)[1] if " " in context else None
        out.append(make_finding("R-REF-DANGLING", element, f"{context}: {ref!r} does not resolve"))


def _check_levels(model: RiskModel, out: list[Finding]) -> None:
    def check(element_id: str, what: str, value) -> None:
        if not is_valid_level(value):
            out.append(
                make_finding("R-LEVEL-RANGE", element_id, f"{what} {value!r} outside 0..4")
            )

    for asset in model.business_assets.values():
        for prop, lvl in asset.security_needs.items():
            check(asset.id, f"security need {prop.value}", lvl)
    for zone in model.zones.values():
        check(zone.id, "target security level", zone.target_security_level)
    for attacker in model.attackers.values():
        check(attacker.id, "capability", attacker.capability)
    for event in model.dreaded_events.values():
        check(event.id, "severity", event.severity)
    for vuln in model.vulnerabilities.values():
        check(vuln.id, "qualification", vuln.qualification)
    for risk in model.risks.values():
        check(risk.id, "impact", risk.impact)
        check(risk.id, "feasibility", risk.feasibility)
    for control in model.controls.values():
        check(control.id, "feasibility reduction", control.feasibility_reduction)
        check(control.id, "impact reduction", control.impact_reduction)


def _check_conduits(model: RiskModel, out: list[Finding]) -> None:
    seen_pairs: dict[frozenset, str] = {}
    for conduit_id in sorted(model.conduits):
        conduit = model.conduits[conduit_id]
        a, b = conduit.endpoints
        if a == b:
            out.append(
                make_finding(
                    "R-CONDUIT-DISTINCT",
                    conduit.id,
                    f"conduit {conduit.id} joins zone {a!r} to itself",
                )
            )
            continue
        pair = frozenset((a, b))
        if pair in seen_pairs:
            out.append(
                make_finding(
                    "R-CONDUIT-UNIQUE",
                    conduit.id,
                    f"conduit {conduit.id} duplicates {seen_pairs[pair]} between {a!r} and {b!r}",
                )
            )
        else:
            seen_pairs[pair] = conduit.id


def _check_goals(model: RiskModel, out: list[Finding]) -> None:
    # Each goal has at most one parent, so any cycle is a simple loop
    # reachable by walking parent pointers.
    state: dict[str, int] = {}  # 0 in progress, 1 done
    for start in sorted(model.goals):
        if start in state:
            continue
        chain = []
        current = start
        while (
            current is not None
            and current in model.goals
            and current not in state
            and current not in chain
        ):
            chain.append(current)
            current = model.goals[current].parent
        if current in chain:
            cycle = chain[chain.index(current):]
            out.append(
                make_finding(
                    "R-GOAL-ACYCLIC",
                    min(cycle),
                    "goal parent cycle: " + " -> ".join(cycle + [current]),
                )
            )
        for goal_id in chain:
            state[goal_id] = 1

    for goal_id in sorted(model.goals):
        goal = model.goals[goal_id]
        for asset_id, prop in sorted(goal.secures, key=lambda t: (t[0], t[1].value)):
            asset = model.business_assets.get(asset_id)
            if asset is None:
                continue  # reported as dangling
            if prop not in asset.security_needs:
                out.append(
                    make_finding(
                        "R-GOAL-SECURES",
                        goal.id,
                        f"goal {goal.id} secures {prop.value} of {asset_id}, "
                        "which declares no such need",
                    )
                )


def _check_events(model: RiskModel, out: list[Finding]) -> None:
    for event_id in sorted(model.dreaded_events):
        event = model.dreaded_events[event_id]
        target = model.business_assets.get(event.target)
        if target is None:
            continue
        declared = target.security_needs.get(event.violates)
        if declared is None:
            out.append(
                make_finding(
                    "R-EVENT-NEED",
                    event.id,
                    f"event {event.id} violates {event.violates.value} of {target.id}, "
                    "which declares no such need",
                )
            )
        elif is_valid_level(event.severity) and event.severity > declared:
            out.append(
                make_finding(
                    "W-SEVERITY-EXCEEDS",
                    event.id,
                    f"severity {event.severity} exceeds declared need {declared} "
                    f"for {event.violates.value} of {target.id}",
                )
            )


def _check_scenarios(model: RiskModel, out: list[Finding]) -> None:
    for scenario_id in sorted(model.attack_scenarios):
        scenario = model.attack_scenarios[scenario_id]
        if not scenario.steps:
            out.append(
                make_finding(
                    "R-SCENARIO-STEPS", scenario.id, f"scenario {scenario.id} has no steps"
                )
            )
        for i, step in enumerate(scenario.steps):
            vuln = model.vulnerabilities.get(step.vulnerability)
            if vuln is not None and step.asset not in vuln.affects:
                out.append(
                    make_finding(
                        "R-STEP-VULN",
                        scenario.id,
                        f"step {i} of {scenario.id}: {step.vulnerability} does not affect {step.asset}",
                    )
                )
        event = model.dreaded_events.get(scenario.realizes)
        if scenario.steps and event is not None:
            target = model.business_assets.get(event.target)
            final = scenario.steps[-1].asset
            if target is not None and final not in target.supported_by:
                out.append(
                    make_finding(
                        "R-STEP-TERMINAL",
                        scenario.id,
                        f"scenario {scenario.id} ends on {final}, which does not support {target.id}",
                    )
                )


def _check_risks(model: RiskModel, out: list[Finding]) -> None:
    for risk_id in sorted(model.risks):
        risk = model.risks[risk_id]
        scenario = model.attack_scenarios.get(risk.scenario)
        if scenario is not None and scenario.realizes != risk.dreaded_event:
            out.append(
                make_finding(
                    "R-RISK-ALIGNED",
                    risk.id,
                    f"risk {risk.id}: scenario realizes {scenario.realizes!r}, "
                    f"not {risk.dreaded_event!r}",
                )
            )
        event = model.dreaded_events.get(risk.dreaded_event)
        if event is not None and risk.impact != event.severity:
            out.append(
                make_finding(
                    "R-IMPACT-CACHED",
                    risk.id,
                    f"risk {risk.id}: impact {risk.impact} != event severity {event.severity}",
                )
            )

    mitigated: set[str] = set()
    for control_id in sorted(model.controls):
        control = model.controls[control_id]
        if control.feasibility_reduction + control.impact_reduction < 1:
            out.append(
                make_finding(
                    "R-CTRL-EFFECT", control.id, f"control {control.id} reduces nothing"
                )
            )
        for risk_id in sorted(control.mitigates):
            mitigated.add(risk_id)
            risk = model.risks.get(risk_id)
            if risk is not None and risk.strategy != TreatmentStrategy.MITIGATE:
                out.append(
                    make_finding(
                        "R-CTRL-MITIGATE",
                        control.id,
                        f"control {control.id} attached to {risk_id} "
                        f"with strategy {risk.strategy.value}",
                    )
                )
    for risk_id in sorted(model.risks):
        risk = model.risks[risk_id]
        if risk.strategy == TreatmentStrategy.MITIGATE and risk_id not in mitigated:
            out.append(
                make_finding(
                    "W-MITIGATE-EMPTY",
                    risk.id,
                    f"risk {risk.id} is to be mitigated but no control addresses it",
                )
            )


def _check_assets(model: RiskModel, out: list[Finding]) -> None:
    for asset_id in sorted(model.business_assets):
        asset = model.business_assets[asset_id]
        if not any(
            is_valid_level(lvl) and lvl >= 1 for lvl in asset.security_needs.values()
        ):
            out.append(
                make_finding(
                    "R-NEED-PRESENT",
                    asset.id,
                    f"business asset {asset.id} declares no security need of level 1+",
                )
            )
    for asset_id in sorted(model.support_assets):
        asset = model.support_assets[asset_id]
        for vuln_id in sorted(asset.vulnerabilities):
            vuln = model.vulnerabilities.get(vuln_id)
            if vuln is not None and asset.id not in vuln.affects:
                out.append(
                    make_finding(
                        "R-VULN-BIDIR",
                        asset.id,
                        f"{asset.id} lists {vuln_id} but {vuln_id} does not list {asset.id} "
                        "among affected assets",
                    )
                )
    for vuln_id in sorted(model.vulnerabilities):
        vuln = model.vulnerabilities[vuln_id]
        if not vuln.affects:
            out.append(
                make_finding(
                    "R-VULN-AFFECTS", vuln.id, f"vulnerability {vuln.id} affects no asset"
                )
            )
        for cve in vuln.cve_ids:
            if not CVE_PATTERN.fullmatch(cve):
                out.append(
                    make_finding(
                        "R-CVE-FORMAT", vuln.id, f"{vuln.id}: malformed CVE id {cve!r}"
                    )
                )


def _check_trace_links(model: RiskModel, out: list[Finding]) -> None:
    seen = set()
    for link in model.trace_links:
        key = (link.source_tool, link.external_id, link.element, link.revision)
        if key in seen:
            out.append(
                make_finding(
                    "R-TRACE-UNIQUE",
                    link.element,
                    f"duplicate trace link {link.source_tool.value}:{link.external_id} "
                    f"-> {link.element} at revision {link.revision}",
                )
            )
        seen.add(key)


def validate(model: RiskModel) -> list[Finding]:
    """Run the full rule catalogue and return sorted findings.

    Pure: the same model always yields the identical findings list. An
    empty list means the model is fully consistent.
    """
    # Imported here because the engine module needs Finding from this one.
    from .engine import check_scenario_topology

    out: list[Finding] = []
    _check_ids(model, out)
    _check_refs(model, out)
    _check_levels(model, out)
    _check_conduits(model, out)
    _check_goals(model, out)
    _check_events(model, out)
    _check_scenarios(model, out)
    _check_risks(model, out)
    _check_assets(model, out)
    _check_trace_links(model, out)
    for scenario_id in sorted(model.attack_scenarios):
        out.extend(check_scenario_topology(model.attack_scenarios[scenario_id], model))
    return sorted(out, key=Finding.sort_key)


def has_errors(findings) -> bool:
    return any(f.severity == Severity.ERROR for f in findings)


def require_no_errors(model: RiskModel) -> list[Finding]:
    """Validate and raise ValidationGateError when error findings exist.

    Gate for operations that only make sense on a consistent model
    (matrix, coverage, exports). Returns the findings (warnings allowed).
    """
    from .errors import ValidationGateError

    findings = validate(model)
    if has_errors(findings):
        raise ValidationGateError(findings)
    return findings


def findings_to_dicts(findings) -> list[dict]:
    return [
        {
            "rule_id": f.rule_id,
            "severity": f.severity.value,
            "element": f.element,
            "message": f.message,
        }
        for f in findings
    ]

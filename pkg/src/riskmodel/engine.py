"""Quantitative and topological risk analyses.

Feasibility follows a weakest-link rule: an attack chain is no more
feasible than its least exploitable step or the attacker's own
capability. Risk levels are the ordinal product impact x feasibility on
0..16 (non-linear; ordinal inputs). Control reductions compose
additively and clamp at zero, so residual never exceeds inherent.

All operations are pure over an immutable model snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RangeError, UnresolvedRefError
from .model import (
    LEVEL_LABELS,
    LEVEL_MAX,
    LEVEL_MIN,
    AttackScenario,
    Risk,
    RiskModel,
    TreatmentStrategy,
)
from .validation import Finding, make_finding


@dataclass
class RiskMatrix:
    """5x5 partition of all risks by (impact, feasibility)."""

    cells: dict[tuple[int, int], set[str]]
    impact_labels: tuple[str, ...] = LEVEL_LABELS
    feasibility_labels: tuple[str, ...] = LEVEL_LABELS

    def counts(self) -> list[list[int]]:
        """Row-per-impact grid of cell sizes (impact 0..4 by feasibility 0..4)."""
        return [[len(self.cells[(i, f)]) for f in range(5)] for i in range(5)]

    def total(self) -> int:
        return sum(len(c) for c in self.cells.values())


@dataclass
class ZonePath:
    """A simple path through the zone graph; conduits has one entry per hop."""

    zones: list[str]
    conduits: list[str]

    def sort_key(self):
        return (len(self.zones), tuple(self.zones), tuple(self.conduits))


@dataclass
class CoverageReport:
    """Gaps between declared analysis intent and the model's actual content."""

    dreaded_events_without_scenario: set[str] = field(default_factory=set)
    risks_without_strategy_rationale: set[str] = field(default_factory=set)
    mitigate_risks_without_controls: set[str] = field(default_factory=set)
    controls_unlinked: set[str] = field(default_factory=set)
    # Avoid-strategy risks flagged for decommissioning follow-up.
    avoid_risks: set[str] = field(default_factory=set)

    def is_complete(self) -> bool:
        return not (
            self.dreaded_events_without_scenario
            or self.risks_without_strategy_rationale
            or self.mitigate_risks_without_controls
            or self.controls_unlinked
        )


def _require_no_errors(model: RiskModel):
    from .validation import require_no_errors

    return require_no_errors(model)


def scenario_feasibility(scenario: AttackScenario, model: RiskModel) -> int:
    """Weakest link over attacker capability and every step's exploitability."""
    event = model.dreaded_events.get(scenario.realizes)
    if event is None:
        raise UnresolvedRefError(scenario.realizes, f"scenario {scenario.id} realizes")
    attacker = model.attackers.get(event.attacker)
    if attacker is None:
        raise UnresolvedRefError(event.attacker, f"event {event.id} attacker")
    levels = [attacker.capability]
    for step in scenario.steps:
        vuln = model.vulnerabilities.get(step.vulnerability)
        if vuln is None:
            raise UnresolvedRefError(step.vulnerability, f"scenario {scenario.id} step")
        levels.append(vuln.qualification)
    return min(levels)


def inherent_level(impact: int, feasibility: int) -> int:
    """Ordinal product of impact and feasibility, 0..16."""
    for name, value in (("impact", impact), ("feasibility", feasibility)):
        if not isinstance(value, int) or isinstance(value, bool) or not (
            LEVEL_MIN <= value <= LEVEL_MAX
        ):
            raise RangeError(f"{name} {value!r} outside {LEVEL_MIN}..{LEVEL_MAX}")
    return impact * feasibility


def controls_for(risk: Risk, model: RiskModel):
    return [c for c in model.controls.values() if risk.id in c.mitigates]


def residual_level(risk: Risk, model: RiskModel) -> int:
    """Risk level after applying mitigating controls.

    Only the mitigate strategy changes the level; accept, transfer and
    avoid keep the inherent value (avoid shows up in the coverage report
    instead). Reductions add up and clamp at zero per dimension.
    """
    if risk.dreaded_event not in model.dreaded_events:
        raise UnresolvedRefError(risk.dreaded_event, f"risk {risk.id} dreaded_event")
    if risk.scenario not in model.attack_scenarios:
        raise UnresolvedRefError(risk.scenario, f"risk {risk.id} scenario")
    if risk.strategy != TreatmentStrategy.MITIGATE:
        return inherent_level(risk.impact, risk.feasibility)
    controls = controls_for(risk, model)
    effective_impact = max(0, risk.impact - sum(c.impact_reduction for c in controls))
    effective_feasibility = max(
        0, risk.feasibility - sum(c.feasibility_reduction for c in controls)
    )
    return effective_impact * effective_feasibility


def build_risk_matrix(model: RiskModel) -> RiskMatrix:
    """Partition every risk into the 5x5 (impact, scenario feasibility) grid."""
    _require_no_errors(model)
    cells: dict[tuple[int, int], set[str]] = {
        (i, f): set() for i in range(5) for f in range(5)
    }
    for risk in model.risks.values():
        scenario = model.attack_scenarios[risk.scenario]
        feasibility = scenario_feasibility(scenario, model)
        cells[(risk.impact, feasibility)].add(risk.id)
    return RiskMatrix(cells=cells)


def check_scenario_topology(scenario: AttackScenario, model: RiskModel) -> list[Finding]:
    """Verify consecutive steps stay in one zone or cross a direct conduit.

    A hop over two conduits means the analyst left out the intermediate
    pivot step, so only a direct conduit clears the pair. Steps on assets
    without a zone are skipped with a warning.
    """
    findings: list[Finding] = []
    connected: set[frozenset] = set()
    for conduit in model.conduits.values():
        connected.add(frozenset(conduit.endpoints))

    zones: list[str | None] = []
    warned_assets: set[str] = set()
    for step in scenario.steps:
        asset = model.support_assets.get(step.asset)
        if asset is None:
            zones.append(None)  # dangling refs are someone else's finding
            continue
        if asset.zone is None and asset.id not in warned_assets:
            warned_assets.add(asset.id)
            findings.append(
                make_finding(
                    "W-ZONELESS",
                    scenario.id,
                    f"scenario {scenario.id}: asset {asset.id} has no zone; "
                    "topology not checked for its steps",
                )
            )
        zones.append(asset.zone)

    for i in range(len(zones) - 1):
        here, there = zones[i], zones[i + 1]
        if here is None or there is None or here == there:
            continue
        if frozenset((here, there)) not in connected:
            findings.append(
                make_finding(
                    "R-TOPOLOGY",
                    scenario.id,
                    f"scenario {scenario.id}: steps {i}->{i + 1} cross from zone "
                    f"{here} to {there} without a direct conduit",
                )
            )
    return findings


def attack_paths(
    model: RiskModel, entry: str, target: str, max_len: int = 5
) -> list[ZonePath]:
    """All simple zone paths from the entry zone to any zone hosting a
    support asset of the target business asset, at most max_len zones long.

    Complete enumeration, sorted by (length, zone ids).
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if entry not in model.zones:
        raise UnresolvedRefError(entry, "attack_paths entry zone")
    business = model.business_assets.get(target)
    if business is None:
        raise UnresolvedRefError(target, "attack_paths target asset")

    target_zones = set()
    for asset_id in business.supported_by:
        asset = model.support_assets.get(asset_id)
        if asset is not None and asset.zone is not None:
            target_zones.add(asset.zone)

    adjacency: dict[str, list[tuple[str, str]]] = {z: [] for z in model.zones}
    for conduit_id in sorted(model.conduits):
        conduit = model.conduits[conduit_id]
        a, b = conduit.endpoints
        if a == b or a not in adjacency or b not in adjacency:
            continue
        adjacency[a].append((b, conduit_id))
        adjacency[b].append((a, conduit_id))

    found: list[ZonePath] = []

    def walk(path_zones: list[str], path_conduits: list[str]) -> None:
        current = path_zones[-1]
        if current in target_zones:
            found.append(ZonePath(zones=list(path_zones), conduits=list(path_conduits)))
        if len(path_zones) >= max_len:
            return
        for neighbour, conduit_id in adjacency[current]:
            if neighbour in path_zones:
                continue
            path_zones.append(neighbour)
            path_conduits.append(conduit_id)
            walk(path_zones, path_conduits)
            path_zones.pop()
            path_conduits.pop()

    walk([entry], [])
    return sorted(found, key=ZonePath.sort_key)


def coverage_report(model: RiskModel, accept_threshold: int = 9) -> CoverageReport:
    """Exhaustive scan for analysis gaps; requires an error-free model."""
    _require_no_errors(model)
    report = CoverageReport()

    realized = {s.realizes for s in model.attack_scenarios.values()}
    report.dreaded_events_without_scenario = set(model.dreaded_events) - realized

    mitigated: set[str] = set()
    for control in model.controls.values():
        if not control.mitigates:
            report.controls_unlinked.add(control.id)
        mitigated.update(control.mitigates)

    for risk in model.risks.values():
        inherent = inherent_level(risk.impact, risk.feasibility)
        if risk.strategy == TreatmentStrategy.ACCEPT and inherent >= accept_threshold:
            report.risks_without_strategy_rationale.add(risk.id)
        if risk.strategy == TreatmentStrategy.MITIGATE and risk.id not in mitigated:
            report.mitigate_risks_without_controls.add(risk.id)
        if risk.strategy == TreatmentStrategy.AVOID:
            report.avoid_risks.add(risk.id)
    return report

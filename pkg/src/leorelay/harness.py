"""Seeded slot-loop runner, file outputs, and paired scheme comparisons.

One run covers every seed of a scenario.  Per seed and slot the runner
propagates the shell, rebuilds the graph, partitions the roster into
regions, selects relays (or applies a baseline), wires flows, audits
the resulting state, and accumulates pair latencies.  All randomness
flows from the seed, so outputs are byte-identical across repeats.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import default_cloud_sites, spacertc_select, via_select
from .constellation import propagate
from .flows import wire_session
from .metrics import LatencyMatrix, distribution_stats, latency_matrix
from .regions import divide
from .relays import RelayAssignment, select_relays
from .scenario import Scenario
from .sessions import Session, generate_users, roster_at
from .topology import NodeId, audit_constraints, build_graph


class MismatchedScenarios(Exception):
    """Paired comparison inputs differ in more than the scheme."""


@dataclass(frozen=True)
class SeedSummary:
    """Metrics and counters for one (scheme, seed) run."""

    scheme: str
    seed: int
    slots: int
    sessions_observed: int
    pair_count: int
    infeasible_pairs: int
    allocation_failures: int
    relay_infeasible: int
    handovers: int
    violations: int
    latency_mean: float | None
    latency_median: float | None
    latency_q1: float | None
    latency_q3: float | None
    latency_iqr: float | None
    dispersion_mean: float | None
    objective_mean: float | None

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    seed_summaries: tuple[SeedSummary, ...]
    out_dir: Path

    @property
    def total_violations(self) -> int:
        return sum(s.violations for s in self.seed_summaries)

    def summary(self, seed: int) -> SeedSummary:
        for s in self.seed_summaries:
            if s.seed == seed:
                return s
        raise KeyError(f"no summary for seed {seed}")


def _node_str(node: NodeId | None) -> str | None:
    return None if node is None else str(node)


class _SeedCollector:
    """Accumulates one seed's rows, events, and counters."""

    def __init__(self) -> None:
        self.pair_rows: list[tuple[int, int, int, int, float]] = []
        self.handover_events: list[dict] = []
        self.failure_events: list[dict] = []
        self.audit_records: list[dict] = []
        self.latencies: list[float] = []
        self.dispersions: list[float] = []
        self.objectives: list[float] = []
        self.sessions_seen: set[int] = set()
        self.infeasible_pairs = 0
        self.allocation_failures = 0
        self.relay_infeasible = 0
        self.handovers = 0
        self.violations = 0

    def take_matrix(self, slot: int, matrix: LatencyMatrix, alpha: float) -> None:
        self.sessions_seen.add(matrix.session_id)
        for (i, j), latency in sorted(matrix.entries.items()):
            self.pair_rows.append((slot, matrix.session_id, i.index, j.index, latency))
            self.latencies.append(latency)
        self.infeasible_pairs += matrix.infeasible_pairs
        t = list(matrix.per_user_mean.values())
        if len(t) >= 2:
            t_ave = matrix.session_mean
            mad = sum(abs(t_ave - ti) for ti in t) / len(t)
            self.dispersions.append(mad)
            self.objectives.append(t_ave + alpha * mad)

    def take_failures(self, slot: int, session_id: int, failures) -> None:
        for f in failures:
            self.allocation_failures += 1
            self.failure_events.append(
                {
                    "slot": slot,
                    "session": session_id,
                    "src": _node_str(f.src),
                    "dst": _node_str(f.dst),
                    "direction": f.direction_tag,
                    "reason": f.reason,
                }
            )

    def take_selection(
        self,
        slot: int,
        session_id: int,
        region_id: int | None,
        relay: NodeId | None,
        previous: NodeId | None,
        handover: bool,
        feasible: bool,
    ) -> None:
        if not feasible:
            self.relay_infeasible += 1
        if handover and previous is not None and relay != previous:
            self.handovers += 1
        self.handover_events.append(
            {
                "slot": slot,
                "session": session_id,
                "region": region_id,
                "relay": _node_str(relay),
                "previous": _node_str(previous),
                "handover": handover,
                "feasible": feasible,
            }
        )

    def take_audit(self, slot: int, report) -> None:
        violations = [
            {"kind": v.kind, "subject": str(v.subject), "detail": v.detail}
            for v in (report.violations if report is not None else [])
        ]
        self.violations += len(violations)
        self.audit_records.append({"slot": slot, "violations": violations})


def _slot_spacemeta(scenario, graph, sessions, slot_index, prev, collector):
    session_regions = [(s, divide(s, scenario.region_params)) for s in sessions]
    assignments = select_relays(
        session_regions,
        graph,
        scenario.selection,
        prev,
        slot_index=slot_index,
        match_radius_km=scenario.region_params.d_max_km,
    )
    relay_maps: dict[int, dict[int, NodeId | None]] = {}
    for a in assignments:
        relay_maps.setdefault(a.session_id, {})[a.region_id] = a.relay
        collector.take_selection(
            slot_index, a.session_id, a.region_id, a.relay, a.previous_relay,
            a.handover, a.feasible,
        )
    for session, regions in session_regions:
        wiring = wire_session(
            graph,
            session,
            regions,
            relay_maps.get(session.session_id, {}),
            isl_capacity_mbps=scenario.graph_params.isl_capacity_mbps,
        )
        collector.take_failures(slot_index, session.session_id, wiring.failures)
        collector.take_matrix(
            slot_index,
            latency_matrix(session, wiring.flows),
            scenario.selection.alpha,
        )
    return assignments


def _slot_spacertc(scenario, graph, sessions, slot_index, last_relay, collector):
    for session in sessions:
        result = spacertc_select(session, graph, scenario.selection)
        prev = last_relay.get(session.session_id)
        collector.take_selection(
            slot_index, session.session_id, None, result.relay, prev,
            handover=prev is not None and result.relay != prev,
            feasible=result.feasible,
        )
        if result.relay is not None:
            last_relay[session.session_id] = result.relay
        collector.take_failures(slot_index, session.session_id, result.wiring.failures)
        collector.take_matrix(
            slot_index,
            latency_matrix(session, result.wiring.flows),
            scenario.selection.alpha,
        )


def _slot_via(scenario, sites, sessions, slot_index, last_site, collector):
    for session in sessions:
        result = via_select(
            session,
            sites,
            scenario.via_k,
            path_stretch=scenario.via_path_stretch,
            smoothing=scenario.via_smoothing,
        )
        prev = last_site.get(session.session_id)
        collector.take_selection(
            slot_index, session.session_id, None,
            NodeId("site", result.site_id),
            None if prev is None else NodeId("site", prev),
            handover=prev is not None and result.site_id != prev,
            feasible=True,
        )
        last_site[session.session_id] = result.site_id
        collector.take_matrix(
            slot_index,
            latency_matrix(session, result.flows),
            scenario.selection.alpha,
        )


def run_seed(scenario: Scenario, seed: int) -> tuple[SeedSummary, _SeedCollector]:
    """Simulate every slot of one seed; nothing is written to disk."""
    users = generate_users(scenario.n_users, scenario.population, scenario.policy, seed)
    collector = _SeedCollector()
    prev_assignments: Sequence[RelayAssignment] = ()
    last_relay: dict[int, NodeId] = {}
    last_site: dict[int, int] = {}
    sites = default_cloud_sites()
    slot_s = scenario.selection.slot_duration_s

    for slot_index in range(1, scenario.num_slots + 1):
        epoch = slot_index * slot_s
        sessions = roster_at(users, epoch)
        if not sessions:
            collector.take_audit(slot_index, None)
            continue
        if scenario.scheme == "via":
            # Purely terrestrial: the constellation never enters the math.
            _slot_via(scenario, sites, sessions, slot_index, last_site, collector)
            collector.take_audit(slot_index, None)
            continue
        sats = propagate(scenario.shell, epoch)
        joined = [
            (u.user_id, u.location) for s in sessions for u in s.members
        ]
        graph = build_graph(scenario.shell, sats, joined, scenario.graph_params)
        if scenario.scheme == "spacemeta":
            prev_assignments = _slot_spacemeta(
                scenario, graph, sessions, slot_index, prev_assignments, collector
            )
        else:
            _slot_spacertc(scenario, graph, sessions, slot_index, last_relay, collector)
        collector.take_audit(slot_index, audit_constraints(graph, graph.flows))

    if collector.latencies:
        stats = distribution_stats(collector.latencies)
        lat = (stats.mean, stats.median, stats.q1, stats.q3, stats.iqr)
    else:
        lat = (None, None, None, None, None)
    summary = SeedSummary(
        scheme=scenario.scheme,
        seed=seed,
        slots=scenario.num_slots,
        sessions_observed=len(collector.sessions_seen),
        pair_count=len(collector.pair_rows),
        infeasible_pairs=collector.infeasible_pairs,
        allocation_failures=collector.allocation_failures,
        relay_infeasible=collector.relay_infeasible,
        handovers=collector.handovers,
        violations=collector.violations,
        latency_mean=lat[0],
        latency_median=lat[1],
        latency_q1=lat[2],
        latency_q3=lat[3],
        latency_iqr=lat[4],
        dispersion_mean=(
            sum(collector.dispersions) / len(collector.dispersions)
            if collector.dispersions
            else None
        ),
        objective_mean=(
            sum(collector.objectives) / len(collector.objectives)
            if collector.objectives
            else None
        ),
    )
    return summary, collector


def _write_seed_outputs(seed_dir: Path, summary: SeedSummary, collector: _SeedCollector) -> None:
    seed_dir.mkdir(parents=True, exist_ok=True)
    with open(seed_dir / "pairs.csv", "w", newline="") as fh:
        fh.write("slot,session,user_i,user_j,latency_ms\n")
        for slot, sid, i, j, latency in collector.pair_rows:
            fh.write(f"{slot},{sid},{i},{j},{latency:.9f}\n")
    with open(seed_dir / "handovers.jsonl", "w") as fh:
        for event in collector.handover_events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    with open(seed_dir / "failures.jsonl", "w") as fh:
        for event in collector.failure_events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    with open(seed_dir / "audit.jsonl", "w") as fh:
        for record in collector.audit_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with open(seed_dir / "summary.json", "w") as fh:
        json.dump(summary.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(
    scenario: Scenario,
    output_dir: str | Path | None = None,
    seeds: Sequence[int] | None = None,
) -> RunResult:
    """Run every seed and write per-seed output files.

    Layout: <output_dir>/<scheme>/seed<N>/{pairs.csv, summary.json,
    handovers.jsonl, failures.jsonl, audit.jsonl} plus a scheme-level
    summary.json aggregating the seeds.
    """
    out_root = Path(output_dir if output_dir is not None else scenario.output_dir)
    scheme_dir = out_root / scenario.scheme
    chosen = tuple(seeds) if seeds is not None else scenario.seeds
    summaries = []
    for seed in chosen:
        summary, collector = run_seed(scenario, seed)
        _write_seed_outputs(scheme_dir / f"seed{seed}", summary, collector)
        summaries.append(summary)
    aggregate = {
        "scenario": scenario.name,
        "scheme": scenario.scheme,
        "alpha": scenario.selection.alpha,
        "seeds": list(chosen),
        "per_seed": [s.to_json() for s in summaries],
        "aggregate": {
            "latency_mean": _mean_or_none([s.latency_mean for s in summaries]),
            "latency_iqr": _mean_or_none([s.latency_iqr for s in summaries]),
            "dispersion_mean": _mean_or_none([s.dispersion_mean for s in summaries]),
            "objective_mean": _mean_or_none([s.objective_mean for s in summaries]),
            "violations": sum(s.violations for s in summaries),
        },
    }
    scheme_dir.mkdir(parents=True, exist_ok=True)
    with open(scheme_dir / "summary.json", "w") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(scenario=scenario, seed_summaries=tuple(summaries), out_dir=out_root)


def _mean_or_none(values: Sequence[float | None]) -> float | None:
    usable = [v for v in values if v is not None]
    return sum(usable) / len(usable) if usable else None


def validate_paired(scenarios: Sequence[Scenario]) -> None:
    """Ensure the scenarios differ in nothing but the scheme."""
    if not scenarios:
        raise MismatchedScenarios("no scenarios to compare")
    base = dataclasses.replace(scenarios[0], scheme="spacemeta")
    for other in scenarios[1:]:
        if dataclasses.replace(other, scheme="spacemeta") != base:
            raise MismatchedScenarios(
                "paired scenarios must differ only in scheme "
                f"({scenarios[0].name!r} vs {other.name!r})"
            )


def compare_runs(
    runs: Mapping[str, RunResult],
    reference: str = "spacemeta",
) -> dict:
    """Paired per-seed percentage reductions of the reference scheme.

    A positive reduction means the reference run had the lower value.
    Seeds must match across schemes; missing metrics fail loudly.
    """
    if reference not in runs:
        raise MismatchedScenarios(f"reference scheme {reference!r} was not run")
    validate_paired([r.scenario for r in runs.values()])
    ref = runs[reference]
    ref_seeds = [s.seed for s in ref.seed_summaries]
    report: dict = {"reference": reference, "seeds": ref_seeds, "vs": {}}
    for scheme, result in runs.items():
        if scheme == reference:
            continue
        if [s.seed for s in result.seed_summaries] != ref_seeds:
            raise MismatchedScenarios(f"{scheme} ran different seeds than {reference}")
        mean_red, iqr_red = [], []
        for ref_s, other_s in zip(ref.seed_summaries, result.seed_summaries):
            for metric, bucket in (
                ("latency_mean", mean_red),
                ("latency_iqr", iqr_red),
            ):
                ours = getattr(ref_s, metric)
                theirs = getattr(other_s, metric)
                if ours is None or theirs is None or theirs == 0.0:
                    raise ValueError(
                        f"seed {ref_s.seed}: cannot pair {metric} "
                        f"({reference}={ours}, {scheme}={theirs})"
                    )
                bucket.append((theirs - ours) / theirs * 100.0)
        report["vs"][scheme] = {
            "mean_latency_reduction_pct": _spread(mean_red),
            "iqr_reduction_pct": _spread(iqr_red),
        }
    return report


def _spread(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "per_seed": [float(v) for v in arr],
        "mean": float(arr.mean()),
        "std": float(arr.std()),
    }


def compare(
    scenarios: Sequence[Scenario],
    output_dir: str | Path | None = None,
    reference: str = "spacemeta",
) -> tuple[dict, dict[str, RunResult]]:
    """Run paired scenarios (one per scheme) and report reductions."""
    validate_paired(scenarios)
    schemes = [s.scheme for s in scenarios]
    if len(set(schemes)) != len(schemes):
        raise MismatchedScenarios(f"duplicate schemes in comparison: {schemes}")
    runs = {s.scheme: run(s, output_dir=output_dir) for s in scenarios}
    report = compare_runs(runs, reference=reference)
    out_root = Path(output_dir if output_dir is not None else scenarios[0].output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "comparison.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, runs


def sweep_alpha(
    scenario: Scenario,
    alphas: Sequence[float] = (1.0, 5.0, 10.0, 20.0),
    output_dir: str | Path | None = None,
) -> dict:
    """Re-run the scenario at each alpha; collect latency and spread."""
    if not alphas:
        raise ValueError("no alphas to sweep")
    out_root = Path(output_dir if output_dir is not None else scenario.output_dir)
    points = []
    for alpha in alphas:
        variant = scenario.with_alpha(float(alpha))
        result = run(variant, output_dir=out_root / f"alpha-{alpha:g}")
        points.append(
            {
                "alpha": float(alpha),
                "per_seed": [
                    {
                        "seed": s.seed,
                        "latency_mean": s.latency_mean,
                        "dispersion_mean": s.dispersion_mean,
                        "objective_mean": s.objective_mean,
                        "violations": s.violations,
                    }
                    for s in result.seed_summaries
                ],
            }
        )
    report = {"scenario": scenario.name, "scheme": scenario.scheme, "points": points}
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "sweep_alpha.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report

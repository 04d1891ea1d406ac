"""Path enumeration and bandwidth placement over the slot graph.

Routing is min-hop; among the shortest paths that can actually take the
demand, the one crossing the most already-activated links wins, which
concentrates traffic on lit links instead of waking new ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .regions import Region
from .sessions import Session
from .topology import (
    CapacityExceeded,
    FlowRecord,
    IslBudgetExceeded,
    NetworkGraph,
    NodeId,
    hop_distances,
)

DEFAULT_PATH_CAP = 64


class NoPath(Exception):
    """Endpoints are disconnected in the current graph."""


class NoFeasiblePath(Exception):
    """Every shortest path was filtered out or failed to reserve."""


@dataclass(frozen=True)
class PathCandidate:
    nodes: tuple[NodeId, ...]
    activated_num: int

    @property
    def hop_count(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class InterRegionDemand:
    session_id: int
    src_region: int
    dst_region: int
    bandwidth_mbps: float


@dataclass(frozen=True)
class AllocationFailure:
    src: NodeId
    dst: NodeId
    direction_tag: str
    reason: str


@dataclass
class SessionWiring:
    flows: list[FlowRecord] = field(default_factory=list)
    failures: list[AllocationFailure] = field(default_factory=list)


def min_hop_paths(
    graph: NetworkGraph,
    i: NodeId,
    j: NodeId,
    cap: int = DEFAULT_PATH_CAP,
) -> list[PathCandidate]:
    """All simple min-hop paths from i to j, lexicographic by node id.

    User nodes may only start or end a path, never forward.  Enumeration
    expands neighbours in ascending NodeId and truncates after ``cap``
    paths, so the result is deterministic for a given graph.  Raises
    NoPath when j is unreachable from i.
    """
    if i == j:
        raise ValueError("path endpoints must differ")
    if cap < 1:
        raise ValueError("cap must be positive")
    dist = hop_distances(graph, j, stop_node=i)
    start = graph.index[i]
    if dist[start] < 0:
        raise NoPath(f"{i} cannot reach {j}")

    adj = graph._adj_idx
    nodes = graph.nodes
    is_user = graph._is_user
    found: list[tuple[NodeId, ...]] = []

    def descend(idx: int, trail: list[int]) -> bool:
        if dist[idx] == 0:
            found.append(tuple(nodes[k] for k in trail))
            return len(found) < cap
        for nb in adj[idx]:
            # dist[nb] == 0 is the destination itself; any other user
            # node would have to forward, which user hardware cannot.
            if dist[nb] == dist[idx] - 1 and (dist[nb] == 0 or not is_user[nb]):
                trail.append(nb)
                keep_going = descend(nb, trail)
                trail.pop()
                if not keep_going:
                    return False
        return True

    descend(start, [start])

    out = []
    for path in found:
        lit = sum(
            1 for a, b in zip(path, path[1:]) if graph.link(a, b).activated
        )
        out.append(PathCandidate(nodes=path, activated_num=lit))
    return out


def _eligible(graph: NetworkGraph, path: PathCandidate, bandwidth_mbps: float) -> bool:
    # Per-link screen: enough residual in the traversal direction (exact
    # fit allowed), and no dormant ISL whose endpoints are already at
    # their activation budget.
    for a, b in zip(path.nodes, path.nodes[1:]):
        link = graph.link(a, b)
        if link.remaining_toward(a, b) < bandwidth_mbps:
            return False
        if link.kind == "isl" and not link.activated:
            if (
                graph.active_isl_count(a) >= graph.max_active_isl
                or graph.active_isl_count(b) >= graph.max_active_isl
            ):
                return False
    return True


def allocate(
    graph: NetworkGraph,
    i: NodeId,
    j: NodeId,
    bandwidth_mbps: float,
    direction_tag: str = "upstream",
    cap: int = DEFAULT_PATH_CAP,
) -> FlowRecord:
    """Reserve ``bandwidth_mbps`` on the best shortest path from i to j.

    Best = most activated links, ties broken by enumeration order.  The
    graph mutates only when a reservation commits; the returned record
    is also appended to ``graph.flows``.
    """
    if bandwidth_mbps <= 0.0:
        raise ValueError("bandwidth must be positive")
    try:
        candidates = min_hop_paths(graph, i, j, cap)
    except NoPath as exc:
        raise NoFeasiblePath(str(exc)) from exc

    survivors = [p for p in candidates if _eligible(graph, p, bandwidth_mbps)]
    survivors.sort(key=lambda p: -p.activated_num)  # stable: enum order on ties
    for path in survivors:
        try:
            graph.reserve(path.nodes, bandwidth_mbps)
        except (CapacityExceeded, IslBudgetExceeded):
            # Per-link screening cannot see cumulative effects along the
            # path; fall through to the next-best candidate.
            continue
        latency = sum(
            graph.link(a, b).latency_ms for a, b in zip(path.nodes, path.nodes[1:])
        )
        record = FlowRecord(
            src=i,
            dst=j,
            hops=tuple(zip(path.nodes, path.nodes[1:])),
            bandwidth_mbps=bandwidth_mbps,
            direction_tag=direction_tag,
            latency_ms=latency,
        )
        graph.flows.append(record)
        return record
    raise NoFeasiblePath(f"no shortest path {i}->{j} can take {bandwidth_mbps} Mbps")


def inter_region_demands(
    session: Session,
    regions: list[Region],
    isl_capacity_mbps: float,
) -> list[InterRegionDemand]:
    """Aggregate upstream per ordered region pair, capped at ISL capacity."""
    demands = []
    for src in regions:
        total_up = sum(m.up_bw_mbps for m in src.members)
        bw = min(total_up, isl_capacity_mbps)
        for dst in regions:
            if dst.region_id == src.region_id:
                continue
            demands.append(
                InterRegionDemand(
                    session_id=session.session_id,
                    src_region=src.region_id,
                    dst_region=dst.region_id,
                    bandwidth_mbps=bw,
                )
            )
    demands.sort(key=lambda d: (d.src_region, d.dst_region))
    return demands


def wire_session(
    graph: NetworkGraph,
    session: Session,
    regions: list[Region],
    assignments: dict[int, NodeId | None],
    demands: list[InterRegionDemand] | None = None,
    isl_capacity_mbps: float = 10000.0,
    cap: int = DEFAULT_PATH_CAP,
) -> SessionWiring:
    """Wire one session: member up/down flows, then inter-relay flows.

    ``assignments`` maps region_id to its relay satellite (None marks an
    infeasible region).  Allocation order is regions ascending, members
    ascending, then ordered region pairs lexicographically; failures are
    collected rather than raised so one stuck member cannot stall the
    rest of the session.
    """
    wiring = SessionWiring()
    ordered = sorted(regions, key=lambda r: r.region_id)

    for region in ordered:
        relay = assignments.get(region.region_id)
        for member in region.members:
            if relay is None:
                for tag in ("upstream", "downstream"):
                    wiring.failures.append(
                        AllocationFailure(member.user_id, member.user_id, tag, "no feasible relay")
                    )
                continue
            try:
                wiring.flows.append(
                    allocate(graph, member.user_id, relay, member.up_bw_mbps, "upstream", cap)
                )
            except NoFeasiblePath as exc:
                wiring.failures.append(
                    AllocationFailure(member.user_id, relay, "upstream", str(exc))
                )
            try:
                wiring.flows.append(
                    allocate(graph, relay, member.user_id, member.down_bw_mbps, "downstream", cap)
                )
            except NoFeasiblePath as exc:
                wiring.failures.append(
                    AllocationFailure(relay, member.user_id, "downstream", str(exc))
                )

    if demands is None:
        demands = inter_region_demands(session, ordered, isl_capacity_mbps)
    for demand in demands:
        src_relay = assignments.get(demand.src_region)
        dst_relay = assignments.get(demand.dst_region)
        if src_relay is None or dst_relay is None:
            continue  # already reported against the members
        if src_relay == dst_relay:
            continue  # co-located regions exchange traffic on the relay
        try:
            wiring.flows.append(
                allocate(graph, src_relay, dst_relay, demand.bandwidth_mbps, "inter-relay", cap)
            )
        except NoFeasiblePath as exc:
            wiring.failures.append(
                AllocationFailure(src_relay, dst_relay, "inter-relay", str(exc))
            )
    return wiring

"""Per-slot network graph: +Grid ISLs, user uplinks, capacity bookkeeping.

The graph is rebuilt from scratch each slot; reservations and link
activations never survive a rebuild.  ``reserve`` is transactional: it
either applies fully or leaves the graph untouched.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .constellation import (
    ISL_CLEARANCE_KM,
    MIN_ELEVATION_DEG,
    GroundPoint,
    SatelliteState,
    ShellConfig,
    ground_to_ecef,
    propagation_latency,
    segment_clearance_km,
    grid_neighbors,
)


class NodeId(NamedTuple):
    """Graph node handle; sorts satellites before users, then by index."""

    kind: str
    index: int

    def __str__(self) -> str:
        return f"{self.kind}:{self.index}"


def sat_node(index: int) -> NodeId:
    return NodeId("sat", index)


def user_node(index: int) -> NodeId:
    return NodeId("user", index)


@dataclass(frozen=True)
class GraphParams:
    """Link budgets and admission thresholds for one slot graph."""

    max_active_isl: int = 4
    isl_capacity_mbps: float = 10000.0
    usl_capacity_mbps: float = 5.0
    min_elevation_deg: float = MIN_ELEVATION_DEG
    isl_clearance_km: float = ISL_CLEARANCE_KM

    def __post_init__(self) -> None:
        if self.max_active_isl < 0:
            raise ValueError("max_active_isl must be non-negative")
        if self.isl_capacity_mbps <= 0 or self.usl_capacity_mbps <= 0:
            raise ValueError("capacities must be positive")


@dataclass
class LinkState:
    """Bidirectional link; each direction has its own residual pool.

    Upstream and downstream have the same capacity per link, tracked
    separately per traversal direction (a->b and b->a).  Activation is a
    property of the link, not of a direction.
    """

    a: NodeId
    b: NodeId
    kind: str  # "isl" | "usl"
    latency_ms: float
    capacity_mbps: float
    remaining_ab_mbps: float | None = None
    remaining_ba_mbps: float | None = None
    activated: bool = False

    def __post_init__(self) -> None:
        if self.remaining_ab_mbps is None:
            self.remaining_ab_mbps = self.capacity_mbps
        if self.remaining_ba_mbps is None:
            self.remaining_ba_mbps = self.capacity_mbps

    def key(self) -> tuple[NodeId, NodeId]:
        return (self.a, self.b)

    def remaining_toward(self, src: NodeId, dst: NodeId) -> float:
        if (src, dst) == (self.a, self.b):
            return self.remaining_ab_mbps
        if (dst, src) == (self.a, self.b):
            return self.remaining_ba_mbps
        raise ValueError(f"link {self.a}--{self.b} does not join {src} and {dst}")


@dataclass(frozen=True)
class FlowRecord:
    """One reserved unicast flow, stored as its directed hop sequence."""

    src: NodeId
    dst: NodeId
    hops: tuple[tuple[NodeId, NodeId], ...]
    bandwidth_mbps: float
    direction_tag: str  # "upstream" | "downstream" | "inter-relay"
    latency_ms: float

    def nodes(self) -> tuple[NodeId, ...]:
        return (self.src,) + tuple(h[1] for h in self.hops)


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str


@dataclass
class ConstraintReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations


class CapacityExceeded(Exception):
    """A link on the requested path lacks residual bandwidth."""


class IslBudgetExceeded(Exception):
    """Activating the path would push a satellite past its ISL budget."""


def _norm_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a <= b else (b, a)


class NetworkGraph:
    """Snapshot graph over satellites and joined users for one slot."""

    def __init__(
        self,
        positions: dict[NodeId, np.ndarray],
        links: Iterable[LinkState],
        max_active_isl: int,
    ) -> None:
        self.nodes: tuple[NodeId, ...] = tuple(sorted(positions))
        self.index: dict[NodeId, int] = {n: i for i, n in enumerate(self.nodes)}
        self._positions = {n: np.asarray(p, dtype=float) for n, p in positions.items()}
        self.max_active_isl = max_active_isl
        self.links: dict[tuple[NodeId, NodeId], LinkState] = {}
        self.flows: list[FlowRecord] = []
        adj: dict[NodeId, list[NodeId]] = {n: [] for n in self.nodes}
        for link in links:
            key = _norm_key(link.a, link.b)
            if key in self.links:
                raise ValueError(f"duplicate link {key[0]}--{key[1]}")
            if link.a not in self.index or link.b not in self.index:
                raise ValueError("link endpoint missing from node set")
            if (link.a, link.b) != key:
                link.a, link.b = key
                link.remaining_ab_mbps, link.remaining_ba_mbps = (
                    link.remaining_ba_mbps,
                    link.remaining_ab_mbps,
                )
            self.links[key] = link
            adj[key[0]].append(key[1])
            adj[key[1]].append(key[0])
        self._adj = {n: sorted(nbrs) for n, nbrs in adj.items()}
        # Integer adjacency mirrors the NodeId lists; path search hot loops
        # run on these.
        self._adj_idx: list[list[int]] = [
            [self.index[m] for m in self._adj[n]] for n in self.nodes
        ]
        # Ground users never forward traffic; traversals treat them as
        # leaves (path endpoints only).
        self._is_user: list[bool] = [n.kind == "user" for n in self.nodes]
        self._active_isl: Counter[NodeId] = Counter()

    # -- inspection ----------------------------------------------------

    def neighbors(self, node: NodeId) -> list[NodeId]:
        return list(self._adj[node])

    def has_link(self, a: NodeId, b: NodeId) -> bool:
        return _norm_key(a, b) in self.links

    def link(self, a: NodeId, b: NodeId) -> LinkState:
        return self.links[_norm_key(a, b)]

    def position(self, node: NodeId) -> np.ndarray:
        return self._positions[node]

    def satellites(self) -> list[NodeId]:
        return [n for n in self.nodes if n.kind == "sat"]

    def users(self) -> list[NodeId]:
        return [n for n in self.nodes if n.kind == "user"]

    def active_isl_count(self, node: NodeId) -> int:
        return self._active_isl[node]

    # -- mutation ------------------------------------------------------

    def reserve(self, path: Sequence[NodeId], bandwidth_mbps: float) -> None:
        """Reserve ``bandwidth_mbps`` along a directed node path, atomically.

        Each hop draws from the residual pool of its traversal direction
        only.  Raises CapacityExceeded or IslBudgetExceeded with no state
        change when any hop cannot take the demand.
        """
        if len(path) < 2:
            raise ValueError("path needs at least two nodes")
        if bandwidth_mbps <= 0:
            raise ValueError("bandwidth must be positive")
        # Demand per (link, direction); forward means the hop runs a->b
        # in the link's normalized orientation.
        demand: Counter[tuple[tuple[NodeId, NodeId], bool]] = Counter()
        for a, b in zip(path, path[1:]):
            key = _norm_key(a, b)
            if key not in self.links:
                raise ValueError(f"no link {a}--{b}")
            demand[(key, (a, b) == key)] += 1

        for (key, forward), count in demand.items():
            link = self.links[key]
            remaining = link.remaining_ab_mbps if forward else link.remaining_ba_mbps
            if remaining < bandwidth_mbps * count:
                raise CapacityExceeded(f"{key[0]}--{key[1]}")
        new_active: Counter[NodeId] = Counter()
        for key in {k for k, _ in demand}:
            link = self.links[key]
            if link.kind == "isl" and not link.activated:
                new_active[key[0]] += 1
                new_active[key[1]] += 1
        for node, extra in new_active.items():
            if self._active_isl[node] + extra > self.max_active_isl:
                raise IslBudgetExceeded(str(node))

        for (key, forward), count in demand.items():
            link = self.links[key]
            if forward:
                link.remaining_ab_mbps -= bandwidth_mbps * count
            else:
                link.remaining_ba_mbps -= bandwidth_mbps * count
            if not link.activated:
                link.activated = True
                if link.kind == "isl":
                    self._active_isl[key[0]] += 1
                    self._active_isl[key[1]] += 1

    # -- debugging -----------------------------------------------------

    def dump(self) -> str:
        """Deterministic text listing of nodes and link state."""
        lines = []
        for n in self.nodes:
            x, y, z = self._positions[n]
            lines.append(f"node {n} pos=({x:.3f},{y:.3f},{z:.3f})")
        for key in sorted(self.links):
            l = self.links[key]
            lines.append(
                f"link {l.a}--{l.b} kind={l.kind} latency_ms={l.latency_ms:.6f} "
                f"capacity={l.capacity_mbps:.3f} remaining_ab={l.remaining_ab_mbps:.3f} "
                f"remaining_ba={l.remaining_ba_mbps:.3f} activated={int(l.activated)}"
            )
        return "\n".join(lines) + "\n"


def build_graph(
    shell: ShellConfig,
    sats: Sequence[SatelliteState],
    users: Sequence[tuple[NodeId, GroundPoint]],
    params: GraphParams,
) -> NetworkGraph:
    """Assemble the slot graph: +Grid ISLs plus every USL above the mask."""
    positions: dict[NodeId, np.ndarray] = {}
    by_indices: dict[tuple[int, int], SatelliteState] = {}
    for s in sats:
        positions[sat_node(s.sat_id)] = s.position
        by_indices[(s.orbit_index, s.slot_index)] = s

    links: list[LinkState] = []
    for s in sats:
        for o2, i2 in grid_neighbors(s.orbit_index, s.slot_index, shell):
            other = by_indices.get((o2, i2))
            if other is None or other.sat_id <= s.sat_id:
                continue  # emit each undirected edge once
            clearance = segment_clearance_km(s.position, other.position)
            if clearance < shell.earth_radius_km + params.isl_clearance_km:
                continue
            links.append(
                LinkState(
                    a=sat_node(s.sat_id),
                    b=sat_node(other.sat_id),
                    kind="isl",
                    latency_ms=propagation_latency(s.position, other.position),
                    capacity_mbps=params.isl_capacity_mbps,
                )
            )

    if users:
        user_ids = [uid for uid, _ in users]
        upos = np.stack([ground_to_ecef(gp, shell.earth_radius_km) for _, gp in users])
        spos = np.stack([s.position for s in sats])
        for uid, up in zip(user_ids, upos):
            positions[uid] = up
        # Vectorised elevation mask over the user x satellite grid.
        diff = spos[None, :, :] - upos[:, None, :]
        dist = np.linalg.norm(diff, axis=2)
        unorm = np.linalg.norm(upos, axis=1)
        sin_el = np.einsum("usk,uk->us", diff, upos) / (dist * unorm[:, None])
        elev = np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))
        visible = elev >= params.min_elevation_deg
        for ui, (uid, _) in enumerate(users):
            for si in np.nonzero(visible[ui])[0]:
                links.append(
                    LinkState(
                        a=uid,
                        b=sat_node(sats[si].sat_id),
                        kind="usl",
                        latency_ms=float(dist[ui, si]) / 299792.458 * 1000.0,
                        capacity_mbps=params.usl_capacity_mbps,
                    )
                )

    return NetworkGraph(positions, links, params.max_active_isl)


def audit_constraints(graph: NetworkGraph, flows: Sequence[FlowRecord]) -> ConstraintReport:
    """Re-derive every constraint from raw state; empty report means clean.

    Checks, in order: per-satellite activated-ISL budget, per-flow
    conservation (contiguous simple chain from src to dst), no forwarding
    through user nodes, per-hop link visibility and activation, and
    per-link capacity against the sum of all flow reservations.
    """
    report = ConstraintReport()

    active: Counter[NodeId] = Counter()
    for link in graph.links.values():
        if link.kind == "isl" and link.activated:
            active[link.a] += 1
            active[link.b] += 1
    for node in sorted(active):
        if active[node] > graph.max_active_isl:
            report.violations.append(
                Violation(
                    kind="isl_budget",
                    subject=str(node),
                    detail=f"{active[node]} activated ISLs > budget {graph.max_active_isl}",
                )
            )

    for fi, flow in enumerate(flows):
        label = f"flow[{fi}] {flow.src}->{flow.dst} ({flow.direction_tag})"
        if not flow.hops:
            report.violations.append(
                Violation("flow_conservation", label, "flow has no hops")
            )
            continue
        if flow.hops[0][0] != flow.src or flow.hops[-1][1] != flow.dst:
            report.violations.append(
                Violation("flow_conservation", label, "endpoints do not match hops")
            )
        broken = any(h0[1] != h1[0] for h0, h1 in zip(flow.hops, flow.hops[1:]))
        if broken:
            report.violations.append(
                Violation("flow_conservation", label, "hop chain is not contiguous")
            )
        nodes = flow.nodes()
        if len(set(nodes)) != len(nodes):
            report.violations.append(
                Violation("flow_conservation", label, "path revisits a node")
            )
        for transit in nodes[1:-1]:
            if transit.kind == "user":
                report.violations.append(
                    Violation("user_transit", label, f"path forwards through {transit}")
                )
        for a, b in flow.hops:
            if not graph.has_link(a, b):
                report.violations.append(
                    Violation("visibility", label, f"no link {a}--{b} in graph")
                )
                continue
            if not graph.link(a, b).activated:
                report.violations.append(
                    Violation("activation", label, f"link {a}--{b} carries flow while deactivated")
                )

    # Capacity: accumulate reserved bandwidth per link direction across
    # all flows; the cap binds each traversal direction separately.
    reserved: dict[tuple[NodeId, NodeId], float] = {}
    for flow in flows:
        for a, b in flow.hops:
            if _norm_key(a, b) in graph.links:
                reserved[(a, b)] = reserved.get((a, b), 0.0) + flow.bandwidth_mbps
    for (a, b) in sorted(reserved):
        link = graph.links[_norm_key(a, b)]
        if reserved[(a, b)] > link.capacity_mbps + 1e-9:
            report.violations.append(
                Violation(
                    kind="capacity",
                    subject=f"{a}->{b}",
                    detail=f"reserved {reserved[(a, b)]:.6f} Mbps > capacity {link.capacity_mbps:.6f}",
                )
            )

    return report


def hop_distances(graph: NetworkGraph, target: NodeId, stop_node: NodeId | None = None) -> list[int]:
    """BFS hop counts from every node to ``target`` (-1 when unreachable).

    Distances count paths whose interior nodes are all satellites: user
    nodes are labelled when reached but never expanded, except the target
    itself.  When ``stop_node`` is given the search stops expanding past
    its depth; every node at most that deep is labelled, deeper ones may
    stay -1.
    """
    n = len(graph.nodes)
    dist = [-1] * n
    t = graph.index[target]
    dist[t] = 0
    q: deque[int] = deque([t])
    limit = None
    stop_idx = graph.index[stop_node] if stop_node is not None else None
    adj = graph._adj_idx
    is_user = graph._is_user
    while q:
        cur = q.popleft()
        d = dist[cur]
        if limit is not None and d >= limit:
            continue
        if stop_idx is not None and cur == stop_idx:
            limit = d
            continue
        if is_user[cur] and cur != t:
            continue
        for nb in adj[cur]:
            if dist[nb] < 0:
                dist[nb] = d + 1
                q.append(nb)
    return dist

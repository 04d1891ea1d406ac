"""Per-region ingress relay selection with handover damping.

Each slot, every region picks the satellite minimizing a weighted sum of
mean member latency and its mean absolute deviation, searched over the k
satellites nearest the region centroid.  A region keeps its previous
relay while the ideal pick stays within the handover threshold and no
member joined during the slot.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .constellation import EARTH_RADIUS_KM, GroundPoint, great_circle_km, ground_to_ecef
from .regions import Region
from .sessions import Session
from .topology import NetworkGraph, NodeId


class NoFeasibleRelay(Exception):
    """Every candidate satellite failed the reachability screen."""


@dataclass(frozen=True)
class SelectionParams:
    """Knobs for candidate search and handover damping."""

    k: int = 5
    delta_km: float = 1000.0
    alpha: float = 5.0
    slot_duration_s: float = 15.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.delta_km <= 0:
            raise ValueError("delta_km must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.slot_duration_s <= 0:
            raise ValueError("slot_duration_s must be positive")


@dataclass(frozen=True)
class RelayAssignment:
    """One region's relay decision for one slot.

    ``relay`` is None when no candidate could reach every member; such
    regions are reported, not wired.  ``centroid`` is kept so the next
    slot can match this region after the roster is re-partitioned.
    """

    session_id: int
    region_id: int
    relay: NodeId | None
    slot_index: int
    previous_relay: NodeId | None
    handover: bool
    centroid: GroundPoint
    feasible: bool


def region_centroid(region: Region) -> GroundPoint:
    """Surface projection of the mean member unit vector.

    Perfectly antipodal memberships leave no usable mean direction; the
    first member's location stands in for that degenerate case.
    """
    members = region.members
    if not members:
        raise ValueError("region has no members")
    if len(members) == 1:
        only = members[0].location
        return GroundPoint(only.lat_deg, only.lon_deg)
    vecs = [ground_to_ecef(GroundPoint(m.location.lat_deg, m.location.lon_deg), 1.0)
            for m in members]
    mean = np.mean(vecs, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-9:
        first = members[0].location
        return GroundPoint(first.lat_deg, first.lon_deg)
    unit = mean / norm
    lat = math.degrees(math.asin(max(-1.0, min(1.0, float(unit[2])))))
    lon = math.degrees(math.atan2(float(unit[1]), float(unit[0])))
    return GroundPoint(lat, lon)


def top_k_candidates(
    centroid: GroundPoint,
    sats: Iterable[tuple[NodeId, np.ndarray]],
    k: int,
) -> list[NodeId]:
    """The k satellites nearest the centroid's surface point, ascending.

    Distance is straight-line 3D; exact ties fall back to ascending id.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    anchor = ground_to_ecef(centroid)
    ranked = sorted(
        (float(np.linalg.norm(np.asarray(pos, dtype=float) - anchor)), node)
        for node, pos in sats
    )
    return [node for _, node in ranked[:k]]


def probe_latencies(
    graph: NetworkGraph,
    source: NodeId,
    targets: Sequence[NodeId],
) -> dict[NodeId, float]:
    """Latency of the hop-shortest path from ``source`` to each target.

    Among minimum-hop paths the cheapest total latency wins; capacity
    and activation state are ignored (this is a scoring probe, not an
    allocation).  Paths never forward through a user node, so users are
    reached but not expanded.  Unreachable targets map to +inf.
    """
    index = graph.index
    nodes = graph.nodes
    adj = graph._adj_idx
    links = graph.links
    is_user = graph._is_user
    src = index[source]
    best: dict[int, tuple[int, float]] = {src: (0, 0.0)}
    heap: list[tuple[int, float, int]] = [(0, 0.0, src)]
    want = {index[t] for t in targets}
    done: dict[int, float] = {}
    while heap and want:
        hops, lat, cur = heapq.heappop(heap)
        if best.get(cur, (math.inf, math.inf)) < (hops, lat):
            continue
        if cur in want:
            want.discard(cur)
            done[cur] = lat
        if is_user[cur] and cur != src:
            continue
        cur_node = nodes[cur]
        for nb in adj[cur]:
            nb_node = nodes[nb]
            key = (cur_node, nb_node) if cur_node <= nb_node else (nb_node, cur_node)
            step = (hops + 1, lat + links[key].latency_ms)
            if step < best.get(nb, (math.inf, math.inf)):
                best[nb] = step
                heapq.heappush(heap, (step[0], step[1], nb))
    return {t: done.get(index[t], math.inf) for t in targets}


def score_candidate(
    cu: NodeId,
    region: Region,
    graph: NetworkGraph,
    alpha: float,
) -> float:
    """Mean member-to-candidate latency plus alpha times its spread.

    Spread is the mean absolute deviation.  Any unreachable member makes
    the candidate unusable: +inf.
    """
    member_ids = [m.user_id for m in region.members]
    if not member_ids:
        raise ValueError("region has no members")
    probes = probe_latencies(graph, cu, member_ids)
    t = [probes[m] for m in member_ids]
    if any(math.isinf(x) for x in t):
        return math.inf
    mean = sum(t) / len(t)
    mad = sum(abs(x - mean) for x in t) / len(t)
    return mean + alpha * mad


def _match_previous(
    regions: Sequence[Region],
    centroids: dict[int, GroundPoint],
    prev: Sequence[RelayAssignment],
    match_radius_km: float,
) -> dict[int, RelayAssignment]:
    """Map current region ids to last slot's assignments by centroid.

    Each previous assignment claims the nearest current centroid within
    the radius; a region claimed twice keeps the closest claimant (ties
    by the older region id).  Unclaimed regions count as new.
    """
    claims: dict[int, tuple[float, int, RelayAssignment]] = {}
    for pa in prev:
        if pa.relay is None:
            continue
        ranked = sorted(
            (great_circle_km(pa.centroid, centroids[r.region_id]), r.region_id)
            for r in regions
        )
        if not ranked or ranked[0][0] > match_radius_km:
            continue
        dist, rid = ranked[0]
        incumbent = claims.get(rid)
        if incumbent is None or (dist, pa.region_id) < (incumbent[0], incumbent[1]):
            claims[rid] = (dist, pa.region_id, pa)
    return {rid: pa for rid, (_, _, pa) in claims.items()}


def _has_new_attendee(region: Region, slot_index: int, slot_duration_s: float) -> bool:
    # A member counts as new when it joined inside this slot's window
    # (t - duration, t].
    t_now = slot_index * slot_duration_s
    return any(t_now - slot_duration_s < m.join_time_s <= t_now for m in region.members)


def select_relays(
    session_regions: Sequence[tuple[Session, Sequence[Region]]],
    graph: NetworkGraph,
    params: SelectionParams,
    prev: Sequence[RelayAssignment] = (),
    slot_index: int = 0,
    match_radius_km: float = 1000.0,
) -> list[RelayAssignment]:
    """Assign a relay to every region of every session for this slot.

    The ideal relay is the argmin of score_candidate over the k nearest
    satellites (ties to the lowest id).  A matched previous relay is
    kept when its current position sits within delta_km of the ideal's
    and no member joined during the slot; otherwise the ideal takes
    over with handover = True.  Regions with no reachable candidate get
    relay = None and feasible = False.
    """
    sat_positions = [(n, graph.position(n)) for n in graph.satellites()]
    if not sat_positions:
        raise ValueError("graph has no satellites")
    prev_by_session: dict[int, list[RelayAssignment]] = {}
    for pa in prev:
        prev_by_session.setdefault(pa.session_id, []).append(pa)

    out: list[RelayAssignment] = []
    for session, regions in sorted(session_regions, key=lambda sr: sr[0].session_id):
        regions = sorted(regions, key=lambda r: r.region_id)
        centroids = {r.region_id: region_centroid(r) for r in regions}
        matched = _match_previous(
            regions,
            centroids,
            prev_by_session.get(session.session_id, ()),
            match_radius_km,
        )
        for region in regions:
            centroid = centroids[region.region_id]
            prior = matched.get(region.region_id)
            prior_relay = prior.relay if prior is not None else None
            candidates = top_k_candidates(centroid, sat_positions, params.k)
            scored = [
                (score_candidate(cu, region, graph, params.alpha), cu)
                for cu in candidates
            ]
            finite = [(s, cu) for s, cu in scored if math.isfinite(s)]
            if not finite:
                out.append(
                    RelayAssignment(
                        session_id=session.session_id,
                        region_id=region.region_id,
                        relay=None,
                        slot_index=slot_index,
                        previous_relay=prior_relay,
                        handover=False,
                        centroid=centroid,
                        feasible=False,
                    )
                )
                continue
            ideal = min(finite)[1]
            relay = ideal
            handover = True
            if prior_relay is not None:
                drift = float(
                    np.linalg.norm(graph.position(ideal) - graph.position(prior_relay))
                )
                if drift < params.delta_km and not _has_new_attendee(
                    region, slot_index, params.slot_duration_s
                ):
                    relay = prior_relay
                    handover = False
            feasible = relay == ideal or _reachable_by_any(graph, relay, region)
            out.append(
                RelayAssignment(
                    session_id=session.session_id,
                    region_id=region.region_id,
                    relay=relay,
                    slot_index=slot_index,
                    previous_relay=prior_relay,
                    handover=handover,
                    centroid=centroid,
                    feasible=feasible,
                )
            )
    return out


def _reachable_by_any(graph: NetworkGraph, relay: NodeId, region: Region) -> bool:
    member_ids = [m.user_id for m in region.members]
    probes = probe_latencies(graph, relay, member_ids)
    return any(math.isfinite(v) for v in probes.values())

"""Comparison schemes: one shared satellite unit, and cloud-only relays.

spacertc_select mirrors the single-control-unit design: the whole
session shares one satellite picked by the same score used for region
relays.  via_select never touches the constellation; users reach a
terrestrial site over a stretched great-circle fiber model and site
choice leans on exponentially smoothed per-session history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constellation import GroundPoint, LIGHT_SPEED_KM_S, great_circle_km
from .flows import SessionWiring, wire_session
from .regions import Region
from .relays import SelectionParams, region_centroid, score_candidate, top_k_candidates
from .sessions import Session
from .topology import FlowRecord, NetworkGraph, NodeId
from .worldgrid import default_city_sites

FIBER_PATH_STRETCH = 1.3
FIBER_SPEED_FRACTION = 0.7
VIA_SMOOTHING = 0.5


@dataclass
class CloudSite:
    """A fixed terrestrial relay location with per-session history."""

    site_id: int
    name: str
    location: GroundPoint
    history: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SpacertcResult:
    session_id: int
    relay: NodeId | None
    feasible: bool
    wiring: SessionWiring


@dataclass(frozen=True)
class ViaResult:
    session_id: int
    site_id: int
    mean_latency_ms: float
    flows: tuple[FlowRecord, ...]


def site_node(site_id: int) -> NodeId:
    return NodeId("site", site_id)


def default_cloud_sites() -> list[CloudSite]:
    """The bundled major-city locations as fresh cloud sites."""
    return [
        CloudSite(site_id=i, name=name, location=loc)
        for i, (name, loc) in enumerate(default_city_sites())
    ]


def fiber_latency_ms(
    a: GroundPoint,
    b: GroundPoint,
    path_stretch: float = FIBER_PATH_STRETCH,
    speed_fraction: float = FIBER_SPEED_FRACTION,
) -> float:
    """Terrestrial one-way latency: stretched great circle in slow glass."""
    if path_stretch < 1.0:
        raise ValueError("path_stretch must be at least 1")
    if not 0.0 < speed_fraction <= 1.0:
        raise ValueError("speed_fraction must be in (0, 1]")
    km = great_circle_km(a, b) * path_stretch
    return km / (speed_fraction * LIGHT_SPEED_KM_S) * 1000.0


def spacertc_select(
    session: Session,
    graph: NetworkGraph,
    params: SelectionParams,
) -> SpacertcResult:
    """One control unit for the whole session, then per-member wiring.

    Candidates are the k satellites nearest the session centroid; the
    winner minimizes the same mean-plus-spread score the region scheme
    uses.  No inter-relay flows exist since everyone shares the unit.
    """
    if not session.members:
        raise ValueError("session has no members")
    whole = Region(region_id=0, session_id=session.session_id, members=session.members)
    centroid = region_centroid(whole)
    sat_positions = [(n, graph.position(n)) for n in graph.satellites()]
    candidates = top_k_candidates(centroid, sat_positions, params.k)
    scored = sorted(
        (score_candidate(cu, whole, graph, params.alpha), cu) for cu in candidates
    )
    best_score, best = scored[0]
    if best_score == float("inf"):
        wiring = wire_session(graph, session, [whole], {0: None})
        return SpacertcResult(session.session_id, None, False, wiring)
    wiring = wire_session(graph, session, [whole], {0: best})
    return SpacertcResult(session.session_id, best, True, wiring)


def via_select(
    session: Session,
    sites: list[CloudSite],
    k: int,
    path_stretch: float = FIBER_PATH_STRETCH,
    smoothing: float = VIA_SMOOTHING,
) -> ViaResult:
    """Pick a cloud site from history, measure it, refresh the history.

    Candidates are the k sites with the best smoothed record for this
    session; with no record yet, the k nearest the session centroid.
    The winner minimizes the current measured mean member latency.
    Every evaluated candidate's history moves toward its measurement by
    the smoothing factor.
    """
    if not sites:
        raise ValueError("no cloud sites configured")
    if not 0.0 < smoothing <= 1.0:
        raise ValueError("smoothing must be in (0, 1]")
    sid = session.session_id
    whole = Region(region_id=0, session_id=sid, members=session.members)
    centroid = region_centroid(whole)

    def distance_rank(site: CloudSite) -> tuple[float, int]:
        return (great_circle_km(centroid, site.location), site.site_id)

    recorded = [s for s in sites if sid in s.history]
    if recorded:
        ranked = sorted(
            sites,
            key=lambda s: (s.history.get(sid, float("inf")),) + distance_rank(s),
        )
    else:
        ranked = sorted(sites, key=distance_rank)
    candidates = ranked[: max(1, k)]

    def measured_mean(site: CloudSite) -> float:
        lats = [
            fiber_latency_ms(m.location, site.location, path_stretch)
            for m in session.members
        ]
        return sum(lats) / len(lats)

    means = {s.site_id: measured_mean(s) for s in candidates}
    winner = min(candidates, key=lambda s: (means[s.site_id], s.site_id))
    for s in candidates:
        old = s.history.get(sid)
        new = means[s.site_id]
        s.history[sid] = new if old is None else (1 - smoothing) * old + smoothing * new

    flows = []
    for m in session.members:
        leg = fiber_latency_ms(m.location, winner.location, path_stretch)
        anchor = site_node(winner.site_id)
        flows.append(
            FlowRecord(
                src=m.user_id,
                dst=anchor,
                hops=((m.user_id, anchor),),
                bandwidth_mbps=m.up_bw_mbps,
                direction_tag="upstream",
                latency_ms=leg,
            )
        )
        flows.append(
            FlowRecord(
                src=anchor,
                dst=m.user_id,
                hops=((anchor, m.user_id),),
                bandwidth_mbps=m.down_bw_mbps,
                direction_tag="downstream",
                latency_ms=leg,
            )
        )
    return ViaResult(
        session_id=sid,
        site_id=winner.site_id,
        mean_latency_ms=means[winner.site_id],
        flows=tuple(flows),
    )

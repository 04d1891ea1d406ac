"""Shared builders for hand-made and randomised test graphs."""

from __future__ import annotations

import numpy as np

from leorelay.topology import LinkState, NetworkGraph, NodeId, sat_node, user_node


def make_graph(
    edges,
    positions=None,
    max_active_isl: int = 4,
    default_capacity: float = 100.0,
):
    """Build a NetworkGraph from compact edge tuples.

    Each edge is (a, b, latency_ms) or (a, b, latency_ms, capacity) or
    (a, b, latency_ms, capacity, kind).  Kind defaults to "isl" between
    satellites and "usl" otherwise.  Positions default to distinct points
    on the x axis unless given explicitly.
    """
    links = []
    nodes: set[NodeId] = set()
    for spec in edges:
        a, b, latency = spec[0], spec[1], spec[2]
        capacity = spec[3] if len(spec) > 3 else default_capacity
        kind = spec[4] if len(spec) > 4 else (
            "isl" if a.kind == "sat" and b.kind == "sat" else "usl"
        )
        nodes.update((a, b))
        links.append(
            LinkState(
                a=a,
                b=b,
                kind=kind,
                latency_ms=latency,
                capacity_mbps=capacity,
            )
        )
    pos = dict(positions or {})
    for i, n in enumerate(sorted(nodes)):
        pos.setdefault(n, np.array([float(i), 0.0, 0.0]))
    return NetworkGraph(pos, links, max_active_isl)


def random_tiny_graph(rng: np.random.Generator, max_nodes: int = 10):
    """Random connected-ish sparse graph over a few sats and users.

    Returns (graph, sat_ids, user_ids).  Latencies are positive floats;
    a random subset of ISLs starts activated via direct state pokes so
    path scoring sees a mixed activation picture.
    """
    n_sats = int(rng.integers(2, max(3, max_nodes - 2)))
    n_users = int(rng.integers(1, max(2, max_nodes - n_sats)))
    sats = [sat_node(i) for i in range(n_sats)]
    users = [user_node(i) for i in range(n_users)]

    edges = []
    seen = set()
    # Satellite backbone: random tree plus extra chords.
    for i in range(1, n_sats):
        j = int(rng.integers(0, i))
        seen.add((j, i))
    extra = int(rng.integers(0, n_sats))
    for _ in range(extra):
        i, j = sorted(rng.choice(n_sats, size=2, replace=False).tolist())
        seen.add((i, j))
    for i, j in sorted(seen):
        edges.append((sats[i], sats[j], float(rng.uniform(1.0, 5.0)), 50.0, "isl"))
    # Every user gets one to three uplinks.
    for u in users:
        k = int(rng.integers(1, min(3, n_sats) + 1))
        for si in sorted(rng.choice(n_sats, size=k, replace=False).tolist()):
            edges.append((u, sats[si], float(rng.uniform(1.0, 5.0)), 10.0, "usl"))

    graph = make_graph(edges, max_active_isl=int(rng.integers(1, 5)))
    for key in sorted(graph.links):
        link = graph.links[key]
        if link.kind == "isl" and rng.random() < 0.35:
            if (
                graph.active_isl_count(link.a) < graph.max_active_isl
                and graph.active_isl_count(link.b) < graph.max_active_isl
            ):
                link.activated = True
                graph._active_isl[link.a] += 1
                graph._active_isl[link.b] += 1
    return graph, sats, users

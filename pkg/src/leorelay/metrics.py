"""Pairwise latency accounting and session-level objective values.

A user pair's one-way latency is the sum of three allocated legs:
uplink to the source's relay, relay-to-relay (zero when shared), and
downlink from the destination's relay.  Unordered pair entries average
the two directions.  Pairs with any missing leg are excluded from the
statistics and counted, never imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .sessions import Session
from .topology import FlowRecord, NodeId


class MissingFlow(Exception):
    """A leg needed for a pair latency was never allocated."""


class EmptySample(Exception):
    """Distribution statistics need at least one sample."""


@dataclass(frozen=True)
class LatencyMatrix:
    """Per-session pair latencies with row and session means.

    ``entries`` maps unordered user-id pairs (low, high) to the mean of
    the two directed latencies.  ``per_user_mean`` holds t_i, the mean
    outbound latency of user i over its feasible partners.  Users with
    no feasible partner are absent.
    """

    session_id: int
    entries: Mapping[tuple[NodeId, NodeId], float]
    per_user_mean: Mapping[NodeId, float]
    session_mean: float
    infeasible_pairs: int


@dataclass(frozen=True)
class ObjectiveValue:
    session_id: int
    alpha: float
    value: float


@dataclass(frozen=True)
class DistributionStats:
    count: int
    mean: float
    median: float
    q1: float
    q3: float
    iqr: float
    cdf: tuple[tuple[float, float], ...]


class _FlowIndex:
    """O(1) leg lookup over one session's flow records."""

    def __init__(self, flows: Iterable[FlowRecord]) -> None:
        self.up: dict[NodeId, FlowRecord] = {}
        self.down: dict[NodeId, FlowRecord] = {}
        self.inter: dict[tuple[NodeId, NodeId], FlowRecord] = {}
        # First allocation wins: two regions sharing a relay can both
        # exchange with a third, yielding twin legs between one relay
        # pair; the earliest allocated leg prices the pair.
        for f in flows:
            if f.direction_tag == "upstream":
                self.up.setdefault(f.src, f)
            elif f.direction_tag == "downstream":
                self.down.setdefault(f.dst, f)
            elif f.direction_tag == "inter-relay":
                self.inter.setdefault((f.src, f.dst), f)

    def directed_latency(self, i: NodeId, j: NodeId) -> float:
        up = self.up.get(i)
        if up is None:
            raise MissingFlow(f"no upstream flow for {i}")
        down = self.down.get(j)
        if down is None:
            raise MissingFlow(f"no downstream flow for {j}")
        relay_i, relay_j = up.dst, down.src
        if relay_i == relay_j:
            bridge = 0.0
        else:
            inter = self.inter.get((relay_i, relay_j))
            if inter is None:
                raise MissingFlow(f"no inter-relay flow {relay_i}->{relay_j}")
            bridge = inter.latency_ms
        return up.latency_ms + bridge + down.latency_ms


def pair_latency(flows: Iterable[FlowRecord], i: NodeId, j: NodeId) -> float:
    """One-way latency from user i to user j over allocated legs."""
    if i == j:
        raise ValueError("pair latency needs two distinct users")
    return _FlowIndex(flows).directed_latency(i, j)


def latency_matrix(session: Session, flows: Iterable[FlowRecord]) -> LatencyMatrix:
    """All unordered pair entries for one session.

    Each entry is the mean of the two directed latencies; a pair with
    either direction unallocated is infeasible and only counted.
    """
    index = _FlowIndex(flows)
    ids = [m.user_id for m in session.members]
    entries: dict[tuple[NodeId, NodeId], float] = {}
    outbound: dict[NodeId, list[float]] = {u: [] for u in ids}
    infeasible = 0
    for a_pos, i in enumerate(ids):
        for j in ids[a_pos + 1 :]:
            try:
                forward = index.directed_latency(i, j)
                backward = index.directed_latency(j, i)
            except MissingFlow:
                infeasible += 1
                continue
            entries[(i, j) if i <= j else (j, i)] = (forward + backward) / 2.0
            outbound[i].append(forward)
            outbound[j].append(backward)
    per_user = {u: sum(v) / len(v) for u, v in outbound.items() if v}
    mean = sum(entries.values()) / len(entries) if entries else math.nan
    return LatencyMatrix(
        session_id=session.session_id,
        entries=entries,
        per_user_mean=per_user,
        session_mean=mean,
        infeasible_pairs=infeasible,
    )


def session_objective(matrix: LatencyMatrix, alpha: float) -> ObjectiveValue:
    """Session mean plus alpha-weighted mean absolute deviation of t_i."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    t = list(matrix.per_user_mean.values())
    if len(t) < 2:
        raise ValueError("objective needs at least two connected users")
    t_ave = matrix.session_mean
    value = t_ave + (alpha / len(t)) * sum(abs(t_ave - ti) for ti in t)
    return ObjectiveValue(session_id=matrix.session_id, alpha=alpha, value=value)


def distribution_stats(samples: Sequence[float], cdf_points: int | None = None) -> DistributionStats:
    """Summary statistics with linearly interpolated quartiles.

    The CDF samples are the sorted values paired with their empirical
    fractions; ``cdf_points`` thins them to about that many pairs.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.size == 0:
        raise EmptySample("no latency samples")
    q1, median, q3 = np.quantile(data, [0.25, 0.5, 0.75])
    ordered = np.sort(data)
    n = ordered.size
    idx = np.arange(n)
    if cdf_points is not None and n > cdf_points > 0:
        idx = np.unique(np.linspace(0, n - 1, cdf_points).round().astype(int))
    cdf = tuple((float(ordered[i]), float((i + 1) / n)) for i in idx)
    return DistributionStats(
        count=int(n),
        mean=float(data.mean()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        iqr=float(q3 - q1),
        cdf=cdf,
    )

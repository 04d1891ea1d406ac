"""User and session synthesis: population-weighted placement, arrivals.

Generation is a pure function of (inputs, seed); the roster at a given
time is just the subset of users whose join time has passed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import GroundPoint
from .topology import NodeId, user_node


class EmptyModel(Exception):
    """Population model has no cells or no weight to sample from."""


@dataclass(frozen=True)
class PopulationCell:
    """Rectangular lat/lon cell with a relative population weight."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    weight: float

    def __post_init__(self) -> None:
        if self.lat_min >= self.lat_max or self.lon_min >= self.lon_max:
            raise ValueError("degenerate cell bounds")
        if not (-90.0 <= self.lat_min and self.lat_max <= 90.0):
            raise ValueError("cell latitude out of range")
        if not (-180.0 <= self.lon_min and self.lon_max <= 180.0):
            raise ValueError("cell longitude out of range")
        if self.weight < 0.0:
            raise ValueError("cell weight must be non-negative")


@dataclass(frozen=True)
class PopulationModel:
    cells: tuple[PopulationCell, ...]

    def __post_init__(self) -> None:
        if not self.cells:
            raise EmptyModel("no cells")
        if sum(c.weight for c in self.cells) <= 0.0:
            raise EmptyModel("total cell weight is zero")

    def normalized_weights(self) -> np.ndarray:
        w = np.array([c.weight for c in self.cells], dtype=float)
        return w / w.sum()


@dataclass(frozen=True)
class SessionPolicy:
    """Arrival and bandwidth policy for synthetic users."""

    horizon_s: float
    p_join: float = 0.8
    up_bw_range_mbps: tuple[float, float] = (2.0, 4.0)

    def __post_init__(self) -> None:
        if self.horizon_s <= 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.p_join <= 1.0:
            raise ValueError("p_join must be a probability")
        lo, hi = self.up_bw_range_mbps
        if lo <= 0.0 or hi < lo:
            raise ValueError("bad upstream bandwidth range")


@dataclass(frozen=True)
class User:
    user_id: NodeId
    location: GroundPoint
    up_bw_mbps: float
    down_bw_mbps: float
    join_time_s: float
    session_id: int


@dataclass(frozen=True)
class Session:
    session_id: int
    members: tuple[User, ...]  # sorted by user_id

    @property
    def size(self) -> int:
        return len(self.members)


def generate_users(
    n: int,
    model: PopulationModel,
    policy: SessionPolicy,
    seed: int,
) -> list[User]:
    """Draw ``n`` users deterministically from the given seed.

    Each user lands uniformly inside a population-weighted cell, uploads
    at a uniform rate from the policy range, joins at a uniform time in
    [0, horizon], and with probability ``p_join`` enters a uniformly
    chosen existing session instead of opening a new one.  Downstream
    reservations default to the same budget as upstream.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    weights = model.normalized_weights()
    cell_idx = rng.choice(len(model.cells), size=n, p=weights)

    lats = np.empty(n)
    lons = np.empty(n)
    for i in range(n):
        cell = model.cells[cell_idx[i]]
        lats[i] = rng.uniform(cell.lat_min, cell.lat_max)
        lons[i] = rng.uniform(cell.lon_min, cell.lon_max)

    lo, hi = policy.up_bw_range_mbps
    ups = rng.uniform(lo, hi, size=n)
    joins = rng.uniform(0.0, policy.horizon_s, size=n)

    users: list[User] = []
    session_count = 0
    for i in range(n):
        if session_count == 0 or rng.random() >= policy.p_join:
            sid = session_count
            session_count += 1
        else:
            sid = int(rng.integers(0, session_count))
        users.append(
            User(
                user_id=user_node(i),
                location=GroundPoint(float(lats[i]), float(lons[i])),
                up_bw_mbps=float(ups[i]),
                down_bw_mbps=float(ups[i]),
                join_time_s=float(joins[i]),
                session_id=sid,
            )
        )
    return users


def roster_at(users: list[User], t: float) -> list[Session]:
    """Sessions whose members have joined by time ``t`` (inclusive)."""
    grouped: dict[int, list[User]] = {}
    for u in users:
        if u.join_time_s <= t:
            grouped.setdefault(u.session_id, []).append(u)
    return [
        Session(session_id=sid, members=tuple(sorted(grouped[sid], key=lambda u: u.user_id)))
        for sid in sorted(grouped)
    ]

"""Split a session's roster into compact geographic regions.

First-fit greedy over ascending user id: a user lands in the first
region that stays within the member cap and the great-circle diameter
cap, otherwise a new region opens.  Recomputed from scratch every slot.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constellation import great_circle_km
from .sessions import Session, User


@dataclass(frozen=True)
class RegionParams:
    n_max: int = 50
    d_max_km: float = 1000.0

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if self.d_max_km <= 0.0:
            raise ValueError("d_max_km must be positive")


@dataclass(frozen=True)
class Region:
    region_id: int
    session_id: int
    members: tuple[User, ...]  # sorted by user_id

    @property
    def size(self) -> int:
        return len(self.members)


def divide(session: Session, params: RegionParams) -> list[Region]:
    """Partition the session into regions honouring both caps.

    Members are scanned in ascending user_id; placement prefers the
    lowest-numbered region that still fits.  Checking the newcomer
    against every current member keeps the pairwise diameter bounded.
    """
    buckets: list[list[User]] = []
    for user in session.members:  # already sorted by user_id
        placed = False
        for bucket in buckets:
            if len(bucket) >= params.n_max:
                continue
            if all(
                great_circle_km(user.location, other.location) <= params.d_max_km
                for other in bucket
            ):
                bucket.append(user)
                placed = True
                break
        if not placed:
            buckets.append([user])
    return [
        Region(region_id=i, session_id=session.session_id, members=tuple(bucket))
        for i, bucket in enumerate(buckets)
    ]

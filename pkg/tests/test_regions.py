"""Region divider: caps, partition properties, first-fit order."""

from __future__ import annotations

import numpy as np
import pytest

from leorelay.constellation import GroundPoint, great_circle_km
from leorelay.regions import RegionParams, divide
from leorelay.sessions import Session, User
from leorelay.topology import user_node


def _user(i: int, lat: float, lon: float, session_id: int = 0) -> User:
    return User(
        user_id=user_node(i),
        location=GroundPoint(lat, lon),
        up_bw_mbps=3.0,
        down_bw_mbps=3.0,
        join_time_s=0.0,
        session_id=session_id,
    )


def _session(users) -> Session:
    return Session(session_id=users[0].session_id, members=tuple(sorted(users, key=lambda u: u.user_id)))


def test_colocated_users_fill_regions_in_order():
    users = [_user(i, 10.0, 10.0) for i in range(120)]
    regions = divide(_session(users), RegionParams(n_max=50))
    assert [r.size for r in regions] == [50, 50, 20]
    assert [r.region_id for r in regions] == [0, 1, 2]
    # First-fit: the first 50 ids land in region 0.
    assert [u.user_id.index for u in regions[0].members] == list(range(50))


def test_partition_is_exact():
    rng = np.random.default_rng(21)
    users = [
        _user(i, float(rng.uniform(-50, 50)), float(rng.uniform(-180, 179)))
        for i in range(200)
    ]
    session = _session(users)
    regions = divide(session, RegionParams(n_max=7, d_max_km=2000.0))
    seen = [u.user_id for r in regions for u in r.members]
    assert sorted(seen) == [u.user_id for u in session.members]
    assert len(set(seen)) == len(seen)


def test_caps_hold_everywhere():
    rng = np.random.default_rng(8)
    users = [
        _user(i, float(rng.uniform(-50, 50)), float(rng.uniform(-180, 179)))
        for i in range(150)
    ]
    params = RegionParams(n_max=9, d_max_km=1500.0)
    for region in divide(_session(users), params):
        assert region.size <= params.n_max
        for a in region.members:
            for b in region.members:
                assert great_circle_km(a.location, b.location) <= params.d_max_km


def test_diameter_boundary_inclusive():
    # Two users 999.6 km apart share a region at d_max = 1000; push the cap
    # just under their separation and they split.
    a = _user(0, 0.0, 0.0)
    b = _user(1, 0.0, 8.99)
    gap = great_circle_km(a.location, b.location)
    assert 990.0 < gap < 1000.0
    together = divide(_session([a, b]), RegionParams(d_max_km=1000.0))
    assert len(together) == 1
    exact = divide(_session([a, b]), RegionParams(d_max_km=gap))
    assert len(exact) == 1
    apart = divide(_session([a, b]), RegionParams(d_max_km=gap - 1e-6))
    assert len(apart) == 2


def test_spread_users_become_singletons():
    users = [_user(i, 0.0, -150.0 + 60.0 * i) for i in range(5)]
    regions = divide(_session(users), RegionParams())
    assert [r.size for r in regions] == [1, 1, 1, 1, 1]


def test_first_fit_prefers_lowest_region():
    # u2 fits with u0 (500 km) and would also fit with u1; region 0 wins.
    u0 = _user(0, 0.0, 0.0)
    u1 = _user(1, 0.0, 20.0)
    u2 = _user(2, 0.0, 4.5)
    regions = divide(_session([u0, u1, u2]), RegionParams(d_max_km=1000.0))
    assert [[m.user_id.index for m in r.members] for r in regions] == [[0, 2], [1]]


def test_divide_is_deterministic():
    rng = np.random.default_rng(4)
    users = [
        _user(i, float(rng.uniform(-50, 50)), float(rng.uniform(-180, 179)))
        for i in range(80)
    ]
    session = _session(users)
    params = RegionParams(n_max=6, d_max_km=1200.0)
    assert divide(session, params) == divide(session, params)


def test_params_validation():
    with pytest.raises(ValueError):
        RegionParams(n_max=0)
    with pytest.raises(ValueError):
        RegionParams(d_max_km=0.0)

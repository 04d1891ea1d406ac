"""Scenario files: TOML in, validated run configuration out.

A scenario pins everything a run needs: shell geometry, link and
selection parameters, traffic shape, the scheme under test, and the
seed list.  Strict key checking turns typos into ConfigError instead
of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constellation import ShellConfig
from .regions import RegionParams
from .relays import SelectionParams
from .sessions import EmptyModel, PopulationCell, PopulationModel, SessionPolicy
from .topology import GraphParams
from .worldgrid import default_population_model

SCHEMES = ("spacemeta", "spacertc", "via")


class ConfigError(Exception):
    """The scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class Scenario:
    name: str
    scheme: str
    seeds: tuple[int, ...]
    output_dir: str
    shell: ShellConfig
    graph_params: GraphParams
    selection: SelectionParams
    region_params: RegionParams
    policy: SessionPolicy
    n_users: int
    population: PopulationModel
    via_k: int = 5
    via_path_stretch: float = 1.3
    via_smoothing: float = 0.5

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.n_users < 1:
            raise ConfigError("n_users must be at least 1")
        if self.policy.horizon_s < self.selection.slot_duration_s:
            raise ConfigError("horizon shorter than one slot: nothing to simulate")
        if self.via_k < 1:
            raise ConfigError("via_k must be at least 1")

    @property
    def num_slots(self) -> int:
        return int(self.policy.horizon_s // self.selection.slot_duration_s)

    def with_scheme(self, scheme: str) -> "Scenario":
        return dataclasses.replace(self, scheme=scheme)

    def with_alpha(self, alpha: float) -> "Scenario":
        return dataclasses.replace(
            self, selection=dataclasses.replace(self.selection, alpha=alpha)
        )

    def with_seeds(self, seeds: tuple[int, ...]) -> "Scenario":
        return dataclasses.replace(self, seeds=tuple(seeds))


def _section(data: Mapping[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return dict(raw)


def _build(cls, section_name: str, kwargs: dict[str, Any]):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section_name}]: {exc}") from exc


def parse_scenario(data: Mapping[str, Any], name: str = "scenario") -> Scenario:
    """Validate a decoded scenario mapping into a Scenario."""
    top_allowed = {
        "name", "scheme", "seeds", "output_dir",
        "shell", "graph", "selection", "regions", "traffic", "via",
    }
    unknown = set(data) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    shell = _build(ShellConfig, "shell", _section(data, "shell", {
        "num_orbits", "sats_per_orbit", "altitude_km", "inclination_deg",
        "phase_factor", "epoch_s",
    }))
    graph_params = _build(GraphParams, "graph", _section(data, "graph", {
        "max_active_isl", "isl_capacity_mbps", "usl_capacity_mbps",
        "min_elevation_deg", "isl_clearance_km",
    }))
    selection = _build(SelectionParams, "selection", _section(data, "selection", {
        "k", "delta_km", "alpha", "slot_duration_s",
    }))
    region_params = _build(RegionParams, "regions", _section(data, "regions", {
        "n_max", "d_max_km",
    }))

    traffic = _section(data, "traffic", {
        "n_users", "p_join", "horizon_s", "up_bw_range_mbps", "cells",
    })
    if "n_users" not in traffic or "horizon_s" not in traffic:
        raise ConfigError("[traffic] needs n_users and horizon_s")
    n_users = traffic.pop("n_users")
    if not isinstance(n_users, int):
        raise ConfigError("[traffic] n_users must be an integer")
    cells = traffic.pop("cells", None)
    policy_kwargs = dict(traffic)
    if "up_bw_range_mbps" in policy_kwargs:
        rng = policy_kwargs["up_bw_range_mbps"]
        if not (isinstance(rng, list) and len(rng) == 2):
            raise ConfigError("[traffic] up_bw_range_mbps must be [low, high]")
        policy_kwargs["up_bw_range_mbps"] = (float(rng[0]), float(rng[1]))
    policy = _build(SessionPolicy, "traffic", policy_kwargs)

    if cells is None:
        population = default_population_model()
    else:
        try:
            population = PopulationModel(
                cells=tuple(
                    PopulationCell(
                        lat_min=float(c[0]), lat_max=float(c[1]),
                        lon_min=float(c[2]), lon_max=float(c[3]),
                        weight=float(c[4]),
                    )
                    for c in cells
                )
            )
        except (TypeError, ValueError, IndexError, EmptyModel) as exc:
            raise ConfigError(f"invalid [traffic] cells: {exc}") from exc

    via = _section(data, "via", {"k", "path_stretch", "smoothing"})
    seeds = data.get("seeds", [])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a list of integers")

    try:
        return Scenario(
            name=str(data.get("name", name)),
            scheme=str(data.get("scheme", "spacemeta")),
            seeds=tuple(seeds),
            output_dir=str(data.get("output_dir", "runs")),
            shell=shell,
            graph_params=graph_params,
            selection=selection,
            region_params=region_params,
            policy=policy,
            n_users=n_users,
            population=population,
            via_k=int(via.get("k", 5)),
            via_path_stretch=float(via.get("path_stretch", 1.3)),
            via_smoothing=float(via.get("smoothing", 0.5)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    return parse_scenario(data, name=path.stem)

"""Bundled coarse world data: a 200-cell land population grid and a small
set of major-city ground sites.

The grid is intentionally rough: hand-drawn rectangles over inhabited
landmasses with relative weights in millions of people, each subdivided
into equal-weight cells.  It is meant to shape where synthetic users
cluster, not to reproduce census data.
"""

from __future__ import annotations

from .constellation import GroundPoint
from .sessions import PopulationCell, PopulationModel

# (lat_min, lat_max, lon_min, lon_max, weight_millions, lat_splits, lon_splits)
# Regions are pairwise disjoint (boundaries may touch) so that each sampled
# user belongs to exactly one cell.
_REGIONS: tuple[tuple[float, float, float, float, float, int, int], ...] = (
    (8, 32, 68, 92, 1750, 4, 5),      # South Asia
    (21, 41, 104, 122, 1250, 4, 5),   # eastern China
    (8, 21, 92, 110, 280, 2, 3),      # mainland Southeast Asia
    (-10, 8, 95, 120, 320, 2, 4),     # Indonesia and Malaysia
    (8, 19, 117, 127, 115, 2, 1),     # Philippines
    (31, 45, 126, 142, 200, 2, 2),    # Japan and Korea
    (36, 52, 52, 80, 80, 2, 3),       # Central Asia
    (14, 36, 34, 62, 300, 3, 3),      # Middle East
    (36, 43, 26, 50, 110, 1, 3),      # Anatolia and the Caucasus
    (36, 59, -10, 16, 390, 3, 4),     # western Europe incl. British Isles
    (44, 60, 16, 50, 250, 2, 4),      # eastern Europe
    (22, 32, 25, 34, 110, 1, 2),      # Nile valley
    (28, 36, -10, 12, 100, 1, 3),     # Maghreb
    (4, 17, -17, 8, 420, 3, 4),       # West Africa
    (-6, 10, 8, 28, 180, 2, 3),       # Central Africa
    (-12, 14, 28, 48, 400, 3, 4),     # East Africa
    (-35, -12, 12, 38, 150, 2, 3),    # Southern Africa
    (28, 48, -93, -67, 200, 3, 4),    # eastern North America
    (30, 48, -125, -93, 120, 2, 4),   # western North America
    (48, 55, -124, -60, 38, 1, 4),    # Canadian corridor
    (8, 28, -117, -86, 210, 3, 4),    # Mexico and Central America
    (17, 24, -80, -65, 40, 1, 2),     # Caribbean
    (-30, 0, -60, -35, 200, 3, 4),    # Brazil
    (-18, 12, -81, -63, 140, 3, 2),   # Andean belt
    (-41, -30, -73, -53, 60, 1, 2),   # southern cone
    (-39, -25, 144, 154, 20, 2, 1),   # Australian east coast
    (-35, -31, 115, 119, 3, 1, 1),    # Australian southwest
)

_CITIES: tuple[tuple[str, float, float], ...] = (
    ("tokyo", 35.68, 139.69),
    ("delhi", 28.61, 77.21),
    ("shanghai", 31.23, 121.47),
    ("sao_paulo", -23.55, -46.63),
    ("mexico_city", 19.43, -99.13),
    ("cairo", 30.04, 31.24),
    ("mumbai", 19.08, 72.88),
    ("beijing", 39.90, 116.41),
    ("dhaka", 23.81, 90.41),
    ("osaka", 34.69, 135.50),
    ("new_york", 40.71, -74.01),
    ("karachi", 24.86, 67.01),
    ("buenos_aires", -34.60, -58.38),
    ("istanbul", 41.01, 28.98),
    ("lagos", 6.52, 3.38),
    ("london", 51.51, -0.13),
    ("los_angeles", 34.05, -118.24),
    ("paris", 48.86, 2.35),
    ("johannesburg", -26.20, 28.05),
    ("sydney", -33.87, 151.21),
)


def default_population_model() -> PopulationModel:
    """Subdivide each region into equal-weight cells; ~200 cells total."""
    cells: list[PopulationCell] = []
    for lat0, lat1, lon0, lon1, weight, nlat, nlon in _REGIONS:
        dlat = (lat1 - lat0) / nlat
        dlon = (lon1 - lon0) / nlon
        per_cell = weight / (nlat * nlon)
        for i in range(nlat):
            for j in range(nlon):
                cells.append(
                    PopulationCell(
                        lat_min=lat0 + i * dlat,
                        lat_max=lat0 + (i + 1) * dlat,
                        lon_min=lon0 + j * dlon,
                        lon_max=lon0 + (j + 1) * dlon,
                        weight=per_cell,
                    )
                )
    return PopulationModel(cells=tuple(cells))


def default_city_sites() -> tuple[tuple[str, GroundPoint], ...]:
    """The bundled major-city ground sites, in a stable order."""
    return tuple((name, GroundPoint(lat, lon)) for name, lat, lon in _CITIES)

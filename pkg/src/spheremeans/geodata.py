"""Ingestion of directional data given as latitude/longitude records.

The target use is archives of reconstructed geomagnetic pole positions,
which ship in ad-hoc tabular formats; anything reduced to decimal-degree
``lat``/``lon`` columns loads here.  Conversion places latitude 90 at the
third axis and (0, 0) on the first, so rows become points on S^2.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError


def latlon_to_unit(lat, lon):
    """Unit vectors from decimal degrees; broadcasts over arrays."""
    lat = np.deg2rad(np.asarray(lat, dtype=float))
    lon = np.deg2rad(np.asarray(lon, dtype=float))
    return np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1
    )


def unit_to_latlon(points):
    """Decimal degrees from unit vectors on S^2; longitude in (-180, 180]."""
    pts = np.asarray(points, dtype=float)
    lat = np.rad2deg(np.arcsin(np.clip(pts[..., 2], -1.0, 1.0)))
    lon = np.rad2deg(np.arctan2(pts[..., 1], pts[..., 0]))
    lon = np.where(lon <= -180.0, lon + 360.0, lon)
    return lat, lon


@dataclass
class GeoSample:
    """Validated directional records with their unit-vector form."""

    label: str
    lat: np.ndarray
    lon: np.ndarray
    points: np.ndarray
    rejected: list = field(default_factory=list)   # (line_number, reason)

    @property
    def n(self):
        return self.points.shape[0]


def parse_latlon_csv(path, label=None) -> GeoSample:
    """Load a CSV with ``lat``/``lon`` columns (case-insensitive header).

    Rows with unparsable or out-of-range values are rejected individually
    and recorded with their line numbers; an unusable file (missing
    columns, or no valid rows at all) raises instead.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty file")
        lookup = {name.strip().lower(): name for name in reader.fieldnames}
        if "lat" not in lookup or "lon" not in lookup:
            raise FormatError(
                f"{path}: header must contain 'lat' and 'lon' columns, "
                f"found {reader.fieldnames}"
            )
        lat_col, lon_col = lookup["lat"], lookup["lon"]
        lats, lons, rejected = [], [], []
        for line_no, row in enumerate(reader, start=2):
            try:
                lat = float(row[lat_col])
                lon = float(row[lon_col])
            except (TypeError, ValueError):
                rejected.append((line_no, "not a number"))
                continue
            if not -90.0 <= lat <= 90.0:
                rejected.append((line_no, f"latitude {lat} outside [-90, 90]"))
                continue
            if not -180.0 < lon <= 180.0:
                rejected.append((line_no, f"longitude {lon} outside (-180, 180]"))
                continue
            lats.append(lat)
            lons.append(lon)
    if not lats:
        raise ValidationError(f"{path}: no valid data rows")
    lat_arr = np.array(lats)
    lon_arr = np.array(lons)
    return GeoSample(
        label=label or str(path),
        lat=lat_arr,
        lon=lon_arr,
        points=latlon_to_unit(lat_arr, lon_arr),
        rejected=rejected,
    )


def write_latlon_csv(path, lat, lon):
    """Inverse of the parser, used by converters and the demos."""
    with open(path, "w", newline="") as fh:
        fh.write("lat,lon\n")
        for la, lo in zip(np.atleast_1d(lat), np.atleast_1d(lon)):
            fh.write(f"{float(la)!r},{float(lo)!r}\n")

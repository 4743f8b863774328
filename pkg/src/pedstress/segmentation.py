"""Crossing-course geometry and the mapping from positions to analysis
segments (sidewalk, waiting paving, lanes, median, finish)."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
import yaml

CROSSING_LENGTH_M = 6.0


class Segment(str, Enum):
    SIDEWALK = "Sidewalk"
    WAITING = "Waiting to cross"
    LANE1 = "Crossing lane 1"
    MEDIAN = "Median"
    LANE2 = "Crossing lane 2"
    FINISHED = "Finished"
    OUT_OF_COURSE = "Out of course"


# Route order used for the boundary tie-break (farther along the route wins).
ROUTE_ORDER = [Segment.SIDEWALK, Segment.WAITING, Segment.LANE1,
               Segment.MEDIAN, Segment.LANE2, Segment.FINISHED]


class GeometryError(ValueError):
    """Inconsistent crossing geometry."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in course coordinates."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def contains(self, x: float, y: float) -> bool:
        return (self.x_min <= x <= self.x_max
                and self.y_min <= y <= self.y_max)


@dataclass(frozen=True)
class CrossingGeometry:
    """The crossing course as stacked rectangles along the route axis.

    The course coordinate frame has its origin at the route start with y
    increasing across the road; the L-shaped approach is collapsed to route
    distance. Lane widths follow the two shipped street designs: two 3.0 m
    lanes without a median, or two 2.5 m lanes around a 1.0 m median.
    """

    has_median: bool
    lane_width: float
    median_width: float
    sidewalk_depth: float = 4.0
    waiting_depth: float = 0.6
    finish_depth: float = 4.0
    half_width: float = 2.0

    def __post_init__(self):
        total = 2 * self.lane_width + self.median_width
        if abs(total - CROSSING_LENGTH_M) > 1e-9:
            raise GeometryError(
                f"lane widths {self.lane_width} + median {self.median_width} "
                f"do not tile the {CROSSING_LENGTH_M} m crossing")
        if self.has_median != (self.median_width > 0):
            raise GeometryError("median flag inconsistent with median width")

    @property
    def curb_y(self) -> float:
        return self.sidewalk_depth + self.waiting_depth

    def boundaries(self) -> list[tuple[Segment, float]]:
        """(segment, start-y) pairs in route order."""
        b = [(Segment.SIDEWALK, 0.0),
             (Segment.WAITING, self.sidewalk_depth),
             (Segment.LANE1, self.curb_y)]
        y = self.curb_y + self.lane_width
        if self.has_median:
            b.append((Segment.MEDIAN, y))
            y += self.median_width
        b.append((Segment.LANE2, y))
        b.append((Segment.FINISHED, y + self.lane_width))
        return b

    @property
    def y_max(self) -> float:
        return self.curb_y + CROSSING_LENGTH_M + self.finish_depth

    def regions(self) -> dict[Segment, Rect]:
        bounds = self.boundaries()
        out = {}
        for (seg, y0), (_, y1) in zip(bounds, bounds[1:]):
            out[seg] = Rect(-self.half_width, self.half_width, y0, y1)
        out[Segment.FINISHED] = Rect(-self.half_width, self.half_width,
                                     bounds[-1][1], self.y_max)
        return out


def preset_geometry(median: bool) -> CrossingGeometry:
    """The two shipped street designs: 3.0+3.0 m, or 2.5+1.0+2.5 m."""
    if median:
        return CrossingGeometry(True, lane_width=2.5, median_width=1.0)
    return CrossingGeometry(False, lane_width=3.0, median_width=0.0)


def segment_of(point: tuple[float, float], geom: CrossingGeometry) -> Segment:
    """Map a course-plane point to exactly one segment.

    Boundary points resolve to the farther-along-route segment: a point is
    in the last segment whose start does not exceed its y coordinate.
    """
    x, y = point
    if not (-geom.half_width <= x <= geom.half_width
            and 0.0 <= y <= geom.y_max):
        return Segment.OUT_OF_COURSE
    seg = Segment.SIDEWALK
    for s, y0 in geom.boundaries():
        if y >= y0:
            seg = s
    return seg


@dataclass(frozen=True)
class Trajectory:
    """10 Hz positions of all entities in the crossing plane.

    ``samples`` is a DataFrame with columns
    unix, entity_id, entity_kind, x, y, heading.
    """

    session_id: str
    samples: pd.DataFrame
    rate_hz: float = 10.0
    participant_entity: str = "participant"

    def __post_init__(self):
        required = {"unix", "entity_id", "entity_kind", "x", "y", "heading"}
        missing = required - set(self.samples.columns)
        if missing:
            raise GeometryError(f"trajectory missing columns {sorted(missing)}")

    def times(self) -> np.ndarray:
        return np.sort(self.samples["unix"].unique())

    def participant(self) -> pd.DataFrame:
        p = self.samples[self.samples["entity_id"] == self.participant_entity]
        if p.empty:
            raise GeometryError(
                f"no participant entity in trajectory {self.session_id}")
        return p.sort_values("unix")

    def crop(self, lo: float, hi: float) -> "Trajectory":
        keep = (self.samples["unix"] >= lo) & (self.samples["unix"] <= hi)
        return Trajectory(self.session_id, self.samples[keep].reset_index(drop=True),
                          self.rate_hz, self.participant_entity)


def attach_segments(events, traj: Trajectory, geom: CrossingGeometry,
                    max_gap_s: float = 0.5, snap_s: float = 0.1):
    """Label each SCR with the segment at the participant position nearest
    in time to its onset.

    Events with no trajectory sample within ``max_gap_s`` are flagged
    unlocatable (position label None).
    """
    p = traj.participant()
    times = p["unix"].to_numpy(float)
    xs = p["x"].to_numpy(float)
    ys = p["y"].to_numpy(float)
    for e in events:
        i = int(np.argmin(np.abs(times - e.onset_unix)))
        gap = abs(times[i] - e.onset_unix)
        if gap > max_gap_s:
            e.position_label = None
            continue
        seg = segment_of((xs[i], ys[i]), geom)
        e.position_label = seg.value
    return events


def merge_median_for_models(label: str | None) -> str | None:
    """Median samples fold into lane 1 for the four-segment models."""
    if label == Segment.MEDIAN.value:
        return Segment.LANE1.value
    return label


# ---------------------------------------------------------------------------
# Geometry files


def save_geometry(geom: CrossingGeometry, path) -> None:
    doc = {
        "has_median": geom.has_median,
        "lane_width": geom.lane_width,
        "median_width": geom.median_width,
        "sidewalk_depth": geom.sidewalk_depth,
        "waiting_depth": geom.waiting_depth,
        "finish_depth": geom.finish_depth,
        "half_width": geom.half_width,
        "regions": {seg.value: [r.x_min, r.x_max, r.y_min, r.y_max]
                    for seg, r in geom.regions().items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_geometry(path) -> CrossingGeometry:
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    return CrossingGeometry(
        has_median=bool(doc["has_median"]),
        lane_width=float(doc["lane_width"]),
        median_width=float(doc["median_width"]),
        sidewalk_depth=float(doc.get("sidewalk_depth", 4.0)),
        waiting_depth=float(doc.get("waiting_depth", 0.6)),
        finish_depth=float(doc.get("finish_depth", 4.0)),
        half_width=float(doc.get("half_width", 2.0)),
    )


def save_trajectory_csv(traj: Trajectory, path) -> None:
    traj.samples.to_csv(path, index=False)


def load_trajectory_csv(path, session_id: str) -> Trajectory:
    return Trajectory(session_id, pd.read_csv(path))

/**
 * Top-down schematic replay: pure geometry, no DOM. Entities are
 * interpolated to the cursor time and projected into a fixed viewport.
 */
import type { TrajectoryFrame } from "./api.js";

export interface EntityPosition {
  entityId: string;
  entityKind: string;
  x: number;
  y: number;
  heading: number;
}

export interface Viewport {
  width: number;
  height: number;
  worldXMin: number;
  worldXMax: number;
  worldYMin: number;
  worldYMax: number;
}

/** Group flat frames by entity, sorted by time (backend emits in order). */
export function byEntity(
  frames: readonly TrajectoryFrame[],
): Map<string, TrajectoryFrame[]> {
  const out = new Map<string, TrajectoryFrame[]>();
  for (const f of frames) {
    const list = out.get(f.entity_id);
    if (list === undefined) out.set(f.entity_id, [f]);
    else list.push(f);
  }
  return out;
}

/** Linear interpolation of one entity's track at time t; null outside it. */
export function positionAt(
  track: readonly TrajectoryFrame[],
  unix: number,
): EntityPosition | null {
  if (track.length === 0) return null;
  const first = track[0]!;
  const last = track[track.length - 1]!;
  if (unix < first.unix || unix > last.unix) return null;
  let lo = 0;
  let hi = track.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (track[mid]!.unix <= unix) lo = mid;
    else hi = mid;
  }
  const a = track[lo]!;
  const b = track[hi]!;
  const span = b.unix - a.unix;
  const w = span > 0 ? (unix - a.unix) / span : 0;
  return {
    entityId: a.entity_id,
    entityKind: a.entity_kind,
    x: a.x + w * (b.x - a.x),
    y: a.y + w * (b.y - a.y),
    heading: w < 0.5 ? a.heading : b.heading,
  };
}

/** All entities visible at time t. */
export function frameAt(
  tracks: Map<string, TrajectoryFrame[]>,
  unix: number,
): EntityPosition[] {
  const out: EntityPosition[] = [];
  for (const track of tracks.values()) {
    const p = positionAt(track, unix);
    if (p !== null) out.push(p);
  }
  return out;
}

/** Viewport that covers every frame with a margin, preserving aspect. */
export function fitViewport(
  frames: readonly TrajectoryFrame[],
  width: number,
  height: number,
  margin = 2.0,
): Viewport {
  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const f of frames) {
    xMin = Math.min(xMin, f.x);
    xMax = Math.max(xMax, f.x);
    yMin = Math.min(yMin, f.y);
    yMax = Math.max(yMax, f.y);
  }
  if (!Number.isFinite(xMin)) {
    xMin = -1;
    xMax = 1;
    yMin = -1;
    yMax = 1;
  }
  return {
    width,
    height,
    worldXMin: xMin - margin,
    worldXMax: xMax + margin,
    worldYMin: yMin - margin,
    worldYMax: yMax + margin,
  };
}

/** World metres -> screen pixels; y flips so "across the road" points up. */
export function toScreen(
  v: Viewport,
  x: number,
  y: number,
): { px: number; py: number } {
  const sx = v.width / (v.worldXMax - v.worldXMin);
  const sy = v.height / (v.worldYMax - v.worldYMin);
  return {
    px: (x - v.worldXMin) * sx,
    py: v.height - (y - v.worldYMin) * sy,
  };
}

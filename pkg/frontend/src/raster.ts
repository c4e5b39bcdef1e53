/** Deterministic raster tools for mask authoring.
 *
 * The engine consumes bitmaps, so all drawing is raster-first: a round brush
 * stamped along polylines, and an even-odd polygon fill. Coverage uses the
 * integer-center rule — a pixel belongs to the brush iff its integer center
 * lies inside the disk — so the same stroke always produces the same bits,
 * on every canvas backend and in tests.
 */

import type { CanvasDocument } from "./document.js";
import { getLayer, replaceMask } from "./document.js";
import { ValidationError } from "./errors.js";

export interface StrokePoint {
  x: number;
  y: number;
}

export interface BrushStroke {
  points: StrokePoint[];
  radius: number;
}

export type BrushMode = "paint" | "erase";

/** Snap a continuous coordinate to the nearest integer pixel center. */
export function snapToPixel(v: number): number {
  return Math.floor(v + 0.5);
}

/** Stamp a filled disk: pixels whose integer center is within `radius`. */
export function stampDisk(
  mask: Uint8Array,
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  value: 0 | 1,
): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.ceil(cx - radius));
  const x1 = Math.min(width - 1, Math.floor(cx + radius));
  const y0 = Math.max(0, Math.ceil(cy - radius));
  const y1 = Math.min(height - 1, Math.floor(cy + radius));
  for (let py = y0; py <= y1; py += 1) {
    const dy = py - cy;
    for (let px = x0; px <= x1; px += 1) {
      const dx = px - cx;
      if (dx * dx + dy * dy <= r2) {
        mask[py * width + px] = value;
      }
    }
  }
}

/** Stamp the brush along the stroke's polyline, mutating `mask` in place.
 *
 * Stroke points snap to integer centers; each segment is walked in
 * max(|dx|, |dy|) steps with every interpolated center re-snapped, so no
 * gaps open up and the result is independent of pointer-event timing.
 */
export function rasterizeStroke(
  mask: Uint8Array,
  width: number,
  height: number,
  stroke: BrushStroke,
  mode: BrushMode,
): void {
  if (stroke.points.length === 0) {
    throw new ValidationError("stroke must contain at least one point");
  }
  if (!(stroke.radius >= 0)) {
    throw new ValidationError(`brush radius must be non-negative, got ${stroke.radius}`);
  }
  const value: 0 | 1 = mode === "erase" ? 0 : 1;
  const snapped = stroke.points.map((p) => ({ x: snapToPixel(p.x), y: snapToPixel(p.y) }));
  stampDisk(mask, width, height, snapped[0].x, snapped[0].y, stroke.radius, value);
  for (let i = 1; i < snapped.length; i += 1) {
    const a = snapped[i - 1];
    const b = snapped[i];
    const steps = Math.max(Math.abs(b.x - a.x), Math.abs(b.y - a.y), 1);
    for (let s = 1; s <= steps; s += 1) {
      const t = s / steps;
      const cx = snapToPixel(a.x + (b.x - a.x) * t);
      const cy = snapToPixel(a.y + (b.y - a.y) * t);
      stampDisk(mask, width, height, cx, cy, stroke.radius, value);
    }
  }
}

/** Apply a brush stroke to one layer, returning the updated document. */
export function applyBrushStroke(
  doc: CanvasDocument,
  layerId: string,
  stroke: BrushStroke,
  mode: BrushMode,
): CanvasDocument {
  const layer = getLayer(doc, layerId);
  const mask = layer.mask.slice();
  rasterizeStroke(mask, doc.width, doc.height, stroke, mode);
  return replaceMask(doc, layerId, mask);
}

/** Even-odd point-in-polygon test against pixel center (px, py). */
function insidePolygon(points: StrokePoint[], px: number, py: number): boolean {
  let inside = false;
  for (let i = 0, j = points.length - 1; i < points.length; j = i, i += 1) {
    const a = points[i];
    const b = points[j];
    if (a.y > py !== b.y > py && px < a.x + ((py - a.y) * (b.x - a.x)) / (b.y - a.y)) {
      inside = !inside;
    }
  }
  return inside;
}

/** Fill a closed polygon (even-odd rule on pixel centers), in place. */
export function rasterizePolygon(
  mask: Uint8Array,
  width: number,
  height: number,
  points: StrokePoint[],
  mode: BrushMode,
): void {
  if (points.length < 3) {
    throw new ValidationError("polygon needs at least three points");
  }
  const value: 0 | 1 = mode === "erase" ? 0 : 1;
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const x0 = Math.max(0, Math.floor(minX));
  const x1 = Math.min(width - 1, Math.ceil(maxX));
  const y0 = Math.max(0, Math.floor(minY));
  const y1 = Math.min(height - 1, Math.ceil(maxY));
  for (let py = y0; py <= y1; py += 1) {
    for (let px = x0; px <= x1; px += 1) {
      if (insidePolygon(points, px, py)) {
        mask[py * width + px] = value;
      }
    }
  }
}

/** Apply a polygon fill to one layer, returning the updated document. */
export function applyPolygonFill(
  doc: CanvasDocument,
  layerId: string,
  points: StrokePoint[],
  mode: BrushMode,
): CanvasDocument {
  const layer = getLayer(doc, layerId);
  const mask = layer.mask.slice();
  rasterizePolygon(mask, doc.width, doc.height, points, mode);
  return replaceMask(doc, layerId, mask);
}

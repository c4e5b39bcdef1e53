/** Layout-overlay rendering: blend mask colors over a result image.
 *
 * Pure pixel math on RGBA buffers so it can be verified without a DOM
 * canvas; the app copies the result into an ImageData for display.
 */

import { ValidationError } from "./errors.js";

export type Rgb = readonly [number, number, number];

/** Distinct, stable layer colors (cycled when there are more layers). */
export const LAYER_PALETTE: readonly Rgb[] = [
  [231, 76, 60],
  [46, 204, 113],
  [52, 152, 219],
  [241, 196, 15],
  [155, 89, 182],
  [26, 188, 156],
  [230, 126, 34],
  [236, 240, 241],
];

export function colorForLayer(index: number): Rgb {
  return LAYER_PALETTE[index % LAYER_PALETTE.length];
}

export interface MaskOverlay {
  mask: Uint8Array;
  color: Rgb;
}

/** Blend each overlay's color over the base image at the given opacity.
 *
 * Only pixels covered by a mask change; overlapping masks resolve to the
 * last overlay in the list, mirroring layer precedence. Returns a new
 * RGBA buffer; the base is untouched.
 */
export function renderOverlay(
  base: Uint8ClampedArray,
  width: number,
  height: number,
  overlays: readonly MaskOverlay[],
  opacity: number,
): Uint8ClampedArray {
  const pixels = width * height;
  if (base.length !== pixels * 4) {
    throw new ValidationError(
      `base buffer has ${base.length} bytes, expected ${pixels * 4} for ${width}x${height} RGBA`,
    );
  }
  for (const overlay of overlays) {
    if (overlay.mask.length !== pixels) {
      throw new ValidationError(
        `overlay mask has ${overlay.mask.length} pixels, expected ${pixels}`,
      );
    }
  }
  const alpha = Math.min(1, Math.max(0, opacity));
  const out = new Uint8ClampedArray(base);
  for (const { mask, color } of overlays) {
    for (let i = 0; i < pixels; i += 1) {
      if (mask[i] === 1) {
        const o = i * 4;
        out[o] = Math.round(base[o] * (1 - alpha) + color[0] * alpha);
        out[o + 1] = Math.round(base[o + 1] * (1 - alpha) + color[1] * alpha);
        out[o + 2] = Math.round(base[o + 2] * (1 - alpha) + color[2] * alpha);
        out[o + 3] = 255;
      }
    }
  }
  return out;
}

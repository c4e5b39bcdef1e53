/** Run-length mask coding, byte-compatible with the engine's layout files.
 *
 * A mask is a row-major Uint8Array of 0/1 values. The encoding alternates
 * run counts of zeros and ones, always starting with the zero run — a mask
 * whose first pixel is 1 therefore encodes with a leading 0 count.
 */

import { ValidationError } from "./errors.js";

export function rleEncode(mask: Uint8Array): number[] {
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (const px of mask) {
    if (px === value) {
      run += 1;
    } else {
      counts.push(run);
      value = px;
      run = 1;
    }
  }
  counts.push(run);
  return counts;
}

export function rleDecode(counts: number[], height: number, width: number): Uint8Array {
  let total = 0;
  for (const c of counts) {
    if (!Number.isInteger(c) || c < 0) {
      throw new ValidationError("run-length counts must be non-negative integers");
    }
    total += c;
  }
  if (total !== height * width) {
    throw new ValidationError(
      `run-length counts sum to ${total}, expected ${height * width} for ${height}x${width}`,
    );
  }
  const flat = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const c of counts) {
    if (value) {
      flat.fill(1, pos, pos + c);
    }
    pos += c;
    value ^= 1;
  }
  return flat;
}

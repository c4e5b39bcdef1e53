/** The editor's document model: a canvas with ordered mask layers.
 *
 * Layer order is significant — later layers win pixel-assignment ties in the
 * engine, and the exported layout preserves the order exactly. Documents are
 * treated as immutable: every operation returns a new document and marks it
 * dirty, leaving the input untouched.
 */

import { UnknownLayerError, ValidationError } from "./errors.js";
import { rleDecode, rleEncode } from "./rle.js";

export interface ObjectLayer {
  readonly id: string;
  readonly prompt: string;
  readonly seed: number;
  /** Locked layers keep their seed across "reroll unlocked seeds" actions. */
  readonly locked: boolean;
  /** Row-major 0/1 bitmap, length = canvas width * height. */
  readonly mask: Uint8Array;
}

export interface CanvasDocument {
  readonly width: number;
  readonly height: number;
  readonly globalPrompt: string;
  readonly layers: readonly ObjectLayer[];
  /** True when the document has unsaved edits. */
  readonly dirty: boolean;
}

/** Uniform [0, 1) random source; injectable so tests are deterministic. */
export type Rng = () => number;

/** Seeds must fit the engine's non-negative integer requirement. */
export const MAX_SEED = 2 ** 31 - 1;

/** Engine rule for ids: they name artifact directories and URL segments. */
export const LAYER_ID_PATTERN = /^[A-Za-z0-9][A-Za-z0-9._-]*$/;

export function randomSeed(rng: Rng = Math.random): number {
  return Math.floor(rng() * (MAX_SEED + 1));
}

export function createDocument(width: number, height: number, globalPrompt = ""): CanvasDocument {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new ValidationError(`canvas dimensions must be positive integers, got ${width}x${height}`);
  }
  return { width, height, globalPrompt, layers: [], dirty: false };
}

export function getLayer(doc: CanvasDocument, layerId: string): ObjectLayer {
  const layer = doc.layers.find((l) => l.id === layerId);
  if (!layer) {
    throw new UnknownLayerError(layerId);
  }
  return layer;
}

export function layerIndex(doc: CanvasDocument, layerId: string): number {
  const index = doc.layers.findIndex((l) => l.id === layerId);
  if (index < 0) {
    throw new UnknownLayerError(layerId);
  }
  return index;
}

function nextLayerId(doc: CanvasDocument): string {
  const taken = new Set(doc.layers.map((l) => l.id));
  for (let n = doc.layers.length + 1; ; n += 1) {
    const id = `layer-${n}`;
    if (!taken.has(id)) {
      return id;
    }
  }
}

export interface AddLayerOptions {
  id?: string;
  prompt?: string;
  seed?: number;
  locked?: boolean;
  mask?: Uint8Array;
  rng?: Rng;
}

/** Append a layer; a fresh random seed is drawn unless one is given. */
export function addLayer(doc: CanvasDocument, options: AddLayerOptions = {}): CanvasDocument {
  const id = options.id ?? nextLayerId(doc);
  if (!LAYER_ID_PATTERN.test(id)) {
    throw new ValidationError(
      `layer id ${JSON.stringify(id)} may use only letters, digits, '.', '_', '-'`,
    );
  }
  if (doc.layers.some((l) => l.id === id)) {
    throw new ValidationError(`duplicate layer id ${JSON.stringify(id)}`);
  }
  const mask = options.mask ?? new Uint8Array(doc.width * doc.height);
  if (mask.length !== doc.width * doc.height) {
    throw new ValidationError(
      `layer ${JSON.stringify(id)}: mask length ${mask.length} does not match canvas ` +
        `${doc.width}x${doc.height}`,
    );
  }
  const layer: ObjectLayer = {
    id,
    prompt: options.prompt ?? "",
    seed: options.seed ?? randomSeed(options.rng),
    locked: options.locked ?? false,
    mask: mask.slice(),
  };
  return { ...doc, layers: [...doc.layers, layer], dirty: true };
}

export function removeLayer(doc: CanvasDocument, layerId: string): CanvasDocument {
  const index = layerIndex(doc, layerId);
  const layers = doc.layers.slice();
  layers.splice(index, 1);
  return { ...doc, layers, dirty: true };
}

export interface LayerPatch {
  prompt?: string;
  seed?: number;
  locked?: boolean;
}

export function updateLayer(doc: CanvasDocument, layerId: string, patch: LayerPatch): CanvasDocument {
  const index = layerIndex(doc, layerId);
  if (patch.seed !== undefined && (!Number.isInteger(patch.seed) || patch.seed < 0)) {
    throw new ValidationError(`layer ${JSON.stringify(layerId)}: seed must be a non-negative integer`);
  }
  const layers = doc.layers.slice();
  layers[index] = { ...layers[index], ...patch };
  return { ...doc, layers, dirty: true };
}

export function setGlobalPrompt(doc: CanvasDocument, globalPrompt: string): CanvasDocument {
  if (globalPrompt === doc.globalPrompt) {
    return doc;
  }
  return { ...doc, globalPrompt, dirty: true };
}

/** Replace one layer's mask bitmap (length-checked). */
export function replaceMask(doc: CanvasDocument, layerId: string, mask: Uint8Array): CanvasDocument {
  const index = layerIndex(doc, layerId);
  if (mask.length !== doc.width * doc.height) {
    throw new ValidationError(
      `layer ${JSON.stringify(layerId)}: mask length ${mask.length} does not match canvas ` +
        `${doc.width}x${doc.height}`,
    );
  }
  const layers = doc.layers.slice();
  layers[index] = { ...layers[index], mask };
  return { ...doc, layers, dirty: true };
}

/** Move a layer up or down the precedence order. */
export function moveLayer(doc: CanvasDocument, layerId: string, delta: number): CanvasDocument {
  const from = layerIndex(doc, layerId);
  const to = Math.min(Math.max(from + delta, 0), doc.layers.length - 1);
  if (to === from) {
    return doc;
  }
  const layers = doc.layers.slice();
  const [layer] = layers.splice(from, 1);
  layers.splice(to, 0, layer);
  return { ...doc, layers, dirty: true };
}

/** Draw a fresh seed for every unlocked layer; locked layers are pinned. */
export function rerollUnlockedSeeds(doc: CanvasDocument, rng: Rng = Math.random): CanvasDocument {
  const layers = doc.layers.map((l) => (l.locked ? l : { ...l, seed: randomSeed(rng) }));
  return { ...doc, layers, dirty: true };
}

export function markClean(doc: CanvasDocument): CanvasDocument {
  return doc.dirty ? { ...doc, dirty: false } : doc;
}

export function maskPixelCount(mask: Uint8Array): number {
  let count = 0;
  for (const px of mask) {
    count += px;
  }
  return count;
}

export interface PixelBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Tight bounding box of the mask's set pixels, or null for an empty mask. */
export function maskBBox(mask: Uint8Array, width: number, height: number): PixelBox | null {
  let minX = width;
  let minY = height;
  let maxX = -1;
  let maxY = -1;
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      if (mask[y * width + x]) {
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
      }
    }
  }
  if (maxX < 0) {
    return null;
  }
  return { x: minX, y: minY, w: maxX - minX + 1, h: maxY - minY + 1 };
}

// ---------------------------------------------------------------------------
// Document serialization (local-storage format — richer than the engine's
// layout file: it keeps editor-only state such as lock flags).
// ---------------------------------------------------------------------------

export interface StoredLayerJson {
  id: string;
  prompt: string;
  seed: number;
  locked: boolean;
  mask: { rle: number[] };
}

export interface StoredDocumentJson {
  canvas: { h: number; w: number };
  global_prompt: string;
  layers: StoredLayerJson[];
}

export function documentToJson(doc: CanvasDocument): StoredDocumentJson {
  return {
    canvas: { h: doc.height, w: doc.width },
    global_prompt: doc.globalPrompt,
    layers: doc.layers.map((l) => ({
      id: l.id,
      prompt: l.prompt,
      seed: l.seed,
      locked: l.locked,
      mask: { rle: rleEncode(l.mask) },
    })),
  };
}

export function documentFromJson(json: StoredDocumentJson): CanvasDocument {
  let doc = createDocument(json.canvas.w, json.canvas.h, json.global_prompt);
  for (const layer of json.layers) {
    doc = addLayer(doc, {
      id: layer.id,
      prompt: layer.prompt,
      seed: layer.seed,
      locked: layer.locked,
      mask: rleDecode(layer.mask.rle, json.canvas.h, json.canvas.w),
    });
  }
  return markClean(doc);
}

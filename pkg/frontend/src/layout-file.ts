/** Export/import between editor documents and the engine's layout files.
 *
 * The exported JSON is exactly what `POST /api/jobs` and the engine's layout
 * loader accept: `{canvas: {h, w}, global_prompt, objects: [...]}` with
 * inline run-length masks. The format carries no editor-only state, so lock
 * flags do not survive an export/import cycle; everything the engine sees —
 * dimensions, prompts, seeds, masks, layer order — round-trips exactly.
 */

import type { CanvasDocument } from "./document.js";
import { addLayer, createDocument, markClean, LAYER_ID_PATTERN } from "./document.js";
import { ParseError, ValidationError } from "./errors.js";
import { rleDecode, rleEncode } from "./rle.js";

export interface LayoutObjectJson {
  id: string;
  prompt: string;
  seed: number;
  mask: { rle: number[] };
}

export interface LayoutJson {
  canvas: { h: number; w: number };
  global_prompt: string;
  objects: LayoutObjectJson[];
}

/** Serialize a document to the engine layout format.
 *
 * Every layer must carry a non-empty prompt and a non-empty mask; all
 * violations are collected and reported together.
 */
export function exportLayout(doc: CanvasDocument): LayoutJson {
  const violations: string[] = [];
  if (doc.layers.length === 0) {
    violations.push("document has no layers");
  }
  for (const layer of doc.layers) {
    if (!layer.prompt.trim()) {
      violations.push(`layer ${JSON.stringify(layer.id)}: prompt is empty`);
    }
    if (!layer.mask.some((px) => px === 1)) {
      violations.push(`layer ${JSON.stringify(layer.id)}: mask is empty`);
    }
    if (!Number.isInteger(layer.seed) || layer.seed < 0) {
      violations.push(`layer ${JSON.stringify(layer.id)}: seed must be a non-negative integer`);
    }
  }
  if (violations.length > 0) {
    throw new ValidationError(violations);
  }
  return {
    canvas: { h: doc.height, w: doc.width },
    global_prompt: doc.globalPrompt,
    objects: doc.layers.map((l) => ({
      id: l.id,
      prompt: l.prompt,
      seed: l.seed,
      mask: { rle: rleEncode(l.mask) },
    })),
  };
}

export function exportLayoutText(doc: CanvasDocument): string {
  return JSON.stringify(exportLayout(doc), null, 2);
}

function requireKeys(obj: Record<string, unknown>, keys: string[], where: string): void {
  const unknown = Object.keys(obj)
    .filter((k) => !keys.includes(k))
    .sort();
  if (unknown.length > 0) {
    throw new ParseError(`unknown keys ${JSON.stringify(unknown)}`, where);
  }
  const missing = keys.filter((k) => !(k in obj)).sort();
  if (missing.length > 0) {
    throw new ParseError(`missing keys ${JSON.stringify(missing)}`, where);
  }
}

function asObject(value: unknown, where: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ParseError("expected a JSON object", where);
  }
  return value as Record<string, unknown>;
}

/** Parse an engine layout document into an editor document.
 *
 * Mirrors the engine loader's strictness: unknown or missing keys fail with
 * the offending location; invariant violations are collected into one
 * ValidationError. Imported layers start unlocked.
 */
export function importLayout(data: unknown): CanvasDocument {
  const doc = asObject(data, "top level");
  requireKeys(doc, ["canvas", "global_prompt", "objects"], "top level");
  const canvas = asObject(doc.canvas, "canvas");
  requireKeys(canvas, ["h", "w"], "canvas");
  const h = canvas.h;
  const w = canvas.w;
  if (!Number.isInteger(h) || !Number.isInteger(w)) {
    throw new ParseError("canvas dims must be integers", "canvas");
  }
  if (typeof doc.global_prompt !== "string") {
    throw new ParseError("global_prompt must be a string", "global_prompt");
  }
  if (!Array.isArray(doc.objects)) {
    throw new ParseError("objects must be an array", "objects");
  }

  let out = createDocument(w as number, h as number, doc.global_prompt);
  const violations: string[] = [];
  doc.objects.forEach((entry, i) => {
    const where = `objects[${i}]`;
    const obj = asObject(entry, where);
    requireKeys(obj, ["id", "prompt", "seed", "mask"], where);
    const maskField = asObject(obj.mask, `${where}.mask`);
    requireKeys(maskField, ["rle"], `${where}.mask`);
    if (!Array.isArray(maskField.rle)) {
      throw new ParseError("rle must be an array of counts", `${where}.mask`);
    }
    const id = String(obj.id);
    if (!LAYER_ID_PATTERN.test(id)) {
      violations.push(`object ${JSON.stringify(id)}: id may use only letters, digits, '.', '_', '-'`);
      return;
    }
    const seed = obj.seed;
    if (!Number.isInteger(seed) || (seed as number) < 0) {
      violations.push(`object ${JSON.stringify(id)}: seed must be a non-negative integer`);
      return;
    }
    try {
      out = addLayer(out, {
        id,
        prompt: String(obj.prompt),
        seed: seed as number,
        mask: rleDecode(maskField.rle as number[], h as number, w as number),
      });
    } catch (err) {
      if (err instanceof ValidationError) {
        violations.push(...err.violations);
      } else {
        throw err;
      }
    }
  });
  if (violations.length > 0) {
    throw new ValidationError(violations);
  }
  return markClean(out);
}

/** Parse layout file text (e.g. an uploaded file) into a document. */
export function parseLayoutText(text: string): CanvasDocument {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    throw new ParseError(err instanceof Error ? err.message : String(err), "document");
  }
  return importLayout(data);
}

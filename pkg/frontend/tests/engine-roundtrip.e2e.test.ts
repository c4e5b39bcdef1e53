/** Export → engine-load round-trip on the five golden documents.
 *
 * Every document is exported by the editor, parsed by the engine's own
 * layout loader (via tools/engine_load.py), and the engine's canonical echo
 * must equal the editor's view of the same document. Exports are also pinned
 * against checked-in fixtures so format drift is caught on either side.
 */

import { spawnSync } from "node:child_process";
import { readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import type { CanvasDocument } from "../src/document.js";
import { exportLayoutText, importLayout } from "../src/layout-file.js";
import { rleEncode } from "../src/rle.js";
import { GOLDEN_DOCS } from "./golden-docs.js";

const frontendDir = dirname(dirname(fileURLToPath(import.meta.url)));

function engineLoad(layoutText: string): { status: number; stdout: string; stderr: string } {
  const proc = spawnSync("python3", [join(frontendDir, "tools", "engine_load.py")], {
    input: layoutText,
    encoding: "utf-8",
    cwd: frontendDir,
  });
  if (proc.error) {
    throw proc.error;
  }
  return { status: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
}

/** The editor's canonical view of a document, engine-visible fields only. */
function canonical(doc: CanvasDocument) {
  return {
    canvas: { h: doc.height, w: doc.width },
    global_prompt: doc.globalPrompt,
    objects: doc.layers.map((l) => ({
      id: l.id,
      prompt: l.prompt,
      seed: l.seed,
      rle: rleEncode(l.mask),
    })),
  };
}

describe("engine round-trip on golden documents", () => {
  for (const { name, build } of GOLDEN_DOCS) {
    it(`${name}: engine parses the export and sees identical content`, () => {
      const doc = build();
      const exported = exportLayoutText(doc);
      const result = engineLoad(exported);
      expect(result.stderr).toBe("");
      expect(result.status).toBe(0);
      expect(JSON.parse(result.stdout)).toEqual(canonical(doc));
    });

    it(`${name}: export matches the checked-in fixture byte for byte`, () => {
      // Refresh fixtures with REFRESH_GOLDENS=1 after an intentional format change.
      const path = join(frontendDir, "tests", "golden", "layouts", `${name}.json`);
      const text = exportLayoutText(build()) + "\n";
      if (process.env.REFRESH_GOLDENS === "1") {
        writeFileSync(path, text);
      }
      expect(text).toBe(readFileSync(path, "utf-8"));
    });

    it(`${name}: import of the export restores the document`, () => {
      const doc = build();
      const restored = importLayout(JSON.parse(exportLayoutText(doc)));
      expect(restored.width).toBe(doc.width);
      expect(restored.height).toBe(doc.height);
      expect(restored.globalPrompt).toBe(doc.globalPrompt);
      expect(restored.layers.map((l) => l.id)).toEqual(doc.layers.map((l) => l.id));
      for (let i = 0; i < doc.layers.length; i += 1) {
        expect(restored.layers[i].prompt).toBe(doc.layers[i].prompt);
        expect(restored.layers[i].seed).toBe(doc.layers[i].seed);
        expect(restored.layers[i].mask).toEqual(doc.layers[i].mask);
      }
    });
  }

  it("the engine rejects documents the editor would reject", () => {
    // Cross-check that the loader tool actually validates: a corrupted seed
    // must fail on the engine side, not just in the editor.
    const doc = GOLDEN_DOCS[0].build();
    const corrupted = JSON.parse(exportLayoutText(doc));
    corrupted.objects[0].seed = -3;
    const result = engineLoad(JSON.stringify(corrupted));
    expect(result.status).toBe(3);
    expect(result.stderr).toMatch(/ValidationError/);
  });
});

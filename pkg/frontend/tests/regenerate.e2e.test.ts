/** End-to-end against a live engine server (toy backends).
 *
 * Exercises the full regenerate workflow over HTTP: generating a scene,
 * regenerating one object with the same seed (scene must be byte-identical),
 * regenerating with a new seed (everything outside the target layer's mask
 * must be untouched and the other objects' image files byte-identical), and
 * editing one layer's prompt (the scene diff must be non-empty and confined
 * to that layer's mask). Job history must stay append-only throughout.
 *
 * The server runs with cc.t_min=0 so the composition stage re-anchors known
 * regions through the final denoising step; with the default floor the toy
 * denoiser's analytic fixed point makes every finished scene collapse to the
 * global-prompt target, which would make the confinement assertions vacuous.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, EngineClient } from "../src/api.js";
import {
  addLayer,
  createDocument,
  getLayer,
  updateLayer,
  type CanvasDocument,
} from "../src/document.js";
import { GenerationController, type HistoryEntry } from "../src/jobs.js";
import { stampDisk } from "../src/raster.js";

const repoDir = dirname(dirname(dirname(fileURLToPath(import.meta.url))));

const SIZE = 48;

function diskMask(cx: number, cy: number, radius: number): Uint8Array {
  const mask = new Uint8Array(SIZE * SIZE);
  stampDisk(mask, SIZE, SIZE, cx, cy, radius, 1);
  return mask;
}

/** Three disjoint objects on a 48x48 canvas. */
function buildDocument(): CanvasDocument {
  let doc = createDocument(SIZE, SIZE, "a tidy room");
  doc = addLayer(doc, { id: "a", prompt: "a red apple", seed: 5, mask: diskMask(10, 10, 5) });
  doc = addLayer(doc, { id: "b", prompt: "a green pear", seed: 7, mask: diskMask(24, 24, 6) });
  doc = addLayer(doc, { id: "c", prompt: "a blue mug", seed: 9, mask: diskMask(38, 38, 5) });
  return doc;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        srv.close();
        reject(new Error("could not allocate a port"));
        return;
      }
      srv.close(() => resolve(address.port));
    });
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

interface SceneDiff {
  inside: number;
  outside: number;
}

/** Count pixels whose RGB changed, split by a layer mask. */
function diffByMask(beforePng: Uint8Array, afterPng: Uint8Array, mask: Uint8Array): SceneDiff {
  const before = PNG.sync.read(Buffer.from(beforePng));
  const after = PNG.sync.read(Buffer.from(afterPng));
  expect(after.width).toBe(before.width);
  expect(after.height).toBe(before.height);
  expect(mask.length).toBe(before.width * before.height);
  const diff: SceneDiff = { inside: 0, outside: 0 };
  for (let i = 0; i < mask.length; i += 1) {
    const o = i * 4;
    const changed =
      before.data[o] !== after.data[o] ||
      before.data[o + 1] !== after.data[o + 1] ||
      before.data[o + 2] !== after.data[o + 2];
    if (!changed) {
      continue;
    }
    if (mask[i] === 1) {
      diff.inside += 1;
    } else {
      diff.outside += 1;
    }
  }
  return diff;
}

describe("regenerate end-to-end", () => {
  let server: ChildProcess;
  let serverLog = "";
  let outDir: string;
  let client: EngineClient;
  let controller: GenerationController;

  const doc = buildDocument();
  let firstJob: HistoryEntry;
  let firstScene: Uint8Array;
  let firstObjectA: Uint8Array;
  let firstObjectC: Uint8Array;

  beforeAll(async () => {
    const port = await freePort();
    outDir = mkdtempSync(join(tmpdir(), "layoutgen-e2e-"));
    server = spawn(
      "python3",
      [
        "-m",
        "layoutgen.cli",
        "serve",
        "--host",
        "127.0.0.1",
        "--port",
        String(port),
        "--out",
        outDir,
        "--set",
        "sog.num_steps=8",
        "--set",
        "cc.num_steps=8",
        "--set",
        "cc.t_min=0",
      ],
      { cwd: repoDir, stdio: ["ignore", "ignore", "pipe"] },
    );
    server.stderr?.on("data", (chunk: Buffer) => {
      serverLog += chunk.toString();
    });

    client = new EngineClient(`http://127.0.0.1:${port}`);
    controller = new GenerationController(client);

    const deadline = Date.now() + 40_000;
    for (;;) {
      try {
        const health = await client.health();
        expect(health.status).toBe("ok");
        break;
      } catch {
        if (server.exitCode !== null) {
          throw new Error(`server exited early:\n${serverLog}`);
        }
        if (Date.now() > deadline) {
          throw new Error(`server never became healthy:\n${serverLog}`);
        }
        await sleep(250);
      }
    }
  });

  afterAll(async () => {
    server?.kill();
    await sleep(200);
    if (outDir) {
      rmSync(outDir, { recursive: true, force: true });
    }
  });

  it("generates a scene from the editor document", async () => {
    firstJob = await controller.generate(doc);
    expect(firstJob.state).toBe("done");

    const snapshot = await client.getJob(firstJob.jobId);
    expect(snapshot.state).toBe("done");
    expect(snapshot.objects).toEqual({ a: "done", b: "done", c: "done" });
    expect(snapshot.error).toBeNull();

    firstScene = await client.fetchSceneImage(firstJob.jobId);
    const scene = PNG.sync.read(Buffer.from(firstScene));
    expect(scene.width).toBe(SIZE);
    expect(scene.height).toBe(SIZE);

    firstObjectA = await client.fetchObjectImage(firstJob.jobId, "a");
    firstObjectC = await client.fetchObjectImage(firstJob.jobId, "c");
  });

  it("reproduces the scene byte-for-byte when regenerating with the same seed", async () => {
    const entry = await controller.regenerate(doc, "b", getLayer(doc, "b").seed);
    expect(entry.state).toBe("done");
    expect(entry.jobId).not.toBe(firstJob.jobId);

    const snapshot = await client.getJob(entry.jobId);
    expect(snapshot.source_job_id).toBe(firstJob.jobId);

    const scene = await client.fetchSceneImage(entry.jobId);
    expect(Buffer.from(scene).equals(Buffer.from(firstScene))).toBe(true);
  });

  it("keeps everything outside the target mask untouched on a new-seed regenerate", async () => {
    const entry = await controller.regenerate(doc, "b", 999);
    expect(entry.state).toBe("done");

    const scene = await client.fetchSceneImage(entry.jobId);
    const diff = diffByMask(firstScene, scene, getLayer(doc, "b").mask);
    expect(diff.outside).toBe(0);

    const objectA = await client.fetchObjectImage(entry.jobId, "a");
    const objectC = await client.fetchObjectImage(entry.jobId, "c");
    expect(Buffer.from(objectA).equals(Buffer.from(firstObjectA))).toBe(true);
    expect(Buffer.from(objectC).equals(Buffer.from(firstObjectC))).toBe(true);
  });

  it("keeps the job history append-only with one entry per action", async () => {
    const ids = controller.history.map((entry) => entry.jobId);
    expect(ids).toHaveLength(3);
    expect(new Set(ids).size).toBe(3);
    expect(controller.history.map((entry) => entry.kind)).toEqual([
      "generate",
      "regenerate",
      "regenerate",
    ]);
    expect(controller.history[0]).toBe(firstJob);
  });

  it("confines a prompt edit's scene diff to the edited layer's mask", async () => {
    const edited = updateLayer(doc, "b", { prompt: "a wooden crate" });
    const entry = await controller.generate(edited);
    expect(entry.state).toBe("done");

    const scene = await client.fetchSceneImage(entry.jobId);
    const diff = diffByMask(firstScene, scene, getLayer(doc, "b").mask);
    expect(diff.inside).toBeGreaterThan(0);
    expect(diff.outside).toBe(0);
  });

  it("rejects an invalid layout with a structured error body", async () => {
    const layout = {
      canvas: { h: 4, w: 4 },
      global_prompt: "x",
      objects: [{ id: "a", prompt: "y", seed: -3, mask: { rle: [0, 16] } }],
    };
    const error = await client.submitJob(layout).then(
      () => null,
      (err: unknown) => err,
    );
    expect(error).toBeInstanceOf(ApiError);
    const apiError = error as ApiError;
    expect(apiError.status).toBe(400);
    expect(apiError.code).toBe("validation_error");
    expect(apiError.message).toContain("seed");
  });
});

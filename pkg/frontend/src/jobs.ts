/** Job polling and per-document generation state.
 *
 * Jobs are observed by polling `GET /api/jobs/{id}` once a second — the API
 * has no streaming channel, and a second is well under the engine's job
 * granularity. The controller keeps one append-only history of every job it
 * started; completed results are never mutated, so undo is just moving the
 * view pointer to an earlier entry.
 */

import type { EngineClient, EngineErrorBody, JobSnapshot } from "./api.js";
import type { CanvasDocument } from "./document.js";
import { getLayer } from "./document.js";
import { exportLayout } from "./layout-file.js";
import { BusyError } from "./errors.js";

export const DEFAULT_POLL_INTERVAL_MS = 1000;

export class JobFailedError extends Error {
  readonly snapshot: JobSnapshot;
  readonly jobError: EngineErrorBody | null;

  constructor(snapshot: JobSnapshot) {
    super(snapshot.error?.message ?? `job ${snapshot.job_id} failed`);
    this.name = "JobFailedError";
    this.snapshot = snapshot;
    this.jobError = snapshot.error;
  }
}

export interface WaitOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (snapshot: JobSnapshot) => void;
  /** Injectable delay, for tests. */
  sleep?: (ms: number) => Promise<void>;
}

const realSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll a job until it finishes; resolves on `done`, throws on `failed`. */
export async function waitForJob(
  client: EngineClient,
  jobId: string,
  options: WaitOptions = {},
): Promise<JobSnapshot> {
  const intervalMs = options.intervalMs ?? DEFAULT_POLL_INTERVAL_MS;
  const sleep = options.sleep ?? realSleep;
  const deadline = options.timeoutMs === undefined ? null : Date.now() + options.timeoutMs;
  for (;;) {
    const snapshot = await client.getJob(jobId);
    options.onUpdate?.(snapshot);
    if (snapshot.state === "done") {
      return snapshot;
    }
    if (snapshot.state === "failed") {
      throw new JobFailedError(snapshot);
    }
    if (deadline !== null && Date.now() >= deadline) {
      throw new Error(`timed out waiting for job ${jobId}`);
    }
    await sleep(intervalMs);
  }
}

export type JobKind = "generate" | "regenerate";

export interface HistoryEntry {
  readonly jobId: string;
  readonly kind: JobKind;
  /** Target layer for regenerations. */
  readonly layerId?: string;
  readonly seed?: number;
  readonly sourceJobId?: string;
  readonly startedAt: number;
  state: string;
  error: EngineErrorBody | null;
}

export interface ControllerOptions {
  intervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onChange?: () => void;
  now?: () => number;
}

/** Drives generation for a single document.
 *
 * At most one job is in flight at a time — `generate`/`regenerate` throw
 * BusyError while one is running. Every action appends a history entry and
 * finished entries are immutable apart from their state/error fields, which
 * settle once when the job completes.
 */
export class GenerationController {
  private readonly client: EngineClient;
  private readonly options: ControllerOptions;
  private readonly entries: HistoryEntry[] = [];
  private inFlight = false;
  private viewIndex: number | null = null;

  constructor(client: EngineClient, options: ControllerOptions = {}) {
    this.client = client;
    this.options = options;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  /** The entry whose result the UI is showing, if any. */
  current(): HistoryEntry | null {
    return this.viewIndex === null ? null : this.entries[this.viewIndex];
  }

  /** The most recent successfully finished job. */
  latestDone(): HistoryEntry | null {
    for (let i = this.entries.length - 1; i >= 0; i -= 1) {
      if (this.entries[i].state === "done") {
        return this.entries[i];
      }
    }
    return null;
  }

  /** Step the view pointer to the previous finished job, if there is one. */
  undo(): HistoryEntry | null {
    const start = (this.viewIndex ?? this.entries.length) - 1;
    for (let i = start; i >= 0; i -= 1) {
      if (this.entries[i].state === "done") {
        this.viewIndex = i;
        this.options.onChange?.();
        return this.entries[i];
      }
    }
    return null;
  }

  /** Step the view pointer to the next finished job, if there is one. */
  redo(): HistoryEntry | null {
    if (this.viewIndex === null) {
      return null;
    }
    for (let i = this.viewIndex + 1; i < this.entries.length; i += 1) {
      if (this.entries[i].state === "done") {
        this.viewIndex = i;
        this.options.onChange?.();
        return this.entries[i];
      }
    }
    return null;
  }

  /** Point the view at a specific history entry (e.g. clicked in a list). */
  view(jobId: string): HistoryEntry | null {
    const index = this.entries.findIndex((e) => e.jobId === jobId);
    if (index < 0 || this.entries[index].state !== "done") {
      return null;
    }
    this.viewIndex = index;
    this.options.onChange?.();
    return this.entries[index];
  }

  /** Export the document and run a full generation job to completion. */
  async generate(
    doc: CanvasDocument,
    overrides: Record<string, unknown> = {},
  ): Promise<HistoryEntry> {
    if (this.inFlight) {
      throw new BusyError();
    }
    const layout = exportLayout(doc); // validate before claiming the slot
    return this.run({ kind: "generate" }, () => this.client.submitJob(layout, overrides));
  }

  /** Rerun one layer of the latest finished job with a new seed. */
  async regenerate(doc: CanvasDocument, layerId: string, seed?: number): Promise<HistoryEntry> {
    if (this.inFlight) {
      throw new BusyError();
    }
    getLayer(doc, layerId); // fail fast on unknown layers
    const source = this.latestDone();
    if (!source) {
      throw new Error("no finished job to regenerate from");
    }
    return this.run({ kind: "regenerate", layerId, seed, sourceJobId: source.jobId }, () =>
      this.client.regenerateObject(source.jobId, layerId, seed),
    );
  }

  private async run(
    meta: { kind: JobKind; layerId?: string; seed?: number; sourceJobId?: string },
    submit: () => Promise<string>,
  ): Promise<HistoryEntry> {
    if (this.inFlight) {
      throw new BusyError();
    }
    this.inFlight = true;
    try {
      const jobId = await submit();
      const entry: HistoryEntry = {
        jobId,
        ...meta,
        startedAt: (this.options.now ?? Date.now)(),
        state: "queued",
        error: null,
      };
      this.entries.push(entry);
      this.options.onChange?.();
      try {
        const snapshot = await waitForJob(this.client, jobId, {
          intervalMs: this.options.intervalMs,
          sleep: this.options.sleep,
          onUpdate: (snap) => {
            entry.state = snap.state;
            this.options.onChange?.();
          },
        });
        entry.state = snapshot.state;
        this.viewIndex = this.entries.indexOf(entry);
        return entry;
      } catch (err) {
        if (err instanceof JobFailedError) {
          entry.state = "failed";
          entry.error = err.jobError;
          this.options.onChange?.();
        }
        throw err;
      }
    } finally {
      this.inFlight = false;
      this.options.onChange?.();
    }
  }
}

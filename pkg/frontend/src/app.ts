/** Browser entry point: wires the editor modules to the DOM.
 *
 * All document, mask, layout-file, and job logic lives in the imported
 * modules, where the test suite covers it; this file only maps DOM events
 * onto those calls and paints the results. Serve the built bundle through
 * the engine so the UI and the API share an origin:
 *
 *   layoutgen serve --ui-dir frontend/dist
 */

import { ApiError, EngineClient } from "./api.js";
import {
  addLayer,
  createDocument,
  getLayer,
  markClean,
  maskPixelCount,
  moveLayer,
  randomSeed,
  removeLayer,
  rerollUnlockedSeeds,
  setGlobalPrompt,
  updateLayer,
  MAX_SEED,
  type CanvasDocument,
} from "./document.js";
import { BusyError, ParseError, ValidationError } from "./errors.js";
import { GenerationController, JobFailedError, type HistoryEntry } from "./jobs.js";
import { exportLayoutText, parseLayoutText } from "./layout-file.js";
import { colorForLayer, renderOverlay, type MaskOverlay } from "./overlay.js";
import {
  applyBrushStroke,
  applyPolygonFill,
  rasterizeStroke,
  type BrushMode,
  type StrokePoint,
} from "./raster.js";
import { DocumentStore } from "./storage.js";

const MAX_VIEW_PX = 512;
const AUTOSAVE = "autosave";

type Tool = "brush" | "polygon";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// ---------------------------------------------------------------------------
// State

const client = new EngineClient("");
const controller = new GenerationController(client, { onChange: () => renderJobs() });
const store = new DocumentStore(window.localStorage);

let doc = restoreDocument();
let selectedLayerId: string | null = doc.layers.length > 0 ? doc.layers[0].id : null;
let tool: Tool = "brush";
let mode: BrushMode = "paint";
let brushRadius = 3;
let overlayOpacity = 0.4;
let strokePoints: StrokePoint[] = [];
let polygonPoints: StrokePoint[] = [];
let sceneImage: HTMLImageElement | null = null;
let shownJobId: string | null = null;

function restoreDocument(): CanvasDocument {
  try {
    const saved = store.load(AUTOSAVE);
    if (saved !== null) {
      return saved;
    }
  } catch {
    // fall through to a fresh document if the autosave is unreadable
  }
  return addLayer(createDocument(64, 64, "a simple scene"), {});
}

function setDoc(next: CanvasDocument): void {
  doc = next;
  try {
    store.save(AUTOSAVE, doc);
  } catch {
    // storage may be full or unavailable; editing still works in memory
  }
  renderDocMeta();
  renderLayers();
  renderCanvas();
}

// ---------------------------------------------------------------------------
// Error banner

function showMessage(message: string): void {
  el<HTMLSpanElement>("banner-message").textContent = message;
  el<HTMLDivElement>("banner").classList.remove("hidden");
}

function clearBanner(): void {
  el<HTMLDivElement>("banner").classList.add("hidden");
}

function showError(err: unknown): void {
  if (err instanceof BusyError) {
    showMessage("a generation is already running — wait for it to finish");
  } else if (err instanceof JobFailedError) {
    const body = err.jobError;
    showMessage(
      body === null ? "job failed" : `job failed — ${body.code} (${body.stage}): ${body.message}`,
    );
  } else if (err instanceof ApiError) {
    const stage = err.stage === "" ? "" : ` (${err.stage})`;
    showMessage(`engine error — ${err.code}${stage}: ${err.message}`);
  } else if (err instanceof ValidationError || err instanceof ParseError) {
    showMessage(err.message);
  } else if (err instanceof Error) {
    showMessage(err.message);
  } else {
    showMessage(String(err));
  }
}

// ---------------------------------------------------------------------------
// Canvas

function viewScale(): number {
  return Math.max(1, Math.floor(MAX_VIEW_PX / Math.max(doc.width, doc.height)));
}

/** Map a pointer event to mask coordinates (pixel centers at integers). */
function maskPoint(event: PointerEvent, canvas: HTMLCanvasElement): StrokePoint {
  const rect = canvas.getBoundingClientRect();
  const scale = viewScale();
  return {
    x: (event.clientX - rect.left) / scale - 0.5,
    y: (event.clientY - rect.top) / scale - 0.5,
  };
}

/** The selected layer's mask with the in-progress brush stroke applied. */
function previewMask(layerId: string, mask: Uint8Array): Uint8Array {
  if (layerId !== selectedLayerId || strokePoints.length === 0 || tool !== "brush") {
    return mask;
  }
  const preview = new Uint8Array(mask);
  rasterizeStroke(preview, doc.width, doc.height, { points: strokePoints, radius: brushRadius }, mode);
  return preview;
}

function renderCanvas(): void {
  const canvas = el<HTMLCanvasElement>("editor-canvas");
  const scale = viewScale();
  canvas.width = doc.width * scale;
  canvas.height = doc.height * scale;

  const work = document.createElement("canvas");
  work.width = doc.width;
  work.height = doc.height;
  const workCtx = work.getContext("2d");
  const ctx = canvas.getContext("2d");
  if (workCtx === null || ctx === null) {
    return;
  }

  workCtx.fillStyle = "#d9d9df";
  workCtx.fillRect(0, 0, doc.width, doc.height);
  if (sceneImage !== null && sceneImage.width === doc.width && sceneImage.height === doc.height) {
    workCtx.drawImage(sceneImage, 0, 0);
  }

  const frame = workCtx.getImageData(0, 0, doc.width, doc.height);
  const overlays: MaskOverlay[] = doc.layers.map((layer, i) => ({
    mask: previewMask(layer.id, layer.mask),
    color: colorForLayer(i),
  }));
  const blended = renderOverlay(frame.data, doc.width, doc.height, overlays, overlayOpacity);
  frame.data.set(blended);
  workCtx.putImageData(frame, 0, 0);

  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(work, 0, 0, canvas.width, canvas.height);

  if (polygonPoints.length > 0) {
    ctx.strokeStyle = "#e0e024";
    ctx.lineWidth = 2;
    ctx.beginPath();
    polygonPoints.forEach((p, i) => {
      const x = (p.x + 0.5) * scale;
      const y = (p.y + 0.5) * scale;
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  }
}

function commitPolygon(): void {
  if (polygonPoints.length < 3) {
    showMessage("a polygon needs at least three vertices");
    return;
  }
  if (selectedLayerId === null) {
    polygonPoints = [];
    return;
  }
  const points = polygonPoints;
  polygonPoints = [];
  try {
    setDoc(applyPolygonFill(doc, selectedLayerId, points, mode));
  } catch (err) {
    showError(err);
    renderCanvas();
  }
}

function wireCanvas(): void {
  const canvas = el<HTMLCanvasElement>("editor-canvas");

  canvas.addEventListener("pointerdown", (event) => {
    if (event.button !== 0) {
      return;
    }
    if (selectedLayerId === null) {
      showMessage("add a layer before painting");
      return;
    }
    const point = maskPoint(event, canvas);
    if (tool === "polygon") {
      polygonPoints.push(point);
      renderCanvas();
      return;
    }
    canvas.setPointerCapture(event.pointerId);
    strokePoints = [point];
    renderCanvas();
  });

  canvas.addEventListener("pointermove", (event) => {
    if (strokePoints.length === 0 || tool !== "brush") {
      return;
    }
    strokePoints.push(maskPoint(event, canvas));
    renderCanvas();
  });

  canvas.addEventListener("pointerup", () => {
    if (strokePoints.length === 0 || tool !== "brush" || selectedLayerId === null) {
      return;
    }
    const stroke = { points: strokePoints, radius: brushRadius };
    strokePoints = [];
    try {
      setDoc(applyBrushStroke(doc, selectedLayerId, stroke, mode));
    } catch (err) {
      showError(err);
      renderCanvas();
    }
  });

  canvas.addEventListener("pointercancel", () => {
    strokePoints = [];
    renderCanvas();
  });

  canvas.addEventListener("dblclick", (event) => {
    event.preventDefault();
    if (tool !== "polygon") {
      return;
    }
    // the second click of the double-click added a duplicate vertex
    polygonPoints.pop();
    commitPolygon();
  });

  window.addEventListener("keydown", (event) => {
    const target = event.target;
    if (target instanceof HTMLInputElement || target instanceof HTMLSelectElement) {
      return;
    }
    if (event.key === "Escape") {
      strokePoints = [];
      polygonPoints = [];
      renderCanvas();
    } else if (event.key === "Enter" && tool === "polygon" && polygonPoints.length > 0) {
      commitPolygon();
    }
  });
}

// ---------------------------------------------------------------------------
// Toolbar

function setTool(next: Tool): void {
  tool = next;
  polygonPoints = [];
  el<HTMLButtonElement>("tool-brush").classList.toggle("active", tool === "brush");
  el<HTMLButtonElement>("tool-polygon").classList.toggle("active", tool === "polygon");
  renderCanvas();
}

function setMode(next: BrushMode): void {
  mode = next;
  el<HTMLButtonElement>("mode-paint").classList.toggle("active", mode === "paint");
  el<HTMLButtonElement>("mode-erase").classList.toggle("active", mode === "erase");
}

function wireToolbar(): void {
  el<HTMLButtonElement>("tool-brush").addEventListener("click", () => setTool("brush"));
  el<HTMLButtonElement>("tool-polygon").addEventListener("click", () => setTool("polygon"));
  el<HTMLButtonElement>("mode-paint").addEventListener("click", () => setMode("paint"));
  el<HTMLButtonElement>("mode-erase").addEventListener("click", () => setMode("erase"));

  const radius = el<HTMLInputElement>("brush-radius");
  radius.addEventListener("input", () => {
    brushRadius = Number(radius.value);
    el<HTMLSpanElement>("brush-radius-value").textContent = radius.value;
  });

  const opacity = el<HTMLInputElement>("overlay-opacity");
  opacity.addEventListener("input", () => {
    overlayOpacity = Number(opacity.value);
    el<HTMLSpanElement>("overlay-opacity-value").textContent = overlayOpacity.toFixed(2);
    renderCanvas();
  });
}

// ---------------------------------------------------------------------------
// Layer panel

function selectLayer(layerId: string): void {
  selectedLayerId = layerId;
  renderLayers();
  renderCanvas();
}

function layerRow(index: number): HTMLDivElement {
  const layer = doc.layers[index];
  const row = document.createElement("div");
  row.className = "layer-row";
  row.classList.toggle("selected", layer.id === selectedLayerId);
  const [r, g, b] = colorForLayer(index);
  row.style.borderLeftColor = `rgb(${r}, ${g}, ${b})`;
  row.addEventListener("click", () => selectLayer(layer.id));

  const idLabel = document.createElement("span");
  idLabel.className = "layer-id";
  idLabel.textContent = layer.id;
  row.appendChild(idLabel);

  const pixels = document.createElement("span");
  pixels.className = "pixels";
  pixels.textContent = `${maskPixelCount(layer.mask)} px`;
  row.appendChild(pixels);

  const prompt = document.createElement("input");
  prompt.type = "text";
  prompt.className = "prompt";
  prompt.placeholder = "object prompt";
  prompt.value = layer.prompt;
  prompt.addEventListener("change", () => {
    setDoc(updateLayer(doc, layer.id, { prompt: prompt.value }));
  });
  row.appendChild(prompt);

  const seed = document.createElement("input");
  seed.type = "number";
  seed.className = "seed";
  seed.min = "0";
  seed.max = String(MAX_SEED);
  seed.step = "1";
  seed.value = String(layer.seed);
  seed.title = "seed";
  seed.addEventListener("change", () => {
    try {
      setDoc(updateLayer(doc, layer.id, { seed: Number(seed.value) }));
    } catch (err) {
      showError(err);
      seed.value = String(getLayer(doc, layer.id).seed);
    }
  });
  row.appendChild(seed);

  const lock = document.createElement("label");
  const lockBox = document.createElement("input");
  lockBox.type = "checkbox";
  lockBox.checked = layer.locked;
  lockBox.title = "locked layers keep their seed when rerolling";
  lockBox.addEventListener("change", () => {
    setDoc(updateLayer(doc, layer.id, { locked: lockBox.checked }));
  });
  lock.appendChild(lockBox);
  lock.appendChild(document.createTextNode("lock"));
  row.appendChild(lock);

  const reroll = document.createElement("button");
  reroll.type = "button";
  reroll.textContent = "reroll";
  reroll.title = "draw a new seed for this layer";
  reroll.disabled = layer.locked;
  reroll.addEventListener("click", () => {
    setDoc(updateLayer(doc, layer.id, { seed: randomSeed() }));
  });
  row.appendChild(reroll);

  const regen = document.createElement("button");
  regen.type = "button";
  regen.textContent = "regenerate";
  regen.title = "re-run this object on top of the last finished job";
  regen.disabled = controller.busy || controller.latestDone() === null;
  regen.addEventListener("click", () => {
    void regenerateLayer(layer.id);
  });
  row.appendChild(regen);

  const up = document.createElement("button");
  up.type = "button";
  up.textContent = "↑";
  up.title = "move layer up";
  up.disabled = index === 0;
  up.addEventListener("click", () => {
    setDoc(moveLayer(doc, layer.id, -1));
  });
  row.appendChild(up);

  const down = document.createElement("button");
  down.type = "button";
  down.textContent = "↓";
  down.title = "move layer down";
  down.disabled = index === doc.layers.length - 1;
  down.addEventListener("click", () => {
    setDoc(moveLayer(doc, layer.id, 1));
  });
  row.appendChild(down);

  const remove = document.createElement("button");
  remove.type = "button";
  remove.textContent = "✕";
  remove.title = "delete layer";
  remove.addEventListener("click", (event) => {
    event.stopPropagation();
    setDoc(removeLayer(doc, layer.id));
    if (selectedLayerId === layer.id) {
      selectedLayerId = doc.layers.length > 0 ? doc.layers[0].id : null;
    }
    renderLayers();
    renderCanvas();
  });
  row.appendChild(remove);

  return row;
}

function renderLayers(): void {
  const container = el<HTMLDivElement>("layers");
  container.textContent = "";
  doc.layers.forEach((_, index) => container.appendChild(layerRow(index)));
}

// ---------------------------------------------------------------------------
// Jobs

async function runJob(action: () => Promise<HistoryEntry>): Promise<void> {
  clearBanner();
  try {
    await action();
  } catch (err) {
    showError(err);
  } finally {
    renderJobs();
    renderLayers();
  }
}

async function regenerateLayer(layerId: string): Promise<void> {
  const layer = getLayer(doc, layerId);
  let seed = layer.seed;
  if (!layer.locked) {
    seed = randomSeed();
    setDoc(updateLayer(doc, layerId, { seed }));
  }
  await runJob(() => controller.regenerate(doc, layerId, seed));
}

function syncSceneView(): void {
  const current = controller.current();
  if (current === null || current.state !== "done" || current.jobId === shownJobId) {
    return;
  }
  shownJobId = current.jobId;
  const image = new Image();
  image.onload = () => {
    sceneImage = image;
    renderCanvas();
  };
  image.src = client.sceneImageUrl(current.jobId);
}

function historyItem(entry: HistoryEntry, position: number): HTMLLIElement {
  const item = document.createElement("li");
  const target = entry.layerId === undefined ? "" : ` ${entry.layerId}`;
  item.textContent = `#${position} ${entry.kind}${target} — ${entry.state}`;
  item.classList.toggle("done", entry.state === "done");
  item.classList.toggle("failed", entry.state === "failed");
  item.classList.toggle("viewing", controller.current()?.jobId === entry.jobId);
  if (entry.state === "done") {
    item.title = `view job ${entry.jobId}`;
    item.addEventListener("click", () => {
      controller.view(entry.jobId);
      renderJobs();
    });
  }
  return item;
}

function renderJobs(): void {
  el<HTMLButtonElement>("btn-generate").disabled = controller.busy;
  el<HTMLButtonElement>("btn-generate-reroll").disabled = controller.busy;

  const status = el<HTMLSpanElement>("job-status");
  if (controller.busy) {
    const last = controller.history[controller.history.length - 1];
    status.textContent = last === undefined ? "working…" : last.state;
    status.classList.add("busy");
  } else {
    status.textContent = "idle";
    status.classList.remove("busy");
  }

  const list = el<HTMLOListElement>("history");
  list.textContent = "";
  const entries = controller.history;
  for (let i = entries.length - 1; i >= 0; i -= 1) {
    list.appendChild(historyItem(entries[i], i + 1));
  }

  syncSceneView();
}

function wireJobs(): void {
  el<HTMLButtonElement>("btn-generate").addEventListener("click", () => {
    void runJob(() => controller.generate(doc));
  });
  el<HTMLButtonElement>("btn-generate-reroll").addEventListener("click", () => {
    setDoc(rerollUnlockedSeeds(doc));
    void runJob(() => controller.generate(doc));
  });
  el<HTMLButtonElement>("btn-undo").addEventListener("click", () => {
    controller.undo();
    renderJobs();
  });
  el<HTMLButtonElement>("btn-redo").addEventListener("click", () => {
    controller.redo();
    renderJobs();
  });
}

// ---------------------------------------------------------------------------
// Document controls

function renderDocMeta(): void {
  el<HTMLSpanElement>("dirty-flag").textContent = doc.dirty ? "●" : "";
  const globalPrompt = el<HTMLInputElement>("global-prompt");
  if (globalPrompt.value !== doc.globalPrompt) {
    globalPrompt.value = doc.globalPrompt;
  }
}

function renderStoreList(): void {
  const select = el<HTMLSelectElement>("saved-docs");
  select.textContent = "";
  for (const name of store.list()) {
    if (name === AUTOSAVE) {
      continue;
    }
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    select.appendChild(option);
  }
}

function resetView(): void {
  selectedLayerId = doc.layers.length > 0 ? doc.layers[0].id : null;
  sceneImage = null;
  shownJobId = null;
  strokePoints = [];
  polygonPoints = [];
  renderDocMeta();
  renderLayers();
  renderCanvas();
}

function wireDocumentControls(): void {
  el<HTMLInputElement>("global-prompt").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    setDoc(setGlobalPrompt(doc, input.value));
  });

  el<HTMLButtonElement>("btn-new-doc").addEventListener("click", () => {
    try {
      const width = Number(el<HTMLInputElement>("new-width").value);
      const height = Number(el<HTMLInputElement>("new-height").value);
      setDoc(addLayer(createDocument(width, height), {}));
      resetView();
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>("btn-add-layer").addEventListener("click", () => {
    try {
      const next = addLayer(doc, {});
      setDoc(next);
      selectedLayerId = next.layers[next.layers.length - 1].id;
      renderLayers();
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>("btn-save-doc").addEventListener("click", () => {
    const name = el<HTMLInputElement>("doc-name").value.trim();
    if (name === "" || name === AUTOSAVE) {
      showMessage(`pick a document name (anything but ${JSON.stringify(AUTOSAVE)})`);
      return;
    }
    try {
      setDoc(markClean(doc));
      store.save(name, doc);
      renderStoreList();
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>("btn-load-doc").addEventListener("click", () => {
    const name = el<HTMLSelectElement>("saved-docs").value;
    if (name === "") {
      showMessage("no saved document selected");
      return;
    }
    try {
      const loaded = store.load(name);
      if (loaded === null) {
        showMessage(`no saved document named ${JSON.stringify(name)}`);
        return;
      }
      setDoc(loaded);
      el<HTMLInputElement>("doc-name").value = name;
      resetView();
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>("btn-delete-doc").addEventListener("click", () => {
    const name = el<HTMLSelectElement>("saved-docs").value;
    if (name !== "") {
      store.remove(name);
      renderStoreList();
    }
  });

  el<HTMLButtonElement>("btn-download").addEventListener("click", () => {
    clearBanner();
    try {
      const text = exportLayoutText(doc);
      const name = el<HTMLInputElement>("doc-name").value.trim() || "layout";
      const blob = new Blob([text], { type: "application/json" });
      const url = URL.createObjectURL(blob);
      const anchor = document.createElement("a");
      anchor.href = url;
      anchor.download = `${name}.json`;
      anchor.click();
      URL.revokeObjectURL(url);
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLInputElement>("file-upload").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    input.value = "";
    if (file === undefined) {
      return;
    }
    clearBanner();
    void file.text().then(
      (text) => {
        try {
          setDoc(parseLayoutText(text));
          resetView();
        } catch (err) {
          showError(err);
        }
      },
      (err: unknown) => showError(err),
    );
  });
}

// ---------------------------------------------------------------------------
// Boot

function main(): void {
  el<HTMLButtonElement>("banner-dismiss").addEventListener("click", clearBanner);
  wireToolbar();
  wireCanvas();
  wireJobs();
  wireDocumentControls();
  renderStoreList();
  renderDocMeta();
  renderLayers();
  renderCanvas();
  renderJobs();
}

main();

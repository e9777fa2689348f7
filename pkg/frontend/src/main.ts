import { ApiClient, ApiError } from "./api.js";
import { entriesInRect, drawScene, hitTest, type SceneState } from "./render.js";
import { confirmNavigation, DirtyBuffer, nextUnreviewed, saveCorrections } from "./state.js";
import { ViewTransform } from "./transform.js";
import type { FrameInfo, FramePayload } from "./types.js";

const api = new ApiClient("");

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const sequenceSelect = document.getElementById("sequence") as HTMLSelectElement;
const frameLabel = document.getElementById("frame-label") as HTMLSpanElement;
const statusLabel = document.getElementById("status") as HTMLSpanElement;
const flagsLabel = document.getElementById("flags") as HTMLSpanElement;
const saveButton = document.getElementById("save") as HTMLButtonElement;
const prevButton = document.getElementById("prev") as HTMLButtonElement;
const nextButton = document.getElementById("next") as HTMLButtonElement;
const unreviewedButton = document.getElementById("next-unreviewed") as HTMLButtonElement;
const lidarToggle = document.getElementById("toggle-lidar") as HTMLInputElement;
const weightToggle = document.getElementById("toggle-weight") as HTMLInputElement;

const view = new ViewTransform(10, 0, 18, canvas.width, canvas.height);
const state: SceneState = {
  showLidar: true,
  colorByWeight: false,
  selection: new Set<number>(),
  buffer: new DirtyBuffer(),
  lasso: null,
};

let frames: FrameInfo[] = [];
let frameIndex = 0;
let payload: FramePayload | null = null;
let saving = false;

function setStatus(text: string): void {
  statusLabel.textContent = text;
}

function redraw(): void {
  if (payload) {
    drawScene(ctx, payload, view, state);
    const dirty = state.buffer.isEmpty ? "" : ` | ${state.buffer.size} unsaved`;
    frameLabel.textContent = `frame ${frameIndex + 1}/${frames.length} @ ${payload.frame_ts_ns} ns${dirty}`;
    flagsLabel.textContent = payload.flags.length ? `flags: ${payload.flags.join(", ")}` : "";
    saveButton.disabled = state.buffer.isEmpty || saving;
  }
}

async function loadFrame(index: number): Promise<void> {
  if (!frames.length) return;
  frameIndex = Math.min(Math.max(index, 0), frames.length - 1);
  payload = await api.frame(sequenceSelect.value, frames[frameIndex].frame_ts_ns);
  state.selection.clear();
  state.buffer.clear();
  setStatus(payload.labeled ? "" : "frame has no predictions yet (run the pipeline)");
  redraw();
}

function navigate(index: number): void {
  if (index === frameIndex || index < 0 || index >= frames.length) return;
  if (!confirmNavigation(state.buffer, (msg) => window.confirm(msg))) return;
  void loadFrame(index);
}

async function loadSequence(): Promise<void> {
  frames = await api.frames(sequenceSelect.value);
  await loadFrame(0);
}

async function save(): Promise<void> {
  if (!payload || state.buffer.isEmpty || saving) return;
  saving = true;
  setStatus("saving...");
  try {
    const n = await saveCorrections(api, payload.sequence, payload.frame_ts_ns, state.buffer);
    setStatus(`saved ${n} correction(s)`);
    frames[frameIndex].reviewed = true;
    payload = await api.frame(payload.sequence, payload.frame_ts_ns);
  } catch (err) {
    // buffer is intact; surface the failure and keep editing state
    if (err instanceof ApiError) {
      setStatus(`save rejected (${err.status}): ${JSON.stringify(err.body)}`);
    } else {
      setStatus(`save failed: ${String(err)}`);
    }
  } finally {
    saving = false;
    redraw();
  }
}

function toggleSelection(): void {
  if (!payload || !state.selection.size) return;
  for (const index of state.selection) {
    state.buffer.toggle(payload.radar[index]);
  }
  redraw();
}

// --- canvas interaction: click select, drag lasso, shift-drag pan, wheel zoom

let dragStart: [number, number] | null = null;
let panning = false;

canvas.addEventListener("mousedown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  dragStart = [ev.clientX - rect.left, ev.clientY - rect.top];
  panning = ev.shiftKey || ev.button === 1;
});

canvas.addEventListener("mousemove", (ev) => {
  if (!dragStart) return;
  const rect = canvas.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const y = ev.clientY - rect.top;
  if (panning) {
    view.panByPixels(x - dragStart[0], y - dragStart[1]);
    dragStart = [x, y];
  } else {
    state.lasso = { x0: dragStart[0], y0: dragStart[1], x1: x, y1: y };
  }
  redraw();
});

window.addEventListener("mouseup", (ev) => {
  if (!dragStart || !payload) {
    dragStart = null;
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const y = ev.clientY - rect.top;
  const moved = Math.hypot(x - dragStart[0], y - dragStart[1]) > 3;
  if (!panning) {
    if (moved && state.lasso) {
      const hits = entriesInRect(payload, view, state.lasso.x0, state.lasso.y0, x, y);
      if (!ev.ctrlKey) state.selection.clear();
      hits.forEach((h) => state.selection.add(h));
    } else {
      const hit = hitTest(payload, view, x, y);
      if (!ev.ctrlKey) state.selection.clear();
      if (hit !== null) {
        if (state.selection.has(hit)) state.selection.delete(hit);
        else state.selection.add(hit);
      }
    }
  }
  state.lasso = null;
  dragStart = null;
  panning = false;
  redraw();
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const rect = canvas.getBoundingClientRect();
  view.zoomAt(ev.clientX - rect.left, ev.clientY - rect.top, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
  redraw();
});

// --- keyboard: frame stepping and the high-throughput review loop

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) return;
  switch (ev.key) {
    case "ArrowLeft":
      navigate(frameIndex - 1);
      break;
    case "ArrowRight":
      navigate(frameIndex + 1);
      break;
    case "u": {
      const next = nextUnreviewed(frames, frameIndex);
      if (next >= 0) navigate(next);
      else setStatus("no unreviewed frames left");
      break;
    }
    case "t":
      toggleSelection();
      break;
    case "s":
      void save();
      break;
    case "l":
      lidarToggle.checked = !lidarToggle.checked;
      state.showLidar = lidarToggle.checked;
      redraw();
      break;
    case "w":
      weightToggle.checked = !weightToggle.checked;
      state.colorByWeight = weightToggle.checked;
      redraw();
      break;
  }
});

window.addEventListener("beforeunload", (ev) => {
  if (!state.buffer.isEmpty) {
    ev.preventDefault();
  }
});

sequenceSelect.addEventListener("change", () => {
  if (!confirmNavigation(state.buffer, (msg) => window.confirm(msg))) return;
  void loadSequence();
});
lidarToggle.addEventListener("change", () => {
  state.showLidar = lidarToggle.checked;
  redraw();
});
weightToggle.addEventListener("change", () => {
  state.colorByWeight = weightToggle.checked;
  redraw();
});
saveButton.addEventListener("click", () => void save());
prevButton.addEventListener("click", () => navigate(frameIndex - 1));
nextButton.addEventListener("click", () => navigate(frameIndex + 1));
unreviewedButton.addEventListener("click", () => {
  const next = nextUnreviewed(frames, frameIndex);
  if (next >= 0) navigate(next);
});

async function boot(): Promise<void> {
  const sequences = await api.sequences();
  sequenceSelect.innerHTML = "";
  for (const seq of sequences) {
    const option = document.createElement("option");
    option.value = seq.id;
    option.textContent = `${seq.id} (${seq.reviewed_count}/${seq.frame_count} reviewed)`;
    sequenceSelect.appendChild(option);
  }
  if (sequences.length) {
    await loadSequence();
  } else {
    setStatus("no sequences in the dataset");
  }
}

void boot();

// DOM wiring: binds the controller + renderer to the page.  Session id lives
// in the URL hash so views are shareable.

import { ApiClient } from "./api.js";
import { SessionController } from "./state.js";
import { Camera, defaultCamera, drawLayers, sceneLayers, Layer } from "./render.js";
import type { EditOp } from "./types.js";

const api = new ApiClient("");
const controller = new SessionController(api);
const cam: Camera = defaultCamera();

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function showError(message: string | null): void {
  const banner = $("error-banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function renderAttention(): void {
  const panel = $("attention-panel");
  panel.innerHTML = "";
  for (const bar of controller.attentionBars()) {
    const row = document.createElement("div");
    row.className = "attn-row";
    const label = document.createElement("span");
    label.textContent = `${bar.label} (${bar.weight.toFixed(3)})`;
    const track = document.createElement("div");
    track.className = "attn-track";
    const fill = document.createElement("div");
    fill.className = "attn-fill";
    fill.style.width = `${Math.round(bar.weight * 100)}%`;
    track.appendChild(fill);
    row.append(label, track);
    panel.appendChild(row);
  }
}

function renderHistory(): void {
  const list = $("history-list");
  list.innerHTML = "";
  controller.history.forEach((entry, i) => {
    const item = document.createElement("li");
    item.textContent = `${entry.op}: "${entry.prompt}" (seed ${entry.seed})`;
    const btn = document.createElement("button");
    btn.textContent = "replay";
    btn.onclick = () => run(() => controller.replay(i));
    item.appendChild(btn);
    list.appendChild(item);
  });
}

function renderScene(): void {
  const canvas = $("view") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  if (!controller.scene) return;
  const layers = sceneLayers(controller.scene.scene,
    controller.view.layers.entities, controller.view.layers.target,
    controller.view.selectedEntity);
  if (controller.lastResult && controller.view.layers.target) {
    const unchanged = new Set(controller.unchangedIndices());
    const last = layers[layers.length - 1];
    last.highlight = unchanged;
    last.highlightColor = "#ffd34d"; // pinned quarter in shape edits
  }
  if (controller.view.layers.guidingPoints && controller.lastResult &&
      controller.lastResult.guiding_points.length) {
    layers.push({ points: controller.lastResult.guiding_points,
                  color: "#ff5050", size: 2 } as Layer);
  }
  drawLayers(ctx, cam, layers, canvas.width, canvas.height);
  renderAttention();
  renderHistory();
  const sel = $("entity-select") as unknown as HTMLSelectElement;
  const labels = controller.scene.scene.entities.map((e) => e.label)
    .concat([controller.scene.scene.target.label]);
  if (sel.options.length !== labels.length) {
    sel.innerHTML = "";
    for (const label of labels) {
      const opt = document.createElement("option");
      opt.value = opt.textContent = label;
      sel.appendChild(opt);
    }
    sel.value = controller.scene.scene.target.label;
  }
  $("seed-echo").textContent = controller.lastResult
    ? `last seed: ${controller.lastResult.seed}` : "";
}

async function run(action: () => Promise<unknown>): Promise<void> {
  const buttons = document.querySelectorAll("button");
  buttons.forEach((b) => (b.disabled = true));
  try {
    showError(null);
    await action();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  } finally {
    buttons.forEach((b) => (b.disabled = false));
    renderScene();
  }
}

function bind(): void {
  $("btn-new-scene").onclick = () => run(async () => {
    const seed = parseInt(($("scene-seed") as unknown as HTMLInputElement).value, 10) || 0;
    await controller.init(seed);
    window.location.hash = controller.view.sessionId ?? "";
  });
  $("btn-submit").onclick = () => run(async () => {
    const prompt = ($("prompt") as unknown as HTMLInputElement).value;
    const op = ($("op-select") as unknown as HTMLSelectElement).value;
    const seedRaw = ($("gen-seed") as unknown as HTMLInputElement).value;
    const seed = seedRaw === "" ? undefined : parseInt(seedRaw, 10);
    const target = ($("entity-select") as unknown as HTMLSelectElement).value;
    if (op === "synthesize") {
      await controller.synthesize(prompt, seed);
    } else {
      await controller.edit(op as EditOp, prompt, target, seed);
    }
  });
  for (const name of ["entities", "target", "guidingPoints"] as const) {
    $(`toggle-${name}`).onclick = () => {
      controller.toggleLayer(name);
      renderScene();
    };
  }
  const canvas = $("view") as unknown as HTMLCanvasElement;
  let dragging = false, px = 0, py = 0;
  canvas.onmousedown = (e) => { dragging = true; px = e.clientX; py = e.clientY; };
  window.onmouseup = () => (dragging = false);
  window.onmousemove = (e) => {
    if (!dragging) return;
    cam.yaw += (e.clientX - px) * 0.01;
    cam.pitch = Math.min(1.5, Math.max(0.05, cam.pitch + (e.clientY - py) * 0.01));
    px = e.clientX; py = e.clientY;
    renderScene();
  };
  canvas.onwheel = (e) => {
    e.preventDefault();
    cam.zoom = Math.min(400, Math.max(30, cam.zoom * (e.deltaY < 0 ? 1.1 : 0.9)));
    renderScene();
  };
}

bind();
run(async () => {
  const health = await api.health();
  $("health").textContent = `model ${health.checkpoint} · N=${health.n_points}`;
  const fromHash = window.location.hash.slice(1);
  if (fromHash) {
    controller.view.sessionId = fromHash;
    await controller.refresh();
  } else {
    await controller.init(0);
    window.location.hash = controller.view.sessionId ?? "";
  }
});

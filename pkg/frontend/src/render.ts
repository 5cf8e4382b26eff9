// Canvas point renderer: a turntable orthographic camera drawing point
// sprites.  Pure presentation — it never touches the service or mutates
// session state.

import type { SceneRecord } from "./types.js";

export interface Camera {
  yaw: number;
  pitch: number;
  zoom: number;     // pixels per meter
  cx: number;       // world-space look-at
  cy: number;
  cz: number;
}

export const defaultCamera = (): Camera => ({
  yaw: 0.8, pitch: 0.5, zoom: 110, cx: 0, cy: 0, cz: 0.6,
});

export interface Layer {
  points: number[];        // flat xyz
  color: string;
  size: number;
  highlight?: Set<number>; // point indices drawn in the highlight color
  highlightColor?: string;
}

const ENTITY_COLORS = ["#4f8edc", "#4fc07c", "#b08ae0", "#d6a24f", "#5fc9c9",
                       "#8a9a4f", "#c97fa8", "#7f94c9"];

export function project(cam: Camera, x: number, y: number, z: number,
                        w: number, h: number): [number, number, number] {
  const dx = x - cam.cx, dy = y - cam.cy, dz = z - cam.cz;
  const cyaw = Math.cos(cam.yaw), syaw = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  const rx = cyaw * dx + syaw * dy;
  const ry = -syaw * dx + cyaw * dy;
  const sy = cp * dz - sp * ry;
  const depth = cp * ry + sp * dz;
  return [w / 2 + rx * cam.zoom, h / 2 - sy * cam.zoom, depth];
}

export function sceneLayers(scene: SceneRecord, showEntities: boolean,
                            showTarget: boolean, selected: string | null): Layer[] {
  const layers: Layer[] = [];
  if (showEntities) {
    scene.entities.forEach((e, i) => {
      const color = e.kind === "human" ? "#c8c8c8"
        : ENTITY_COLORS[(i - 1 + ENTITY_COLORS.length) % ENTITY_COLORS.length];
      layers.push({
        points: e.points,
        color: e.label === selected ? "#ffffff" : color,
        size: 2,
      });
    });
  }
  if (showTarget) {
    layers.push({
      points: scene.target.points,
      color: scene.target.label === selected ? "#ffef7a" : "#f0863c",
      size: 3,
    });
  }
  return layers;
}

export function drawLayers(ctx: CanvasRenderingContext2D, cam: Camera,
                           layers: Layer[], w: number, h: number): void {
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, w, h);
  // floor grid
  ctx.strokeStyle = "#262b36";
  ctx.lineWidth = 1;
  for (let g = -3; g <= 3; g++) {
    ctx.beginPath();
    let [x1, y1] = project(cam, g, -3, 0, w, h);
    let [x2, y2] = project(cam, g, 3, 0, w, h);
    ctx.moveTo(x1, y1); ctx.lineTo(x2, y2);
    [x1, y1] = project(cam, -3, g, 0, w, h);
    [x2, y2] = project(cam, 3, g, 0, w, h);
    ctx.moveTo(x1, y1); ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  for (const layer of layers) {
    const pts = layer.points;
    for (let j = 0; j * 3 + 2 < pts.length; j++) {
      const [sx, sy] = project(cam, pts[j * 3], pts[j * 3 + 1], pts[j * 3 + 2], w, h);
      ctx.fillStyle = layer.highlight?.has(j)
        ? (layer.highlightColor ?? "#ff5050") : layer.color;
      const s = layer.size;
      ctx.fillRect(sx - s / 2, sy - s / 2, s, s);
    }
  }
}

import { DirtyBuffer } from "./state.js";
import type { ViewTransform } from "./transform.js";
import type { FramePayload, RadarEntry } from "./types.js";

export const COLOR_LIDAR = "#6b7280";
export const COLOR_PLAUSIBLE = "#3b82f6"; // predicted target: blue
export const COLOR_ARTIFACT = "#ef4444"; // predicted artifact: red
export const COLOR_UNLABELED = "#9ca3af";
export const COLOR_CORRECTED_OUTLINE = "#fbbf24";
export const COLOR_PENDING_OUTLINE = "#22d3ee";
export const COLOR_SELECTION = "#ffffff";

// Compact perceptual ramp (viridis stops) for the color-by-weight mode.
const RAMP: [number, number, number][] = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function weightColor(w: number): string {
  const t = Math.min(1, Math.max(0, w)) * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(t));
  const f = t - i;
  const mix = RAMP[i].map((a, c) => Math.round(a + (RAMP[i + 1][c] - a) * f));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

export interface MarkerStyle {
  fill: string;
  outline: string | null;
  radius: number;
}

/** Height is encoded as marker size; the bird's-eye view drops z. */
export function markerRadius(zMeters: number): number {
  return Math.min(8, Math.max(2.5, 2.5 + zMeters * 1.2));
}

export function markerStyle(entry: RadarEntry, buffer: DirtyBuffer, colorByWeight: boolean): MarkerStyle {
  const label = buffer.effectiveWithPending(entry);
  let fill = COLOR_UNLABELED;
  if (colorByWeight && entry.w_fused !== null) {
    fill = weightColor(entry.w_fused);
  } else if (label === 1) {
    fill = COLOR_PLAUSIBLE;
  } else if (label === 0) {
    fill = COLOR_ARTIFACT;
  }
  let outline: string | null = null;
  if (buffer.pendingFor(entry.index) !== undefined) {
    outline = COLOR_PENDING_OUTLINE;
  } else if (entry.y_corrected !== null) {
    outline = COLOR_CORRECTED_OUTLINE;
  }
  return { fill, outline, radius: markerRadius(entry.z_m) };
}

export interface SceneState {
  showLidar: boolean;
  colorByWeight: boolean;
  selection: Set<number>;
  buffer: DirtyBuffer;
  lasso: { x0: number; y0: number; x1: number; y1: number } | null;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  payload: FramePayload,
  view: ViewTransform,
  state: SceneState,
): void {
  ctx.fillStyle = "#111418";
  ctx.fillRect(0, 0, view.width, view.height);

  if (state.showLidar) {
    ctx.fillStyle = COLOR_LIDAR;
    ctx.globalAlpha = 0.55;
    for (const [x, y] of payload.lidar) {
      const [sx, sy] = view.worldToScreen(x, y);
      if (sx < -2 || sy < -2 || sx > view.width + 2 || sy > view.height + 2) continue;
      ctx.fillRect(sx - 0.75, sy - 0.75, 1.5, 1.5);
    }
    ctx.globalAlpha = 1.0;
  }

  for (const entry of payload.radar) {
    const [sx, sy] = view.worldToScreen(entry.x_m, entry.y_m);
    const style = markerStyle(entry, state.buffer, state.colorByWeight);
    ctx.beginPath();
    ctx.arc(sx, sy, style.radius, 0, 2 * Math.PI);
    ctx.fillStyle = style.fill;
    ctx.fill();
    if (style.outline) {
      ctx.lineWidth = 2;
      ctx.strokeStyle = style.outline;
      ctx.stroke();
    }
    if (state.selection.has(entry.index)) {
      ctx.lineWidth = 1.5;
      ctx.strokeStyle = COLOR_SELECTION;
      ctx.beginPath();
      ctx.arc(sx, sy, style.radius + 2.5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }

  // ego marker at the vehicle origin
  const [ex, ey] = view.worldToScreen(0, 0);
  ctx.strokeStyle = "#e5e7eb";
  ctx.lineWidth = 1.5;
  ctx.strokeRect(ex - 6, ey - 10, 12, 20);

  if (state.lasso) {
    const { x0, y0, x1, y1 } = state.lasso;
    ctx.strokeStyle = "#d1d5db";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
    ctx.setLineDash([]);
  }
}

/** Detections inside a screen-space rectangle (the lasso). */
export function entriesInRect(
  payload: FramePayload,
  view: ViewTransform,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): number[] {
  const [lo_x, hi_x] = [Math.min(x0, x1), Math.max(x0, x1)];
  const [lo_y, hi_y] = [Math.min(y0, y1), Math.max(y0, y1)];
  const hits: number[] = [];
  for (const entry of payload.radar) {
    const [sx, sy] = view.worldToScreen(entry.x_m, entry.y_m);
    if (sx >= lo_x && sx <= hi_x && sy >= lo_y && sy <= hi_y) {
      hits.push(entry.index);
    }
  }
  return hits;
}

/** Nearest detection within `radiusPx` of a click, or null. */
export function hitTest(
  payload: FramePayload,
  view: ViewTransform,
  sx: number,
  sy: number,
  radiusPx = 8,
): number | null {
  let best: number | null = null;
  let bestD2 = radiusPx * radiusPx;
  for (const entry of payload.radar) {
    const [ex, ey] = view.worldToScreen(entry.x_m, entry.y_m);
    const d2 = (ex - sx) ** 2 + (ey - sy) ** 2;
    if (d2 <= bestD2) {
      bestD2 = d2;
      best = entry.index;
    }
  }
  return best;
}

import { describe, expect, it } from "vitest";

import { entriesInRect, hitTest, markerStyle, weightColor } from "../src/render.js";
import { DirtyBuffer } from "../src/state.js";
import { ViewTransform } from "../src/transform.js";
import type { FramePayload, RadarEntry } from "../src/types.js";

function entry(index: number, x: number, y: number, z = 0, y_hat: number | null = 1): RadarEntry {
  return {
    index, x_m: x, y_m: y, z_m: z,
    w_lm: null, w_cm: null, w_opt: null, w_tr: null, w_fused: 0.4,
    y_hat, y_corrected: null,
  };
}

function payloadWith(entries: RadarEntry[]): FramePayload {
  return { sequence: "s", frame_ts_ns: 1, labeled: true, radar: entries, lidar: [], flags: [] };
}

describe("ViewTransform", () => {
  it("round-trips world and screen coordinates", () => {
    const view = new ViewTransform(12.5, -3.0, 24, 800, 600);
    for (const [x, y] of [[0, 0], [15.2, 4.4], [-8, -20], [33.3, 0.1]]) {
      const [sx, sy] = view.worldToScreen(x, y);
      const [bx, by] = view.screenToWorld(sx, sy);
      expect(bx).toBeCloseTo(x, 9);
      expect(by).toBeCloseTo(y, 9);
    }
  });

  it("maps forward motion to up and left motion to left", () => {
    const view = new ViewTransform(0, 0, 10, 800, 600);
    const [, syOrigin] = view.worldToScreen(0, 0);
    const [, syAhead] = view.worldToScreen(5, 0);
    expect(syAhead).toBeLessThan(syOrigin); // +x goes up
    const [sxOrigin] = view.worldToScreen(0, 0);
    const [sxLeft] = view.worldToScreen(0, 5);
    expect(sxLeft).toBeLessThan(sxOrigin); // +y goes left
  });

  it("marker positions equal payload coordinates under pan and zoom", () => {
    // transform oracle: recompute screen position from the definition
    const view = new ViewTransform(10, 0, 18, 900, 700);
    view.panByPixels(37, -12);
    view.zoomAt(450, 350, 1.6);
    const detections = [entry(0, 3.2, 1.1), entry(1, 28.4, -6.6), entry(2, 14.0, 9.9)];
    for (const d of detections) {
      const [sx, sy] = view.worldToScreen(d.x_m, d.y_m);
      expect(sx).toBeCloseTo(450 - (d.y_m - view.centerY) * view.scale, 9);
      expect(sy).toBeCloseTo(350 - (d.x_m - view.centerX) * view.scale, 9);
    }
  });

  it("zoomAt keeps the point under the cursor fixed", () => {
    const view = new ViewTransform(10, 0, 18, 900, 700);
    const [wx, wy] = view.screenToWorld(200, 150);
    view.zoomAt(200, 150, 2.0);
    const [sx, sy] = view.worldToScreen(wx, wy);
    expect(sx).toBeCloseTo(200, 9);
    expect(sy).toBeCloseTo(150, 9);
  });
});

describe("hit testing", () => {
  const view = new ViewTransform(10, 0, 20, 900, 700);
  const payload = payloadWith([entry(0, 10, 0), entry(1, 12, 1), entry(2, 30, -5)]);

  it("click selects the nearest marker within the radius", () => {
    const [sx, sy] = view.worldToScreen(10, 0);
    expect(hitTest(payload, view, sx + 3, sy - 2)).toBe(0);
    expect(hitTest(payload, view, sx + 200, sy)).not.toBe(0);
  });

  it("rectangle lasso returns exactly the enclosed detections", () => {
    const [ax, ay] = view.worldToScreen(10, 0);
    const [bx, by] = view.worldToScreen(12, 1);
    const hits = entriesInRect(
      payload, view,
      Math.min(ax, bx) - 5, Math.min(ay, by) - 5,
      Math.max(ax, bx) + 5, Math.max(ay, by) + 5,
    );
    expect(hits.sort()).toEqual([0, 1]);
  });
});

describe("marker styling", () => {
  it("colors follow the effective label", () => {
    const buffer = new DirtyBuffer();
    expect(markerStyle(entry(0, 0, 0, 0, 1), buffer, false).fill).toBe("#3b82f6");
    expect(markerStyle(entry(1, 0, 0, 0, 0), buffer, false).fill).toBe("#ef4444");
    expect(markerStyle(entry(2, 0, 0, 0, null), buffer, false).fill).toBe("#9ca3af");
  });

  it("pending flips recolor and outline the marker", () => {
    const buffer = new DirtyBuffer();
    const e = entry(0, 0, 0, 0, 1);
    buffer.toggle(e);
    const style = markerStyle(e, buffer, false);
    expect(style.fill).toBe("#ef4444"); // flipped to artifact
    expect(style.outline).toBe("#22d3ee");
  });

  it("corrected markers are outlined", () => {
    const e = { ...entry(0, 0, 0, 0, 1), y_corrected: 0 };
    const style = markerStyle(e, new DirtyBuffer(), false);
    expect(style.fill).toBe("#ef4444");
    expect(style.outline).toBe("#fbbf24");
  });

  it("weight mode maps w_fused through the ramp", () => {
    const e = entry(0, 0, 0, 0, 1);
    const style = markerStyle(e, new DirtyBuffer(), true);
    expect(style.fill).toBe(weightColor(0.4));
    expect(weightColor(0)).not.toBe(weightColor(1));
  });

  it("marker size encodes height", () => {
    const low = markerStyle(entry(0, 0, 0, 0.2), new DirtyBuffer(), false);
    const high = markerStyle(entry(1, 0, 0, 3.0), new DirtyBuffer(), false);
    expect(high.radius).toBeGreaterThan(low.radius);
  });
});

import type { ApiClient } from "./api.js";
import type { Correction, FrameInfo, RadarEntry } from "./types.js";

/** Single source of truth for what a detection currently counts as. */
export function effectiveLabel(entry: Pick<RadarEntry, "y_hat" | "y_corrected">): number | null {
  return entry.y_corrected !== null ? entry.y_corrected : entry.y_hat;
}

/**
 * Pending label flips, keyed by detection index. Entries always differ from
 * the stored effective label; toggling back to the original removes the entry,
 * so an empty buffer means "nothing to save".
 */
export class DirtyBuffer {
  private pending = new Map<number, number>();

  toggle(entry: RadarEntry): void {
    const base = effectiveLabel(entry);
    if (base === null) {
      return; // unlabeled frames cannot be corrected
    }
    const current = this.pending.has(entry.index) ? this.pending.get(entry.index)! : base;
    const next = 1 - current;
    if (next === base) {
      this.pending.delete(entry.index);
    } else {
      this.pending.set(entry.index, next);
    }
  }

  pendingFor(index: number): number | undefined {
    return this.pending.get(index);
  }

  /** Label the detection will have if the buffer is saved. */
  effectiveWithPending(entry: RadarEntry): number | null {
    const pending = this.pending.get(entry.index);
    return pending !== undefined ? pending : effectiveLabel(entry);
  }

  corrections(): Correction[] {
    return [...this.pending.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([detection_index, y]) => ({ detection_index, y }));
  }

  get size(): number {
    return this.pending.size;
  }

  get isEmpty(): boolean {
    return this.pending.size === 0;
  }

  clear(): void {
    this.pending.clear();
  }
}

/**
 * Guard used before any frame change: corrections are never sent or dropped
 * implicitly. Returns true when navigation may proceed.
 */
export function confirmNavigation(buffer: DirtyBuffer, confirmFn: (msg: string) => boolean): boolean {
  if (buffer.isEmpty) {
    return true;
  }
  return confirmFn(`Discard ${buffer.size} unsaved correction(s)?`);
}

/** Index of the next unreviewed frame strictly after `from`, or -1. */
export function nextUnreviewed(frames: FrameInfo[], from: number): number {
  for (let i = from + 1; i < frames.length; i++) {
    if (!frames[i].reviewed) {
      return i;
    }
  }
  for (let i = 0; i <= from && i < frames.length; i++) {
    if (!frames[i].reviewed) {
      return i;
    }
  }
  return -1;
}

/**
 * All-or-nothing save: the buffer is cleared only after the server accepted
 * the whole batch; on any failure it is left untouched for retry.
 */
export async function saveCorrections(
  client: Pick<ApiClient, "saveLabels">,
  sequence: string,
  ts: number,
  buffer: DirtyBuffer,
): Promise<number> {
  if (buffer.isEmpty) {
    return 0;
  }
  const corrections = buffer.corrections();
  await client.saveLabels(sequence, ts, corrections);
  buffer.clear();
  return corrections.length;
}

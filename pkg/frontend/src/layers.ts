/**
 * Editable mask layers for one annotation task: a left and a right
 * raster, a circular paint/erase brush clipped to the image bounds,
 * and per-layer undo/redo history.
 */

export type Hand = "left" | "right";

const HISTORY_LIMIT = 50; // snapshots per layer, comfortably above the 20-step floor

export class LayerSet {
  readonly width: number;
  readonly height: number;
  private rasters: Record<Hand, Uint8Array>;
  private undoStacks: Record<Hand, Uint8Array[]>;
  private redoStacks: Record<Hand, Uint8Array[]>;
  active: Hand = "left";

  constructor(width: number, height: number,
              left?: Uint8Array, right?: Uint8Array) {
    if (width < 1 || height < 1) throw new Error(`bad layer size ${width}x${height}`);
    this.width = width;
    this.height = height;
    const size = width * height;
    const init = (given?: Uint8Array) => {
      if (given) {
        if (given.length !== size) throw new Error("layer raster has wrong size");
        return given.slice();
      }
      return new Uint8Array(size);
    };
    this.rasters = { left: init(left), right: init(right) };
    this.undoStacks = { left: [], right: [] };
    this.redoStacks = { left: [], right: [] };
  }

  raster(hand: Hand): Uint8Array {
    return this.rasters[hand];
  }

  /** Snapshot the active layer before a stroke begins. */
  beginStroke(): void {
    const stack = this.undoStacks[this.active];
    stack.push(this.rasters[this.active].slice());
    if (stack.length > HISTORY_LIMIT) stack.shift();
    this.redoStacks[this.active] = [];
  }

  /** Apply a circular brush dab at image coordinates; clips to bounds. */
  dab(cx: number, cy: number, radius: number, erase: boolean): void {
    const raster = this.rasters[this.active];
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          raster[y * this.width + x] = erase ? 0 : 1;
        }
      }
    }
  }

  undo(): boolean {
    const stack = this.undoStacks[this.active];
    const prev = stack.pop();
    if (!prev) return false;
    this.redoStacks[this.active].push(this.rasters[this.active]);
    this.rasters[this.active] = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStacks[this.active].pop();
    if (!next) return false;
    this.undoStacks[this.active].push(this.rasters[this.active]);
    this.rasters[this.active] = next;
    return true;
  }

  undoDepth(hand: Hand): number {
    return this.undoStacks[hand].length;
  }

  clearActive(): void {
    this.beginStroke();
    this.rasters[this.active].fill(0);
  }

  isEmpty(hand: Hand): boolean {
    const raster = this.rasters[hand];
    for (let i = 0; i < raster.length; i++) if (raster[i]) return false;
    return true;
  }

  bothEmpty(): boolean {
    return this.isEmpty("left") && this.isEmpty("right");
  }
}

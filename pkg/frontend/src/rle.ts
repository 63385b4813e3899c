/**
 * 2HRLE v1 codec: row-major run lengths alternating background and
 * foreground, always starting with a background run that may be 0.
 * Bit-compatible with the backend's mask library (shared conformance
 * vectors live in test/fixtures/rle_vectors.json).
 */

export interface RleMask {
  w: number;
  h: number;
  runs: number[];
}

/** Encode a raster (Uint8Array, nonzero = foreground) into runs. */
export function encodeMask(bits: Uint8Array, w: number, h: number): RleMask {
  if (bits.length !== w * h) {
    throw new Error(`raster has ${bits.length} entries, expected ${w}x${h}=${w * h}`);
  }
  const runs: number[] = [];
  let current = 0; // runs start with a background run
  let length = 0;
  for (let i = 0; i < bits.length; i++) {
    const value = bits[i] ? 1 : 0;
    if (value === current) {
      length += 1;
    } else {
      runs.push(length);
      current = value;
      length = 1;
    }
  }
  runs.push(length);
  return { w, h, runs };
}

/** Validate mask structure; returns an error message or null. */
export function validateMask(mask: RleMask): string | null {
  if (!Number.isInteger(mask.w) || !Number.isInteger(mask.h) || mask.w < 1 || mask.h < 1) {
    return `bad dimensions ${mask.w}x${mask.h}`;
  }
  if (!Array.isArray(mask.runs) || mask.runs.length === 0) {
    return "runs must be a nonempty array";
  }
  let total = 0;
  for (let i = 0; i < mask.runs.length; i++) {
    const r = mask.runs[i];
    if (!Number.isInteger(r) || r < 0) return `run ${i} is not a nonnegative integer`;
    if (r === 0 && i > 0) return `interior run ${i} has length 0`;
    total += r;
  }
  if (total !== mask.w * mask.h) {
    return `runs sum to ${total}, expected ${mask.w * mask.h}`;
  }
  return null;
}

/** Decode runs back into a raster of 0/1 bytes. */
export function decodeMask(mask: RleMask): Uint8Array {
  const problem = validateMask(mask);
  if (problem) throw new Error(problem);
  const out = new Uint8Array(mask.w * mask.h);
  let offset = 0;
  let value = 0;
  for (const run of mask.runs) {
    if (value) out.fill(1, offset, offset + run);
    offset += run;
    value = 1 - value;
  }
  return out;
}

export function maskArea(bits: Uint8Array): number {
  let area = 0;
  for (let i = 0; i < bits.length; i++) if (bits[i]) area += 1;
  return area;
}

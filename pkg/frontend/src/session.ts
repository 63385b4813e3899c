/**
 * Submission state machine for one task, kept free of DOM concerns.
 *
 * Rules: an all-empty annotation needs an explicit "no affordance"
 * override; a version conflict reloads the server version but never
 * discards local paint layers; a network failure keeps the exact payload
 * for retry.
 */

import { ApiClient, AnnotationPayload, SubmitResult, TaskView } from "./api.js";
import { LayerSet } from "./layers.js";
import { RleMask, decodeMask, encodeMask, maskArea } from "./rle.js";

export type SessionOutcome =
  | SubmitResult
  | { status: "blocked-empty" }
  | { status: "no-payload" };

export class AnnotationSession {
  readonly taskId: string;
  version: number;
  layers: LayerSet;
  private api: ApiClient;
  private lastPayload: AnnotationPayload | null = null;

  constructor(api: ApiClient, task: TaskView, width: number, height: number) {
    this.api = api;
    this.taskId = task.task_id;
    this.version = task.version;
    this.layers = new LayerSet(
      width, height,
      task.left ? decodeMask(task.left) : undefined,
      task.right ? decodeMask(task.right) : undefined,
    );
  }

  private encodeLayer(hand: "left" | "right"): RleMask | null {
    const raster = this.layers.raster(hand);
    if (maskArea(raster) === 0) return null;
    return encodeMask(raster, this.layers.width, this.layers.height);
  }

  buildPayload(annotator: string): AnnotationPayload {
    return {
      left: this.encodeLayer("left"),
      right: this.encodeLayer("right"),
      version: this.version,
      annotator,
    };
  }

  async submit(annotator: string, allowEmpty = false): Promise<SessionOutcome> {
    if (this.layers.bothEmpty() && !allowEmpty) {
      return { status: "blocked-empty" };
    }
    this.lastPayload = this.buildPayload(annotator);
    return this.send();
  }

  /** Resend the previous payload byte-for-byte (after a network failure). */
  async retry(): Promise<SessionOutcome> {
    if (!this.lastPayload) return { status: "no-payload" };
    return this.send();
  }

  private async send(): Promise<SessionOutcome> {
    const payload = this.lastPayload!;
    const result = await this.api.submitAnnotation(this.taskId, payload);
    if (result.status === "accepted") {
      this.version = result.version;
      this.lastPayload = null;
    } else if (result.status === "conflict") {
      // adopt the server's version so the next submit can win, but keep
      // the local layers exactly as painted for the annotator to merge
      const fresh = await this.api.getTask(this.taskId);
      this.version = fresh.version;
      this.lastPayload = null;
    }
    return result;
  }
}

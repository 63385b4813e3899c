/**
 * Typed client for the annotation backend. Submission distinguishes the
 * three outcomes the UI must handle differently: accepted (version
 * bump), version conflict (reload server state, keep local edits), and
 * network failure (retry with the identical payload).
 */

import { RleMask } from "./rle.js";

export interface TaskSummary {
  task_id: string;
  split: string;
  narration: string;
  original_image: string;
  inpainted_image: string;
  version: number;
  annotated: boolean;
}

export interface TaskView extends TaskSummary {
  width: number | null;
  height: number | null;
  left: RleMask | null;
  right: RleMask | null;
  annotator: string;
}

export interface AnnotationPayload {
  left: RleMask | null;
  right: RleMask | null;
  version: number;
  annotator: string;
}

export type SubmitResult =
  | { status: "accepted"; version: number }
  | { status: "conflict"; currentVersion: number }
  | { status: "rejected"; detail: string }
  | { status: "network-error"; detail: string };

type FetchLike = typeof fetch;

export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(base = "", fetchImpl: FetchLike = fetch) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  async listTasks(): Promise<TaskSummary[]> {
    const response = await this.fetchImpl(`${this.base}/tasks`);
    if (!response.ok) throw new Error(`GET /tasks failed: ${response.status}`);
    const body = await response.json();
    return body.tasks as TaskSummary[];
  }

  async getTask(taskId: string): Promise<TaskView> {
    const response = await this.fetchImpl(`${this.base}/tasks/${encodeURIComponent(taskId)}`);
    if (!response.ok) throw new Error(`GET /tasks/${taskId} failed: ${response.status}`);
    return (await response.json()) as TaskView;
  }

  async submitAnnotation(taskId: string, payload: AnnotationPayload): Promise<SubmitResult> {
    let response: Response;
    try {
      response = await this.fetchImpl(
        `${this.base}/tasks/${encodeURIComponent(taskId)}/annotation`,
        {
          method: "PUT",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(payload),
        });
    } catch (err) {
      return { status: "network-error", detail: String(err) };
    }
    if (response.status === 200) {
      const body = await response.json();
      return { status: "accepted", version: body.version as number };
    }
    if (response.status === 409) {
      const body = await response.json();
      return { status: "conflict", currentVersion: body.current_version as number };
    }
    let detail = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      if (body.detail) detail = String(body.detail);
    } catch {
      // keep the status line
    }
    return { status: "rejected", detail };
  }

  async skipTask(taskId: string, annotator: string, reason: string): Promise<void> {
    await this.fetchImpl(`${this.base}/tasks/${encodeURIComponent(taskId)}/skip`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator, reason }),
    });
  }

  imageUrl(path: string): string {
    return `${this.base}/images/${path}`;
  }
}

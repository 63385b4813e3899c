import { describe, expect, it } from "vitest";

import { ApiClient, TaskView } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import { RleMask, decodeMask, encodeMask } from "../src/rle.js";

/**
 * In-memory backend with the same semantics as the real store: per-task
 * optimistic versioning, 409 with the current version on conflict, 400 on
 * malformed masks. Lets the submission flow run end to end without a
 * server.
 */
class FakeBackend {
  tasks = new Map<string, { version: number; left: RleMask | null; right: RleMask | null }>();
  requests: string[] = [];
  failNext = 0;

  constructor(taskIds: string[]) {
    for (const id of taskIds) this.tasks.set(id, { version: 0, left: null, right: null });
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    if (this.failNext > 0 && init?.method === "PUT") {
      this.failNext -= 1;
      throw new TypeError("network down");
    }
    const putMatch = url.match(/\/tasks\/([^/]+)\/annotation$/);
    if (putMatch && init?.method === "PUT") {
      const task = this.tasks.get(decodeURIComponent(putMatch[1]));
      if (!task) return json(404, { detail: "unknown task" });
      const body = JSON.parse(String(init.body));
      this.requests.push(String(init.body));
      for (const hand of ["left", "right"] as const) {
        const mask = body[hand];
        if (mask !== null) {
          const total = mask.runs.reduce((a: number, b: number) => a + b, 0);
          if (total !== mask.w * mask.h) return json(400, { detail: "bad mask" });
        }
      }
      if (body.version !== task.version) {
        return json(409, { detail: "conflict", current_version: task.version });
      }
      task.version += 1;
      task.left = body.left;
      task.right = body.right;
      return json(200, { version: task.version });
    }
    const getMatch = url.match(/\/tasks\/([^/]+)$/);
    if (getMatch) {
      const id = decodeURIComponent(getMatch[1]);
      const task = this.tasks.get(id);
      if (!task) return json(404, { detail: "unknown task" });
      return json(200, {
        task_id: id, split: "ego4d", narration: "n", original_image: "o",
        inpainted_image: "i", version: task.version, annotated: false,
        width: 8, height: 6, left: task.left, right: task.right, annotator: "",
      });
    }
    return json(404, { detail: "no route" });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function freshSession(backend: FakeBackend, taskId = "t1"): Promise<AnnotationSession> {
  const api = new ApiClient("", backend.fetch);
  return api.getTask(taskId).then(
    (task: TaskView) => new AnnotationSession(api, task, 8, 6));
}

describe("annotation submission", () => {
  it("submit then re-fetch decodes to a bit-identical raster", async () => {
    const backend = new FakeBackend(["t1"]);
    const session = await freshSession(backend);
    session.layers.active = "left";
    session.layers.beginStroke();
    session.layers.dab(3, 3, 2, false);
    const painted = session.layers.raster("left").slice();

    const outcome = await session.submit("alice");
    expect(outcome.status).toBe("accepted");

    const reloaded = await freshSession(backend);
    expect(decodeMask(backend.tasks.get("t1")!.left!)).toEqual(painted);
    expect(reloaded.layers.raster("left")).toEqual(painted);
    expect(reloaded.version).toBe(1);
  });

  it("two submits from the same base version: exactly one wins", async () => {
    const backend = new FakeBackend(["t1"]);
    const a = await freshSession(backend);
    const b = await freshSession(backend);
    for (const s of [a, b]) {
      s.layers.beginStroke();
      s.layers.dab(2, 2, 1, false);
    }
    const [ra, rb] = await Promise.all([a.submit("a"), b.submit("b")]);
    const statuses = [ra.status, rb.status].sort();
    expect(statuses).toEqual(["accepted", "conflict"]);
    expect(backend.tasks.get("t1")!.version).toBe(1);
  });

  it("conflict keeps local layers and adopts the server version", async () => {
    const backend = new FakeBackend(["t1"]);
    const winner = await freshSession(backend);
    const loser = await freshSession(backend);
    winner.layers.beginStroke();
    winner.layers.dab(1, 1, 1, false);
    await winner.submit("w");

    loser.layers.active = "right";
    loser.layers.beginStroke();
    loser.layers.dab(5, 4, 1.5, false);
    const localRaster = loser.layers.raster("right").slice();

    const outcome = await loser.submit("l");
    expect(outcome.status).toBe("conflict");
    expect(loser.layers.raster("right")).toEqual(localRaster); // edits preserved
    expect(loser.version).toBe(1);                             // server version adopted

    const second = await loser.submit("l");
    expect(second.status).toBe("accepted");
    expect(backend.tasks.get("t1")!.version).toBe(2);
  });

  it("network failure retries with the unchanged payload", async () => {
    const backend = new FakeBackend(["t1"]);
    const session = await freshSession(backend);
    session.layers.beginStroke();
    session.layers.dab(4, 2, 2, false);
    const queued = encodeMask(session.layers.raster("left"), 8, 6);
    backend.failNext = 1;
    const first = await session.submit("a");
    expect(first.status).toBe("network-error");

    // local edits after the failure must not alter the queued payload
    session.layers.beginStroke();
    session.layers.dab(0, 0, 1, false);
    const retried = await session.retry();
    expect(retried.status).toBe("accepted");
    expect(backend.requests.length).toBe(1);
    const sent = JSON.parse(backend.requests[0]);
    expect(sent.left).toEqual(queued);   // pre-failure stroke, not the later edit
  });

  it("blocks an all-empty submission without the explicit override", async () => {
    const backend = new FakeBackend(["t1"]);
    const session = await freshSession(backend);
    const blocked = await session.submit("a");
    expect(blocked.status).toBe("blocked-empty");
    expect(backend.requests.length).toBe(0);

    const allowed = await session.submit("a", true);
    expect(allowed.status).toBe("accepted");
    expect(backend.tasks.get("t1")!.left).toBeNull();
  });

  it("malformed masks surface as a rejection", async () => {
    const backend = new FakeBackend(["t1"]);
    const api = new ApiClient("", backend.fetch);
    const result = await api.submitAnnotation("t1", {
      left: { w: 8, h: 6, runs: [5] }, right: null, version: 0, annotator: "",
    });
    expect(result.status).toBe("rejected");
  });
});

/**
 * Canvas annotation tool: paints left (red) and right (green) affordance
 * layers over the original/inpainted image pair served by the backend.
 */

import { ApiClient, TaskSummary } from "./api.js";
import { Hand } from "./layers.js";
import { AnnotationSession } from "./session.js";
import {
  ViewTransform, fitView, imageToScreen, panBy, screenToImage, zoomAt,
} from "./view.js";

const LAYER_COLORS: Record<Hand, [number, number, number]> = {
  left: [220, 40, 40],    // red
  right: [40, 180, 60],   // green
};
const LAYER_ALPHA = 110;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private api = new ApiClient("");
  private canvas = el<HTMLCanvasElement>("canvas");
  private ctx = this.canvas.getContext("2d")!;
  private taskSelect = el<HTMLSelectElement>("task-select");
  private status = el<HTMLElement>("status");
  private session: AnnotationSession | null = null;
  private images: Record<"original" | "inpainted", HTMLImageElement | null> =
    { original: null, inpainted: null };
  private base: "original" | "inpainted" = "inpainted";
  private view: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
  private brushRadius = 6;
  private erasing = false;
  private painting = false;
  private panning = false;
  private lastPointer: [number, number] = [0, 0];
  private overlay = document.createElement("canvas");

  async start(): Promise<void> {
    const tasks = await this.api.listTasks();
    this.taskSelect.innerHTML = "";
    for (const task of tasks) {
      const option = document.createElement("option");
      option.value = task.task_id;
      option.textContent = `${task.task_id} ${task.annotated ? "[done]" : ""} ${task.narration}`;
      this.taskSelect.appendChild(option);
    }
    this.wireControls();
    if (tasks.length) await this.loadTask(tasks[0].task_id);
  }

  private async loadTask(taskId: string): Promise<void> {
    const task = await this.api.getTask(taskId);
    const original = await this.loadImage(this.api.imageUrl(task.original_image));
    const inpainted = await this.loadImage(this.api.imageUrl(task.inpainted_image));
    this.images = { original, inpainted };
    const width = task.width ?? inpainted?.naturalWidth ?? original?.naturalWidth ?? 0;
    const height = task.height ?? inpainted?.naturalHeight ?? original?.naturalHeight ?? 0;
    if (!width || !height) {
      this.say(`task ${taskId}: cannot determine image dimensions`);
      return;
    }
    this.session = new AnnotationSession(this.api, task, width, height);
    this.overlay.width = width;
    this.overlay.height = height;
    this.view = fitView(width, height, this.canvas.width, this.canvas.height);
    el<HTMLElement>("narration").textContent = task.narration;
    this.say(`loaded ${taskId} (version ${task.version})`);
    this.render();
  }

  private loadImage(url: string): Promise<HTMLImageElement | null> {
    return new Promise((resolve) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => resolve(null);
      img.src = url;
    });
  }

  private wireControls(): void {
    this.taskSelect.addEventListener("change", () => this.loadTask(this.taskSelect.value));
    el<HTMLInputElement>("brush-size").addEventListener("input", (e) => {
      this.brushRadius = Number((e.target as HTMLInputElement).value);
    });
    for (const hand of ["left", "right"] as Hand[]) {
      el<HTMLInputElement>(`layer-${hand}`).addEventListener("change", () => {
        if (this.session) this.session.layers.active = hand;
      });
    }
    el<HTMLInputElement>("mode-erase").addEventListener("change", (e) => {
      this.erasing = (e.target as HTMLInputElement).checked;
    });
    el<HTMLButtonElement>("base-toggle").addEventListener("click", () => {
      this.base = this.base === "original" ? "inpainted" : "original";
      this.render();
    });
    el<HTMLButtonElement>("undo").addEventListener("click", () => {
      if (this.session?.layers.undo()) this.render();
    });
    el<HTMLButtonElement>("redo").addEventListener("click", () => {
      if (this.session?.layers.redo()) this.render();
    });
    el<HTMLButtonElement>("clear").addEventListener("click", () => {
      this.session?.layers.clearActive();
      this.render();
    });
    el<HTMLButtonElement>("submit").addEventListener("click", () => this.submit());
    el<HTMLButtonElement>("retry").addEventListener("click", () => this.retry());
    el<HTMLButtonElement>("skip").addEventListener("click", () => this.skip());
    document.addEventListener("keydown", (e) => {
      if ((e.ctrlKey || e.metaKey) && e.key === "z" && !e.shiftKey) {
        if (this.session?.layers.undo()) this.render();
      } else if ((e.ctrlKey || e.metaKey) && (e.key === "y" || (e.key === "z" && e.shiftKey))) {
        if (this.session?.layers.redo()) this.render();
      }
    });

    this.canvas.addEventListener("pointerdown", (e) => {
      this.lastPointer = [e.offsetX, e.offsetY];
      if (e.button === 1 || e.shiftKey) {
        this.panning = true;
      } else if (e.button === 0 && this.session) {
        this.painting = true;
        this.session.layers.beginStroke();
        this.dabAt(e.offsetX, e.offsetY);
      }
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (this.panning) {
        this.view = panBy(this.view, e.offsetX - this.lastPointer[0],
                          e.offsetY - this.lastPointer[1]);
        this.lastPointer = [e.offsetX, e.offsetY];
        this.render();
      } else if (this.painting) {
        this.dabAt(e.offsetX, e.offsetY);
      }
    });
    const stop = () => {
      this.painting = false;
      this.panning = false;
    };
    this.canvas.addEventListener("pointerup", stop);
    this.canvas.addEventListener("pointerleave", stop);
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.view = zoomAt(this.view, e.offsetX, e.offsetY, e.deltaY < 0 ? 1.2 : 1 / 1.2);
      this.render();
    }, { passive: false });
  }

  private dabAt(sx: number, sy: number): void {
    if (!this.session) return;
    const [ix, iy] = screenToImage(this.view, sx, sy);
    this.session.layers.dab(ix, iy, this.brushRadius / this.view.scale, this.erasing);
    this.render();
  }

  private render(): void {
    const { canvas, ctx } = this;
    ctx.imageSmoothingEnabled = false;
    ctx.fillStyle = "#181818";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (!this.session) return;
    const { width, height } = this.session.layers;
    const [x0, y0] = imageToScreen(this.view, 0, 0);
    const drawW = width * this.view.scale;
    const drawH = height * this.view.scale;
    const baseImage = this.images[this.base];
    if (baseImage) {
      ctx.drawImage(baseImage, x0, y0, drawW, drawH);
    } else {
      ctx.fillStyle = "#333";
      ctx.fillRect(x0, y0, drawW, drawH);
    }

    const overlayCtx = this.overlay.getContext("2d")!;
    const imageData = overlayCtx.createImageData(width, height);
    for (const hand of ["left", "right"] as Hand[]) {
      if (!el<HTMLInputElement>(`show-${hand}`).checked) continue;
      const [r, g, b] = LAYER_COLORS[hand];
      const raster = this.session.layers.raster(hand);
      for (let i = 0; i < raster.length; i++) {
        if (!raster[i]) continue;
        const o = i * 4;
        imageData.data[o] = Math.min(255, imageData.data[o] + r);
        imageData.data[o + 1] = Math.min(255, imageData.data[o + 1] + g);
        imageData.data[o + 2] = Math.min(255, imageData.data[o + 2] + b);
        imageData.data[o + 3] = LAYER_ALPHA;
      }
    }
    overlayCtx.putImageData(imageData, 0, 0);
    ctx.drawImage(this.overlay, x0, y0, drawW, drawH);
    el<HTMLElement>("base-label").textContent = this.base;
  }

  private annotator(): string {
    return el<HTMLInputElement>("annotator").value.trim();
  }

  private async submit(): Promise<void> {
    if (!this.session) return;
    const allowEmpty = el<HTMLInputElement>("allow-empty").checked;
    const outcome = await this.session.submit(this.annotator(), allowEmpty);
    switch (outcome.status) {
      case "accepted":
        this.say(`saved at version ${outcome.version}`);
        break;
      case "blocked-empty":
        this.say("both layers are empty; tick 'no affordance' to submit anyway");
        break;
      case "conflict":
        this.say(`version conflict: server is at ${outcome.currentVersion}; `
                 + "your layers are kept, review and submit again");
        break;
      case "network-error":
        this.say(`network failure (${outcome.detail}); press retry to resend`);
        break;
      case "rejected":
        this.say(`rejected: ${outcome.detail}`);
        break;
      default:
        this.say("nothing to send");
    }
  }

  private async retry(): Promise<void> {
    if (!this.session) return;
    const outcome = await this.session.retry();
    this.say(outcome.status === "accepted"
      ? `saved at version ${(outcome as { version: number }).version}`
      : `retry result: ${outcome.status}`);
  }

  private async skip(): Promise<void> {
    if (!this.session) return;
    const reason = window.prompt("reason for skipping?") ?? "";
    await this.api.skipTask(this.session.taskId, this.annotator(), reason);
    this.say(`skip logged for ${this.session.taskId}`);
  }

  private say(message: string): void {
    this.status.textContent = message;
  }
}

new App().start().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `failed to start: ${err}`;
});

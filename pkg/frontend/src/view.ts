/**
 * Viewport math: one affine transform (uniform scale + offset) between
 * image pixels and screen pixels. Pure functions so alignment is
 * testable without a canvas.
 */

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function identityView(): ViewTransform {
  return { scale: 1, offsetX: 0, offsetY: 0 };
}

export function imageToScreen(view: ViewTransform, x: number, y: number): [number, number] {
  return [x * view.scale + view.offsetX, y * view.scale + view.offsetY];
}

export function screenToImage(view: ViewTransform, sx: number, sy: number): [number, number] {
  return [(sx - view.offsetX) / view.scale, (sy - view.offsetY) / view.scale];
}

/** Zoom by a factor keeping the given screen point fixed. */
export function zoomAt(view: ViewTransform, sx: number, sy: number,
                       factor: number): ViewTransform {
  const scale = Math.min(64, Math.max(1 / 16, view.scale * factor));
  const applied = scale / view.scale;
  return {
    scale,
    offsetX: sx - (sx - view.offsetX) * applied,
    offsetY: sy - (sy - view.offsetY) * applied,
  };
}

export function panBy(view: ViewTransform, dx: number, dy: number): ViewTransform {
  return { ...view, offsetX: view.offsetX + dx, offsetY: view.offsetY + dy };
}

/** Fit an image into a viewport, centered. */
export function fitView(imageW: number, imageH: number,
                        viewportW: number, viewportH: number): ViewTransform {
  const scale = Math.min(viewportW / imageW, viewportH / imageH);
  return {
    scale,
    offsetX: (viewportW - imageW * scale) / 2,
    offsetY: (viewportH - imageH * scale) / 2,
  };
}

"""Built-in correctness checks runnable from the CLI.

Re-derives metric values with brute-force reference code (python sets and
an all-pairs distance matrix, sharing nothing with the production
kernels) and checks every analytic loss gradient against central finite
differences. Seeded, so a failing run is reproducible verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import losses, metrics
from .masks import BinaryMask


@dataclass
class SuiteResult:
    name: str
    checks: int
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _random_mask(rng, w, h, density=None):
    if density is None:
        density = float(rng.uniform(0.0, 0.5))
    return rng.random((h, w)) < density


def _pixel_set(arr):
    ys, xs = np.nonzero(arr)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def _directed_reference(from_set, to_set, w, h):
    if not from_set or not to_set:
        return math.hypot(w, h)
    worst = 0.0
    for x, y in from_set:
        best = min((x - u) ** 2 + (y - v) ** 2 for u, v in to_set)
        worst = max(worst, best)
    return math.sqrt(worst)


def check_codec(seed: int, n: int = 200) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(n):
        w, h = int(rng.integers(1, 48)), int(rng.integers(1, 48))
        arr = _random_mask(rng, w, h)
        if not np.array_equal(BinaryMask.from_array(arr).to_array(), arr):
            failures += 1
    return SuiteResult("codec-round-trip", n, failures)


def check_metric_equivalence(seed: int, n: int = 200) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(n):
        w, h = int(rng.integers(1, 32)), int(rng.integers(1, 32))
        a_arr = _random_mask(rng, w, h)
        b_arr = _random_mask(rng, w, h)
        a, b = BinaryMask.from_array(a_arr), BinaryMask.from_array(b_arr)
        a_set, b_set = _pixel_set(a_arr), _pixel_set(b_arr)
        union = len(a_set | b_set)
        want_iou = len(a_set & b_set) / union if union else 0.0
        want_precision = len(a_set & b_set) / len(a_set) if a_set else 0.0
        ok = metrics.iou(a, b) == want_iou and metrics.precision(a, b) == want_precision
        want_dir = _directed_reference(a_set, b_set, w, h)
        want_hd = max(want_dir, _directed_reference(b_set, a_set, w, h))
        ok = ok and abs(metrics.directed_hausdorff(a, b) - want_dir) <= 1e-9 * max(want_dir, 1.0)
        ok = ok and abs(metrics.hausdorff(a, b) - want_hd) <= 1e-9 * max(want_hd, 1.0)
        if not ok:
            failures += 1
    return SuiteResult("metric-brute-force-equivalence", n, failures)


def check_metric_axioms(seed: int, n: int = 300) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(n):
        w, h = int(rng.integers(1, 32)), int(rng.integers(1, 32))
        a = BinaryMask.from_array(_random_mask(rng, w, h))
        b = BinaryMask.from_array(_random_mask(rng, w, h))
        ok = metrics.hausdorff(a, b) == metrics.hausdorff(b, a)
        ok = ok and metrics.directed_hausdorff(a, b) <= metrics.hausdorff(a, b) + 1e-12
        if not a.is_empty():
            ok = ok and metrics.precision(a, b) >= metrics.iou(a, b) - 1e-12
        heat = metrics.Heatmap(w, h, rng.random((h, w)))
        prev = metrics.threshold(heat, 0.0)
        for t in (0.25, 0.5, 0.75, 1.0):
            cur = metrics.threshold(heat, t)
            ok = ok and prev.contains(cur)
            prev = cur
        if not ok:
            failures += 1
    return SuiteResult("metric-axioms", n, failures)


def _fd_gradient(fn, values, step=1e-4):
    grad = np.zeros_like(values)
    flat = values.ravel()
    out = grad.ravel()
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += step
        plus = fn(bumped.reshape(values.shape))
        bumped[i] -= 2 * step
        minus = fn(bumped.reshape(values.shape))
        out[i] = (plus - minus) / (2 * step)
    return grad


def _grad_ok(got, want, tol=1e-4):
    scale = max(np.abs(want).max(), 1e-8)
    return np.abs(got - want).max() / scale < tol


def check_loss_gradients(seed: int, n: int = 25) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    checks = 0
    w = h = 5
    for _ in range(n):
        values = rng.uniform(0.05, 0.95, size=(h, w))
        gt = BinaryMask.from_array(rng.random((h, w)) < 0.5)
        pred = losses.SoftMask(w, h, values)

        checks += 1
        got = losses.dice_loss(pred, gt)
        fd = _fd_gradient(lambda v: losses.dice_loss(losses.SoftMask(w, h, v), gt).value, values)
        if not _grad_ok(got.gradient, fd):
            failures += 1

        checks += 1
        got = losses.focal_ce_loss(pred, gt)
        fd = _fd_gradient(
            lambda v: losses.focal_ce_loss(losses.SoftMask(w, h, v), gt).value, values)
        if not _grad_ok(got.gradient, fd):
            failures += 1

        checks += 1
        logits = rng.normal(size=3)
        label = losses.TAXONOMY_CLASSES[int(rng.integers(0, 3))]
        got = losses.taxonomy_ce(logits, label)
        fd = _fd_gradient(lambda v: losses.taxonomy_ce(v, label).value, logits, step=1e-5)
        if not _grad_ok(got.gradient, fd, tol=1e-6):
            failures += 1

        checks += 1
        bce = -np.where(gt.to_array(), np.log(pred.values), np.log(1 - pred.values)).mean()
        focal0 = losses.focal_ce_loss(pred, gt, gamma=0.0, alpha=0.5).value
        if abs(focal0 - 0.5 * bce) > 1e-9:
            failures += 1
    return SuiteResult("loss-gradient-checks", checks, failures)


def run_all(seed: int = 20240915, quick: bool = False) -> list[SuiteResult]:
    scale = 4 if quick else 1
    return [
        check_codec(seed, n=200 // scale),
        check_metric_equivalence(seed + 1, n=200 // scale),
        check_metric_axioms(seed + 2, n=300 // scale),
        check_loss_gradients(seed + 3, n=25 // scale),
    ]

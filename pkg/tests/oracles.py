"""Independent reference implementations the tests compare against.

Everything here is deliberately written from scratch against the definitions
(set arithmetic, augmenting paths, direct 2D convolution) rather than calling
into the package, so a shared bug cannot hide.
"""

from __future__ import annotations

import numpy as np


def iou_ref(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    return inter / (area_a + area_b - inter)


def nms_keep_order(
    boxes: list[tuple[float, float, float, float]],
    scores: list[float],
    models: list[str],
    iou_threshold: float,
) -> list[int]:
    """Literal greedy NMS over index lists: sort by the total order, walk down,
    keep a box iff it does not reach the IoU threshold against any kept box."""
    order = sorted(
        range(len(boxes)),
        key=lambda i: (-scores[i], boxes[i][0], boxes[i][1], models[i]),
    )
    kept: list[int] = []
    for i in order:
        if all(iou_ref(boxes[i], boxes[j]) < iou_threshold for j in kept):
            kept.append(i)
    return kept


def check_nms_partition(
    boxes: list[tuple[float, float, float, float]],
    kept: list[int],
    iou_threshold: float,
) -> None:
    """Assert the defining NMS postconditions on an arbitrary kept set:
    kept boxes are pairwise below the threshold (separation) and every
    discarded box reaches the threshold against some kept box (domination)."""
    kept_set = set(kept)
    for pos, i in enumerate(kept):
        for j in kept[pos + 1 :]:
            assert iou_ref(boxes[i], boxes[j]) < iou_threshold, (
                f"kept boxes {i} and {j} overlap at or above the threshold"
            )
    for i in range(len(boxes)):
        if i in kept_set:
            continue
        assert any(iou_ref(boxes[i], boxes[j]) >= iou_threshold for j in kept_set), (
            f"discarded box {i} is not dominated by any kept box"
        )


def max_matching_size(adjacency: list[list[int]], n_right: int) -> int:
    """Maximum bipartite matching via Kuhn's augmenting paths.

    adjacency[i] lists the right-side vertices left vertex i may match.
    """
    match_right = [-1] * n_right

    def try_augment(i: int, visited: list[bool]) -> bool:
        for j in adjacency[i]:
            if visited[j]:
                continue
            visited[j] = True
            if match_right[j] == -1 or try_augment(match_right[j], visited):
                match_right[j] = i
                return True
        return False

    size = 0
    for i in range(len(adjacency)):
        if try_augment(i, [False] * n_right):
            size += 1
    return size


def conv2d_replicate_ref(img: np.ndarray, kernel2d: np.ndarray) -> np.ndarray:
    """Direct (non-separable) 2D convolution with replicated edges, float64.

    Quadratic in kernel size on purpose: it shares no structure with a
    separable implementation beyond the mathematical definition.
    """
    kh, kw = kernel2d.shape
    ry, rx = kh // 2, kw // 2
    h, w = img.shape[:2]
    out = np.zeros_like(img, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(img.shape[2], dtype=np.float64)
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    sy = min(max(y + dy, 0), h - 1)
                    sx = min(max(x + dx, 0), w - 1)
                    acc += kernel2d[dy + ry, dx + rx] * img[sy, sx]
            out[y, x] = acc
    return out

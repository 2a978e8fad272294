"""Pure-Python evidence kernel (fallback when the compiled extension is absent).

Computes (mean, max, top-k mean) of an entropy array using a size-k min-heap,
O(n log k) per step.
"""

from __future__ import annotations

import heapq

import numpy as np

BACKEND = "python"


def step_stats(entropies: np.ndarray, k: int) -> tuple[float, float, float]:
    n = entropies.shape[0]
    if n == 0:
        return 0.0, 0.0, 0.0
    total = 0.0
    s_max = entropies[0]
    heap: list[float] = []
    for v in entropies:
        v = float(v)
        total += v
        if v > s_max:
            s_max = v
        if len(heap) < k:
            heapq.heappush(heap, v)
        elif v > heap[0]:
            heapq.heapreplace(heap, v)
    mean = total / n
    topk = sum(heap) / len(heap)
    return mean, float(s_max), topk

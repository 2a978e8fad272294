# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evidence kernel: (mean, max, top-k mean) via a size-k min-heap."""

import numpy as np
cimport numpy as cnp

BACKEND = "cython"


cdef inline void _sift_down(double* heap, Py_ssize_t size, Py_ssize_t pos) nogil:
    cdef Py_ssize_t child
    cdef double item = heap[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and heap[child + 1] < heap[child]:
            child += 1
        if heap[child] >= item:
            break
        heap[pos] = heap[child]
        pos = child
    heap[pos] = item


cdef inline void _sift_up(double* heap, Py_ssize_t pos) nogil:
    cdef Py_ssize_t parent
    cdef double item = heap[pos]
    while pos > 0:
        parent = (pos - 1) >> 1
        if heap[parent] <= item:
            break
        heap[pos] = heap[parent]
        pos = parent
    heap[pos] = item


def step_stats(cnp.ndarray[cnp.float64_t, ndim=1] entropies, Py_ssize_t k):
    cdef Py_ssize_t n = entropies.shape[0]
    if n == 0:
        return 0.0, 0.0, 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(min(n, k), dtype=np.float64)
    cdef double* heap = <double*> buf.data
    cdef Py_ssize_t size = 0
    cdef double total = 0.0
    cdef double s_max = entropies[0]
    cdef double v, topk
    cdef Py_ssize_t i
    for i in range(n):
        v = entropies[i]
        total += v
        if v > s_max:
            s_max = v
        if size < k:
            heap[size] = v
            size += 1
            _sift_up(heap, size - 1)
        elif v > heap[0]:
            heap[0] = v
            _sift_down(heap, size, 0)
    topk = 0.0
    for i in range(size):
        topk += heap[i]
    return total / n, s_max, topk / size

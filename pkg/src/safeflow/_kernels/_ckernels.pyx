# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; behavior matches ``_pykernels`` exactly, including expansion counts."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef struct Search:
    int m1
    int n_labels
    const int* e1u
    const int* e1v
    const int* elem1
    const int* lab1
    const int* e2u
    const int* e2v
    const int* elem2
    const int* order
    const int* cand_ptr
    const int* cand_idx
    int* map1
    int* map2
    int* ref1
    char* used2
    int* rem1
    int* avail2
    long long expansions
    long long budget
    int best
    int aborted


cdef inline int _try_map(Search* s, int u1, int v1, int u2, int v2) nogil:
    if s.elem1[u1] != s.elem2[u2] or s.elem1[v1] != s.elem2[v2]:
        return 0
    if s.map1[u1] != -1 and s.map1[u1] != u2:
        return 0
    if s.map1[v1] != -1 and s.map1[v1] != v2:
        return 0
    if s.map2[u2] != -1 and s.map2[u2] != u1:
        return 0
    if s.map2[v2] != -1 and s.map2[v2] != v1:
        return 0
    return 1


cdef inline void _assign(Search* s, int u1, int u2) nogil:
    s.map1[u1] = u2
    s.map2[u2] = u1
    s.ref1[u1] += 1


cdef inline void _release(Search* s, int u1) nogil:
    s.ref1[u1] -= 1
    if s.ref1[u1] == 0:
        s.map2[s.map1[u1]] = -1
        s.map1[u1] = -1


cdef void _dfs(Search* s, int depth, int current) nogil:
    cdef int lab, e1, u1, v1, c, e2, a2, b2, u2, v2, flip, bound, i
    s.expansions += 1
    if s.expansions > s.budget:
        s.aborted = 1
        return
    if current > s.best:
        s.best = current
    if depth == s.m1:
        return
    bound = 0
    for i in range(s.n_labels):
        bound += s.rem1[i] if s.rem1[i] < s.avail2[i] else s.avail2[i]
    if current + bound <= s.best:
        return
    e1 = s.order[depth]
    lab = s.lab1[e1]
    u1 = s.e1u[e1]
    v1 = s.e1v[e1]
    s.rem1[lab] -= 1
    for c in range(s.cand_ptr[depth], s.cand_ptr[depth + 1]):
        e2 = s.cand_idx[c]
        if s.used2[e2]:
            continue
        a2 = s.e2u[e2]
        b2 = s.e2v[e2]
        for flip in range(2):
            if flip == 0:
                u2 = a2
                v2 = b2
            else:
                u2 = b2
                v2 = a2
            if not _try_map(s, u1, v1, u2, v2):
                continue
            _assign(s, u1, u2)
            _assign(s, v1, v2)
            s.used2[e2] = 1
            s.avail2[lab] -= 1
            _dfs(s, depth + 1, current + 1)
            s.avail2[lab] += 1
            s.used2[e2] = 0
            _release(s, v1)
            _release(s, u1)
            if s.aborted:
                s.rem1[lab] += 1
                return
    _dfs(s, depth + 1, current)
    s.rem1[lab] += 1


def mces_search(edges1, elem1, labels1, edges2, elem2, labels2, order, cand_ptr, cand_idx, int n_labels, long long budget):
    cdef int[:, ::1] ed1 = np.ascontiguousarray(np.asarray(edges1, dtype=np.int32).reshape(-1, 2))
    cdef int[:, ::1] ed2 = np.ascontiguousarray(np.asarray(edges2, dtype=np.int32).reshape(-1, 2))
    cdef int[::1] e1u = np.ascontiguousarray(np.asarray(ed1[:, 0]))
    cdef int[::1] e1v = np.ascontiguousarray(np.asarray(ed1[:, 1]))
    cdef int[::1] e2u = np.ascontiguousarray(np.asarray(ed2[:, 0]))
    cdef int[::1] e2v = np.ascontiguousarray(np.asarray(ed2[:, 1]))
    cdef int[::1] el1 = np.ascontiguousarray(elem1, dtype=np.int32)
    cdef int[::1] el2 = np.ascontiguousarray(elem2, dtype=np.int32)
    cdef int[::1] lb1 = np.ascontiguousarray(labels1, dtype=np.int32)
    cdef int[::1] lb2 = np.ascontiguousarray(labels2, dtype=np.int32)
    cdef int[::1] od = np.ascontiguousarray(order, dtype=np.int32)
    cdef int[::1] cp = np.ascontiguousarray(cand_ptr, dtype=np.int32)
    cdef int[::1] ci = np.ascontiguousarray(np.asarray(cand_idx, dtype=np.int32).reshape(-1))
    cdef int n1 = el1.shape[0]
    cdef int n2 = el2.shape[0]
    cdef int m2 = ed2.shape[0]
    cdef int[::1] map1 = np.full(max(n1, 1), -1, dtype=np.int32)
    cdef int[::1] map2 = np.full(max(n2, 1), -1, dtype=np.int32)
    cdef int[::1] ref1 = np.zeros(max(n1, 1), dtype=np.int32)
    cdef char[::1] used2 = np.zeros(max(m2, 1), dtype=np.int8)
    cdef int[::1] rem1 = np.zeros(max(n_labels, 1), dtype=np.int32)
    cdef int[::1] avail2 = np.zeros(max(n_labels, 1), dtype=np.int32)
    cdef int k
    cdef int dummy[1]
    dummy[0] = 0
    for k in range(od.shape[0]):
        rem1[lb1[od[k]]] += 1
    for k in range(lb2.shape[0]):
        avail2[lb2[k]] += 1

    cdef Search s
    s.m1 = od.shape[0]
    s.n_labels = n_labels
    s.e1u = &e1u[0] if e1u.shape[0] else dummy
    s.e1v = &e1v[0] if e1v.shape[0] else dummy
    s.e2u = &e2u[0] if e2u.shape[0] else dummy
    s.e2v = &e2v[0] if e2v.shape[0] else dummy
    s.elem1 = &el1[0] if n1 else dummy
    s.elem2 = &el2[0] if n2 else dummy
    s.lab1 = &lb1[0] if lb1.shape[0] else dummy
    s.order = &od[0] if od.shape[0] else dummy
    s.cand_ptr = &cp[0]
    s.cand_idx = &ci[0] if ci.shape[0] else dummy
    s.map1 = &map1[0]
    s.map2 = &map2[0]
    s.ref1 = &ref1[0]
    s.used2 = &used2[0]
    s.rem1 = &rem1[0]
    s.avail2 = &avail2[0]
    s.expansions = 0
    s.budget = budget
    s.best = 0
    s.aborted = 0
    with nogil:
        _dfs(&s, 0, 0)
    return s.best, s.expansions, not s.aborted


def euler_sample(probs, current, double t, double dt, uniforms):
    cdef double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef long long[::1] cur = np.ascontiguousarray(current, dtype=np.int64)
    cdef double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t kk = p.shape[1]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] res = out
    cdef Py_ssize_t i, k
    cdef double acc, q, o, denom = 1.0 - t
    cdef long long idx
    with nogil:
        for i in range(n):
            acc = 0.0
            idx = kk - 1
            for k in range(kk):
                o = 1.0 if k == cur[i] else 0.0
                q = o + dt * ((p[i, k] - o) / denom)
                if q < 0.0:
                    q = 0.0
                acc = acc + q
                if acc > u[i]:
                    idx = k
                    break
            res[i] = idx
    return out

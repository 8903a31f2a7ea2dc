"""Pure-Python reference kernels. ``_ckernels.pyx`` mirrors these step for step."""

from __future__ import annotations

import numpy as np


def mces_search(edges1, elem1, labels1, edges2, elem2, labels2, order, cand_ptr, cand_idx, n_labels, budget):
    """Branch and bound over edge correspondences.

    G1 edges are processed in ``order``; each is either mapped to an unused
    G2 edge with the same label (in either orientation consistent with the
    partial atom bijection) or left unmapped.  The bound adds, per label,
    min(remaining G1 edges, unused G2 edges) to the current count.

    Returns ``(common_edges, expansions, exact)``.
    """
    m1 = len(order)
    n1 = len(elem1)
    n2 = len(elem2)
    map1 = [-1] * n1
    map2 = [-1] * n2
    ref1 = [0] * n1
    used2 = [False] * len(edges2)
    rem1 = [0] * n_labels
    avail2 = [0] * n_labels
    for k in range(m1):
        rem1[labels1[order[k]]] += 1
    for lab in labels2:
        avail2[lab] += 1
    state = {"best": 0, "expansions": 0, "aborted": False}

    def bound() -> int:
        s = 0
        for lab in range(n_labels):
            s += rem1[lab] if rem1[lab] < avail2[lab] else avail2[lab]
        return s

    def try_map(u1, v1, u2, v2):
        if elem1[u1] != elem2[u2] or elem1[v1] != elem2[v2]:
            return False
        if map1[u1] != -1 and map1[u1] != u2:
            return False
        if map1[v1] != -1 and map1[v1] != v2:
            return False
        if map2[u2] != -1 and map2[u2] != u1:
            return False
        if map2[v2] != -1 and map2[v2] != v1:
            return False
        return True

    def assign(u1, u2):
        map1[u1] = u2
        map2[u2] = u1
        ref1[u1] += 1

    def release(u1):
        ref1[u1] -= 1
        if ref1[u1] == 0:
            map2[map1[u1]] = -1
            map1[u1] = -1

    def dfs(depth, current):
        state["expansions"] += 1
        if state["expansions"] > budget:
            state["aborted"] = True
            return
        if current > state["best"]:
            state["best"] = current
        if depth == m1:
            return
        if current + bound() <= state["best"]:
            return
        e1 = order[depth]
        lab = labels1[e1]
        u1, v1 = edges1[e1]
        rem1[lab] -= 1
        for c in range(cand_ptr[depth], cand_ptr[depth + 1]):
            e2 = cand_idx[c]
            if used2[e2]:
                continue
            a2, b2 = edges2[e2]
            for u2, v2 in ((a2, b2), (b2, a2)):
                if not try_map(u1, v1, u2, v2):
                    continue
                assign(u1, u2)
                assign(v1, v2)
                used2[e2] = True
                avail2[lab] -= 1
                dfs(depth + 1, current + 1)
                avail2[lab] += 1
                used2[e2] = False
                release(v1)
                release(u1)
                if state["aborted"]:
                    rem1[lab] += 1
                    return
        dfs(depth + 1, current)
        rem1[lab] += 1

    dfs(0, 0)
    return state["best"], state["expansions"], not state["aborted"]


def euler_sample(probs, current, t, dt, uniforms):
    """Draw from ``onehot(current) + dt * (probs - onehot(current)) / (1 - t)`` row-wise.

    Inverse-CDF sampling: the result is the first index whose running sum
    exceeds the uniform draw (last index if rounding leaves none).
    """
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    n, k = probs.shape
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), current] = 1.0
    q = onehot + dt * ((probs - onehot) / (1.0 - t))
    np.maximum(q, 0.0, out=q)
    cdf = np.cumsum(q, axis=1)
    idx = (cdf <= uniforms[:, None]).sum(axis=1)
    return np.minimum(idx, k - 1).astype(np.int64)

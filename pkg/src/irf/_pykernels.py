"""Pure-Python kernels; bit-identical to the compiled ``_kernels`` module.

Randomness is consumed through ``Generator.random()``, which reads the same
``next_double`` stream the compiled code reads from the bit generator.
"""

import numpy as np


def _draw_features(weights, positive, mtry, rng):
    """Sequential weighted draws without replacement over integer weights."""
    k = min(mtry, len(positive))
    remaining = int(weights[positive].sum())
    live = weights.copy()
    out = []
    for _ in range(k):
        u = rng.random()
        r = int(u * float(remaining))
        if r >= remaining:
            r = remaining - 1
        # smallest index whose inclusive prefix sum exceeds r
        idx = int(np.searchsorted(np.cumsum(live), r, side="right"))
        out.append(idx)
        remaining -= int(live[idx])
        live[idx] = 0
    out.sort()
    return out


def sample_features(weights, mtry, bit_generator):
    weights = np.asarray(weights, dtype=np.int64)
    rng = np.random.Generator(bit_generator)
    positive = np.flatnonzero(weights > 0)
    return np.array(_draw_features(weights, positive, mtry, rng), dtype=np.intp)


def split_scan(xf, yf, wf, c0, c1, min_leaf):
    """Best threshold on one feature, as ``(P, Q, threshold)`` or ``None``.

    Split quality is the exact ratio ``P / Q`` of the sum over children of
    squared class counts divided by child size; maximizing it maximizes the
    weighted Gini decrease. The lowest threshold wins exact ties.
    """
    order = np.argsort(xf, kind="stable")
    xs = xf[order]
    if xs[0] == xs[-1]:
        return None
    ones = wf[order] * yf[order]
    zeros = wf[order] - ones
    cl1 = np.cumsum(ones)[:-1]
    cl0 = np.cumsum(zeros)[:-1]
    nl = cl0 + cl1
    N = c0 + c1
    nr = N - nl
    ok = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not ok.any():
        return None
    pos = np.flatnonzero(ok)
    cl0, cl1, nl, nr = cl0[pos], cl1[pos], nl[pos], nr[pos]
    cr0 = c0 - cl0
    cr1 = c1 - cl1
    P = (cl0 * cl0 + cl1 * cl1) * nr + (cr0 * cr0 + cr1 * cr1) * nl
    Q = nl * nr
    # floats shortlist near-maximal candidates; integers settle them exactly
    approx = P / Q
    near = np.flatnonzero(approx >= approx.max() * (1.0 - 1e-12))
    best = int(near[0])
    for j in near[1:]:
        if int(P[j]) * int(Q[best]) > int(P[best]) * int(Q[j]):
            best = int(j)
    a, b = xs[pos[best]], xs[pos[best] + 1]
    thr = a / 2.0 + b / 2.0
    if thr == b:
        thr = a
    return int(P[best]), int(Q[best]), float(thr)


def better(P, Q, best_P, best_Q):
    """Exact ``P / Q > best_P / best_Q``; a zero ``best_Q`` means no best yet."""
    return best_Q == 0 or P * best_Q > best_P * Q


def grow_tree(XT, RT, y, counts, weights, mtry, min_leaf, max_depth, bit_generator):
    # RT (dense ranks) only speeds up the compiled kernel
    X = XT.T
    rng = np.random.Generator(bit_generator)
    weights = np.asarray(weights, dtype=np.int64)
    positive = np.flatnonzero(weights > 0)
    if len(positive) == 0:
        raise ValueError("all feature weights are zero")
    rows = np.flatnonzero(counts > 0)
    if len(rows) == 0:
        raise ValueError("empty bootstrap sample")
    y = y.astype(np.int64)
    counts = counts.astype(np.int64)

    feature, threshold, left, right, n0, n1, decrease = [], [], [], [], [], [], []
    stack = [(rows, 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        w = counts[idx]
        c1 = int((w * y[idx]).sum())
        c0 = int(w.sum()) - c1
        N = c0 + c1
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n0.append(c0)
        n1.append(c1)
        decrease.append(0.0)

        if c0 == 0 or c1 == 0 or N < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        cand = _draw_features(weights, positive, mtry, rng)
        parent_proxy = float(c0 * c0 + c1 * c1) / float(N)
        best_P, best_Q, best_f, best_thr = 0, 0, -1, 0.0
        for f in cand:
            found = split_scan(X[idx, f], y[idx], w, c0, c1, min_leaf)
            if found is not None and better(found[0], found[1], best_P, best_Q):
                best_P, best_Q, best_thr = found
                best_f = f
        if best_f < 0:
            continue

        go_left = X[idx, best_f] <= best_thr
        dec = (float(best_P) / float(best_Q) - parent_proxy) / float(N)
        feature[node] = best_f
        threshold[node] = best_thr
        decrease[node] = max(dec, 0.0)
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))

    return (
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(n0, dtype=np.int64),
        np.array(n1, dtype=np.int64),
        np.array(decrease, dtype=np.float64),
    )


def apply_tree(X, feature, threshold, left, right):
    node = np.zeros(X.shape[0], dtype=np.intp)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node


def leaf_paths(feature, left, right, n_features):
    n_nodes = len(feature)
    leaves, indptr, items = [], [0], []
    path = []
    depth = np.zeros(n_nodes, dtype=np.intp)
    for node in range(n_nodes):
        if feature[node] >= 0:
            depth[left[node]] = depth[node] + 1
            depth[right[node]] = depth[node] + 1
    for node in range(n_nodes):
        d = depth[node]
        del path[d:]
        if feature[node] >= 0:
            path.append(int(feature[node]))
            continue
        items.extend(sorted(set(path)))
        leaves.append(node)
        indptr.append(len(items))
    return (
        np.array(leaves, dtype=np.intp),
        np.array(indptr, dtype=np.intp),
        np.array(items, dtype=np.intp),
    )

# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for tree growth, leaf lookup and decision-path extraction.

Every routine here has a pure-Python twin in ``_pykernels`` that produces
bit-identical output for the same inputs and the same bit generator state.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.stdint cimport int64_t
from libcpp.algorithm cimport sort as std_sort
from numpy.random cimport bitgen_t

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32
ctypedef cnp.int8_t i8
ctypedef Py_ssize_t intp

cdef extern from *:
    ctypedef long long i128 "__int128"


cdef bitgen_t* _bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("expected a numpy BitGenerator")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


# ---------------------------------------------------------------- fenwick ---

cdef inline void _fw_build(i64* fw, const i64* w, intp size) noexcept nogil:
    cdef intp i, j
    fw[0] = 0
    for i in range(1, size + 1):
        fw[i] = w[i - 1]
    for i in range(1, size + 1):
        j = i + (i & (-i))
        if j <= size:
            fw[j] += fw[i]


cdef inline void _fw_add(i64* fw, intp size, intp idx, i64 delta) noexcept nogil:
    cdef intp i = idx + 1
    while i <= size:
        fw[i] += delta
        i += i & (-i)


cdef inline intp _fw_find(const i64* fw, intp size, intp top, i64 r) noexcept nogil:
    # smallest 0-based idx with prefix_sum(idx) > r
    cdef intp pos = 0, nxt
    cdef intp bit = top
    while bit > 0:
        nxt = pos + bit
        if nxt <= size and fw[nxt] <= r:
            pos = nxt
            r -= fw[nxt]
        bit >>= 1
    return pos


cdef inline intp _draw_features(i64* fw, const i64* w, intp p, intp top, i64 total,
                                intp n_positive, intp mtry, intp* out,
                                bitgen_t* rng) noexcept nogil:
    cdef intp k = mtry if mtry < n_positive else n_positive
    cdef intp d, idx, a, b, tmp
    cdef i64 remaining = total, r
    cdef double u
    for d in range(k):
        u = rng.next_double(rng.state)
        r = <i64>(u * <double>remaining)
        if r >= remaining:
            r = remaining - 1
        idx = _fw_find(fw, p, top, r)
        out[d] = idx
        _fw_add(fw, p, idx, -w[idx])
        remaining -= w[idx]
    for d in range(k):
        _fw_add(fw, p, out[d], w[out[d]])
    # ascending order, insertion sort (k is small)
    for a in range(1, k):
        tmp = out[a]
        b = a - 1
        while b >= 0 and out[b] > tmp:
            out[b + 1] = out[b]
            b -= 1
        out[b + 1] = tmp
    return k


def sample_features(const i64[::1] weights, intp mtry, object bit_generator):
    """Weighted draw of up to ``mtry`` distinct features (sorted ascending)."""
    cdef intp p = weights.shape[0]
    cdef intp top = 1, i, k, n_positive = 0
    cdef i64 total = 0
    cdef bitgen_t* rng = _bitgen(bit_generator)
    while top * 2 <= p:
        top *= 2
    for i in range(p):
        if weights[i] > 0:
            n_positive += 1
            total += weights[i]
    fw = np.empty(p + 1, dtype=np.int64)
    out = np.empty(max(mtry, 1), dtype=np.intp)
    cdef i64[::1] fw_v = fw
    cdef intp[::1] out_v = out
    with bit_generator.lock:
        _fw_build(&fw_v[0], &weights[0], p)
        k = _draw_features(&fw_v[0], &weights[0], p, top, total, n_positive, mtry,
                           &out_v[0], rng)
    return out[:k].copy()


# ------------------------------------------------------------------- grow ---

def grow_tree(const double[:, ::1] XT, const i32[:, ::1] RT, const i8[::1] y,
              const i32[::1] counts, const i64[::1] weights, intp mtry, i64 min_leaf,
              intp max_depth, object bit_generator):
    """Grow one weighted-CART tree on the rows with ``counts > 0``.

    ``XT`` is the feature matrix transposed (features by rows), C-contiguous;
    ``RT`` holds the dense rank of every value within its feature row. Node
    rows are sorted as packed ``rank << 32 | row`` keys, so equal values are
    adjacent and only boundaries between distinct ranks are scanned.

    Returns preorder node arrays ``(feature, threshold, left, right, n0, n1,
    decrease)``; leaves carry ``feature == -1``.
    """
    cdef intp n = XT.shape[1], p = XT.shape[0]
    cdef intp n_u = 0, i, j, top = 1, n_positive = 0
    cdef i64 total = 0
    cdef bitgen_t* rng = _bitgen(bit_generator)

    for i in range(n):
        if counts[i] > 0:
            n_u += 1
    if n_u == 0:
        raise ValueError("empty bootstrap sample")
    if RT.shape[0] != p or RT.shape[1] != n:
        raise ValueError("rank matrix does not match the feature matrix")
    if n >= 2**31:
        raise ValueError("too many rows")
    for i in range(p):
        if weights[i] > 0:
            n_positive += 1
            total += weights[i]
    if n_positive == 0:
        raise ValueError("all feature weights are zero")
    while top * 2 <= p:
        top *= 2

    cdef intp cap = 2 * n_u
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    n0 = np.zeros(cap, dtype=np.int64)
    n1 = np.zeros(cap, dtype=np.int64)
    decrease = np.zeros(cap, dtype=np.float64)
    cdef i32[::1] feature_v = feature
    cdef double[::1] threshold_v = threshold
    cdef i32[::1] left_v = left
    cdef i32[::1] right_v = right
    cdef i64[::1] n0_v = n0
    cdef i64[::1] n1_v = n1
    cdef double[::1] decrease_v = decrease

    samples = np.empty(n_u, dtype=np.intp)
    keys = np.empty(n_u, dtype=np.int64)
    fw = np.empty(p + 1, dtype=np.int64)
    cand = np.empty(max(mtry, 1), dtype=np.intp)
    st_start = np.empty(cap, dtype=np.intp)
    st_end = np.empty(cap, dtype=np.intp)
    st_depth = np.empty(cap, dtype=np.intp)
    st_parent = np.empty(cap, dtype=np.intp)
    st_left = np.empty(cap, dtype=np.intp)
    cdef intp[::1] samples_v = samples
    cdef int64_t[::1] keys_v = keys
    cdef int64_t* kp = &keys_v[0]
    cdef int64_t low_mask = 0xFFFFFFFF
    cdef i64[::1] fw_v = fw
    cdef intp[::1] cand_v = cand
    cdef intp[::1] ss = st_start, se = st_end, sd = st_depth, sp = st_parent, sl = st_left

    j = 0
    for i in range(n):
        if counts[i] > 0:
            samples_v[j] = i
            j += 1

    cdef intp sp_top = 0, n_nodes = 0, node
    cdef intp start, end, depth, parent, is_left, k, ci, f, best_f, mid, s, s2
    cdef i64 c0, c1, N, cl0, cl1, cr0, cr1, nl, nr, w, P, Q, best_P, best_Q
    cdef double parent_proxy, best_thr, thr, dec, xv

    with bit_generator.lock, nogil:
        _fw_build(&fw_v[0], &weights[0], p)
        ss[0] = 0
        se[0] = n_u
        sd[0] = 0
        sp[0] = -1
        sl[0] = 0
        sp_top = 1
        while sp_top > 0:
            sp_top -= 1
            start = ss[sp_top]
            end = se[sp_top]
            depth = sd[sp_top]
            parent = sp[sp_top]
            is_left = sl[sp_top]

            c0 = 0
            c1 = 0
            for i in range(start, end):
                s = samples_v[i]
                if y[s]:
                    c1 += counts[s]
                else:
                    c0 += counts[s]
            N = c0 + c1
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if is_left:
                    left_v[parent] = <i32>node
                else:
                    right_v[parent] = <i32>node
            n0_v[node] = c0
            n1_v[node] = c1

            if c0 == 0 or c1 == 0 or N < 2 * min_leaf:
                continue
            if max_depth >= 0 and depth >= max_depth:
                continue

            k = _draw_features(&fw_v[0], &weights[0], p, top, total, n_positive,
                               mtry, &cand_v[0], rng)
            parent_proxy = <double>(c0 * c0 + c1 * c1) / <double>N
            # split quality is the exact ratio P / Q, compared by cross-multiplying
            best_P = 0
            best_Q = 0
            best_f = -1
            best_thr = 0.0
            for ci in range(k):
                f = cand_v[ci]
                for i in range(start, end):
                    s = samples_v[i]
                    kp[i] = ((<int64_t>RT[f, s]) << 32) | s
                std_sort(kp + start, kp + end)
                if (kp[start] >> 32) == (kp[end - 1] >> 32):
                    continue
                cl0 = 0
                cl1 = 0
                for i in range(start, end - 1):
                    s = <intp>(kp[i] & low_mask)
                    if y[s]:
                        cl1 += counts[s]
                    else:
                        cl0 += counts[s]
                    if (kp[i] >> 32) == (kp[i + 1] >> 32):
                        continue
                    nl = cl0 + cl1
                    nr = N - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    cr0 = c0 - cl0
                    cr1 = c1 - cl1
                    P = (cl0 * cl0 + cl1 * cl1) * nr + (cr0 * cr0 + cr1 * cr1) * nl
                    Q = nl * nr
                    if best_Q == 0 or (<i128>P) * best_Q > (<i128>best_P) * Q:
                        best_P = P
                        best_Q = Q
                        best_f = f
                        s2 = <intp>(kp[i + 1] & low_mask)
                        thr = XT[f, s] / 2.0 + XT[f, s2] / 2.0
                        if thr == XT[f, s2]:
                            thr = XT[f, s]
                        best_thr = thr
            if best_f < 0:
                continue

            i = start
            j = end
            while i < j:
                xv = XT[best_f, samples_v[i]]
                if xv <= best_thr:
                    i += 1
                else:
                    j -= 1
                    s = samples_v[i]
                    samples_v[i] = samples_v[j]
                    samples_v[j] = s
            mid = i
            dec = (<double>best_P / <double>best_Q - parent_proxy) / <double>N
            if dec < 0.0:
                dec = 0.0
            feature_v[node] = <i32>best_f
            threshold_v[node] = best_thr
            decrease_v[node] = dec

            ss[sp_top] = mid
            se[sp_top] = end
            sd[sp_top] = depth + 1
            sp[sp_top] = node
            sl[sp_top] = 0
            sp_top += 1
            ss[sp_top] = start
            se[sp_top] = mid
            sd[sp_top] = depth + 1
            sp[sp_top] = node
            sl[sp_top] = 1
            sp_top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), n0[:n_nodes].copy(), n1[:n_nodes].copy(),
            decrease[:n_nodes].copy())


# ------------------------------------------------------------------ apply ---

def apply_tree(const double[:, ::1] X, const i32[::1] feature, const double[::1] threshold,
               const i32[::1] left, const i32[::1] right):
    """Leaf id reached by every row of ``X``."""
    cdef intp m = X.shape[0], i, node
    out = np.empty(m, dtype=np.intp)
    cdef intp[::1] out_v = out
    with nogil:
        for i in range(m):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out_v[i] = node
    return out


# ------------------------------------------------------------------ paths ---

def leaf_paths(const i32[::1] feature, const i32[::1] left, const i32[::1] right,
               intp n_features):
    """Unique split features on the root-to-leaf path of every leaf.

    Returns ``(leaves, indptr, items)`` in CSR form; items per leaf ascending.
    """
    cdef intp n_nodes = feature.shape[0]
    cdef intp n_leaves = 0, i, node, depth, f, a, b, tmp, start, n_items = 0
    for i in range(n_nodes):
        if feature[i] < 0:
            n_leaves += 1

    # first pass sizes the output: path length bounds unique count
    node_depth = np.zeros(n_nodes, dtype=np.intp)
    cdef intp[::1] nd = node_depth
    for i in range(n_nodes):
        if feature[i] >= 0:
            nd[left[i]] = nd[i] + 1
            nd[right[i]] = nd[i] + 1
    cdef intp total = 0
    for i in range(n_nodes):
        if feature[i] < 0:
            total += nd[i]

    leaves = np.empty(n_leaves, dtype=np.intp)
    indptr = np.zeros(n_leaves + 1, dtype=np.intp)
    items = np.empty(total, dtype=np.intp)
    cdef intp[::1] lv = leaves, ip = indptr, it = items
    path = np.empty(n_nodes + 1, dtype=np.intp)
    mark = np.zeros(max(n_features, 1), dtype=np.intp)
    cdef intp[::1] pv = path, mk = mark

    # preorder ids: walking ids in order, a node's path is its ancestors,
    # tracked by depth-indexed stack
    cdef intp leaf_no = 0, stamp = 0
    with nogil:
        for node in range(n_nodes):
            depth = nd[node]
            if feature[node] >= 0:
                pv[depth] = feature[node]
                continue
            stamp += 1
            start = n_items
            for a in range(depth):
                f = pv[a]
                if mk[f] != stamp:
                    mk[f] = stamp
                    it[n_items] = f
                    n_items += 1
            for a in range(start + 1, n_items):
                tmp = it[a]
                b = a - 1
                while b >= start and it[b] > tmp:
                    it[b + 1] = it[b]
                    b -= 1
                it[b + 1] = tmp
            lv[leaf_no] = node
            leaf_no += 1
            ip[leaf_no] = n_items
    return leaves, indptr, items[:n_items].copy()

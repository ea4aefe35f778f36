"""Compiled CART kernels (variance-reduction regression trees).

Trees are stored as flat node arrays: ``feature`` (-1 marks a leaf),
``threshold``, ``left``, ``right`` and ``value``. Rows with
``x[feature] <= threshold`` go left. Forests concatenate their trees with
absolute child indices and a ``roots`` offset array.
"""
import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@nb.njit(cache=True)
def _splitmix(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def mix_seed(seed, index):
    """Counter-based mix of ``(seed, index)`` into a 64-bit stream seed."""
    st = np.empty(1, dtype=np.uint64)
    st[0] = np.uint64(index) * _M2 + np.uint64(seed)
    a = _splitmix(st)
    st[0] = a ^ np.uint64(seed)
    return _splitmix(st)


@nb.njit(cache=True)
def _randint(state, n):
    # uniform integer in [0, n)
    u = (_splitmix(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    k = np.int64(u * n)
    if k >= n:
        k = n - 1
    return k


@nb.njit(cache=True)
def _grow(X, y, rows, max_depth, min_leaf, mtry, state,
          feature, threshold, left, right, value, offset):
    """Grow one tree on ``X[rows]`` into the node arrays starting at ``offset``.

    Returns the number of nodes written.
    """
    n, p = X.shape[0], X.shape[1]
    m = rows.shape[0]
    idx = rows.copy()
    buf = np.empty(m, dtype=np.int64)
    feats = np.arange(p)
    vals = np.empty(m)
    ys = np.empty(m)

    # explicit stack of (node, start, end, depth)
    st_node = np.empty(2 * m + 2, dtype=np.int64)
    st_start = np.empty(2 * m + 2, dtype=np.int64)
    st_end = np.empty(2 * m + 2, dtype=np.int64)
    st_depth = np.empty(2 * m + 2, dtype=np.int64)
    top = 0
    st_node[0] = offset
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    top = 1
    count = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        k = end - start

        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            v = y[idx[i]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean = s / k
        value[node] = mean
        feature[node] = -1
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1
        if depth >= max_depth or k < 2 * min_leaf or ymin == ymax:
            continue

        sse = 0.0
        for i in range(start, end):
            d = y[idx[i]] - mean
            sse += d * d

        # candidate features, ascending order
        if mtry < p:
            for j in range(p):
                feats[j] = j
            for j in range(mtry):
                r = j + _randint(state, p - j)
                t = feats[j]
                feats[j] = feats[r]
                feats[r] = t
            cand = np.sort(feats[:mtry])
        else:
            cand = np.arange(p)

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for f in cand:
            for i in range(k):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:k], kind="mergesort")
            for i in range(k):
                ys[i] = y[idx[start + order[i]]] - mean
            total = 0.0
            for i in range(k):
                total += ys[i]
            base = total * total / k
            sl = 0.0
            for i in range(1, k):
                sl += ys[i - 1]
                if i < min_leaf or k - i < min_leaf:
                    continue
                a = vals[order[i - 1]]
                b = vals[order[i]]
                if not a < b:
                    continue
                sr = total - sl
                gain = sl * sl / i + sr * sr / (k - i) - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr

        if best_f < 0 or not best_gain > 1e-12 * sse:
            continue

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                nl += 1
        li = 0
        ri = nl
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] <= best_thr:
                buf[li] = r
                li += 1
            else:
                buf[ri] = r
                ri += 1
        for i in range(k):
            idx[start + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = offset + count
        rnode = offset + count + 1
        count += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        st_node[top] = rnode
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1
    return count


@nb.njit(cache=True)
def fit_forest_kernel(X, y, n_trees, max_depth, min_leaf, mtry, bootstrap, seed):
    """Fit ``n_trees`` trees; returns flat node arrays and per-tree roots."""
    m = y.shape[0]
    cap = n_trees * (2 * m + 1)
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.empty(cap)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.empty(cap)
    roots = np.empty(n_trees + 1, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    rows = np.empty(m, dtype=np.int64)
    used = 0
    for t in range(n_trees):
        state[0] = mix_seed(np.uint64(seed), np.uint64(t))
        if bootstrap:
            for i in range(m):
                rows[i] = _randint(state, m)
        else:
            for i in range(m):
                rows[i] = i
        roots[t] = used
        used += _grow(X, y, rows, max_depth, min_leaf, mtry, state,
                      feature, threshold, left, right, value, used)
    roots[n_trees] = used
    return feature[:used].copy(), threshold[:used].copy(), left[:used].copy(), right[:used].copy(), value[:used].copy(), roots


@nb.njit(cache=True)
def predict_trees_kernel(X, feature, threshold, left, right, value, roots):
    """Per-tree predictions, shape ``(n_trees, n_rows)``."""
    n_trees = roots.shape[0] - 1
    k = X.shape[0]
    out = np.empty((n_trees, k))
    for t in range(n_trees):
        r0 = roots[t]
        for i in range(k):
            node = r0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, i] = value[node]
    return out

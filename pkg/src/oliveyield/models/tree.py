"""Regression tree building blocks shared by the forest and boosting models.

Trees are stored as flat arrays so whole ensembles can predict in a handful
of vectorized passes: leaves self-loop (``left == right == self`` with
threshold ``+inf``), which makes descent branch-free. All builders are
deterministic for a fixed generator state; candidate order and tie-breaking
are fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

N_HIST_BINS = 255


@dataclass
class TreeArrays:
    """Flat node-array representation of one regression tree."""

    feature: np.ndarray  # int32; arbitrary valid column for leaves
    threshold: np.ndarray  # float64; +inf for leaves
    left: np.ndarray  # int32; leaves point at themselves
    right: np.ndarray  # int32
    value: np.ndarray  # float64 node means; leaves carry predictions
    levels: int  # deepest leaf depth, bounds descent iterations

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def leaf_mask(self) -> np.ndarray:
        return self.left == np.arange(self.n_nodes, dtype=self.left.dtype)


def predict_trees(trees: Sequence[TreeArrays], X: np.ndarray) -> np.ndarray:
    """Leaf values of every tree for every row, shape (n_trees, n_rows).

    Descends all trees simultaneously; rows already at a leaf keep
    self-looping, so the loop runs for the deepest tree's level count.
    """
    n = X.shape[0]
    if n == 0:
        return np.empty((len(trees), 0))
    sizes = [t.n_nodes for t in trees]
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    feature = np.concatenate([t.feature for t in trees]).astype(np.int64)
    threshold = np.concatenate([t.threshold for t in trees])
    left = np.concatenate(
        [t.left.astype(np.int64) + off for t, off in zip(trees, offsets)]
    )
    right = np.concatenate(
        [t.right.astype(np.int64) + off for t, off in zip(trees, offsets)]
    )
    value = np.concatenate([t.value for t in trees])

    pos = np.repeat(offsets[:, None], n, axis=1)
    rows = np.arange(n)
    for _ in range(max(t.levels for t in trees)):
        xv = X[rows[None, :], feature[pos]]
        go_left = xv <= threshold[pos]
        pos = np.where(go_left, left[pos], right[pos])
    return value[pos]


def predict_tree(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    return predict_trees([tree], X)[0]


# -- exact greedy builder (forests and level-wise boosting) -------------------


def _best_split(Xc, yn, min_samples_leaf):
    """Best variance-reduction split over the candidate columns of ``Xc``.

    Returns (column, threshold) or None. Thresholds are midpoints between
    adjacent distinct sorted values; the first maximal score wins ties.
    """
    n, c = Xc.shape
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = yn[order]
    csum = np.cumsum(ys, axis=0)
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    sl = csum[:-1]
    sr = csum[-1][None, :] - sl
    score = sl * sl / nl + sr * sr / nr
    ok = (xs[:-1] < xs[1:]) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
    if not ok.any():
        return None
    score = np.where(ok, score, -np.inf)
    flat = int(np.argmax(score))
    pos, col = divmod(flat, c)
    s_all = float(yn.sum())
    if score[pos, col] <= s_all * s_all / n:
        return None
    thr = 0.5 * (xs[pos, col] + xs[pos + 1, col])
    return col, float(thr)


def _random_split(Xc, yn, min_samples_leaf, rng):
    """Extra-trees style split: one uniform threshold per candidate column."""
    n, c = Xc.shape
    lo = Xc.min(axis=0)
    hi = Xc.max(axis=0)
    thr = rng.uniform(lo, hi)
    mask = Xc <= thr[None, :]
    nl = mask.sum(axis=0).astype(np.float64)
    nr = n - nl
    sl = (yn[:, None] * mask).sum(axis=0)
    s_all = float(yn.sum())
    sr = s_all - sl
    ok = (nl >= min_samples_leaf) & (nr >= min_samples_leaf) & (hi > lo)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = sl * sl / np.maximum(nl, 1.0) + sr * sr / np.maximum(nr, 1.0)
    score = np.where(ok, score, -np.inf)
    col = int(np.argmax(score))
    if score[col] <= s_all * s_all / n:
        return None
    return col, float(thr[col])


def grow_tree(
    X,
    y,
    rows,
    *,
    max_depth,
    min_samples_leaf,
    max_features,
    splitter,
    rng,
    out_pred=None,
):
    """Depth-first greedy CART on ``rows`` of (X, y).

    ``splitter`` is ``"best"`` (optimized thresholds) or ``"random"``
    (extra-trees uniform thresholds). ``max_features`` limits the per-node
    candidate columns; None means all. When ``out_pred`` is given, the
    training rows' leaf values are written into it.
    """
    p = X.shape[1]
    k_feats = p if max_features is None else min(int(max_features), p)
    split_fn = _best_split if splitter == "best" else _random_split

    feature, threshold, left, right, value = [], [], [], [], []
    levels = 0
    stack = [(np.asarray(rows, dtype=np.intp), 0, -1, False)]
    while stack:
        node_rows, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node_id
        yn = y[node_rows]
        node_mean = float(yn.mean())
        levels = max(levels, depth)

        split = None
        cand = None
        n = node_rows.size
        if (
            depth < max_depth
            and n >= 2 * min_samples_leaf
            and yn.min() < yn.max()
        ):
            if k_feats >= p:
                cand = np.arange(p)
            else:
                cand = rng.choice(p, size=k_feats, replace=False)
            Xc = X[np.ix_(node_rows, cand)]
            if splitter == "best":
                split = split_fn(Xc, yn, min_samples_leaf)
            else:
                split = split_fn(Xc, yn, min_samples_leaf, rng)

        if split is not None:
            col, thr = split
            f = int(cand[col])
            go_left = X[node_rows, f] <= thr
            left_rows = node_rows[go_left]
            right_rows = node_rows[~go_left]
            if left_rows.size == 0 or right_rows.size == 0:
                split = None  # degenerate midpoint rounding, keep as leaf

        if split is None:
            feature.append(0)
            threshold.append(np.inf)
            left.append(node_id)
            right.append(node_id)
            value.append(node_mean)
            if out_pred is not None:
                out_pred[node_rows] = node_mean
        else:
            feature.append(f)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            value.append(node_mean)
            stack.append((right_rows, depth + 1, node_id, True))
            stack.append((left_rows, depth + 1, node_id, False))

    return TreeArrays(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        levels,
    )


# -- histogram machinery (leaf-wise and oblivious boosting) -------------------


def bin_columns(X, n_bins: int = N_HIST_BINS):
    """Quantize each column into at most ``n_bins`` equal-width bins.

    Returns integer codes and, per column, the interior bin edges that serve
    as candidate split thresholds. ``code <= b`` is exactly ``x <= edges[b]``.
    """
    n, p = X.shape
    codes = np.zeros((n, p), dtype=np.int64)
    boundaries = []
    for f in range(p):
        x = X[:, f]
        lo, hi = float(x.min()), float(x.max())
        if lo == hi:
            boundaries.append(np.empty(0))
            continue
        edges = np.linspace(lo, hi, n_bins + 1)
        interior = edges[1:-1]
        codes[:, f] = np.searchsorted(interior, x, side="left")
        boundaries.append(interior)
    return codes, boundaries


def _hist_best_split(codes, boundaries, y, rows, min_samples_leaf, n_bins):
    """Best histogram split of one leaf; returns (gain, feature, bin, thr)."""
    m = rows.size
    p = codes.shape[1]
    sub = codes[rows]
    flat = (sub + np.arange(p, dtype=np.int64)[None, :] * n_bins).ravel()
    counts = np.bincount(flat, minlength=p * n_bins).reshape(p, n_bins)
    sums = np.bincount(
        flat, weights=np.repeat(y[rows], p), minlength=p * n_bins
    ).reshape(p, n_bins)
    nl = np.cumsum(counts, axis=1)[:, :-1].astype(np.float64)
    sl = np.cumsum(sums, axis=1)[:, :-1]
    s_all = float(y[rows].sum())
    nr = m - nl
    sr = s_all - sl
    ok = (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = sl * sl / np.maximum(nl, 1.0) + sr * sr / np.maximum(nr, 1.0)
    score = np.where(ok, score, -np.inf)
    flat_best = int(np.argmax(score))
    f, b = divmod(flat_best, n_bins - 1)
    gain = float(score[f, b] - s_all * s_all / m)
    if gain <= 0.0:
        return None
    return gain, f, b, float(boundaries[f][b])


def grow_tree_hist_leafwise(
    codes,
    boundaries,
    y,
    rows,
    *,
    max_leaves,
    min_samples_leaf,
    n_bins: int = N_HIST_BINS,
    out_pred=None,
):
    """Best-leaf-first growth: repeatedly split the leaf with the largest
    variance-reduction gain until ``max_leaves`` or no leaf improves."""
    feature, threshold, left, right, value = [], [], [], [], []
    levels = 0

    def new_node(node_rows, depth):
        node_id = len(feature)
        feature.append(0)
        threshold.append(np.inf)
        left.append(node_id)
        right.append(node_id)
        value.append(float(y[node_rows].mean()))
        return node_id

    rows = np.asarray(rows, dtype=np.intp)
    root = new_node(rows, 0)
    # leaves: slot -> (rows, depth, best split or None)
    leaves = {
        root: (rows, 0, _hist_best_split(codes, boundaries, y, rows, min_samples_leaf, n_bins))
    }

    while len(leaves) < max_leaves:
        best_slot = None
        best_gain = 0.0
        for slot in sorted(leaves):
            split = leaves[slot][2]
            if split is not None and split[0] > best_gain:
                best_gain = split[0]
                best_slot = slot
        if best_slot is None:
            break
        node_rows, depth, (gain, f, b, thr) = leaves.pop(best_slot)
        go_left = codes[node_rows, f] <= b
        lrows = node_rows[go_left]
        rrows = node_rows[~go_left]
        feature[best_slot] = f
        threshold[best_slot] = thr
        lslot = new_node(lrows, depth + 1)
        rslot = new_node(rrows, depth + 1)
        left[best_slot] = lslot
        right[best_slot] = rslot
        levels = max(levels, depth + 1)
        leaves[lslot] = (
            lrows,
            depth + 1,
            _hist_best_split(codes, boundaries, y, lrows, min_samples_leaf, n_bins),
        )
        leaves[rslot] = (
            rrows,
            depth + 1,
            _hist_best_split(codes, boundaries, y, rrows, min_samples_leaf, n_bins),
        )

    if out_pred is not None:
        for slot, (node_rows, _, _) in leaves.items():
            out_pred[node_rows] = value[slot]

    return TreeArrays(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        levels,
    )


def grow_tree_oblivious(
    codes,
    boundaries,
    y,
    rows,
    *,
    depth,
    min_samples_leaf,
    n_bins: int = N_HIST_BINS,
    out_pred=None,
):
    """Oblivious tree: one shared (feature, threshold) per depth level.

    Each level picks the split maximizing the summed variance reduction over
    all current leaves; leaves that would end up one-sided contribute their
    unsplit score. Stops early when no level improves. Empty leaves predict
    0, i.e. no correction in residual space.
    """
    rows = np.asarray(rows, dtype=np.intp)
    n = rows.size
    p = codes.shape[1]
    yr = y[rows]
    leaf_code = np.zeros(n, dtype=np.int64)
    chosen: list[tuple[int, float, int]] = []

    n_leaves = 1
    for _ in range(depth):
        flat = ((leaf_code[:, None] * p + np.arange(p)[None, :]) * n_bins) + codes[rows]
        size = n_leaves * p * n_bins
        counts = np.bincount(flat.ravel(), minlength=size).reshape(n_leaves, p, n_bins)
        sums = np.bincount(
            flat.ravel(), weights=np.repeat(yr, p), minlength=size
        ).reshape(n_leaves, p, n_bins)
        nl = np.cumsum(counts, axis=2)[:, :, :-1].astype(np.float64)
        sl = np.cumsum(sums, axis=2)[:, :, :-1]
        leaf_n = counts[:, 0, :].sum(axis=1).astype(np.float64)
        leaf_s = sums[:, 0, :].sum(axis=1)
        nr = leaf_n[:, None, None] - nl
        sr = leaf_s[:, None, None] - sl
        with np.errstate(divide="ignore", invalid="ignore"):
            child = sl * sl / np.maximum(nl, 1.0) + sr * sr / np.maximum(nr, 1.0)
            unsplit = np.where(leaf_n > 0, leaf_s * leaf_s / np.maximum(leaf_n, 1.0), 0.0)
        splittable = (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
        contrib = np.where(splittable, child, unsplit[:, None, None])
        total = contrib.sum(axis=0)  # (p, n_bins - 1)
        if not splittable.any():
            break
        flat_best = int(np.argmax(np.where(splittable.any(axis=0), total, -np.inf)))
        f, b = divmod(flat_best, n_bins - 1)
        gain = float(total[f, b] - unsplit.sum())
        if gain <= 0.0:
            break
        thr = float(boundaries[f][b])
        chosen.append((f, thr, b))
        leaf_code = leaf_code * 2 + (codes[rows, f] > b).astype(np.int64)
        n_leaves *= 2

    d_eff = len(chosen)
    n_leaf_slots = 1 << d_eff
    leaf_counts = np.bincount(leaf_code, minlength=n_leaf_slots)
    leaf_sums = np.bincount(leaf_code, weights=yr, minlength=n_leaf_slots)
    with np.errstate(divide="ignore", invalid="ignore"):
        leaf_values = np.where(leaf_counts > 0, leaf_sums / np.maximum(leaf_counts, 1), 0.0)

    if out_pred is not None:
        out_pred[rows] = leaf_values[leaf_code]

    # Expand to a full binary tree in breadth-first layout.
    n_nodes = (1 << (d_eff + 1)) - 1
    feature = np.zeros(n_nodes, dtype=np.int32)
    threshold = np.full(n_nodes, np.inf)
    left = np.arange(n_nodes, dtype=np.int32)
    right = np.arange(n_nodes, dtype=np.int32)
    value = np.zeros(n_nodes)
    for level, (f, thr, _) in enumerate(chosen):
        start = (1 << level) - 1
        nxt = (1 << (level + 1)) - 1
        for j in range(1 << level):
            node = start + j
            feature[node] = f
            threshold[node] = thr
            left[node] = nxt + 2 * j
            right[node] = nxt + 2 * j + 1
    leaf_start = (1 << d_eff) - 1
    value[leaf_start:] = leaf_values
    if d_eff == 0:
        value[0] = float(yr.mean())
        if out_pred is not None:
            out_pred[rows] = value[0]

    return TreeArrays(
        feature,
        threshold,
        left.astype(np.int32),
        right.astype(np.int32),
        value,
        d_eff,
    )

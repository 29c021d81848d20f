"""Hot inner loops: meta-path walks and skip-gram negative-sampling updates.

Each kernel is written once as plain Python over numpy arrays and compiled
with numba when available. Set MUG_DISABLE_NUMBA=1 to force the interpreted
path (same source, bit-identical results, much slower at scale). All
randomness is pre-drawn into arrays by the caller, so the two paths consume
the exact same random sequence.

benchmarks/bench_kernels.py compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

if os.environ.get("MUG_DISABLE_NUMBA"):
    USING_NUMBA = False
else:
    try:
        import numba

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


def _jit(fn):
    if USING_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


@_jit
def run_walks(flat_indptr, indptr_start, flat_indices, indices_start,
              type_off, starts, walks_per_node, walk_len, uniforms,
              out_nodes, out_lens):
    """Meta-path-guided walks; the step pattern repeats cyclically.

    Step j moves from a node of pattern type j to a uniformly chosen
    neighbor under step j's CSR. A node with no conforming neighbor ends
    the walk early. out_nodes rows are global node ids, -1 padded.
    """
    period = indptr_start.shape[0]
    n_starts = starts.shape[0]
    for s in range(n_starts):
        for w in range(walks_per_node):
            row = s * walks_per_node + w
            cur = starts[s]
            out_nodes[row, 0] = type_off[0] + cur
            length = 1
            for step in range(walk_len):
                j = step % period
                base = indptr_start[j]
                lo = flat_indptr[base + cur]
                deg = flat_indptr[base + cur + 1] - lo
                if deg == 0:
                    break
                pick = int(uniforms[s, w, step] * deg)
                if pick >= deg:
                    pick = deg - 1
                cur = flat_indices[indices_start[j] + lo + pick]
                out_nodes[row, length] = type_off[(step + 1) % period] + cur
                length += 1
            out_lens[row] = length


@_jit
def count_window_pairs(lens, window):
    total = 0
    for w in range(lens.shape[0]):
        n = lens[w]
        for i in range(n):
            lo = i - window
            if lo < 0:
                lo = 0
            hi = i + window
            if hi > n - 1:
                hi = n - 1
            total += hi - lo
    return total


@_jit
def fill_window_pairs(walks, lens, window, centers, contexts):
    k = 0
    for w in range(lens.shape[0]):
        n = lens[w]
        for i in range(n):
            lo = i - window
            if lo < 0:
                lo = 0
            hi = i + window
            if hi > n - 1:
                hi = n - 1
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                centers[k] = walks[w, i]
                contexts[k] = walks[w, j]
                k += 1
    return k


@_jit
def sgns_epoch(center, context, centers_idx, contexts_idx, negatives,
               lr_start, lr_end, pair_offset, total_pairs):
    """One sequential pass of skip-gram SGD with negative sampling.

    Per pair: positive target then each negative; scores use the current
    tables, the center row update is applied after all targets (word2vec
    update order). The learning rate decays linearly over total_pairs.
    Returns the summed pair loss (computed before the updates).
    """
    n_pairs = centers_idx.shape[0]
    n_neg = negatives.shape[1]
    dim = center.shape[1]
    buf = np.zeros(dim)
    loss = 0.0
    for p in range(n_pairs):
        frac = (pair_offset + p) / total_pairs
        lr = lr_start + (lr_end - lr_start) * frac
        v = centers_idx[p]
        for d in range(dim):
            buf[d] = 0.0
        for t in range(n_neg + 1):
            if t == 0:
                target = contexts_idx[p]
                label = 1.0
            else:
                target = negatives[p, t - 1]
                label = 0.0
            score = 0.0
            for d in range(dim):
                score += center[v, d] * context[target, d]
            if score >= 0.0:
                sig = 1.0 / (1.0 + math.exp(-score))
                logsig = -math.log1p(math.exp(-score))
            else:
                e = math.exp(score)
                sig = e / (1.0 + e)
                logsig = score - math.log1p(e)
            if label == 1.0:
                loss -= logsig
            else:
                # -log(1 - sigmoid(score)) = -logsigmoid(-score)
                loss -= logsig - score
            g = (label - sig) * lr
            for d in range(dim):
                buf[d] += g * context[target, d]
                context[target, d] += g * center[v, d]
        for d in range(dim):
            center[v, d] += buf[d]
    return loss

"""Compare the jit-compiled kernels against the interpreted fallback.

The two paths run the same source on identical inputs (randomness is
pre-drawn), so outputs are bit-identical; only speed differs. Run:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mug import kernels, structenc, synth
from mug.rng import RngStream
from mug.structenc import WalkConfig


def timeit(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_sgns(n_nodes=500, dim=64, n_pairs=200_000, n_neg=5):
    rng = np.random.default_rng(0)
    center = (rng.random((n_nodes, dim)) - 0.5) / dim
    context = np.zeros((n_nodes, dim))
    centers = rng.integers(0, n_nodes, n_pairs)
    contexts = rng.integers(0, n_nodes, n_pairs)
    negatives = rng.integers(0, n_nodes, (n_pairs, n_neg))

    def run(fn):
        c, x = center.copy(), context.copy()
        loss = fn(c, x, centers, contexts, negatives, 0.025, 1e-4, 0, n_pairs)
        return loss, c, x

    print(f"\nsgns_epoch: {n_pairs} pairs, {n_neg} negatives, dim {dim}")
    if kernels.USING_NUMBA:
        run(kernels.sgns_epoch)  # warm the compile cache before timing
        t_jit, (loss_jit, c_jit, x_jit) = timeit(lambda: run(kernels.sgns_epoch))
        t_py, (loss_py, c_py, x_py) = timeit(
            lambda: run(kernels.sgns_epoch.py_func), repeat=1)
        same = (loss_jit == loss_py and np.array_equal(c_jit, c_py)
                and np.array_equal(x_jit, x_py))
        print(f"  jit:         {t_jit:8.3f}s   {n_pairs / t_jit:12.0f} pairs/s")
        print(f"  interpreted: {t_py:8.3f}s   {n_pairs / t_py:12.0f} pairs/s")
        print(f"  speedup: {t_py / t_jit:.0f}x   bit-identical: {same}")
    else:
        t_py, _ = timeit(lambda: run(kernels.sgns_epoch), repeat=1)
        print(f"  interpreted only (numba disabled): {t_py:8.3f}s")


def bench_walks():
    spec = synth.SynthSpec.from_dict(synth.two_view_spec(targets_per_class=300))
    g = synth.generate(spec, RngStream(0))
    cfg = WalkConfig(walks_per_node=20, walk_length=40)
    mp = g.metapaths[0]
    n_steps = g.counts[g.target_type] * cfg.walks_per_node * cfg.walk_length

    print(f"\nrun_walks: {g.counts[g.target_type]} starts x {cfg.walks_per_node} "
          f"walks x {cfg.walk_length} steps")
    if kernels.USING_NUMBA:
        structenc.sample_walks(g, mp, cfg, RngStream(1))  # warm compile cache
        t_jit, _ = timeit(lambda: structenc.sample_walks(g, mp, cfg, RngStream(1)))
        jitted = kernels.run_walks
        kernels.run_walks = jitted.py_func
        try:
            t_py, _ = timeit(lambda: structenc.sample_walks(g, mp, cfg, RngStream(1)),
                             repeat=1)
        finally:
            kernels.run_walks = jitted
        print(f"  jit:         {t_jit:8.3f}s   {n_steps / t_jit:12.0f} steps/s")
        print(f"  interpreted: {t_py:8.3f}s   {n_steps / t_py:12.0f} steps/s")
        print(f"  speedup: {t_py / t_jit:.0f}x")
    else:
        t_py, _ = timeit(lambda: structenc.sample_walks(g, mp, cfg, RngStream(1)),
                         repeat=1)
        print(f"  interpreted only (numba disabled): {t_py:8.3f}s")


if __name__ == "__main__":
    print(f"kernel path: {'numba jit' if kernels.USING_NUMBA else 'interpreted'} "
          f"(MUG_DISABLE_NUMBA toggles)")
    bench_sgns()
    bench_walks()

"""Benchmark the two kernel lanes (fused Cython vs pure numpy).

Covers the fused row kernels at several shapes plus one end-to-end training
step, printing a table of per-call times and the compiled lane's speedup.

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from crossvid import kernels
from crossvid.databank import epoch_batches, gather_batch
from crossvid.losses import LossWeights, total_loss
from crossvid.model import init_params, make_view
from crossvid.synth import SynthConfig, generate_planted_bank
from crossvid.trainer import TrainConfig, head_forward, pool_batch
from crossvid import autodiff as ad


def time_call(fn, repeats):
    fn()                                   # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_cases(rng):
    shapes = [(32, 12), (256, 32), (1024, 64), (4096, 256)]
    cases = []
    for m, n in shapes:
        x = rng.standard_normal((m, n))
        g = rng.standard_normal((m, n))
        label = f"{m}x{n}"
        cases.append((f"softmax_rows {label}",
                      lambda b, x=x: b.softmax_rows(x, 3.0)))
        cases.append((f"l2_normalize {label}",
                      lambda b, x=x: b.l2_normalize_rows(x)))
        cases.append((f"sigmoid {label}", lambda b, x=x: b.sigmoid(x)))
        y = kernels.active.softmax_rows(x, 3.0)
        cases.append((f"softmax_grad {label}",
                      lambda b, y=y, g=g: b.softmax_rows_grad(y, g, 3.0)))
    p = rng.standard_normal((256, 64))
    grad = rng.standard_normal((256, 64))
    cases.append(("adam_update 256x64",
                  lambda b, p=p, grad=grad: b.adam_update(
                      p.copy(), grad, np.zeros_like(p), np.zeros_like(p),
                      3, 1e-3, 0.9, 0.999, 1e-8)))
    return cases


def train_step_case():
    scfg = SynthConfig(n=64, d=32, k=4, n_frames=3, n_tag_variants=2,
                       noise_sigma=0.1, seed=0)
    bank, _ = generate_planted_bank(scfg)
    cfg = TrainConfig(k=4, batch_size=32, epochs=1, seed=0)
    batch = epoch_batches(bank.n, bank.n_tag_variants, 32, 0, 0)[0]
    T, F, A_v, A_t = gather_batch(bank, batch)
    params = init_params(32, 4, seed=0)
    weights = LossWeights(1.0, 1.0)
    V_pairs, V_diag = pool_batch(cfg, T, F)

    def step():
        view = make_view(params, trainable=True)
        sim, E_v = head_forward(view, cfg, T, A_v, A_t, V_pairs, V_diag)
        _, node = total_loss(sim.S, E_v, sim.E_t, sim.E_av, sim.E_at,
                             weights, cfg.tau_s, cfg.tau_c)
        ad.backward(node)

    return step


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    available = kernels.available_backends()
    if "compiled" not in available:
        print("compiled lane not built; showing numpy lane only")
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)

    header = f"{'kernel':<26}" + "".join(f"{n:>14}" for n in available)
    if "compiled" in available:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        times = {}
        for lane_name, lane in available.items():
            times[lane_name] = time_call(lambda: fn(lane), args.repeats)
        row = f"{name:<26}" + "".join(
            f"{times[n] * 1e6:>12.2f}us" for n in available)
        if "compiled" in times:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)

    print()
    for lane_name in available:
        prev = kernels.use_backend(lane_name)
        try:
            step = train_step_case()
            t = time_call(step, max(10, args.repeats // 10))
            print(f"full train step (B=32, d=32, K=4) on {lane_name:>8}: "
                  f"{t * 1e3:.2f} ms")
        finally:
            kernels.active = prev


if __name__ == "__main__":
    main()

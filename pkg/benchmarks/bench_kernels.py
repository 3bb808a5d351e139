"""Compare the compiled kernels against the pure-Python fallback.

Times the hot kernels in isolation, then a full ADMM run with each
backend patched in, and checks that both backends give the same answer.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np

from modmap import AdmmConfig, ConsensusSolver, L1Prior, LearningMeasurement, TransitionModel, run
from modmap import _pykernels, consensus, measurement, priors
from modmap.experiments import LearningSimConfig, simulate_learning

try:
    from modmap import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


@contextmanager
def backend(module):
    saved = consensus.kernels, measurement.kernels, priors.kernels
    consensus.kernels = measurement.kernels = priors.kernels = module
    try:
        yield
    finally:
        consensus.kernels, measurement.kernels, priors.kernels = saved


def tridiag_case(K: int, N: int, rng):
    solver = ConsensusSolver(TransitionModel(np.diag(rng.uniform(0.2, 0.9, K))), N)
    rhs = rng.standard_normal((K, N))
    out = np.empty_like(rhs)
    return lambda mod: mod.tridiag_solve(solver._l, solver._m, rhs, out), out


def block_case(K: int, N: int, rng):
    D = 0.3 * rng.standard_normal((K, K))
    solver = ConsensusSolver(TransitionModel(D), N)
    rhs = rng.standard_normal((K, N))
    out = np.empty_like(rhs)
    return lambda mod: mod.block_solve(solver._L, solver._C, rhs, out), out


def shrink_case(name: str, K: int, N: int, rng):
    v = rng.standard_normal((K, N))
    out = np.empty_like(v)

    def call(mod):
        fn = getattr(mod, name)
        fn(v.reshape(-1) if name == "soft_threshold" else v, 1.0,
           out.reshape(-1) if name == "soft_threshold" else out)
    return call, out


def learning_case(N: int, rng):
    sim = simulate_learning(LearningSimConfig(N=N, seed=1))
    meas = LearningMeasurement(sim.observations)
    xt = rng.standard_normal(N)
    out = np.empty(N)

    def call(mod):
        with backend(mod):
            meas._run_kernel(0, N, xt, 30.0, out)
    return call, out


def admm_case(N: int):
    cfg = LearningSimConfig(N=N, sparse=True, seed=3)
    sim = simulate_learning(cfg)
    meas = LearningMeasurement(sim.observations)
    solver = ConsensusSolver(cfg.transition, N)
    acfg = AdmmConfig(rho=30.0, beta=15.0, max_iter=75)
    holder = {}

    def call(mod):
        with backend(mod):
            holder["x"], _ = run(meas, L1Prior(), solver, acfg, threads=1, track_objective=False)
    return call, holder


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    scale = 1 if args.quick else 4
    cases = [
        (f"tridiag_solve K=64 N={500 * scale}", *tridiag_case(64, 500 * scale, rng)),
        (f"block_solve K=4 N={250 * scale}", *block_case(4, 250 * scale, rng)),
        (f"soft_threshold K=250 N={250 * scale}", *shrink_case("soft_threshold", 250, 250 * scale, rng)),
        (f"group_shrink K=250 N={250 * scale}", *shrink_case("group_shrink", 250, 250 * scale, rng)),
        (f"learning_prox N={50 * scale}", *learning_case(50 * scale, rng)),
    ]
    print(f"{'kernel':34s} {'cython (s)':>12s} {'python (s)':>12s} {'speedup':>9s} {'max diff':>10s}")
    for name, call, out in cases:
        tc = best_of(lambda: call(_kernels), args.repeat)
        ref = out.copy()
        tp = best_of(lambda: call(_pykernels), max(1, args.repeat // 2))
        diff = float(np.max(np.abs(out - ref)))
        print(f"{name:34s} {tc:12.5f} {tp:12.5f} {tp / tc:8.1f}x {diff:10.2e}")

    call, holder = admm_case(25 * scale)
    tc = best_of(lambda: call(_kernels), args.repeat)
    ref = holder["x"].copy()
    tp = best_of(lambda: call(_pykernels), 1)
    diff = float(np.max(np.abs(holder["x"] - ref)))
    print(f"{'admm sparse learning, 75 iter':34s} {tc:12.5f} {tp:12.5f} {tp / tc:8.1f}x {diff:10.2e}")


if __name__ == "__main__":
    main()

"""Oracle kernels with and without numba.

Each mode runs in its own interpreter, since the JIT switch is read at
import time::

    python benchmarks/bench_kernels.py            # both modes, side by side
    python benchmarks/bench_kernels.py --n 20000  # fewer pairs
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from fpverify.dsl import parse_transform
from fpverify.formats import HALF, FP8
from fpverify.oracle import kernels as K
from fpverify.oracle._jit import JIT_ENABLED
from fpverify.oracle.interp import brute_force_verify
from fpverify.typer import TypeConfig, assignments

n, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
xs, ys = rng.integers(0, 1 << 16, size=(2, n), dtype=np.int64)
out = {"jit": JIT_ENABLED, "n": n}

def best(fn):
    fn()  # warm-up (compilation, caches)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

for op in K.OPS:
    out[f"half {op}"] = best(lambda: K.binop(K.OPS[op], xs, ys, HALF.ebits, HALF.sbits))
out["half fcmp olt"] = best(lambda: K.fcmp(K.CC_MASKS["olt"], xs, ys, HALF.ebits, HALF.sbits))
t = parse_transform("%a = fmul %x, %y\n%r = fadd %a, %x\n=>\n%r = fadd %x, %a")
ta = assignments(t, TypeConfig.test_mode())[0]
out["fp8 brute force"] = best(lambda: brute_force_verify(t, ta))
print(json.dumps(out))
"""


def run(jit: bool, n: int, repeat: int) -> dict:
    env = dict(os.environ)
    if jit:
        env.pop("FPVERIFY_DISABLE_JIT", None)
    else:
        env["FPVERIFY_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000, help="random half pairs per kernel")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--skip-python", action="store_true", help="only time the numba build")
    args = ap.parse_args(argv)

    start = time.perf_counter()
    fast = run(True, args.n, args.repeat)
    slow = None if args.skip_python else run(False, max(1, args.n // 100), 1)
    print(f"{'kernel':26s} {'numba':>12s} {'python':>12s} {'speed-up':>9s}")
    for key, value in fast.items():
        if key in ("jit", "n"):
            continue
        # the python run uses 1/100 of the pairs; scale per element
        scale = 1 if key == "fp8 brute force" else 100
        if slow is None:
            print(f"{key:26s} {value:11.4f}s")
            continue
        py = slow[key] * scale
        print(f"{key:26s} {value:11.4f}s {py:11.4f}s {py / value:8.0f}x")
    if slow is not None:
        print(f"(python timings for the binary kernels extrapolated from {slow['n']} pairs)")
    print(f"total wall time {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()

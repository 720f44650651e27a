"""Time the profile objective under both backends on a realistic sample.

The compiled kernel and the plain numpy path are selected through the
PELSURV_BACKEND environment variable, so each timing runs in a fresh
subprocess with the flag set.  A grid agreement check runs last: both
backends must produce the same objective values to near machine precision.

Run from the repository root:

    python3 benchmarks/objective_backends.py
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json
import os
import time

import numpy as np

from pelsurv.models import ProportionalOddsModel
from pelsurv.pel import objective_plan, table_from_view
from pelsurv.simulate import SimulationConfig, generate_population, draw_sample

cfg = SimulationConfig(gamma=0.7, replicates=1, B=0, seed=11)
pop = generate_population(cfg, 11)
sample = draw_sample(pop, cfg.sampling_fraction, cfg.gamma, 202)
view = sample.packed()
table = table_from_view(view)
model = ProportionalOddsModel(cfg.n_categories)
f = objective_plan(view, table, model)

grid = np.linspace(-1.2, 0.4, 41)
points = [np.array([b]) for b in grid]
values = [f(p) for p in points]  # warm up (jit compile)

n_evals = 20000
t0 = time.perf_counter()
for k in range(n_evals):
    f(points[k % 41])
t1 = time.perf_counter()

print(json.dumps({
    "backend": os.environ.get("PELSURV_BACKEND", "auto"),
    "n_units": len(sample.units),
    "us_per_eval": 1e6 * (t1 - t0) / n_evals,
    "grid": grid.tolist(),
    "values": values,
}))
"""


def run_backend(name):
    env = dict(os.environ, PELSURV_BACKEND=name)
    out = subprocess.run(
        [sys.executable, "-c", WORKER], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        sys.stderr.write(out.stderr)
        raise SystemExit(f"backend {name} worker failed")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    numba_r = run_backend("numba")
    numpy_r = run_backend("numpy")

    print(f"sample size: {numba_r['n_units']} units, 4 strata, 5 categories")
    print(f"numba kernel: {numba_r['us_per_eval']:8.1f} us per objective eval")
    print(f"numpy path:   {numpy_r['us_per_eval']:8.1f} us per objective eval")
    speedup = numpy_r["us_per_eval"] / numba_r["us_per_eval"]
    print(f"speedup:      {speedup:8.1f}x")

    a = numba_r["values"]
    b = numpy_r["values"]
    worst = max(abs(x - y) for x, y in zip(a, b))
    print(f"max |numba - numpy| over a 41-point beta grid: {worst:.3e}")
    if worst > 1e-10:
        raise SystemExit("backends disagree beyond tolerance")
    print("backends agree")


if __name__ == "__main__":
    main()

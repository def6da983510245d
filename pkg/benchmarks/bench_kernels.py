"""Time the element kernels of both backends on square meshes.

    python benchmarks/bench_kernels.py [--sizes 64,128,256] [--repeat 3] [--threads 1]
"""
import argparse
import time

import numpy as np

from osgs_goal import kernels
from osgs_goal.assembly import element_tau, quadrature_data
from osgs_goal.mesh import build_square_mesh
from osgs_goal.problem import builtin_example


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    kernels.set_threads(args.threads)
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    p = builtin_example("ex2")
    print(f"{'n':>5} {'elements':>9} {'kernel':>10} " + " ".join(f"{b:>10}" for b in backends) + "  speedup  max|diff|")
    for n in (int(v) for v in args.sizes.split(",")):
        mesh = build_square_mesh(n)
        q = quadrature_data(mesh, 2)
        ref = q.ref
        adv = np.ascontiguousarray(p.advection(q.x))
        src = np.ascontiguousarray(p.qoi.q(q.x))
        tau = np.ascontiguousarray(element_tau(mesh, p, quad=q))
        rng = np.random.default_rng(0)
        nodal = [rng.standard_normal(mesh.elements.shape) for _ in range(4)]
        jobs = {
            "matrices": lambda b: kernels.element_matrices(
                q.coords, ref.N, ref.dN, ref.weights, adv, src, tau, p.k, p.s, 1.0, backend=b),
            "estimators": lambda b: kernels.element_estimators(
                q.coords, ref.N, ref.dN, ref.weights, adv, src, src, tau, p.s, *nodal, backend=b),
        }
        for name, job in jobs.items():
            res = {b: best_of(lambda: job(b), args.repeat) for b in backends}
            cols = " ".join(f"{res[b][0] * 1e3:9.2f}ms" for b in backends)
            if len(backends) == 2:
                speed = res["python"][0] / res["compiled"][0]
                diff = max(float(np.max(np.abs(x - y))) for x, y in zip(res["python"][1], res["compiled"][1]))
                extra = f"  {speed:6.1f}x  {diff:.1e}"
            else:
                extra = "  (compiled backend not built)"
            print(f"{n:5d} {mesh.n_elements:9d} {name:>10} {cols}{extra}")


if __name__ == "__main__":
    main()

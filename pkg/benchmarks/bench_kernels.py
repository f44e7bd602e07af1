"""Time the numba kernels against their numpy fallbacks.

Usage: ``python3 benchmarks/bench_kernels.py [--n 24] [--repeat 5]``.
The first numba call includes compilation and is excluded from timings.
"""
import argparse
import time

import numpy as np

from driftfem import _kernels as K
from driftfem._accel import HAS_NUMBA
from driftfem.fields import mollifier_stencil
from driftfem.mesh import DomainSpec, build_mesh


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=24, help="cells per axis of the 3D test mesh")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mesh = build_mesh(DomainSpec.symmetric(3, 1.0), args.n)
    lat = mesh.lattice
    vol, grads = K.element_geometry_numpy(mesh.vertices, mesh.simplices)
    A = np.broadcast_to(np.eye(3), (mesh.num_elements, 3, 3)).copy()
    H = np.random.default_rng(0).standard_normal((mesh.num_elements, 3))
    pts = np.random.default_rng(1).uniform(-1.0, 1.0, size=(200_000, 3))
    grid = dict(lo=lat.lo, step=lat.step, idx_lo=lat.idx_lo.astype(float),
                ncell=lat.ncell.astype(np.int64), elem_lookup=mesh.elem_lookup)
    offsets, weights = mollifier_stencil(3, 4)
    targets = mesh.barycenters[: 20_000]

    cases = {
        "element_geometry": lambda v: getattr(K, f"element_geometry_{v}")(
            mesh.vertices, mesh.simplices),
        "local_stiffness": lambda v: getattr(K, f"local_stiffness_{v}")(vol, grads, A),
        "local_drift": lambda v: getattr(K, f"local_drift_{v}")(vol, grads, H),
        "locate": lambda v: getattr(K, f"locate_{v}")(pts, grid["lo"], grid["step"],
                                                       grid["idx_lo"], grid["ncell"],
                                                       grid["elem_lookup"]),
        "gridded_convolution": lambda v: getattr(K, f"gridded_convolution_{v}")(
            targets, offsets, weights, grid["lo"], grid["step"], grid["idx_lo"],
            grid["ncell"], grid["elem_lookup"], H),
    }
    print(f"mesh: {mesh.num_vertices} vertices, {mesh.num_elements} elements; "
          f"numba available: {HAS_NUMBA}")
    print(f"{'kernel':<22}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_np = best_of(lambda: call("numpy"), args.repeat)
        if HAS_NUMBA:
            t_nb = best_of(lambda: call("numba"), args.repeat)
            print(f"{name:<22}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<22}{t_np:>12.4f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Smoke test for the asd_py extension module.

Builds the cdylib with cargo, stages it as an importable module, and
exercises the main bindings end to end.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_stage() -> Path:
    subprocess.run(["cargo", "build", "-p", "asd-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "debug" / "libasd_py.so"
    if not lib.exists():  # macOS fallback
        lib = ROOT / "target" / "debug" / "libasd_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="asd_py_"))
    shutil.copy(lib, stage / "asd_py.so")
    return stage


def main() -> None:
    sys.path.insert(0, str(build_and_stage()))
    import asd_py

    # graphs and kernels
    g = asd_py.regular_graph(3, 200, seed=1)
    assert g.n() == 200
    assert g.edge_count() == 600
    assert g.out_degree(0) == 3
    assert g.label_of(0) == "c0"

    kernel = asd_py.brca(coordinating=True)
    assert kernel.states() == ["-1", "1"]

    # statistics round-trip
    stats = asd_py.graph_statistics(g, kernel, [[0.2, 0.8]])
    assert abs(stats.mean_degree() - 3.0) < 1e-12
    again = asd_py.statistics_from_json(stats.to_json())
    assert again.num_labels() == 1

    # simulation: an 0.8-biased majority start should head toward consensus
    times, mean, lo, hi = asd_py.simulate(
        g, kernel, [[0.2, 0.8]], horizon=5.0, dt=1.0, runs=10, seed=7
    )
    assert len(times) == len(mean) == 6
    final_up = mean[-1][0][1]
    assert final_up > 0.9, final_up
    for ti in range(len(times)):
        assert lo[ti][0][1] <= mean[ti][0][1] <= hi[ti][0][1] + 1e-12
        assert abs(sum(mean[ti][0]) - 1.0) < 1e-9

    # mean-field ODE agrees with the simulation endpoint
    otimes, y = asd_py.ode(stats, kernel, [[0.2, 0.8]], horizon=5.0, h=0.01)
    assert math.isclose(otimes[-1], 5.0, rel_tol=1e-9)
    assert abs(y[-1][0][1] - final_up) < 0.1

    # stationary structure of the coordination dynamics
    points = asd_py.stationary_points(stats, kernel)
    stabilities = sorted(p["stability"] for p in points)
    assert stabilities == ["stable", "stable", "unstable"], stabilities

    # bounds and coupling
    bound = asd_py.approximation_bound(stats, n=10_000, t=1.0, trials=500, seed=3)
    assert 0.0 < bound, bound
    b1, b2, equal = asd_py.couple_once(g, t=0.5, seed=4)
    assert not (b1 and b2) or equal

    # misuse is rejected, not crashed
    try:
        asd_py.tltm(0, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("tltm(0, 1) should be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()

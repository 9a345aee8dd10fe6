"""Potential vorticity along particle paths in a fixed box.

The fluid moves slowly compared with the pulse, so xi = (1 + omega)/h keeps its
initial O(delta) structure near x1 = 1 while the shock forms much further right.
"""
import tempfile

import numpy as np

from rswshock import io as rio
from rswshock import pipeline
from rswshock.rswsolver import Derived

out = tempfile.mkdtemp(prefix="pv_")
cfg = rio.resolve_config({"pulse": {"delta": 0.05},
                          "grid": {"n1": 2048, "n2": 8, "x1_min": 0.9, "x1_max": 1.75},
                          "solver": {"window": "fixed", "snapshot_every": 1000},
                          "rays": {"enabled": False}})
res, man = pipeline.execute(cfg, out, log=None)
S = rio.read_series(f"{out}/series.csv")
print(f"{res.status} at t = {res.final_state.t:.4f}; max particle drift {np.nanmax(S['xi_drift']):.2e}")

for p in rio.list_snapshots(out):
    d = Derived(rio.load_snapshot(p))
    xi = d.xi[8:-8]
    x1 = d.state.grid.x1[8:-8]
    peak = x1[np.argmax(np.abs(xi - 1).max(axis=1))]
    dz = np.abs(d.d1zeta[8:-8]).max(axis=1)
    print(f"t = {d.state.t:6.4f}: max|xi - 1| = {np.abs(xi - 1).max():.4f} at x1 = {peak:.3f}; "
          f"max|d1 zeta| = {dz.max():6.2f} at x1 = {x1[np.argmax(dz)]:.3f}")

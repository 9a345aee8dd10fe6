"""Run a coarse normalised pulse to blow-up and compare mu_min with 1 - 1.5 t.

    python demos/pulse_blowup.py [out_dir]

About half a minute on one core. At 512 x 16 the run ends on the saturation
detector a little past T*; the acceptance suite repeats it at 2048 x 64.
"""
import sys
import tempfile

import numpy as np

from rswshock import io as rio
from rswshock import pipeline

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="pulse_")
cfg = rio.resolve_config({"pulse": {"delta": 0.05}, "grid": {"n1": 512, "n2": 16}})
res, man = pipeline.execute(cfg, out, log=None)
print(f"{res.status} ({res.reason}) at t = {res.final_state.t:.4f}; T_pred = {man['generation']['T_pred']:.4f}")

S = rio.read_series(f"{out}/series.csv")
print("   t      mu_min   1 - 1.5t   max|d1 v1|")
for t in np.linspace(0, 0.9 * res.final_state.t, 7):
    k = np.searchsorted(S["t"], t)
    print(f"{S['t'][k]:6.3f}  {S['mu_min'][k]:8.4f}  {1 - 1.5 * S['t'][k]:8.4f}  {S['max_grad_v1'][k]:10.3f}")

rep = pipeline.analyze(out, holder=False)
fit = rep["fit"]
print(f"T*_grad = {fit['T_grad']:.4f}   T*_mu = {fit['T_mu']:.4f}")
for name, r in rep["rates"].items():
    print(f"rate exponent of {name}: {r['exponent']:.3f}")

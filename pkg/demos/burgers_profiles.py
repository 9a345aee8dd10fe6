"""Self-similar Burgers profiles y = -U - U^(2n+1) and their cusp exponents.

Near y = 0 each profile is smooth with U'(0) = -1; far out |U| ~ |y|^(1/(2n+1)),
which is where the C^(1/(2n+1)) regularity at the shock comes from.
"""
import numpy as np

from rswshock.burgers import BurgersProfile, burgers1d_oracle, solve_profile

y = np.logspace(2, 6, 50)
for n in (1, 2, 3, 4):
    tab = BurgersProfile(n).table(np.linspace(-10, 10, 1001))
    U = solve_profile(y, n)
    slope = np.polyfit(np.log(y), np.log(np.abs(U)), 1)[0]
    print(f"n={n}: U'(0) = {tab[500, 2]:+.6f}  max residual {np.abs(tab[:, 3]).max():.1e}  "
          f"far-field exponent {slope:.4f} (1/{2 * n + 1} = {1 / (2 * n + 1):.4f})")

# the exact 1D solution from u0 = -x steepens like 1/(1 - t)
x = np.linspace(-1, 1, 201)
for t in (0.0, 0.5, 0.9, 0.99):
    u, T = burgers1d_oracle(lambda z: -z, t, x)
    print(f"t={t:4.2f}: max|u_x| = {np.abs(np.gradient(u, x)).max():8.3f}, 1/(T - t) = {1 / (T - t):8.3f}")

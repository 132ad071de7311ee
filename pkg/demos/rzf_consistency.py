"""Replica prediction of RZF distortion against Monte Carlo.

Run with ``python3 demos/rzf_consistency.py``; prints one row per load.
"""

from lse_lab.experiments import McConfig, monte_carlo_distortion
from lse_lab.replica_core import RsConfig, solve_rs_rzf
from lse_lab.spectra import MarchenkoPasturIid

lam = 0.1
print(f"{'alpha':>6} {'q':>8} {'chi':>8} {'D_rs':>9} {'D_mc':>9} {'stderr':>8}")
for alpha in (1.0, 1.5, 2.0, 3.0, 4.0):
    sol = solve_rs_rzf(RsConfig(MarchenkoPasturIid(alpha), lam=lam))
    mc = monte_carlo_distortion(McConfig(K=100, alpha=alpha, trials=20, lam=lam))
    print(f"{alpha:6.2f} {sol.q:8.4f} {sol.chi:8.4f} {sol.distortion:9.5f} "
          f"{mc.mean:9.5f} {mc.stderr:8.5f}")


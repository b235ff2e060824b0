"""Power curves in the Gaussian limit experiment.

Runs AR, LM, LM* and both CLC variants over the 31-point beta grid for each
(rho, C) panel and writes one CSV per panel to ``out/limit``.  The default
of 500 replications takes a few minutes per panel on one core; pass a
different count as the first argument.
"""

import sys
from pathlib import Path

from jkclc.simulation import LimitSimConfig, lm_star_blind_spots, limit_base_gamma, run_limit_power_study

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
out = Path(__file__).resolve().parent / "out" / "limit"
out.mkdir(parents=True, exist_ok=True)

for rho in (0.2, 0.4, 0.7, 0.9):
    print(f"rho={rho}: LM* blind spot at delta = {lm_star_blind_spots(limit_base_gamma(rho))}")
    for conc in (3.0, 6.0):
        frame = run_limit_power_study(LimitSimConfig(rho=rho, conc=conc, reps=reps, seed=1))
        frame.to_csv(out / f"power_limit_rho{rho:g}_C{conc:g}.csv", index=False)
        wide = frame.pivot(index="beta", columns="test", values="rejection_rate")
        regret = (wide.max(axis=1).to_numpy()[:, None] - wide).max()
        print(f"  C={conc:g}: max regret per test")
        print(regret.round(3).to_string())

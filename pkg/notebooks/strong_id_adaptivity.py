"""Why the minimax weights stay away from the LM* corner at finite strength.

For a bundle with D^2 / sigma_D^2 = 400 this prints the regret surface near
the LM* corner, the slackness threshold and the chosen weights.  Near the
corner the surface is flat to within about 0.01, and its minimum lies a few
t1 rows away from a1 = 0: AR still adds a little local power.  The decisions
nevertheless match LM* in almost every run.
"""

import math

import numpy as np

from jkclc import MCConfig, SelectionConfig, minimax_weights
from jkclc.simulation import limit_base_gamma
from jkclc.stats import synthetic_bundle
from jkclc.variance import sigma_d

rho = 0.7
g = limit_base_gamma(rho)
sd = sigma_d(g)
c1, c2 = g.projection_coef()
conc = 20.0 * sd
B = (-6 / conc, 6 / conc)

for ratio in (20.0, 100.0):
    b = synthetic_bundle(0.3, 0.2, ratio * sd + 0.3 * c1 + 0.2 * c2, g)
    w, d = minimax_weights(b, g, 0.0, B, "krs", SelectionConfig(mc=MCConfig(2000, 0)))
    q = d.q_hat.reshape(16, 16)
    print(f"D/sigma = {ratio:g}: Q_min = {d.q_min:.4f}, slack = {d.slack:.4f}, |Xi| = {d.xi_size}")
    print(f"  chosen a = ({w.a1:.3f}, {w.a2:.3f}); lower bound {d.lower_bound:.4f}")
    print("  regret, first 4 x 4 corner (rows t1, columns t2):")
    print(np.array2string(q[:4, :4], precision=4, prefix="  "))
    print(f"  regret spread over the whole grid: {q.max() - q.min():.4f}")
    print(f"  a1 <= 2 * lower: {w.a1 <= 2 * d.lower_bound}, a2 * rho <= 0.05: {w.a2 * rho <= 0.05}")
    print()

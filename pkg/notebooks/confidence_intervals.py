"""Tests and confidence intervals on the packaged synthetic dataset.

The data have 199 group-dummy instruments, an intercept control and a true
coefficient of 0.1.  A coarse grid keeps the CLC inversion quick.
"""

from importlib import resources

from jkclc import build_projection, confidence_interval, partial_out, read_csv
from jkclc.inference import bundle_at, make_decider
from jkclc.variance import GammaPath

path = resources.files("jkclc") / "data" / "synthetic_iv.csv"
data = partial_out(read_csv(path))
ctx = build_projection(data.Z)
bundle = bundle_at(GammaPath(ctx, data, "crossfit"), 0.1)
print(f"n={data.n} K={ctx.K}  F={bundle.f_tilde:.2f}  AR={bundle.ar:.3f}  LM={bundle.lm:.3f}")

B = (-0.5, 0.5)
for kind in ("ar", "lm", "lm_star", "clc_pp", "clc_krs", "two_step", "jive_wald"):
    ci = confidence_interval(ctx, data, make_decider(kind, ctx, data, B), B, grid_n=201)
    span = "empty" if ci.empty else f"[{ci.lower:+.3f}, {ci.upper:+.3f}]"
    flag = "  (disconnected)" if ci.disconnected else ""
    print(f"{kind:>9}: {span}{flag}")

"""Regenerate the packaged example dataset ``src/jkclc/data/synthetic_iv.csv``.

Group-dummy instruments (one baseline group dropped), an intercept control
``w1``, true coefficient 0.1 and a strong first stage.
"""

from pathlib import Path

import numpy as np
import pandas as pd

from jkclc.simulation import GaussianDesign

design = GaussianDesign(n=1000, K=200, strength=10.0, corr=0.5, beta=0.1, seed=2024)
data = design.draw(np.random.default_rng(7))
columns = {"y": data.y + 1.0, "x": data.x + 2.0}
columns.update({f"z{k}": design.Z[:, k] for k in range(1, design.K)})
columns["w1"] = np.ones(design.n)
frame = pd.DataFrame(columns)
out = Path(__file__).resolve().parents[1] / "src" / "jkclc" / "data" / "synthetic_iv.csv"
frame.to_csv(out, index=False, float_format="%.12g")
print(f"wrote {out} ({len(frame)} rows)")

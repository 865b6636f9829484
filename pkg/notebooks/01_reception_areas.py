# %% [markdown]
# Reception areas on the three grids and on a Poisson field.
# Traces the central cell, compares with a polar root-finding estimate and
# writes the contours next to this file (out/*.csv + .json).

# %%
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from localcap import ChannelParams, ProcessSpec, Region, sir_at, trace_contour
from localcap.reception import write_contour

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)
ch = ChannelParams(beta=10.0, alpha=4.0)
region = Region.square(1000.0)

# %%
def polar_area(tset, i, rays=360):
    z = tset.points[i]
    nn = np.sort(np.hypot(*(tset.points - z).T))[1]
    r = [brentq(lambda t: sir_at(z + t * np.array([np.cos(p), np.sin(p)]), i, tset, ch.alpha) - ch.beta,
                1e-6 * nn, 0.5 * nn) for p in np.linspace(0, 2 * np.pi, rays, endpoint=False)]
    return np.pi * np.mean(np.square(r))

# %%
for lattice in ("triangular", "square", "hexagonal"):
    spec = ProcessSpec.grid(lattice, 25.0, region, randomize_offset=False)
    ts = spec.generate(0)
    i = ts.nearest_to((0, 0))
    c = trace_contour(ts, i, ch)
    write_contour(c, OUT / f"{lattice}.csv")
    print(f"{lattice:10s} area {c.area:8.3f}  polar {polar_area(ts, i):8.3f}  "
          f"steps {c.steps}  lambda*sigma {c.area * spec.kind.density:.4f}")

# %% a Poisson field: cells are irregular, some tiny
ts = ProcessSpec.poisson(1 / 625, region, seed=3).generate(0)
i = ts.nearest_to((0, 0))
c = trace_contour(ts, i, ch)
write_contour(c, OUT / "poisson.csv")
print(f"poisson    area {c.area:8.3f}  shoelace {c.shoelace_area:8.3f}")

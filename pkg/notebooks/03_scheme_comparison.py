# %% [markdown]
# Small-sample comparison of all schemes at beta = 10, alpha = 4, plus an
# alpha sweep. Takes a few minutes; raise N for tighter error bars.

# %%
import time

from localcap import ChannelParams, ProcessSpec, Region, capacity_aloha, estimate_capacity
from localcap.cli import csma_theta

N = 60
region = Region.square(2000.0)


def schemes(alpha):
    return {
        "grid:tri": (ProcessSpec.grid("triangular", 25.0, region), 2),
        "grid:square": (ProcessSpec.grid("square", 25.0, region), 2),
        "grid:hex": (ProcessSpec.grid("hexagonal", 25.0, region), 2),
        "coloring": (ProcessSpec.coloring(25.0, region, seed=1), N),
        "csma": (ProcessSpec.csma(csma_theta(alpha), region, seed=1), N),
        "aloha-mc": (ProcessSpec.poisson(1 / 625, region, seed=1), N),
    }

# %%
ch = ChannelParams(10.0, 4.0)
res = {}
for name, (spec, n) in schemes(4.0).items():
    t = time.time()
    res[name] = estimate_capacity(spec, ch, n)
    e = res[name]
    print(f"{name:12s} c={e.capacity:.4f} +- {e.stderr_capacity:.4f}  ({time.time() - t:.0f} s)")
print(f"{'aloha':12s} c={capacity_aloha(10, 4):.4f} (closed form)")

# %% ratios to the triangular grid
tri = res["grid:tri"].capacity
for name, e in res.items():
    print(f"{name:12s} {e.capacity / tri:.3f}")
print(f"{'aloha':12s} {capacity_aloha(10, 4) / tri:.3f}")

# %% alpha sweep, grids only (cheap)
for alpha in (3.0, 4.0, 6.0, 10.0, 20.0):
    ch = ChannelParams(10.0, alpha)
    row = [estimate_capacity(ProcessSpec.grid(lat, 25.0, region), ch, 1).capacity
           for lat in ("triangular", "square", "hexagonal")]
    print(alpha, " ".join(f"{c:.4f}" for c in row), f"aloha {capacity_aloha(10, alpha):.4f}")

# %% [markdown]
# Distribution of the total received power W in a Poisson field.
# Series CDF against sampled W, and the coverage integral against the
# closed-form lambda*sigma.

# %%
import numpy as np

from localcap import AlohaParams, sample_w, sigma_aloha, w_cdf
from localcap.aloha import sigma_by_quadrature, w_cdf_any
from localcap.exceptions import SeriesDiverging

# %% alpha = 4 has a closed form: W is Levy distributed
p = AlohaParams(1.0, 4.0)
w = np.sort(sample_w(1.0, 4.0, 100_000, seed=0))
xs = np.quantile(w, np.linspace(0.01, 0.99, 9))
for x in xs:
    emp = np.searchsorted(w, x) / w.size
    print(f"x={x:10.4g}  series {w_cdf(x, p):.4f}  empirical {emp:.4f}")

# %% alpha = 3: the series blows up at small x, inversion takes over
p3 = AlohaParams(1.0, 3.0)
for x in (0.05, 0.2, 1.0, 5.0):
    try:
        s = f"{w_cdf(x, p3):.6f}"
    except SeriesDiverging:
        s = "diverges"
    print(f"x={x:5.2f}  series {s:>9s}  any {w_cdf_any(x, p3):.6f}")

# %% lambda*sigma two ways
for beta, alpha in [(10, 4), (2, 4), (10, 3), (10, 6)]:
    print(beta, alpha, round(sigma_aloha(beta, alpha), 6), round(sigma_by_quadrature(beta, alpha), 6))

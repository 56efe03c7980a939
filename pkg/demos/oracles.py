# %% [markdown]
# # Checking the solver against independent oracles
#
# The oracle module recomputes everything from the raw channel matrices:
# an exhaustive grid search on tiny problems and a symbol-level Monte-Carlo
# simulation of the receive chain.

# %%
import numpy as np

from risoam.channel import coupling_scalars
from risoam.config import SolverOptions, default_config
from risoam.experiments import tiny_instance
from risoam.optimizer import alternating_optimize
from risoam.oracle import GridSpec, MonteCarloSpec, grid_search, monte_carlo_sinr
from risoam.rate import sinr
from risoam.scenario import build_scenario, noise_for_snr

rng = np.random.default_rng(1)

# %% [markdown]
# ## Grid search
# Two modes, one user, two RIS elements: 64 phases per element and 32 power
# levels per mode is about four million points, small enough to enumerate.

# %%
for _ in range(3):
    tiny = tiny_instance(rng)
    _, trace = alternating_optimize(tiny, SolverOptions())
    grid = grid_search(tiny, GridSpec(np.linspace(0, tiny.pt, 32), 64))
    print(f"FP {trace.sum_rate[-1]:.6f}   grid {grid.sum_rate:.6f}   "
          f"({grid.n_points} points)")

# %% [markdown]
# ## Monte-Carlo SINR
# Random powers and phases on the reference geometry, noise set for a
# 10 dB mean SNR.  The z-scores compare the simulated SINR with the
# closed form in units of the simulation's standard error.

# %%
base = build_scenario(default_config())
scenario = base.with_config(noise_power=noise_for_snr(base, 10.0))
theta = np.exp(2j * np.pi * rng.random(scenario.n_ris))
p = rng.dirichlet(np.ones(scenario.n_tx)) * scenario.pt
analytic = sinr(p, coupling_scalars(scenario.coupling, theta), scenario.noise, scenario.coupling.modes)
mc = monte_carlo_sinr(scenario, p, theta, MonteCarloSpec(100_000, seed=2, n_batches=200))
for mode, (a, m, se) in enumerate(zip(analytic, mc.sinr, mc.stderr)):
    print(f"mode {mode:2d}  analytic {a:10.4e}  simulated {m:10.4e}  z = {(m - a) / se:+.2f}")

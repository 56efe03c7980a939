# %% [markdown]
# # Rate versus RIS size and power budget
#
# Two sweeps over the reference scenario.  Larger surfaces collect more
# energy, and a larger budget can always reproduce the smaller budget's
# allocation, so both curves should rise.

# %%
from risoam.config import default_config
from risoam.experiments import run_sweep

base = default_config()

print("RIS size sweep (Pt = 20 dB)")
for row in run_sweep(base, "M", [20, 40, 60, 80, 120]):
    print(f"  M = {row['value']:4d}   C = {row['sum_rate_bps_hz']:.4e}")

# %%
levels = [0, 5, 10, 15, 20]
print("power sweep, C in bit/s/Hz")
print("   M " + "".join(f"{p:>11} dB" for p in levels))
for m in (40, 80, 120):
    rows = run_sweep(base.with_ris_size(m), "Pt", levels, jobs=2)
    print(f"{m:4d} " + "".join(f"{r['sum_rate_bps_hz']:14.4e}" for r in rows))

# %% [markdown]
# In the noise-limited reference regime the rate grows by a factor of about
# ten per 10 dB, i.e. linearly in the budget, and roughly with the square of
# the RIS size once the aperture gain is coherent.

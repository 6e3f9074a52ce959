# %% [markdown]
# # Effect of the number of subcarriers
#
# More subcarriers decorrelate the target coefficients, which shows up as a
# more diagonal coefficient covariance.

# %%
from musicfusion import default_scenario
from musicfusion.experiment import sweep_subcarriers

cfg = default_scenario()
q_list = [64, 128, 256, 512]
reports = sweep_subcarriers(cfg, q_list, n_trials=100, methods=["proposed", "method_A"])

for q, rep in zip(q_list, reports):
    zeta = ", ".join(f"{z:.3f}" for z in rep.mean_diagonality.values())
    print(f"Q={q:4d} proposed={rep.rmse['proposed']:.3f} A={rep.rmse['method_A']:.3f} diagonality=[{zeta}]")

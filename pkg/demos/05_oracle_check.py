# %% [markdown]
# # Comparing against exhaustive maximum likelihood
#
# With noiseless data and one target the MUSIC map peak should land on the
# same cell as the exhaustive search.

# %%
from dataclasses import replace

from musicfusion import default_scenario
from musicfusion.experiment import draw_scene, fuse_scenario
from musicfusion.fusion import exact_ml_oracle

cfg = replace(default_scenario(n_targets=1), noiseless=True)
for trial in range(5):
    targets, _, covs = draw_scene(cfg, trial)
    music = fuse_scenario(cfg, covs, methods=["proposed"]).positions["proposed"]
    oracle = exact_ml_oracle(covs, cfg.pairs, cfg.grid, 1)
    print(trial, targets.round(2).tolist(), music.tolist(), oracle.tolist())

"""Pre-training on auxiliary outputs finds the latent feature rowspace.

Run: python3 demos/03_pretraining.py
"""
import numpy as np

from innout.estimators import fit_baseline, pretrain_aux_outputs, transfer_aux_outputs
from innout.numerics import principal_angles
from innout.problem import Dims, make_problem_setting, random_covariate_shift, sample_dataset
from innout.risk import analytic_risk

rng = np.random.default_rng(1)
setting = make_problem_setting(Dims(8, 2, 2, 3), rng, 2.0, sigma_sq=0.1, sigma_u_sq=1.0)
setting = random_covariate_shift(setting, rng)

# %% The learned map is only identified up to an invertible k x k factor, so
# compare rowspaces through the largest principal angle.
for n in (1_000, 10_000, 100_000):
    pool = [sample_dataset(setting, n // 2, o, with_labels=False, seed=rng) for o in ("id", "ood")]
    b_hat = pretrain_aux_outputs(pool, setting.dims.k)
    print(f"pool {n:>7d}: max angle {principal_angles(b_hat, setting.B_star)[-1]:.4f} rad")

# %% Keep the map from the largest pool.  A head on the k features needs fewer labels than regression on all d inputs.
labeled = sample_dataset(setting, 20, seed=rng)
for model in (fit_baseline(labeled), transfer_aux_outputs(b_hat, labeled)):
    print(f"{model.kind:12s} OOD excess {analytic_risk(model, setting, 'ood').excess:.4f}")

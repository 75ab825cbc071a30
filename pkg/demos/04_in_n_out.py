"""Self-training on aux-inputs pseudolabels: In-N-Out versus aux-outputs.

Run: python3 demos/04_in_n_out.py
"""
import numpy as np

from innout.estimators import (
    aux_map_in_features,
    fit_in_n_out,
    fit_input_on_features,
    in_n_out_population_model,
    transfer_aux_outputs,
)
from innout.problem import Dims, make_problem_setting, random_covariate_shift, sample_dataset
from innout.risk import analytic_risk, excess_risk_ratio

rng = np.random.default_rng(2)
base = make_problem_setting(Dims(6, 2, 2, 3), rng, 2.0, sigma_u_sq=1.0)
base = random_covariate_shift(base, rng)
b_hat = base.B_star

# %% Pseudolabels carry the latent signal that z reveals, so the fine-tuned head
# sees a cleaner target.  The advantage grows as the label noise shrinks.
for sigma_sq in (1e-1, 1e-2, 1e-3, 1e-4):
    setting = base.replace(sigma_sq=sigma_sq)
    labeled = sample_dataset(setting, 30, seed=rng)
    pool = sample_dataset(setting, 20_000, with_labels=False, seed=rng)
    out = analytic_risk(transfer_aux_outputs(b_hat, labeled), setting, "ood")
    gamma = fit_input_on_features(b_hat, labeled)
    population = in_n_out_population_model(b_hat, gamma, aux_map_in_features(setting, b_hat))
    pooled = fit_in_n_out(b_hat, labeled, pool, 1.0)
    ratio = excess_risk_ratio(analytic_risk(population, setting, "ood"), out)
    ratio_pool = excess_risk_ratio(analytic_risk(pooled, setting, "ood"), out)
    print(f"sigma^2={sigma_sq:.0e}  ratio (infinite pool) {ratio:.2e}  ratio (20k pool) {ratio_pool:.2e}")

"""Fit the four predictors on one random setting and compare their risks.

Run: python3 demos/01_four_models.py
"""
from innout.pipeline import DemoConfig, run_pipeline

# %% A 10-dimensional input, 3 latent features, 2 latent noise directions, 4 auxiliary outputs.
config = DemoConfig(d=10, k=3, m=2, T=4, n_labeled=50, sigma_sq=0.01, sigma_u_sq=1.0)
rows = run_pipeline(config, seed=0)

# %% Aux-inputs reads u off z, so it has the lowest ID risk.
# Among the models that predict from x alone, In-N-Out has the lowest OOD excess.
print(f"{'model':12s} {'risk id':>10s} {'risk ood':>10s} {'excess ood':>11s}")
for row in rows:
    print(f"{row['model']:12s} {row['risk_id']:10.4f} {row['risk_ood']:10.4f} {row['excess_ood']:11.4f}")

"""Two qualitative training diagnostics over several seeds.

1. JEPA with tau = 0 (teacher copies the student every step): does the
   collapse flag fire?
2. Latent-prediction VAE: does the mean latent norm shrink over training,
   and does it stay flat when the prediction weight is zero?

    python scripts/collapse_diagnostics.py --seeds 0 1 2 3 4
"""

import argparse

import numpy as np

from tvbench.config import parse_config
from tvbench.env import generate_dataset
from tvbench.models import fit_learner, make_learner
from tvbench.runner import dataset_seed


def fit_with_initial_norm(ds, cfg, seed):
    """Fit a latent-prediction VAE; also return the mean |z| before training."""
    learner = make_learner("latentpredvae", cfg, seed)
    learner.build(ds.X.shape[1])
    z_init = float(np.mean(np.linalg.norm(learner._encode(ds.X_train), axis=1)))
    learner.train(ds)
    learner.fitted = True
    return learner, z_init


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=None)
    args = ap.parse_args()

    base = parse_config("default").train
    if args.steps:
        base = base.with_overrides(steps=args.steps)
    for seed in args.seeds:
        ds = generate_dataset(parse_config("default").env_params(args.sigma, dataset_seed(seed)))
        jepa = fit_learner("jepa", ds, base.with_overrides(tau=0.0), seed)
        lp, init = fit_with_initial_norm(ds, base, seed)
        flat, init0 = fit_with_initial_norm(ds, base.with_overrides(lambda_pred=0.0), seed)
        z, z0 = lp.diag.z_norm, flat.diag.z_norm
        print(f"seed {seed}: jepa tau=0 collapsed={jepa.diag.collapsed} "
              f"min latent var={min(jepa.diag.latent_var):.2e} | "
              f"latentpredvae |z| init {init:.3f}, first log {z[0]:.3f}, min {min(z):.3f}, final {z[-1]:.3f} "
              f"(lambda=0: {init0:.3f}, {z0[0]:.3f}, {min(z0):.3f}, {z0[-1]:.3f})")


if __name__ == "__main__":
    main()

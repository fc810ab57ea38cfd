"""Scatter two latent features at a low and a high distractor scale.

At sigma = 0 the first PCA components trace the rotating signal as a ring;
at sigma = 6 the same components are dominated by the distractor.

    python scripts/latent_scatter.py --model pca_1_4 --out runs/scatter
"""

import argparse
from pathlib import Path

from tvbench.config import parse_config
from tvbench.env import generate_dataset
from tvbench.evaluation import latent_diagnostics, probe_eval
from tvbench.models import fit_learner
from tvbench.plotting import emit_scatter
from tvbench.runner import dataset_seed, train_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="pca_1_4", help="model name from the config")
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 6.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pair", type=int, nargs=2, default=[0, 1])
    ap.add_argument("--config", default="default")
    ap.add_argument("--out", default="runs/scatter")
    args = ap.parse_args()

    cfg = parse_config(args.config)
    j, spec = next((j, m) for j, m in enumerate(cfg.models) if m.name == args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, sigma in enumerate(args.sigmas):
        ds = generate_dataset(cfg.env_params(sigma, dataset_seed(args.seed)))
        learner = fit_learner(spec.kind, ds, cfg.model_config(spec), train_seed(args.seed, i, j))
        diag = latent_diagnostics(learner, ds)
        path = emit_scatter(diag, tuple(args.pair), out / f"scatter_{args.model}_{sigma:g}.svg",
                            title=f"{args.model}, sigma = {sigma:g}")
        r2 = probe_eval(learner, ds, intercept=cfg.intercept).r2_eval
        print(f"sigma={sigma:g}  r2_eval={r2:.3f}  var={diag['variance'].round(4).tolist()}  -> {path}")


if __name__ == "__main__":
    main()

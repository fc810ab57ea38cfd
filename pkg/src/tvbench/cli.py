"""Command-line entry point: ``tvbench {generate,train,sweep,scatter,plot}``.

Exit status is 0 on success, 2 for usage errors (unknown subcommand or
flag, malformed values; argparse prints the usage text) and 1 for any other
failure, such as a bad config file, with a one-line message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ALIASES, ConfigError, parse_config
from .env import EnvParams, generate_dataset, save_csv, save_dataset
from .evaluation import latent_diagnostics, probe_eval, write_diagnostics_csv
from .models import KINDS, fit_learner, save_learner
from .runner import OUTPUT_ENV_VAR, dataset_seed, read_records, resolve_output_dir, run_sweep, train_seed


def _pair(text: str) -> tuple[int, int]:
    try:
        i, j = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated indices, got {text!r}") from None
    return i, j


def _resolve_model(cfg, name: str):
    """A model name from the config, a bare kind, or one of the PCA aliases."""
    for spec in cfg.models:
        if spec.name == name:
            return spec.kind, cfg.model_config(spec), cfg.models.index(spec)
    if name in ALIASES:
        kind, over = ALIASES[name]
        return kind, cfg.train.with_overrides(**over), 0
    if name in KINDS:
        return name, cfg.train, 0
    raise ConfigError(f"unknown model {name!r}; choose a config model name or one of {sorted(KINDS)}")


def _sigma_index(cfg, sigma: float) -> int:
    # reuse the sweep's per-cell training seed when sigma is on the grid
    return cfg.sigma_list.index(sigma) if sigma in cfg.sigma_list else 0


def _fit_one(args):
    cfg = parse_config(args.config)
    kind, mcfg, j = _resolve_model(cfg, args.model)
    if args.steps is not None:
        mcfg = mcfg.with_overrides(steps=args.steps)
    ds = generate_dataset(cfg.env_params(args.sigma, dataset_seed(args.seed)))
    learner = fit_learner(kind, ds, mcfg, train_seed(args.seed, _sigma_index(cfg, args.sigma), j))
    return cfg, ds, learner


def cmd_generate(args) -> int:
    params = EnvParams(T=args.T, sigma=args.sigma, seed=dataset_seed(args.seed))
    ds = generate_dataset(params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out) if out.suffix == ".csv" else save_dataset(ds, out)
    print(f"wrote {out}  T={params.T} split={ds.split} snr_db={ds.snr_db:.3f} checksum={ds.checksum()}")
    return 0


def cmd_train(args) -> int:
    cfg, ds, learner = _fit_one(args)
    res = probe_eval(learner, ds, intercept=cfg.intercept)
    flags = "|".join(learner.diag.flags()) or "-"
    print(f"{args.model} sigma={args.sigma:g} seed={args.seed} snr_db={ds.snr_db:.3f} "
          f"r2_eval={res.r2_eval:.6f} r2_train={res.r2_train:.6f} flags={flags}")
    if args.checkpoint:
        Path(args.checkpoint).parent.mkdir(parents=True, exist_ok=True)
        save_learner(learner, args.checkpoint, {"sigma": args.sigma, "dataset_checksum": ds.checksum()})
    return 0


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    out = resolve_output_dir(args.out, cfg)
    records = run_sweep(cfg, out, workers=args.workers, plots=not args.no_plots)
    print(f"wrote {len(records)} records to {out / 'records.csv'}")
    return 0


def cmd_scatter(args) -> int:
    from .plotting import emit_scatter

    _, ds, learner = _fit_one(args)
    diag = latent_diagnostics(learner, ds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_scatter(diag, args.pair, out, title=f"{args.model}, sigma = {args.sigma:g}")
    if args.diag_csv:
        write_diagnostics_csv(diag, args.diag_csv)
    print(f"wrote {out}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import emit_curves

    records = read_records(args.csv)
    out = Path(args.out) if args.out else Path(args.csv).parent
    out.mkdir(parents=True, exist_ok=True)
    emit_curves(records, out, x="sigma")
    emit_curves(records, out, x="snr_db")
    print(f"wrote curves to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvbench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate one dataset")
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--T", type=int, default=EnvParams.T)
    g.add_argument("--out", required=True, help=".npz container, or .csv for a flat table")
    g.set_defaults(func=cmd_generate)

    def model_flags(q):
        q.add_argument("--model", required=True, help="kind or config model name")
        q.add_argument("--sigma", type=float, default=0.0)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--config", default="default", help="config file or 'default'")
        q.add_argument("--steps", type=int, default=None, help="override training steps")

    t = sub.add_parser("train", help="fit one learner and print its probe R^2")
    model_flags(t)
    t.add_argument("--checkpoint", default=None, help="write the fitted learner here (.npz)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run the sigma x seed x model grid")
    s.add_argument("--config", default="default")
    s.add_argument("--out", default=None, help=f"output dir (overrides ${OUTPUT_ENV_VAR} and the config)")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("scatter", help="scatter two latent features of one fitted learner")
    model_flags(c)
    c.add_argument("--pair", type=_pair, default=(0, 1))
    c.add_argument("--out", required=True)
    c.add_argument("--diag-csv", default=None, help="also write the diagnostics table")
    c.set_defaults(func=cmd_scatter)

    pl = sub.add_parser("plot", help="redraw curves from an existing records.csv")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - report and fail, never traceback
        print(f"tvbench {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

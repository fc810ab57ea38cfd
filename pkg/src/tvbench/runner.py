"""Run the (sigma x seed x model) grid and write records, curves and scatters.

Per-cell randomness:

* the dataset for base seed ``s`` uses ``derive_seed(s, PURPOSE_DATASET)``;
  it does not depend on sigma, so every sigma sees the same mixing maps and
  noise draws and only the distractor amplitude changes;
* model ``j`` at sigma index ``i`` trains with
  ``derive_seed(s, i, j, PURPOSE_TRAIN)``.
"""

from __future__ import annotations

import dataclasses
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import SweepConfig, dumps
from .env import generate_dataset
from .evaluation import latent_diagnostics, probe_eval
from .models import TrainingDiverged, make_learner
from .numerics import PURPOSE_DATASET, PURPOSE_TRAIN, SingularityError, derive_seed

CSV_HEADER = "model,sigma,seed,snr_db,r2_eval,r2_train,latent_dim,wall_ms,flags"
OUTPUT_ENV_VAR = "TVBENCH_OUTPUT_DIR"


@dataclass
class RunRecord:
    model: str
    sigma: float
    seed: int
    snr_db: float
    r2_eval: float
    r2_train: float
    latent_dim: int
    wall_ms: float | None = None
    flags: list[str] = field(default_factory=list)

    def csv_row(self) -> str:
        wall = "" if self.wall_ms is None else f"{self.wall_ms:.1f}"
        return ",".join([
            self.model, _num(self.sigma), str(self.seed), _num(self.snr_db),
            _num(self.r2_eval), _num(self.r2_train), str(self.latent_dim), wall, "|".join(self.flags),
        ])


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def _parse_num(text: str) -> float:
    return float(text) if text else math.nan


def dataset_seed(base_seed: int) -> int:
    return derive_seed(base_seed, PURPOSE_DATASET)


def train_seed(base_seed: int, sigma_index: int, model_index: int) -> int:
    return derive_seed(base_seed, sigma_index, model_index, PURPOSE_TRAIN)


@dataclass
class CellResult:
    sigma_index: int
    seed_index: int
    checksum: str
    records: list[RunRecord]
    scatter: dict[str, np.ndarray]  # model name -> eval latents


def run_cell(cfg: SweepConfig, sigma_index: int, seed_index: int, want_scatter: bool = False) -> CellResult:
    sigma, seed = cfg.sigma_list[sigma_index], cfg.seeds[seed_index]
    ds = generate_dataset(cfg.env_params(sigma, dataset_seed(seed)))
    records, scatter = [], {}
    for j, spec in enumerate(cfg.models):
        learner = make_learner(spec.kind, cfg.model_config(spec), train_seed(seed, sigma_index, j))
        flags: list[str] = []
        t0 = time.perf_counter()
        try:
            learner.fit(ds)
            res = probe_eval(learner, ds, intercept=cfg.intercept)
            r2_eval, r2_train = res.r2_eval, res.r2_train
            flags += learner.diag.flags()
            if res.degenerate_dims:
                flags.append("degenerate-dim")
            if want_scatter:
                scatter[spec.name] = latent_diagnostics(learner, ds)["rows"][:, 1 : 1 + learner.latent_dim]
        except (TrainingDiverged, FloatingPointError, SingularityError) as exc:
            r2_eval = r2_train = math.nan
            flags.append("diverged" if isinstance(exc, (TrainingDiverged, FloatingPointError)) else "singular")
        wall = (time.perf_counter() - t0) * 1e3 if cfg.record_timing else None
        records.append(RunRecord(spec.name, sigma, seed, ds.snr_db, r2_eval, r2_train,
                                 learner.latent_dim, wall, flags))
    return CellResult(sigma_index, seed_index, ds.checksum(), records, scatter)


def _run_cell_args(args):
    return run_cell(*args)


def run_grid(cfg: SweepConfig, workers: int | None = None) -> list[CellResult]:
    """All cells, ordered by (sigma index, seed index) whatever the worker count."""
    workers = workers or cfg.workers
    scatter_sigmas = set(cfg.scatter_sigmas)
    jobs = [(cfg, i, s, cfg.sigma_list[i] in scatter_sigmas and s == 0)
            for i in range(len(cfg.sigma_list)) for s in range(len(cfg.seeds))]
    if workers <= 1:
        results = [run_cell(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    results.sort(key=lambda r: (r.sigma_index, r.seed_index))
    return results


def write_records(records: list[RunRecord], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")
    return path


def read_records(path) -> list[RunRecord]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ValueError(f"{path}: header must be {CSV_HEADER!r}")
        out = []
        for row in reader:
            out.append(RunRecord(
                model=row["model"], sigma=float(row["sigma"]), seed=int(row["seed"]),
                snr_db=_parse_num(row["snr_db"]), r2_eval=_parse_num(row["r2_eval"]),
                r2_train=_parse_num(row["r2_train"]), latent_dim=int(row["latent_dim"]),
                wall_ms=float(row["wall_ms"]) if row["wall_ms"] else None,
                flags=[f for f in row["flags"].split("|") if f],
            ))
    return out


def resolve_output_dir(cli_value: str | None, cfg: SweepConfig) -> Path:
    """CLI flag, then the environment variable, then the config value."""
    return Path(cli_value or os.environ.get(OUTPUT_ENV_VAR) or cfg.output_dir)


def write_meta(cfg: SweepConfig, results: list[CellResult], path) -> Path:
    import matplotlib
    import scipy

    lines = [
        f"tvbench {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"matplotlib {matplotlib.__version__}",
        "",
        "# resolved config",
        dumps(cfg),
        "# cells: sigma seed dataset_seed checksum",
    ]
    for r in results:
        seed = cfg.seeds[r.seed_index]
        lines.append(f"{_num(cfg.sigma_list[r.sigma_index])} {seed} {dataset_seed(seed)} {r.checksum}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def run_sweep(cfg: SweepConfig, out_dir=None, workers: int | None = None, plots: bool = True) -> list[RunRecord]:
    """Run the grid and write ``records.csv``, ``meta.txt`` and the SVGs into ``out_dir``."""
    from .plotting import emit_curves, emit_scatter_points

    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_grid(cfg, workers)
    records = [rec for r in results for rec in r.records]
    write_records(records, out / "records.csv")
    write_meta(cfg, results, out / "meta.txt")
    if plots:
        emit_curves(records, out, x="sigma")
        emit_curves(records, out, x="snr_db")
        for r in results:
            sigma = cfg.sigma_list[r.sigma_index]
            for name, Z in r.scatter.items():
                emit_scatter_points(Z, (0, 1), out / f"scatter_{name}_{_num(sigma)}.svg",
                                    title=f"{name}, sigma = {_num(sigma)}")
    return records


def replace_train(cfg: SweepConfig, **kw) -> SweepConfig:
    return dataclasses.replace(cfg, train=cfg.train.with_overrides(**kw))

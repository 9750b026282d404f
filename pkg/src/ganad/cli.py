"""Command-line front end for reproducible experiment runs.

Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
"""

from __future__ import annotations

import functools
import json
import shutil
import sys
from pathlib import Path

import click

from ganad import data, evaluation, scoring
from ganad.checkpoint import load_checkpoint, load_metadata
from ganad.config import ExperimentConfig
from ganad.errors import ConfigError, GanadError
from ganad.training import run_seeds


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except GanadError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """GAN-augmented autoencoder anomaly detection experiments."""


def _resolve_checkpoint(path: Path) -> Path:
    """Accept either a checkpoint dir or a training run dir (uses final/)."""
    path = Path(path)
    if (path / "metadata.json").is_file():
        return path
    if (path / "final" / "metadata.json").is_file():
        return path / "final"
    raise ConfigError(f"no checkpoint found at {path}")


def _load_for_config(ckpt_dir: Path, cfg: ExperimentConfig):
    bundle = load_checkpoint(ckpt_dir)
    expected = cfg.arch_config()
    if bundle.config != expected:
        raise ConfigError(
            f"checkpoint architecture ({bundle.config.dataset_tag}, latent {bundle.config.latent_dim}) "
            f"does not match config ({expected.dataset_tag}, latent {expected.latent_dim})"
        )
    return bundle


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--output-dir", type=click.Path(), default=None, help="Override the config's output directory.")
@click.option("--force", is_flag=True, help="Overwrite an existing output directory.")
@_handle_errors
def train(config_path, output_dir, force):
    """Train one model per configured seed."""
    cfg = ExperimentConfig.from_toml(config_path)
    out = Path(output_dir) if output_dir else cfg.output_dir
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output directory {out} exists; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)

    splits = cfg.build_splits()
    arch = cfg.arch_config()
    tcfg = cfg.train_config()
    results = run_seeds(splits, arch, tcfg, cfg.seeds, out)

    manifest = {
        "config_hash": cfg.config_hash(),
        "config": cfg.raw,
        "seeds": cfg.seeds,
        "checkpoints": {},
        "failures": {},
    }
    for seed, res, err in results:
        if res is not None:
            manifest["checkpoints"][str(seed)] = str(res.checkpoint_dir)
            click.echo(f"seed {seed}: trained, checkpoint at {res.checkpoint_dir}")
        else:
            manifest["failures"][str(seed)] = err
            click.echo(f"seed {seed}: FAILED ({err})", err=True)
    (out / "experiment_manifest.json").write_text(json.dumps(manifest, indent=2))
    if manifest["failures"] and not manifest["checkpoints"]:
        sys.exit(1)


def _parse_grid(text: str):
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must look like start:stop:step, got {text!r}") from exc
    values = []
    v = start
    while v <= stop + 1e-9:
        values.append(round(v, 10))
        v += step
    return values


@main.command()
@click.argument("checkpoint_dir", type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--output-dir", type=click.Path(), default=None)
@click.option("--lambda-sweep", "sweep_grid", default=None, help="Lambda grid as start:stop:step.")
@click.option("--ablate", "ablate_mode", type=click.Choice(["latent"]), default=None)
@_handle_errors
def evaluate(checkpoint_dir, config_path, output_dir, sweep_grid, ablate_mode):
    """Score the test split and emit report, ROC, and plots."""
    cfg = ExperimentConfig.from_toml(config_path)
    ckpt = _resolve_checkpoint(Path(checkpoint_dir))
    bundle = _load_for_config(ckpt, cfg)
    splits = cfg.build_splits()
    out = Path(output_dir) if output_dir else ckpt.parent / "evaluation"
    out.mkdir(parents=True, exist_ok=True)

    report = evaluation.evaluate_split(bundle, splits, cfg.score, experiment=cfg.name, seed=bundle.seed)
    report.to_json(out / "report.json")
    evaluation.write_roc_csv(out / "roc.csv", report.roc_points)
    evaluation.plot_roc(out / "roc.png", report.roc_points, title=f"{cfg.name} (AUC {report.auc:.3f})")
    scored = scoring.score_dataset(splits.test, bundle, cfg.score)
    scoring.dump_scores_csv(out / "scores.csv", scored)
    totals = [bd.total for _, bd in scored if bd is not None]
    labels = [it.anomaly_label for it, bd in scored if bd is not None]
    evaluation.plot_score_histogram(out / "score_histogram.png", totals, labels, title=cfg.name)

    click.echo(f"{'experiment':<24}{'AUC':>8}{'sens':>8}{'spec':>8}{'f1':>8}{'acc':>8}")

    def fmt(v):
        return f"{v:>8.3f}" if v is not None else f"{'n/a':>8}"

    click.echo(
        f"{cfg.name:<24}{report.auc:>8.3f}{fmt(report.sensitivity)}{fmt(report.specificity)}"
        f"{fmt(report.f1)}{fmt(report.accuracy)}"
    )

    if sweep_grid:
        grid = _parse_grid(sweep_grid)
        sweep = evaluation.lambda_sweep(bundle, splits, grid, cfg.score.beta)
        evaluation.write_sweep_csv(out / "lambda_sweep.csv", sweep)
        click.echo(f"lambda sweep written to {out / 'lambda_sweep.csv'} ({len(sweep)} rows)")

    if ablate_mode == "latent":
        base, full = evaluation.ablate([bundle], splits, "latent", cfg.score)
        base.to_json(out / "ablation_beta0.json")
        full.to_json(out / "ablation_beta_default.json")
        click.echo(
            f"latent ablation: AUC {base.mean['auc']:.3f} (beta=0) -> {full.mean['auc']:.3f} "
            f"(beta={cfg.score.beta})"
        )


@main.command()
@click.argument("checkpoint_dir", type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--output", type=click.Path(), default="scores.csv")
@_handle_errors
def score(checkpoint_dir, config_path, output):
    """Write per-item score breakdowns for the test split as CSV."""
    cfg = ExperimentConfig.from_toml(config_path)
    bundle = _load_for_config(_resolve_checkpoint(Path(checkpoint_dir)), cfg)
    splits = cfg.build_splits()
    bundle.eval_mode()
    scored = scoring.score_dataset(splits.test, bundle, cfg.score)
    scoring.dump_scores_csv(output, scored)
    click.echo(f"wrote {len(scored)} rows to {output}")


@main.command()
@click.argument("checkpoint_dir", type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--lambdas", default="0:1:0.1", help="Lambda grid as start:stop:step.")
@click.option("--beta", type=float, default=None, help="Beta held fixed during the sweep.")
@click.option("--output", type=click.Path(), default="lambda_sweep.csv")
@_handle_errors
def sweep(checkpoint_dir, config_path, lambdas, beta, output):
    """AUC as a function of lambda on the test split."""
    cfg = ExperimentConfig.from_toml(config_path)
    bundle = _load_for_config(_resolve_checkpoint(Path(checkpoint_dir)), cfg)
    splits = cfg.build_splits()
    grid = _parse_grid(lambdas)
    result = evaluation.lambda_sweep(bundle, splits, grid, beta if beta is not None else cfg.score.beta)
    evaluation.write_sweep_csv(output, result)
    for lam, auc in result:
        click.echo(f"lambda={lam:.2f}  auc={auc:.4f}")


@main.command()
@click.argument("checkpoint_dir", type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--anogan-iters", type=int, default=500, show_default=True)
@click.option("--items", "n_items", type=int, default=8, show_default=True, help="Test items to time.")
@click.option("--repetitions", type=int, default=3, show_default=True)
@_handle_errors
def bench(checkpoint_dir, config_path, anogan_iters, n_items, repetitions):
    """Compare combined-score vs iterative-baseline inference time."""
    cfg = ExperimentConfig.from_toml(config_path)
    ckpt = _resolve_checkpoint(Path(checkpoint_dir))
    if not (Path(ckpt) / "metadata.json").is_file():
        raise ConfigError(f"missing checkpoint at {ckpt}")
    bundle = _load_for_config(ckpt, cfg)
    bundle.eval_mode()
    splits = cfg.build_splits()
    items = splits.test[:n_items]
    w = cfg.score

    scorers = [
        ("ours", lambda it: scoring.anomaly_score(it.pixels, bundle, w)),
        (
            f"anogan-{anogan_iters}",
            lambda it: scoring.anogan_score(
                it.pixels, bundle.generator, bundle.critic, iterations=anogan_iters, w=w
            ),
        ),
    ]
    rows = evaluation.bench_inference(scorers, items, repetitions=repetitions)
    counts = bundle.parameter_counts()
    click.echo(f"parameters: encoder {counts['encoder']:,}  generator/decoder {counts['generator']:,}  critic {counts['critic']:,}")
    click.echo(f"{'scorer':<16}{'ms/item':>12}")
    for row in rows:
        if row["error"]:
            click.echo(f"{row['name']:<16}{'failed':>12}  {row['error']}")
        else:
            click.echo(f"{row['name']:<16}{row['median_ms_per_item']:>12.2f}")


@main.command("make-synthetic")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n-normal", type=int, default=1000, show_default=True)
@click.option("--n-anomalous", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_handle_errors
def make_synthetic_cmd(out_dir, n_normal, n_anomalous, seed):
    """Materialize the synthetic dataset as normal/ + anomalous/ PNG folders."""
    spec = data.make_synthetic(n_normal, n_anomalous, seed)
    data.save_synthetic_folder(spec, out_dir)
    spec.save_manifest(Path(out_dir) / "split_manifest.json")
    click.echo(
        f"wrote {len(spec.train)} train / {len(spec.validation)} validation / {len(spec.test)} test items to {out_dir}"
    )


if __name__ == "__main__":
    main()

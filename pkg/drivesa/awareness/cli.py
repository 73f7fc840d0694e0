# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from pathlib import Path
from typing import Any, Dict, List

# WARNING: do not import unnecessary things here to keep cli startup time under
# control
import click

from swh.core.cli import CONTEXT_SETTINGS, AliasedGroup

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class InvalidInput(click.ClickException):
    """Dataset, configuration or preset rejected by validation"""

    exit_code = 2


class AwarenessGroup(AliasedGroup):
    """Maps the package errors to exit codes: 2 for invalid inputs, 1 for
    runtime failures"""

    def invoke(self, ctx):
        from .config import ConfigError
        from .evaluation import EvaluationError
        from .features import FeatureError
        from .numeric import TrainingError
        from .pipeline import PipelineError
        from .scene import DatasetError

        try:
            return super().invoke(ctx)
        except (
            DatasetError,
            FeatureError,
            ConfigError,
            PipelineError,
            EvaluationError,
        ) as e:
            raise InvalidInput(str(e)) from e
        except (TrainingError, OSError) as e:
            raise click.ClickException(str(e)) from e


class SeedsOption(click.ParamType):
    """click type for a list of seeds: integers and inclusive ranges separated
    by commas, e.g. ``0-9`` or ``1,4,7-8``"""

    name = "seeds"

    def convert(self, value, param, ctx) -> List[int]:
        if isinstance(value, list):
            return value
        seeds: List[int] = []
        for spec in str(value).split(","):
            try:
                if "-" in spec.strip()[1:]:
                    raw_l, raw_r = spec.strip().split("-", maxsplit=1)
                    seeds.extend(range(int(raw_l), int(raw_r) + 1))
                else:
                    seeds.append(int(spec))
            except ValueError:
                self.fail(f"invalid seed specification: {value}, see --help")
        if not seeds:
            self.fail(f"no seed in {value!r}")
        return list(dict.fromkeys(seeds))


class PathlibPath(click.Path):
    """A Click path argument that returns a pathlib Path, not a string"""

    def convert(self, value, param, ctx):
        return Path(super().convert(value, param, ctx))


def _dataset_option(f):
    return click.option(
        "--dataset",
        "-d",
        required=True,
        type=PathlibPath(exists=True, file_okay=False),
        help="dataset directory (manifest.json, objects.jsonl, gaze/, labels.csv)",
    )(f)


def _seed_option(f):
    return click.option(
        "--seed", "-s", required=True, type=int, help="random seed of the run"
    )(f)


def _write_json(data: Dict[str, Any], path: Path) -> None:
    import json

    import numpy as np

    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        raise TypeError(f"{type(o).__name__} is not JSON serializable")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=4, sort_keys=True, default=default)
        f.write("\n")


def _load(ctx, dataset: Path):
    from .dataset import load_dataset
    from .features import SensoryRadii, extract_all

    conf = ctx.obj["config"]
    ds = load_dataset(dataset)
    table = extract_all(
        ds,
        SensoryRadii(tuple(conf["radii"])),
        conf["max_distance_deg"],
        ref_heights=conf["reference_heights"],
        threads=conf["threads"],
    )
    return ds, table


@click.group(
    name="drivesa-awareness", context_settings=CONTEXT_SETTINGS, cls=AwarenessGroup
)
@click.option(
    "--config-file",
    "--config",
    "-C",
    default=None,
    type=click.Path(
        exists=True,
        dir_okay=False,
    ),
    help="YAML configuration file",
)
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    show_default=True,
    help="log level, logs go to stderr",
)
@click.option(
    "--threads",
    "-t",
    default=None,
    type=click.IntRange(min=1),
    help="worker threads (default: physical core count); never changes results",
)
@click.pass_context
def awareness_cli_group(ctx, config_file, log_level, threads):
    """Driver situation awareness prediction from gaze and scene objects."""
    import logging

    from swh.core import config

    from .config import DEFAULT_CONFIG, check_config

    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    ctx.ensure_object(dict)
    conf = config.read(config_file, DEFAULT_CONFIG)
    if "awareness" not in conf:
        raise InvalidInput(
            'no "awareness" stanza found in configuration file %s' % config_file
        )
    awareness = dict(conf["awareness"] or {})
    if threads is not None:
        awareness["threads"] = threads
    ctx.obj["config"] = check_config(awareness)


@awareness_cli_group.command()
@_dataset_option
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(dir_okay=False),
    help="feature table CSV to write",
)
@click.pass_context
def features(ctx, dataset, out):
    """Extract the feature table of every (participant, scene, object)

    Output: a CSV with the key columns, the 30 feature columns and the
    degenerate-input flags.
    """
    _, table = _load(ctx, dataset)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.write_csv(out)
    for flag, count in table.report().items():
        click.echo(f"{flag}: {count}", err=True)


@awareness_cli_group.command()
@_dataset_option
@click.option(
    "--method",
    "-m",
    required=True,
    metavar="PRESET",
    help="preset: baseline3, method1, method2, method12, method123 or method3",
)
@_seed_option
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(dir_okay=False),
    help="model JSON to write",
)
@click.pass_context
def train(ctx, dataset, method, seed, out):
    """Train a preset on the whole dataset and save the model"""
    from .config import RunConfig
    from .pipeline import BASELINE1, method_spec, train_pipeline

    if method == BASELINE1:
        raise InvalidInput(
            "baseline1 is a fixed rule with nothing to train, see 'baseline1'"
        )
    conf = ctx.obj["config"]
    spec = method_spec(method, conf)
    ds, table = _load(ctx, dataset)
    pipeline = train_pipeline(table, ds.label_index(), spec, conf, seed)
    run = RunConfig(dataset, method, seed, conf, {"model": str(out)})
    _write_json(dict(pipeline.to_dict(), run=run.echo()), out)


@awareness_cli_group.command(name="eval")
@_dataset_option
@click.option(
    "--method",
    "-m",
    "methods",
    required=True,
    multiple=True,
    metavar="PRESET",
    help="preset to evaluate, repeatable; 'all' runs every preset",
)
@_seed_option
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(file_okay=False),
    help="directory where to store reports and ROC curves",
)
@click.pass_context
def evaluate(ctx, dataset, methods, seed, out):
    """Pause-out cross-validation

    Writes METHOD.json (report) and METHOD_roc.csv per preset. With several
    presets, also writes comparison.csv and prints the comparison table.
    Baseline 1 comes with its radius and duration sweeps.
    """
    import logging

    from .config import RunConfig
    from .evaluation import (
        baseline1_sweeps,
        comparison_table,
        render_table,
        run_cv,
    )
    from .pipeline import BASELINE1, iter_methods

    logger = logging.getLogger(__name__)
    conf = ctx.obj["config"]
    names = iter_methods(methods)
    ds, table = _load(ctx, dataset)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for seq_no, name in enumerate(names, start=1):
        logger.info("Evaluating %s (%s/%s)", name, seq_no, len(names))
        report = run_cv(ds, name, conf, seed, table, conf["threads"])
        reports[name] = report
        run = RunConfig(dataset, name, seed, conf, {"report": str(out)})
        _write_json(dict(report.to_dict(), run=run.echo()), out / f"{name}.json")
        roc = report.roc
        if roc is None:
            logger.warning("No ROC curve for %s: a single class was scored", name)
        else:
            roc.to_frame().to_csv(
                out / f"{name}_roc.csv", index=False, float_format="%.17g"
            )
        if name == BASELINE1:
            for mode, sweep in baseline1_sweeps(ds, conf).items():
                sweep.to_frame().to_csv(
                    out / f"baseline1_{mode}_roc.csv",
                    index=False,
                    float_format="%.17g",
                )
    if len(reports) > 1:
        comparison = comparison_table(reports)
        comparison.to_csv(out / "comparison.csv", index=False, float_format="%.17g")
        click.echo(render_table(comparison))
    else:
        (report,) = reports.values()
        click.echo(f"{report.method}: accuracy {report.accuracy}")


@awareness_cli_group.command()
@_dataset_option
@click.option(
    "--model",
    "-M",
    required=True,
    type=PathlibPath(exists=True, dir_okay=False),
    help="model JSON written by 'train'",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(dir_okay=False),
    help="ROC CSV to write",
)
@click.pass_context
def roc(ctx, dataset, model, out):
    """Score a dataset with a saved model; write the ROC curve, print the AUC"""
    import json

    from .dataset import load_dataset
    from .evaluation import labelled_predictions, roc_auc
    from .features import extract_all
    from .pipeline import TrainedPipeline, predict

    with open(model) as f:
        pipeline = TrainedPipeline.from_dict(json.load(f))
    ds = load_dataset(dataset)
    table = extract_all(
        ds,
        pipeline.radii,
        pipeline.max_distance_deg,
        ref_heights=pipeline.reference_heights,
        threads=ctx.obj["config"]["threads"],
    )
    scored = labelled_predictions(predict(pipeline, table), ds.label_index())
    curve = roc_auc(scored["score"], scored["label"])
    out.parent.mkdir(parents=True, exist_ok=True)
    curve.to_frame().to_csv(out, index=False, float_format="%.17g")
    click.echo(f"AUC: {curve.auc:.6f}")


@awareness_cli_group.command()
@_dataset_option
@click.option(
    "--sweep",
    type=click.Choice(["radius", "duration", "both"]),
    default="both",
    show_default=True,
    help="parameter to sweep, the other one being held at its default",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(file_okay=False),
    help="directory where to store the sweep CSVs",
)
@click.pass_context
def baseline1(ctx, dataset, sweep, out):
    """ROC sweeps of the fixation rule over radius (0.1-30 deg) and duration
    (10-3000 ms)"""
    from .dataset import load_dataset
    from .evaluation import baseline1_sweeps
    from .pipeline import baseline1_roc

    conf = ctx.obj["config"]
    ds = load_dataset(dataset)
    if sweep == "both":
        sweeps = baseline1_sweeps(ds, conf)
    else:
        sweeps = {
            sweep: baseline1_roc(
                ds,
                sweep,
                points=conf["baseline1_points"],
                radius=conf["baseline1_radius"],
                duration_ms=conf["baseline1_duration_ms"],
            )
        }
    out.mkdir(parents=True, exist_ok=True)
    for mode, result in sweeps.items():
        result.to_frame().to_csv(
            out / f"baseline1_{mode}_roc.csv", index=False, float_format="%.17g"
        )
        click.echo(f"{mode}: AUC {result.auc:.6f}")


@awareness_cli_group.command(name="pca-report")
@_dataset_option
@click.option(
    "--top",
    "-k",
    default=6,
    show_default=True,
    type=click.IntRange(min=1),
    help="number of leading components to report",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(dir_okay=False),
    help="loading table CSV to write",
)
@click.pass_context
def pca_report(ctx, dataset, top, out):
    """Contribution, cumulative variance and loadings of the leading principal
    components of the 30 scaled features"""
    from . import evaluation

    ds, table = _load(ctx, dataset)
    basis = evaluation.fit_report_basis(table, ds.label_index())
    report = evaluation.pca_report(basis, table.columns, top)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.table.to_csv(out, index=False, float_format="%.17g")
    click.echo(report.to_text())


@awareness_cli_group.command()
@_seed_option
@click.option("--scenes", default=8, show_default=True, type=click.IntRange(min=1))
@click.option(
    "--participants", default=44, show_default=True, type=click.IntRange(min=1)
)
@click.option(
    "--capacity",
    default="7",
    show_default=True,
    help="memory capacity of the simulated drivers, 'none' for unlimited",
)
@click.option(
    "--label-noise", default=0.1, show_default=True, type=float, help="flip rate"
)
@click.option(
    "--negative-share",
    default=None,
    type=float,
    help="tune background gaze so that this share of targets is not aware",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(file_okay=False),
    help="dataset directory to write, oracle.csv included",
)
@click.pass_context
def synth(
    ctx, seed, scenes, participants, capacity, label_noise, negative_share, out
):
    """Generate a synthetic dataset with known ground-truth awareness"""
    from .dataset import write_dataset
    from .synthetic import GenConfig, gen_dataset, oracle_stats, write_oracle

    if capacity.lower() == "none":
        n_star = None
    else:
        try:
            n_star = int(capacity)
        except ValueError:
            raise click.BadParameter(
                f"expected an integer or 'none', got {capacity!r}",
                param_hint="--capacity",
            ) from None
    cfg = GenConfig(
        seed=seed,
        n_scenes=scenes,
        n_participants=participants,
        capacity=n_star,
        label_noise=label_noise,
        target_negative_share=negative_share,
    )
    ds, trace = gen_dataset(cfg, threads=ctx.obj["config"]["threads"])
    write_dataset(ds, out)
    write_oracle(trace, out / "oracle.csv")
    stats = oracle_stats(trace)
    click.echo(
        f"{len(ds.scenes)} scenes, {len(ds.labels)} labels, "
        f"negative share {stats['negative_share']:.3f}"
    )


@awareness_cli_group.command()
@click.option(
    "--experiment",
    "-e",
    required=True,
    type=click.Choice(["ladder", "capacity", "shape"]),
    help="method ladder, memory capacity sweep or memory shape comparison",
)
@click.option(
    "--seeds",
    default="0-9",
    show_default=True,
    type=SeedsOption(),
    help="seeds of the synthetic datasets, e.g. 0-9 or 1,4,7",
)
@click.option("--scenes", default=8, show_default=True, type=click.IntRange(min=1))
@click.option(
    "--participants", default=44, show_default=True, type=click.IntRange(min=1)
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=PathlibPath(dir_okay=False),
    help="JSON summary to write",
)
@click.pass_context
def bench(ctx, experiment, seeds, scenes, participants, out):
    """Run an experiment over synthetic datasets, one per seed, and report
    per-seed and median pooled accuracies"""
    from .bench import run_experiment
    from .synthetic import GenConfig

    conf = ctx.obj["config"]
    gen = GenConfig(n_scenes=scenes, n_participants=participants)
    result = run_experiment(experiment, seeds, gen, conf, threads=conf["threads"])
    _write_json(result, out)
    for name, value in result["median"].items():
        click.echo(f"{name}: {value:.2f}")


def main():
    return awareness_cli_group(auto_envvar_prefix="DRIVESA_AWARENESS")


if __name__ == "__main__":
    main()

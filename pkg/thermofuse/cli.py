# thermofuse - RGB and thermal image fusion for diabetic foot ulcer staging.
# Copyright (C) 2025-2026 The thermofuse developers

# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.

# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.

# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""
Command line interface of thermofuse.

Every subcommand reads the configuration file given with --config (or the defaults),
applies the THERMOFUSE_SEED environment variable and then the command line flags, and
writes everything under the --out directory. The exit code is 0 if and only if no
error occurred.
"""
import argparse
import dataclasses
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from thermofuse import __version__
from thermofuse.bench import run_bench, save_bench
from thermofuse.configuration import InvalidConfiguration, RunConfiguration
from thermofuse.configuration.config import ALL_MODALITIES
from thermofuse.dataset import (
    ClassWeights,
    DatasetManifest,
    NUM_CLASSES,
    Modality,
    SplitPlan,
    class_weights,
    load_manifest,
    load_sample,
    make_split,
    records_by_id,
    summarize,
)
from thermofuse.exceptions import ThermofuseError
from thermofuse.explain import explain_samples
from thermofuse.infos import get_script_infos
from thermofuse.logging import create_loggers
from thermofuse.metrics import (
    MARKDOWN_HEADER,
    MetricsReport,
    aggregate_folds,
    markdown_row,
    roc_curves,
)
from thermofuse.model import BACKBONES
from thermofuse.plots import plot_accuracy_comparison, plot_confusion, plot_roc
from thermofuse.synth import SynthSpec, generate
from thermofuse.thermal import convert_directory_config
from thermofuse.training import (
    TrainConfig,
    Evaluation,
    evaluate_test,
    is_complete,
    load_run,
    save_run,
    train_fold,
)
from thermofuse.utils import PathLike, dump_json

logger = logging.getLogger(__name__)

DEFAULT_OUT = "out"
DEFAULT_CONFIG_NAME = "config.toml"
SPLIT_NAME = "split.json"
AGGREGATE_PREFIX = "aggregate_metrics"


def load_configuration(
    path: Optional[PathLike] = None,
    seed: Optional[int] = None,
    modality: Optional[str] = None,
    backbone: Optional[str] = None,
) -> RunConfiguration:
    """
    Load the configuration and apply the overrides.

    The precedence is: defaults < file < THERMOFUSE_SEED < arguments.

    Args:
        path (Optional[PathLike], optional): configuration file, None for the defaults. Defaults to None.
        seed (Optional[int], optional): seed override. Defaults to None.
        modality (Optional[str], optional): modality override. Defaults to None.
        backbone (Optional[str], optional): backbone override. Defaults to None.

    Returns:
        RunConfiguration: the effective configuration.
    """
    config = RunConfiguration.from_file(path) if path else RunConfiguration()
    config.apply_environment()
    config.apply_overrides(seed=seed, modality=modality, backbone=backbone)
    return config


def cell_dir(out_dir: PathLike, backbone: str, modality: Modality) -> Path:
    """
    Directory of the runs of a (backbone, modality) pair.

    Args:
        out_dir (PathLike): output root.
        backbone (str): identifier of the backbone.
        modality (Modality): the modality.

    Returns:
        Path: out_dir/backbone/modality.
    """
    return Path(out_dir) / backbone / modality.value


def _training_pool_weights(
    manifest: DatasetManifest, modality: Modality, split: SplitPlan
) -> ClassWeights:
    pool = [r for r in manifest.records_for(modality) if r.id not in split.test_ids]
    counts = np.bincount([r.grade for r in pool], minlength=NUM_CLASSES)
    return class_weights(counts)


def _save_evaluation(
    evaluation: Evaluation, run_dir: Path, figures: bool, title: str
) -> None:
    evaluation.report.save(run_dir)
    pd.DataFrame(
        {
            "id": evaluation.ids,
            "label": evaluation.labels,
            "prediction": evaluation.predictions,
            **{f"p{g}": evaluation.probabilities[:, g] for g in range(NUM_CLASSES)},
        }
    ).to_csv(run_dir / "predictions.csv", index=False)
    if figures:
        plot_confusion(evaluation.report.confusion, run_dir / "confusion.png", title)
        plot_roc(
            roc_curves(evaluation.labels, evaluation.probabilities),
            run_dir / "roc.png",
            title,
        )


def _aggregate(
    cell: Path, n_folds: int, backbone: str, modality: Modality
) -> Optional[MetricsReport]:
    reports = []
    for fold in range(1, n_folds + 1):
        run_dir = cell / f"fold_{fold}"
        if not is_complete(run_dir):
            logger.info("Fold %i of %s is not complete, no aggregation", fold, cell)
            return None
        reports.append(MetricsReport.load(run_dir / "metrics.json"))
    aggregate = aggregate_folds(reports)
    aggregate.save(cell, prefix=AGGREGATE_PREFIX)
    (cell / "row.md").write_text(
        MARKDOWN_HEADER
        + "\n"
        + markdown_row(backbone, modality.display_name, aggregate)
        + "\n",
        encoding="utf-8",
    )
    logger.info(
        "%s on %s: mean test accuracy %f over %i folds",
        backbone,
        modality.display_name,
        aggregate.accuracy,
        n_folds,
    )
    return aggregate


def _split_for_cell(
    config: RunConfiguration, manifest: DatasetManifest, cell: Path, modality: Modality
) -> SplitPlan:
    split = make_split(
        manifest,
        modality,
        seed=config.split.seed,
        test_fraction=config.split.test_fraction,
        n_folds=config.split.n_folds,
    )
    split.save(cell / SPLIT_NAME)
    return split


# pylint: disable=too-many-locals
def cmd_train_eval(
    config: RunConfiguration,
    out_dir: PathLike,
    folds: Optional[Sequence[int]] = None,
    manifest: Optional[DatasetManifest] = None,
) -> int:
    """
    Split, train one model per fold, evaluate every model on the test set and aggregate.

    The backbone and modality are the ones of the model section. Completed folds are
    skipped.

    Args:
        config (RunConfiguration): the configuration.
        out_dir (PathLike): output root.
        folds (Optional[Sequence[int]], optional): folds to train, all if None. Defaults to None.
        manifest (Optional[DatasetManifest], optional): the manifest, loaded from the configuration if None. Defaults to None.

    Returns:
        int: exit code.
    """
    if manifest is None:
        manifest = load_manifest(config.data.manifest)
    modality = Modality(config.model.modality)
    backbone = config.model.backbone
    cell = cell_dir(out_dir, backbone, modality)
    cell.mkdir(parents=True, exist_ok=True)
    config.dump(cell / DEFAULT_CONFIG_NAME)

    split = _split_for_cell(config, manifest, cell, modality)
    weights = _training_pool_weights(manifest, modality, split)
    train_config = dataclasses.replace(
        TrainConfig.from_configuration(config), modality=modality, backbone=backbone
    )
    for fold in folds or range(1, config.split.n_folds + 1):
        run_dir = cell / f"fold_{fold}"
        if is_complete(run_dir):
            logger.info("Run %s is complete, skipping", run_dir)
            continue
        run = train_fold(manifest, split, fold, weights, train_config)
        save_run(run, run_dir, config.to_dict())
        evaluation = evaluate_test(
            run, manifest, split, batch_size=config.eval.batch_size
        )
        _save_evaluation(
            evaluation,
            run_dir,
            config.eval.figures,
            f"{backbone} {modality.display_name} fold {fold}",
        )

    _aggregate(cell, config.split.n_folds, backbone, modality)
    return 0


def cmd_eval(
    config: RunConfiguration, out_dir: PathLike, folds: Optional[Sequence[int]] = None
) -> int:
    """
    Evaluate again the trained runs on the frozen test set and aggregate.

    Args:
        config (RunConfiguration): the configuration.
        out_dir (PathLike): output root.
        folds (Optional[Sequence[int]], optional): folds to evaluate, all if None. Defaults to None.

    Returns:
        int: exit code, 1 if a run is missing.
    """
    manifest = load_manifest(config.data.manifest)
    modality = Modality(config.model.modality)
    backbone = config.model.backbone
    cell = cell_dir(out_dir, backbone, modality)
    if not (cell / SPLIT_NAME).is_file():
        logger.error("No split in %s, run the train command first", cell)
        return 1
    split = SplitPlan.load(cell / SPLIT_NAME)
    status = 0
    for fold in folds or range(1, split.n_folds + 1):
        run_dir = cell / f"fold_{fold}"
        if not (run_dir / "best.ckpt").is_file():
            logger.error("No trained run in %s", run_dir)
            status = 1
            continue
        run = load_run(run_dir, device=config.train.device)
        evaluation = evaluate_test(
            run, manifest, split, batch_size=config.eval.batch_size
        )
        _save_evaluation(
            evaluation,
            run_dir,
            config.eval.figures,
            f"{backbone} {modality.display_name} fold {fold}",
        )
    _aggregate(cell, split.n_folds, backbone, modality)
    return status


def cmd_matrix(config: RunConfiguration, out_dir: PathLike) -> int:
    """
    Run every (backbone, modality) pair of the sweep and compare them.

    Pairs with an aggregate_metrics.json file are skipped, so an interrupted sweep
    resumes where it stopped. A failing pair is logged and listed in failures.json, and
    the sweep goes on with the next one. Writes comparison.md, comparison.csv and
    fig5.png with the completed pairs.

    Args:
        config (RunConfiguration): the configuration.
        out_dir (PathLike): output root.

    Returns:
        int: exit code.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(config.data.manifest)
    rows: List[Tuple[str, str, float]] = []
    failures = []
    lines = [MARKDOWN_HEADER]
    table = []
    for modality_value in config.model.matrix_modalities:
        modality = Modality(modality_value)
        for backbone in config.model.matrix_backbones:
            cell = cell_dir(out_dir, backbone, modality)
            aggregate_path = cell / f"{AGGREGATE_PREFIX}.json"
            if aggregate_path.is_file():
                logger.info("%s is complete, skipping", cell)
            else:
                cell_config = dataclasses.replace(
                    config,
                    model=dataclasses.replace(
                        config.model, backbone=backbone, modality=modality.value
                    ),
                )
                try:
                    cmd_train_eval(cell_config, out_dir, manifest=manifest)
                except ThermofuseError as exc:
                    logger.error(
                        "%s on %s failed: %s", backbone, modality.display_name, exc
                    )
                    failures.append(
                        {
                            "backbone": backbone,
                            "dataset": modality.display_name,
                            "error": str(exc),
                        }
                    )
                    continue
            aggregate = MetricsReport.load(aggregate_path)
            csv_row = aggregate.to_csv_row()
            rows.append((backbone, modality.display_name, csv_row["accuracy"]))
            lines.append(markdown_row(backbone, modality.display_name, aggregate))
            table.append(
                {"dataset": modality.display_name, "backbone": backbone, **csv_row}
            )

    (out_dir / "comparison.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    pd.DataFrame(table).to_csv(out_dir / "comparison.csv", index=False)
    plot_accuracy_comparison(rows, out_dir / "fig5.png")
    logger.info("Comparison of %i runs written in %s", len(rows), out_dir)
    if failures:
        dump_json(failures, out_dir / "failures.json")
        logger.error("%i runs of the sweep failed", len(failures))
        return 1
    (out_dir / "failures.json").unlink(missing_ok=True)
    return 0


def cmd_convert(config: RunConfiguration, in_dir: PathLike, out_dir: PathLike) -> int:
    """
    Convert a directory of raw thermal frames.

    Args:
        config (RunConfiguration): the configuration.
        in_dir (PathLike): directory of the raw TIFF files.
        out_dir (PathLike): output directory.

    Returns:
        int: exit code, 1 if a file failed.
    """
    _, failures = convert_directory_config(config, in_dir, out_dir)
    return 1 if failures else 0


def cmd_gradcam(config: RunConfiguration, out_dir: PathLike, fold: int = 1) -> int:
    """
    Write the Grad-CAM overlays of test samples for a trained run.

    Args:
        config (RunConfiguration): the configuration.
        out_dir (PathLike): output root.
        fold (int, optional): fold of the run. Defaults to 1.

    Returns:
        int: exit code.
    """
    manifest = load_manifest(config.data.manifest)
    modality = Modality(config.model.modality)
    cell = cell_dir(out_dir, config.model.backbone, modality)
    split = SplitPlan.load(cell / SPLIT_NAME)
    run = load_run(cell / f"fold_{fold}", device=config.train.device)
    ids = (
        list(config.eval.cam_samples)
        or sorted(split.test_ids)[: config.eval.cam_max_samples]
    )
    records = records_by_id(manifest.records, ids)
    samples = [
        load_sample(
            record,
            modality,
            run.model.input_size,
            step=config.data.thermal_step,
            floor=config.data.thermal_floor,
        )
        for record in records
    ]
    explain_samples(
        run.model,
        samples,
        cell / "gradcam" / f"fold_{fold}",
        target_class=None if config.eval.cam_target < 0 else config.eval.cam_target,
        layer_id=config.eval.cam_layer or None,
    )
    return 0


def _convert(args: argparse.Namespace, config: RunConfiguration) -> int:
    if not args.input:
        raise InvalidConfiguration(
            "convert needs the input directory, given with --input."
        )
    return cmd_convert(config, args.input, args.out)


def _prepare(args: argparse.Namespace, config: RunConfiguration) -> int:
    summary = summarize(load_manifest(config.data.manifest))
    path = Path(args.out) / "dataset_summary.json"
    dump_json(dataclasses.asdict(summary), path)
    logger.info("Dataset summary written in %s", path)
    return 0


def _split(args: argparse.Namespace, config: RunConfiguration) -> int:
    modality = Modality(config.model.modality)
    split = make_split(
        load_manifest(config.data.manifest),
        modality,
        seed=config.split.seed,
        test_fraction=config.split.test_fraction,
        n_folds=config.split.n_folds,
    )
    split.save(Path(args.out) / f"split_{modality.value}.json")
    return 0


def _train(args: argparse.Namespace, config: RunConfiguration) -> int:
    return cmd_train_eval(config, args.out, folds=[args.fold] if args.fold else None)


def _eval(args: argparse.Namespace, config: RunConfiguration) -> int:
    return cmd_eval(config, args.out, folds=[args.fold] if args.fold else None)


def _matrix(args: argparse.Namespace, config: RunConfiguration) -> int:
    return cmd_matrix(config, args.out)


def _gradcam(args: argparse.Namespace, config: RunConfiguration) -> int:
    return cmd_gradcam(config, args.out, fold=args.fold or 1)


def _bench(args: argparse.Namespace, config: RunConfiguration) -> int:
    reports = run_bench(
        config.bench.backbones,
        config.bench.modalities,
        n_warmup=config.bench.n_warmup,
        n_iter=config.bench.n_iter,
        device=config.bench.device,
    )
    save_bench(reports, Path(args.out) / "bench")
    return 0


def _synth(args: argparse.Namespace, config: RunConfiguration) -> int:
    out = Path(args.out)
    generate(SynthSpec.from_configuration(config.synth), out)
    config.dump(out / DEFAULT_CONFIG_NAME)
    return 0


def _config_create(args: argparse.Namespace, config: RunConfiguration) -> int:
    path = Path(args.file)
    if path.exists() and not args.force:
        logger.error("%s already exists, use --force to overwrite it", path)
        return 1
    config.dump(path)
    print(f"Configuration written to {path}")
    return 0


def _create_common_parser() -> argparse.ArgumentParser:
    """
    Create the parser of the options shared by every subcommand.

    Returns:
        argparse.ArgumentParser: the parent parser.
    """
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--config",
        "-f",
        default=None,
        help="Path of the configuration file. Default: the default configuration.",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Seed of every random step."
    )
    parser.add_argument(
        "--modality", choices=ALL_MODALITIES, default=None, help="Dataset of the model."
    )
    parser.add_argument(
        "--backbone",
        choices=sorted(BACKBONES),
        default=None,
        help="Backbone of the model.",
    )
    parser.add_argument(
        "--out", default=DEFAULT_OUT, help=f"Output directory. Default: {DEFAULT_OUT}."
    )
    parser.add_argument(
        "--input",
        default=None,
        help="Input directory for convert, manifest path for the other commands.",
    )
    parser.add_argument(
        "--log-file", default=None, help="File receiving every log record."
    )
    return parser


def _create_main_parser() -> argparse.ArgumentParser:
    """
    Create the parser for the command line tool.

    Commands:
        convert, prepare, split, train, eval, matrix, gradcam, bench, synth, config create

    Returns:
        argparse.ArgumentParser: the created parser.
    """
    parser = argparse.ArgumentParser(prog="thermofuse")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Level of verbosity. If none, only errors are printed to the console. -v will print warnings and errors, -vv will add info and -vvv will print all debug logs.",
    )
    common = _create_common_parser()
    subparsers = parser.add_subparsers()

    convert_parser = subparsers.add_parser(
        "convert",
        parents=[common],
        help="Convert raw thermal frames to normalized channels.",
    )
    convert_parser.set_defaults(func=_convert)

    prepare_parser = subparsers.add_parser(
        "prepare",
        parents=[common],
        help="Validate a manifest and summarize its counts.",
    )
    prepare_parser.set_defaults(func=_prepare)

    split_parser = subparsers.add_parser(
        "split", parents=[common], help="Compute the test set and the folds."
    )
    split_parser.set_defaults(func=_split)

    for name, func, text in (
        (
            "train",
            _train,
            "Train on every fold, evaluate on the test set and aggregate.",
        ),
        ("eval", _eval, "Evaluate the trained runs on the test set and aggregate."),
        ("gradcam", _gradcam, "Write Grad-CAM overlays of test samples."),
    ):
        subparser = subparsers.add_parser(name, parents=[common], help=text)
        subparser.set_defaults(func=func)
        subparser.add_argument(
            "--fold", type=int, default=None, help="Only use this fold (1..n_folds)."
        )

    matrix_parser = subparsers.add_parser(
        "matrix", parents=[common], help="Run and compare every backbone and modality."
    )
    matrix_parser.set_defaults(func=_matrix)

    bench_parser = subparsers.add_parser(
        "bench", parents=[common], help="Time the inference of the models."
    )
    bench_parser.set_defaults(func=_bench)

    synth_parser = subparsers.add_parser(
        "synth", parents=[common], help="Generate a synthetic dataset."
    )
    synth_parser.set_defaults(func=_synth)

    config_parser = subparsers.add_parser(
        "config", help="Actions on the configuration."
    )
    config_subparsers = config_parser.add_subparsers()
    create_parser = config_subparsers.add_parser(
        "create", help="Write the default configuration."
    )
    create_parser.set_defaults(
        func=_config_create,
        config=None,
        seed=None,
        modality=None,
        backbone=None,
        input=None,
        log_file=None,
    )
    create_parser.add_argument(
        "-f",
        "--file",
        default=DEFAULT_CONFIG_NAME,
        help=f"Path of the configuration file. Default: {DEFAULT_CONFIG_NAME}.",
    )
    create_parser.add_argument(
        "--force", action="store_true", help="Overwrite an existing file."
    )

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entrypoint of the command.

    Args:
        argv (Optional[Sequence[str]], optional): arguments, sys.argv if None. Defaults to None.

    Returns:
        int: exit code.
    """
    parser = _create_main_parser()
    args = parser.parse_args(argv)

    # Set loggers
    create_loggers(args.verbose, getattr(args, "log_file", None))

    if not hasattr(args, "func"):
        print("No command specified. Run with -h|--help to see the possible commands.")
        return 0

    logger.info("Environment:\n%s", get_script_infos())
    try:
        config = load_configuration(
            args.config, args.seed, args.modality, args.backbone
        )
        if args.input and args.func is not _convert:
            config.data.manifest = args.input
        return args.func(args, config)
    except (ThermofuseError, OSError, KeyError, ValueError) as exc:
        logger.critical("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

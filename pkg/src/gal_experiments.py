#!/usr/bin/env python
# coding: utf-8

"""
Experiment drivers: feature-subset search, substitute-feature view,
class-balance sweep, volume x imbalance grid and sampling-strategy comparison.

Two evaluation protocols are used. feature_search and sampling_comparison
draw one test split from the whole source and train every row on the
remaining pool, so their rows share a test set (the sampling strategies
only ever touch the training side). balance_sweep and volume_grid build
each cell's subset from the source first and split that subset, so a cell
is scored on samples with its own class mix. Inside a cell the training part
is projected, standardized (the test part reuses its statistics), optionally
rebalanced, trained and evaluated. Failed cells are recorded with an error
message and never abort a sweep.
"""

import time
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gal_batch_processor import ParallelProcessor, get_parallel_processor
from gal_config_manager import get_config
from gal_data import (Dataset, FeatureId, FeatureMask, Label, SplitSpec, all_masks, apply_standardization,
                      derive_seed, project, standardize, train_test_split)
from gal_errors import DatasetError, GallopingError, InsufficientDataError
from gal_metrics import NA, MetricsReport, evaluate, report_header, report_to_row, summarize
from gal_sampling import SamplingKind, SamplingStrategy, apply as apply_sampling
from gal_svm import TrainConfig, train

logger = logging.getLogger('galloping_prediction')

DEFAULT_MAJORITY_COUNTS = (500, 1000, 2000, 4000, 8000)
DEFAULT_SIZES = (2000, 5000, 10000)
DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class SweepSpec:
    """Balance sweep: fixed galloping count against increasing normal counts."""
    fixed_minority: int = 2000
    majority_counts: Tuple[int, ...] = DEFAULT_MAJORITY_COUNTS
    repetitions: int = 5
    seed: int = 0

    def __post_init__(self):
        counts = tuple(int(c) for c in self.majority_counts)
        if self.fixed_minority < 1:
            raise ValueError(f"fixed_minority must be positive, got {self.fixed_minority}")
        if not counts or any(c < 1 for c in counts):
            raise ValueError("majority_counts must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError(f"majority_counts must be strictly increasing, got {list(counts)}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be positive, got {self.repetitions}")
        object.__setattr__(self, 'majority_counts', counts)


@dataclass
class ExperimentResult:
    """
    One output row.

    descriptor holds the experiment-specific key columns in output order;
    report is None when the cell failed, in which case error says why.
    """
    descriptor: Dict[str, Any]
    report: Optional[MetricsReport]
    runtime_seconds: float = 0.0
    error: Optional[str] = None
    repetitions: List['ExperimentResult'] = field(default_factory=list)
    test_digest: Optional[str] = None

    @property
    def f1(self) -> Optional[float]:
        return None if self.report is None else self.report.f1


def dataset_digest(dataset: Dataset) -> str:
    """Short content hash used to check that rows share one test set."""
    digest = hashlib.sha256()
    digest.update(','.join(dataset.columns).encode('utf-8'))
    digest.update(np.ascontiguousarray(dataset.X).tobytes())
    digest.update(np.ascontiguousarray(dataset.y).tobytes())
    return digest.hexdigest()[:16]


def run_cell(train_subset: Dataset, test: Dataset, mask: FeatureMask, train_config: TrainConfig,
             descriptor: Dict[str, Any], strategy: Optional[SamplingStrategy] = None) -> ExperimentResult:
    """Project, standardize on the training subset, rebalance, train and evaluate one cell."""
    start = time.perf_counter()
    try:
        train_projected = standardize(project(train_subset, mask))
        test_projected = apply_standardization(project(test, mask), train_projected.standardization)
        if strategy is not None:
            train_projected = apply_sampling(train_projected, strategy)
        model = train(train_projected, train_config)
        report = evaluate(model, test_projected)
        result = ExperimentResult(descriptor, report, time.perf_counter() - start,
                                  test_digest=dataset_digest(test))
    except GallopingError as e:
        logger.warning(f"Cell {descriptor} failed: {e}")
        return ExperimentResult(descriptor, None, time.perf_counter() - start, error=str(e))

    logger.debug(f"Cell {descriptor}: f1={result.f1} ({result.runtime_seconds:.2f} s)")
    return result


def run_split_cell(subset: Dataset, split: SplitSpec, mask: FeatureMask, train_config: TrainConfig,
                   descriptor: Dict[str, Any]) -> ExperimentResult:
    """Split one cell's own subset, then train and score it with run_cell."""
    try:
        train_part, test_part = train_test_split(subset, split)
    except GallopingError as e:
        logger.warning(f"Cell {descriptor} failed: {e}")
        return ExperimentResult(descriptor, None, 0.0, error=str(e))
    return run_cell(train_part, test_part, mask, train_config, descriptor)


def _run_cells(function, cells: List[Tuple], processor: Optional[ParallelProcessor]) -> List[ExperimentResult]:
    """Run cell tuples (descriptor at position 4) through the processor, keeping input order."""
    processor = processor or get_parallel_processor()
    results = processor.execute_parallel([(function, cell, {}) for cell in cells])
    return [result if result is not None
            else ExperimentResult(cell[4], None, 0.0, error='unexpected failure (see log)')
            for cell, result in zip(cells, results)]


def _summarize_runs(descriptor: Dict[str, Any], runs: List[ExperimentResult]) -> ExperimentResult:
    """Mean row over repetitions; failed repetitions are left out of the mean."""
    reports = [r.report for r in runs if r.report is not None]
    errors = [r.error for r in runs if r.error]
    return ExperimentResult(descriptor=dict(descriptor),
                            report=summarize(reports) if reports else None,
                            runtime_seconds=sum(r.runtime_seconds for r in runs),
                            error=None if reports else errors[0],
                            repetitions=runs,
                            test_digest=next((r.test_digest for r in runs if r.test_digest), None))


def _holdout(source: Dataset, split: SplitSpec) -> Tuple[Dataset, Dataset]:
    pool, test = train_test_split(source, split)
    logger.info(f"Held out {len(test)} test samples; training pool has {len(pool)} "
                f"({pool.class_count(Label.GALLOPING)} galloping, {pool.class_count(Label.NORMAL)} normal)")
    return pool, test


def _cell_split(split: SplitSpec, key: str) -> SplitSpec:
    return SplitSpec(split.test_fraction, derive_seed(split.seed, key), split.stratify)


def _draw_subset(source: Dataset, n_galloping: int, n_normal: int, seed: int, purpose: str) -> Dataset:
    galloping = source.with_label_indices(Label.GALLOPING)
    normal = source.with_label_indices(Label.NORMAL)
    if n_galloping > len(galloping) or n_normal > len(normal):
        raise InsufficientDataError(
            f"Need {n_galloping} galloping and {n_normal} normal samples, source has "
            f"{len(galloping)} and {len(normal)}")
    rng = np.random.default_rng(derive_seed(seed, purpose))
    chosen = np.concatenate([rng.choice(galloping, n_galloping, replace=False),
                             rng.choice(normal, n_normal, replace=False)])
    return source.subset(np.sort(chosen))


def _f1_rank(result: ExperimentResult) -> Tuple[bool, float]:
    return result.f1 is None, -(result.f1 or 0.0)


def feature_search(dataset: Dataset, train_config: TrainConfig, split: SplitSpec,
                   masks: Optional[Sequence[FeatureMask]] = None, max_train: Optional[int] = None,
                   processor: Optional[ParallelProcessor] = None) -> List[ExperimentResult]:
    """
    Train and score one model per feature subset (all 127 by default).

    The training pool is subsampled to max_train samples (search_max_train
    from the configuration) when larger. Rows are sorted by F1 descending,
    undefined or failed last, ties by mask.
    """
    if not dataset.has_both_classes():
        raise DatasetError("Feature search needs both classes")
    masks = list(masks) if masks is not None else all_masks()
    max_train = max_train or get_config('search_max_train', 4000)

    pool, test = _holdout(dataset, split)
    if len(pool) > max_train:
        rng = np.random.default_rng(derive_seed(split.seed, 'search/subsample'))
        pool = pool.subset(np.sort(rng.choice(len(pool), max_train, replace=False)))
        logger.info(f"Training pool subsampled to {max_train} samples for the feature search")

    logger.info(f"Searching {len(masks)} feature subsets")
    cells = [(pool, test, mask, train_config, {'mask': mask.mask, 'features': str(mask)}, None)
             for mask in masks]
    results = _run_cells(run_cell, cells, processor)
    results.sort(key=lambda r: (*_f1_rank(r), r.descriptor['mask']))
    if results and results[0].f1 is not None:
        logger.info(f"Best subset: {results[0].descriptor['features']} (f1={results[0].f1:.4f})")
    return results


SUBSTITUTE_GROUPS: Tuple[Tuple[FeatureMask, Tuple[FeatureId, ...]], ...] = (
    (FeatureMask.from_features((FeatureId.WIND_SPEED, FeatureId.TEMPERATURE)),
     (FeatureId.PRECIPITATION, FeatureId.ICE_THICKNESS, FeatureId.HUMIDITY)),
    (FeatureMask.from_features((FeatureId.TEMPERATURE, FeatureId.PRECIPITATION)),
     (FeatureId.WIND_SPEED, FeatureId.VERTICAL_WIND_SPEED)),
)


def substitute_analysis(results: Sequence[ExperimentResult], base: FeatureMask,
                        candidates: Sequence[FeatureId]) -> List[ExperimentResult]:
    """
    View over feature_search rows: the base subset, the base plus each
    candidate, then the base plus every candidate at once.

    f1_gain is a row's F1 minus the base F1 (NA when either is undefined).
    Subsets missing from results become error rows.
    """
    candidates = [FeatureId(c) for c in candidates]
    if not candidates:
        raise ValueError("substitute_analysis needs at least one candidate feature")
    overlap = [c.column for c in candidates if c in base.features]
    if overlap:
        raise ValueError(f"Candidates already in the base subset: {', '.join(overlap)}")

    variants = [('none', base)]
    variants += [(c.column, FeatureMask(base.mask | 1 << int(c))) for c in candidates]
    if len(candidates) > 1:
        variants.append(('+'.join(c.column for c in candidates),
                         FeatureMask.from_features((*base.features, *candidates))))

    by_mask = {r.descriptor['mask']: r for r in results}
    base_f1 = by_mask[base.mask].f1 if base.mask in by_mask else None
    rows = []
    for added, mask in variants:
        descriptor = {'base': str(base), 'added': added, 'mask': mask.mask, 'features': str(mask)}
        found = by_mask.get(mask.mask)
        if found is None:
            descriptor['f1_gain'] = NA
            rows.append(ExperimentResult(descriptor, None, error=f"subset {mask} was not searched"))
            continue
        descriptor['f1_gain'] = NA if found.f1 is None or base_f1 is None else float(found.f1 - base_f1)
        rows.append(ExperimentResult(descriptor, found.report, found.runtime_seconds, found.error,
                                     test_digest=found.test_digest))
    return rows


def substitute_table(results: Sequence[ExperimentResult]) -> List[ExperimentResult]:
    """substitute_analysis over every group in SUBSTITUTE_GROUPS, concatenated."""
    return [row for base, candidates in SUBSTITUTE_GROUPS
            for row in substitute_analysis(results, base, candidates)]


def balance_sweep(source: Dataset, spec: SweepSpec, train_config: TrainConfig, split: SplitSpec,
                  mask: FeatureMask = FeatureMask.WEATHER_TRIO,
                  processor: Optional[ParallelProcessor] = None) -> List[ExperimentResult]:
    """
    Fixed galloping count against each normal count, averaged over repetitions.

    Every repetition draws fixed_minority galloping and count normal samples
    from the source and splits that subset with its own derived seed.
    Returns one summary row per majority count (ascending); the
    per-repetition rows are kept on each summary.

    Raises:
        InsufficientDataError: If the source cannot supply fixed_minority
            galloping or max(majority_counts) normal samples
    """
    galloping, normal = source.class_counts
    if galloping < spec.fixed_minority or normal < spec.majority_counts[-1]:
        raise InsufficientDataError(
            f"Balance sweep needs {spec.fixed_minority} galloping and {spec.majority_counts[-1]} normal "
            f"samples; the source has {galloping} and {normal}")

    cells = []
    for count in spec.majority_counts:
        for repetition in range(spec.repetitions):
            key = f"balance/{count}/{repetition}"
            descriptor = {'galloping_count': spec.fixed_minority, 'normal_count': count}
            subset = _draw_subset(source, spec.fixed_minority, count, spec.seed, key)
            cells.append((subset, _cell_split(split, key), mask, train_config, descriptor))

    logger.info(f"Balance sweep over {len(spec.majority_counts)} normal counts x {spec.repetitions} repetitions")
    flat = _run_cells(run_split_cell, cells, processor)

    return [_summarize_runs({'galloping_count': spec.fixed_minority, 'normal_count': count},
                            flat[position * spec.repetitions:(position + 1) * spec.repetitions])
            for position, count in enumerate(spec.majority_counts)]


def volume_grid(source: Dataset, sizes: Sequence[int], ratios: Sequence[float], train_config: TrainConfig,
                split: SplitSpec, mask: FeatureMask = FeatureMask.WEATHER_TRIO,
                processor: Optional[ParallelProcessor] = None) -> List[ExperimentResult]:
    """
    Full factorial of subset size x galloping ratio.

    A cell of size n and ratio r draws round(r * n) galloping and the rest
    normal samples from the source, then splits them into its own train and
    test parts. Cells the source cannot supply are marked as errors.
    """
    sizes = [int(s) for s in sizes]
    ratios = [float(r) for r in ratios]
    if not sizes or not ratios:
        raise ValueError("volume_grid needs at least one size and one ratio")
    if any(s < 2 for s in sizes) or any(not 0.0 < r < 1.0 for r in ratios):
        raise ValueError("Sizes must be at least 2 and ratios in (0, 1)")

    cells = []
    failed: Dict[int, ExperimentResult] = {}
    for size in sizes:
        for ratio in ratios:
            key = f"grid/{size}/{ratio!r}"
            n_galloping = int(np.floor(ratio * size + 0.5))
            descriptor = {'size': size, 'galloping_ratio': ratio,
                          'galloping_count': n_galloping, 'normal_count': size - n_galloping}
            try:
                if n_galloping < 1 or n_galloping > size - 1:
                    raise InsufficientDataError(f"Ratio {ratio} of {size} leaves a class empty")
                subset = _draw_subset(source, n_galloping, size - n_galloping, split.seed, key)
            except InsufficientDataError as e:
                logger.warning(f"Cell {descriptor} skipped: {e}")
                failed[len(cells) + len(failed)] = ExperimentResult(descriptor, None, 0.0, error=str(e))
                continue
            cells.append((subset, _cell_split(split, key), mask, train_config, descriptor))

    logger.info(f"Volume grid: {len(sizes)} sizes x {len(ratios)} ratios ({len(failed)} cells skipped)")
    computed = iter(_run_cells(run_split_cell, cells, processor) if cells else [])
    return [failed[position] if position in failed else next(computed)
            for position in range(len(sizes) * len(ratios))]


def default_strategies(seed: int, k_neighbors: Optional[int] = None) -> List[SamplingStrategy]:
    k_neighbors = k_neighbors or get_config('smote_k', 5)
    return [SamplingStrategy(SamplingKind.NONE, k_neighbors, 1.0, derive_seed(seed, 'sampling/none')),
            SamplingStrategy(SamplingKind.UNDER, k_neighbors, 1.0, derive_seed(seed, 'sampling/under')),
            SamplingStrategy(SamplingKind.SMOTE, k_neighbors, 1.0, derive_seed(seed, 'sampling/smote'))]


def sampling_comparison(source: Dataset, strategies: Sequence[SamplingStrategy], train_config: TrainConfig,
                        split: SplitSpec, mask: FeatureMask = FeatureMask.WEATHER_TRIO, repetitions: int = 1,
                        processor: Optional[ParallelProcessor] = None) -> List[ExperimentResult]:
    """
    One row per strategy: rebalance the training pool only, score on the untouched test split.

    With repetitions > 1 every repetition draws its own test split and
    strategy seeds; repetition 0 uses split and the strategies as given, so
    it equals the single-split result. Each returned row is then the mean
    over repetitions, with the per-repetition rows attached.

    Raises:
        DatasetError: If galloping is not the minority class of the source
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be positive, got {repetitions}")
    galloping, normal = source.class_counts
    if not 0 < galloping < normal:
        raise DatasetError(f"Sampling comparison needs an imbalanced source with galloping as minority; "
                           f"got {galloping} galloping and {normal} normal")

    cells = []
    for repetition in range(repetitions):
        key = f"sampling/{repetition}"
        pool, test = _holdout(source, split if repetition == 0 else _cell_split(split, key))
        for strategy in strategies:
            if repetition > 0:
                strategy = strategy.with_seed(derive_seed(strategy.seed, key))
            descriptor = {'strategy': strategy.name, 'k_neighbors': strategy.k_neighbors,
                          'target_ratio': strategy.target_ratio}
            cells.append((pool, test, mask, train_config, descriptor, strategy))
    flat = _run_cells(run_cell, cells, processor)
    if repetitions == 1:
        return flat

    count = len(strategies)
    return [_summarize_runs(flat[position].descriptor, flat[position::count]) for position in range(count)]


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(results: Sequence[ExperimentResult], path: str, timings: bool = False):
    """
    Write results as CSV: descriptor columns, repetition (when present),
    tp,fp,fn,tn,precision,recall,f1, runtime_seconds (only with timings), error.
    """
    if not results:
        raise ValueError("No results to write")
    descriptor_columns = list(results[0].descriptor)
    with_repetitions = any(r.repetitions for r in results)
    columns = descriptor_columns + (['repetition'] if with_repetitions else []) + report_header() \
        + (['runtime_seconds'] if timings else []) + ['error']

    def row(result: ExperimentResult, repetition: Optional[str]) -> List[str]:
        values = [_format_value(result.descriptor[c]) for c in descriptor_columns]
        if with_repetitions:
            values.append(repetition)
        values += report_to_row(result.report)
        if timings:
            values.append(f"{result.runtime_seconds:.3f}")
        values.append(result.error or '')
        return values

    rows = []
    for result in results:
        for position, repetition in enumerate(result.repetitions):
            rows.append(row(repetition, str(position)))
        rows.append(row(result, 'mean' if result.repetitions else ''))

    try:
        pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator='\n')
    except OSError as e:
        raise GallopingError(f"Cannot write results to {path}: {e}") from e
    logger.info(f"Wrote {len(rows)} rows to {path}")

#!/usr/bin/env python
# coding: utf-8

"""
Gaussian-kernel support vector machine trained with SMO.

The dual problem

    max  sum(alpha) - 1/2 alpha^T Q alpha,   Q_ij = y_i y_j k(x_i, x_j)
    s.t. 0 <= alpha_i <= C,  sum(alpha_i y_i) = 0

is solved two variables at a time, choosing the maximal violating pair of
the dual-threshold formulation. Decision value: f(x) = sum(coef_i k(sv_i, x)) + b
with coef_i = alpha_i y_i; a decision value of exactly 0 predicts galloping.
"""

import math
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from gal_batch_processor import get_batch_processor
from gal_config_manager import get_config
from gal_data import (Dataset, FeatureMask, Label, SplitSpec, Standardization,
                      derive_seed, train_test_split)
from gal_errors import ConvergenceError, DatasetError, ModelFormatError
from gal_log_manager import time_execution

logger = logging.getLogger('galloping_prediction')

MODEL_FORMAT = 'galloping-svm-model'
MODEL_VERSION = 1
TAU = 1e-12
ALPHA_ZERO_FRACTION = 1e-8

GRID_C = (0.1, 1.0, 10.0, 100.0)
GRID_GAMMA = (0.01, 0.1, None, 1.0)  # None stands for 1/d


@dataclass(frozen=True)
class KernelParams:
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def default_for(cls, dimension: int) -> 'KernelParams':
        return cls(1.0 / dimension)


@dataclass(frozen=True)
class TrainConfig:
    """
    SMO training parameters.

    kernel=None selects gamma = 1/d for the d features of the training set.
    max_passes bounds the full-gradient re-verifications made once the
    working-pair gap first closes; seed drives the inner validation split of
    tune_hyperparameters (SMO itself has no randomness).
    """
    c: float = 10.0
    kernel: Optional[KernelParams] = None
    kkt_tolerance: float = 1e-3
    max_passes: int = 10
    max_iterations: int = 1000000
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"C must be positive, got {self.c}")
        if not self.kkt_tolerance > 0:
            raise ValueError(f"kkt_tolerance must be positive, got {self.kkt_tolerance}")
        if self.max_passes < 1 or self.max_iterations < 1:
            raise ValueError("max_passes and max_iterations must be positive")

    @classmethod
    def from_config(cls, **overrides) -> 'TrainConfig':
        """TrainConfig seeded from the configuration parameters, then overridden."""
        values = {
            'c': get_config('default_c', 10.0),
            'kkt_tolerance': get_config('kkt_tolerance', 1e-3),
            'max_passes': get_config('max_passes', 10),
            'max_iterations': get_config('max_iterations', 1000000),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def kernel_for(self, dimension: int) -> KernelParams:
        return self.kernel if self.kernel is not None else KernelParams.default_for(dimension)


@dataclass(frozen=True)
class TrainingSummary:
    """Solver state kept alongside a freshly trained model (not persisted)."""
    alpha: np.ndarray
    iterations: int
    refreshes: int
    objective: float


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    kernel: KernelParams
    features: FeatureMask
    c: float
    standardization: Optional[Standardization] = None
    summary: Optional[TrainingSummary] = field(default=None, repr=False)

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.support_vectors, dtype=float))
        coefficients = np.asarray(self.dual_coefficients, dtype=float).ravel()
        if len(coefficients) < 1:
            raise ValueError("A model needs at least one support vector")
        if vectors.shape != (len(coefficients), len(self.features)):
            raise ValueError(f"Support vectors have shape {vectors.shape}, expected "
                             f"({len(coefficients)}, {len(self.features)})")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"C must be positive, got {self.c}")
        if np.any(np.abs(coefficients) > self.c * (1 + 1e-9)):
            raise ValueError(f"A dual coefficient exceeds C = {self.c}")
        if not math.isfinite(self.bias):
            raise ValueError("Bias must be finite")
        if self.standardization is not None and self.standardization.columns != self.features.columns:
            raise ValueError("Standardization columns differ from the model features")
        object.__setattr__(self, 'support_vectors', vectors)
        object.__setattr__(self, 'dual_coefficients', coefficients)
        object.__setattr__(self, 'bias', float(self.bias))

    @property
    def n_support(self) -> int:
        return len(self.dual_coefficients)

    def negated(self) -> 'SvmModel':
        return SvmModel(self.support_vectors, -self.dual_coefficients, -self.bias, self.kernel,
                        self.features, self.c, self.standardization)


def gaussian_kernel(x: Sequence[float], y: Sequence[float], params: KernelParams) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"Dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    difference = x - y
    return float(np.exp(-params.gamma * np.dot(difference, difference)))


def gaussian_kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel block K[i, j] = k(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"Dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    block = cdist(A, B, 'sqeuclidean')
    block *= -params.gamma
    return np.exp(block, out=block)


class FullKernel:
    """Precomputed Gram matrix."""

    def __init__(self, X: np.ndarray, params: KernelParams):
        self.matrix = gaussian_kernel_matrix(X, X, params)

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]


class KernelRowCache:
    """Least-recently-used cache of Gram matrix rows."""

    def __init__(self, X: np.ndarray, params: KernelParams, capacity: int):
        self.X = X
        self.params = params
        self.capacity = max(2, int(capacity))
        self._rows: 'OrderedDict[int, np.ndarray]' = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        computed = gaussian_kernel_matrix(self.X[i:i + 1], self.X, self.params)[0]
        self._rows[i] = computed
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return computed


def make_kernel(X: np.ndarray, params: KernelParams):
    full_gram_limit = get_config('full_gram_limit', 8000)
    if len(X) <= full_gram_limit:
        return FullKernel(X, params)
    capacity = get_config('kernel_cache_rows', 1024)
    logger.debug(f"{len(X)} training points exceed the full Gram limit ({full_gram_limit}); "
                 f"using a {capacity}-row kernel cache")
    return KernelRowCache(X, params, capacity)


class SmoSolver:
    """
    Sequential minimal optimization over the SVM dual.

    Keeps the gradient G = Q alpha - 1 and, per iteration, optimizes the pair
    (i, j) with i = argmax of F = -y G over I_up and j = argmin of F over
    I_low, stopping when F[i] - F[j] <= kkt_tolerance.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, params: KernelParams, config: TrainConfig):
        self.X = X
        self.y = y.astype(float)
        self.params = params
        self.config = config
        self.C = config.c
        self.n = len(X)
        self.kernel = make_kernel(X, params)
        self.alpha = np.zeros(self.n)
        self.G = -np.ones(self.n)
        self.iterations = 0
        self.refreshes = 0

    def _q_row(self, i: int) -> np.ndarray:
        return self.y[i] * self.y * self.kernel.row(i)

    def _violating_pair(self) -> Tuple[int, int, float]:
        y, alpha, C = self.y, self.alpha, self.C
        F = -y * self.G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = int(up_idx[np.argmax(F[up_idx])])
        j = int(low_idx[np.argmin(F[low_idx])])
        return i, j, float(F[i] - F[j])

    def _update_pair(self, i: int, j: int):
        alpha, G, C = self.alpha, self.G, self.C
        Q_i = self._q_row(i)
        Q_j = self._q_row(j)
        old_i, old_j = alpha[i], alpha[j]

        if self.y[i] != self.y[j]:
            quad = Q_i[i] + Q_j[j] + 2 * Q_i[j]
            delta = (-G[i] - G[j]) / (quad if quad > 0 else TAU)
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = Q_i[i] + Q_j[j] - 2 * Q_i[j]
            delta = (G[i] - G[j]) / (quad if quad > 0 else TAU)
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        G += Q_i * (alpha[i] - old_i) + Q_j * (alpha[j] - old_j)

    def _refresh_gradient(self):
        """Recompute G from the support set, removing accumulated rounding."""
        support = np.flatnonzero(self.alpha > 0)
        weights = self.alpha[support] * self.y[support]
        if isinstance(self.kernel, FullKernel):
            margins = self.kernel.matrix[:, support] @ weights
        else:
            vectors = self.X[support]
            margins = get_batch_processor().map_batches(
                self.X, lambda block, start: gaussian_kernel_matrix(block, vectors, self.params) @ weights)
        self.G = self.y * margins - 1.0

    def bias(self) -> float:
        F = -self.y * self.G
        free = (self.alpha > 0) & (self.alpha < self.C)
        if free.any():
            return float(F[free].mean())
        i, j, _ = self._violating_pair()
        return float((F[i] + F[j]) / 2.0)

    def solve(self):
        """Run SMO to KKT satisfaction; raises ConvergenceError on the iteration or pass caps."""
        tolerance = self.config.kkt_tolerance
        while True:
            i, j, gap = self._violating_pair()
            if gap <= tolerance:
                self._refresh_gradient()
                i, j, gap = self._violating_pair()
                if gap <= tolerance:
                    return
                self.refreshes += 1
                logger.debug(f"Gap re-opened to {gap:.3g} after gradient refresh {self.refreshes}")
                if self.refreshes > self.config.max_passes:
                    raise ConvergenceError(
                        f"KKT gap {gap:.3g} still above {tolerance} after "
                        f"{self.config.max_passes} gradient refreshes")
            if self.iterations >= self.config.max_iterations:
                raise ConvergenceError(
                    f"Reached {self.config.max_iterations} SMO iterations with KKT gap {gap:.3g}")
            self._update_pair(i, j)
            self.iterations += 1


def dual_objective(alpha: np.ndarray, X: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    """sum(alpha) - 1/2 alpha^T Q alpha."""
    weights = np.asarray(alpha, dtype=float) * np.asarray(y, dtype=float)
    K = gaussian_kernel_matrix(X, X, params)
    return float(np.sum(alpha) - 0.5 * weights @ K @ weights)


def _model_from_solver(solver: SmoSolver, dataset: Dataset) -> SvmModel:
    alpha = solver.alpha
    keep = np.flatnonzero(alpha >= ALPHA_ZERO_FRACTION * solver.C)
    if len(keep) == 0:
        raise ConvergenceError("Solver finished without any support vector")
    objective = float(np.sum(alpha) - 0.5 * np.dot(alpha, solver.G + 1.0))
    summary = TrainingSummary(alpha=alpha.copy(), iterations=solver.iterations,
                              refreshes=solver.refreshes, objective=objective)
    return SvmModel(support_vectors=solver.X[keep],
                    dual_coefficients=alpha[keep] * solver.y[keep],
                    bias=solver.bias(),
                    kernel=solver.params,
                    features=dataset.mask,
                    c=solver.C,
                    standardization=dataset.standardization,
                    summary=summary)


@time_execution('svm_train')
def train(dataset: Dataset, config: TrainConfig = TrainConfig()) -> SvmModel:
    """
    Train a Gaussian-kernel SVM on an already projected (and standardized) dataset.

    Returns:
        SvmModel whose dual variables meet the KKT conditions within
        config.kkt_tolerance; model.summary holds the full alpha vector

    Raises:
        DatasetError: If the dataset does not contain both classes
        ConvergenceError: On the iteration or pass caps; carries the model
            reached and its KKT violation count
    """
    if not dataset.has_both_classes():
        galloping, normal = dataset.class_counts
        raise DatasetError(f"Training needs both classes, got {galloping} galloping and {normal} normal")

    X = dataset.X
    y = dataset.y
    params = config.kernel_for(X.shape[1])
    solver = SmoSolver(X, y, params, config)
    logger.debug(f"Training on {len(X)} samples x {X.shape[1]} features (C={config.c}, gamma={params.gamma:.4g})")

    try:
        solver.solve()
    except ConvergenceError as e:
        model = _model_from_solver(solver, dataset)
        violations = kkt_violations(model, X, y, solver.alpha, config.kkt_tolerance)
        logger.warning(f"{e} ({violations} KKT violations)")
        raise ConvergenceError(str(e), model=model, violations=violations) from None

    model = _model_from_solver(solver, dataset)
    logger.debug(f"SMO converged after {solver.iterations} iterations and {solver.refreshes} refreshes: "
                 f"{model.n_support} support vectors, bias {model.bias:.6g}")
    return model


def decision_values(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """Decision values for every row of X, evaluated in row blocks."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(f"Dimension mismatch: model has {model.support_vectors.shape[1]} features, "
                         f"input has {X.shape[1]}")

    def block_values(block: np.ndarray, start: int) -> np.ndarray:
        return gaussian_kernel_matrix(block, model.support_vectors, model.kernel) @ model.dual_coefficients \
            + model.bias

    if len(X) == 0:
        return np.empty(0)
    return get_batch_processor().map_batches(X, block_values)


def decision_value(model: SvmModel, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(decision_values(model, x.reshape(1, -1))[0])


def label_from_decision(value: float) -> Label:
    return Label.GALLOPING if value >= 0 else Label.NORMAL


def predict(model: SvmModel, x: Sequence[float]) -> Label:
    return label_from_decision(decision_value(model, x))


def predict_array(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return np.where(decision_values(model, X) >= 0, int(Label.GALLOPING), int(Label.NORMAL))


def kkt_violations(model: SvmModel, X: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                   tolerance: float) -> int:
    """
    Count training points violating the KKT conditions at tolerance.

    alpha = 0 requires y f(x) >= 1 - tol, 0 < alpha < C requires
    |y f(x) - 1| <= tol, alpha = C requires y f(x) <= 1 + tol.
    """
    margins = np.asarray(y, dtype=float) * decision_values(model, X)
    alpha = np.asarray(alpha, dtype=float)
    threshold = ALPHA_ZERO_FRACTION * model.c
    at_lower = alpha < threshold
    at_upper = alpha > model.c - threshold
    free = ~at_lower & ~at_upper

    violated = (at_lower & (margins < 1 - tolerance)) \
        | (free & (np.abs(margins - 1) > tolerance)) \
        | (at_upper & (margins > 1 + tolerance))
    return int(violated.sum())


def tune_hyperparameters(dataset: Dataset, config: TrainConfig = TrainConfig()) \
        -> Tuple[TrainConfig, List[Tuple[float, float, Optional[float]]]]:
    """
    Grid search over C x gamma, scored by F1 on an inner 25% validation split.

    Returns:
        (best TrainConfig, [(c, gamma, f1), ...] in grid order); undefined or
        failed F1 ranks last, ties keep the earlier grid point
    """
    from gal_metrics import is_better_f1, metrics_from_predictions

    inner_train, validation = train_test_split(
        dataset, SplitSpec(0.25, derive_seed(config.seed, 'tune'), stratify=True))
    dimension = len(dataset.columns)

    scores: List[Tuple[float, float, Optional[float]]] = []
    best_config, best_f1 = None, None
    for c in GRID_C:
        for gamma in GRID_GAMMA:
            candidate = TrainConfig(c=c, kernel=KernelParams(gamma or 1.0 / dimension),
                                    kkt_tolerance=config.kkt_tolerance, max_passes=config.max_passes,
                                    max_iterations=config.max_iterations, seed=config.seed)
            try:
                model = train(inner_train, candidate)
                score = metrics_from_predictions(validation.y, predict_array(model, validation.X)).f1
            except (ConvergenceError, DatasetError) as e:
                logger.warning(f"Grid point C={c}, gamma={candidate.kernel.gamma:.4g} failed: {e}")
                score = None
            scores.append((c, candidate.kernel.gamma, score))
            if best_config is None or is_better_f1(score, best_f1):
                best_config, best_f1 = candidate, score

    logger.info(f"Selected C={best_config.c}, gamma={best_config.kernel.gamma:.4g} "
                f"(validation F1 {best_f1 if best_f1 is not None else 'NA'})")
    return best_config, scores


def save_model(model: SvmModel, path: str):
    """Write the model as text: version line, parameters, then one line per support vector."""
    lines = [f"{MODEL_FORMAT} {MODEL_VERSION}",
             f"gamma {model.kernel.gamma!r}",
             f"c {model.c!r}",
             f"bias {model.bias!r}",
             f"features {','.join(model.features.columns)}"]
    if model.standardization is None:
        lines.append("standardization none")
    else:
        pairs = ' '.join(f"{m!r}:{s!r}" for m, s in zip(model.standardization.means,
                                                         model.standardization.stds))
        lines.append(f"standardization {pairs}")
    lines.append(f"support_vectors {model.n_support}")
    for coefficient, vector in zip(model.dual_coefficients, model.support_vectors):
        lines.append(' '.join(repr(float(v)) for v in (coefficient, *vector)))

    try:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write('\n'.join(lines) + '\n')
    except OSError as e:
        raise ModelFormatError(f"Cannot write model to {path}: {e}") from e
    logger.debug(f"Saved model with {model.n_support} support vectors to {path}")


def _field(lines: List[str], position: int, name: str) -> str:
    if position >= len(lines):
        raise ModelFormatError(f"Model file truncated: missing '{name}' (line {position + 1})")
    key, _, value = lines[position].partition(' ')
    if key != name:
        raise ModelFormatError(f"Expected '{name}' on line {position + 1}, found '{key}'")
    return value.strip()


def _floats(text: str, line_number: int) -> List[float]:
    try:
        values = [float(token) for token in text.split()]
    except ValueError:
        raise ModelFormatError(f"Non-numeric value on line {line_number}") from None
    if not all(math.isfinite(v) for v in values):
        raise ModelFormatError(f"Non-finite value on line {line_number}")
    return values


def _scalar(lines: List[str], position: int, name: str) -> float:
    values = _floats(_field(lines, position, name), position + 1)
    if len(values) != 1:
        raise ModelFormatError(f"Expected one value for '{name}' on line {position + 1}")
    return values[0]


def load_model(path: str) -> SvmModel:
    """
    Read a model written by save_model.

    Raises:
        ModelFormatError: Unreadable file, wrong format or version, truncated
            content, or a violated model invariant (e.g. gamma <= 0)
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ModelFormatError(f"Cannot read model file {path}: {e}") from e

    if not lines or lines[0].split()[:1] != [MODEL_FORMAT]:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    version = lines[0].split()[1:2]
    if version != [str(MODEL_VERSION)]:
        raise ModelFormatError(f"Unsupported model version {' '.join(version) or '(none)'}; "
                               f"expected {MODEL_VERSION}")

    gamma = _scalar(lines, 1, 'gamma')
    c = _scalar(lines, 2, 'c')
    bias = _scalar(lines, 3, 'bias')
    try:
        features = FeatureMask.from_names(_field(lines, 4, 'features').split(','))
    except ValueError as e:
        raise ModelFormatError(f"Invalid feature list on line 5: {e}") from e

    standardization_text = _field(lines, 5, 'standardization')
    try:
        standardization = None
        if standardization_text != 'none':
            pairs = [pair.split(':') for pair in standardization_text.split()]
            if any(len(pair) != 2 for pair in pairs):
                raise ValueError("expected mean:std pairs")
            standardization = Standardization(features.columns,
                                              tuple(float(m) for m, _ in pairs),
                                              tuple(float(s) for _, s in pairs))
    except ValueError as e:
        raise ModelFormatError(f"Invalid standardization on line 6: {e}") from e

    try:
        count = int(_field(lines, 6, 'support_vectors'))
    except ValueError:
        raise ModelFormatError("Invalid support vector count on line 7") from None
    rows = [line for line in lines[7:] if line.strip()]
    if len(rows) != count:
        raise ModelFormatError(f"Model file declares {count} support vectors but holds {len(rows)}")

    values = [_floats(row, 8 + position) for position, row in enumerate(rows)]
    if any(len(v) != len(features) + 1 for v in values):
        raise ModelFormatError(f"Support vector lines must hold 1 + {len(features)} values")

    matrix = np.array(values, dtype=float).reshape(count, len(features) + 1)
    try:
        model = SvmModel(support_vectors=matrix[:, 1:], dual_coefficients=matrix[:, 0], bias=bias,
                         kernel=KernelParams(gamma), features=features, c=c,
                         standardization=standardization)
    except ValueError as e:
        raise ModelFormatError(f"Invalid model in {path}: {e}") from e

    imbalance = abs(float(model.dual_coefficients.sum()))
    if imbalance > 1e-6 * max(1.0, model.c):
        raise ModelFormatError(f"Dual coefficients sum to {imbalance:.3g}, expected 0")
    logger.debug(f"Loaded model with {model.n_support} support vectors from {path}")
    return model

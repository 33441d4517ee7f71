"""Pattern search over label sequences and closed-loop forecasting.

The forecast for the next cycle is the elementwise mean of the cycle
blocks that historically followed the current trailing label pattern.
On a search miss the window shrinks by one label at a time; the horizon
is covered by feeding each predicted block back into the history.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import _best_k, kmeans, optimum_k, silhouette
from .core import CycleMatrix, TimeSeries, denormalize, normalize, reshape_to_cycles

__all__ = [
    "PsfConfig",
    "PsfResult",
    "find_pattern_matches",
    "predict_next_cycle",
    "psf_predict",
    "optimum_w",
    "psf",
    "rmse",
]

logger = logging.getLogger(__name__)

DEFAULT_K_GRID = tuple(range(2, 11))
DEFAULT_W_GRID = tuple(range(1, 11))


@dataclass(frozen=True)
class PsfConfig:
    """Search grids and run parameters for :func:`psf`.

    `n_ahead` counts future *values*, not cycles; a horizon that is not a
    multiple of the cycle is covered by forecasting whole cycles and
    truncating the tail.
    """

    n_ahead: int
    k_grid: tuple = DEFAULT_K_GRID
    w_grid: tuple = DEFAULT_W_GRID
    cycle: int = 24
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "k_grid", tuple(sorted(set(int(k) for k in self.k_grid))))
        object.__setattr__(self, "w_grid", tuple(sorted(set(int(w) for w in self.w_grid))))
        if not self.k_grid or not self.w_grid:
            raise ValueError("k and w grids must be non-empty")
        if min(self.k_grid) < 1 or min(self.w_grid) < 1:
            raise ValueError("grid values must be positive")
        if self.n_ahead < 1:
            raise ValueError("n_ahead must be at least 1")
        if self.cycle < 1:
            raise ValueError("cycle must be a positive integer")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True)
class PsfResult:
    """Forecast plus the cluster count and window size that produced it."""

    predictions: np.ndarray = field(repr=False)
    k: int
    w: int
    diagnostics: dict = field(default_factory=dict, repr=False)


def find_pattern_matches(labels, window) -> np.ndarray:
    """Positions of the rows that follow each occurrence of a label pattern.

    Scans `labels` for every occurrence of `window`; for a match ending at
    row j the successor position j+1 is reported.  A match ending at the
    final row has no successor and is dropped.

    Returns an int array of successor positions (possibly empty).
    """
    labels = np.asarray(labels)
    window = np.asarray(window)
    m = labels.size
    w = window.size
    if w < 1 or w > m - 1:
        raise ValueError("window length must be in [1, len(labels) - 1]")
    views = np.lib.stride_tricks.sliding_window_view(labels, w)
    ends = np.flatnonzero((views == window).all(axis=1)) + (w - 1)
    return ends[ends < m - 1] + 1


def predict_next_cycle(matrix: CycleMatrix, labels, w: int) -> np.ndarray:
    """Forecast the next cycle block by averaging historical successors.

    The trailing `w` labels form the search pattern.  If the pattern never
    occurs with a successor, the window shrinks one label at a time down
    to 1; if even the single trailing label has no successor elsewhere,
    the mean of all rows is returned as the least-informative fallback.
    """
    labels = np.asarray(labels)
    if w < 1:
        raise ValueError("window size must be at least 1")
    if labels.size != matrix.n_cycles:
        raise ValueError("labels and matrix disagree on cycle count")
    for width in range(min(w, labels.size - 1), 0, -1):
        successors = find_pattern_matches(labels, labels[-width:])
        if successors.size:
            return matrix.rows[successors].mean(axis=0)
    return matrix.rows.mean(axis=0)


def rmse(predicted, actual) -> float:
    """Root mean square error between two equal-length sequences."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError("length mismatch between predicted and actual")
    if predicted.size == 0:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def psf_predict(
    series: TimeSeries, k: int, w: int, n_ahead: int, seed: int = 0
) -> np.ndarray:
    """Forecast `n_ahead` values with fixed cluster count and window size.

    The series is scaled to [0, 1], reshaped into cycle blocks and
    labeled by k-means.  Whole cycles are then forecast in a closed loop:
    each predicted block is appended to the history and labeled with its
    nearest centroid before the next round.  The concatenated forecast is
    truncated to `n_ahead` values and mapped back to the original scale.
    """
    if n_ahead < 1:
        raise ValueError("n_ahead must be at least 1")
    scaled, params = normalize(series)
    matrix = reshape_to_cycles(scaled)
    clustering = kmeans(matrix, k, seed)

    rows = matrix.rows
    labels = clustering.labels
    predicted_rows = []
    for _ in range(math.ceil(n_ahead / series.cycle)):
        block = predict_next_cycle(CycleMatrix(rows, series.cycle), labels, w)
        predicted_rows.append(block)
        rows = np.vstack([rows, block])
        nearest = ((clustering.centroids - block) ** 2).sum(axis=1).argmin()
        labels = np.append(labels, nearest)
    flat = np.concatenate(predicted_rows)[:n_ahead]
    return denormalize(flat, params)


def optimum_w(
    series: TimeSeries, k: int, w_grid, n_ahead: int, seed: int = 0, threads: int = 1
) -> int:
    """Pick the window size whose holdout forecast error is smallest.

    The last whole-cycle block covering `n_ahead` values is withheld; every
    feasible window size forecasts it from the remainder and is scored by
    RMSE on the original scale.  Equal errors prefer the largest window.
    """
    w, _ = _best_w(series, k, w_grid, n_ahead, seed, threads)
    return w


def _holdout_split(series: TimeSeries, n_ahead: int):
    cycle = series.cycle
    vals = series.values
    usable = vals.size - vals.size % cycle
    val_len = math.ceil(n_ahead / cycle) * cycle
    train_len = usable - val_len
    if train_len < 2 * cycle:
        raise ValueError("insufficient data: holdout split leaves under two cycles")
    return (
        TimeSeries(vals[vals.size - usable : vals.size - val_len], cycle),
        vals[vals.size - val_len :],
    )


def _best_w(series: TimeSeries, k: int, w_grid, n_ahead: int, seed: int, threads: int):
    train, validation = _holdout_split(series, n_ahead)
    max_w = len(train) // series.cycle - 1
    feasible, skipped = [], []
    for w in sorted(set(int(w) for w in w_grid)):
        (feasible if 1 <= w <= max_w else skipped).append(w)
    if skipped:
        warnings.warn(
            f"skipping infeasible window sizes {skipped} (need 1 <= w <= {max_w})",
            stacklevel=3,
        )
    if not feasible:
        raise ValueError("no feasible window size in grid")

    def score(w: int) -> float:
        preds = psf_predict(train, k, w, len(validation), seed)
        return rmse(preds, validation)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = list(pool.map(score, feasible))
    else:
        errors = [score(w) for w in feasible]

    best_err = min(errors)
    best_w = max(w for w, e in zip(feasible, errors) if e == best_err)
    return best_w, dict(zip(feasible, errors))


def psf(series, config: PsfConfig) -> PsfResult:
    """Run the full pipeline: select k and w, then forecast.

    Parameters
    ----------
    series : TimeSeries or array_like
        Training data.  A plain sequence is wrapped with `config.cycle`;
        a TimeSeries must agree with the config on the cycle length.
    config : PsfConfig

    A singleton k or w grid pins that parameter and skips its search.
    Selection order is sequential: the cluster count is chosen on the
    full training matrix, then reused while scoring window sizes.
    """
    if isinstance(series, TimeSeries):
        if series.cycle != config.cycle:
            raise ValueError("series and config disagree on cycle length")
    else:
        series = TimeSeries(series, config.cycle)

    dropped = len(series) % config.cycle
    if dropped:
        series = TimeSeries(reshape_to_cycles(series).rows.reshape(-1), config.cycle)

    diagnostics = {"seed": config.seed, "dropped_values": dropped}

    if len(config.k_grid) == 1:
        k = config.k_grid[0]
        diagnostics["searched_k"] = False
        logger.info("k fixed at %d; skipping cluster-count search", k)
    else:
        scaled, _ = normalize(series)
        matrix = reshape_to_cycles(scaled)
        k, _, scores = _best_k(matrix, config.k_grid, config.seed, config.threads)
        diagnostics["searched_k"] = True
        diagnostics["silhouette_by_k"] = scores
        logger.info("selected k=%d by silhouette", k)

    if len(config.w_grid) == 1:
        w = config.w_grid[0]
        diagnostics["searched_w"] = False
        logger.info("w fixed at %d; skipping window-size search", w)
    else:
        w, errors = _best_w(
            series, k, config.w_grid, config.n_ahead, config.seed, config.threads
        )
        diagnostics["searched_w"] = True
        diagnostics["holdout_rmse_by_w"] = errors
        logger.info("selected w=%d by holdout RMSE", w)

    predictions = psf_predict(series, k, w, config.n_ahead, config.seed)
    return PsfResult(predictions=predictions, k=k, w=w, diagnostics=diagnostics)

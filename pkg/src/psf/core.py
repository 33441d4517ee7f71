"""Domain types, unity-based scaling and cycle reshaping.

Everything here is a pure function of its inputs; no module state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeSeries",
    "ScalingParams",
    "CycleMatrix",
    "normalize",
    "denormalize",
    "reshape_to_cycles",
]


@dataclass(frozen=True)
class TimeSeries:
    """A univariate series together with its seasonal cycle length.

    Parameters
    ----------
    values : array_like
        Ordered, finite observations.
    cycle : int
        Number of consecutive values forming one seasonal block
        (e.g. 24 hours per day, 12 months per year).
    """

    values: np.ndarray
    cycle: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            vals = vals.reshape(-1)
        if vals.size == 0:
            raise ValueError("empty input")
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise ValueError(f"non-finite value at index {bad[0]}")
        if self.cycle < 1:
            raise ValueError("cycle must be a positive integer")
        if vals.size < 2 * self.cycle:
            raise ValueError(
                "insufficient data: need at least two full cycles "
                f"({2 * self.cycle} values), got {vals.size}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cycle", int(self.cycle))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ScalingParams:
    """Min/max of the training values, recorded by :func:`normalize`."""

    min: float
    max: float

    def __post_init__(self):
        if self.min > self.max:
            raise ValueError("min must not exceed max")

    @property
    def span(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class CycleMatrix:
    """The series reshaped into one row per seasonal cycle."""

    rows: np.ndarray = field(repr=False)
    cycle: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.cycle:
            raise ValueError("rows must be a 2-d array with `cycle` columns")
        object.__setattr__(self, "rows", rows)

    @property
    def n_cycles(self) -> int:
        return self.rows.shape[0]


def normalize(series: TimeSeries) -> tuple[TimeSeries, ScalingParams]:
    """Rescale a series linearly into [0, 1].

    Each value v maps to (v - min) / (max - min) with min/max taken over
    the whole input.  A constant series maps to all zeros so the pipeline
    stays total; :func:`denormalize` restores the constant regardless.

    Returns
    -------
    (TimeSeries, ScalingParams)
        The rescaled series (same cycle) and the recorded min/max.
    """
    vals = series.values
    lo = float(vals.min())
    hi = float(vals.max())
    params = ScalingParams(lo, hi)
    if hi == lo:
        scaled = np.zeros_like(vals)
    else:
        scaled = (vals - lo) / (hi - lo)
    return TimeSeries(scaled, series.cycle), params


def denormalize(values, params: ScalingParams) -> np.ndarray:
    """Invert :func:`normalize`: v * (max - min) + min, elementwise."""
    vals = np.asarray(values, dtype=np.float64)
    return vals * params.span + params.min


def reshape_to_cycles(series: TimeSeries) -> CycleMatrix:
    """Partition a series into consecutive rows of `cycle` values.

    If the length is not a multiple of the cycle, the *oldest* leftover
    values are dropped with a warning: the most recent data carries the
    patterns being searched for.
    """
    vals = series.values
    cycle = series.cycle
    leftover = vals.size % cycle
    if leftover:
        warnings.warn(
            f"series length {vals.size} is not a multiple of cycle {cycle}; "
            f"dropping the {leftover} oldest value(s)",
            stacklevel=2,
        )
        vals = vals[leftover:]
    if vals.size < 2 * cycle:
        raise ValueError("insufficient data: need at least two full cycles")
    return CycleMatrix(vals.reshape(-1, cycle), cycle)

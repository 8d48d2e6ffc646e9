"""Audit populations: reported values, normalized weights, optional side data.

A population is the fixed universe of N items under audit. Each item has a
strictly positive reported value; weights are the reported values normalized
to sum to one. Items may carry a score in [0, 1] (side information predicting
the misstatement fraction) and, in simulation settings, the true misstatement
fraction itself.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

# Normalized weights must sum to 1 within this tolerance.
WEIGHT_SUM_TOL = 1e-12


def normalize_weights(reported: np.ndarray) -> np.ndarray:
    """Normalize positive reported values into sampling weights.

    Raises ValidationError on empty input, non-finite or non-positive values.
    The result sums to 1 within WEIGHT_SUM_TOL.
    """
    arr = np.asarray(reported, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("reported values must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("reported values must be finite")
    if np.any(arr <= 0.0):
        bad = int(np.argmax(arr <= 0.0))
        raise ValidationError(
            f"reported values must be strictly positive (item {bad} has {arr[bad]!r})"
        )
    total = float(arr.sum())
    weights = arr / total
    # One corrective renormalization is enough to land within 1e-12.
    weights = weights / float(weights.sum())
    if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
        raise ValidationError("weight normalization failed to reach tolerance")
    return weights


@dataclass(frozen=True)
class Population:
    """Immutable audit universe.

    ids: stable external identifiers, one per item.
    reported: strictly positive reported values.
    weights: reported normalized to sum to 1 (within 1e-12).
    scores: optional side information in [0, 1], same length.
    truth: optional true misstatement fractions in [0, 1] (simulations only).
    """

    ids: tuple
    reported: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]
    scores: np.ndarray | None = None
    truth: np.ndarray | None = None

    def __post_init__(self):
        reported = np.asarray(self.reported, dtype=float)
        object.__setattr__(self, "reported", reported)
        weights = self.weights
        if weights is None:
            weights = normalize_weights(reported)
        else:
            weights = np.asarray(weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        n = reported.size
        if len(self.ids) != n:
            raise ValidationError("ids and reported values must have equal length")
        if len(set(self.ids)) != n:
            raise ValidationError("item ids must be unique")
        if weights.shape != (n,):
            raise ValidationError("weights must match reported values in length")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError("weights must sum to 1 within 1e-12")
        if np.any(weights <= 0.0):
            raise ValidationError("weights must be strictly positive")
        for name in ("scores", "truth"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (n,):
                raise ValidationError(f"{name} must match reported values in length")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise ValidationError(f"{name} values must lie in [0, 1]")
        # Cache the mutable-free arrays as read-only to honor immutability.
        for name in ("reported", "weights", "scores", "truth"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.reported.size

    @property
    def total_reported(self) -> float:
        return float(self.reported.sum())

    def true_weighted_mean(self) -> float:
        """m* = sum_i weights[i] * truth[i]; requires truth."""
        if self.truth is None:
            raise ValidationError("population has no true misstatement fractions")
        return float(np.dot(self.weights, self.truth))

    def has_scores(self) -> bool:
        return self.scores is not None

    def has_truth(self) -> bool:
        return self.truth is not None


def population_from_arrays(
    reported,
    scores=None,
    truth=None,
    ids=None,
) -> Population:
    """Convenience constructor with auto-generated ids."""
    reported = np.asarray(reported, dtype=float)
    if ids is None:
        width = max(4, len(str(reported.size)))
        ids = tuple(f"item{i + 1:0{width}d}" for i in range(reported.size))
    else:
        ids = tuple(str(x) for x in ids)
    return Population(ids=ids, reported=reported, scores=scores, truth=truth)


_REQUIRED_COLUMNS = ("id", "reported_value")
_OPTIONAL_COLUMNS = ("score", "true_f")


def _parse_rows(rows, source: str) -> Population:
    if not rows:
        raise FormatError(f"{source}: no data rows")
    header = rows[0]
    columns = [c.strip() for c in header]
    for col in _REQUIRED_COLUMNS:
        if col not in columns:
            raise FormatError(f"{source}: missing required column {col!r}")
    idx = {c: columns.index(c) for c in columns}
    has_score = "score" in idx
    has_truth = "true_f" in idx
    ids = []
    reported = []
    scores = [] if has_score else None
    truth = [] if has_truth else None
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(columns):
            raise FormatError(f"{source}: line {lineno}: expected {len(columns)} fields")
        ids.append(row[idx["id"]].strip())
        try:
            reported.append(float(row[idx["reported_value"]]))
            if has_score:
                scores.append(float(row[idx["score"]]))
            if has_truth:
                truth.append(float(row[idx["true_f"]]))
        except ValueError as exc:
            raise FormatError(f"{source}: line {lineno}: {exc}") from exc
    if not ids:
        raise FormatError(f"{source}: no data rows")
    return Population(
        ids=tuple(ids),
        reported=np.array(reported, dtype=float),
        scores=np.array(scores, dtype=float) if has_score else None,
        truth=np.array(truth, dtype=float) if has_truth else None,
    )


def load_population_csv(path) -> Population:
    """Load a population from a CSV file.

    Required columns: id, reported_value. Optional: score, true_f.
    Unknown columns are ignored. Raises FormatError / ValidationError.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return _parse_rows(rows, str(path))


def parse_population_csv(text: str, source: str = "<upload>") -> Population:
    """Parse a population from CSV text (e.g. an HTTP upload body)."""
    rows = list(csv.reader(io.StringIO(text)))
    return _parse_rows(rows, source)


def save_population_csv(population: Population, path) -> None:
    """Write a population back to CSV; floats keep full round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["id", "reported_value"]
        if population.scores is not None:
            header.append("score")
        if population.truth is not None:
            header.append("true_f")
        writer.writerow(header)
        for i in range(population.n):
            row = [population.ids[i], repr(float(population.reported[i]))]
            if population.scores is not None:
                row.append(repr(float(population.scores[i])))
            if population.truth is not None:
                row.append(repr(float(population.truth[i])))
            writer.writerow(row)

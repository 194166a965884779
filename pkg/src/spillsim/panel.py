"""Panel data model: treatment assignments, outcomes, covariates, and the
empirical distribution of per-unit round tuples.

Conventions used throughout the package:

* units are indexed 0..N-1;
* treatment rounds run 1..T and map to columns 0..T-1 of the treatment matrix;
* outcome rounds run 0..T (round 0 is the pre-intervention baseline) and map
  directly to columns 0..T of the outcome matrix.

All panel types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TreatmentPanel:
    """Binary assignment matrix with shape (n_units, n_rounds)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("treatment panel must be a 2-d array")
        n, t = vals.shape
        if n < 1 or t < 1:
            raise ValueError(f"treatment panel needs at least one unit and one round, got {vals.shape}")
        if not np.all((vals == 0.0) | (vals == 1.0)):
            raise ValueError("treatment panel entries must be exactly 0 or 1")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_rounds(self) -> int:
        return self.values.shape[1]

    def column(self, t: int) -> np.ndarray:
        """Assignment vector of round t, for t in 1..T."""
        if not 1 <= t <= self.n_rounds:
            raise IndexError(f"round {t} outside 1..{self.n_rounds}")
        return self.values[:, t - 1]


@dataclass(frozen=True)
class OutcomePanel:
    """Real outcome matrix with shape (n_units, n_rounds + 1); column 0 is the
    pre-intervention baseline."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("outcome panel must be a 2-d array")
        n, cols = vals.shape
        if n < 1 or cols < 2:
            raise ValueError("outcome panel needs at least one unit and rounds 0..1")
        if not np.all(np.isfinite(vals)):
            raise ValueError("outcome panel entries must all be finite")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_rounds(self) -> int:
        return self.values.shape[1] - 1

    def column(self, t: int) -> np.ndarray:
        """Outcome vector of round t, for t in 0..T."""
        if not 0 <= t <= self.n_rounds:
            raise IndexError(f"round {t} outside 0..{self.n_rounds}")
        return self.values[:, t]


@dataclass(frozen=True)
class CovariatePanel:
    """Covariate array with shape (n_units, n_rounds, dim), rounds 1..T."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValueError("covariate panel must be a 3-d array (units, rounds, dim)")
        n, t, d = vals.shape
        if n < 1 or t < 1 or d < 1:
            raise ValueError(f"covariate panel has degenerate shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("covariate entries must all be finite")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_rounds(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def column(self, t: int) -> np.ndarray:
        """Covariate slice of round t, shape (n_units, dim), for t in 1..T."""
        if not 1 <= t <= self.n_rounds:
            raise IndexError(f"round {t} outside 1..{self.n_rounds}")
        return self.values[:, t - 1, :]


def round_index_covariates(n_units: int, n_rounds: int) -> CovariatePanel:
    """Default covariates: dim 1, carrying the round number t."""
    vals = np.zeros((n_units, n_rounds, 1))
    vals[:, :, 0] = np.arange(1, n_rounds + 1)
    return CovariatePanel(vals)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Size-N multiset of per-unit tuples (w, y_prev, x, e, y) from one round."""

    w: np.ndarray
    y_prev: np.ndarray
    x: np.ndarray
    e: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        w = _freeze(self.w)
        y_prev = _freeze(self.y_prev)
        xraw = np.asarray(self.x, dtype=np.float64)
        x = _freeze(xraw.reshape(-1, 1) if xraw.ndim == 1 else xraw)
        e = _freeze(self.e)
        y = _freeze(self.y)
        n = w.shape[0]
        if n < 1:
            raise ValueError("empirical distribution must contain at least one tuple")
        if not (y_prev.shape[0] == x.shape[0] == e.shape[0] == y.shape[0] == n):
            raise ValueError("tuple components disagree on the number of units")
        for name, arr in (("w", w), ("y_prev", y_prev), ("e", e), ("y", y)):
            if arr.ndim != 1:
                raise ValueError(f"component {name} must be 1-d")
        if x.ndim != 2:
            raise ValueError("component x must be 2-d (units, dim)")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y_prev", y_prev)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "y", y)

    @property
    def n_units(self) -> int:
        return self.w.shape[0]

    def sorted_rows(self) -> np.ndarray:
        """Rows (w, y_prev, x..., e, y) in lexicographic order; the canonical
        multiset representation."""
        rows = np.column_stack([self.w, self.y_prev, self.x, self.e, self.y])
        order = np.lexsort(rows.T[::-1])
        return rows[order]

    def same_multiset(self, other: "EmpiricalDistribution") -> bool:
        a, b = self.sorted_rows(), other.sorted_rows()
        return a.shape == b.shape and bool(np.array_equal(a, b))


def build_panel(n_units: int, n_rounds: int, entries: Sequence[float]) -> OutcomePanel:
    """Build an OutcomePanel from a flat unit-major list of length N*(T+1).

    Each unit contributes its rounds 0..T consecutively.
    """
    flat = np.asarray(entries, dtype=np.float64)
    expected = n_units * (n_rounds + 1)
    if flat.ndim != 1 or flat.size != expected:
        raise ValueError(f"expected {expected} entries for {n_units} units and rounds 0..{n_rounds}, got {flat.size}")
    if not np.all(np.isfinite(flat)):
        raise ValueError("panel entries must all be finite")
    return OutcomePanel(flat.reshape(n_units, n_rounds + 1))


def column_mean(panel: TreatmentPanel | OutcomePanel, t: int) -> float:
    """Arithmetic mean of a panel column; round indexing per the panel type."""
    return float(panel.column(t).mean())


def tuple_distribution(
    w: TreatmentPanel,
    y: OutcomePanel,
    x: CovariatePanel,
    exposure: np.ndarray,
    t: int,
) -> EmpiricalDistribution:
    """Empirical distribution of (W_t, Y_{t-1}, X_t, E_t, Y_t) across units.

    ``exposure`` is an (n_units, n_rounds) array with rounds 1..T in columns
    0..T-1, or any object exposing such an array as ``.values`` (the layout
    produced by the dynamics engine).
    """
    exposure = np.asarray(getattr(exposure, "values", exposure), dtype=np.float64)
    n = w.n_units
    if not (y.n_units == x.n_units == exposure.shape[0] == n):
        raise ValueError("panels disagree on the number of units")
    if not (w.n_rounds == y.n_rounds == x.n_rounds == exposure.shape[1]):
        raise ValueError("panels disagree on the number of rounds")
    if not 1 <= t <= w.n_rounds:
        raise IndexError(f"round {t} outside 1..{w.n_rounds}")
    return EmpiricalDistribution(
        w=w.column(t),
        y_prev=y.column(t - 1),
        x=x.column(t),
        e=exposure[:, t - 1],
        y=y.column(t),
    )


def w1_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Mean absolute difference of order statistics between two equally sized
    samples. Zero iff the inputs are identical as multisets.

    A one-dimensional transport distance; resampling to a common size is the
    caller's responsibility.
    """
    av = np.sort(np.asarray(a, dtype=np.float64))
    bv = np.sort(np.asarray(b, dtype=np.float64))
    if av.size == 0 or bv.size == 0:
        raise ValueError("w1_distance requires non-empty inputs")
    if av.size != bv.size:
        raise ValueError(f"w1_distance requires equal lengths, got {av.size} and {bv.size}")
    return float(np.mean(np.abs(av - bv)))


# --- CSV interchange -------------------------------------------------------
#
# Format: header "unit,round,value", one row per (unit, round) cell. Outcome
# files carry rounds 0..T, treatment files rounds 1..T. Unit ids are 0-based.


def write_outcome_csv(path, panel: OutcomePanel) -> None:
    _write_cells(path, panel.values, first_round=0)


def write_treatment_csv(path, panel: TreatmentPanel) -> None:
    _write_cells(path, panel.values, first_round=1)


def write_matrix_csv(path, matrix: np.ndarray, first_round: int = 1) -> None:
    """Write a (units, rounds) matrix, e.g. an exposure matrix, in panel CSV form."""
    _write_cells(path, np.asarray(matrix, dtype=np.float64), first_round=first_round)


def _write_cells(path, values: np.ndarray, first_round: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "round", "value"])
        n, cols = values.shape
        for i in range(n):
            for c in range(cols):
                writer.writerow([i, first_round + c, repr(float(values[i, c]))])


def read_outcome_csv(path) -> OutcomePanel:
    values = _read_cells(path, first_round=0)
    return OutcomePanel(values)


def read_treatment_csv(path) -> TreatmentPanel:
    values = _read_cells(path, first_round=1)
    return TreatmentPanel(values)


def _read_cells(path, first_round: int) -> np.ndarray:
    cells: dict[tuple[int, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["unit", "round", "value"]:
            raise ValueError(f"{path}: expected header unit,round,value")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: malformed row {row!r}")
            key = (int(row[0]), int(row[1]))
            if key in cells:
                raise ValueError(f"{path}: duplicate (unit, round) key {key}")
            cells[key] = float(row[2])
    if not cells:
        raise ValueError(f"{path}: no data rows")
    units = sorted({k[0] for k in cells})
    rounds = sorted({k[1] for k in cells})
    if units != list(range(len(units))):
        raise ValueError(f"{path}: unit ids must be contiguous from 0")
    if rounds != list(range(first_round, first_round + len(rounds))):
        raise ValueError(f"{path}: rounds must be contiguous from {first_round}")
    values = np.empty((len(units), len(rounds)))
    for (i, r), v in cells.items():
        values[i, r - first_round] = v
    if len(cells) != values.size:
        raise ValueError(f"{path}: missing (unit, round) cells")
    return values

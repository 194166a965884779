"""Treatment effect estimators.

Two classical single-round estimators (difference in means and the inverse
probability weighted contrast) plus the evolution-based family: fit pooled
regression coefficients from one observed panel, then roll mean trajectories
forward under alternative assignment scenarios from the shared pre-treatment
baseline. The gap between the universal-treatment and no-treatment
trajectories at round T is the evolution-based effect estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .panel import OutcomePanel, TreatmentPanel, column_mean

# Relative singular value cutoff used for rank decisions in the pooled fit.
RANK_RTOL = 1e-10

FEATURE_KINDS = (
    "intercept",
    "own_treatment",
    "lagged_outcome",
    "treated_fraction",
    "lagged_mean",
    "own_times_lag",
    "own_times_fraction",
    "cluster_fraction",
    "influencer_treatment",
)
# Features that are constant across units within a round; identified only
# through across-round variation.
SCENARIO_LEVEL_FEATURES = ("intercept", "treated_fraction", "lagged_mean", "cluster_fraction", "influencer_treatment")
PARAMETERIZED_FEATURES = ("cluster_fraction", "influencer_treatment")


@dataclass(frozen=True)
class Feature:
    """One regressor computed per (unit, round). Parameterized kinds carry an
    index: the cluster id or the influencer's unit id."""

    kind: str
    index: int | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind in PARAMETERIZED_FEATURES:
            if self.index is None or self.index < 0:
                raise ValueError(f"feature {self.kind} requires a non-negative index")
        elif self.index is not None:
            raise ValueError(f"feature {self.kind} takes no index")

    @property
    def name(self) -> str:
        return self.kind if self.index is None else f"{self.kind}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Feature":
        text = text.strip()
        if ":" in text:
            kind, _, idx = text.partition(":")
            return cls(kind.strip(), int(idx))
        return cls(text)


@dataclass(frozen=True)
class FeatureSpec:
    features: tuple[Feature, ...]

    def __post_init__(self):
        feats = tuple(self.features)
        if not feats:
            raise ValueError("feature list must be non-empty")
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        if sum(1 for f in feats if f.kind == "intercept") > 1:
            raise ValueError("at most one intercept feature")
        object.__setattr__(self, "features", feats)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def n_scenario_level(self) -> int:
        return sum(1 for f in self.features if f.kind in SCENARIO_LEVEL_FEATURES)

    @classmethod
    def parse(cls, items: Sequence[str]) -> "FeatureSpec":
        return cls(tuple(Feature.parse(s) for s in items))


@dataclass(frozen=True)
class StructureMetadata:
    """Known interference structure the feature set may refer to."""

    membership: np.ndarray | None = None
    n_clusters: int | None = None
    influencers: tuple[int, ...] | None = None

    def require_clusters(self) -> tuple[np.ndarray, int]:
        if self.membership is None or self.n_clusters is None:
            raise ValueError("cluster features require cluster membership metadata")
        return np.asarray(self.membership, dtype=np.int64), int(self.n_clusters)

    def require_influencers(self) -> tuple[int, ...]:
        if not self.influencers:
            raise ValueError("influencer features require influencer id metadata")
        return tuple(self.influencers)


@dataclass(frozen=True)
class ESECoefficients:
    """Fitted (or analytically derived) coefficients, one per feature name."""

    names: tuple[str, ...]
    values: np.ndarray
    rss: float
    n_rows: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.names),):
            raise ValueError("one coefficient per feature name required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("coefficients must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)

    def by_name(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_dict(self) -> dict:
        return {"coefficients": self.by_name(), "rss": self.rss, "n_rows": self.n_rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# --- single-round estimators -------------------------------------------------


def dm_estimate(y_t: np.ndarray, w_t: np.ndarray) -> float | None:
    """Treated-mean minus control-mean at one round.

    Returns None when the round has no treated or no control units (the
    contrast is undefined; callers record it as a missing estimate).
    """
    y_t = np.asarray(y_t, dtype=np.float64)
    w_t = np.asarray(w_t, dtype=np.float64)
    if y_t.shape != w_t.shape or y_t.ndim != 1:
        raise ValueError("outcome and treatment columns must be 1-d and equal length")
    treated = w_t == 1.0
    n_treated = int(treated.sum())
    if n_treated == 0 or n_treated == y_t.size:
        return None
    return float(y_t[treated].mean() - y_t[~treated].mean())


def ht_estimate(y_t: np.ndarray, w_t: np.ndarray, pi_t: float) -> float:
    """Inverse probability weighted contrast at one round:
    mean over units of y*w/pi - y*(1-w)/(1-pi)."""
    y_t = np.asarray(y_t, dtype=np.float64)
    w_t = np.asarray(w_t, dtype=np.float64)
    if y_t.shape != w_t.shape or y_t.ndim != 1:
        raise ValueError("outcome and treatment columns must be 1-d and equal length")
    if not 0.0 < pi_t < 1.0:
        raise ValueError(f"assignment probability must lie strictly inside (0, 1), got {pi_t}")
    return float(np.mean(y_t * w_t / pi_t - y_t * (1.0 - w_t) / (1.0 - pi_t)))


# --- pooled regression fit ----------------------------------------------------


def _feature_columns(
    feature: Feature,
    w: TreatmentPanel,
    y: OutcomePanel,
    t: int,
    structure: StructureMetadata,
) -> np.ndarray:
    n = w.n_units
    w_t = w.column(t)
    y_prev = y.column(t - 1)
    kind = feature.kind
    if kind == "intercept":
        return np.ones(n)
    if kind == "own_treatment":
        return w_t
    if kind == "lagged_outcome":
        return y_prev
    if kind == "treated_fraction":
        return np.full(n, w_t.mean())
    if kind == "lagged_mean":
        return np.full(n, y_prev.mean())
    if kind == "own_times_lag":
        return w_t * y_prev
    if kind == "own_times_fraction":
        return w_t * w_t.mean()
    if kind == "cluster_fraction":
        membership, k = structure.require_clusters()
        if feature.index >= k:
            raise ValueError(f"cluster id {feature.index} outside 0..{k - 1}")
        mask = membership == feature.index
        return np.full(n, w_t[mask].mean())
    if kind == "influencer_treatment":
        ids = structure.require_influencers()
        if feature.index not in ids:
            raise ValueError(f"unit {feature.index} is not a listed influencer")
        return np.full(n, w_t[feature.index])
    raise AssertionError(f"unhandled feature kind {kind}")


def design_matrix(
    spec: FeatureSpec,
    w: TreatmentPanel,
    y: OutcomePanel,
    structure: StructureMetadata | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack one regression row per (unit, round) for rounds 1..T; the target
    is the round-t outcome."""
    structure = structure or StructureMetadata()
    if w.n_units != y.n_units or w.n_rounds != y.n_rounds:
        raise ValueError("treatment and outcome panels disagree on dimensions")
    t_max = w.n_rounds
    blocks = []
    targets = []
    for t in range(1, t_max + 1):
        cols = [_feature_columns(f, w, y, t, structure) for f in spec.features]
        blocks.append(np.column_stack(cols))
        targets.append(y.column(t))
    return np.vstack(blocks), np.concatenate(targets)


def fit_ese(
    y: OutcomePanel,
    w: TreatmentPanel,
    spec: FeatureSpec,
    structure: StructureMetadata | None = None,
) -> ESECoefficients:
    """Pooled least squares of round-t outcomes on the feature columns over
    all units and rounds, with time-invariant coefficients.

    Rank decisions use RANK_RTOL relative to the largest singular value; a
    rank-deficient system resolves to the minimum-norm solution, so fitted
    values are unchanged by duplicated feature columns.
    """
    n_scenario = spec.n_scenario_level()
    if w.n_rounds < n_scenario:
        raise ValueError(
            f"{n_scenario} scenario-level features need at least that many rounds, panel has {w.n_rounds}"
        )
    x, target = design_matrix(spec, w, y, structure)
    coef, _, _, _ = np.linalg.lstsq(x, target, rcond=RANK_RTOL)
    resid = target - x @ coef
    return ESECoefficients(names=spec.names, values=coef, rss=float(resid @ resid), n_rows=x.shape[0])


# --- counterfactual propagation ------------------------------------------------


@dataclass(frozen=True)
class ScenarioPath:
    """Per-round description of an assignment scenario at the population
    level: global treated fraction, optional per-cluster fractions, optional
    individual influencer assignments (unit id -> value)."""

    fractions: tuple[float, ...]
    cluster_fractions: tuple[tuple[float, ...], ...] | None = None
    influencer_treatments: tuple[Mapping[int, float], ...] | None = None

    def __post_init__(self):
        fr = tuple(float(p) for p in self.fractions)
        if not fr:
            raise ValueError("scenario path needs at least one round")
        for p in fr:
            if not (np.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValueError(f"treated fraction {p} outside [0, 1]")
        object.__setattr__(self, "fractions", fr)
        if self.cluster_fractions is not None and len(self.cluster_fractions) != len(fr):
            raise ValueError("cluster fractions must cover every round")
        if self.influencer_treatments is not None and len(self.influencer_treatments) != len(fr):
            raise ValueError("influencer assignments must cover every round")

    @property
    def n_rounds(self) -> int:
        return len(self.fractions)

    @classmethod
    def constant(cls, pi: float, n_rounds: int) -> "ScenarioPath":
        return cls(fractions=(float(pi),) * n_rounds)

    @classmethod
    def all_treated(cls, n_rounds: int) -> "ScenarioPath":
        return cls.constant(1.0, n_rounds)

    @classmethod
    def all_control(cls, n_rounds: int) -> "ScenarioPath":
        return cls.constant(0.0, n_rounds)


def _feature_mean(feature: Feature, path: ScenarioPath, t: int, m_prev: float) -> float:
    """Population mean of a feature under the scenario at round t, with the
    lagged mean trajectory value m_prev.

    Unit-level products with the assignment use independence of the draw from
    the lagged outcome, so own_treatment * lagged_outcome averages to
    fraction * m_prev exactly under randomized assignment.
    """
    pi = path.fractions[t - 1]
    kind = feature.kind
    if kind == "intercept":
        return 1.0
    if kind == "own_treatment":
        return pi
    if kind == "lagged_outcome":
        return m_prev
    if kind == "treated_fraction":
        return pi
    if kind == "lagged_mean":
        return m_prev
    if kind == "own_times_lag":
        return pi * m_prev
    if kind == "own_times_fraction":
        return pi * pi
    if kind == "cluster_fraction":
        if path.cluster_fractions is None:
            return pi
        row = path.cluster_fractions[t - 1]
        if feature.index >= len(row):
            raise ValueError(f"scenario provides no fraction for cluster {feature.index} at round {t}")
        return float(row[feature.index])
    if kind == "influencer_treatment":
        if path.influencer_treatments is None:
            return pi
        row = path.influencer_treatments[t - 1]
        if feature.index not in row:
            raise ValueError(f"scenario provides no assignment for influencer {feature.index} at round {t}")
        return float(row[feature.index])
    raise AssertionError(f"unhandled feature kind {kind}")


def propagate(
    coeffs: ESECoefficients,
    spec: FeatureSpec,
    y0_mean: float,
    path: ScenarioPath,
) -> np.ndarray:
    """Mean outcome trajectory, rounds 0..T, under the scenario path.

    Round t applies m_t = sum_f coef_f * feature_mean(f; path, m_{t-1}),
    starting from the observed pre-treatment mean.
    """
    if tuple(coeffs.names) != spec.names:
        raise ValueError("coefficients and feature spec are misaligned")
    out = np.empty(path.n_rounds + 1)
    out[0] = float(y0_mean)
    for t in range(1, path.n_rounds + 1):
        means = np.array([_feature_mean(f, path, t, out[t - 1]) for f in spec.features])
        out[t] = float(coeffs.values @ means)
    return out


def tte_from_coeffs(
    coeffs: ESECoefficients,
    spec: FeatureSpec,
    y0_mean: float,
    t: int,
    treated_path: ScenarioPath | None = None,
    control_path: ScenarioPath | None = None,
) -> float:
    """Evolution-based effect estimate at round t: the universal-treatment
    trajectory minus the no-treatment trajectory, both anchored at y0_mean."""
    if t < 0:
        raise ValueError("round must be non-negative")
    n_rounds = max(t, 1)
    treated_path = treated_path or ScenarioPath.all_treated(n_rounds)
    control_path = control_path or ScenarioPath.all_control(n_rounds)
    if t > treated_path.n_rounds or t > control_path.n_rounds:
        raise ValueError(f"scenario paths do not cover round {t}")
    hi = propagate(coeffs, spec, y0_mean, treated_path)
    lo = propagate(coeffs, spec, y0_mean, control_path)
    return float(hi[t] - lo[t])


def basic_feature_spec() -> FeatureSpec:
    """Default evolution-based feature set for dense interference."""
    return FeatureSpec.parse(["intercept", "own_treatment", "lagged_outcome", "treated_fraction", "lagged_mean"])


def cluster_feature_spec(n_clusters: int) -> FeatureSpec:
    items = ["intercept", "own_treatment", "lagged_outcome", "lagged_mean"]
    items += [f"cluster_fraction:{l}" for l in range(n_clusters)]
    return FeatureSpec.parse(items)


def influencer_feature_spec(influencers: Sequence[int]) -> FeatureSpec:
    items = ["intercept", "own_treatment", "lagged_outcome", "treated_fraction", "lagged_mean"]
    items += [f"influencer_treatment:{j}" for j in influencers]
    return FeatureSpec.parse(items)

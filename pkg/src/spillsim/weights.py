"""Interference weight structures.

A weight set assigns every ordered pair (i, j) and round t a real weight: the
influence of unit j on unit i in round t. Four representations are provided:

* ``DenseGaussianWeights``: a static matrix of i.i.d. Normal(mu/n, sigma2/n)
  entries plus an independent per-round delta matrix of Normal(mu_t/n,
  sigma2_t/n) entries. The static part is materialized once; the per-round
  deltas are regenerated on demand from a round-keyed substream, so memory
  stays O(n^2) no matter how many rounds are simulated.
* ``ClusteredWeights``: block structure, w_in/n within a cluster and w_out/n
  across clusters.
* ``InfluencerWeights``: a small set of m high-reach units whose columns carry
  weight w_inf/m (for receivers other than themselves); everything else gets
  the background w_base/n. Influencer columns scale by 1/m so their total
  influence stays O(1) as n grows.
* ``ExplicitDenseWeights``: any fixed matrix, for arbitrary heterogeneity.

Structured kinds never materialize an n x n matrix; their row sums and point
lookups are computed lazily. All weight sets are immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rng import substream


@dataclass(frozen=True)
class GaussianWeightParams:
    """First/second order weight moments: entry means are mu/n (static) and
    mu_t/n (per round); variances sigma2/n and sigma2_t/n."""

    mu: float
    sigma2: float
    mu_t: float = 0.0
    sigma2_t: float = 0.0

    def __post_init__(self):
        for name in ("mu", "sigma2", "mu_t", "sigma2_t"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma2 < 0 or self.sigma2_t < 0:
            raise ValueError("variances must be non-negative")


class WeightSet:
    """Common interface: point lookups and row-sum application."""

    n_units: int

    def effective_weight(self, i: int, j: int, t: int) -> float:
        """Total weight of j's influence on i in round t."""
        raise NotImplementedError

    def apply(self, gv: np.ndarray, t: int) -> np.ndarray:
        """Weighted peer sums for round t.

        ``gv`` has shape (n,) or (n, s); entry j holds the peer signal emitted
        by unit j (per scenario when 2-d). Returns the matching shape with row
        i holding sum_j weight(i, j, t) * gv[j].
        """
        raise NotImplementedError

    def to_descriptor(self) -> dict:
        """JSON-serializable description (kind, parameters, seed)."""
        raise NotImplementedError

    def _check_indices(self, i: int, j: int) -> None:
        n = self.n_units
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"unit pair ({i}, {j}) outside 0..{n - 1}")


@dataclass(frozen=True)
class DenseGaussianWeights(WeightSet):
    n_units: int
    params: GaussianWeightParams
    n_rounds: int
    seed: int
    static: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.static is None:
            n = self.n_units
            rng = substream(self.seed, "weights", "static")
            a = rng.normal(self.params.mu / n, np.sqrt(self.params.sigma2 / n), size=(n, n))
            a.setflags(write=False)
            object.__setattr__(self, "static", a)

    def _delta(self, t: int) -> np.ndarray | None:
        if not 1 <= t <= self.n_rounds:
            raise IndexError(f"round {t} outside 1..{self.n_rounds}")
        p = self.params
        if p.mu_t == 0.0 and p.sigma2_t == 0.0:
            return None
        n = self.n_units
        rng = substream(self.seed, "weights", "delta", t)
        return rng.normal(p.mu_t / n, np.sqrt(p.sigma2_t / n), size=(n, n))

    def effective_weight(self, i: int, j: int, t: int) -> float:
        self._check_indices(i, j)
        delta = self._delta(t)
        extra = 0.0 if delta is None else float(delta[i, j])
        return float(self.static[i, j]) + extra

    def apply(self, gv: np.ndarray, t: int) -> np.ndarray:
        delta = self._delta(t)
        out = self.static @ gv
        if delta is not None:
            out = out + delta @ gv
        return out

    def dense(self, t: int) -> np.ndarray:
        """Materialized matrix for round t (diagnostics; O(n^2) memory)."""
        delta = self._delta(t)
        return self.static.copy() if delta is None else self.static + delta

    def to_descriptor(self) -> dict:
        p = self.params
        return {
            "kind": "dense_gaussian",
            "n_units": self.n_units,
            "n_rounds": self.n_rounds,
            "mu": p.mu,
            "sigma2": p.sigma2,
            "mu_t": p.mu_t,
            "sigma2_t": p.sigma2_t,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ClusteredWeights(WeightSet):
    n_units: int
    membership: np.ndarray
    n_clusters: int
    w_in: float
    w_out: float

    def __post_init__(self):
        mem = np.asarray(self.membership, dtype=np.int64)
        if mem.shape != (self.n_units,):
            raise ValueError("membership must assign one cluster per unit")
        if mem.min() < 0 or mem.max() >= self.n_clusters:
            raise ValueError(f"cluster ids must lie in 0..{self.n_clusters - 1}")
        if not (np.isfinite(self.w_in) and np.isfinite(self.w_out)):
            raise ValueError("cluster weights must be finite")
        mem.setflags(write=False)
        object.__setattr__(self, "membership", mem)

    def effective_weight(self, i: int, j: int, t: int) -> float:
        self._check_indices(i, j)
        same = self.membership[i] == self.membership[j]
        return (self.w_in if same else self.w_out) / self.n_units

    def apply(self, gv: np.ndarray, t: int) -> np.ndarray:
        gv = np.asarray(gv, dtype=np.float64)
        squeeze = gv.ndim == 1
        g = gv[:, None] if squeeze else gv
        total = g.sum(axis=0)
        per_cluster = np.zeros((self.n_clusters, g.shape[1]))
        np.add.at(per_cluster, self.membership, g)
        n = self.n_units
        out = (self.w_out / n) * total[None, :] + ((self.w_in - self.w_out) / n) * per_cluster[self.membership]
        return out[:, 0] if squeeze else out

    def to_descriptor(self) -> dict:
        return {
            "kind": "clustered",
            "n_units": self.n_units,
            "n_clusters": self.n_clusters,
            "w_in": self.w_in,
            "w_out": self.w_out,
        }


@dataclass(frozen=True)
class InfluencerWeights(WeightSet):
    n_units: int
    influencers: tuple[int, ...]
    w_inf: float
    w_base: float

    def __post_init__(self):
        ids = tuple(sorted(int(i) for i in self.influencers))
        if len(ids) == 0:
            raise ValueError("influencer set must be non-empty")
        if len(set(ids)) != len(ids):
            raise ValueError("influencer ids must be distinct")
        if ids[0] < 0 or ids[-1] >= self.n_units:
            raise ValueError(f"influencer ids must lie in 0..{self.n_units - 1}")
        if len(ids) >= self.n_units:
            raise ValueError("influencers must be a strict subset of the population")
        if not (np.isfinite(self.w_inf) and np.isfinite(self.w_base)):
            raise ValueError("influencer weights must be finite")
        object.__setattr__(self, "influencers", ids)

    @property
    def n_influencers(self) -> int:
        return len(self.influencers)

    def effective_weight(self, i: int, j: int, t: int) -> float:
        self._check_indices(i, j)
        if j in self.influencers and j != i:
            return self.w_inf / self.n_influencers
        return self.w_base / self.n_units

    def apply(self, gv: np.ndarray, t: int) -> np.ndarray:
        gv = np.asarray(gv, dtype=np.float64)
        squeeze = gv.ndim == 1
        g = gv[:, None] if squeeze else gv
        ids = np.asarray(self.influencers, dtype=np.int64)
        total = g.sum(axis=0)
        inf_total = g[ids].sum(axis=0)
        m, n = self.n_influencers, self.n_units
        # For an influencer receiver, its own column falls back to the base rate.
        own = np.zeros_like(g)
        own[ids] = g[ids]
        out = (self.w_inf / m) * (inf_total[None, :] - own) + (self.w_base / n) * (
            total[None, :] - inf_total[None, :] + own
        )
        return out[:, 0] if squeeze else out

    def to_descriptor(self) -> dict:
        return {
            "kind": "influencer",
            "n_units": self.n_units,
            "influencers": list(self.influencers),
            "w_inf": self.w_inf,
            "w_base": self.w_base,
        }


@dataclass(frozen=True)
class ExplicitDenseWeights(WeightSet):
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError("explicit weights must be a square matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("explicit weights must all be finite")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_units(self) -> int:
        return self.matrix.shape[0]

    def effective_weight(self, i: int, j: int, t: int) -> float:
        self._check_indices(i, j)
        return float(self.matrix[i, j])

    def apply(self, gv: np.ndarray, t: int) -> np.ndarray:
        return self.matrix @ np.asarray(gv, dtype=np.float64)

    def to_descriptor(self) -> dict:
        return {"kind": "explicit", "n_units": self.n_units, "matrix": self.matrix.tolist()}


def gen_dense_gaussian(
    n: int, params: GaussianWeightParams, n_rounds: int, seed: int
) -> DenseGaussianWeights:
    """Independent Gaussian weights: static entries Normal(mu/n, sigma2/n) and
    per-round deltas Normal(mu_t/n, sigma2_t/n), deterministic given seed."""
    if n < 1:
        raise ValueError("population size must be at least 1")
    if n_rounds < 1:
        raise ValueError("need at least one round")
    return DenseGaussianWeights(n_units=n, params=params, n_rounds=n_rounds, seed=seed)


def gen_clustered(n: int, k: int, w_in: float, w_out: float) -> ClusteredWeights:
    """Equal-size cluster blocks; the last cluster absorbs any remainder."""
    if k < 1:
        raise ValueError("need at least one cluster")
    if k > n:
        raise ValueError(f"cannot split {n} units into {k} clusters")
    size = n // k
    membership = np.minimum(np.arange(n) // size, k - 1)
    return ClusteredWeights(n_units=n, membership=membership, n_clusters=k, w_in=w_in, w_out=w_out)


def gen_influencer(n: int, influencers: Sequence[int], w_inf: float, w_base: float) -> InfluencerWeights:
    """A small set of high-reach units plus a uniform background."""
    return InfluencerWeights(n_units=n, influencers=tuple(influencers), w_inf=w_inf, w_base=w_base)


def weights_from_descriptor(desc: dict, default_n_rounds: int | None = None) -> WeightSet:
    """Rebuild a weight set from its JSON descriptor."""
    kind = desc.get("kind")
    if kind == "dense_gaussian":
        params = GaussianWeightParams(
            mu=desc["mu"], sigma2=desc["sigma2"], mu_t=desc.get("mu_t", 0.0), sigma2_t=desc.get("sigma2_t", 0.0)
        )
        n_rounds = desc.get("n_rounds", default_n_rounds)
        return gen_dense_gaussian(desc["n_units"], params, n_rounds, desc["seed"])
    if kind == "clustered":
        return gen_clustered(desc["n_units"], desc["n_clusters"], desc["w_in"], desc["w_out"])
    if kind == "influencer":
        return gen_influencer(desc["n_units"], desc["influencers"], desc["w_inf"], desc["w_base"])
    if kind == "explicit":
        return ExplicitDenseWeights(np.asarray(desc["matrix"], dtype=np.float64))
    raise ValueError(f"unknown weight kind {kind!r}")


def write_descriptor_json(path, ws: WeightSet) -> None:
    with open(path, "w") as fh:
        json.dump(ws.to_descriptor(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_explicit_csv(path, ws: ExplicitDenseWeights) -> None:
    """Explicit matrices interchange as rows i,j,weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "weight"])
        n = ws.n_units
        for i in range(n):
            for j in range(n):
                writer.writerow([i, j, repr(float(ws.matrix[i, j]))])


def read_explicit_csv(path) -> ExplicitDenseWeights:
    entries: dict[tuple[int, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["i", "j", "weight"]:
            raise ValueError(f"{path}: expected header i,j,weight")
        for row in reader:
            if not row:
                continue
            key = (int(row[0]), int(row[1]))
            if key in entries:
                raise ValueError(f"{path}: duplicate weight for pair {key}")
            entries[key] = float(row[2])
    if not entries:
        raise ValueError(f"{path}: no weight rows")
    n = max(max(i, j) for i, j in entries) + 1
    if len(entries) != n * n:
        raise ValueError(f"{path}: expected all {n}x{n} pairs")
    matrix = np.zeros((n, n))
    for (i, j), v in entries.items():
        matrix[i, j] = v
    return ExplicitDenseWeights(matrix)

"""Randomized treatment assignment policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import TreatmentPanel
from .rng import substream

RAMP_PROBS = (0.0, 0.2, 0.4, 0.8)


@dataclass(frozen=True)
class DesignSpec:
    """Assignment policy: independent per-round Bernoulli draws, or a constant
    panel (used for the universal-treatment and no-treatment scenarios)."""

    kind: str  # "bernoulli" | "constant"
    n_units: int
    n_rounds: int
    probs: tuple[float, ...] | None = None
    value: int | None = None

    def __post_init__(self):
        if self.n_units < 1 or self.n_rounds < 1:
            raise ValueError("design needs at least one unit and one round")
        if self.kind == "bernoulli":
            if self.probs is None or len(self.probs) != self.n_rounds:
                raise ValueError(f"bernoulli design needs {self.n_rounds} per-round probabilities")
            probs = tuple(float(p) for p in self.probs)
            for p in probs:
                if not (np.isfinite(p) and 0.0 <= p <= 1.0):
                    raise ValueError(f"assignment probability {p} outside [0, 1]")
            object.__setattr__(self, "probs", probs)
        elif self.kind == "constant":
            if self.value not in (0, 1):
                raise ValueError("constant design value must be 0 or 1")
        else:
            raise ValueError(f"unknown design kind {self.kind!r}")


def assign(spec: DesignSpec, seed: int) -> TreatmentPanel:
    """Draw one treatment panel; a pure function of (spec, seed)."""
    if spec.kind == "constant":
        values = np.full((spec.n_units, spec.n_rounds), float(spec.value))
        return TreatmentPanel(values)
    rng = substream(seed, "design")
    u = rng.random((spec.n_units, spec.n_rounds))
    values = (u < np.asarray(spec.probs)[None, :]).astype(np.float64)
    return TreatmentPanel(values)


def ramp_design(n: int) -> DesignSpec:
    """Four-round ramp: probabilities 0%, 20%, 40%, 80%."""
    if n < 1:
        raise ValueError("population size must be at least 1")
    return DesignSpec(kind="bernoulli", n_units=n, n_rounds=4, probs=RAMP_PROBS)


def constant_design(n: int, n_rounds: int, value: int) -> DesignSpec:
    return DesignSpec(kind="constant", n_units=n, n_rounds=n_rounds, value=value)

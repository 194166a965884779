"""Scenario config files.

Line-oriented text with bracketed sections and ``key = value`` entries. The
grammar, in full:

* blank lines and lines starting with ``#`` are ignored;
* ``[section]`` opens one of: population, weights, dynamics, design,
  estimators, run;
* ``key = value`` assigns within the current section;
* values are typed: integers, floats, booleans (true/false), bare strings, or
  comma-separated lists of any of these.

Unknown sections and unknown keys are rejected, never ignored; errors name the
offending ``section.key``. See the README for the key reference and defaults.
"""

from __future__ import annotations

import hashlib

from .design import DesignSpec, RAMP_PROBS
from .dynamics import (
    DynamicsSpec,
    LinearPeer,
    LinearUnit,
    MeanFieldThreshold,
    SaturatingUnit,
    WeightedSumExposure,
    ZeroPeer,
)
from .estimators import FeatureSpec
from .harness import KNOWN_ESTIMATORS, ScenarioConfig, WeightConfig


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


SECTIONS = {
    "population": {"n_units", "n_rounds", "baseline_mean", "baseline_sd"},
    "weights": {
        "kind",
        "mu",
        "sigma2",
        "mu_t",
        "sigma2_t",
        "n_clusters",
        "w_in",
        "w_out",
        "influencers",
        "w_inf",
        "w_base",
        "matrix_path",
    },
    "dynamics": {
        "unit",
        "w_coef",
        "y_coef",
        "x_coef",
        "intercept",
        "trend",
        "scale",
        "peer",
        "peer_w",
        "peer_y",
        "exposure",
        "tau",
        "strength",
        "noise_sd",
    },
    "design": {"kind", "probs", "value"},
    "estimators": {"use", "features_ese_basic", "features_ese_cluster", "features_ese_influencer"},
    "run": {"seed", "reps", "fixed_network"},
}


def _parse_scalar(raw: str):
    text = raw.strip()
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(raw: str):
    if "," in raw:
        return [_parse_scalar(part) for part in raw.split(",")]
    return _parse_scalar(raw)


def parse_document(text: str) -> dict[str, dict[str, object]]:
    """Parse the raw document into {section: {key: typed value}}, enforcing the
    schema strictly."""
    data: dict[str, dict[str, object]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            data.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: assignment before any [section]")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in SECTIONS[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        if key in data[section]:
            raise ConfigError(f"duplicate key {section}.{key}")
        data[section][key] = _parse_value(raw)
    return data


class _Section:
    """Typed accessors over one parsed section, with error messages that name
    the section.key path."""

    def __init__(self, name: str, values: dict[str, object]):
        self.name = name
        self.values = dict(values)

    def get_int(self, key: str, default=None) -> int:
        val = self.values.get(key, default)
        if val is default and key not in self.values:
            return default
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{self.name}.{key} must be an integer, got {val!r}")
        return val

    def get_float(self, key: str, default=None) -> float:
        val = self.values.get(key, default)
        if val is default and key not in self.values:
            return default
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{self.name}.{key} must be a number, got {val!r}")
        return float(val)

    def get_bool(self, key: str, default=None) -> bool:
        val = self.values.get(key, default)
        if val is default and key not in self.values:
            return default
        if not isinstance(val, bool):
            raise ConfigError(f"{self.name}.{key} must be true or false, got {val!r}")
        return val

    def get_str(self, key: str, default=None) -> str:
        val = self.values.get(key, default)
        if val is default and key not in self.values:
            return default
        if not isinstance(val, str):
            raise ConfigError(f"{self.name}.{key} must be a string, got {val!r}")
        return val

    def get_list(self, key: str, default=None) -> list:
        if key not in self.values:
            return default
        val = self.values[key]
        return val if isinstance(val, list) else [val]


def parse_config(text: str) -> ScenarioConfig:
    """Validate a config document and build the scenario it describes."""
    data = parse_document(text)
    population = _Section("population", data.get("population", {}))
    weights_sec = _Section("weights", data.get("weights", {}))
    dynamics_sec = _Section("dynamics", data.get("dynamics", {}))
    design_sec = _Section("design", data.get("design", {}))
    estimators_sec = _Section("estimators", data.get("estimators", {}))
    run_sec = _Section("run", data.get("run", {}))

    n_units = population.get_int("n_units", 0)
    if n_units < 1:
        raise ConfigError(f"population.n_units must be a positive integer, got {n_units}")
    n_rounds = population.get_int("n_rounds", 4)
    if n_rounds < 1:
        raise ConfigError(f"population.n_rounds must be a positive integer, got {n_rounds}")
    baseline_mean = population.get_float("baseline_mean", 0.0)
    baseline_sd = population.get_float("baseline_sd", 1.0)
    if baseline_sd < 0:
        raise ConfigError("population.baseline_sd must be non-negative")

    weights = _parse_weights(weights_sec)
    dynamics = _parse_dynamics(dynamics_sec)
    design = _parse_design(design_sec, n_units, n_rounds)

    use = estimators_sec.get_list("use", ["dm", "ht", "ese_basic"])
    estimators = tuple(str(e).strip() for e in use)
    for est in estimators:
        if est not in KNOWN_ESTIMATORS:
            raise ConfigError(f"estimators.use names unknown estimator {est!r}")
    overrides = {}
    for est in ("ese_basic", "ese_cluster", "ese_influencer"):
        key = f"features_{est}"
        items = estimators_sec.get_list(key)
        if items is not None:
            try:
                overrides[est] = FeatureSpec.parse([str(s).strip() for s in items])
            except ValueError as exc:
                raise ConfigError(f"estimators.{key}: {exc}") from exc

    seed = run_sec.get_int("seed", 0)
    if seed < 0:
        raise ConfigError("run.seed must be non-negative")
    reps = run_sec.get_int("reps", 1)
    if reps < 1:
        raise ConfigError("run.reps must be at least 1")
    fixed_network = run_sec.get_bool("fixed_network", False)

    try:
        return ScenarioConfig(
            n_units=n_units,
            n_rounds=n_rounds,
            weights=weights,
            dynamics=dynamics,
            design=design,
            estimators=estimators,
            feature_overrides=overrides,
            baseline_mean=baseline_mean,
            baseline_sd=baseline_sd,
            base_seed=seed,
            n_reps=reps,
            fixed_network=fixed_network,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_weights(sec: _Section) -> WeightConfig:
    kind = sec.get_str("kind", "dense_gaussian")
    if kind == "dense_gaussian":
        return WeightConfig(
            kind=kind,
            mu=sec.get_float("mu", 0.0),
            sigma2=sec.get_float("sigma2", 0.0),
            mu_t=sec.get_float("mu_t", 0.0),
            sigma2_t=sec.get_float("sigma2_t", 0.0),
        )
    if kind == "clustered":
        n_clusters = sec.get_int("n_clusters", 2)
        if n_clusters < 1:
            raise ConfigError("weights.n_clusters must be at least 1")
        return WeightConfig(
            kind=kind,
            n_clusters=n_clusters,
            w_in=sec.get_float("w_in", 0.0),
            w_out=sec.get_float("w_out", 0.0),
        )
    if kind == "influencer":
        raw = sec.get_list("influencers", [])
        ids = []
        for item in raw:
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigError(f"weights.influencers must list unit ids, got {item!r}")
            ids.append(item)
        if not ids:
            raise ConfigError("weights.influencers must be non-empty for influencer weights")
        return WeightConfig(
            kind=kind,
            influencers=tuple(ids),
            w_inf=sec.get_float("w_inf", 0.0),
            w_base=sec.get_float("w_base", 0.0),
        )
    if kind == "explicit":
        path = sec.get_str("matrix_path")
        if not path:
            raise ConfigError("weights.matrix_path required for explicit weights")
        return WeightConfig(kind=kind, matrix_path=path)
    raise ConfigError(f"weights.kind must be one of dense_gaussian, clustered, influencer, explicit; got {kind!r}")


def _parse_dynamics(sec: _Section) -> DynamicsSpec:
    unit_kind = sec.get_str("unit", "linear")
    x_coef = sec.get_list("x_coef", [])
    x_coef = tuple(float(c) for c in x_coef)
    common = dict(
        w_coef=sec.get_float("w_coef", 0.0),
        y_coef=sec.get_float("y_coef", 1.0),
        x_coef=x_coef,
        intercept=sec.get_float("intercept", 0.0),
        trend=sec.get_float("trend", 0.0),
    )
    if unit_kind == "linear":
        unit = LinearUnit(**common)
    elif unit_kind == "saturating":
        unit = SaturatingUnit(**common, scale=sec.get_float("scale", 1.0))
    else:
        raise ConfigError(f"dynamics.unit must be linear or saturating, got {unit_kind!r}")

    peer_kind = sec.get_str("peer", "zero")
    if peer_kind == "linear":
        peer = LinearPeer(w_coef=sec.get_float("peer_w", 0.0), y_coef=sec.get_float("peer_y", 0.0))
    elif peer_kind == "zero":
        peer = ZeroPeer()
    else:
        raise ConfigError(f"dynamics.peer must be linear or zero, got {peer_kind!r}")

    expo_kind = sec.get_str("exposure", "weighted_sum")
    if expo_kind == "weighted_sum":
        exposure = WeightedSumExposure()
    elif expo_kind == "threshold":
        tau = sec.get_float("tau", 0.5)
        if not 0.0 < tau < 1.0:
            raise ConfigError(f"dynamics.tau must lie strictly inside (0, 1), got {tau}")
        exposure = MeanFieldThreshold(tau=tau, strength=sec.get_float("strength", 1.0))
    else:
        raise ConfigError(f"dynamics.exposure must be weighted_sum or threshold, got {expo_kind!r}")

    noise_sd = sec.get_float("noise_sd", 0.0)
    if noise_sd < 0:
        raise ConfigError("dynamics.noise_sd must be non-negative")
    return DynamicsSpec(unit=unit, peer=peer, exposure=exposure, noise_sd=noise_sd)


def _parse_design(sec: _Section, n_units: int, n_rounds: int) -> DesignSpec:
    kind = sec.get_str("kind", "bernoulli")
    if kind == "bernoulli":
        probs = sec.get_list("probs")
        if probs is None and n_rounds == len(RAMP_PROBS):
            probs = list(RAMP_PROBS)  # the canonical ramp is the default
        if probs is None or len(probs) != n_rounds:
            raise ConfigError(f"design.probs must list {n_rounds} per-round probabilities")
        clean = []
        for p in probs:
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise ConfigError(f"design.probs entries must be numbers, got {p!r}")
            if not 0.0 <= float(p) <= 1.0:
                raise ConfigError(f"design.probs entry {p} outside [0, 1]")
            clean.append(float(p))
        return DesignSpec(kind="bernoulli", n_units=n_units, n_rounds=n_rounds, probs=tuple(clean))
    if kind == "constant":
        value = sec.get_int("value", 0)
        if value not in (0, 1):
            raise ConfigError(f"design.value must be 0 or 1, got {value}")
        return DesignSpec(kind="constant", n_units=n_units, n_rounds=n_rounds, value=value)
    raise ConfigError(f"design.kind must be bernoulli or constant, got {kind!r}")


def config_hash(text: str) -> str:
    """Hash of the raw config document, recorded in run manifests."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

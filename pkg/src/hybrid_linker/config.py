"""Run configuration: one record covering the whole pipeline.

A config can come from a JSON file, from CLI flags, or both; flags win.
Purpose-specific seeds (balancing, fold assignment, fit/validation split)
default to the global seed so a single integer reproduces a whole run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import HybridLinkerError
from .learn import DEFAULT_ENSEMBLE_KIND, ENSEMBLE_KINDS, LearnerParams


class ConfigError(HybridLinkerError):
    """Malformed configuration file or invalid setting."""


def default_textual_params() -> LearnerParams:
    # The sparse high-dimensional channel gets a deeper, longer boosting run.
    return LearnerParams(
        variant="gradient_boosting",
        n_estimators=300,
        max_depth=50,
        learn_rate=0.1,
        min_rows=2,
    )


def default_nontextual_params() -> dict[str, LearnerParams]:
    return {
        "random_forest": LearnerParams(
            variant="random_forest", n_trees=60, max_depth=15, min_rows=2
        ),
        "gradient_boosting": LearnerParams(
            variant="gradient_boosting",
            n_trees=60,
            max_depth=15,
            min_rows=2,
            learn_rate=0.1,
        ),
        "regularized_gradient_boosting": LearnerParams(
            variant="regularized_gradient_boosting",
            n_trees=60,
            max_depth=15,
            min_rows=2,
            learn_rate=0.1,
            reg_lambda=1.0,
        ),
    }


@dataclass(frozen=True)
class Config:
    seed: int = 0
    window_days: int | None = 7
    k: int = 5
    alpha_step: float = 0.05
    threshold: float = 0.5
    tune_on: str = "validation"
    gap_features: bool = True
    identity_top_k: int = 50
    missing_threshold: float = 0.5
    stratified: bool = False
    jobs: int = 1
    max_features: int = 10000
    stopwords_path: str | None = None
    category_map_path: str | None = None
    nontextual_kind: str = DEFAULT_ENSEMBLE_KIND
    balance_seed: int | None = None
    split_seed: int | None = None
    fold_seed: int | None = None
    textual: LearnerParams = field(default_factory=default_textual_params)
    nontextual: dict[str, LearnerParams] = field(
        default_factory=default_nontextual_params
    )

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.tune_on not in ("validation", "test"):
            raise ConfigError("tune_on must be 'validation' or 'test'")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")
        if not 0.0 < self.alpha_step <= 1.0:
            raise ConfigError("alpha_step must lie in (0, 1]")
        if self.window_days is not None and self.window_days < 0:
            raise ConfigError("window_days must be non-negative or null")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.identity_top_k < 1:
            raise ConfigError("identity_top_k must be at least 1")
        if not 0.0 <= self.missing_threshold <= 1.0:
            raise ConfigError("missing_threshold must lie in [0, 1]")
        if self.max_features < 1:
            raise ConfigError("max_features must be positive")
        if self.nontextual_kind not in ENSEMBLE_KINDS:
            raise ConfigError(
                f"nontextual_kind must be one of {sorted(ENSEMBLE_KINDS)}"
            )

    def resolved_balance_seed(self) -> int:
        return self.seed if self.balance_seed is None else self.balance_seed

    def resolved_split_seed(self) -> int:
        return self.seed if self.split_seed is None else self.split_seed

    def resolved_fold_seed(self) -> int:
        return self.seed if self.fold_seed is None else self.fold_seed

    def to_dict(self) -> dict:
        """Full effective config, resolved seeds included."""
        out = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, LearnerParams):
                value = _params_dict(value)
            elif isinstance(value, dict):
                value = {
                    key: _params_dict(val) if isinstance(val, LearnerParams) else val
                    for key, val in sorted(value.items())
                }
            out[item.name] = value
        out["balance_seed"] = self.resolved_balance_seed()
        out["split_seed"] = self.resolved_split_seed()
        out["fold_seed"] = self.resolved_fold_seed()
        return out


def _params_dict(params: LearnerParams) -> dict:
    return {
        "variant": params.variant,
        "n_trees": params.n_trees,
        "max_depth": params.max_depth,
        "min_rows": params.min_rows,
        "learn_rate": params.learn_rate,
        "learn_rate_annealing": params.learn_rate_annealing,
        "n_estimators": params.n_estimators,
        "reg_lambda": params.reg_lambda,
        "epochs": params.epochs,
        "seed": params.seed,
    }


_PARAM_FIELDS = {
    "variant", "n_trees", "max_depth", "min_rows", "learn_rate",
    "learn_rate_annealing", "n_estimators", "reg_lambda", "epochs", "seed",
}


def _params_from_dict(data: dict, default: LearnerParams) -> LearnerParams:
    unknown = set(data) - _PARAM_FIELDS
    if unknown:
        raise ConfigError(f"unknown learner parameter(s): {sorted(unknown)}")
    return replace(default, **data)


def config_from_dict(data: dict) -> Config:
    """Build a Config from a plain dict, typically parsed JSON."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {item.name for item in fields(Config)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    values = dict(data)
    if "textual" in values:
        values["textual"] = _params_from_dict(
            values["textual"], default_textual_params()
        )
    if "nontextual" in values:
        defaults = default_nontextual_params()
        parsed = {}
        for variant, sub in values["nontextual"].items():
            if variant not in defaults:
                raise ConfigError(
                    f"nontextual params allow only ensemble member variants, "
                    f"got {variant!r}"
                )
            parsed[variant] = _params_from_dict(sub, defaults[variant])
        merged = defaults
        merged.update(parsed)
        values["nontextual"] = merged
    try:
        return Config(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> Config:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(data)


def apply_overrides(config: Config, **overrides) -> Config:
    """Replace settings whose override value is not None; flags win."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    if not changes:
        return config
    return replace(config, **changes)

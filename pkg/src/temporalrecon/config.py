"""Declarative run configuration (YAML or JSON) validated with pydantic.

Unknown keys are rejected so a misspelt option cannot silently fall back
to a default.
"""

import json
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .hierarchy import TemporalHierarchy
from .reconcile import parse_method


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ArmaDraw(_Strict):
    """Random stationary ARMA(p, q) bottom processes."""

    p: int = Field(ge=0)
    q: int = Field(ge=0)
    draws: int = Field(ge=1)
    series_per_draw: int = Field(ge=1)


class AutoSelect(_Strict):
    max_p: int = Field(2, ge=0)
    max_q: int = Field(2, ge=0)
    d: int = Field(0, ge=0)


def _check_ks(ks):
    try:
        TemporalHierarchy(tuple(ks))
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    return [int(k) for k in ks]


def _check_methods(methods):
    for m in methods:
        parse_method(m)
    return methods


class ScenarioConfig(_Strict):
    """Simulation grid: every combination of the list-valued fields is one scenario.

    Exactly one of ``phi`` (AR(1) bottom processes) and ``arma_draw`` must be set.
    With ``arma_draw`` the replications of one draw are its ``series_per_draw``
    series and ``replications`` is ignored.
    """

    n_top: List[int]
    phi: Optional[List[float]] = None
    arma_draw: Optional[ArmaDraw] = None
    sigma2: List[float] = [1.0]
    ks: List[List[int]]
    h: List[int] = [1]
    mode: Literal["fixed", "auto"] = "fixed"
    auto: AutoSelect = AutoSelect()
    replications: int = Field(50, ge=1)
    train_frac: float = 0.75
    seed: int = 0
    methods: List[str] = ["bottom_up", "full", "ols", "spectral"]

    @field_validator("n_top", "h")
    @classmethod
    def _positive(cls, v):
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a nonempty list of positive integers")
        return v

    @field_validator("sigma2")
    @classmethod
    def _variances(cls, v):
        if not v or any(not x > 0 for x in v):
            raise ValueError("must be a nonempty list of positive variances")
        return v

    @field_validator("phi")
    @classmethod
    def _phis(cls, v):
        if v is not None and (not v or any(not abs(x) < 1 for x in v)):
            raise ValueError("AR parameters must lie in (-1, 1)")
        return v

    @field_validator("ks")
    @classmethod
    def _hierarchies(cls, v):
        if not v:
            raise ValueError("need at least one hierarchy")
        return [_check_ks(ks) for ks in v]

    @field_validator("train_frac")
    @classmethod
    def _fraction(cls, v):
        if not 0 < v < 1:
            raise ValueError("train_frac must lie in (0, 1)")
        return v

    @field_validator("methods")
    @classmethod
    def _methods(cls, v):
        return _check_methods(v)

    @model_validator(mode="after")
    def _one_process(self):
        if (self.phi is None) == (self.arma_draw is None):
            raise ValueError("set exactly one of 'phi' and 'arma_draw'")
        return self


class DatasetSpec(_Strict):
    """Real-data run on one bottom-level series read from CSV.

    Orders come from ``orders`` (per factor), from ``bottom_order`` through
    the aggregation bound, or from AICc selection when ``auto`` is set.
    """

    input: str
    value_column: str = "value"
    frequency: Optional[int] = Field(None, ge=1)
    ks: List[int]
    train_frac: float = 0.8
    demean: bool = False
    h: int = Field(1, ge=1)
    orders: Optional[dict[int, List[int]]] = None
    bottom_order: Optional[List[int]] = None
    auto: Optional[AutoSelect] = None
    methods: List[str] = ["bottom_up", "full", "spectral", "ols"]

    @field_validator("ks")
    @classmethod
    def _hierarchy(cls, v):
        return _check_ks(v)

    @field_validator("train_frac")
    @classmethod
    def _fraction(cls, v):
        if not 0 < v < 1:
            raise ValueError("train_frac must lie in (0, 1)")
        return v

    @field_validator("methods")
    @classmethod
    def _methods(cls, v):
        return _check_methods(v)

    @field_validator("bottom_order")
    @classmethod
    def _order(cls, v):
        if v is not None and (len(v) != 3 or min(v) < 0):
            raise ValueError("bottom_order must be [p, d, q] with nonnegative entries")
        return v

    @model_validator(mode="after")
    def _one_order_source(self):
        given = sum(x is not None for x in (self.orders, self.bottom_order, self.auto))
        if given != 1:
            raise ValueError("set exactly one of 'orders', 'bottom_order' and 'auto'")
        if self.orders is not None:
            if set(self.orders) != set(self.ks):
                raise ValueError(f"orders must name every factor in {self.ks}")
            for k, o in self.orders.items():
                if len(o) != 3 or min(o) < 0:
                    raise ValueError(f"order for factor {k} must be [p, d, q]")
        return self


def load_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def parse_config(text, model, overrides=None):
    """Validate YAML/JSON ``text`` against ``model``; ``overrides`` replace keys."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def canonical_text(cfg):
    """Stable serialisation used for the config hash in output headers."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


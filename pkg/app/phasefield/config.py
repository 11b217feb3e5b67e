"""YAML run configuration and potential files.

A run configuration supplies defaults for CLI flags; flags given on the
command line always win. Both file kinds are parsed with ``yaml.safe_load``
and validated by marshmallow schemas that reject unknown keys, so a typo in a
key fails loudly instead of silently falling back to a default.
"""
from __future__ import annotations

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import yaml
from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from app.phasefield.errors import ConfigReadError
from app.phasefield.potentials import DOUBLE_WELL, POLYNOMIAL, Potential
from app.phasefield.relaxation import SCHEMES

logger = logging.getLogger(__name__)

CONFIG_ENV = "PHASEFIELD_CONFIG"


class FlowSchema(Schema):
    scheme = fields.String(validate=validate.OneOf(SCHEMES))
    dt = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    max_steps = fields.Integer(validate=validate.Range(min=1))
    energy_tol = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    init_amplitude = fields.Float(validate=validate.Range(min=0))
    init_band = fields.Integer(validate=validate.Range(min=1))
    stabilization = fields.Float(allow_none=True, validate=validate.Range(min=0))

    class Meta:
        unknown = "raise"


class RunConfigSchema(Schema):
    """Keys mirror the CLI flags, with dashes as underscores."""

    model = fields.String(validate=validate.OneOf(["pfc", "ok"]))
    alpha = fields.Float()
    gamma = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    m = fields.Float()
    a = fields.Float()
    potential_file = fields.String()
    dim = fields.Integer(validate=validate.OneOf([1, 2, 3]))
    grid = fields.List(fields.Integer(validate=validate.Range(min=2)), validate=validate.Length(min=1, max=3))
    band = fields.Integer(validate=validate.Range(min=2))
    restarts = fields.Integer(validate=validate.Range(min=1))
    seed = fields.Integer()
    threads = fields.Integer(validate=validate.Range(min=1))
    format = fields.String(validate=validate.OneOf(["ndjson", "csv"]))
    out = fields.String()
    witness_dir = fields.String()
    m_range = fields.List(fields.Float(), validate=validate.Length(equal=3))
    a_range = fields.List(fields.Float(), validate=validate.Length(equal=2))
    resolution = fields.Integer(validate=validate.Range(min=1))
    bisect_tol = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    h_list = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)), validate=validate.Length(min=1))
    L_list = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)), validate=validate.Length(min=1))
    flow = fields.Nested(FlowSchema)

    class Meta:
        unknown = "raise"


class PotentialSchema(Schema):
    kind = fields.String(required=True, validate=validate.OneOf([DOUBLE_WELL, POLYNOMIAL]))
    a = fields.Float()
    coefficients = fields.List(fields.Float(), validate=validate.Length(min=1))
    w = fields.Float(allow_none=True, validate=validate.Range(min=0))

    class Meta:
        unknown = "raise"

    @validates_schema
    def _check_kind(self, data: dict[str, Any], **kwargs: Any) -> None:
        if data["kind"] == DOUBLE_WELL:
            if "a" not in data:
                raise ValidationError("a double_well potential needs 'a'")
            if "coefficients" in data or "w" in data:
                raise ValidationError("a double_well potential takes only 'a'")
        elif "coefficients" not in data:
            raise ValidationError("a polynomial potential needs 'coefficients'")
        elif "a" in data:
            raise ValidationError("'a' belongs to double_well potentials")


def _validation_message(exc: ValidationError) -> str:
    messages = exc.messages
    if isinstance(messages, list):
        return "; ".join(str(message) for message in messages)
    return str(messages)


def resolve_config_file(explicit: str | None, env: Mapping[str, str]) -> str | None:
    """The run configuration: explicit flag, else $PHASEFIELD_CONFIG, else none."""
    if explicit:
        return explicit
    return env.get(CONFIG_ENV) or None


def _read_yaml_mapping(path: Path) -> dict[str, Any]:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigReadError(f"Could not read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigReadError(f"{path} is not valid YAML: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigReadError(f"{path} does not contain a mapping")
    return raw


def load_run_config(path: Path) -> dict[str, Any]:
    raw = _read_yaml_mapping(path)
    try:
        loaded = RunConfigSchema().load(raw)
    except ValidationError as exc:
        raise ConfigReadError(f"{path}: {_validation_message(exc)}") from exc
    logger.debug("Loaded run configuration %s: %s", path, sorted(loaded))
    return loaded


def potential_from_mapping(data: Mapping[str, Any]) -> Potential:
    try:
        loaded = PotentialSchema().load(dict(data))
    except ValidationError as exc:
        raise ConfigReadError(_validation_message(exc)) from exc
    if loaded["kind"] == DOUBLE_WELL:
        return Potential.double_well(loaded["a"])
    return Potential.polynomial(loaded["coefficients"], loaded.get("w"))


def load_potential_file(path: Path) -> Potential:
    raw = _read_yaml_mapping(path)
    try:
        return potential_from_mapping(raw)
    except ConfigReadError as exc:
        raise ConfigReadError(f"{path}: {exc}") from exc

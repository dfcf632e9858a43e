"""
Run configuration files: plain ``key = value`` text read with python-dotenv.

Dotted keys address nested sections (``regularizer.lambda_v = 0.001``, ``solver.method = rk4``),
plain keys address the training fields (``iterations``, ``seed``, ``preset``). The merged result
validates into :class:`schemas.training.RunConfig`.
"""
import logging
import typing
from pathlib import Path

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from config.config import settings
from exceptions import ConfigError
from schemas.training import PRESETS, RunConfig

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def _field_annotation(model: type[BaseModel], key: str):
    head, _, rest = key.partition(".")
    field = model.model_fields.get(head)
    if field is None:
        raise ConfigError(f"unknown configuration key '{key}'")
    annotation = field.annotation
    if rest:
        if not (isinstance(annotation, type) and issubclass(annotation, BaseModel)):
            raise ConfigError(f"unknown configuration key '{key}': '{head}' has no sub-keys")
        return _field_annotation(annotation, rest)
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        raise ConfigError(f"configuration key '{key}' names a section; set one of its fields instead")
    return annotation


def _coerce(key: str, raw, annotation):
    if typing.get_origin(annotation) is tuple and isinstance(raw, str):
        return tuple(item.strip() for item in raw.split(",") if item.strip())
    return raw


def nest(flat: dict) -> dict:
    """
    Turn dotted assignments into nested dictionaries, rejecting unknown keys.

    :param flat: ``{"regularizer.lambda_v": "0.001", "seed": "3"}``.
    :type flat: dict
    :return: ``{"regularizer": {"lambda_v": "0.001"}, "seed": "3"}``.
    :rtype: dict
    :raises ConfigError: unknown key or key without a value.
    """
    nested: dict = {}
    for key, raw in flat.items():
        key = key.strip()
        if raw is None:
            raise ConfigError(f"configuration key '{key}' has no value")
        annotation = _field_annotation(RunConfig, key)
        *sections, leaf = key.split(".")
        target = nested
        for section in sections:
            target = target.setdefault(section, {})
        target[leaf] = _coerce(key, raw, annotation)
    return nested


def _merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _validate(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in err.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from None


def parse_assignments(items: list[str] | None) -> dict[str, str]:
    """``["a.b=1", "c = x"]`` -> ``{"a.b": "1", "c": "x"}``."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override '{item}' is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def load_run_config(path: Path | str | None = None, overrides: dict | None = None) -> RunConfig:
    """
    Read a run configuration file and apply command-line overrides on top.

    :param path: ``key = value`` file, or None for defaults only.
    :type path: Path | str | None
    :param overrides: dotted assignments that win over the file.
    :type overrides: dict | None
    :rtype: RunConfig
    :raises ConfigError: missing file, unknown key or invalid value.
    """
    flat: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file '{path}' does not exist")
        flat.update(dotenv_values(path))
    flat.update(overrides or {})
    cfg = _validate(nest(flat))
    logger.debug(f"run configuration: {flatten(cfg)}")
    return cfg


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """New configuration with dotted ``overrides`` applied to ``cfg``."""
    update = nest(overrides)
    base = cfg.model_dump()
    if "preset" in update:
        for key in PRESETS[cfg.preset]:
            if key not in update:
                base.pop(key, None)
    return _validate(_merge(base, update))


def _format(value) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_format(item) for item in value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def flatten(cfg: BaseModel, prefix: str = "") -> dict[str, str]:
    """Dotted ``key -> value`` strings of every field, sections included."""
    out: dict[str, str] = {}
    for name in type(cfg).model_fields:
        value = getattr(cfg, name)
        key = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            out.update(flatten(value, f"{key}."))
        else:
            out[key] = _format(value)
    return out


def dump_assignments(flat: dict[str, str]) -> str:
    return "".join(f"{key} = {flat[key]}\n" for key in sorted(flat))

"""Flat key=value experiment configs with sections and strict keys.

A config file is plain text: ``[section]`` headers followed by
``key = value`` lines, ``#`` comments, blank lines ignored.  Every
section must belong to a registered schema and every key to its section;
anything else is an error with a line diagnostic.  Values are typed by
the schema (int, float, bool, str, or comma-separated lists).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..errors import ConfigError

__all__ = ["Option", "Schema", "parse_config", "resolve_section", "config_hash", "render_config"]


@dataclass(frozen=True)
class Option:
    name: str
    kind: str  # int | float | bool | str | ints | floats | strs
    default: object
    check: object = None  # optional predicate, called with the parsed value
    help: str = ""


class Schema:
    def __init__(self, section: str, options: list[Option]):
        self.section = section
        self.options = {o.name: o for o in options}

    def defaults(self) -> dict:
        return {name: o.default for name, o in self.options.items()}


def _parse_value(raw: str, kind: str, where: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "str":
            return raw
        if kind == "ints":
            return tuple(int(p.strip(), 0) for p in raw.split(",") if p.strip())
        if kind == "floats":
            return tuple(float(p.strip()) for p in raw.split(",") if p.strip())
        if kind == "strs":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown value kind {kind!r}")


def parse_config(text: str, schemas: dict[str, Schema], path: str = "<config>") -> dict[str, dict]:
    """Parse a config file into {section: {key: typed value}}.

    Returns only the sections present; fill in defaults per section with
    resolve_section.  Unknown sections and unknown keys are errors.
    """
    out: dict[str, dict] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{path}:{lineno}"
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"{where}: unterminated section header {line.strip()!r}")
            name = body[1:-1].strip()
            if name not in schemas:
                known = ", ".join(sorted(schemas))
                raise ConfigError(f"{where}: unknown section [{name}] (known: {known})")
            section = name
            out.setdefault(name, {})
            continue
        if "=" not in body:
            raise ConfigError(f"{where}: expected key = value, got {line.strip()!r}")
        if section is None:
            raise ConfigError(f"{where}: key outside any [section]")
        key, raw = body.split("=", 1)
        key = key.strip()
        schema = schemas[section]
        if key not in schema.options:
            known = ", ".join(sorted(schema.options))
            raise ConfigError(f"{where}: unknown key {key!r} in [{section}] (known: {known})")
        if key in out[section]:
            raise ConfigError(f"{where}: duplicate key {key!r} in [{section}]")
        opt = schema.options[key]
        val = _parse_value(raw, opt.kind, where)
        if opt.check is not None and not opt.check(val):
            raise ConfigError(f"{where}: value {raw.strip()!r} rejected for {section}.{key}")
        out[section][key] = val
    return out


def resolve_section(parsed: dict[str, dict], schema: Schema, overrides: dict | None = None) -> dict:
    """Section values with defaults filled in and overrides applied last."""
    cfg = schema.defaults()
    cfg.update(parsed.get(schema.section, {}))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in schema.options:
            raise ConfigError(f"override of unknown key {key!r} in [{schema.section}]")
        cfg[key] = val
    for name, opt in schema.options.items():
        if opt.check is not None and not opt.check(cfg[name]):
            raise ConfigError(f"resolved value {cfg[name]!r} rejected for {schema.section}.{name}")
    return cfg


def _canon(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, tuple):
        return ",".join(_canon(x) for x in v)
    return str(v)


def render_config(section: str, cfg: dict) -> str:
    """Canonical text form of a resolved section, stable across runs."""
    lines = [f"[{section}]"]
    for key in sorted(cfg):
        lines.append(f"{key} = {_canon(cfg[key])}")
    return "\n".join(lines) + "\n"


def config_hash(section: str, cfg: dict, seed: int) -> str:
    """Short digest of the resolved config and seed; threads and output
    location are excluded since they must not change results."""
    blob = render_config(section, cfg) + f"seed = {seed}\n"
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

"""Flat key/value study configuration.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored.  Keys are dotted (section.option) and drawn from a fixed schema;
unknown keys are rejected with the offending line number.
"""

from __future__ import annotations

__all__ = ["ConfigError", "SCHEMA", "parse_config", "read_config"]


class ConfigError(ValueError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)
        self.lineno = lineno


def _as_float(text):
    return float(text)


def _as_int(text):
    v = int(text, 10)
    return v


def _as_float_list(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _as_str(text):
    return text


# key -> (parser, default); defaults of None mean "case catalog decides"
SCHEMA = {
    "case.name": (_as_str, None),
    "mesh.h0": (_as_float, 0.1),
    "mesh.levels": (_as_int, 3),
    "mesh.scale": (_as_float, 0.4),
    "solver.tol": (_as_float, 1e-10),
    "solver.max_iter": (_as_int, 50),
    "smoothing.eps": (_as_float, 1e-3),
    "smoothing.eps_schedule": (_as_float_list, None),
    "friction.name": (_as_str, None),
    "friction.params": (_as_float_list, None),
    "material.name": (_as_str, None),
    "output.dir": (_as_str, "out"),
    "output.format": (_as_str, "csv"),
}


def parse_config(text):
    """Parse config text into a dict over SCHEMA keys (defaults filled in)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            known = ", ".join(sorted(SCHEMA))
            raise ConfigError(lineno, f"unknown key {key!r} (known: {known})")
        if key in values:
            raise ConfigError(lineno, f"duplicate key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(lineno, f"bad value for {key!r}: {exc}") from None
    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    if values["case.name"] is None:
        raise ConfigError(0, "missing required key 'case.name'")
    if values["output.format"] not in ("csv", "json"):
        raise ConfigError(0, "output.format must be 'csv' or 'json'")
    if values["mesh.h0"] <= 0 or values["mesh.scale"] <= 0:
        raise ConfigError(0, "mesh.h0 and mesh.scale must be positive")
    if values["mesh.levels"] < 1:
        raise ConfigError(0, "mesh.levels must be >= 1")
    sched = values["smoothing.eps_schedule"]
    if sched is not None:
        if len(sched) < 2 or any(b >= a for a, b in zip(sched, sched[1:])):
            raise ConfigError(0, "smoothing.eps_schedule must be strictly decreasing")
    return values


def read_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(0, f"cannot read config {path!r}: {exc}") from None
    return parse_config(text)

"""Structured-text (TOML) reading/writing shared by scene and sounder files.

Both file kinds carry ``schema = 1`` at top level and are validated against a
key layout; unknown keys are rejected with the offending line number.
"""
import re

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Schema violation in a scene or sounder file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


def _find_line(text, key):
    pat = re.compile(r"^\s*(\[\[?\s*)?" + re.escape(key) + r"\s*(=|\]\]?)")
    for i, ln in enumerate(text.splitlines(), start=1):
        if pat.match(ln):
            return i
    return None


def parse(text, layout, path=None):
    """Parse TOML ``text`` and check it against ``layout``.

    ``layout`` maps allowed top-level keys to ``None`` (scalar/array) or to a
    nested layout dict (table, or array of tables when wrapped in a list).
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), int(m.group(1)) if m else None, path) from None
    if "schema" not in data:
        raise ConfigError("missing 'schema' key", 1, path)
    if data["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {data['schema']!r}, expected {SCHEMA_VERSION}",
                          _find_line(text, "schema"), path)
    _check(data, layout, text, path, "")
    return data


def _check(data, layout, text, path, prefix):
    for key, value in data.items():
        if key not in layout:
            raise ConfigError(f"unknown key '{prefix}{key}'", _find_line(text, key), path)
        sub = layout[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{prefix}{key}' must be a table", _find_line(text, key), path)
            _check(value, sub, text, path, prefix + key + ".")
        elif isinstance(sub, list):
            if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
                raise ConfigError(f"'{prefix}{key}' must be an array of tables",
                                  _find_line(text, key), path)
            for item in value:
                _check(item, sub[0], text, path, prefix + key + ".")
        elif isinstance(value, dict):
            raise ConfigError(f"'{prefix}{key}' must not be a table", _find_line(text, key), path)


_TYPE_NAMES = {bool: "a boolean", int: "an integer", float: "a number", str: "a string", list: "an array"}


def _type_ok(value, kind):
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, kind)


def check_types(data, types, text, path=None, prefix=""):
    """Check scalar value types; ``types`` maps key -> type or nested dict."""
    for key, kind in types.items():
        if key not in data:
            continue
        value = data[key]
        if isinstance(kind, dict):
            if isinstance(value, dict):
                check_types(value, kind, text, path, prefix + key + ".")
            continue
        if not _type_ok(value, kind):
            raise ConfigError(f"'{prefix}{key}' must be {_TYPE_NAMES[kind]}, got {value!r}",
                              _find_line(text, key), path)


def line_for_message(text, message, keys):
    """Line of the first key named in ``message`` that the text sets (for value errors), else None."""
    for key in sorted(keys, key=len, reverse=True):
        if re.search(r"\b" + re.escape(key) + r"\b", message):
            line = _find_line(text, key)
            if line is not None:
                return line
    return None


def require(data, key, text=None, path=None, where=""):
    if key not in data:
        raise ConfigError(f"missing required key '{where}{key}'", None, path)
    return data[key]


def dumps(data):
    return tomli_w.dumps(data)


def loads(text):
    """Plain TOML parse, no schema check (for files this package wrote itself)."""
    return tomllib.loads(text)

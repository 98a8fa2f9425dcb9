"""Declared strategy parameters and their parsing from CLI strings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Tuple


class ParamError(ValueError):
    """A strategy parameter is unknown, malformed or out of range."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(p) for p in text.split(":") if p.strip())


_PARSERS = {"float": float, "int": int, "str": str, "bool": _parse_bool, "floats": _parse_floats}


@dataclass(frozen=True)
class Param:
    name: str
    kind: str
    default: Any
    help: str = ""
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""
    choices: Optional[Tuple[str, ...]] = None

    def parse(self, raw: Any) -> Any:
        if isinstance(raw, str):
            try:
                value = _PARSERS[self.kind](raw)
            except ValueError as exc:
                raise ParamError(f"{self.name}: cannot parse {raw!r} as {self.kind}") from exc
        else:
            value = raw
        return self.validate(value)

    def validate(self, value: Any) -> Any:
        if value is None:
            return value
        if self.kind == "int" and isinstance(value, float) and value.is_integer():
            value = int(value)
        if self.kind == "float" and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if self.kind == "floats" and not isinstance(value, tuple):
            value = tuple(float(v) for v in value)
        if self.choices is not None and value not in self.choices:
            raise ParamError(f"{self.name} must be one of {', '.join(self.choices)}, got {value!r}")
        if self.check is not None and not self.check(value):
            raise ParamError(f"{self.name}={value!r} out of range ({self.rule})")
        return value

    def describe(self) -> dict:
        out = {"name": self.name, "type": self.kind, "default": self.default, "help": self.help}
        if self.rule:
            out["rule"] = self.rule
        if self.choices:
            out["choices"] = list(self.choices)
        return out


def positive(name, kind, default, help=""):
    return Param(name, kind, default, help, lambda v: v > 0, "> 0")


def parse_kv(text: str, sep: str = ",") -> dict:
    """'a=1,b=2' -> {'a': '1', 'b': '2'}."""
    out = {}
    if not text:
        return out
    for part in text.split(sep):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ParamError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out

"""Minimal dense ARFF reader/writer, enough for ASlib scenario files.

Missing values (``?``) are represented as ``None``. Numeric attributes
(``numeric``, ``real``, ``integer``) parse to ``float``; nominal, string and
date attributes stay ``str``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import MalformedArff

Value = Optional[Union[float, str]]

NUMERIC = "numeric"
STRING = "string"
NOMINAL = "nominal"
DATE = "date"

_NUMERIC_TYPES = {"numeric", "real", "integer"}
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"', "%": "%"}


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str
    values: tuple[str, ...] = ()  # nominal domain, declaration order


@dataclass
class Relation:
    name: str
    attributes: list[Attribute]
    rows: list[list[Value]] = field(default_factory=list)

    def column_index(self, name: str) -> int:
        lowered = name.lower()
        for i, attr in enumerate(self.attributes):
            if attr.name.lower() == lowered:
                return i
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]


def _read_quoted(text: str, i: int, lineno: int) -> tuple[str, int]:
    """Read a quoted token starting at ``text[i]``; return it and the index after it."""
    quote = text[i]
    i += 1
    buf = []
    n = len(text)
    while True:
        if i >= n:
            raise MalformedArff(lineno, "unterminated quoted value")
        ch = text[i]
        if ch == "\\" and i + 1 < n:
            buf.append(_ESCAPES.get(text[i + 1], text[i + 1]))
            i += 2
        elif ch == quote:
            return "".join(buf), i + 1
        else:
            buf.append(ch)
            i += 1


def _split_values(text: str, lineno: int) -> list[tuple[str, bool]]:
    """Split a comma-separated ARFF line into (token, was_quoted) pairs."""
    out: list[tuple[str, bool]] = []
    i, n = 0, len(text)
    while True:
        while i < n and text[i] in " \t":
            i += 1
        if i < n and text[i] in "'\"":
            token, i = _read_quoted(text, i, lineno)
            out.append((token, True))
            while i < n and text[i] in " \t":
                i += 1
            if i < n and text[i] != ",":
                raise MalformedArff(lineno, f"unexpected character after quoted value: {text[i]!r}")
        else:
            j = text.find(",", i)
            j = n if j < 0 else j
            out.append((text[i:j].strip(" \t"), False))
            i = j
        if i >= n:
            return out
        i += 1  # skip comma


def _parse_attribute(rest: str, lineno: int) -> Attribute:
    rest = rest.strip()
    if rest[:1] in "'\"":
        name, end = _read_quoted(rest, 0, lineno)
        type_part = rest[end:].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise MalformedArff(lineno, "attribute declaration without type")
        name, type_part = parts
    if type_part.startswith("{"):
        if not type_part.endswith("}"):
            raise MalformedArff(lineno, "unterminated nominal domain")
        inner = type_part[1:-1]
        domain = tuple(tok for tok, _ in _split_values(inner, lineno)) if inner.strip() else ()
        return Attribute(name, NOMINAL, domain)
    kind = type_part.split(None, 1)[0].lower()
    if kind in _NUMERIC_TYPES:
        return Attribute(name, NUMERIC)
    if kind == "string":
        return Attribute(name, STRING)
    if kind == "date":
        return Attribute(name, DATE)
    raise MalformedArff(lineno, f"unknown attribute type {type_part!r}")


def _convert(token: str, quoted: bool, attr: Attribute, lineno: int) -> Value:
    if not quoted and token == "?":
        return None
    if attr.kind == NUMERIC:
        try:
            return float(token)
        except ValueError:
            raise MalformedArff(lineno, f"non-numeric value {token!r} for {attr.name}") from None
    if attr.kind == NOMINAL and attr.values and token not in attr.values:
        raise MalformedArff(lineno, f"value {token!r} not in domain of {attr.name}")
    return token


def parse_arff(text: str) -> Relation:
    name: str | None = None
    attributes: list[Attribute] = []
    rows: list[list[Value]] = []
    in_data = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip(" \t\r")
        if not line or line.startswith("%"):
            continue
        if not in_data:
            parts = line.split(None, 1)
            keyword = parts[0].lower()
            rest = parts[1] if len(parts) > 1 else ""
            if keyword == "@relation":
                rest = rest.strip()
                name = _read_quoted(rest, 0, lineno)[0] if rest[:1] in "'\"" else rest
            elif keyword == "@attribute":
                attributes.append(_parse_attribute(rest, lineno))
            elif keyword == "@data":
                if not attributes:
                    raise MalformedArff(lineno, "@data before any @attribute")
                in_data = True
            else:
                raise MalformedArff(lineno, f"unexpected header line {line[:40]!r}")
            continue
        if line.startswith("{"):
            raise MalformedArff(lineno, "sparse ARFF rows are not supported")
        tokens = _split_values(line, lineno)
        if len(tokens) != len(attributes):
            raise MalformedArff(
                lineno, f"row has {len(tokens)} values, expected {len(attributes)}"
            )
        rows.append([_convert(t, q, a, lineno) for (t, q), a in zip(tokens, attributes)])
    if name is None:
        raise MalformedArff(0, "missing @relation")
    if not in_data:
        raise MalformedArff(0, "missing @data section")
    return Relation(name, attributes, rows)


_BARE = re.compile(r"^[^\s,'\"{}%\\]+$")


def _quote(s: str) -> str:
    if s != "?" and _BARE.match(s):
        return s
    escaped = s.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n")
    escaped = escaped.replace("\r", "\\r").replace("\t", "\\t")
    return f"'{escaped}'"


def _format_value(v: Value) -> str:
    if v is None:
        return "?"
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("ARFF cannot represent non-finite numbers")
        return repr(v)
    return _quote(v)


def dump_arff(relation: Relation) -> str:
    lines = [f"@relation {_quote(relation.name)}", ""]
    for attr in relation.attributes:
        if attr.kind == NOMINAL:
            type_part = "{" + ",".join(_quote(v) for v in attr.values) + "}"
        else:
            type_part = attr.kind
        lines.append(f"@attribute {_quote(attr.name)} {type_part}")
    lines += ["", "@data"]
    for row in relation.rows:
        lines.append(",".join(_format_value(v) for v in row))
    return "\n".join(lines) + "\n"


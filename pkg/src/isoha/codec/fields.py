"""Per-field format rules for ISO 8583 data elements.

A :class:`FieldDictionary` maps field numbers to :class:`FieldSpec` entries
describing how each data element is laid out on the wire (fixed width or
LL/LLL length-prefixed) and which character class its value may use.  The
codec consults a compiled form of the dictionary on every encode and decode,
so the dictionary is immutable once built.
"""

from __future__ import annotations

import enum
from array import array
from dataclasses import dataclass, field


class FieldFormat(enum.Enum):
    """Wire layout of a data element."""

    FIXED = "FIXED"  # exactly n characters
    LLVAR = "LLVAR"  # 2-digit decimal length prefix, up to max chars
    LLLVAR = "LLLVAR"  # 3-digit decimal length prefix, up to max chars


class ContentClass(enum.Enum):
    """Allowed character set of a data element value."""

    NUMERIC = "N"  # '0'..'9'
    ALPHANUM = "AN"  # '0'..'9', 'A'..'Z', 'a'..'z'
    ALPHANUMSPECIAL = "ANS"  # printable ASCII 0x20..0x7E


class DictionaryError(ValueError):
    """Raised for an invalid field spec or dictionary definition."""


@dataclass(frozen=True, slots=True)
class FieldSpec:
    """Format rule for one data element."""

    number: int
    format: FieldFormat
    length: int  # exact width for FIXED, maximum for LLVAR/LLLVAR
    content: ContentClass

    def __post_init__(self):
        if not 2 <= self.number <= 128:
            raise DictionaryError(f"field number {self.number} outside 2..128")
        if self.format is FieldFormat.FIXED and self.length < 1:
            raise DictionaryError(f"field {self.number}: FIXED length must be >= 1")
        if self.format is FieldFormat.LLVAR and not 0 < self.length <= 99:
            raise DictionaryError(f"field {self.number}: LLVAR max must be in 1..99")
        if self.format is FieldFormat.LLLVAR and not 0 < self.length <= 999:
            raise DictionaryError(f"field {self.number}: LLLVAR max must be in 1..999")


# Compiled-table codes shared by the pure-Python and C kernels.
KIND_ABSENT = 0
KIND_FIXED = 1
KIND_LLVAR = 2
KIND_LLLVAR = 3

CONTENT_NUMERIC = 0
CONTENT_ALPHANUM = 1
CONTENT_ANS = 2

_KIND_OF_FORMAT = {
    FieldFormat.FIXED: KIND_FIXED,
    FieldFormat.LLVAR: KIND_LLVAR,
    FieldFormat.LLLVAR: KIND_LLLVAR,
}
_CODE_OF_CONTENT = {
    ContentClass.NUMERIC: CONTENT_NUMERIC,
    ContentClass.ALPHANUM: CONTENT_ALPHANUM,
    ContentClass.ALPHANUMSPECIAL: CONTENT_ANS,
}


@dataclass(frozen=True, slots=True)
class CompiledTable:
    """Flat lookup arrays indexed by field number, consumed by the kernels.

    Index 0 and 1 are always KIND_ABSENT; field 1 is the secondary-bitmap
    indicator and never carries data.
    """

    kind: array  # 'b', 129 entries
    length: array  # 'h', 129 entries
    content: array  # 'b', 129 entries


@dataclass(frozen=True)
class FieldDictionary:
    """Immutable map from field number to :class:`FieldSpec`."""

    specs: dict[int, FieldSpec]
    _compiled: CompiledTable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for number, spec in self.specs.items():
            if number == 1:
                raise DictionaryError("field 1 is the secondary-bitmap indicator, not a data field")
            if spec.number != number:
                raise DictionaryError(f"spec for field {spec.number} stored under key {number}")
        kind = array("b", [KIND_ABSENT] * 129)
        length = array("h", [0] * 129)
        content = array("b", [0] * 129)
        for number, spec in self.specs.items():
            kind[number] = _KIND_OF_FORMAT[spec.format]
            length[number] = spec.length
            content[number] = _CODE_OF_CONTENT[spec.content]
        object.__setattr__(self, "_compiled", CompiledTable(kind, length, content))

    @property
    def compiled(self) -> CompiledTable:
        return self._compiled

    def __contains__(self, number: int) -> bool:
        return number in self.specs

    def __getitem__(self, number: int) -> FieldSpec:
        return self.specs[number]


def default_dictionary() -> FieldDictionary:
    """The built-in eight-field table.

    Smallest set covering the financial (0200/0210) and network-management
    (0800/0810) flows this switch carries.
    """
    specs = [
        FieldSpec(2, FieldFormat.LLVAR, 19, ContentClass.NUMERIC),  # PAN
        FieldSpec(3, FieldFormat.FIXED, 6, ContentClass.NUMERIC),  # processing code
        FieldSpec(4, FieldFormat.FIXED, 12, ContentClass.NUMERIC),  # amount
        FieldSpec(7, FieldFormat.FIXED, 10, ContentClass.NUMERIC),  # transmission date-time
        FieldSpec(11, FieldFormat.FIXED, 6, ContentClass.NUMERIC),  # STAN
        FieldSpec(39, FieldFormat.FIXED, 2, ContentClass.ALPHANUM),  # response code
        FieldSpec(41, FieldFormat.FIXED, 8, ContentClass.ALPHANUMSPECIAL),  # terminal id
        FieldSpec(70, FieldFormat.FIXED, 3, ContentClass.NUMERIC),  # network mgmt code
    ]
    return FieldDictionary({s.number: s for s in specs})


_CONTENT_BY_NAME = {c.value: c for c in ContentClass}


def parse_dictionary(text: str, source: str = "<string>") -> FieldDictionary:
    """Parse the line-oriented dictionary format.

    One field per line: ``field=<n> format=<FIXED:n|LLVAR:n|LLLVAR:n>
    content=<N|AN|ANS>``.  ``#`` starts a comment; blank lines are ignored;
    duplicate field numbers are rejected.
    """
    specs: dict[int, FieldSpec] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        pairs = {}
        for token in line.split():
            key, sep, value = token.partition("=")
            if not sep or not value:
                raise DictionaryError(f"{where}: malformed token {token!r}")
            if key in pairs:
                raise DictionaryError(f"{where}: duplicate key {key!r}")
            pairs[key] = value
        missing = {"field", "format", "content"} - pairs.keys()
        if missing:
            raise DictionaryError(f"{where}: missing {', '.join(sorted(missing))}")
        extra = pairs.keys() - {"field", "format", "content"}
        if extra:
            raise DictionaryError(f"{where}: unknown key {', '.join(sorted(extra))}")

        try:
            number = int(pairs["field"])
        except ValueError:
            raise DictionaryError(f"{where}: field number {pairs['field']!r} is not an integer") from None
        fmt_name, sep, fmt_len = pairs["format"].partition(":")
        if not sep or fmt_name not in FieldFormat.__members__:
            raise DictionaryError(f"{where}: bad format {pairs['format']!r}")
        try:
            length = int(fmt_len)
        except ValueError:
            raise DictionaryError(f"{where}: format length {fmt_len!r} is not an integer") from None
        content = _CONTENT_BY_NAME.get(pairs["content"])
        if content is None:
            raise DictionaryError(f"{where}: bad content class {pairs['content']!r}")
        if number in specs:
            raise DictionaryError(f"{where}: duplicate field {number}")
        specs[number] = FieldSpec(number, FieldFormat[fmt_name], length, content)
    return FieldDictionary(specs)


def load_dictionary(path) -> FieldDictionary:
    """Load a dictionary from a file in the format of :func:`parse_dictionary`."""
    with open(path, encoding="ascii") as fh:
        return parse_dictionary(fh.read(), source=str(path))

"""Parser for the nested-bracket plan grammar.

Grammar (whitespace-insensitive between tokens)::

    Plan     := '[' ']' | '[' Step (',' Step)* ']'
    Step     := '[' Token ',' Token ']'
    Token    := quoted string | raw text without top-level ',' or unbalanced brackets

A tolerant pre-extraction pass pulls the plan list out of surrounding prose
first. Failures carry one of exactly two classes: ``format_deviation`` when
no well-formed plan list is extractable, ``unknown_action`` when the list is
well-formed but names an action outside the registry. Format problems always
win over unknown names.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .primitives import ActionStep, Plan, lookup


class FailureKind(Enum):
    FORMAT_DEVIATION = "format_deviation"
    UNKNOWN_ACTION = "unknown_action"


@dataclass(frozen=True)
class Parsed:
    plan: Plan


@dataclass(frozen=True)
class Failed:
    kind: FailureKind
    detail: str
    span: tuple[int, int] | None = None


ParseOutcome = Parsed | Failed


def _balanced_end(text: str, start: int) -> int | None:
    depth = 0
    for i in range(start, len(text)):
        char = text[i]
        if char == "[":
            depth += 1
        elif char == "]":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def extract_candidate(raw: str) -> str | None:
    """Longest balanced bracket region starting with '[[' or equal to '[]'."""
    best: tuple[int, int] | None = None
    for start, char in enumerate(raw):
        if char != "[":
            continue
        end = _balanced_end(raw, start)
        if end is None:
            continue
        inner = raw[start + 1 : end - 1].strip()
        if inner == "" or inner.startswith("["):
            if best is None or end - start > best[1] - best[0]:
                best = (start, end)
    if best is None:
        return None
    return raw[best[0] : best[1]]


class _ParseFailure(Exception):
    def __init__(self, detail: str, pos: int) -> None:
        super().__init__(detail)
        self.detail = detail
        self.pos = pos


class _Scanner:
    __slots__ = ("text", "pos")

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise _ParseFailure(f"expected {char!r} at position {self.pos}", self.pos)
        self.pos += 1

    def read_quoted(self) -> str:
        quote = self.text[self.pos]
        self.pos += 1
        end = self.text.find(quote, self.pos)
        if end < 0:
            raise _ParseFailure("unterminated quoted token", self.pos)
        value = self.text[self.pos : end]
        self.pos = end + 1
        return value

    def read_raw(self) -> str:
        start = self.pos
        depth = 0
        while self.pos < len(self.text):
            char = self.text[self.pos]
            if char == "[":
                depth += 1
            elif char == "]":
                if depth == 0:
                    break
                depth -= 1
            elif char == "," and depth == 0:
                break
            self.pos += 1
        if depth != 0 or self.pos >= len(self.text):
            raise _ParseFailure("unclosed step", start)
        return self.text[start : self.pos].strip()


def _parse_step(scanner: _Scanner) -> tuple[str, str]:
    scanner.expect("[")
    fields: list[str] = []
    while True:
        scanner.skip_ws()
        if scanner.peek() in ("'", '"'):
            value = scanner.read_quoted()
            scanner.skip_ws()
            if scanner.peek() not in (",", "]"):
                raise _ParseFailure("text after closing quote", scanner.pos)
        else:
            value = scanner.read_raw()
        fields.append(value)
        if scanner.peek() == ",":
            scanner.pos += 1
            continue
        scanner.expect("]")
        break
    if len(fields) != 2:
        raise _ParseFailure(f"step has {len(fields)} fields, expected [action, argument]", scanner.pos)
    name, argument = fields
    if not name or not argument:
        raise _ParseFailure("step has an empty field", scanner.pos)
    return name, argument


def _parse_candidate(text: str) -> list[tuple[str, str]]:
    scanner = _Scanner(text)
    scanner.skip_ws()
    scanner.expect("[")
    scanner.skip_ws()
    pairs: list[tuple[str, str]] = []
    if scanner.peek() == "]":
        scanner.pos += 1
    else:
        while True:
            scanner.skip_ws()
            pairs.append(_parse_step(scanner))
            scanner.skip_ws()
            if scanner.peek() == ",":
                scanner.pos += 1
                continue
            scanner.expect("]")
            break
    scanner.skip_ws()
    if scanner.pos != len(scanner.text):
        raise _ParseFailure("trailing text after plan list", scanner.pos)
    return pairs


def parse(raw: str) -> ParseOutcome:
    """Parse raw response text into a plan; never raises on any input."""
    candidate = extract_candidate(raw)
    if candidate is None:
        return Failed(FailureKind.FORMAT_DEVIATION, "no bracketed plan list found in response")
    offset = raw.find(candidate)
    span = (offset, offset + len(candidate))
    try:
        pairs = _parse_candidate(candidate)
    except _ParseFailure as failure:
        return Failed(FailureKind.FORMAT_DEVIATION, failure.detail, span)
    steps: list[ActionStep] = []
    for name, argument in pairs:
        sig = lookup(name)
        if sig is None:
            return Failed(FailureKind.UNKNOWN_ACTION, f"{name!r} is not a defined primitive action", span)
        steps.append(ActionStep(sig.kind, argument))
    return Parsed(Plan(tuple(steps)))


def _has_top_level_comma(argument: str) -> bool:
    depth = 0
    for char in argument:
        if char == "[":
            depth += 1
        elif char == "]":
            if depth == 0:
                return True  # unbalanced; quoting keeps it a single field
            depth -= 1
        elif char == "," and depth == 0:
            return True
    return depth != 0


def _format_argument(argument: str) -> str:
    needs_quotes = (
        argument != argument.strip()
        or (argument[:1] in ("'", '"'))
        or _has_top_level_comma(argument)
    )
    if not needs_quotes:
        return argument
    quote = '"' if '"' not in argument else "'"
    return f"{quote}{argument}{quote}"


def render(plan: Plan) -> str:
    """Canonical text form: comma+space separators, quotes only when needed."""
    if not plan.steps:
        return "[]"
    parts = [f"[{step.kind.value}, {_format_argument(step.argument)}]" for step in plan.steps]
    return "[" + ", ".join(parts) + "]"

"""The eight primitive actions, plan types, and the static plan validator."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator

if TYPE_CHECKING:
    from .world import WorldModel


class PrimitiveKind(Enum):
    MOVE_TO = "move to"
    LOOK_FOR_OBJ = "look for obj"
    LOOK_FOR_PERSON = "look for person"
    FOLLOW = "follow"
    GRASP = "grasp"
    PASS_TO = "pass to"
    SPEAK = "speak"
    ANSWER = "answer"


class ArgRole(Enum):
    LOCATION = "location"
    OBJECT = "object"
    PERSON_DESCRIPTOR = "person_descriptor"
    PERSON_OR_OBJECT = "person_or_object"
    UTTERANCE = "utterance"
    TOPIC = "topic"


@dataclass(frozen=True)
class PrimitiveSignature:
    kind: PrimitiveKind
    surface_name: str
    arg_role: ArgRole
    arity: int = 1


_REGISTRY: tuple[PrimitiveSignature, ...] = (
    PrimitiveSignature(PrimitiveKind.MOVE_TO, "move to", ArgRole.LOCATION),
    PrimitiveSignature(PrimitiveKind.LOOK_FOR_OBJ, "look for obj", ArgRole.OBJECT),
    PrimitiveSignature(PrimitiveKind.LOOK_FOR_PERSON, "look for person", ArgRole.PERSON_DESCRIPTOR),
    PrimitiveSignature(PrimitiveKind.FOLLOW, "follow", ArgRole.PERSON_DESCRIPTOR),
    PrimitiveSignature(PrimitiveKind.GRASP, "grasp", ArgRole.OBJECT),
    PrimitiveSignature(PrimitiveKind.PASS_TO, "pass to", ArgRole.PERSON_OR_OBJECT),
    PrimitiveSignature(PrimitiveKind.SPEAK, "speak", ArgRole.UTTERANCE),
    PrimitiveSignature(PrimitiveKind.ANSWER, "answer", ArgRole.TOPIC),
)

_BY_NAME = {sig.surface_name: sig for sig in _REGISTRY}
_BY_KIND = {sig.kind: sig for sig in _REGISTRY}


def registry() -> tuple[PrimitiveSignature, ...]:
    """All eight primitive signatures, in declaration order."""
    return _REGISTRY


def normalize_action_name(surface: str) -> str:
    """Lowercase, underscores folded to spaces, interior whitespace collapsed."""
    return " ".join(surface.replace("_", " ").lower().split())


def lookup(surface: str) -> PrimitiveSignature | None:
    """Find a primitive by surface name; None if it is not one of the eight."""
    return _BY_NAME.get(normalize_action_name(surface))


def signature(kind: PrimitiveKind) -> PrimitiveSignature:
    return _BY_KIND[kind]


@dataclass(frozen=True)
class ActionStep:
    """One plan step: a primitive plus its verbatim argument text.

    The argument is expected to be nonempty after trimming; blank arguments
    are reported by ``validate_static`` rather than rejected here so that
    candidate plans can always be represented for diagnosis.
    """

    kind: PrimitiveKind
    argument: str


@dataclass(frozen=True)
class Plan:
    """An ordered action sequence. Empty means an explicit no-op."""

    steps: tuple[ActionStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[ActionStep]:
        return iter(self.steps)

    def __getitem__(self, index: int) -> ActionStep:
        return self.steps[index]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Plan":
        """Build a plan from (action surface name, argument) pairs."""
        steps = []
        for name, argument in pairs:
            sig = lookup(name)
            if sig is None:
                raise ValueError(f"unknown primitive action: {name!r}")
            steps.append(ActionStep(sig.kind, argument))
        return cls(tuple(steps))

    def pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple((step.kind.value, step.argument) for step in self.steps)


class Verdict(Enum):
    VALID = "valid"
    UNKNOWN_ACTION = "unknown_action"
    ARITY_ERROR = "arity_error"
    PRECONDITION_ORDER_VIOLATION = "precondition_order_violation"


@dataclass(frozen=True)
class ValidationReport:
    verdict: Verdict
    offending_index: int | None = None
    detail: str = ""

    @property
    def valid(self) -> bool:
        return self.verdict is Verdict.VALID


def _violation(index: int, detail: str) -> ValidationReport:
    return ValidationReport(Verdict.PRECONDITION_ORDER_VIOLATION, index, detail)


def validate_static(plan: Plan, world: "WorldModel") -> ValidationReport:
    """Check a parsed plan against the registry, arity and ordering rules.

    Ordering rules: ``grasp`` needs an earlier ``look for obj`` whose argument
    matches after synonym resolution; ``pass to`` needs an earlier ``grasp``
    that is still in effect; ``follow`` and ``answer`` need an earlier
    ``look for person``. The first violation wins.
    """
    looked_objects: set[str] = set()
    holding = False
    person_located = False
    for index, step in enumerate(plan):
        if not isinstance(step.kind, PrimitiveKind) or step.kind not in _BY_KIND:
            return ValidationReport(Verdict.UNKNOWN_ACTION, index, f"unknown action {step.kind!r}")
        if not step.argument.strip():
            return ValidationReport(Verdict.ARITY_ERROR, index, "step is missing its argument")
        kind = step.kind
        if kind is PrimitiveKind.LOOK_FOR_OBJ:
            looked_objects.add(world.canonical_key(step.argument))
        elif kind is PrimitiveKind.LOOK_FOR_PERSON:
            person_located = True
        elif kind is PrimitiveKind.GRASP:
            if world.canonical_key(step.argument) not in looked_objects:
                return _violation(index, f"'grasp' without a matching 'look for obj' for {step.argument!r}")
            holding = True
        elif kind is PrimitiveKind.PASS_TO:
            if not holding:
                return _violation(index, "'pass to' without a prior 'grasp'")
            holding = False
        elif kind is PrimitiveKind.FOLLOW:
            if not person_located:
                return _violation(index, "'follow' without a prior 'look for person'")
        elif kind is PrimitiveKind.ANSWER:
            if not person_located:
                return _violation(index, "'answer' without a prior 'look for person'")
    return ValidationReport(Verdict.VALID)

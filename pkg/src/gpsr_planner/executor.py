"""Plan compilation to a hierarchical state machine and simulated execution.

The machine is a linear backbone of primitive states with named outcomes;
``look for person`` expands into the EXPLORE_ROOM / FACE_TO_PERSON /
MOVE_TO_PERSON sub-machine. Perception and live human input are replaced by
world-model queries plus a deterministic interaction script (gesture
commands for following, questions for answering), so a run is a pure
function of (machine, world, start state, script).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from .documents import load_document, parse_document
from .errors import InvalidInputError, InvalidPlanError, SchemaError
from .primitives import Plan, PrimitiveKind, Verdict, validate_static
from .world import INITIAL_LOCATION, EntityKind, Gender, Gesture, PersonProfile, WorldModel, normalize_name

SUB_STATES = ("EXPLORE_ROOM", "FACE_TO_PERSON", "MOVE_TO_PERSON")
TERMINAL_SUCCESS = "TERMINAL_SUCCESS"
TERMINAL_FAILURE = "TERMINAL_FAILURE"

AnswerFn = Callable[[str], "str | None"]


@dataclass(frozen=True)
class PrimitiveState:
    name: str
    kind: PrimitiveKind
    argument: str
    sub_states: tuple[str, ...] = ()


@dataclass(frozen=True)
class StateMachine:
    states: tuple[PrimitiveState, ...]
    transitions: dict[str, dict[str, str]]


def compile_plan(plan: Plan, world: WorldModel, check: bool = True) -> StateMachine:
    """Build the state machine for a plan; refuses statically invalid plans.

    ``check=False`` skips validation so that invalid plans can still be run
    to observe where execution fails.
    """
    if check:
        report = validate_static(plan, world)
        if report.verdict is not Verdict.VALID:
            raise InvalidPlanError(
                f"{report.verdict.value} at step {report.offending_index}: {report.detail}"
            )
    states = []
    for index, step in enumerate(plan):
        name = f"{index:02d}_{step.kind.name.lower()}"
        subs = SUB_STATES if step.kind is PrimitiveKind.LOOK_FOR_PERSON else ()
        states.append(PrimitiveState(name, step.kind, step.argument, subs))
    transitions: dict[str, dict[str, str]] = {}
    for index, state in enumerate(states):
        succeeded = states[index + 1].name if index + 1 < len(states) else TERMINAL_SUCCESS
        transitions[state.name] = {
            "succeeded": succeeded,
            "failed": TERMINAL_FAILURE,
            "aborted": TERMINAL_FAILURE,
        }
    return StateMachine(tuple(states), transitions)


@dataclass(frozen=True)
class RobotState:
    location: str
    holding: str | None = None
    engaged_person: str | None = None
    following: bool = False


@dataclass(frozen=True)
class FollowSignal:
    signal: str  # follow | pause | terminate
    waypoint: str | None = None


@dataclass(frozen=True)
class InteractionScript:
    """Deterministic stand-in for live human input."""

    follow_signals: tuple[FollowSignal, ...] = (FollowSignal("terminate"),)
    questions: tuple[str, ...] = ()
    max_follow_steps: int = 100


def script_from_mapping(data: Mapping[str, Any]) -> InteractionScript:
    signals = []
    for entry in data.get("follow_signals") or []:
        if not isinstance(entry, dict) or entry.get("signal") not in ("follow", "pause", "terminate"):
            raise SchemaError(f"bad follow signal entry: {entry!r}")
        waypoint = entry.get("waypoint")
        signals.append(FollowSignal(entry["signal"], str(waypoint) if waypoint is not None else None))
    questions = tuple(str(q) for q in data.get("questions") or [])
    return InteractionScript(
        follow_signals=tuple(signals) or (FollowSignal("terminate"),),
        questions=questions,
        max_follow_steps=int(data.get("max_follow_steps", 100)),
    )


def script_from_text(text: str) -> InteractionScript:
    return script_from_mapping(parse_document(text, kind="interaction script"))


def load_script(path: str | Path) -> InteractionScript:
    return script_from_mapping(load_document(path, kind="interaction script"))


def default_script() -> InteractionScript:
    from importlib.resources import files

    text = files("gpsr_planner").joinpath("data/scripts/default.yaml").read_text(encoding="utf-8")
    return script_from_text(text)


@dataclass(frozen=True)
class TraceEntry:
    state: str
    outcome: str
    observations: tuple[str, ...] = ()
    utterances: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExecutionTrace:
    entries: tuple[TraceEntry, ...]
    success: bool
    failed_step: int | None = None
    failure_reason: str | None = None
    final_state: RobotState | None = None


def _default_answer(question: str) -> str:
    return "I believe the answer is yes."


# --- person descriptors -----------------------------------------------------

_FEMALE_WORDS = {"female", "woman", "girl", "lady", "she"}
_MALE_WORDS = {"male", "man", "boy", "gentleman", "guy", "he"}
_OPERATOR_WORDS = {"me", "operator", "user"}
_ENGAGED_PHRASES = {"her", "him", "them", "person", "the person", "this person", "that person"}
_POINT_WORDS = {"point", "points", "pointing", "pointed"}
_RAISE_WORDS = {"raise", "raises", "raising", "raised"}


@dataclass(frozen=True)
class PersonQuery:
    name: str | None = None
    gender: Gender | None = None
    gesture: Gesture | None = None
    operator: bool = False
    engaged_reference: bool = False

    @property
    def has_criteria(self) -> bool:
        return bool(self.name or self.gender or self.gesture)


def parse_descriptor(text: str, world: WorldModel) -> PersonQuery:
    """Classify a person argument: name, gesture/gender descriptor, or pronoun."""
    entity = world.resolve(text)
    if entity.kind is EntityKind.PERSON:
        return PersonQuery(name=entity.name)
    normalized = normalize_name(text)
    tokens = set(normalized.split())
    if normalized in _OPERATOR_WORDS or tokens == {"the", "operator"}:
        return PersonQuery(operator=True)
    gesture: Gesture | None = None
    if tokens & _POINT_WORDS:
        if "left" in tokens:
            gesture = Gesture.POINTING_LEFT
        elif "right" in tokens:
            gesture = Gesture.POINTING_RIGHT
    elif tokens & _RAISE_WORDS and ("hand" in tokens or "hands" in tokens):
        gesture = Gesture.RAISING_HAND
    gender: Gender | None = None
    if tokens & _FEMALE_WORDS:
        gender = Gender.FEMALE
    elif tokens & _MALE_WORDS:
        gender = Gender.MALE
    if gesture or gender:
        return PersonQuery(gender=gender, gesture=gesture)
    if normalized in _ENGAGED_PHRASES:
        return PersonQuery(engaged_reference=True)
    return PersonQuery()


def _matches(profile: PersonProfile, query: PersonQuery) -> bool:
    if not query.has_criteria:
        return False
    if query.name is not None and normalize_name(profile.name) != normalize_name(query.name):
        return False
    if query.gender is not None and profile.gender is not query.gender:
        return False
    if query.gesture is not None and profile.gesture is not query.gesture:
        return False
    return True


# --- execution ---------------------------------------------------------------


class _Episode:
    def __init__(
        self,
        world: WorldModel,
        start: RobotState,
        io: InteractionScript,
        answer_fn: AnswerFn,
    ) -> None:
        self.world = world
        self.state = start
        self.io = io
        self.answer_fn = answer_fn
        self.seen: set[str] = set()
        self.signals = deque(io.follow_signals)
        self.questions = deque(io.questions)
        self.entries: list[TraceEntry] = []

    def emit(self, state: str, outcome: str, observations: tuple[str, ...] = (), utterances: tuple[str, ...] = ()) -> None:
        self.entries.append(TraceEntry(state, outcome, observations, utterances))

    def room(self) -> str:
        room = self.world.room_of(self.state.location)
        assert room is not None  # start location is checked; moves only target locations
        return room

    def do_move_to(self, state: PrimitiveState) -> str | None:
        entity = self.world.resolve(state.argument)
        if entity.kind is not EntityKind.LOCATION:
            return f"{state.argument!r} is not a known location"
        self.state = replace(self.state, location=entity.name)
        self.emit(state.name, "succeeded", (f"moved to {entity.name}",))
        return None

    def do_look_for_obj(self, state: PrimitiveState) -> str | None:
        entity = self.world.resolve(state.argument)
        if entity.kind is not EntityKind.OBJECT:
            return f"{state.argument!r} is not a known object"
        location = self.world.objects[entity.name]
        if normalize_name(self.world.room_of(location) or "") != normalize_name(self.room()):
            return f"{entity.name} is not in the {self.room()}"
        self.seen.add(normalize_name(entity.name))
        self.emit(state.name, "succeeded", (f"found {entity.name} at {location}",))
        return None

    def do_look_for_person(self, state: PrimitiveState) -> str | None:
        query = parse_descriptor(state.argument, self.world)
        room = self.room()
        candidates = self.world.persons_in_room(room)
        matches = [p for p in candidates if _matches(p, query)]
        explore = f"{state.name}/EXPLORE_ROOM"
        if not matches:
            self.emit(explore, "failed", (f"no person matching {state.argument!r} in the {room}",))
            return f"no person matching {state.argument!r} in the {room}"
        person = matches[0]
        self.emit(explore, "succeeded", (f"detected {person.name} in the {room}",))
        confirmation = (
            f"confirmed gender {person.gender.value}"
            if query.gender is not None
            else f"facing {person.name}"
        )
        self.emit(f"{state.name}/FACE_TO_PERSON", "succeeded", (confirmation,))
        self.state = replace(self.state, location=person.location, engaged_person=person.name)
        self.emit(f"{state.name}/MOVE_TO_PERSON", "succeeded", (f"standing in front of {person.name}",))
        return None

    def do_follow(self, state: PrimitiveState) -> str | None:
        if self.state.engaged_person is None:
            return "no engaged person to follow"
        profile = self.world.persons[self.state.engaged_person]
        query = parse_descriptor(state.argument, self.world)
        if not (query.engaged_reference or _matches(profile, query)):
            return f"engaged person {profile.name} does not match {state.argument!r}"
        self.state = replace(self.state, following=True)
        observations = [f"following {profile.name}"]
        steps = 0
        while self.signals and steps < self.io.max_follow_steps:
            signal = self.signals.popleft()
            steps += 1
            if signal.signal == "terminate":
                self.state = replace(self.state, following=False)
                observations.append("received terminate gesture")
                self.emit(state.name, "succeeded", tuple(observations))
                return None
            if signal.signal == "follow" and signal.waypoint is not None:
                waypoint = self.world.resolve(signal.waypoint)
                if waypoint.kind is not EntityKind.LOCATION:
                    self.state = replace(self.state, following=False)
                    return f"scripted waypoint {signal.waypoint!r} is unknown"
                self.state = replace(self.state, location=waypoint.name)
                observations.append(f"followed to {waypoint.name}")
            # pause: hold position, keep tracking
        self.state = replace(self.state, following=False)
        return "follow never received a terminate gesture"

    def do_grasp(self, state: PrimitiveState) -> str | None:
        entity = self.world.resolve(state.argument)
        if entity.kind is not EntityKind.OBJECT:
            return f"{state.argument!r} is not a known object"
        key = normalize_name(entity.name)
        if key not in self.seen:
            return f"{entity.name} was never located with 'look for obj'"
        location = self.world.objects[entity.name]
        if normalize_name(self.world.room_of(location) or "") != normalize_name(self.room()):
            return f"{entity.name} is not within reach"
        self.state = replace(self.state, holding=entity.name)
        self.emit(state.name, "succeeded", (f"grasped {entity.name}",))
        return None

    def do_pass_to(self, state: PrimitiveState) -> str | None:
        if self.state.holding is None:
            return "not holding anything to pass"
        query = parse_descriptor(state.argument, self.world)
        recipient: str | None = None
        if query.operator:
            recipient = "operator"
        elif query.engaged_reference and self.state.engaged_person is not None:
            recipient = self.state.engaged_person
        elif query.name is not None:
            profile = self.world.persons[query.name]
            engaged = self.state.engaged_person == profile.name
            co_located = normalize_name(self.world.room_of(profile.location) or "") == normalize_name(self.room())
            if engaged or co_located:
                recipient = profile.name
        if recipient is None:
            return f"no recipient matching {state.argument!r} here"
        held = self.state.holding
        self.state = replace(self.state, holding=None)
        self.emit(state.name, "succeeded", (f"passed {held} to {recipient}",))
        return None

    def do_speak(self, state: PrimitiveState) -> str | None:
        self.emit(state.name, "succeeded", (), (state.argument,))
        return None

    def do_answer(self, state: PrimitiveState) -> str | None:
        if self.state.engaged_person is None:
            return "no engaged person to answer"
        if not self.questions:
            return "no scripted question to answer"
        question = self.questions.popleft()
        answer = self.answer_fn(question)
        if answer is None:
            return f"cannot answer the question {question!r}"
        self.emit(state.name, "succeeded", (f"question: {question}",), (answer,))
        return None


_HANDLERS = {
    PrimitiveKind.MOVE_TO: _Episode.do_move_to,
    PrimitiveKind.LOOK_FOR_OBJ: _Episode.do_look_for_obj,
    PrimitiveKind.LOOK_FOR_PERSON: _Episode.do_look_for_person,
    PrimitiveKind.FOLLOW: _Episode.do_follow,
    PrimitiveKind.GRASP: _Episode.do_grasp,
    PrimitiveKind.PASS_TO: _Episode.do_pass_to,
    PrimitiveKind.SPEAK: _Episode.do_speak,
    PrimitiveKind.ANSWER: _Episode.do_answer,
}


def run(
    machine: StateMachine,
    world: WorldModel,
    start: RobotState,
    io: InteractionScript,
    answer_fn: AnswerFn | None = None,
) -> ExecutionTrace:
    """Execute the machine; deterministic given (machine, world, start, io)."""
    if world.resolve(start.location).kind is not EntityKind.LOCATION:
        raise InvalidInputError(f"start location {start.location!r} is not in the world")
    episode = _Episode(world, start, io, answer_fn or _default_answer)
    for index, state in enumerate(machine.states):
        reason = _HANDLERS[state.kind](episode, state)
        if reason is not None:
            if not episode.entries or episode.entries[-1].state.split("/")[0] != state.name:
                episode.emit(state.name, "failed", (reason,))
            return ExecutionTrace(
                tuple(episode.entries), False, index, reason, episode.state
            )
    return ExecutionTrace(tuple(episode.entries), True, None, None, episode.state)


def execute_plan(
    plan: Plan,
    world: WorldModel,
    io: InteractionScript | None = None,
    start: RobotState | None = None,
    answer_fn: AnswerFn | None = None,
    check: bool = True,
) -> ExecutionTrace:
    """Compile and run a plan from the initial location with a script."""
    machine = compile_plan(plan, world, check=check)
    return run(
        machine,
        world,
        start or RobotState(location=INITIAL_LOCATION),
        io or default_script(),
        answer_fn,
    )

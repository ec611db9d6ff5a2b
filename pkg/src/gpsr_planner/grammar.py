"""Seeded template grammar for natural-language commands with gold plans.

Templates pair a surface pattern with an authored plan pattern over typed
slots (person, object, location, room, gesture, gender, utterance). Slot
filling is driven by a seeded RNG over sorted entity lists, so a fixed
(seed, category, world, bank) always yields a bit-identical command, and
derived slots (a person's room, an object's location) keep every gold plan
executable in the world it was generated from.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

from .documents import dump_document, load_document, parse_document
from .errors import EmptyBankError, InvalidInputError, SchemaError
from .executor import InteractionScript, script_from_mapping
from .parser import Parsed, parse, render
from .primitives import ActionStep, Plan, Verdict, lookup, validate_static
from .world import Gender, Gesture, PersonProfile, WorldModel


class CommandCategory(Enum):
    TYPE_A = "A"  # navigation, person search, following
    TYPE_B = "B"  # object search and passing
    TYPE_C = "C"  # speaking and question answering


@dataclass(frozen=True)
class Command:
    text: str
    category: CommandCategory
    gold_plan: Plan
    seed: int


@dataclass(frozen=True)
class SlotSpec:
    name: str
    type: str
    source: str | None = None
    filter: str | None = None
    choices: tuple[str, ...] = ()


@dataclass(frozen=True)
class Template:
    id: str
    category: CommandCategory
    surface_pattern: str
    plan_pattern: tuple[tuple[str, str], ...]
    slots: tuple[SlotSpec, ...]


@dataclass(frozen=True)
class TemplateBank:
    templates: tuple[Template, ...]
    default_script: InteractionScript

    def for_category(self, category: CommandCategory) -> tuple[Template, ...]:
        return tuple(t for t in self.templates if t.category is category)


_GESTURE_PHRASES = {
    Gesture.POINTING_LEFT: ("pointing to the left", "point to the left"),
    Gesture.POINTING_RIGHT: ("pointing to the right", "point to the right"),
    Gesture.RAISING_HAND: ("raising their hand", "raise their hand"),
}

_PRONOUNS = {
    Gender.FEMALE: {"pronoun_obj": "her", "pronoun_subj": "she", "pronoun_pos": "her"},
    Gender.MALE: {"pronoun_obj": "him", "pronoun_subj": "he", "pronoun_pos": "his"},
    Gender.UNSPECIFIED: {"pronoun_obj": "them", "pronoun_subj": "they", "pronoun_pos": "their"},
}


def _article(name: str) -> str:
    return "an" if name[:1].lower() in "aeiou" else "a"


class _SlotValue:
    """A filled slot plus its derived attributes."""

    def __init__(self, base: str, attrs: Mapping[str, str]) -> None:
        self.base = base
        self.attrs = dict(attrs)

    def get(self, attr: str) -> str:
        if not attr:
            return self.base
        try:
            return self.attrs[attr]
        except KeyError:
            raise SchemaError(f"slot has no attribute {attr!r}") from None


def _person_value(profile: PersonProfile, world: WorldModel) -> _SlotValue:
    room = world.room_of(profile.location) or profile.location
    attrs = {
        "name": profile.name,
        "location": profile.location,
        "room": room,
        "gender": profile.gender.value,
        "gesture": profile.gesture.value,
        **_PRONOUNS[profile.gender],
    }
    return _SlotValue(profile.name, attrs)


def _object_value(name: str, world: WorldModel) -> _SlotValue:
    location = world.objects[name]
    attrs = {
        "name": name,
        "article": _article(name),
        "location": location,
        "room": world.room_of(location) or location,
    }
    return _SlotValue(name, attrs)


def _gesture_value(gesture: Gesture) -> _SlotValue:
    phrase, descriptor = _GESTURE_PHRASES[gesture]
    return _SlotValue(phrase, {"phrase": phrase, "descriptor": descriptor})


def _gender_value(gender: Gender) -> _SlotValue:
    return _SlotValue(gender.value, {"descriptor": gender.value, **_PRONOUNS[gender]})


def _location_value(name: str, world: WorldModel) -> _SlotValue:
    return _SlotValue(name, {"name": name, "room": world.locations.get(name, name)})


def _person_pool(world: WorldModel, slot: SlotSpec) -> list[PersonProfile]:
    pool = [world.persons[name] for name in sorted(world.persons)]
    if slot.filter == "has_gesture":
        pool = [p for p in pool if p.gesture is not Gesture.NONE]
    elif slot.filter == "gendered":
        pool = [p for p in pool if p.gender is not Gender.UNSPECIFIED]
    elif slot.filter is not None:
        raise SchemaError(f"unknown person filter {slot.filter!r}")
    return pool


def _fill_slot(
    slot: SlotSpec,
    values: dict[str, _SlotValue],
    world: WorldModel,
    rng: random.Random,
) -> _SlotValue:
    if slot.source is not None:
        base_name, _, attr = slot.source.partition(".")
        if base_name not in values:
            raise SchemaError(f"slot {slot.name!r} derives from undefined slot {base_name!r}")
        raw = values[base_name].get(attr)
        if slot.type == "gesture":
            return _gesture_value(Gesture(raw))
        if slot.type == "gender":
            return _gender_value(Gender(raw))
        if slot.type in ("location", "room"):
            return _location_value(raw, world)
        return _SlotValue(raw, {"name": raw})
    if slot.type == "person":
        pool = _person_pool(world, slot)
        if not pool:
            raise EmptyBankError(f"world has no person satisfying filter {slot.filter!r}")
        return _person_value(rng.choice(pool), world)
    if slot.type == "object":
        names = sorted(world.objects)
        if not names:
            raise EmptyBankError("world has no objects to fill an object slot")
        return _object_value(rng.choice(names), world)
    if slot.type == "location":
        rooms = {r.lower() for r in world.rooms}
        names = sorted(
            name
            for name in world.locations
            if name.lower() not in rooms and name != "initial location"
        )
        if not names:
            raise EmptyBankError("world has no named locations to fill a location slot")
        return _location_value(rng.choice(names), world)
    if slot.type == "room":
        return _location_value(rng.choice(sorted(world.rooms)), world)
    if slot.type == "utterance":
        if not slot.choices:
            raise SchemaError(f"utterance slot {slot.name!r} needs choices")
        return _SlotValue(rng.choice(list(slot.choices)), {})
    raise SchemaError(f"unknown slot type {slot.type!r}")


def _render_pattern(pattern: str, values: Mapping[str, _SlotValue]) -> str:
    out: list[str] = []
    i = 0
    while i < len(pattern):
        char = pattern[i]
        if char != "{":
            out.append(char)
            i += 1
            continue
        end = pattern.find("}", i)
        if end < 0:
            raise SchemaError(f"unclosed slot reference in pattern {pattern!r}")
        ref = pattern[i + 1 : end]
        name, _, attr = ref.partition(".")
        if name not in values:
            raise SchemaError(f"pattern references undefined slot {name!r}")
        out.append(values[name].get(attr))
        i = end + 1
    return "".join(out)


def instantiate(template: Template, world: WorldModel, rng: random.Random, seed: int) -> Command:
    """Fill one template; raises SchemaError if its gold plan is not valid."""
    values: dict[str, _SlotValue] = {}
    for slot in template.slots:
        values[slot.name] = _fill_slot(slot, values, world, rng)
    text = _render_pattern(template.surface_pattern, values)
    steps = []
    for action, arg_pattern in template.plan_pattern:
        sig = lookup(action)
        if sig is None:
            raise SchemaError(f"template {template.id!r} uses unknown action {action!r}")
        steps.append(ActionStep(sig.kind, _render_pattern(arg_pattern, values)))
    gold = Plan(tuple(steps))
    report = validate_static(gold, world)
    if report.verdict is not Verdict.VALID:
        raise SchemaError(f"template {template.id!r} produced an invalid plan: {report.detail}")
    return Command(text, template.category, gold, seed)


def generate(seed: int, category: CommandCategory, world: WorldModel, bank: TemplateBank) -> Command:
    """Deterministically generate one command of a category."""
    pool = bank.for_category(category)
    if not pool:
        raise EmptyBankError(f"template bank has no templates for type {category.value}")
    rng = random.Random(seed)
    template = rng.choice(list(pool))
    return instantiate(template, world, rng, seed)


def generate_suite(
    seed: int,
    counts: Mapping[CommandCategory, int],
    world: WorldModel,
    bank: TemplateBank,
) -> list[Command]:
    """Generate a command suite with exact per-category counts."""
    for category, count in counts.items():
        if count < 0:
            raise InvalidInputError(f"count for type {category.value} must be >= 0")
    rng = random.Random(seed)
    commands: list[Command] = []
    for category in CommandCategory:
        for _ in range(counts.get(category, 0)):
            commands.append(generate(rng.randrange(2**31), category, world, bank))
    return commands


# --- bank and suite files ----------------------------------------------------


def _template_from_mapping(data: Mapping[str, Any]) -> Template:
    for key in ("id", "category", "surface", "plan", "slots"):
        if key not in data:
            raise SchemaError(f"template needs a {key!r} field")
    try:
        category = CommandCategory(str(data["category"]))
    except ValueError as exc:
        raise SchemaError(f"template {data['id']!r}: {exc}") from exc
    slots = []
    for raw in data["slots"]:
        if not isinstance(raw, dict) or "name" not in raw or "type" not in raw:
            raise SchemaError(f"template {data['id']!r} has a malformed slot: {raw!r}")
        slots.append(
            SlotSpec(
                name=str(raw["name"]),
                type=str(raw["type"]),
                source=str(raw["source"]) if raw.get("source") else None,
                filter=str(raw["filter"]) if raw.get("filter") else None,
                choices=tuple(str(c) for c in raw.get("choices") or ()),
            )
        )
    plan_pattern = []
    for item in data["plan"]:
        if not isinstance(item, list) or len(item) != 2:
            raise SchemaError(f"template {data['id']!r} plan steps must be [action, argument] pairs")
        plan_pattern.append((str(item[0]), str(item[1])))
    template = Template(
        id=str(data["id"]),
        category=category,
        surface_pattern=str(data["surface"]),
        plan_pattern=tuple(plan_pattern),
        slots=tuple(slots),
    )
    _check_slot_coverage(template)
    return template


def _referenced_slots(pattern: str) -> set[str]:
    names: set[str] = set()
    i = 0
    while i < len(pattern):
        if pattern[i] == "{":
            end = pattern.find("}", i)
            if end < 0:
                raise SchemaError(f"unclosed slot reference in pattern {pattern!r}")
            names.add(pattern[i + 1 : end].partition(".")[0])
            i = end + 1
        else:
            i += 1
    return names


def _check_slot_coverage(template: Template) -> None:
    surface_slots = _referenced_slots(template.surface_pattern)
    plan_slots: set[str] = set()
    for _, arg_pattern in template.plan_pattern:
        plan_slots |= _referenced_slots(arg_pattern)
    missing = plan_slots - surface_slots
    if missing:
        raise SchemaError(
            f"template {template.id!r} uses slots {sorted(missing)} in the plan "
            "that never appear in the surface text"
        )
    declared = {slot.name for slot in template.slots}
    undeclared = (surface_slots | plan_slots) - declared
    if undeclared:
        raise SchemaError(f"template {template.id!r} references undeclared slots {sorted(undeclared)}")


def template_bank_from_mapping(data: Mapping[str, Any]) -> TemplateBank:
    raw_templates = data.get("templates")
    if not isinstance(raw_templates, list) or not raw_templates:
        raise SchemaError("template bank needs a nonempty 'templates' list")
    templates = tuple(_template_from_mapping(raw) for raw in raw_templates)
    script = script_from_mapping(data.get("default_script") or {})
    return TemplateBank(templates, script)


def template_bank_from_text(text: str) -> TemplateBank:
    return template_bank_from_mapping(parse_document(text, kind="template bank"))


def load_template_bank(path: str | Path) -> TemplateBank:
    return template_bank_from_mapping(load_document(path, kind="template bank"))


def default_template_bank() -> TemplateBank:
    from importlib.resources import files

    text = files("gpsr_planner").joinpath("data/template_bank.yaml").read_text(encoding="utf-8")
    return template_bank_from_text(text)


def suite_to_mapping(
    commands: Sequence[Command],
    seed: int | None = None,
    world: WorldModel | None = None,
) -> dict[str, Any]:
    counts = {category.value: 0 for category in CommandCategory}
    for command in commands:
        counts[command.category.value] += 1
    payload: dict[str, Any] = {"schema": 1, "counts": counts}
    if seed is not None:
        payload["seed"] = seed
    if world is not None:
        payload["world_digest"] = world.digest()
    payload["commands"] = [
        {
            "text": command.text,
            "category": command.category.value,
            "seed": command.seed,
            "plan": render(command.gold_plan),
        }
        for command in commands
    ]
    return payload


def suite_from_mapping(data: Mapping[str, Any]) -> list[Command]:
    raw_commands = data.get("commands")
    if not isinstance(raw_commands, list):
        raise SchemaError("command suite needs a 'commands' list")
    commands: list[Command] = []
    for i, raw in enumerate(raw_commands):
        if not isinstance(raw, dict):
            raise SchemaError(f"suite command {i} must be a mapping")
        try:
            category = CommandCategory(str(raw["category"]))
            text = str(raw["text"])
            plan_text = str(raw["plan"])
            seed = int(raw.get("seed", 0))
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"suite command {i} is malformed: {exc}") from exc
        outcome = parse(plan_text)
        if not isinstance(outcome, Parsed):
            raise SchemaError(f"suite command {i} gold plan does not parse: {outcome.detail}")
        commands.append(Command(text, category, outcome.plan, seed))
    return commands


def suite_to_text(commands: Sequence[Command], seed: int | None = None, world: WorldModel | None = None) -> str:
    return dump_document(suite_to_mapping(commands, seed, world))


def load_suite(path: str | Path) -> list[Command]:
    return suite_from_mapping(load_document(path, kind="command suite"))

"""Environment knowledge base: rooms, locations, objects, persons, synonyms.

The model is immutable after loading and shared read-only by prompt
construction, static validation and the simulator. Rooms double as
navigation targets, so every room is registered as a location mapping to
itself.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .documents import dump_document, load_document, parse_document
from .errors import DanglingReferenceError, SchemaError

INITIAL_LOCATION = "initial location"


class Gender(Enum):
    FEMALE = "female"
    MALE = "male"
    UNSPECIFIED = "unspecified"


class Gesture(Enum):
    POINTING_LEFT = "pointing_left"
    POINTING_RIGHT = "pointing_right"
    RAISING_HAND = "raising_hand"
    NONE = "none"


class EntityKind(Enum):
    OBJECT = "object"
    LOCATION = "location"
    PERSON = "person"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class PersonProfile:
    name: str
    gender: Gender = Gender.UNSPECIFIED
    gesture: Gesture = Gesture.NONE
    location: str = INITIAL_LOCATION


@dataclass(frozen=True)
class ResolvedEntity:
    kind: EntityKind
    name: str

    @property
    def is_resolved(self) -> bool:
        return self.kind is not EntityKind.UNRESOLVED


def normalize_name(surface: str) -> str:
    """Case-insensitive key form: underscores as spaces, whitespace collapsed."""
    return " ".join(surface.replace("_", " ").lower().split())


@dataclass(frozen=True)
class WorldModel:
    rooms: tuple[str, ...]
    locations: dict[str, str]  # location -> containing room
    objects: dict[str, str]  # object -> location
    persons: dict[str, PersonProfile]  # display name -> profile
    synonyms: dict[str, str]  # normalized surface -> canonical display name
    _index: dict[str, ResolvedEntity] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        index: dict[str, ResolvedEntity] = {}
        for name in self.locations:
            index[normalize_name(name)] = ResolvedEntity(EntityKind.LOCATION, name)
        for name in self.objects:
            index[normalize_name(name)] = ResolvedEntity(EntityKind.OBJECT, name)
        for name in self.persons:
            index[normalize_name(name)] = ResolvedEntity(EntityKind.PERSON, name)
        object.__setattr__(self, "_index", index)

    def resolve(self, surface: str) -> ResolvedEntity:
        """Canonicalize a surface string into an entity; total and deterministic."""
        key = normalize_name(surface)
        key = normalize_name(self.synonyms.get(key, key))
        entity = self._index.get(key)
        if entity is None:
            return ResolvedEntity(EntityKind.UNRESOLVED, key)
        return entity

    def canonical_key(self, surface: str) -> str:
        """Normalized canonical form used for argument equality checks."""
        return normalize_name(self.resolve(surface).name)

    def room_of(self, location: str) -> str | None:
        entity = self.resolve(location)
        if entity.kind is not EntityKind.LOCATION:
            return None
        return self.locations[entity.name]

    def persons_in_room(self, room: str) -> tuple[PersonProfile, ...]:
        room_key = normalize_name(room)
        return tuple(
            profile
            for profile in self.persons.values()
            if normalize_name(self.locations[self.resolve(profile.location).name]) == room_key
        )

    def to_mapping(self) -> dict[str, Any]:
        persons = {
            profile.name: {
                "gender": profile.gender.value,
                "gesture": profile.gesture.value,
                "location": profile.location,
            }
            for profile in self.persons.values()
        }
        return {
            "schema": 1,
            "rooms": list(self.rooms),
            "locations": dict(self.locations),
            "objects": dict(self.objects),
            "persons": persons,
            "synonyms": dict(self.synonyms),
        }

    def to_text(self) -> str:
        return dump_document(self.to_mapping())

    def digest(self) -> str:
        canonical = json.dumps(self.to_mapping(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require_mapping(value: Any, name: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise SchemaError(f"world section {name!r} must be a mapping")
    return value


def world_from_mapping(data: dict[str, Any]) -> WorldModel:
    """Validate a parsed world description and build the model."""
    rooms_raw = data.get("rooms") or []
    if not isinstance(rooms_raw, list) or not all(isinstance(r, str) for r in rooms_raw):
        raise SchemaError("world section 'rooms' must be a list of names")
    rooms = tuple(str(r) for r in rooms_raw)
    room_keys = {normalize_name(r) for r in rooms}
    if len(room_keys) != len(rooms):
        raise SchemaError("duplicate room name (names are case-insensitive)")

    locations: dict[str, str] = {}
    for name, room in _require_mapping(data.get("locations"), "locations").items():
        if not isinstance(room, str):
            raise SchemaError(f"location {name!r} must map to a room name")
        if normalize_name(room) not in room_keys:
            raise DanglingReferenceError(f"location {name!r} references unknown room {room!r}")
        locations[str(name)] = room
    # Rooms are navigation targets too.
    location_keys = {normalize_name(name) for name in locations}
    for room in rooms:
        if normalize_name(room) not in location_keys:
            locations[room] = room
            location_keys.add(normalize_name(room))
    if len(location_keys) != len(locations):
        raise SchemaError("duplicate location name (names are case-insensitive)")
    if normalize_name(INITIAL_LOCATION) not in location_keys:
        raise SchemaError(f"world must define the {INITIAL_LOCATION!r} location")

    objects: dict[str, str] = {}
    for name, location in _require_mapping(data.get("objects"), "objects").items():
        if not isinstance(location, str) or normalize_name(location) not in location_keys:
            raise DanglingReferenceError(f"object {name!r} references unknown location {location!r}")
        objects[str(name)] = location

    persons: dict[str, PersonProfile] = {}
    for name, spec in _require_mapping(data.get("persons"), "persons").items():
        spec = _require_mapping(spec, f"persons.{name}")
        location = spec.get("location")
        if not isinstance(location, str) or normalize_name(location) not in location_keys:
            raise DanglingReferenceError(f"person {name!r} references unknown location {location!r}")
        try:
            gender = Gender(spec.get("gender", "unspecified"))
            gesture = Gesture(spec.get("gesture", "none"))
        except ValueError as exc:
            raise SchemaError(f"person {name!r}: {exc}") from exc
        persons[str(name)] = PersonProfile(str(name), gender, gesture, location)

    seen: dict[str, str] = {}
    for name in [*locations, *objects, *persons]:
        key = normalize_name(name)
        if key in seen:
            raise SchemaError(f"entity name {name!r} collides with {seen[key]!r} (names are case-insensitive)")
        seen[key] = name

    synonyms: dict[str, str] = {}
    raw_synonyms = _require_mapping(data.get("synonyms"), "synonyms")
    for surface, target in raw_synonyms.items():
        if not isinstance(target, str):
            raise SchemaError(f"synonym {surface!r} must map to a canonical name")
        key = normalize_name(str(surface))
        if key in seen:
            raise SchemaError(f"synonym {surface!r} collides with a canonical name")
        target_key = normalize_name(target)
        if target_key not in seen:
            raise DanglingReferenceError(f"synonym {surface!r} references unknown entity {target!r}")
        synonyms[key] = seen[target_key]
    # Single-step resolution: a synonym may not point at another synonym key.
    for surface, target in synonyms.items():
        if normalize_name(target) in synonyms:
            raise SchemaError(f"synonym {surface!r} does not resolve in one step")

    return WorldModel(rooms, locations, objects, persons, synonyms)


def world_from_text(text: str) -> WorldModel:
    return world_from_mapping(parse_document(text, kind="world description"))


def load_world(path: str | Path) -> WorldModel:
    """Load a world description file (see the packaged benchmark world)."""
    return world_from_mapping(load_document(path, kind="world description"))


def benchmark_world() -> WorldModel:
    """The default world containing every entity used by the shipped banks."""
    from importlib.resources import files

    text = files("gpsr_planner").joinpath("data/benchmark_world.yaml").read_text(encoding="utf-8")
    return world_from_text(text)

"""Prompt assembly: declarations, entities, examples, requirements, task.

The block texts (declarations, requirements, the example bank) live in a
prompt bank file, never in code, so the scheme stays auditable and
swappable. The two corrective suffixes and the question-answering
instruction are fixed strings exposed as constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

from .documents import load_document, parse_document
from .errors import BudgetExceededError, InvalidInputError, SchemaError
from .parser import FailureKind, Parsed, parse, render
from .primitives import Plan, normalize_action_name, registry
from .world import WorldModel

FORMAT_SUFFIX = "Please note the format of the answer!"
SUBTASK_SUFFIX = "Please note that scheduled subtasks need to be used to complete task planning."
ANSWER_REQUIREMENTS = "Please answer the following questions in English in no more than 30 words."


def corrective_suffix(kind: FailureKind) -> str:
    """The corrective prompt for a failure class; byte-stable across calls."""
    if kind is FailureKind.FORMAT_DEVIATION:
        return FORMAT_SUFFIX
    return SUBTASK_SUFFIX


@dataclass(frozen=True)
class FewShotExample:
    command_text: str
    gold_plan: Plan
    note: str = ""

    def rendered(self) -> str:
        lines = [f"Command: {self.command_text}"]
        if self.note:
            lines.append(f"Note: {self.note}")
        lines.append(f"Answer: {render(self.gold_plan)}")
        return "\n".join(lines)


@dataclass(frozen=True)
class PromptConfig:
    """Word-count budget for the rendered prompt.

    Whitespace-delimited words are a deterministic, backend-agnostic proxy
    for tokens; real tokenizers vary per backend.
    """

    token_budget: int = 4000


@dataclass(frozen=True)
class PromptBundle:
    declarations_block: str
    entities_block: str
    examples_block: str
    requirements_block: str
    task_block: str
    corrective_suffixes: tuple[str, ...] = ()

    def render(self) -> str:
        blocks = (
            self.declarations_block,
            self.entities_block,
            self.examples_block,
            self.requirements_block,
            self.task_block,
        )
        return "\n\n".join(block for block in blocks if block)


def _word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class PromptBank:
    declarations: str
    requirements: str
    examples: tuple[FewShotExample, ...]


def _check_declarations(declarations: str) -> None:
    normalized = normalize_action_name(declarations)
    for sig in registry():
        count = normalized.count(sig.surface_name)
        # 'look for obj' vs 'look for person' never overlap; no name contains another.
        if count != 1:
            raise SchemaError(
                f"declarations must mention {sig.surface_name!r} exactly once, found {count}"
            )


def bank_from_mapping(data: dict[str, Any]) -> PromptBank:
    declarations = data.get("declarations")
    requirements = data.get("requirements")
    if not isinstance(declarations, str) or not isinstance(requirements, str):
        raise SchemaError("prompt bank needs 'declarations' and 'requirements' text")
    _check_declarations(declarations)
    examples_raw = data.get("examples")
    if not isinstance(examples_raw, list) or not examples_raw:
        raise SchemaError("prompt bank needs a nonempty 'examples' list")
    examples = []
    for i, item in enumerate(examples_raw):
        if not isinstance(item, dict) or "command" not in item or "plan" not in item:
            raise SchemaError(f"example {i} needs 'command' and 'plan' fields")
        outcome = parse(str(item["plan"]))
        if not isinstance(outcome, Parsed):
            raise SchemaError(f"example {i} plan does not parse: {outcome.detail}")
        examples.append(FewShotExample(str(item["command"]), outcome.plan, str(item.get("note", ""))))
    return PromptBank(declarations.strip(), requirements.strip(), tuple(examples))


def bank_from_text(text: str) -> PromptBank:
    return bank_from_mapping(parse_document(text, kind="prompt bank"))


def load_bank(path: str | Path) -> PromptBank:
    return bank_from_mapping(load_document(path, kind="prompt bank"))


@lru_cache(maxsize=1)
def default_bank() -> PromptBank:
    """The shipped bank: 23 worked examples plus declarations and requirements."""
    from importlib.resources import files

    text = files("gpsr_planner").joinpath("data/prompt_bank.yaml").read_text(encoding="utf-8")
    return bank_from_text(text)


def _entities_block(world: WorldModel) -> str:
    objects = ", ".join(sorted(world.objects))
    locations = ", ".join(sorted(world.locations))
    persons = ", ".join(sorted(world.persons))
    return "\n".join(
        (
            f"Objects available: {objects}",
            f"Locations available: {locations}",
            f"Persons present: {persons}",
        )
    )


def build_prompt(
    command_text: str,
    world: WorldModel,
    bank: PromptBank,
    config: PromptConfig = PromptConfig(),
) -> PromptBundle:
    """Assemble the constrained planning prompt for one command.

    Block order is fixed: declarations, entities, examples, requirements,
    task. When the budget is tight, examples are dropped from the end of the
    bank, never reordered; the fixed blocks alone exceeding the budget is an
    error.
    """
    if not bank.examples:
        raise InvalidInputError("example bank is empty")
    declarations = bank.declarations
    entities = _entities_block(world)
    requirements = bank.requirements
    task = f"Command: {command_text.strip()}\nAnswer:"
    fixed_words = sum(_word_count(block) for block in (declarations, entities, requirements, task))
    if fixed_words > config.token_budget:
        raise BudgetExceededError(
            f"fixed prompt blocks need {fixed_words} words, budget is {config.token_budget}"
        )
    kept = list(bank.examples)
    examples_block = ""
    while kept:
        examples_block = "Examples:\n\n" + "\n\n".join(example.rendered() for example in kept)
        if fixed_words + _word_count(examples_block) <= config.token_budget:
            break
        kept.pop()
    else:
        examples_block = ""
    return PromptBundle(declarations, entities, examples_block, requirements, task)


def build_answer_prompt(question: str, config: PromptConfig = PromptConfig()) -> PromptBundle:
    """Prompt for the question-answering round: instruction plus the question."""
    if not question.strip():
        raise InvalidInputError("question must be nonempty")
    return PromptBundle(
        declarations_block="",
        entities_block="",
        examples_block="",
        requirements_block=ANSWER_REQUIREMENTS,
        task_block=f"Question: {question.strip()}",
    )

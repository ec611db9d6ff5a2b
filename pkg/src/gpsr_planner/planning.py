"""Command-to-plan loop with corrective re-prompting and a giveup rule.

Each failed attempt appends the previous assistant response plus the
corrective suffix matching its failure class, then queries again; after the
configured number of consecutive exceptions (default five) the command is
declared unparseable. The counter is fresh for every command, so within one
call consecutive and total failures coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .errors import BackendUnavailableError, InvalidInputError, TransportError
from .llm import Backend, ChatMessage, ChatRequest, TranscriptRecord
from .parser import Failed, FailureKind, Parsed, ParseOutcome, parse
from .primitives import Plan, ValidationReport, Verdict, validate_static
from .prompts import (
    FORMAT_SUFFIX,
    PromptBank,
    PromptConfig,
    build_answer_prompt,
    build_prompt,
    corrective_suffix,
)
from .world import WorldModel

if TYPE_CHECKING:
    from .executor import ExecutionTrace


class ValidationMode(Enum):
    PARSE_ONLY = "parse_only"
    PARSE_AND_STATIC = "parse_and_static"


@dataclass(frozen=True)
class PlanningConfig:
    backend: Backend
    bank: PromptBank
    prompt: PromptConfig = PromptConfig()
    max_consecutive_exceptions: int = 5
    validation_mode: ValidationMode = ValidationMode.PARSE_AND_STATIC
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if self.max_consecutive_exceptions < 1:
            raise InvalidInputError("max_consecutive_exceptions must be >= 1")


@dataclass(frozen=True)
class Attempt:
    """One loop iteration: the raw response, how it was judged, and the
    corrective suffix appended afterwards (None on success or final attempt)."""

    raw_response: str
    parse_outcome: ParseOutcome
    validation: ValidationReport | None = None
    suffix: str | None = None


@dataclass(frozen=True)
class PlanningResult:
    plan: Plan | None
    attempts: int
    attempt_log: tuple[Attempt, ...]

    @property
    def planned(self) -> bool:
        return self.plan is not None

    @property
    def appended_suffixes(self) -> tuple[str, ...]:
        return tuple(a.suffix for a in self.attempt_log if a.suffix is not None)


def _suffix_kind(outcome: ParseOutcome, report: ValidationReport | None) -> FailureKind:
    if isinstance(outcome, Failed):
        return outcome.kind
    # Static failures of any verdict ask for the subtask corrective prompt:
    # unknown/arity violate the action vocabulary, ordering violates subtask use.
    return FailureKind.UNKNOWN_ACTION


def plan(command_text: str, world: WorldModel, config: PlanningConfig) -> PlanningResult:
    """Run the prompt -> complete -> parse -> validate loop for one command."""
    bundle = build_prompt(command_text, world, config.bank, config.prompt)
    messages: list[ChatMessage] = [ChatMessage("user", bundle.render())]
    session = config.backend.new_session()
    log: list[Attempt] = []
    limit = config.max_consecutive_exceptions
    for attempt in range(1, limit + 1):
        request = ChatRequest(tuple(messages), config.temperature, config.max_output_tokens)
        try:
            response = session.complete(request)
        except TransportError as exc:
            raise BackendUnavailableError(str(exc)) from exc
        outcome = parse(response.content)
        report: ValidationReport | None = None
        if isinstance(outcome, Parsed):
            if config.validation_mode is ValidationMode.PARSE_ONLY:
                log.append(Attempt(response.content, outcome))
                return PlanningResult(outcome.plan, attempt, tuple(log))
            report = validate_static(outcome.plan, world)
            if report.verdict is Verdict.VALID:
                log.append(Attempt(response.content, outcome, report))
                return PlanningResult(outcome.plan, attempt, tuple(log))
        suffix = corrective_suffix(_suffix_kind(outcome, report))
        final = attempt == limit
        log.append(Attempt(response.content, outcome, report, None if final else suffix))
        if not final:
            messages.append(ChatMessage("assistant", response.content))
            messages.append(ChatMessage("user", suffix))
    return PlanningResult(None, limit, tuple(log))


ANSWER_WORD_LIMIT = 30


def _acceptable_answer(content: str) -> bool:
    text = content.strip()
    return bool(text) and len(text.split()) <= ANSWER_WORD_LIMIT


@dataclass(frozen=True)
class AnswerResult:
    text: str | None
    attempts: int
    responses: tuple[str, ...]

    @property
    def answered(self) -> bool:
        return self.text is not None


def answer_question(question: str, config: PlanningConfig) -> AnswerResult:
    """Ask the backend a question under the 30-word instruction.

    An attempt fails when the response is empty or longer than 30
    whitespace-delimited words; after five consecutive failures the result
    is CannotAnswer (text None).
    """
    bundle = build_answer_prompt(question, config.prompt)
    messages: list[ChatMessage] = [ChatMessage("user", bundle.render())]
    session = config.backend.new_session()
    responses: list[str] = []
    limit = config.max_consecutive_exceptions
    for attempt in range(1, limit + 1):
        request = ChatRequest(tuple(messages), config.temperature, config.max_output_tokens)
        try:
            response = session.complete(request)
        except TransportError as exc:
            raise BackendUnavailableError(str(exc)) from exc
        responses.append(response.content)
        if _acceptable_answer(response.content):
            return AnswerResult(response.content.strip(), attempt, tuple(responses))
        if attempt < limit:
            messages.append(ChatMessage("assistant", response.content))
            messages.append(ChatMessage("user", FORMAT_SUFFIX))
    return AnswerResult(None, limit, tuple(responses))


@dataclass(frozen=True)
class EpisodeTrace:
    """Everything one episode produced: planning attempts, wire transcript,
    and the execution trace when the plan was run."""

    command_text: str
    result: PlanningResult
    transcript: tuple[TranscriptRecord, ...] = ()
    execution: "ExecutionTrace | None" = None

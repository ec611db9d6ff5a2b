"""Suite evaluation: decomposition scoring, executability, report shaping.

Decomposition correctness is exact positional equality against the gold
plan after synonym resolution of arguments; near misses are credited
separately through per-step accuracy. Executability means the candidate
plan compiles and runs to terminal success in the simulator. Per-category
accuracies are reported per backend in a rows-by-types table.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .errors import BackendUnavailableError, InvalidPlanError
from .executor import ExecutionTrace, InteractionScript, execute_plan
from .grammar import Command, CommandCategory
from .llm import Backend
from .parser import render
from .planning import PlanningConfig, PlanningResult, ValidationMode, plan as plan_command
from .primitives import Plan
from .prompts import PromptBank, PromptConfig
from .world import WorldModel


def score_decomposition(candidate: Plan, gold: Plan, world: WorldModel) -> tuple[bool, float]:
    """Exact-match flag plus positional step accuracy in [0, 1].

    A step matches when the primitive is identical and the arguments are
    equal after synonym resolution; accuracy divides matching positions by
    the longer plan length.
    """
    longest = max(len(candidate), len(gold))
    if longest == 0:
        return True, 1.0
    matches = 0
    for candidate_step, gold_step in zip(candidate, gold):
        if candidate_step.kind is gold_step.kind and world.canonical_key(
            candidate_step.argument
        ) == world.canonical_key(gold_step.argument):
            matches += 1
    correct = len(candidate) == len(gold) and matches == longest
    return correct, matches / longest


@dataclass(frozen=True)
class EvalRecord:
    command: Command
    planning: PlanningResult | None
    error: str | None
    decomposition_correct: bool
    step_accuracy: float
    run_success: bool
    trace: ExecutionTrace | None

    @property
    def attempts(self) -> int:
        return self.planning.attempts if self.planning is not None else 0

    @property
    def executable(self) -> bool:
        """The task counts as executed only when the correct plan ran to
        success, which keeps decomposition >= executability on any suite."""
        return self.decomposition_correct and self.run_success


@dataclass(frozen=True)
class EvalConfig:
    world: WorldModel
    bank: PromptBank
    prompt: PromptConfig = PromptConfig()
    script: InteractionScript | None = None
    max_consecutive_exceptions: int = 5
    validation_mode: ValidationMode = ValidationMode.PARSE_AND_STATIC
    temperature: float = 0.0
    max_output_tokens: int = 512
    concurrency: int = 1
    answer_fn: Callable[[str], str | None] | None = None


@dataclass(frozen=True)
class CategoryScore:
    commands: int
    exact_matches: int
    mean_step_accuracy: float


@dataclass(frozen=True)
class BackendReport:
    backend_id: str
    records: tuple[EvalRecord, ...]

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def decomposition_correct(self) -> int:
        return sum(1 for r in self.records if r.decomposition_correct)

    @property
    def executable(self) -> int:
        return sum(1 for r in self.records if r.executable)

    @property
    def errors(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    @property
    def mean_attempts(self) -> float:
        attempted = [r.attempts for r in self.records if r.planning is not None]
        if not attempted:
            return 0.0
        return sum(attempted) / len(attempted)

    def category_score(self, category: CommandCategory) -> CategoryScore:
        records = [r for r in self.records if r.command.category is category]
        if not records:
            return CategoryScore(0, 0, 0.0)
        exact = sum(1 for r in records if r.decomposition_correct)
        mean = sum(r.step_accuracy for r in records) / len(records)
        return CategoryScore(len(records), exact, mean)


@dataclass(frozen=True)
class EvalReport:
    backends: tuple[BackendReport, ...]
    suite_size: int
    metadata: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "schema": 1,
            "suite_size": self.suite_size,
            "metadata": self.metadata,
            "backends": [],
        }
        for report in self.backends:
            categories = {}
            for category in CommandCategory:
                score = report.category_score(category)
                categories[category.value] = {
                    "commands": score.commands,
                    "exact_matches": score.exact_matches,
                    "mean_step_accuracy": round(score.mean_step_accuracy, 6),
                }
            payload["backends"].append(
                {
                    "backend": report.backend_id,
                    "decomposition": {"correct": report.decomposition_correct, "total": report.total},
                    "executability": {"executable": report.executable, "total": report.total},
                    "mean_attempts": round(report.mean_attempts, 6),
                    "errors": report.errors,
                    "categories": categories,
                    "commands": [
                        {
                            "text": record.command.text,
                            "category": record.command.category.value,
                            "seed": record.command.seed,
                            "planned": record.planning is not None and record.planning.planned,
                            "plan": (
                                render(record.planning.plan)
                                if record.planning is not None and record.planning.plan is not None
                                else None
                            ),
                            "attempts": record.attempts,
                            "decomposition_correct": record.decomposition_correct,
                            "step_accuracy": round(record.step_accuracy, 6),
                            "run_success": record.run_success,
                            "executable": record.executable,
                            "error": record.error,
                        }
                        for record in report.records
                    ],
                }
            )
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def render_table(self) -> str:
        """Per-type mean step accuracy, one row per backend, plus totals."""
        header = f"{'backend':<24} {'Type A':>8} {'Type B':>8} {'Type C':>8} {'decomposed':>12} {'executable':>12} {'attempts':>9}"
        lines = [header, "-" * len(header)]
        for report in self.backends:
            cells = []
            for category in CommandCategory:
                score = report.category_score(category)
                cells.append(f"{score.mean_step_accuracy * 100:7.1f}%" if score.commands else "      --")
            lines.append(
                f"{report.backend_id:<24} {cells[0]:>8} {cells[1]:>8} {cells[2]:>8} "
                f"{report.decomposition_correct:>7}/{report.total:<4} "
                f"{report.executable:>7}/{report.total:<4} {report.mean_attempts:>9.2f}"
            )
        lines.append("")
        lines.append("exact decomposition matches per type:")
        for report in self.backends:
            parts = []
            for category in CommandCategory:
                score = report.category_score(category)
                parts.append(f"Type {category.value}: {score.exact_matches}/{score.commands}")
            lines.append(f"  {report.backend_id:<22} " + "  ".join(parts))
        return "\n".join(lines)


def evaluate_suite(
    suite: Sequence[Command],
    backends: Sequence[Backend],
    config: EvalConfig,
) -> EvalReport:
    """Plan, score and execute every (backend, command) cell."""
    if not suite:
        raise ValueError("suite must be nonempty")

    def run_cell(backend: Backend, command: Command) -> EvalRecord:
        planning_config = PlanningConfig(
            backend=backend,
            bank=config.bank,
            prompt=config.prompt,
            max_consecutive_exceptions=config.max_consecutive_exceptions,
            validation_mode=config.validation_mode,
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
        )
        try:
            result = plan_command(command.text, config.world, planning_config)
        except BackendUnavailableError as exc:
            return EvalRecord(command, None, str(exc), False, 0.0, False, None)
        if not result.planned:
            return EvalRecord(command, result, None, False, 0.0, False, None)
        correct, accuracy = score_decomposition(result.plan, command.gold_plan, config.world)
        try:
            trace = execute_plan(
                result.plan,
                config.world,
                io=config.script,
                answer_fn=config.answer_fn,
            )
            run_success = trace.success
        except InvalidPlanError:
            trace = None
            run_success = False
        return EvalRecord(command, result, None, correct, accuracy, run_success, trace)

    reports = []
    for backend in backends:
        if config.concurrency > 1:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                records = tuple(pool.map(lambda c: run_cell(backend, c), suite))
        else:
            records = tuple(run_cell(backend, command) for command in suite)
        reports.append(BackendReport(backend.id, records))

    counts = {category.value: 0 for category in CommandCategory}
    for command in suite:
        counts[command.category.value] += 1
    metadata = {
        "counts": counts,
        "world_digest": config.world.digest(),
        "validation_mode": config.validation_mode.value,
        "max_consecutive_exceptions": config.max_consecutive_exceptions,
    }
    return EvalReport(tuple(reports), len(suite), metadata)


def check_report(report: EvalReport) -> list[str]:
    """Internal consistency violations; empty means the report is sound."""
    problems: list[str] = []
    for backend in report.backends:
        if backend.total != report.suite_size:
            problems.append(f"{backend.backend_id}: {backend.total} records for {report.suite_size} commands")
        if backend.decomposition_correct < backend.executable:
            problems.append(
                f"{backend.backend_id}: executability {backend.executable} exceeds "
                f"decomposition {backend.decomposition_correct}"
            )
        if backend.executable > backend.total or backend.decomposition_correct > backend.total:
            problems.append(f"{backend.backend_id}: counts exceed suite size")
        for record in backend.records:
            if record.decomposition_correct and record.step_accuracy != 1.0:
                problems.append(f"{backend.backend_id}: exact match with accuracy {record.step_accuracy}")
            if record.executable and (record.planning is None or not record.planning.planned):
                problems.append(f"{backend.backend_id}: executable without a planned outcome")
    return problems

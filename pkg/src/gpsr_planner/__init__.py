"""LLM-grounded task planning for general purpose service robots.

Pipeline: a natural-language command is wrapped in a constrained prompt
(primitive declarations, environment entities, worked examples,
requirements), the backend's reply is parsed under a strict nested-list
grammar, failures trigger class-specific corrective re-prompts with a
five-strike giveup, and accepted plans compile to a hierarchical state
machine executed against a simulated household world.
"""

__version__ = "0.1.0"

from .errors import PlannerError
from .grammar import Command, CommandCategory, generate, generate_suite
from .parser import Failed, FailureKind, Parsed, extract_candidate, parse, render
from .planning import AnswerResult, PlanningConfig, PlanningResult, answer_question, plan
from .primitives import ActionStep, Plan, PrimitiveKind, registry, validate_static
from .prompts import build_answer_prompt, build_prompt, corrective_suffix, default_bank
from .world import WorldModel, benchmark_world, load_world

__all__ = [
    "ActionStep",
    "AnswerResult",
    "Command",
    "CommandCategory",
    "Failed",
    "FailureKind",
    "Parsed",
    "Plan",
    "PlannerError",
    "PlanningConfig",
    "PlanningResult",
    "PrimitiveKind",
    "WorldModel",
    "answer_question",
    "benchmark_world",
    "build_answer_prompt",
    "build_prompt",
    "corrective_suffix",
    "default_bank",
    "extract_candidate",
    "generate",
    "generate_suite",
    "load_world",
    "parse",
    "plan",
    "registry",
    "render",
    "validate_static",
    "__version__",
]

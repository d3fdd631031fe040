"""Python access to the rule-reasoning harness core."""

import json as _json
import os as _os

from ._rulechain import (
    ConfigError,
    ExpressionSyntaxError,
    MissingVariable,
    TraceParseError,
    evaluate,
    expression_variables,
    extract_answer,
    macro_average,
    normalize_expression,
    substitute,
    truth_table,
)
from . import _rulechain

__all__ = [
    "ConfigError",
    "ExpressionSyntaxError",
    "MissingVariable",
    "TraceParseError",
    "build_prompt",
    "dj_oracle",
    "evaluate",
    "expression_variables",
    "extract_answer",
    "generate_dj",
    "macro_average",
    "normalize_expression",
    "parse_trace",
    "run_eval",
    "substitute",
    "truth_table",
    "verify_trace",
]


def parse_trace(text):
    """Parsed chain-of-logic trace as a dict. Raises TraceParseError."""
    return _json.loads(_rulechain.parse_trace_json(text))


def verify_trace(text):
    """{"verdict": ..., "trace": ...}; unparseable text yields a ParseFailure verdict."""
    return _json.loads(_rulechain.verify_trace_json(text))


def build_prompt(method, sample, demo="auto", ablate=None):
    """Prompt text for `sample` (a dict with rule, facts, issue)."""
    return _rulechain.build_prompt_json(method, _json.dumps(sample), demo, ablate)


def dj_oracle(facts, policy="every_pair_exceeds"):
    """Oracle verdict for a diversity-jurisdiction fact pattern in sentence form."""
    return _json.loads(_rulechain.dj_oracle_json(facts, policy))


def generate_dj(level, n, seed=0, policy="every_pair_exceeds"):
    """Generated samples, each with its fact pattern and oracle verdict."""
    return _json.loads(_rulechain.generate_dj_json(level, n, seed, policy))


def run_eval(config, base_dir="."):
    """Runs an evaluation from a config dict and returns the report dict."""
    return _json.loads(_rulechain.run_eval_json(_json.dumps(config), _os.fspath(base_dir)))

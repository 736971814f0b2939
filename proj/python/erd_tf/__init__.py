"""Temporal fine-tuning for early risk detection.

Thin Python layer over the native core. Configs and reports cross the
boundary as JSON and come back as plain dicts.
"""

import json

from . import _core
from ._core import (
    ContractViolation,
    Error,
    NumericalError,
    ParseError,
    ValidationError,
    decode_timed_input,
    encode_timed_input,
    latency_cost,
    policy_alarm,
    temporal_loss,
)

__all__ = [
    "ContractViolation",
    "Error",
    "NumericalError",
    "ParseError",
    "ValidationError",
    "corpus_stats",
    "decode_timed_input",
    "encode_timed_input",
    "generate_corpus",
    "latency_cost",
    "policy_alarm",
    "run_cli",
    "score",
    "temporal_loss",
]


def generate_corpus(**spec):
    """Returns a list of {"user_id", "label", "posts"} dicts."""
    jsonl = _core.generate_corpus(json.dumps(spec))
    return [json.loads(line) for line in jsonl.splitlines() if line]


def _jsonl(users):
    return "".join(json.dumps(u, ensure_ascii=False) + "\n" for u in users)


def corpus_stats(users):
    return json.loads(_core.corpus_stats(_jsonl(users)))


def score(decisions, gold, **metrics):
    """decisions: iterable of {"user_id", "decision", "k"}; gold: corpus users."""
    return json.loads(
        _core.score(json.dumps(list(decisions)), _jsonl(gold), json.dumps(metrics) if metrics else "")
    )


def run_cli(*args):
    """Runs `erd <args>` in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])

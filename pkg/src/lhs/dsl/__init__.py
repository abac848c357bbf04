"""Tokenized expression language for constructive scoring heuristics."""

from .augment import Strategy, augment
from .corpus import CorpusEntry, read_corpus, write_corpus
from .dedupe import behavior_signature, dedupe
from .program import (
    FeatureFrame,
    InvalidProgram,
    ParseError,
    Program,
    choose,
    finite_on,
    from_tree,
    interpret,
    parse,
    select,
    serialize,
)
from .sampling import sample_seed_program
from .vocab import TASKS, TOKEN_ID, TOKENS, VOCAB_SIZE, Task, as_task, task_features

__all__ = [
    "Strategy", "augment", "CorpusEntry", "read_corpus", "write_corpus", "behavior_signature",
    "dedupe", "FeatureFrame", "InvalidProgram", "ParseError", "Program", "choose", "finite_on",
    "from_tree", "interpret", "parse", "select", "serialize", "sample_seed_program", "TASKS",
    "TOKEN_ID", "TOKENS", "VOCAB_SIZE", "Task", "as_task", "task_features",
]

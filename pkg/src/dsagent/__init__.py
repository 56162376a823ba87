"""Curriculum-ordered, memory-augmented code-generation agent harness.

Two-stage pipeline: a difficulty assessor orders a task corpus, then a
solver works through it in that order, retrieving similar prior episodes
from a growing store and appending each attempt back into it.
"""

__version__ = "0.1.0"

"""Stdio-protocol execution sandbox.

A supervisor spawns ``python -m codebox <workdir>`` and exchanges
newline-delimited JSON records over the child's stdin/stdout: exactly one
response per request, even when the executed code crashes or overruns its
time limit. Code runs in disposable worker processes (their own process
group, killed wholesale on timeout); named sessions keep a persistent
namespace across requests for multi-turn work.
"""

from .analyze import count_structures
from .server import serve

__all__ = ["count_structures", "serve"]
__version__ = "0.1.0"

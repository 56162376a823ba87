"""Structural counts for reference code.

Counting rules (fixed so difficulty scores are reproducible):

* functions: ``def`` and ``async def`` definitions, lambdas excluded.
* variables: distinct names bound by assignment statements (plain,
  augmented, annotated, walrus); tuple/list targets are unpacked.
  Function parameters and loop targets do not count. Deduplicated over
  the whole unit.
* conditions: ``if``/``elif`` branches (each is its own ``If`` node) plus
  conditional expressions.
* loops: ``for``/``while``/``async for`` statements plus comprehension
  generator clauses.
"""

from __future__ import annotations

import ast


def _bound_names(target: ast.expr) -> set[str]:
    if isinstance(target, ast.Name):
        return {target.id}
    if isinstance(target, (ast.Tuple, ast.List)):
        names: set[str] = set()
        for element in target.elts:
            names |= _bound_names(element)
        return names
    if isinstance(target, ast.Starred):
        return _bound_names(target.value)
    return set()  # attribute/subscript targets bind no new name


def count_structures(code: str) -> dict[str, int]:
    """Counts of functions, assigned variables, conditions, and loops.

    Raises ``SyntaxError`` if the code does not parse.
    """
    tree = ast.parse(code)
    functions = 0
    conditions = 0
    loops = 0
    variables: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            functions += 1
        elif isinstance(node, (ast.If, ast.IfExp)):
            conditions += 1
        elif isinstance(node, (ast.For, ast.AsyncFor, ast.While)):
            loops += 1
        elif isinstance(node, ast.comprehension):
            loops += 1
        elif isinstance(node, ast.Assign):
            for target in node.targets:
                variables |= _bound_names(target)
        elif isinstance(node, (ast.AugAssign, ast.AnnAssign)):
            variables |= _bound_names(node.target)
        elif isinstance(node, ast.NamedExpr):
            variables |= _bound_names(node.target)
    return {
        "functions": functions,
        "variables": len(variables),
        "conditions": conditions,
        "loops": loops,
    }

"""Whitelisted integer expressions for channel equations.

Expressions are parsed with :mod:`ast`, checked against a small set of
node types and compiled once; evaluation works elementwise on numpy
integer arrays.  ``^``, ``&`` and ``|`` act as modulo-2 operations on bits;
``+``, ``-``, ``*``, ``%`` and ``//`` are integer arithmetic.
"""

from __future__ import annotations

import ast

from .errors import StructuralError

_ALLOWED = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Mod,
    ast.FloorDiv,
    ast.BitXor,
    ast.BitAnd,
    ast.BitOr,
    ast.USub,
)


class CompiledExpr:
    def __init__(self, source: str):
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise StructuralError(f"cannot parse expression {source!r}: {exc.msg}") from None
        names = set()
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED):
                raise StructuralError(f"expression {source!r} uses unsupported syntax {type(node).__name__}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, int):
                raise StructuralError(f"expression {source!r} may only contain integer constants")
            if isinstance(node, ast.Name):
                names.add(node.id)
        self.source = source
        self.names = frozenset(names)
        self._code = compile(tree, "<channel equation>", "eval")

    def __call__(self, env: dict):
        missing = self.names - env.keys()
        if missing:
            raise StructuralError(f"expression {self.source!r} references unknown names {sorted(missing)}")
        return eval(self._code, {"__builtins__": {}}, {k: env[k] for k in self.names})

    def __repr__(self):
        return f"CompiledExpr({self.source!r})"

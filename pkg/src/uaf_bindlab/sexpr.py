"""Minimal s-expression reader with source positions.

Used for the canonical term syntax, knowledge-base files and scenario scripts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError


@dataclass(frozen=True)
class Symbol:
    name: str
    line: int
    column: int


@dataclass(frozen=True)
class String:
    value: str
    line: int
    column: int


@dataclass(frozen=True)
class SList:
    items: list
    line: int
    column: int


def _tokens(text: str):
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
        elif ch.isspace():
            col, i = col + 1, i + 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, ch, line, col
            col, i = col + 1, i + 1
        elif ch == '"':
            start_line, start_col = line, col
            i, col = i + 1, col + 1
            buf = []
            while True:
                if i >= n:
                    raise ParseError("unterminated string", start_line, start_col)
                c = text[i]
                if c == '"':
                    i, col = i + 1, col + 1
                    break
                if c == "\\" and i + 1 < n:
                    buf.append(text[i + 1])
                    i, col = i + 2, col + 2
                    continue
                if c == "\n":
                    line, col = line + 1, 0
                buf.append(c)
                i, col = i + 1, col + 1
            yield "str", "".join(buf), start_line, start_col
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in '()";':
                i += 1
            yield "sym", text[start:i], line, col
            col += i - start


def read_all(text: str) -> list:
    """Read every top-level form in ``text``."""
    stack: list[SList] = []
    top: list = []
    for kind, value, line, col in _tokens(text):
        if kind == "(":
            stack.append(SList([], line, col))
            continue
        if kind == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            node = stack.pop()
        elif kind == "str":
            node = String(value, line, col)
        else:
            node = Symbol(value, line, col)
        (stack[-1].items if stack else top).append(node)
    if stack:
        open_ = stack[-1]
        raise ParseError("unclosed '('", open_.line, open_.column)
    return top


def read_one(text: str):
    forms = read_all(text)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one form, found {len(forms)}", 1, 1)
    return forms[0]

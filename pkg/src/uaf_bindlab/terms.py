"""Symbolic message algebra.

Terms are immutable and compared structurally. The only equation beyond
syntactic identity is commutativity of the Diffie-Hellman shared secret,
which :class:`DhShared` enforces at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ParseError
from .sexpr import SList, String, Symbol, read_all, read_one


class Term:
    """Base class. Equality and hashing are structural; both are computed once at construction."""

    _fnames: tuple = ()

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        cls._fnames = ()

    def __post_init__(self):
        cls = type(self)
        if not cls._fnames:
            cls._fnames = tuple(f.name for f in fields(self))
        k = tuple(getattr(self, n) for n in cls._fnames)
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_h", hash((cls.__name__,) + k))

    def _key(self) -> tuple:
        return self._k

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not type(self):
            return NotImplemented if not isinstance(other, Term) else False
        return self._h == other._h and self._k == other._k

    def __hash__(self):
        return self._h

    def __repr__(self):
        return to_text(self)

    def __lt__(self, other: Term) -> bool:
        return to_text(self) < to_text(other)

    @property
    def is_atom(self) -> bool:
        return isinstance(self, ATOMS)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in children(self)), default=0)


@dataclass(frozen=True, eq=False)
class Name(Term):
    id: str


@dataclass(frozen=True, eq=False)
class Tag(Term):
    literal: str


@dataclass(frozen=True, eq=False)
class Nonce(Term):
    id: str


@dataclass(frozen=True, eq=False)
class PremasterSecret(Term):
    id: str


@dataclass(frozen=True, eq=False)
class DhExponent(Term):
    id: str


@dataclass(frozen=True, eq=False)
class DhPublic(Term):
    exp: DhExponent


@dataclass(frozen=True, eq=False)
class DhShared(Term):
    a: DhExponent
    b: DhExponent

    def __post_init__(self):
        if self.b.id < self.a.id:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class PublicKey(Term):
    owner: str


@dataclass(frozen=True, eq=False)
class PrivateKey(Term):
    owner: str


@dataclass(frozen=True, eq=False)
class SymKey(Term):
    derivation: Term


@dataclass(frozen=True, eq=False)
class Tuple(Term):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) < 2:
            raise ValueError("Tuple needs at least two parts")
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class Hash(Term):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("Hash needs at least one part")
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class SymEnc(Term):
    key: Term
    payload: Term


@dataclass(frozen=True, eq=False)
class AsymEnc(Term):
    key: PublicKey
    payload: Term


@dataclass(frozen=True, eq=False)
class Sig(Term):
    key: PrivateKey
    payload: Term


ATOMS = (Name, Tag, Nonce, PremasterSecret, DhExponent, PublicKey, PrivateKey)
# Atoms the adversary may know only by learning them.
SECRET_ATOMS = (Nonce, PremasterSecret, DhExponent, PrivateKey, PublicKey)


def tup(*parts: Term) -> Tuple:
    return Tuple(parts)


def hsh(*parts: Term) -> Hash:
    return Hash(parts)


def children(t: Term) -> tuple:
    match t:
        case Tuple(parts) | Hash(parts):
            return parts
        case SymEnc(k, p) | AsymEnc(k, p) | Sig(k, p):
            return (k, p)
        case DhPublic(e):
            return (e,)
        case DhShared(a, b):
            return (a, b)
        case SymKey(d):
            return (d,)
    return ()


def subterms(t: Term) -> set:
    out = {t}
    stack = [t]
    while stack:
        for c in children(stack.pop()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def canonicalize(t: Term) -> Term:
    """Rebuild ``t`` bottom-up; DH shared secrets come out with sorted exponents."""
    match t:
        case Tuple(parts):
            return Tuple(tuple(canonicalize(p) for p in parts))
        case Hash(parts):
            return Hash(tuple(canonicalize(p) for p in parts))
        case SymEnc(k, p):
            return SymEnc(canonicalize(k), canonicalize(p))
        case AsymEnc(k, p):
            return AsymEnc(k, canonicalize(p))
        case Sig(k, p):
            return Sig(k, canonicalize(p))
        case SymKey(d):
            return SymKey(canonicalize(d))
        case DhShared(a, b):
            return DhShared(a, b)
    return t


def inverse(key: Term) -> Term | None:
    match key:
        case PublicKey(o):
            return PrivateKey(o)
        case PrivateKey(o):
            return PublicKey(o)
    return None


# ---------------------------------------------------------------------------
# canonical text

_ATOM_HEADS = {
    Name: "name",
    Tag: "tag",
    Nonce: "nonce",
    PremasterSecret: "pms",
    DhExponent: "dh-exp",
    PublicKey: "pubk",
    PrivateKey: "privk",
}
_HEAD_ATOMS = {v: k for k, v in _ATOM_HEADS.items()}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_text(t: Term) -> str:
    cached = t.__dict__.get("_txt")
    if cached is not None:
        return cached
    head = _ATOM_HEADS.get(type(t))
    if head is not None:
        (value,) = t._key()
        s = f"({head} {_quote(value)})"
    else:
        match t:
            case DhPublic(e):
                s = f"(dh-pub {to_text(e)})"
            case DhShared(a, b):
                s = f"(dh-shared {to_text(a)} {to_text(b)})"
            case SymKey(d):
                s = f"(symkey {to_text(d)})"
            case Tuple(parts):
                s = "(tuple " + " ".join(to_text(p) for p in parts) + ")"
            case Hash(parts):
                s = "(hash " + " ".join(to_text(p) for p in parts) + ")"
            case SymEnc(k, p):
                s = f"(senc {to_text(k)} {to_text(p)})"
            case AsymEnc(k, p):
                s = f"(aenc {to_text(k)} {to_text(p)})"
            case Sig(k, p):
                s = f"(sig {to_text(k)} {to_text(p)})"
            case _:
                raise TypeError(f"not a term: {t!r}")
    object.__setattr__(t, "_txt", s)
    return s


def _arity(node: SList, head: str, n: int | None, at_least: int = 0) -> list:
    args = node.items[1:]
    if n is not None and len(args) != n:
        raise ParseError(f"'{head}' takes {n} argument(s), got {len(args)}", node.line, node.column)
    if len(args) < at_least:
        raise ParseError(f"'{head}' takes at least {at_least} arguments", node.line, node.column)
    return args


def _expect(t: Term, cls, node) -> Term:
    if not isinstance(t, cls):
        raise ParseError(f"expected {cls.__name__}, got {to_text(t)}", node.line, node.column)
    return t


def from_sexpr(node) -> Term:
    if not isinstance(node, SList) or not node.items:
        line, col = node.line, node.column
        raise ParseError("expected a parenthesised term", line, col)
    first = node.items[0]
    if not isinstance(first, Symbol):
        raise ParseError("term head must be a symbol", first.line, first.column)
    head = first.name
    if head in _HEAD_ATOMS:
        (arg,) = _arity(node, head, 1)
        if not isinstance(arg, String):
            raise ParseError(f"'{head}' takes a quoted string", arg.line, arg.column)
        return _HEAD_ATOMS[head](arg.value)
    if head == "dh-pub":
        (e,) = _arity(node, head, 1)
        return DhPublic(_expect(from_sexpr(e), DhExponent, e))
    if head == "dh-shared":
        a, b = _arity(node, head, 2)
        return DhShared(_expect(from_sexpr(a), DhExponent, a), _expect(from_sexpr(b), DhExponent, b))
    if head == "symkey":
        (d,) = _arity(node, head, 1)
        return SymKey(from_sexpr(d))
    if head == "tuple":
        return Tuple(tuple(from_sexpr(p) for p in _arity(node, head, None, 2)))
    if head == "hash":
        return Hash(tuple(from_sexpr(p) for p in _arity(node, head, None, 1)))
    if head == "senc":
        k, p = _arity(node, head, 2)
        return SymEnc(from_sexpr(k), from_sexpr(p))
    if head == "aenc":
        k, p = _arity(node, head, 2)
        return AsymEnc(_expect(from_sexpr(k), PublicKey, k), from_sexpr(p))
    if head == "sig":
        k, p = _arity(node, head, 2)
        return Sig(_expect(from_sexpr(k), PrivateKey, k), from_sexpr(p))
    raise ParseError(f"unknown term head '{head}'", first.line, first.column)


def parse(text: str) -> Term:
    return from_sexpr(read_one(text))


def parse_many(text: str) -> list[Term]:
    return [from_sexpr(n) for n in read_all(text)]

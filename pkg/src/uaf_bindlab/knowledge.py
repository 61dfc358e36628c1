"""Dolev-Yao knowledge: saturation under decomposition and derivability by composition."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import SecrecyViolation
from .terms import (
    AsymEnc,
    DhExponent,
    DhPublic,
    DhShared,
    Hash,
    Name,
    Nonce,
    PremasterSecret,
    PrivateKey,
    Sig,
    SymEnc,
    SymKey,
    Tag,
    Term,
    Tuple,
    to_text,
)


class Origination(enum.Enum):
    NON_ORIGINATING = "non-orig"
    UNIQUELY_ORIGINATING = "uniq-orig"
    UNIQUELY_GENERATED = "uniq-gen"
    PENETRATOR_NON_ORIGINATING = "pen-non-orig"


@dataclass(frozen=True)
class OriginationAssumption:
    kind: Origination
    subject: Term

    def __post_init__(self):
        if self.kind is Origination.NON_ORIGINATING:
            ok = isinstance(self.subject, (PrivateKey, DhExponent, SymKey))
        elif self.kind in (Origination.UNIQUELY_ORIGINATING, Origination.UNIQUELY_GENERATED):
            ok = isinstance(self.subject, (Nonce, PremasterSecret, DhExponent))
        else:
            ok = self.subject.is_atom
        if not ok:
            raise ValueError(f"{self.kind.value} cannot apply to {to_text(self.subject)}")


def non_orig(*subjects: Term) -> frozenset:
    return frozenset(OriginationAssumption(Origination.NON_ORIGINATING, s) for s in subjects)


@dataclass(frozen=True)
class KnowledgeBase:
    terms: frozenset = frozenset()
    assumptions: frozenset = frozenset()
    saturated: bool = False
    # provenance of terms obtained by decomposition: term -> (rule, premises)
    why: dict = field(default_factory=dict, compare=False, hash=False, repr=False)
    pending: tuple = field(default=(), compare=False, hash=False, repr=False)
    # derivability answers for this (saturated, immutable) term set
    memo: dict = field(default_factory=dict, compare=False, hash=False, repr=False)
    # saturated counterpart of an unsaturated knowledge base, computed on first use
    closed: KnowledgeBase | None = field(default=None, compare=False, hash=False, repr=False)

    @property
    def forbidden(self) -> frozenset:
        return frozenset(a.subject for a in self.assumptions if a.kind is Origination.NON_ORIGINATING)

    def __contains__(self, t: Term) -> bool:
        return t in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def add(self, *new: Term) -> KnowledgeBase:
        """Return the saturated knowledge base extended with ``new``."""
        base = self if self.saturated else saturate(self)
        fresh = tuple(t for t in new if t not in base.terms)
        if not fresh:
            return base
        # Searches extend the same knowledge by the same messages many times over;
        # sharing the result also shares its derivability memo.
        key = (base.terms, base.assumptions, fresh)
        hit = _ADD_CACHE.get(key)
        if hit is None:
            if len(_ADD_CACHE) >= _ADD_CACHE_SIZE:
                _ADD_CACHE.clear()
            hit = _ADD_CACHE[key] = _saturate(base.terms, list(fresh), base.pending, base.why, base.assumptions)
        return hit

    def derivable(self, target: Term) -> bool:
        return derivable(self, target)

    def fingerprint(self) -> int:
        return hash(self.terms)


_ADD_CACHE: dict = {}
_ADD_CACHE_SIZE = 200_000


def saturate(kb: KnowledgeBase) -> KnowledgeBase:
    """Close ``kb`` under tuple splitting, decryption, signature opening and DH completion."""
    if kb.saturated:
        return kb
    if kb.closed is None:
        object.__setattr__(kb, "closed", _saturate(frozenset(), list(kb.terms), (), {}, kb.assumptions))
    return kb.closed


def _saturate(old: frozenset, new: list, pending: tuple, why: dict, assumptions: frozenset) -> KnowledgeBase:
    known = set(old)
    why = dict(why)
    work: list[Term] = []
    exps = {t for t in old if isinstance(t, DhExponent)}
    pubs = {t for t in old if isinstance(t, DhPublic)}

    def learn(t: Term, rule: str | None = None, premises: tuple = ()):
        if t in known:
            return
        known.add(t)
        work.append(t)
        if rule is not None:
            why[t] = (rule, premises)

    for t in new:
        learn(t)
    stuck = list(pending)
    while True:
        while work:
            t = work.pop()
            match t:
                case Tuple(parts):
                    for p in parts:
                        learn(p, "split", (t,))
                case Sig(_, payload):
                    learn(payload, "open-sig", (t,))
                case SymEnc() | AsymEnc():
                    stuck.append(t)
                case DhExponent():
                    exps.add(t)
                    for pub in pubs:
                        learn(DhShared(t, pub.exp), "dh", (t, pub))
                case DhPublic(e):
                    pubs.add(t)
                    for x in exps:
                        learn(DhShared(x, e), "dh", (x, t))
        still = []
        for enc in stuck:
            if isinstance(enc, SymEnc):
                if _synth(known, enc.key, {}):
                    learn(enc.payload, "decrypt", (enc, enc.key))
                    continue
            else:
                priv = PrivateKey(enc.key.owner)
                if priv in known:
                    learn(enc.payload, "decrypt", (enc, priv))
                    continue
            still.append(enc)
        stuck = still
        if not work:
            break
    forbidden = {a.subject for a in assumptions if a.kind is Origination.NON_ORIGINATING}
    leaked = forbidden & known
    if leaked:
        names = ", ".join(sorted(to_text(t) for t in leaked))
        raise SecrecyViolation(f"non-originating term(s) reached the knowledge base: {names}")
    return KnowledgeBase(frozenset(known), assumptions, True, why, tuple(stuck))


def _synth(known, t: Term, memo: dict) -> bool:
    if t in known:
        return True
    hit = memo.get(t)
    if hit is not None:
        return hit
    match t:
        case Name() | Tag():
            ok = True
        case Tuple(parts) | Hash(parts):
            ok = all(_synth(known, p, memo) for p in parts)
        case SymEnc(k, p) | AsymEnc(k, p) | Sig(k, p):
            ok = _synth(known, k, memo) and _synth(known, p, memo)
        case SymKey(d):
            ok = _synth(known, d, memo)
        case DhPublic(e):
            ok = _synth(known, e, memo)
        case DhShared(a, b):
            ok = (_synth(known, a, memo) and _synth(known, DhPublic(b), memo)) or (
                _synth(known, b, memo) and _synth(known, DhPublic(a), memo)
            )
        case _:
            ok = False
    memo[t] = ok
    return ok


def derivable(kb: KnowledgeBase, target: Term) -> bool:
    """True iff the holder of ``kb`` can build ``target``."""
    kb = saturate(kb)
    return _synth(kb.terms, target, kb.memo)


@dataclass
class Derivation:
    rule: str
    term: Term
    premises: list = field(default_factory=list)

    def render(self, indent: int = 0) -> str:
        lines = ["  " * indent + f"{to_text(self.term)}  [{self.rule}]"]
        for p in self.premises:
            lines.append(p.render(indent + 1))
        return "\n".join(lines)


def explain(kb: KnowledgeBase, target: Term) -> Derivation | None:
    """One derivation tree for ``target``, or None when it is not derivable."""
    kb = saturate(kb)
    if not _synth(kb.terms, target, {}):
        return None
    return _explain(kb, target, set())


def _explain(kb: KnowledgeBase, t: Term, seen: set) -> Derivation:
    if t in kb.terms:
        if t in kb.why and t not in seen:
            rule, premises = kb.why[t]
            seen = seen | {t}
            return Derivation(rule, t, [_explain(kb, p, seen) for p in premises])
        return Derivation("known", t)
    match t:
        case Name() | Tag():
            return Derivation("public", t)
        case Tuple(parts):
            return Derivation("pair", t, [_explain(kb, p, seen) for p in parts])
        case Hash(parts):
            return Derivation("hash", t, [_explain(kb, p, seen) for p in parts])
        case SymEnc(k, p) | AsymEnc(k, p):
            return Derivation("encrypt", t, [_explain(kb, k, seen), _explain(kb, p, seen)])
        case Sig(k, p):
            return Derivation("sign", t, [_explain(kb, k, seen), _explain(kb, p, seen)])
        case SymKey(d):
            return Derivation("kdf", t, [_explain(kb, d, seen)])
        case DhPublic(e):
            return Derivation("dh-pub", t, [_explain(kb, e, seen)])
        case DhShared(a, b):
            if _synth(kb.terms, a, {}) and _synth(kb.terms, DhPublic(b), {}):
                return Derivation("dh", t, [_explain(kb, a, seen), _explain(kb, DhPublic(b), seen)])
            return Derivation("dh", t, [_explain(kb, b, seen), _explain(kb, DhPublic(a), seen)])
    raise AssertionError(f"no derivation for {to_text(t)}")

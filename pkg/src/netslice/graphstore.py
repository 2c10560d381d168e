"""In-memory triple store with a line-oriented text format ("NDL-Lite"),
basic graph pattern queries, and a fixed forward-chaining entailment profile.

The document format is deliberately small: ``@prefix`` headers, one triple
per line, IRIs, CURIEs, and typed literals. Canonical serialization sorts
prefixes and triples so model files are diffable and byte-stable.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

log = logging.getLogger(__name__)

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"

_WS_RE = re.compile(r"\s")
# Locals that survive a CURIE round trip without quoting.
_SAFE_LOCAL_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_/.-]*$")
_PREFIX_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.-]*$|^$")


@dataclass(frozen=True)
class Iri:
    """An absolute IRI. Compared by exact byte equality."""

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("empty IRI")
        if _WS_RE.search(self.value):
            raise ValueError(f"IRI contains whitespace: {self.value!r}")

    def local(self) -> str:
        """Fragment or final path segment, for messages and display."""
        v = self.value
        for sep in ("#", "/", ":"):
            if sep in v:
                return v.rsplit(sep, 1)[1] or v
        return v

    def __repr__(self) -> str:
        return f"<{self.value}>"


XSD_STRING = Iri(XSD_NS + "string")
XSD_INTEGER = Iri(XSD_NS + "integer")
XSD_DATETIME = Iri(XSD_NS + "dateTime")


@dataclass(frozen=True)
class Literal:
    """A literal value: lexical form plus datatype IRI.

    Plain quoted strings carry xsd:string. Only xsd:string, xsd:integer and
    xsd:dateTime get interpreted anywhere; other datatypes pass through
    opaquely.
    """

    lexical: str
    datatype: Iri = XSD_STRING

    def __repr__(self) -> str:
        if self.datatype == XSD_STRING:
            return f'"{self.lexical}"'
        return f'"{self.lexical}"^^<{self.datatype.value}>'


Term = Union[Iri, Literal]


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Term


@dataclass(frozen=True)
class Var:
    """Query variable, written ``?name`` in pattern text."""

    name: str


PatternTerm = Union[Iri, Literal, Var]
TriplePattern = tuple


RDF_TYPE = Iri(RDF_NS + "type")
RDFS_SUBCLASS_OF = Iri(RDFS_NS + "subClassOf")
RDFS_SUBPROPERTY_OF = Iri(RDFS_NS + "subPropertyOf")
RDFS_DOMAIN = Iri(RDFS_NS + "domain")
RDFS_RANGE = Iri(RDFS_NS + "range")
OWL_INVERSE_OF = Iri(OWL_NS + "inverseOf")
OWL_CLASS = Iri(OWL_NS + "Class")
OWL_OBJECT_PROPERTY = Iri(OWL_NS + "ObjectProperty")
OWL_DATATYPE_PROPERTY = Iri(OWL_NS + "DatatypeProperty")


def term_key(t: Term):
    """Total deterministic order over terms (IRIs before literals)."""
    if isinstance(t, Iri):
        return (0, t.value, "")
    return (1, t.lexical, t.datatype.value)


def int_value(t: Optional[Term]) -> Optional[int]:
    """Integer of an xsd:integer literal, else None."""
    if isinstance(t, Literal) and t.datatype == XSD_INTEGER:
        try:
            return int(t.lexical)
        except ValueError:
            return None
    return None


def integer(n: int) -> Literal:
    return Literal(str(n), XSD_INTEGER)


def string(s: str) -> Literal:
    return Literal(s, XSD_STRING)


class ParseError(Exception):
    """Malformed NDL-Lite input. Carries 1-based line and column."""

    def __init__(self, line: int, col: int, reason: str):
        self.line = line
        self.col = col
        self.reason = reason
        super().__init__(f"line {line}, col {col}: {reason}")


class ClosureBudgetExceeded(Exception):
    """Entailment derived more triples than the configured cap allows."""

    def __init__(self, derived: int, cap: int):
        self.derived = derived
        self.cap = cap
        super().__init__(f"entailment produced {derived} derived triples (cap {cap})")


class Model:
    """A set of triples with a prefix map and SPO/POS/OSP indexes.

    Set semantics: re-adding a triple is a no-op. Equality compares triple
    sets only; the prefix map is presentation. Mutation happens only through
    add/remove; readers may share a model freely.
    """

    __slots__ = ("prefixes", "_triples", "_spo", "_pos", "_osp")

    def __init__(self, prefixes: Optional[dict] = None):
        self.prefixes: dict[str, str] = dict(prefixes or {})
        self._triples: dict[Triple, None] = {}
        self._spo: dict[Iri, dict[Iri, dict[Term, None]]] = {}
        self._pos: dict[Iri, dict[Term, dict[Iri, None]]] = {}
        self._osp: dict[Term, dict[Iri, dict[Iri, None]]] = {}

    # -- mutation ---------------------------------------------------------

    def declare(self, name: str, iri: str) -> None:
        self.prefixes[name] = iri

    def add(self, t: Triple) -> bool:
        """Insert a triple. Returns False if it was already present."""
        if t in self._triples:
            return False
        self._triples[t] = None
        s, p, o = t.subject, t.predicate, t.object
        self._spo.setdefault(s, {}).setdefault(p, {})[o] = None
        self._pos.setdefault(p, {}).setdefault(o, {})[s] = None
        self._osp.setdefault(o, {}).setdefault(s, {})[p] = None
        return True

    def add_all(self, triples: Iterable[Triple]) -> int:
        n = 0
        for t in triples:
            if self.add(t):
                n += 1
        return n

    def remove(self, t: Triple) -> bool:
        if t not in self._triples:
            return False
        del self._triples[t]
        s, p, o = t.subject, t.predicate, t.object
        del self._spo[s][p][o]
        if not self._spo[s][p]:
            del self._spo[s][p]
            if not self._spo[s]:
                del self._spo[s]
        del self._pos[p][o][s]
        if not self._pos[p][o]:
            del self._pos[p][o]
            if not self._pos[p]:
                del self._pos[p]
        del self._osp[o][s][p]
        if not self._osp[o][s]:
            del self._osp[o][s]
            if not self._osp[o]:
                del self._osp[o]
        return True

    # -- access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return self._triples.keys() == other._triples.keys()

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    __hash__ = None  # mutable

    def match(
        self,
        s: Optional[Iri] = None,
        p: Optional[Iri] = None,
        o: Optional[Term] = None,
    ) -> Iterator[Triple]:
        """All triples matching the given fixed positions (None = wildcard)."""
        if s is not None and p is not None and o is not None:
            t = Triple(s, p, o)
            if t in self._triples:
                yield t
            return
        if s is not None and p is not None:
            for obj in self._spo.get(s, {}).get(p, ()):
                yield Triple(s, p, obj)
        elif p is not None and o is not None:
            for subj in self._pos.get(p, {}).get(o, ()):
                yield Triple(subj, p, o)
        elif s is not None and o is not None:
            for pred in self._osp.get(o, {}).get(s, ()):
                yield Triple(s, pred, o)
        elif s is not None:
            for pred, objs in self._spo.get(s, {}).items():
                for obj in objs:
                    yield Triple(s, pred, obj)
        elif p is not None:
            for obj, subjs in self._pos.get(p, {}).items():
                for subj in subjs:
                    yield Triple(subj, p, obj)
        elif o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Triple(subj, pred, o)
        else:
            yield from self._triples

    def objects(self, s: Iri, p: Iri) -> list:
        """Objects of (s, p, ·), sorted for determinism."""
        return sorted(self._spo.get(s, {}).get(p, ()), key=term_key)

    def value(self, s: Iri, p: Iri) -> Optional[Term]:
        objs = self.objects(s, p)
        return objs[0] if objs else None

    def subjects(self, p: Iri, o: Term) -> list:
        """Subjects of (·, p, o), sorted."""
        return sorted(self._pos.get(p, {}).get(o, ()), key=term_key)

    def typed(self, cls: Iri) -> list:
        """Instances carrying rdf:type cls."""
        return self.subjects(RDF_TYPE, cls)

    def types(self, s: Iri) -> set:
        return {o for o in self._spo.get(s, {}).get(RDF_TYPE, ()) if isinstance(o, Iri)}

    def copy(self) -> "Model":
        m = Model(self.prefixes)
        m.add_all(self._triples)
        return m

    def resolve(self, text: str) -> Iri:
        """Resolve ``<iri>``, ``prefix:local`` or a bare absolute IRI."""
        if text.startswith("<") and text.endswith(">"):
            return Iri(text[1:-1])
        if ":" in text:
            name, local = text.split(":", 1)
            if name in self.prefixes:
                return Iri(self.prefixes[name] + local)
            if "://" in text or text.startswith("urn:"):
                return Iri(text)
        raise ValueError(f"cannot resolve {text!r}: unknown prefix")


# -- text format ------------------------------------------------------------


def _scan_line(text: str, lineno: int) -> list:
    """Tokenize one line. Tokens are (kind, value, col, datatype_spec)."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r":
            i += 1
            continue
        col = i + 1
        if c == "#":
            break
        if c == "<":
            j = text.find(">", i + 1)
            if j < 0:
                raise ParseError(lineno, col, "unterminated IRI reference")
            value = text[i + 1 : j]
            tokens.append(("iri", value, col, None))
            i = j + 1
        elif c == '"':
            lex, i = _scan_string(text, i, lineno)
            dt_spec = None
            if text[i : i + 2] == "^^":
                i += 2
                if i < n and text[i] == "<":
                    j = text.find(">", i + 1)
                    if j < 0:
                        raise ParseError(lineno, i + 1, "unterminated datatype IRI")
                    dt_spec = ("iri", text[i + 1 : j])
                    i = j + 1
                else:
                    j = i
                    while j < n and text[j] not in " \t\r":
                        j += 1
                    if j == i:
                        raise ParseError(lineno, i + 1, "missing datatype after ^^")
                    dt_spec = ("word", text[i:j])
                    i = j
            tokens.append(("literal", lex, col, dt_spec))
        elif c == "." and (i + 1 == n or text[i + 1] in " \t\r#"):
            tokens.append(("dot", ".", col, None))
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r":
                j += 1
            tokens.append(("word", text[i:j], col, None))
            i = j
    return tokens


_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


def _scan_string(text: str, i: int, lineno: int):
    """Scan a quoted string starting at text[i] == '"'. Returns (lexical, next_i)."""
    col = i + 1
    out = []
    i += 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\\":
            if i + 1 >= n or text[i + 1] not in _ESCAPES:
                raise ParseError(lineno, i + 1, "bad escape in string literal")
            out.append(_ESCAPES[text[i + 1]])
            i += 2
        elif c == '"':
            return "".join(out), i + 1
        else:
            out.append(c)
            i += 1
    raise ParseError(lineno, col, "unterminated string literal")


def parse_document(text: str) -> Model:
    """Parse an NDL-Lite document into a Model.

    Raises ParseError with line/column on malformed lines, undeclared
    prefixes, or a literal in subject or predicate position.
    """
    m = Model()

    def resolve_word(word: str, lineno: int, col: int) -> Iri:
        if ":" not in word:
            raise ParseError(lineno, col, f"expected IRI, CURIE or literal, got {word!r}")
        name, local = word.split(":", 1)
        if name not in m.prefixes:
            raise ParseError(lineno, col, f"undeclared prefix {name!r}")
        return Iri(m.prefixes[name] + local)

    for lineno, line in enumerate(text.split("\n"), start=1):
        tokens = _scan_line(line, lineno)
        if not tokens:
            continue
        if tokens[0][0] == "word" and tokens[0][1] == "@prefix":
            if (
                len(tokens) != 4
                or tokens[1][0] != "word"
                or not tokens[1][1].endswith(":")
                or tokens[2][0] != "iri"
                or tokens[3][0] != "dot"
            ):
                raise ParseError(lineno, tokens[0][2], "malformed @prefix declaration")
            name = tokens[1][1][:-1]
            if not _PREFIX_NAME_RE.match(name):
                raise ParseError(lineno, tokens[1][2], f"bad prefix name {name!r}")
            m.declare(name, tokens[2][1])
            continue
        if len(tokens) != 4 or tokens[3][0] != "dot":
            raise ParseError(
                lineno,
                tokens[-1][2],
                "expected 'S P O .' (terms and terminating dot separated by spaces)",
            )
        terms = []
        for pos, (kind, value, col, dt_spec) in enumerate(tokens[:3]):
            if kind == "iri":
                try:
                    terms.append(Iri(value))
                except ValueError as e:
                    raise ParseError(lineno, col, str(e)) from None
            elif kind == "word":
                terms.append(resolve_word(value, lineno, col))
            elif kind == "literal":
                if pos == 0:
                    raise ParseError(lineno, col, "literal not allowed in subject position")
                if pos == 1:
                    raise ParseError(lineno, col, "literal not allowed in predicate position")
                if dt_spec is None:
                    terms.append(Literal(value))
                elif dt_spec[0] == "iri":
                    terms.append(Literal(value, Iri(dt_spec[1])))
                else:
                    terms.append(Literal(value, resolve_word(dt_spec[1], lineno, col)))
            else:
                raise ParseError(lineno, col, f"unexpected {kind!r} token")
        m.add(Triple(terms[0], terms[1], terms[2]))
    return m


def render_term(t: Term, prefixes: dict) -> str:
    """Render a term, compacting IRIs against the prefix map when safe."""
    if isinstance(t, Iri):
        best = None
        for name, ns in prefixes.items():
            if t.value.startswith(ns):
                local = t.value[len(ns) :]
                if local and not (_SAFE_LOCAL_RE.match(local) and not local.endswith(".")):
                    continue
                cand = (len(ns), name)
                # Longest namespace wins; ties break on prefix name.
                if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                    best = (cand[0], name, local)
        if best is not None:
            return f"{best[1]}:{best[2]}"
        return f"<{t.value}>"
    lex = (
        t.lexical.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    if t.datatype == XSD_STRING:
        return f'"{lex}"'
    return f'"{lex}"^^{render_term(t.datatype, prefixes)}'


def serialize_document(m: Model) -> str:
    """Canonical NDL-Lite text: sorted prefixes, then sorted compacted triples.

    parse_document(serialize_document(m)) reproduces m exactly; serializing
    again yields identical bytes.
    """
    lines = [f"@prefix {name}: <{iri}> ." for name, iri in sorted(m.prefixes.items())]
    rendered = sorted(
        (
            render_term(t.subject, m.prefixes),
            render_term(t.predicate, m.prefixes),
            render_term(t.object, m.prefixes),
        )
        for t in m
    )
    lines.extend(f"{s} {p} {o} ." for s, p, o in rendered)
    return "\n".join(lines) + ("\n" if lines else "")


def merge(models: Sequence[Model]) -> Model:
    """Union of triple sets. Prefix conflicts: the later model wins, with a warning."""
    out = Model()
    for m in models:
        for name, iri in m.prefixes.items():
            old = out.prefixes.get(name)
            if old is not None and old != iri:
                log.warning("prefix %r redefined: %s -> %s", name, old, iri)
            out.prefixes[name] = iri
        out.add_all(m)
    return out


# -- entailment ---------------------------------------------------------------

# Fixed profile: subclass transitivity, type propagation via subclass,
# subproperty transitivity and propagation, inverse-property symmetry,
# domain/range typing. Applied to fixpoint; only ever adds triples.


def entail(m: Model, budget: int = 1_000_000) -> Model:
    """Fixpoint closure of m under the fixed entailment profile.

    Monotone (result contains m) and idempotent. Raises
    ClosureBudgetExceeded when more than `budget` new triples get derived.
    """
    out = m.copy()
    agenda = deque(out)
    derived = 0

    def emit(s: Iri, p: Iri, o: Term) -> None:
        nonlocal derived
        t = Triple(s, p, o)
        if out.add(t):
            derived += 1
            if derived > budget:
                raise ClosureBudgetExceeded(derived, budget)
            agenda.append(t)

    while agenda:
        t = agenda.popleft()
        s, p, o = t.subject, t.predicate, t.object
        if p == RDFS_SUBCLASS_OF and isinstance(o, Iri):
            for sup in out.objects(o, RDFS_SUBCLASS_OF):
                if isinstance(sup, Iri):
                    emit(s, RDFS_SUBCLASS_OF, sup)
            for sub in out.subjects(RDFS_SUBCLASS_OF, s):
                emit(sub, RDFS_SUBCLASS_OF, o)
            for inst in out.subjects(RDF_TYPE, s):
                emit(inst, RDF_TYPE, o)
        elif p == RDF_TYPE and isinstance(o, Iri):
            for sup in out.objects(o, RDFS_SUBCLASS_OF):
                if isinstance(sup, Iri):
                    emit(s, RDF_TYPE, sup)
        elif p == RDFS_SUBPROPERTY_OF and isinstance(o, Iri):
            for sup in out.objects(o, RDFS_SUBPROPERTY_OF):
                if isinstance(sup, Iri):
                    emit(s, RDFS_SUBPROPERTY_OF, sup)
            for sub in out.subjects(RDFS_SUBPROPERTY_OF, s):
                emit(sub, RDFS_SUBPROPERTY_OF, o)
            for inst in list(out.match(p=s)):
                emit(inst.subject, o, inst.object)
        elif p == RDFS_DOMAIN and isinstance(o, Iri):
            for inst in list(out.match(p=s)):
                emit(inst.subject, RDF_TYPE, o)
        elif p == RDFS_RANGE and isinstance(o, Iri):
            for inst in list(out.match(p=s)):
                if isinstance(inst.object, Iri):
                    emit(inst.object, RDF_TYPE, o)
        elif p == OWL_INVERSE_OF and isinstance(o, Iri):
            emit(o, OWL_INVERSE_OF, s)
            for inst in list(out.match(p=s)):
                if isinstance(inst.object, Iri):
                    emit(inst.object, o, inst.subject)
        # Property-driven rules for the triple itself (covers instance
        # triples arriving after their schema declarations).
        for sup in out.objects(p, RDFS_SUBPROPERTY_OF):
            if isinstance(sup, Iri):
                emit(s, sup, o)
        for cls in out.objects(p, RDFS_DOMAIN):
            if isinstance(cls, Iri):
                emit(s, RDF_TYPE, cls)
        for cls in out.objects(p, RDFS_RANGE):
            if isinstance(cls, Iri) and isinstance(o, Iri):
                emit(o, RDF_TYPE, cls)
        if isinstance(o, Iri):
            for inv in out.objects(p, OWL_INVERSE_OF):
                if isinstance(inv, Iri):
                    emit(o, inv, s)
    return out


# -- basic graph patterns ------------------------------------------------------


def query_bgp(m: Model, patterns: Sequence[TriplePattern]) -> list:
    """All variable bindings under which every pattern is a triple of m.

    Patterns are (s, p, o) tuples mixing concrete terms and Var. Returns a
    deterministically ordered list of dicts mapping variable name to Term.
    """
    if not patterns:
        raise ValueError("empty pattern list")
    solutions: list[dict] = [{}]
    for pat in patterns:
        if len(pat) != 3:
            raise ValueError(f"pattern must have 3 positions: {pat!r}")
        next_solutions = []
        for binding in solutions:
            bound = [
                binding.get(x.name) if isinstance(x, Var) else x for x in pat
            ]
            if isinstance(bound[0], Literal) or isinstance(bound[1], Literal):
                continue  # literals can never occupy subject/predicate
            for t in m.match(bound[0], bound[1], bound[2]):
                new = dict(binding)
                ok = True
                for x, val in zip(pat, (t.subject, t.predicate, t.object)):
                    if isinstance(x, Var):
                        prev = new.get(x.name)
                        if prev is None:
                            new[x.name] = val
                        elif prev != val:
                            ok = False
                            break
                if ok:
                    next_solutions.append(new)
        solutions = next_solutions
    names = sorted({x.name for pat in patterns for x in pat if isinstance(x, Var)})
    seen = {}
    for b in solutions:
        key = tuple(term_key(b[n]) for n in names)
        if key not in seen:
            seen[key] = b
    return [seen[k] for k in sorted(seen)]

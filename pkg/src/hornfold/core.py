"""Typed first-order terms, atoms, clauses and the structural queries the
transformation engine relies on: unification, variance, sharing blocks,
conjunction embedding, the subterm ordering and moded conjunction views.

All values are immutable after construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence, Union

from . import constraints
from .constraints import Constraint, TRUE


class HornfoldError(Exception):
    """Base class for all package errors."""


class NoValidOrderingError(HornfoldError):
    """No atom ordering satisfies the moded-conjunction conditions."""


# ---------------------------------------------------------------------------
# types and terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Type:
    name: str

    @property
    def is_basic(self) -> bool:
        return self.name in ("int", "bool")

    @property
    def is_adt(self) -> bool:
        return not self.is_basic

    def __repr__(self) -> str:
        return self.name


INT = Type("int")
BOOL = Type("bool")


@dataclass(frozen=True)
class Var:
    name: str
    type: Type

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class IntConst:
    value: int

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __repr__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Ctor:
    name: str
    args: tuple["Term", ...]
    adt: str

    def __repr__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class ArithOp:
    """Arithmetic term; only the frontend sees these (atoms are flattened)."""

    op: str
    args: tuple["Term", ...]

    def __repr__(self) -> str:
        return f"({f' {self.op} '.join(map(repr, self.args))})"


Term = Union[Var, IntConst, BoolConst, Ctor, ArithOp]


def term_type(t: Term) -> Type:
    if isinstance(t, Var):
        return t.type
    if isinstance(t, IntConst):
        return INT
    if isinstance(t, BoolConst):
        return BOOL
    if isinstance(t, Ctor):
        return Type(t.adt)
    return INT


def term_vars(t: Term) -> list[Var]:
    """Variables in left-to-right, depth-first order, first occurrence kept."""
    out: dict[Var, None] = {}

    def walk(u: Term) -> None:
        if isinstance(u, Var):
            out.setdefault(u)
        elif isinstance(u, (Ctor, ArithOp)):
            for a in u.args:
                walk(a)

    walk(t)
    return list(out)


def vars_of(*items: "Term | Atom | Iterable") -> list[Var]:
    out: dict[Var, None] = {}
    for it in items:
        if isinstance(it, Atom):
            for a in it.args:
                for v in term_vars(a):
                    out.setdefault(v)
        elif isinstance(it, (Var, IntConst, BoolConst, Ctor, ArithOp)):
            for v in term_vars(it):
                out.setdefault(v)
        else:
            for sub in it:
                for v in vars_of(sub):
                    out.setdefault(v)
    return list(out)


def is_subterm(t: Term, u: Term) -> bool:
    if t == u:
        return True
    if isinstance(u, (Ctor, ArithOp)):
        return any(is_subterm(t, a) for a in u.args)
    return False


def subterm_lt(ts: Sequence[Term], us: Sequence[Term]) -> bool:
    """Well-founded ordering on term tuples: componentwise subterms with at
    least one strict one; stable under substitution."""
    if not all(any(is_subterm(t, u) for u in us) for t in ts):
        return False
    return any(any(is_subterm(t, u) and t != u for u in us) for t in ts)


# ---------------------------------------------------------------------------
# atoms, clauses, programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...]

    def __repr__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class ModeSignature:
    pred: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]

    def input_args(self, atom: Atom) -> tuple[Term, ...]:
        return tuple(atom.args[i] for i in self.inputs)

    def output_args(self, atom: Atom) -> tuple[Term, ...]:
        return tuple(atom.args[i] for i in self.outputs)


@dataclass(frozen=True)
class CtorDecl:
    name: str
    arg_types: tuple[Type, ...]


@dataclass(frozen=True)
class Clause:
    """head is None for goals; unfoldable flags are aligned with body."""

    head: Atom | None
    constraint: Constraint
    body: tuple[Atom, ...]
    cid: int = 0
    unfoldable: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if len(self.unfoldable) != len(self.body):
            object.__setattr__(self, "unfoldable", tuple(False for _ in self.body))

    @property
    def is_goal(self) -> bool:
        return self.head is None

    def variables(self) -> list[Var]:
        out: dict[Var, None] = {}
        if self.head is not None:
            for v in vars_of(self.head):
                out.setdefault(v)
        for a in self.body:
            for v in vars_of(a):
                out.setdefault(v)
        # constraint variables that occur in no atom
        bool_names = set(self.constraint.bool_vars())
        have = {v.name for v in out}
        for n in self.constraint.variables():
            if n not in have:
                out.setdefault(Var(n, BOOL if n in bool_names else INT))
        return list(out)

    def with_marks(self, marks: Sequence[bool]) -> "Clause":
        return replace(self, unfoldable=tuple(marks))

    def __repr__(self) -> str:
        return format_clause(self)


def format_clause(c: Clause) -> str:
    head = "false" if c.head is None else repr(c.head)
    parts: list[str] = []
    if not c.constraint.is_true:
        parts.append(repr(c.constraint))
    parts.extend(repr(a) for a in c.body)
    if not parts:
        return f"{head}."
    return f"{head} :- {', '.join(parts)}."


@dataclass
class Program:
    """Datatype and predicate declarations plus clauses; immutable by use."""

    datatypes: dict[str, tuple[CtorDecl, ...]] = field(default_factory=dict)
    predicates: dict[str, tuple[Type, ...]] = field(default_factory=dict)
    modes: dict[str, ModeSignature] = field(default_factory=dict)
    clauses: tuple[Clause, ...] = ()
    levels: dict[str, int] = field(default_factory=dict)

    def goals(self) -> list[Clause]:
        return [c for c in self.clauses if c.is_goal]

    def definite(self) -> list[Clause]:
        return [c for c in self.clauses if not c.is_goal]

    def level(self, pred: str | None) -> float:
        if pred is None:
            return float("inf")
        return self.levels[pred]


def atom_has_adt(atom: Atom) -> bool:
    return any(term_type(t).is_adt for t in atom.args)


def clause_has_basic_types(c: Clause) -> bool:
    atoms = list(c.body) + ([c.head] if c.head is not None else [])
    return all(not atom_has_adt(a) for a in atoms)


def adt_vars_of_atom(atom: Atom) -> set[Var]:
    return {v for v in vars_of(atom) if v.type.is_adt}


def classify_vars(atoms: Sequence[Atom]) -> tuple[tuple[Var, ...], tuple[Var, ...]]:
    """Split the variables of a conjunction into (basic-typed, adt-typed)."""
    basic: dict[Var, None] = {}
    adts: dict[Var, None] = {}
    for a in atoms:
        for v in vars_of(a):
            (basic if v.type.is_basic else adts).setdefault(v)
    return tuple(basic), tuple(adts)


def sharing_blocks(atoms: Sequence[Atom]) -> tuple[tuple[int, ...], ...]:
    """Partition of atom indices under transitive sharing of ADT variables.

    Atoms without ADT variables form singleton blocks.  Blocks are ordered by
    their smallest member; members keep source order.
    """
    n = len(atoms)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[Var, int] = {}
    for i, a in enumerate(atoms):
        for v in adt_vars_of_atom(a):
            if v in owner:
                ri, rj = find(i), find(owner[v])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            else:
                owner[v] = i
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(groups[r]) for r in sorted(groups))


# ---------------------------------------------------------------------------
# substitutions, unification, matching
# ---------------------------------------------------------------------------


class Substitution:
    """Type-preserving mapping from variables to terms, applied simultaneously.

    Unifiers produced by ``mgu`` are idempotent; hand-built substitutions may
    bind a variable that occurs in another image, and application replaces all
    variables in a single pass.
    """

    __slots__ = ("m",)

    def __init__(self, mapping: Mapping[Var, Term] | None = None) -> None:
        self.m = {v: t for v, t in (mapping or {}).items() if t != v}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Substitution) and self.m == other.m

    def __bool__(self) -> bool:
        return bool(self.m)

    def __repr__(self) -> str:
        inner = ", ".join(f"{v}->{t!r}" for v, t in sorted(self.m.items(), key=lambda kv: kv[0].name))
        return "{" + inner + "}"

    @property
    def is_identity(self) -> bool:
        return not self.m

    def domain(self) -> set[Var]:
        return set(self.m)

    def get(self, v: Var) -> Term:
        return self.m.get(v, v)

    def term(self, t: Term) -> Term:
        return _subst_term(t, self.m)

    def atom(self, a: Atom) -> Atom:
        return Atom(a.pred, tuple(self.term(t) for t in a.args))

    def atoms(self, atoms: Sequence[Atom]) -> tuple[Atom, ...]:
        return tuple(self.atom(a) for a in atoms)

    def constraint(self, c: Constraint) -> Constraint:
        int_map: dict[str, str | int] = {}
        bool_map: dict[str, str | bool] = {}
        for v, t in self.m.items():
            if v.type == INT:
                if isinstance(t, Var):
                    int_map[v.name] = t.name
                elif isinstance(t, IntConst):
                    int_map[v.name] = t.value
            elif v.type == BOOL:
                if isinstance(t, Var):
                    bool_map[v.name] = t.name
                elif isinstance(t, BoolConst):
                    bool_map[v.name] = t.value
        return constraints.substitute(c, int_map, bool_map)

    def clause(self, c: Clause) -> Clause:
        return replace(
            c,
            head=None if c.head is None else self.atom(c.head),
            constraint=self.constraint(c.constraint),
            body=self.atoms(c.body),
        )

    def compose(self, later: "Substitution") -> "Substitution":
        """self then later."""
        m = {v: later.term(t) for v, t in self.m.items()}
        for v, t in later.m.items():
            m.setdefault(v, t)
        return Substitution(m)

    def restrict(self, dom: Iterable[Var]) -> "Substitution":
        ds = set(dom)
        return Substitution({v: t for v, t in self.m.items() if v in ds})

    def is_renaming(self) -> bool:
        imgs = list(self.m.values())
        return all(isinstance(t, Var) for t in imgs) and len(set(imgs)) == len(imgs)


def _subst_term(t: Term, m: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return m.get(t, t)
    if isinstance(t, Ctor):
        return Ctor(t.name, tuple(_subst_term(a, m) for a in t.args), t.adt)
    if isinstance(t, ArithOp):
        return ArithOp(t.op, tuple(_subst_term(a, m) for a in t.args))
    return t


def mgu(a1: Atom, a2: Atom, protect: frozenset[Var] | set[Var] = frozenset()) -> Substitution | None:
    """Most general unifier, treating all function symbols syntactically.

    Variable-variable bindings avoid binding variables in ``protect`` when the
    other side is free, so callers can keep one atom's variables fixed.
    Occurs-check enabled; distinct constants never unify.
    """
    if a1.pred != a2.pred or len(a1.args) != len(a2.args):
        return None
    eqs: list[tuple[Term, Term]] = list(zip(a1.args, a2.args))
    m: dict[Var, Term] = {}

    def resolve(t: Term) -> Term:
        while isinstance(t, Var) and t in m:
            t = m[t]
        return t

    while eqs:
        lhs, rhs = eqs.pop(0)
        lhs, rhs = resolve(lhs), resolve(rhs)
        if lhs == rhs:
            continue
        if isinstance(lhs, Var) and isinstance(rhs, Var):
            if lhs in protect and rhs not in protect:
                lhs, rhs = rhs, lhs
            m[lhs] = rhs
            continue
        if not isinstance(lhs, Var) and isinstance(rhs, Var):
            lhs, rhs = rhs, lhs
        if isinstance(lhs, Var):
            rhs_full = _subst_term(rhs, _closure(m))
            if lhs in vars_of(rhs_full):
                return None
            if term_type(lhs) != term_type(rhs_full):
                return None
            m[lhs] = rhs
            continue
        if isinstance(lhs, Ctor) and isinstance(rhs, Ctor):
            if lhs.name != rhs.name or len(lhs.args) != len(rhs.args):
                return None
            eqs.extend(zip(lhs.args, rhs.args))
            continue
        if isinstance(lhs, ArithOp) and isinstance(rhs, ArithOp):
            if lhs.op != rhs.op or len(lhs.args) != len(rhs.args):
                return None
            eqs.extend(zip(lhs.args, rhs.args))
            continue
        return None
    return Substitution(_closure(m))


def _closure(m: Mapping[Var, Term]) -> dict[Var, Term]:
    out = dict(m)
    for _ in range(len(out) + 1):
        nxt = {v: _subst_term(t, out) for v, t in out.items()}
        if nxt == out:
            break
        out = nxt
    return out


def match_term(pattern: Term, target: Term, binding: dict[Var, Term]) -> bool:
    """One-sided matching: extend binding so that pattern*binding == target."""
    if isinstance(pattern, Var):
        bound = binding.get(pattern)
        if bound is None:
            if term_type(pattern) != term_type(target):
                return False
            binding[pattern] = target
            return True
        return bound == target
    if isinstance(pattern, Ctor) and isinstance(target, Ctor):
        if pattern.name != target.name or len(pattern.args) != len(target.args):
            return False
        return all(match_term(p, t, binding) for p, t in zip(pattern.args, target.args))
    if isinstance(pattern, ArithOp) and isinstance(target, ArithOp):
        if pattern.op != target.op or len(pattern.args) != len(target.args):
            return False
        return all(match_term(p, t, binding) for p, t in zip(pattern.args, target.args))
    return pattern == target


def match_atom(pattern: Atom, target: Atom, binding: dict[Var, Term] | None = None) -> dict[Var, Term] | None:
    b = dict(binding or {})
    if pattern.pred != target.pred or len(pattern.args) != len(target.args):
        return None
    for p, t in zip(pattern.args, target.args):
        if not match_term(p, t, b):
            return None
    return b


# ---------------------------------------------------------------------------
# variance
# ---------------------------------------------------------------------------


def _bijective_extend(fwd: dict[Var, Var], rev: dict[Var, Var], a: Var, b: Var) -> bool:
    if a in fwd:
        return fwd[a] == b
    if b in rev:
        return False
    if a.type != b.type:
        return False
    fwd[a] = b
    rev[b] = a
    return True


def _match_renaming_terms(t1: Term, t2: Term, fwd: dict[Var, Var], rev: dict[Var, Var]) -> bool:
    if isinstance(t1, Var) and isinstance(t2, Var):
        return _bijective_extend(fwd, rev, t1, t2)
    if isinstance(t1, Ctor) and isinstance(t2, Ctor):
        return (
            t1.name == t2.name
            and len(t1.args) == len(t2.args)
            and all(_match_renaming_terms(a, b, fwd, rev) for a, b in zip(t1.args, t2.args))
        )
    if isinstance(t1, ArithOp) and isinstance(t2, ArithOp):
        return (
            t1.op == t2.op
            and len(t1.args) == len(t2.args)
            and all(_match_renaming_terms(a, b, fwd, rev) for a, b in zip(t1.args, t2.args))
        )
    return t1 == t2


def body_renamings(
    atoms1: Sequence[Atom],
    atoms2: Sequence[Atom],
    fwd: dict[Var, Var] | None = None,
    rev: dict[Var, Var] | None = None,
) -> Iterator[tuple[dict[Var, Var], tuple[int, ...]]]:
    """All bijective variable renamings mapping atoms1 onto a permutation of
    atoms2, yielded with the permutation (atoms2 index per atoms1 position)."""
    if len(atoms1) != len(atoms2):
        return
    fwd = dict(fwd or {})
    rev = dict(rev or {})

    def go(i: int, used: set[int], f: dict[Var, Var], r: dict[Var, Var], perm: list[int]) -> Iterator:
        if i == len(atoms1):
            yield dict(f), tuple(perm)
            return
        a = atoms1[i]
        for j, b in enumerate(atoms2):
            if j in used or a.pred != b.pred or len(a.args) != len(b.args):
                continue
            f2, r2 = dict(f), dict(r)
            if all(_match_renaming_terms(x, y, f2, r2) for x, y in zip(a.args, b.args)):
                yield from go(i + 1, used | {j}, f2, r2, perm + [j])

    yield from go(0, set(), fwd, rev, [])


def variant_of(c1: Clause, c2: Clause) -> tuple[Substitution, tuple[int, ...]] | None:
    """A renaming plus body permutation witnessing that c1 and c2 are variants
    (constraints compared syntactically after renaming)."""
    fwd: dict[Var, Var] = {}
    rev: dict[Var, Var] = {}
    if (c1.head is None) != (c2.head is None):
        return None
    if c1.head is not None:
        if c1.head.pred != c2.head.pred or len(c1.head.args) != len(c2.head.args):
            return None
        if not all(
            _match_renaming_terms(a, b, fwd, rev) for a, b in zip(c1.head.args, c2.head.args)
        ):
            return None
    for mapping, perm in body_renamings(c1.body, c2.body, fwd, rev):
        full = _complete_renaming(c1, c2, mapping)
        if full is None:
            continue
        s = Substitution(dict(full))
        if s.constraint(c1.constraint) == c2.constraint:
            return s, perm
    return None


def _complete_renaming(c1: Clause, c2: Clause, mapping: dict[Var, Var]) -> dict[Var, Var] | None:
    """Extend an atom-level renaming over constraint-only variables."""
    vars1 = {v.name: v for v in c1.variables()}
    used = {v.name for v in mapping.values()}
    out = dict(mapping)
    only1 = [v for n, v in vars1.items() if v not in mapping]
    vars2 = {v.name: v for v in c2.variables()}
    free2 = [v for v in vars2.values() if v not in set(mapping.values())]
    if len(only1) != len(free2):
        return None
    if not only1:
        return out
    # small backtracking over constraint-only variables
    for perm in itertools.permutations(free2):
        cand = dict(out)
        ok = True
        for v, w in zip(only1, perm):
            if v.type != w.type:
                ok = False
                break
            cand[v] = w
        if ok:
            s = Substitution(dict(cand))
            if s.constraint(c1.constraint) == c2.constraint:
                return cand
    return None


# ---------------------------------------------------------------------------
# conjunction embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    injection: tuple[int, ...]
    substitution: Substitution
    consistent: tuple[int, ...]  # positions of g1 whose matchers merged


def _injections(g1: Sequence[Atom], g2: Sequence[Atom]) -> Iterator[tuple[tuple[int, ...], list[dict[Var, Term]]]]:
    def go(i: int, used: set[int], picks: list[int], binds: list[dict[Var, Term]]) -> Iterator:
        if i == len(g1):
            yield tuple(picks), list(binds)
            return
        for j in range(len(g2)):
            if j in used:
                continue
            b = match_atom(g1[i], g2[j])
            if b is not None:
                yield from go(i + 1, used | {j}, picks + [j], binds + [b])

    yield from go(0, set(), [], [])


def embeds(g1: Sequence[Atom], g2: Sequence[Atom]) -> bool:
    """The conjunction-embedding filter: some reordered subconjunction of g2
    instantiates g1 atom-by-atom (independent per-atom substitutions)."""
    return next(_injections(g1, g2), None) is not None


def embedded(g1: Sequence[Atom], g2: Sequence[Atom]) -> Embedding | None:
    """Best full embedding of g1 into g2: maximizes the set of atoms whose
    per-atom matchers merge into one consistent substitution."""
    best: Embedding | None = None
    for picks, binds in _injections(g1, g2):
        merged: dict[Var, Term] = {}
        consistent: list[int] = []
        for i, b in enumerate(binds):
            ok = all(merged.get(v, t) == t for v, t in b.items())
            if ok:
                merged.update(b)
                consistent.append(i)
        cand = Embedding(picks, Substitution(merged), tuple(consistent))
        if best is None or len(cand.consistent) > len(best.consistent):
            best = cand
        if best is not None and len(best.consistent) == len(g1):
            break
    return best


@dataclass(frozen=True)
class PartialMatch:
    """A consistent partial instance-match of a definition body into a block."""

    theta: Substitution
    pairs: tuple[tuple[int, int], ...]  # (definition index, block index)

    @property
    def matched_block(self) -> tuple[int, ...]:
        return tuple(j for _, j in self.pairs)

    def unmatched_def(self, n: int) -> tuple[int, ...]:
        done = {i for i, _ in self.pairs}
        return tuple(i for i in range(n) if i not in done)


def consistent_partial_matches(
    def_body: Sequence[Atom], block: Sequence[Atom], cap: int = 512
) -> list[PartialMatch]:
    """All maximal consistent partial matches (one substitution over the
    definition variables), largest first, deterministic tie-break."""
    results: list[tuple[dict[Var, Term], tuple[tuple[int, int], ...]]] = []

    def go(i: int, used: set[int], binding: dict[Var, Term], pairs: list[tuple[int, int]]) -> None:
        if len(results) >= cap:
            return
        if i == len(def_body):
            results.append((dict(binding), tuple(pairs)))
            return
        for j in range(len(block)):
            if j in used:
                continue
            b = match_atom(def_body[i], block[j], binding)
            if b is not None:
                go(i + 1, used | {j}, b, pairs + [(i, j)])
        go(i + 1, used, binding, pairs)  # leave atom i unmatched

    go(0, set(), {}, [])
    seen: set[tuple[tuple[int, int], ...]] = set()
    out: list[PartialMatch] = []
    for binding, pairs in sorted(results, key=lambda r: (-len(r[1]), r[1])):
        if pairs in seen:
            continue
        seen.add(pairs)
        out.append(PartialMatch(Substitution(binding), pairs))
    return out


# ---------------------------------------------------------------------------
# moded conjunction views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModedConj:
    """A total-functional view F(X;Y) of a conjunction of moded atoms."""

    order: tuple[int, ...]
    inputs: tuple[Var, ...]
    outputs: tuple[Var, ...]


def atom_io(atom: Atom, modes: Mapping[str, ModeSignature]) -> tuple[list[Var], list[Var]]:
    sig = modes[atom.pred]
    ins = vars_of(*(atom.args[i] for i in sig.inputs)) if sig.inputs else []
    outs = vars_of(*(atom.args[i] for i in sig.outputs)) if sig.outputs else []
    return ins, outs


def moded_partition(atoms: Sequence[Atom], modes: Mapping[str, ModeSignature]) -> ModedConj:
    """Compute the conjunction-level input/output split, reordering atoms when
    needed so every output tuple is fresh at its position."""
    ios = [atom_io(a, modes) for a in atoms]
    out_union: dict[Var, None] = {}
    for _, outs in ios:
        for v in outs:
            if v in out_union:
                raise NoValidOrderingError(f"variable {v} is an output of two atoms")
            out_union[v] = None
    n = len(atoms)

    # each output tuple must be fresh w.r.t. all earlier inputs and outputs
    def search3(order: list[int], remaining: list[int], seen_in: set[Var], seen_out: set[Var]) -> list[int] | None:
        if not remaining:
            return order
        for idx in remaining:
            ins, outs = ios[idx]
            if set(outs) & (seen_in | set(ins) | seen_out):
                continue
            r = search3(order + [idx], [k for k in remaining if k != idx], seen_in | set(ins), seen_out | set(outs))
            if r is not None:
                return r
        return None

    order = search3([], list(range(n)), set(), set())
    if order is None:
        raise NoValidOrderingError("no atom ordering satisfies the output-freshness condition")
    x: dict[Var, None] = {}
    y: dict[Var, None] = {}
    for idx in order:
        ins, outs = ios[idx]
        for v in outs:
            y.setdefault(v)
    for idx in order:
        ins, _ = ios[idx]
        for v in ins:
            if v not in y:
                x.setdefault(v)
    return ModedConj(tuple(order), tuple(x), tuple(y))


# ---------------------------------------------------------------------------
# levels
# ---------------------------------------------------------------------------


def compute_levels(program: Program) -> dict[str, int]:
    """Topological rank of the strongly-connected condensation of the
    predicate dependency graph; mutually recursive predicates share a level."""
    preds = list(program.predicates)
    deps: dict[str, set[str]] = {p: set() for p in preds}
    for c in program.clauses:
        if c.head is None:
            continue
        for a in c.body:
            deps.setdefault(c.head.pred, set()).add(a.pred)
    for p in list(deps):
        deps.setdefault(p, set())
        for q in list(deps[p]):
            deps.setdefault(q, set())

    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: dict[str, int] = {}
    counter = itertools.count()
    scc_count = itertools.count()

    def strongconnect(v: str) -> None:
        index[v] = low[v] = next(counter)
        stack.append(v)
        on_stack.add(v)
        for w in sorted(deps[v]):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            sid = next(scc_count)
            while True:
                w = stack.pop()
                on_stack.discard(w)
                sccs[w] = sid
                if w == v:
                    break

    for p in sorted(deps):
        if p not in index:
            strongconnect(p)

    heights: dict[int, int] = {}

    def height(sid: int, members: dict[int, list[str]]) -> int:
        if sid in heights:
            return heights[sid]
        h = 0
        for p in members[sid]:
            for q in deps[p]:
                if sccs[q] != sid:
                    h = max(h, 1 + height(sccs[q], members))
        heights[sid] = h
        return h

    members: dict[int, list[str]] = {}
    for p, sid in sccs.items():
        members.setdefault(sid, []).append(p)
    return {p: height(sccs[p], members) for p in sorted(sccs)}


def is_stratified(program: Program) -> bool:
    for c in program.clauses:
        hl = program.level(None if c.head is None else c.head.pred)
        for a in c.body:
            if hl < program.levels.get(a.pred, 0):
                return False
    return True

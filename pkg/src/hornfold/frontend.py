"""Surface syntax for CHC problems.

Two input formats are supported: a Prolog-like syntax with ``:-`` clauses,
list sugar and ``:- mode``/``:- data`` directives, and an SMT-LIB 2.6 subset
(declare-datatypes, declare-fun to Bool, universally quantified Horn asserts).
Programs print back to SMT-LIB deterministically.

Atom arguments of basic type are flattened to variables here (a constant or
arithmetic argument becomes a fresh variable plus a body equation), so the
engine only ever unifies variables and constructor terms at atom positions.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

from . import constraints
from .constraints import TRUE, Constraint, bool_eq, bool_lit, lin_atom
from .core import (
    BOOL,
    INT,
    ArithOp,
    Atom,
    BoolConst,
    Clause,
    Ctor,
    CtorDecl,
    HornfoldError,
    IntConst,
    ModeSignature,
    Program,
    Substitution,
    Term,
    Type,
    Var,
    compute_levels,
    term_type,
    vars_of,
)


class ParseError(HornfoldError):
    def __init__(self, message: str, line: int, col: int, expected: str | None = None) -> None:
        detail = f"line {line}, column {col}: {message}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.line = line
        self.col = col


class TypeInferenceError(HornfoldError):
    pass


class MissingModeError(HornfoldError):
    pass


class UnsupportedFeatureError(HornfoldError):
    pass


class NonHornAssertionError(HornfoldError):
    pass


class ModeConflictWarning(UserWarning):
    pass


LIST_DECL = (CtorDecl("nil", ()), CtorDecl("cons", (INT, Type("list"))))


@dataclass
class SourceProblem:
    program: Program
    path: str | None = None
    expect: str | None = None


# ---------------------------------------------------------------------------
# Prolog-like tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<neck>:-)
  | (?P<relop>\\=|=<|>=|=|<|>)
  | (?P<punct>[()\[\],.|+\-*])
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        val = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, val, line, col))
        nl = val.count("\n")
        if nl:
            line += nl
            col = len(val) - val.rfind("\n")
        else:
            col += len(val)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


# untyped term AST nodes: ("var", name) ("int", k) ("bool", b)
# ("ctor", name, args) ("arith", op, args)
_U = tuple


class _PrologParser:
    def __init__(self, text: str) -> None:
        self.toks = _tokenize(text)
        self.i = 0
        self.datatypes: dict[str, tuple[CtorDecl, ...]] = {}
        self.mode_dirs: dict[str, ModeSignature] = {}
        self.raw_clauses: list[tuple[_U | None, list[_U]]] = []
        self.uses_list_sugar = False

    # --- token helpers ---
    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            raise ParseError(f"found {t.text!r}", t.line, t.col, expected=text or kind)
        return self.next()

    def at_punct(self, ch: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == ch

    # --- grammar ---
    def parse(self) -> None:
        while self.peek().kind != "eof":
            if self.peek().kind == "neck":
                self.next()
                self.directive()
            else:
                self.clause()

    def directive(self) -> None:
        t = self.expect("name")
        if t.text == "mode":
            self.mode_directive()
        elif t.text == "data":
            self.data_directive()
        else:
            raise ParseError(f"unknown directive {t.text!r}", t.line, t.col)
        self.expect("punct", ".")

    def mode_directive(self) -> None:
        name = self.expect("name").text
        self.expect("punct", "(")
        ins: list[int] = []
        outs: list[int] = []
        idx = 0
        while True:
            t = self.next()
            if t.text == "+":
                ins.append(idx)
            elif t.text == "-":
                outs.append(idx)
            else:
                raise ParseError(f"found {t.text!r}", t.line, t.col, expected="+ or -")
            idx += 1
            if self.at_punct(")"):
                self.next()
                break
            self.expect("punct", ",")
        self.mode_dirs[name] = ModeSignature(name, tuple(ins), tuple(outs))

    def data_directive(self) -> None:
        adt = self.expect("name").text
        self.expect("punct", "(")
        ctors: list[CtorDecl] = []
        while True:
            cname = self.expect("name").text
            args: list[Type] = []
            if self.at_punct("("):
                self.next()
                while True:
                    tname = self.expect("name").text
                    args.append(INT if tname == "int" else BOOL if tname == "bool" else Type(tname))
                    if self.at_punct(")"):
                        self.next()
                        break
                    self.expect("punct", ",")
            ctors.append(CtorDecl(cname, tuple(args)))
            if self.at_punct(")"):
                self.next()
                break
            self.expect("punct", ",")
        self.datatypes[adt] = tuple(ctors)

    def clause(self) -> None:
        t = self.peek()
        head: _U | None
        if t.kind == "name" and t.text == "false":
            self.next()
            head = None
        else:
            head = self.primary()
            if head[0] != "atom":
                raise ParseError("clause head must be an atom or false", t.line, t.col)
        items: list[_U] = []
        if self.peek().kind == "neck":
            self.next()
            while True:
                items.append(self.body_item())
                if self.at_punct(","):
                    self.next()
                    continue
                break
        self.expect("punct", ".")
        self.raw_clauses.append((head, items))

    def body_item(self) -> _U:
        start = self.peek()
        lhs = self.expr()
        t = self.peek()
        if t.kind == "relop":
            op = self.next().text
            rhs = self.expr()
            return ("cmp", op, lhs, rhs)
        if lhs[0] == "atom":
            return lhs
        if lhs[0] == "bool" and lhs[1] is True:
            return ("true",)
        raise ParseError("expected an atom or a constraint", start.line, start.col)

    def expr(self) -> _U:
        node = self.term_mul()
        while self.peek().text in ("+", "-") and self.peek().kind == "punct":
            op = self.next().text
            rhs = self.term_mul()
            node = ("arith", op, [node, rhs])
        return node

    def term_mul(self) -> _U:
        node = self.primary()
        while self.at_punct("*"):
            self.next()
            rhs = self.primary()
            node = ("arith", "*", [node, rhs])
        return node

    def primary(self) -> _U:
        t = self.peek()
        if t.kind == "punct" and t.text == "-":
            self.next()
            inner = self.primary()
            if inner[0] == "int":
                return ("int", -inner[1])
            return ("arith", "-", [("int", 0), inner])
        if t.kind == "int":
            self.next()
            return ("int", int(t.text))
        if t.kind == "var":
            self.next()
            return ("var", t.text)
        if t.kind == "punct" and t.text == "(":
            self.next()
            node = self.expr()
            self.expect("punct", ")")
            return node
        if t.kind == "punct" and t.text == "[":
            return self.list_sugar()
        if t.kind == "name":
            self.next()
            if t.text == "true":
                return ("bool", True)
            if t.text == "false":
                return ("bool", False)
            args: list[_U] = []
            if self.at_punct("("):
                self.next()
                while True:
                    args.append(self.expr())
                    if self.at_punct(")"):
                        self.next()
                        break
                    self.expect("punct", ",")
            return ("atom", t.text, args)
        raise ParseError(f"found {t.text!r}", t.line, t.col, expected="a term")

    def list_sugar(self) -> _U:
        self.uses_list_sugar = True
        self.expect("punct", "[")
        if self.at_punct("]"):
            self.next()
            return ("ctor", "nil", [])
        elems: list[_U] = [self.expr()]
        tail: _U = ("ctor", "nil", [])
        while self.at_punct(","):
            self.next()
            elems.append(self.expr())
        if self.at_punct("|"):
            self.next()
            tail = self.expr()
        self.expect("punct", "]")
        node = tail
        for e in reversed(elems):
            node = ("ctor", "cons", [e, node])
        return node


# ---------------------------------------------------------------------------
# type inference (union-find over type slots)
# ---------------------------------------------------------------------------


class _TypeEnv:
    def __init__(self) -> None:
        self.parent: dict[object, object] = {}
        self.concrete: dict[object, Type] = {}

    def find(self, x: object) -> object:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: object, b: object, where: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        ta, tb = self.concrete.get(ra), self.concrete.get(rb)
        if ta is not None and tb is not None and ta != tb:
            raise TypeInferenceError(f"type mismatch {ta} vs {tb} in {where}")
        self.parent[ra] = rb
        if ta is not None:
            self.concrete[rb] = ta

    def fix(self, x: object, t: Type, where: str) -> None:
        r = self.find(x)
        cur = self.concrete.get(r)
        if cur is not None and cur != t:
            raise TypeInferenceError(f"type mismatch {cur} vs {t} in {where}")
        self.concrete[r] = t

    def resolve(self, x: object) -> Type:
        return self.concrete.get(self.find(x), INT)


def _ctor_index(datatypes: dict[str, tuple[CtorDecl, ...]]) -> dict[str, tuple[str, CtorDecl]]:
    idx: dict[str, tuple[str, CtorDecl]] = {}
    for adt, ctors in datatypes.items():
        for c in ctors:
            if c.name in idx:
                raise TypeInferenceError(f"constructor {c.name} declared twice")
            idx[c.name] = (adt, c)
    return idx


class _ProblemBuilder:
    """Shared backend turning raw clauses into a typed, flattened Program."""

    def __init__(
        self,
        datatypes: dict[str, tuple[CtorDecl, ...]],
        mode_dirs: dict[str, ModeSignature],
    ) -> None:
        self.datatypes = dict(datatypes)
        self.mode_dirs = dict(mode_dirs)
        self.ctors = _ctor_index(self.datatypes)
        self.env = _TypeEnv()
        self.arities: dict[str, int] = {}
        self.fresh = 0

    # --- inference ---
    def infer(self, raw_clauses: list[tuple[_U | None, list[_U]]]) -> None:
        for ci, (head, items) in enumerate(raw_clauses):
            where = f"clause {ci + 1}"
            if head is not None:
                self.infer_atom(ci, head, where)
            for it in items:
                if it[0] == "atom":
                    self.infer_atom(ci, it, where)
                elif it[0] == "cmp":
                    self.infer_cmp(ci, it, where)

    def infer_atom(self, ci: int, atom: _U, where: str) -> None:
        _, name, args = atom
        if self.arities.setdefault(name, len(args)) != len(args):
            raise TypeInferenceError(f"predicate {name} used with different arities in {where}")
        for i, a in enumerate(args):
            self.infer_term(ci, a, ("pred", name, i), where)

    def infer_cmp(self, ci: int, cmp_item: _U, where: str) -> None:
        _, op, lhs, rhs = cmp_item
        if op in ("<", "=<", ">", ">="):
            self.infer_term(ci, lhs, ("t", INT), where)
            self.infer_term(ci, rhs, ("t", INT), where)
        else:
            node = ("eq", ci, id(cmp_item))
            self.infer_term(ci, lhs, node, where)
            self.infer_term(ci, rhs, node, where)

    def infer_term(self, ci: int, u: _U, slot: object, where: str) -> None:
        if isinstance(slot, tuple) and slot and slot[0] == "t":
            anchor: object = ("anchor", id(u))
            self.env.fix(anchor, slot[1], where)
            slot = anchor
        kind = u[0]
        if kind == "var":
            self.env.union(("var", ci, u[1]), slot, where)
        elif kind == "int":
            self.env.fix(slot, INT, where)
        elif kind == "bool":
            self.env.fix(slot, BOOL, where)
        elif kind == "arith":
            self.env.fix(slot, INT, where)
            for a in u[2]:
                self.infer_term(ci, a, ("t", INT), where)
        elif kind == "ctor":
            if u[1] not in self.ctors:
                raise TypeInferenceError(f"unknown constructor {u[1]} in {where}")
            adt, decl = self.ctors[u[1]]
            if len(u[2]) != len(decl.arg_types):
                raise TypeInferenceError(f"constructor {u[1]} arity mismatch in {where}")
            self.env.fix(slot, Type(adt), where)
            for a, t in zip(u[2], decl.arg_types):
                self.infer_term(ci, a, ("t", t), where)
        elif kind == "atom":
            # a name in term position must be a nullary constructor
            if u[2]:
                raise TypeInferenceError(f"function symbol {u[1]} not declared in {where}")
            self.infer_term(ci, ("ctor", u[1], []), slot, where)
        else:
            raise TypeInferenceError(f"unexpected term in {where}")

    # --- typed construction ---
    def build_term(self, ci: int, u: _U) -> Term:
        kind = u[0]
        if kind == "var":
            return Var(u[1], self.env.resolve(("var", ci, u[1])))
        if kind == "int":
            return IntConst(u[1])
        if kind == "bool":
            return BoolConst(u[1])
        if kind == "arith":
            return ArithOp(u[1], tuple(self.build_term(ci, a) for a in u[2]))
        if kind == "ctor" or kind == "atom":
            name = u[1]
            adt, decl = self.ctors[name]
            return Ctor(name, tuple(self.build_term(ci, a) for a in u[2]), adt)
        raise TypeInferenceError("unexpected term")

    def fresh_var(self, t: Type, taken: set[str]) -> Var:
        while True:
            self.fresh += 1
            name = f"F{self.fresh}"
            if name not in taken:
                taken.add(name)
                return Var(name, t)

    def linearize(self, t: Term, where: str) -> tuple[dict[str, int], int]:
        """Typed arithmetic term -> (coefficients, constant)."""
        if isinstance(t, IntConst):
            return {}, t.value
        if isinstance(t, Var):
            if t.type != INT:
                raise TypeInferenceError(f"non-integer variable {t.name} in arithmetic, {where}")
            return {t.name: 1}, 0
        if isinstance(t, Ctor) or isinstance(t, BoolConst):
            raise TypeInferenceError(f"non-arithmetic term in constraint, {where}")
        op = t.op
        if op == "*":
            sides = [self.linearize(a, where) for a in t.args]
            consts = [s for s in sides if not s[0]]
            if len(consts) < len(sides) - 1:
                raise TypeInferenceError(f"non-linear multiplication in {where}")
            k = 1
            varside: tuple[dict[str, int], int] = ({}, 1)
            for s in sides:
                if s[0]:
                    varside = s
                else:
                    k *= s[1]
            return {v: k * c for v, c in varside[0].items()}, k * varside[1]
        coeffs: dict[str, int] = {}
        const = 0
        for i, a in enumerate(t.args):
            cs, c = self.linearize(a, where)
            sign = -1 if (op == "-" and i > 0) else 1
            for v, k in cs.items():
                coeffs[v] = coeffs.get(v, 0) + sign * k
            const += sign * c
        return coeffs, const

    def cmp_to_atomics(self, ci: int, item: _U, where: str):
        _, op, lraw, rraw = item
        lhs = self.build_term(ci, lraw)
        rhs = self.build_term(ci, rraw)
        lt, rt = term_type(lhs), term_type(rhs)
        if op in ("=", "\\=") and (lt == BOOL or rt == BOOL):
            positive = op == "="
            if lt != BOOL or rt != BOOL:
                raise TypeInferenceError(f"boolean compared with non-boolean in {where}")
            if isinstance(lhs, BoolConst) and isinstance(rhs, BoolConst):
                return [(lhs.value == rhs.value) == positive]
            if isinstance(lhs, BoolConst):
                lhs, rhs = rhs, lhs
            if isinstance(rhs, BoolConst):
                assert isinstance(lhs, Var)
                return [bool_lit(lhs.name, rhs.value == positive)]
            assert isinstance(lhs, Var) and isinstance(rhs, Var)
            return [bool_eq(lhs.name, rhs.name, positive)]
        if lt.is_adt or rt.is_adt:
            raise UnsupportedFeatureError(
                f"equality over algebraic data type values is not a constraint ({where})"
            )
        lc, lk = self.linearize(lhs, where)
        rc, rk = self.linearize(rhs, where)
        diff = dict(lc)
        for v, k in rc.items():
            diff[v] = diff.get(v, 0) - k
        const = rk - lk
        if op == "=":
            return [lin_atom(diff, "=", const)]
        if op == "\\=":
            return [lin_atom(diff, "!=", const)]
        if op == "=<":
            return [lin_atom(diff, "<=", const)]
        if op == "<":
            return [lin_atom(diff, "<=", const - 1)]
        if op == ">=":
            return [lin_atom({v: -k for v, k in diff.items()}, "<=", -const)]
        return [lin_atom({v: -k for v, k in diff.items()}, "<=", -const - 1)]

    def build(self, raw_clauses: list[tuple[_U | None, list[_U]]]) -> Program:
        self.infer(raw_clauses)
        clauses: list[Clause] = []
        sigs: dict[str, tuple[Type, ...]] = {}
        for name, arity in sorted(self.arities.items()):
            sigs[name] = tuple(self.env.resolve(("pred", name, i)) for i in range(arity))
        for ci, (rawhead, items) in enumerate(raw_clauses):
            where = f"clause {ci + 1}"
            atomics = []
            atoms: list[Atom] = []
            for it in items:
                if it[0] == "atom":
                    atoms.append(
                        Atom(it[1], tuple(self.build_term(ci, a) for a in it[2]))
                    )
                elif it[0] == "cmp":
                    atomics.extend(self.cmp_to_atomics(ci, it, where))
            head = None
            if rawhead is not None:
                head = Atom(rawhead[1], tuple(self.build_term(ci, a) for a in rawhead[2]))
            taken = {v.name for a in atoms + ([head] if head else []) for v in vars_of(a)}
            head, atoms, extra = self.flatten(head, atoms, taken)
            atomics.extend(extra)
            constraint = constraints.conj(atomics)
            clauses.append(Clause(head, constraint, tuple(atoms), cid=ci + 1))
        modes = derive_modes(sigs, self.mode_dirs, clauses)
        program = Program(
            datatypes=dict(sorted(self.datatypes.items())),
            predicates=sigs,
            modes=modes,
            clauses=tuple(clauses),
        )
        program.levels = compute_levels(program)
        _typecheck(program)
        return program

    def flatten(self, head: Atom | None, atoms: list[Atom], taken: set[str]):
        """Replace non-variable basic-typed atom arguments by fresh variables."""
        extra = []

        def flat(a: Atom) -> Atom:
            new_args: list[Term] = []
            for t in a.args:
                ty = term_type(t)
                if ty.is_basic and not isinstance(t, Var):
                    v = self.fresh_var(ty, taken)
                    if ty == INT:
                        cs, k = self.linearize(t, "argument flattening")
                        cs[v.name] = cs.get(v.name, 0) - 1
                        extra.append(lin_atom(cs, "=", -k))
                    else:
                        assert isinstance(t, BoolConst)
                        extra.append(bool_lit(v.name, t.value))
                    new_args.append(v)
                else:
                    new_args.append(t)
            return Atom(a.pred, tuple(new_args))

        new_head = flat(head) if head is not None else None
        return new_head, [flat(a) for a in atoms], extra


def _typecheck(program: Program) -> None:
    for c in program.clauses:
        for a in ([c.head] if c.head else []) + list(c.body):
            sig = program.predicates.get(a.pred)
            if sig is None or len(sig) != len(a.args):
                raise TypeInferenceError(f"predicate {a.pred} undeclared or wrong arity")
            for t, ty in zip(a.args, sig):
                if term_type(t) != ty:
                    raise TypeInferenceError(
                        f"argument {t!r} of {a.pred} has type {term_type(t)}, expected {ty}"
                    )


def derive_modes(
    sigs: dict[str, tuple[Type, ...]],
    directives: dict[str, ModeSignature],
    clauses: list[Clause],
) -> dict[str, ModeSignature]:
    """Explicit ``:- mode`` directives win; otherwise the functional-translation
    convention applies: the last argument is the output, the rest are inputs."""
    modes: dict[str, ModeSignature] = {}
    for pred, sig in sigs.items():
        if pred in directives:
            d = directives[pred]
            if len(d.inputs) + len(d.outputs) != len(sig):
                raise TypeInferenceError(f"mode for {pred} has wrong arity")
            modes[pred] = d
        elif len(sig) == 0:
            modes[pred] = ModeSignature(pred, (), ())
        else:
            modes[pred] = ModeSignature(pred, tuple(range(len(sig) - 1)), (len(sig) - 1,))
    for c in clauses:
        for a in c.body:
            m = modes.get(a.pred)
            if m is None:
                continue
            for i in m.outputs:
                if not isinstance(a.args[i], Var) and a.pred in directives:
                    warnings.warn(
                        f"output position {i} of {a.pred} holds a non-variable; "
                        "keeping the declared mode",
                        ModeConflictWarning,
                        stacklevel=2,
                    )
    return modes


_EXPECT_RE = re.compile(r"^\s*[%;]+\s*expect:\s*(\S+)", re.MULTILINE)


def parse_prolog(text: str, path: str | None = None) -> SourceProblem:
    parser = _PrologParser(text)
    parser.parse()
    datatypes = dict(parser.datatypes)
    if parser.uses_list_sugar and "list" not in datatypes:
        datatypes["list"] = LIST_DECL
    builder = _ProblemBuilder(datatypes, parser.mode_dirs)
    program = builder.build(parser.raw_clauses)
    m = _EXPECT_RE.search(text)
    return SourceProblem(program, path, m.group(1) if m else None)


# ---------------------------------------------------------------------------
# SMT-LIB subset
# ---------------------------------------------------------------------------


def _sexpr_tokens(text: str):
    line = 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield (ch, line)
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            yield (text[i + 1 : j], line)
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield (text[i:j], line)
            i = j


def _parse_sexprs(text: str) -> list:
    out: list = []
    stack: list[list] = [out]
    for tok, line in _sexpr_tokens(text):
        if tok == "(":
            new: list = []
            stack[-1].append(new)
            stack.append(new)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", line, 1)
            stack.pop()
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("unbalanced '('", 0, 0)
    return out


def _smt_type(name: object, datatypes: dict[str, tuple[CtorDecl, ...]]) -> Type:
    if name == "Int":
        return INT
    if name == "Bool":
        return BOOL
    if isinstance(name, str) and name in datatypes:
        return Type(name)
    raise UnsupportedFeatureError(f"unsupported sort {name!r}")


def parse_smtlib(text: str, path: str | None = None) -> SourceProblem:
    sexprs = _parse_sexprs(text)
    datatypes: dict[str, tuple[CtorDecl, ...]] = {}
    sigs: dict[str, tuple[Type, ...]] = {}
    raw: list[tuple[_U | None, list[_U]]] = []

    for form in sexprs:
        if not isinstance(form, list) or not form:
            raise UnsupportedFeatureError(f"stray token {form!r}")
        cmd = form[0]
        if cmd in ("set-logic", "set-info", "set-option", "check-sat", "exit", "get-model"):
            continue
        if cmd == "declare-datatypes":
            _parse_datatypes(form, datatypes)
        elif cmd in ("declare-fun", "declare-pred"):
            name, arg_sorts, ret = form[1], form[2], form[3]
            if ret != "Bool":
                raise UnsupportedFeatureError(f"declare-fun {name} must return Bool")
            sigs[str(name)] = tuple(_smt_type(s, datatypes) for s in arg_sorts)
        elif cmd == "declare-const":
            raise UnsupportedFeatureError("declare-const")
        elif cmd == "assert":
            raw.append(_parse_assert(form[1], sigs, datatypes))
        else:
            raise UnsupportedFeatureError(f"command {cmd}")

    builder = _ProblemBuilder(datatypes, {})
    for pred, sig in sigs.items():
        builder.arities[pred] = len(sig)
        for i, t in enumerate(sig):
            builder.env.fix(("pred", pred, i), t, f"declaration of {pred}")
    program = builder.build(raw)
    for pred, sig in sigs.items():
        program.predicates.setdefault(pred, sig)
        program.modes.setdefault(
            pred,
            ModeSignature(pred, tuple(range(len(sig) - 1)) if sig else (), (len(sig) - 1,) if sig else ()),
        )
    m = _EXPECT_RE.search(text)
    return SourceProblem(program, path, m.group(1) if m else None)


def _parse_datatypes(form: list, datatypes: dict[str, tuple[CtorDecl, ...]]) -> None:
    decls, defs = form[1], form[2]
    names: list[str] = []
    for d in decls:
        name, arity = d[0], d[1]
        if arity != "0":
            raise UnsupportedFeatureError("parameterized datatypes")
        names.append(str(name))
        datatypes.setdefault(name, ())
    for name, ctor_list in zip(names, defs):
        ctors: list[CtorDecl] = []
        for c in ctor_list:
            if isinstance(c, str):
                ctors.append(CtorDecl(c, ()))
                continue
            cname = str(c[0])
            args = []
            for sel in c[1:]:
                args.append(_smt_type(sel[1], datatypes))
            ctors.append(CtorDecl(cname, tuple(args)))
        datatypes[name] = tuple(ctors)


_SMT_CMP = {"=": "=", "<=": "=<", "<": "<", ">=": ">=", ">": ">"}


def _parse_assert(body, sigs, datatypes) -> tuple[_U | None, list[_U]]:
    binders: dict[str, Type] = {}
    negated = False
    while True:
        if isinstance(body, list) and body and body[0] == "forall":
            for b in body[1]:
                binders[str(b[0])] = _smt_type(b[1], datatypes)
            body = body[2]
        elif isinstance(body, list) and body and body[0] == "not" and isinstance(body[1], list) and body[1] and body[1][0] == "exists":
            negated = True
            ex = body[1]
            for b in ex[1]:
                binders[str(b[0])] = _smt_type(b[1], datatypes)
            body = ex[2]
        else:
            break

    def conv_term(e) -> _U:
        if isinstance(e, str):
            if re.fullmatch(r"-?\d+", e):
                return ("int", int(e))
            if e == "true":
                return ("bool", True)
            if e == "false":
                return ("bool", False)
            if e in binders:
                return ("var", e)
            return ("ctor", e, [])
        op = e[0]
        if op in ("+", "*"):
            node = conv_term(e[1])
            for a in e[2:]:
                node = ("arith", op, [node, conv_term(a)])
            return node
        if op == "-":
            if len(e) == 2:
                inner = conv_term(e[1])
                if inner[0] == "int":
                    return ("int", -inner[1])
                return ("arith", "-", [("int", 0), inner])
            node = conv_term(e[1])
            for a in e[2:]:
                node = ("arith", "-", [node, conv_term(a)])
            return node
        return ("ctor", str(op), [conv_term(a) for a in e[1:]])

    def conv_literal(e) -> _U:
        if isinstance(e, str):
            if e == "true":
                return ("true",)
            if e in binders and binders[e] == BOOL:
                return ("cmp", "=", conv_var(e), ("bool", True))
            if e in sigs:
                return ("atom", e, [])
            raise NonHornAssertionError(f"unsupported body literal {e!r}")
        op = e[0]
        if op == "not":
            inner = e[1]
            if isinstance(inner, str) and inner in binders and binders[inner] == BOOL:
                return ("cmp", "=", conv_var(inner), ("bool", False))
            if isinstance(inner, list) and inner and inner[0] == "=":
                return ("cmp", "\\=", conv_term(inner[1]), conv_term(inner[2]))
            raise NonHornAssertionError("negated atom in clause body")
        if op in _SMT_CMP:
            return ("cmp", _SMT_CMP[op], conv_term(e[1]), conv_term(e[2]))
        if op == "distinct":
            return ("cmp", "\\=", conv_term(e[1]), conv_term(e[2]))
        if isinstance(op, str) and op in sigs:
            return ("atom", op, [conv_term(a) for a in e[1:]])
        raise UnsupportedFeatureError(f"body construct {op!r}")

    def conv_var(name: str) -> _U:
        return ("var", name)

    if negated:
        items = body[1:] if isinstance(body, list) and body and body[0] == "and" else [body]
        return None, [conv_literal(x) for x in items]

    # implication shape
    if isinstance(body, list) and body and body[0] == "=>":
        prem, conc = body[1], body[2]
        items = prem[1:] if isinstance(prem, list) and prem and prem[0] == "and" else [prem]
        lits = [conv_literal(x) for x in items]
    else:
        conc = body
        lits = []
    if conc == "false":
        return None, lits
    if isinstance(conc, str) and conc in sigs:
        return ("atom", conc, []), lits
    if isinstance(conc, list) and conc and isinstance(conc[0], str) and conc[0] in sigs:
        head = ("atom", conc[0], [conv_term(a) for a in conc[1:]])
        return head, lits
    raise NonHornAssertionError(f"head {conc!r} is not an atom or false")


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _smt_sym(name: str) -> str:
    return name


def _emit_linear(atom: constraints.LinAtom) -> str:
    def prod(v: str, k: int) -> str:
        if k == 1:
            return v
        return f"(* {_emit_int(k)} {v})"

    terms = [prod(v, k) for v, k in atom.coeffs]
    lhs = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
    rhs = _emit_int(atom.const)
    if atom.op == "=":
        return f"(= {lhs} {rhs})"
    if atom.op == "!=":
        return f"(not (= {lhs} {rhs}))"
    return f"(<= {lhs} {rhs})"


def _emit_int(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _emit_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, IntConst):
        return _emit_int(t.value)
    if isinstance(t, BoolConst):
        return "true" if t.value else "false"
    if isinstance(t, Ctor):
        if not t.args:
            return t.name
        return "(" + t.name + " " + " ".join(_emit_term(a) for a in t.args) + ")"
    raise UnsupportedFeatureError("arithmetic atom arguments must be flattened before emission")


def _type_name(t: Type) -> str:
    return {"int": "Int", "bool": "Bool"}.get(t.name, t.name)


def emit_smtlib(program: Program) -> str:
    """Deterministic SMT-LIB text: sorted declarations, clauses in order,
    canonically renamed variables."""
    lines = ["(set-logic HORN)"]
    for adt in sorted(program.datatypes):
        ctors = program.datatypes[adt]
        parts = []
        for c in ctors:
            if not c.arg_types:
                parts.append(f"({c.name})")
            else:
                sels = " ".join(
                    f"({c.name}_{i} {_type_name(t)})" for i, t in enumerate(c.arg_types)
                )
                parts.append(f"({c.name} {sels})")
        lines.append(f"(declare-datatypes (({adt} 0)) (({' '.join(parts)})))")
    used = sorted({a.pred for c in program.clauses for a in list(c.body) + ([c.head] if c.head else [])})
    for pred in used:
        sig = program.predicates[pred]
        args = " ".join(_type_name(t) for t in sig)
        lines.append(f"(declare-fun {_smt_sym(pred)} ({args}) Bool)")
    for c in program.clauses:
        lines.append(_emit_clause(c))
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def _emit_clause(c: Clause) -> str:
    variables = c.variables()
    renaming = {v: Var(f"V{i}", v.type) for i, v in enumerate(variables)}
    s = Substitution(renaming)
    head = s.atom(c.head) if c.head is not None else None
    body_atoms = s.atoms(c.body)
    constraint = s.constraint(c.constraint)
    conj_parts: list[str] = []
    if constraint.is_false:
        conj_parts.append("false")
    else:
        for a in constraint.atoms:
            if isinstance(a, constraints.LinAtom):
                conj_parts.append(_emit_linear(a))
            else:
                if a.b is None:
                    conj_parts.append(a.a if a.positive else f"(not {a.a})")
                else:
                    eq = f"(= {a.a} {a.b})"
                    conj_parts.append(eq if a.positive else f"(not {eq})")
    for a in body_atoms:
        conj_parts.append(
            a.pred if not a.args else "(" + a.pred + " " + " ".join(_emit_term(t) for t in a.args) + ")"
        )
    head_txt = "false" if head is None else (
        head.pred if not head.args else "(" + head.pred + " " + " ".join(_emit_term(t) for t in head.args) + ")"
    )
    if not conj_parts:
        body_txt = None
    elif len(conj_parts) == 1:
        body_txt = conj_parts[0]
    else:
        body_txt = "(and " + " ".join(conj_parts) + ")"
    binder = " ".join(f"({renaming[v].name} {_type_name(v.type)})" for v in variables)
    inner = head_txt if body_txt is None else f"(=> {body_txt} {head_txt})"
    if not variables:
        return f"(assert {inner})"
    return f"(assert (forall ({binder}) {inner}))"


def all_basic_types(program: Program) -> bool:
    """Independent scanner: every atom argument in every clause has basic type."""
    for c in program.clauses:
        for a in list(c.body) + ([c.head] if c.head is not None else []):
            for t in a.args:
                if term_type(t).is_adt:
                    return False
    return True


def parse_auto(text: str, path: str | None = None, fmt: str = "auto") -> SourceProblem:
    if fmt == "prolog":
        return parse_prolog(text, path)
    if fmt == "smtlib":
        return parse_smtlib(text, path)
    stripped = text.lstrip()
    if path and path.endswith(".smt2"):
        return parse_smtlib(text, path)
    if path and path.endswith(".pl"):
        return parse_prolog(text, path)
    if stripped.startswith("("):
        return parse_smtlib(text, path)
    return parse_prolog(text, path)

"""Conjunctions of linear integer / boolean atomic constraints.

Everything here is pure and value-based: a constraint is either the
distinguished unsatisfiable constraint ``FALSE`` or a normalized tuple of
atomic constraints.  Linear atoms are kept integer-canonical (gcd-reduced,
strict inequalities rewritten to non-strict over the integers), boolean atoms
are literals and (dis)equations between boolean variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, gcd
from typing import Iterable, Mapping, Union

DEFAULT_SPLIT_BUDGET = 10_000

OP_EQ = "="
OP_NE = "!="
OP_LE = "<="


class ResourceLimitError(Exception):
    """Raised when the case-split budget of the decision procedure runs out."""


@dataclass(frozen=True)
class LinAtom:
    """Sum(coeff * var) op const, over integer variables."""

    coeffs: tuple[tuple[str, int], ...]
    op: str
    const: int

    def vars(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def __repr__(self) -> str:
        if not self.coeffs:
            return f"0{self.op}{self.const}"
        parts = []
        for v, a in self.coeffs:
            if a == 1:
                parts.append(f"+{v}")
            elif a == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{a:+d}*{v}")
        return "".join(parts).lstrip("+") + f"{self.op}{self.const}"


@dataclass(frozen=True)
class BoolAtom:
    """A boolean literal (b is None) or (in)equation between two bool vars."""

    a: str
    b: str | None
    positive: bool

    def vars(self) -> tuple[str, ...]:
        return (self.a,) if self.b is None else (self.a, self.b)

    def __repr__(self) -> str:
        if self.b is None:
            return self.a if self.positive else f"~{self.a}"
        return f"{self.a}{'=' if self.positive else '!='}{self.b}"


Atomic = Union[LinAtom, BoolAtom]


def lin_atom(coeffs: Mapping[str, int], op: str, const: int) -> LinAtom | bool:
    """Build a canonical linear atom; returns True/False when trivial.

    Over the integers a strict bound has no extra expressive power, so
    callers should pre-translate ``<`` into ``<=`` with an adjusted constant.
    """
    items = sorted((v, a) for v, a in coeffs.items() if a != 0)
    if not items:
        if op == OP_EQ:
            return const == 0
        if op == OP_NE:
            return const != 0
        return 0 <= const
    g = 0
    for _, a in items:
        g = gcd(g, abs(a))
    if op == OP_LE:
        if g > 1:
            items = [(v, a // g) for v, a in items]
            const = floor(Fraction(const, g))
    else:
        if g > 1:
            if const % g != 0:
                # no integer solution can hit the constant
                return False if op == OP_EQ else True
            items = [(v, a // g) for v, a in items]
            const = const // g
        if items[0][1] < 0:
            items = [(v, -a) for v, a in items]
            const = -const
    return LinAtom(tuple(items), op, const)


def bool_lit(name: str, positive: bool = True) -> BoolAtom:
    return BoolAtom(name, None, positive)


def bool_eq(a: str, b: str, positive: bool = True) -> BoolAtom | bool:
    if a == b:
        return positive
    if b < a:
        a, b = b, a
    return BoolAtom(a, b, positive)


def negate_atom(atom: Atomic) -> list[Atomic]:
    """Negation of an atomic as a disjunction (list) of atomics."""
    if isinstance(atom, BoolAtom):
        return [BoolAtom(atom.a, atom.b, not atom.positive)]
    coeffs = dict(atom.coeffs)
    neg = {v: -a for v, a in coeffs.items()}
    if atom.op == OP_LE:
        a = lin_atom(neg, OP_LE, -atom.const - 1)
        return [a] if isinstance(a, LinAtom) else []
    if atom.op == OP_EQ:
        a = lin_atom(coeffs, OP_NE, atom.const)
        return [a] if isinstance(a, LinAtom) else []
    a = lin_atom(coeffs, OP_EQ, atom.const)
    return [a] if isinstance(a, LinAtom) else []


@dataclass(frozen=True)
class Constraint:
    """A conjunction of atomics; ``atoms is None`` encodes false."""

    atoms: tuple[Atomic, ...] | None

    @property
    def is_false(self) -> bool:
        return self.atoms is None

    @property
    def is_true(self) -> bool:
        return self.atoms == ()

    def and_(self, other: "Constraint") -> "Constraint":
        if self.is_false or other.is_false:
            return FALSE
        return conj([*self.atoms, *other.atoms])

    def int_vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.atoms or ():
            if isinstance(a, LinAtom):
                for v in a.vars():
                    seen.setdefault(v)
        return tuple(seen)

    def bool_vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.atoms or ():
            if isinstance(a, BoolAtom):
                for v in a.vars():
                    seen.setdefault(v)
        return tuple(seen)

    def variables(self) -> tuple[str, ...]:
        return self.int_vars() + self.bool_vars()

    def __repr__(self) -> str:
        if self.is_false:
            return "false"
        if self.is_true:
            return "true"
        return ", ".join(map(repr, self.atoms))


TRUE = Constraint(())
FALSE = Constraint(None)


def conj(atoms: Iterable[Atomic | bool]) -> Constraint:
    """Normalized conjunction: dedupe, drop trivial, spot direct clashes."""
    out: list[Atomic] = []
    seen: set[Atomic] = set()
    for a in atoms:
        if a is True:
            continue
        if a is False:
            return FALSE
        if a in seen:
            continue
        seen.add(a)
        out.append(a)
    lin_eq: dict[tuple, int] = {}
    for a in out:
        if isinstance(a, BoolAtom):
            if BoolAtom(a.a, a.b, not a.positive) in seen:
                return FALSE
        elif a.op == OP_EQ:
            if lin_eq.setdefault(a.coeffs, a.const) != a.const:
                return FALSE
    for a in out:
        if isinstance(a, LinAtom) and a.op == OP_NE:
            if a.coeffs in lin_eq and lin_eq[a.coeffs] == a.const:
                return FALSE
    return Constraint(tuple(out))


def single(atom: Atomic | bool) -> Constraint:
    return conj([atom])


IntImage = Union[str, int]
BoolImage = Union[str, bool]


def substitute(
    c: Constraint,
    int_map: Mapping[str, IntImage] | None = None,
    bool_map: Mapping[str, BoolImage] | None = None,
) -> Constraint:
    """Rename variables / plug in constants throughout the conjunction."""
    if c.is_false:
        return FALSE
    int_map = int_map or {}
    bool_map = bool_map or {}
    out: list[Atomic | bool] = []
    for a in c.atoms:
        if isinstance(a, LinAtom):
            coeffs: dict[str, int] = {}
            const = a.const
            for v, k in a.coeffs:
                img = int_map.get(v, v)
                if isinstance(img, int):
                    const -= k * img
                else:
                    coeffs[img] = coeffs.get(img, 0) + k
            out.append(lin_atom(coeffs, a.op, const))
        else:
            ia = bool_map.get(a.a, a.a)
            ib = bool_map.get(a.b, a.b) if a.b is not None else None
            if ib is None:
                if isinstance(ia, bool):
                    out.append(ia == a.positive)
                else:
                    out.append(bool_lit(ia, a.positive))
            else:
                if isinstance(ia, bool) and isinstance(ib, bool):
                    out.append((ia == ib) == a.positive)
                elif isinstance(ia, bool):
                    out.append(bool_lit(ib, ia == a.positive))
                elif isinstance(ib, bool):
                    out.append(bool_lit(ia, ib == a.positive))
                else:
                    out.append(bool_eq(ia, ib, a.positive))
    return conj(out)


# ---------------------------------------------------------------------------
# satisfiability
# ---------------------------------------------------------------------------


def _bool_sat(atoms: list[BoolAtom]) -> bool:
    """Union-find with parity; a conjunction of bool atomics is tractable."""
    parent: dict[str, tuple[str, bool]] = {}

    def find(v: str) -> tuple[str, bool]:
        parent.setdefault(v, (v, False))
        root, par = parent[v]
        if root == v:
            return v, par
        r, p = find(root)
        parent[v] = (r, par ^ p)
        return r, par ^ p

    def union(a: str, b: str, flip: bool) -> bool:
        ra, pa = find(a)
        rb, pb = find(b)
        if ra == rb:
            return (pa ^ pb) == flip
        parent[ra] = (rb, pa ^ pb ^ flip)
        return True

    # anchor constant truth at the reserved root "$true"
    for a in atoms:
        if a.b is None:
            ok = union(a.a, "$true", not a.positive)
        else:
            ok = union(a.a, a.b, not a.positive)
        if not ok:
            return False
    return True


class _Budget:
    def __init__(self, n: int) -> None:
        self.left = n

    def spend(self) -> None:
        if self.left <= 0:
            raise ResourceLimitError("case-split budget exceeded")
        self.left -= 1


def _gauss(eqs: list[LinAtom], les: list[LinAtom]) -> tuple[list[LinAtom], list[LinAtom]] | None:
    """Eliminate variables with a unit coefficient in some equality."""
    eqs = list(eqs)
    les = list(les)
    changed = True
    while changed:
        changed = False
        for i, e in enumerate(eqs):
            unit = next(((v, k) for v, k in e.coeffs if abs(k) == 1), None)
            if unit is None:
                continue
            v, k = unit
            # v = (const - rest) / k  with k = +-1
            rest = {w: -a * k for w, a in e.coeffs if w != v}
            vconst = e.const * k
            del eqs[i]

            def subst(atom: LinAtom) -> LinAtom | bool:
                d = dict(atom.coeffs)
                if v not in d:
                    return atom
                kv = d.pop(v)
                for w, a in rest.items():
                    d[w] = d.get(w, 0) + kv * a
                return lin_atom(d, atom.op, atom.const - kv * vconst)

            new_eqs: list[LinAtom] = []
            for a in eqs:
                r = subst(a)
                if r is False:
                    return None
                if isinstance(r, LinAtom):
                    new_eqs.append(r)
            new_les = []
            for a in les:
                r = subst(a)
                if r is False:
                    return None
                if isinstance(r, LinAtom):
                    new_les.append(r)
            eqs, les = new_eqs, new_les
            changed = True
            break
    return eqs, les


def _fm_eliminate(les: list[LinAtom], var: str) -> list[LinAtom] | None:
    """One Fourier-Motzkin step over the integers (tightened); None = unsat."""
    lowers, uppers, rest = [], [], []
    for a in les:
        k = dict(a.coeffs).get(var, 0)
        if k > 0:
            uppers.append(a)
        elif k < 0:
            lowers.append(a)
        else:
            rest.append(a)
    for lo in lowers:
        dlo = dict(lo.coeffs)
        alo = -dlo[var]
        for up in uppers:
            dup = dict(up.coeffs)
            aup = dup[var]
            d: dict[str, int] = {}
            for w, c in dlo.items():
                if w != var:
                    d[w] = d.get(w, 0) + aup * c
            for w, c in dup.items():
                if w != var:
                    d[w] = d.get(w, 0) + alo * c
            r = lin_atom(d, OP_LE, aup * lo.const + alo * up.const)
            if r is False:
                return None
            if isinstance(r, LinAtom):
                rest.append(r)
    return rest


def _le_system_sat(les: list[LinAtom], budget: _Budget) -> bool:
    """Integer feasibility of a pure <= system: FM relaxation + branch&bound."""
    order = sorted({v for a in les for v in a.vars()})
    stages: list[list[LinAtom]] = [list(les)]
    cur = list(les)
    for v in order:
        nxt = _fm_eliminate(cur, v)
        if nxt is None:
            return False
        cur = nxt
        stages.append(list(cur))
    # rationally feasible; reconstruct a witness back to front
    assign: dict[str, Fraction] = {}
    fractional: tuple[str, Fraction] | None = None
    for idx in range(len(order) - 1, -1, -1):
        v = order[idx]
        lo: Fraction | None = None
        hi: Fraction | None = None
        for a in stages[idx]:
            d = dict(a.coeffs)
            k = d.get(v, 0)
            if k == 0:
                continue
            acc = Fraction(a.const)
            for w, c in d.items():
                if w != v:
                    acc -= c * assign[w]
            bound = acc / k
            if k > 0:
                hi = bound if hi is None else min(hi, bound)
            else:
                lo = bound if lo is None else max(lo, bound)
        if lo is not None and hi is not None and lo > hi:
            # rounding of later vars broke this level; branch below
            fractional = fractional or (v, lo)
            assign[v] = lo
            continue
        val = _pick_value(lo, hi)
        assign[v] = val
        if val.denominator != 1 and fractional is None:
            fractional = (v, val)
    if fractional is None and all(x.denominator == 1 for x in assign.values()):
        return True
    v, x = fractional if fractional is not None else next(
        (v, x) for v, x in assign.items() if x.denominator != 1
    )
    budget.spend()
    down = lin_atom({v: 1}, OP_LE, floor(x))
    up = lin_atom({v: -1}, OP_LE, -ceil(x) if x.denominator != 1 else -(floor(x) + 1))
    for extra in (down, up):
        if extra is True:
            return True
        if extra is False:
            continue
        if _le_system_sat(les + [extra], budget):
            return True
    return False


def _pick_value(lo: Fraction | None, hi: Fraction | None) -> Fraction:
    if lo is None and hi is None:
        return Fraction(0)
    if lo is None:
        return Fraction(min(floor(hi), 0))
    if hi is None:
        return Fraction(max(ceil(lo), 0))
    ilo, ihi = ceil(lo), floor(hi)
    if ilo <= ihi:
        if ilo <= 0 <= ihi:
            return Fraction(0)
        return Fraction(ilo if ilo > 0 else ihi)
    return (lo + hi) / 2


def _int_sat(lins: list[LinAtom], budget: _Budget) -> bool:
    eqs = [a for a in lins if a.op == OP_EQ]
    les = [a for a in lins if a.op == OP_LE]
    nes = [a for a in lins if a.op == OP_NE]
    if nes:
        ne, rest = nes[0], nes[1:]
        budget.spend()
        for delta in (-1, 1):
            coeffs = dict(ne.coeffs)
            if delta == 1:
                coeffs = {v: -a for v, a in coeffs.items()}
            bound = ne.const - 1 if delta == -1 else -ne.const - 1
            a = lin_atom(coeffs, OP_LE, bound)
            if a is False:
                continue
            branch = eqs + les + rest + ([a] if isinstance(a, LinAtom) else [])
            if _int_sat(branch, budget):
                return True
        return False
    g = _gauss(eqs, les)
    if g is None:
        return False
    eqs, les = g
    for e in eqs:  # leftover equalities without unit coefficients
        les = les + [
            LinAtom(e.coeffs, OP_LE, e.const),
            LinAtom(tuple((v, -a) for v, a in e.coeffs), OP_LE, -e.const),
        ]
    return _le_system_sat(les, budget)


def is_sat(c: Constraint, budget: int = DEFAULT_SPLIT_BUDGET) -> bool:
    """Integer/boolean satisfiability; raises ResourceLimitError on blowup."""
    if c.is_false:
        return False
    bools = [a for a in c.atoms if isinstance(a, BoolAtom)]
    lins = [a for a in c.atoms if isinstance(a, LinAtom)]
    if not _bool_sat(bools):
        return False
    return _int_sat(lins, _Budget(budget))


def proven_unsat(c: Constraint, budget: int = DEFAULT_SPLIT_BUDGET) -> bool:
    """True only when unsatisfiability was actually decided."""
    try:
        return not is_sat(c, budget)
    except ResourceLimitError:
        return False


def entails(c: Constraint, d: Constraint, budget: int = DEFAULT_SPLIT_BUDGET) -> bool:
    """Every integer/boolean solution of c satisfies d; conservative False."""
    if c.is_false:
        return True
    if d.is_false:
        return proven_unsat(c, budget)
    try:
        for atom in d.atoms:
            for neg in negate_atom(atom):
                if is_sat(c.and_(single(neg)), budget):
                    return False
        return True
    except ResourceLimitError:
        return False


def widen(c1: Constraint, c2: Constraint) -> Constraint:
    """Keep the conjuncts of c1 entailed by c2 (widening-style generalization)."""
    if c1.is_false:
        return c2
    if c2.is_false:
        return c1
    return conj([a for a in c1.atoms if entails(c2, single(a))])


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def _branches_for_project(c: Constraint, drop_bools: list[str]) -> list[list[Atomic]] | None:
    """Case-split disequalities and eliminated booleans into conjunctions."""
    branches: list[list[Atomic]] = [[]]
    for a in c.atoms:
        if isinstance(a, LinAtom) and a.op == OP_NE:
            lt = lin_atom(dict(a.coeffs), OP_LE, a.const - 1)
            gt = lin_atom({v: -k for v, k in a.coeffs}, OP_LE, -a.const - 1)
            new = []
            for br in branches:
                for side in (lt, gt):
                    if side is False:
                        continue
                    new.append(br + ([side] if isinstance(side, LinAtom) else []))
            branches = new
        else:
            for br in branches:
                br.append(a)
        if len(branches) > 256:
            return None
    for v in drop_bools:
        new = []
        for br in branches:
            for val in (True, False):
                cc = substitute(Constraint(tuple(br)), bool_map={v: val})
                if not cc.is_false:
                    new.append(list(cc.atoms))
        branches = new
        if len(branches) > 256:
            return None
    return branches


def _eliminate_ints(atoms: list[Atomic], drop: list[str]) -> list[Atomic] | None:
    lins = [a for a in atoms if isinstance(a, LinAtom)]
    bools = [a for a in atoms if isinstance(a, BoolAtom)]
    for v in drop:
        eqs = [a for a in lins if a.op == OP_EQ and v in dict(a.coeffs)]
        unit = next((e for e in eqs if abs(dict(e.coeffs)[v]) == 1), None)
        if unit is not None:
            k = dict(unit.coeffs)[v]
            rest = {w: -a * k for w, a in unit.coeffs if w != v}
            vconst = unit.const * k
            out: list[LinAtom] = []
            for a in lins:
                if a is unit:
                    continue
                d = dict(a.coeffs)
                if v not in d:
                    out.append(a)
                    continue
                kv = d.pop(v)
                for w, c in rest.items():
                    d[w] = d.get(w, 0) + kv * c
                r = lin_atom(d, a.op, a.const - kv * vconst)
                if r is False:
                    return None
                if isinstance(r, LinAtom):
                    out.append(r)
            lins = out
            continue
        les: list[LinAtom] = []
        for a in lins:
            if v not in dict(a.coeffs):
                les.append(a)
            elif a.op == OP_EQ:
                les.append(LinAtom(a.coeffs, OP_LE, a.const))
                les.append(LinAtom(tuple((w, -k) for w, k in a.coeffs), OP_LE, -a.const))
            else:
                les.append(a)
        hi = [a for a in les if v in dict(a.coeffs)]
        lo = [a for a in les if v not in dict(a.coeffs)]
        r = _fm_eliminate(hi + lo, v)
        if r is None:
            return None
        lins = r
    return bools + lins


def project(c: Constraint, keep: Iterable[str]) -> Constraint:
    """Over-approximating existential elimination of variables outside keep.

    Disequalities are split into the two strict sides before elimination and
    only atomics common to every surviving branch are kept, so a projection
    never contains a disequality.  Rational-style reasoning plus integer
    tightening keeps the result entailed by c over the integers.
    """
    if c.is_false:
        return FALSE
    keepset = set(keep)
    drop_bools = [v for v in c.bool_vars() if v not in keepset]
    drop_ints = [v for v in c.int_vars() if v not in keepset]
    branches = _branches_for_project(c, drop_bools)
    if branches is None:
        return TRUE  # too many splits; the empty conjunction is always safe
    results: list[set[Atomic]] = []
    for br in branches:
        r = _eliminate_ints(br, drop_ints)
        if r is None:
            continue
        cc = conj(r)
        if cc.is_false:
            continue
        results.append(set(cc.atoms))
    if not results:
        return FALSE
    common = set.intersection(*results)
    ordered = [a for a in (conj(sorted(common, key=repr)).atoms or ())]
    return Constraint(tuple(ordered))


def simplify_local_vars(c: Constraint, keep: Iterable[str]) -> Constraint:
    """Exact elimination of variables occurring only in the constraint.

    Applies only equivalence-preserving steps: unit-coefficient Gaussian
    substitution, and dropping an atom whose eliminated variable occurs in no
    other atom (any single inequality or disequation on an unbounded integer,
    or any boolean literal/equation, is existentially trivial).
    """
    if c.is_false:
        return FALSE
    keepset = set(keep)
    atoms = list(c.atoms)
    changed = True
    while changed:
        changed = False
        local = [v for v in Constraint(tuple(atoms)).variables() if v not in keepset]
        for v in local:
            holders = [a for a in atoms if v in a.vars()]
            unit = next(
                (
                    a
                    for a in holders
                    if isinstance(a, LinAtom)
                    and a.op == OP_EQ
                    and abs(dict(a.coeffs)[v]) == 1
                ),
                None,
            )
            if unit is not None:
                k = dict(unit.coeffs)[v]
                rest = {w: -a * k for w, a in unit.coeffs if w != v}
                vconst = unit.const * k
                out: list[Atomic | bool] = []
                for a in atoms:
                    if a is unit:
                        continue
                    if isinstance(a, BoolAtom) or v not in dict(a.coeffs):
                        out.append(a)
                        continue
                    d = dict(a.coeffs)
                    kv = d.pop(v)
                    for w, cf in rest.items():
                        d[w] = d.get(w, 0) + kv * cf
                    out.append(lin_atom(d, a.op, a.const - kv * vconst))
                cc = conj(out)
                if cc.is_false:
                    return FALSE
                atoms = list(cc.atoms)
                changed = True
                break
            if len(holders) == 1:
                a = holders[0]
                droppable = isinstance(a, BoolAtom) or a.op in (OP_LE, OP_NE)
                if droppable:
                    atoms = [x for x in atoms if x is not a]
                    changed = True
                    break
    return conj(atoms)


def equality(a: str, b: IntImage) -> LinAtom | bool:
    """var = var-or-constant over the integers."""
    if isinstance(b, int):
        return lin_atom({a: 1}, OP_EQ, b)
    return lin_atom({a: 1, b: -1}, OP_EQ, 0)


def evaluate(c: Constraint, int_env: Mapping[str, int], bool_env: Mapping[str, bool]) -> bool:
    """Truth of the conjunction in a concrete environment."""
    if c.is_false:
        return False
    for a in c.atoms:
        if isinstance(a, LinAtom):
            s = sum(k * int_env[v] for v, k in a.coeffs)
            ok = s == a.const if a.op == OP_EQ else s != a.const if a.op == OP_NE else s <= a.const
        else:
            if a.b is None:
                ok = bool_env[a.a] == a.positive
            else:
                ok = (bool_env[a.a] == bool_env[a.b]) == a.positive
        if not ok:
            return False
    return True

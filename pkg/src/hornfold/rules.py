"""The seven transformation rules as checked operations on a clause set.

A ``TransformationSequence`` owns the evolving clause set of one derivation:
every rule application verifies its side conditions, assigns fresh clause ids
and appends a step (with full witnesses) to the trace, so a finished trace can
be re-played and audited for the soundness condition on folds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from . import constraints, core
from .constraints import Constraint
from .core import (
    Atom,
    Clause,
    HornfoldError,
    ModeSignature,
    NoValidOrderingError,
    Program,
    Substitution,
    Type,
    Var,
    mgu,
    moded_partition,
    vars_of,
)


class RuleError(HornfoldError):
    pass


class FreshnessViolationError(RuleError):
    pass


class HeadVarsNotInBodyError(RuleError):
    pass


class BodyPredsNotInSourceError(RuleError):
    pass


class AtomNotInBodyError(RuleError):
    pass


class BodyMismatchError(RuleError):
    pass


class ConstraintNotEntailedError(RuleError):
    pass


class LevelViolationError(RuleError):
    pass


class ConstraintNotProvenUnsatError(RuleError):
    pass


class ModeMismatchError(RuleError):
    pass


class OutputsStillUsedError(RuleError):
    pass


@dataclass
class Step:
    index: int
    rule: str
    in_ids: tuple[int, ...]
    out_ids: tuple[int, ...]
    detail: dict

    def format(self, verbose: bool = False) -> str:
        ins = ",".join(f"c{i}" for i in self.in_ids)
        outs = ",".join(f"c{i}" for i in self.out_ids)
        extra = ""
        if self.rule == "define":
            extra = f" pred={self.detail['pred']} level={self.detail['level']}"
        elif self.rule == "unfold":
            extra = (
                f" atom={self.detail['atom_pred']}@{self.detail['atom_index']}"
                f" atom_level={self.detail['atom_level']}"
                f" head={self.detail['head_pred'] or 'false'}"
            )
        elif self.rule == "fold":
            extra = f" def={self.detail['def_pred']}(c{self.detail['def_id']})"
        elif self.rule == "diff_replace":
            extra = f" def={self.detail['def_pred']}(c{self.detail['def_id']})"
        if verbose and "theta" in self.detail:
            extra += f" theta={self.detail['theta']!r}"
        return f"{self.index} {self.rule} [{ins}] -> [{outs}]{extra}"


@dataclass
class TransformationTrace:
    steps: list[Step] = field(default_factory=list)
    defs_snapshots: list[tuple[int, ...]] = field(default_factory=list)
    level_map: dict[str, int] = field(default_factory=dict)

    def record(self, step: Step, defs_ids: tuple[int, ...]) -> None:
        self.steps.append(step)
        self.defs_snapshots.append(defs_ids)

    @property
    def used_diff_replacement(self) -> bool:
        return any(s.rule == "diff_replace" for s in self.steps)

    def serialize(self, verbose: bool = False) -> str:
        return "\n".join(s.format(verbose) for s in self.steps) + ("\n" if self.steps else "")


@dataclass(frozen=True)
class Definition:
    """Snapshot of a clause introduced by the definition rule."""

    clause: Clause
    pred: str
    level: int


class TransformationSequence:
    """Single-owner mutable state for one transformation run."""

    def __init__(self, program: Program) -> None:
        self.program0 = program
        self.ds: list[Clause] = program.definite()
        self.modes: dict[str, ModeSignature] = dict(program.modes)
        self.predicates: dict[str, tuple[Type, ...]] = dict(program.predicates)
        self.levels: dict[str, int] = dict(program.levels)
        self.clauses: dict[int, Clause] = {}
        self._defs: dict[int, Definition] = {}
        self.trace = TransformationTrace(level_map=self.levels)
        self._next_cid = max((c.cid for c in program.clauses), default=0) + 1
        self._rename_counter = 0
        self._p0_preds = set(program.predicates)
        self._all_preds_seen = set(program.predicates)
        for c in program.clauses:
            self.clauses[c.cid] = c

    # -- bookkeeping ------------------------------------------------------

    def fresh_cid(self) -> int:
        cid = self._next_cid
        self._next_cid += 1
        return cid

    def defs(self) -> dict[int, Definition]:
        return dict(self._defs)

    def defs_ids(self) -> tuple[int, ...]:
        return tuple(self._defs)

    def level_of(self, pred: str | None) -> float:
        if pred is None:
            return float("inf")
        return self.levels[pred]

    def rename_apart(self, clause: Clause, avoid: Iterable[Var]) -> tuple[Clause, Substitution]:
        avoid_names = {v.name for v in avoid}
        mapping: dict[Var, core.Term] = {}
        for v in clause.variables():
            if v.name in avoid_names:
                while True:
                    self._rename_counter += 1
                    nn = f"{v.name}_{self._rename_counter}"
                    if nn not in avoid_names:
                        break
                mapping[v] = Var(nn, v.type)
        s = Substitution(mapping)
        return s.clause(clause), s

    def _record(self, rule: str, in_ids: Sequence[int], out_ids: Sequence[int], **detail) -> Step:
        step = Step(len(self.trace.steps) + 1, rule, tuple(in_ids), tuple(out_ids), detail)
        self.trace.record(step, self.defs_ids())
        return step

    def _get(self, cid: int) -> Clause:
        if cid not in self.clauses:
            raise RuleError(f"clause c{cid} is not in the current set")
        return self.clauses[cid]

    # -- R1: definition ----------------------------------------------------

    def define(self, head: Atom, constraint: Constraint, body: Sequence[Atom]) -> Clause:
        pred = head.pred
        if pred in self._all_preds_seen:
            raise FreshnessViolationError(f"predicate {pred} already occurs in the sequence")
        body = tuple(body)
        body_vars = {v for a in body for v in vars_of(a)}
        cnames = set(constraint.variables())
        for v in vars_of(head):
            if v not in body_vars and v.name not in cnames:
                raise HeadVarsNotInBodyError(f"head variable {v} not in the definition body")
        for a in body:
            if a.pred not in self._p0_preds:
                raise BodyPredsNotInSourceError(
                    f"body predicate {a.pred} does not occur in the initial clauses"
                )
        level = max((self.levels[a.pred] for a in body), default=0)
        clause = Clause(head, constraint, body, cid=self.fresh_cid())
        self.clauses[clause.cid] = clause
        self._defs[clause.cid] = Definition(clause, pred, level)
        self.levels[pred] = level
        self._all_preds_seen.add(pred)
        self.predicates[pred] = tuple(core.term_type(t) for t in head.args)
        self._record("define", [], [clause.cid], pred=pred, level=level, clause=clause)
        return clause

    # -- R2: unfolding -----------------------------------------------------

    def unfold(self, cid: int, atom_index: int) -> list[Clause]:
        c = self._get(cid)
        if not (0 <= atom_index < len(c.body)):
            raise AtomNotInBodyError(f"clause c{cid} has no body atom {atom_index}")
        atom = c.body[atom_index]
        cvars = set(c.variables())
        derived: list[Clause] = []
        for d in self.ds:
            if d.head is None or d.head.pred != atom.pred:
                continue
            dr, _ = self.rename_apart(d, cvars)
            theta = mgu(atom, dr.head, protect=frozenset(cvars))
            if theta is None:
                continue
            combined = theta.constraint(c.constraint).and_(theta.constraint(dr.constraint))
            try:
                if not constraints.is_sat(combined):
                    continue
            except constraints.ResourceLimitError:
                pass  # keep the clause; deletion would need a proof
            head = theta.atom(c.head) if c.head is not None else None
            left = theta.atoms(c.body[:atom_index])
            mid = theta.atoms(dr.body)
            right = theta.atoms(c.body[atom_index + 1 :])
            marks = (
                c.unfoldable[:atom_index]
                + tuple(False for _ in mid)
                + c.unfoldable[atom_index + 1 :]
            )
            keep = {v.name for a in (list(left) + list(mid) + list(right)) for v in vars_of(a)}
            if head is not None:
                keep |= {v.name for v in vars_of(head)}
            simplified = constraints.simplify_local_vars(combined, keep)
            nc = Clause(head, simplified, left + mid + right, cid=self.fresh_cid(), unfoldable=marks)
            derived.append(nc)
        del self.clauses[cid]
        for nc in derived:
            self.clauses[nc.cid] = nc
        self._record(
            "unfold",
            [cid],
            [nc.cid for nc in derived],
            atom_index=atom_index,
            atom_pred=atom.pred,
            atom_level=self.levels.get(atom.pred, 0),
            head_pred=None if c.head is None else c.head.pred,
        )
        return derived

    # -- R3: folding -------------------------------------------------------

    def find_fold_match(self, c: Clause, definition: Definition) -> tuple[Substitution, tuple[int, ...]] | None:
        """Deterministic search for theta and body positions with Q = B*theta."""
        dbody = definition.clause.body
        for m in core.consistent_partial_matches(dbody, c.body):
            if len(m.pairs) == len(dbody):
                return m.theta, m.matched_block
        return None

    def fold(
        self,
        cid: int,
        def_id: int,
        theta: Substitution | None = None,
        positions: tuple[int, ...] | None = None,
    ) -> Clause:
        c = self._get(cid)
        definition = self._defs.get(def_id)
        if definition is None:
            raise RuleError(f"c{def_id} is not a definition")
        d = definition.clause
        if c.head is not None and self.level_of(c.head.pred) < definition.level:
            raise LevelViolationError(
                f"level of {c.head.pred} is below level of {definition.pred}"
            )
        if theta is None or positions is None:
            found = self.find_fold_match(c, definition)
            if found is None:
                raise BodyMismatchError(
                    f"body of c{cid} contains no instance of the body of {definition.pred}"
                )
            theta, positions = found
        if len(positions) != len(d.body) or len(set(positions)) != len(positions):
            raise BodyMismatchError("matched positions do not cover the definition body")
        image = [theta.atom(a) for a in d.body]
        picked = [c.body[i] for i in positions]
        if sorted(map(repr, image)) != sorted(map(repr, picked)):
            raise BodyMismatchError("matched atoms are not an instance of the definition body")
        if not constraints.entails(c.constraint, theta.constraint(d.constraint)):
            raise ConstraintNotEntailedError(
                f"constraint of c{cid} does not entail the definition constraint"
            )
        at = min(positions)
        kept = [(a, u) for i, (a, u) in enumerate(zip(c.body, c.unfoldable)) if i not in positions]
        new_atom = theta.atom(d.head)
        body: list[Atom] = []
        marks: list[bool] = []
        inserted = False
        for i, (a, u) in enumerate(zip(c.body, c.unfoldable)):
            if i in positions:
                if not inserted and i == at:
                    body.append(new_atom)
                    marks.append(False)
                    inserted = True
                continue
            body.append(a)
            marks.append(u)
        nc = Clause(c.head, c.constraint, tuple(body), cid=self.fresh_cid(), unfoldable=tuple(marks))
        del self.clauses[cid]
        self.clauses[nc.cid] = nc
        self._record(
            "fold",
            [cid],
            [nc.cid],
            def_id=def_id,
            def_pred=definition.pred,
            theta=theta,
            positions=tuple(positions),
        )
        return nc

    # -- R4: clause deletion ------------------------------------------------

    def delete(self, cid: int) -> None:
        c = self._get(cid)
        if not constraints.proven_unsat(c.constraint):
            raise ConstraintNotProvenUnsatError(
                f"constraint of c{cid} was not proven unsatisfiable"
            )
        del self.clauses[cid]
        self._record("delete", [cid], [])

    # -- R5: functionality ---------------------------------------------------

    def functionality(self, cid: int, first: tuple[int, ...], second: tuple[int, ...]) -> Clause:
        c = self._get(cid)
        if set(first) & set(second):
            raise ModeMismatchError("the two conjunctions overlap")
        f1 = [c.body[i] for i in first]
        f2 = [c.body[i] for i in second]
        if [a.pred for a in f1] != [a.pred for a in f2]:
            raise ModeMismatchError("conjunctions use different predicates")
        for a in f1 + f2:
            if a.pred not in self.modes:
                raise ModeMismatchError(f"no mode for {a.pred}")
        eqs: list = []
        unifier: dict[Var, core.Term] = {}
        for a1, a2 in zip(f1, f2):
            sig = self.modes[a1.pred]
            if sig.input_args(a1) != sig.input_args(a2):
                raise ModeMismatchError("input tuples differ")
            for t1, t2 in zip(sig.output_args(a1), sig.output_args(a2)):
                if t1 == t2:
                    continue
                ty = core.term_type(t1)
                if ty.is_basic:
                    if not (isinstance(t1, Var) and isinstance(t2, Var)):
                        raise ModeMismatchError("basic outputs must be variables")
                    if ty == core.INT:
                        eqs.append(constraints.lin_atom({t1.name: 1, t2.name: -1}, "=", 0))
                    else:
                        eqs.append(constraints.bool_eq(t1.name, t2.name))
                else:
                    u = mgu(Atom("$eq", (t1,)), Atom("$eq", (t2,)))
                    if u is None:
                        raise ModeMismatchError("ADT outputs do not unify")
                    for v, t in u.m.items():
                        unifier[v] = t
        body = tuple(a for i, a in enumerate(c.body) if i not in set(second))
        marks = tuple(u for i, u in enumerate(c.unfoldable) if i not in set(second))
        nc = Clause(
            c.head,
            c.constraint.and_(constraints.conj(eqs)),
            body,
            cid=self.fresh_cid(),
            unfoldable=marks,
        )
        if unifier:
            nc = replace(Substitution(unifier).clause(nc), cid=nc.cid, unfoldable=marks)
        del self.clauses[cid]
        self.clauses[nc.cid] = nc
        self._record("functionality", [cid], [nc.cid], first=first, second=second)
        return nc

    # -- R6: totality ---------------------------------------------------------

    def totality(self, cid: int, positions: tuple[int, ...]) -> Clause:
        c = self._get(cid)
        atoms = [c.body[i] for i in positions]
        for a in atoms:
            if a.pred not in self.modes:
                raise ModeMismatchError(f"no mode for {a.pred}")
        mv = moded_partition(atoms, self.modes)
        outs = set(mv.outputs)
        rest_atoms = [a for i, a in enumerate(c.body) if i not in set(positions)]
        rest_vars = {v for a in rest_atoms for v in vars_of(a)}
        if c.head is not None:
            rest_vars |= set(vars_of(c.head))
        rest_names = {v.name for v in rest_vars} | set(c.constraint.variables())
        if any(v.name in rest_names for v in outs):
            raise OutputsStillUsedError("outputs occur in the rest of the clause")
        body = tuple(a for i, a in enumerate(c.body) if i not in set(positions))
        marks = tuple(u for i, u in enumerate(c.unfoldable) if i not in set(positions))
        nc = Clause(c.head, c.constraint, body, cid=self.fresh_cid(), unfoldable=marks)
        del self.clauses[cid]
        self.clauses[nc.cid] = nc
        self._record("totality", [cid], [nc.cid], positions=positions)
        return nc

    # -- R7: differential replacement -----------------------------------------

    def diff_replace(
        self,
        cid: int,
        def_id: int,
        sigma: Substitution,
        f_split: tuple[int, ...],
        c_positions: tuple[int, ...],
    ) -> Clause:
        """Replace F(X;Y) (at c_positions in the clause) by (R(V;W), diff(Z)).

        ``f_split`` lists the positions of F's atoms inside the definition
        body; the remaining definition atoms form R.  ``sigma`` instantiates
        the definition so that F*sigma equals the replaced conjunction.
        """
        c = self._get(cid)
        definition = self._defs.get(def_id)
        if definition is None:
            raise RuleError(f"c{def_id} is not a definition")
        d = definition.clause
        if not self.level_of(None if c.head is None else c.head.pred) > definition.level:
            raise LevelViolationError(
                f"level of the head must exceed level of {definition.pred}"
            )
        f_atoms = [sigma.atom(d.body[i]) for i in f_split]
        r_atoms = [sigma.atom(a) for i, a in enumerate(d.body) if i not in set(f_split)]
        picked = [c.body[i] for i in c_positions]
        if sorted(map(repr, f_atoms)) != sorted(map(repr, picked)):
            raise BodyMismatchError("replaced conjunction does not match the definition F-part")
        try:
            rv = moded_partition(r_atoms, self.modes)
            moded_partition(f_atoms, self.modes)
        except NoValidOrderingError as e:
            raise ModeMismatchError(str(e)) from e
        cvars = {v.name for v in c.variables()}
        if any(v.name in cvars for v in rv.outputs):
            raise FreshnessViolationError("outputs of R collide with clause variables")
        if not constraints.entails(c.constraint, sigma.constraint(d.constraint)):
            raise ConstraintNotEntailedError("clause constraint does not entail d")
        for a in f_atoms + r_atoms:
            if self.level_of(None if c.head is None else c.head.pred) <= self.levels.get(a.pred, 0):
                raise LevelViolationError(f"head level must exceed level of {a.pred}")
        diff_atom = sigma.atom(d.head)
        at = min(c_positions)
        body: list[Atom] = []
        marks: list[bool] = []
        inserted = False
        for i, (a, u) in enumerate(zip(c.body, c.unfoldable)):
            if i in set(c_positions):
                if not inserted and i == at:
                    body.extend(r_atoms)
                    marks.extend(False for _ in r_atoms)
                    body.append(diff_atom)
                    marks.append(False)
                    inserted = True
                continue
            body.append(a)
            marks.append(u)
        nc = Clause(c.head, c.constraint, tuple(body), cid=self.fresh_cid(), unfoldable=tuple(marks))
        del self.clauses[cid]
        self.clauses[nc.cid] = nc
        self._record(
            "diff_replace",
            [cid],
            [nc.cid],
            def_id=def_id,
            def_pred=definition.pred,
            theta=sigma,
            f_split=f_split,
            c_positions=tuple(c_positions),
        )
        return nc

    # -- marking (not a transformation step) -----------------------------------

    def set_marks(self, cid: int, marks: Sequence[bool]) -> Clause:
        c = self._get(cid)
        nc = c.with_marks(marks)
        self.clauses[cid] = nc
        return nc


def audit_condition_u(trace: TransformationTrace) -> tuple[bool, str | None]:
    """Every definition used in a fold must be unfolded, somewhere in the
    sequence, w.r.t. an atom whose level equals the definition head's level.

    Unfolding never rewrites heads, so the clauses derived from a definition
    keep its head predicate; an unfold of any clause with that head predicate
    counts as an unfold of the definition.
    """
    folded_defs: dict[str, int] = {}
    for s in trace.steps:
        if s.rule == "fold":
            folded_defs.setdefault(s.detail["def_pred"], s.detail["def_id"])
    for pred in folded_defs:
        level = trace.level_map.get(pred)
        ok = any(
            s.rule == "unfold"
            and s.detail["head_pred"] == pred
            and s.detail["atom_level"] == level
            for s in trace.steps
        )
        if not ok:
            return False, (
                f"definition {pred} is used in a fold but never unfolded "
                f"w.r.t. an atom at level {level}"
            )
    return True, None


def replay(program: Program, trace: TransformationTrace) -> bool:
    """Re-run a trace on the initial program and check the steps re-verify."""
    seq = TransformationSequence(program)
    remap: dict[int, int] = {c.cid: c.cid for c in program.clauses}
    for step in trace.steps:
        ins = [remap.get(i, i) for i in step.in_ids]
        if step.rule == "define":
            d: Clause = step.detail["clause"]
            out = seq.define(d.head, d.constraint, d.body)
            remap[step.out_ids[0]] = out.cid
        elif step.rule == "unfold":
            outs = seq.unfold(ins[0], step.detail["atom_index"])
            if len(outs) != len(step.out_ids):
                return False
            for old, new in zip(step.out_ids, outs):
                remap[old] = new.cid
        elif step.rule == "fold":
            out = seq.fold(
                ins[0],
                remap.get(step.detail["def_id"], step.detail["def_id"]),
                step.detail["theta"],
                step.detail["positions"],
            )
            remap[step.out_ids[0]] = out.cid
        elif step.rule == "delete":
            seq.delete(ins[0])
        elif step.rule == "functionality":
            out = seq.functionality(ins[0], step.detail["first"], step.detail["second"])
            remap[step.out_ids[0]] = out.cid
        elif step.rule == "totality":
            out = seq.totality(ins[0], step.detail["positions"])
            remap[step.out_ids[0]] = out.cid
        elif step.rule == "diff_replace":
            out = seq.diff_replace(
                ins[0],
                remap.get(step.detail["def_id"], step.detail["def_id"]),
                step.detail["theta"],
                step.detail["f_split"],
                step.detail["c_positions"],
            )
            remap[step.out_ids[0]] = out.cid
        else:
            return False
    return True

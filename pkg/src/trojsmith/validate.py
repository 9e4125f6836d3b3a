"""Trigger justification and insertion checking.

`justify` proves or refutes that a set of nets can simultaneously reach the
required values: the transitive fanin cone is encoded to CNF with standard
gate-consistency clauses and decided by a complete backtracking solver.
Every witness is replayed through the logic simulator before it is returned.

`verify_inserted` is the end-to-end check on an inserted Trojan: primary
outputs must match the clean design on every cycle where the trigger
condition does not hold, and the justification witness must flip at least
one primary output.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import InterfaceMismatch, NetlistError
from .netlist import Netlist, TopoOrder
from .simulate import count_ones, evaluate_assignment, simulate_words

_UNASSIGNED = -1


@dataclass
class TriggerCondition:
    """Required (net, logic value) pairs, one per trigger net."""

    assignments: list[tuple[str, int]]

    def __post_init__(self):
        nets = [n for n, _ in self.assignments]
        if len(set(nets)) != len(nets):
            raise NetlistError("trigger condition nets must be distinct")
        for n, v in self.assignments:
            if v not in (0, 1):
                raise NetlistError(f"condition value for {n!r} must be 0 or 1")

    def nets(self) -> list[str]:
        return [n for n, _ in self.assignments]

    def satisfied_by(self, values: dict[str, int]) -> bool:
        return all(values[n] == v for n, v in self.assignments)


@dataclass
class Justification:
    satisfiable: bool
    witness: dict[str, int] | None = None
    timed_out: bool = False


# ---------------------------------------------------------------------------
# CNF encoding
# ---------------------------------------------------------------------------


def _xor2(z, x, y):
    return [(-z, x, y), (-z, -x, -y), (z, -x, y), (z, x, -y)]


def encode_cone(netlist: Netlist, targets: list[str]):
    """Gate-consistency CNF for the fanin cone of `targets`.

    Returns (clauses, varmap, free_nets); source nets in the cone (PIs and
    flip-flop outputs) are the free variables of the formula.
    """
    cone: list[str] = []
    seen = set()
    stack = list(targets)
    while stack:
        net = stack.pop()
        if net in seen:
            continue
        seen.add(net)
        cone.append(net)
        drv = netlist.nets[net].driver
        if drv[0] == "cell":
            cell = netlist.cells[drv[1]]
            if not cell.kind_def().is_sequential:
                stack.extend(cell.input_nets())

    varmap = {net: i + 1 for i, net in enumerate(sorted(cone))}
    next_var = len(varmap) + 1
    clauses: list[tuple[int, ...]] = []
    free: list[str] = []

    for net in sorted(cone):
        y = varmap[net]
        rec = netlist.nets[net]
        if rec.is_const:
            clauses.append((y,) if rec.driver[1] else (-y,))
            continue
        cell = netlist.comb_driver(net)
        if cell is None:
            free.append(net)
            continue
        fam = cell.kind_def().family
        ins = [varmap[n] for n in cell.input_nets()]
        if fam == "NOT":
            clauses += [(y, ins[0]), (-y, -ins[0])]
        elif fam == "BUF":
            clauses += [(y, -ins[0]), (-y, ins[0])]
        elif fam in ("AND", "NAND"):
            out = y if fam == "AND" else -y
            clauses += [(-out, a) for a in ins]
            clauses.append(tuple([out] + [-a for a in ins]))
        elif fam in ("OR", "NOR"):
            out = y if fam == "OR" else -y
            clauses += [(out, -a) for a in ins]
            clauses.append(tuple([-out] + list(ins)))
        elif fam in ("XOR", "XNOR"):
            acc = ins[0]
            for a in ins[1:-1]:
                t = next_var
                next_var += 1
                clauses += _xor2(t, acc, a)
                acc = t
            out = y if fam == "XOR" else -y
            clauses += _xor2(out, acc, ins[-1])
        elif fam == "MUX2":
            a, b, s = ins
            clauses += [(-s, -b, y), (-s, b, -y), (s, -a, y), (s, a, -y)]
        else:
            raise AssertionError(fam)
    return clauses, varmap, free, next_var - 1


def write_dimacs(clauses, n_vars: int, path: str, comments: list[str] | None = None) -> None:
    with open(path, "w") as fh:
        for c in comments or []:
            fh.write(f"c {c}\n")
        fh.write(f"p cnf {n_vars} {len(clauses)}\n")
        for cl in clauses:
            fh.write(" ".join(str(l) for l in cl) + " 0\n")


# ---------------------------------------------------------------------------
# DPLL with two watched literals
# ---------------------------------------------------------------------------


class SolverTimeout(Exception):
    pass


def solve_cnf(
    clauses: list[tuple[int, ...]], n_vars: int, timeout_s: float | None = None
) -> dict[int, int] | None:
    """Complete chronological-backtracking DPLL; returns a model or None."""
    deadline = time.monotonic() + timeout_s if timeout_s else None
    value = [_UNASSIGNED] * (n_vars + 1)
    units: list[int] = []
    watch: dict[int, list[int]] = defaultdict(list)
    watched: list[list[int]] = []
    for ci, cl in enumerate(clauses):
        if len(cl) == 0:
            return None
        if len(cl) == 1:
            units.append(cl[0])
            watched.append([0, 0])
        else:
            watched.append([0, 1])
            watch[cl[0]].append(ci)
            watch[cl[1]].append(ci)

    # static branching order: frequent vars first, phase = majority sign
    occ = defaultdict(int)
    phase_score = defaultdict(int)
    for cl in clauses:
        for l in cl:
            occ[abs(l)] += 1
            phase_score[abs(l)] += 1 if l > 0 else -1
    var_order = sorted(range(1, n_vars + 1), key=lambda v: (-occ[v], v))
    phase = {v: phase_score[v] >= 0 for v in var_order}

    trail: list[int] = []
    marks: list[tuple[int, int, bool]] = []  # (trail length, decided lit, flipped)
    queue: list[int] = list(dict.fromkeys(units))
    steps = 0

    def enqueue(lit: int) -> bool:
        var, val = abs(lit), int(lit > 0)
        if value[var] != _UNASSIGNED:
            return value[var] == val
        value[var] = val
        trail.append(lit)
        queue.append(lit)
        return True

    def propagate() -> bool:
        nonlocal steps
        while queue:
            lit = queue.pop()
            steps += 1
            if deadline and steps % 2048 == 0 and time.monotonic() > deadline:
                raise SolverTimeout
            falsified = -lit
            watchers = watch[falsified]
            i = 0
            while i < len(watchers):
                ci = watchers[i]
                cl = clauses[ci]
                w = watched[ci]
                if cl[w[0]] == falsified:
                    w[0], w[1] = w[1], w[0]
                other = cl[w[0]]
                ov = value[abs(other)]
                if ov != _UNASSIGNED and ov == int(other > 0):
                    i += 1
                    continue
                moved = False
                for j, cand in enumerate(cl):
                    if j == w[0] or j == w[1]:
                        continue
                    cv = value[abs(cand)]
                    if cv == _UNASSIGNED or cv == int(cand > 0):
                        w[1] = j
                        watchers[i] = watchers[-1]
                        watchers.pop()
                        watch[cand].append(ci)
                        moved = True
                        break
                if moved:
                    continue
                if ov == _UNASSIGNED:
                    if not enqueue(other):
                        return False
                    i += 1
                else:
                    return False  # conflict
        return True

    def backtrack() -> bool:
        queue.clear()
        while marks:
            mark, lit, flipped = marks.pop()
            while len(trail) > mark:
                value[abs(trail.pop())] = _UNASSIGNED
            if not flipped:
                marks.append((mark, -lit, True))
                enqueue(-lit)
                return True
        return False

    # push initial units
    for lit in list(queue):
        var = abs(lit)
        val = int(lit > 0)
        if value[var] == _UNASSIGNED:
            value[var] = val
            trail.append(lit)
        elif value[var] != val:
            return None
    while True:
        if not propagate():
            if not backtrack():
                return None
            continue
        decision = None
        for v in var_order:
            if value[v] == _UNASSIGNED:
                decision = v
                break
        if decision is None:
            return {v: value[v] for v in range(1, n_vars + 1)}
        lit = decision if phase[decision] else -decision
        marks.append((len(trail), lit, False))
        enqueue(lit)

# ---------------------------------------------------------------------------
# Justification
# ---------------------------------------------------------------------------


def justify(
    netlist: Netlist,
    cond: TriggerCondition,
    timeout_s: float = 10.0,
    dump_path: str | None = None,
) -> Justification:
    """Decide whether the condition nets can simultaneously hold their
    required values under the full-scan assumption (flip-flop outputs are
    free variables). A timeout conservatively reports unsatisfiable."""
    for net, _ in cond.assignments:
        if net not in netlist.nets:
            raise NetlistError(f"condition net {net!r} not in netlist")
    targets = cond.nets()
    clauses, varmap, free, n_vars = encode_cone(netlist, targets)
    full = list(clauses)
    for net, val in cond.assignments:
        v = varmap[net]
        full.append((v,) if val else (-v,))
    if dump_path:
        names = [f"{net} = var {v}" for net, v in sorted(varmap.items())]
        write_dimacs(full, n_vars, dump_path, comments=names)
    try:
        model = solve_cnf(full, n_vars, timeout_s)
    except SolverTimeout:
        return Justification(False, None, timed_out=True)
    if model is None:
        return Justification(False, None)

    witness = {
        name: 0
        for name in netlist.source_nets()
        if not netlist.nets[name].is_const
    }
    for net in free:
        witness[net] = model[varmap[net]]
    replay = evaluate_assignment(netlist, witness)
    for net, val in cond.assignments:
        if replay[net] != val:
            raise AssertionError(f"witness replay failed on {net!r}")
    return Justification(True, witness)


# ---------------------------------------------------------------------------
# Structural legality
# ---------------------------------------------------------------------------


def check_no_comb_loop(
    netlist: Netlist, triggers: set[str] | list[str], payload: str, order: TopoOrder
) -> bool:
    """True iff the payload sits strictly above every trigger in the
    topological order, re-verified by forward reachability (splicing the
    payload output into any trigger's fanin cone would close a loop)."""
    max_trigger = max(order.level(t) for t in triggers)
    if order.level(payload) <= max_trigger:
        return False
    trigger_set = set(triggers)
    seen = {payload}
    stack = [payload]
    while stack:
        net = stack.pop()
        for cname, _ in netlist.data_fanouts(net):
            cell = netlist.cells[cname]
            if cell.kind_def().is_sequential:
                continue
            out = cell.output_net()
            if out in trigger_set:
                return False
            if out not in seen:
                seen.add(out)
                stack.append(out)
    return True


# ---------------------------------------------------------------------------
# End-to-end insertion check
# ---------------------------------------------------------------------------


@dataclass
class InsertionCheck:
    interface_ok: bool
    dormant_cycles: int
    dormant_mismatches: int
    activation_witnessed: bool
    witness: dict[str, int] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def dormant_pass_rate(self) -> float:
        if self.dormant_cycles == 0:
            return 1.0
        return 1.0 - self.dormant_mismatches / self.dormant_cycles

    @property
    def passed(self) -> bool:
        return (
            self.interface_ok
            and self.dormant_mismatches == 0
            and self.activation_witnessed
        )


def verify_inserted(
    original: Netlist,
    trojaned: Netlist,
    cond: TriggerCondition,
    vectors: int = 10000,
    seed: int = 0,
    witness: dict[str, int] | None = None,
) -> InsertionCheck:
    if (
        original.primary_inputs != trojaned.primary_inputs
        or original.primary_outputs != trojaned.primary_outputs
    ):
        raise InterfaceMismatch("primary input/output interfaces differ")

    new_dffs = frozenset(
        c.name for c in trojaned.dff_cells() if c.name not in original.cells
    )
    words_o = simulate_words(original, vectors, seed)
    words_t = simulate_words(trojaned, vectors, seed, closed_dffs=new_dffs)

    nw = len(next(iter(words_o.values()))) if words_o else 0
    satisfied = np.full(nw, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    for net, val in cond.assignments:
        w = words_t[net]
        satisfied &= w if val else ~w
    mismatch = np.zeros(nw, dtype=np.uint64)
    for po in original.primary_outputs:
        mismatch |= words_o[po] ^ words_t[po]
    sat_count = count_ones(satisfied, vectors)
    dormant_cycles = vectors - sat_count
    dormant_mismatches = count_ones(mismatch & ~satisfied, vectors)

    notes = []
    if witness is None:
        just = justify(original, cond)
        if not just.satisfiable:
            notes.append("trigger condition unsatisfiable (dead)")
            return InsertionCheck(True, dormant_cycles, dormant_mismatches, False, None, notes)
        witness = just.witness

    hold = 1 if not new_dffs else 8
    held = {
        name: np.full(1, 0xFFFFFFFFFFFFFFFF if witness.get(name, 0) else 0, dtype=np.uint64)
        for name in original.source_nets()
        if not original.nets[name].is_const
    }
    act_o = simulate_words(original, hold, seed, overrides=held)
    act_t = simulate_words(trojaned, hold, seed, overrides=held, closed_dffs=new_dffs)
    activated = any(
        count_ones(act_o[po] ^ act_t[po], hold) > 0 for po in original.primary_outputs
    )
    return InsertionCheck(True, dormant_cycles, dormant_mismatches, activated, witness, notes)

"""Hypergraph IR for flattened gate-level netlists.

A netlist is a set of cell instances connected by named nets. Every net has
exactly one driver (a cell output pin, a primary input, or a constant) and
any number of sink pins. Analyses run on the full-scan view of the graph:
flip-flop outputs are treated as pseudo primary inputs and flip-flop data
inputs as pseudo primary outputs, which makes the combinational view acyclic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    CombinationalCycle,
    MissingClock,
    MultipleDrivers,
    NameCollision,
    UndrivenNet,
    UnsupportedCell,
)

# ---------------------------------------------------------------------------
# Cell library
# ---------------------------------------------------------------------------

MAX_ARITY = 8

CONST0 = "1'b0"
CONST1 = "1'b1"

_INPUT_LETTERS = "ABCDEFGH"


@dataclass(frozen=True)
class CellKind:
    """One gate family member (e.g. NAND3) with fixed port names."""

    name: str
    family: str               # NOT, BUF, AND, NAND, OR, NOR, XOR, XNOR, MUX2, DFF
    inputs: tuple[str, ...]   # input port names in positional order
    output: str               # single output port name

    @property
    def arity(self) -> int:
        return len(self.inputs)

    @property
    def is_sequential(self) -> bool:
        return self.family == "DFF"


def _build_library() -> dict[str, CellKind]:
    lib: dict[str, CellKind] = {}
    lib["NOT"] = CellKind("NOT", "NOT", ("A",), "Y")
    lib["BUF"] = CellKind("BUF", "BUF", ("A",), "Y")
    for family in ("AND", "NAND", "OR", "NOR", "XOR", "XNOR"):
        for k in range(2, MAX_ARITY + 1):
            name = f"{family}{k}"
            lib[name] = CellKind(name, family, tuple(_INPUT_LETTERS[:k]), "Y")
    lib["MUX2"] = CellKind("MUX2", "MUX2", ("A", "B", "S"), "Y")
    # RSTN is optional on instances; active-low synchronous clear.
    lib["DFF"] = CellKind("DFF", "DFF", ("D", "CLK", "RSTN"), "Q")
    return lib


CELL_KINDS: dict[str, CellKind] = _build_library()


def get_kind(name: str) -> CellKind:
    kind = CELL_KINDS.get(name.upper())
    if kind is None:
        raise UnsupportedCell(f"unknown cell kind {name!r}")
    return kind


def eval_kind(family: str, bits: list[int]) -> int:
    """Evaluate one combinational gate on scalar 0/1 inputs."""
    if family == "NOT":
        return bits[0] ^ 1
    if family == "BUF":
        return bits[0]
    if family == "AND":
        return int(all(bits))
    if family == "NAND":
        return int(not all(bits))
    if family == "OR":
        return int(any(bits))
    if family == "NOR":
        return int(not any(bits))
    if family == "XOR":
        acc = 0
        for b in bits:
            acc ^= b
        return acc
    if family == "XNOR":
        acc = 1
        for b in bits:
            acc ^= b
        return acc
    if family == "MUX2":
        a, b, s = bits
        return b if s else a
    raise UnsupportedCell(f"cannot evaluate family {family!r}")


def truth_table(kind: CellKind) -> tuple[int, ...]:
    """Output column over all input assignments; bit j of the row index is
    the value of input port j. Combinational kinds only."""
    if kind.is_sequential:
        from .errors import SequentialCell

        raise SequentialCell(f"{kind.name} has no truth table")
    rows = []
    for idx in range(1 << kind.arity):
        bits = [(idx >> j) & 1 for j in range(kind.arity)]
        rows.append(eval_kind(kind.family, bits))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Netlist structure
# ---------------------------------------------------------------------------

# driver encodings
DRIVER_PI = ("pi",)


@dataclass
class Cell:
    name: str
    kind: str
    pins: dict[str, str]  # port -> net

    def kind_def(self) -> CellKind:
        return CELL_KINDS[self.kind]

    def input_nets(self) -> list[str]:
        kd = self.kind_def()
        return [self.pins[p] for p in kd.inputs if p in self.pins]

    def output_net(self) -> str:
        return self.pins[self.kind_def().output]


@dataclass
class Net:
    name: str
    driver: tuple  # ("cell", cell_name, port) | ("pi",) | ("const", 0|1)
    fanouts: list[tuple[str, str]] = field(default_factory=list)

    @property
    def is_const(self) -> bool:
        return self.driver[0] == "const"

    @property
    def is_pi(self) -> bool:
        return self.driver[0] == "pi"


class Netlist:
    """Flattened single-module netlist. Treat instances as immutable after
    construction; transformations return new Netlist values."""

    def __init__(
        self,
        name: str,
        primary_inputs: list[str],
        primary_outputs: list[str],
        cells: list[Cell],
        clock_net: str | None = None,
        reset_net: str | None = None,
    ):
        self.name = name
        self.primary_inputs = list(primary_inputs)
        self.primary_outputs = list(primary_outputs)
        self.cells: dict[str, Cell] = {}
        self.nets: dict[str, Net] = {}
        self.clock_net = clock_net
        self.reset_net = reset_net

        for pi in self.primary_inputs:
            self._add_net(pi, DRIVER_PI)
        for cell in cells:
            if cell.name in self.cells:
                raise NameCollision(f"duplicate instance name {cell.name!r}")
            kd = get_kind(cell.kind)
            cell.kind = kd.name
            legal_ports = set(kd.inputs) | {kd.output}
            bad = sorted(set(cell.pins) - legal_ports)
            if bad:
                raise UnsupportedCell(f"cell {cell.name!r} ({kd.name}) has no port {bad[0]!r}")
            self.cells[cell.name] = cell
            out = cell.pins.get(kd.output)
            if out is None:
                raise UndrivenNet(f"cell {cell.name!r} leaves output {kd.output} unconnected")
            self._add_net(out, ("cell", cell.name, kd.output))
        # constants and sink registration after all drivers exist
        for cell in cells:
            kd = cell.kind_def()
            for port in kd.inputs:
                net = cell.pins.get(port)
                if net is None:
                    if kd.name == "DFF" and port == "RSTN":
                        continue  # optional pin
                    raise UndrivenNet(f"cell {cell.name!r} input {port} unconnected")
                if net in (CONST0, CONST1):
                    if net not in self.nets:
                        self._add_net(net, ("const", 1 if net == CONST1 else 0))
                elif net not in self.nets:
                    raise UndrivenNet(f"net {net!r} (input of {cell.name!r}) has no driver")
                self.nets[net].fanouts.append((cell.name, port))
        for po in self.primary_outputs:
            if po not in self.nets:
                raise UndrivenNet(f"primary output {po!r} has no driver")
        self.check_acyclic()

    def _add_net(self, name: str, driver: tuple) -> None:
        existing = self.nets.get(name)
        if existing is not None:
            raise MultipleDrivers(f"net {name!r} driven by {existing.driver} and {driver}")
        self.nets[name] = Net(name, driver)

    # -- scan-cut view ----------------------------------------------------

    def comb_cells(self) -> list[Cell]:
        return [c for c in self.cells.values() if not c.kind_def().is_sequential]

    def dff_cells(self) -> list[Cell]:
        return [c for c in self.cells.values() if c.kind_def().is_sequential]

    def source_nets(self) -> list[str]:
        """Nets with no combinational driver: PIs, flip-flop outputs, constants."""
        out = []
        for net in self.nets.values():
            if net.is_pi or net.is_const:
                out.append(net.name)
            elif net.driver[0] == "cell" and self.cells[net.driver[1]].kind_def().is_sequential:
                out.append(net.name)
        return out

    def comb_driver(self, net: str) -> Cell | None:
        """Driving cell if it is combinational, else None (scan-cut source)."""
        drv = self.nets[net].driver
        if drv[0] != "cell":
            return None
        cell = self.cells[drv[1]]
        return None if cell.kind_def().is_sequential else cell

    def data_fanouts(self, net: str) -> list[tuple[str, str]]:
        """Sink pins excluding DFF clock/reset pins."""
        return [
            (c, p)
            for (c, p) in self.nets[net].fanouts
            if not (self.cells[c].kind == "DFF" and p in ("CLK", "RSTN"))
        ]

    def check_acyclic(self) -> None:
        topo_sort(self)

    def copy(self) -> "Netlist":
        cells = [Cell(c.name, c.kind, dict(c.pins)) for c in self.cells.values()]
        return Netlist(
            self.name,
            self.primary_inputs,
            self.primary_outputs,
            cells,
            clock_net=self.clock_net,
            reset_net=self.reset_net,
        )

    def stats(self) -> dict:
        return {
            "cells": len(self.cells),
            "nets": len(self.nets),
            "primary_inputs": len(self.primary_inputs),
            "primary_outputs": len(self.primary_outputs),
            "dffs": len(self.dff_cells()),
        }


def isomorphic(a: Netlist, b: Netlist) -> bool:
    """Name-preserving structural equality (declaration order ignored)."""
    if set(a.cells) != set(b.cells):
        return False
    for name, cell in a.cells.items():
        other = b.cells[name]
        if cell.kind != other.kind or cell.pins != other.pins:
            return False
    if a.primary_inputs != b.primary_inputs or a.primary_outputs != b.primary_outputs:
        return False
    return set(a.nets) == set(b.nets)


# ---------------------------------------------------------------------------
# Topological order
# ---------------------------------------------------------------------------


@dataclass
class TopoOrder:
    """Longest-path level per net in the scan-cut DAG. Sources sit at 0 and
    every combinational gate output sits strictly above all of its inputs."""

    order_index: dict[str, int]

    def level(self, net: str) -> int:
        return self.order_index[net]

    def nets_by_level(self) -> list[str]:
        return sorted(self.order_index, key=lambda n: (self.order_index[n], n))


def topo_sort(netlist: Netlist) -> TopoOrder:
    order: dict[str, int] = {}
    # Kahn over combinational cells; a cell is ready when all inputs are leveled.
    pending: dict[str, int] = {}
    ready: list[Cell] = []
    for net in netlist.nets.values():
        cell = netlist.comb_driver(net.name)
        if cell is None:
            order[net.name] = 0
    for cell in netlist.comb_cells():
        missing = sum(1 for n in cell.input_nets() if n not in order)
        if missing == 0:
            ready.append(cell)
        else:
            pending[cell.name] = missing
    # index nets -> waiting cells once
    waiting: dict[str, list[str]] = {}
    for cell in netlist.comb_cells():
        for n in cell.input_nets():
            waiting.setdefault(n, []).append(cell.name)
    done = 0
    total = len(netlist.comb_cells())
    while ready:
        cell = ready.pop()
        done += 1
        out = cell.output_net()
        order[out] = 1 + max(order[n] for n in cell.input_nets())
        for cname in waiting.get(out, ()):
            pending[cname] -= 1
            if pending[cname] == 0:
                ready.append(netlist.cells[cname])
    if done != total:
        stuck = sorted(name for name, k in pending.items() if k > 0)
        raise CombinationalCycle(f"combinational cycle through cells {stuck[:8]}")
    return TopoOrder(order)


def eval_order(netlist: Netlist, order: TopoOrder | None = None) -> list[Cell]:
    """Combinational cells in a dependency-respecting, name-stable order."""
    if order is None:
        order = topo_sort(netlist)
    return sorted(
        netlist.comb_cells(),
        key=lambda c: (order.order_index[c.output_net()], c.name),
    )


# ---------------------------------------------------------------------------
# Clock identification
# ---------------------------------------------------------------------------


def infer_clock(netlist: Netlist) -> str | None:
    """Net feeding the most DFF CLK pins; ties broken lexicographically."""
    counts: dict[str, int] = {}
    for cell in netlist.dff_cells():
        clk = cell.pins.get("CLK")
        if clk is not None:
            counts[clk] = counts.get(clk, 0) + 1
    if not counts:
        return None
    return min(counts, key=lambda n: (-counts[n], n))


# ---------------------------------------------------------------------------
# Subcircuit splicing
# ---------------------------------------------------------------------------


def splice_subcircuit(
    host: Netlist,
    sub: Netlist,
    port_binding: dict[str, str],
    payload_in: str,
    payload_out: str,
    prefix: str = "troj_",
) -> Netlist:
    """Graft `sub` into `host`.

    `port_binding` maps every `sub` primary input except `payload_in` to an
    existing host net (trigger taps, clock, reset). The host net bound to
    `payload_out` is rewired: its original driver moves onto a fresh internal
    net that feeds `payload_in`, and the sub cell driving `payload_out` takes
    over the original net name, so all downstream fanout sees the modified
    signal. Instance and internal net names from `sub` get `prefix` prepended.
    """
    victim = port_binding[payload_out]
    if victim not in host.nets:
        raise UndrivenNet(f"payload net {victim!r} not in host")
    victim_driver = host.nets[victim].driver
    if victim_driver[0] != "cell":
        raise UndrivenNet(f"payload net {victim!r} must be driven by a cell")

    for port in sub.primary_inputs:
        if port == payload_in:
            continue
        bound = port_binding.get(port)
        if bound is None:
            clocked = any(c.pins.get("CLK") == port for c in sub.dff_cells())
            if clocked:
                raise MissingClock(f"sequential template port {port!r} is unbound")
            raise UndrivenNet(f"template port {port!r} is unbound")
        if bound not in host.nets:
            raise UndrivenNet(f"bound net {bound!r} not in host")

    feed = f"{prefix}payload_feed"
    net_map: dict[str, str] = {payload_in: feed, payload_out: victim}
    for port, bound in port_binding.items():
        if port != payload_out:
            net_map[port] = bound
    fresh = [feed]
    for net in sub.nets:
        if net in net_map:
            continue
        if net in (CONST0, CONST1):
            net_map[net] = net
        else:
            net_map[net] = prefix + net
            fresh.append(prefix + net)

    collisions = sorted(n for n in fresh if n in host.nets)
    if collisions:
        raise NameCollision(f"prefix {prefix!r} collides on nets {collisions[:4]}")

    cells: list[Cell] = []
    for cell in host.cells.values():
        pins = dict(cell.pins)
        if cell.name == victim_driver[1]:
            pins[victim_driver[2]] = feed
        cells.append(Cell(cell.name, cell.kind, pins))
    for cell in sub.cells.values():
        new_name = prefix + cell.name
        if new_name in host.cells:
            raise NameCollision(f"prefix {prefix!r} collides on instance {new_name!r}")
        pins = {port: net_map[net] for port, net in cell.pins.items()}
        cells.append(Cell(new_name, cell.kind, pins))

    return Netlist(
        host.name,
        host.primary_inputs,
        host.primary_outputs,
        cells,
        clock_net=host.clock_net,
        reset_net=host.reset_net,
    )

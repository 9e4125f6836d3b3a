"""Reader and writer for the supported structural Verilog subset.

Supported: one flattened module; `input`/`output`/`wire` scalar declarations;
instances of the fixed cell library with named (`.A(n1)`) or positional port
connections; `1'b0`/`1'b1` tie constants; line and block comments. Positional
connections follow the library port order with the output first (e.g.
`AND2 u1 (y, a, b);`, `DFF r1 (q, d, clk);`).

Not supported: vectors, hierarchy, behavioral constructs, `assign`.
"""

from __future__ import annotations

import re

from .errors import NetlistError, UndeclaredNet, UnsupportedCell
from .netlist import CELL_KINDS, CONST0, CONST1, Cell, Netlist, get_kind

_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.DOTALL)
_MODULE_RE = re.compile(r"module\s+(\w+)\s*\((.*?)\)\s*;", re.DOTALL)
_NAMED_PIN_RE = re.compile(r"\.(\w+)\s*\(\s*([\w'\.]+)\s*\)")
_IDENT_RE = re.compile(r"[A-Za-z_][\w$]*$")

_CONSTS = (CONST0, CONST1)


def _check_name(name: str, what: str) -> str:
    if name in _CONSTS:
        return name
    if not _IDENT_RE.match(name):
        raise NetlistError(f"bad {what} name {name!r}")
    return name


def parse_netlist(text: str) -> Netlist:
    """Parse structural Verilog source into a Netlist."""
    if "[" in _COMMENT_RE.sub("", text):
        raise NetlistError("vector ports/nets are not supported; flatten to scalars first")
    src = _COMMENT_RE.sub(" ", text)
    m = _MODULE_RE.search(src)
    if m is None:
        raise NetlistError("no module declaration found")
    name = m.group(1)
    body = src[m.end():]
    end = body.find("endmodule")
    if end < 0:
        raise NetlistError("missing endmodule")
    body = body[:end]

    inputs: list[str] = []
    outputs: list[str] = []
    declared: set[str] = set(_CONSTS)
    cells: list[Cell] = []

    for raw in body.split(";"):
        stmt = raw.strip()
        if not stmt:
            continue
        head = stmt.split(None, 1)[0]
        if head in ("input", "output", "wire"):
            names = [n.strip() for n in stmt[len(head):].split(",") if n.strip()]
            for n in names:
                _check_name(n, head)
            if head == "input":
                inputs.extend(names)
            elif head == "output":
                outputs.extend(names)
            declared.update(names)
        else:
            cells.append(_parse_instance(stmt, declared))

    return Netlist(name, inputs, outputs, cells)


def _parse_instance(stmt: str, declared: set[str]) -> Cell:
    m = re.match(r"(\w+)\s+([\w$]+)\s*\((.*)\)\s*$", stmt, re.DOTALL)
    if m is None:
        raise NetlistError(f"cannot parse statement {stmt[:60]!r}")
    kind_name, inst, conns = m.groups()
    kind = get_kind(kind_name)

    pins: dict[str, str] = {}
    if "." in conns:
        for pm in _NAMED_PIN_RE.finditer(conns):
            port, net = pm.group(1), pm.group(2)
            if port in pins:
                raise NetlistError(f"port {port!r} connected twice on {inst!r}")
            pins[port] = net
    else:
        nets = [n.strip() for n in conns.split(",") if n.strip()]
        order = (kind.output,) + kind.inputs
        if len(nets) > len(order):
            raise UnsupportedCell(f"{kind.name} takes at most {len(order)} connections")
        for port, net in zip(order, nets):
            pins[port] = net

    for net in pins.values():
        if net not in declared:
            raise UndeclaredNet(f"net {net!r} on instance {inst!r} was never declared")
    return Cell(inst, kind.name, pins)


def emit_netlist(netlist: Netlist) -> str:
    """Write a Netlist back to structural Verilog. Round-trips through
    parse_netlist to a graph-isomorphic netlist with all names preserved."""
    ports = netlist.primary_inputs + [
        po for po in netlist.primary_outputs if po not in netlist.primary_inputs
    ]
    wires = sorted(
        n
        for n in netlist.nets
        if n not in netlist.primary_inputs
        and n not in netlist.primary_outputs
        and n not in _CONSTS
    )
    lines = [f"module {netlist.name} ({', '.join(ports)});"]
    if netlist.primary_inputs:
        lines.append(f"  input {', '.join(netlist.primary_inputs)};")
    if netlist.primary_outputs:
        lines.append(f"  output {', '.join(netlist.primary_outputs)};")
    for w in wires:
        lines.append(f"  wire {w};")
    for cell in netlist.cells.values():
        kd = CELL_KINDS[cell.kind]
        conns = [f".{kd.output}({cell.pins[kd.output]})"]
        for port in kd.inputs:
            if port in cell.pins:
                conns.append(f".{port}({cell.pins[port]})")
        lines.append(f"  {cell.kind} {cell.name} ({', '.join(conns)});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def write_edge_list(netlist: Netlist) -> str:
    """Plain-text debug dump: one `driver -> net -> sink.pin` line per edge."""
    out = []
    for net in netlist.nets.values():
        drv = net.driver
        if drv[0] == "pi":
            src = "PI"
        elif drv[0] == "const":
            src = f"CONST{drv[1]}"
        else:
            src = f"{drv[1]}.{drv[2]}"
        if not net.fanouts:
            out.append(f"{src} -> {net.name} ->")
        for cell, port in net.fanouts:
            out.append(f"{src} -> {net.name} -> {cell}.{port}")
    return "\n".join(sorted(out)) + "\n"

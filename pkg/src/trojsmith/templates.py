"""Shipped denial-of-service Trojan templates and the sidecar file format.

Each template is a small netlist with labeled roles: `trigger_ports` feed a
reduction tree whose output (`final_trigger_net`) fires exactly when every
tapped host net sits at its required rare value; the payload is an XOR
splice that inverts the victim net while the control wire is high. The two
sequential templates gate a 2-bit state machine with the trigger tree and
fire only after consecutive armed cycles; a missed cycle clears the state,
so accidental arming decays instead of accumulating.

Template bodies are materialized per insertion: trigger inputs whose
required host value is 0 get an inverter stage, which keeps one canonical
shape per template while matching arbitrary rare-value polarities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NetlistError
from .netlist import Cell, Netlist


@dataclass
class TrojanTemplate:
    template_id: str
    body: Netlist
    trigger_ports: list[str]
    final_trigger_net: str
    payload_in: str
    payload_out: str
    clock_port: str | None
    reset_port: str | None
    kind: str  # "combinational" | "sequential"

    def __post_init__(self):
        if self.kind not in ("combinational", "sequential"):
            raise NetlistError(f"bad template kind {self.kind!r}")
        has_dff = bool(self.body.dff_cells())
        if has_dff != (self.kind == "sequential"):
            raise NetlistError("template kind does not match body contents")
        if self.final_trigger_net not in self.body.nets:
            raise NetlistError(f"final trigger net {self.final_trigger_net!r} missing")
        for port in self.trigger_ports + [self.payload_in]:
            if port not in self.body.primary_inputs:
                raise NetlistError(f"template port {port!r} is not an input")
        if self.payload_out not in self.body.primary_outputs:
            raise NetlistError(f"payload output {self.payload_out!r} is not an output")

    @property
    def r(self) -> int:
        return len(self.trigger_ports)


def _and_tree(cells: list[Cell], leaves: list[str], prefix: str) -> str:
    """Reduce nets with 2/3-input ANDs; returns the root net."""
    level = list(leaves)
    stage = 0
    while len(level) > 1:
        nxt = []
        i = 0
        while i < len(level):
            chunk = level[i : i + 3] if len(level) - i == 3 else level[i : i + 2]
            i += len(chunk)
            if len(chunk) == 1:
                nxt.append(chunk[0])
                continue
            out = f"{prefix}t{stage}"
            stage += 1
            kind = "AND3" if len(chunk) == 3 else "AND2"
            pins = {"Y": out, "A": chunk[0], "B": chunk[1]}
            if len(chunk) == 3:
                pins["C"] = chunk[2]
            cells.append(Cell(f"{prefix}u{stage}", kind, pins))
            nxt.append(out)
        level = nxt
    return level[0]


def _comb_body(template_id: str, r: int, cascade: bool) -> Netlist:
    ports = [f"tg{i}" for i in range(r)]
    cells: list[Cell] = []
    if cascade:
        # left-deep chain
        acc = ports[0]
        for i, nxt in enumerate(ports[1:]):
            out = f"c{i}"
            cells.append(Cell(f"ch{i}", "AND2", {"Y": out, "A": acc, "B": nxt}))
            acc = out
        cells.append(Cell("ubuf", "BUF", {"Y": "ft", "A": acc}))
    else:
        root = _and_tree(cells, ports, "b")
        cells.append(Cell("ubuf", "BUF", {"Y": "ft", "A": root}))
    cells.append(Cell("upay", "XOR2", {"Y": "pout", "A": "pin", "B": "ft"}))
    return Netlist(template_id, ports + ["pin"], ["pout"], cells)


def _seq_body(template_id: str, r: int, fsm: bool) -> Netlist:
    ports = [f"tg{i}" for i in range(r)]
    cells: list[Cell] = []
    root = _and_tree(cells, ports, "b")
    cells.append(Cell("ubuf", "BUF", {"Y": "ft", "A": root}))
    if fsm:
        # armed sequence 00 -> 01 -> 11 (absorbing while enabled)
        cells.append(Cell("un1", "NOT", {"Y": "ns1", "A": "s1"}))
        cells.append(Cell("uo0", "OR2", {"Y": "or0", "A": "ns1", "B": "s0"}))
        cells.append(Cell("ud0", "AND2", {"Y": "d0", "A": "ft", "B": "or0"}))
        cells.append(Cell("ud1", "AND2", {"Y": "d1", "A": "ft", "B": "s0"}))
        cells.append(Cell("uact", "AND2", {"Y": "act", "A": "s1", "B": "s0"}))
    else:
        # 2-bit counter with terminal count 11
        cells.append(Cell("un0", "NOT", {"Y": "nq0", "A": "s0"}))
        cells.append(Cell("ud0", "AND2", {"Y": "d0", "A": "ft", "B": "nq0"}))
        cells.append(Cell("ux", "XOR2", {"Y": "x10", "A": "s1", "B": "s0"}))
        cells.append(Cell("ud1", "AND2", {"Y": "d1", "A": "ft", "B": "x10"}))
        cells.append(Cell("uact", "AND2", {"Y": "act", "A": "s1", "B": "s0"}))
    cells.append(Cell("uff0", "DFF", {"Q": "s0", "D": "d0", "CLK": "ck"}))
    cells.append(Cell("uff1", "DFF", {"Q": "s1", "D": "d1", "CLK": "ck"}))
    cells.append(Cell("upay", "XOR2", {"Y": "pout", "A": "pin", "B": "act"}))
    return Netlist(template_id, ports + ["pin", "ck"], ["pout"], cells)


_SHAPES = {
    "c1": {"r": 6, "kind": "combinational", "cascade": False},
    "c2": {"r": 5, "kind": "combinational", "cascade": True},
    "s1": {"r": 5, "kind": "sequential", "fsm": True},
    "s2": {"r": 4, "kind": "sequential", "fsm": False},
}

TEMPLATE_IDS = tuple(_SHAPES)


def template_arity(template_id: str) -> int:
    return _SHAPES[template_id]["r"]


def template_kind(template_id: str) -> str:
    return _SHAPES[template_id]["kind"]


def build_template(template_id: str, polarities: list[int] | None = None) -> TrojanTemplate:
    """Canonical shipped template; optional `polarities` (required host value
    per trigger port) routes through `materialize`."""
    if template_id not in _SHAPES:
        raise NetlistError(f"unknown template {template_id!r}; shipped: {TEMPLATE_IDS}")
    shape = _SHAPES[template_id]
    r = shape["r"]
    if shape["kind"] == "combinational":
        body = _comb_body(template_id, r, shape["cascade"])
        clock = None
    else:
        body = _seq_body(template_id, r, shape["fsm"])
        clock = "ck"
    t = TrojanTemplate(
        template_id=template_id,
        body=body,
        trigger_ports=[f"tg{i}" for i in range(r)],
        final_trigger_net="ft",
        payload_in="pin",
        payload_out="pout",
        clock_port=clock,
        reset_port=None,
        kind=shape["kind"],
    )
    if polarities is not None:
        t = materialize(t, polarities)
    return t


def materialize(t: TrojanTemplate, polarities: list[int]) -> TrojanTemplate:
    """Adapt a canonical template to the required trigger values: ports that
    must see a host 0 get an inverter stage, so the trigger tree still fires
    on all-rare values. All-1 polarity returns the template unchanged."""
    if len(polarities) != t.r:
        raise NetlistError(f"{t.template_id} takes {t.r} trigger polarities")
    if all(v == 1 for v in polarities):
        return t
    remap = {}
    extra: list[Cell] = []
    for i, (port, val) in enumerate(zip(t.trigger_ports, polarities)):
        if val == 0:
            inv_net = f"pol{i}"
            if inv_net in t.body.nets:
                raise NetlistError(f"polarity net {inv_net!r} collides with template body")
            extra.append(Cell(f"upol{i}", "NOT", {"Y": inv_net, "A": port}))
            remap[port] = inv_net
    cells = list(extra)
    for cell in t.body.cells.values():
        kd = cell.kind_def()
        pins = {}
        for port, net in cell.pins.items():
            pins[port] = remap.get(net, net) if port != kd.output else net
        cells.append(Cell(cell.name, cell.kind, pins))
    body = Netlist(
        t.body.name, t.body.primary_inputs, t.body.primary_outputs, cells
    )
    return TrojanTemplate(
        t.template_id, body, t.trigger_ports, t.final_trigger_net,
        t.payload_in, t.payload_out, t.clock_port, t.reset_port, t.kind,
    )


# ---------------------------------------------------------------------------
# User template files: Verilog body + JSON sidecar
# ---------------------------------------------------------------------------


def save_template(t: TrojanTemplate, verilog_path: str, sidecar_path: str) -> None:
    from .verilog import emit_netlist

    Path(verilog_path).write_text(emit_netlist(t.body))
    doc = {
        "template_id": t.template_id,
        "trigger_ports": t.trigger_ports,
        "final_trigger_net": t.final_trigger_net,
        "payload_in": t.payload_in,
        "payload_out": t.payload_out,
        "clock_port": t.clock_port,
        "reset_port": t.reset_port,
        "kind": t.kind,
    }
    Path(sidecar_path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_template(verilog_path: str, sidecar_path: str) -> TrojanTemplate:
    from .verilog import parse_netlist

    body = parse_netlist(Path(verilog_path).read_text())
    doc = json.loads(Path(sidecar_path).read_text())
    return TrojanTemplate(
        template_id=doc["template_id"],
        body=body,
        trigger_ports=list(doc["trigger_ports"]),
        final_trigger_net=doc["final_trigger_net"],
        payload_in=doc["payload_in"],
        payload_out=doc["payload_out"],
        clock_port=doc.get("clock_port"),
        reset_port=doc.get("reset_port"),
        kind=doc["kind"],
    )

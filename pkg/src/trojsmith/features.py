"""Per-net functional and structural features.

Fourteen features per net: signal probability and toggle rate from random
simulation, truth-table entropy of the driving gate, SCOAP controllability
and observability, four minimum-hop distances (primary input/output and
flip-flop data input/output, measured on the full-scan combinational view),
and four fan-structure counts (immediate and depth-2 pin counts).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SequentialCell
from .netlist import CELL_KINDS, CellKind, Netlist, topo_sort, truth_table
from .simulate import simulate

SCOAP_CAP = 10**6
UNREACHABLE = math.inf

FEATURE_NAMES = (
    "signal_probability",
    "toggle_rate",
    "entropy",
    "cc0",
    "cc1",
    "co",
    "dist_pi",
    "dist_po",
    "dist_ff_in",
    "dist_ff_out",
    "fanin_imm",
    "fanout_imm",
    "fanin_nbr",
    "fanout_nbr",
)

# the five behavior features of a Trojan's final trigger wire, as indices
# into FEATURE_NAMES: probability, activity, cc1, cc0, co
TROJAN_FEATURE_NAMES = ("probability", "activity", "cc1", "cc0", "co")
TROJAN_FEATURE_INDICES = (0, 1, 4, 3, 5)

FUNCTIONAL_FEATURE_INDICES = (0, 1, 2, 3, 4, 5)


@dataclass
class NetFeatureVector:
    signal_probability: float
    toggle_rate: float
    entropy: float
    cc0: float
    cc1: float
    co: float
    dist_pi: float
    dist_po: float
    dist_ff_in: float
    dist_ff_out: float
    fanin_imm: float
    fanout_imm: float
    fanin_nbr: float
    fanout_nbr: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=float)


@dataclass
class TrojanFeatureVector:
    probability: float
    activity: float
    cc1: float
    cc0: float
    co: float

    def as_array(self) -> np.ndarray:
        return np.array([self.probability, self.activity, self.cc1, self.cc0, self.co])

    @classmethod
    def from_net_features(cls, v: NetFeatureVector) -> "TrojanFeatureVector":
        return cls(v.signal_probability, v.toggle_rate, v.cc1, v.cc0, v.co)


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------


def entropy(kind: CellKind | str) -> float:
    """Balance of ones and zeros in the gate's truth table, in bits."""
    if isinstance(kind, str):
        kind = CELL_KINDS[kind.upper()]
    if kind.is_sequential:
        raise SequentialCell(f"{kind.name} has no truth table")
    table = truth_table(kind)
    p1 = sum(table) / len(table)
    p0 = 1.0 - p1
    e = 0.0
    for p in (p0, p1):
        if p > 0.0:
            e -= p * math.log2(p)
    return e


def _net_entropy(netlist: Netlist, net: str) -> float:
    """Driving-gate entropy; sources behave as balanced bits, ties as constants."""
    rec = netlist.nets[net]
    if rec.is_const:
        return 0.0
    if rec.is_pi:
        return 1.0
    cell = netlist.cells[rec.driver[1]]
    if cell.kind_def().is_sequential:
        return 1.0
    return entropy(cell.kind_def())


# ---------------------------------------------------------------------------
# SCOAP
# ---------------------------------------------------------------------------


def _cap(v: float) -> int:
    return int(min(v, SCOAP_CAP))


def _xor_parity_cost(ccs: list[tuple[int, int]], parity: int) -> int:
    """Min total controllability cost to set inputs to a given XOR parity."""
    best = {0: 0, 1: SCOAP_CAP * 100}
    for cc0, cc1 in ccs:
        best = {
            0: min(best[0] + cc0, best[1] + cc1),
            1: min(best[1] + cc0, best[0] + cc1),
        }
    return best[parity]


def _cc_gate(kind: CellKind, in_ccs: list[tuple[int, int]]) -> tuple[int, int]:
    fam = kind.family
    cc0s = [c[0] for c in in_ccs]
    cc1s = [c[1] for c in in_ccs]
    if fam == "NOT":
        return _cap(in_ccs[0][1] + 1), _cap(in_ccs[0][0] + 1)
    if fam == "BUF":
        return _cap(in_ccs[0][0] + 1), _cap(in_ccs[0][1] + 1)
    if fam == "AND":
        return _cap(min(cc0s) + 1), _cap(sum(cc1s) + 1)
    if fam == "NAND":
        return _cap(sum(cc1s) + 1), _cap(min(cc0s) + 1)
    if fam == "OR":
        return _cap(sum(cc0s) + 1), _cap(min(cc1s) + 1)
    if fam == "NOR":
        return _cap(min(cc1s) + 1), _cap(sum(cc0s) + 1)
    if fam == "XOR":
        return (
            _cap(_xor_parity_cost(in_ccs, 0) + 1),
            _cap(_xor_parity_cost(in_ccs, 1) + 1),
        )
    if fam == "XNOR":
        return (
            _cap(_xor_parity_cost(in_ccs, 1) + 1),
            _cap(_xor_parity_cost(in_ccs, 0) + 1),
        )
    if fam == "MUX2":
        (a0, a1), (b0, b1), (s0, s1) = in_ccs
        return (
            _cap(min(s0 + a0, s1 + b0) + 1),
            _cap(min(s0 + a1, s1 + b1) + 1),
        )
    raise AssertionError(fam)


def scoap(netlist: Netlist) -> dict[str, tuple[int, int, int]]:
    """SCOAP (cc0, cc1, co) per net under the full-scan assumption.

    Sources (PIs and flip-flop outputs) get cc0 = cc1 = 1. Primary outputs
    and flip-flop data inputs are observation points (co = 0); observability
    propagates backwards taking the minimum over fanout branches. Values cap
    at 10^6; unobservable nets sit at the cap.
    """
    order = topo_sort(netlist)
    cc: dict[str, tuple[int, int]] = {}
    for name in netlist.source_nets():
        rec = netlist.nets[name]
        if rec.is_const:
            cc[name] = (1, SCOAP_CAP) if rec.driver[1] == 0 else (SCOAP_CAP, 1)
        else:
            cc[name] = (1, 1)
    for net in order.nets_by_level():
        cell = netlist.comb_driver(net)
        if cell is not None:
            cc[net] = _cc_gate(cell.kind_def(), [cc[n] for n in cell.input_nets()])

    co: dict[str, int] = {n: SCOAP_CAP for n in netlist.nets}
    for po in netlist.primary_outputs:
        co[po] = 0
    for cell in netlist.dff_cells():
        d = cell.pins.get("D")
        if d is not None:
            co[d] = 0
    for net in reversed(order.nets_by_level()):
        best = co[net]
        for cname, port in netlist.data_fanouts(net):
            cell = netlist.cells[cname]
            kd = cell.kind_def()
            if kd.is_sequential:
                continue  # D handled above; CLK/RSTN filtered by data_fanouts
            out_co = co[cell.output_net()]
            if out_co >= SCOAP_CAP:
                continue
            others = [(p, cell.pins[p]) for p in kd.inputs if p != port]
            fam = kd.family
            if fam in ("NOT", "BUF"):
                cost = 0
            elif fam in ("AND", "NAND"):
                cost = sum(cc[n][1] for _, n in others)
            elif fam in ("OR", "NOR"):
                cost = sum(cc[n][0] for _, n in others)
            elif fam in ("XOR", "XNOR"):
                cost = sum(min(cc[n]) for _, n in others)
            elif fam == "MUX2":
                a, b, s = (cell.pins[p] for p in kd.inputs)
                if port == "A":
                    cost = cc[s][0]
                elif port == "B":
                    cost = cc[s][1]
                else:
                    cost = min(cc[a][0] + cc[b][1], cc[a][1] + cc[b][0])
            else:
                raise AssertionError(fam)
            best = min(best, _cap(out_co + cost + 1))
        co[net] = best

    return {n: (cc[n][0], cc[n][1], co[n]) for n in netlist.nets}

# ---------------------------------------------------------------------------
# Structural features
# ---------------------------------------------------------------------------


def structural_features(netlist: Netlist) -> dict[str, tuple]:
    """(dist_pi, dist_po, dist_ff_in, dist_ff_out, fanin_imm, fanout_imm,
    fanin_nbr, fanout_nbr) per net.

    Distances are minimum cell-hop counts on the scan-cut view (flip-flops
    block traversal; unreachable encodes as inf). Fan counts cross flip-flops
    structurally but never count clock/reset pins.
    """
    order = topo_sort(netlist)
    forward = order.nets_by_level()

    def forward_dist(is_source) -> dict[str, float]:
        dist = {}
        for net in forward:
            if is_source(net):
                dist[net] = 0.0
                continue
            cell = netlist.comb_driver(net)
            if cell is None:
                dist[net] = UNREACHABLE
            else:
                dist[net] = min((dist[n] for n in cell.input_nets()), default=UNREACHABLE) + 1

        return dist

    def backward_dist(is_sink) -> dict[str, float]:
        dist = {}
        for net in reversed(forward):
            best = 0.0 if is_sink(net) else UNREACHABLE
            for cname, _port in netlist.data_fanouts(net):
                cell = netlist.cells[cname]
                if cell.kind_def().is_sequential:
                    continue
                best = min(best, dist[cell.output_net()] + 1)
            dist[net] = best
        return dist

    pis = set(netlist.primary_inputs)
    ff_out = {c.output_net() for c in netlist.dff_cells()}
    pos = set(netlist.primary_outputs)
    ff_in = {c.pins["D"] for c in netlist.dff_cells() if "D" in c.pins}

    dist_pi = forward_dist(lambda n: n in pis)
    dist_ff_out = forward_dist(lambda n: n in ff_out)
    dist_po = backward_dist(lambda n: n in pos)
    dist_ff_in = backward_dist(lambda n: n in ff_in)

    def data_inputs(cell) -> list[str]:
        kd = cell.kind_def()
        if kd.is_sequential:
            return [cell.pins["D"]] if "D" in cell.pins else []
        return cell.input_nets()

    fanin_imm = {}
    fanout_imm = {}
    for net in netlist.nets.values():
        if net.driver[0] == "cell":
            fanin_imm[net.name] = len(data_inputs(netlist.cells[net.driver[1]]))
        else:
            fanin_imm[net.name] = 0
        fanout_imm[net.name] = len(netlist.data_fanouts(net.name))

    fanin_nbr = {}
    fanout_nbr = {}
    for net in netlist.nets.values():
        if net.driver[0] == "cell":
            fanin_nbr[net.name] = sum(
                fanin_imm[m] for m in data_inputs(netlist.cells[net.driver[1]])
            )
        else:
            fanin_nbr[net.name] = 0
        total = 0
        for cname, _port in netlist.data_fanouts(net.name):
            total += fanout_imm[netlist.cells[cname].output_net()]
        fanout_nbr[net.name] = total

    return {
        n: (
            dist_pi[n],
            dist_po[n],
            dist_ff_in[n],
            dist_ff_out[n],
            fanin_imm[n],
            fanout_imm[n],
            fanin_nbr[n],
            fanout_nbr[n],
        )
        for n in netlist.nets
    }


# ---------------------------------------------------------------------------
# Extraction driver
# ---------------------------------------------------------------------------


def extract_features(
    netlist: Netlist, vectors: int = 100000, seed: int = 0
) -> dict[str, NetFeatureVector]:
    sim = simulate(netlist, vectors, seed)
    sc = scoap(netlist)
    st = structural_features(netlist)
    out = {}
    for name in netlist.nets:
        prob, toggle = sim[name]
        cc0, cc1, co = sc[name]
        out[name] = NetFeatureVector(
            prob, toggle, _net_entropy(netlist, name), cc0, cc1, co, *st[name]
        )
    return out


# ---------------------------------------------------------------------------
# Min-max scaling
# ---------------------------------------------------------------------------


@dataclass
class Scaler:
    """Per-feature min-max bounds fitted on one design's nets. Infinite
    sentinels clamp to the observed finite maximum before fitting."""

    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, raw: np.ndarray) -> np.ndarray:
        raw = np.minimum(np.maximum(raw, self.mins), self.maxs)
        span = self.maxs - self.mins
        out = np.zeros(len(raw))
        nz = span > 0
        out[nz] = (raw[nz] - self.mins[nz]) / span[nz]
        return out

    def to_json(self) -> dict:
        return {"mins": [float(v) for v in self.mins], "maxs": [float(v) for v in self.maxs]}

    @classmethod
    def from_json(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mins"], dtype=float), np.array(d["maxs"], dtype=float))


@dataclass
class ScaledFeatures:
    values: np.ndarray
    scaler: Scaler


def fit_scaler(matrix: np.ndarray) -> Scaler:
    """Fit per-column min-max bounds; rows are net feature vectors."""
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError("need at least one feature vector")
    finite = np.where(np.isfinite(matrix), matrix, -np.inf)
    maxs = finite.max(axis=0)
    maxs = np.where(np.isfinite(maxs), maxs, 0.0)
    clamped = np.where(np.isfinite(matrix), matrix, maxs[None, :])
    return Scaler(clamped.min(axis=0), maxs)


def apply_scaler(scaler: Scaler, vector: NetFeatureVector | np.ndarray) -> ScaledFeatures:
    raw = vector.as_array() if isinstance(vector, NetFeatureVector) else np.asarray(vector, float)
    return ScaledFeatures(scaler.transform(raw), scaler)


def scale_design(
    features: dict[str, NetFeatureVector],
) -> tuple[Scaler, dict[str, ScaledFeatures]]:
    names = sorted(features)
    matrix = np.stack([features[n].as_array() for n in names])
    scaler = fit_scaler(matrix)
    return scaler, {n: ScaledFeatures(scaler.transform(features[n].as_array()), scaler) for n in names}


# ---------------------------------------------------------------------------
# Dumps
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6g}"


def write_features_csv(features: dict[str, NetFeatureVector], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("net",) + FEATURE_NAMES)
        for name in sorted(features):
            writer.writerow([name] + [_fmt(v) for v in features[name].as_array()])


def write_features_json(features: dict[str, NetFeatureVector], path: str) -> None:
    doc = {
        name: {f: (None if math.isinf(v) else round(float(v), 10)) for f, v in
               zip(FEATURE_NAMES, features[name].as_array())}
        for name in sorted(features)
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")

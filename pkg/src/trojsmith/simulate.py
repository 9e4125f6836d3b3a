"""Bit-parallel logic simulation on the full-scan view.

Net values across all simulated cycles are packed LSB-first into uint64
words, so one numpy op evaluates a gate for 64 cycles at once. Primary
inputs and flip-flop outputs are driven with independent uniform random
bits each cycle; every source net gets its own seeded stream keyed by
(seed, net name), which keeps runs reproducible and keeps streams aligned
across netlist variants that share net names.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .netlist import CONST0, CONST1, Netlist, eval_kind, eval_order, topo_sort

_U1 = np.uint64(1)
_U63 = np.uint64(63)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


def _n_words(nbits: int) -> int:
    return (nbits + 63) // 64


def _net_stream_seed(seed: int, name: str) -> list[int]:
    digest = hashlib.sha256(name.encode()).digest()
    return [seed & 0xFFFFFFFF, int.from_bytes(digest[:8], "little")]


def random_words(nbits: int, seed: int, name: str) -> np.ndarray:
    rng = np.random.default_rng(_net_stream_seed(seed, name))
    return rng.integers(0, _ALL, size=_n_words(nbits), dtype=np.uint64, endpoint=True)


def count_ones(words: np.ndarray, nbits: int) -> int:
    if nbits == 0:
        return 0
    full, rem = divmod(nbits, 64)
    total = int(np.bitwise_count(words[:full]).sum()) if full else 0
    if rem:
        tail = words[full] & ((_U1 << np.uint64(rem)) - _U1)
        total += int(np.bitwise_count(tail))
    return total


def count_transitions(words: np.ndarray, nbits: int) -> int:
    """Number of value changes between consecutive bit positions 0..nbits-1."""
    if nbits < 2:
        return 0
    carry = (np.roll(words, -1) & _U1) << _U63
    diff = words ^ ((words >> _U1) | carry)
    return count_ones(diff, nbits - 1)


def get_bit(words: np.ndarray, i: int) -> int:
    return int((words[i >> 6] >> np.uint64(i & 63)) & _U1)


def _unpack_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:nbits]


def _pack_bits(bits: np.ndarray, nbits: int) -> np.ndarray:
    padded = np.zeros(_n_words(nbits) * 64, dtype=np.uint8)
    padded[:nbits] = bits
    return np.packbits(padded, bitorder="little").view(np.uint64)


def _eval_cell_words(family: str, ins: list[np.ndarray]) -> np.ndarray:
    if family == "NOT":
        return ~ins[0]
    if family == "BUF":
        return ins[0].copy()
    if family in ("AND", "NAND"):
        acc = ins[0].copy()
        for w in ins[1:]:
            acc &= w
        return ~acc if family == "NAND" else acc
    if family in ("OR", "NOR"):
        acc = ins[0].copy()
        for w in ins[1:]:
            acc |= w
        return ~acc if family == "NOR" else acc
    if family in ("XOR", "XNOR"):
        acc = ins[0].copy()
        for w in ins[1:]:
            acc ^= w
        return ~acc if family == "XNOR" else acc
    if family == "MUX2":
        a, b, s = ins
        return (a & ~s) | (b & s)
    raise AssertionError(family)


def simulate_words(
    netlist: Netlist,
    vectors: int,
    seed: int,
    overrides: dict[str, np.ndarray] | None = None,
    closed_dffs: frozenset[str] | set[str] = frozenset(),
) -> dict[str, np.ndarray]:
    """Packed values for every net over `vectors` cycles.

    `overrides` pins given nets to supplied words (source or internal).
    `closed_dffs` names DFF cells simulated functionally (Q starts at 0 and
    follows D cycle by cycle) instead of being cut as scan sources; the
    host's other flip-flops stay scan-randomized.
    """
    nw = _n_words(vectors)
    overrides = overrides or {}
    order = topo_sort(netlist)
    cells = eval_order(netlist, order)

    closed_q = {netlist.cells[c].output_net(): c for c in closed_dffs}

    values: dict[str, np.ndarray] = {}
    for name in netlist.source_nets():
        if name in overrides:
            values[name] = overrides[name]
        elif name in closed_q:
            values[name] = np.zeros(nw, dtype=np.uint64)  # corrected below
        elif netlist.nets[name].is_const:
            bit = netlist.nets[name].driver[1]
            values[name] = np.full(nw, _ALL if bit else 0, dtype=np.uint64)
        else:
            values[name] = random_words(vectors, seed, name)

    def sweep() -> None:
        for cell in cells:
            out = cell.output_net()
            if out in overrides:
                values[out] = overrides[out]
            else:
                ins = [values[n] for n in cell.input_nets()]
                values[out] = _eval_cell_words(cell.kind_def().family, ins)

    sweep()

    if closed_dffs:
        _replay_closed_state(netlist, order, values, vectors, closed_dffs)
        sweep()
    return values


def _replay_closed_state(netlist, order, values, vectors, closed_dffs):
    """Serial per-cycle update of functionally simulated flip-flops.

    Only the nets between the closed Q outputs and the closed D/RSTN inputs
    are re-evaluated per cycle; everything outside that cone already holds
    correct bit-parallel values.
    """
    downstream: set[str] = set()
    frontier = [netlist.cells[c].output_net() for c in closed_dffs]
    downstream.update(frontier)
    while frontier:
        net = frontier.pop()
        for cname, _port in netlist.data_fanouts(net):
            cell = netlist.cells[cname]
            if cell.kind_def().is_sequential:
                continue
            out = cell.output_net()
            if out not in downstream:
                downstream.add(out)
                frontier.append(out)

    serial_cells = sorted(
        (c for c in netlist.comb_cells() if c.output_net() in downstream),
        key=lambda c: (order.order_index[c.output_net()], c.name),
    )
    regs = sorted(closed_dffs)
    q_nets = [netlist.cells[c].output_net() for c in regs]

    ext_nets: set[str] = set()
    for cell in serial_cells:
        ext_nets.update(n for n in cell.input_nets() if n not in downstream)
    for cname in regs:
        cell = netlist.cells[cname]
        for pin in ("D", "RSTN"):
            n = cell.pins.get(pin)
            if n is not None and n not in downstream:
                ext_nets.add(n)
    ext = {n: _unpack_bits(values[n], vectors) for n in ext_nets}

    state = {q: 0 for q in q_nets}
    q_bits = {q: np.zeros(vectors, dtype=np.uint8) for q in q_nets}
    local: dict[str, int] = {}
    for t in range(vectors):
        local.clear()
        for q, v in state.items():
            q_bits[q][t] = v
            local[q] = v
        for cell in serial_cells:
            bits = [
                local[n] if n in local else int(ext[n][t])
                for n in cell.input_nets()
            ]
            local[cell.output_net()] = eval_kind(cell.kind_def().family, bits)

        for cname in regs:
            cell = netlist.cells[cname]
            d_net = cell.pins["D"]
            d = local[d_net] if d_net in local else int(ext[d_net][t])
            rstn_net = cell.pins.get("RSTN")
            if rstn_net is not None:
                rstn = local[rstn_net] if rstn_net in local else int(ext[rstn_net][t])
                d = d if rstn else 0
            state[cell.output_net()] = d

    for q in q_nets:
        values[q] = _pack_bits(q_bits[q], vectors)


def simulate(netlist: Netlist, vectors: int, seed: int) -> dict[str, tuple[float, float]]:
    """Per-net (signal_probability, toggle_rate) under random stimulus."""
    if vectors < 1:
        raise ValueError("vectors must be >= 1")
    values = simulate_words(netlist, vectors, seed)
    stats = {}
    for name, words in values.items():
        prob = count_ones(words, vectors) / vectors
        toggle = count_transitions(words, vectors) / (vectors - 1) if vectors > 1 else 0.0
        stats[name] = (prob, toggle)
    return stats


# ---------------------------------------------------------------------------
# Exhaustive enumeration over all source assignments
# ---------------------------------------------------------------------------

_PATTERNS = (
    0xAAAAAAAAAAAAAAAA,
    0xCCCCCCCCCCCCCCCC,
    0xF0F0F0F0F0F0F0F0,
    0xFF00FF00FF00FF00,
    0xFFFF0000FFFF0000,
    0xFFFFFFFF00000000,
)


def _enumeration_pattern(j: int, n_words: int) -> np.ndarray:
    if j < 6:
        return np.full(n_words, _PATTERNS[j], dtype=np.uint64)
    block = (np.arange(n_words, dtype=np.uint64) >> np.uint64(j - 6)) & _U1
    return np.where(block == 1, _ALL, np.uint64(0))


def exhaustive_words(netlist: Netlist, max_bits: int = 20) -> tuple[dict[str, np.ndarray], int]:
    """Evaluate every net over all 2^k assignments of the k source bits."""
    sources = [n for n in netlist.source_nets() if not netlist.nets[n].is_const]
    k = len(sources)
    if k > max_bits:
        raise ValueError(f"{k} source bits exceed enumeration budget {max_bits}")
    total = 1 << k
    nw = _n_words(total)
    overrides = {name: _enumeration_pattern(j, nw) for j, name in enumerate(sources)}
    values = simulate_words(netlist, total, seed=0, overrides=overrides)
    return values, total


def exact_signal_probability(netlist: Netlist, max_bits: int = 20) -> dict[str, float]:
    values, total = exhaustive_words(netlist, max_bits)
    return {name: count_ones(words, total) / total for name, words in values.items()}


# ---------------------------------------------------------------------------
# Scalar single-vector evaluation (witness replay)
# ---------------------------------------------------------------------------


def evaluate_assignment(netlist: Netlist, assignment: dict[str, int]) -> dict[str, int]:
    """Evaluate all nets for one source assignment; unassigned sources read 0."""
    values: dict[str, int] = {}
    for name in netlist.source_nets():
        net = netlist.nets[name]
        if net.is_const:
            values[name] = net.driver[1]
        else:
            values[name] = int(assignment.get(name, 0)) & 1
    for cell in eval_order(netlist):
        bits = [values[n] for n in cell.input_nets()]
        values[cell.output_net()] = eval_kind(cell.kind_def().family, bits)
    return values

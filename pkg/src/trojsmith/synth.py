"""Random DAG netlist generation for benchmarks and tests.

Random reconvergent logic produces plenty of stuck-at-constant nets, which
would make naive "rare" nets untriggerable. The generator therefore grows
its rare-value pockets from a pool of simulation-verified mid-probability
leaves with pairwise-disjoint source support: every chain net is a
conjunction of independently reachable leaves, so the all-rare assignment
is satisfiable by construction while its probability decays geometrically
along the chain.
"""

from __future__ import annotations

import numpy as np

from .netlist import Cell, Netlist

_KIND_WEIGHTS = (
    ("AND2", 0.16),
    ("NAND2", 0.12),
    ("OR2", 0.14),
    ("NOR2", 0.10),
    ("XOR2", 0.08),
    ("NOT", 0.12),
    ("BUF", 0.04),
    ("AND3", 0.07),
    ("OR3", 0.06),
    ("NAND3", 0.04),
    ("NOR3", 0.04),
    ("MUX2", 0.03),
)


def _est(kind: str, ps: list[float]) -> float:
    if kind.startswith("AND"):
        out = 1.0
        for p in ps:
            out *= p
        return out
    if kind.startswith("NAND"):
        out = 1.0
        for p in ps:
            out *= p
        return 1.0 - out
    if kind.startswith("OR"):
        out = 1.0
        for p in ps:
            out *= 1.0 - p
        return 1.0 - out
    if kind.startswith("NOR"):
        out = 1.0
        for p in ps:
            out *= 1.0 - p
        return out
    if kind.startswith("XOR") or kind.startswith("XNOR"):
        out = 0.0
        for p in ps:
            out = out * (1 - p) + p * (1 - out)
        return out if kind.startswith("XOR") else 1.0 - out
    if kind == "NOT":
        return 1.0 - ps[0]
    if kind == "BUF":
        return ps[0]
    if kind == "MUX2":
        return 0.5 * (ps[0] + ps[1])
    raise AssertionError(kind)


def random_netlist(
    n_gates: int,
    n_pi: int,
    seed: int,
    dff_fraction: float = 0.0,
    rare_chains: int = 0,
    rare_chain_len: int = 5,
    name: str = "rand",
) -> Netlist:
    """Grow an acyclic netlist gate by gate; inputs are drawn with a recency
    bias so depth accumulates. `rare_chains` appends AND chains over the
    lowest-probability nets to create deep rare pockets."""
    rng = np.random.default_rng(seed)
    kinds = [k for k, _ in _KIND_WEIGHTS]
    weights = np.array([w for _, w in _KIND_WEIGHTS])
    weights = weights / weights.sum()

    pis = [f"pi{i}" for i in range(n_pi)]
    clk = None
    if dff_fraction > 0:
        clk = "clk"
    nets: list[str] = list(pis)
    est = {n: 0.5 for n in nets}
    support: dict[str, frozenset] = {n: frozenset([n]) for n in nets}
    cells: list[Cell] = []
    counter = 0

    def pick_inputs(k: int) -> list[str]:
        out: list[str] = []
        n = len(nets)
        while len(out) < k:
            # quadratic recency bias
            idx = int((rng.random() ** 0.5) * n)
            cand = nets[min(idx, n - 1)]
            if cand not in out:
                out.append(cand)
        return out

    def add_gate(kind: str, ins: list[str]) -> str:
        nonlocal counter
        out = f"n{counter}"
        inst = f"g{counter}"
        counter += 1
        kd_inputs = "ABCDEFGH"
        pins = {"Y": out}
        for port, netname in zip(kd_inputs, ins):
            pins[port] = netname
        if kind == "MUX2":
            pins = {"Y": out, "A": ins[0], "B": ins[1], "S": ins[2]}
        cells.append(Cell(inst, kind, pins))
        nets.append(out)
        est[out] = _est(kind, [est[i] for i in ins])
        return out

    for _ in range(n_gates):
        if clk is not None and rng.random() < dff_fraction:
            nonlocal_out = f"n{counter}"
            inst = f"ff{counter}"
            counter += 1
            d = nets[int((rng.random() ** 0.5) * len(nets))]
            cells.append(Cell(inst, "DFF", {"Q": nonlocal_out, "D": d, "CLK": clk}))
            nets.append(nonlocal_out)
            est[nonlocal_out] = 0.5
            continue
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        arity = 3 if kind in ("AND3", "OR3", "NAND3", "NOR3", "MUX2") else (
            1 if kind in ("NOT", "BUF") else 2
        )
        add_gate(kind, pick_inputs(arity))

    for _ in range(rare_chains):
        # conjoin distinct mid-probability leaves: output probability decays
        # roughly geometrically while the all-rare assignment stays reachable
        used: set[str] = set()
        acc = None
        for _step in range(rare_chain_len):
            pool = [
                n for n in nets
                if 0.2 <= est[n] <= 0.8 and n not in used and n != acc
            ]
            if not pool:
                break
            pick = pool[int(rng.integers(0, len(pool)))]
            used.add(pick)
            leaf = pick if est[pick] <= 0.5 else add_gate("NOT", [pick])
            if acc is None:
                acc = leaf
                continue
            acc = add_gate("AND2", [acc, leaf])

    inputs = list(pis) + ([clk] if clk else [])
    used = {netname for c in cells for p, netname in c.pins.items() if p not in ("Y", "Q")}
    sinkless = [n for n in nets if n not in used and n not in inputs]
    pos = sinkless if sinkless else [nets[-1]]
    netlist = Netlist(name, inputs, pos, cells, clock_net=clk)
    return netlist


def c17() -> Netlist:
    """The classic 6-NAND benchmark topology."""
    cells = [
        Cell("g10", "NAND2", {"Y": "N10", "A": "N1", "B": "N3"}),
        Cell("g11", "NAND2", {"Y": "N11", "A": "N3", "B": "N6"}),
        Cell("g16", "NAND2", {"Y": "N16", "A": "N2", "B": "N11"}),
        Cell("g19", "NAND2", {"Y": "N19", "A": "N11", "B": "N7"}),
        Cell("g22", "NAND2", {"Y": "N22", "A": "N10", "B": "N16"}),
        Cell("g23", "NAND2", {"Y": "N23", "A": "N16", "B": "N19"}),
    ]
    return Netlist("c17", ["N1", "N2", "N3", "N6", "N7"], ["N22", "N23"], cells)

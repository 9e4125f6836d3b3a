"""Model-guided Trojan insertion.

The flow scores every net with the trigger and payload classifiers, streams
r-combinations of the best trigger candidates (diversity-ordered), proves
each set simultaneously reachable before any feature work, pairs it with the
best topologically legal payload, and computes the would-be behavior vector
of the final trigger wire by splicing into a scratch copy. A reference
vector sampled from the behavior model ranks the resulting virtual Trojans;
the closest ones are bound for real and re-verified end to end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .bundle import ModelBundle
from .errors import (
    InsufficientCandidates,
    MissingClock,
    NoCandidates,
    NoLegalPayload,
    PoolEmpty,
)
from .features import TrojanFeatureVector, extract_features, scale_design
from .ml import sample_reference, score_nets
from .netlist import Netlist, TopoOrder, infer_clock, splice_subcircuit, topo_sort
from .simulate import simulate
from .templates import TrojanTemplate, materialize
from .validate import TriggerCondition, check_no_comb_loop, justify, verify_inserted


def derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class InsertionConfig:
    num_trojans: int = 1
    virtual_pool_factor: int = 20
    feature_weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    candidate_cap: int = 64
    seed: int = 0
    vectors: int = 100000
    verify_vectors: int = 10000
    solver_timeout_s: float = 10.0

    def __post_init__(self):
        if self.num_trojans < 1:
            raise ValueError("num_trojans must be >= 1")
        if self.virtual_pool_factor < 1:
            raise ValueError("virtual_pool_factor must be >= 1")
        w = np.asarray(self.feature_weights, dtype=float)
        if len(w) != 5 or (w < 0).any() or not (w > 0).any():
            raise ValueError("feature_weights: five non-negative reals, not all zero")


@dataclass
class VirtualTrojan:
    trigger_nets: list[tuple[str, int]]   # (net, required value) in pick order
    payload_net: str
    features: TrojanFeatureVector          # raw values on the final trigger wire
    features_scaled: np.ndarray            # scaled against host + Trojan nets
    distance: float = 0.0
    valid: bool = False
    witness: dict[str, int] | None = None


@dataclass
class PoolLedger:
    sets_enumerated: int = 0
    unsatisfiable: int = 0
    solver_timeouts: int = 0
    no_payload: int = 0
    valid_virtual: int = 0
    bind_attempts: int = 0
    verify_failures: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class InsertionResult:
    netlists: list[Netlist]
    reports: list[dict]
    ledger: PoolLedger
    shortfall: str | None = None
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Candidate machinery
# ---------------------------------------------------------------------------


def _excluded(netlist: Netlist) -> set[str]:
    out = set(netlist.primary_inputs)
    out.update(n for n in netlist.nets if netlist.nets[n].is_const)
    if netlist.clock_net:
        out.add(netlist.clock_net)
    if netlist.reset_net:
        out.add(netlist.reset_net)
    return out


def eligible_trigger_nets(netlist: Netlist) -> list[str]:
    banned = _excluded(netlist) | set(netlist.primary_outputs)
    return sorted(n for n in netlist.nets if n not in banned)


def eligible_payload_nets(netlist: Netlist) -> list[str]:
    banned = _excluded(netlist)
    return sorted(
        n
        for n in netlist.nets
        if n not in banned and netlist.nets[n].driver[0] == "cell"
    )


def select_trigger_candidates(
    netlist: Netlist, scores: dict[str, float], cap: int
) -> list[str]:
    """Fitness-ranked trigger candidates: nets scored above 0.5 first, the
    rest appended as fallback, capped. Ties break on net name."""
    eligible = [n for n in eligible_trigger_nets(netlist) if n in scores]
    if not eligible:
        raise NoCandidates("design has no eligible trigger nets")
    above = sorted((n for n in eligible if scores[n] > 0.5), key=lambda n: (-scores[n], n))
    below = sorted((n for n in eligible if scores[n] <= 0.5), key=lambda n: (-scores[n], n))
    return (above + below)[:cap]


def enumerate_trigger_sets(
    candidates: list[str],
    r: int,
    scores: dict[str, float] | None = None,
    diversity: bool = True,
    cap: int | None = None,
) -> Iterator[tuple[str, ...]]:
    """Stream r-combinations in fitness-greedy order. With diversity on,
    each pick prefers a score different from the previous pick's while any
    differently-scored candidate remains (plain order otherwise)."""
    n = len(candidates)
    if n < r:
        raise InsufficientCandidates(f"need {r} candidates, have {n}")
    yielded = 0

    def rec(prefix: list[int]) -> Iterator[tuple[str, ...]]:
        nonlocal yielded
        if len(prefix) == r:
            yielded += 1
            yield tuple(candidates[i] for i in prefix)
            return
        start = prefix[-1] + 1 if prefix else 0
        slots_left = r - len(prefix) - 1
        pool = [i for i in range(start, n) if (n - i - 1) >= slots_left]
        if diversity and prefix and scores is not None:
            prev = scores[candidates[prefix[-1]]]
            diff = [i for i in pool if scores[candidates[i]] != prev]
            same = [i for i in pool if scores[candidates[i]] == prev]
            pool = diff + same if diff else pool
        for i in pool:
            if cap is not None and yielded >= cap:
                return
            yield from rec(prefix + [i])

    yield from rec([])


def rare_values(
    probabilities: dict[str, float], nets: tuple[str, ...] | list[str]
) -> list[tuple[str, int]]:
    """Less-probable logic level per net; an exact 0.5 tie counts 1 as rare."""
    return [(n, 1 if probabilities[n] <= 0.5 else 0) for n in nets]


def pair_payload(
    netlist: Netlist,
    trigger_set: tuple[str, ...] | list[str],
    payload_scores: dict[str, float],
    order: TopoOrder,
) -> str:
    """Highest-fitness eligible net strictly above all triggers that closes
    no combinational loop."""
    taken = set(trigger_set)
    ranked = sorted(
        (n for n in eligible_payload_nets(netlist) if n in payload_scores and n not in taken),
        key=lambda n: (-payload_scores[n], n),
    )
    for net in ranked:
        if check_no_comb_loop(netlist, trigger_set, net, order):
            return net
    raise NoLegalPayload(f"no legal payload above triggers {sorted(taken)}")


# ---------------------------------------------------------------------------
# Virtual Trojans
# ---------------------------------------------------------------------------


def template_binding(
    template: TrojanTemplate, trigger_nets: list[str], payload: str, clock: str | None
) -> dict[str, str]:
    binding = {port: net for port, net in zip(template.trigger_ports, trigger_nets)}
    binding[template.payload_out] = payload
    if template.clock_port is not None:
        if clock is None:
            raise MissingClock("sequential template needs an identified clock net")
        binding[template.clock_port] = clock
    return binding


def splice_template(
    host: Netlist,
    template: TrojanTemplate,
    trigger_values: list[tuple[str, int]],
    payload: str,
    prefix: str,
) -> Netlist:
    mat = materialize(template, [v for _, v in trigger_values])
    clock = host.clock_net or infer_clock(host)
    binding = template_binding(mat, [n for n, _ in trigger_values], payload, clock)
    return splice_subcircuit(host, mat.body, binding, mat.payload_in, mat.payload_out, prefix)


def build_virtual(
    host: Netlist,
    template: TrojanTemplate,
    trigger_values: list[tuple[str, int]],
    payload: str,
    vectors: int,
    seed: int,
) -> VirtualTrojan:
    """Behavior vector of the final trigger wire computed as if inserted:
    splice into a scratch copy, re-simulate and re-run SCOAP with the host
    seed, and rescale against all nets of the spliced design."""
    from .features import scoap  # local import keeps module load light

    scratch = splice_template(host, template, trigger_values, payload, prefix="virt_")
    sim = simulate(scratch, vectors, seed)
    sc = scoap(scratch)
    names = sorted(scratch.nets)
    cols = np.array(
        [
            [sim[n][0] for n in names],
            [sim[n][1] for n in names],
            [sc[n][1] for n in names],   # cc1
            [sc[n][0] for n in names],   # cc0
            [sc[n][2] for n in names],   # co
        ],
        dtype=float,
    )
    mins, maxs = cols.min(axis=1), cols.max(axis=1)
    final = "virt_" + template.final_trigger_net
    raw = np.array([sim[final][0], sim[final][1], sc[final][1], sc[final][0], sc[final][2]])
    span = np.where(maxs > mins, maxs - mins, 1.0)
    scaled = np.where(maxs > mins, (np.clip(raw, mins, maxs) - mins) / span, 0.0)
    fv = TrojanFeatureVector(*[float(v) for v in raw])
    return VirtualTrojan(list(trigger_values), payload, fv, scaled)


def weighted_distance(a: np.ndarray, b: np.ndarray, weights) -> float:
    w = np.asarray(weights, dtype=float)
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.sum(w * d * d)))


def rank_pool(
    pool: list[VirtualTrojan], reference: np.ndarray, weights
) -> list[VirtualTrojan]:
    if not pool:
        raise PoolEmpty("no valid virtual Trojans to rank")
    for vt in pool:
        vt.distance = weighted_distance(vt.features_scaled, reference, weights)
    return sorted(
        pool,
        key=lambda vt: (vt.distance, tuple(n for n, _ in vt.trigger_nets), vt.payload_net),
    )


def _insertion_report(
    vt: VirtualTrojan, template: TrojanTemplate, prefix: str, seed: int
) -> dict:
    return {
        "template_id": template.template_id,
        "template_kind": template.kind,
        "trigger_nets": [[n, v] for n, v in vt.trigger_nets],
        "payload_net": vt.payload_net,
        "final_trigger_net": prefix + template.final_trigger_net,
        "features_raw": [float(v) for v in vt.features.as_array()],
        "features_scaled": [float(v) for v in vt.features_scaled],
        "distance": float(vt.distance),
        "witness": {k: int(v) for k, v in sorted((vt.witness or {}).items())},
        "seed": seed,
    }


def rank_and_bind(
    host: Netlist,
    template: TrojanTemplate,
    pool: list[VirtualTrojan],
    reference: np.ndarray,
    weights,
    k: int,
    verify_vectors: int = 10000,
    seed: int = 0,
    ledger: PoolLedger | None = None,
) -> tuple[list[Netlist], list[dict]]:
    """Splice the k nearest virtual Trojans into fresh host copies; each
    bound netlist must pass the end-to-end check or the next one is tried."""
    ledger = ledger if ledger is not None else PoolLedger()
    ranked = rank_pool([vt for vt in pool if vt.valid], reference, weights)
    netlists: list[Netlist] = []
    reports: list[dict] = []
    for vt in ranked:
        if len(netlists) >= k:
            break
        ledger.bind_attempts += 1
        bound = splice_template(host, template, vt.trigger_nets, vt.payload_net, prefix="troj_")
        cond = TriggerCondition(vt.trigger_nets)
        check = verify_inserted(host, bound, cond, verify_vectors, seed, witness=vt.witness)
        if not check.passed:
            ledger.verify_failures += 1
            continue
        report = _insertion_report(vt, template, "troj_", seed)
        report["verified"] = {
            "dormant_cycles": check.dormant_cycles,
            "dormant_mismatches": check.dormant_mismatches,
            "activation_witnessed": check.activation_witnessed,
            "vectors": verify_vectors,
        }
        netlists.append(bound)
        reports.append(report)
    return netlists, reports


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def build_virtual_pool(
    host: Netlist,
    template: TrojanTemplate,
    probabilities: dict[str, float],
    trigger_scores: dict[str, float],
    payload_scores: dict[str, float],
    order: TopoOrder,
    cfg: InsertionConfig,
    ledger: PoolLedger,
    random_selection: bool = False,
    rng: np.random.Generator | None = None,
) -> list[VirtualTrojan]:
    """Stream trigger sets, validate, pair payloads, and compute behavior
    vectors until the pool holds pool_factor * num_trojans valid virtual
    Trojans (or the stream is exhausted). Satisfiability is checked before
    any feature work. `random_selection` replaces both classifiers with a
    seeded shuffle for the no-model harness arms."""
    target = cfg.virtual_pool_factor * cfg.num_trojans
    cap = 1000 * cfg.num_trojans
    if random_selection:
        rng = rng or np.random.default_rng(cfg.seed)
        names = eligible_trigger_nets(host)
        t_scores = {n: float(rng.random()) for n in sorted(names)}
        p_scores = {n: float(rng.random()) for n in eligible_payload_nets(host)}
        candidates = select_trigger_candidates(host, t_scores, cfg.candidate_cap)
        stream = enumerate_trigger_sets(candidates, template.r, t_scores, True, cap)
        pay_scores = p_scores
    else:
        candidates = select_trigger_candidates(host, trigger_scores, cfg.candidate_cap)
        stream = enumerate_trigger_sets(candidates, template.r, trigger_scores, True, cap)
        pay_scores = payload_scores

    pool: list[VirtualTrojan] = []
    for trig_set in stream:
        if len(pool) >= target:
            break
        ledger.sets_enumerated += 1
        values = rare_values(probabilities, trig_set)
        just = justify(host, TriggerCondition(values), timeout_s=cfg.solver_timeout_s)
        if just.timed_out:
            ledger.solver_timeouts += 1
            continue
        if not just.satisfiable:
            ledger.unsatisfiable += 1
            continue
        try:
            payload = pair_payload(host, trig_set, pay_scores, order)
        except NoLegalPayload:
            ledger.no_payload += 1
            continue
        vt = build_virtual(host, template, values, payload, cfg.vectors, cfg.seed)
        vt.valid = True
        vt.witness = just.witness
        pool.append(vt)
        ledger.valid_virtual += 1
    return pool


def insert(
    host: Netlist,
    template: TrojanTemplate,
    bundle: ModelBundle,
    cfg: InsertionConfig,
) -> InsertionResult:
    bundle.check_schema()
    warnings: list[str] = []
    bundle_kind = bundle.meta.get("template_kind")
    if bundle_kind and bundle_kind != template.kind:
        warnings.append(
            f"bundle was trained on a {bundle_kind} template but inserting a "
            f"{template.kind} one; flip-flop-sensitive features will not transfer"
        )
    if template.clock_port is not None and not (host.clock_net or infer_clock(host)):
        raise MissingClock("sequential template but host has no identifiable clock")

    features = extract_features(host, cfg.vectors, cfg.seed)
    _scaler, scaled = scale_design(features)
    order = topo_sort(host)
    probabilities = {n: features[n].signal_probability for n in features}

    trig_in = {n: bundle.mask_vector(scaled[n].values) for n in eligible_trigger_nets(host)}
    pay_in = {n: bundle.mask_vector(scaled[n].values) for n in eligible_payload_nets(host)}
    trigger_scores = score_nets(bundle.trigger_model, trig_in)
    payload_scores = score_nets(bundle.payload_model, pay_in)

    ledger = PoolLedger()
    pool = build_virtual_pool(
        host, template, probabilities, trigger_scores, payload_scores, order, cfg, ledger
    )
    if not pool:
        return InsertionResult([], [], ledger, shortfall="no valid virtual Trojans", warnings=warnings)

    reference = sample_reference(bundle.trojan_model, derive_seed(cfg.seed, "reference"))
    netlists, reports = rank_and_bind(
        host,
        template,
        pool,
        reference,
        cfg.feature_weights,
        cfg.num_trojans,
        cfg.verify_vectors,
        cfg.seed,
        ledger,
    )
    for rep in reports:
        rep["reference"] = [float(v) for v in reference]
    shortfall = None
    if len(netlists) < cfg.num_trojans:
        shortfall = (
            f"emitted {len(netlists)} of {cfg.num_trojans}: pool had "
            f"{ledger.valid_virtual} valid virtual Trojans, "
            f"{ledger.verify_failures} failed end-to-end verification"
        )
    return InsertionResult(netlists, reports, ledger, shortfall, warnings)

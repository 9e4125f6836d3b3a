"""Training-data generation and the cluster-accuracy experiment harness.

`baseline_insert` produces Trojan-inserted benchmarks with no model in the
loop: trigger nets are drawn uniformly from nets whose rare-side probability
sits under a threshold, validated for joint reachability, and paired with a
random legal payload. `build_training_set` clusters the resulting behavior
vectors (affinity propagation, damping 0.8) and trains one model bundle per
cluster. `run_experiment` measures Top-N cluster-hit accuracy of the
insertion flow under four ablation arms: no models, behavior model only,
trigger/payload models only, and the full pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .bundle import ModelBundle
from .errors import InsufficientRareNets, TooFewSamples
from .features import (
    FUNCTIONAL_FEATURE_INDICES,
    TROJAN_FEATURE_INDICES,
    extract_features,
    scale_design,
)
from .insert import (
    InsertionConfig,
    PoolLedger,
    build_virtual_pool,
    derive_seed,
    eligible_payload_nets,
    eligible_trigger_nets,
    rank_pool,
    rare_values,
    splice_template,
)
from .ml import (
    ClusterAssignment,
    ForestParams,
    affinity_propagation,
    fit_mixture,
    sample_reference,
    score_nets,
    train_classifier,
)
from .ml.affinity import negative_squared_distances, nearest_exemplar
from .netlist import Netlist, topo_sort
from .simulate import simulate
from .templates import TrojanTemplate, build_template
from .validate import TriggerCondition, justify, verify_inserted

#: trigger-count to signal-probability-threshold map used for training data
DEFAULT_THETA = {4: 0.001, 5: 0.01, 6: 0.01}

ARMS = ("none", "trojan_only", "trig_pay_only", "both")
ARM_LABELS = {
    "none": "no_ml",
    "trojan_only": "troj_ml",
    "trig_pay_only": "trig_pay_ml",
    "both": "both",
}


@dataclass
class BaselineConfig:
    theta: float
    r: int
    count: int
    seed: int = 0
    vectors: int = 100000
    verify_vectors: int = 10000
    solver_timeout_s: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.theta < 0.5):
            raise ValueError("theta must lie in (0, 0.5)")
        if self.count < 1 or self.r < 1:
            raise ValueError("count and r must be >= 1")


def baseline_insert(
    host: Netlist, template: TrojanTemplate, cfg: BaselineConfig
) -> list[tuple[Netlist, dict]]:
    """Threshold-only insertion: uniform random rare trigger sets, justified
    before splicing, random legal payload, every output verified."""
    if template.r != cfg.r:
        raise ValueError(f"template {template.template_id} has {template.r} triggers, config says {cfg.r}")
    sim = {n: p for n, (p, _t) in simulate(host, cfg.vectors, cfg.seed).items()}
    order = topo_sort(host)
    rare_pool = sorted(
        n for n in eligible_trigger_nets(host) if min(sim[n], 1.0 - sim[n]) <= cfg.theta
    )
    if len(rare_pool) < cfg.r:
        raise InsufficientRareNets(
            f"{len(rare_pool)} nets under theta={cfg.theta}, need {cfg.r}"
        )
    payload_pool = eligible_payload_nets(host)
    rng = np.random.default_rng(derive_seed(cfg.seed, "baseline"))
    outputs: list[tuple[Netlist, dict]] = []
    attempts = 0
    max_attempts = 400 * cfg.count
    while len(outputs) < cfg.count and attempts < max_attempts:
        attempts += 1
        pick = [rare_pool[i] for i in rng.choice(len(rare_pool), size=cfg.r, replace=False)]
        values = rare_values(sim, pick)
        cond = TriggerCondition(values)
        just = justify(host, cond, timeout_s=cfg.solver_timeout_s)
        if not just.satisfiable:
            continue
        max_level = max(order.level(n) for n in pick)
        legal = [
            n for n in payload_pool if n not in pick and order.level(n) > max_level
        ]
        if not legal:
            continue
        payload = legal[int(rng.integers(0, len(legal)))]
        bound = splice_template(host, template, values, payload, prefix="troj_")
        check = verify_inserted(host, bound, cond, cfg.verify_vectors, cfg.seed, witness=just.witness)
        if not check.passed:
            continue
        report = {
            "template_id": template.template_id,
            "template_kind": template.kind,
            "trigger_nets": [[n, v] for n, v in values],
            "rare_probabilities": {n: float(min(sim[n], 1.0 - sim[n])) for n in pick},
            "theta": cfg.theta,
            "payload_net": payload,
            "final_trigger_net": "troj_" + template.final_trigger_net,
            "prefix": "troj_",
            "witness": {k: int(v) for k, v in sorted(just.witness.items())},
            "seed": cfg.seed,
            "verified": {
                "dormant_cycles": check.dormant_cycles,
                "dormant_mismatches": check.dormant_mismatches,
                "activation_witnessed": check.activation_witnessed,
                "vectors": cfg.verify_vectors,
            },
        }
        outputs.append((bound, report))
    return outputs


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainerParams:
    damping: float = 0.8
    forest: ForestParams = field(default_factory=ForestParams)
    max_mixture_components: int = 5
    max_negatives: int | None = None   # None = all non-Trojan nets
    functional_only: bool = False
    vectors: int = 100000
    seed: int = 0


@dataclass
class TrainingSet:
    bundles: list[ModelBundle]
    assignment: ClusterAssignment
    trojan_vectors: np.ndarray           # scaled behavior vector per sample
    cluster_of_sample: list[int]
    skipped_clusters: list[int] = field(default_factory=list)


def _design_matrices(netlist, report, vectors, seed):
    features = extract_features(netlist, vectors, seed)
    scaler, scaled = scale_design(features)
    prefix = report.get("prefix", "troj_")
    trigger_nets = [n for n, _v in report["trigger_nets"]]
    payload = report["payload_net"]
    tvec = scaled[report["final_trigger_net"]].values[list(TROJAN_FEATURE_INDICES)]
    trojan_owned = {n for n in netlist.nets if n.startswith(prefix)}
    trojan_owned.update(trigger_nets)
    trojan_owned.add(payload)
    neg_trigger = [
        scaled[n].values for n in eligible_trigger_nets(netlist) if n not in trojan_owned
    ]
    neg_payload = [
        scaled[n].values for n in eligible_payload_nets(netlist) if n not in trojan_owned
    ]
    return {
        "scaler": scaler,
        "tvec": tvec,
        "trigger_pos": [scaled[n].values for n in trigger_nets],
        "payload_pos": [scaled[payload].values],
        "trigger_neg": neg_trigger,
        "payload_neg": neg_payload,
    }


def build_training_set(
    trojaned: list[tuple[Netlist, dict]], params: TrainerParams | None = None
) -> TrainingSet:
    """Cluster the population's behavior vectors, then train per-cluster
    trigger/payload classifiers and a behavior mixture model."""
    params = params or TrainerParams()
    if len(trojaned) < 2:
        raise TooFewSamples("need at least 2 Trojan-inserted netlists")
    per_design = [
        _design_matrices(nl, rep, params.vectors, params.seed) for nl, rep in trojaned
    ]
    tvecs = np.stack([d["tvec"] for d in per_design])
    assignment = affinity_propagation(
        negative_squared_distances(tvecs), damping=params.damping
    )
    mask = list(FUNCTIONAL_FEATURE_INDICES) if params.functional_only else None

    def apply_mask(vecs):
        arr = np.stack(vecs)
        return arr[:, mask] if mask else arr

    bundles: list[ModelBundle] = []
    skipped: list[int] = []
    for ci in range(assignment.n_clusters):
        members = [i for i in range(len(trojaned)) if assignment.labels[i] == ci]
        if len(members) < 2:
            skipped.append(ci)
            continue
        rng = np.random.default_rng(derive_seed(params.seed, f"cluster{ci}"))

        def gather(key):
            out = []
            for i in members:
                out.extend(per_design[i][key])
            return out

        def negatives(key):
            rows = gather(key)
            if params.max_negatives is not None and len(rows) > params.max_negatives:
                idx = sorted(rng.choice(len(rows), size=params.max_negatives, replace=False))
                rows = [rows[i] for i in idx]
            return rows

        fp = ForestParams(
            n_trees=params.forest.n_trees,
            max_depth=params.forest.max_depth,
            min_split=params.forest.min_split,
            max_features=params.forest.max_features,
            seed=derive_seed(params.seed, f"forest{ci}"),
        )
        trigger_model = train_classifier(apply_mask(gather("trigger_pos")), apply_mask(negatives("trigger_neg")), fp)
        payload_model = train_classifier(apply_mask(gather("payload_pos")), apply_mask(negatives("payload_neg")), fp)
        cluster_vecs = tvecs[members]
        mixture = fit_mixture(
            cluster_vecs,
            max_components=min(params.max_mixture_components, len(members)),
            seed=derive_seed(params.seed, f"mixture{ci}"),
        )
        rep0 = trojaned[members[0]][1]
        bundles.append(
            ModelBundle(
                trigger_model=trigger_model,
                payload_model=payload_model,
                trojan_model=mixture,
                scaler=per_design[members[0]]["scaler"],
                cluster_vectors=cluster_vecs,
                template_id=rep0.get("template_id", ""),
                cluster_id=ci,
                seed=params.seed,
                feature_mask=mask,
                meta={
                    "template_kind": rep0.get("template_kind", ""),
                    "members": [int(i) for i in members],
                    "population": len(trojaned),
                },
            )
        )
    return TrainingSet(bundles, assignment, tvecs, [int(l) for l in assignment.labels], skipped)


def classify_output(
    trojan_vector, assignment: ClusterAssignment, training_vectors: np.ndarray
) -> int:
    """Cluster id of the nearest exemplar (scaled behavior space); ties go
    to the lower-indexed exemplar."""
    if hasattr(trojan_vector, "as_array"):
        vec = trojan_vector.as_array()
    else:
        vec = np.asarray(trojan_vector, dtype=float)
    return nearest_exemplar(vec, assignment, training_vectors)


# ---------------------------------------------------------------------------
# Top-N ablation experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    train_design: str
    train_template: str
    test_design: str
    test_template: str
    ablation: tuple = ARMS            # subset of ARMS to run
    top_n: tuple = (1, 5)
    runs: int = 5
    functional_only: bool = False

    def __post_init__(self):
        if self.runs < 1 or any(n < 1 for n in self.top_n):
            raise ValueError("runs and top_n values must be >= 1")
        bad = [a for a in self.ablation if a not in ARMS]
        if bad:
            raise ValueError(f"unknown ablation arms {bad}; choose from {ARMS}")


@dataclass
class HarnessParams:
    baseline_count: int = 40
    vectors: int = 20000
    verify_vectors: int = 10000
    pool_factor: int = 20
    candidate_cap: int = 64
    trainer: TrainerParams = field(default_factory=TrainerParams)
    seed: int = 0


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    n_clusters: int
    accuracy: dict            # arm -> {N: fraction in [0, 1]}
    hits: dict                # arm -> {N: [0/1 per (run, cluster)]}
    training: TrainingSet

    def row(self) -> dict:
        out = {
            "design": self.spec.test_design,
            "template": self.spec.test_template,
            "train_design": self.spec.train_design,
            "train_template": self.spec.train_template,
            "clusters": self.n_clusters,
        }
        for arm in self.spec.ablation:
            for n in self.spec.top_n:
                out[f"{ARM_LABELS[arm]}_top{n}"] = round(100.0 * self.accuracy[arm][n], 2)
        return out


def _arm_pool(
    host, template, bundle, probabilities, scores_t, scores_p, order, arm, cfg, seed
):
    """Build one arm's ordered list of 20 valid virtual Trojans."""
    ledger = PoolLedger()
    random_sel = arm in ("none", "trojan_only")
    rng = np.random.default_rng(derive_seed(seed, "universe")) if random_sel else None
    pool = build_virtual_pool(
        host, template, probabilities, scores_t, scores_p, order, cfg, ledger,
        random_selection=random_sel, rng=rng,
    )
    for vt in pool:
        vt.valid = True
    if arm in ("trojan_only", "both") and pool:
        reference = sample_reference(bundle.trojan_model, derive_seed(seed, "reference"))
        pool = rank_pool(pool, reference, cfg.feature_weights)
    return pool


def run_experiment(
    spec: ExperimentSpec,
    designs: dict[str, Netlist],
    params: HarnessParams | None = None,
    templates: dict[str, TrojanTemplate] | None = None,
    training: TrainingSet | None = None,
) -> ExperimentResult:
    """Reproduce the threshold-baseline -> cluster -> train -> insert ->
    classify flow and score Top-N cluster hits per ablation arm.

    A hit at Top-N means one of the N best virtual Trojans classifies into
    the cluster whose models drove the insertion; accuracy averages over
    runs x clusters with per-run derived seeds."""
    params = params or HarnessParams()

    def get_template(name: str) -> TrojanTemplate:
        if templates and name in templates:
            return templates[name]
        return build_template(name)

    train_template = get_template(spec.train_template)
    test_template = get_template(spec.test_template)

    if training is None:
        host_train = designs[spec.train_design]
        theta = DEFAULT_THETA.get(train_template.r, 0.01)
        bcfg = BaselineConfig(
            theta=theta,
            r=train_template.r,
            count=params.baseline_count,
            seed=derive_seed(params.seed, "baseline"),
            vectors=params.vectors,
            verify_vectors=params.verify_vectors,
        )
        trojaned = baseline_insert(host_train, train_template, bcfg)
        trainer = TrainerParams(
            damping=params.trainer.damping,
            forest=params.trainer.forest,
            max_mixture_components=params.trainer.max_mixture_components,
            max_negatives=params.trainer.max_negatives,
            functional_only=spec.functional_only,
            vectors=params.vectors,
            seed=derive_seed(params.seed, "train"),
        )
        training = build_training_set(trojaned, trainer)

    host_test = designs[spec.test_design]
    features = extract_features(host_test, params.vectors, params.seed)
    _scaler, scaled = scale_design(features)
    probabilities = {n: features[n].signal_probability for n in features}
    order = topo_sort(host_test)

    hits = {arm: {n: [] for n in spec.top_n} for arm in spec.ablation}
    for run in range(spec.runs):
        for bundle in training.bundles:
            seed_rc = derive_seed(params.seed, f"run{run}:cluster{bundle.cluster_id}")
            cfg = InsertionConfig(
                num_trojans=1,
                virtual_pool_factor=params.pool_factor,
                candidate_cap=params.candidate_cap,
                seed=seed_rc,
                vectors=params.vectors,
                verify_vectors=params.verify_vectors,
            )
            trig_in = {
                n: bundle.mask_vector(scaled[n].values) for n in eligible_trigger_nets(host_test)
            }
            pay_in = {
                n: bundle.mask_vector(scaled[n].values) for n in eligible_payload_nets(host_test)
            }
            scores_t = score_nets(bundle.trigger_model, trig_in)
            scores_p = score_nets(bundle.payload_model, pay_in)
            for arm in spec.ablation:
                pool = _arm_pool(
                    host_test, test_template, bundle, probabilities,
                    scores_t, scores_p, order, arm, cfg, seed_rc,
                )
                labels = [
                    classify_output(vt.features_scaled, training.assignment, training.trojan_vectors)
                    for vt in pool
                ]
                for n in spec.top_n:
                    hit = int(any(l == bundle.cluster_id for l in labels[:n]))
                    hits[arm][n].append(hit)

    accuracy = {
        arm: {n: (float(np.mean(v)) if v else 0.0) for n, v in per_n.items()}
        for arm, per_n in hits.items()
    }
    return ExperimentResult(spec, len(training.bundles), accuracy, hits, training)


def write_accuracy_csv(results: list[ExperimentResult], path: str) -> None:
    if not results:
        raise ValueError("no results to write")
    rows = [r.row() for r in results]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

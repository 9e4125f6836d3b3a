"""Gate-level hardware Trojan insertion toolkit.

Parses structural Verilog into a hypergraph IR, extracts per-net functional
and structural features, learns trigger/payload/behavior models from a
sample Trojan population, and inserts new Trojans that are proven
triggerable and functionally dormant elsewhere.
"""

from .bench import (
    BaselineConfig,
    ExperimentSpec,
    HarnessParams,
    baseline_insert,
    build_training_set,
    classify_output,
    run_experiment,
)
from .bundle import ModelBundle
from .features import (
    FEATURE_NAMES,
    NetFeatureVector,
    Scaler,
    TrojanFeatureVector,
    entropy,
    extract_features,
    fit_scaler,
    apply_scaler,
    scoap,
    structural_features,
)
from .insert import InsertionConfig, VirtualTrojan, insert
from .netlist import Netlist, TopoOrder, isomorphic, splice_subcircuit, topo_sort
from .simulate import simulate
from .templates import TEMPLATE_IDS, TrojanTemplate, build_template, load_template
from .validate import Justification, TriggerCondition, justify, verify_inserted
from .verilog import emit_netlist, parse_netlist

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "ExperimentSpec",
    "HarnessParams",
    "baseline_insert",
    "build_training_set",
    "classify_output",
    "run_experiment",
    "ModelBundle",
    "FEATURE_NAMES",
    "NetFeatureVector",
    "Scaler",
    "TrojanFeatureVector",
    "entropy",
    "extract_features",
    "fit_scaler",
    "apply_scaler",
    "scoap",
    "structural_features",
    "InsertionConfig",
    "VirtualTrojan",
    "insert",
    "Netlist",
    "TopoOrder",
    "isomorphic",
    "splice_subcircuit",
    "topo_sort",
    "simulate",
    "TEMPLATE_IDS",
    "TrojanTemplate",
    "build_template",
    "load_template",
    "Justification",
    "TriggerCondition",
    "justify",
    "verify_inserted",
    "emit_netlist",
    "parse_netlist",
    "__version__",
]

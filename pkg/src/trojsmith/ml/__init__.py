from .affinity import ClusterAssignment, affinity_propagation
from .forest import ForestModel, ForestParams, score_nets, train_classifier
from .mixture import MixtureModel, fit_mixture, sample_reference

__all__ = [
    "ClusterAssignment",
    "affinity_propagation",
    "ForestModel",
    "ForestParams",
    "score_nets",
    "train_classifier",
    "MixtureModel",
    "fit_mixture",
    "sample_reference",
]

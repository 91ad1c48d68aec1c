"""Grouping, benchmarks, and cooperative coevolution for overlapping problems."""

from .basefuncs import eval_base
from .benchmark import (CtocTopology, SubcomponentSpec, TopologyConfig,
                        build_complex, build_line, build_ring,
                        compose_overlapping, ctoc, load_descriptor,
                        save_descriptor, suite, verify_instance)
from .ccopt import (AllocationPlan, ContextVector, ContributionLedger,
                    allocate_shared, cc_optimize, single_group_plan,
                    subsolver_phase)
from .decomposers import (DecompositionResult, InteractionMatrix, dg2, oedg,
                          ordg, rdg3, sd, sud)
from .errors import (CapabilityError, EvaluationError, GenerationError,
                     StructuralError)
from .interaction import (DetectionContext, InteractionVerdict,
                          adaptive_threshold, direct_interactors,
                          interact_closure, interact_ov, set_interacts)
from .metrics import (ComparisonCell, GroupingScore, aggregate,
                      decomposition_accuracy, rank_sum)
from .problem import (EvaluationCounter, GroundTruth, OverlappingProblem,
                      ProblemInfo, evaluate, overlapping_degree)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan", "CapabilityError", "ComparisonCell", "ContextVector",
    "ContributionLedger", "CtocTopology", "DecompositionResult",
    "DetectionContext", "EvaluationCounter", "EvaluationError",
    "GenerationError", "GroundTruth", "GroupingScore", "InteractionMatrix",
    "InteractionVerdict", "OverlappingProblem", "ProblemInfo",
    "StructuralError", "SubcomponentSpec", "TopologyConfig",
    "adaptive_threshold", "aggregate", "allocate_shared", "build_complex",
    "build_line", "build_ring", "cc_optimize", "compose_overlapping", "ctoc",
    "decomposition_accuracy", "dg2", "direct_interactors", "eval_base",
    "evaluate", "interact_closure", "interact_ov", "load_descriptor", "oedg",
    "ordg", "overlapping_degree", "rank_sum", "rdg3", "save_descriptor",
    "sd", "set_interacts", "single_group_plan", "subsolver_phase", "sud",
    "suite", "verify_instance",
]

"""Simulation and learning of finite-state quantum generators."""
from .core import (
    OutputDistribution,
    QuantumGenerator,
    exact_distribution,
    measure_step,
    sample,
    sample_many,
    sequence_probability,
    validate,
)
from .gates import Gate, GateCircuit, NetEntry, circuit_unitary, enumerate_net, gate_unitary
from .learn import (
    GeneratorEvaluator,
    PerturbedEvaluator,
    TableEvaluator,
    choose_clamps,
    kl_divergence,
    learn,
    perturb,
    sample_bound,
)
from .parity import ParitySpec, build_parity_qg, reference_noisy_parity, trace_basis_path, verify_construction
from .reduce import kl_threshold, prediction_error, predictor_from_evaluator, recover_set

__all__ = [
    "Gate",
    "GateCircuit",
    "GeneratorEvaluator",
    "NetEntry",
    "OutputDistribution",
    "ParitySpec",
    "PerturbedEvaluator",
    "QuantumGenerator",
    "TableEvaluator",
    "build_parity_qg",
    "choose_clamps",
    "circuit_unitary",
    "enumerate_net",
    "exact_distribution",
    "gate_unitary",
    "kl_divergence",
    "kl_threshold",
    "learn",
    "measure_step",
    "perturb",
    "prediction_error",
    "predictor_from_evaluator",
    "recover_set",
    "reference_noisy_parity",
    "sample",
    "sample_bound",
    "sample_many",
    "sequence_probability",
    "trace_basis_path",
    "validate",
    "verify_construction",
]

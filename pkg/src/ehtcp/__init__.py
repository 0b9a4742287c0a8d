"""Solver and class verifier for extended horizontal tensor complementarity problems."""

from .class_analysis import (
    ClassName,
    ClassVerdict,
    Status,
    Witness,
    componentwise_nondegenerate_witness,
    componentwise_r0_witness,
    falsify,
    injectivity_probe,
    odd_m_strong_witness,
    premise_residual,
    propagate_witness,
)
from .degree_lab import DegreeEstimate, DegreeRefused, estimate_degree, verify_lemma_degsame
from .problem_model import (
    CandidateSolution,
    EHTCPInstance,
    StackedMap,
    TensorTuple,
    check_lemma31,
    is_solution,
    residual_psi_A,
    residual_psi_d,
)
from .solvers import (
    Pattern,
    Side,
    SolutionSet,
    SolverOptions,
    continuation_solve,
    enumerate_patterns,
    semismooth_newton,
    solve_all,
    solve_pattern,
)
from .tensor_core import (
    Tensor,
    apply_power,
    elementwise_power,
    hadamard,
    identity_tensor,
    jacobian,
    min_map,
    real_root,
)
from .workbench import (
    InstanceFormatError,
    generate_instance,
    parse_instance,
    run_paper_suite,
    serialize_instance,
)

__version__ = "0.1.0"

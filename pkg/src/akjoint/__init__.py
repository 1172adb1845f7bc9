"""Joint measurement of qubit spin components by position-meter detectors.

Submodules: :mod:`~akjoint.effects` (effect algebra), :mod:`~akjoint.kernels`
and :mod:`~akjoint.montecarlo` (detector integrals), :mod:`~akjoint.two_detector`,
:mod:`~akjoint.fidelity`, :mod:`~akjoint.fermat`, :mod:`~akjoint.three_detector`
and the command-line driver :mod:`~akjoint.cli`.
"""

from __future__ import annotations

from ._version import __version__
from .effects import (
    Effect,
    JointObservable2,
    JointObservable3,
    UnsharpObservable,
    build_joint2,
    build_joint3,
    find_joint2_completion,
    is_valid_effect,
    jm_unbiased_ok,
    necessary_condition_3,
    observable_distance,
)
from .errors import (
    AkJointError,
    ConfigError,
    ConvergenceError,
    KernelBuildError,
    NumericalError,
    PreconditionError,
)
from .fermat import FTResult, ft_condition, ft_point, ft_vertices, max_common_scale
from .fidelity import fidelity_report
from .kernels import DetectorConfig, build_kernel_table2, build_kernel_table3, build_radial_table
from .montecarlo import MCEstimate, mc_direction3, mc_integrate3
from .three_detector import TripleMarginals, check_necessary, compute_triple, triple_povm
from .two_detector import (
    BlochState,
    compute_marginals,
    joint_povm,
    marginals_for,
    oblique_probabilities,
    post_state,
    sweep_marginals,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]

"""Energy-landscape control of excitation transfer in spin rings and chains.

Design time-invariant bias ("energy landscape") controllers that move or
hold single excitations in XX-coupled spin networks, evaluate their exact
spectral dynamics, and verify the eigenstructure and sensitivity
properties that characterize optimal controllers.
"""

from .analysis import (
    ConcordanceReport,
    SensitivityReport,
    SignatureReport,
    SuperoptimalityReport,
    ZeroSumReport,
    chain_peak_heuristic,
    check_signature,
    check_superoptimality,
    check_zero_sum,
    concordance,
    sensitivity_report,
    speed_limit,
)
from .dynamics import (
    EigenSystem,
    avg_fidelity,
    chain_transfer_peaks,
    eigensystem,
    fidelity,
    localization_objective,
    minimizing_phase,
    overlaps,
    propagator,
    tracking_error,
    transfer_amplitude,
)
from .errors import InsufficientDataError, NumericalError, RecordError, SpinscapeError
from .gradients import (
    PerturbationStructure,
    bias_structure,
    coupling_structure,
    grad_avg_fidelity,
    grad_fidelity_bias,
    grad_fidelity_time,
    sensitivity,
    sensitivity_avg,
)
from .network import (
    SpinNetwork,
    build_network,
    expand_symmetric_bias,
    orbit_indices,
    reflection_permutation,
    single_excitation_hamiltonian,
    symmetry_orbits,
)
from .optimizer import (
    Controller,
    ControllerSet,
    OptimizationConfig,
    TransferTask,
    fastest_above_threshold,
    initial_guesses,
    localize,
    maximize,
    refine,
    sweep_fixed_times,
)

__version__ = "0.1.0"
